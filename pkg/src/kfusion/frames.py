"""Weighted subspace families and K-fusion frame verification.

Subspaces carry orthonormal bases; fusion systems pair them with positive
weights and expose the synthesis, analysis, and frame operators. Frame
conditions are certified with optimal bounds, and the standard constructions
(pseudo-inverse image, inverse-frame-operator image, invertible transforms,
range weakening, K-image) each return a new system with its certificate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from kfusion.numerics import (
    DEFAULT_TOL,
    AgreementError,
    ToleranceProfile,
    as_matrix,
    max_rayleigh,
    null_basis,
    numerical_rank,
    orthonormal_range,
    pinv,
    spectral_norm,
)


@dataclass(frozen=True)
class Subspace:
    """Subspace of R^n stored as an orthonormal column basis."""

    ambient_dim: int
    basis: np.ndarray

    def __post_init__(self) -> None:
        basis = as_matrix(self.basis)
        if basis.shape[0] != self.ambient_dim:
            raise ValueError("basis rows must equal the ambient dimension")
        gram = basis.T @ basis
        if not np.allclose(gram, np.eye(basis.shape[1]), atol=DEFAULT_TOL.eq_abs):
            raise ValueError("basis columns must be orthonormal")
        object.__setattr__(self, "basis", basis)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def is_zero(self) -> bool:
        return self.dim == 0

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T

    def project(self, f: np.ndarray) -> np.ndarray:
        return self.basis @ (self.basis.T @ f)


@dataclass(frozen=True)
class FusionSystem:
    """Ordered family of (subspace, positive weight) pairs in one ambient space."""

    ambient_dim: int
    members: tuple

    def __post_init__(self) -> None:
        members = tuple((sub, float(weight)) for sub, weight in self.members)
        for sub, weight in members:
            if sub.ambient_dim != self.ambient_dim:
                raise ValueError("all subspaces must share the ambient dimension")
            if weight <= 0.0:
                raise ValueError("weights must be strictly positive")
        object.__setattr__(self, "members", members)

    def __len__(self) -> int:
        return len(self.members)

    @property
    def subspaces(self) -> tuple:
        return tuple(sub for sub, _ in self.members)

    @property
    def weights(self) -> np.ndarray:
        return np.array([weight for _, weight in self.members])

    def dims(self) -> list:
        return [sub.dim for sub, _ in self.members]

    def block_slices(self) -> list:
        slices, start = [], 0
        for d in self.dims():
            slices.append(slice(start, start + d))
            start += d
        return slices

    def drop(self, j: int) -> "FusionSystem":
        kept = self.members[:j] + self.members[j + 1 :]
        return FusionSystem(self.ambient_dim, kept)


@dataclass(frozen=True)
class BlockVector:
    """Element of the direct sum of the member subspaces, in coefficients."""

    blocks: tuple

    def __post_init__(self) -> None:
        blocks = tuple(np.asarray(b, dtype=float).reshape(-1) for b in self.blocks)
        object.__setattr__(self, "blocks", blocks)

    @property
    def norm_squared(self) -> float:
        return float(sum(b @ b for b in self.blocks))

    def norm(self) -> float:
        return float(np.sqrt(self.norm_squared))

    def stacked(self) -> np.ndarray:
        if not self.blocks:
            return np.zeros(0)
        return np.concatenate(self.blocks)

    @classmethod
    def from_stacked(cls, stacked: np.ndarray, dims) -> "BlockVector":
        stacked = np.asarray(stacked, dtype=float).reshape(-1)
        if stacked.size != sum(dims):
            raise ValueError("stacked length must equal the total of block dims")
        out, start = [], 0
        for d in dims:
            out.append(stacked[start : start + d])
            start += d
        return cls(tuple(out))


@dataclass(frozen=True)
class FrameBounds:
    """Frame bound pair.

    The lower bound multiplies ``norm(K* f)**2`` while the upper multiplies
    ``norm(f)**2``, so for contractive K the optimal lower bound may
    legitimately exceed the upper one; only nonnegativity is enforced.
    """

    lower: float
    upper: float
    optimal: bool = False

    def __post_init__(self) -> None:
        if self.lower < 0.0 or self.upper < 0.0:
            raise ValueError("frame bounds must be nonnegative")


@dataclass(frozen=True)
class KFrame:
    """Finite family of ambient vectors."""

    ambient_dim: int
    vectors: tuple

    def __post_init__(self) -> None:
        vectors = tuple(np.asarray(v, dtype=float).reshape(-1) for v in self.vectors)
        for v in vectors:
            if v.size != self.ambient_dim:
                raise ValueError("all vectors must live in the ambient space")
            if not np.all(np.isfinite(v)):
                raise ValueError("vector entries must be finite")
        object.__setattr__(self, "vectors", vectors)

    @property
    def matrix(self) -> np.ndarray:
        if not self.vectors:
            return np.zeros((self.ambient_dim, 0))
        return np.column_stack(self.vectors)


@dataclass
class Certificate:
    """Outcome of a verification: pass flag, bounds when meaningful, witness on failure."""

    passed: bool
    bounds: FrameBounds = None
    witness: np.ndarray = None
    message: str = ""
    details: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ExactnessReport:
    """Per-index removability of fusion system members."""

    exact: bool
    removable: tuple
    certificates: tuple


def subspace_from_spanning(vectors, tol: ToleranceProfile = DEFAULT_TOL) -> Subspace:
    """Subspace spanned by the given ambient vectors.

    The dimension is the numerical rank of the stacked spanning set; an
    all-zero set yields the zero subspace (dim 0, flagged by ``is_zero``).
    """
    vectors = [np.asarray(v, dtype=float).reshape(-1) for v in vectors]
    if not vectors:
        raise ValueError("spanning set must be nonempty")
    stacked = np.column_stack(vectors)
    return Subspace(stacked.shape[0], orthonormal_range(stacked, tol))


def subspace_from_columns(m, tol: ToleranceProfile = DEFAULT_TOL) -> Subspace:
    """Column space of a matrix as a Subspace."""
    m = as_matrix(m)
    return Subspace(m.shape[0], orthonormal_range(m, tol))


def map_subspace(m, sub: Subspace, tol: ToleranceProfile = DEFAULT_TOL) -> Subspace:
    """Image of a subspace under a matrix."""
    return subspace_from_columns(as_matrix(m) @ sub.basis, tol)


def same_subspace(a: Subspace, b: Subspace, tol: ToleranceProfile = DEFAULT_TOL) -> bool:
    if a.dim != b.dim:
        return False
    if a.dim == 0:
        return True
    return numerical_rank(np.hstack([a.basis, b.basis]), tol) == a.dim


def subspace_contains(outer: Subspace, inner: Subspace, tol: ToleranceProfile = DEFAULT_TOL) -> bool:
    if inner.dim == 0:
        return True
    if inner.dim > outer.dim:
        return False
    return numerical_rank(np.hstack([outer.basis, inner.basis]), tol) == outer.dim


def subspace_intersection(a: Subspace, b: Subspace, tol: ToleranceProfile = DEFAULT_TOL) -> Subspace:
    """Intersection of two subspaces of the same ambient space."""
    if a.ambient_dim != b.ambient_dim:
        raise ValueError("ambient dimensions must match")
    n = a.ambient_dim
    eye = np.eye(n)
    stacked = np.vstack([eye - a.projector(), eye - b.projector()])
    return Subspace(n, null_basis(stacked, tol))


def orthogonal_complement(sub: Subspace, tol: ToleranceProfile = DEFAULT_TOL) -> Subspace:
    return Subspace(sub.ambient_dim, null_basis(sub.basis.T, tol))


def range_projector(m, tol: ToleranceProfile = DEFAULT_TOL) -> np.ndarray:
    """Orthogonal projector onto the column space of a matrix."""
    basis = orthonormal_range(m, tol)
    return basis @ basis.T


def synthesis(w: FusionSystem) -> np.ndarray:
    """Synthesis operator: block column matrix with i-th block ``weight_i * basis_i``.

    Applied to stacked direct-sum coefficients it returns the weighted sum
    of the member components; its transpose is the analysis operator.
    """
    blocks = [weight * sub.basis for sub, weight in w.members]
    if not blocks:
        return np.zeros((w.ambient_dim, 0))
    return np.hstack(blocks)


def analysis(w: FusionSystem, f) -> BlockVector:
    """Analysis coefficients: block i holds ``weight_i * basis_i.T @ f``."""
    f = np.asarray(f, dtype=float).reshape(-1)
    return BlockVector(tuple(weight * (sub.basis.T @ f) for sub, weight in w.members))


def frame_operator(w: FusionSystem) -> np.ndarray:
    """Frame operator: weighted sum of member projectors, symmetric PSD."""
    t = synthesis(w)
    return t @ t.T


def _worst_column_outside(m: np.ndarray, projector: np.ndarray):
    resid = m - projector @ m
    if m.shape[1] == 0:
        return 0.0, None
    norms = np.linalg.norm(resid, axis=0)
    j = int(np.argmax(norms))
    return float(norms[j]), j


def _lower_bounds_agree(a1: float, a2: float, tol: ToleranceProfile) -> bool:
    if np.isinf(a1) or np.isinf(a2):
        return np.isinf(a1) and np.isinf(a2)
    return abs(a1 - a2) <= tol.eq_rel * max(a1, a2, 1.0)


def verify_k_fusion(w: FusionSystem, k, tol: ToleranceProfile = DEFAULT_TOL) -> Certificate:
    """Certify the K-fusion frame condition with optimal bounds.

    Parameters
    ----------
    w : FusionSystem
        Candidate system.
    k : array_like
        Matrix with ``w.ambient_dim`` rows.
    tol : ToleranceProfile
        Tolerance policy.

    Returns
    -------
    Certificate
        On success, optimal bounds: upper is the frame operator norm, lower
        is the reciprocal of the largest Rayleigh quotient of K K* against
        the frame operator, cross-checked against the reciprocal squared
        norm of ``pinv(T_W) @ K``. On failure, a witness vector in the range
        of K that leaves the span of the system. The lower bound is
        ``inf`` when K = 0 (every positive constant works vacuously).

    Raises
    ------
    AgreementError
        If the two lower-bound computations disagree beyond ``eq_rel``.
    """
    k = as_matrix(k)
    if k.shape[0] != w.ambient_dim:
        raise ValueError("K must have ambient_dim rows")
    if any(sub.is_zero for sub, _ in w.members):
        warnings.warn("zero-dimensional members contribute nothing and are skipped")
    t = synthesis(w)
    s = t @ t.T
    upper = spectral_norm(s)
    gap, j = _worst_column_outside(k, range_projector(t, tol))
    if j is not None and gap > tol.eq_abs * (1.0 + spectral_norm(k)):
        return Certificate(
            passed=False,
            witness=k[:, j],
            message=f"range obstruction: column {j} of K leaves the span of the system",
        )
    ratio = max_rayleigh(k @ k.T, s, tol)
    if np.isinf(ratio):
        _, j = _worst_column_outside(k, range_projector(t, tol))
        return Certificate(
            passed=False,
            witness=None if j is None else k[:, j],
            message="no positive lower bound: the pencil is unbounded",
        )
    lower_pencil = np.inf if ratio == 0.0 else 1.0 / ratio
    x_norm = spectral_norm(pinv(t, tol) @ k)
    lower_pinv = np.inf if x_norm == 0.0 else x_norm**-2
    if not _lower_bounds_agree(lower_pencil, lower_pinv, tol):
        raise AgreementError(
            f"optimal lower bound mismatch: pencil {lower_pencil} vs pinv {lower_pinv}"
        )
    return Certificate(
        passed=True,
        bounds=FrameBounds(lower=lower_pencil, upper=upper, optimal=True),
        details={"lower_via_pencil": lower_pencil, "lower_via_pinv": lower_pinv},
    )


def is_minimal(w: FusionSystem, tol: ToleranceProfile = DEFAULT_TOL) -> bool:
    """True when each member meets the span of the others only at zero."""
    for i, (sub, _) in enumerate(w.members):
        if sub.is_zero:
            continue
        other_bases = [s.basis for j, (s, _) in enumerate(w.members) if j != i]
        if not other_bases:
            continue
        others = np.hstack(other_bases)
        others_rank = numerical_rank(others, tol)
        if others_rank == 0:
            continue
        joint_rank = numerical_rank(np.hstack([sub.basis, others]), tol)
        if sub.dim + others_rank > joint_rank:
            return False
    return True


def is_exact(w: FusionSystem, k, tol: ToleranceProfile = DEFAULT_TOL) -> ExactnessReport:
    """Removability of each member, given that the full system verifies."""
    base = verify_k_fusion(w, k, tol)
    if not base.passed:
        raise ValueError("system must verify as a K-fusion frame before exactness")
    removable, certificates = [], []
    for j in range(len(w)):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            cert = verify_k_fusion(w.drop(j), k, tol)
        removable.append(cert.passed)
        certificates.append(cert)
    return ExactnessReport(
        exact=not any(removable),
        removable=tuple(removable),
        certificates=tuple(certificates),
    )


def restricted_bounds(s, sub: Subspace, tol: ToleranceProfile = DEFAULT_TOL):
    """Extremal quadratic-form values of a PSD matrix on a subspace.

    Returns (lower, upper, complete) where complete means the form is
    positive definite on the subspace at the working rank cutoff.
    """
    s = as_matrix(s)
    if sub.dim == 0:
        return 0.0, 0.0, True
    gram = sub.basis.T @ s @ sub.basis
    vals = np.linalg.eigvalsh(0.5 * (gram + gram.T))
    complete = numerical_rank(gram, tol) == sub.dim
    return max(float(vals[0]), 0.0), max(float(vals[-1]), 0.0), complete


def transform_kdag(w: FusionSystem, k, tol: ToleranceProfile = DEFAULT_TOL):
    """Image system under the pseudo-inverse of K, certified on the row space of K.

    Members are the pseudo-inverse images of the originals with unchanged
    weights; the certificate carries fusion frame bounds relative to the
    row space of K (finite families are automatically Bessel, so no
    separate hypothesis check is needed).
    """
    k = as_matrix(k)
    if k.shape[0] != w.ambient_dim:
        raise ValueError("K must have ambient_dim rows")
    if numerical_rank(k, tol) == 0:
        raise ValueError("K must be nonzero")
    kd = pinv(k, tol)
    members = tuple((map_subspace(kd, sub, tol), weight) for sub, weight in w.members)
    image = FusionSystem(kd.shape[0], members)
    row_space = subspace_from_columns(k.T, tol)
    lower, upper, complete = restricted_bounds(frame_operator(image), row_space, tol)
    cert = Certificate(
        passed=complete,
        bounds=FrameBounds(lower=lower, upper=upper, optimal=True),
        message="fusion frame bounds relative to the row space of K",
    )
    return image, cert


def transform_sinv(w: FusionSystem, k, tol: ToleranceProfile = DEFAULT_TOL):
    """Image system under the inverse frame operator composed with projection.

    Applies ``pinv(S_W @ P)`` to each member, where P projects onto the
    range of K; this is the matrix realization of inverting the frame
    operator on the image of that range. Certified on the range of K.
    """
    base = verify_k_fusion(w, k, tol)
    if not base.passed:
        raise ValueError(f"system must be a K-fusion frame: {base.message}")
    k = as_matrix(k)
    s = frame_operator(w)
    inv_on_image = pinv(s @ range_projector(k, tol), tol)
    members = tuple((map_subspace(inv_on_image, sub, tol), weight) for sub, weight in w.members)
    image = FusionSystem(w.ambient_dim, members)
    col_space = subspace_from_columns(k, tol)
    lower, upper, complete = restricted_bounds(frame_operator(image), col_space, tol)
    cert = Certificate(
        passed=complete,
        bounds=FrameBounds(lower=lower, upper=upper, optimal=True),
        message="fusion frame bounds relative to the range of K",
    )
    return image, cert


def transform_q(w: FusionSystem, q, k, tol: ToleranceProfile = DEFAULT_TOL):
    """Image system under an invertible matrix, certified against Q K.

    When Q commutes with K within ``eq_abs`` the certificate also carries a
    K-fusion verification of the transformed system under ``k_fusion`` in
    its details.
    """
    q = as_matrix(q)
    k = as_matrix(k)
    n = w.ambient_dim
    if q.shape != (n, n):
        raise ValueError("Q must be square of the ambient dimension")
    if numerical_rank(q, tol) < n:
        raise ValueError("Q must be invertible")
    members = tuple((map_subspace(q, sub, tol), weight) for sub, weight in w.members)
    image = FusionSystem(n, members)
    cert = verify_k_fusion(image, q @ k, tol)
    if spectral_norm(k @ q - q @ k) <= tol.eq_abs:
        cert.details["k_fusion"] = verify_k_fusion(image, k, tol)
    return image, cert


def weaken_to_q(w: FusionSystem, k, q, tol: ToleranceProfile = DEFAULT_TOL) -> Certificate:
    """Certify the system against a weaker operator with included range.

    Requires the range of Q inside the range of K; the certified lower
    bound must dominate ``A / lambda**2`` where A is the optimal K-fusion
    lower bound and lambda**2 the largest Rayleigh quotient of Q Q*
    against K K*.
    """
    k = as_matrix(k)
    q = as_matrix(q)
    if k.shape[0] != w.ambient_dim or q.shape[0] != w.ambient_dim:
        raise ValueError("K and Q must have ambient_dim rows")
    gap, j = _worst_column_outside(q, range_projector(k, tol))
    if j is not None and gap > tol.eq_abs * (1.0 + spectral_norm(q)):
        return Certificate(
            passed=False,
            witness=q[:, j],
            message=f"range obstruction: column {j} of Q leaves the range of K",
        )
    base = verify_k_fusion(w, k, tol)
    if not base.passed:
        return Certificate(passed=False, message=f"not a K-fusion frame: {base.message}")
    lam_sq = max_rayleigh(q @ q.T, k @ k.T, tol)
    guaranteed = np.inf if lam_sq == 0.0 else base.bounds.lower / lam_sq
    qcert = verify_k_fusion(w, q, tol)
    if not qcert.passed:
        return Certificate(passed=False, witness=qcert.witness, message=qcert.message)
    achieved = qcert.bounds.lower
    if np.isinf(guaranteed):
        dominated = np.isinf(achieved)
    else:
        dominated = achieved >= guaranteed * (1.0 - tol.eq_rel)
    return Certificate(
        passed=bool(dominated),
        bounds=qcert.bounds,
        details={"lambda_squared": lam_sq, "guaranteed_lower": guaranteed},
    )


def k_image_frame(
    wrel: FusionSystem,
    k,
    tol: ToleranceProfile = DEFAULT_TOL,
    intersect_first: bool = False,
):
    """K-image of a fusion frame of the row space of K, with K-fusion certificate.

    With ``intersect_first`` the members are first replaced by their
    intersections with the row space, so any fusion frame of the whole
    space can be fed in.
    """
    k = as_matrix(k)
    if k.shape[0] != wrel.ambient_dim:
        raise ValueError("K must have ambient_dim rows")
    row_space = subspace_from_columns(k.T, tol)
    if intersect_first:
        members = tuple(
            (subspace_intersection(sub, row_space, tol), weight) for sub, weight in wrel.members
        )
        base = FusionSystem(wrel.ambient_dim, members)
    else:
        base = wrel
        row_proj = row_space.projector()
        for idx, (sub, _) in enumerate(base.members):
            gap, j = _worst_column_outside(sub.basis, row_proj)
            if j is not None and gap > tol.eq_abs:
                raise ValueError(f"member {idx} leaves the row space of K")
    lower, upper, complete = restricted_bounds(frame_operator(base), row_space, tol)
    if not complete or lower <= 0.0:
        raise ValueError("input system is not a fusion frame for the row space of K")
    members = tuple((map_subspace(k, sub, tol), weight) for sub, weight in base.members)
    image = FusionSystem(k.shape[0], members)
    cert = verify_k_fusion(image, k, tol)
    cert.details["input_bounds"] = FrameBounds(lower=lower, upper=upper, optimal=True)
    return image, cert


def verify_k_frame(f: KFrame, k, tol: ToleranceProfile = DEFAULT_TOL) -> Certificate:
    """Certify the discrete K-frame condition with optimal bounds."""
    k = as_matrix(k)
    if k.shape[0] != f.ambient_dim:
        raise ValueError("K must have ambient_dim rows")
    mat = f.matrix
    s_f = mat @ mat.T
    upper = spectral_norm(s_f)
    ratio = max_rayleigh(k @ k.T, s_f, tol)
    if np.isinf(ratio):
        kernel = null_basis(s_f, tol)
        scores = np.linalg.norm(k.T @ kernel, axis=0)
        witness = kernel[:, int(np.argmax(scores))] if kernel.shape[1] else None
        return Certificate(
            passed=False,
            witness=witness,
            message="no positive lower bound: some vector outside the family span meets K",
        )
    lower = np.inf if ratio == 0.0 else 1.0 / ratio
    return Certificate(passed=True, bounds=FrameBounds(lower=lower, upper=upper, optimal=True))
