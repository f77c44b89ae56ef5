"""Minimal-norm factorization of one operator through another.

Given matrices with nested ranges, the equation ``L2 @ x = L1`` has a unique
solution that simultaneously attains the minimal operator norm, shares its
kernel with L1, and has range inside the row space of L2. The distinguished
solution of ``T_W @ x = K`` drives the dual and resolution constructions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from kfusion.frames import BlockVector, FusionSystem, synthesis, verify_k_fusion
from kfusion.numerics import (
    DEFAULT_TOL,
    AgreementError,
    ToleranceProfile,
    as_matrix,
    max_rayleigh,
    null_basis,
    numerical_rank,
    pinv,
    spectral_norm,
)


@dataclass(frozen=True)
class DouglasSolution:
    """Canonical solution of ``L2 @ x = L1`` with its three certificates.

    ``norm_sq`` and ``alpha_inf`` realize the same quantity two independent
    ways (operator norm of x, and the smallest constant bounding
    ``L1 L1*`` by a multiple of ``L2 L2*``); they must agree.
    """

    x: np.ndarray
    norm_sq: float
    alpha_inf: float
    nullspace_match: bool
    range_containment: bool
    residual: float


@dataclass(frozen=True)
class XwSolution(DouglasSolution):
    """Distinguished solution of ``T_W @ x = K`` with per-member block access."""

    system: FusionSystem
    k: np.ndarray

    def blocks(self, f) -> BlockVector:
        """Direct-sum coefficients of the solution applied to an ambient vector."""
        f = np.asarray(f, dtype=float).reshape(-1)
        return BlockVector.from_stacked(self.x @ f, self.system.dims())

    def components(self, f) -> list:
        """Ambient member components of the solution applied to a vector."""
        coeff = self.blocks(f)
        return [
            sub.basis @ block
            for (sub, _), block in zip(self.system.members, coeff.blocks)
        ]

    def component_matrices(self) -> list:
        """Ambient matrices whose i-th entry maps f to the i-th component."""
        return [
            sub.basis @ self.x[sl, :]
            for (sub, _), sl in zip(self.system.members, self.system.block_slices())
        ]


def range_included(l1, l2, tol: ToleranceProfile = DEFAULT_TOL):
    """Whether the column space of L1 lies inside that of L2.

    Returns (included, witness); the witness is a column of L1 outside the
    range of L2 when inclusion fails, else None.
    """
    l1 = as_matrix(l1)
    l2 = as_matrix(l2)
    if l1.shape[0] != l2.shape[0]:
        raise ValueError("L1 and L2 must have the same number of rows")
    if numerical_rank(np.hstack([l2, l1]), tol) == numerical_rank(l2, tol):
        return True, None
    resid = l1 - l2 @ (pinv(l2, tol) @ l1)
    j = int(np.argmax(np.linalg.norm(resid, axis=0)))
    return False, l1[:, j]


def douglas_solve(l1, l2, tol: ToleranceProfile = DEFAULT_TOL) -> DouglasSolution:
    """Canonical minimal-norm solution of ``L2 @ x = L1``.

    Parameters
    ----------
    l1, l2 : array_like
        Matrices with the same row count and the range of L1 inside the
        range of L2.
    tol : ToleranceProfile
        Tolerance policy.

    Returns
    -------
    DouglasSolution
        ``x = pinv(L2) @ L1`` along with the squared norm, the infimum
        constant of the operator inequality, and the kernel/range
        certificates that pin the solution uniquely.

    Raises
    ------
    ValueError
        If the range inclusion fails.
    AgreementError
        If the factorization residual exceeds tolerance or the two norm
        computations disagree.
    """
    l1 = as_matrix(l1)
    l2 = as_matrix(l2)
    included, witness = range_included(l1, l2, tol)
    if not included:
        raise ValueError(
            f"range of L1 is not contained in range of L2; witness column {witness}"
        )
    x = pinv(l2, tol) @ l1
    scale = 1.0 + spectral_norm(l1)
    residual = spectral_norm(l2 @ x - l1)
    if residual > tol.eq_rel * scale:
        raise AgreementError(f"factorization residual {residual} exceeds tolerance")
    norm_sq = spectral_norm(x) ** 2
    alpha_inf = max_rayleigh(l1 @ l1.T, l2 @ l2.T, tol)
    if np.isinf(alpha_inf) or abs(norm_sq - alpha_inf) > tol.eq_rel * max(
        norm_sq, alpha_inf, 1.0
    ):
        raise AgreementError(
            f"norm-squared {norm_sq} and infimum constant {alpha_inf} disagree"
        )
    kernel_l1 = null_basis(l1, tol)
    kernel_contained = (
        kernel_l1.shape[1] == 0
        or spectral_norm(x @ kernel_l1) <= tol.eq_abs * (1.0 + spectral_norm(x))
    )
    nullspace_match = kernel_contained and numerical_rank(x, tol) == numerical_rank(l1, tol)
    range_containment, _ = range_included(x, l2.T, tol)
    return DouglasSolution(
        x=x,
        norm_sq=norm_sq,
        alpha_inf=alpha_inf,
        nullspace_match=bool(nullspace_match),
        range_containment=bool(range_containment),
        residual=residual,
    )


def x_w(w: FusionSystem, k, tol: ToleranceProfile = DEFAULT_TOL) -> XwSolution:
    """Distinguished solution of ``T_W @ x = K`` for a verified K-fusion frame.

    The reciprocal of its squared norm is the optimal lower frame bound; the
    per-member components give the building blocks for duals and
    resolutions.
    """
    k = as_matrix(k)
    cert = verify_k_fusion(w, k, tol)
    if not cert.passed:
        raise ValueError(f"system must be a K-fusion frame: {cert.message}")
    base = douglas_solve(k, synthesis(w), tol)
    return XwSolution(
        x=base.x,
        norm_sq=base.norm_sq,
        alpha_inf=base.alpha_inf,
        nullspace_match=base.nullspace_match,
        range_containment=base.range_containment,
        residual=base.residual,
        system=w,
        k=k,
    )
