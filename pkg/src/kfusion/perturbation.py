"""Stability of K-fusion frames under member and weight perturbations.

Covers the three-parameter perturbation certificate, the tight analysis
epsilon of a member-wise deviation, the predicted frame bounds of a
perturbed system, approximate dual reconstruction norms, and the epsilon
threshold guaranteeing that duals of the original system stay approximate
duals of the perturbed one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from kfusion.duality import DualCertificate, inverse_on_image, k_dual_reconstruction
from kfusion.frames import (
    Certificate,
    FrameBounds,
    FusionSystem,
    range_projector,
    verify_k_fusion,
)
from kfusion.numerics import (
    DEFAULT_TOL,
    AgreementError,
    ToleranceProfile,
    as_matrix,
    max_rayleigh,
    spectral_norm,
    svd,
)

FALSIFIER_SAMPLES = 10_000


def _member_deltas(w: FusionSystem, z: FusionSystem):
    return [
        w_weight * w_sub.projector() - z_weight * z_sub.projector()
        for (w_sub, w_weight), (z_sub, z_weight) in zip(w.members, z.members)
    ]


def analysis_epsilon(
    w: FusionSystem, z: FusionSystem, k, tol: ToleranceProfile = DEFAULT_TOL
) -> float:
    """Smallest epsilon with ``||(T_W* - T_Z*) f|| <= eps ||K* f||`` for all f.

    The difference acts in ambient coordinates, one weighted projector gap
    per member, so the systems only need matching member counts. Returns
    infinity when the difference moves some vector that the adjoint of K
    kills.
    """
    if len(w) != len(z) or w.ambient_dim != z.ambient_dim:
        raise ValueError("systems must have matching layout")
    k = as_matrix(k)
    gram = sum(d.T @ d for d in _member_deltas(w, z))
    gram = 0.5 * (gram + gram.T)
    ratio = max_rayleigh(gram, k @ k.T, tol)
    return float(np.sqrt(ratio)) if np.isfinite(ratio) else np.inf


@dataclass
class PerturbationReport:
    """Outcome of the three-parameter perturbation check."""

    lambda1: float
    lambda2: float
    epsilon: float
    epsilon_threshold: float
    predicted_bounds: FrameBounds
    actual_bounds: FrameBounds
    certified: bool
    falsified_witness: np.ndarray = None
    decided_by: str = "undecided"
    applicable: bool = False


def certify_perturbation(
    w: FusionSystem,
    z: FusionSystem,
    k,
    lambda1: float,
    lambda2: float,
    epsilon: float,
    tol: ToleranceProfile = DEFAULT_TOL,
    seed: int = 0,
    samples: int = FALSIFIER_SAMPLES,
) -> PerturbationReport:
    """Decide the member-wise perturbation hypothesis and report frame bounds.

    The hypothesis bounds each weighted projector gap by a combination of
    the two member norms and ``epsilon`` times the adjoint action of K. It
    quantifies over all vectors, so the decision runs in two phases: a
    conservative sufficient certificate (the gap vanishes off range(K) and
    is dominated on it by epsilon times the smallest nonzero singular
    value of K), then a seeded randomized falsifier over unit vectors.
    When the hypothesis is certified and epsilon clears the applicability
    threshold, the predicted bounds must be dominated by the verified
    bounds of the perturbed system.
    """
    if not (0.0 < lambda1 < 1.0 and 0.0 < lambda2 < 1.0):
        raise ValueError("lambda parameters must lie strictly between 0 and 1")
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if len(w) != len(z) or w.ambient_dim != z.ambient_dim:
        raise ValueError("systems must have matching layout")
    k = as_matrix(k)
    base = verify_k_fusion(w, k, tol)
    if not base.passed:
        raise ValueError(f"base system must be a K-fusion frame: {base.message}")
    deltas = _member_deltas(w, z)
    p_r = range_projector(k, tol)
    ambient = np.eye(w.ambient_dim)
    sv = svd(k.T).singular_values
    positive = sv[sv > tol.rank_rel * (sv[0] if sv.size else 0.0)]
    sigma_min = float(positive[-1]) if positive.size else 0.0

    certified = True
    for delta, weight in zip(deltas, w.weights):
        outside = spectral_norm(delta @ (ambient - p_r))
        inside = spectral_norm(delta @ p_r)
        if outside > tol.eq_abs or inside > epsilon * weight * sigma_min + tol.eq_abs:
            certified = False
            break
    decided_by = "certificate" if certified else "undecided"

    witness = None
    if not certified:
        rng = np.random.default_rng(seed)
        k_t = k.T
        z_projs = [zw * zs.projector() for zs, zw in z.members]
        w_projs = [ww * ws.projector() for ws, ww in w.members]
        for delta, w_proj, z_proj, weight in zip(deltas, w_projs, z_projs, w.weights):
            f = rng.standard_normal((w.ambient_dim, samples))
            f /= np.linalg.norm(f, axis=0)
            lhs = np.linalg.norm(delta @ f, axis=0)
            rhs = (
                lambda1 * np.linalg.norm(w_proj @ f, axis=0)
                + lambda2 * np.linalg.norm(z_proj @ f, axis=0)
                + epsilon * weight * np.linalg.norm(k_t @ f, axis=0)
            )
            bad = lhs > rhs * (1.0 + tol.eq_rel) + tol.eq_abs
            if bad.any():
                witness = f[:, int(np.argmax(bad))].copy()
                decided_by = "falsifier"
                break
        # no violation found leaves the hypothesis undecided: the
        # sufficient test is conservative and the sampler is not a proof

    weight_mass = float(np.sqrt(sum(w_**2 for w_ in w.weights)))
    k_norm = spectral_norm(k)
    sqrt_a = float(np.sqrt(base.bounds.lower))
    sqrt_b = float(np.sqrt(base.bounds.upper))
    threshold = (
        (1.0 - lambda1) * sqrt_a / (k_norm * weight_mass)
        if k_norm * weight_mass > 0.0
        else np.inf
    )
    low_core = (1.0 - lambda1) * sqrt_a - epsilon * k_norm * weight_mass
    predicted = FrameBounds(
        lower=max(low_core, 0.0) ** 2 / (1.0 + lambda2) ** 2,
        upper=((1.0 + lambda1) * sqrt_b + epsilon * k_norm * weight_mass) ** 2
        / (1.0 - lambda2) ** 2,
        optimal=False,
    )
    actual = verify_k_fusion(z, k, tol)
    applicable = bool(certified and epsilon < threshold)
    if applicable:
        if not actual.passed:
            raise AgreementError("certified perturbation failed frame verification")
        slack = tol.eq_rel * (1.0 + predicted.upper)
        if (
            actual.bounds.lower < predicted.lower - slack
            or actual.bounds.upper > predicted.upper + slack
        ):
            raise AgreementError("verified bounds escape the predicted window")
    return PerturbationReport(
        lambda1=lambda1,
        lambda2=lambda2,
        epsilon=epsilon,
        epsilon_threshold=float(threshold),
        predicted_bounds=predicted,
        actual_bounds=actual.bounds,
        certified=certified,
        falsified_witness=witness,
        decided_by=decided_by,
        applicable=applicable,
    )


def perturbed_bounds(
    w: FusionSystem, z: FusionSystem, k, epsilon: float, tol: ToleranceProfile = DEFAULT_TOL
):
    """Predicted frame bounds of an epsilon-perturbed system.

    Predictions square the shifted roots of the base bounds. Returns the
    predicted bounds and a certificate carrying the verified bounds of the
    perturbed system; when the supplied epsilon really dominates the
    analysis deviation, the verified bounds must respect the prediction.
    """
    k = as_matrix(k)
    base = verify_k_fusion(w, k, tol)
    if not base.passed:
        raise ValueError(f"base system must be a K-fusion frame: {base.message}")
    sqrt_a = float(np.sqrt(base.bounds.lower))
    if not 0.0 <= epsilon < sqrt_a:
        raise ValueError("epsilon must lie in [0, sqrt(A))")
    predicted = FrameBounds(
        lower=(sqrt_a - epsilon) ** 2,
        upper=(np.sqrt(base.bounds.upper) + epsilon * spectral_norm(k)) ** 2,
        optimal=False,
    )
    actual = verify_k_fusion(z, k, tol)
    slack = tol.eq_rel * (1.0 + predicted.upper)
    dominated = bool(
        actual.passed
        and actual.bounds.lower >= predicted.lower - slack
        and actual.bounds.upper <= predicted.upper + slack
    )
    eps_star = analysis_epsilon(w, z, k, tol)
    hypothesis_holds = bool(eps_star <= epsilon * (1.0 + tol.eq_rel) + tol.eq_abs)
    if hypothesis_holds and not dominated:
        raise AgreementError("perturbed bounds escape the predicted window")
    cert = Certificate(
        passed=dominated,
        bounds=actual.bounds,
        message="verified bounds against perturbation prediction",
        details={"analysis_epsilon": eps_star, "hypothesis_holds": hypothesis_holds},
    )
    return predicted, cert


def approximate_dual_norm(
    z: FusionSystem, v: FusionSystem, k, tol: ToleranceProfile = DEFAULT_TOL
) -> DualCertificate:
    """Distance of the dual reconstruction through Z from K; passes below one."""
    k = as_matrix(k)
    recon, _ = k_dual_reconstruction(z, v, k, tol)
    residual = spectral_norm(recon - k)
    return DualCertificate(
        kind="approximate", residual=residual, passed=bool(residual < 1.0)
    )


@dataclass(frozen=True)
class ThresholdReport:
    """Epsilon threshold under which duals survive the perturbation."""

    threshold: float
    deviation: float
    dual_norm: float
    second_term: float
    vacuous: bool


def epsilon_threshold(
    w: FusionSystem, z: FusionSystem, k, tol: ToleranceProfile = DEFAULT_TOL
) -> ThresholdReport:
    """Largest epsilon keeping K-duals of the base system approximately dual.

    Evaluates the minimum of the root of the base lower bound and the
    ratio built from the inverse-frame-operator deviation between the two
    systems. A nonpositive numerator makes the guarantee vacuous for the
    pair; that is reported rather than raised.
    """
    k = as_matrix(k)
    base = verify_k_fusion(w, k, tol)
    if not base.passed:
        raise ValueError(f"base system must be a K-fusion frame: {base.message}")
    other = verify_k_fusion(z, k, tol)
    if not other.passed:
        raise ValueError(f"perturbed system must be a K-fusion frame: {other.message}")
    inv_w = inverse_on_image(w, k, tol)
    inv_z = inverse_on_image(z, k, tol)
    deviation = spectral_norm((inv_w.T - inv_z.T) @ k)
    dual_norm = spectral_norm(inv_z.T @ k)
    numerator = 0.5 - deviation**2 * base.bounds.upper
    denominator = dual_norm**2 * spectral_norm(k) ** 2
    vacuous = bool(numerator <= 0.0)
    second = numerator / denominator if denominator > 0.0 else np.inf
    threshold = min(float(np.sqrt(base.bounds.lower)), float(second))
    return ThresholdReport(
        threshold=threshold,
        deviation=deviation,
        dual_norm=dual_norm,
        second_term=float(second),
        vacuous=vacuous,
    )
