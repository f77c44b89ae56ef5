import numpy as np
import pytest
from hypothesis import assume, given, seed, settings
from hypothesis import strategies as st

from kfusion.factorization import x_w
from kfusion.frames import (
    frame_operator,
    same_subspace,
    subspace_from_spanning,
    synthesis,
    verify_k_fusion,
)
from kfusion.numerics import numerical_rank, pinv, spectral_norm
from kfusion.resolution import (
    Resolution,
    frame_from_resolution,
    minimal_norm_check,
    pinv_via_xw,
    resolution_b,
    resolution_c,
    resolution_from_x,
    verify_resolution,
)

from conftest import make_system, random_fusion_system

E1, E2, E3 = np.eye(3)


def spanning_random(rng, n=3, dims=(2, 1, 2)):
    return random_fusion_system(rng, n, list(dims))


# --------------------------------------------------------------- verification


def test_trivial_resolution_bounds(r3_k):
    check = verify_resolution(Resolution((r3_k,), (1.0,)), r3_k)
    assert check.passed
    assert check.residual <= 1e-12
    np.testing.assert_allclose(check.upper, 2.0, atol=1e-12)
    np.testing.assert_allclose(check.lower, 1.0, atol=1e-12)


def test_doubled_weight_breaks_reconstruction(r3_k):
    check = verify_resolution(Resolution((r3_k,), (2.0,)), r3_k)
    assert not check.passed
    np.testing.assert_allclose(check.residual, 3.0 * np.sqrt(2.0), atol=1e-12)


def test_verify_resolution_shape_mismatch(r3_k):
    with pytest.raises(ValueError):
        verify_resolution(Resolution((np.eye(2),), (1.0,)), r3_k)


def test_resolution_type_validation():
    with pytest.raises(ValueError):
        Resolution((np.eye(2),), (1.0, 1.0))
    with pytest.raises(ValueError):
        Resolution((np.eye(2),), (0.0,))
    with pytest.raises(ValueError):
        Resolution((np.eye(2), np.eye(3)), (1.0, 1.0))


# --------------------------------------------------------------- construction


def test_resolution_from_x_identity_blocks():
    rng = np.random.default_rng(31)
    w = spanning_random(rng)
    r = resolution_from_x(w, np.eye(3), x_w(w, np.eye(3)))
    s_inv = pinv(frame_operator(w))
    for theta, (sub, weight) in zip(r.thetas, w.members):
        np.testing.assert_allclose(theta, weight * sub.projector() @ s_inv, atol=1e-10)
    np.testing.assert_allclose(r.weights, [np.sqrt(w_) for w_ in w.weights])
    assert verify_resolution(r, np.eye(3)).passed


def test_resolution_from_x_component_literals(r3_system, r3_k):
    r = resolution_from_x(r3_system, r3_k, x_w(r3_system, r3_k))
    expected = [
        np.array([[0.5, 0.0, 0.0], [0.5, 0.0, 0.0], [0.0, 0.5, 0.0]]),
        np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.5, 0.0]]),
        np.array([[0.5, 0.0, 0.0], [0.5, 0.0, 0.0], [0.0, 0.0, 0.0]]),
    ]
    for theta, want in zip(r.thetas, expected):
        np.testing.assert_allclose(theta, want, atol=1e-12)
    check = verify_resolution(r, r3_k)
    assert check.passed and check.lower > 0.0


def test_resolution_from_x_rejects_stale_solution(r3_system, r3_k):
    sol = x_w(r3_system, r3_k)
    with pytest.raises(ValueError):
        resolution_from_x(r3_system, 3.0 * r3_k, sol)


def test_projected_constructions_identity_case():
    rng = np.random.default_rng(37)
    w = spanning_random(rng)
    s_inv = pinv(frame_operator(w))
    rb = resolution_b(w, np.eye(3))
    rc = resolution_c(w, np.eye(3))
    for theta, (sub, _) in zip(rb.thetas, w.members):
        np.testing.assert_allclose(theta, sub.projector() @ s_inv, atol=1e-10)
    for theta, (sub, _) in zip(rc.thetas, w.members):
        np.testing.assert_allclose(theta, s_inv @ sub.projector(), atol=1e-10)
    assert verify_resolution(rb, np.eye(3)).passed
    assert verify_resolution(rc, np.eye(3)).passed


def test_projected_constructions_plane_line_system(r3_system, r3_k):
    for build in (resolution_b, resolution_c):
        check = verify_resolution(build(r3_system, r3_k), r3_k)
        assert check.passed
        assert check.lower > 0.0


def test_projected_constructions_rank_one_target(r3_system):
    k = np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    for build in (resolution_b, resolution_c):
        r = build(r3_system, k)
        assert verify_resolution(r, k).passed
        for theta in r.thetas:
            # every operator lands inside the line range(K)
            assert numerical_rank(np.hstack([theta, k])) == 1


def test_constructions_require_frame_condition():
    w = make_system(3, [[list(E1)]])
    for build in (resolution_b, resolution_c):
        with pytest.raises(ValueError):
            build(w, np.eye(3))


@seed(1)
@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 6))
def test_constructed_resolutions_pass_with_positive_lower(entropy, n):
    rng = np.random.default_rng(entropy)
    w = random_fusion_system(rng, n, [n - 1, n - 1])
    k = synthesis(w) @ rng.standard_normal((sum(w.dims()), n))
    sv = np.linalg.svd(k, compute_uv=False)
    assume(sv[0] > 1e-3 and sv[sv > 1e-12 * sv[0]].min() > 1e-6 * sv[0])
    for r in (
        resolution_from_x(w, k, x_w(w, k)),
        resolution_b(w, k),
        resolution_c(w, k),
    ):
        check = verify_resolution(r, k)
        assert check.passed
        assert check.lower > 0.0
        assert np.isfinite(check.upper)


# ------------------------------------------------------------ induced systems


def test_frame_from_trivial_resolution(r3_k):
    system, cert = frame_from_resolution(Resolution((r3_k,), (1.0,)), r3_k)
    assert same_subspace(
        system.members[0][0], subspace_from_spanning([E1 + E2, E3])
    )
    assert cert.passed


def test_frame_from_projected_resolution(r3_system, r3_k):
    system, cert = frame_from_resolution(resolution_b(r3_system, r3_k), r3_k)
    assert cert.passed


def test_frame_from_resolution_random():
    rng = np.random.default_rng(41)
    w = spanning_random(rng, 5, (3, 2, 4))
    k = synthesis(w) @ rng.standard_normal((sum(w.dims()), 5))
    system, cert = frame_from_resolution(resolution_c(w, k), k)
    assert cert.passed


def test_frame_from_resolution_rejects_bad_sum(r3_k):
    with pytest.raises(ValueError):
        frame_from_resolution(Resolution((r3_k,), (2.0,)), r3_k)


# ---------------------------------------------------------------- minimality


def test_minimal_norm_equality_for_distinguished_solution(r3_system, r3_k):
    r = resolution_from_x(r3_system, r3_k, x_w(r3_system, r3_k))
    report = minimal_norm_check(r3_system, r3_k, r)
    assert report.passed
    assert abs(report.plain_margin[0]) <= 1e-9
    assert abs(report.plain_margin[1]) <= 1e-9
    assert abs(report.centered_margin[0]) <= 1e-9


def test_minimal_norm_strict_for_shifted_solution(r3_system, r3_k):
    rng = np.random.default_rng(43)
    t = synthesis(r3_system)
    sol = x_w(r3_system, r3_k)
    shift = (np.eye(t.shape[1]) - pinv(t) @ t) @ rng.standard_normal((t.shape[1], 3))
    shifted = sol.x + shift
    thetas = tuple(
        sub.basis @ shifted[sl, :]
        for (sub, _), sl in zip(r3_system.members, r3_system.block_slices())
    )
    r = Resolution(thetas, tuple(np.sqrt(w_) for w_ in r3_system.weights))
    report = minimal_norm_check(r3_system, r3_k, r)
    assert report.passed
    assert report.plain_margin[0] >= -1e-9
    assert report.plain_margin[1] > 1e-3
    assert report.centered_margin[1] > 1e-3


def test_minimal_norm_rejects_range_violation(r3_system, r3_k):
    r = Resolution((r3_k, r3_k, r3_k), (1.0, 1.0, 1.0))
    with pytest.raises(ValueError):
        minimal_norm_check(r3_system, r3_k, r)


def test_minimal_norm_rejects_wrong_normalization():
    w = make_system(3, [[list(E1), list(E2), list(E3)]], weights=[2.0])
    with pytest.raises(ValueError):
        minimal_norm_check(w, np.eye(3), Resolution((np.eye(3),), (1.0,)))


# ------------------------------------------------------- pseudo-inverse route


def test_pinv_route_identity_target():
    rng = np.random.default_rng(47)
    w = spanning_random(rng)
    f = rng.standard_normal(3)
    blocks, report = pinv_via_xw(w, np.eye(3), f)
    assert report.matches_plain
    assert not report.projected
    oracle = pinv(synthesis(w)) @ f
    classical = synthesis(w).T @ pinv(frame_operator(w)) @ f
    np.testing.assert_allclose(oracle, classical, atol=1e-10)


def test_pinv_route_plane_line_system(r3_system, r3_k):
    rng = np.random.default_rng(53)
    f = r3_k @ rng.standard_normal(3)
    blocks, report = pinv_via_xw(r3_system, r3_k, f)
    assert report.matches_plain
    assert report.matches_weighted
    assert report.gap_plain <= 1e-10


def test_pinv_route_projects_orthogonal_input(r3_system, r3_k):
    with pytest.warns(UserWarning):
        blocks, report = pinv_via_xw(r3_system, r3_k, E1 - E2)
    assert report.projected
    assert blocks.norm() <= 1e-12


def test_pinv_route_diverges_for_oblique_member():
    # the minimal synthesis preimage is not minimal for the projected
    # equation once a member leans out of range(K)
    w = make_system(3, [[list(E1), list(E2)], [[0.0, 1.0, 1.0]]])
    k = np.diag([1.0, 1.0, 0.0])
    blocks, report = pinv_via_xw(w, k, E2)
    assert not report.matches_plain
    np.testing.assert_allclose(report.gap_plain, 1.0 / np.sqrt(3.0), atol=1e-12)
    oracle = pinv(np.diag([1.0, 1.0, 0.0]) @ synthesis(w)) @ E2
    np.testing.assert_allclose(np.linalg.norm(oracle) ** 2, 2.0 / 3.0, atol=1e-12)
