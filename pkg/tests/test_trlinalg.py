"""Pointwise linear algebra: frames, projections, densities."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from totreal import trlinalg
from totreal.errors import NearComplexPlane
from totreal.trlinalg import (
    HermitianStructure,
    TangentFrame,
    canonical_coefficients,
    complex_structure_matrix,
    gram_matrix,
    hermitian_gram,
    lagrangian_defect_raw,
    orthonormalize,
    projection_matrices,
    realify,
    rho_from_frame,
)


def random_structure(rng, n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return a @ a.conj().T + n * np.eye(n)


def random_totally_real_frame(rng, n):
    # real-linear perturbations of the identity frame stay totally real
    while True:
        v = np.eye(n) + 0.35 * (
            rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        )
        if abs(np.linalg.det(v)) > 0.3:
            return v


def test_structure_validation():
    with pytest.raises(ValueError):
        HermitianStructure(np.array([[1.0, 2.0], [0.0, 1.0]], dtype=complex))
    with pytest.raises(ValueError):
        HermitianStructure(np.array([[-1.0 + 0j]]))
    s = HermitianStructure.flat(3)
    assert s.dimension == 3
    assert_allclose(s.matrix, np.eye(3))


def test_frame_validation():
    with pytest.raises(ValueError):
        TangentFrame(np.zeros((2, 3), dtype=complex))


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("seed", [0, 1])
def test_orthonormalize_is_metric_orthonormal(n, seed):
    rng = np.random.default_rng(seed)
    m = random_structure(rng, n)
    v = random_totally_real_frame(rng, n)
    e = orthonormalize(v, m)
    gram = gram_matrix(e, m)
    assert_allclose(np.real(gram), np.eye(n), atol=1e-12)
    # spans the same real plane: each v_a is a real combination of the e_b
    coeffs = np.linalg.lstsq(
        realify(e).T, realify(v).T, rcond=None
    )[0]
    assert_allclose(realify(e).T @ coeffs, realify(v).T, atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_projections_properties(n):
    rng = np.random.default_rng(7 + n)
    v = random_totally_real_frame(rng, n)
    p_l, p_j = projection_matrices(v)
    jmat = complex_structure_matrix(n)
    assert_allclose(p_l + p_j, np.eye(2 * n), atol=1e-12)
    assert_allclose(p_l @ p_l, p_l, atol=1e-12)
    assert_allclose(p_j @ p_j, p_j, atol=1e-12)
    # tangent vectors are fixed, their J-images go to the complementary factor
    for a in range(n):
        x = realify(v[a])
        assert_allclose(p_l @ x, x, atol=1e-12)
        assert_allclose(p_j @ (jmat @ x), jmat @ x, atol=1e-12)
    # J exchanges the two factors
    assert_allclose(jmat @ p_l, p_j @ jmat, atol=1e-12)


def test_near_complex_plane_raises():
    # second vector drifts into i * span of the first
    v = np.array([[1.0, 0.0], [1j, 1e-13]], dtype=complex)
    with pytest.raises(NearComplexPlane):
        projection_matrices(v)


@pytest.mark.parametrize("alpha", [0.0, 0.3, 1.0, 1.4])
def test_rho_tilted_plane_closed_form(alpha):
    # plane spanned by e1 and cos(a) e2 + sin(a) (i e1): rho = cos(a)
    v = np.array([[1.0, 0.0], [1j * np.sin(alpha), np.cos(alpha)]], dtype=complex)
    rho = rho_from_frame(v, np.eye(2, dtype=complex))
    assert_allclose(rho, np.cos(alpha), atol=1e-12)


def test_rho_independent_route_kahler_angles():
    # rho as the product of cos of the Kahler angles, computed from the
    # realified two-form restricted to a metric-orthonormal frame
    rng = np.random.default_rng(11)
    n = 3
    m = random_structure(rng, n)
    v = random_totally_real_frame(rng, n)
    e = orthonormalize(v, m)
    omega = -np.imag(gram_matrix(e, m))
    kappa = np.linalg.svd(omega, compute_uv=False)
    # each angle appears twice among the singular values of the restricted
    # two-form, so the product over pairs is the fourth root
    expected = np.prod(1.0 - kappa**2) ** 0.25
    assert_allclose(rho_from_frame(v, m), expected, rtol=1e-12)


def test_rho_invariance_under_frame_change():
    # rho depends on the plane, not the chosen frame: real GL(n) invariance
    rng = np.random.default_rng(5)
    n = 2
    m = random_structure(rng, n)
    v = random_totally_real_frame(rng, n)
    change = rng.standard_normal((n, n)) + 0.5 * np.eye(n)
    assert_allclose(
        rho_from_frame(change @ v, m), rho_from_frame(v, m), rtol=1e-12
    )


def test_rho_bounds_and_lagrangian_case():
    rng = np.random.default_rng(2)
    for n in (1, 2, 3):
        for _ in range(5):
            m = random_structure(rng, n)
            v = random_totally_real_frame(rng, n)
            rho = rho_from_frame(v, m)
            assert 0.0 < rho <= 1.0 + 1e-14
    # graph frames (I, i S) with S symmetric are Lagrangian in the flat chart
    s = rng.standard_normal((3, 3))
    s = 0.2 * (s + s.T)
    v = np.eye(3) + 1j * s
    assert_allclose(rho_from_frame(v, np.eye(3, dtype=complex)), 1.0, atol=1e-13)
    assert lagrangian_defect_raw(v, np.eye(3, dtype=complex)) < 1e-13


def test_canonical_coefficient_phase():
    # rotating the frame by e^{i beta} conjugate-rotates the phase twice
    m = np.eye(2, dtype=complex)
    v = np.eye(2, dtype=complex)
    base = canonical_coefficients(v, m)
    assert_allclose(base.coefficient, 1.0 + 0j, atol=1e-14)
    beta = 0.4
    rot = canonical_coefficients(np.exp(1j * beta) * v, m)
    assert_allclose(rot.coefficient, np.exp(-2j * beta), atol=1e-13)
    # value agrees with rho for unit-volume structures
    assert_allclose(rot.value, 1.0, atol=1e-13)


def test_canonical_value_matches_rho():
    rng = np.random.default_rng(3)
    n = 2
    m = random_structure(rng, n)
    v = random_totally_real_frame(rng, n)
    cv = canonical_coefficients(v, m)
    assert_allclose(cv.value, rho_from_frame(v, m), rtol=1e-12)
    assert_allclose(np.abs(cv.phase), 1.0, rtol=1e-13)


def test_wrapper_types_agree_with_raw():
    rng = np.random.default_rng(9)
    n = 2
    m = random_structure(rng, n)
    v = random_totally_real_frame(rng, n)
    frame = TangentFrame(v)
    structure = HermitianStructure(m)
    assert_allclose(hermitian_gram(frame, structure), gram_matrix(v, m))


def test_batched_shapes():
    rng = np.random.default_rng(4)
    m = np.broadcast_to(np.eye(2, dtype=complex), (5, 7, 2, 2))
    v = np.stack(
        [random_totally_real_frame(rng, 2) for _ in range(35)], axis=0
    ).reshape(5, 7, 2, 2)
    rho = rho_from_frame(v, m)
    assert rho.shape == (5, 7)
    p_l, p_j = projection_matrices(v)
    assert p_l.shape == (5, 7, 4, 4)
