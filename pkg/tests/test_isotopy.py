"""Form families, the pointwise transport solve, and the grid flow."""

import numpy as np
import pytest

import totreal as tr
from totreal import trlinalg
from totreal.errors import DegenerateForm, InvalidImmersion, LeftDomain
from totreal.immersion import GridImmersion, grid_angles
from totreal.isotopy import (
    FormFamily,
    exactness_defect,
    moser_flow,
    moser_vector_field,
    pullback_defect,
)


def fs_chart():
    return tr.FubiniStudyChart(2, 1.0)


def mixed_family(amp):
    return FormFamily(fs_chart(), tr.PolyPotential([(amp, (1, 0), (0, 1))]))


def cylinder_family():
    chart = tr.UpperHalfPlaneChart.cylinder(c=2.0, ell=3.0)
    pot = tr.CylinderPotential(3.0, radial_coef=0.3, angular_coef=0.2 + 0.1j)
    return FormFamily(chart, pot, "conformal", "ricci-form")


# --- the pointwise solve ---------------------------------------------------


def test_flat_line_solve_closed_form():
    # phi = Re(2i z) has gradient i, so the primitive rate is dx; against
    # dx^dy the transport field is the upward unit vector
    family = FormFamily(tr.FlatChart(1), tr.PolyPotential([(2j, (1,), (0,))]))
    rng = np.random.default_rng(0)
    pts = rng.standard_normal((6, 1)) + 1j * rng.standard_normal((6, 1))
    for t in (0.0, 0.4, 1.0):
        x = moser_vector_field(family, t, pts)
        assert np.max(np.abs(x - 1j)) < 1e-14


def solve_residual(family, t, pts):
    # components of form(X, .) are X^T W
    w = family.form_matrix(t, pts)
    a = family.alpha_dot(t, pts)
    xr = trlinalg.realify(moser_vector_field(family, t, pts))
    return np.max(np.abs(np.einsum("...j,...ji->...i", xr, w) + a))


def test_solve_residual_all_modes():
    rng = np.random.default_rng(7)
    poly = tr.PolyPotential([(0.05, (1, 0), (0, 1)), (0.03 + 0.02j, (2, 0), (0, 0))])
    pts2 = 0.5 * (rng.standard_normal((40, 2)) + 1j * rng.standard_normal((40, 2)))
    pts1 = 0.3 * rng.standard_normal((30, 1)) + 1j * (1.0 + 0.5 * rng.random((30, 1)))
    kahler = FormFamily(fs_chart(), poly, "potential", "kahler-form")
    ricci = FormFamily(fs_chart(), poly, "potential", "ricci-form")
    assert solve_residual(kahler, 0.4, pts2) < 1e-12
    assert solve_residual(ricci, 0.4, pts2) < 1e-12
    assert solve_residual(cylinder_family(), 0.2, pts1) < 1e-12


def test_degenerate_form_raises():
    # phi = -|z|^2 has mixed hessian -1, so the metric dies at t = 1/2
    family = FormFamily(tr.FlatChart(1), tr.PolyPotential([(-1.0, (1,), (1,))]))
    pts = np.array([[0.3 + 0.1j]])
    with pytest.raises(DegenerateForm):
        moser_vector_field(family, 0.5, pts)


def test_family_mode_validation():
    poly = tr.PolyPotential([(0.1, (1, 0), (0, 0))])
    with pytest.raises(ValueError):
        FormFamily(fs_chart(), poly, "conformal", "kahler-form")
    with pytest.raises(ValueError):
        FormFamily(fs_chart(), poly, "potential", "volume-form")
    with pytest.raises(ValueError):
        FormFamily(fs_chart(), poly, "spectral", "kahler-form")


# --- primitive-rate exactness ----------------------------------------------


def test_exactness_kahler_mode():
    # the metric path is linear in t, so the t-difference quotient is exact
    # and the two pullback routes agree to roundoff
    cl = tr.clifford_torus((1.0, 1.0), (32, 32), chart=fs_chart())
    fam = FormFamily(fs_chart(), tr.PolyPotential([(0.05, (1, 0), (0, 1))]))
    assert exactness_defect(fam, cl, 0.3) < 1e-12


def test_exactness_ricci_mode_stencil_order():
    poly = tr.PolyPotential([(0.05, (1, 0), (0, 1)), (0.03 + 0.02j, (2, 0), (0, 0))])
    fam = FormFamily(fs_chart(), poly, "potential", "ricci-form")
    coarse = exactness_defect(
        fam, tr.clifford_torus((1.0, 1.0), (32, 32), chart=fs_chart()), 0.3
    )
    fine = exactness_defect(
        fam, tr.clifford_torus((1.0, 1.0), (48, 48), chart=fs_chart()), 0.3
    )
    assert coarse < 5e-5
    assert fine < 1e-5
    # fourth-order stencils dominate at small dt: (48/32)^4 = 5.06
    assert coarse / fine > 3.5


def test_exactness_ricci_mode_dt_order():
    # the Ricci potential is nonlinear in t, so a large t-step exposes the
    # quadratic sampling term
    poly = tr.PolyPotential([(0.05, (1, 0), (0, 1)), (0.03 + 0.02j, (2, 0), (0, 0))])
    fam = FormFamily(fs_chart(), poly, "potential", "ricci-form")
    cl = tr.clifford_torus((1.0, 1.0), (48, 48), chart=fs_chart())
    small = exactness_defect(fam, cl, 0.3, dt=0.15)
    large = exactness_defect(fam, cl, 0.3, dt=0.30)
    assert 3.2 < large / small < 4.8


def test_exactness_curve_vacuous():
    # on a curve every two-form vanishes, so both routes are identically zero
    geo = tr.core_geodesic(c=2.0, ell=3.0, resolution=64)
    assert exactness_defect(cylinder_family(), geo, 0.2) == 0.0


# --- the flow ---------------------------------------------------------------


def test_constant_family_is_identity():
    cl = tr.clifford_torus((1.0, 1.0), (32, 32), chart=fs_chart())
    fam = FormFamily(fs_chart(), tr.PolyPotential([(0.0, (1, 0), (0, 0))]))
    res = moser_flow(cl, fam, t_end=1.0, steps=5)
    assert np.array_equal(res.immersion.points, cl.points)
    assert np.max(res.transport_drift) == 0.0


def test_flat_translation_family():
    # constant primitive rate against the constant flat form: a rigid slide
    flat2 = tr.FlatChart(2)
    cl = tr.clifford_torus((1.0, 1.0), (32, 32), chart=flat2)
    fam = FormFamily(flat2, tr.PolyPotential([(0.4, (1, 0), (0, 0))]))
    res = moser_flow(cl, fam, t_end=1.0, steps=10)
    moved = np.abs(res.immersion.points - cl.points)
    assert abs(np.max(moved) - 0.2) < 1e-10
    assert np.max(res.transport_drift) == 0.0
    assert np.max(res.grid_defect_trace) == 0.0


def test_flat_flow_conservation_is_fourth_order():
    flat2 = tr.FlatChart(2)
    cl = tr.clifford_torus((1.0, 1.0), (32, 32), chart=flat2)
    fam = FormFamily(flat2, tr.PolyPotential([(0.1, (1, 0), (0, 1))]))
    coarse = moser_flow(cl, fam, t_end=1.0, steps=25)
    fine = moser_flow(cl, fam, t_end=1.0, steps=50)
    dc = np.max(coarse.transport_drift)
    df = np.max(fine.transport_drift)
    assert df < 5e-14
    assert 12.0 < dc / df < 20.0


def test_projective_clifford_flow():
    cl = tr.clifford_torus((1.0, 1.0), (32, 32), chart=fs_chart())
    fam = mixed_family(0.02)
    assert pullback_defect(fam, cl, 0.0) < 1e-12
    coarse = moser_flow(cl, fam, t_end=1.0, steps=25)
    fine = moser_flow(cl, fam, t_end=1.0, steps=50)
    # transported frames keep the pullback at its conserved value to RK4
    # accuracy; the rediscretised trace carries the resolution floor
    assert np.max(fine.defect_trace) < 1e-12
    assert np.max(fine.grid_defect_trace) < 2e-5
    ratio = np.max(coarse.transport_drift) / np.max(fine.transport_drift)
    assert ratio > 14.0


def test_cylinder_ricci_flow_curve():
    geo = tr.core_geodesic(c=2.0, ell=3.0, resolution=64)
    res = moser_flow(geo, cylinder_family(), t_end=1.0, steps=20)
    # one-dimensional pullbacks are vacuously Lagrangian
    assert np.max(res.defect_trace) < 1e-15
    assert np.max(res.grid_defect_trace) < 1e-15
    # the curve genuinely moves, stays in the chart, and lands in the
    # end-of-path geometry
    assert np.max(np.abs(res.immersion.points - geo.points)) > 0.5
    assert np.min(np.imag(res.immersion.points)) > 0.0
    assert res.immersion.chart.t == 1.0
    assert res.immersion.rho.shape == res.immersion.grid_shape


def test_flow_rejects_non_lagrangian_start():
    rt = tr.random_torus(seed=3, resolution=(24, 24))
    fam = FormFamily(tr.FlatChart(2), tr.PolyPotential([(0.1, (1, 0), (0, 0))]))
    with pytest.raises(InvalidImmersion):
        moser_flow(rt, fam, steps=2)


def test_flow_reports_leaving_domain():
    uhp = tr.UpperHalfPlaneChart(c=1.0)
    (theta,) = grid_angles((32,))
    circle = GridImmersion(uhp, (1j + 0.3 * np.exp(1j * theta))[..., None], name="circle")
    # phi = Re(-2i z) pushes the circle down through the real axis once the
    # oversized step overshoots
    fam = FormFamily(uhp, tr.PolyPotential([(-2j, (1,), (0,))]))
    with pytest.raises(LeftDomain):
        moser_flow(circle, fam, t_end=40.0, steps=2)
