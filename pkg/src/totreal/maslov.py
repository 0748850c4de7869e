"""Volume one-form of a totally real immersion, by two independent routes.

The primary route is the frame trace: contract the normal-projected ambient
derivative of an orthonormal tangent frame with the frame itself.  The
oracle route differentiates the unit canonical-bundle section along the
immersion with the Chern connection of the ambient chart.  The two use
disjoint intermediate quantities, so their agreement is a genuine check of
both discretisations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import trlinalg
from .errors import InvalidImmersion
from .immersion import GridImmersion, GridOneForm, GridVectorField, _payload


@dataclass(frozen=True)
class MaslovData:
    """Volume form data: xi in grid components, the mean curvature vector
    in ambient complex components, and the sup of the pointwise g-norm."""

    xi: GridOneForm
    hj: GridVectorField
    sup_norm: float


def _chern_connection_components(imm: GridImmersion) -> np.ndarray:
    """(1,0) connection form of the canonical bundle along the immersion.

    theta_k = -tr(m^{-1} d_k m); a holomorphic-frame potential for the
    ambient Ricci form.
    """
    jet = imm.chart.jet(imm.points, order=1)
    minv = np.linalg.inv(jet.m)
    return -np.einsum("...ab,...kba->...k", minv, jet.dm)


def covariant_frame_derivative(imm: GridImmersion, axis: int) -> np.ndarray:
    """Ambient covariant derivative of the orthonormal frame rows along an axis."""
    frames = imm.frames
    d_frames = imm.deriv(frames, axis, kind="ambient")
    gamma = imm.chart.christoffel(imm.points)
    t_axis = imm.tangents[..., axis, :]
    correction = np.einsum("...kij,...i,...mj->...mk", gamma, t_axis, frames)
    return d_frames + correction


def maslov_form(imm: GridImmersion) -> MaslovData:
    """Trace-formula volume one-form and the associated mean curvature.

    xi(T_a) = sum_i g(J pi_J (covariant d_a E_i), E_i) on the orthonormal
    frame E; the mean curvature field is -J applied to the pushforward of
    the g-sharp of xi.
    """
    if not isinstance(imm, GridImmersion):
        raise InvalidImmersion("expected a GridImmersion")
    m = imm.metric_field
    frames = imm.frames
    _, p_j = imm.projection_fields
    comps = []
    for a in range(imm.n):
        cov = covariant_frame_derivative(imm, a)
        cov_real = trlinalg.realify(cov)
        proj = np.einsum("...ij,...mj->...mi", p_j, cov_real)
        j_proj = 1j * trlinalg.complexify(proj)
        pairs = trlinalg.metric_pairing(j_proj, frames, m[..., None, :, :])
        comps.append(np.sum(pairs, axis=-1))
    xi = np.stack(comps, axis=-1)
    sharp = imm.raise_index(xi)
    hj = -1j * imm.push_tangent(sharp)
    sup = float(np.sqrt(np.max(imm.form_inner(xi, xi))))
    return MaslovData(xi=GridOneForm(xi), hj=GridVectorField(hj), sup_norm=sup)


def maslov_form_oracle(imm: GridImmersion) -> GridOneForm:
    """Volume one-form from the canonical-bundle connection.

    The immersion's unit canonical section has chart coefficient c; its
    covariant derivative along T_a is (d_a c + c theta(T_a)), and xi(T_a)
    is the imaginary part of the h-pairing with the section itself.
    """
    if not isinstance(imm, GridImmersion):
        raise InvalidImmersion("expected a GridImmersion")
    c = imm.canonical_coefficient
    theta = _chern_connection_components(imm)
    det_m = np.real(np.linalg.det(imm.metric_field))
    comps = []
    for a in range(imm.n):
        dc = imm.deriv(c, a, kind="canonical")
        conn = np.einsum("...k,...k->...", theta, imm.tangents[..., a, :])
        comps.append(np.imag((dc + c * conn) * np.conj(c)) / det_m)
    return GridOneForm(np.stack(comps, axis=-1))


def closedness_defect(imm: GridImmersion) -> float:
    """Sup norm of d(xi) minus the pulled-back ambient Ricci two-form."""
    if imm.n < 2:
        raise InvalidImmersion(
            "closedness is trivial on curves; need a torus of dimension >= 2"
        )
    d_xi = imm.d_one_form(maslov_form(imm).xi)
    ricci = imm.chart.ricci_two_form(imm.points)
    pulled = imm.pullback_two_form(ricci)
    return float(np.max(np.abs(d_xi - pulled)))


def loop_integrals(imm: GridImmersion, form) -> np.ndarray:
    """Periods of a grid one-form over the torus generator loops."""
    return imm.line_integrals(_payload(form))


def div_formula_check(imm: GridImmersion, x, step: float = 1e-4) -> float:
    """Defect of the normal-derivative identity for the canonical section.

    Deforming with velocity J iota_* X must rotate the unit canonical
    section at rate -i Div(rho X)/rho.  The left side is a two-sided finite
    difference in the deformation parameter plus the connection term; the
    right side is intrinsic divergence data.  Returns the sup discrepancy
    of the two rates.
    """
    x = _payload(x)
    velocity = 1j * imm.push_tangent(x)
    c_plus = imm.with_points(imm.points + step * velocity).canonical_coefficient
    c_minus = imm.with_points(imm.points - step * velocity).canonical_coefficient
    dc_ds = (c_plus - c_minus) / (2.0 * step)
    theta = _chern_connection_components(imm)
    conn = np.einsum("...k,...k->...", theta, velocity)
    c0 = imm.canonical_coefficient
    rate = (dc_ds + c0 * conn) / (1j * c0)
    div_term = imm.divergence(x, weight="J")
    return float(np.max(np.abs(rate + div_term)))
