"""Scalar volume-form residual, Newton solves, and parameter continuation.

The unknown is a grid scalar f; moving the base immersion by the one-form
df and integrating the volume one-form of the moved immersion back to a
zero-mean potential gives a map whose zeros are exactly the J-minimal
immersions reachable in the df chart.  Newton on that map, stepped along a
chart family, realises persistence; random restarts inside a certified
radius probe local uniqueness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ContinuationStalled,
    NewtonDiverged,
    NotCritical,
    NotExact,
    SingularJacobian,
    StepFailed,
)
from .immersion import GridImmersion
from .isotopy import FormFamily
from .linearize import operator_Ltilde, spectrum, weinstein_immersion
from .maslov import loop_integrals, maslov_form

DEFAULT_EXACTNESS_TOL = 1e-6
DEFAULT_NEWTON_TOL = 1e-11
DEFAULT_CERTIFICATE_TOL = 1e-8
DEFAULT_CRITICAL_TOL = 1e-4
MIN_JACOBIAN_EIGENVALUE = 1e-6

# Loop integrals of the volume one-form over a non-critical configuration in
# a perturbed chart are genuinely O(perturbation), not discretization noise:
# they only vanish at solutions.  Newton iterates therefore gate at half the
# phase-winding quantum 2 pi, which still rejects immersions whose class is
# topologically non-exact, and the solution certificate enforces tightness.
TOPOLOGICAL_LOOP_GATE = float(np.pi)

__all__ = [
    "ContinuationProblem",
    "ContinuationReport",
    "NewtonTrace",
    "StepRecord",
    "UniquenessReport",
    "continue_family",
    "l2_norm",
    "newton_solve",
    "scalar_maslov",
    "uniqueness_probe",
]


def l2_norm(imm: GridImmersion, f: np.ndarray) -> float:
    """Norm of a grid scalar against the J-volume measure."""
    f = np.asarray(f, dtype=float)
    return float(np.sqrt(imm.integrate(f * f, weight="J")))


def _antiderivative(values: np.ndarray, axis: int) -> np.ndarray:
    """Cumulative integral from node 0 of a 2pi-periodic sampled function.

    Integrates the trigonometric interpolant, so the only error against the
    underlying smooth function is aliasing.  The mean ramp is dropped: the
    caller guarantees near-zero loop integrals, and the result must stay
    periodic for the seam-aware derivative.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[axis]
    coeffs = np.fft.fft(values, axis=axis)
    wave = np.fft.fftfreq(n, d=1.0 / n)
    wave[0] = 1.0  # placeholder divisor; the mean slot is zeroed below
    shape = [1] * values.ndim
    shape[axis] = n
    spectral = coeffs / (1j * wave.reshape(shape))
    mean_slot = [slice(None)] * values.ndim
    mean_slot[axis] = slice(0, 1)
    spectral[tuple(mean_slot)] = 0.0
    prim = np.real(np.fft.ifft(spectral, axis=axis))
    base = [slice(None)] * values.ndim
    base[axis] = slice(0, 1)
    return prim - prim[tuple(base)]


def _staircase_potential(comps: np.ndarray) -> np.ndarray:
    """Integrate a one-form along axis-ordered paths from grid index 0.

    The path for a target node walks axis 0 first (later indices held at 0),
    then axis 1, and so on; each segment integrates the matching component.
    """
    n_axes = comps.shape[-1]
    u = np.zeros(comps.shape[:-1])
    for a in range(n_axes):
        seg = comps[..., a]
        sl = [slice(None)] * seg.ndim
        for b in range(a + 1, n_axes):
            sl[b] = slice(0, 1)
        u = u + _antiderivative(seg[tuple(sl)], axis=a)
    return u


def _residual_pair(imm, f, exactness_tol):
    f = np.asarray(f, dtype=float)
    moved = weinstein_immersion(imm, imm.d_scalar(f))
    data = maslov_form(moved)
    loops = loop_integrals(moved, data.xi)
    loop_sup = float(np.max(np.abs(loops)))
    if loop_sup > exactness_tol:
        raise NotExact(
            f"volume one-form has loop integrals up to {loop_sup:.3e} "
            f"(tolerance {exactness_tol:.1e}); the potential is path-dependent"
        )
    u = _staircase_potential(data.xi.data)
    u = u - moved.integrate(u, weight="J") / moved.integrate(
        np.ones_like(u), weight="J"
    )
    return u, moved, data, loop_sup


def scalar_maslov(
    imm: GridImmersion, f: np.ndarray, exactness_tol: float = DEFAULT_EXACTNESS_TOL
) -> np.ndarray:
    """Zero-mean potential of the volume one-form at the df-moved immersion.

    Raises NotExact when the loop integrals exceed the tolerance, since the
    staircase potential is only path-independent for (numerically) exact
    forms.
    """
    return _residual_pair(imm, f, exactness_tol)[0]


# --- Newton ------------------------------------------------------------------


@dataclass(frozen=True)
class NewtonTrace:
    """Residual history of one Newton solve plus quadratic diagnostics."""

    residuals: np.ndarray
    ratios: np.ndarray  # r_{k+1} / r_k^2 for consecutive contracting pairs
    converged: bool

    @property
    def iterations(self) -> int:
        return len(self.residuals) - 1


@dataclass(frozen=True)
class StepRecord:
    """Accepted solve at one parameter value with its certificates."""

    t: float
    trace: NewtonTrace
    f: np.ndarray
    immersion: GridImmersion
    sup_xi: float
    loop_sup: float
    lagrangian_defect: float


@dataclass(frozen=True)
class ContinuationProblem:
    """A family of ambient geometries with a J-minimal start.

    The base immersion is the fixed anchor: every iterate is reached from it
    by a df move inside the chart at the current parameter, so the scalar
    unknown is comparable across the whole run (which is what the
    forward-backward uniqueness check measures).
    """

    base: GridImmersion
    family: FormFamily
    steps: int = 10
    newton_tol: float = DEFAULT_NEWTON_TOL
    certificate_tol: float = DEFAULT_CERTIFICATE_TOL
    iterate_loop_gate: float = TOPOLOGICAL_LOOP_GATE
    critical_tol: float = DEFAULT_CRITICAL_TOL
    max_iterations: int = 12
    min_step: float = 1e-3
    kernel_fields: tuple = ()
    use_base_jacobian: bool = False

    def anchor_at(self, t: float) -> GridImmersion:
        chart = self.family.chart_at(t)
        return GridImmersion(
            chart, self.base.points, self.base.twists, name=f"{self.base.name}@t={t:g}"
        )


@dataclass(frozen=True)
class ContinuationReport:
    """Accepted steps of a continuation run."""

    records: list
    f: np.ndarray
    immersion: GridImmersion

    @property
    def times(self) -> np.ndarray:
        return np.array([rec.t for rec in self.records])


def _orthonormal_fields(imm, fields):
    basis = []
    for raw in fields:
        v = np.asarray(raw, dtype=float)
        v = v - imm.integrate(v, weight="J") / imm.integrate(
            np.ones_like(v), weight="J"
        )
        for b in basis:
            v = v - imm.integrate(v * b, weight="J") * b
        norm = l2_norm(imm, v)
        if norm > 1e-12:
            basis.append(v / norm)
    return basis


def _project_out(imm, basis, f):
    for b in basis:
        f = f - imm.integrate(f * b, weight="J") * b
    return f


def _quadratic_ratios(residuals: np.ndarray) -> np.ndarray:
    # only pairs inside the contraction window rate a ratio: a successor at
    # the roundoff floor says nothing about the quadratic constant
    out = []
    for a, b in zip(residuals[:-1], residuals[1:]):
        if 1e-6 <= a <= 1e-2 and 1e-13 <= b < a:
            out.append(b / (a * a))
    return np.array(out)


def _newton(
    anchor: GridImmersion,
    f0: np.ndarray,
    newton_tol: float,
    max_iterations: int,
    loop_gate: float = TOPOLOGICAL_LOOP_GATE,
    kernel_fields: tuple = (),
    use_base_jacobian: bool = False,
) -> tuple[NewtonTrace, np.ndarray, GridImmersion, object, float]:
    def degauge(g):
        # the moved curve only sees df, so the scalar is pinned to zero
        # mean against the anchor volume
        return g - anchor.integrate(g, weight="J") / anchor_volume

    anchor_volume = anchor.integrate(np.ones(anchor.grid_shape), weight="J")
    f = degauge(np.array(f0, dtype=float, copy=True))
    anchor_basis = _orthonormal_fields(anchor, kernel_fields) if kernel_fields else []
    if anchor_basis:
        # solve in the complement throughout: the zero-kernel representative
        # is the answer "modulo projected modes"
        f = _project_out(anchor, anchor_basis, f)
    residuals = []
    frozen_matrix = None
    basis = None
    for it in range(max_iterations + 1):
        u, moved, data, loop_sup = _residual_pair(anchor, f, loop_gate)
        if kernel_fields:
            basis = _orthonormal_fields(moved, kernel_fields)
            u = _project_out(moved, basis, u)
        r = l2_norm(moved, u)
        residuals.append(r)
        if r <= newton_tol:
            trace = NewtonTrace(
                np.array(residuals), _quadratic_ratios(np.array(residuals)), True
            )
            return trace, f, moved, data, loop_sup
        if it == max_iterations:
            break
        if it >= 1 and r >= residuals[-2]:
            raise NewtonDiverged(
                f"residual rose from {residuals[-2]:.3e} to {r:.3e} at iterate {it}"
            )
        if use_base_jacobian:
            if frozen_matrix is None:
                frozen_matrix = _jacobian_matrix(moved, kernel_fields, gate=True)
            matrix = frozen_matrix
        else:
            # spectral gate once per solve; later iterates reuse the verdict
            matrix = _jacobian_matrix(moved, kernel_fields, gate=(it == 0))
        try:
            if kernel_fields:
                delta = np.linalg.lstsq(matrix, u.ravel(), rcond=None)[0]
            else:
                delta = np.linalg.solve(matrix, u.ravel())
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(str(exc)) from exc
        delta = delta.reshape(u.shape)
        if kernel_fields:
            delta = _project_out(moved, basis, delta)
        f = degauge(f - delta)
        if anchor_basis:
            f = _project_out(anchor, anchor_basis, f)
    raise NewtonDiverged(
        f"no convergence in {max_iterations} iterations; residual {residuals[-1]:.3e}"
    )


def _jacobian_matrix(imm, kernel_fields, gate=True):
    op = operator_Ltilde(imm, critical_tol=np.inf)
    if gate and not kernel_fields:
        bottom = float(np.min(np.abs(spectrum(op, 1))))
        if bottom < MIN_JACOBIAN_EIGENVALUE:
            raise SingularJacobian(
                f"linearised operator has |eigenvalue| {bottom:.3e} below "
                f"{MIN_JACOBIAN_EIGENVALUE:.1e}; enable kernel projection "
                "or change the scenario"
            )
    return op.matrix()


def _lagrangian_defect(imm: GridImmersion) -> float:
    if imm.n < 2:
        return 0.0
    pulled = imm.pullback_two_form(imm.chart.ricci_two_form(imm.points))
    return float(np.max(np.abs(pulled)))


def newton_solve(
    problem: ContinuationProblem, t: float, f0: np.ndarray | None = None
) -> StepRecord:
    """Solve for a J-minimal immersion at one fixed parameter value."""
    anchor = problem.anchor_at(t)
    if f0 is None:
        f0 = np.zeros(anchor.grid_shape)
    trace, f, moved, data, loop_sup = _newton(
        anchor,
        f0,
        problem.newton_tol,
        problem.max_iterations,
        problem.iterate_loop_gate,
        problem.kernel_fields,
        problem.use_base_jacobian,
    )
    return StepRecord(
        t=float(t),
        trace=trace,
        f=f,
        immersion=moved,
        sup_xi=data.sup_norm,
        loop_sup=loop_sup,
        lagrangian_defect=_lagrangian_defect(moved),
    )


def continue_family(
    problem: ContinuationProblem,
    t_start: float = 0.0,
    t_end: float = 1.0,
    f0: np.ndarray | None = None,
) -> ContinuationReport:
    """Step the parameter from t_start to t_end, certifying each solve.

    The previous solution is the predictor.  A failed or uncertified step
    bisects down to ``min_step`` before giving up; running with t_end below
    t_start reverses the path, which is how the round-trip uniqueness check
    is driven.
    """
    if f0 is None:
        start_data = maslov_form(problem.anchor_at(t_start))
        if start_data.sup_norm > problem.critical_tol:
            raise NotCritical(
                f"anchor at t={t_start:g} has sup |volume one-form| "
                f"{start_data.sup_norm:.3e} above {problem.critical_tol:.1e}"
            )
        f0 = np.zeros(problem.base.grid_shape)

    records = [newton_solve(problem, t_start, f0=f0)]
    f = records[-1].f
    nominal = (t_end - t_start) / problem.steps
    direction = 1.0 if nominal >= 0 else -1.0
    t = t_start
    dt = nominal
    while abs(t - t_end) > 1e-14:
        t_next = t + dt
        if (t_next - t_end) * direction > 0:
            t_next = t_end
        try:
            rec = newton_solve(problem, t_next, f0=f)
            if rec.sup_xi > problem.certificate_tol:
                raise StepFailed(
                    t_next,
                    f"step at t={t_next:g} converged but sup |volume one-form| "
                    f"{rec.sup_xi:.3e} exceeds {problem.certificate_tol:.1e}",
                )
        except (NewtonDiverged, NotExact, SingularJacobian, StepFailed) as exc:
            dt = dt / 2
            if abs(dt) < problem.min_step:
                raise ContinuationStalled(
                    f"step size fell below {problem.min_step:g} at t={t:g}: {exc}"
                ) from exc
            continue
        records.append(rec)
        f = rec.f
        t = t_next
        dt = nominal
    return ContinuationReport(records=records, f=f, immersion=records[-1].immersion)


# --- uniqueness --------------------------------------------------------------


@dataclass(frozen=True)
class UniquenessReport:
    """Constants, certified radius, and basin-trial outcomes."""

    c1: float
    c2: float
    certified_radius: float
    probe_radius: float
    trials: int
    successes: int
    final_norms: np.ndarray
    remainder_ratio: float


def _random_smooth(rng, grid_shape, modes=3):
    """Band-limited random scalar: trig polynomial with unit-scale coefficients."""
    n_axes = len(grid_shape)
    axes = np.ix_(*(2.0 * np.pi * np.arange(m) / m for m in grid_shape))
    out = np.zeros(grid_shape)
    for a in range(n_axes):
        theta = axes[a]
        for k in range(1, modes + 1):
            out = out + rng.standard_normal() * np.cos(k * theta)
            out = out + rng.standard_normal() * np.sin(k * theta)
    if n_axes > 1:
        mixed = np.add.reduce([axes[a] for a in range(n_axes)])
        out = out + rng.standard_normal() * np.cos(mixed)
        out = out + rng.standard_normal() * np.sin(mixed)
    return out


def uniqueness_probe(
    imm: GridImmersion,
    radius: float | None = None,
    trials: int = 100,
    seed: int = 0,
    samples: int = 16,
    probe_scale: float = 1e-3,
    max_sample_scale: float = 5e-2,
    newton_tol: float = DEFAULT_NEWTON_TOL,
    max_iterations: int = 12,
    critical_tol: float = DEFAULT_CRITICAL_TOL,
    success_norm: float = 1e-8,
) -> UniquenessReport:
    """Estimate the inverse and quadratic constants, then attack the basin.

    c1 bounds the inverse of the linearised operator (sampled suprema with
    the exact bottom eigenvalue as floor); c2 bounds the remainder of the
    residual against its linearisation, re-sampled at growing scales until
    the scale covers the radius being certified, since the remainder picks
    up third-order growth well inside the chart.  1/(c1 c2) is the certified
    uniqueness radius; ``trials`` Newton runs start from random scalars of
    norm up to ``radius`` (default: half of certified) and must return to
    the base solution.
    """
    data = maslov_form(imm)
    if data.sup_norm > critical_tol:
        raise NotCritical(
            f"probe base has sup |volume one-form| {data.sup_norm:.3e} "
            f"above {critical_tol:.1e}"
        )
    rng = np.random.default_rng(seed)
    op = operator_Ltilde(imm, critical_tol=np.inf)
    matrix = op.matrix()

    # c1: sup ||f|| / ||L f||, sampled white and through the inverse
    c1 = 1.0 / float(np.min(np.abs(spectrum(op, 1))))
    for _ in range(samples):
        g = rng.standard_normal(imm.grid_shape)
        g = g - imm.integrate(g, weight="J") / imm.integrate(
            np.ones_like(g), weight="J"
        )
        lg = op.apply(g)
        c1 = max(c1, l2_norm(imm, g) / l2_norm(imm, lg))
        h = np.linalg.solve(matrix, g.ravel()).reshape(imm.grid_shape)
        c1 = max(c1, l2_norm(imm, h) / l2_norm(imm, g))

    gate = TOPOLOGICAL_LOOP_GATE

    def remainder_sup(scale):
        worst = 0.0
        for _ in range(samples):
            direction = _random_smooth(rng, imm.grid_shape)
            direction = direction / l2_norm(imm, direction)
            f = scale * direction
            rem = l2_norm(imm, scalar_maslov(imm, f, gate) - op.apply(f))
            worst = max(worst, rem / l2_norm(imm, f) ** 2)
        return worst

    # c2: sup ||F(f) - L f|| / ||f||^2.  The quotient grows with the sample
    # scale, so enlarge the scale until it covers the radius being claimed;
    # the final pair then bounds the remainder on the whole certified ball.
    scale = max(probe_scale, 1e-3)
    c2 = remainder_sup(scale)
    for _ in range(4):
        certified = 1.0 / (c1 * c2)
        if certified <= scale:
            break
        scale = min(1.05 * certified, max_sample_scale)
        c2 = max(c2, remainder_sup(scale))
    certified = 1.0 / (c1 * c2)

    # quadratic scaling diagnostic on a fixed direction at the probe scale
    direction = _random_smooth(rng, imm.grid_shape)
    direction = direction / l2_norm(imm, direction)
    rem_full = l2_norm(
        imm, scalar_maslov(imm, probe_scale * direction, gate)
        - op.apply(probe_scale * direction)
    )
    rem_half = l2_norm(
        imm, scalar_maslov(imm, 0.5 * probe_scale * direction, gate)
        - op.apply(0.5 * probe_scale * direction)
    )
    remainder_ratio = rem_full / rem_half

    probe_radius = 0.5 * certified if radius is None else radius

    successes = 0
    final_norms = np.empty(trials)
    for k in range(trials):
        direction = _random_smooth(rng, imm.grid_shape)
        direction = direction / l2_norm(imm, direction)
        f0 = probe_radius * rng.uniform(0.1, 1.0) * direction
        try:
            _, f_final, _, _, _ = _newton(imm, f0, newton_tol, max_iterations)
            final_norms[k] = l2_norm(imm, f_final)
        except (NewtonDiverged, NotExact, SingularJacobian):
            final_norms[k] = np.inf
        if final_norms[k] <= success_norm:
            successes += 1
    return UniquenessReport(
        c1=c1,
        c2=c2,
        certified_radius=certified,
        probe_radius=probe_radius,
        trials=trials,
        successes=successes,
        final_norms=final_norms,
        remainder_ratio=remainder_ratio,
    )
