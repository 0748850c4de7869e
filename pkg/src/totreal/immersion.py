"""Discretised totally real immersions of tori into Kahler charts.

A GridImmersion stores the image points of a uniform periodic grid on
[0, 2pi)^n.  Axes may be twisted: crossing the seam of axis a composes with
a deck transformation of the chart, which is how quotient targets (tilted
lattices, hyperbolic cylinders) are realised on a plain periodic array.

All derivatives are fourth-order central differences.  The stencil weights
are antisymmetric, so the summation-by-parts identity sum_i (D f)_i = 0
holds exactly on the periodic grid; several exactness guarantees downstream
(self-adjointness, discrete exact sequences) rest on that.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from . import trlinalg
from .errors import InvalidImmersion
from .kahler import (
    FlatChart,
    KahlerChart,
    TranslationDeck,
    UpperHalfPlaneChart,
    chart_from_meta,
    chart_meta,
    deck_from_meta,
    deck_meta,
)

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# field wrappers (thin; the payload is always a plain array)


@dataclass(frozen=True)
class GridScalarField:
    data: np.ndarray  # grid


@dataclass(frozen=True)
class GridOneForm:
    data: np.ndarray  # grid + (n,), components on the coordinate frame


@dataclass(frozen=True)
class GridTwoForm:
    data: np.ndarray  # grid + (n, n), antisymmetric


@dataclass(frozen=True)
class GridVectorField:
    data: np.ndarray  # grid + (n,), intrinsic components


_FIELD_TYPES = (GridScalarField, GridOneForm, GridTwoForm, GridVectorField)


def _payload(field):
    if isinstance(field, _FIELD_TYPES):
        return field.data
    return np.asarray(field)


# ---------------------------------------------------------------------------
# the immersion


class GridImmersion:
    """Sampled immersion of the n-torus into an n-dimensional chart."""

    def __init__(
        self,
        chart: KahlerChart,
        points: np.ndarray,
        twists: tuple | None = None,
        name: str = "immersion",
    ):
        points = np.asarray(points, dtype=complex)
        if points.ndim != chart.dim + 1 or points.shape[-1] != chart.dim:
            raise InvalidImmersion(
                f"points of shape {points.shape} do not sample a "
                f"{chart.dim}-torus in a {chart.dim}-dimensional chart"
            )
        if twists is None:
            twists = (None,) * chart.dim
        if len(twists) != chart.dim:
            raise InvalidImmersion("one twist entry (or None) per grid axis")
        chart.check_domain(points)
        self.chart = chart
        self.points = points
        self.twists = tuple(twists)
        self.name = name
        self.grid_shape = points.shape[:-1]
        self.n = chart.dim
        self.spacings = tuple(TWO_PI / m for m in self.grid_shape)

    def with_points(self, points: np.ndarray, name: str | None = None) -> "GridImmersion":
        return GridImmersion(
            self.chart, points, self.twists, name or self.name
        )

    # --- seam-aware shifts and derivatives --------------------------------

    def shift(self, arr: np.ndarray, axis: int, k: int, kind: str = "scalar") -> np.ndarray:
        """arr sampled k nodes ahead along a grid axis, continued across seams.

        kind encodes how the field transforms under the axis deck:
        "scalar" (intrinsic, plain periodic), "points" (apply the deck),
        "ambient" (push by its differential), "canonical" (divide by the
        complex determinant of the differential).
        """
        rolled = np.roll(arr, -k, axis=axis)
        deck = self.twists[axis]
        if deck is None or k == 0 or kind == "scalar":
            return rolled
        rolled = rolled.copy()
        sl = [slice(None)] * rolled.ndim
        if k > 0:
            sl[axis] = slice(rolled.shape[axis] - k, None)
            act = deck
        else:
            sl[axis] = slice(None, -k)
            act = deck.inverse()
        sl = tuple(sl)
        slab = rolled[sl]
        if kind == "points":
            rolled[sl] = act.apply(slab)
        elif kind == "ambient":
            rolled[sl] = act.push_vectors(slab)
        elif kind == "canonical":
            rolled[sl] = slab / act.det_differential()
        else:
            raise ValueError(f"unknown seam kind {kind!r}")
        return rolled

    def deriv(self, arr: np.ndarray, axis: int, kind: str = "scalar") -> np.ndarray:
        """Fourth-order central difference along a grid axis."""
        h = self.spacings[axis]
        p1 = self.shift(arr, axis, 1, kind)
        m1 = self.shift(arr, axis, -1, kind)
        p2 = self.shift(arr, axis, 2, kind)
        m2 = self.shift(arr, axis, -2, kind)
        return (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h)

    # --- cached pointwise geometry ----------------------------------------

    @cached_property
    def metric_field(self) -> np.ndarray:
        """Ambient Hermitian matrices m along the immersion, grid + (n, n)."""
        return self.chart.metric_matrix(self.points)

    @cached_property
    def tangents(self) -> np.ndarray:
        """Coordinate tangent frame T_a = d iota / d theta_a, grid + (n, n)."""
        cols = [self.deriv(self.points, a, kind="points") for a in range(self.n)]
        return np.stack(cols, axis=-2)

    @cached_property
    def hermitian_gram_field(self) -> np.ndarray:
        return trlinalg.gram_matrix(self.tangents, self.metric_field)

    @cached_property
    def induced_metric(self) -> np.ndarray:
        """Real induced metric g_ab, grid + (n, n)."""
        return np.real(self.hermitian_gram_field)

    @cached_property
    def induced_metric_inv(self) -> np.ndarray:
        return np.linalg.inv(self.induced_metric)

    @cached_property
    def sqrt_det_g(self) -> np.ndarray:
        det = np.linalg.det(self.induced_metric)
        if np.any(det <= 0.0):
            raise InvalidImmersion("induced metric is not positive definite")
        return np.sqrt(det)

    @cached_property
    def rho(self) -> np.ndarray:
        """Anti-holomorphic volume ratio rho_J in (0, 1], grid scalars."""
        return trlinalg.rho_from_frame(self.tangents, self.metric_field)

    @cached_property
    def frames(self) -> np.ndarray:
        """Re h orthonormal tangent frames, grid + (n, n)."""
        return trlinalg.orthonormalize(self.tangents, self.metric_field)

    @cached_property
    def canonical_coefficient(self) -> np.ndarray:
        """Complex canonical-volume coefficient; seam kind "canonical"."""
        return trlinalg.canonical_coefficients(
            self.tangents, self.metric_field
        ).coefficient

    @cached_property
    def projection_fields(self) -> tuple[np.ndarray, np.ndarray]:
        """(P_L, P_J) realified projection matrices, grid + (2n, 2n)."""
        return trlinalg.projection_matrices(self.tangents)

    @cached_property
    def lagrangian_defect_field(self) -> np.ndarray:
        return trlinalg.lagrangian_defect_raw(self.tangents, self.metric_field)

    @cached_property
    def node_weight(self) -> float:
        return float(np.prod(self.spacings))

    @cached_property
    def g_weights(self) -> np.ndarray:
        return self.sqrt_det_g * self.node_weight

    @cached_property
    def j_weights(self) -> np.ndarray:
        return self.rho * self.sqrt_det_g * self.node_weight

    # --- calculus ----------------------------------------------------------

    def d_scalar(self, f) -> np.ndarray:
        f = _payload(f)
        return np.stack([self.deriv(f, a) for a in range(self.n)], axis=-1)

    def d_one_form(self, alpha) -> np.ndarray:
        """(d alpha)_ab = d_a alpha_b - d_b alpha_a."""
        alpha = _payload(alpha)
        grad = np.stack(
            [self.deriv(alpha, a) for a in range(self.n)], axis=-2
        )  # [..., a, b] = d_a alpha_b
        return grad - np.swapaxes(grad, -1, -2)

    def gradient(self, f) -> np.ndarray:
        return self.raise_index(self.d_scalar(f))

    def raise_index(self, alpha) -> np.ndarray:
        alpha = _payload(alpha)
        return np.einsum("...ab,...b->...a", self.induced_metric_inv, alpha)

    def lower_index(self, x) -> np.ndarray:
        x = _payload(x)
        return np.einsum("...ab,...b->...a", self.induced_metric, x)

    def divergence(self, x, weight: str = "J") -> np.ndarray:
        """Weighted divergence of an intrinsic vector field.

        weight "J" uses the density rho sqrt(det g) (the J-volume measure),
        weight "g" the Riemannian one.
        """
        x = _payload(x)
        dens = self.sqrt_det_g if weight == "g" else self.rho * self.sqrt_det_g
        flux = dens[..., None] * x
        out = np.zeros(self.grid_shape, dtype=x.dtype)
        for a in range(self.n):
            out = out + self.deriv(flux[..., a], a)
        return out / dens

    def laplacian(self, f) -> np.ndarray:
        """Positive Laplace-Beltrami operator: cos(k theta) -> k^2 cos(k theta)."""
        return -self.divergence(self.gradient(f), weight="g")

    def push_tangent(self, x) -> np.ndarray:
        """Ambient complex components of an intrinsic vector field."""
        x = _payload(x)
        return np.einsum("...a,...ak->...k", x, self.tangents)

    def form_inner(self, alpha, beta) -> np.ndarray:
        alpha, beta = _payload(alpha), _payload(beta)
        return np.einsum(
            "...ab,...a,...b->...", self.induced_metric_inv, alpha, beta
        )

    def integrate(self, f, weight: str = "J") -> float | complex:
        f = _payload(f)
        if weight == "J":
            w = self.j_weights
        elif weight == "g":
            w = self.g_weights
        elif weight == "flat":
            w = self.node_weight
        else:
            raise ValueError(f"unknown weight {weight!r}")
        total = np.sum(f * w)
        return complex(total) if np.iscomplexobj(f) else float(total)

    def l2_inner(self, f1, f2, weight: str = "J"):
        return self.integrate(_payload(f1) * _payload(f2), weight=weight)

    def l2_norm(self, f, weight: str = "J") -> float:
        f = _payload(f)
        return float(np.sqrt(np.real(self.integrate(np.abs(f) ** 2, weight=weight))))

    def total_volumes(self) -> tuple[float, float]:
        """(Riemannian volume, J-volume) of the immersed torus."""
        vol_g = float(np.sum(self.g_weights))
        vol_j = float(np.sum(self.j_weights))
        return vol_g, vol_j

    def line_integrals(self, alpha) -> np.ndarray:
        """Loop integrals of an intrinsic one-form over the n axis cycles.

        Trapezoid sums along each axis, averaged over the transverse
        directions; exact forms produced by the same difference stencil
        integrate to zero exactly.
        """
        alpha = _payload(alpha)
        out = np.empty(self.n)
        for a in range(self.n):
            comp = alpha[..., a]
            total = np.sum(comp, axis=a) * self.spacings[a]
            out[a] = float(np.mean(total))
        return out

    def pullback_two_form(self, w_field: np.ndarray) -> np.ndarray:
        """Pull back realified ambient two-form matrices to the grid torus."""
        t_real = trlinalg.realify(self.tangents)
        return np.einsum("...ai,...ij,...bj->...ab", t_real, w_field, t_real)

    # --- serialisation -------------------------------------------------------

    def save(self, stem: str | Path) -> tuple[Path, Path]:
        """Write points to <stem>.csv and metadata to <stem>.json."""
        stem = Path(stem)
        csv_path = stem.with_suffix(".csv")
        meta_path = stem.with_suffix(".json")
        n = self.n
        header = [f"i{a}" for a in range(n)]
        for k in range(n):
            header += [f"re_z{k}", f"im_z{k}"]
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for idx in np.ndindex(*self.grid_shape):
                row = list(idx)
                for k in range(n):
                    z = self.points[idx + (k,)]
                    row += [repr(float(np.real(z))), repr(float(np.imag(z)))]
                writer.writerow(row)
        meta = {
            "name": self.name,
            "grid_shape": list(self.grid_shape),
            "chart": chart_meta(self.chart),
            "twists": [None if d is None else deck_meta(d) for d in self.twists],
        }
        with open(meta_path, "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return csv_path, meta_path

    @classmethod
    def load(cls, stem: str | Path) -> "GridImmersion":
        stem = Path(stem)
        with open(stem.with_suffix(".json")) as fh:
            meta = json.load(fh)
        shape = tuple(meta["grid_shape"])
        chart = chart_from_meta(meta["chart"])
        twists = tuple(
            None if d is None else deck_from_meta(d) for d in meta["twists"]
        )
        n = chart.dim
        points = np.zeros(shape + (n,), dtype=complex)
        with open(stem.with_suffix(".csv"), newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            for row in reader:
                idx = tuple(int(v) for v in row[:n])
                vals = [float(v) for v in row[n:]]
                points[idx] = [
                    vals[2 * k] + 1j * vals[2 * k + 1] for k in range(n)
                ]
        return cls(chart, points, twists, meta.get("name", "immersion"))


# ---------------------------------------------------------------------------
# grids and stock immersion families


def grid_angles(shape: tuple[int, ...]) -> list[np.ndarray]:
    """Open meshgrid of angles theta_a in [0, 2pi) for the given shape."""
    axes = [np.arange(m) * (TWO_PI / m) for m in shape]
    return list(np.meshgrid(*axes, indexing="ij", sparse=True))


def circle(
    radius: float = 1.0, resolution: int = 64, chart: KahlerChart | None = None
) -> GridImmersion:
    """Round circle of given radius, in the flat chart unless told otherwise."""
    (theta,) = grid_angles((resolution,))
    points = (radius * np.exp(1j * theta))[..., None]
    target = chart if chart is not None else FlatChart(1)
    return GridImmersion(target, points, name=f"circle_r{radius:g}")


def clifford_torus(
    radii: tuple[float, float] = (1.0, 1.0),
    resolution: tuple[int, int] = (48, 48),
    chart: KahlerChart | None = None,
) -> GridImmersion:
    """Product torus (r1 e^{i t1}, r2 e^{i t2}), flat chart by default.

    With unit radii in the projective chart this is the minimal Lagrangian
    torus; in the flat chart it is volume-critical among Lagrangians.
    """
    t1, t2 = grid_angles(tuple(resolution))
    r1, r2 = radii
    points = np.stack(
        np.broadcast_arrays(r1 * np.exp(1j * t1), r2 * np.exp(1j * t2)), axis=-1
    )
    target = chart if chart is not None else FlatChart(2)
    return GridImmersion(target, points, name="clifford_torus")


def linear_torus(
    periods: tuple[tuple[complex, complex], tuple[complex, complex]],
    resolution: tuple[int, int] = (48, 48),
) -> GridImmersion:
    """Quotient plane (t1 w1 + t2 w2) / 2pi for lattice generators w1, w2.

    The generators are totally real when they are C-linearly independent;
    the two grid axes carry translation twists by w1 and w2.
    """
    w1 = np.asarray(periods[0], dtype=complex)
    w2 = np.asarray(periods[1], dtype=complex)
    if abs(np.linalg.det(np.stack([w1, w2]))) < 1e-12:
        raise InvalidImmersion("lattice generators are complex-linearly dependent")
    t1, t2 = grid_angles(tuple(resolution))
    points = (t1[..., None] * w1 + t2[..., None] * w2) / TWO_PI
    decks = (TranslationDeck(tuple(w1)), TranslationDeck(tuple(w2)))
    chart = FlatChart(2, decks=decks)
    return GridImmersion(chart, points, twists=decks, name="linear_torus")


def lagrangian_graph(
    gradient, resolution: tuple[int, ...], dim: int | None = None
) -> GridImmersion:
    """Graph theta + i grad f(theta) of a periodic potential over the real torus.

    ``gradient`` maps stacked angles (grid + (n,)) to the real gradient
    (grid + (n,)).  Each axis is twisted by the 2pi real translation.
    """
    shape = tuple(resolution)
    n = dim if dim is not None else len(shape)
    axes = grid_angles(shape)
    theta = np.stack(np.broadcast_arrays(*axes), axis=-1) if n > 1 else axes[0][..., None]
    points = theta + 1j * np.asarray(gradient(theta))
    offsets = [tuple(TWO_PI if k == a else 0.0 for k in range(n)) for a in range(n)]
    decks = tuple(TranslationDeck(off) for off in offsets)
    chart = FlatChart(n, decks=decks)
    return GridImmersion(chart, points, twists=decks, name="lagrangian_graph")


def core_geodesic(
    c: float = 1.0, ell: float = 1.0, resolution: int = 64
) -> GridImmersion:
    """Core circle of the hyperbolic cylinder: the quotient imaginary axis."""
    chart = UpperHalfPlaneChart.cylinder(c=c, ell=ell)
    (theta,) = grid_angles((resolution,))
    points = (1j * np.exp(ell * theta / TWO_PI))[..., None]
    return GridImmersion(
        chart, points, twists=(chart.deck(0),), name=f"core_geodesic_l{ell:g}"
    )


def random_torus(
    seed: int,
    amplitude: float = 0.05,
    resolution: tuple[int, int] = (48, 48),
    scale: float = 1.0,
    chart: KahlerChart | None = None,
    modes: tuple[tuple[int, int], ...] = ((1, 0), (0, 1), (1, 1)),
) -> GridImmersion:
    """Smooth random perturbation of the product torus, plain periodic.

    Radii and phases of each factor are perturbed by low-order trigonometric
    polynomials in both angles, so all derivative orders stay O(amplitude).
    ``scale`` shrinks the whole torus (needed inside the unit ball); steeper
    mode ladders are for refinement studies, where the larger high-order
    derivatives make the convergence rate easier to resolve.
    """
    rng = np.random.default_rng(seed)
    t1, t2 = grid_angles(tuple(resolution))
    comps = []
    for _ in range(2):
        dr = np.zeros(np.broadcast_shapes(t1.shape, t2.shape))
        dphi = np.zeros_like(dr)
        for m1, m2 in modes:
            ar, br, ap, bp = rng.uniform(-amplitude, amplitude, size=4)
            arg = m1 * t1 + m2 * t2
            dr = dr + ar * np.cos(arg) + br * np.sin(arg)
            dphi = dphi + ap * np.cos(arg) + bp * np.sin(arg)
        comps.append((dr, dphi))
    z1 = scale * (1.0 + comps[0][0]) * np.exp(1j * (t1 + comps[0][1]))
    z2 = scale * (1.0 + comps[1][0]) * np.exp(1j * (t2 + comps[1][1]))
    points = np.stack(np.broadcast_arrays(z1, z2), axis=-1)
    target = chart if chart is not None else FlatChart(2)
    return GridImmersion(target, points, name=f"random_torus_s{seed}")


# ---------------------------------------------------------------------------
# spectral helper shared with the solver modules


def d4_symbol(n_nodes: int, spacing: float) -> np.ndarray:
    """Eigenvalues i*sigma(k) of the difference stencil on e^{i k theta}.

    Returns the real array sigma over numpy fft frequency order.  sigma is
    odd in k and vanishes at the Nyquist mode on even grids.
    """
    k = np.fft.fftfreq(n_nodes, d=1.0 / n_nodes)
    kh = k * spacing
    return (8.0 * np.sin(kh) - np.sin(2.0 * kh)) / (6.0 * spacing)
