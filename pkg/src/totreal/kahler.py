"""Kahler charts from potentials, with closed-form derivative stacks.

Each chart hands out the Hermitian matrix field m = 2 ddbar K together with
its holomorphic derivatives (order 1) and mixed second derivatives
(order 2).  Everything downstream - Christoffel symbols, Ricci data,
geodesics - is derived from that one supplier, so a single convention
record covers the whole package.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DerivativeOrderUnavailable,
    LeftDomain,
    NoEinsteinConstant,
    OutOfDomain,
)
from .trlinalg import HermitianStructure, real_structure_matrices


@dataclass(frozen=True)
class ChartJet:
    """Metric matrix field and its derivatives at a batch of points.

    ``m`` has shape (..., n, n); ``dm[..., k, :, :]`` is the holomorphic
    derivative d m / d z_k and ``q[..., k, l, :, :]`` the mixed second
    derivative d^2 m / d z_k d zbar_l.  Higher entries are None when not
    requested.
    """

    m: np.ndarray
    dm: np.ndarray | None = None
    q: np.ndarray | None = None


# ---------------------------------------------------------------------------
# deck transformations


@dataclass(frozen=True)
class ScaleDeck:
    """z -> factor * z; an isometry of charts whose metric allows it."""

    factor: complex

    def apply(self, points):
        return self.factor * points

    def push_vectors(self, vectors, points=None):
        return self.factor * vectors

    def det_differential(self, points=None):
        return self.factor

    def inverse(self) -> "ScaleDeck":
        return ScaleDeck(1.0 / self.factor)


@dataclass(frozen=True)
class TranslationDeck:
    """z -> z + offset; an isometry of the flat chart."""

    offset: tuple[complex, ...]

    def apply(self, points):
        return points + np.asarray(self.offset, dtype=complex)

    def push_vectors(self, vectors, points=None):
        return vectors

    def det_differential(self, points=None):
        return 1.0 + 0.0j

    def inverse(self) -> "TranslationDeck":
        return TranslationDeck(tuple(-np.asarray(self.offset, dtype=complex)))


# ---------------------------------------------------------------------------
# chart base class


class KahlerChart:
    """Base class; subclasses provide jets, the domain, and metadata."""

    dim: int
    einstein_constant: float | None
    decks: tuple

    # --- interface supplied by subclasses -------------------------------

    def jet(self, points: np.ndarray, order: int = 0) -> ChartJet:
        raise NotImplementedError

    def potential(self, points: np.ndarray) -> np.ndarray:
        """Kahler potential, where one is available in closed form."""
        raise DerivativeOrderUnavailable(
            f"{type(self).__name__} does not expose a potential"
        )

    def contains(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # --- derived geometry ------------------------------------------------

    def check_domain(self, points: np.ndarray) -> None:
        inside = self.contains(points)
        if not np.all(inside):
            raise OutOfDomain(f"{int(np.sum(~inside))} point(s) outside chart domain")

    def metric_matrix(self, points: np.ndarray) -> np.ndarray:
        m = self.jet(points, order=0).m
        # enforce exact Hermitian symmetry against rounding in the suppliers
        return 0.5 * (m + np.conj(np.swapaxes(m, -1, -2)))

    def metric_at(self, point: np.ndarray) -> HermitianStructure:
        point = np.asarray(point, dtype=complex)
        self.check_domain(point)
        return HermitianStructure(self.metric_matrix(point))

    def christoffel(self, points: np.ndarray) -> np.ndarray:
        """Gamma[..., k, i, j] with geodesic equation z''^k = -Gamma w^i w^j."""
        jet = self.jet(points, order=1)
        minv = np.linalg.inv(jet.m)
        # Gamma^k_ij = sum_l conj(minv)[k,l] * (d_i m)[j,l]
        return np.einsum("...kl,...ijl->...kij", np.conj(minv), jet.dm)

    def ricci_matrix(self, points: np.ndarray) -> np.ndarray:
        """Hermitian s with Ric(u,v) = Re(u^T s conj(v)); s = -2 ddbar log det m."""
        jet = self.jet(points, order=2)
        minv = np.linalg.inv(jet.m)
        term1 = np.einsum(
            "...ab,...lcb,...cd,...jda->...jl", minv, np.conj(jet.dm), minv, jet.dm
        )
        term2 = np.einsum("...ab,...jlba->...jl", minv, jet.q)
        s = 2.0 * (term1 - term2)
        return 0.5 * (s + np.conj(np.swapaxes(s, -1, -2)))

    def kahler_two_form(self, points: np.ndarray) -> np.ndarray:
        """Realified antisymmetric matrix of omega at each point."""
        return real_structure_matrices(self.metric_matrix(points))[1]

    def ricci_two_form(self, points: np.ndarray) -> np.ndarray:
        """Realified antisymmetric matrix of the Ricci form rho."""
        return real_structure_matrices(self.ricci_matrix(points))[1]

    def ricci_form_at(self, point: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(rho, Ric) at a point as realified 2n x 2n matrices."""
        point = np.asarray(point, dtype=complex)
        self.check_domain(point)
        g_part, w_part = real_structure_matrices(self.ricci_matrix(point))
        return w_part, g_part

    def einstein_defect(self, point: np.ndarray) -> float:
        """Operator norm of rho - lambda * omega at the point."""
        if self.einstein_constant is None:
            raise NoEinsteinConstant(f"{type(self).__name__} declares no constant")
        point = np.asarray(point, dtype=complex)
        self.check_domain(point)
        gap = self.ricci_matrix(point) - self.einstein_constant * self.metric_matrix(point)
        return float(np.max(np.abs(np.linalg.eigvalsh(gap))))

    def gauss_curvature(self, points: np.ndarray) -> np.ndarray:
        """Pointwise Ricci/metric ratio; the Gauss curvature when dim == 1."""
        if self.dim != 1:
            raise ValueError("gauss_curvature is defined for one-dimensional charts")
        s = self.ricci_matrix(points)[..., 0, 0]
        m = self.metric_matrix(points)[..., 0, 0]
        return np.real(s / m)

    # --- deck transformations -------------------------------------------

    def deck(self, index: int):
        try:
            return self.decks[index]
        except IndexError:
            raise ValueError(f"chart has no deck transformation #{index}") from None

    # --- geodesics ---------------------------------------------------------

    def ambient_exp(
        self, points: np.ndarray, velocities: np.ndarray, steps: int = 16
    ) -> np.ndarray:
        """Geodesic exponential: follow z'' = -Gamma(z)(z', z') for unit time.

        Classical RK4 with ``steps`` fixed steps, batched over leading
        dimensions.  Raises LeftDomain if any stage leaves the chart.
        """
        z = np.asarray(points, dtype=complex).copy()
        w = np.asarray(velocities, dtype=complex) + np.zeros_like(z)
        self.check_domain(z)

        def rhs(z_cur, w_cur):
            inside = self.contains(z_cur)
            if not np.all(inside):
                raise LeftDomain("geodesic left the chart domain")
            gamma = self.christoffel(z_cur)
            acc = -np.einsum("...kij,...i,...j->...k", gamma, w_cur, w_cur)
            return w_cur, acc

        h = 1.0 / steps
        for _ in range(steps):
            k1z, k1w = rhs(z, w)
            k2z, k2w = rhs(z + 0.5 * h * k1z, w + 0.5 * h * k1w)
            k3z, k3w = rhs(z + 0.5 * h * k2z, w + 0.5 * h * k2w)
            k4z, k4w = rhs(z + h * k3z, w + h * k3w)
            z = z + (h / 6.0) * (k1z + 2 * k2z + 2 * k3z + k4z)
            w = w + (h / 6.0) * (k1w + 2 * k2w + 2 * k3w + k4w)
        self.check_domain(z)
        return z


# ---------------------------------------------------------------------------
# built-in charts


class FlatChart(KahlerChart):
    """C^n with K = |z|^2 / 2, so the metric matrix is the identity."""

    def __init__(self, dim: int, decks: tuple = ()):
        self.dim = dim
        self.einstein_constant = 0.0
        self.decks = tuple(decks)

    def potential(self, points):
        return 0.5 * np.sum(np.abs(points) ** 2, axis=-1)

    def contains(self, points):
        return np.ones(np.asarray(points).shape[:-1], dtype=bool)

    def jet(self, points, order=0):
        points = np.asarray(points, dtype=complex)
        n = self.dim
        base = points.shape[:-1]
        m = np.broadcast_to(np.eye(n, dtype=complex), base + (n, n)).copy()
        dm = np.zeros(base + (n, n, n), dtype=complex) if order >= 1 else None
        q = np.zeros(base + (n, n, n, n), dtype=complex) if order >= 2 else None
        return ChartJet(m=m, dm=dm, q=q)


class _LogPotentialChart(KahlerChart):
    """K = a log(1 + b |z|^2); covers the Fubini-Study and ball charts."""

    def __init__(self, dim: int, a: float, b: float):
        self.dim = dim
        self._a = a
        self._b = b
        self.decks = ()

    def potential(self, points):
        s = np.sum(np.abs(points) ** 2, axis=-1)
        return self._a * np.log1p(self._b * s)

    def contains(self, points):
        s = np.sum(np.abs(np.asarray(points)) ** 2, axis=-1)
        return 1.0 + self._b * s > 0.0

    def jet(self, points, order=0):
        z = np.asarray(points, dtype=complex)
        n = self.dim
        a, b = self._a, self._b
        s = np.sum(np.abs(z) ** 2, axis=-1)
        u = 1.0 + b * s
        w = np.conj(z)
        eye = np.eye(n, dtype=complex)
        u1 = u[..., None, None]

        outer_wz = w[..., :, None] * z[..., None, :]  # [i, j] = wbar_i z_j
        m = 2.0 * a * b * (eye / u1 - b * outer_wz / u1**2)

        dm = None
        q = None
        if order >= 1:
            u2 = u[..., None, None, None]
            # dm[k, i, j] = d_k m_ij
            d_ki = w[..., :, None, None] * eye[None, :, :]  # w_k delta_ij
            d_ij = w[..., None, :, None] * eye[:, None, :]  # w_i delta_jk -> [k,i,j]
            www_z = (
                w[..., None, :, None]
                * w[..., :, None, None]
                * z[..., None, None, :]
            )  # [k, i, j] = w_i w_k z_j
            dm = 2.0 * (-a * b**2 * (d_ki + d_ij) / u2**2 + 2 * a * b**3 * www_z / u2**3)
        if order >= 2:
            u3 = u[..., None, None, None, None]
            dd = eye[:, :, None, None] * eye[None, None, :, :]  # [k,l,i,j] dkl dij
            d_il_jk = (
                eye[None, :, :, None] * eye[:, None, None, :]
            )  # [k,l,i,j] = d_il d_jk
            zl_wk_dij = (
                z[..., None, :, None, None]
                * w[..., :, None, None, None]
                * eye[None, None, :, :]
            )
            zl_wi_djk = (
                z[..., None, :, None, None]
                * w[..., None, None, :, None]
                * eye[:, None, None, :]
            )
            zj_wk_dil = (
                z[..., None, None, None, :]
                * w[..., :, None, None, None]
                * eye[None, :, :, None]
            )
            zj_wi_dkl = (
                z[..., None, None, None, :]
                * w[..., None, None, :, None]
                * eye[:, :, None, None]
            )
            wi_wk_zj_zl = (
                w[..., None, None, :, None]
                * w[..., :, None, None, None]
                * z[..., None, None, None, :]
                * z[..., None, :, None, None]
            )
            q = 2.0 * (
                -a
                * b**2
                * (
                    (dd + d_il_jk) / u3**2
                    - 2 * b * (zl_wk_dij + zl_wi_djk + zj_wk_dil + zj_wi_dkl) / u3**3
                )
                - 6 * a * b**4 * wi_wk_zj_zl / u3**4
            )
        return ChartJet(m=m, dm=dm, q=q)


class FubiniStudyChart(_LogPotentialChart):
    """Affine chart of complex projective space, K = c log(1 + |z|^2)."""

    def __init__(self, dim: int, c: float = 1.0):
        if c <= 0:
            raise ValueError("scale c must be positive")
        super().__init__(dim, a=c, b=1.0)
        self.c = c
        self.einstein_constant = (dim + 1) / c


class HyperbolicBallChart(_LogPotentialChart):
    """Unit ball with K = -c log(1 - |z|^2); complex hyperbolic space."""

    def __init__(self, dim: int, c: float = 1.0):
        if c <= 0:
            raise ValueError("scale c must be positive")
        super().__init__(dim, a=-c, b=-1.0)
        self.c = c
        self.einstein_constant = -(dim + 1) / c


class UpperHalfPlaneChart(KahlerChart):
    """Hyperbolic upper half plane, K = -c log(Im z), Gauss curvature -2/c.

    Deck transformations z -> e^ell z realise hyperbolic cylinders; the core
    geodesic of the quotient is the imaginary axis.
    """

    def __init__(self, c: float = 1.0, decks: tuple = ()):
        if c <= 0:
            raise ValueError("scale c must be positive")
        self.dim = 1
        self.c = c
        self.einstein_constant = -2.0 / c
        self.decks = tuple(decks)

    @classmethod
    def cylinder(cls, c: float = 1.0, ell: float = 1.0) -> "UpperHalfPlaneChart":
        return cls(c=c, decks=(ScaleDeck(np.exp(ell)),))

    def potential(self, points):
        return -self.c * np.log(np.imag(points[..., 0]))

    def contains(self, points):
        return np.imag(np.asarray(points))[..., 0] > 0.0

    def jet(self, points, order=0):
        z = np.asarray(points, dtype=complex)[..., 0]
        y = np.asarray(np.imag(z))
        c = self.c
        m = np.asarray(0.5 * c / y**2, dtype=complex)[..., None, None]
        dm = None
        q = None
        if order >= 1:
            dm = np.asarray(0.5j * c / y**3, dtype=complex)[..., None, None, None]
        if order >= 2:
            q = np.asarray(0.75 * c / y**4, dtype=complex)[..., None, None, None, None]
        return ChartJet(m=m, dm=dm, q=q)


# ---------------------------------------------------------------------------
# perturbation potentials


@dataclass(frozen=True)
class _Mono:
    """Monomial coef * z^mu * zbar^nu with exact derivative ladders."""

    coef: complex
    mu: tuple[int, ...]
    nu: tuple[int, ...]

    def d(self, k: int) -> "_Mono":
        if self.mu[k] == 0:
            return _Mono(0.0, self.mu, self.nu)
        mu = list(self.mu)
        mu[k] -= 1
        return _Mono(self.coef * self.mu[k], tuple(mu), self.nu)

    def dbar(self, k: int) -> "_Mono":
        if self.nu[k] == 0:
            return _Mono(0.0, self.mu, self.nu)
        nu = list(self.nu)
        nu[k] -= 1
        return _Mono(self.coef * self.nu[k], self.mu, tuple(nu))

    def conjugate(self) -> "_Mono":
        return _Mono(np.conj(self.coef), self.nu, self.mu)

    def eval(self, z: np.ndarray) -> np.ndarray:
        if self.coef == 0.0:
            return np.zeros(z.shape[:-1], dtype=complex)
        mu = np.asarray(self.mu)
        nu = np.asarray(self.nu)
        return self.coef * np.prod(z**mu, axis=-1) * np.prod(np.conj(z) ** nu, axis=-1)


class PolyPotential:
    """Real perturbation potential sum_j Re(c_j z^mu_j zbar^nu_j).

    Derivatives of every order are exact monomial ladders, which keeps the
    perturbed chart's jet supplier closed-form.
    """

    def __init__(self, terms):
        monos = []
        for coef, mu, nu in terms:
            half = _Mono(0.5 * complex(coef), tuple(mu), tuple(nu))
            monos.extend([half, half.conjugate()])
        if not monos:
            raise ValueError("poly potential needs at least one term")
        self._monos = tuple(monos)
        self._n = len(monos[0].mu)

    @property
    def dim(self) -> int:
        return self._n

    def _sum(self, z, monos):
        out = np.zeros(z.shape[:-1], dtype=complex)
        for mo in monos:
            out = out + mo.eval(z)
        return out

    def value(self, z):
        return np.real(self._sum(z, self._monos))

    def grad(self, z):
        n = self._n
        cols = [self._sum(z, [mo.d(k) for mo in self._monos]) for k in range(n)]
        return np.stack(cols, axis=-1)

    def mixed_hessian(self, z):
        n = self._n
        rows = []
        for k in range(n):
            row = [
                self._sum(z, [mo.d(k).dbar(l) for mo in self._monos]) for l in range(n)
            ]
            rows.append(np.stack(row, axis=-1))
        return np.stack(rows, axis=-2)

    def d_mixed(self, z):
        n = self._n
        out = []
        for j in range(n):
            rows = []
            for k in range(n):
                row = [
                    self._sum(z, [mo.d(j).d(k).dbar(l) for mo in self._monos])
                    for l in range(n)
                ]
                rows.append(np.stack(row, axis=-1))
            out.append(np.stack(rows, axis=-2))
        return np.stack(out, axis=-3)

    def q_mixed(self, z):
        n = self._n
        out_j = []
        for j in range(n):
            out_m = []
            for mm in range(n):
                rows = []
                for k in range(n):
                    row = [
                        self._sum(
                            z,
                            [mo.d(j).dbar(mm).d(k).dbar(l) for mo in self._monos],
                        )
                        for l in range(n)
                    ]
                    rows.append(np.stack(row, axis=-1))
                out_m.append(np.stack(rows, axis=-2))
            out_j.append(np.stack(out_m, axis=-3))
        return np.stack(out_j, axis=-4)


class CylinderPotential:
    """Deck-invariant conformal factor on the hyperbolic cylinder, dim 1.

    u(z) = Re(a z^{i kappa}) + Re(b e^{i p arg z}) with kappa = 2 pi m / ell;
    both pieces are invariant under z -> e^ell z.  The radial piece is
    pluriharmonic, the angular piece is not, so the pair exercises both a
    moving metric and a moving Ricci form.
    """

    dim = 1

    def __init__(
        self,
        ell: float,
        radial_coef: complex = 0.0,
        radial_mode: int = 1,
        angular_coef: complex = 0.0,
        angular_mode: int = 2,
    ):
        self.ell = float(ell)
        self.a = complex(radial_coef)
        self.m = int(radial_mode)
        self.b = complex(angular_coef)
        self.p = int(angular_mode)
        self.kappa = 2.0 * np.pi * self.m / self.ell

    def _parts(self, z):
        zz = np.asarray(z, dtype=complex)[..., 0]
        w = np.exp(1j * self.kappa * np.log(zz))
        gp = np.exp(1j * self.p * np.angle(zz))
        return zz, w, gp

    def value(self, z):
        zz, w, gp = self._parts(z)
        return np.real(self.a * w) + np.real(self.b * gp)

    def grad(self, z):
        zz, w, gp = self._parts(z)
        radial = 0.5 * self.a * 1j * self.kappa * w / zz
        angular = 0.25 * self.p * (self.b * gp - np.conj(self.b * gp)) / zz
        return (radial + angular)[..., None]

    def mixed_hessian(self, z):
        zz, w, gp = self._parts(z)
        val = -self.p**2 * np.real(self.b * gp) / (4.0 * np.abs(zz) ** 2)
        return val[..., None, None].astype(complex)


class PerturbedChart(KahlerChart):
    """Base chart deformed by a parameter-t perturbation.

    mode "potential": K_t = K + t * phi for a PolyPotential phi (any dim).
    mode "conformal": m_t = m * exp(2 t u) for a scalar factor u (dim 1).

    The declared Einstein constant is inherited from the base chart, so the
    Einstein defect measures the size of the perturbation.
    """

    def __init__(self, base: KahlerChart, perturbation, t: float, mode: str = "potential"):
        if mode not in ("potential", "conformal"):
            raise ValueError(f"unknown perturbation mode {mode!r}")
        if mode == "conformal" and base.dim != 1:
            raise ValueError("conformal perturbations are one-dimensional only")
        if perturbation.dim != base.dim:
            raise ValueError("perturbation dimension does not match the chart")
        self.base = base
        self.perturbation = perturbation
        self.t = float(t)
        self.mode = mode
        self.dim = base.dim
        self.einstein_constant = base.einstein_constant
        self.decks = base.decks

    def potential(self, points):
        if self.mode != "potential":
            raise DerivativeOrderUnavailable(
                "conformal perturbations have no closed-form potential"
            )
        return self.base.potential(points) + self.t * self.perturbation.value(points)

    def contains(self, points):
        return self.base.contains(points)

    def jet(self, points, order=0):
        z = np.asarray(points, dtype=complex)
        base = self.base.jet(z, order=order)
        t = self.t
        if t == 0.0:
            return base
        if self.mode == "potential":
            m = base.m + 2.0 * t * self.perturbation.mixed_hessian(z)
            dm = base.dm + 2.0 * t * self.perturbation.d_mixed(z) if order >= 1 else None
            q = base.q + 2.0 * t * self.perturbation.q_mixed(z) if order >= 2 else None
            return ChartJet(m=m, dm=dm, q=q)
        # conformal, dim 1: everything is a scalar field
        u = self.perturbation.value(z)
        scale = np.exp(2.0 * t * u)[..., None, None]
        m = base.m * scale
        dm = None
        q = None
        if order >= 1:
            du = self.perturbation.grad(z)[..., 0]
            dm = (base.dm + 2.0 * t * du[..., None, None, None] * base.m[..., None, :, :]) * scale[
                ..., None, :, :
            ]
        if order >= 2:
            du = self.perturbation.grad(z)[..., 0]
            ddu = self.perturbation.mixed_hessian(z)[..., 0, 0]
            du4 = du[..., None, None, None, None]
            ddu4 = ddu[..., None, None, None, None]
            m4 = base.m[..., None, None, :, :]
            dm4 = base.dm[..., :, None, :, :]  # k axis exists; insert l
            q = (
                base.q
                + 2.0 * t * np.conj(du4) * dm4
                + 2.0 * t * du4 * np.conj(np.swapaxes(dm4, -1, -2))
                + (2.0 * t * ddu4 + 4.0 * t**2 * du4 * np.conj(du4)) * m4
            ) * scale[..., None, None, :, :]
        return ChartJet(m=m, dm=dm, q=q)


# ---------------------------------------------------------------------------
# metadata round trips, used by the on-disk immersion format


def _c2pair(value: complex) -> list[float]:
    value = complex(value)
    return [value.real, value.imag]


def _pair2c(pair) -> complex:
    return complex(pair[0], pair[1])


def deck_meta(deck) -> dict:
    if isinstance(deck, ScaleDeck):
        return {"kind": "scale", "factor": _c2pair(deck.factor)}
    if isinstance(deck, TranslationDeck):
        return {"kind": "translation", "offset": [_c2pair(v) for v in deck.offset]}
    raise ValueError(f"cannot serialise deck {deck!r}")


def deck_from_meta(meta: dict):
    if meta["kind"] == "scale":
        return ScaleDeck(_pair2c(meta["factor"]))
    if meta["kind"] == "translation":
        return TranslationDeck(tuple(_pair2c(v) for v in meta["offset"]))
    raise ValueError(f"unknown deck kind {meta['kind']!r}")


def _perturbation_meta(pert) -> dict:
    if isinstance(pert, PolyPotential):
        terms = []
        # stored pairs (mono, conj mono); keep one representative of each
        monos = pert._monos[::2]
        for mo in monos:
            terms.append(
                {"coef": _c2pair(2.0 * mo.coef), "mu": list(mo.mu), "nu": list(mo.nu)}
            )
        return {"kind": "poly", "terms": terms}
    if isinstance(pert, CylinderPotential):
        return {
            "kind": "cylinder",
            "ell": pert.ell,
            "radial_coef": _c2pair(pert.a),
            "radial_mode": pert.m,
            "angular_coef": _c2pair(pert.b),
            "angular_mode": pert.p,
        }
    raise ValueError(f"cannot serialise perturbation {pert!r}")


def _perturbation_from_meta(meta: dict):
    if meta["kind"] == "poly":
        terms = [
            (_pair2c(t["coef"]), tuple(t["mu"]), tuple(t["nu"]))
            for t in meta["terms"]
        ]
        return PolyPotential(terms)
    if meta["kind"] == "cylinder":
        return CylinderPotential(
            ell=meta["ell"],
            radial_coef=_pair2c(meta["radial_coef"]),
            radial_mode=meta["radial_mode"],
            angular_coef=_pair2c(meta["angular_coef"]),
            angular_mode=meta["angular_mode"],
        )
    raise ValueError(f"unknown perturbation kind {meta['kind']!r}")


def chart_meta(chart: KahlerChart) -> dict:
    decks = [deck_meta(d) for d in chart.decks]
    if isinstance(chart, PerturbedChart):
        return {
            "kind": "perturbed",
            "mode": chart.mode,
            "t": chart.t,
            "base": chart_meta(chart.base),
            "perturbation": _perturbation_meta(chart.perturbation),
        }
    if isinstance(chart, FlatChart):
        return {"kind": "flat", "dim": chart.dim, "decks": decks}
    if isinstance(chart, FubiniStudyChart):
        return {"kind": "fubini_study", "dim": chart.dim, "c": chart.c}
    if isinstance(chart, HyperbolicBallChart):
        return {"kind": "hyperbolic_ball", "dim": chart.dim, "c": chart.c}
    if isinstance(chart, UpperHalfPlaneChart):
        return {"kind": "upper_half_plane", "c": chart.c, "decks": decks}
    raise ValueError(f"cannot serialise chart {chart!r}")


def chart_from_meta(meta: dict) -> KahlerChart:
    kind = meta["kind"]
    decks = tuple(deck_from_meta(d) for d in meta.get("decks", []))
    if kind == "flat":
        return FlatChart(meta["dim"], decks=decks)
    if kind == "fubini_study":
        return FubiniStudyChart(meta["dim"], c=meta["c"])
    if kind == "hyperbolic_ball":
        return HyperbolicBallChart(meta["dim"], c=meta["c"])
    if kind == "upper_half_plane":
        return UpperHalfPlaneChart(c=meta["c"], decks=decks)
    if kind == "perturbed":
        return PerturbedChart(
            chart_from_meta(meta["base"]),
            _perturbation_from_meta(meta["perturbation"]),
            t=meta["t"],
            mode=meta["mode"],
        )
    raise ValueError(f"unknown chart kind {kind!r}")
