"""Linearised stability theory for the J-volume functional.

Variation formulas for the J-volume under normal deformations J*Y, the
pulled-back ambient Ricci endomorphism that identifies such deformations
with one-forms, the induced immersion for a given one-form, and the two
linearised stability operators (on one-forms and on mean-free scalars)
together with a deterministic spectrum routine.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    EigensolverFailure,
    NotCritical,
    SingularRicciOperator,
)
from .immersion import GridImmersion, GridOneForm, _payload
from .maslov import maslov_form

# Operators are only meaningful at critical points of the J-volume; the
# threshold is relaxable so continuation can reuse them as approximate
# Jacobians away from the solution.
DEFAULT_CRITICAL_TOL = 1e-4
DEFAULT_DET_TOL = 1e-10
DENSE_EIG_LIMIT = 4096

__all__ = [
    "DEFAULT_CRITICAL_TOL",
    "LinearOperator",
    "RicciEndomorphism",
    "d_maslov",
    "first_variation",
    "operator_L",
    "operator_Ltilde",
    "pulled_back_ricci",
    "ricci_endomorphism",
    "second_variation_at_critical",
    "spectrum",
    "weinstein_immersion",
]


def pulled_back_ricci(imm: GridImmersion) -> np.ndarray:
    """Ambient Ricci tensor restricted to the tangent grid frame.

    Returns the per-node symmetric matrix of Ric(T_a, T_b) where T_a are
    the coordinate tangents of the immersion.
    """
    s = imm.chart.ricci_matrix(imm.points)
    t = imm.tangents
    ric = np.real(np.einsum("...ai,...ij,...bj->...ab", t, s, np.conj(t)))
    return 0.5 * (ric + np.swapaxes(ric, -1, -2))


@dataclass(frozen=True)
class RicciEndomorphism:
    """Per-node endomorphism representing the ambient Ricci tensor.

    ``matrix`` holds the g-self-adjoint operator with
    Ric(X, Y) = g(matrix X, Y) in the grid frame; ``sign`` is +1 or -1
    when the eigenvalues share that sign at every node, else 0.
    """

    matrix: np.ndarray
    sign: int

    def solve(self, vectors: np.ndarray) -> np.ndarray:
        """Nodewise application of the inverse to intrinsic vectors."""
        return np.linalg.solve(self.matrix, vectors[..., None])[..., 0]


def ricci_endomorphism(
    imm: GridImmersion, det_tol: float = DEFAULT_DET_TOL
) -> RicciEndomorphism:
    """Solve nodewise for the endomorphism equivalent to the pulled-back Ricci.

    Raises SingularRicciOperator when the endomorphism is not invertible
    somewhere (flat ambient spaces in particular), since the deformation
    dictionary built on top inverts it.
    """
    ric = pulled_back_ricci(imm)
    matrix = np.einsum("...ab,...bc->...ac", imm.induced_metric_inv, ric)
    det = np.linalg.det(matrix)
    worst = float(np.min(np.abs(det)))
    if worst < det_tol:
        raise SingularRicciOperator(
            f"pulled-back Ricci endomorphism has |det| = {worst:.3e} < {det_tol:.1e}"
        )
    # eigenvalues of g^{-1} Ric through the symmetric pencil (Ric, g)
    chol = np.linalg.cholesky(imm.induced_metric)
    half = np.linalg.solve(chol, ric)
    pencil = np.linalg.solve(chol, np.swapaxes(half, -1, -2))
    eig = np.linalg.eigvalsh(0.5 * (pencil + np.swapaxes(pencil, -1, -2)))
    if np.all(eig > 0.0):
        sign = 1
    elif np.all(eig < 0.0):
        sign = -1
    else:
        sign = 0
    return RicciEndomorphism(matrix=matrix, sign=sign)


def _normal_field(imm: GridImmersion, y: np.ndarray) -> np.ndarray:
    """Ambient components of J applied to the pushed-forward tangent field."""
    return 1j * imm.push_tangent(y)


def weinstein_immersion(
    imm: GridImmersion,
    alpha,
    det_tol: float = DEFAULT_DET_TOL,
    name: Optional[str] = None,
) -> GridImmersion:
    """Immersion obtained from a one-form through the deformation dictionary.

    The one-form is converted nodewise to a tangent field Y solving
    alpha = -Ric(Y, .), and each node moves along the ambient geodesic with
    initial velocity J Y.  The zero form reproduces the input immersion
    exactly; the differential at zero is the J Y deformation field.
    """
    alpha = _payload(alpha)
    if not np.any(alpha):
        return imm
    endo = ricci_endomorphism(imm, det_tol=det_tol)
    y = -endo.solve(imm.raise_index(alpha))
    points = imm.chart.ambient_exp(imm.points, _normal_field(imm, y))
    moved = imm.with_points(points, name=name or f"{imm.name}+oneform")
    moved.rho  # force the total-reality check eagerly
    return moved


def first_variation(imm: GridImmersion, y) -> float:
    """Derivative of the J-volume under the deformation field J*Y.

    Equals the integral of the Maslov form against Y in the J-volume
    measure; Y is an intrinsic tangent field in grid components.
    """
    xi = maslov_form(imm).xi.data
    y = _payload(y)
    return float(imm.integrate(np.einsum("...a,...a->...", xi, y), weight="J"))


def _require_critical(imm: GridImmersion, tol: float) -> float:
    sup = maslov_form(imm).sup_norm
    if not sup <= tol:
        raise NotCritical(
            f"sup |maslov form| = {sup:.3e} exceeds the critical tolerance {tol:.1e}"
        )
    return sup


def second_variation_at_critical(
    imm: GridImmersion, y, critical_tol: float = DEFAULT_CRITICAL_TOL
) -> float:
    """Second derivative of the J-volume at a critical immersion.

    Value of the quadratic form: the square of the J-weighted divergence
    of Y minus the Ricci quadratic term, both integrated in the J-volume
    measure.  Only valid at critical points, where it is independent of
    how the deformation is extended in time.
    """
    _require_critical(imm, critical_tol)
    y = _payload(y)
    div = imm.divergence(y, weight="J")
    ric_yy = np.einsum("...ab,...a,...b->...", pulled_back_ricci(imm), y, y)
    return float(imm.integrate(div * div - ric_yy, weight="J"))


def d_maslov(imm: GridImmersion, y) -> GridOneForm:
    """Linearisation of the Maslov form under the deformation field J*Y.

    Returns -d(div_J Y) - Ric(., Y) as a grid one-form; matches the
    finite-difference derivative of the Maslov form at critical points.
    """
    y = _payload(y)
    div = imm.divergence(y, weight="J")
    ric_y = np.einsum("...ab,...b->...a", pulled_back_ricci(imm), y)
    return GridOneForm(-imm.d_scalar(div) - ric_y)


@dataclass
class LinearOperator:
    """Matrix-free linear operator over grid unknowns.

    ``apply`` maps a field to a field of the same shape; ``domain`` tags
    the space acted on ("scalar-zero-mean" or "one-form"); ``gram`` is the
    quadrature Gram matrix of the J-volume inner product, either diagonal
    (flattened weights, ndim 1) or block-diagonal per node (ndim 3).  The
    assembled matrix is built on demand by applying the operator to
    coordinate basis fields.
    """

    apply: Callable[[np.ndarray], np.ndarray]
    domain: str
    field_shape: tuple
    gram: np.ndarray
    _matrix: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return int(np.prod(self.field_shape))

    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            n = self.size
            out = np.empty((n, n))
            basis = np.zeros(self.field_shape)
            flat = basis.reshape(-1)
            for j in range(n):
                flat[j] = 1.0
                out[:, j] = np.asarray(self.apply(basis)).reshape(-1)
                flat[j] = 0.0
            self._matrix = out
        return self._matrix


def operator_L(
    imm: GridImmersion,
    critical_tol: float = DEFAULT_CRITICAL_TOL,
    det_tol: float = DEFAULT_DET_TOL,
) -> LinearOperator:
    """Stability operator on closed grid one-forms.

    alpha -> d(div_J(-(-Ric)^{-1} alpha sharp)) + alpha, written so that it
    agrees with d of the scalar operator on exact forms.
    """
    _require_critical(imm, critical_tol)
    endo = ricci_endomorphism(imm, det_tol=det_tol)

    def apply(alpha):
        alpha = _payload(alpha)
        y = endo.solve(imm.raise_index(alpha))
        return imm.d_scalar(imm.divergence(y, weight="J")) + alpha

    blocks = imm.j_weights[..., None, None] * imm.induced_metric_inv
    return LinearOperator(
        apply=apply,
        domain="one-form",
        field_shape=imm.grid_shape + (imm.n,),
        gram=blocks.reshape(-1, imm.n, imm.n),
    )


def operator_Ltilde(
    imm: GridImmersion,
    critical_tol: float = DEFAULT_CRITICAL_TOL,
    det_tol: float = DEFAULT_DET_TOL,
) -> LinearOperator:
    """Stability operator on scalars with zero J-volume mean.

    f -> div_J(Ric^{-1} grad f) + f after projecting out the J-volume mean.
    Self-adjoint in the J-volume inner product; preserves the zero-mean
    constraint exactly at the quadrature level.
    """
    _require_critical(imm, critical_tol)
    endo = ricci_endomorphism(imm, det_tol=det_tol)
    weights = imm.j_weights
    total = float(np.sum(weights))

    def apply(f):
        f = _payload(f)
        f = f - np.sum(f * weights) / total
        y = endo.solve(imm.raise_index(imm.d_scalar(f)))
        return imm.divergence(y, weight="J") + f

    return LinearOperator(
        apply=apply,
        domain="scalar-zero-mean",
        field_shape=imm.grid_shape,
        gram=weights.reshape(-1).copy(),
    )


def _dense_gram(gram: np.ndarray, size: int) -> np.ndarray:
    """Expand block-diagonal per-node Gram blocks to a dense matrix."""
    nodes, n, _ = gram.shape
    dense = np.zeros((size, size))
    idx = np.arange(nodes) * n
    for a in range(n):
        for b in range(n):
            dense[idx + a, idx + b] = gram[:, a, b]
    return dense


def _symmetrized_matrix(op: LinearOperator) -> np.ndarray:
    """Similarity transform making the operator symmetric in its Gram metric."""
    m = op.matrix()
    if op.gram.ndim == 1:
        root = np.sqrt(op.gram)
        sym = m * (root[:, None] / root[None, :])
    else:
        chol = np.linalg.cholesky(_dense_gram(op.gram, op.size))
        sym = chol.T @ np.linalg.solve(chol, m.T).T
    return 0.5 * (sym + sym.T)


def _zero_mean_restriction(op: LinearOperator, sym: np.ndarray) -> np.ndarray:
    """Project out the constant direction via a Householder reflection."""
    if op.gram.ndim != 1:
        return sym
    root = np.sqrt(op.gram)
    v = root.copy()
    v[0] += np.linalg.norm(root)
    v /= np.linalg.norm(v)
    reflected = sym - 2.0 * np.outer(v, v @ sym)
    reflected = reflected - 2.0 * np.outer(reflected @ v, v)
    return reflected[1:, 1:]


def spectrum(op: LinearOperator, count: int) -> np.ndarray:
    """The ``count`` smallest-magnitude eigenvalues, sorted ascending.

    Eigenvalues are computed from the operator symmetrized in its J inner
    product; for the scalar operator the constant direction is removed
    first, so the reported spectrum is that of the zero-mean restriction.

    The reported values are those of the discrete operator, which differ
    from the continuum near the grid Nyquist frequency: the centred
    stencil symbol vanishes there, so the highest modes fold back towards
    the zeroth-order part of the operator.  Callers matching continuum
    eigenvalues should locate them by nearest match rather than by rank.

    Dense solve only, up to DENSE_EIG_LIMIT unknowns.  Beyond that the
    bottom of the spectrum would need a shift-invert iteration backed by a
    sparse factorization, which this build does not carry; the routine
    raises instead of returning unconverged estimates.
    """
    if count < 1:
        raise ValueError("count must be positive")
    if op.size > DENSE_EIG_LIMIT:
        raise EigensolverFailure(
            f"{op.size} unknowns exceed the dense eigensolver limit "
            f"({DENSE_EIG_LIMIT}); reduce the resolution"
        )
    sym = _symmetrized_matrix(op)
    if op.domain == "scalar-zero-mean":
        sym = _zero_mean_restriction(op, sym)
    try:
        values = np.linalg.eigvalsh(sym)
    except np.linalg.LinAlgError as exc:
        raise EigensolverFailure(str(exc)) from exc
    if not np.all(np.isfinite(values)):
        raise EigensolverFailure("eigensolver returned non-finite values")
    order = np.argsort(np.abs(values), kind="stable")[:count]
    return np.sort(values[order])
