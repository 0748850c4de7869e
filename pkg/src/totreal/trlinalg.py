"""Pointwise linear algebra of Hermitian spaces and totally real planes.

A Hermitian structure at a point is stored as the matrix ``m`` of the
sesquilinear pairing h(u, v) = u^T m conj(v); the Riemannian metric is
Re h and the Kahler two-form is -Im h.  The complex structure J is always
coordinate multiplication by i, so n complex vectors span a totally real
n-plane exactly when they form a complex basis.

All kernels accept leading batch dimensions: a frame argument of shape
(..., n, n) holds one frame per batch entry, with vectors as rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NearComplexPlane

DEFAULT_TR_TOL = 1e-10
HERMITIAN_TOL = 1e-13


@dataclass(frozen=True)
class HermitianStructure:
    """Matrix of the pairing h = g - i omega at a point.

    ``matrix`` may carry leading batch dimensions; the trailing two axes
    must form a Hermitian positive definite matrix.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", m)
        if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
            raise ValueError(f"expected square matrices, got shape {m.shape}")
        herm_gap = np.max(np.abs(m - np.conj(np.swapaxes(m, -1, -2))))
        scale = max(float(np.max(np.abs(m))), 1.0)
        if herm_gap > HERMITIAN_TOL * scale:
            raise ValueError(f"matrix is not Hermitian (gap {herm_gap:.3e})")
        eigs = np.linalg.eigvalsh(m)
        if np.min(eigs) <= 0.0:
            raise ValueError("matrix is not positive definite")

    @property
    def dimension(self) -> int:
        return self.matrix.shape[-1]

    @classmethod
    def flat(cls, n: int) -> "HermitianStructure":
        return cls(np.eye(n, dtype=complex))


@dataclass(frozen=True)
class TangentFrame:
    """Frame of n complex tangent vectors, stored as rows of ``vectors``."""

    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=complex)
        object.__setattr__(self, "vectors", v)
        if v.ndim < 2 or v.shape[-1] != v.shape[-2]:
            raise ValueError(f"expected n x n frames, got shape {v.shape}")

    @property
    def dimension(self) -> int:
        return self.vectors.shape[-1]


@dataclass(frozen=True)
class Projections:
    """Real projection matrices of the splitting R^2n = pi + J pi."""

    onto_tangent: np.ndarray
    onto_normal: np.ndarray


@dataclass(frozen=True)
class CanonicalVolume:
    """Value and chart phase of the normalised canonical (n,0)-form.

    ``value`` is the evaluation on the plane's own orthonormal frame (real,
    positive, equal to rho_j); ``phase`` is the unit complex number that
    locates the form in the chart trivialisation dz_1 ^ ... ^ dz_n, and
    ``coefficient`` = sqrt(det m) * phase is the full chart coefficient.
    """

    value: np.ndarray
    phase: np.ndarray
    coefficient: np.ndarray


# ---------------------------------------------------------------------------
# raw kernels


def pairing(u: np.ndarray, v: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Sesquilinear pairing h(u, v) = u^T m conj(v), batched."""
    return np.einsum("...i,...ij,...j->...", u, m, np.conj(v))


def metric_pairing(u, v, m):
    return np.real(pairing(u, v, m))


def omega_pairing(u, v, m):
    return -np.imag(pairing(u, v, m))


def realify(v: np.ndarray) -> np.ndarray:
    """C^n -> R^2n, stacking (Re, Im) along the last axis."""
    return np.concatenate([np.real(v), np.imag(v)], axis=-1)


def complexify(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1] // 2
    return x[..., :n] + 1j * x[..., n:]


def complex_structure_matrix(n: int) -> np.ndarray:
    """Multiplication by i on R^2n in the (Re, Im) splitting."""
    j = np.zeros((2 * n, 2 * n))
    j[:n, n:] = -np.eye(n)
    j[n:, :n] = np.eye(n)
    return j


def real_structure_matrices(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Realified matrices (G, W) of the metric and the two-form.

    g(u, v) = realify(u)^T G realify(v) and omega(u, v) = realify(u)^T W
    realify(v), with G symmetric and W antisymmetric.
    """
    a = np.real(m)
    b = np.imag(m)
    top = np.concatenate([a, b], axis=-1)
    bot = np.concatenate([-b, a], axis=-1)
    g = np.concatenate([top, bot], axis=-2)
    wtop = np.concatenate([-b, a], axis=-1)
    wbot = np.concatenate([-a, -b], axis=-1)
    w = np.concatenate([wtop, wbot], axis=-2)
    return g, w


def gram_matrix(vectors: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Hermitian Gram matrix G_ab = h(v_a, v_b)."""
    return np.einsum("...ai,...ij,...bj->...ab", vectors, m, np.conj(vectors))


def frame_determinant(vectors: np.ndarray) -> np.ndarray:
    """Complex determinant of the coordinate matrix of the frame."""
    return np.linalg.det(vectors)


def orthonormalize(vectors: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Modified Gram-Schmidt under the real metric Re h.

    Returns a frame spanning the same real plane with the same orientation;
    deterministic in the input order, hence smooth in smooth families.
    """
    n = vectors.shape[-1]
    rows = []
    for a in range(n):
        v = vectors[..., a, :]
        for b in range(a):
            e = rows[b]
            v = v - metric_pairing(v, e, m)[..., None] * e
        norm = np.sqrt(metric_pairing(v, v, m))
        rows.append(v / norm[..., None])
    return np.stack(rows, axis=-2)


def _check_totally_real(vectors: np.ndarray, tol: float) -> np.ndarray:
    det = np.abs(frame_determinant(vectors))
    if np.any(det <= tol):
        raise NearComplexPlane(
            f"frame determinant {float(np.min(det)):.3e} at or below tolerance {tol:.1e}"
        )
    return det


def projection_matrices(
    vectors: np.ndarray, tol: float = DEFAULT_TR_TOL
) -> tuple[np.ndarray, np.ndarray]:
    """Real projections (P_L, P_J) onto span(frame) along J span(frame).

    P_L + P_J = Id, both are idempotent, and J P_L = P_J J.
    """
    _check_totally_real(vectors, tol)
    n = vectors.shape[-1]
    cols_tangent = realify(vectors)  # (..., n, 2n), rows are realified v_a
    cols_normal = realify(1j * vectors)
    basis = np.concatenate([cols_tangent, cols_normal], axis=-2)
    basis = np.swapaxes(basis, -1, -2)  # columns now v_1..v_n, Jv_1..Jv_n
    inv = np.linalg.inv(basis)
    p_l = basis[..., :, :n] @ inv[..., :n, :]
    p_j = basis[..., :, n:] @ inv[..., n:, :]
    return p_l, p_j


def rho_from_frame(
    vectors: np.ndarray, m: np.ndarray, tol: float = DEFAULT_TR_TOL
) -> np.ndarray:
    """J-volume density rho of the plane spanned by the frame.

    Computed as sqrt(det_C of the Hermitian Gram matrix) on the Re h
    orthonormalised frame; always in (0, 1], with 1 exactly on Lagrangian
    planes.
    """
    _check_totally_real(vectors, tol)
    onb = orthonormalize(vectors, m)
    det = np.real(np.linalg.det(gram_matrix(onb, m)))
    return np.sqrt(np.maximum(det, 0.0))


def canonical_coefficients(
    vectors: np.ndarray, m: np.ndarray, tol: float = DEFAULT_TR_TOL
) -> CanonicalVolume:
    _check_totally_real(vectors, tol)
    onb = orthonormalize(vectors, m)
    det_frame = frame_determinant(onb)
    phase = np.conj(det_frame) / np.abs(det_frame)
    det_m = np.real(np.linalg.det(m))
    value = np.abs(det_frame) * np.sqrt(det_m)
    coefficient = np.sqrt(det_m) * phase
    return CanonicalVolume(value=value, phase=phase, coefficient=coefficient)


def lagrangian_defect_raw(vectors: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Max |omega(e_a, e_b)| over the orthonormalised frame."""
    onb = orthonormalize(vectors, m)
    w = -np.imag(gram_matrix(onb, m))
    return np.max(np.abs(w), axis=(-1, -2))


# ---------------------------------------------------------------------------
# public operations on the wrapper types


def _as_arrays(frame: TangentFrame, structure: HermitianStructure):
    v = frame.vectors
    m = structure.matrix
    if v.shape[-1] != m.shape[-1]:
        raise ValueError(
            f"dimension mismatch: frame is {v.shape[-1]}-dimensional, "
            f"structure is {m.shape[-1]}-dimensional"
        )
    return v, m


def hermitian_gram(frame: TangentFrame, structure: HermitianStructure) -> np.ndarray:
    """Gram matrix h(v_a, v_b) of the frame."""
    return gram_matrix(*_as_arrays(frame, structure))


def totally_real_defect(
    frame: TangentFrame, structure: HermitianStructure | None = None
) -> np.ndarray:
    """|det_C| of the coordinate matrix; zero iff the plane meets J-planes.

    The value does not depend on the Hermitian structure; the argument is
    accepted for call-site symmetry with the other operations.
    """
    return np.abs(frame_determinant(frame.vectors))


def projections(frame: TangentFrame, tol: float = DEFAULT_TR_TOL) -> Projections:
    p_l, p_j = projection_matrices(frame.vectors, tol)
    return Projections(onto_tangent=p_l, onto_normal=p_j)


def rho_j(
    frame: TangentFrame, structure: HermitianStructure, tol: float = DEFAULT_TR_TOL
) -> np.ndarray:
    return rho_from_frame(*_as_arrays(frame, structure), tol=tol)


def canonical_volume_coefficients(
    frame: TangentFrame, structure: HermitianStructure, tol: float = DEFAULT_TR_TOL
) -> CanonicalVolume:
    return canonical_coefficients(*_as_arrays(frame, structure), tol=tol)


def lagrangian_defect(frame: TangentFrame, structure: HermitianStructure) -> np.ndarray:
    return lagrangian_defect_raw(*_as_arrays(frame, structure))
