"""Single record of the sign and scaling conventions used everywhere.

Every sign-sensitive quantity in the package is defined relative to this
record; scenario summaries embed its hash so that output files are tied to
one fixed convention set.  Changing any entry is a breaking change.
"""

from __future__ import annotations

import hashlib
import json

CONVENTIONS: dict[str, str] = {
    "complex_structure": "J is coordinate multiplication by i in every chart",
    "hermitian_matrix": "m = 2 * d^2 K / dz_i dzbar_j; pairing h(u,v) = u^T m conj(v)",
    "metric": "g(u,v) = Re h(u,v)",
    "kahler_form": "omega(u,v) = -Im h(u,v), equal to i ddbar K as a real 2-form",
    "compatibility": "omega(u,v) = g(Ju,v)",
    "ricci_matrix": "s = -2 ddbar log det m; Ric(u,v) = Re(u^T s conj(v))",
    "ricci_form": "rho(u,v) = -Im(u^T s conj(v)); Ric(u,v) = -rho(Ju,v)",
    "einstein": "rho = lambda * omega, i.e. s = lambda * m",
    "flat_normalisation": "flat C^n has K = |z|^2 / 2 and m = identity",
    "dc_operator": "(d^c f)(u) = Im(sum_k df/dz_k u_k), so d d^c f = i ddbar f",
    "maslov_sign": "round circle of radius r in flat C^1: xi = -dtheta, loop integral -2pi,"
    " H_J points inward with |H_J| = 1/r",
    "laplacian": "Delta = d* d is nonnegative: Delta cos(k theta) = k^2 cos(k theta)"
    " on the unit circle",
    "moser_equation": "omega_t(X_t, .) + alphadot_t = 0 with d alphadot_t = d/dt omega_t",
    "grid_parameter": "each grid axis has period 2 pi",
}


def convention_hash() -> str:
    """Stable short hash of the convention record."""
    payload = json.dumps(CONVENTIONS, sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()[:16]
