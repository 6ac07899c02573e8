"""Built-in reference structures.

``sw<n>``             Smorodinski-Winternitz product P_iii = -1/x_i with its abundant pair
``sw<n>-paper-sign``  the same with P_iii = +1/x_i; violates (P2), kept as a negative control
``zero<n>``           P = 0, S = 0, t = 0
``puretrace<n>``      S = 0, t = x_1 + ... + x_n and its product; a diagnostic baseline,
                      not an abundant structure
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .abundant import AbundantStructure
from .exprfield import ScalarFieldExpr, derivative_tensor
from .product import ProductStructure
from .reports import report, require_inside, sample_points

SW_BOX = (0.05, 20.0)


@dataclass(eq=False)
class CatalogEntry:
    name: str
    dim: int
    product: ProductStructure
    abundant: AbundantStructure | None
    v_basis: list | None = None
    k_basis: list | None = None
    euler: list | None = None
    unit_sign: int = -1
    flags: dict = field(default_factory=dict)

    @property
    def domain(self):
        return self.product.domain


def _c(v, n):
    return ScalarFieldExpr.constant(v, n)


def _x(i, n):
    return ScalarFieldExpr.coordinate(i, n)


def sw_v_basis(n):
    r2 = _c(0.0, n)
    for i in range(n):
        r2 = r2 + _x(i, n) ** 2
    return [_c(1.0, n), r2] + [1.0 / _x(i, n) ** 2 for i in range(n)]


def sw_k_basis(n):
    zero = _c(0.0, n)
    out = []
    for i in range(n):
        K = np.full((n, n), zero, dtype=object)
        K[i, i] = _c(1.0, n)
        out.append(K)
    for i in range(n):
        for j in range(i + 1, n):
            # (x_i dx_j - x_j dx_i)^2
            K = np.full((n, n), zero, dtype=object)
            K[i, i] = _x(j, n) ** 2
            K[j, j] = _x(i, n) ** 2
            K[i, j] = K[j, i] = -(_x(i, n) * _x(j, n))
            out.append(K)
    return out


def smorodinski_winternitz(n, plus_sign=False):
    if n < 3:
        raise ValueError("the catalog starts at n = 3")
    box = [SW_BOX] * n
    c = 1.0 if plus_sign else -1.0
    name = f"sw{n}" + ("-paper-sign" if plus_sign else "")
    P = ProductStructure(n, {(i, i, i): _c(c, n) / _x(i, n) for i in range(n)}, box, name=name)
    euler = [_x(i, n) for i in range(n)]
    if plus_sign:
        return CatalogEntry(name, n, P, None, euler=euler, unit_sign=1,
                            flags={"convention": "paper-example-box", "expect_P2": False})
    S = {}
    for i in range(n):
        S[(i, i, i)] = _c(-3.0 * (n - 1) / (n + 2), n) / _x(i, n)
        for k in range(n):
            if k != i:
                S[tuple(sorted((i, i, k)))] = _c(3.0 / (n + 2), n) / _x(k, n)
    t = _c(0.0, n)
    for i in range(n):
        t = t + _c(-3.0 / (n + 2), n) * _x(i, n).apply("log")
    A = AbundantStructure(n, S, t, box, name=name + "/abundant")
    return CatalogEntry(name, n, P, A, sw_v_basis(n), sw_k_basis(n), euler, -1,
                        {"convention": "canonical"})


def zero_entry(n):
    box = [SW_BOX] * n
    name = f"zero{n}"
    P = ProductStructure(n, {}, box, name=name)
    A = AbundantStructure(n, {}, _c(0.0, n), box, name=name + "/abundant")
    r2 = _c(0.0, n)
    for i in range(n):
        r2 = r2 + _x(i, n) ** 2
    v_basis = [_c(1.0, n)] + [_x(i, n) for i in range(n)] + [r2]
    zero = _c(0.0, n)
    k_basis = []
    for i in range(n):
        for j in range(i, n):
            K = np.full((n, n), zero, dtype=object)
            K[i, j] = K[j, i] = _c(1.0, n)
            k_basis.append(K)
    return CatalogEntry(name, n, P, A, v_basis, k_basis, flags={"convention": "trivial"})


def pure_trace_entry(n):
    from .correspondence import abundant_to_product

    box = [SW_BOX] * n
    name = f"puretrace{n}"
    t = _c(0.0, n)
    for i in range(n):
        t = t + _x(i, n)
    A = AbundantStructure(n, {}, t, box, name=name + "/abundant")
    P = abundant_to_product(A, check=False)
    P.name = name
    return CatalogEntry(name, n, P, A, flags={"convention": "trivial", "abundant": False})


def trivial_entries(n):
    return [zero_entry(n), pure_trace_entry(n)]


_PATTERNS = [
    (re.compile(r"sw(\d+)-paper-sign$"), lambda n: smorodinski_winternitz(n, True)),
    (re.compile(r"sw(\d+)$"), smorodinski_winternitz),
    (re.compile(r"zero(\d+)$"), zero_entry),
    (re.compile(r"puretrace(\d+)$"), pure_trace_entry),
]


def get_entry(name):
    for pat, make in _PATTERNS:
        m = pat.match(name)
        if m:
            return make(int(m.group(1)))
    raise KeyError(f"unknown catalog entry {name!r}")


def list_entries(dims=(3, 4, 5)):
    names = []
    for n in dims:
        names += [f"sw{n}", f"sw{n}-paper-sign", f"zero{n}", f"puretrace{n}"]
    return names


def check_euler_unit(entry, pts=None, tol=1e-12):
    """Lie derivatives of g and P along E = sum x_i d_i, and the unit property of u."""
    if entry.euler is None:
        raise ValueError(f"entry {entry.name} has no Euler field")
    n = entry.dim
    X = sample_points(entry.domain) if pts is None else require_inside(pts, entry.domain)
    E, dE = derivative_tensor(np.array(entry.euler, dtype=object), X, 1)  # dE[a, i] = d_i E^a
    T, dT = entry.product.tensor(X, 1)
    g2 = np.swapaxes(dE, -1, -2) + dE  # (L_E g)_ij = d_i E^j + d_j E^i
    r_g = g2 - 2 * np.eye(n)
    lie_P = (np.einsum("ma,mijka->mijk", E, dT) + np.einsum("majk,mai->mijk", T, dE)
             + np.einsum("miak,maj->mijk", T, dE) - np.einsum("mija,mka->mijk", T, dE))

    def unit(sign):
        return np.einsum("mi,mijk->mjk", sign * E, T) - np.eye(n)

    r_u = unit(entry.unit_sign)
    details = {
        "lie_g_minus_2g": float(np.max(np.abs(r_g))),
        "lie_P": float(np.max(np.abs(lie_P))),
        "unit_sign": entry.unit_sign,
        "unit_residual": float(np.max(np.abs(r_u))),
        "unit_residual_opposite_sign": float(np.max(np.abs(unit(-entry.unit_sign)))),
        "lie_u_g_factor": 2 * entry.unit_sign,
    }
    R = np.concatenate([r_g.reshape(len(X), -1), lie_P.reshape(len(X), -1),
                        r_u.reshape(len(X), -1)], axis=1)
    return report("euler_unit", X, R, tol, details)
