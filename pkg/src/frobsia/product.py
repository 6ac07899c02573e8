"""Commutative product structures P on a box in flat R^n and their axioms.

P is stored on sorted index triples, so total symmetry (and with it
commutativity and metric compatibility of the product) holds by construction.
All derivatives are Cartesian partials taken from exact jets.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IntegrabilityError
from .exprfield import ScalarFieldExpr, as_field, derivative_tensor
from .paths import POLE_MARGIN, axis_polyline, diagonal_polyline, integrate_polyline, path_residual
from .reports import (DEFAULT_POINTS, DEFAULT_SEED, DEFAULT_TOL, as_box, report,
                      require_inside, sample_points)
from .tensorlab import quad_form


def parse_key(key, dim):
    """'112' or '1,1,2' (1-based) -> sorted 0-based triple."""
    parts = key.split(",") if "," in key else list(key)
    idx = tuple(int(p) - 1 for p in parts)
    if len(idx) != 3 or any(not 0 <= i < dim for i in idx):
        raise ValueError(f"bad component key {key!r} for dim {dim}")
    return idx


def format_key(idx, dim):
    labels = [str(i + 1) for i in idx]
    return "".join(labels) if dim <= 9 else ",".join(labels)


def normalize_components(components, dim, require_sorted=False):
    out = {}
    for key, val in components.items():
        idx = parse_key(key, dim) if isinstance(key, str) else tuple(int(i) for i in key)
        if len(idx) != 3 or any(not 0 <= i < dim for i in idx):
            raise ValueError(f"bad component index {key!r}")
        srt = tuple(sorted(idx))
        if require_sorted and srt != idx:
            raise ValueError(f"component key {key!r} is not sorted")
        if srt in out:
            raise ValueError(f"component {srt} given twice")
        f = as_field(val, dim)
        if not (isinstance(f, ScalarFieldExpr) and f.is_zero):
            out[srt] = f
    return dict(sorted(out.items()))


def symmetric_array(components, dim):
    """Object array (n, n, n) of fields from sorted-triple storage."""
    zero = ScalarFieldExpr.constant(0.0, dim)
    arr = np.empty((dim,) * 3, dtype=object)
    for idx in np.ndindex(*arr.shape):
        arr[idx] = components.get(tuple(sorted(idx)), zero)
    return arr


@dataclass(eq=False)
class ProductStructure:
    dim: int
    components: dict
    domain: np.ndarray
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 3:
            raise ValueError("product structures need dim >= 3")
        self.domain = as_box(self.domain, self.dim)
        self.components = normalize_components(self.components, self.dim)
        self._array = symmetric_array(self.components, self.dim)

    @property
    def field_array(self):
        return self._array

    def component(self, i, j, k):
        return self._array[i, j, k]

    def tensor(self, X, extra_orders=0):
        """[P, dP, ...] at points X; dP[..., i, j, k, l] = d_l P_ijk."""
        X = require_inside(X, self.domain)
        return derivative_tensor(self._array, X, extra_orders)

    def sample(self, count=DEFAULT_POINTS, seed=DEFAULT_SEED):
        # kept off the faces so path-integrated quantities can reach every point
        return sample_points(self.domain, count, seed, inset=POLE_MARGIN)


def _pts(P, pts):
    return P.sample() if pts is None else require_inside(pts, P.domain)


def wdvv_tensor(P):
    return (np.einsum("...ija,...akl->...ijkl", P, P)
            - np.einsum("...jka,...ail->...ijkl", P, P))


def check_wdvv(P, pts=None, tol=DEFAULT_TOL):
    X = _pts(P, pts)
    (T,) = P.tensor(X, 0)
    return report("wdvv", X, wdvv_tensor(T), tol)


def check_nabla_compat(P, pts=None, tol=DEFAULT_TOL):
    X = _pts(P, pts)
    T, dT = P.tensor(X, 1)
    R = dT - np.einsum("...lia,...ajk->...ijkl", T, T)
    return report("P2", X, R, tol)


def check_trace_closed(P, pts=None, tol=DEFAULT_TOL):
    """Antisymmetric part of d(tau) is the residual; d_i tau_j - 𝒫_ij goes in details."""
    X = _pts(P, pts)
    T, dT = P.tensor(X, 1)
    dtau = np.einsum("...aaki->...ki", dT)  # dtau[k, i] = d_i tau_k
    anti = dtau - np.swapaxes(dtau, -1, -2)
    sym = np.swapaxes(dtau, -1, -2) - quad_form(T)
    sym_max = float(np.max(np.abs(sym))) if sym.size else 0.0
    return report("trace_closed", X, anti, tol, {"symmetric_residual": sym_max})


def check_hessian_flatness(P, pts=None, tol=DEFAULT_TOL, sign=1):
    """Curvature of the connection with Christoffel symbols sign * P_jka."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    X = _pts(P, pts)
    T, dT = P.tensor(X, 1)
    G, dG = sign * T, sign * dT  # G[j,k,a]; dG[j,k,a,i] = d_i G[j,k,a]
    R = (np.einsum("...jkai->...ijka", dG) - np.einsum("...ikaj->...ijka", dG)
         + np.einsum("...iba,...jkb->...ijka", G, G)
         - np.einsum("...jba,...ikb->...ijka", G, G))
    return report(f"flatness{'+' if sign > 0 else '-'}", X, R, tol)


# potential P = d^3 Phi


@dataclass
class PotentialRecord:
    endpoints: np.ndarray
    phi: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    path_residual: float = 0.0
    hess_asymmetry: float = 0.0


def _potential_rhs(P):
    n = P.dim

    def rhs(x, y):
        m = x.shape[0]
        J = np.zeros((m, 1 + n + n * n, n))
        J[:, 0, :] = y[:, 1:1 + n]
        J[:, 1:1 + n, :] = y[:, 1 + n:].reshape(m, n, n)
        J[:, 1 + n:, :] = derivative_tensor(P.field_array, x, 0)[0].reshape(m, n * n, n)
        return J

    return rhs


def _potential_state(P, vertices):
    n = P.dim
    return integrate_polyline(_potential_rhs(P), vertices, np.zeros(1 + n + n * n), box=P.domain)


def recover_potential(P, basepoint, path=None, endpoints=None, verify=True, path_tol=1e-8):
    """Integrate (Phi, dPhi, d^2 Phi) from zero data at ``basepoint``.

    ``path`` is a vertex array (L, n) or (m, L, n) starting at the basepoint; if
    omitted, axis-aligned polylines to ``endpoints`` are used.  With ``verify``
    the same endpoints are reached along straight chords and the relative
    discrepancy is recorded; above ``path_tol`` an IntegrabilityError is raised.
    """
    n = P.dim
    basepoint = np.asarray(basepoint, dtype=float)
    if path is None:
        path = axis_polyline(basepoint, endpoints)
    path = np.asarray(path, dtype=float)
    if path.ndim == 2:
        path = path[None]
    if not np.allclose(path[:, 0], basepoint):
        raise ValueError("path must start at the basepoint")
    ends = path[:, -1]
    y = _potential_state(P, path)
    m = y.shape[0]
    hess = y[:, 1 + n:].reshape(m, n, n)
    rec = PotentialRecord(ends, y[:, 0], y[:, 1:1 + n], hess,
                          hess_asymmetry=float(np.max(np.abs(hess - np.swapaxes(hess, 1, 2)))))
    if verify:
        y2 = _potential_state(P, diagonal_polyline(basepoint, ends))
        rec.path_residual = path_residual(y, y2)
        if rec.path_residual > path_tol:
            raise IntegrabilityError(
                f"potential is path dependent (residual {rec.path_residual:.3e})",
                rec.path_residual)
    return rec


class RecoveredPotential:
    """Phi as a field: orders 0..2 by integration, order 3 and up from P's jets."""

    def __init__(self, P, basepoint):
        self.P = P
        self.dim = P.dim
        self.basepoint = np.asarray(basepoint, dtype=float)

    def derivatives(self, X, k, start=0):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = []
        if start <= 2:
            rec = recover_potential(self.P, self.basepoint, endpoints=X, verify=False)
            out.extend([rec.phi, rec.grad, rec.hess][start:k + 1])
        if k >= 3:
            out.extend(self.P.tensor(X, k - 3)[max(start, 3) - 3:])
        return out


def check_hessian_potential(P, basepoint, pts=None, tol=DEFAULT_TOL, phi=None):
    """Residual of the third P-covariant derivative of Phi against -2P.

    In Cartesian components the identity reads
    Phi_xyz - 3 P_xyz - (d_z P_xya) Phi_a + P_xyb P_bza Phi_a = -2 P_xyz.
    ``phi`` defaults to the potential recovered from P; any object with
    ``derivatives(X, k, start)`` (or an expression) may be supplied instead.
    """
    from .fields import field_derivatives

    X = sample_points(P.domain, inset=POLE_MARGIN) if pts is None else require_inside(pts, P.domain)
    phi = RecoveredPotential(P, basepoint) if phi is None else phi
    d1, _, d3 = field_derivatives(phi, X, 3, start=1)
    T, dT = P.tensor(X, 1)
    lhs = (d3 - 3 * T - np.einsum("...xyaz,...a->...xyz", dT, d1)
           + np.einsum("...xyb,...bza,...a->...xyz", T, T, d1))
    return report("hessian_potential", X, lhs + 2 * T, tol)


def verify_product(P, pts=None, tol=DEFAULT_TOL, basepoint=None):
    """The full product axiom suite as a list of reports."""
    X = _pts(P, pts)
    reps = [check_wdvv(P, X, tol), check_nabla_compat(P, X, tol), check_trace_closed(P, X, tol),
            check_hessian_flatness(P, X, tol, 1), check_hessian_flatness(P, X, tol, -1)]
    if basepoint is not None:
        reps.append(check_hessian_potential(P, basepoint, X, tol))
    return reps
