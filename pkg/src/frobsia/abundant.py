"""Abundant structures (S, t) on flat space (kappa = 0) and their axioms (A1)-(A3)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exprfield import ScalarFieldExpr, as_field, derivative_tensor
from .fields import field_derivatives
from .paths import POLE_MARGIN
from .product import normalize_components, symmetric_array
from .reports import (DEFAULT_POINTS, DEFAULT_SEED, DEFAULT_TOL, as_box, report,
                      require_inside, sample_points)
from .tensorlab import (PointTensor, norm_sq, pair_product, quad_form, ricci_contraction,
                        sym3_pure_trace, sym_project, trace_free_sym3, trace_sym3, weyl_project)


@dataclass(eq=False)
class AbundantStructure:
    dim: int
    S_components: dict
    t: object
    domain: np.ndarray
    name: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 3:
            raise ValueError("abundant structures need dim >= 3")
        self.domain = as_box(self.domain, self.dim)
        self.S_components = normalize_components(self.S_components, self.dim)
        if isinstance(self.t, (str, int, float)):
            self.t = as_field(self.t, self.dim)
        self._array = symmetric_array(self.S_components, self.dim)

    @property
    def field_array(self):
        return self._array

    @property
    def t_closed_form(self):
        return isinstance(self.t, ScalarFieldExpr)

    def S_tensor(self, X, extra_orders=0):
        X = require_inside(X, self.domain)
        return derivative_tensor(self._array, X, extra_orders)

    def t_derivatives(self, X, k, start=1):
        X = require_inside(X, self.domain)
        return field_derivatives(self.t, X, k, start)

    def sample(self, count=DEFAULT_POINTS, seed=DEFAULT_SEED):
        # kept off the faces so path-integrated quantities can reach every point
        return sample_points(self.domain, count, seed, inset=POLE_MARGIN)


def _pts(A, pts):
    return A.sample() if pts is None else require_inside(pts, A.domain)


# pointwise algebra on arrays S (..., n, n, n), dt (..., n)


def digamma_tensor(S, dt):
    n = S.shape[-1]
    g = np.eye(n)
    SS = quad_form(S)
    return (np.einsum("...xwa,...yza->...xyzw", S, S)
            + 3 * np.einsum("...xyw,...z->...xyzw", S, dt)
            + np.einsum("...xyz,...w->...xyzw", S, dt)
            + np.einsum("...yz,xw->...xyzw", 4 / (n - 2) * SS
                        - 3 * np.einsum("...yza,...a->...yz", S, dt), g))


def a1_rhs(S, dt):
    """(1/3) of digamma made symmetric and trace-free in its first three slots."""
    F = np.moveaxis(digamma_tensor(S, dt), -1, -4)  # (..., w, x, y, z)
    F = trace_free_sym3(sym_project(F, 3))
    return np.moveaxis(F, -4, -1) / 3.0


def a2_rhs(S, dt):
    n = S.shape[-1]
    g = np.eye(n)
    tt = np.einsum("...i,...j->...ij", dt, dt)
    dt2 = norm_sq(dt, 1)[..., None, None]
    S2 = norm_sq(S, 3)[..., None, None]
    return ((tt - 0.5 * dt2 * g) / 3
            + (quad_form(S) + (n - 6) * S2 * g / (2 * (n - 1) * (n + 2))) / (3 * (n - 2)))


def a2_rhs_closed_form(S, dt):
    n = S.shape[-1]
    g = np.eye(n)
    tt = np.einsum("...i,...j->...ij", dt, dt)
    dt2 = norm_sq(dt, 1)[..., None, None]
    return quad_form(S) / (3 * (n - 2)) + (tt - 2 / (n - 2) * dt2 * g) / 3


def perf_sq(S, dt):
    n = S.shape[-1]
    return norm_sq(S, 3) - (n - 1) * (n + 2) * norm_sq(dt, 1)


def b_tensor(S, dt):
    return -(S + 3 * sym3_pure_trace(dt)) / 3


def a3_tensor(B):
    return (np.einsum("...ika,...jla->...ijkl", B, B)
            - np.einsum("...ila,...jka->...ijkl", B, B))


def ricci_closed_form(S, dt):
    """9 x the Ricci contraction of the raw (A3) tensor, in terms of (S, dt)."""
    n = S.shape[-1]
    g = np.eye(n)
    tt = np.einsum("...i,...j->...ij", dt, dt)
    return ((n - 2) * np.einsum("...ija,...a->...ij", S, dt) + (n - 2) * tt
            + n * norm_sq(dt, 1)[..., None, None] * g - quad_form(S))


def reduced_condition(S, dt):
    """Trace-free part of (n-2) S(grad t) + (n-2) dt dt - 𝒮."""
    n = S.shape[-1]
    tt = np.einsum("...i,...j->...ij", dt, dt)
    X = (n - 2) * np.einsum("...ija,...a->...ij", S, dt) + (n - 2) * tt - quad_form(S)
    tr = np.einsum("...aa->...", X)
    return X - tr[..., None, None] * np.eye(n) / n


# checks


def digamma(A, x0):
    x0 = np.asarray(x0, dtype=float)
    (S,) = A.S_tensor(x0[None], 0)
    (dt,) = A.t_derivatives(x0[None], 1)
    return PointTensor(digamma_tensor(S, dt)[0])


def check_trace_free(A, pts=None, tol=1e-12):
    X = _pts(A, pts)
    (S,) = A.S_tensor(X, 0)
    return report("S_trace_free", X, trace_sym3(S), tol)


def check_A1(A, pts=None, tol=DEFAULT_TOL):
    X = _pts(A, pts)
    S, dS = A.S_tensor(X, 1)
    (dt,) = A.t_derivatives(X, 1)
    rhs = a1_rhs(S, dt)
    rhs_trace = float(np.max(np.abs(np.einsum("...aayw->...yw", rhs)), initial=0.0))
    return report("A1", X, dS - rhs, tol, {"rhs_trace": rhs_trace})


def check_A2(A, pts=None, tol=DEFAULT_TOL):
    X = _pts(A, pts)
    (S,) = A.S_tensor(X, 0)
    dt, ddt = A.t_derivatives(X, 2)
    r1 = a2_rhs(S, dt)
    r2 = a2_rhs_closed_form(S, dt)
    ps = np.abs(perf_sq(S, dt))
    gap = np.max(np.abs(r1 - r2), axis=(-1, -2))
    where = ps < tol
    details = {
        "closed_form_residual": float(np.max(np.abs(ddt - r2))),
        "forms_gap": float(np.max(gap)),
        "forms_gap_where_perf_sq": float(np.max(gap[where], initial=0.0)),
        "perf_sq_residual": float(np.max(ps)),
    }
    return report("A2", X, ddt - r1, tol, details)


def check_A3(A, pts=None, tol=DEFAULT_TOL):
    X = _pts(A, pts)
    n = A.dim
    (S,) = A.S_tensor(X, 0)
    (dt,) = A.t_derivatives(X, 1)
    B = b_tensor(S, dt)
    raw = a3_tensor(B)
    weyl = weyl_project(pair_product(B))
    ric = ricci_contraction(raw)
    ric_identity = np.abs(9 * ric - ricci_closed_form(S, dt))
    red = reduced_condition(S, dt)
    ps = perf_sq(S, dt)
    details = {
        "weyl_residual": float(np.max(np.abs(weyl))),
        "ricci_residual": float(np.max(np.abs(ric))),
        "ricci_identity_gap": float(np.max(ric_identity)),
        "reduced_residual": float(np.max(np.abs(red))),
        "perf_sq_residual": float(np.max(np.abs(ps))),
    }
    res = float(np.max(np.abs(raw)))
    decomposed = max(details["weyl_residual"], details["ricci_residual"],
                     details["reduced_residual"], details["perf_sq_residual"] / (n + 2))
    details["internal_error"] = bool(res <= tol and decomposed > 10 * tol)
    return report("A3", X, raw, tol, details)


def check_9B_identities(A, pts=None, tol=1e-11):
    X = _pts(A, pts)
    (S,) = A.S_tensor(X, 0)
    (dt,) = A.t_derivatives(X, 1)
    return nine_b_report(X, S, dt, tol)


def nine_b_residuals(S, dt):
    n = S.shape[-1]
    B = b_tensor(S, dt)
    tt = np.einsum("...i,...j->...ij", dt, dt)
    dt2 = norm_sq(dt, 1)
    rhs = (quad_form(S) + 4 * np.einsum("...ija,...a->...ij", S, dt) + (n + 6) * tt
           + 2 * dt2[..., None, None] * np.eye(n))
    r1 = 9 * quad_form(B) - rhs
    r2 = 9 * norm_sq(B, 3) - (norm_sq(S, 3) + 3 * (n + 2) * dt2)
    return r1, r2


def nine_b_report(X, S, dt, tol=1e-11):
    r1, r2 = nine_b_residuals(S, dt)
    R = np.concatenate([r1.reshape(len(r1), -1), np.reshape(r2, (-1, 1))], axis=1)
    return report("9B", X, R, tol, {"9B_tensor": float(np.max(np.abs(r1))),
                                    "9B_norm": float(np.max(np.abs(r2)))})


def verify_abundant(A, pts=None, tol=DEFAULT_TOL):
    X = _pts(A, pts)
    return [check_trace_free(A, X, max(tol, 1e-12)), check_A1(A, X, tol), check_A2(A, X, tol),
            check_A3(A, X, tol), check_9B_identities(A, X, max(tol, 1e-11))]
