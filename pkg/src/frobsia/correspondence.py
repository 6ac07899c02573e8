"""The two correspondence maps between product and abundant structures.

Conventions (flat metric):

    S  = 3 * (trace-free part of P)
    dt = 3/(n+2) * tr(P)          with tr(P)_k = sum_a P_aak
    P  = S/3 + Pi_Sym3(g (x) dt)  (= -B)

These are the signs under which a product satisfying WDVV and the
connection-compatibility axiom lands on a solution of (A1)-(A3) and of the
potential/Killing prolongation systems.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .abundant import AbundantStructure, check_A1, check_A2, check_A3
from .errors import PreconditionError
from .exprfield import BinOp, Const, Coord, Neg, Pow, ScalarFieldExpr
from .fields import GradientField, field_derivatives
from .paths import POLE_MARGIN
from .product import ProductStructure, check_nabla_compat, check_wdvv
from .reports import DEFAULT_TOL, report, require_inside, sample_points


@dataclass
class CorrespondenceResult:
    source: str
    structure: object
    basepoint: np.ndarray
    t_gauge: float = 0.0
    closed_form_t: bool = True
    diagnostics: dict = field(default_factory=dict)


def _const_value(node):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Neg):
        v = _const_value(node.arg)
        return None if v is None else -v
    if isinstance(node, BinOp):
        a, b = _const_value(node.left), _const_value(node.right)
        if a is None or b is None:
            return None
        if node.op == "/":
            return None if b == 0 else a / b
        return {"+": a + b, "-": a - b, "*": a * b}[node.op]
    return None


def _merge(a, b, sb=1.0):
    out = dict(a)
    for k, c in b.items():
        out[k] = out.get(k, 0.0) + sb * c
    return out


def reciprocal_terms(node):
    """{k: c} if node is a sum of terms c / x_k, else None."""
    v = _const_value(node)
    if v is not None:
        return {} if v == 0 else None
    if isinstance(node, Neg):
        r = reciprocal_terms(node.arg)
        return None if r is None else {k: -c for k, c in r.items()}
    if isinstance(node, Pow):
        return {node.base.index: 1.0} if isinstance(node.base, Coord) and node.exponent == -1 else None
    if not isinstance(node, BinOp):
        return None
    if node.op in "+-":
        a, b = reciprocal_terms(node.left), reciprocal_terms(node.right)
        if a is None or b is None:
            return None
        return _merge(a, b, 1.0 if node.op == "+" else -1.0)
    if node.op == "*":
        for c_node, r_node in ((node.left, node.right), (node.right, node.left)):
            c = _const_value(c_node)
            if c is not None:
                r = reciprocal_terms(r_node)
                return None if r is None else {k: c * v for k, v in r.items()}
        return None
    # division
    num = _const_value(node.left)
    if num is not None and isinstance(node.right, Coord):
        return {node.right.index: num}
    den = _const_value(node.right)
    if den:
        r = reciprocal_terms(node.left)
        return None if r is None else {k: v / den for k, v in r.items()}
    return None


def tidy(expr):
    """Rewrite a sum of c / x_k terms as sum_k (sum c) / x_k; other expressions pass through."""
    r = reciprocal_terms(expr.root)
    if r is None:
        return expr
    n = expr.dim
    scale = max((abs(c) for c in r.values()), default=0.0)
    out = ScalarFieldExpr.constant(0.0, n)
    for k in sorted(r):
        if abs(r[k]) > 1e-14 * scale:
            out = out + ScalarFieldExpr.constant(r[k], n) / ScalarFieldExpr.coordinate(k, n)
    return out


def _closed_form_t(dt, basepoint):
    """t = sum c_k log(x_k / b_k) when every dt_k is c_k / x_k; otherwise None."""
    n = len(dt)
    coeffs = []
    for k, f in enumerate(dt):
        r = reciprocal_terms(f.root)
        if r is None:
            return None
        scale = max((abs(c) for c in r.values()), default=0.0)
        r = {j: c for j, c in r.items() if abs(c) > 1e-14 * scale}
        if set(r) - {k}:
            return None
        coeffs.append(r.get(k, 0.0))
    t = ScalarFieldExpr.constant(0.0, n)
    offset = 0.0
    for k, c in enumerate(coeffs):
        if c != 0.0:
            t = t + ScalarFieldExpr.constant(c, n) * ScalarFieldExpr.coordinate(k, n).apply("log")
            offset += c * math.log(basepoint[k])
    return t - offset if offset != 0.0 else t


def trace_exprs(components_array):
    n = components_array.shape[0]
    zero = ScalarFieldExpr.constant(0.0, n)
    out = []
    for k in range(n):
        tau = zero
        for a in range(n):
            tau = tau + components_array[a, a, k]
        out.append(tau)
    return out


def _sorted_triples(n):
    return [(i, j, k) for i in range(n) for j in range(i, n) for k in range(j, n)]


def _pure_trace(w, idx):
    """Component idx of (g_ij w_k + g_jk w_i + g_ki w_j)."""
    i, j, k = idx
    out = ScalarFieldExpr.constant(0.0, w[0].dim)
    if i == j:
        out = out + w[k]
    if j == k:
        out = out + w[i]
    if k == i:
        out = out + w[j]
    return out


def _check_points(box, pts, seed):
    if pts is None:
        return sample_points(box, seed=seed, inset=POLE_MARGIN)
    return require_inside(pts, box)


def product_to_abundant(P, basepoint, pts=None, tol=DEFAULT_TOL, force=False, seed=0):
    """Map a product structure to (S, t); t(basepoint) = 0."""
    n = P.dim
    basepoint = require_inside(basepoint, P.domain)[0]
    X = _check_points(P.domain, pts, seed)
    pre = [check_wdvv(P, X, tol), check_nabla_compat(P, X, tol)]
    if not force and not all(r.passed for r in pre):
        bad = ", ".join(f"{r.axiom} residual {r.residual:.3e}" for r in pre if not r.passed)
        raise PreconditionError(f"product fails its axioms ({bad})", pre)
    arr = P.field_array
    w = [3.0 / (n + 2) * tau for tau in trace_exprs(arr)]
    S = {idx: tidy(3 * arr[idx] - _pure_trace(w, idx)) for idx in _sorted_triples(n)}
    t = _closed_form_t(w, basepoint)
    closed = t is not None
    if not closed:
        t = GradientField(w, basepoint, P.domain)
    A = AbundantStructure(n, S, t, P.domain, name=(P.name + "/abundant") if P.name else "",
                          meta={"derived_from": P.name or "product"})
    diag = {"preconditions": {r.axiom: r.residual for r in pre}}
    (dt,) = A.t_derivatives(X, 1)
    (T,) = P.tensor(X, 0)
    diag["dt_match"] = float(np.max(np.abs(dt - 3.0 / (n + 2) * np.einsum("...aak->...k", T))))
    if not closed:
        diag["path_residual"] = t.value_path_residual(X[: min(len(X), 10)])
    return CorrespondenceResult(P.name or "product", A, basepoint, 0.0, closed, diag)


def t_gradient_exprs(A):
    if isinstance(A.t, ScalarFieldExpr):
        return [A.t.diff(k) for k in range(A.dim)]
    return list(A.t.gradient)


def abundant_to_product(A, check=True, pts=None, tol=DEFAULT_TOL, seed=0):
    """P = S/3 + Pi_Sym3(g (x) dt).  Axiom failures are flagged, not fatal."""
    n = A.dim
    dt = t_gradient_exprs(A)
    arr = A.field_array
    comps = {idx: tidy(arr[idx] / 3 + _pure_trace(dt, idx) / 3) for idx in _sorted_triples(n)}
    meta = {"derived_from": A.name or "abundant"}
    if check:
        X = _check_points(A.domain, pts, seed)
        reps = [check_A1(A, X, tol), check_A2(A, X, tol), check_A3(A, X, tol)]
        ok = all(r.passed for r in reps)
        meta["axioms_ok"] = ok
        meta["axiom_residuals"] = {r.axiom: r.residual for r in reps}
        if not ok:
            warnings.warn("abundant structure fails (A1)-(A3); derived product is flagged",
                          stacklevel=2)
    return ProductStructure(n, comps, A.domain, name=(A.name + "/product") if A.name else "",
                            meta=meta)


def roundtrip_check(P, basepoint, pts=None, tol=DEFAULT_TOL, seed=0):
    res = product_to_abundant(P, basepoint, tol=tol, seed=seed)
    P2 = abundant_to_product(res.structure, check=False)
    X = _check_points(P.domain, pts, seed)
    (T1,) = P.tensor(X, 0)
    (T2,) = P2.tensor(X, 0)
    return report("roundtrip_product", X, T1 - T2, tol,
                  {"closed_form_t": res.closed_form_t, **res.diagnostics})


def abundant_roundtrip(A, basepoint, pts=None, tol=1e-8, seed=0):
    """A -> product -> abundant: S exactly, dt to tol, t up to an additive constant."""
    P = abundant_to_product(A, check=False)
    res = product_to_abundant(P, basepoint, tol=DEFAULT_TOL, force=True, seed=seed)
    A2 = res.structure
    X = _check_points(A.domain, pts, seed)
    (S1,), (S2,) = A.S_tensor(X, 0), A2.S_tensor(X, 0)
    (d1,), (d2,) = A.t_derivatives(X, 1), A2.t_derivatives(X, 1)
    details = {"S_residual": float(np.max(np.abs(S1 - S2))),
               "dt_residual": float(np.max(np.abs(d1 - d2))),
               "closed_form_t": res.closed_form_t}
    if isinstance(A.t, ScalarFieldExpr) and res.closed_form_t:
        pts_b = np.vstack([basepoint, X])
        diff = field_derivatives(A2.t, pts_b, 0)[0] - field_derivatives(A.t, pts_b, 0)[0]
        details["t_constant_spread"] = float(np.max(np.abs(diff - diff[0])))
    R = np.concatenate([(S1 - S2).reshape(len(X), -1), d1 - d2], axis=1)
    return report("roundtrip_abundant", X, R, tol, details)
