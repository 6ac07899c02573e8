"""Finite-type prolongation systems for potentials V and Killing tensors K.

Given an abundant structure (S, t), potentials are governed by

    V_ij = (1/n) g_ij L + S_ija V_a + t_i V_j + t_j V_i - (2/n) g_ij t_a V_a,   L = ΔV,

closed by

    (1 - 1/n) L_i = (div S)_ia V_a + S_ika V_ak + t_ik V_k + t_i L + Δt V_i
                    + t_k V_ik - (2/n)(t_ia V_a + t_a V_ia),

with (div S)_ia = d_k S_ika.  Killing tensors obey the explicit system

    d_k K_ij = (4/3) Q(M)_ijk,   M_ijk = S_ija K_ak + g_ij (K dt)_k - K_ij t_k,

where Q averages over (i j) after antisymmetrising (j k).  By default the
derivatives of S and the Hessian of t are replaced by the (A1) and (A2)
right-hand sides ("axioms" closure); ``closure="jets"`` uses the exact jets.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .abundant import a1_rhs, a2_rhs
from .errors import IntegrabilityError
from .exprfield import derivative_tensor
from .fields import field_derivatives
from .paths import (POLE_MARGIN, axis_polyline, diagonal_polyline, integrate_polyline,
                    path_residual)
from .reports import DEFAULT_SEED, report, require_inside, sample_points
from .tensorlab import sym_project

PATH_TOL = 1e-7
RANK_RTOL = 1e-8


@dataclass
class VState:
    x: np.ndarray
    V: float
    gradV: np.ndarray
    lapV: float


@dataclass
class KState:
    x: np.ndarray
    K: np.ndarray


def geometry(A, X, closure="axioms"):
    """S, dS, dt, ddt at points X; dS[..., x, y, z, w] = d_w S_xyz."""
    X = require_inside(X, A.domain)
    if closure == "axioms":
        (S,) = A.S_tensor(X, 0)
        (dt,) = A.t_derivatives(X, 1)
        return {"S": S, "dS": a1_rhs(S, dt), "dt": dt, "ddt": a2_rhs(S, dt)}
    if closure == "jets":
        S, dS = A.S_tensor(X, 1)
        dt, ddt = A.t_derivatives(X, 2)
        return {"S": S, "dS": dS, "dt": dt, "ddt": ddt}
    raise ValueError("closure must be 'axioms' or 'jets'")


# V-system on batched arrays: V (m, s), dV (m, n, s), L (m, s)


def v_hessian(geo, dV, L):
    S, dt = geo["S"], geo["dt"]
    n = S.shape[-1]
    g = np.eye(n)
    tdv = np.einsum("ma,mas->ms", dt, dV)
    return (np.einsum("ij,ms->mijs", g, L / n - 2 / n * tdv)
            + np.einsum("mija,mas->mijs", S, dV)
            + np.einsum("mi,mjs->mijs", dt, dV) + np.einsum("mj,mis->mijs", dt, dV))


def v_closure(geo, dV, L, H):
    S, dS, dt, ddt = geo["S"], geo["dS"], geo["dt"], geo["ddt"]
    n = S.shape[-1]
    divS = np.einsum("mikak->mia", dS)
    lap_t = np.einsum("maa->m", ddt)
    rhs = (np.einsum("mia,mas->mis", divS, dV) + np.einsum("mika,maks->mis", S, H)
           + np.einsum("mik,mks->mis", ddt, dV) + np.einsum("mi,ms->mis", dt, L)
           + lap_t[:, None, None] * dV + np.einsum("mk,miks->mis", dt, H)
           - 2 / n * (np.einsum("mia,mas->mis", ddt, dV) + np.einsum("ma,mias->mis", dt, H)))
    return rhs / (1 - 1 / n)


def v_rhs(A, s, closure="axioms"):
    """Derivative record (dV, d^2V, dΔV) of a single VState."""
    geo = geometry(A, np.asarray(s.x, dtype=float)[None], closure)
    dV = np.asarray(s.gradV, dtype=float)[None, :, None]
    L = np.array([[float(s.lapV)]])
    H = v_hessian(geo, dV, L)
    return {"dV": dV[0, :, 0], "hessV": H[0, :, :, 0], "dlapV": v_closure(geo, dV, L, H)[0, :, 0]}


# K-system: K (m, n, n, s), T[..., i, j, k, s] = d_k K_ij


def _q_average(M):
    return 0.25 * (M - np.swapaxes(M, 2, 3) + np.swapaxes(M, 1, 2)
                   - np.einsum("mjkis->mijks", M))


def k_derivative(geo, K):
    S, dt = geo["S"], geo["dt"]
    n = S.shape[-1]
    Kdt = np.einsum("mkas,ma->mks", K, dt)
    M = (np.einsum("mija,maks->mijks", S, K)
         + np.einsum("ij,mks->mijks", np.eye(n), Kdt)
         - np.einsum("mijs,mk->mijks", K, dt))
    return 4.0 / 3.0 * _q_average(M)


def k_rhs(A, s, closure="axioms"):
    """d_k K_ij for a single KState, shape (n, n, n) indexed [i, j, k]."""
    geo = geometry(A, np.asarray(s.x, dtype=float)[None], closure)
    K = np.asarray(s.K, dtype=float)[None, :, :, None]
    return k_derivative(geo, K)[0, ..., 0]


def killing_symmetric_part(dK):
    """Total symmetrisation over (i, j, k) of dK[..., i, j, k]."""
    return sym_project(dK, 3)


# seeds


def v_seeds(n):
    return np.eye(n + 2)


def k_seeds(n):
    seeds = []
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n))
            E[i, j] = E[j, i] = 1.0
            seeds.append(E)
    return np.array(seeds)


# solution objects: closed forms evaluate jets, integrated ones carry ODE state


class ClosedFormPotential:
    ode_size = 0

    def __init__(self, expr):
        self.expr = expr
        self.dim = expr.dim

    def ode_init(self):
        return np.zeros(0)

    def ode_rhs(self, geo, x, y):
        return np.zeros((x.shape[0], 0, x.shape[1]))

    def evaluate(self, geo, x, y, need_value=False):
        vals = field_derivatives(self.expr, x, 2, 0)
        return {"V": vals[0], "dV": vals[1], "HV": vals[2]}

    def at(self, X, closure="axioms"):
        return self.evaluate(None, np.atleast_2d(X), None, True)


class IntegratedPotential:
    """V determined by (V, dV, ΔV) at the basepoint."""

    def __init__(self, A, basepoint, y0, closure="axioms"):
        self.A, self.dim = A, A.dim
        self.basepoint = np.asarray(basepoint, dtype=float)
        self.y0 = np.asarray(y0, dtype=float)
        self.closure = closure
        if self.y0.shape != (self.dim + 2,):
            raise ValueError("potential initial data must have length n + 2")
        self.ode_size = self.dim + 2

    def ode_init(self):
        return self.y0

    def _split(self, y):
        n = self.dim
        return y[:, 0, None], y[:, 1:1 + n, None], y[:, 1 + n, None]

    def ode_rhs(self, geo, x, y):
        V, dV, L = self._split(y)
        H = v_hessian(geo, dV, L)
        dL = v_closure(geo, dV, L, H)
        return np.concatenate([dV[:, None, :, 0], H[..., 0], dL[:, None, :, 0]], axis=1)

    def evaluate(self, geo, x, y, need_value=False):
        V, dV, L = self._split(y)
        return {"V": V[:, 0], "dV": dV[..., 0], "HV": v_hessian(geo, dV, L)[..., 0]}

    def at(self, X):
        return evaluate_along(self.A, self.basepoint, X, [self], self.closure)[0]


class ClosedFormKilling:
    """A family of Killing tensors given as n x n arrays of expressions."""

    ode_size = 0

    def __init__(self, matrices):
        self.matrices = np.array(matrices, dtype=object)
        if self.matrices.ndim == 2:
            self.matrices = self.matrices[None]
        self.count = self.matrices.shape[0]
        self.dim = self.matrices.shape[1]

    def ode_init(self):
        return np.zeros(0)

    def ode_rhs(self, geo, x, y):
        return np.zeros((x.shape[0], 0, x.shape[1]))

    def evaluate(self, geo, x, y, need_value=False):
        K, dK = derivative_tensor(self.matrices, x, 1)
        return {"K": K, "dK": dK}

    def at(self, X):
        return self.evaluate(None, np.atleast_2d(X), None)


class IntegratedKilling:
    """A family of Killing tensors with initial values K0 (s, n, n) at the basepoint."""

    def __init__(self, A, basepoint, K0, closure="axioms"):
        self.A, self.dim = A, A.dim
        self.basepoint = np.asarray(basepoint, dtype=float)
        K0 = np.asarray(K0, dtype=float)
        self.K0 = K0[None] if K0.ndim == 2 else K0
        self.count = self.K0.shape[0]
        self.closure = closure
        self.ode_size = self.count * self.dim ** 2

    def ode_init(self):
        return np.moveaxis(self.K0, 0, -1).ravel()  # layout (i, j, s)

    def _K(self, y):
        n = self.dim
        return y.reshape(y.shape[0], n, n, self.count)

    def ode_rhs(self, geo, x, y):
        T = k_derivative(geo, self._K(y))  # (m, i, j, k, s)
        n = self.dim
        return np.moveaxis(T, 3, -1).reshape(x.shape[0], n * n * self.count, n)

    def evaluate(self, geo, x, y, need_value=False):
        K = self._K(y)
        T = k_derivative(geo, K)
        return {"K": np.moveaxis(K, -1, 1), "dK": np.moveaxis(T, -1, 1)}

    def at(self, X):
        return evaluate_along(self.A, self.basepoint, X, [self], self.closure)[0]


def _make_rhs(A, parts, closure, extra=None):
    sizes = [p.ode_size for p in parts]
    offs = np.cumsum([0] + sizes)

    def rhs(x, y):
        geo = geometry(A, x, closure)
        blocks = [p.ode_rhs(geo, x, y[:, offs[i]:offs[i + 1]]) for i, p in enumerate(parts)]
        if extra is not None:
            vals = [p.evaluate(geo, x, y[:, offs[i]:offs[i + 1]]) for i, p in enumerate(parts)]
            blocks.append(extra(vals))
        return np.concatenate(blocks, axis=1)

    return rhs, offs


def _run(A, basepoint, X, rhs, y0, path):
    poly = axis_polyline if path == "axis" else diagonal_polyline
    return integrate_polyline(rhs, poly(basepoint, X), y0, box=A.domain)


def evaluate_along(A, basepoint, X, parts, closure="axioms"):
    """Transport all integrated parts to X (axis paths) and evaluate them there."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    rhs, offs = _make_rhs(A, parts, closure)
    y0 = np.concatenate([p.ode_init() for p in parts]) if offs[-1] else np.zeros(0)
    y = _run(A, basepoint, X, rhs, y0, "axis") if offs[-1] else np.zeros((len(X), 0))
    geo = geometry(A, X, closure)
    return [p.evaluate(geo, X, y[:, offs[i]:offs[i + 1]]) for i, p in enumerate(parts)]


# bases


@dataclass
class SolutionBasis:
    which: str
    basepoint: np.ndarray
    seeds: np.ndarray
    targets: np.ndarray
    states: np.ndarray  # (m, state_dim, s)
    path_residual: float
    singular_values: np.ndarray
    rank: int
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "which": self.which,
            "basepoint": self.basepoint.tolist(),
            "targets": self.targets.tolist(),
            "seeds": self.seeds.tolist(),
            "states": self.states.tolist(),
            "path_residual": self.path_residual,
            "rank": self.rank,
            "singular_values": self.singular_values.tolist(),
        }


def default_targets(A, count=10, seed=DEFAULT_SEED):
    return sample_points(A.domain, count, seed, shrink=0.1, inset=POLE_MARGIN)


def numerical_rank(M, rtol=RANK_RTOL):
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0, sv
    return int(np.sum(sv > rtol * sv[0])), sv


def integrate_basis(A, basepoint, targets=None, which="V", closure="axioms",
                    path_tol=PATH_TOL):
    """Integrate every canonical seed to the targets; rank of the value map."""
    n = A.dim
    basepoint = require_inside(basepoint, A.domain)[0]
    X = default_targets(A) if targets is None else require_inside(targets, A.domain)
    if which == "V":
        seeds = v_seeds(n)
        s = len(seeds)
        y0 = seeds.T.ravel()  # layout (component, seed)

        def prhs(geo, x, y):
            Y = y.reshape(len(x), n + 2, s)
            dV, L = Y[:, 1:1 + n], Y[:, 1 + n]
            H = v_hessian(geo, dV, L)
            dL = v_closure(geo, dV, L, H)
            J = np.concatenate([np.swapaxes(dV, 1, 2)[:, None], np.moveaxis(H, -1, 2),
                                np.swapaxes(dL, 1, 2)[:, None]], axis=1)
            return J.reshape(len(x), (n + 2) * s, n)

        rhs = lambda x, y: prhs(geometry(A, x, closure), x, y)  # noqa: E731
        state_dim = n + 2
    elif which == "K":
        seeds = k_seeds(n)
        part = IntegratedKilling(A, basepoint, seeds, closure)
        y0 = part.ode_init()
        rhs = lambda x, y: part.ode_rhs(geometry(A, x, closure), x, y)  # noqa: E731
        s = len(seeds)
        state_dim = n * n
    else:
        raise ValueError("which must be 'V' or 'K'")
    y1 = _run(A, basepoint, X, rhs, y0, "axis")
    y2 = _run(A, basepoint, X, rhs, y0, "diagonal")
    pres = path_residual(y1, y2)
    if pres > path_tol:
        raise IntegrabilityError(f"{which}-system integration is path dependent "
                                 f"(residual {pres:.3e})", pres)
    states = y1.reshape(len(X), state_dim, s)
    values = states[:, 0, :] if which == "V" else states.reshape(-1, s)
    rank, sv = numerical_rank(values)
    return SolutionBasis(which, basepoint, seeds.reshape(s, -1) if which == "K" else seeds,
                         X, states, pres, sv, rank)


# plug-in checks of closed-form solutions


def v_plugin_residual(A, V, pts, tol=1e-9, closure="axioms"):
    """How well a closed-form potential satisfies the V-system and its closure."""
    X = require_inside(pts, A.domain)
    _, dV, H, D3 = field_derivatives(V, X, 3, 0)
    geo = geometry(A, X, closure)
    L = np.einsum("maa->m", H)[:, None]
    dVs = dV[..., None]
    r_hess = H - v_hessian(geo, dVs, L)[..., 0]
    dL = np.einsum("mikk->mi", D3)
    r_clos = dL - v_closure(geo, dVs, L, H[..., None])[..., 0]
    R = np.concatenate([r_hess.reshape(len(X), -1), r_clos], axis=1)
    return report("V_plugin", X, R, tol, {"hessian": float(np.max(np.abs(r_hess))),
                                          "closure": float(np.max(np.abs(r_clos)))})


def k_plugin_residual(A, K, pts, tol=1e-9, closure="axioms"):
    """Residual of d_k K_ij against the K-system for closed-form K (n x n expressions)."""
    X = require_inside(pts, A.domain)
    fam = K if isinstance(K, ClosedFormKilling) else ClosedFormKilling(K)
    vals = fam.at(X)
    Kv = np.moveaxis(vals["K"], 1, -1)
    T = np.moveaxis(k_derivative(geometry(A, X, closure), Kv), -1, 1)
    return report("K_plugin", X, vals["dK"] - T, tol)


def killing_report(A, family, pts, tol=1e-8):
    """Fully symmetrised dK of every member of a Killing family."""
    X = require_inside(pts, A.domain)
    vals = family.at(X)
    return report("killing", X, killing_symmetric_part(vals["dK"]), tol)


# Bertrand-Darboux and W


def bd_tensor(pot, kil):
    """d_i (K dV)_j - d_j (K dV)_i for every member of the family: (m, s, n, n)."""
    dV, HV = pot["dV"], pot["HV"]
    K, dK = kil["K"], kil["dK"]
    D = np.einsum("msjai,ma->msij", dK, dV) + np.einsum("msja,mai->msij", K, HV)
    return D - np.swapaxes(D, -1, -2)


def bd_residual(A, V, K, pts, tol=1e-8, basepoint=None, closure="axioms"):
    """Bertrand-Darboux residual for a potential and a Killing family."""
    X = require_inside(pts, A.domain)
    base = basepoint if basepoint is not None else getattr(V, "basepoint", None)
    if base is None:
        base = getattr(K, "basepoint", None)
    pot, kil = evaluate_along(A, base, X, [V, K], closure) if base is not None else (
        V.at(X), K.at(X))
    return report("bertrand_darboux", X, bd_tensor(pot, kil), tol)


def integrate_W(A, V, K, basepoint, targets, closure="axioms", path_tol=1e-8):
    """W with dW = K dV and W(basepoint) = 0, for every member of the family K.

    Returns (W (m, s), path residual).  Path dependence above ``path_tol``
    means the Bertrand-Darboux condition fails and raises IntegrabilityError.
    """
    X = require_inside(targets, A.domain)
    basepoint = np.asarray(basepoint, dtype=float)
    parts = [V, K]
    s = K.count

    def extra(vals):
        pot, kil = vals
        return np.einsum("msja,ma->msj", kil["K"], pot["dV"])

    rhs, offs = _make_rhs(A, parts, closure, extra)
    y0 = np.concatenate([V.ode_init(), K.ode_init(), np.zeros(s)])
    y1 = _run(A, basepoint, X, rhs, y0, "axis")
    y2 = _run(A, basepoint, X, rhs, y0, "diagonal")
    pres = path_residual(y1[:, offs[-1]:], y2[:, offs[-1]:])
    if pres > path_tol:
        raise IntegrabilityError(f"W is path dependent (residual {pres:.3e}); "
                                 "Bertrand-Darboux fails", pres)
    return y1[:, offs[-1]:], pres
