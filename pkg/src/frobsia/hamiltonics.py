"""Natural Hamiltonians H = |p|^2 + V, quadratic integrals and their dynamics.

Kinetic energy carries no factor 1/2, so Hamilton's equations read
x' = 2p, p' = -grad V.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import RankDeficiencyError
from .exprfield import ScalarFieldExpr, derivative_tensor, parse
from .fields import field_derivatives
from .paths import POLE_MARGIN
from .prolongation import (ClosedFormKilling, ClosedFormPotential, IntegratedKilling,
                           IntegratedPotential, evaluate_along, integrate_W, k_seeds,
                           numerical_rank)
from .reports import sample_points

RANK_RTOL = 1e-8


@dataclass
class PhasePoint:
    x: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        if self.x.shape != self.p.shape:
            raise ValueError("x and p must have the same length")


class Observable:
    """F(x, p) = K^ij(x) p_i p_j + A^i(x) p_i + W(x).

    ``quad(X) -> (K (m,n,n), dK (m,n,n,n))`` with dK[..., i, j, k] = d_k K_ij;
    ``linear(X) -> (A (m,n), dA (m,n,n))``; ``scalar_grad(X) -> dW (m,n)``;
    ``scalar_value(X) -> W (m,)``.  Missing pieces are zero.
    """

    def __init__(self, kind, dim, quad=None, linear=None, scalar_grad=None, scalar_value=None,
                 name=""):
        self.kind, self.dim, self.name = kind, dim, name
        self.quad, self.linear = quad, linear
        self.scalar_grad, self.scalar_value = scalar_grad, scalar_value

    @classmethod
    def from_exprs(cls, K=None, W=None, A=None, kind="integral", name=""):
        """Observable from expression arrays (strings allowed): K (n x n), A (n), W."""
        dim = None
        for obj in (K, A):
            if obj is not None:
                dim = len(obj)
        if dim is None:
            raise ValueError("need K or A to fix the dimension")
        conv = np.vectorize(lambda e: parse(e, dim) if isinstance(e, str) else e, otypes=[object])
        quad = linear = sgrad = sval = None
        if K is not None:
            Ka = conv(np.array(K, dtype=object))
            quad = lambda X: tuple(derivative_tensor(Ka, X, 1))  # noqa: E731
        if A is not None:
            Aa = conv(np.array(A, dtype=object))
            linear = lambda X: tuple(derivative_tensor(Aa, X, 1))  # noqa: E731
        if W is not None:
            We = parse(W, dim) if isinstance(W, str) else W
            sgrad = lambda X: field_derivatives(We, X, 1, 1)[0]  # noqa: E731
            sval = lambda X: field_derivatives(We, X, 0)[0]  # noqa: E731
        return cls(kind, dim, quad, linear, sgrad, sval, name)

    @classmethod
    def hamiltonian(cls, V, dim=None):
        """H = |p|^2 + V for an expression or a potential object (``at(X)``)."""
        if isinstance(V, str):
            V = parse(V, dim)
        dim = V.dim
        g = np.eye(dim)

        def quad(X):
            m = len(X)
            return np.broadcast_to(g, (m, dim, dim)), np.zeros((m, dim, dim, dim))

        if isinstance(V, ScalarFieldExpr):
            sgrad = lambda X: field_derivatives(V, X, 1, 1)[0]  # noqa: E731
            sval = lambda X: field_derivatives(V, X, 0)[0]  # noqa: E731
        else:
            sgrad = lambda X: V.at(X)["dV"]  # noqa: E731
            sval = lambda X: V.at(X)["V"]  # noqa: E731
        obs = cls("hamiltonian", dim, quad, None, sgrad, sval, "H")
        obs.potential = V
        return obs

    def _pieces(self, X):
        m, n = X.shape
        K, dK = self.quad(X) if self.quad else (np.zeros((m, n, n)), np.zeros((m, n, n, n)))
        A, dA = self.linear(X) if self.linear else (np.zeros((m, n)), np.zeros((m, n, n)))
        dW = self.scalar_grad(X) if self.scalar_grad else np.zeros((m, n))
        return K, dK, A, dA, dW

    def partials(self, X, Pm):
        """(dF/dx, dF/dp) at phase points, each (m, n)."""
        X, Pm = np.atleast_2d(X), np.atleast_2d(Pm)
        K, dK, A, dA, dW = self._pieces(X)
        dx = (np.einsum("mijk,mi,mj->mk", dK, Pm, Pm) + np.einsum("mik,mi->mk", dA, Pm) + dW)
        dp = 2 * np.einsum("mij,mj->mi", K, Pm) + A
        return dx, dp

    def value(self, X, Pm):
        X, Pm = np.atleast_2d(X), np.atleast_2d(Pm)
        m, n = X.shape
        out = np.zeros(m)
        if self.quad:
            out += np.einsum("mij,mi,mj->m", self.quad(X)[0], Pm, Pm)
        if self.linear:
            out += np.einsum("mi,mi->m", self.linear(X)[0], Pm)
        if self.scalar_value:
            out += self.scalar_value(X)
        return out


def poisson_bracket(F1, F2, z):
    """{F1, F2} = sum_i dF1/dx_i dF2/dp_i - dF1/dp_i dF2/dx_i."""
    X, Pm = _phase(z)
    a_x, a_p = F1.partials(X, Pm)
    b_x, b_p = F2.partials(X, Pm)
    out = np.einsum("mi,mi->m", a_x, b_p) - np.einsum("mi,mi->m", a_p, b_x)
    return float(out[0]) if isinstance(z, PhasePoint) else out


def _phase(z):
    if isinstance(z, PhasePoint):
        return z.x[None], z.p[None]
    X, Pm = z
    return np.atleast_2d(X), np.atleast_2d(Pm)


def jacobian(obs, X, Pm):
    """Rows dF = (dF/dx, dF/dp) for each observable: (m, len(obs), 2n)."""
    rows = [np.concatenate(F.partials(X, Pm), axis=1) for F in obs]
    return np.stack(rows, axis=1)


def independence_rank(obs, z, rtol=RANK_RTOL):
    if not obs:
        raise ValueError("need at least one observable")
    X, Pm = _phase(z)
    J = jacobian(obs, X, Pm)[0]
    return numerical_rank(J, rtol)


# trajectories


@dataclass
class Trajectory:
    h: float
    steps: int
    xs: np.ndarray
    ps: np.ndarray
    record_every: int
    halted: bool = False
    drift: dict = field(default_factory=dict)

    @property
    def states(self):
        return [PhasePoint(x, p) for x, p in zip(self.xs, self.ps)]


class _GradientStream:
    """grad V along a sequence of nearby points; integrated potentials are transported."""

    def __init__(self, H):
        self.H = H
        V = getattr(H, "potential", None)
        self.transport = isinstance(V, IntegratedPotential)
        if self.transport:
            self.V = V
            self.x = None

    def __call__(self, x):
        if not self.transport:
            return self.H.scalar_grad(x[None])[0]
        V = self.V
        if self.x is None:
            pot = V.at(x[None])
            self.y = np.concatenate([pot["V"], pot["dV"][0], [np.trace(pot["HV"][0])]])
        else:
            self.y = self._rk4(self.x, x, self.y)
        self.x = x.copy()
        return self.y[1:1 + V.dim].copy()

    def _rk4(self, a, b, y, sub=4):
        from .prolongation import geometry
        V = self.V
        d = (b - a) / sub

        def f(x, y):
            J = V.ode_rhs(geometry(V.A, x[None], V.closure), x[None], y[None])[0]
            return J @ d

        x = a.copy()
        for _ in range(sub):
            k1 = f(x, y)
            k2 = f(x + d / 2, y + k1 / 2)
            k3 = f(x + d / 2, y + k2 / 2)
            k4 = f(x + d, y + k3)
            y = y + (k1 + 2 * k2 + 2 * k3 + k4) / 6
            x = x + d
        return y


def verlet_integrate(H, z0, h, N, integrals=(), record_every=1, box=None):
    """Leapfrog for H = |p|^2 + V (x' = 2p); halts with a partial result on domain exit."""
    if h <= 0:
        raise ValueError("step size must be positive")
    x = np.array(z0.x, dtype=float)
    p = np.array(z0.p, dtype=float)
    grad = _GradientStream(H)
    box = None if box is None else np.asarray(box, dtype=float)
    xs, ps = [x.copy()], [p.copy()]
    g = grad(x)
    halted = False
    for k in range(1, N + 1):
        p = p - 0.5 * h * g
        x = x + 2 * h * p
        if box is not None and (np.any(x <= box[:, 0]) or np.any(x >= box[:, 1])):
            halted = True
            break
        g = grad(x)
        p = p - 0.5 * h * g
        if k % record_every == 0 or k == N:
            xs.append(x.copy())
            ps.append(p.copy())
    traj = Trajectory(h, N, np.array(xs), np.array(ps), record_every, halted)
    for F in (H, *integrals):
        vals = F.value(traj.xs, traj.ps)
        traj.drift[F.name or F.kind] = drift(vals)
    return traj


def drift(values):
    values = np.asarray(values, dtype=float)
    return float(np.max(np.abs(values - values[0])) / max(1.0, abs(values[0])))


def time_reversal_residual(H, z0, h, N):
    fwd = verlet_integrate(H, z0, h, N, record_every=N)
    back = verlet_integrate(H, PhasePoint(fwd.xs[-1], -fwd.ps[-1]), h, N, record_every=N)
    return float(max(np.max(np.abs(back.xs[-1] - z0.x)), np.max(np.abs(-back.ps[-1] - z0.p))))


def verlet_step_jacobian(H, z, h, eps=1.0):
    """Finite-difference Jacobian of one step (exact for quadratic potentials)."""
    n = len(z.x)
    base = np.concatenate([z.x, z.p])

    def step(v):
        t = verlet_integrate(H, PhasePoint(v[:n], v[n:]), h, 1, record_every=1)
        return np.concatenate([t.xs[-1], t.ps[-1]])

    f0 = step(base)
    J = np.empty((2 * n, 2 * n))
    for i in range(2 * n):
        e = np.zeros(2 * n)
        e[i] = eps
        J[:, i] = (step(base + e) - f0) / eps
    return J


# certificate


def random_phase_points(box, count, seed, n):
    rng = np.random.default_rng(seed)
    X = sample_points(box, count, int(rng.integers(2**32)), shrink=0.1, inset=POLE_MARGIN)
    Pm = rng.uniform(-1.0, 1.0, size=(count, n))
    return X, Pm


class _FamilyCache:
    """Evaluate a Killing family and the Ws once per point set."""

    def __init__(self, A, basepoint, V, family, closure):
        self.A, self.basepoint, self.V, self.family = A, basepoint, V, family
        self.closure = closure
        self._key = None

    def _load(self, X):
        key = X.tobytes()
        if key != self._key:
            pot, kil = evaluate_along(self.A, self.basepoint, X, [self.V, self.family],
                                      self.closure)
            self._vals = (pot, kil)
            self._W = None
            self._key = key
        return self._vals

    def pieces(self, X, r):
        pot, kil = self._load(X)
        K, dK = kil["K"][:, r], kil["dK"][:, r]
        return K, dK, np.einsum("mja,ma->mj", K, pot["dV"])

    def W(self, X, r):
        self._load(X)
        if self._W is None:
            self._W, self.w_path_residual = integrate_W(self.A, self.V, self.family,
                                                        self.basepoint, X, self.closure)
        return self._W[:, r]


def integral_observable(cache, r, name):
    dim = cache.A.dim
    return Observable("integral", dim,
                      quad=lambda X: cache.pieces(X, r)[:2],
                      scalar_grad=lambda X: cache.pieces(X, r)[2],
                      scalar_value=lambda X: cache.W(X, r), name=name)


def potential_from_coeffs(A, coeffs, basepoint, v_basis=None, closure="axioms"):
    """V as a combination of a closed-form basis, or as initial data (V, dV, ΔV)."""
    coeffs = np.asarray(coeffs, dtype=float)
    if v_basis is not None:
        basis = list(v_basis)
        if len(coeffs) == len(basis) - 1:
            coeffs = np.concatenate([[0.0], coeffs])  # basis[0] is the constant 1
        if len(coeffs) != len(basis):
            raise ValueError(f"expected {len(basis)} or {len(basis) - 1} coefficients")
        V = ScalarFieldExpr.constant(0.0, A.dim)
        for c, b in zip(coeffs, basis):
            if c != 0.0:
                V = V + ScalarFieldExpr.constant(c, A.dim) * b
        return ClosedFormPotential(V), V
    return IntegratedPotential(A, basepoint, coeffs, closure), None


def superintegrability_certificate(A, coeffs, basepoint, v_basis=None, k_basis=None, seed=0,
                                   bracket_points=50, rank_points=10, steps=10**4, h=1e-3,
                                   record_every=10, p0=None, bracket_tol=1e-8, drift_tol=1e-6,
                                   reversal_tol=1e-10, closure="axioms"):
    """Select 2n-2 integrals and certify them; raises RankDeficiencyError if impossible."""
    n = A.dim
    basepoint = np.asarray(basepoint, dtype=float)
    Vobj, Vexpr = potential_from_coeffs(A, coeffs, basepoint, v_basis, closure)
    H = Observable.hamiltonian(Vexpr if Vexpr is not None else Vobj)
    if k_basis is not None:
        family = ClosedFormKilling(k_basis)
        labels = [f"K{r}" for r in range(family.count)]
    else:
        family = IntegratedKilling(A, basepoint, k_seeds(n), closure)
        labels = [f"seed{r}" for r in range(family.count)]
    cache = _FamilyCache(A, basepoint, Vobj, family, closure)
    cands = [integral_observable(cache, r, labels[r]) for r in range(family.count)]

    # greedy selection at one probe point
    Xp, Pp = random_phase_points(A.domain, 1, seed, n)
    rows = jacobian([H] + cands, Xp, Pp)[0]
    rows = rows / np.maximum(np.linalg.norm(rows, axis=1, keepdims=True), 1e-300)
    chosen = []
    for _ in range(2 * n - 2):
        best, best_score = None, -1.0
        for r in range(len(cands)):
            if r in chosen:
                continue
            M = rows[[0] + [1 + c for c in chosen] + [1 + r]]
            score = np.linalg.svd(M, compute_uv=False)[-1]
            if score > best_score:
                best, best_score = r, score
        if best is None or best_score <= RANK_RTOL:
            raise RankDeficiencyError(
                f"only {1 + len(chosen)} independent observables reachable for this V",
                1 + len(chosen))
        chosen.append(best)
    integrals = [cands[r] for r in chosen]
    obs = [H] + integrals

    Xb, Pb = random_phase_points(A.domain, bracket_points, seed + 1, n)
    brackets = np.array([poisson_bracket(H, F, (Xb, Pb)) for F in integrals])
    bracket_max = float(np.max(np.abs(brackets)))

    Xr, Pr = random_phase_points(A.domain, rank_points, seed + 2, n)
    Jr = jacobian(obs, Xr, Pr)
    ranks = [numerical_rank(J)[0] for J in Jr]
    rank = int(min(ranks))
    if rank < 2 * n - 1:
        raise RankDeficiencyError(f"independence rank {rank} < {2 * n - 1}", rank)

    x0 = basepoint.copy()
    p0 = np.resize([0.2, 0.3, -0.1], n) if p0 is None else np.asarray(p0, dtype=float)
    z0 = PhasePoint(x0, p0)
    # stay where W can still be path-integrated; leaving that region halts the run
    guard = np.asarray(A.domain, dtype=float) + np.array([POLE_MARGIN, -POLE_MARGIN])
    traj = verlet_integrate(H, z0, h, steps, integrals, record_every, box=guard)
    drift_max = max(traj.drift.values())
    reversal = time_reversal_residual(H, z0, h, steps)

    passed = bool(bracket_max < bracket_tol and rank == 2 * n - 1 and drift_max < drift_tol
                  and reversal < reversal_tol and not traj.halted)
    return {
        "hamiltonian": {"kinetic": "|p|^2", "potential": str(Vexpr) if Vexpr is not None
                        else "integrated", "coefficients": np.asarray(coeffs, float).tolist()},
        "integrals": [{"label": labels[r], "index": int(r)} for r in chosen],
        "bracket_max": bracket_max,
        "bracket_points": bracket_points,
        "rank": rank,
        "rank_points": rank_points,
        "rank_per_point": ranks,
        "drift": drift_max,
        "drift_per_observable": traj.drift,
        "trajectory": {"x0": x0.tolist(), "p0": p0.tolist(), "h": h, "steps": steps,
                       "record_every": record_every, "halted": traj.halted},
        "time_reversal": reversal,
        "w_path_residual": float(getattr(cache, "w_path_residual", 0.0)),
        "seed": seed,
        "pass": passed,
    }
