"""Batched polyline integration of linear-in-direction ODE systems.

A state ``y`` (shape ``(m, D)``, one row per path) evolves along a polyline
according to ``dy = J(x, y) dx`` where ``J`` has shape ``(m, D, n)``.  Each
straight segment ``a -> b`` is parametrised by ``s in [0, 1]`` and handed to
:func:`scipy.integrate.solve_ivp`.
"""
from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, FrobsiaError

RTOL = 1e-12
ATOL = 1e-14
MAX_STEPS = 10**6
POLE_MARGIN = 0.05


def axis_polyline(start, ends):
    """Vertices (m, n+1, n): move coordinate 1, then 2, ... from start to each end."""
    ends = np.atleast_2d(np.asarray(ends, dtype=float))
    start = np.broadcast_to(np.asarray(start, dtype=float), ends.shape)
    m, n = ends.shape
    V = np.empty((m, n + 1, n))
    V[:, 0] = start
    for k in range(n):
        V[:, k + 1] = V[:, k]
        V[:, k + 1, k] = ends[:, k]
    return V


def diagonal_polyline(start, ends):
    """Vertices (m, 2, n): the straight chord from start to each end."""
    ends = np.atleast_2d(np.asarray(ends, dtype=float))
    start = np.broadcast_to(np.asarray(start, dtype=float), ends.shape)
    return np.stack([start, ends], axis=1)


def check_guard(vertices, box, margin=POLE_MARGIN):
    """Raise DomainError if any vertex sits within ``margin`` of a box face.

    The box is convex, so vertices inside the shrunk box keep whole segments inside.
    """
    if box is None:
        return
    box = np.asarray(box, dtype=float)
    lo, hi = box[:, 0] + margin, box[:, 1] - margin
    V = np.asarray(vertices)
    bad = (V < lo) | (V > hi)
    if bad.any():
        idx = np.argwhere(bad)[0]
        raise DomainError(
            f"path vertex {V[tuple(idx[:-1])].tolist()} is within {margin} of the domain boundary")


def integrate_polyline(rhs, vertices, y0, box=None, method="RK45", rtol=RTOL, atol=ATOL,
                       max_steps=MAX_STEPS):
    """Integrate ``dy = rhs(x, y) dx`` along each polyline; return end states (m, D).

    ``rhs(x, y)`` receives points (m, n) and states (m, D) and returns (m, D, n).
    """
    V = np.asarray(vertices, dtype=float)
    if V.ndim == 2:
        V = V[None]
    check_guard(V, box)
    m = V.shape[0]
    y = np.array(np.broadcast_to(np.asarray(y0, dtype=float), (m, np.shape(y0)[-1])))
    D = y.shape[1]
    for s in range(V.shape[1] - 1):
        a, b = V[:, s], V[:, s + 1]
        d = b - a
        if not np.any(d):
            continue
        nfev = [0]

        def f(u, flat, a=a, d=d):
            nfev[0] += 1
            if nfev[0] > 6 * max_steps:
                raise FrobsiaError("step limit exceeded on a path segment")
            J = rhs(a + u * d, flat.reshape(m, D))
            return np.einsum("mdn,mn->md", J, d).ravel()

        sol = solve_ivp(f, (0.0, 1.0), y.ravel(), method=method, rtol=rtol, atol=atol)
        if not sol.success:
            raise FrobsiaError(f"path integration failed: {sol.message}")
        y = sol.y[:, -1].reshape(m, D)
    return y


def path_residual(y1, y2):
    """max |y1 - y2| / max(1, |y1|), elementwise over all entries."""
    y1, y2 = np.asarray(y1), np.asarray(y2)
    if y1.size == 0:
        return 0.0
    return float(np.max(np.abs(y1 - y2) / np.maximum(1.0, np.abs(y1))))
