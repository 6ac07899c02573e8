"""Scalar fields beyond plain expressions.

Every field used by the structure modules exposes ``dim`` and
``derivatives(X, k, start=0)`` returning ``[T_start, ..., T_k]`` with ``T_j`` of
shape ``(m,) + (n,)*j``.  Expressions get this through :func:`field_derivatives`.
"""
from __future__ import annotations

import numpy as np

from .exprfield import ScalarFieldExpr, derivative_tensor
from .paths import axis_polyline, diagonal_polyline, integrate_polyline, path_residual


def field_derivatives(f, X, k, start=0):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if isinstance(f, ScalarFieldExpr):
        return derivative_tensor(f, X, k)[start:]
    return f.derivatives(X, k, start)


def array_derivatives(fields, X, k):
    """derivative_tensor for an object array of expressions at points X (m, n)."""
    return derivative_tensor(fields, np.atleast_2d(np.asarray(X, dtype=float)), k)


class GradientField:
    """A scalar t known through closed-form gradient expressions.

    Derivatives of order >= 1 come from the gradient jets; the value is a path
    integral from ``basepoint`` (where t = 0) along axis-aligned polylines.
    """

    def __init__(self, gradient, basepoint, box=None):
        self.gradient = np.array(gradient, dtype=object)
        self.dim = self.gradient[0].dim
        self.basepoint = np.asarray(basepoint, dtype=float)
        self.box = None if box is None else np.asarray(box, dtype=float)

    def __str__(self):
        return "gradient[" + ", ".join(str(g) for g in self.gradient) + "]"

    def _rhs(self, x, y):
        return array_derivatives(self.gradient, x, 0)[0][:, None, :]

    def values(self, X, path="axis"):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        poly = axis_polyline if path == "axis" else diagonal_polyline
        return integrate_polyline(self._rhs, poly(self.basepoint, X), np.zeros(1),
                                  box=self.box)[:, 0]

    def value_path_residual(self, X):
        return path_residual(self.values(X, "axis"), self.values(X, "diagonal"))

    def derivatives(self, X, k, start=0):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = []
        if start == 0:
            out.append(self.values(X))
        if k >= 1:
            G = array_derivatives(self.gradient, X, k - 1)
            out.extend(G[max(start, 1) - 1:])
        return out
