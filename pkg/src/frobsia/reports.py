"""Axiom reports and the seeded sampling protocol."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

DEFAULT_TOL = 1e-10
DEFAULT_POINTS = 100
DEFAULT_SEED = 0


def as_box(domain, dim):
    box = np.asarray(domain, dtype=float)
    if box.shape != (dim, 2) or np.any(box[:, 0] >= box[:, 1]):
        raise ValueError(f"domain must be {dim} increasing [lo, hi] intervals")
    return box


def sample_points(box, count=DEFAULT_POINTS, seed=DEFAULT_SEED, shrink=0.0, inset=0.0):
    """``count`` points uniform in the box.

    ``shrink`` removes that fraction of each side length (split evenly);
    ``inset`` additionally keeps an absolute distance from every face.
    """
    box = np.asarray(box, dtype=float)
    lo, hi = box[:, 0], box[:, 1]
    pad = shrink * (hi - lo) / 2 + inset
    rng = np.random.default_rng(seed)
    return rng.uniform(lo + pad, hi - pad, size=(count, box.shape[0]))


def require_inside(X, box):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if box is None:
        return X
    box = np.asarray(box)
    if np.any(X <= box[:, 0]) or np.any(X >= box[:, 1]):
        raise DomainError("sample point outside the open domain box")
    return X


@dataclass
class AxiomReport:
    axiom: str
    points: np.ndarray
    residual: float
    worst: list  # per point: (residual, component index tuple)
    tol: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.residual <= self.tol

    def to_dict(self, with_points=True):
        out = {"axiom": self.axiom, "tol": self.tol, "residual": self.residual,
               "pass": bool(self.passed)}
        if self.details:
            out["details"] = {k: _plain(v) for k, v in sorted(self.details.items())}
        if with_points:
            out["points"] = np.asarray(self.points).tolist()
        out["per_point"] = [{"residual": r, "component": list(c)} for r, c in self.worst]
        return out


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in sorted(v.items())}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def report(axiom, X, R, tol, details=None):
    """Build a report from residual components R of shape (m, ...).

    The per-point worst component is recorded as an index tuple into R's
    trailing axes.
    """
    X = np.atleast_2d(X)
    R = np.abs(np.asarray(R, dtype=float))
    comp_shape = R.shape[1:]
    flat = R.reshape(R.shape[0], -1)
    worst = []
    for row in flat:
        if row.size == 0:
            worst.append((0.0, ()))
            continue
        j = int(np.argmax(row))
        worst.append((float(row[j]), tuple(int(i) for i in np.unravel_index(j, comp_shape))))
    res = max((w[0] for w in worst), default=0.0)
    return AxiomReport(axiom, X, float(res), worst, float(tol), dict(details or {}))
