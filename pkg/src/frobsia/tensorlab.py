"""Pointwise dense tensor algebra on flat R^n.

All functions act on the trailing ``rank`` axes of numpy arrays and broadcast
over any leading (batch) axes.  The metric is the identity in Cartesian
coordinates, so index raising and lowering never touch the data; the
:class:`PointTensor` wrapper only tracks variance flags.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

UP, DOWN = "u", "d"


@dataclass(frozen=True)
class MetricContext:
    dim: int
    kappa: float = 0.0

    def __post_init__(self):
        if self.kappa != 0.0:
            raise ValueError("only flat metrics (kappa = 0) are supported")

    @property
    def g(self):
        return np.eye(self.dim)


@dataclass(frozen=True)
class PointTensor:
    data: np.ndarray
    variance: tuple = field(default=None)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        n = data.shape[0] if data.ndim else 0
        if any(s != n for s in data.shape):
            raise ValueError("PointTensor data must have shape (n,)*rank")
        object.__setattr__(self, "data", data)
        var = self.variance or (DOWN,) * data.ndim
        if len(var) != data.ndim or any(v not in (UP, DOWN) for v in var):
            raise ValueError("variance must list 'u'/'d' per slot")
        object.__setattr__(self, "variance", tuple(var))

    @property
    def dim(self):
        return self.data.shape[0]

    @property
    def rank(self):
        return self.data.ndim

    def _with(self, slot, flag):
        if not 0 <= slot < self.rank:
            raise IndexError(f"slot {slot} out of range for rank {self.rank}")
        var = list(self.variance)
        var[slot] = flag
        # g = identity: components unchanged
        return PointTensor(self.data, tuple(var))

    def raise_index(self, slot):
        return self._with(slot, UP)

    def lower_index(self, slot):
        return self._with(slot, DOWN)


def _slot_axes(T, rank):
    return T.ndim - rank


def sym_project(T, rank=None):
    """Average of T over all permutations of its last ``rank`` slots."""
    T = np.asarray(T, dtype=float)
    rank = T.ndim if rank is None else rank
    lead = _slot_axes(T, rank)
    head = tuple(range(lead))
    perms = list(itertools.permutations(range(lead, lead + rank)))
    return sum(np.transpose(T, head + p) for p in perms) / len(perms)


def sym3_pure_trace(w):
    """Pi_Sym3(g (x) w): (g_ij w_k + g_jk w_i + g_ki w_j)/3."""
    w = np.asarray(w, dtype=float)
    n = w.shape[-1]
    g = np.eye(n)
    return (np.einsum("ij,...k->...ijk", g, w)
            + np.einsum("jk,...i->...ijk", g, w)
            + np.einsum("ki,...j->...ijk", g, w)) / 3.0


def trace_sym3(P):
    """tau_k = sum_a P_aak."""
    return np.einsum("...aak->...k", P)


def trace_free_sym3(P, ctx=None):
    """Trace-free part of a totally symmetric rank-3 tensor."""
    P = np.asarray(P, dtype=float)
    n = P.shape[-1]
    return P - sym3_pure_trace(3.0 * trace_sym3(P) / (n + 2))


def kulkarni_nomizu(A1, A2):
    """(A1 ⊼ A2)_xyzw = A1_xz A2_yw + A1_yw A2_xz - A1_xw A2_yz - A1_yz A2_xw."""
    return (np.einsum("...xz,...yw->...xyzw", A1, A2)
            + np.einsum("...yw,...xz->...xyzw", A1, A2)
            - np.einsum("...xw,...yz->...xyzw", A1, A2)
            - np.einsum("...yz,...xw->...xyzw", A1, A2))


def riem_project(A):
    """Curvature-type part of a Sym2 (x) Sym2 tensor.

    ``1/4 (A_xzyw - A_xwyz - A_yzxw + A_ywxz)``.  The output has all algebraic
    symmetries of a curvature tensor (including the first Bianchi identity).
    On a curvature tensor R this map returns R/2, so it is a projector only up
    to that normalisation of its codomain.
    """
    A = np.asarray(A, dtype=float)
    return 0.25 * (np.einsum("...xzyw->...xyzw", A)
                   - np.einsum("...xwyz->...xyzw", A)
                   - np.einsum("...yzxw->...xyzw", A)
                   + np.einsum("...ywxz->...xyzw", A))


def ricci_contraction(R):
    """tr R(., X, ., Y), contracting slots 1 and 3."""
    return np.einsum("...axay->...xy", R)


def weyl_part(R):
    """Totally trace-free part of an algebraic curvature tensor (idempotent)."""
    R = np.asarray(R, dtype=float)
    n = R.shape[-1]
    psi = ricci_contraction(R) / (n - 2)
    tr = np.einsum("...aa->...", psi)
    schouten = psi - (tr / (2 * (n - 1)))[..., None, None] * np.eye(n)
    return R - kulkarni_nomizu(schouten, np.broadcast_to(np.eye(n), schouten.shape))


def weyl_project(A, ctx=None):
    """Weyl part of a Sym2 (x) Sym2 tensor: ``weyl_part(riem_project(A))``."""
    A = np.asarray(A, dtype=float)
    if A.shape[-1] < 3:
        raise ValueError("Weyl projection needs n >= 3")
    return weyl_part(riem_project(A))


def contract(T, slots, rank=None):
    """Contract pairs of slots of T (metric = identity).

    ``slots`` is a list of ``(a, b)`` pairs of slot positions within the last
    ``rank`` axes.  Remaining slots keep their relative order.
    """
    T = np.asarray(T, dtype=float)
    rank = T.ndim if rank is None else rank
    letters = "abcdefghijklmnopqrstuvw"
    sub = list(letters[:rank])
    used = set()
    for a, b in slots:
        if not (0 <= a < rank and 0 <= b < rank) or a == b or a in used or b in used:
            raise IndexError(f"invalid slot pair ({a}, {b}) for rank {rank}")
        used.update((a, b))
        sub[b] = sub[a]
    out = "".join(s for i, s in enumerate(sub) if i not in used)
    return np.einsum(f"...{''.join(sub)}->...{out}", T)


def norm_sq(T, rank=None):
    """|T|^2: full contraction of T with itself."""
    T = np.asarray(T, dtype=float)
    rank = T.ndim if rank is None else rank
    return np.sum(T * T, axis=tuple(range(T.ndim - rank, T.ndim)))


def quad_form(T):
    """𝒯_ij = sum_ab T_iab T_jab for symmetric rank-3 T (e.g. 𝒮, 𝒫, 𝔅)."""
    return np.einsum("...iab,...jab->...ij", T, T)


def pair_product(T):
    """𝔗(X,Y,Z,W) = g(T̂(X,Y), T̂(Z,W)) = sum_a T_xya T_zwa."""
    return np.einsum("...xya,...zwa->...xyzw", T, T)
