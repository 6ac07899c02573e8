"""Scalar-field expressions on R^n and their truncated Taylor jets.

Expressions are small immutable trees parsed from text such as
``"log(x1)*x1^2 - 1/x3"``.  A :class:`Jet` of order ``d`` at a point stores
``d^alpha f(x0) / alpha!`` for every multi-index ``|alpha| <= d``; all tensor
derivatives used elsewhere in the package are read off jets, so mixed partials
are symmetric by construction.

Grammar (whitespace insignificant)::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := base ('^' integer)?
    base   := number | 'x' integer | func '(' expr ')' | '(' expr ')' | '-' base
    func   := 'exp' | 'log' | 'sqrt' | 'sin' | 'cos'

Note that unary minus binds tighter than ``^``: ``-x1^2`` is ``(-x1)^2``.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ExprSyntaxError, PoleError

MAX_ORDER = 5
FUNCTIONS = ("exp", "log", "sqrt", "sin", "cos")


# ---------------------------------------------------------------------------
# expression nodes

@dataclass(frozen=True, eq=False)
class Const:
    value: float


@dataclass(frozen=True, eq=False)
class Coord:
    index: int  # 0-based


@dataclass(frozen=True, eq=False)
class Neg:
    arg: object


@dataclass(frozen=True, eq=False)
class BinOp:
    op: str  # one of + - * /
    left: object
    right: object


@dataclass(frozen=True, eq=False)
class Pow:
    base: object
    exponent: int


@dataclass(frozen=True, eq=False)
class Func:
    name: str
    arg: object


def _is_const(node, value=None):
    if not isinstance(node, Const):
        return False
    return value is None or node.value == value


# smart constructors: fold constants and trivial zeros/ones only

def add(a, b):
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    return BinOp("+", a, b)


def sub(a, b):
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    return BinOp("-", a, b)


def mul(a, b):
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return Const(0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    return BinOp("*", a, b)


def div(a, b):
    if _is_const(b, 1.0):
        return a
    if _is_const(a, 0.0) and not _is_const(b, 0.0):
        return Const(0.0)
    if _is_const(a) and _is_const(b) and b.value != 0.0:
        return Const(a.value / b.value)
    return BinOp("/", a, b)


def neg(a):
    if _is_const(a):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def power(a, m):
    m = int(m)
    if m == 0:
        return Const(1.0)
    if m == 1:
        return a
    if _is_const(a) and (a.value != 0.0 or m > 0):
        return Const(a.value ** m)
    return Pow(a, m)


def func(name, a):
    if name not in FUNCTIONS:
        raise ValueError(f"unknown function {name!r}")
    return Func(name, a)


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<coord>x(?P<cidx>\d+))"
    r"|(?P<name>[A-Za-z_]+)"
    r"|(?P<sym>[-+*/^()])"
    r")"
)


class _Parser:
    def __init__(self, text, dim):
        self.text = text
        self.dim = dim
        self.tokens = []
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                raise ExprSyntaxError(f"unexpected character {text[pos]!r}", self._byte(pos))
            start = len(text) - len(text[pos:].lstrip())
            if m.group("num") is not None:
                self.tokens.append(("num", m.group("num"), start))
            elif m.group("coord") is not None:
                self.tokens.append(("coord", m.group("cidx"), start))
            elif m.group("name") is not None:
                self.tokens.append(("name", m.group("name"), start))
            else:
                self.tokens.append(("sym", m.group("sym"), start))
            pos = m.end()
        self.tokens.append(("end", "", len(text)))
        self.i = 0

    def _byte(self, pos):
        return len(self.text[:pos].encode("utf-8"))

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message, tok=None):
        tok = tok or self.peek()
        raise ExprSyntaxError(message, self._byte(tok[2]))

    def expect(self, sym):
        tok = self.take()
        if tok[:2] != ("sym", sym):
            self.fail(f"expected {sym!r}", tok)

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            self.fail("unexpected trailing input")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[:2] in (("sym", "+"), ("sym", "-")):
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[:2] in (("sym", "*"), ("sym", "/")):
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        node = self.base()
        if self.peek()[:2] == ("sym", "^"):
            self.take()
            sign = 1
            if self.peek()[:2] == ("sym", "-"):
                self.take()
                sign = -1
            tok = self.take()
            if tok[0] != "num" or not tok[1].isdigit():
                self.fail("exponent must be an integer", tok)
            node = Pow(node, sign * int(tok[1]))
        return node

    def base(self):
        tok = self.take()
        kind, val, _ = tok
        if kind == "num":
            return Const(float(val))
        if kind == "coord":
            k = int(val)
            if not 1 <= k <= self.dim:
                self.fail(f"coordinate index x{k} out of range for dim {self.dim}", tok)
            return Coord(k - 1)
        if kind == "name":
            if val not in FUNCTIONS:
                self.fail(f"unknown function {val!r}", tok)
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Func(val, arg)
        if (kind, val) == ("sym", "("):
            node = self.expr()
            self.expect(")")
            return node
        if (kind, val) == ("sym", "-"):
            return Neg(self.base())
        self.fail("unexpected token" if kind != "end" else "unexpected end of input", tok)


# ---------------------------------------------------------------------------
# printing

def _fmt_number(v):
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _to_text(node):
    """Return (text, precedence); 1 additive, 2 multiplicative, 3 power, 4 base."""
    if isinstance(node, Const):
        s = _fmt_number(abs(node.value))
        return ("-" + s if node.value < 0 else s), 4
    if isinstance(node, Coord):
        return f"x{node.index + 1}", 4
    if isinstance(node, Func):
        return f"{node.name}({_to_text(node.arg)[0]})", 4
    if isinstance(node, Neg):
        s, p = _to_text(node.arg)
        return "-" + (s if p == 4 else f"({s})"), 4
    if isinstance(node, Pow):
        s, p = _to_text(node.base)
        if p < 4 or s.startswith("-"):
            s = f"({s})"
        return f"{s}^{node.exponent}", 3
    if isinstance(node, BinOp):
        ls, lp = _to_text(node.left)
        rs, rp = _to_text(node.right)
        if node.op in "+-":
            if rp <= 1:
                rs = f"({rs})"
            return f"{ls} {node.op} {rs}", 1
        if lp < 2:
            ls = f"({ls})"
        if rp <= 2:
            rs = f"({rs})"
        return f"{ls}{node.op}{rs}", 2
    raise TypeError(f"not an expression node: {node!r}")


# ---------------------------------------------------------------------------
# symbolic differentiation (used to emit closed-form derived components)

def _diff(node, k, memo):
    key = id(node)
    if key in memo:
        return memo[key]
    if isinstance(node, Const):
        out = Const(0.0)
    elif isinstance(node, Coord):
        out = Const(1.0 if node.index == k else 0.0)
    elif isinstance(node, Neg):
        out = neg(_diff(node.arg, k, memo))
    elif isinstance(node, BinOp):
        a, b = node.left, node.right
        da, db = _diff(a, k, memo), _diff(b, k, memo)
        if node.op == "+":
            out = add(da, db)
        elif node.op == "-":
            out = sub(da, db)
        elif node.op == "*":
            out = add(mul(da, b), mul(a, db))
        else:
            out = sub(div(da, b), div(mul(a, db), power(b, 2)))
    elif isinstance(node, Pow):
        m = node.exponent
        out = mul(mul(Const(float(m)), power(node.base, m - 1)), _diff(node.base, k, memo))
    elif isinstance(node, Func):
        u = node.arg
        du = _diff(u, k, memo)
        if node.name == "exp":
            out = mul(node, du)
        elif node.name == "log":
            out = div(du, u)
        elif node.name == "sqrt":
            out = div(du, mul(Const(2.0), node))
        elif node.name == "sin":
            out = mul(Func("cos", u), du)
        else:
            out = neg(mul(Func("sin", u), du))
    else:
        raise TypeError(f"not an expression node: {node!r}")
    memo[key] = out
    return out


# ---------------------------------------------------------------------------
# jet algebra

class JetSpace:
    """Index bookkeeping for truncated Taylor series in ``dim`` variables."""

    def __init__(self, dim, order):
        if not 0 <= order <= MAX_ORDER:
            raise ValueError(f"jet order must be in 0..{MAX_ORDER}, got {order}")
        self.dim = dim
        self.order = order
        multis = []
        for deg in range(order + 1):
            for combo in itertools.combinations_with_replacement(range(dim), deg):
                alpha = [0] * dim
                for c in combo:
                    alpha[c] += 1
                multis.append(tuple(alpha))
        self.multis = multis
        self.index = {a: i for i, a in enumerate(multis)}
        self.size = len(multis)
        self.degree = np.array([sum(a) for a in multis])
        self.factorial = np.array([math.prod(math.factorial(v) for v in a) for a in multis], dtype=float)
        self.unit = [self.index[tuple(int(i == k) for i in range(dim))] for k in range(dim)] if order >= 1 else []

        pairs = []
        for i, a in enumerate(multis):
            for j, b in enumerate(multis):
                if self.degree[i] + self.degree[j] <= order:
                    pairs.append((self.index[tuple(x + y for x, y in zip(a, b))], i, j))
        pairs.sort()
        res = np.array([p[0] for p in pairs])
        self._ia = np.array([p[1] for p in pairs])
        self._ib = np.array([p[2] for p in pairs])
        self._starts = np.flatnonzero(np.r_[True, res[1:] != res[:-1]])
        self._deriv = {}

    def mul(self, a, b):
        return np.add.reduceat(a[self._ia] * b[self._ib], self._starts, axis=0)

    def constant(self, value, m):
        out = np.zeros((self.size, m))
        out[0] = value
        return out

    def compose(self, b, taylor):
        """Evaluate f(b) from the univariate coefficients ``taylor[k] = f^(k)(b0)/k!``."""
        h = b.copy()
        h[0] = 0.0
        out = self.constant(taylor[self.order], b.shape[1])
        for k in range(self.order - 1, -1, -1):
            out = self.mul(out, h)
            out[0] += taylor[k]
        return out

    def derivative_map(self, k):
        """Coefficient rows and ``alpha!`` factors for the full k-th derivative tensor."""
        if k not in self._deriv:
            shape = (self.dim,) * k
            rows = np.zeros(shape, dtype=int)
            fac = np.zeros(shape)
            for idx in itertools.product(range(self.dim), repeat=k):
                alpha = [0] * self.dim
                for i in idx:
                    alpha[i] += 1
                r = self.index[tuple(alpha)]
                rows[idx] = r
                fac[idx] = self.factorial[r]
            self._deriv[k] = (rows, fac)
        return self._deriv[k]


@lru_cache(maxsize=None)
def jet_space(dim, order):
    return JetSpace(dim, order)


def _binom_series(r, b0, d):
    """Coefficients of (b0 + h)^r for real r."""
    out = np.empty((d + 1,) + b0.shape)
    c = 1.0
    for k in range(d + 1):
        out[k] = c * b0 ** (r - k)
        c *= (r - k) / (k + 1)
    return out


def _univariate(name, b0, d):
    if name == "exp":
        e = np.exp(b0)
        return np.array([e / math.factorial(k) for k in range(d + 1)])
    if name == "log":
        if np.any(b0 <= 0):
            raise PoleError("log of a non-positive argument")
        out = [np.log(b0)]
        out += [(-1.0) ** (k + 1) / (k * b0 ** k) for k in range(1, d + 1)]
        return np.array(out)
    if name == "sqrt":
        if np.any(b0 <= 0):
            raise PoleError("sqrt of a non-positive argument")
        return _binom_series(0.5, b0, d)
    if name in ("sin", "cos"):
        s, c = np.sin(b0), np.cos(b0)
        cycle = [s, c, -s, -c] if name == "sin" else [c, -s, -c, s]
        return np.array([cycle[k % 4] / math.factorial(k) for k in range(d + 1)])
    if name == "recip":
        if np.any(b0 == 0):
            raise PoleError("division by zero")
        return _binom_series(-1.0, b0, d)
    raise ValueError(name)


def _int_power(space, a, m):
    result = None
    base = a
    while m:
        if m & 1:
            result = base if result is None else space.mul(result, base)
        m >>= 1
        if m:
            base = space.mul(base, base)
    return result


def _eval(node, X, space, memo):
    key = id(node)
    hit = memo.get(key)
    if hit is not None:
        return hit
    m = X.shape[0]
    if isinstance(node, Const):
        out = space.constant(node.value, m)
    elif isinstance(node, Coord):
        out = space.constant(X[:, node.index], m)
        if space.order >= 1:
            out[space.unit[node.index]] = 1.0
    elif isinstance(node, Neg):
        out = -_eval(node.arg, X, space, memo)
    elif isinstance(node, BinOp):
        a = _eval(node.left, X, space, memo)
        b = _eval(node.right, X, space, memo)
        if node.op == "+":
            out = a + b
        elif node.op == "-":
            out = a - b
        elif node.op == "*":
            out = space.mul(a, b)
        else:
            out = space.mul(a, space.compose(b, _univariate("recip", b[0], space.order)))
    elif isinstance(node, Pow):
        a = _eval(node.base, X, space, memo)
        e = node.exponent
        if e == 0:
            out = space.constant(1.0, m)
        else:
            out = _int_power(space, a, abs(e))
            if e < 0:
                out = space.compose(out, _univariate("recip", out[0], space.order))
    elif isinstance(node, Func):
        a = _eval(node.arg, X, space, memo)
        out = space.compose(a, _univariate(node.name, a[0], space.order))
    else:
        raise TypeError(f"not an expression node: {node!r}")
    memo[key] = out
    return out


# ---------------------------------------------------------------------------
# public types

class ScalarFieldExpr:
    """A parsed scalar field on R^dim.  Immutable; supports + - * / and unary -."""

    __slots__ = ("root", "dim")

    def __init__(self, root, dim):
        if dim < 1:
            raise ValueError("dim must be positive")
        object.__setattr__(self, "root", root)
        object.__setattr__(self, "dim", int(dim))

    def __setattr__(self, name, value):
        raise AttributeError("ScalarFieldExpr is immutable")

    @classmethod
    def constant(cls, value, dim):
        return cls(Const(float(value)), dim)

    @classmethod
    def coordinate(cls, k, dim):
        """The coordinate function x_{k+1} (``k`` is 0-based)."""
        return cls(Coord(k), dim)

    def __str__(self):
        return _to_text(self.root)[0]

    def __repr__(self):
        return f"ScalarFieldExpr({str(self)!r}, dim={self.dim})"

    @property
    def is_zero(self):
        return _is_const(self.root, 0.0)

    def _lift(self, other):
        if isinstance(other, ScalarFieldExpr):
            if other.dim != self.dim:
                raise ValueError("dimension mismatch")
            return other.root
        return Const(float(other))

    def __add__(self, other):
        return ScalarFieldExpr(add(self.root, self._lift(other)), self.dim)

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarFieldExpr(sub(self.root, self._lift(other)), self.dim)

    def __rsub__(self, other):
        return ScalarFieldExpr(sub(self._lift(other), self.root), self.dim)

    def __mul__(self, other):
        return ScalarFieldExpr(mul(self.root, self._lift(other)), self.dim)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ScalarFieldExpr(div(self.root, self._lift(other)), self.dim)

    def __rtruediv__(self, other):
        return ScalarFieldExpr(div(self._lift(other), self.root), self.dim)

    def __neg__(self):
        return ScalarFieldExpr(neg(self.root), self.dim)

    def __pow__(self, m):
        if int(m) != m:
            raise ValueError("only integer powers are supported")
        return ScalarFieldExpr(power(self.root, int(m)), self.dim)

    def apply(self, name):
        return ScalarFieldExpr(func(name, self.root), self.dim)

    def diff(self, k):
        """Symbolic partial derivative with respect to x_{k+1} (``k`` 0-based)."""
        return ScalarFieldExpr(_diff(self.root, k, {}), self.dim)

    def jet_coeffs(self, X, space, memo=None):
        return _eval(self.root, X, space, {} if memo is None else memo)


def parse(text, dim):
    """Parse ``text`` into a :class:`ScalarFieldExpr` on R^dim."""
    return ScalarFieldExpr(_Parser(text, dim).parse(), dim)


def as_field(obj, dim):
    """Coerce numbers and strings to fields; fields pass through."""
    if isinstance(obj, (int, float, np.floating, np.integer)):
        return ScalarFieldExpr.constant(obj, dim)
    if isinstance(obj, str):
        return parse(obj, dim)
    if getattr(obj, "dim", None) != dim:
        raise ValueError(f"field dimension {getattr(obj, 'dim', None)} != {dim}")
    return obj


@dataclass(frozen=True)
class Jet:
    """Taylor coefficients of a field at one point (``coeffs`` shape (N,)) or a batch (N, m)."""

    dim: int
    order: int
    coeffs: np.ndarray

    @property
    def space(self):
        return jet_space(self.dim, self.order)

    @property
    def value(self):
        return self.coeffs[0]

    def derivative(self, k):
        """Full symmetric k-th derivative tensor; batch axis first when batched."""
        if k > self.order:
            raise ValueError(f"jet of order {self.order} has no {k}-th derivatives")
        rows, fac = self.space.derivative_map(k)
        out = self.coeffs[rows] * (fac if self.coeffs.ndim == 1 else fac[..., None])
        if self.coeffs.ndim == 2:
            out = np.moveaxis(out, -1, 0)
        return out

    def gradient(self):
        return self.derivative(1)

    def hessian(self):
        return self.derivative(2)


def _as_points(x0, dim):
    X = np.asarray(x0, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[-1] != dim:
        raise ValueError(f"point dimension {X.shape[-1]} != field dimension {dim}")
    return X, single


def eval_jet(f, x0, order):
    """Jet of ``f`` at ``x0`` (one point, shape (n,), or a batch, shape (m, n))."""
    X, single = _as_points(x0, f.dim)
    space = jet_space(f.dim, order)
    c = f.jet_coeffs(X, space)
    return Jet(f.dim, order, c[:, 0] if single else c)


def derivative_tensor(fields, x0, extra_orders):
    """Evaluate an array of fields and their first ``extra_orders`` derivative tensors.

    Returns ``[T0, ..., Tk]`` where ``Tj`` has shape ``(m?,) + fields.shape + (n,)*j``.
    """
    if not 0 <= extra_orders <= MAX_ORDER - 1:
        raise ValueError("extra_orders must be in 0..4")
    arr = np.empty(np.shape(fields), dtype=object)
    flat = list(np.asarray(fields, dtype=object).ravel()) if np.ndim(fields) else [fields]
    dim = flat[0].dim
    if any(f.dim != dim for f in flat):
        raise ValueError("all component fields must share dim")
    X, single = _as_points(x0, dim)
    space = jet_space(dim, extra_orders)
    memo = {}
    coeffs = np.stack([f.jet_coeffs(X, space, memo) for f in flat])  # (F, N, m)
    out = []
    for k in range(extra_orders + 1):
        rows, fac = space.derivative_map(k)
        t = coeffs[:, rows] * fac[..., None]  # (F, n..., m)
        t = np.moveaxis(t, -1, 0).reshape((X.shape[0],) + arr.shape + (dim,) * k)
        out.append(t[0] if single else t)
    return out
