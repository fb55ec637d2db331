"""Truncated multivariate Taylor arithmetic on the tangent bundle.

A :class:`Jet` holds the Taylor coefficients of a scalar (or of a batch of
scalars) around a base point, truncated to a :class:`JetSpace`.  Arithmetic
and the elementary functions in this module propagate the coefficients
exactly, so every mixed partial up to the truncation order is obtained to
round-off, with no step-size error.

Variables are ordered ``(x^0, ..., x^{d-1}, y^0, ..., y^{d-1})``.  A space
may cap the degree in the first ``split`` variables (the positions) separately
from the total degree; curvature formulas need many more ``y`` derivatives
than ``x`` derivatives, and the cap keeps the coefficient count small.

Fields are plain callables ``field(x, y)`` taking two sequences of numbers.
Writing them with the functions exported here (:func:`sin`, :func:`sqrt`,
...) makes them work both on floats and on jets.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from itertools import product
from typing import Callable, Sequence

import numpy as np

from .errors import CapabilityError, DomainError

#: Largest total derivative order a :class:`JetSpace` may carry.
MAX_ORDER = 8


@dataclass(frozen=True)
class EvalPoint:
    """A point ``(x, y)`` of the tangent bundle."""

    x: tuple
    y: tuple

    def __init__(self, x, y):
        x = tuple(float(v) for v in x)
        y = tuple(float(v) for v in y)
        if len(x) != len(y):
            raise ValueError(f"x has {len(x)} components but y has {len(y)}")
        if len(x) not in (2, 3, 4):
            raise ValueError(f"unsupported dimension {len(x)}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def dim(self) -> int:
        return len(self.x)

    def scaled(self, lam: float) -> "EvalPoint":
        """Same base point, tangent vector multiplied by ``lam``."""
        return EvalPoint(self.x, [lam * v for v in self.y])


class JetSpace:
    """Index set of monomials kept by a truncated Taylor expansion.

    A monomial with exponent ``a`` is kept iff ``sum(a) <= order`` and
    ``sum(a[:split]) <= xorder``.  Both constraints are additive, so the
    discarded monomials form an ideal and truncated multiplication is
    consistent.
    """

    def __init__(self, nvars: int, order: int, split: int = 0, xorder: int | None = None):
        if order > MAX_ORDER:
            raise CapabilityError(f"derivative order {order} exceeds MAX_ORDER={MAX_ORDER}")
        if order < 0:
            raise CapabilityError("negative derivative order requested")
        if xorder is None or xorder > order:
            xorder = order
        if split == 0:
            xorder = order
        self.nvars = nvars
        self.order = order
        self.split = split
        self.xorder = xorder

        exps = [
            e
            for e in product(range(order + 1), repeat=nvars)
            if sum(e) <= order and sum(e[:split]) <= xorder
        ]
        exps.sort(key=lambda e: (sum(e), tuple(-v for v in e)))
        self.exps = np.array(exps, dtype=np.int64).reshape(len(exps), nvars)
        self.size = len(exps)
        self.index = {e: i for i, e in enumerate(exps)}
        self.degree = self.exps.sum(axis=1)
        self.factorial = np.array(
            [math.prod(math.factorial(v) for v in e) for e in exps], dtype=float
        )
        self._build_products()

    @property
    def key(self):
        return (self.nvars, self.order, self.split, self.xorder)

    def __repr__(self):
        return (
            f"JetSpace(nvars={self.nvars}, order={self.order}, "
            f"split={self.split}, xorder={self.xorder})"
        )

    def _build_products(self):
        base = self.order + 1
        weights = base ** np.arange(self.nvars)[::-1]
        codes = self.exps @ weights
        order_codes = np.argsort(codes)
        sorted_codes = codes[order_codes]

        xdeg = self.exps[:, : self.split].sum(axis=1)
        ii, jj, kk = [], [], []
        for i in range(self.size):
            total = self.exps[i] + self.exps
            ok = (total.sum(axis=1) <= self.order) & (
                xdeg[i] + xdeg <= self.xorder
            )
            js = np.nonzero(ok)[0]
            pos = np.searchsorted(sorted_codes, total[js] @ weights)
            ii.append(np.full(js.size, i))
            jj.append(js)
            kk.append(order_codes[pos])
        ii, jj, kk = (np.concatenate(a) for a in (ii, jj, kk))
        perm = np.argsort(kk, kind="stable")
        self._I = ii[perm]
        self._J = jj[perm]
        self._starts = np.searchsorted(kk[perm], np.arange(self.size))

    def multiply(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        prod_ = a[..., self._I] * b[..., self._J]
        return np.add.reduceat(prod_, self._starts, axis=-1)

    def contract(self, subscripts: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Truncated product combined with an einsum over batch axes.

        ``subscripts`` describes the batch axes only, e.g. ``"ik,kj->ij"``.
        """
        lhs, out = subscripts.split("->")
        sa, sb = lhs.split(",")
        full = f"{sa}z,{sb}z->{out}z"
        prod_ = np.einsum(full, a[..., self._I], b[..., self._J])
        return np.add.reduceat(prod_, self._starts, axis=-1)

    # -- constructors -----------------------------------------------------

    def constant(self, value) -> "Jet":
        value = np.asarray(value, dtype=float)
        c = np.zeros(value.shape + (self.size,))
        c[..., 0] = value
        return Jet(self, c)

    def variables(self, point: Sequence) -> list["Jet"]:
        """Jets of the coordinate functions expanded about ``point``."""
        if len(point) != self.nvars:
            raise ValueError(f"expected {self.nvars} coordinates, got {len(point)}")
        out = []
        for i, p in enumerate(point):
            jet = self.constant(p)
            if self.order >= 1 and (i >= self.split or self.xorder >= 1):
                e = [0] * self.nvars
                e[i] = 1
                jet.c[..., self.index[tuple(e)]] = 1.0
            out.append(jet)
        return out

    # -- maps between spaces ----------------------------------------------

    @functools.lru_cache(maxsize=None)
    def derivative_map(self, i: int):
        """(target space, source indices, factors) for d/d(var i)."""
        if self.order == 0 or (i < self.split and self.xorder == 0):
            raise CapabilityError(f"{self!r} carries no derivative in variable {i}")
        xorder = self.xorder - 1 if i < self.split else self.xorder
        target = jet_space(self.nvars, self.order - 1, self.split, xorder)
        src = np.empty(target.size, dtype=np.int64)
        fac = np.empty(target.size)
        for k, e in enumerate(map(tuple, target.exps)):
            up = list(e)
            up[i] += 1
            src[k] = self.index[tuple(up)]
            fac[k] = up[i]
        return target, src, fac

    @functools.lru_cache(maxsize=None)
    def restrict_map(self, target: "JetSpace") -> np.ndarray:
        return np.array([self.index[tuple(e)] for e in target.exps], dtype=np.int64)


def jet_space(nvars: int, order: int, split: int = 0, xorder: int | None = None) -> JetSpace:
    """Cached :class:`JetSpace` constructor."""
    if xorder is None or xorder > order or split == 0:
        xorder = order
    return _jet_space(nvars, order, split, max(xorder, 0))


@functools.lru_cache(maxsize=None)
def _jet_space(nvars, order, split, xorder):
    return JetSpace(nvars, order, split, xorder)


def _meet(s1: JetSpace, s2: JetSpace) -> JetSpace:
    if s1 is s2:
        return s1
    if s1.nvars != s2.nvars or s1.split != s2.split:
        raise ValueError(f"incompatible jet spaces {s1!r} and {s2!r}")
    return jet_space(s1.nvars, min(s1.order, s2.order), s1.split, min(s1.xorder, s2.xorder))


class Jet:
    """Truncated Taylor expansion of a scalar, or of an array of scalars.

    ``c`` has shape ``batch + (space.size,)``; coefficient ``k`` multiplies the
    monomial ``space.exps[k]`` in the displacement from the base point.
    """

    __slots__ = ("space", "c")
    __array_priority__ = 1000

    def __init__(self, space: JetSpace, c: np.ndarray):
        self.space = space
        self.c = c

    # -- inspection -------------------------------------------------------

    @property
    def shape(self):
        return self.c.shape[:-1]

    @property
    def value(self):
        v = self.c[..., 0]
        return float(v) if v.ndim == 0 else v.copy()

    def partial(self, multi_index: Sequence[int]):
        """Mixed partial derivative for the exponent tuple ``multi_index``."""
        key = tuple(int(v) for v in multi_index)
        if key not in self.space.index:
            raise CapabilityError(f"derivative {key} not carried by {self.space!r}")
        k = self.space.index[key]
        v = self.c[..., k] * self.space.factorial[k]
        return float(v) if np.ndim(v) == 0 else v

    def derivs(self) -> dict:
        """All carried partial derivatives keyed by exponent tuple (scalar jets)."""
        scaled = self.c * self.space.factorial
        return {tuple(map(int, e)): scaled[..., k] for k, e in enumerate(self.space.exps)}

    def deriv(self, i: int) -> "Jet":
        """Jet of the partial derivative with respect to variable ``i``."""
        target, src, fac = self.space.derivative_map(i)
        return Jet(target, self.c[..., src] * fac)

    def restrict(self, space: JetSpace) -> "Jet":
        if space is self.space:
            return self
        return Jet(space, self.c[..., self.space.restrict_map(space)])

    def __getitem__(self, item) -> "Jet":
        return Jet(self.space, self.c[item])

    def sum(self, axis=None) -> "Jet":
        nb = self.c.ndim - 1
        if axis is None:
            axis = tuple(range(nb))
        axes = (axis,) if np.isscalar(axis) else tuple(axis)
        axes = tuple(a % nb if nb else a for a in axes)
        return Jet(self.space, self.c.sum(axis=axes))

    def __repr__(self):
        return f"Jet(value={self.value!r}, space={self.space!r})"

    # -- arithmetic -------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Jet):
            space = _meet(self.space, other.space)
            return self.restrict(space), other.restrict(space)
        return self, None

    def __add__(self, other):
        a, b = self._coerce(other)
        if b is not None:
            return Jet(a.space, a.c + b.c)
        return Jet(a.space, _add_const(a.c, other))

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.space, -self.c)

    def __pos__(self):
        return self

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        a, b = self._coerce(other)
        if b is not None:
            return Jet(a.space, a.space.multiply(a.c, b.c))
        return Jet(a.space, a.c * np.asarray(other, dtype=float)[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * reciprocal(other)
        return Jet(self.space, self.c / np.asarray(other, dtype=float)[..., None])

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)) or (isinstance(p, float) and p.is_integer() and abs(p) < 64):
            n = int(p)
            if n < 0:
                return reciprocal(self) ** (-n)
            result = None
            base = self
            while n:
                if n & 1:
                    result = base if result is None else result * base
                n >>= 1
                if n:
                    base = base * base
            return result if result is not None else self.space.constant(np.ones(self.shape))
        return power(self, float(p))


def _add_const(c: np.ndarray, s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    shape = np.broadcast_shapes(c.shape[:-1], s.shape) + c.shape[-1:]
    out = np.array(np.broadcast_to(c, shape))
    out[..., 0] += s
    return out


def stack(jets: Sequence, axis: int = 0) -> Jet:
    """Stack jets (or plain numbers) along a new batch axis."""
    js = [j for j in jets if isinstance(j, Jet)]
    if not js:
        raise ValueError("stack needs at least one Jet")
    space = js[0].space
    for j in js[1:]:
        space = _meet(space, j.space)
    shape = np.broadcast_shapes(*(j.shape for j in js))
    if axis < 0:
        axis += len(shape) + 1
    cs = []
    for j in jets:
        if isinstance(j, Jet):
            cs.append(np.broadcast_to(j.restrict(space).c, shape + (space.size,)))
        else:
            cs.append(space.constant(np.broadcast_to(np.asarray(j, float), shape)).c)
    return Jet(space, np.stack(cs, axis=axis))


def matmul(a: Jet, b: Jet) -> Jet:
    """Matrix product over the last two batch axes of two jet matrices."""
    space = _meet(a.space, b.space)
    a, b = a.restrict(space), b.restrict(space)
    return Jet(space, space.contract("...ik,...kj->...ij", a.c, b.c))


# -- elementary functions ----------------------------------------------------


def _compose(x: Jet, coeffs: list) -> Jet:
    """Evaluate sum_k coeffs[k] * h**k with h = x - x(0), by Horner's rule."""
    h = Jet(x.space, x.c.copy())
    h.c[..., 0] = 0.0
    K = x.space.order
    acc = x.space.constant(coeffs[K])
    for k in range(K - 1, -1, -1):
        acc = acc * h
        acc.c[..., 0] += coeffs[k]
    return acc


def _guard_positive(x0, what):
    if np.any(~(np.asarray(x0) > 0)):
        raise DomainError(f"{what} requires a strictly positive argument, got {x0}")


def reciprocal(x):
    if not isinstance(x, Jet):
        return 1.0 / np.asarray(x, dtype=float) if np.ndim(x) else 1.0 / x
    x0 = x.c[..., 0]
    if np.any(x0 == 0):
        raise DomainError("division by a jet with zero value")
    K = x.space.order
    inv = 1.0 / x0
    coeffs = [inv]
    for _ in range(K):
        coeffs.append(-coeffs[-1] * inv)
    return _compose(x, coeffs)


def power(x, p: float):
    """``x**p`` for real ``p``; the base must be positive unless ``p`` is an integer."""
    if not isinstance(x, Jet):
        return np.power(x, p)
    x0 = x.c[..., 0]
    _guard_positive(x0, f"power {p}")
    coeffs = []
    binom = 1.0
    for k in range(x.space.order + 1):
        coeffs.append(binom * x0 ** (p - k))
        binom *= (p - k) / (k + 1)
    return _compose(x, coeffs)


def sqrt(x):
    if not isinstance(x, Jet):
        if np.any(np.asarray(x) < 0):
            raise DomainError(f"square root of negative value {x}")
        return np.sqrt(x) if np.ndim(x) else math.sqrt(x)
    return power(x, 0.5)


def exp(x):
    if not isinstance(x, Jet):
        return np.exp(x)
    e0 = np.exp(x.c[..., 0])
    return _compose(x, [e0 / math.factorial(k) for k in range(x.space.order + 1)])


def log(x):
    if not isinstance(x, Jet):
        return np.log(x)
    x0 = x.c[..., 0]
    _guard_positive(x0, "log")
    coeffs = [np.log(x0)]
    for k in range(1, x.space.order + 1):
        coeffs.append((-1) ** (k + 1) / (k * x0**k))
    return _compose(x, coeffs)


def _trig_like(x: Jet, f, g, sign):
    # derivative cycle f, g, sign*f, sign*g, ...
    f0, g0 = f(x.c[..., 0]), g(x.c[..., 0])
    cycle = [f0, g0, sign * f0, sign * g0]
    return _compose(x, [cycle[k % 4] / math.factorial(k) for k in range(x.space.order + 1)])


def sin(x):
    if not isinstance(x, Jet):
        return np.sin(x)
    return _trig_like(x, np.sin, np.cos, -1.0)


def cos(x):
    if not isinstance(x, Jet):
        return np.cos(x)
    return _trig_like(x, np.cos, lambda v: -np.sin(v), -1.0)


def sinh(x):
    if not isinstance(x, Jet):
        return np.sinh(x)
    return _trig_like(x, np.sinh, np.cosh, 1.0)


def cosh(x):
    if not isinstance(x, Jet):
        return np.cosh(x)
    return _trig_like(x, np.cosh, np.sinh, 1.0)


# -- field-level operations --------------------------------------------------


def _as_point(at) -> EvalPoint:
    return at if isinstance(at, EvalPoint) else EvalPoint(*at)


def _check(field, at: EvalPoint):
    require = getattr(field, "require_admissible", None)
    if require is not None:
        require(at)


def expand(field: Callable, at, order: int, xorder: int | None = None) -> Jet:
    """Taylor-expand ``field`` about ``at`` in all ``2 * dim`` variables."""
    at = _as_point(at)
    _check(field, at)
    d = at.dim
    space = jet_space(2 * d, order, d, xorder)
    v = space.variables(at.x + at.y)
    out = field(v[:d], v[d:])
    if not isinstance(out, Jet):
        out = space.constant(out)
    return out


def partial(field: Callable, at, multi_index: Sequence[int]) -> float:
    """Exact mixed partial of ``field`` at ``at``.

    ``multi_index`` holds one exponent per variable, positions first.
    """
    at = _as_point(at)
    mi = tuple(int(v) for v in multi_index)
    if len(mi) != 2 * at.dim or min(mi) < 0:
        raise ValueError(f"multi-index {mi} does not match dimension {at.dim}")
    order = sum(mi)
    if order > MAX_ORDER:
        raise CapabilityError(f"derivative order {order} exceeds MAX_ORDER={MAX_ORDER}")
    jet = expand(field, at, order, sum(mi[: at.dim]))
    return jet.partial(mi)


def euler_residual(jet: Jet, y: Sequence[float], degree: float):
    """|y^a dH/dy^a - degree * H| from a jet carrying first ``y`` derivatives."""
    d = len(y)
    val = jet.c[..., 0]
    euler = 0.0
    for a in range(d):
        e = [0] * (2 * d)
        e[d + a] = 1
        euler = euler + y[a] * jet.c[..., jet.space.index[tuple(e)]]
    return np.abs(euler - degree * val)


def homogeneity_check(field: Callable, at, degree: float) -> float:
    """Residual of Euler's relation for positive ``y``-homogeneity of ``degree``."""
    at = _as_point(at)
    jet = expand(field, at, 1, 0)
    return float(euler_residual(jet, at.y, degree))


# -- finite-difference oracle ------------------------------------------------


def central_difference(field: Callable, at, multi_index: Sequence[int], step: float = 1e-5) -> float:
    """Nested central-difference estimate of a mixed partial (test oracle only)."""
    at = _as_point(at)
    d = at.dim
    pt = np.array(at.x + at.y, dtype=float)
    dirs = [i for i, n in enumerate(multi_index) for _ in range(n)]

    def f(p):
        return float(field(list(p[:d]), list(p[d:])))

    def rec(p, remaining):
        if not remaining:
            return f(p)
        i, rest = remaining[0], remaining[1:]
        e = np.zeros_like(p)
        e[i] = step
        return (rec(p + e, rest) - rec(p - e, rest)) / (2 * step)

    return rec(pt, dirs)


def richardson_partial(field: Callable, at, multi_index: Sequence[int], step: float = 1e-2, levels: int = 4) -> float:
    """Richardson-extrapolated central differences (even error expansion in h)."""
    table = [central_difference(field, at, multi_index, step / 2**k) for k in range(levels)]
    for j in range(1, levels):
        f = 4.0**j
        table = [(f * table[k + 1] - table[k]) / (f - 1) for k in range(len(table) - 1)]
    return table[0]
