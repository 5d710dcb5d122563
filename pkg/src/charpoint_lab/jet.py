"""Truncated multivariate Taylor arithmetic (jets).

A :class:`Jet` of order ``d`` in ``n`` variables stores the normalized Taylor
coefficients ``c[i, j, ...] = d^i_x d^j_y ... f / (i! j! ...)`` for total degree
at most ``d``.  Coefficient arrays carry optional trailing batch dimensions so
a whole grid of base points is processed by a single sequence of numpy
operations.
"""

from __future__ import annotations

import functools
import itertools
import math

import numpy as np
from scipy import integrate

from .errors import DomainError, JetOrderError
from .expr import ANTIDER_TOL, ExprNode, uses_variable

MAX_ORDER = 16


@functools.lru_cache(maxsize=None)
def _degree(order: int, nvars: int) -> np.ndarray:
    grids = np.indices((order + 1,) * nvars)
    deg = grids.sum(axis=0)
    deg.setflags(write=False)
    return deg


@functools.lru_cache(maxsize=None)
def _multi_indices(order: int, nvars: int) -> tuple[tuple[int, ...], ...]:
    return tuple(a for a in itertools.product(range(order + 1), repeat=nvars) if sum(a) <= order)


def _mask(order: int, nvars: int, batch_ndim: int) -> np.ndarray:
    m = _degree(order, nvars) <= order
    return m.reshape(m.shape + (1,) * batch_ndim)


class Jet:
    """Truncated Taylor expansion; supports +, -, *, /, integer powers."""

    __slots__ = ("coeffs", "order", "nvars", "base")

    def __init__(self, coeffs, order: int, nvars: int, base=None):
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.order = order
        self.nvars = nvars
        self.base = base

    # -- constructors ---------------------------------------------------
    @classmethod
    def constant(cls, c, order: int, nvars: int = 2) -> Jet:
        c = np.asarray(c, dtype=float)
        coeffs = np.zeros((order + 1,) * nvars + c.shape)
        coeffs[(0,) * nvars] = c
        return cls(coeffs, order, nvars)

    @classmethod
    def variable(cls, index: int, base, order: int, nvars: int = 2) -> Jet:
        jet = cls.constant(base, order, nvars)
        if order >= 1:
            unit = [0] * nvars
            unit[index] = 1
            jet.coeffs[tuple(unit)] = 1.0
        return jet

    @classmethod
    def from_univariate(cls, coeffs, base=None) -> Jet:
        coeffs = np.asarray(coeffs, dtype=float)
        return cls(coeffs, coeffs.shape[0] - 1, 1, base)

    # -- accessors --------------------------------------------------------
    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[self.nvars:]

    @property
    def value(self) -> np.ndarray:
        return self.coeffs[(0,) * self.nvars]

    def __getitem__(self, index) -> np.ndarray:
        return self.coeffs[tuple(index)]

    def partial(self, index) -> np.ndarray:
        """The raw partial derivative d^index f at the base point."""
        scale = math.prod(math.factorial(i) for i in index)
        return scale * self.coeffs[tuple(index)]

    def truncate(self, order: int) -> Jet:
        if order > self.order:
            raise JetOrderError(f"cannot raise jet order {self.order} to {order}")
        sl = (slice(0, order + 1),) * self.nvars
        c = self.coeffs[sl] * _mask(order, self.nvars, len(self.batch_shape))
        return Jet(c, order, self.nvars, self.base)

    def deriv(self, index: int) -> Jet:
        """Jet of the partial derivative along variable ``index`` (order drops by one)."""
        d = self.order
        if d == 0:
            raise JetOrderError("cannot differentiate an order-0 jet")
        sl = [slice(0, d)] * self.nvars
        sl[index] = slice(1, d + 1)
        c = self.coeffs[tuple(sl)]
        shape = [1] * c.ndim
        shape[index] = d
        c = c * np.arange(1, d + 1).reshape(shape)
        c = c * _mask(d - 1, self.nvars, len(self.batch_shape))
        return Jet(c, d - 1, self.nvars)

    def nilpotent(self) -> Jet:
        c = self.coeffs.copy()
        c[(0,) * self.nvars] = 0.0
        return Jet(c, self.order, self.nvars)

    # -- arithmetic -------------------------------------------------------
    def _lift(self, batch_ndim: int) -> Jet:
        extra = batch_ndim - len(self.batch_shape)
        if extra <= 0:
            return self
        return Jet(self.coeffs.reshape(self.coeffs.shape + (1,) * extra), self.order, self.nvars, self.base)

    def _coerce(self, other):
        if not isinstance(other, Jet):
            other = Jet.constant(other, self.order, self.nvars)
        if other.nvars != self.nvars:
            raise JetOrderError("jets in different numbers of variables")
        d = min(self.order, other.order)
        a = self if self.order == d else self.truncate(d)
        b = other if other.order == d else other.truncate(d)
        nb = max(len(a.batch_shape), len(b.batch_shape))
        return a._lift(nb), b._lift(nb)

    def __add__(self, other):
        a, b = self._coerce(other)
        return Jet(a.coeffs + b.coeffs, a.order, a.nvars)

    __radd__ = __add__

    def __sub__(self, other):
        a, b = self._coerce(other)
        return Jet(a.coeffs - b.coeffs, a.order, a.nvars)

    def __rsub__(self, other):
        a, b = self._coerce(other)
        return Jet(b.coeffs - a.coeffs, a.order, a.nvars)

    def __neg__(self):
        return Jet(-self.coeffs, self.order, self.nvars)

    def __mul__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            a = self._lift(other.ndim)
            return Jet(a.coeffs * other.reshape((1,) * a.nvars + other.shape), a.order, a.nvars)
        a, b = self._coerce(other)
        d, n = a.order, a.nvars
        ac, bc = a.coeffs, b.coeffs
        shape = np.broadcast_shapes(ac.shape, bc.shape)
        out = np.zeros(shape)
        for alpha in _multi_indices(d, n):
            lead = ac[alpha]
            if not lead.any():
                continue
            dst = tuple(slice(i, d + 1) for i in alpha)
            src = tuple(slice(0, d + 1 - i) for i in alpha)
            out[dst] += lead * bc[src]
        out *= _mask(d, n, len(shape) - n)
        return Jet(out, d, n)

    __rmul__ = __mul__

    def reciprocal(self) -> Jet:
        c0 = self.value
        if np.any(c0 == 0.0):
            raise DomainError("division by a jet with zero constant term")
        return apply_series(reciprocal_series(c0, self.order), self)

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / np.asarray(other, dtype=float))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, n: int):
        if not isinstance(n, (int, np.integer)):
            raise TypeError("jets support integer powers only")
        if n < 0:
            return self.reciprocal() ** (-n)
        if n == 0:
            return Jet.constant(np.ones(self.batch_shape), self.order, self.nvars)
        result = None
        base = self
        while n:
            if n & 1:
                result = base if result is None else result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def __repr__(self) -> str:
        return f"Jet(order={self.order}, nvars={self.nvars}, batch={self.batch_shape})"

    # -- coordinate changes -------------------------------------------------
    def linear_map(self, matrix) -> Jet:
        """Taylor polynomial of f(M u) in the new variables u (two variables only)."""
        if self.nvars != 2:
            raise JetOrderError("linear_map is defined for two-variable jets")
        m = np.asarray(matrix, dtype=float)
        d = self.order
        if d == 0:
            return Jet(self.coeffs.copy(), 0, 2)
        u = Jet.constant(0.0, d, 2)
        u.coeffs[1, 0], u.coeffs[0, 1] = m[0, 0], m[0, 1]
        v = Jet.constant(0.0, d, 2)
        v.coeffs[1, 0], v.coeffs[0, 1] = m[1, 0], m[1, 1]
        upow = [Jet.constant(1.0, d, 2)]
        vpow = [Jet.constant(1.0, d, 2)]
        for _ in range(d):
            upow.append(upow[-1] * u)
            vpow.append(vpow[-1] * v)
        out = np.zeros(self.coeffs.shape)
        nb = len(self.batch_shape)
        for i, j in _multi_indices(d, 2):
            if i == j == 0:
                continue
            term = (upow[i] * vpow[j]).coeffs
            out += term.reshape(term.shape + (1,) * nb) * self.coeffs[i, j]
        # the constant term is copied, so a NaN value sentinel stays local
        out[0, 0] = self.coeffs[0, 0]
        return Jet(out, d, 2)


# ------------------------------------------------------------ univariate series
#
# A series is a list of batch arrays [c0, c1, ..., cd]; it represents
# sum_n c_n s^n, i.e. the Taylor coefficients of a function at some point.

def series_mul(a, b, d):
    return [sum(a[k] * b[n - k] for k in range(n + 1)) for n in range(d + 1)]


def series_reciprocal(a, d):
    a0 = a[0]
    out = [1.0 / a0]
    for n in range(1, d + 1):
        acc = sum(a[k] * out[n - k] for k in range(1, n + 1) if k < len(a))
        out.append(-acc / a0)
    return out


def series_exp(a, d):
    """exp of a series, through E' = a' E."""
    e0 = np.exp(a[0])
    out = [e0]
    for n in range(1, d + 1):
        acc = sum(k * a[k] * out[n - k] for k in range(1, n + 1) if k < len(a))
        out.append(acc / n)
    return out


def reciprocal_series(x0, d):
    return [(-1.0) ** n * x0 ** (-(n + 1)) for n in range(d + 1)]


def _taylor_builtin(name: str, x0: np.ndarray, d: int, pos: int):
    """Taylor coefficients of a builtin at x0 (vectorized over batch)."""
    fact = [math.factorial(n) for n in range(d + 1)]
    if name == "exp":
        e = np.exp(x0)
        return [e / fact[n] for n in range(d + 1)]
    if name == "sin":
        return [np.sin(x0 + n * math.pi / 2) / fact[n] for n in range(d + 1)]
    if name == "cos":
        return [np.cos(x0 + n * math.pi / 2) / fact[n] for n in range(d + 1)]
    if name == "log":
        if np.any(x0 <= 0):
            raise DomainError("log of non-positive value", pos)
        return [np.log(x0)] + [(-1.0) ** (n - 1) / (n * x0 ** n) for n in range(1, d + 1)]
    if name == "sqrt":
        if np.any(x0 <= 0):
            raise DomainError("sqrt jet at a non-positive value", pos)
        out = []
        binom = 1.0
        for n in range(d + 1):
            out.append(binom * x0 ** (0.5 - n))
            binom *= (0.5 - n) / (n + 1)
        return out
    if name == "atan":
        q = series_reciprocal([1.0 + x0 * x0, 2.0 * x0, np.ones_like(x0)], d)
        return [np.arctan(x0)] + [q[n - 1] / n for n in range(1, d + 1)]
    if name == "flat":
        return _flat_series(x0, d)
    raise DomainError(f"unknown builtin {name!r}", pos)


def _flat_series(x0, d):
    """Taylor coefficients of exp(-1/s^2) at s = x0; identically zero at x0 = 0."""
    x0 = np.asarray(x0, dtype=float)
    zero = x0 == 0.0
    safe = np.where(zero, 1.0, x0)
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        # -1/(x0+s)^2 = -sum (n+1) (-1)^n s^n / x0^(n+2)
        inner = [-(n + 1) * (-1.0) ** n * safe ** (-(n + 2)) for n in range(d + 1)]
        lead = np.exp(inner[0])
        tail = series_exp([np.zeros_like(safe)] + inner[1:], d)
        out = []
        for c in tail:
            v = lead * c
            # exp(-1/x0^2) underflowed: every coefficient is below double range
            v = np.where((lead == 0.0) | zero, 0.0, v)
            out.append(v)
    return out


def apply_series(series, jet: Jet) -> Jet:
    """sum_n series[n] * (jet - jet(0))^n, evaluated by Horner's rule."""
    d = jet.order
    t = jet.nilpotent()
    result = Jet.constant(series[d], d, jet.nvars)
    for n in range(d - 1, -1, -1):
        result = result * t + series[n]
    return result


def compose_1d(outer: Jet, inner: Jet, order: int | None = None) -> Jet:
    """Taylor coefficients of outer(inner(s)).

    ``outer`` holds the coefficients of a univariate function expanded at the
    constant term of ``inner``.
    """
    if outer.nvars != 1 or inner.nvars != 1:
        raise JetOrderError("compose_1d takes univariate jets")
    d = min(outer.order, inner.order)
    if order is not None:
        if order > d:
            raise JetOrderError(f"requested order {order} exceeds available order {d}")
        d = order
    if outer.base is not None and not np.allclose(outer.base, inner.value, rtol=0, atol=1e-14):
        raise ValueError("outer jet is not expanded at the inner jet's constant term")
    series = [outer.coeffs[n] for n in range(d + 1)]
    return apply_series(series, inner.truncate(d))


# ------------------------------------------------------------ expression jets

def evaluate_jet(node: ExprNode, env: dict[str, Jet], value_needed: bool = True) -> Jet:
    """Jet of ``node`` with variables bound to jets in ``env``.

    When ``value_needed`` is false the constant term of ``antider_x`` nodes
    sitting under purely additive ancestors is not integrated and is reported
    as NaN; every derivative coefficient is still exact.
    """
    template = next(iter(env.values()))
    d, n = template.order, template.nvars
    k = node.kind
    if k == "constant":
        return Jet.constant(node.value, d, n)
    if k == "var":
        return env[node.name]
    if k == "add":
        return evaluate_jet(node.children[0], env, value_needed) + evaluate_jet(node.children[1], env, value_needed)
    if k == "sub":
        return evaluate_jet(node.children[0], env, value_needed) - evaluate_jet(node.children[1], env, value_needed)
    if k == "neg":
        return -evaluate_jet(node.children[0], env, value_needed)
    if k == "mul":
        return evaluate_jet(node.children[0], env) * evaluate_jet(node.children[1], env)
    if k == "div":
        denom = evaluate_jet(node.children[1], env)
        if np.any(denom.value == 0.0):
            raise DomainError("division by zero", node.pos)
        return evaluate_jet(node.children[0], env) * denom.reciprocal()
    if k == "pow":
        base = evaluate_jet(node.children[0], env)
        if node.exponent < 0 and np.any(base.value == 0.0):
            raise DomainError("zero raised to a negative power", node.pos)
        return base ** node.exponent
    if k == "call":
        arg = evaluate_jet(node.children[0], env)
        with np.errstate(over="raise", invalid="raise"):
            try:
                series = _taylor_builtin(node.name, arg.value, d, node.pos)
            except FloatingPointError as exc:
                raise DomainError(f"{node.name} overflow", node.pos) from exc
        return apply_series(series, arg)
    if k == "antider_x":
        return _antider_jet(node, env, value_needed)
    raise ValueError(f"unknown node kind {k!r}")


def _antider_jet(node: ExprNode, env: dict[str, Jet], value_needed: bool) -> Jet:
    xjet = env["x"]
    d, n = xjet.order, xjet.nvars
    unit = [0] * n
    unit[0] = 1
    probe = xjet.coeffs.copy()
    probe[(0,) * n] = 0.0
    if d >= 1:
        probe[tuple(unit)] -= 1.0
    if np.any(probe != 0.0):
        raise DomainError("antider_x requires x bound to a coordinate variable", node.pos)
    body = node.children[0]
    batch = xjet.batch_shape
    coeffs = np.zeros((d + 1,) * n + batch)
    if d >= 1:
        inner = evaluate_jet(body, {name: j.truncate(d - 1) for name, j in env.items()})
        for alpha in _multi_indices(d - 1, n):
            target = (alpha[0] + 1,) + alpha[1:]
            coeffs[target] = inner.coeffs[alpha] / (alpha[0] + 1)
    others = [name for name in env if name != "x" and uses_variable(body, name)]
    zero_slab = [a for a in _multi_indices(d, n) if a[0] == 0]
    if others:
        # y/z derivatives of the integral need the integrand's y/z jet along [0, x]
        slab = _antider_slab(body, env, d, n)
        for a in zero_slab:
            coeffs[a] = slab[a]
        if not value_needed:
            coeffs[(0,) * n] = np.nan
    elif value_needed:
        coeffs[(0,) * n] = _antider_values(body, env)
    else:
        coeffs[(0,) * n] = np.nan
    return Jet(coeffs, d, n)


def _base_points(env: dict[str, Jet]):
    names = list(env)
    values = np.broadcast_arrays(*[np.asarray(env[name].value) for name in names])
    return names, values


def _antider_values(body: ExprNode, env: dict[str, Jet]) -> np.ndarray:
    from .expr import antider_value

    names, values = _base_points(env)
    shape = values[0].shape
    out = np.empty(shape)
    for idx in np.ndindex(shape):
        point = {name: float(v[idx]) for name, v in zip(names, values)}
        out[idx] = antider_value(body, point)
    return out


def _antider_slab(body: ExprNode, env: dict[str, Jet], d: int, n: int):
    names, values = _base_points(env)
    shape = values[0].shape
    out = np.zeros((d + 1,) * n + shape)
    for idx in np.ndindex(shape):
        point = {name: float(v[idx]) for name, v in zip(names, values)}

        def integrand(tau):
            local = {}
            for i, name in enumerate(names):
                if name == "x":
                    local[name] = Jet.constant(tau, d, n)
                else:
                    local[name] = Jet.variable(i, point[name], d, n)
            return evaluate_jet(body, local).coeffs.ravel()

        if point["x"] == 0.0:
            continue
        res, err = integrate.quad_vec(integrand, 0.0, point["x"], epsabs=ANTIDER_TOL, epsrel=ANTIDER_TOL)
        out[(...,) + idx] = np.asarray(res).reshape((d + 1,) * n)
    return out


def jet_of(model, base, order: int, value: bool = False) -> Jet:
    """Jet of the surface function g at ``base`` (scalars or equal-shape arrays).

    Coefficient (i, j) equals d^i_x d^j_y g / (i! j!).  With ``value=False``
    the constant term may be NaN when it would require integrating an
    ``antider_x`` node; no derivative depends on it.
    """
    if not 0 <= order <= MAX_ORDER:
        raise JetOrderError(f"jet order {order} outside [0, {MAX_ORDER}]")
    x, y = np.broadcast_arrays(np.asarray(base[0], dtype=float), np.asarray(base[1], dtype=float))
    env = {"x": Jet.variable(0, x, order, 2), "y": Jet.variable(1, y, order, 2)}
    jet = evaluate_jet(model.g, env, value_needed=value)
    return _checked(_broadcast(jet, x.shape), value)


def expression_jet(node: ExprNode, point, order: int, value: bool = True) -> Jet:
    """Jet in (x, y, z) of a space expression at ``point``."""
    arrays = np.broadcast_arrays(*[np.asarray(p, dtype=float) for p in point])
    env = {name: Jet.variable(i, arrays[i], order, 3) for i, name in enumerate(("x", "y", "z"))}
    return _checked(_broadcast(evaluate_jet(node, env, value_needed=value), arrays[0].shape), value)


def _broadcast(jet: Jet, shape) -> Jet:
    if jet.batch_shape == tuple(shape):
        return jet
    jet = jet._lift(len(shape))
    c = np.broadcast_to(jet.coeffs, (jet.order + 1,) * jet.nvars + tuple(shape)).copy()
    return Jet(c, jet.order, jet.nvars)


def _checked(jet: Jet, value: bool) -> Jet:
    c = jet.coeffs
    n = jet.nvars
    finite = np.isfinite(c)
    if not value:
        finite[(0,) * n] = True
    if not np.all(finite):
        raise DomainError("non-finite jet coefficient (evaluation left the function domain)")
    return jet
