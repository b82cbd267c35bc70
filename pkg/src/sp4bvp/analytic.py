"""Analytic data functions with exact arbitrary-order Taylor coefficients.

Functions are closed-form expression trees over ``x`` built from constants,
``+ - * /``, integer powers, ``exp``, ``sin`` and ``cos``.  Taylor coefficients
``f^(k)(x0)/k!`` are propagated through the tree with the usual Taylor-mode
recurrences (Cauchy products, the exp/sin/cos ODE recurrences and series
division), vectorised over expansion points.

Expression strings accepted by :func:`parse`::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := ('+' | '-') factor | atom (('^' | '**') integer)?
    atom   := number | 'x' | 'pi' | 'e' | func '(' expr ')'
            | 'pow' '(' expr ',' integer ')' | '(' expr ')'
    func   := 'exp' | 'sin' | 'cos'
"""

from __future__ import annotations

import ast
import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, DomainError, EvaluationError, ParseError

DEFAULT_ORDER_CAP = 64


class Expr:
    """Node of an expression tree; supports arithmetic operator overloading."""

    def taylor(self, x0: np.ndarray, n: int) -> np.ndarray:
        """Return Taylor coefficients with shape ``(n + 1, len(x0))``."""
        raise NotImplementedError

    def __add__(self, other):
        return Add(self, _wrap(other))

    def __radd__(self, other):
        return Add(_wrap(other), self)

    def __sub__(self, other):
        return Sub(self, _wrap(other))

    def __rsub__(self, other):
        return Sub(_wrap(other), self)

    def __mul__(self, other):
        return Mul(self, _wrap(other))

    def __rmul__(self, other):
        return Mul(_wrap(other), self)

    def __truediv__(self, other):
        return Div(self, _wrap(other))

    def __rtruediv__(self, other):
        return Div(_wrap(other), self)

    def __neg__(self):
        return Neg(self)

    def __pow__(self, m):
        if not isinstance(m, (int, np.integer)):
            raise TypeError("only integer powers are supported")
        return Pow(self, int(m))


def _wrap(v) -> Expr:
    if isinstance(v, Expr):
        return v
    return Const(float(v))


def _conv(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    out = np.empty_like(a)
    for k in range(n):
        out[k] = np.sum(a[: k + 1] * b[k::-1], axis=0)
    return out


@dataclass(frozen=True)
class Const(Expr):
    value: float

    def taylor(self, x0, n):
        out = np.zeros((n + 1, x0.size))
        out[0] = self.value
        return out

    def __str__(self):
        return repr(self.value)


@dataclass(frozen=True)
class Var(Expr):
    def taylor(self, x0, n):
        out = np.zeros((n + 1, x0.size))
        out[0] = x0
        if n >= 1:
            out[1] = 1.0
        return out

    def __str__(self):
        return "x"


@dataclass(frozen=True)
class Add(Expr):
    a: Expr
    b: Expr

    def taylor(self, x0, n):
        return self.a.taylor(x0, n) + self.b.taylor(x0, n)

    def __str__(self):
        return f"({self.a} + {self.b})"


@dataclass(frozen=True)
class Sub(Expr):
    a: Expr
    b: Expr

    def taylor(self, x0, n):
        return self.a.taylor(x0, n) - self.b.taylor(x0, n)

    def __str__(self):
        return f"({self.a} - {self.b})"


@dataclass(frozen=True)
class Neg(Expr):
    a: Expr

    def taylor(self, x0, n):
        return -self.a.taylor(x0, n)

    def __str__(self):
        return f"(-{self.a})"


@dataclass(frozen=True)
class Mul(Expr):
    a: Expr
    b: Expr

    def taylor(self, x0, n):
        return _conv(self.a.taylor(x0, n), self.b.taylor(x0, n))

    def __str__(self):
        return f"({self.a} * {self.b})"


@dataclass(frozen=True)
class Div(Expr):
    a: Expr
    b: Expr

    def taylor(self, x0, n):
        num = self.a.taylor(x0, n)
        den = self.b.taylor(x0, n)
        if np.any(den[0] == 0.0):
            bad = x0[den[0] == 0.0][0]
            raise DomainError(f"division by zero in {self} at x = {bad}")
        out = np.empty_like(num)
        for k in range(n + 1):
            acc = num[k] - np.sum(den[1 : k + 1] * out[k - 1 :: -1][:k], axis=0)
            out[k] = acc / den[0]
        return out

    def __str__(self):
        return f"({self.a} / {self.b})"


@dataclass(frozen=True)
class Pow(Expr):
    a: Expr
    m: int

    def taylor(self, x0, n):
        if self.m == 0:
            return Const(1.0).taylor(x0, n)
        base = self.a.taylor(x0, n)
        if self.m < 0:
            if np.any(base[0] == 0.0):
                raise DomainError(f"negative power of zero in {self}")
            return Div(Const(1.0), Pow(self.a, -self.m)).taylor(x0, n)
        # binary exponentiation keeps the a0 == 0 case exact
        result = None
        e = self.m
        while e:
            if e & 1:
                result = base if result is None else _conv(result, base)
            e >>= 1
            if e:
                base = _conv(base, base)
        return result

    def __str__(self):
        return f"pow({self.a}, {self.m})"


@dataclass(frozen=True)
class Exp(Expr):
    a: Expr

    def taylor(self, x0, n):
        a = self.a.taylor(x0, n)
        out = np.empty_like(a)
        out[0] = np.exp(a[0])
        for k in range(1, n + 1):
            i = np.arange(1, k + 1)[:, None]
            out[k] = np.sum(i * a[1 : k + 1] * out[k - 1 :: -1][:k], axis=0) / k
        return out

    def __str__(self):
        return f"exp({self.a})"


def _sincos(a: np.ndarray):
    s = np.empty_like(a)
    c = np.empty_like(a)
    s[0] = np.sin(a[0])
    c[0] = np.cos(a[0])
    for k in range(1, a.shape[0]):
        i = np.arange(1, k + 1)[:, None]
        ia = i * a[1 : k + 1]
        s[k] = np.sum(ia * c[k - 1 :: -1][:k], axis=0) / k
        c[k] = -np.sum(ia * s[k - 1 :: -1][:k], axis=0) / k
    return s, c


@dataclass(frozen=True)
class Sin(Expr):
    a: Expr

    def taylor(self, x0, n):
        return _sincos(self.a.taylor(x0, n))[0]

    def __str__(self):
        return f"sin({self.a})"


@dataclass(frozen=True)
class Cos(Expr):
    a: Expr

    def taylor(self, x0, n):
        return _sincos(self.a.taylor(x0, n))[1]

    def __str__(self):
        return f"cos({self.a})"


x = Var()


def exp(e) -> Expr:
    return Exp(_wrap(e))


def sin(e) -> Expr:
    return Sin(_wrap(e))


def cos(e) -> Expr:
    return Cos(_wrap(e))


_FUNCS = {"exp": Exp, "sin": Sin, "cos": Cos}
_NAMES = {"x": x, "pi": Const(math.pi), "e": Const(math.e)}


def _int_literal(node, text):
    sign = 1
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        sign = -1 if isinstance(node.op, ast.USub) else 1
        node = node.operand
    if isinstance(node, ast.Constant) and isinstance(node.value, int):
        return sign * node.value
    if isinstance(node, ast.Constant) and isinstance(node.value, float) and node.value.is_integer():
        return sign * int(node.value)
    raise ParseError(f"exponent must be an integer literal in {text!r}")


def _convert(node, text) -> Expr:
    if isinstance(node, ast.Expression):
        return _convert(node.body, text)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return Const(float(node.value))
    if isinstance(node, ast.Name):
        if node.id not in _NAMES:
            raise ParseError(f"unknown name {node.id!r} in {text!r}")
        return _NAMES[node.id]
    if isinstance(node, ast.UnaryOp):
        inner = _convert(node.operand, text)
        if isinstance(node.op, ast.USub):
            return Neg(inner)
        if isinstance(node.op, ast.UAdd):
            return inner
    if isinstance(node, ast.BinOp):
        if isinstance(node.op, ast.Pow):
            return Pow(_convert(node.left, text), _int_literal(node.right, text))
        ops = {ast.Add: Add, ast.Sub: Sub, ast.Mult: Mul, ast.Div: Div}
        op = ops.get(type(node.op))
        if op is not None:
            return op(_convert(node.left, text), _convert(node.right, text))
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and not node.keywords:
        name = node.func.id
        if name in _FUNCS and len(node.args) == 1:
            return _FUNCS[name](_convert(node.args[0], text))
        if name == "pow" and len(node.args) == 2:
            return Pow(_convert(node.args[0], text), _int_literal(node.args[1], text))
    raise ParseError(f"unsupported syntax in {text!r}")


def parse(text: str) -> Expr:
    """Parse an infix expression in ``x`` (see module docstring for the grammar)."""
    try:
        tree = ast.parse(text.replace("^", "**").strip(), mode="eval")
    except SyntaxError as exc:
        raise ParseError(f"cannot parse {text!r}: {exc.msg}") from None
    return _convert(tree, text)


@dataclass
class AnalyticityReport:
    C_fit: float
    gamma_fit: float
    orders_checked: int
    max_ratio: float
    norms: np.ndarray = field(repr=False)


class AnalyticFunction1D:
    """Analytic function on [0, 1] given by an expression tree.

    Args:
        expr: an :class:`Expr` or an expression string.
        order_cap: largest Taylor order that may be requested.
    """

    def __init__(self, expr, order_cap: int = DEFAULT_ORDER_CAP):
        if isinstance(expr, str):
            self.source = expr
            expr = parse(expr)
        else:
            expr = _wrap(expr)
            self.source = str(expr)
        self.expr = expr
        self.order_cap = order_cap
        self._cache: dict[tuple[float, int], np.ndarray] = {}
        self._lock = threading.Lock()

    def __repr__(self):
        return f"AnalyticFunction1D({self.source!r})"

    def __getstate__(self):
        # the lock cannot cross process boundaries; the cache is rebuilt on demand
        state = self.__dict__.copy()
        del state["_lock"]
        state["_cache"] = {}
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.Lock()

    @classmethod
    def constant(cls, value: float) -> AnalyticFunction1D:
        return cls(Const(float(value)))

    @property
    def is_zero(self) -> bool:
        return isinstance(self.expr, Const) and self.expr.value == 0.0

    def taylor_table(self, xs, n: int) -> np.ndarray:
        """Taylor coefficients at many points at once, shape ``(n + 1, len(xs))``."""
        if n < 0:
            raise ValueError("order must be non-negative")
        if n > self.order_cap:
            raise CapacityError(f"order {n} exceeds cap {self.order_cap}")
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        if np.any((xs < 0.0) | (xs > 1.0)):
            raise DomainError("expansion points must lie in [0, 1]")
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            table = self.expr.taylor(xs, n)
        if not np.all(np.isfinite(table)):
            raise EvaluationError(f"non-finite Taylor coefficient for {self.source!r}")
        return table

    def taylor_coeffs(self, x0: float, n: int) -> np.ndarray:
        """Return ``(f(x0), f'(x0), f''(x0)/2!, ..., f^(n)(x0)/n!)``."""
        key = (float(x0), int(n))
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit.copy()
        coeffs = self.taylor_table([x0], n)[:, 0]
        coeffs.setflags(write=False)
        with self._lock:
            self._cache[key] = coeffs
        return coeffs.copy()

    def derivative(self, xs, k: int) -> np.ndarray:
        """k-th derivative values at the points ``xs``."""
        return self.taylor_table(xs, k)[k] * math.factorial(k)

    def __call__(self, xs):
        scalar = np.ndim(xs) == 0
        vals = self.taylor_table(xs, 0)[0]
        return float(vals[0]) if scalar else vals

    def eval(self, x: float) -> float:
        return self(x)


def taylor_coeffs(f: AnalyticFunction1D, x0: float, n: int) -> np.ndarray:
    return f.taylor_coeffs(x0, n)


def eval(f: AnalyticFunction1D, x: float) -> float:  # noqa: A001 - mirrors the operation name
    return f.eval(x)


def validate_analyticity(f: AnalyticFunction1D, N: int, sample_count: int = 1024,
                         derivative: int = 0) -> AnalyticityReport:
    """Fit ``||g^(n)||_inf <= C gamma^n n!`` for ``n = 0..N`` on a uniform grid.

    ``g`` is ``f`` itself or, with ``derivative = d``, its d-th derivative.
    ``C`` is fixed to the sup norm of ``g`` (1 if ``g`` vanishes) and ``gamma``
    is the smallest value making every checked order satisfy the bound.
    """
    if N < 2:
        raise ValueError("N must be at least 2")
    if sample_count < 8:
        raise ValueError("sample_count must be at least 8")
    grid = np.linspace(0.0, 1.0, sample_count)
    if derivative < 0:
        raise ValueError("derivative must be non-negative")
    d = derivative
    table = f.taylor_table(grid, N + d)
    norms = np.array([np.max(np.abs(table[n + d])) * math.factorial(n + d) for n in range(N + 1)])
    C = norms[0] if norms[0] > 0.0 else 1.0
    gamma = 0.0
    for n in range(1, N + 1):
        if norms[n] > 0.0:
            gamma = max(gamma, (norms[n] / (C * math.factorial(n))) ** (1.0 / n))
    # nudge so the n-th root round trip never leaves a ratio above 1
    gamma = gamma * (1.0 + 1e-12) if gamma > 0.0 else 1e-12
    ratios = [norms[n] / (C * gamma**n * math.factorial(n)) for n in range(N + 1)]
    return AnalyticityReport(float(C), float(gamma), N, float(max(ratios)), norms)
