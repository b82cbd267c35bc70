"""Boundary-layer terms as exact polynomial-times-exponential functions.

A layer term is ``w(s) = p(s) exp(-kappa s)`` in the stretched variable ``s``.
Right-hand sides of the layer recursion stay in this ring because the
Taylor monomials of the coefficients multiply polynomials and the decay rate
is fixed at ``kappa = sqrt(alpha(endpoint))``.

Writing ``D = d/ds``, the layer operator acts on the polynomial factor as

    w'''' - kappa^2 w''  ->  (D - kappa)^2 (D - 2 kappa) D  q

so a particular solution follows from back-substituting a triangular system
for ``r = q'`` and integrating once; the free constant is the decaying
homogeneous mode, fixed by the derivative datum at ``s = 0``.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass

import mpmath
import numpy as np

from .errors import OrchestrationError, UnsupportedInputError

KAPPA_RTOL = 1e-12


def _trim(c: np.ndarray) -> np.ndarray:
    """Drop exactly-zero leading coefficients (highest powers)."""
    nz = np.nonzero([v != 0 for v in c])[0]
    if nz.size == 0:
        return c[:1] * 0
    return c[: nz[-1] + 1]


def _polymul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.dtype == object or b.dtype == object:
        out = np.array([mpmath.mpf(0)] * (a.size + b.size - 1), dtype=object)
        for i, ai in enumerate(a):
            for k, bk in enumerate(b):
                out[i + k] += ai * bk
        return out
    return np.convolve(a, b)


def _polyadd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.size < b.size:
        a, b = b, a
    out = a.copy()
    out[: b.size] = out[: b.size] + b
    return out


def _polyder(a: np.ndarray) -> np.ndarray:
    if a.size <= 1:
        return a[:1] * 0
    return a[1:] * np.arange(1, a.size)


def _polyval(a: np.ndarray, s):
    s = np.asarray(s, dtype=float)
    if a.dtype == object:
        a = np.array([float(v) for v in a])
    return np.polynomial.polynomial.polyval(s, a)


@dataclass(frozen=True)
class PolyExp:
    """``poly(s) * exp(-kappa * s)`` with ``poly`` stored lowest power first."""

    poly: np.ndarray
    kappa: float

    def __post_init__(self):
        p = np.asarray(self.poly)
        if p.dtype != object:
            p = p.astype(float)
        object.__setattr__(self, "poly", _trim(np.atleast_1d(p)))

    @classmethod
    def zero(cls, kappa: float) -> PolyExp:
        return cls(np.zeros(1), kappa)

    @property
    def degree(self) -> int:
        """Structural degree; the zero function has degree -1."""
        if self.is_zero:
            return -1
        return self.poly.size - 1

    @property
    def is_zero(self) -> bool:
        return not any(v != 0 for v in self.poly)

    def deriv(self, n: int = 1) -> PolyExp:
        p = self.poly
        for _ in range(n):
            p = _polyadd(_polyder(p), -self.kappa * p)
        return PolyExp(p, self.kappa)

    def __add__(self, other: PolyExp) -> PolyExp:
        self._check_rate(other)
        return PolyExp(_polyadd(self.poly, other.poly), self.kappa)

    def __sub__(self, other: PolyExp) -> PolyExp:
        return self + (-other)

    def __neg__(self) -> PolyExp:
        return PolyExp(-self.poly, self.kappa)

    def __mul__(self, c: float) -> PolyExp:
        return PolyExp(self.poly * c, self.kappa)

    __rmul__ = __mul__

    def times_poly(self, q) -> PolyExp:
        q = np.asarray(q) if not isinstance(q, np.ndarray) else q
        return PolyExp(_polymul(self.poly, q), self.kappa)

    def _check_rate(self, other: PolyExp) -> None:
        if self.is_zero or other.is_zero:
            return
        if abs(self.kappa - other.kappa) > KAPPA_RTOL * max(self.kappa, other.kappa):
            raise UnsupportedInputError(f"decay rates differ: {self.kappa} vs {other.kappa}")

    def __call__(self, s, n: int = 0):
        """Value of the n-th s-derivative at ``s``."""
        w = self.deriv(n) if n else self
        s = np.asarray(s, dtype=float)
        return _polyval(w.poly, s) * np.exp(-self.kappa * s)

    def float_poly(self) -> np.ndarray:
        return np.array([float(v) for v in self.poly])


@dataclass(frozen=True)
class LayerTerm:
    """Layer function ``U_j`` at one endpoint; ``side`` is ``"left"`` or ``"right"``."""

    func: PolyExp
    side: str
    j: int

    @property
    def kappa(self) -> float:
        return self.func.kappa

    @property
    def poly(self) -> np.ndarray:
        return self.func.poly

    @property
    def degree(self) -> int:
        return self.func.degree

    @property
    def is_zero(self) -> bool:
        return self.func.is_zero

    def __call__(self, s, n: int = 0):
        return self.func(s, n)

    def csv_row(self) -> list:
        return [self.j, self.side, repr(float(self.kappa))] + [repr(float(c)) for c in self.poly]


def index_bounds(j: int) -> tuple[int, int]:
    """Upper summation limits ``(A_j, B_j)`` of the truncated right-hand side sums.

    A negative ``B_j`` means the reaction sum is empty.
    """
    if j < 0:
        raise ValueError("j must be non-negative")
    if j % 2 == 0:
        return j // 2, (j - 2) // 2
    return (j - 1) // 2, (j - 3) // 2


def sum_limits(j: int, sums: str = "full") -> tuple[int, int]:
    """Summation limits used by :func:`assemble_F`.

    ``"full"`` keeps every power of the coefficient expansions that contributes
    at order ``j`` (``k <= j`` and ``k <= j - 2``); ``"truncated"`` uses
    :func:`index_bounds`.
    """
    if sums == "full":
        return j, j - 2
    if sums == "truncated":
        return index_bounds(j)
    raise ValueError(f"unknown sums mode {sums!r}")


def _monomial(coef, k: int, dtype) -> np.ndarray:
    m = np.zeros(k + 1, dtype=dtype)
    if dtype == object:
        m[:] = mpmath.mpf(0)
    m[k] = coef
    return m


def assemble_F(
    j: int,
    prior: Mapping[int, LayerTerm | PolyExp],
    alpha_taylor,
    beta_taylor,
    kappa: float | None = None,
    sums: str = "full",
) -> PolyExp:
    """Right-hand side of the layer equation for term ``j``.

    ``alpha_taylor[k]`` and ``beta_taylor[k]`` are the Taylor coefficients of
    the coefficient functions at the endpoint, in the direction of the
    stretched variable.
    """
    ka, kb = sum_limits(j, sums)
    funcs = {i: (t.func if isinstance(t, LayerTerm) else t) for i, t in prior.items()}
    if kappa is None:
        if not funcs:
            raise OrchestrationError("kappa is required when no prior terms are given")
        kappa = next(iter(funcs.values())).kappa

    def need(i):
        if i not in funcs:
            raise OrchestrationError(f"layer term {i} is required to assemble F_{j}")
        return funcs[i]

    F = PolyExp.zero(kappa)
    for k in range(1, ka + 1):
        if j - k < 1:
            continue  # U_0 vanishes identically
        ak = alpha_taylor[k]
        if ak == 0:
            need(j - k)
            continue
        w = need(j - k)
        dtype = w.poly.dtype
        F = F + w.deriv(2).times_poly(_monomial(ak, k, dtype))
        F = F + w.deriv(1).times_poly(_monomial(k * ak, k - 1, dtype))
    for k in range(0, kb + 1):
        i = j - 2 - k
        if i < 1:
            continue
        w = need(i)
        bk = beta_taylor[k]
        if bk == 0:
            continue
        F = F - w.times_poly(_monomial(bk, k, w.poly.dtype))
    return F


def solve_layer_ode(F: PolyExp, g1: float, kappa: float, side: str = "left", j: int = 0,
                    dps: int | None = None) -> LayerTerm:
    """Decaying solution of ``w'''' - kappa^2 w'' = F`` on (0, inf) with ``w'(0) = g1``.

    ``dps`` switches the coefficient arithmetic to mpmath with that many digits.

    Raises:
        UnsupportedInputError: ``F`` decays at a rate other than ``kappa``.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    if not F.is_zero and abs(F.kappa - kappa) > KAPPA_RTOL * kappa:
        raise UnsupportedInputError(f"forcing decays at {F.kappa}, layer rate is {kappa}")
    if dps is not None:
        with mpmath.workdps(dps):
            return _solve_layer(F, g1, mpmath.mpf(kappa), kappa, side, j, mp=True)
    return _solve_layer(F, g1, float(kappa), kappa, side, j, mp=False)


def _solve_layer(F, g1, k, kappa_float, side, j, mp):
    if mp:
        p = [mpmath.mpf(v) for v in F.poly] if not F.is_zero else []
        zero = mpmath.mpf(0)
    else:
        p = [float(v) for v in F.poly] if not F.is_zero else []
        zero = 0.0
    d = len(p) - 1
    r = [zero] * (d + 4)
    for i in range(d, -1, -1):
        acc = ((i + 1) * (i + 2) * (i + 3) * r[i + 3]
               - 4 * k * (i + 1) * (i + 2) * r[i + 2]
               + 5 * k * k * (i + 1) * r[i + 1]
               - p[i])
        r[i] = acc / (2 * k**3)
    r = r[: d + 1]
    r0 = r[0] if r else zero
    q = [(r0 - g1) / k] + [r[i] / (i + 1) for i in range(len(r))]
    if mp:
        coeffs = np.array([mpmath.mpf(v) for v in q], dtype=object)
    else:
        coeffs = np.array(q, dtype=float)
    return LayerTerm(PolyExp(coeffs, kappa_float), side, j)


def eval_layer(t: LayerTerm | PolyExp, s, n: int = 0):
    """n-th derivative of the layer function in the stretched variable at ``s >= 0``."""
    return t(s, n)


def apply_operator(w: PolyExp) -> PolyExp:
    """``w'''' - kappa^2 w''`` as an exact PolyExp."""
    return w.deriv(4) - w.deriv(2) * (w.kappa**2)


def closed_form_first(U0_prime: float, alpha_end: float, side: str = "left") -> LayerTerm:
    """``U_1(s) = U_0'(0) / sqrt(alpha(0)) * exp(-sqrt(alpha(0)) s)`` for a given derivative datum."""
    k = math.sqrt(alpha_end)
    return LayerTerm(PolyExp(np.array([U0_prime / k]), k), side, 1)
