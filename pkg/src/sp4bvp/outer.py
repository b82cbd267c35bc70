"""Outer (smooth) expansion terms via Chebyshev collocation on [0, 1].

Each outer term solves ``-(alpha w')' + beta w = g`` with Dirichlet data.  The
solution is returned as a chopped Chebyshev series so that the fourth
derivatives feeding the next right-hand side are exact coefficient-space
operations on a clean polynomial.
"""

from __future__ import annotations

from collections.abc import Callable, Mapping
from functools import lru_cache

import numpy as np
from numpy.polynomial import chebyshev as C

from .analytic import AnalyticFunction1D
from .errors import OrchestrationError, ResolutionError, SolverError
from .problem import Problem

TRUNCATION_TOL = 1e-14
MIN_DEGREE = 16
MAX_DEGREE = 512


class ChebSeries:
    """Chebyshev series on [0, 1] (coefficients in the variable ``t = 2x - 1``)."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        c = np.atleast_1d(np.asarray(coeffs, dtype=float)).copy()
        if c.size == 0:
            c = np.zeros(1)
        c.setflags(write=False)
        self.coeffs = c

    @classmethod
    def zero(cls) -> ChebSeries:
        return cls([0.0])

    @classmethod
    def from_polynomial(cls, power_coeffs) -> ChebSeries:
        """Build from monomial coefficients in ``x`` (lowest order first)."""
        p = np.polynomial.Polynomial(power_coeffs)
        return cls(p.convert(kind=np.polynomial.Chebyshev, domain=[0, 1]).coef)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    @property
    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    def __call__(self, xs):
        return C.chebval(2.0 * np.asarray(xs, dtype=float) - 1.0, self.coeffs)

    def deriv(self, m: int = 1) -> ChebSeries:
        if m == 0 or self.degree < m:
            return self if m == 0 else ChebSeries.zero()
        return ChebSeries(C.chebder(self.coeffs, m, scl=2.0))

    def __add__(self, other: ChebSeries) -> ChebSeries:
        return ChebSeries(C.chebadd(self.coeffs, other.coeffs))

    def __mul__(self, s: float) -> ChebSeries:
        return ChebSeries(self.coeffs * float(s))

    __rmul__ = __mul__

    def __neg__(self) -> ChebSeries:
        return ChebSeries(-self.coeffs)

    def trailing_ratio(self, count: int = 4) -> float:
        """Largest of the last ``count`` coefficients relative to the largest overall."""
        scale = np.max(np.abs(self.coeffs))
        if scale == 0.0:
            return 0.0
        return float(np.max(np.abs(self.coeffs[-count:])) / scale)

    def chop(self, tol: float = TRUNCATION_TOL) -> ChebSeries:
        scale = np.max(np.abs(self.coeffs))
        if scale == 0.0:
            return ChebSeries.zero()
        keep = np.nonzero(np.abs(self.coeffs) > tol * scale)[0]
        return ChebSeries(self.coeffs[: keep[-1] + 1])

    def __repr__(self):
        return f"ChebSeries(degree={self.degree})"


@lru_cache(maxsize=32)
def _collocation_basis(n: int):
    """Values and x-derivatives of T_0..T_n at the n + 1 Chebyshev-Lobatto points."""
    t = -np.cos(np.pi * np.arange(n + 1) / n)
    x = (t + 1.0) / 2.0
    V0 = C.chebvander(t, n)
    eye = np.eye(n + 1)
    D = np.zeros((n + 1, n + 1))
    for k in range(1, n + 1):
        D[:k, k] = C.chebder(eye[k][: k + 1], scl=2.0)
    V1 = V0 @ D
    V2 = V1 @ D
    for arr in (x, V0, V1, V2):
        arr.setflags(write=False)
    return x, V0, V1, V2


RhsLike = "AnalyticFunction1D | ChebSeries | Callable | float"


def _rhs_values(g, xs: np.ndarray) -> np.ndarray:
    if g is None:
        return np.zeros_like(xs)
    if isinstance(g, (int, float)):
        return np.full_like(xs, float(g))
    return np.asarray(g(xs), dtype=float) * np.ones_like(xs)


def _collocate(alpha, beta, g, g_left, g_right, n):
    x, V0, V1, V2 = _collocation_basis(n)
    a = alpha(x)
    da = alpha.derivative(x, 1)
    b = beta(x)
    A = -a[:, None] * V2 - da[:, None] * V1 + b[:, None] * V0
    rhs = _rhs_values(g, x)
    A[0] = V0[0]
    A[-1] = V0[-1]
    rhs[0] = g_left
    rhs[-1] = g_right
    try:
        coeffs = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"singular collocation matrix at degree {n}") from exc
    if not np.all(np.isfinite(coeffs)):
        raise SolverError(f"non-finite collocation solution at degree {n}")
    return ChebSeries(coeffs)


def solve_second_order_bvp(
    alpha: AnalyticFunction1D,
    beta: AnalyticFunction1D,
    g,
    g_left: float,
    g_right: float,
    degree: int | None = None,
    tol: float = TRUNCATION_TOL,
    max_degree: int = MAX_DEGREE,
) -> ChebSeries:
    """Solve ``-(alpha w')' + beta w = g`` on (0, 1) with ``w(0) = g_left``, ``w(1) = g_right``.

    With ``degree`` given a single collocation solve at that degree is done.
    Otherwise the degree doubles from 16 until the trailing coefficients fall
    below ``tol`` relative to the largest one, and the result is chopped.

    Raises:
        SolverError: singular collocation system.
        ResolutionError: still unresolved at ``max_degree``.
    """
    if degree is not None:
        if degree < 4:
            raise ValueError("degree must be at least 4")
        return _collocate(alpha, beta, g, g_left, g_right, degree)
    if g is None or (isinstance(g, ChebSeries) and g.is_zero) or (
        isinstance(g, AnalyticFunction1D) and g.is_zero
    ):
        if g_left == 0.0 and g_right == 0.0:
            return ChebSeries.zero()
    n = MIN_DEGREE
    if isinstance(g, ChebSeries):
        while n < g.degree + 8 and n < max_degree:
            n *= 2
    prev = None
    while n <= max_degree:
        w = _collocate(alpha, beta, g, g_left, g_right, n)
        if w.trailing_ratio() <= tol:
            return w.chop(tol)
        # rounding plateau: the solution stopped changing between degrees
        if prev is not None:
            diff = C.chebsub(w.coeffs, prev.coeffs)
            scale = np.max(np.abs(w.coeffs))
            if np.max(np.abs(diff)) <= 100 * n * np.finfo(float).eps * scale:
                return prev.chop(max(tol, 10 * n * np.finfo(float).eps))
        prev = w
        n *= 2
    raise ResolutionError(
        f"outer solution unresolved at degree {max_degree} (trailing ratio {w.trailing_ratio():.2e})"
    )


def outer_term(
    j: int,
    U_prev: Mapping[int, ChebSeries],
    bc_left: float,
    bc_right: float,
    problem: Problem,
    tol: float = TRUNCATION_TOL,
) -> ChebSeries:
    """Outer term ``U_j``: right-hand side ``f`` (j = 0), 0 (j = 1), ``-U_{j-2}''''`` (j >= 2)."""
    if j == 0:
        g = problem.f
    elif j == 1:
        g = None
    else:
        if j - 2 not in U_prev:
            raise OrchestrationError(f"U_{j - 2} is required to build U_{j}")
        g = -U_prev[j - 2].deriv(4)
    return solve_second_order_bvp(problem.alpha, problem.beta, g, bc_left, bc_right, tol=tol)


def endpoint_derivative(U: ChebSeries, endpoint: int) -> float:
    if endpoint not in (0, 1):
        raise ValueError("endpoint must be 0 or 1")
    return float(U.deriv(1)(float(endpoint)))


def residual(U: ChebSeries, alpha: AnalyticFunction1D, beta: AnalyticFunction1D, g, xs) -> tuple[np.ndarray, float]:
    """Pointwise residual of ``-(alpha U')' + beta U - g`` and the scale it should be judged against."""
    xs = np.asarray(xs, dtype=float)
    a, da, b = alpha(xs), alpha.derivative(xs, 1), beta(xs)
    d1, d2 = U.deriv(1)(xs), U.deriv(2)(xs)
    u = U(xs)
    gv = _rhs_values(g, xs)
    terms = np.abs(np.vstack([a * d2, da * d1, b * u, gv]))
    res = -a * d2 - da * d1 + b * u - gv
    return res, float(np.max(terms)) if terms.size else 0.0
