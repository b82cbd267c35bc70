"""Green's-function solver for ``w'''' - lambda w'' = F`` on the half-line.

Used as an independent cross-check of the symbolic layer terms: it only
needs ``F`` as a black-box callable and evaluates the explicit integral
representation with adaptive Gauss-Legendre panels.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import AccuracyError, DomainError

Array = np.ndarray


@dataclass
class QuadConfig:
    tol: float = 1e-12
    panel_width: float = 1.0  # in units of the decay length 1/kappa
    low: int = 20
    high: int = 30
    max_depth: int = 30
    pad: float = 40.0


@dataclass
class HalfLineProblem:
    """``w'''' - lambda w'' = F``, ``w'(0) = g1``, ``w -> 0`` at infinity."""

    F: Callable[[Array], Array]
    g1: float
    kappa: float
    lam: float | None = None
    scale: float = field(init=False, default=1.0)

    def __post_init__(self):
        if self.kappa <= 0:
            raise DomainError("kappa must be positive")
        if self.lam is None:
            self.lam = self.kappa**2
        if abs(self.lam - self.kappa**2) > 4 * np.finfo(float).eps * self.kappa**2:
            raise DomainError("lambda must equal kappa squared")
        probe = np.linspace(0.0, 60.0 / self.kappa, 241)
        vals = np.abs(np.asarray(self.F(probe), dtype=float) * np.ones_like(probe))
        self.scale = float(np.max(vals)) if vals.size else 0.0
        if self.scale > 0.0 and vals[-1] > 1e-6 * self.scale:
            raise DomainError("forcing does not decay like exp(-kappa x)")


@lru_cache(maxsize=8)
def _gauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def _panel(fun, a, b, n):
    t, w = _gauss(n)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return half * np.dot(w, fun(mid + half * t))


def _integrate(fun, a: float, b: float, cfg: QuadConfig, tol: float) -> tuple[float, float]:
    """Adaptive panel quadrature of ``fun`` on [a, b]; returns (value, error estimate)."""
    if b <= a:
        return 0.0, 0.0
    edges = np.linspace(a, b, max(1, math.ceil((b - a) / cfg.panel_width)) + 1)
    stack = [(edges[i], edges[i + 1], 0) for i in range(edges.size - 1)]
    total = 0.0
    err = 0.0
    width = b - a
    while stack:
        lo, hi, depth = stack.pop()
        coarse = _panel(fun, lo, hi, cfg.low)
        fine = _panel(fun, lo, hi, cfg.high)
        diff = abs(fine - coarse)
        if diff <= tol * (hi - lo) / width or diff == 0.0:
            total += fine
            err += diff
        elif depth >= cfg.max_depth:
            raise AccuracyError(f"quadrature did not converge on [{lo}, {hi}]", achieved=diff)
        else:
            m = 0.5 * (lo + hi)
            stack.append((lo, m, depth + 1))
            stack.append((m, hi, depth + 1))
    return total, err


def kernel_branch(x: float, xi: float, kappa: float, branch: str) -> float:
    """One closed-form branch of the kernel (``"inner"`` for x < xi, ``"outer"`` for x > xi).

    Either branch may be evaluated on the whole half-line, which is what the
    continuity and jump checks need.
    """
    lam = kappa * kappa
    d = 2.0 * kappa * lam
    try:
        if branch == "inner":
            return ((x - xi) / lam - math.exp(kappa * (x - xi)) / d
                    + (2.0 - math.exp(-kappa * xi)) * math.exp(-kappa * x) / d)
        if branch == "outer":
            # e^{kappa xi} e^{-kappa x} folded into one exponent
            return (2.0 * math.exp(-kappa * x) - math.exp(kappa * (xi - x))
                    - math.exp(-kappa * (xi + x))) / d
    except OverflowError as exc:
        raise OverflowError(f"Green's kernel overflow at x={x}, xi={xi}") from exc
    raise ValueError(f"unknown branch {branch!r}")


def greens_kernel(x: float, xi: float, kappa: float) -> float:
    """Green's function of ``d^4 - kappa^2 d^2`` on (0, inf) with ``G_x(0, xi) = 0``, decaying in x."""
    if x < 0 or xi < 0:
        raise DomainError("x and xi must be non-negative")
    if kappa <= 0:
        raise DomainError("kappa must be positive")
    return kernel_branch(x, xi, kappa, "inner" if x < xi else "outer")


def _truncation(p: HalfLineProblem, y0: float, cfg: QuadConfig) -> float:
    """Upper limit in ``y = kappa x`` beyond which the forcing is negligible."""
    T = max(cfg.pad, y0 + cfg.pad)
    if p.scale == 0.0:
        return T
    while True:
        tail = abs(float(p.F(np.array([T / p.kappa]))[0])) * (1.0 + T) ** 2
        if tail <= cfg.tol * p.scale * 1e-3 or T > 1e4:
            return T
        T += 20.0


def solve_halfline(p: HalfLineProblem, x: float, quad: QuadConfig | None = None) -> float:
    """Evaluate ``w(x)`` from the explicit integral representation.

    In ``y = kappa xi`` the solution reads

        w = e^{-kz}/lam^2 Int_0^inf F - e^{-kz}/(2 lam^2) Int_0^inf e^{-y} F
            - 1/(2 lam^2) Int_0^{kz} e^{y-kz} F - 1/lam^2 Int_{kz}^inf y F
            + z/(k lam) Int_{kz}^inf F - 1/(2 lam^2) Int_{kz}^inf e^{kz-y} F
            - (g1/k) e^{-kz}

    with ``F = F(y/k)``.  Exponentials are folded into the integrands, and the
    fourth and fifth integrals share one integrand ``(kz - y) F`` to avoid
    cancellation for large ``z``.

    Raises:
        AccuracyError: a quadrature panel failed to converge.
    """
    if x < 0:
        raise DomainError("x must be non-negative")
    cfg = quad or QuadConfig()
    k, lam = p.kappa, p.lam
    kz = k * x
    T = _truncation(p, kz, cfg)
    tol = cfg.tol * max(p.scale, 1e-300)

    def Fy(y):
        return np.asarray(p.F(y / k), dtype=float) * np.ones_like(y)

    ekz = math.exp(-kz)
    I_all, e1 = _integrate(lambda y: Fy(y) * (1.0 - 0.5 * np.exp(-y)), 0.0, T, cfg, tol)
    I_in, e2 = _integrate(lambda y: np.exp(y - kz) * Fy(y), 0.0, kz, cfg, tol)
    I_lin, e3 = _integrate(lambda y: (kz - y) * Fy(y), kz, T, cfg, tol)
    I_out, e4 = _integrate(lambda y: np.exp(kz - y) * Fy(y), kz, T, cfg, tol)
    lam2 = lam * lam
    w = (ekz * I_all / lam2 - 0.5 * I_in / lam2 + I_lin / lam2 - 0.5 * I_out / lam2
         - (p.g1 / k) * ekz)
    return float(w)


def solve_halfline_many(p: HalfLineProblem, xs, quad: QuadConfig | None = None) -> np.ndarray:
    return np.array([solve_halfline(p, float(x), quad) for x in np.atleast_1d(xs)])
