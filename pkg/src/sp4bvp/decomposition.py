"""Smooth part, two boundary layers and remainder of the solution.

The recursion is run in the order

    U_0 -> (left_1, right_1) -> U_1 -> (left_2, right_2) -> ... -> U_M -> (left_{M+1}, right_{M+1})

since layer term ``j + 1`` needs only ``U_j'`` at the endpoints while
``U_j`` takes its Dirichlet data from layer term ``j``.  Layer sums run
through ``M + 1`` so that the derivative conditions at both ends cancel
through order ``eps^M``.

Right-layer conventions: with ``s = (1 - x) / eps`` the layer equations use
the Taylor data of ``alpha(1 - t)`` and ``beta(1 - t)`` (odd coefficients
change sign), and the slope condition reads ``right_{j+1}'(0) = +U_j'(1)``
because ``d/dx = -(1/eps) d/ds``.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .analytic import AnalyticFunction1D, AnalyticityReport, validate_analyticity
from .errors import PrecisionError
from .fem import DiscreteSolution
from .layer import LayerTerm, PolyExp, assemble_F, solve_layer_ode
from .outer import ChebSeries, endpoint_derivative, outer_term
from .problem import Problem

log = logging.getLogger(__name__)

FLOOR_TOL = 1e-12
MP_THRESHOLD = 12  # layer terms beyond this index use extended precision
MP_DIGITS = 40


@dataclass(frozen=True)
class BoundConstants:
    """Concrete constants behind the choice of ``M``.

    ``a`` and ``gamma_star`` satisfy the two adopted lower bounds
    ``a >= 3 / min sqrt(alpha(ends))`` and
    ``gamma_star >= max(gamma_alpha, gamma_alpha', gamma_beta)``, both also
    kept at or above ``floor``.  ``q = 1 / (gamma_star a^2 e^2)``.
    """

    a: float
    gamma_star: float
    K: float
    q: float
    C: float
    reports: dict[str, AnalyticityReport] = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def from_values(cls, a: float, gamma_star: float, K: float = 1.0, C: float = 1.0) -> BoundConstants:
        if a <= 0 or gamma_star <= 0:
            raise ValueError("a and gamma_star must be positive")
        return cls(a, gamma_star, K, 1.0 / (gamma_star * a * a * math.e**2), C)

    @classmethod
    def from_problem(cls, problem: Problem, N: int = 10, floor: float = 1.0,
                     a: float | None = None, gamma_star: float | None = None) -> BoundConstants:
        reports = {
            "alpha": validate_analyticity(problem.alpha, N),
            "alpha'": validate_analyticity(problem.alpha, N, derivative=1),
            "beta": validate_analyticity(problem.beta, N),
            "f": validate_analyticity(problem.f, N),
        }
        a_min = max(3.0 / min(problem.sqrt_alpha_ends), floor)
        g_min = max(reports["alpha"].gamma_fit, reports["alpha'"].gamma_fit, reports["beta"].gamma_fit, floor)
        a = a_min if a is None else a
        gamma_star = g_min if gamma_star is None else gamma_star
        if a < a_min * (1 - 1e-12) or gamma_star < g_min * (1 - 1e-12):
            raise ValueError(f"constants below admissible minimum (a >= {a_min:.6g}, gamma_star >= {g_min:.6g})")
        gamma_f = max(reports["f"].gamma_fit, gamma_star)
        K = max(1.0, math.e * gamma_f)
        C = max(r.C_fit for r in reports.values())
        return cls(a, gamma_star, K, 1.0 / (gamma_star * a * a * math.e**2), C, reports)

    def admissibility(self, eps: float, M: int) -> float:
        """``a^2 eps e gamma_star (M + 1)``; the expansion needs this below 1."""
        return self.a**2 * eps * math.e * self.gamma_star * (M + 1)


@dataclass(frozen=True)
class MChoice:
    M: int
    degenerate: bool

    def __int__(self):
        return self.M


def choose_M(eps: float, c: BoundConstants) -> MChoice:
    """``M = floor(q / eps) - 1``; degenerate (``M = 0`` flagged) when ``q / eps < 1``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    m1 = math.floor(c.q / eps + FLOOR_TOL)
    if m1 < 1:
        return MChoice(0, True)
    return MChoice(m1 - 1, False)


def reflected_taylor(g: AnalyticFunction1D, n: int) -> np.ndarray:
    """Taylor coefficients of ``t -> g(1 - t)`` at ``t = 0``."""
    c = g.taylor_coeffs(1.0, n)
    return c * (-1.0) ** np.arange(n + 1)


@dataclass
class Decomposition:
    problem: Problem
    eps: float
    M: int
    outer: list[ChebSeries]
    left: list[LayerTerm]
    right: list[LayerTerm]
    constants: BoundConstants | None = None
    right_slope_sign: float = 1.0

    @property
    def kappa(self) -> tuple[float, float]:
        return self.left[0].kappa, self.right[0].kappa

    def bc_residuals(self) -> dict[str, float]:
        """Largest violation of each family of termwise boundary identities."""
        out = {"left_value": 0.0, "right_value": 0.0, "left_slope": 0.0, "right_slope": 0.0}
        for j in range(1, self.M + 1):
            out["left_value"] = max(out["left_value"], abs(float(self.left[j](0.0)) + float(self.outer[j](0.0))))
            out["right_value"] = max(out["right_value"], abs(float(self.right[j](0.0)) + float(self.outer[j](1.0))))
        for j in range(0, self.M + 1):
            d0 = endpoint_derivative(self.outer[j], 0)
            d1 = endpoint_derivative(self.outer[j], 1)
            out["left_slope"] = max(out["left_slope"], abs(float(self.left[j + 1](0.0, 1)) + d0))
            out["right_slope"] = max(out["right_slope"],
                                     abs(float(self.right[j + 1](0.0, 1)) - self.right_slope_sign * d1))
        return out

    def to_csv(self) -> str:
        """One row per term: ``kind, j, kappa, c0, c1, ...``.

        Outer rows carry Chebyshev coefficients on [0, 1] (variable ``2x - 1``)
        and an empty kappa; layer rows carry monomial coefficients of the
        polynomial factor in the stretched variable.
        """
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "j", "kappa", "coefficients..."])
        for j, U in enumerate(self.outer):
            w.writerow(["outer", j, ""] + [repr(float(c)) for c in U.coeffs])
        for side, terms in (("left", self.left), ("right", self.right)):
            for t in terms:
                w.writerow([side] + [t.j, repr(float(t.kappa))] + [repr(float(c)) for c in t.poly])
        return buf.getvalue()


def build(problem: Problem, eps: float, M: int, constants: BoundConstants | None = None,
          sums: str = "full", right_slope_sign: float = 1.0, dps: int | None = None,
          mp_threshold: int = MP_THRESHOLD) -> Decomposition:
    """Run the interleaved recursion up to outer order ``M`` and layer order ``M + 1``.

    Args:
        right_slope_sign: sign in ``right_{j+1}'(0) = sign * U_j'(1)``.  The
            default ``+1`` follows from the chain rule; ``-1`` is kept for
            the boundary-value check that rejects it.
        dps: decimal digits for layer coefficient arithmetic.  ``None`` uses
            doubles up to ``mp_threshold`` and 40 digits beyond.
    """
    if M < 0:
        raise ValueError("M must be non-negative")
    if eps <= 0:
        raise ValueError("eps must be positive")
    kl, kr = problem.sqrt_alpha_ends
    n_tay = M + 3
    aL, bL = problem.alpha.taylor_coeffs(0.0, n_tay), problem.beta.taylor_coeffs(0.0, n_tay)
    aR, bR = reflected_taylor(problem.alpha, n_tay), reflected_taylor(problem.beta, n_tay)
    use_mp = dps is not None or M + 1 > mp_threshold
    digits = dps or MP_DIGITS

    left = {0: LayerTerm(PolyExp.zero(kl), "left", 0)}
    right = {0: LayerTerm(PolyExp.zero(kr), "right", 0)}
    outer = {0: outer_term(0, {}, 0.0, 0.0, problem)}
    for j in range(0, M + 1):
        d0 = endpoint_derivative(outer[j], 0)
        d1 = endpoint_derivative(outer[j], 1)
        lo_dps = digits if use_mp else None
        FL = assemble_F(j + 1, left, aL, bL, kl, sums)
        FR = assemble_F(j + 1, right, aR, bR, kr, sums)
        left[j + 1] = solve_layer_ode(FL, -d0, kl, "left", j + 1, lo_dps)
        right[j + 1] = solve_layer_ode(FR, right_slope_sign * d1, kr, "right", j + 1, lo_dps)
        if j + 1 <= M:
            outer[j + 1] = outer_term(j + 1, outer, -float(left[j + 1](0.0)), -float(right[j + 1](0.0)), problem)
    return Decomposition(
        problem, eps, M,
        [outer[j] for j in range(M + 1)],
        [left[j] for j in range(M + 2)],
        [right[j] for j in range(M + 2)],
        constants, right_slope_sign,
    )


def layer_forcing(d: Decomposition, side: str, j: int, sums: str = "full") -> tuple[PolyExp, float]:
    """Forcing ``F_j`` and slope datum ``g_j`` of layer term ``j`` as used by :func:`build`.

    Lets an independent solver reproduce term ``j`` from the same inputs.
    """
    if not 1 <= j <= d.M + 1:
        raise ValueError(f"layer term {j} not built (M = {d.M})")
    n_tay = d.M + 3
    if side == "left":
        a, b, terms = d.problem.alpha.taylor_coeffs(0.0, n_tay), d.problem.beta.taylor_coeffs(0.0, n_tay), d.left
        g1 = -endpoint_derivative(d.outer[j - 1], 0)
    elif side == "right":
        a, b, terms = reflected_taylor(d.problem.alpha, n_tay), reflected_taylor(d.problem.beta, n_tay), d.right
        g1 = d.right_slope_sign * endpoint_derivative(d.outer[j - 1], 1)
    else:
        raise ValueError(f"unknown side {side!r}")
    prior = {t.j: t for t in terms[:j]}
    return assemble_F(j, prior, a, b, terms[0].kappa, sums), float(g1)


def _layer_sum(terms: list[LayerTerm], eps: float, s: np.ndarray, n: int) -> np.ndarray:
    total = np.zeros_like(s)
    for t in terms:
        if t.is_zero:
            continue
        total += eps ** (t.j - n) * t(s, n)
    return total


def eval_expansion(d: Decomposition, x, n: int = 0) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """n-th x-derivative of the smooth, left-layer and right-layer sums at ``x``."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs < 0) or np.any(xs > 1):
        raise ValueError("x must lie in [0, 1]")
    eps = d.eps
    smooth = np.zeros_like(xs)
    for j, U in enumerate(d.outer):
        if not U.is_zero:
            smooth += eps**j * U.deriv(n)(xs)
    left = _layer_sum(d.left, eps, xs / eps, n)
    right = (-1.0) ** n * _layer_sum(d.right, eps, (1.0 - xs) / eps, n)
    return smooth, left, right


def eval_total(d: Decomposition, x, n: int = 0) -> np.ndarray:
    s, l, r = eval_expansion(d, x, n)
    return s + l + r


@dataclass
class Remainder:
    x: np.ndarray
    values: np.ndarray
    max_norm: float
    l2_norm: float
    slope_l2_norm: float
    boundary_value: float
    boundary_slope: float
    reference_error: float


def _l2_nodes(mesh_nodes: np.ndarray, eps: float, per_cell: int = 24):
    """Gauss nodes/weights on a grid graded towards both ends at scale eps."""
    layer = np.concatenate([[0.0], eps * np.geomspace(1e-3, 40.0, 25)])
    layer = layer[layer < 0.5]
    pts = np.unique(np.concatenate([layer, 1.0 - layer, np.linspace(0, 1, 33), mesh_nodes]))
    t, w = np.polynomial.legendre.leggauss(per_cell)
    a, b = pts[:-1], pts[1:]
    xq = (0.5 * (a + b))[:, None] + (0.5 * (b - a))[:, None] * t[None, :]
    wq = (0.5 * (b - a))[:, None] * w[None, :]
    return xq.ravel(), wq.ravel()


def remainder(d: Decomposition, ref: DiscreteSolution, grid=None, resolution: float | None = None) -> Remainder:
    """Pointwise ``r_M = u - (smooth + left + right)`` and its norms.

    Boundary values come from the expansion alone because the exact
    solution and its slope vanish at both ends.

    Raises:
        PrecisionError: the reference error estimate exceeds ``resolution``.
    """
    if resolution is not None and not ref.error_estimate <= resolution:
        raise PrecisionError(
            f"reference error estimate {ref.error_estimate:.2e} exceeds requested resolution {resolution:.2e}"
        )
    xs = np.linspace(0.0, 1.0, 1001) if grid is None else np.asarray(grid, dtype=float)
    r = ref(xs, 0) - eval_total(d, xs, 0)
    xq, wq = _l2_nodes(ref.mesh.nodes, d.eps)
    r0 = ref(xq, 0) - eval_total(d, xq, 0)
    r1 = ref(xq, 1) - eval_total(d, xq, 1)
    ends = np.array([0.0, 1.0])
    bv = float(np.max(np.abs(eval_total(d, ends, 0))))
    bs = float(np.max(np.abs(eval_total(d, ends, 1))))
    return Remainder(
        x=xs, values=r,
        max_norm=float(np.max(np.abs(r))),
        l2_norm=float(np.sqrt(np.dot(wq, r0**2))),
        slope_l2_norm=float(np.sqrt(np.dot(wq, r1**2))),
        boundary_value=bv, boundary_slope=bs,
        reference_error=float(ref.error_estimate),
    )


def measured_total(rem: Remainder, eps: float) -> float:
    """Max norm plus the four quantities bounded by the exponential remainder estimate."""
    return rem.max_norm + rem.boundary_value + rem.boundary_slope + rem.l2_norm + eps * rem.slope_l2_norm


def defect(d: Decomposition, xs) -> tuple[np.ndarray, np.ndarray, float]:
    """``L(smooth sum) - f``, its predicted value and the scale of the cancelling terms.

    The prediction is ``eps^(M+1) U_{M-1}'''' + eps^(M+2) U_M''''``: every
    other fourth-derivative term is absorbed by the next outer equation.
    """
    xs = np.asarray(xs, dtype=float)
    p, eps = d.problem, d.eps
    a, da, b, f = p.alpha(xs), p.alpha.derivative(xs, 1), p.beta(xs), p.f(xs)
    total = -f
    mags = [np.abs(f)]
    for j, U in enumerate(d.outer):
        if U.is_zero:
            continue
        parts = [eps ** (j + 2) * U.deriv(4)(xs), -eps**j * a * U.deriv(2)(xs),
                 -eps**j * da * U.deriv(1)(xs), eps**j * b * U(xs)]
        for q in parts:
            total = total + q
            mags.append(np.abs(q))
    M = d.M
    pred = np.zeros_like(xs)
    if M >= 1:
        pred += eps ** (M + 1) * d.outer[M - 1].deriv(4)(xs)
    pred += eps ** (M + 2) * d.outer[M].deriv(4)(xs)
    scale = float(max(np.max(m) for m in mags))
    return total, pred, scale
