import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sp4bvp.analytic import AnalyticFunction1D
from sp4bvp.errors import DomainError, OrchestrationError, ResolutionError
from sp4bvp.outer import ChebSeries, endpoint_derivative, outer_term, residual, solve_second_order_bvp
from sp4bvp.problem import Problem

ONE = AnalyticFunction1D.constant(1.0)
ZERO = AnalyticFunction1D.constant(0.0)


def test_quadratic_solution():
    w = solve_second_order_bvp(ONE, ZERO, ONE, 0.0, 0.0)
    assert w(0.5) == pytest.approx(0.125, abs=1e-14)
    xs = np.linspace(0, 1, 11)
    np.testing.assert_allclose(w(xs), xs * (1 - xs) / 2, atol=1e-14)


def test_homogeneous_solution_is_zero():
    w = solve_second_order_bvp(ONE, ONE, ZERO, 0.0, 0.0)
    assert w.is_zero


def test_cosh_solution():
    w = solve_second_order_bvp(ONE, ONE, ONE, 0.0, 0.0)
    # 1 - cosh(x - 1/2) / cosh(1/2) at the midpoint: 0.1131811...
    assert w(0.5) == pytest.approx(1 - 1 / math.cosh(0.5), abs=1e-13)
    assert w(0.5) == pytest.approx(0.1131811160, abs=1e-10)


def test_fixed_degree_path():
    w = solve_second_order_bvp(ONE, ZERO, ONE, 0.0, 0.0, degree=8)
    assert w(0.25) == pytest.approx(0.25 * 0.75 / 2, abs=1e-14)
    with pytest.raises(ValueError):
        solve_second_order_bvp(ONE, ZERO, ONE, 0.0, 0.0, degree=3)


def test_unresolved_raises():
    f = AnalyticFunction1D("sin(400*x)")
    with pytest.raises(ResolutionError):
        solve_second_order_bvp(ONE, ZERO, f, 0.0, 0.0, max_degree=64)


def test_outer_terms_for_quadratic_data():
    p = Problem(1, 0, 1)
    U0 = outer_term(0, {}, 0.0, 0.0, p)
    assert endpoint_derivative(U0, 0) == pytest.approx(0.5, abs=1e-13)
    assert endpoint_derivative(U0, 1) == pytest.approx(-0.5, abs=1e-13)
    assert outer_term(1, {0: U0}, 0.0, 0.0, p).is_zero
    # fourth derivative of a quadratic vanishes: U_2 solves the homogeneous equation
    U2 = outer_term(2, {0: U0}, 0.3, -0.2, p)
    xs = np.linspace(0, 1, 5)
    np.testing.assert_allclose(U2(xs), 0.3 + (-0.2 - 0.3) * xs, atol=1e-13)


def test_outer_term_needs_predecessor():
    with pytest.raises(OrchestrationError):
        outer_term(3, {0: ChebSeries.zero()}, 0.0, 0.0, Problem(1, 1, 1))


def test_endpoint_derivative_of_zero():
    z = ChebSeries.zero()
    assert endpoint_derivative(z, 0) == 0.0 == endpoint_derivative(z, 1)
    with pytest.raises(ValueError):
        endpoint_derivative(z, 2)


def test_from_polynomial_and_derivative():
    c = ChebSeries.from_polynomial([1.0, 2.0, 3.0])  # 1 + 2x + 3x^2
    xs = np.linspace(0, 1, 9)
    np.testing.assert_allclose(c(xs), 1 + 2 * xs + 3 * xs**2, atol=1e-14)
    np.testing.assert_allclose(c.deriv(1)(xs), 2 + 6 * xs, atol=1e-13)
    assert c.deriv(3).is_zero


coef_fns = st.sampled_from(["2 + sin(x)", "1 + x^2", "exp(x)", "3 - cos(2*x)"])
react_fns = st.sampled_from(["0", "1", "exp(-x)", "x^2"])
rhs_fns = st.sampled_from(["1", "exp(x)", "sin(5*x)", "1/(1.5 - x)"])


@given(coef_fns, react_fns, rhs_fns, st.floats(-2, 2), st.floats(-2, 2))
def test_boundary_data_and_residual(a, b, g, gl, gr):
    alpha, beta, rhs = AnalyticFunction1D(a), AnalyticFunction1D(b), AnalyticFunction1D(g)
    w = solve_second_order_bvp(alpha, beta, rhs, gl, gr)
    assert abs(w(0.0) - gl) <= 1e-12
    assert abs(w(1.0) - gr) <= 1e-12
    xs = np.random.default_rng(0).uniform(0, 1, 200)
    res, scale = residual(w, alpha, beta, rhs, xs)
    assert np.max(np.abs(res)) <= 1e-8 * scale


@given(coef_fns, react_fns, rhs_fns)
def test_coefficients_decay_geometrically(a, b, g):
    w = solve_second_order_bvp(AnalyticFunction1D(a), AnalyticFunction1D(b), AnalyticFunction1D(g), 0.0, 0.0)
    c = np.abs(w.coeffs)
    k = np.arange(c.size)
    keep = c > 1e-15 * c.max()
    slope = np.polyfit(k[keep], np.log(c[keep]), 1)[0]
    assert math.exp(slope) < 1.0


# -- problem model -------------------------------------------------------------

def test_problem_rejects_nonpositive_alpha():
    with pytest.raises(DomainError):
        Problem("x - 0.5", 1, 1)


def test_problem_rejects_negative_beta():
    with pytest.raises(DomainError):
        Problem(1, "-x", 1)


def test_problem_describe_and_ends():
    p = Problem("4 + x", "0", "1")
    assert p.describe() == {"alpha": "4 + x", "beta": "0", "f": "1"}
    assert p.sqrt_alpha_ends == pytest.approx((2.0, math.sqrt(5.0)))
