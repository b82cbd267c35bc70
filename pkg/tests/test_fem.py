import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.polynomial import polynomial as P

from sp4bvp import fem
from sp4bvp.analytic import AnalyticFunction1D
from sp4bvp.closed_form import ConstantCoefficientSolution
from sp4bvp.errors import AssemblyError, DomainError
from sp4bvp.problem import Problem


def _unchecked_problem(alpha, beta, f):
    """A Problem that skips the sign checks, to reach the assembly guards."""
    p = object.__new__(Problem)
    for name, v in (("alpha", alpha), ("beta", beta), ("f", f)):
        object.__setattr__(p, name, AnalyticFunction1D(v))
    return p


def _poly_text(c):
    return " + ".join(f"({float(v)!r})*x^{k}" for k, v in enumerate(c))


# -- mesh ------------------------------------------------------------------

def test_mesh_transition_width():
    m = fem.build_layer_mesh(1e-4, 5, 3.0)
    assert m.transition[0] == pytest.approx(0.0015, rel=1e-12)
    np.testing.assert_allclose(m.nodes, [0, 0.0015, 0.9985, 1], rtol=1e-12)


def test_mesh_cap_is_uniform():
    m = fem.build_layer_mesh(0.5, 10, 3.0)
    assert m.transition == (0.25, 0.25)
    np.testing.assert_allclose(m.nodes, np.linspace(0, 1, 5))


def test_mesh_asymmetric_rates():
    m = fem.build_layer_mesh(1e-3, 4, 1.0, lambda0_right=2.0)
    np.testing.assert_allclose(m.nodes, [0, 0.004, 0.992, 1])


@given(st.floats(1e-8, 1.0), st.floats(1e-8, 1.0), st.integers(3, 20))
def test_mesh_width_monotone_in_eps(e1, e2, p):
    lo, hi = sorted((e1, e2))
    assert fem.build_layer_mesh(lo, p, 1.0).transition[0] <= fem.build_layer_mesh(hi, p, 1.0).transition[0]


def test_mesh_errors():
    with pytest.raises(ValueError):
        fem.build_layer_mesh(0.1, 2)
    with pytest.raises(ValueError):
        fem.build_layer_mesh(-0.1, 4)
    with pytest.raises(DomainError):
        fem.LayerMesh(np.array([0.0, 0.5, 1.0]), (0.5, 0.5))


def test_default_lambda0():
    assert fem.default_lambda0(Problem("4 + 5*x", 0, 1)) == pytest.approx(0.5)


# -- solve -------------------------------------------------------------------

def test_zero_load_gives_zero():
    p = Problem("2 + sin(x)", "exp(x)", 0)
    sol = fem.solve(p, 0.05, fem.build_layer_mesh(0.05, 6, 1.0), 6)
    assert np.all(sol.dofs == 0.0)


def test_constant_data_matches_closed_form():
    eps = 0.1
    p = Problem(1, 1, 1)
    sol = fem.solve(p, eps, fem.build_layer_mesh(eps, 10, fem.default_lambda0(p)), 10)
    xs = np.linspace(0, 1, 101)
    assert np.max(np.abs(sol(xs) - ConstantCoefficientSolution(1, 1, 1, eps)(xs))) <= 1e-8
    assert sol.error_estimate <= 1e-8


@pytest.mark.parametrize("p", [4, 6, 9])
def test_manufactured_solution_is_reproduced(p):
    eps = 0.1
    u = np.array([0, 0, 1.0, -2.0, 1.0])  # (x(1-x))^2
    alpha = np.array([1.0, 1.0])  # 1 + x
    beta = np.array([2.0, 0.0, 1.0])  # 2 + x^2
    f = P.polyadd(P.polyadd(eps**2 * P.polyder(u, 4), -P.polyder(P.polymul(alpha, P.polyder(u)))),
                  P.polymul(beta, u))
    prob = Problem(_poly_text(alpha), _poly_text(beta), _poly_text(f))
    sol = fem.solve(prob, eps, fem.build_layer_mesh(eps, p, 1.0), p)
    xs = np.linspace(0, 1, 57)
    for n in range(3):
        assert np.max(np.abs(sol(xs, n) - P.polyval(xs, P.polyder(u, n)))) <= 1e-10


def test_galerkin_orthogonality_and_clamping():
    eps = 0.02
    prob = Problem("2 + sin(x)", "exp(-x)", "cos(3*x)")
    sol = fem.solve(prob, eps, fem.build_layer_mesh(eps, 8, fem.default_lambda0(prob)), 8)
    assert sol.orthogonality_residual <= 1e-10
    assert fem.weak_residual(sol) <= 1e-10
    np.testing.assert_allclose(sol([0.0, 1.0]), 0.0, atol=1e-15)
    np.testing.assert_allclose(sol([0.0, 1.0], 1), 0.0, atol=1e-13)


def test_indefinite_problem_is_rejected():
    p = _unchecked_problem("-1", "0", "1")
    with pytest.raises(AssemblyError):
        fem.solve(p, 0.1, fem.build_layer_mesh(0.1, 4, 1.0), 4, estimate=False)


def test_samples_columns():
    p = Problem(1, 1, 1)
    sol = fem.solve(p, 0.1, fem.build_layer_mesh(0.1, 6, 1.0), 6, estimate=False)
    tab = sol.samples([0.0, 0.5, 1.0])
    assert tab.shape == (3, 4)
    np.testing.assert_array_equal(tab[:, 0], [0.0, 0.5, 1.0])


def test_solve_to_accuracy_meets_target():
    p = Problem(1, 1, 1)
    sol = fem.solve_to_accuracy(p, 0.01, 1e-9, p0=8, p_max=24)
    assert sol.error_estimate <= 1e-9


# -- energy error ------------------------------------------------------------

def test_energy_error_of_itself_is_zero():
    p = Problem("1 + x", 1, "exp(x)")
    sol = fem.solve(p, 0.05, fem.build_layer_mesh(0.05, 6, 1.0), 6, estimate=False)
    assert fem.energy_error(sol, sol, lambda x: sol(x, 1), lambda x: sol(x, 2)) == 0.0


def test_energy_error_of_zero_problem():
    p = Problem(1, 1, 0)
    sol = fem.solve(p, 0.05, fem.build_layer_mesh(0.05, 6, 1.0), 6, estimate=False)
    z = np.zeros_like
    assert fem.energy_error(sol, z, z, z) == 0.0


def test_energy_and_max_errors_are_consistent():
    eps = 0.05
    exact = ConstantCoefficientSolution(1, 1, 1, eps)
    p = Problem(1, 1, 1)
    sol = fem.solve(p, eps, fem.build_layer_mesh(eps, 5, 1.0), 5, estimate=False)
    xs = np.linspace(0, 1, 2001)
    emax = np.max(np.abs(sol(xs) - exact(xs)))
    een = fem.energy_error(sol, exact, lambda x: exact(x, 1), lambda x: exact(x, 2))
    assert emax > 0 and een > 0
    assert 1 / 100 <= een / emax <= 100


@settings(max_examples=10)
@given(st.sampled_from([0.1, 0.03, 0.01]), st.integers(4, 9))
def test_assembled_matrix_is_symmetric_positive_definite(eps, p):
    prob = Problem("2 + sin(x)", "x^2", "1")
    K, _, num = fem._assemble(prob, eps, fem.build_layer_mesh(eps, p, 1.0), p, p + 4)
    A = K[np.ix_(num.free(), num.free())]
    np.testing.assert_allclose(A, A.T, rtol=0, atol=1e-13 * np.max(np.abs(A)))
    d = np.sqrt(np.diag(A))
    assert np.min(np.linalg.eigvalsh(A / d[:, None] / d[None, :])) > 0
