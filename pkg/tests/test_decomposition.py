import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sp4bvp import corpus, fem
from sp4bvp.decomposition import (
    BoundConstants,
    build,
    choose_M,
    eval_expansion,
    eval_total,
    layer_forcing,
    measured_total,
    reflected_taylor,
    remainder,
)
from sp4bvp.analytic import AnalyticFunction1D
from sp4bvp.errors import PrecisionError
from sp4bvp.outer import endpoint_derivative
from sp4bvp.problem import Problem


def _with_q(q):
    return dataclasses.replace(BoundConstants.from_values(1.0, 1.0), q=q)


# -- choice of M -------------------------------------------------------------

@pytest.mark.parametrize("q, eps, M", [(0.79, 0.1, 6), (0.1, 0.1, 0), (0.01, 1e-3, 9)])
def test_choose_M_examples(q, eps, M):
    mc = choose_M(eps, _with_q(q))
    assert mc.M == M and not mc.degenerate


def test_choose_M_degenerate():
    mc = choose_M(0.2, _with_q(0.1))
    assert mc.degenerate and int(mc) == 0
    with pytest.raises(ValueError):
        choose_M(0.0, _with_q(0.1))


def test_admissibility_at_constructed_M():
    c = BoundConstants.from_values(1.0, 1.0 / (0.01 * math.e**2))
    assert c.q == pytest.approx(0.01)
    M = choose_M(1e-3, c).M
    assert M == 9
    assert c.admissibility(1e-3, M) <= math.exp(-1) * (1 + 1e-12)


@given(st.floats(0.1, 10), st.floats(1.0, 20), st.floats(1e-5, 1e-1))
def test_admissibility_holds_by_construction(a, g, eps):
    c = BoundConstants.from_values(a, g)
    mc = choose_M(eps, c)
    if not mc.degenerate:
        assert c.admissibility(eps, mc.M) <= math.exp(-1) * (1 + 1e-9)


def test_constants_from_problem():
    p = Problem(1, 1, 1)
    c = BoundConstants.from_problem(p)
    assert c.a == pytest.approx(3.0) and c.gamma_star == pytest.approx(1.0)
    assert c.q == pytest.approx(1 / (9 * math.e**2))
    with pytest.raises(ValueError):
        BoundConstants.from_problem(p, a=1.0)
    with pytest.raises(ValueError):
        BoundConstants.from_values(0.0, 1.0)


def test_reflected_taylor():
    np.testing.assert_allclose(reflected_taylor(AnalyticFunction1D("x^2"), 3), [1, -2, 1, 0], atol=1e-15)


# -- building ----------------------------------------------------------------

def test_zeroth_order_structure():
    d = build(Problem("2 + sin(x)", 1, "exp(x)"), 0.05, 0)
    assert len(d.outer) == 1 and len(d.left) == len(d.right) == 2
    assert d.left[0].is_zero and d.right[0].is_zero
    assert d.kappa == pytest.approx((math.sqrt(2), math.sqrt(2 + math.sin(1))))


def test_first_layer_terms_for_quadratic_outer():
    d = build(Problem(1, 0, 1), 0.05, 1)
    assert endpoint_derivative(d.outer[0], 0) == pytest.approx(0.5)
    assert endpoint_derivative(d.outer[0], 1) == pytest.approx(-0.5)
    np.testing.assert_allclose(d.left[1].poly, [0.5], rtol=1e-14)
    # right_1'(0) = +U_0'(1) = -0.5, so right_1 = +0.5 exp(-s)
    np.testing.assert_allclose(d.right[1].poly, [0.5], rtol=1e-14)
    assert d.left[1].kappa == d.right[1].kappa == 1.0


def test_right_slope_sign_is_fixed_by_boundary_values():
    eps = 0.02
    p = Problem("2 + sin(x)", "1", "exp(x)")
    good, bad = build(p, eps, 3), build(p, eps, 3, right_slope_sign=-1.0)
    ends = np.array([0.0, 1.0])
    assert np.max(np.abs(eval_total(good, ends, 1))) <= 1e-8
    assert abs(eval_total(bad, [1.0], 1)[0]) >= 1e-2


def test_zero_load_gives_zero_terms():
    d = build(Problem("1 + x", "x", 0), 0.05, 3)
    assert all(U.is_zero for U in d.outer)
    assert all(t.is_zero for t in d.left + d.right)
    for n in range(3):
        assert all(np.all(v == 0.0) for v in eval_expansion(d, np.linspace(0, 1, 5), n))


def test_termwise_boundary_identities():
    d = build(corpus.get("graded").problem(), 0.05, 4)
    res = d.bc_residuals()
    scale = max(abs(endpoint_derivative(U, e)) for U in d.outer for e in (0, 1))
    assert max(res.values()) <= 1e-12 * max(scale, 1.0)


def test_extended_precision_matches_doubles():
    p = corpus.get("variable").problem()
    d, d_mp = build(p, 0.02, 6), build(p, 0.02, 6, dps=40)
    for a, b in zip(d.left + d.right, d_mp.left + d_mp.right):
        np.testing.assert_allclose(a.func.float_poly(), b.func.float_poly(), rtol=1e-9, atol=1e-12)


def test_build_rejects_bad_arguments():
    p = Problem(1, 1, 1)
    with pytest.raises(ValueError):
        build(p, 0.1, -1)
    with pytest.raises(ValueError):
        build(p, 0.0, 1)


def test_layer_forcing_reproduces_terms():
    from sp4bvp.layer import solve_layer_ode
    d = build(corpus.get("graded").problem(), 0.05, 4)
    for side, terms in (("left", d.left), ("right", d.right)):
        for j in range(1, 6):
            F, g1 = layer_forcing(d, side, j)
            w = solve_layer_ode(F, g1, terms[0].kappa)
            np.testing.assert_allclose(w.poly, terms[j].func.float_poly(), rtol=1e-12, atol=1e-14)
    with pytest.raises(ValueError):
        layer_forcing(d, "left", 6)
    with pytest.raises(ValueError):
        layer_forcing(d, "middle", 1)


def test_csv_dump_rows():
    d = build(Problem(1, 0, 1), 0.05, 1)
    lines = d.to_csv().strip().splitlines()
    assert lines[0] == "kind,j,kappa,coefficients..."
    assert len(lines) == 1 + 2 + 3 + 3
    assert lines[-1].startswith("right,2,1.0")


# -- evaluation ----------------------------------------------------------------

def test_expansion_boundary_values():
    # values cancel termwise except the last layer term, which has no outer partner
    eps, M = 0.02, 3
    d = build(corpus.get("variable").problem(), eps, M)
    tot = eval_total(d, [0.0, 1.0])
    expected = eps ** (M + 1) * np.array([d.left[M + 1](0.0), d.right[M + 1](0.0)])
    scale = np.max(np.abs(eval_total(d, np.linspace(0, 1, 101))))
    np.testing.assert_allclose(tot, expected, atol=1e-12 * scale)
    assert np.max(np.abs(eval_total(d, [0.0, 1.0], 1))) <= 1e-10 * scale


def test_left_slope_scaling():
    eps = 0.05
    d = build(Problem(1, 0, 1), eps, 1)
    _, left, _ = eval_expansion(d, [0.0], 1)
    # eps * (0.5 exp(-s))' / eps at s = 0, plus eps^2 * left_2'(0) / eps
    assert left[0] == pytest.approx(-0.5 + eps * d.left[2](0.0, 1), abs=1e-14)


def test_eval_expansion_domain():
    d = build(Problem(1, 1, 1), 0.1, 0)
    with pytest.raises(ValueError):
        eval_expansion(d, [1.5])


# -- remainder -----------------------------------------------------------------

def _reference(p, eps, deg=16):
    return fem.solve(p, eps, fem.build_layer_mesh(eps, deg, fem.default_lambda0(p)), deg)


def test_remainder_of_zero_problem():
    p = Problem(1, 1, 0)
    rem = remainder(build(p, 0.05, 2), _reference(p, 0.05, 6))
    assert rem.max_norm == 0.0 and measured_total(rem, 0.05) == 0.0


def test_remainder_decreases_with_eps():
    entry = corpus.get("constant")
    p = entry.problem()
    c = BoundConstants.from_problem(p)
    vals = []
    for eps in (1 / 16, 1 / 28):
        M = choose_M(eps, c).M
        vals.append(remainder(build(p, eps, M, c), _reference(p, eps)).max_norm)
    assert vals[1] < vals[0]


def test_remainder_change_with_M_is_bounded_by_next_term():
    eps = 1 / 20
    p = corpus.get("constant").problem()
    ref = _reference(p, eps)
    xs = np.linspace(0, 1, 401)
    r0 = remainder(build(p, eps, 0), ref, grid=xs).max_norm
    d1 = build(p, eps, 1)
    r1 = remainder(d1, ref, grid=xs).max_norm
    nxt = eps * np.max(np.abs(d1.outer[1](xs))) + eps * max(np.max(np.abs(t(xs / eps))) for t in d1.left + d1.right)
    assert r1 <= r0 + nxt


def test_remainder_precision_guard():
    p = Problem(1, 1, 1)
    ref = fem.solve(p, 0.01, fem.build_layer_mesh(0.01, 4, 1.0), 4)
    with pytest.raises(PrecisionError):
        remainder(build(p, 0.01, 0), ref, resolution=1e-14)
