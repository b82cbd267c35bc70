import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sp4bvp import corpus
from sp4bvp.decomposition import build
from sp4bvp.problem import Problem
from sp4bvp.verify import (
    CheckRecord,
    VerificationReport,
    check_layer_decay,
    check_remainder,
    check_term_bounds,
    power_sum_bounds,
    representation_rate,
    run_checks,
    sup_inequality_utils,
)


# -- auxiliary inequalities --------------------------------------------------

@pytest.mark.parametrize("n, d, value", [(0, 1.0, 1.0), (1, 4.0, math.exp(-1)), (2, 2.0, (4 / math.e) ** 2)])
def test_sup_inequality_equality_cases(n, d, value):
    sup, bound = sup_inequality_utils(n, d)
    assert sup == pytest.approx(value, rel=1e-12)
    assert bound == pytest.approx(value, rel=1e-12)


def test_sup_inequality_pointwise():
    rho = np.linspace(0.01, 50, 500)
    vals, bound = sup_inequality_utils(3, 1.5, rho)
    assert vals.shape == rho.shape and np.all(vals <= bound * (1 + 1e-12))
    with pytest.raises(ValueError):
        sup_inequality_utils(-1, 1.0)
    with pytest.raises(ValueError):
        sup_inequality_utils(1, 0.0)


@given(st.integers(0, 30), st.floats(0.05, 20))
def test_sup_never_exceeds_bound(n, d):
    sup, bound = sup_inequality_utils(n, d)
    assert sup <= bound * (1 + 1e-10)


def test_halved_power_split_fails():
    # c1 l = rho = 1, l = 2: (1 + 1)^4 = 16 but 2^2 (1 + 1) = 8
    b = power_sum_bounds(0.5, 2, 1.0)
    assert math.exp(b["lhs"]) == pytest.approx(16.0)
    assert math.exp(b["halved"]) == pytest.approx(8.0)
    assert math.exp(b["convex"]) == pytest.approx(16.0)


@given(st.floats(0.01, 10), st.integers(0, 40), st.floats(0, 100))
def test_convex_power_split_holds(c1, l, rho):
    b = power_sum_bounds(c1, l, rho)
    assert b["lhs"] <= b["convex"] + 1e-9 * max(1.0, abs(b["convex"]))
    assert b["convex"] <= b["gamma_form"] + 1e-9 * max(1.0, abs(b["gamma_form"]))


def test_power_sum_rejects_bad_input():
    with pytest.raises(ValueError):
        power_sum_bounds(0.0, 1, 1.0)


# -- records -----------------------------------------------------------------

def test_record_csv_and_report_text():
    rec = CheckRecord("demo", "x <= y", "pass", {"C": 1.5}, ["a", "b"], [[1, 0.25], [np.int64(2), -0.0]])
    assert rec.to_csv() == "a,b\n1,0.25\n2,-0.0\n"
    bad = CheckRecord("other", "", "fail", notes=["witness at j=3"])
    rep = VerificationReport([rec, bad], {"q": "0.1"})
    assert rep.overall == "fail" and rep.failing() == ["other"]
    text = rep.to_text()
    assert text.startswith("overall: fail\n")
    assert "[PASS] demo" in text and "C = 1.5" in text and "note: witness at j=3" in text
    assert VerificationReport([CheckRecord("s", "", "skipped")]).overall == "pass"


# -- checks --------------------------------------------------------------------

def test_layer_decay_rate_from_representation():
    d = build(Problem("4 + x", 1, 1), 0.02, 3)
    rec = check_layer_decay(d, n_max=3)
    assert rec.status == "pass"
    rates = {(r[0], r[1], r[2]): r[5] for r in rec.rows}
    assert rates[("left", 1, 0)] == pytest.approx(2.0, abs=1e-12)
    assert rates[("right", 2, 1)] == pytest.approx(math.sqrt(5.0), abs=1e-6)


def test_representation_rate_of_pure_exponential():
    d = build(Problem(4, 0, 1), 0.05, 1)
    s = np.linspace(5, 30, 51)
    assert representation_rate(d.left[1], 0, s) == pytest.approx(2.0, abs=1e-12)


def test_zero_load_checks_are_vacuous():
    d = build(Problem(1, 1, 0), 0.01, 2)
    assert check_layer_decay(d).status == "pass"
    assert check_term_bounds(d).status == "pass"
    rec = check_remainder(Problem(1, 1, 0), [0.015, 0.013, 0.011, 0.01, 0.009])
    assert rec.status == "pass"
    assert "remainder vanishes identically" in rec.notes


def test_remainder_with_too_few_admissible_points_is_skipped():
    rec = check_remainder(Problem(1, 1, 1), [0.5, 0.25])
    assert rec.status == "skipped" and rec.passed


def test_corpus_term_bounds_pass(corpus_builds):
    for name, (_, _, d) in corpus_builds.items():
        rec = check_term_bounds(d)
        # an M = 0 build has too few terms to fit the envelope and is skipped
        assert rec.status == ("skipped" if d.M < 2 else "pass"), (name, rec.notes[:3])


def test_run_checks_rejects_unknown_names():
    p = Problem(1, 1, 1)
    with pytest.raises(ValueError, match="tolerances"):
        run_checks(p, [0.01], tolerances={"k_rato": 2.0})
    with pytest.raises(ValueError, match="checks"):
        run_checks(p, [0.01], checks=["remainders"])


def test_run_checks_without_admissible_eps():
    rep = run_checks(Problem(1, 1, 1), [0.5], checks=["term_bounds", "layer_decay"])
    assert [c.status for c in rep.checks] == ["skipped", "skipped"]
    assert rep.overall == "pass"


def test_run_checks_on_constant_corpus_problem():
    entry = corpus.get("constant")
    rep = run_checks(entry.problem(), entry.eps_list, checks=["layer_decay", "remainder"])
    assert rep.overall == "pass", rep.to_text()
    rem = rep.checks[-1]
    assert rem.constants["slope"] < 0
    assert "q" in rep.environment
