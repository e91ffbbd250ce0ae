import math

import numpy as np
import pytest
from scipy import integrate as sci_integrate

from capcover.condition import (cond_tail_feasible, cond_tail_infeasible_bound, cond_tails,
                                expectation_from_tail, expected_ln_cond_bound, tail_bound_explicit)
from capcover.coverage import p_not_covered_exact, wendel

PI = math.pi


@pytest.mark.parametrize("m", [1, 2, 3])
def test_normalisation(m):
    for n in range(m + 1, m + 6):
        assert cond_tail_feasible(n, m, 1.0) == pytest.approx(1.0, abs=1e-8)


def test_feasible_example_against_scipy():
    f = lambda t: (1 - t * t) ** -0.5 * (math.acos(t) / PI) ** 2
    ref = 2 * 6 * (2 / PI) * sci_integrate.quad(f, 0, 0.5, epsabs=0, epsrel=1e-13)[0]
    assert cond_tail_feasible(4, 1, 0.5) == pytest.approx(ref, rel=1e-10)


def test_small_eps():
    assert cond_tail_feasible(6, 2, 1e-12) < 1e-9
    assert cond_tail_infeasible_bound(6, 2, 1e-12) < 1e-9


def test_domain():
    with pytest.raises(ValueError):
        cond_tail_feasible(4, 1, 0.0)
    with pytest.raises(ValueError):
        cond_tail_feasible(4, 1, 1.5)
    with pytest.raises(ValueError):
        cond_tail_infeasible_bound(3, 2, 0.5)


@pytest.mark.parametrize("n, m", [(5, 1), (7, 2), (9, 3)])
def test_consistent_with_coverage(n, m):
    for alpha in (0.55 * PI, 2 * PI / 3, 0.9 * PI):
        eps = abs(math.cos(alpha))
        lhs = p_not_covered_exact(n, m, alpha)
        rhs = wendel(n, m) * (1 - cond_tail_feasible(n, m, eps))
        assert lhs == pytest.approx(rhs, abs=1e-10)


@pytest.mark.parametrize("n, m", [(5, 1), (8, 2), (10, 3)])
def test_monotone_and_in_range(n, m):
    grid = np.linspace(0.05, 1.0, 20)
    f = [cond_tail_feasible(n, m, e) for e in grid]
    g = [cond_tail_infeasible_bound(n, m, e) for e in grid]
    for seq in (f, g):
        assert all(0.0 <= v <= 1.0 + 1e-12 for v in seq)
        assert all(b >= a - 1e-12 for a, b in zip(seq, seq[1:]))


def test_singular_kernel_path():
    v = cond_tail_infeasible_bound(6, 1, 0.3)
    assert 0.0 < v <= 1.0


def test_cond_tails_record():
    r = cond_tails(3, 2, 0.5)
    assert r.infeasible_tail_bound is None
    r = cond_tails(6, 2, 0.5)
    assert r.infeasible_tail_bound == pytest.approx(cond_tail_infeasible_bound(6, 2, 0.5))


def test_explicit_examples():
    t = tail_bound_explicit(10, 1, eps=1 / 100)
    assert t.p_bound == pytest.approx(2 * math.e * 2 ** 1.5 / 100)
    assert tail_bound_explicit(10, 2, inv_eps=8).q_bound is None
    assert tail_bound_explicit(10, 2, inv_eps=9).q_bound == pytest.approx(
        math.sqrt(2 * PI * math.e) * 3 ** 1.75 / 9)
    with pytest.raises(ValueError):
        tail_bound_explicit(10, 2)


def test_explicit_bounds_dominate_exact_tails():
    for n, m in ((6, 1), (10, 2)):
        for inv in (40, 80, 200):
            t = tail_bound_explicit(n, m, inv_eps=inv)
            if t.p_bound is not None:
                assert cond_tail_feasible(n, m, 1 / inv) <= t.p_bound


@pytest.mark.parametrize("m, expected", [(1, 4.696), (2, 5.507), (9, 7.915)])
def test_expected_ln_cond_bound(m, expected):
    assert expected_ln_cond_bound(m) == pytest.approx(expected, abs=1e-3)


def test_expectation_from_tail():
    assert expectation_from_tail(1, 1) == 1.0
    assert expectation_from_tail(math.e, math.e) == pytest.approx(2.0)
    assert expectation_from_tail(9.6 * 4, 13 * 4) == pytest.approx(2 * math.log(2) + math.log(13) + 9.6 / 13)
    assert expectation_from_tail(9.6 * 4, 13 * 4) == pytest.approx(4.690, abs=1e-3)
    with pytest.raises(ValueError):
        expectation_from_tail(0, 1)


def test_analytic_pipeline():
    worst = max(expectation_from_tail(9.6 * (m + 1) ** 2, 13 * (m + 1) ** 2) - expected_ln_cond_bound(m)
                for m in range(1, 101))
    assert worst <= 0.0
