import math

import numpy as np
import pytest
from scipy import integrate as sci_integrate

from capcover.coeffs import CoeffEntry, CoeffTable, CLOSED
from capcover.coverage import (ClampError, CoverageQuery, expected_caps_bound, expected_caps_series,
                               gilbert_bounds, miles_exact, p_not_covered_bound, p_not_covered_exact,
                               stevens_exact, wendel)

PI = math.pi


def test_query_validation():
    with pytest.raises(ValueError):
        CoverageQuery(2, 2, 1.0)
    with pytest.raises(ValueError):
        CoverageQuery(5, 2, 3.5)
    assert CoverageQuery(5, 2, PI / 2).eps == 0.0
    assert CoverageQuery(5, 2, 2 * PI / 3).eps > 0
    assert CoverageQuery(5, 2, PI / 3).eps < 0


@pytest.mark.parametrize("n, m, expected", [(3, 1, 0.75), (4, 2, 0.875), (2, 5, 1.0), (4, 1, 0.5)])
def test_wendel(n, m, expected):
    assert wendel(n, m) == pytest.approx(expected, abs=1e-15)


def test_wendel_large_n():
    ref = math.fsum(math.comb(599, k) for k in range(4)) / 2 ** 599
    assert wendel(600, 3) == pytest.approx(ref, rel=1e-12)


def test_exact_examples():
    assert p_not_covered_exact(4, 1, PI / 2) == pytest.approx(0.5, abs=1e-12)
    for n, m in ((3, 1), (6, 2), (9, 4)):
        assert p_not_covered_exact(n, m, PI) == 0.0
    assert p_not_covered_exact(5, 2, 2 * PI / 3) == pytest.approx(miles_exact(5, 2 * PI / 3), abs=1e-9)


def test_exact_domain():
    with pytest.raises(ValueError):
        p_not_covered_exact(5, 2, 1.0)
    with pytest.raises(ValueError):
        p_not_covered_bound(5, 2, 2.0)


@pytest.mark.parametrize("m", [1, 2, 3])
def test_dictionary_identity(m):
    for n in range(m + 1, m + 7):
        assert p_not_covered_exact(n, m, PI / 2) == pytest.approx(wendel(n, m), abs=1e-8)
        vals = [p_not_covered_exact(n, m, a) for a in np.linspace(PI / 2, PI, 15)]
        assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("alpha", [PI / 2, 3 * PI / 5, 3 * PI / 4, 9 * PI / 10])
def test_circle_and_sphere_references(alpha):
    for n in range(2, 9):
        assert p_not_covered_exact(n, 1, alpha) == pytest.approx(stevens_exact(n, alpha), abs=1e-8)
        if n >= 3:
            assert p_not_covered_exact(n, 2, alpha) == pytest.approx(miles_exact(n, alpha), abs=1e-8)


def test_monotone_in_n():
    for m, alpha in ((1, 2.0), (2, 2.2), (3, 1.9)):
        vals = [p_not_covered_exact(n, m, alpha) for n in range(m + 1, m + 12)]
        assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("n, alpha, expected", [
    (2, PI / 2, 1.0), (3, PI / 2, 0.75), (5, 2 * PI / 3, 5 / 81),
])
def test_stevens_examples(n, alpha, expected):
    assert stevens_exact(n, alpha) == pytest.approx(expected, abs=1e-15)


def test_stevens_small_caps():
    # two nonzero terms below alpha = pi/2 plus a tie term that is exactly zero
    n, alpha = 6, PI / 3
    ref = 6 * (2 / 3) ** 5 - 15 * (1 / 3) ** 5
    assert stevens_exact(n, alpha) == pytest.approx(ref, rel=1e-14)


def test_miles_against_scipy():
    n, alpha = 7, 0.7 * PI
    top = PI - alpha
    a = sci_integrate.quad(lambda th: math.sin(th / 2) ** (2 * (n - 2)) * math.sin(2 * th), 0, top)[0]
    b = sci_integrate.quad(lambda th: math.sin(th / 2) ** (2 * (n - 3)) * math.sin(th) ** 3, 0, top)[0]
    ref = math.comb(n, 2) * a + 0.75 * math.comb(n, 3) * b
    assert miles_exact(n, alpha) == pytest.approx(ref, rel=1e-10)


def test_miles_examples():
    assert miles_exact(6, PI) == 0.0
    assert miles_exact(4, PI / 2) == pytest.approx(7 / 8, abs=1e-9)


def test_gilbert_examples():
    g = gilbert_bounds(1, PI / 2)
    assert not g.valid
    assert g.lower == pytest.approx(0.5)
    g = gilbert_bounds(10, PI / 2)
    assert g.valid
    assert g.lower == pytest.approx(0.5 ** 10)
    assert g.upper == pytest.approx(120 / 1024)
    assert g.lower <= wendel(10, 2) <= g.upper


def test_bound_examples():
    b = p_not_covered_bound(10, 1, PI / 3)
    assert b == pytest.approx(10 * (2 / 3) ** 9, rel=1e-12)
    assert b >= stevens_exact(10, PI / 3)
    for n, m in ((5, 1), (8, 2), (12, 3)):
        near = p_not_covered_bound(n, m, PI / 2 - 1e-12)
        assert near == pytest.approx(wendel(n, m), rel=1e-9)


def test_bound_dominates_stevens():
    for n in range(3, 15):
        for alpha in np.linspace(0.3, PI / 2 - 0.01, 7):
            assert p_not_covered_bound(n, 1, alpha) >= stevens_exact(n, alpha) - 1e-12


def test_bad_coefficient_table_rejected():
    table = CoeffTable(3, {1: CoeffEntry(1.0, CLOSED)})
    with pytest.raises(ValueError):
        p_not_covered_exact(5, 2, 2.0, coeffs=table)


def test_clamp_detects_bad_coefficients():
    # doubling the coefficients pushes the sum far above 1
    table = CoeffTable(1, {1: CoeffEntry(4 / PI, CLOSED)})
    with pytest.raises(ClampError):
        p_not_covered_exact(3, 1, PI / 2, coeffs=table)


@pytest.mark.parametrize("m, alpha, expected", [
    (2, PI / 2, 8.0), (1, PI / 2, 5.0), (2, PI / 3, 8 + 96 * math.sqrt(2)),
])
def test_expected_caps_bound(m, alpha, expected):
    assert expected_caps_bound(m, alpha) == pytest.approx(expected, rel=1e-13)


def test_expected_caps_series_half_sphere():
    r2 = expected_caps_series(2, PI / 2)
    assert r2.partial_sum == pytest.approx(7.0, abs=1e-6)
    assert r2.tail_bound < 1e-6
    r1 = expected_caps_series(1, PI / 2)
    # sum over n of n 2^{1-n} plus the two certain draws: 2 + 3
    assert r1.partial_sum == pytest.approx(5.0, abs=1e-6)


@pytest.mark.parametrize("m, alpha", [(1, PI / 2), (2, PI / 2), (2, PI / 3)])
def test_expected_caps_series_below_bound(m, alpha):
    r = expected_caps_series(m, alpha)
    assert r.upper <= expected_caps_bound(m, alpha)


def test_expected_caps_series_circle_reference():
    # on S^1 the exact p is known, so the series with Stevens is a lower reference
    alpha = PI / 3
    exact = 2 + sum(stevens_exact(n, alpha) for n in range(2, 400))
    r = expected_caps_series(1, alpha, terms=400)
    assert r.upper >= exact - 1e-9
