import math
from fractions import Fraction

import pytest
from scipy import integrate as sci_integrate

from capcover.coeffs import (CLOSED, MONTE_CARLO, SYSTEM, CoeffEntry, CoeffTable, CoefficientError,
                             coeff_bounds, coeff_closed_form, coeff_integral_I, coeff_integral_I_mp,
                             coeff_monte_carlo, coeff_solve_linear_system, default_table,
                             determinant_moment_target, wendel_sum)
from capcover.specfun import cap_fraction, sphere_volume

PI = math.pi


def test_closed_form_examples():
    assert coeff_closed_form(2, 1) == pytest.approx(2.0, rel=1e-15)
    assert coeff_closed_form(4, 4) == pytest.approx(15 / 32, rel=1e-15)
    assert coeff_closed_form(3, 2) == pytest.approx(1.5 * (1 + 16 / PI ** 2), rel=1e-15)
    assert coeff_closed_form(1, 1) == pytest.approx(2 / PI, rel=1e-15)
    assert coeff_closed_form(5, 2) is None


def test_closed_form_domain():
    with pytest.raises(ValueError):
        coeff_closed_form(3, 4)
    with pytest.raises(ValueError):
        coeff_closed_form(3, 0)


def test_bounds_examples():
    b = coeff_bounds(5, 5)
    assert b.lower == pytest.approx(b.upper_bracket)
    assert b.lower == pytest.approx(1 / PI, rel=1e-12)
    b = coeff_bounds(2, 1)
    assert (b.lower, b.upper_bracket) == pytest.approx((1.0, 2.0))
    b = coeff_bounds(6, 6)
    assert b.upper_explicit == pytest.approx(7 * math.sqrt(6) / 64)
    assert b.upper_explicit >= 105 / 512


def test_explicit_bound_dominates_system_values():
    for m in range(1, 9):
        table = coeff_solve_linear_system(m)
        for k in range(1, m + 1):
            b = coeff_bounds(m, k)
            assert b.lower * (1 - 1e-12) <= table[k] <= b.upper_explicit * (1 + 1e-12)


def test_integral_examples():
    assert coeff_integral_I(2, 1, 1) == pytest.approx(PI, rel=1e-10)
    assert coeff_integral_I(3, 2, 2) == pytest.approx(8 / 3, rel=1e-13)


def test_integral_mp_matches_double():
    for n, m, k in ((5, 2, 1), (7, 3, 2), (9, 4, 4), (8, 5, 3)):
        assert float(coeff_integral_I_mp(n, m, k)) == pytest.approx(coeff_integral_I(n, m, k), rel=1e-11)


def test_integral_against_scipy():
    n, m, k = 7, 3, 2
    f = lambda t: t ** (m - k) * (1 - t * t) ** (k * m / 2 - 1) * cap_fraction(m, t) ** (n - k - 1)
    ref = 2 ** (n - 1) * math.comb(n, k + 1) * sci_integrate.quad(f, 0, 1, epsabs=0, epsrel=1e-13)[0]
    assert coeff_integral_I(n, m, k) == pytest.approx(ref, rel=1e-10)


def test_small_system_consistency():
    # (n=3, m=2): sum_k I C = binom(2,0) + binom(2,1) + binom(2,2)
    s = sum(coeff_integral_I(3, 2, k) * coeff_closed_form(2, k) for k in (1, 2))
    assert s == pytest.approx(4.0, rel=1e-12)


def test_system_m1():
    t = coeff_solve_linear_system(1)
    assert t[1] == pytest.approx(2 / PI, rel=1e-12)
    assert t.entries[1].provenance == SYSTEM


def test_system_m4_fractions():
    t = coeff_solve_linear_system(4)
    for k, v in zip(range(1, 5), (Fraction(12), Fraction(477, 32), Fraction(39, 8), Fraction(15, 32))):
        assert t[k] == pytest.approx(float(v), rel=1e-10)
    assert not t.degraded


def test_system_m5_decimals():
    t = coeff_solve_linear_system(5)
    for k, v in zip(range(1, 6), (27.1639, 49.5841, 25.1644, 4.8525, 0.3183)):
        assert t[k] == pytest.approx(v, rel=1e-3)


@pytest.mark.parametrize("m", [2, 3, 4, 5, 6])
def test_double_precision_route(m):
    t = coeff_solve_linear_system(m, dps=None)
    ref = coeff_solve_linear_system(m)
    for k in range(1, m + 1):
        assert t[k] == pytest.approx(ref[k], rel=1e-6)


def test_system_limit():
    with pytest.raises(ValueError):
        coeff_solve_linear_system(13)


@pytest.mark.parametrize("m", range(1, 7))
def test_normalisation_residual(m):
    table = default_table(m)
    for n in range(m + 1, 3 * m + 1):
        lhs = math.fsum(coeff_integral_I(n, m, k) * table[k] for k in range(1, m + 1))
        rhs = wendel_sum(n, m)
        assert abs(lhs - rhs) <= 1e-6 * rhs


def test_table_csv_round_trip():
    t = coeff_solve_linear_system(3)
    back = CoeffTable.from_csv(t.to_csv())
    assert back.m == 3
    for k in (1, 2, 3):
        assert back[k] == t[k]
        assert back.entries[k].uncertainty == t.entries[k].uncertainty
        assert back.entries[k].provenance == SYSTEM
    assert t.to_csv().splitlines()[0] == "m,k,value,provenance,uncertainty"


def test_table_rejects_bracket_violation():
    t = CoeffTable(2, {1: CoeffEntry(2.0, CLOSED), 2: CoeffEntry(5.0, CLOSED)})
    with pytest.raises(CoefficientError):
        t.validate()


def test_table_rejects_missing_entry():
    t = CoeffTable(3, {1: CoeffEntry(16 / PI, CLOSED)})
    with pytest.raises(ValueError):
        t.validate()


@pytest.mark.parametrize("m, k, target", [
    (2, 2, 0.75),
    (3, 1, 16 / PI),
    (6, 3, 897345 / 8192),
])
def test_monte_carlo_coefficients(m, k, target):
    est = coeff_monte_carlo(m, k, 1_000_000, seed=11 + m + k)
    assert est.within(target), (est.value, est.std_error, target)


def test_monte_carlo_too_few_samples():
    est = coeff_monte_carlo(3, 3, 1, seed=0)
    assert est.std_error == math.inf or est.value > 0


def test_monte_carlo_reproducible():
    a = coeff_monte_carlo(3, 2, 20_000, seed=4)
    b = coeff_monte_carlo(3, 2, 20_000, seed=4)
    assert a.value == b.value and a.std_error == b.std_error


def test_determinant_moment_targets():
    assert determinant_moment_target(2, 2) == pytest.approx(2 / PI)
    assert determinant_moment_target(3, 2) == pytest.approx(0.5)
    # (m=4, k=3): (O_4/O_2)^3 / G_{3,5}
    g35 = sphere_volume(2) * sphere_volume(3) * sphere_volume(4) / (
        sphere_volume(0) * sphere_volume(1) * sphere_volume(2))
    assert determinant_moment_target(4, 3) == pytest.approx((sphere_volume(4) / sphere_volume(2)) ** 3 / g35)


def test_determinant_moment_by_quadrature():
    # E|det| for two independent uniform unit vectors in R^2 is E|sin(theta)|
    ref = sci_integrate.quad(lambda th: abs(math.sin(th)), 0, 2 * PI)[0] / (2 * PI)
    assert determinant_moment_target(2, 2) == pytest.approx(ref)
    ref = sci_integrate.quad(lambda th: math.sin(th) ** 2, 0, 2 * PI)[0] / (2 * PI)
    assert determinant_moment_target(3, 2) == pytest.approx(ref)


def test_provenance_labels():
    assert default_table(2).entries[1].provenance == CLOSED
    est = coeff_monte_carlo(1, 1, 100_000, seed=1)
    assert est.within(2 / PI)
    assert MONTE_CARLO == "monte-carlo"
