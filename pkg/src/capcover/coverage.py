"""Probability that n random caps of radius alpha fail to cover S^m.

Exact values for alpha >= pi/2, an upper bound below pi/2, the classical
reference formulas on S^1 and S^2, and bounds on the expected number of caps
needed for coverage.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .coeffs import CoeffTable, default_table
from .quad import QuadSpec, integrate, integrate_coverage_kernel, integrate_infeasible_kernel
from .specfun import cap_fraction, log_binom

log = logging.getLogger(__name__)

CLAMP_LIMIT = 1e-6


class ClampError(ArithmeticError):
    """An assembled probability fell outside [0, 1] by more than CLAMP_LIMIT."""


@dataclass(frozen=True)
class CoverageQuery:
    n: int
    m: int
    alpha: float

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.n <= self.m:
            raise ValueError(f"need n > m, got n={self.n}, m={self.m}")
        if not 0.0 <= self.alpha <= math.pi:
            raise ValueError(f"alpha must lie in [0, pi], got {self.alpha}")

    @property
    def eps(self) -> float:
        """cos(pi - alpha); nonnegative exactly when alpha >= pi/2."""
        if self.alpha == 0.5 * math.pi:
            return 0.0
        return math.cos(math.pi - self.alpha)


def _table(m: int, coeffs: CoeffTable | None) -> CoeffTable:
    if coeffs is None:
        return default_table(m)
    if coeffs.m != m:
        raise ValueError(f"coefficient table is for m={coeffs.m}, query needs m={m}")
    return coeffs


def _log_term(log_factor: float, integral: float) -> float:
    if integral <= 0.0:
        return -math.inf
    return log_factor + math.log(integral)


def _clamp(value: float, what: str) -> float:
    dist = max(0.0, -value, value - 1.0)
    if dist > CLAMP_LIMIT:
        raise ClampError(f"{what} = {value!r} is outside [0, 1] by {dist:.3g}")
    if dist > 0.0:
        log.debug("%s clamped by %.3g", what, dist)
    return min(max(value, 0.0), 1.0)


def _sum_log_terms(logs: list[float]) -> float:
    return math.fsum(math.exp(x) for x in logs if x > -math.inf)


def wendel(n: int, m: int) -> float:
    """2^{1-n} sum_{k=0}^{m} binom(n-1, k): n random points lie in a hemisphere."""
    if n < 1 or m < 0:
        raise ValueError(f"need n >= 1 and m >= 0, got n={n}, m={m}")
    if n <= m + 1:
        return 1.0
    shift = (n - 1) * math.log(2.0)
    return min(1.0, math.fsum(math.exp(log_binom(n - 1, k) - shift) for k in range(m + 1)))


def p_not_covered_exact(n: int, m: int, alpha: float, coeffs: CoeffTable | None = None,
                        spec: QuadSpec = QuadSpec()) -> float:
    """p(n, m, alpha) for alpha in [pi/2, pi]."""
    q = CoverageQuery(n, m, alpha)
    if alpha < 0.5 * math.pi:
        raise ValueError("exact formula needs alpha >= pi/2; use p_not_covered_bound")
    table = _table(m, coeffs)
    eps = q.eps
    logs = []
    for k in range(1, m + 1):
        res = integrate_coverage_kernel(n, m, k, eps, 1.0, spec)
        if not res.converged:
            log.warning("p(%d,%d,%.6g): kernel k=%d did not converge", n, m, alpha, k)
        logs.append(_log_term(log_binom(n, k + 1) + math.log(table[k]), res.value))
    return _clamp(_sum_log_terms(logs), f"p({n},{m},{alpha})")


def p_not_covered_bound(n: int, m: int, alpha: float, coeffs: CoeffTable | None = None,
                        spec: QuadSpec = QuadSpec()) -> float:
    """Upper bound on p(n, m, alpha) for alpha in [0, pi/2).

    The returned value is the raw bound and may exceed 1 when n is close to m.
    """
    q = CoverageQuery(n, m, alpha)
    if alpha >= 0.5 * math.pi:
        raise ValueError("the bound applies to alpha < pi/2; use p_not_covered_exact")
    table = _table(m, coeffs)
    return wendel(n, m) + _infeasible_part(n, m, abs(q.eps), table, spec)


def _infeasible_part(n, m, upper, table, spec):
    if upper == 0.0:
        return 0.0
    res = integrate_infeasible_kernel(n, m, 0.0, upper, spec)
    if not res.converged:
        log.warning("infeasible kernel n=%d m=%d did not converge", n, m)
    lt = _log_term(log_binom(n, m + 1) + math.log(table[m]), res.value)
    return math.exp(lt) if lt > -math.inf else 0.0


def stevens_exact(n: int, alpha: float) -> float:
    """Exact non-coverage probability for n random arcs of half-length alpha on S^1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 < alpha <= math.pi:
        raise ValueError(f"alpha must lie in (0, pi], got {alpha}")
    a = alpha / math.pi
    terms = []
    for j in range(1, int(math.floor(1.0 / a)) + 1):
        base = 1.0 - j * a
        if base <= 0.0:
            break
        terms.append((-1) ** (j + 1) * math.comb(n, j) * base ** (n - 1))
    return math.fsum(terms)


class GilbertBracket(NamedTuple):
    lower: float
    upper: float
    valid: bool


def gilbert_bounds(n: int, alpha: float) -> GilbertBracket:
    """Gilbert's bracket for p(n, 2, alpha); ``valid`` is False for n < 2."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= alpha <= math.pi:
        raise ValueError(f"alpha must lie in [0, pi], got {alpha}")
    lam = math.sin(0.5 * alpha) ** 2
    lower = (1.0 - lam) ** n
    upper = 4.0 / 3.0 * n * (n - 1) * lam * (1.0 - lam) ** (n - 1)
    return GilbertBracket(lower, upper, n >= 2)


def miles_exact(n: int, alpha: float, spec: QuadSpec = QuadSpec()) -> float:
    """Miles's formula for p(n, 2, alpha), alpha in [pi/2, pi]."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if not 0.5 * math.pi <= alpha <= math.pi:
        raise ValueError(f"alpha must lie in [pi/2, pi], got {alpha}")
    top = math.pi - alpha
    if top == 0.0:
        return 0.0

    def f2(th):
        return np.sin(0.5 * th) ** (2 * (n - 2)) * np.sin(2.0 * th)

    first = math.comb(n, 2) * integrate(f2, 0.0, top, spec).value
    if n < 3:
        return first

    def f3(th):
        return np.sin(0.5 * th) ** (2 * (n - 3)) * np.sin(th) ** 3

    return first + 0.75 * math.comb(n, 3) * integrate(f3, 0.0, top, spec).value


def _check_alpha_caps(alpha):
    if not 0.0 < alpha <= 0.5 * math.pi:
        raise ValueError(f"alpha must lie in (0, pi/2], got {alpha}")


def expected_caps_bound(m: int, alpha: float) -> float:
    """Closed-form upper bound on E(N(m, alpha)), the caps needed to cover S^m."""
    if m < 1:
        raise ValueError("m must be >= 1")
    _check_alpha_caps(alpha)
    c = 0.0 if alpha == 0.5 * math.pi else math.cos(alpha)
    base = 3 * m + 2
    if c == 0.0:
        return float(base)
    lam = cap_fraction(m, c)
    try:
        extra = math.sqrt(m) * (m + 1) * c * lam ** -2 * (0.5 / lam) ** m
    except (OverflowError, ZeroDivisionError):
        return math.inf
    return base + extra


def _geometric_tail(log_a, ratio) -> float:
    """Sum over n >= n0 of a_n, given ln a_{n0} and the ratio bound a_{n+1}/a_n <= ratio."""
    if log_a == -math.inf:
        return 0.0
    if ratio >= 1.0:
        return math.inf
    return math.exp(log_a) / (1.0 - ratio)


def _binomial_series_tail(n0: int, j: int, shift: int, log_x: float) -> float:
    """Bound sum_{n >= n0} binom(n - shift, j) x^n.

    The ratio of consecutive terms, (n+1-shift)/(n+1-shift-j) * x, decreases
    in n, so the tail is dominated by a geometric series from n0.
    """
    r = n0 - shift
    if r < j:
        raise ValueError("tail must start where the binomial is nonzero")
    log_a = log_binom(r, j) + n0 * log_x
    ratio = (r + 1) / (r + 1 - j) * math.exp(log_x)
    return _geometric_tail(log_a, ratio)


@dataclass(frozen=True)
class SeriesResult:
    partial_sum: float
    tail_bound: float

    @property
    def upper(self) -> float:
        return self.partial_sum + self.tail_bound


def _p_upper(n, m, alpha, table, spec):
    # p = 1 for n <= m+1 and alpha <= pi/2; the bound is exact at pi/2
    if n <= m + 1:
        return 1.0
    if alpha == 0.5 * math.pi:
        return wendel(n, m)
    return min(1.0, p_not_covered_bound(n, m, alpha, table, spec))


def expected_caps_series(m: int, alpha: float, coeffs: CoeffTable | None = None,
                         spec: QuadSpec = QuadSpec(), terms: int = 200) -> SeriesResult:
    """m + 1 + sum_{n=m+1}^{m+terms} of the non-coverage bound, plus a tail bound.

    The true E(N(m, alpha)) is at most ``partial_sum + tail_bound``. Beyond the
    summed range the Wendel part is a finite sum of binomial-geometric series,
    and the integral part is bounded by C(m,m) J binom(n, m+1) q^{n-m-1} with
    q = 1 - lambda_m(cos alpha) and J the integral of the weight alone.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if terms < 1:
        raise ValueError("terms must be >= 1")
    _check_alpha_caps(alpha)
    table = _table(m, coeffs)
    last = m + terms
    partial = (m + 1) + math.fsum(_p_upper(n, m, alpha, table, spec)
                                  for n in range(m + 1, last + 1))

    n0 = last + 1
    half = math.log(0.5)
    # 2^{1-n} binom(n-1, k) = 2 * binom(n-1, k) (1/2)^n
    tail = math.fsum(2.0 * _binomial_series_tail(n0, k, 1, half) for k in range(m + 1))
    if alpha < 0.5 * math.pi:
        c = math.cos(alpha)
        lam = cap_fraction(m, c)
        if lam <= 0.0:
            return SeriesResult(partial, math.inf)
        # weight (1-t^2)^{(m^2-2)/2} integrates to arcsin(c) for m = 1, <= c otherwise
        weight = math.asin(c) if m == 1 else c
        log_q = math.log1p(-lam)
        # binom(n, m+1) q^{n-m-1} = binom(n, m+1) q^n / q^{m+1}
        part = _binomial_series_tail(n0, m + 1, 0, log_q) * math.exp(-(m + 1) * log_q)
        tail += table[m] * weight * part
    if not math.isfinite(tail):
        log.warning("expected_caps_series tail bound is not finite (m=%d, alpha=%g)", m, alpha)
    return SeriesResult(partial, tail)
