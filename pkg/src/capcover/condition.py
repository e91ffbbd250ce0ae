"""Distribution of the GCC condition number of a random feasibility instance."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from .coeffs import CoeffTable
from .coverage import _clamp, _log_term, _sum_log_terms, _table, wendel
from .quad import QuadSpec, integrate_coverage_kernel, integrate_infeasible_kernel
from .specfun import log_binom

log = logging.getLogger(__name__)

EXPECTED_LN_COND_CONSTANT = 3.31


def _check_eps(eps):
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")


def _check_shape(n, m):
    if m < 1 or n <= m:
        raise ValueError(f"need n > m >= 1, got n={n}, m={m}")


def cond_tail_feasible(n: int, m: int, eps: float, coeffs: CoeffTable | None = None,
                       spec: QuadSpec = QuadSpec()) -> float:
    """Prob{C(A) >= 1/eps | A feasible} for A uniform in (S^m)^n."""
    _check_shape(n, m)
    _check_eps(eps)
    table = _table(m, coeffs)
    log_w = math.log(wendel(n, m))
    logs = []
    for k in range(1, m + 1):
        res = integrate_coverage_kernel(n, m, k, 0.0, eps, spec)
        if not res.converged:
            log.warning("feasible tail n=%d m=%d k=%d did not converge", n, m, k)
        logs.append(_log_term(log_binom(n, k + 1) + math.log(table[k]) - log_w, res.value))
    return _clamp(_sum_log_terms(logs), f"feasible tail ({n},{m},{eps})")


def _log_infeasible_mass(n, m):
    """ln of 2^{1-n} sum_{k=m+1}^{n-1} binom(n-1, k), i.e. ln(1 - wendel(n, m)).

    Summed directly over whichever side has fewer terms, so there is no
    cancellation when wendel is close to 1.
    """
    shift = (n - 1) * math.log(2.0)
    upper_terms = n - 1 - m
    if upper_terms <= m + 1:
        s = math.fsum(math.exp(log_binom(n - 1, k) - shift) for k in range(m + 1, n))
        return math.log(s)
    return math.log1p(-wendel(n, m))


def cond_tail_infeasible_bound(n: int, m: int, eps: float, coeffs: CoeffTable | None = None,
                               spec: QuadSpec = QuadSpec()) -> float:
    """Upper bound on Prob{C(A) >= 1/eps | A infeasible}, capped at 1.

    For n = m + 1 almost every instance is feasible, so the conditional
    probability is undefined and a ValueError is raised.
    """
    _check_shape(n, m)
    if n == m + 1:
        raise ValueError("n = m + 1: the infeasible set has measure zero")
    _check_eps(eps)
    table = _table(m, coeffs)
    res = integrate_infeasible_kernel(n, m, 0.0, eps, spec)
    if not res.converged:
        log.warning("infeasible tail n=%d m=%d did not converge", n, m)
    lt = _log_term(log_binom(n, m + 1) + math.log(table[m]) - _log_infeasible_mass(n, m),
                   res.value)
    value = math.exp(lt) if lt > -math.inf else 0.0
    if value > 1.0:
        log.info("infeasible tail bound %.6g > 1 reported as 1", value)
        return 1.0
    return value


@dataclass(frozen=True)
class CondTail:
    n: int
    m: int
    eps: float
    feasible_tail: float
    infeasible_tail_bound: float | None  # None when n = m + 1


def cond_tails(n: int, m: int, eps: float, coeffs: CoeffTable | None = None,
               spec: QuadSpec = QuadSpec()) -> CondTail:
    infeasible = None
    if n > m + 1:
        infeasible = cond_tail_infeasible_bound(n, m, eps, coeffs, spec)
    return CondTail(n, m, eps, cond_tail_feasible(n, m, eps, coeffs, spec), infeasible)


@dataclass(frozen=True)
class ExplicitTail:
    """Elementary tail bounds; a component is None when its regime does not apply."""
    p_bound: float | None
    q_bound: float | None


def tail_bound_explicit(n: int, m: int, eps: float | None = None,
                        inv_eps: float | None = None) -> ExplicitTail:
    """Explicit linear-in-eps bounds on the feasible (P) and infeasible (Q) tails.

    Pass either ``eps`` or ``inv_eps`` = 1/eps; the latter avoids rounding
    right at a regime threshold.
    """
    _check_shape(n, m)
    if (eps is None) == (inv_eps is None):
        raise ValueError("give exactly one of eps and inv_eps")
    if inv_eps is None:
        _check_eps(eps)
        inv_eps = 1.0 / eps
    else:
        if not inv_eps >= 1.0:
            raise ValueError(f"inv_eps must be >= 1, got {inv_eps}")
        eps = 1.0 / inv_eps
    p = q = None
    if inv_eps >= 13.0 * (m + 1) ** 1.5:
        p = 2.0 * math.e * (m + 1) ** 1.5 * eps
    if inv_eps >= (m + 1) ** 2:
        q = math.sqrt(2.0 * math.pi * math.e) * (m + 1) ** 1.75 * eps
    return ExplicitTail(p, q)


def expected_ln_cond_bound(m: int) -> float:
    """2 ln(m+1) + 3.31."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return 2.0 * math.log(m + 1) + EXPECTED_LN_COND_CONSTANT


def expectation_from_tail(K: float, t0: float) -> float:
    """ln t0 + K/t0: bounds E(ln Z) for Z >= 1 with Prob{Z >= t} <= K/t when t >= t0."""
    if not (K > 0 and t0 > 0):
        raise ValueError("K and t0 must be positive")
    return math.log(t0) + K / t0
