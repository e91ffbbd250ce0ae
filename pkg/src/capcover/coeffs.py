"""The simplex-moment coefficients C(m, k), 1 <= k <= m.

Three routes are provided: closed forms (k in {1, m-1, m}), the square linear
system obtained by evaluating the feasible-case normalisation at m values of
n, and a Monte Carlo estimate straight from the defining simplex integral.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import mpmath
import numpy as np

from .quad import QuadSpec, integrate_coverage_kernel
from .sampling import McEstimate, mean_estimate, run_chunks, uniform_sphere
from .specfun import (alpha_m, binom, grassmann_volume, log_binom, log_sphere_volume,
                      sphere_volume)

log = logging.getLogger(__name__)

CLOSED = "closed-form"
SYSTEM = "linear-system"
MONTE_CARLO = "monte-carlo"

MAX_SYSTEM_M = 12
COND_LIMIT = 1e12
RESIDUAL_LIMIT = 1e-8
# Working digits for the extended-precision system. The system loses roughly
# two digits per unit of m, so double-precision entries stop being enough
# around m = 7.
SYSTEM_DPS = 40


class CoefficientError(RuntimeError):
    """A computed coefficient violates its rigorous bracket."""


def _check(m: int, k: int):
    if not 1 <= k <= m:
        raise ValueError(f"need 1 <= k <= m, got m={m}, k={k}")


def _sphere_ratio(m: int, k: int) -> float:
    """O_{k-1} O_{m-k} / O_m."""
    return math.exp(log_sphere_volume(k - 1) + log_sphere_volume(m - k) - log_sphere_volume(m))


def coeff_closed_form(m: int, k: int) -> float | None:
    """C(m, k) in closed form for k = 1, k = m - 1 and k = m; None otherwise."""
    _check(m, k)
    ratio = math.exp(log_sphere_volume(m - 1) - log_sphere_volume(m))
    if k == m:
        return (m + 1) / 2.0 ** (m - 1) * ratio
    if k == 1:
        return 2.0 ** m * ratio
    if k == m - 1:
        a = alpha_m(m)
        return m * (m - 1) / 2.0 ** (m - 1) * (1.0 + a * a)
    return None


@dataclass(frozen=True)
class CoeffBounds:
    lower: float
    upper_bracket: float
    upper_explicit: float

    @property
    def upper(self) -> float:
        return min(self.upper_bracket, self.upper_explicit)

    def contains(self, value: float, rel: float = 1e-9) -> bool:
        return self.lower * (1 - rel) <= value <= self.upper * (1 + rel)


def coeff_bounds(m: int, k: int) -> CoeffBounds:
    """Two-sided bracket for C(m, k) plus the explicit elementary upper bound."""
    _check(m, k)
    ratio = _sphere_ratio(m, k)
    lower = (k + 1) / 2.0 ** k * ratio
    upper = (k + 1) ** (m - k + 1) / 2.0 ** k * ratio
    if k < m:
        explicit = (math.sqrt(math.pi / 2) * (k + 1) ** (m - k + 1) / 2.0 ** k
                    * k ** 0.75 * math.sqrt(binom(m, k)))
    else:
        explicit = (m + 1) * math.sqrt(m) / 2.0 ** m
    return CoeffBounds(lower, upper, explicit)


def coeff_integral_I(n: int, m: int, k: int, spec: QuadSpec = QuadSpec()) -> float:
    """I(n, m, k) = 2^{n-1} binom(n, k+1) * integral_0^1 of the coverage kernel.

    Raises ArithmeticError if the quadrature does not reach its tolerance.
    """
    val, res = _integral_I(n, m, k, spec)
    if not res.converged:
        raise ArithmeticError(f"I({n},{m},{k}): quadrature did not converge "
                              f"(error estimate {res.error_estimate:.3g})")
    return val


def _integral_I(n, m, k, spec):
    res = integrate_coverage_kernel(n, m, k, 0.0, 1.0, spec)
    if not res.converged:
        log.warning("I(%d,%d,%d): quadrature did not converge (err %.3g)", n, m, k,
                    res.error_estimate)
    if res.value <= 0.0:
        return 0.0, res
    logv = (n - 1) * math.log(2.0) + log_binom(n, k + 1) + math.log(res.value)
    return math.exp(logv), res


def _cap_fraction_theta_mp(m):
    """theta -> lambda_m(cos theta) in mpmath arithmetic.

    Uses the reduction formula for the integral of sin^j over [0, theta], so
    the result is analytic in theta and cheap to evaluate.
    """
    ratio = mpmath.gamma(mpmath.mpf(m + 1) / 2) / (mpmath.sqrt(mpmath.pi)
                                                   * mpmath.gamma(mpmath.mpf(m) / 2))
    j = m - 1

    def lam(th):
        s, c = mpmath.sin(th), mpmath.cos(th)
        if j % 2 == 0:
            val, start = th, 2
        else:
            val, start = 1 - c, 3
        for i in range(start, j + 1, 2):
            val = -s ** (i - 1) * c / i + mpmath.mpf(i - 1) / i * val
        return ratio * val

    return lam


def coeff_integral_I_mp(n: int, m: int, k: int, dps: int = SYSTEM_DPS):
    """Extended-precision I(n, m, k) as an mpmath number.

    With t = cos(theta) the integrand becomes
    cos^{m-k} sin^{km-1} lambda_m(cos theta)^{n-k-1}, which is smooth on
    [0, pi/2], so tanh-sinh quadrature converges to working precision.
    """
    if not 1 <= k <= m < n:
        raise ValueError(f"need 1 <= k <= m < n, got n={n}, m={m}, k={k}")
    with mpmath.workdps(dps):
        lam = _cap_fraction_theta_mp(m)
        e_l = n - k - 1

        def f(th):
            return mpmath.cos(th) ** (m - k) * mpmath.sin(th) ** (k * m - 1) * lam(th) ** e_l

        val = mpmath.quad(f, [0, mpmath.pi / 2])
        return +(mpmath.mpf(2) ** (n - 1) * mpmath.binomial(n, k + 1) * val)


def wendel_sum(n: int, m: int) -> float:
    """sum_{k=0}^{m} binom(n-1, k)."""
    return math.fsum(binom(n - 1, j) for j in range(0, m + 1))


@dataclass
class CoeffEntry:
    value: float
    provenance: str
    uncertainty: float = 0.0

    def __post_init__(self):
        self.value = float(self.value)
        self.uncertainty = float(self.uncertainty)


@dataclass
class CoeffTable:
    m: int
    entries: dict[int, CoeffEntry] = field(default_factory=dict)
    degraded: bool = False
    condition: float | None = None
    residual: float | None = None

    def __getitem__(self, k: int) -> float:
        return self.entries[k].value

    def values(self) -> list[float]:
        return [self.entries[k].value for k in range(1, self.m + 1)]

    def validate(self):
        if sorted(self.entries) != list(range(1, self.m + 1)):
            raise ValueError(f"table for m={self.m} must define exactly k = 1..{self.m}")
        for k, e in self.entries.items():
            b = coeff_bounds(self.m, k)
            slack = 3 * e.uncertainty / max(abs(e.value), 1e-300) if e.provenance == MONTE_CARLO else 0
            if not b.contains(e.value, rel=1e-9 + slack):
                raise CoefficientError(
                    f"C({self.m},{k}) = {e.value!r} outside [{b.lower!r}, {b.upper_bracket!r}]")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["m", "k", "value", "provenance", "uncertainty"])
        for k in range(1, self.m + 1):
            e = self.entries[k]
            w.writerow([self.m, k, repr(e.value), e.provenance, repr(e.uncertainty)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "CoeffTable":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise ValueError("empty coefficient table")
        ms = {int(r["m"]) for r in rows}
        if len(ms) != 1:
            raise ValueError(f"table mixes dimensions {sorted(ms)}")
        table = cls(ms.pop())
        for r in rows:
            table.entries[int(r["k"])] = CoeffEntry(float(r["value"]), r["provenance"],
                                                    float(r["uncertainty"]))
        table.validate()
        return table


def coeff_solve_linear_system(m: int, spec: QuadSpec = QuadSpec(),
                              dps: int | None = SYSTEM_DPS) -> CoeffTable:
    """Solve sum_k I(n,m,k) C(m,k) = sum_{j<=m} binom(n-1,j) for n = m+1..2m.

    With ``dps`` set (the default) the entries are integrated and the system
    is solved in mpmath at that many digits; ``dps=None`` uses the
    double-precision Gauss-Kronrod entries and LAPACK, which is only accurate
    to about 1e-6 up to m = 6.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if m > MAX_SYSTEM_M:
        raise ValueError(f"linear-system route is limited to m <= {MAX_SYSTEM_M}")
    if dps is not None:
        return _solve_extended(m, dps)
    ns = range(m + 1, 2 * m + 1)
    mat = np.empty((m, m))
    rel_err = 0.0
    for i, n in enumerate(ns):
        for j, k in enumerate(range(1, m + 1)):
            val, res = _integral_I(n, m, k, spec)
            mat[i, j] = val
            if res.value > 0:
                rel_err = max(rel_err, res.error_estimate / res.value)
    rhs = np.array([wendel_sum(n, m) for n in ns])

    cond = float(np.linalg.cond(mat))
    degraded = False
    if cond > COND_LIMIT:
        # rescale unknowns by the bracket midpoint and retry
        mid = _bracket_midpoints(m)
        scaled = mat * mid
        cond = float(np.linalg.cond(scaled))
        sol = np.linalg.solve(scaled, rhs) * mid
        degraded = cond > COND_LIMIT
    else:
        sol = np.linalg.solve(mat, rhs)
    residual = float(np.max(np.abs(mat @ sol - rhs) / np.abs(rhs)))
    if residual > RESIDUAL_LIMIT:
        degraded = True
    if degraded:
        log.warning("C(%d,k) system: condition %.3g, residual %.3g", m, cond, residual)

    table = CoeffTable(m, degraded=degraded, condition=cond, residual=residual)
    for k in range(1, m + 1):
        v = float(sol[k - 1])
        unc = abs(v) * cond * max(rel_err, np.finfo(float).eps)
        table.entries[k] = CoeffEntry(v, SYSTEM, unc)
    table.validate()
    return table


def _bracket_midpoints(m):
    out = []
    for k in range(1, m + 1):
        b = coeff_bounds(m, k)
        out.append(0.5 * (b.lower + b.upper_bracket))
    return np.array(out)


def _solve_extended(m, dps):
    ns = range(m + 1, 2 * m + 1)
    with mpmath.workdps(dps):
        mat = mpmath.matrix(m, m)
        rhs = mpmath.matrix(m, 1)
        for i, n in enumerate(ns):
            for j in range(m):
                mat[i, j] = coeff_integral_I_mp(n, m, j + 1, dps)
            rhs[i] = sum(mpmath.binomial(n - 1, j) for j in range(m + 1))
        sol = mpmath.lu_solve(mat, rhs)
        resid = mat * sol - rhs
        residual = float(max(abs(resid[i] / rhs[i]) for i in range(m)))
        cond = float(mpmath.mnorm(mat, 1) * mpmath.mnorm(mpmath.inverse(mat), 1))
    # entry accuracy is set by the working precision, amplified by cond
    rel = max(cond * 10.0 ** (5 - dps), np.finfo(float).eps)
    degraded = rel > 1e-9 or residual > RESIDUAL_LIMIT
    if degraded:
        log.warning("C(%d,k) system at %d digits: condition %.3g", m, dps, cond)
    table = CoeffTable(m, degraded=degraded, condition=cond, residual=residual)
    for k in range(1, m + 1):
        v = float(sol[k - 1])
        table.entries[k] = CoeffEntry(v, SYSTEM, abs(v) * rel)
    table.validate()
    return table


def closed_form_table(m: int) -> CoeffTable | None:
    """Table built only from closed forms; None if some k has none (m >= 4)."""
    table = CoeffTable(m)
    for k in range(1, m + 1):
        v = coeff_closed_form(m, k)
        if v is None:
            return None
        table.entries[k] = CoeffEntry(v, CLOSED, 0.0)
    return table


@lru_cache(maxsize=64)
def _default_table(m: int) -> CoeffTable:
    table = closed_form_table(m)
    if table is not None:
        return table
    system = coeff_solve_linear_system(m)
    for k in range(1, m + 1):
        v = coeff_closed_form(m, k)
        if v is not None:
            system.entries[k] = CoeffEntry(v, CLOSED, 0.0)
    return system


def default_table(m: int) -> CoeffTable:
    """Closed forms where available, linear-system values elsewhere (cached)."""
    t = _default_table(m)
    return CoeffTable(t.m, dict(t.entries), t.degraded, t.condition, t.residual)


def _centered_volumes(b: np.ndarray) -> np.ndarray:
    """vol_k(conv b_i) where the family is centered, 0 elsewhere.

    ``b`` has shape (N, k+1, k). The origin's barycentric coordinates solve
    [b_1 ... b_{k+1}; 1 ... 1] mu = (0, ..., 0, 1).
    """
    nsamp, kp1, k = b.shape
    edges = b[:, 1:, :] - b[:, :1, :]
    vol = np.abs(np.linalg.det(edges)) / math.factorial(k)
    mat = np.concatenate([np.swapaxes(b, 1, 2), np.ones((nsamp, 1, kp1))], axis=1)
    ok = np.abs(np.linalg.det(mat)) > 1e-12
    out = np.zeros(nsamp)
    if not ok.any():
        return out
    rhs = np.zeros((int(ok.sum()), kp1, 1))
    rhs[:, -1, 0] = 1.0
    mu = np.linalg.solve(mat[ok], rhs)[..., 0]
    resid = np.abs(np.einsum("nij,nj->ni", mat[ok], mu) - rhs[..., 0]).max(axis=1)
    centered = (mu > 1e-12).all(axis=1) & (resid < 1e-10)
    idx = np.flatnonzero(ok)[centered]
    out[idx] = vol[idx]
    return out


class _SimplexMoment:
    """Chunk worker returning (count, sum, sum of squares); picklable."""

    def __init__(self, m: int, k: int):
        self.m, self.k = m, k

    def __call__(self, rng, size):
        k = self.k
        if k == 1:
            b = rng.choice([-1.0, 1.0], size=(size, 2, 1))
        else:
            b = uniform_sphere(rng, (size, k + 1), k - 1)
        x = _centered_volumes(b) ** (self.m - k + 1)
        return np.array([x.size, x.sum(), (x * x).sum()])


def coeff_prefactor(m: int, k: int) -> float:
    """(k!)^{m-k+1} / O_m^k * G_{k,m} * O_{k-1}^{k+1}."""
    logf = ((m - k + 1) * math.lgamma(k + 1) - k * log_sphere_volume(m)
            + (k + 1) * log_sphere_volume(k - 1))
    return math.exp(logf) * grassmann_volume(k, m)


def coeff_monte_carlo(m: int, k: int, samples: int, seed: int, workers: int = 1) -> McEstimate:
    """Estimate C(m, k) by sampling k+1 uniform points on S^{k-1}.

    C(m,k) = prefactor * E[ vol_k(simplex)^{m-k+1} * 1{simplex contains 0} ].
    """
    _check(m, k)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    parts = run_chunks(_SimplexMoment(m, k), samples, seed, workers)
    count, total, total_sq = np.sum(parts, axis=0)
    est = mean_estimate(int(count), float(total), float(total_sq), seed, coeff_prefactor(m, k))
    if total == 0.0:
        est.std_error = math.inf
    return est


def monte_carlo_table(m: int, samples: int, seed: int, workers: int = 1) -> CoeffTable:
    table = CoeffTable(m)
    for k in range(1, m + 1):
        est = coeff_monte_carlo(m, k, samples, seed + k, workers)
        table.entries[k] = CoeffEntry(est.value, MONTE_CARLO, est.std_error)
    return table


def determinant_moment_target(m: int, k: int) -> float:
    """E|det B|^{m-k+1} for k x k B with rows uniform on S^{k-1}: (O_m/O_{k-1})^k / G_{k,m+1}."""
    _check(m, k)
    return (sphere_volume(m) / sphere_volume(k - 1)) ** k / grassmann_volume(k, m + 1)
