"""Sphere volumes, cap fractions, Grassmannian volumes and Gamma bounds."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import betainc

# Above this size binomials and factorials are handled through lgamma.
EXACT_INT_LIMIT = 60


def log_sphere_volume(m: int) -> float:
    if m < 0:
        raise ValueError(f"sphere dimension must be >= 0, got {m}")
    return math.log(2.0) + 0.5 * (m + 1) * math.log(math.pi) - math.lgamma(0.5 * (m + 1))


def sphere_volume(m: int) -> float:
    """m-dimensional volume O_m of the unit sphere S^m in R^{m+1}."""
    if m < 0:
        raise ValueError(f"sphere dimension must be >= 0, got {m}")
    if m <= 170:
        return 2.0 * math.pi ** (0.5 * (m + 1)) / math.gamma(0.5 * (m + 1))
    return math.exp(log_sphere_volume(m))


def alpha_m(m: int) -> float:
    """2 O_{m-1} / O_m, the slope of the cap fraction at t = 0."""
    return 2.0 * math.exp(log_sphere_volume(m - 1) - log_sphere_volume(m))


def binom(n: int, k: int) -> float:
    if k < 0 or k > n:
        return 0.0
    if n <= EXACT_INT_LIMIT:
        return float(math.comb(n, k))
    return math.exp(log_binom(n, k))


def log_binom(n: int, k: int) -> float:
    if k < 0 or k > n:
        return -math.inf
    if n <= EXACT_INT_LIMIT:
        return math.log(math.comb(n, k))
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(np.isnan(t)) or np.any(t < -1.0) or np.any(t > 1.0):
        raise ValueError("cosine t must lie in [-1, 1]")
    return t


def cap_fraction(m: int, t):
    """Fraction of S^m covered by a cap of angular radius arccos(t).

    For t >= 0 this is ``0.5 * I_{1-t^2}(m/2, 1/2)``, taken in complementary
    form for small t; negative t is handled by the complement. Accepts scalars or arrays.
    """
    if m < 1:
        raise ValueError(f"cap_fraction needs m >= 1, got {m}")
    t = _check_t(t)
    a = np.abs(t)
    sq = a * a
    with np.errstate(invalid="ignore"):
        # near t = 0 the argument 1 - t^2 rounds away the information, so
        # switch to the complementary form I_x(a, b) = 1 - I_{1-x}(b, a)
        half = np.where(sq < 0.5, 0.5 - 0.5 * betainc(0.5, 0.5 * m, sq),
                        0.5 * betainc(0.5 * m, 0.5, (1.0 - a) * (1.0 + a)))
    out = np.where(t >= 0, half, 1.0 - half)
    return float(out) if out.ndim == 0 else out


def log_cap_fraction(m: int, t):
    """ln of cap_fraction, accurate when the cap is tiny (t close to 1)."""
    t = _check_t(t)
    with np.errstate(divide="ignore"):
        out = np.log(cap_fraction(m, t))
    return float(out) if np.ndim(out) == 0 else out


def cap_fraction_quad(m: int, t: float, rel_tol: float = 1e-13) -> float:
    """Cap fraction by direct quadrature of sin^{m-1} over [0, arccos t].

    Independent of the incomplete-beta route in :func:`cap_fraction`; used as
    its oracle.
    """
    from .quad import QuadSpec, integrate

    if m < 1:
        raise ValueError(f"cap_fraction needs m >= 1, got {m}")
    t = float(_check_t(t))
    theta = math.acos(t)
    if theta == 0.0:
        return 0.0
    res = integrate(lambda x: np.sin(x) ** (m - 1), 0.0, theta,
                    QuadSpec(rel_tol=rel_tol, abs_tol=0.0))
    return math.exp(log_sphere_volume(m - 1) - log_sphere_volume(m)) * res.value


def grassmann_volume(k: int, m_plus_1: int) -> float:
    """Volume of the Grassmannian of k-planes in R^{m+1}.

    O_{m+1-k} ... O_m / (O_0 ... O_{k-1}).
    """
    m = m_plus_1 - 1
    if not 1 <= k <= m_plus_1:
        raise ValueError(f"need 1 <= k <= {m_plus_1}, got k={k}")
    num = sum(log_sphere_volume(j) for j in range(m + 1 - k, m + 1))
    den = sum(log_sphere_volume(j) for j in range(0, k))
    return math.exp(num - den)


def gamma_half_bounds(r: int) -> tuple[float, float]:
    """Bracket for Gamma((r+1)/2) from double-factorial estimates.

    lower = r^{1/4} 2^{-(r-1)/2} sqrt((r-1)!), upper = sqrt(pi/2) * lower.
    Evaluated in log space so large r does not overflow (returns inf past
    the float range).
    """
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    log_lower = 0.25 * math.log(r) - 0.5 * (r - 1) * math.log(2.0) + 0.5 * math.lgamma(r)
    log_upper = log_lower + 0.5 * math.log(math.pi / 2.0)
    return _safe_exp(log_lower), _safe_exp(log_upper)


def _safe_exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def gamma_half_integer(r: int) -> float:
    """Gamma((r+1)/2) for integer r >= 0 via the half-integer recurrence."""
    if r < 0:
        raise ValueError("r must be >= 0")
    if r % 2 == 1:
        # (r+1)/2 is an integer
        return float(math.factorial((r - 1) // 2))
    value = math.sqrt(math.pi)
    x = 0.5
    while x < 0.5 * (r + 1) - 1e-9:
        value *= x
        x += 1.0
    return value
