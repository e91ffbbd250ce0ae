"""Adaptive Gauss-Kronrod (7/15) quadrature and the coverage kernel integrals."""

from __future__ import annotations

import dataclasses
import heapq
import math
from dataclasses import dataclass

import numpy as np

from .specfun import log_cap_fraction

# Kronrod 15-point nodes (non-negative half) and weights; Gauss 7-point weights
# sit on the odd-indexed Kronrod nodes.
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
W_KRONROD = np.concatenate([_WK[:-1], _WK[::-1]])
W_GAUSS = np.zeros(15)
W_GAUSS[1:7:2] = _WG[:3]
W_GAUSS[7] = _WG[3]
W_GAUSS[9:15:2] = _WG[2::-1]

MAX_INTERVALS = 5000


@dataclass(frozen=True)
class QuadSpec:
    rel_tol: float = 1e-12
    abs_tol: float = 1e-15
    max_depth: int = 60
    substitute_endpoint: bool | None = None  # None = decide automatically

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be > 0")
        if not self.abs_tol >= 0:
            raise ValueError("abs_tol must be >= 0")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")


@dataclass(frozen=True)
class QuadResult:
    value: float
    error_estimate: float
    evaluations: int
    converged: bool


class IntegrandError(ArithmeticError):
    pass


def _rule(f, a, b):
    c = 0.5 * (a + b)
    h = 0.5 * (b - a)
    x = c + h * NODES
    y = np.array(np.broadcast_to(np.asarray(f(x), dtype=float), x.shape))
    if np.any(np.isnan(y)):
        bad = x[np.isnan(y)]
        raise IntegrandError(f"integrand returned NaN at x={bad[0]!r} on [{a}, {b}]")
    # A node that rounded onto an endpoint of a tiny interval hit the
    # singularity itself: drop it and flag the interval as unresolvable.
    at_end = np.isinf(y) & ((x <= a) | (x >= b))
    y[at_end] = 0.0
    if not np.all(np.isfinite(y)):
        bad = x[~np.isfinite(y)]
        raise IntegrandError(f"integrand is infinite at x={bad[0]!r} on [{a}, {b}]")
    k = h * float(np.dot(W_KRONROD, y))
    g = h * float(np.dot(W_GAUSS, y))
    return k, math.inf if at_end.any() else abs(k - g)


def integrate(f, a: float, b: float, spec: QuadSpec = QuadSpec()) -> QuadResult:
    """Globally adaptive 15-point Gauss-Kronrod integration of ``f`` on [a, b].

    ``f`` is called with a numpy array of abscissae and must return an array
    of the same shape (a scalar is broadcast). Endpoints are never evaluated.
    With ``spec.substitute_endpoint`` set, x = a + (b-a)(1-cos u)/2 is applied
    first, which removes inverse-square-root endpoint singularities.
    """
    a = float(a)
    b = float(b)
    if not a <= b:
        raise ValueError(f"need a <= b, got [{a}, {b}]")
    if a == b:
        return QuadResult(0.0, 0.0, 0, True)
    if spec.substitute_endpoint:
        half = 0.5 * (b - a)

        def mapped(u):
            return f(a + half * (1.0 - np.cos(u))) * (half * np.sin(u))

        return integrate(mapped, 0.0, math.pi,
                         dataclasses.replace(spec, substitute_endpoint=False))

    value, err = _rule(f, a, b)
    evaluations = 15
    # heap of (-err, a, b, value, err, depth)
    heap = [(-err, a, b, value, err, 0)]
    frozen_val: list[float] = []
    frozen_err = 0.0

    def tolerance(total):
        return max(spec.rel_tol * abs(total), spec.abs_tol)

    while heap:
        total = math.fsum([item[3] for item in heap] + frozen_val)
        total_err = math.fsum(item[4] for item in heap) + frozen_err
        if total_err <= tolerance(total):
            return QuadResult(total, total_err, evaluations, True)
        if len(heap) + len(frozen_val) >= MAX_INTERVALS:
            break
        _, lo, hi, v, e, depth = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if depth >= spec.max_depth or math.isinf(e) or not lo < mid < hi:
            frozen_val.append(v)
            frozen_err += e
            continue
        v1, e1 = _rule(f, lo, mid)
        v2, e2 = _rule(f, mid, hi)
        evaluations += 30
        heapq.heappush(heap, (-e1, lo, mid, v1, e1, depth + 1))
        heapq.heappush(heap, (-e2, mid, hi, v2, e2, depth + 1))

    total = math.fsum([item[3] for item in heap] + frozen_val)
    total_err = math.fsum(item[4] for item in heap) + frozen_err
    return QuadResult(total, total_err, evaluations, total_err <= tolerance(total))


def _power(base, expo):
    """base**expo for arrays, with 0**0 = 1 and no warnings at base = 0."""
    if expo == 0:
        return np.ones_like(base)
    with np.errstate(divide="ignore"):
        return np.power(base, expo)


def coverage_kernel(n: int, m: int, k: int):
    """Split t^{m-k} (1-t^2)^{km/2-1} lambda_m(t)^{n-k-1} into (g, e_r).

    ``g(t) = t^{m-k} lambda_m(t)^{n-k-1}`` is vectorised; the weight
    (1-t^2)^{e_r} is applied by :func:`integrate_weighted`.
    """
    e_t = m - k
    e_l = n - k - 1

    def g(t):
        t = np.asarray(t, dtype=float)
        out = _power(t, e_t)
        if e_l:
            out = out * np.exp(e_l * log_cap_fraction(m, t))
        return out

    return g, 0.5 * k * m - 1.0


def infeasible_kernel(n: int, m: int):
    """Split (1-t^2)^{(m^2-2)/2} (1-lambda_m(t))^{n-m-1} into (g, e_r)."""
    e_l = n - m - 1

    def g(t):
        t = np.asarray(t, dtype=float)
        if not e_l:
            return np.ones_like(t)
        return np.exp(e_l * log_cap_fraction(m, -t))

    return g, 0.5 * (m * m - 2)


def integrate_weighted(g, e_r: float, lo: float, hi: float,
                       spec: QuadSpec = QuadSpec()) -> QuadResult:
    """Integrate g(t) (1-t^2)^{e_r} over [lo, hi] with 0 <= lo <= hi <= 1.

    When e_r < 0 (or the spec forces it) the substitution t = cos(theta) is
    used, turning the weight into sin(theta)^{2 e_r + 1}, which is bounded
    for e_r >= -1/2.
    """
    if not 0.0 <= lo <= hi <= 1.0:
        raise ValueError(f"need 0 <= lo <= hi <= 1, got [{lo}, {hi}]")
    if lo == hi:
        return QuadResult(0.0, 0.0, 0, True)
    substitute = spec.substitute_endpoint
    if substitute is None:
        substitute = e_r < 0
    inner = dataclasses.replace(spec, substitute_endpoint=False)
    if not substitute:
        return integrate(lambda t: g(t) * _power(1.0 - t * t, e_r), lo, hi, inner)
    return integrate(lambda th: g(np.cos(th)) * _power(np.sin(th), 2.0 * e_r + 1.0),
                     math.acos(hi), math.acos(lo), inner)


def integrate_coverage_kernel(n: int, m: int, k: int, lo: float, hi: float,
                              spec: QuadSpec = QuadSpec()) -> QuadResult:
    """Integral of t^{m-k} (1-t^2)^{km/2-1} lambda_m(t)^{n-k-1} over [lo, hi]."""
    if not 1 <= k <= m < n:
        raise ValueError(f"need 1 <= k <= m < n, got n={n}, m={m}, k={k}")
    g, e_r = coverage_kernel(n, m, k)
    return integrate_weighted(g, e_r, lo, hi, spec)


def integrate_infeasible_kernel(n: int, m: int, lo: float, hi: float,
                                spec: QuadSpec = QuadSpec()) -> QuadResult:
    """Integral of (1-t^2)^{(m^2-2)/2} (1-lambda_m(t))^{n-m-1} over [lo, hi]."""
    if not 1 <= m < n:
        raise ValueError(f"need 1 <= m < n, got n={n}, m={m}")
    g, e_r = infeasible_kernel(n, m)
    return integrate_weighted(g, e_r, lo, hi, spec)
