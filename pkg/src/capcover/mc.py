"""Monte Carlo estimators for coverage, condition numbers and determinant moments.

Every estimator splits its trials into fixed-size chunks, each drawing from
its own substream of the seed, so results are reproducible for a given seed
regardless of the number of workers.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .coeffs import determinant_moment_target
from .geom import sic_t_batch
from .sampling import McEstimate, mean_estimate, run_chunks, stream, uniform_sphere

log = logging.getLogger(__name__)

ILL_POSED_BAND = 1e-12
DEFAULT_DRAW_CAP = 10_000
CAPS_CHUNK = 500


def _sample_t(rng, size, n, m):
    return sic_t_batch(uniform_sphere(rng, (size, n), m))


def _not_covered(t, alpha):
    # caps of radius alpha fail to cover iff rho(A) <= pi - alpha
    rho = np.arccos(np.clip(t, -1.0, 1.0))
    return rho <= math.pi - alpha


class _CoverageChunk:
    def __init__(self, n, m, alphas):
        self.n, self.m, self.alphas = n, m, tuple(alphas)

    def __call__(self, rng, size):
        t = _sample_t(rng, size, self.n, self.m)
        return np.array([size] + [int(_not_covered(t, a).sum()) for a in self.alphas])


def _check_trials(trials):
    if trials < 1:
        raise ValueError("trials must be >= 1")


def mc_coverage_multi(n: int, m: int, alphas, trials: int, seed: int,
                      workers: int = 1) -> list[McEstimate]:
    """Estimates of p(n, m, alpha) for several alphas from the same instances."""
    _check_trials(trials)
    alphas = [float(a) for a in alphas]
    for a in alphas:
        if not 0.0 <= a <= math.pi:
            raise ValueError(f"alpha must lie in [0, pi], got {a}")
    parts = run_chunks(_CoverageChunk(n, m, alphas), trials, seed, workers)
    tot = np.sum(parts, axis=0)
    out = []
    for hits in tot[1:]:
        hits = int(hits)
        out.append(mean_estimate(trials, hits, hits, seed, hits=hits))
    return out


def mc_coverage(n: int, m: int, alpha: float, trials: int, seed: int,
                workers: int = 1) -> McEstimate:
    """Frequency with which n uniform caps of radius alpha leave S^m uncovered."""
    return mc_coverage_multi(n, m, [alpha], trials, seed, workers)[0]


class _TailChunk:
    def __init__(self, n, m, eps_grid):
        self.n, self.m, self.eps = n, m, np.asarray(eps_grid, dtype=float)

    def __call__(self, rng, size):
        t = _sample_t(rng, size, self.n, self.m)
        ill = np.abs(t) < ILL_POSED_BAND
        feas = (t > 0) & ~ill
        infeas = (t < 0) & ~ill
        a = np.abs(t)[:, None]
        hit = a <= self.eps[None, :]  # C(A) >= 1/eps
        return np.concatenate([[feas.sum(), infeas.sum(), ill.sum()],
                               hit[feas].sum(axis=0), hit[infeas].sum(axis=0)])


@dataclass
class ConditionTails:
    eps: list[float]
    feasible_fraction: McEstimate
    feasible_tail: list[McEstimate]
    infeasible_tail: list[McEstimate]
    ill_posed: int

    def to_records(self, params: dict) -> list[dict]:
        recs = [self.feasible_fraction.to_record("feasible_fraction", params)]
        for e, f, i in zip(self.eps, self.feasible_tail, self.infeasible_tail):
            recs.append(f.to_record("feasible_tail", {**params, "eps": e}))
            recs.append(i.to_record("infeasible_tail", {**params, "eps": e}))
        return recs


def mc_condition_tails(n: int, m: int, eps_grid, trials: int, seed: int,
                       workers: int = 1) -> ConditionTails:
    """Conditional frequencies of C(A) >= 1/eps for feasible and infeasible instances."""
    _check_trials(trials)
    eps = [float(e) for e in eps_grid]
    parts = run_chunks(_TailChunk(n, m, eps), trials, seed, workers)
    tot = np.sum(parts, axis=0).astype(int)
    nf, ni, nill = (int(x) for x in tot[:3])
    k = len(eps)
    fh, ih = tot[3:3 + k], tot[3 + k:]
    frac = mean_estimate(trials, nf, nf, seed)
    feas = [mean_estimate(nf, int(h), int(h), seed) for h in fh]
    infeas = [mean_estimate(ni, int(h), int(h), seed) for h in ih]
    if nill:
        log.info("%d instances in the ill-posed band were excluded", nill)
    return ConditionTails(eps, frac, feas, infeas, nill)


def _covered(rows, m, alpha):
    t = sic_t_batch(rows[None])[0]
    return not _not_covered(np.array([t]), alpha)[0]


class _CapsChunk:
    """Per trial: number of caps drawn until S^m is covered (or the cap is hit)."""

    def __init__(self, m, alpha, draw_cap):
        self.m, self.alpha, self.draw_cap = m, alpha, draw_cap

    def __call__(self, rng, size):
        out = np.empty(size)
        censored = 0
        for i in range(size):
            n, cens = self._one(rng)
            out[i] = n
            censored += cens
        return out, censored

    def _one(self, rng):
        m, alpha, cap = self.m, self.alpha, self.draw_cap
        pts = uniform_sphere(rng, (min(4 * (m + 2), cap),), m)
        while not _covered(pts, m, alpha):
            if len(pts) >= cap:
                return cap, 1
            extra = min(len(pts), cap - len(pts))
            pts = np.vstack([pts, uniform_sphere(rng, (extra,), m)])
        # coverage is monotone in the prefix length: bisect for the first covering prefix
        lo, hi = m + 1, len(pts)  # prefix lo never covers when alpha <= pi/2
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if _covered(pts[:mid], m, alpha):
                hi = mid
            else:
                lo = mid
        return hi, 0


def mc_expected_caps(m: int, alpha: float, trials: int, seed: int,
                     draw_cap: int = DEFAULT_DRAW_CAP, workers: int = 1) -> McEstimate:
    """Estimate E(N(m, alpha)), the number of uniform caps needed to cover S^m.

    Trials still uncovered after ``draw_cap`` caps count as ``draw_cap``; if
    any occur the estimate is only a lower bound and ``extra["censored"]`` is
    nonzero.
    """
    _check_trials(trials)
    if not 0.0 < alpha <= 0.5 * math.pi:
        raise ValueError(f"alpha must lie in (0, pi/2], got {alpha}")
    if draw_cap < m + 2:
        raise ValueError("draw_cap is too small to ever cover")
    parts = run_chunks(_CapsChunk(m, alpha, draw_cap), trials, seed, workers, chunk=CAPS_CHUNK)
    values = np.concatenate([p[0] for p in parts])
    censored = sum(p[1] for p in parts)
    est = mean_estimate(len(values), float(values.sum()), float((values ** 2).sum()), seed,
                        censored=int(censored), lower_bound=bool(censored))
    if censored:
        log.warning("%d of %d trials hit draw_cap=%d; the estimate is a lower bound",
                    censored, trials, draw_cap)
    return est


class _LnCondChunk:
    def __init__(self, n, m):
        self.n, self.m = n, m

    def __call__(self, rng, size):
        t = np.abs(_sample_t(rng, size, self.n, self.m))
        ok = t >= ILL_POSED_BAND
        return -np.log(t[ok]), int((~ok).sum())


def mc_expected_ln_cond(n: int, m: int, trials: int, seed: int, workers: int = 1,
                        bootstrap: int = 1000) -> McEstimate:
    """Sample mean of ln C(A) over instances outside the ill-posed band.

    ``extra`` carries a percentile bootstrap 95% interval and the number of
    excluded ill-posed instances.
    """
    _check_trials(trials)
    parts = run_chunks(_LnCondChunk(n, m), trials, seed, workers)
    x = np.concatenate([p[0] for p in parts])
    ill = sum(p[1] for p in parts)
    est = mean_estimate(len(x), float(x.sum()), float((x * x).sum()), seed, ill_posed=int(ill))
    if len(x) and bootstrap:
        rng = stream(seed, 1 << 30)
        means = np.array([x[rng.integers(0, len(x), len(x))].mean() for _ in range(bootstrap)])
        est.extra["bootstrap_ci95"] = [float(np.quantile(means, 0.025)),
                                       float(np.quantile(means, 0.975))]
    return est


class _DetChunk:
    def __init__(self, m, k):
        self.m, self.k = m, k

    def __call__(self, rng, size):
        k = self.k
        if k == 1:
            B = rng.choice([-1.0, 1.0], size=(size, 1, 1))
        else:
            B = uniform_sphere(rng, (size, k), k - 1)
        x = np.abs(np.linalg.det(B)) ** (self.m - k + 1)
        return np.array([size, x.sum(), (x * x).sum()])


def mc_det_moment(m: int, k: int, trials: int, seed: int, workers: int = 1) -> McEstimate:
    """E|det B|^{m-k+1} for a k x k matrix B with rows uniform on S^{k-1}."""
    if not 1 <= k <= m:
        raise ValueError(f"need 1 <= k <= m, got m={m}, k={k}")
    _check_trials(trials)
    parts = run_chunks(_DetChunk(m, k), trials, seed, workers)
    count, total, total_sq = np.sum(parts, axis=0)
    est = mean_estimate(int(count), float(total), float(total_sq), seed)
    est.extra["target"] = determinant_moment_target(m, k)
    return est
