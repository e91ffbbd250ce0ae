"""Seeded random streams, chunked evaluation and the Monte Carlo estimate record."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

RNG_ALGORITHM = "numpy.random.PCG64 via SeedSequence(seed, spawn_key=(chunk,))"
DEFAULT_CHUNK = 10_000


def stream(seed: int, index: int) -> np.random.Generator:
    """Independent generator for substream ``index`` of ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def uniform_sphere(rng: np.random.Generator, shape, m: int) -> np.ndarray:
    """Array of shape ``(*shape, m+1)`` with rows uniform on S^m."""
    shape = tuple(np.atleast_1d(shape)) if not isinstance(shape, tuple) else shape
    x = rng.standard_normal(shape + (m + 1,))
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    # a zero normal vector has probability zero; redraw defensively
    while np.any(norms == 0.0):
        bad = norms[..., 0] == 0.0
        x[bad] = rng.standard_normal((int(bad.sum()), m + 1))
        norms = np.linalg.norm(x, axis=-1, keepdims=True)
    return x / norms


def chunk_sizes(total: int, chunk: int = DEFAULT_CHUNK) -> list[int]:
    if total < 1:
        raise ValueError("need at least one sample")
    full, rest = divmod(total, chunk)
    return [chunk] * full + ([rest] if rest else [])


def _call(args):
    func, seed, index, size = args
    return func(stream(seed, index), size)


def run_chunks(func, total: int, seed: int, workers: int = 1, chunk: int = DEFAULT_CHUNK):
    """Evaluate ``func(rng, size)`` on fixed-size chunks and return results in order.

    Chunk ``i`` always draws from substream ``i`` of ``seed`` so the merged
    output does not depend on ``workers``. ``func`` must be picklable when
    ``workers > 1``.
    """
    jobs = [(func, seed, i, size) for i, size in enumerate(chunk_sizes(total, chunk))]
    if workers <= 1 or len(jobs) == 1:
        return [_call(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_call, jobs))


@dataclass
class McEstimate:
    value: float
    std_error: float
    samples: int
    seed: int | None
    extra: dict = field(default_factory=dict)

    @property
    def ci95(self) -> tuple[float, float]:
        return (self.value - 1.96 * self.std_error, self.value + 1.96 * self.std_error)

    def within(self, target: float, nsigma: float = 3.0, sigma: float | None = None) -> bool:
        s = self.std_error if sigma is None else sigma
        return abs(self.value - target) <= nsigma * s

    def to_record(self, estimator: str, params: dict) -> dict:
        return {
            "estimator": estimator,
            "params": params,
            "value": self.value,
            "std_error": self.std_error,
            "ci95": list(self.ci95),
            "seed": self.seed,
            "trials": self.samples,
            "rng": RNG_ALGORITHM,
            **({"extra": self.extra} if self.extra else {}),
        }


def mean_estimate(count: int, total: float, total_sq: float, seed, scale: float = 1.0,
                  **extra) -> McEstimate:
    """Sample mean with standard error from the sample variance."""
    if count == 0:
        return McEstimate(math.nan, math.inf, 0, seed, dict(extra))
    mean = total / count
    var = max(total_sq / count - mean * mean, 0.0)
    if count > 1:
        var *= count / (count - 1)
    return McEstimate(scale * mean, scale * math.sqrt(var / count), count, seed, dict(extra))


def binomial_sigma(p: float, count: int) -> float:
    if count <= 0:
        return math.inf
    p = min(max(p, 0.0), 1.0)
    return math.sqrt(p * (1.0 - p) / count)
