"""Two-sample and goodness-of-fit statistics used by the experiment checks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "CountTest",
    "binomial_se",
    "count_distribution_test",
    "ks_one_sample",
    "ks_two_sample",
    "ks_two_sample_threshold",
]


def _sample(x, label):
    arr = np.asarray(x, dtype=float).ravel()
    if arr.size == 0:
        raise ValueError(f"{label} is empty")
    return arr


def ks_two_sample(sample_a, sample_b) -> float:
    """Sup-distance between the two empirical CDFs."""
    a = np.sort(_sample(sample_a, "sample_a"))
    b = np.sort(_sample(sample_b, "sample_b"))
    pooled = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, pooled, side="right") / a.size
    cdf_b = np.searchsorted(b, pooled, side="right") / b.size
    return float(np.max(np.abs(cdf_a - cdf_b)))


def ks_two_sample_threshold(n: int, m: int, coefficient: float = 1.63) -> float:
    """Asymptotic critical value ``c sqrt((n + m) / (n m))``; ``c = 1.63`` is the 1% level."""
    return coefficient * math.sqrt((n + m) / (n * m))


def ks_one_sample(sample, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    x = np.sort(_sample(sample, "sample"))
    n = x.size
    f = np.asarray(cdf(x), dtype=float)
    upper = np.arange(1, n + 1) / n - f
    lower = f - np.arange(n) / n
    return float(max(upper.max(), lower.max()))


def binomial_se(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n)


@dataclass(frozen=True)
class CountTest:
    """Poisson diagnostics for region counts.

    ``mean_z`` is the standardised gap between the sample mean and the target
    intensity; ``dispersion`` is variance over mean (1 for Poisson counts, NaN
    when every count is zero).
    """

    mean_z: float
    dispersion: float
    mean: float
    variance: float
    target: float
    n: int

    def poisson_like(self, band: tuple[float, float] = (0.85, 1.15)) -> bool:
        return bool(band[0] <= self.dispersion <= band[1])


def count_distribution_test(counts, target_mean: float, min_count: int = 100) -> CountTest:
    c = np.asarray(counts, dtype=float).ravel()
    if c.size < min_count:
        raise ValueError(f"need at least {min_count} counts, got {c.size}")
    mean = float(np.mean(c))
    var = float(np.var(c, ddof=1))
    se = math.sqrt(var / c.size)
    gap = mean - target_mean
    if se > 0:
        z = gap / se
    else:
        z = 0.0 if gap == 0 else math.copysign(math.inf, gap)
    dispersion = var / mean if mean > 0 else math.nan
    return CountTest(mean_z=z, dispersion=dispersion, mean=mean, variance=var, target=target_mean, n=c.size)
