"""Norming constants, normalised point patterns, region counts and order statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import norm

__all__ = [
    "InsufficientExceedancesError",
    "NormingConstants",
    "PointPattern",
    "RegionSet",
    "build_point_pattern",
    "count_at_least",
    "count_in_region",
    "empirical_norming",
    "gaussian_norming",
    "order_statistics",
    "top_values",
]

ANALYTIC_GAUSSIAN = "analytic-gaussian"
EMPIRICAL_QUANTILE = "empirical-quantile"


class InsufficientExceedancesError(ValueError):
    pass


@dataclass(frozen=True)
class NormingConstants:
    """Scale ``a`` and location ``b`` for ``(x - b) / a`` at particle count ``n``."""

    a: float
    b: float
    n: int
    source: str
    method: str = ""

    def __post_init__(self):
        if not self.a > 0 or not math.isfinite(self.a):
            raise ValueError(f"norming scale must be positive and finite, got {self.a}")
        if not math.isfinite(self.b):
            raise ValueError(f"norming location must be finite, got {self.b}")

    def normalize(self, x):
        return (np.asarray(x, dtype=float) - self.b) / self.a

    def denormalize(self, v):
        return np.asarray(v, dtype=float) * self.a + self.b


def gaussian_norming(n: int, mean: float = 0.0, sd: float = 1.0, method: str = "classical") -> NormingConstants:
    """Norming for maxima of ``n`` i.i.d. ``N(mean, sd^2)`` variables.

    ``method="classical"`` uses the textbook expansion

        a = sd / sqrt(2 ln n),
        b = mean + sd (sqrt(2 ln n) - (ln ln n + ln 4 pi) / (2 sqrt(2 ln n))).

    ``method="quantile"`` uses ``b = mean + sd * Phi^{-1}(1 - 1/n)`` and
    ``a = sd / (n phi(b0))``, which puts exactly one expected exceedance above
    ``b`` and is much closer to the Gumbel limit at moderate ``n``.
    """
    if not sd > 0:
        raise ValueError(f"sd must be positive, got {sd}")
    if method == "classical":
        if n < 3:
            raise ValueError(f"classical Gaussian norming needs n >= 3 (ln ln n > 0), got {n}")
        root = math.sqrt(2.0 * math.log(n))
        a0 = 1.0 / root
        b0 = root - (math.log(math.log(n)) + math.log(4.0 * math.pi)) / (2.0 * root)
    elif method == "quantile":
        if n < 2:
            raise ValueError(f"quantile Gaussian norming needs n >= 2, got {n}")
        b0 = float(norm.isf(1.0 / n))
        a0 = 1.0 / (n * float(norm.pdf(b0)))
    else:
        raise ValueError(f"unknown Gaussian norming method {method!r}")
    return NormingConstants(a=sd * a0, b=mean + sd * b0, n=n, source=ANALYTIC_GAUSSIAN, method=method)


def empirical_norming(sample, n: int, min_exceedances: int = 5) -> NormingConstants:
    """Location from the empirical ``(1 - 1/n)`` quantile, scale from the mean excess above it.

    With ``M`` calibration values, ``b`` is the order statistic of rank
    ``ceil(M (n - 1) / n)`` (1-based, ascending) and ``a`` is the mean of
    ``x - b`` over the values strictly above ``b``.
    """
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    m = x.size
    if m < 10 * n:
        raise ValueError(f"calibration sample of {m} is smaller than 10 * n = {10 * n}")
    rank = -(-(m * (n - 1)) // n)  # integer ceil, avoids 0.9 * 100 rounding
    b = float(x[max(rank, 1) - 1])
    excess = x[x > b] - b
    if excess.size < min_exceedances:
        raise InsufficientExceedancesError(
            f"only {excess.size} calibration values exceed b = {b:.6g}; need {min_exceedances}"
        )
    return NormingConstants(a=float(np.mean(excess)), b=b, n=n, source=EMPIRICAL_QUANTILE, method="mean-excess")


@dataclass(frozen=True)
class PointPattern:
    """Realisation of ``sum_i delta_{(i/N, (X^i - b)/a)}``."""

    index_fractions: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.index_fractions.shape != self.values.shape or self.values.ndim != 1:
            raise ValueError("index_fractions and values must be 1-D arrays of equal length")

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([self.index_fractions, self.values])


def build_point_pattern(endpoints, norming: NormingConstants) -> PointPattern:
    x = np.asarray(endpoints, dtype=float).ravel()
    if x.size != norming.n:
        raise ValueError(f"{x.size} endpoints but norming is for n = {norming.n}")
    n = x.size
    return PointPattern(index_fractions=np.arange(1, n + 1) / n, values=norming.normalize(x))


@dataclass(frozen=True)
class RegionSet:
    """Finite union of disjoint rectangles ``(a, b] x (c, d]`` in ``(0, 1] x R``.

    Value bounds may be infinite.
    """

    rectangles: tuple

    def __init__(self, rectangles: Iterable[Sequence[float]]):
        rects = tuple(tuple(float(v) for v in r) for r in rectangles)
        for r in rects:
            if len(r) != 4:
                raise ValueError(f"rectangle {r} must be (a, b, c, d)")
            a, b, c, d = r
            if not (0.0 <= a < b <= 1.0):
                raise ValueError(f"index interval ({a}, {b}] must satisfy 0 <= a < b <= 1")
            if not c < d:
                raise ValueError(f"value interval ({c}, {d}] must satisfy c < d")
        for i, (a1, b1, c1, d1) in enumerate(rects):
            for a2, b2, c2, d2 in rects[i + 1 :]:
                if not (b1 <= a2 or b2 <= a1 or d1 <= c2 or d2 <= c1):
                    raise ValueError("rectangles in a RegionSet must be pairwise disjoint")
        object.__setattr__(self, "rectangles", rects)

    @classmethod
    def value_band(cls, lower: float, upper: float = math.inf) -> "RegionSet":
        """The marginal region ``(0, 1] x (lower, upper]``."""
        return cls([(0.0, 1.0, lower, upper)])

    def __iter__(self):
        return iter(self.rectangles)

    def __len__(self):
        return len(self.rectangles)


def count_in_region(pattern: PointPattern, region: RegionSet) -> int:
    u, v = pattern.index_fractions, pattern.values
    total = 0
    for a, b, c, d in region:
        total += int(np.count_nonzero((u > a) & (u <= b) & (v > c) & (v <= d)))
    return total


def count_at_least(values, x: float) -> int:
    """``H_N([x, inf))``: number of normalised values ``>= x``."""
    return int(np.count_nonzero(np.asarray(values) >= x))


def order_statistics(endpoints, k: int) -> np.ndarray:
    """The ``k`` largest values, in descending order."""
    x = np.asarray(endpoints, dtype=float).ravel()
    if not 1 <= k <= x.size:
        raise ValueError(f"k = {k} outside 1..{x.size}")
    top = np.partition(x, x.size - k)[x.size - k :]
    return np.sort(top)[::-1]


def top_values(samples, k: int) -> np.ndarray:
    """Row-wise descending top-``k`` of an ``(R, N)`` array."""
    samples = np.asarray(samples, dtype=float)
    if not 1 <= k <= samples.shape[1]:
        raise ValueError(f"k = {k} outside 1..{samples.shape[1]}")
    n = samples.shape[1]
    top = np.partition(samples, n - k, axis=1)[:, n - k :]
    return -np.sort(-top, axis=1)
