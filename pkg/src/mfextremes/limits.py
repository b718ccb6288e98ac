"""Limit laws for normalised extremes: GEV, Poisson intensity, top-k probabilities.

Everything is expressed through the tail function

    tau(x) = (1 + gamma x)^(-1/gamma)        (exp(-x) when gamma = 0),

which is the expected number of limit points above ``x``: ``Gamma(x) =
exp(-tau(x))`` and the intensity of ``(a, b] x (c, d]`` is
``(b - a) (tau(c) - tau(d))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import poisson

from .extremes import RegionSet

__all__ = [
    "GAMMA_ZERO_CUTOFF",
    "PoissonSample",
    "TailParams",
    "TopKProbability",
    "exceedance_counts",
    "gev_cdf",
    "lambda_weights",
    "poisson_intensity",
    "sample_poisson_pattern",
    "sample_spacings_limit",
    "spacings_transform",
    "tail_function",
    "topk_joint_prob",
]

GAMMA_ZERO_CUTOFF = 1e-10


@dataclass(frozen=True)
class TailParams:
    """Extreme value index and the GEV support it implies."""

    gamma: float = 0.0

    @property
    def is_gumbel(self) -> bool:
        return abs(self.gamma) < GAMMA_ZERO_CUTOFF

    @property
    def lower(self) -> float:
        if self.is_gumbel or self.gamma < 0:
            return -math.inf
        return -1.0 / self.gamma

    @property
    def upper(self) -> float:
        if self.is_gumbel or self.gamma > 0:
            return math.inf
        return -1.0 / self.gamma


def tail_function(x, tail: TailParams):
    """``tau(x)``, with ``+inf`` at or below the lower endpoint and 0 at or above the upper one."""
    x = np.asarray(x, dtype=float)
    if tail.is_gumbel:
        with np.errstate(over="ignore"):
            return np.exp(-x)
    g = tail.gamma
    base = 1.0 + g * x
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = np.where(base > 0, np.power(np.where(base > 0, base, 1.0), -1.0 / g), np.nan)
    if g > 0:
        out = np.where(base <= 0, np.inf, out)
    else:
        out = np.where(base <= 0, 0.0, out)
    return out


def gev_cdf(x, tail: TailParams):
    """``Gamma(x) = exp(-tau(x))``; 0 below the support, 1 above it."""
    return np.exp(-tail_function(x, tail))


def _clip_to_support(v: float, tail: TailParams) -> float:
    return min(max(v, tail.lower), tail.upper)


def poisson_intensity(region: RegionSet, tail: TailParams) -> float:
    """Limit intensity ``nu`` of a union of disjoint rectangles.

    Value bounds are clipped to the support first, so mass outside it is 0.
    The result is ``inf`` when a rectangle reaches down to an endpoint where
    ``tau`` blows up (``-inf`` for gamma <= 0, ``-1/gamma`` for gamma > 0).
    """
    total = 0.0
    for a, b, c, d in region:
        c, d = _clip_to_support(c, tail), _clip_to_support(d, tail)
        if d <= c:
            continue
        total += (b - a) * (float(tail_function(c, tail)) - float(tail_function(d, tail)))
    return total


def _check_thresholds(thresholds, tail: TailParams) -> np.ndarray:
    x = np.asarray(thresholds, dtype=float).ravel()
    if x.size < 1:
        raise ValueError("need at least one threshold")
    if np.any(np.diff(x) > 0):
        raise ValueError(f"thresholds must be nonincreasing, got {x.tolist()}")
    if np.any(~np.isfinite(tail_function(x, tail))):
        raise ValueError(f"thresholds must lie above the lower support endpoint {tail.lower}")
    return x


def lambda_weights(thresholds, tail: TailParams) -> np.ndarray:
    """Limit means ``lambda_j = tau(x_j) - tau(x_{j-1})`` of the counts in ``[x_j, x_{j-1})``, with ``x_0 = inf``."""
    x = _check_thresholds(thresholds, tail)
    tau = tail_function(x, tail)
    return np.diff(np.concatenate([[0.0], tau]))


@dataclass(frozen=True)
class TopKProbability:
    value: float
    error_bound: float
    truncation: int


def topk_joint_prob(thresholds, tail: TailParams, truncation: int = 40) -> TopKProbability:
    """Limit of ``P(V_(1) >= x_1, ..., V_(k) >= x_k)`` for normalised order statistics.

    Sums ``prod_j Pois(i_j; lambda_j)`` over ``{i : i_1 + ... + i_j >= j for all j}``
    with every ``i_j <= truncation``. The dynamic programme tracks the running
    partial sum capped at ``k`` (beyond ``k`` every later constraint holds).
    ``error_bound`` is ``sum_j P(Pois(lambda_j) > truncation)``.
    """
    lam = lambda_weights(thresholds, tail)
    k = lam.size
    if truncation < k:
        raise ValueError(f"truncation {truncation} must be >= k = {k}")
    counts = np.arange(truncation + 1)
    state = np.zeros(k + 1)
    state[0] = 1.0
    for j, lj in enumerate(lam, start=1):
        pmf = poisson.pmf(counts, lj) if lj > 0 else (counts == 0).astype(float)
        nxt = np.zeros(k + 1)
        for s in range(k + 1):
            if state[s] == 0.0:
                continue
            targets = np.minimum(s + counts, k)
            np.add.at(nxt, targets, state[s] * pmf)
        nxt[:j] = 0.0
        state = nxt
    value = float(min(max(state.sum(), 0.0), 1.0))
    bound = float(sum(poisson.sf(truncation, lj) for lj in lam))
    return TopKProbability(value=value, error_bound=bound, truncation=truncation)


def spacings_transform(partial_sums, tail: TailParams) -> np.ndarray:
    """Map partial sums ``S_j`` of unit exponentials to ``(S_j^{-gamma} - 1) / gamma``."""
    s = np.asarray(partial_sums, dtype=float)
    if tail.is_gumbel:
        return -np.log(s)
    return np.expm1(-tail.gamma * np.log(s)) / tail.gamma


def sample_spacings_limit(k: int, tail: TailParams, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """Draw the limit of the top-``k`` normalised order statistics.

    Returns shape ``(k,)``, or ``(size, k)`` when ``size`` is given; each row
    is strictly decreasing.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    shape = (k,) if size is None else (size, k)
    sums = np.cumsum(rng.standard_exponential(shape), axis=-1)
    return spacings_transform(sums, tail)


@dataclass(frozen=True)
class PoissonSample:
    index_fractions: np.ndarray
    values: np.ndarray

    @property
    def count(self) -> int:
        return self.values.size


def sample_poisson_pattern(cut: float, tail: TailParams, rng: np.random.Generator) -> PoissonSample:
    """Points of the limit Poisson measure with value above ``cut``.

    Values are generated in decreasing order from exponential partial sums
    until one falls to ``cut`` or below; index coordinates are uniform on
    ``(0, 1]``.
    """
    if not math.isfinite(float(tail_function(cut, tail))):
        raise ValueError(f"cut {cut} is not above the lower support endpoint {tail.lower}")
    values = []
    s = 0.0
    while True:
        s += rng.standard_exponential()
        v = float(spacings_transform(s, tail))
        if v <= cut:
            break
        values.append(v)
    index = 1.0 - rng.uniform(size=len(values))
    return PoissonSample(index_fractions=index, values=np.asarray(values, dtype=float))


def exceedance_counts(samples: Sequence[PoissonSample], bands: Sequence[tuple[float, float]]) -> np.ndarray:
    """Counts of each sample's values in the half-open bands ``(c, d]``; shape ``(len(samples), len(bands))``."""
    out = np.zeros((len(samples), len(bands)), dtype=np.int64)
    for i, smp in enumerate(samples):
        for j, (c, d) in enumerate(bands):
            out[i, j] = np.count_nonzero((smp.values > c) & (smp.values <= d))
    return out
