"""Comparisons between interacting, i.i.d. and limiting extremes, as check records."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Optional

import numpy as np

from ..extremes import order_statistics
from ..limits import TailParams, topk_joint_prob
from .report import CheckRecord
from .stats import binomial_se

__all__ = [
    "IntermediateTrend",
    "intermediate_order_check",
    "intermediate_trend_from_kth",
    "joint_exceedance_frequency",
    "sqrt_rank",
    "topk_comparison",
]


def joint_exceedance_frequency(top: np.ndarray, thresholds) -> float:
    """Fraction of rows with ``top[:, j] >= x_j`` for every ``j``."""
    x = np.asarray(thresholds, dtype=float)
    top = np.asarray(top, dtype=float)
    if top.ndim != 2 or top.shape[1] < x.size:
        raise ValueError(f"need an (R, >= {x.size}) array of descending order statistics")
    return float(np.mean(np.all(top[:, : x.size] >= x, axis=1)))


def topk_comparison(
    interacting_top,
    iid_top,
    thresholds,
    tail: TailParams,
    z: float = 3.0,
    limit_slack: float = 0.02,
    truncation: int = 40,
) -> list[CheckRecord]:
    """Joint top-k exceedance frequencies: interacting vs i.i.d. vs the Poisson limit.

    Inputs are ``(R, >= k)`` arrays of descending normalised order statistics.
    The two systems must agree within ``z`` combined binomial standard
    errors; the i.i.d. frequency must be within ``z`` standard errors plus
    ``limit_slack`` of the limit, which absorbs the slow finite-N approach to
    the limit. The interacting-vs-limit record is informational.
    """
    k = len(thresholds)
    ri, rd = len(interacting_top), len(iid_top)
    fi = joint_exceedance_frequency(interacting_top, thresholds)
    fd = joint_exceedance_frequency(iid_top, thresholds)
    se_i, se_d = binomial_se(fi, ri), binomial_se(fd, rd)
    limit = topk_joint_prob(thresholds, tail, truncation)
    detail = {
        "k": k,
        "thresholds": [float(v) for v in thresholds],
        "freq_interacting": fi,
        "freq_iid": fd,
        "se_interacting": se_i,
        "se_iid": se_d,
        "limit": limit.value,
        "limit_truncation_bound": limit.error_bound,
    }
    gap = abs(fi - fd)
    tol = z * math.hypot(se_i, se_d)
    records = [
        CheckRecord(f"top{k}_interacting_vs_iid", gap, tol, gap <= tol, {"interacting": ri, "iid": rd}, True, "<=", detail)
    ]
    for label, f, se, n, mandatory in (("iid", fd, se_d, rd, True), ("interacting", fi, se_i, ri, False)):
        gap = abs(f - limit.value)
        tol = z * se + limit_slack
        records.append(
            CheckRecord(f"top{k}_{label}_vs_limit", gap, tol, gap <= tol, {label: n}, mandatory, "<=", detail)
        )
    return records


def sqrt_rank(n: int) -> int:
    return math.ceil(math.sqrt(n))


@dataclass(frozen=True)
class IntermediateTrend:
    ns: tuple
    ranks: tuple
    frequencies: tuple
    std_errors: tuple
    threshold: float

    @property
    def nonincreasing_within_noise(self) -> bool:
        """Each step up is at most two combined standard errors."""
        f, s = self.frequencies, self.std_errors
        return all(f[j + 1] <= f[j] + 2.0 * math.hypot(s[j], s[j + 1]) for j in range(len(f) - 1))

    @property
    def strictly_decreasing(self) -> bool:
        f = self.frequencies
        return all(f[j + 1] < f[j] for j in range(len(f) - 1))

    @property
    def halved(self) -> bool:
        return self.frequencies[-1] < 0.5 * self.frequencies[0]


def intermediate_trend_from_kth(kth_by_n: Mapping[int, np.ndarray], ranks: Mapping[int, int], x: float) -> IntermediateTrend:
    """Trend of ``P(k(N)-th normalised order statistic >= x)`` from precomputed k-th values."""
    ns = tuple(sorted(kth_by_n))
    if len(ns) < 3:
        raise ValueError("need at least three particle counts")
    freqs, ses = [], []
    for n in ns:
        v = np.asarray(kth_by_n[n], dtype=float)
        f = float(np.mean(v >= x))
        freqs.append(f)
        ses.append(binomial_se(f, v.size))
    return IntermediateTrend(ns, tuple(int(ranks[n]) for n in ns), tuple(freqs), tuple(ses), float(x))


def intermediate_order_check(
    normalized_by_n: Mapping[int, np.ndarray],
    x: float,
    rank: Optional[Callable[[int], int]] = None,
) -> IntermediateTrend:
    """Exceedance frequencies of a growing rank ``k(N)`` (default ``ceil(sqrt(N))``).

    ``normalized_by_n`` maps each particle count to an ``(R, N)`` array of
    normalised endpoints.
    """
    rank = rank or sqrt_rank
    kth, ranks = {}, {}
    for n, rows in normalized_by_n.items():
        rows = np.asarray(rows, dtype=float)
        k = rank(n)
        ranks[n] = k
        kth[n] = np.array([order_statistics(row, k)[-1] for row in rows])
    return intermediate_trend_from_kth(kth, ranks, x)
