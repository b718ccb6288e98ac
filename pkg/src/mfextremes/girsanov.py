"""Change-of-measure weights linking i.i.d. copies to the interacting system.

Under the reference measure the copies solve the limit equation. Reweighting by

    Z = exp(M - <M>/2),   M = sum_i sum_k dB^i_k dW^i_k,   <M> = sum_i sum_k (dB^i_k)^2 dt,

with ``dB^i_k = B(t_k, X^i, H^i(mu^N)) - B(t_k, X^i, H^i(mu))``, turns them into
the interacting system. On an Euler grid this is the exact likelihood ratio of
the two Markov chains, so ``E[Z] = 1`` holds without discretisation bias.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelSpec
from .sde import Law, LawCloud, TrajectoryBatch, _law_mean_field, mean_field_values

__all__ = [
    "WeightRecord",
    "delta_b",
    "effective_sample_size",
    "girsanov_weight",
    "reweighted_expectation",
]


@dataclass(frozen=True)
class WeightRecord:
    log_weight: float
    martingale: float
    quad_variation: float
    contributions: np.ndarray  # (N, 2): per-particle (sum dB dW, sum dB^2 dt)

    def __post_init__(self):
        if self.quad_variation < 0:
            raise ValueError(f"negative quadratic variation {self.quad_variation}")

    @property
    def weight(self) -> float:
        return math.exp(self.log_weight)


def _law_matches(law, batch: TrajectoryBatch):
    if isinstance(law, LawCloud):
        if law.grid.shape != batch.grid.shape or not np.allclose(law.grid, batch.grid, rtol=0, atol=1e-12):
            raise ValueError("law and batch are on different time grids")


def delta_b(batch: TrajectoryBatch, law: Law, model: ModelSpec, k: int) -> np.ndarray:
    """Drift gap ``dB^i`` at grid index ``k`` for every copy ``i``.

    The empirical measure is that of the copies in ``batch`` themselves.
    """
    _law_matches(law, batch)
    t = float(batch.grid[k])
    x = batch.values[:, : k + 1]
    r_empirical = mean_field_values(x, x, t, model)
    r_law = _law_mean_field(law, k, t, x, model)
    return model.drift_interaction(t, x, r_empirical) - model.drift_interaction(t, x, r_law)


def girsanov_weight(batch: TrajectoryBatch, law: Law, model: ModelSpec) -> WeightRecord:
    """Itô (left-point) sums over the increments that generated ``batch``."""
    if batch.increments is None:
        raise ValueError("batch has no recorded increments; simulate with record_increments=True")
    _law_matches(law, batch)
    dt = batch.dt
    stochastic = np.zeros(batch.n_particles)
    quadratic = np.zeros(batch.n_particles)
    for k in range(batch.steps):
        gap = delta_b(batch, law, model, k)
        stochastic += gap * batch.increments[:, k]
        quadratic += gap * gap * dt
    # fsum is correctly rounded, hence independent of summation order
    m = math.fsum(stochastic)
    q = math.fsum(quadratic)
    return WeightRecord(
        log_weight=m - 0.5 * q,
        martingale=m,
        quad_variation=q,
        contributions=np.column_stack([stochastic, quadratic]),
    )


def reweighted_expectation(values, weights) -> tuple[float, float]:
    """Estimate ``E_Q[phi] = E[phi Z]`` and its Monte Carlo standard error."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.shape != weights.shape:
        raise ValueError(f"length mismatch: {values.shape} vs {weights.shape}")
    if values.size == 0:
        raise ValueError("empty sample")
    if np.any(weights <= 0):
        raise ValueError("weights must be strictly positive")
    product = values * weights
    estimate = float(np.mean(product))
    if product.size < 2:
        return estimate, float("nan")
    return estimate, float(np.std(product, ddof=1) / math.sqrt(product.size))


def effective_sample_size(weights) -> float:
    """``R mean(Z)^2 / mean(Z^2)``; equals R for uniform weights."""
    w = np.asarray(weights, dtype=float)
    return float(w.size * np.mean(w) ** 2 / np.mean(w * w))
