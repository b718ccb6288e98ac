"""Coefficient specifications for mean-field particle systems.

A model is the quadruple ``(A, B, C, g)`` together with an initial law:

    dX^i = A(t, X^i) (B(t, X^i, r^i) dt + dW^i) + C(t, X^i) dt,
    r^i  = (1/N) sum_j g(t, X^i, X^j).

Coefficient handles are vectorised over leading axes. A path prefix is an
array whose last axis is time, so ``x[..., -1]`` is the current value:

* ``A(t, x)`` and ``C(t, x)`` map prefixes of shape ``(..., k+1)`` to ``(...)``;
* ``B(t, x, r)`` additionally takes mean-field values broadcastable to ``(...)``;
* ``g(t, x, y)`` is evaluated elementwise after broadcasting the leading axes
  of ``x`` and ``y``; the simulators call it as ``g(t, x[:, None], y[None])``
  to obtain the full kernel matrix.

A single path (a 1-D array) is a valid prefix, so handles can also be called on
scalars-in-time, which is what the unit tests do.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Optional

import numpy as np

__all__ = [
    "ClosedFormLaw",
    "CoefficientBounds",
    "GaussianMeanFieldParams",
    "MeanFieldRule",
    "ModelSpec",
    "RankBasedParams",
    "check_coefficient_bounds",
    "empirical_cdf_rule",
    "linear_profile",
    "make_gaussian_model",
    "make_rankbased_model",
    "mean_value_rule",
    "normal_sampler",
    "ou_moments",
]

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class MeanFieldRule:
    """Fast evaluation of ``r = (1/M) sum_j g(t, x, y^j)`` for a specific kernel.

    ``prepare(t, ensemble)`` reduces the ensemble prefixes (shape ``(M, k+1)``)
    to a summary once per time step; ``evaluate(summary, t, x)`` then returns the
    mean-field value for each query prefix. Summaries of a frozen law cloud are
    cached, which is what makes i.i.d. copies against a large cloud cheap.
    """

    name: str
    prepare: Callable[[float, np.ndarray], object]
    evaluate: Callable[[object, float, np.ndarray], np.ndarray]


def _prepare_mean(t, ensemble):
    return float(np.mean(ensemble[:, -1]))


def _evaluate_mean(summary, t, x):
    return np.full(np.shape(x)[:-1], summary)


def _prepare_sorted(t, ensemble):
    return np.sort(ensemble[:, -1])


def _evaluate_ecdf(summary, t, x):
    return np.searchsorted(summary, x[..., -1], side="right") / summary.size


def mean_value_rule() -> MeanFieldRule:
    """O(M) rule for the kernel ``g(t, x, y) = y_t``."""
    return MeanFieldRule("mean-value", _prepare_mean, _evaluate_mean)


def empirical_cdf_rule() -> MeanFieldRule:
    """O(M log M) rule for the kernel ``g(t, x, y) = 1{y_t <= x_t}``."""
    return MeanFieldRule("empirical-cdf", _prepare_sorted, _evaluate_ecdf)


@dataclass(frozen=True)
class ClosedFormLaw:
    """Analytic marginal law of the limit equation.

    ``mean_field(t, x)`` returns ``int g(t, x, y) mu_t(dy)`` for query prefixes
    ``x``; ``mean`` and ``variance`` give the time-t marginal moments.
    """

    mean: Callable[[float], float]
    variance: Callable[[float], float]
    mean_field: Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CoefficientBounds:
    """Declared constants for ``|A|``, ``|C|``, ``|dB/dr|`` and ``|d2B/dr2|``."""

    diffusion: float
    drift_free: float
    drift_dr: float
    drift_dr2: float


@dataclass(frozen=True)
class ModelSpec:
    """One particle system and its McKean-Vlasov limit.

    Instances are immutable and the handles must be pure, so a model can be
    shared freely between worker processes.
    """

    name: str
    diffusion: Callable
    drift_interaction: Callable
    drift_free: Callable
    kernel: Callable
    initial_law: Callable[[np.random.Generator, int], np.ndarray]
    closed_form_law: Optional[ClosedFormLaw] = None
    mean_field_rule: Optional[MeanFieldRule] = None
    bounds: Optional[CoefficientBounds] = None
    params: object = field(default=None, compare=False)

    def sample_initial(self, rng: np.random.Generator, size: int) -> np.ndarray:
        values = np.asarray(self.initial_law(rng, size), dtype=float)
        if values.shape != (size,):
            raise ValueError(f"initial_law returned shape {values.shape}, expected ({size},)")
        return values


def _constant(value, t, x):
    return np.full(np.shape(x)[:-1], value, dtype=float)


def _ou_drift(kappa, sigma, t, x, r):
    return -kappa * (x[..., -1] - r) / sigma


def _other_current_value(t, x, y):
    shape = np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1])
    return np.broadcast_to(np.asarray(y[..., -1], dtype=float), shape)


def _below_or_equal(t, x, y):
    return (y[..., -1] <= x[..., -1]).astype(float)


def _profile_drift(profile, t, x, r):
    return np.asarray(profile(r), dtype=float) / SQRT2 + np.zeros(np.shape(x)[:-1])


def _normal_draw(mean, sd, rng, size):
    return mean + sd * rng.standard_normal(size)


def normal_sampler(mean: float = 0.0, sd: float = 1.0) -> Callable:
    """Picklable ``(rng, size) -> N(mean, sd^2)`` sampler."""
    return partial(_normal_draw, float(mean), float(sd))


def _linear(slope, intercept, u):
    return slope * np.asarray(u, dtype=float) + intercept


def linear_profile(slope: float, intercept: float) -> Callable:
    """Picklable drift profile ``u -> slope * u + intercept``."""
    return partial(_linear, float(slope), float(intercept))


@dataclass(frozen=True)
class GaussianMeanFieldParams:
    """Parameters of the Gaussian (Ornstein-Uhlenbeck type) mean-field system.

    ``sigma0 = 0`` (a deterministic start) is accepted here so that the limit
    moments can be evaluated for it; :func:`make_gaussian_model` requires a
    strictly positive initial spread.
    """

    kappa: float
    sigma: float
    m0: float = 0.0
    sigma0: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not self.sigma0 >= 0:
            raise ValueError(f"sigma0 must be nonnegative, got {self.sigma0}")


@dataclass(frozen=True)
class RankBasedParams:
    drift_profile: Callable
    initial_law: Callable = field(default_factory=normal_sampler)
    profile_dr_bound: Optional[float] = None
    profile_dr2_bound: Optional[float] = None

    def __post_init__(self):
        grid = np.linspace(0.0, 1.0, 101)
        values = np.asarray(self.drift_profile(grid), dtype=float)
        if values.shape != grid.shape or not np.all(np.isfinite(values)):
            raise ValueError("drift_profile must be finite and vectorised on [0, 1]")


def ou_moments(params: GaussianMeanFieldParams, T: float) -> tuple[float, float]:
    """Mean and variance of the limit law at time ``T``.

    The mean is conserved; the variance relaxes from ``sigma0**2`` towards
    ``sigma**2 / (2 kappa)`` at rate ``2 kappa``.
    """
    if T < 0:
        raise ValueError(f"T must be nonnegative, got {T}")
    kappa, sigma = params.kappa, params.sigma
    if abs(kappa) < 1e-12:
        return params.m0, params.sigma0**2 + sigma**2 * T
    decay = math.exp(-2.0 * kappa * T)
    # -expm1 keeps (1 - e^{-2kT}) / (2k) accurate for small kT
    relax = -math.expm1(-2.0 * kappa * T) / (2.0 * kappa)
    return params.m0, params.sigma0**2 * decay + sigma**2 * relax


def _gaussian_law_mean(m0, t):
    return m0


def _gaussian_law_variance(params, t):
    return ou_moments(params, t)[1]


def make_gaussian_model(params: GaussianMeanFieldParams) -> ModelSpec:
    if not params.sigma0 > 0:
        raise ValueError(f"sigma0 must be positive, got {params.sigma0}")
    law = ClosedFormLaw(
        mean=partial(_gaussian_law_mean, params.m0),
        variance=partial(_gaussian_law_variance, params),
        mean_field=partial(_constant, params.m0),
    )
    return ModelSpec(
        name="gaussian",
        diffusion=partial(_constant, params.sigma),
        drift_interaction=partial(_ou_drift, params.kappa, params.sigma),
        drift_free=partial(_constant, 0.0),
        kernel=_other_current_value,
        initial_law=normal_sampler(params.m0, params.sigma0),
        closed_form_law=law,
        mean_field_rule=mean_value_rule(),
        bounds=CoefficientBounds(
            diffusion=params.sigma,
            drift_free=0.0,
            drift_dr=abs(params.kappa) / params.sigma,
            drift_dr2=0.0,
        ),
        params=params,
    )


def make_rankbased_model(params: RankBasedParams) -> ModelSpec:
    """Rank-based diffusion: drift ``profile(F_N(X^i))`` and noise ``sqrt(2) dW``.

    The mean-field value is the empirical CDF at the particle's own position,
    counting ties (including the particle itself) with ``<=``.
    """
    bounds = None
    if params.profile_dr_bound is not None and params.profile_dr2_bound is not None:
        bounds = CoefficientBounds(
            diffusion=SQRT2,
            drift_free=0.0,
            drift_dr=params.profile_dr_bound / SQRT2,
            drift_dr2=params.profile_dr2_bound / SQRT2,
        )
    return ModelSpec(
        name="rankbased",
        diffusion=partial(_constant, SQRT2),
        drift_interaction=partial(_profile_drift, params.drift_profile),
        drift_free=partial(_constant, 0.0),
        kernel=_below_or_equal,
        initial_law=params.initial_law,
        closed_form_law=None,
        mean_field_rule=empirical_cdf_rule(),
        bounds=bounds,
        params=params,
    )


def check_coefficient_bounds(
    model: ModelSpec,
    rng: np.random.Generator,
    n_points: int = 200,
    x_scale: float = 5.0,
    h: float = 1e-4,
) -> bool:
    """Spot-check the declared bounds at random (t, x, r) points.

    Derivatives in ``r`` are central finite differences on ``r`` in ``[0, 1]``
    padded by ``h``; returns ``False`` on the first violation. Only the current
    value of the path is randomised, which is all the built-in models read.
    """
    if model.bounds is None:
        raise ValueError(f"model {model.name!r} declares no coefficient bounds")
    bd = model.bounds
    t = rng.uniform(0.0, 1.0, n_points)
    x = rng.normal(0.0, x_scale, (n_points, 1))
    r = rng.uniform(h, 1.0 - h, n_points)
    slack = 1e-6
    for ti, xi, ri in zip(t, x, r):
        if abs(float(model.diffusion(ti, xi))) > bd.diffusion + slack:
            return False
        if abs(float(model.drift_free(ti, xi))) > bd.drift_free + slack:
            return False
        lo, mid, hi = (float(model.drift_interaction(ti, xi, ri + d)) for d in (-h, 0.0, h))
        if abs(hi - lo) / (2 * h) > bd.drift_dr + slack:
            return False
        if abs(hi - 2 * mid + lo) / h**2 > bd.drift_dr2 + 1e-3:
            return False
    return True
