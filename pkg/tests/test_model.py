import itertools
import math

import numpy as np
import pytest

from mfextremes.model import (
    GaussianMeanFieldParams,
    RankBasedParams,
    check_coefficient_bounds,
    linear_profile,
    make_gaussian_model,
    make_rankbased_model,
    ou_moments,
)
from mfextremes.sde import empirical_mean_field


def path(*values):
    return np.array(values, dtype=float)


class TestGaussianModel:
    def test_drift_cancels_when_position_equals_mean_field(self):
        model = make_gaussian_model(GaussianMeanFieldParams(kappa=1.0, sigma=math.sqrt(2)))
        assert model.drift_interaction(0.3, path(0.0, 2.0), 2.0) == 0.0

    def test_drift_value(self):
        model = make_gaussian_model(GaussianMeanFieldParams(kappa=1.0, sigma=1.0))
        assert model.drift_interaction(0.0, path(1.0), 0.0) == -1.0

    def test_kernel_reads_other_current_value(self):
        model = make_gaussian_model(GaussianMeanFieldParams(kappa=0.7, sigma=1.3))
        assert model.kernel(0.5, path(9.0, -1.0), path(0.0, 5.0)) == 5.0

    def test_constant_coefficients(self):
        model = make_gaussian_model(GaussianMeanFieldParams(kappa=0.7, sigma=1.3))
        x = np.random.default_rng(0).normal(size=(4, 3))
        np.testing.assert_array_equal(model.diffusion(0.0, x), np.full(4, 1.3))
        np.testing.assert_array_equal(model.drift_free(0.0, x), np.zeros(4))

    @pytest.mark.parametrize("sigma, sigma0", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (1.0, -0.5)])
    def test_rejects_nonpositive_scales(self, sigma, sigma0):
        with pytest.raises(ValueError):
            make_gaussian_model(GaussianMeanFieldParams(kappa=1.0, sigma=sigma, sigma0=sigma0))

    def test_drift_is_affine_in_mean_field(self):
        kappa, sigma = 0.8, 1.7
        model = make_gaussian_model(GaussianMeanFieldParams(kappa=kappa, sigma=sigma))
        rng = np.random.default_rng(1)
        h = 1e-3
        for _ in range(50):
            x, r, t = path(rng.normal(0, 3)), rng.normal(0, 3), rng.uniform()
            slope = (model.drift_interaction(t, x, r + h) - model.drift_interaction(t, x, r - h)) / (2 * h)
            assert abs(slope - kappa / sigma) < 1e-8

    def test_declared_bounds_hold(self):
        model = make_gaussian_model(GaussianMeanFieldParams(kappa=2.0, sigma=0.5))
        assert check_coefficient_bounds(model, np.random.default_rng(2))

    def test_initial_sampler_is_deterministic_given_rng(self):
        model = make_gaussian_model(GaussianMeanFieldParams(kappa=1.0, sigma=1.0, m0=3.0, sigma0=0.5))
        a = model.sample_initial(np.random.default_rng(5), 10)
        b = model.sample_initial(np.random.default_rng(5), 10)
        np.testing.assert_array_equal(a, b)


class TestOuMoments:
    def test_stationary_parameters(self):
        params = GaussianMeanFieldParams(kappa=1.0, sigma=math.sqrt(2), m0=0.0, sigma0=1.0)
        for T in (0.0, 0.5, 3.0):
            mean, var = ou_moments(params, T)
            assert mean == 0.0
            assert var == pytest.approx(1.0, abs=1e-14)

    def test_initial_condition(self):
        params = GaussianMeanFieldParams(kappa=0.3, sigma=2.0, m0=-1.5, sigma0=0.7)
        assert ou_moments(params, 0.0) == (-1.5, pytest.approx(0.49))

    def test_deterministic_start(self):
        params = GaussianMeanFieldParams(kappa=0.5, sigma=1.0, m0=2.0, sigma0=0.0)
        mean, var = ou_moments(params, 1.0)
        assert mean == 2.0
        assert var == pytest.approx(1 - math.exp(-1), abs=1e-12)
        assert var == pytest.approx(0.63212, abs=1e-5)

    def test_deterministic_start_matches_euler_monte_carlo(self):
        # independent oracle: plain Euler on dX = -k (X - m0) dt + s dW, started at m0
        kappa, sigma, steps, n = 0.5, 1.0, 400, 100_000
        rng = np.random.default_rng(11)
        x = np.full(n, 2.0)
        dt = 1.0 / steps
        for _ in range(steps):
            x += -kappa * (x - 2.0) * dt + sigma * math.sqrt(dt) * rng.standard_normal(n)
        _, var = ou_moments(GaussianMeanFieldParams(kappa, sigma, 2.0, 0.0), 1.0)
        assert np.var(x) == pytest.approx(var, rel=0.02)

    def test_kappa_zero_limit(self):
        params = GaussianMeanFieldParams(kappa=0.0, sigma=1.5, sigma0=0.5)
        assert ou_moments(params, 2.0)[1] == pytest.approx(0.25 + 2.25 * 2.0)
        nearly = GaussianMeanFieldParams(kappa=1e-9, sigma=1.5, sigma0=0.5)
        assert ou_moments(nearly, 2.0)[1] == pytest.approx(0.25 + 2.25 * 2.0, rel=1e-7)

    def test_variance_nonnegative_continuous_and_converges(self):
        params = GaussianMeanFieldParams(kappa=0.9, sigma=1.2, sigma0=3.0)
        ts = np.linspace(0, 30, 3001)
        var = np.array([ou_moments(params, t)[1] for t in ts])
        assert np.all(var >= 0)
        # |dv/dt| <= 2 kappa |sigma0^2 - sigma^2 / (2 kappa)|
        slope_bound = 2 * 0.9 * abs(9.0 - 1.44 / 1.8)
        assert np.max(np.abs(np.diff(var))) <= slope_bound * (ts[1] - ts[0]) + 1e-12
        assert var[-1] == pytest.approx(1.2**2 / 1.8, rel=1e-12)

    def test_rejects_negative_time(self):
        with pytest.raises(ValueError):
            ou_moments(GaussianMeanFieldParams(1.0, 1.0), -0.1)


def rank_drift(model, positions, i):
    """Drift actually applied to particle i, A * B, through the generic kernel path."""
    ens = np.asarray(positions, dtype=float)[:, None]
    r = empirical_mean_field(ens[i], ens, 0.0, model)
    return float(model.diffusion(0.0, ens[i]) * model.drift_interaction(0.0, ens[i], r))


class TestRankBasedModel:
    def test_middle_particle_identity_profile(self):
        model = make_rankbased_model(RankBasedParams(drift_profile=linear_profile(1.0, 0.0)))
        assert rank_drift(model, [1.0, 2.0, 3.0], 1) == pytest.approx(2 / 3, abs=1e-15)

    def test_zero_profile_gives_brownian_motion(self):
        model = make_rankbased_model(RankBasedParams(drift_profile=linear_profile(0.0, 0.0)))
        assert rank_drift(model, [0.3, -1.0, 2.0], 0) == 0.0
        assert model.diffusion(0.0, path(0.0)) == pytest.approx(math.sqrt(2))

    def test_top_particle_sees_cdf_one(self):
        model = make_rankbased_model(RankBasedParams(drift_profile=linear_profile(1.0, 0.0)))
        assert rank_drift(model, [0.1, 4.0, -2.0, 1.0], 1) == pytest.approx(1.0)

    def test_matches_sorting_exhaustively(self):
        # every ordering (with ties) of small position sets, checked against a sort-based count
        profile = lambda u: np.sin(3 * np.asarray(u)) - 0.2  # noqa: E731
        model = make_rankbased_model(RankBasedParams(drift_profile=profile))
        levels = [-1.0, 0.0, 0.5, 2.0]
        for n in range(1, 7):
            for positions in itertools.islice(itertools.product(levels, repeat=n), 300):
                ordered = sorted(positions)
                for i, x in enumerate(positions):
                    cdf = sum(1 for y in ordered if y <= x) / n
                    assert rank_drift(model, positions, i) == pytest.approx(float(profile(cdf)), abs=1e-12)

    def test_bounds(self):
        model = make_rankbased_model(
            RankBasedParams(linear_profile(1.0, -0.5), profile_dr_bound=1.0, profile_dr2_bound=0.0)
        )
        assert check_coefficient_bounds(model, np.random.default_rng(3))

    def test_rejects_non_finite_profile(self):
        with np.errstate(divide="ignore"), pytest.raises(ValueError):
            RankBasedParams(drift_profile=lambda u: 1.0 / np.asarray(u))
