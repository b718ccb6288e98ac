import math

import numpy as np
import pytest

from mfextremes.girsanov import (
    WeightRecord,
    delta_b,
    effective_sample_size,
    girsanov_weight,
    reweighted_expectation,
)
from mfextremes.model import (
    ClosedFormLaw,
    GaussianMeanFieldParams,
    ModelSpec,
    RankBasedParams,
    linear_profile,
    make_gaussian_model,
    make_rankbased_model,
    normal_sampler,
)
from mfextremes.sde import LawCloud, SimConfig, simulate_iid_copies

PARAMS = GaussianMeanFieldParams(kappa=1.0, sigma=math.sqrt(2), m0=0.0, sigma0=1.0)


def iid_batch(model, law, n, steps=20, seed=0, rep=0):
    cfg = SimConfig(n, 1.0, steps, seed=seed, replication_id=rep, record_increments=True)
    return simulate_iid_copies(cfg, model, law)


def log_weights(model, n, reps, steps=20, seed=0):
    law = model.closed_form_law
    return np.array([girsanov_weight(iid_batch(model, law, n, steps, seed, r), law, model).log_weight for r in range(reps)])


class TestDeltaB:
    def test_gaussian_gap_is_affine_in_mean_gap(self):
        params = GaussianMeanFieldParams(kappa=0.8, sigma=1.3, m0=0.4)
        model = make_gaussian_model(params)
        batch = iid_batch(model, model.closed_form_law, 30)
        for k in (0, 7, 19):
            gap = delta_b(batch, model.closed_form_law, model, k)
            expected = 0.8 * (batch.values[:, k].mean() - 0.4) / 1.3
            np.testing.assert_allclose(gap, expected, atol=1e-13)

    def test_no_interaction_gives_zero(self):
        model = make_rankbased_model(RankBasedParams(linear_profile(0.0, 0.3)))
        cloud = LawCloud(grid=np.linspace(0, 1, 21), cloud=np.random.default_rng(0).normal(size=(50, 21)))
        batch = iid_batch(model, cloud, 10)
        assert np.all(delta_b(batch, cloud, model, 5) == 0.0)
        assert girsanov_weight(batch, cloud, model).weight == 1.0

    def test_same_ensemble_twice(self):
        model = make_rankbased_model(RankBasedParams(linear_profile(1.0, -0.5)))
        cloud = LawCloud(grid=np.linspace(0, 1, 21), cloud=np.random.default_rng(1).normal(size=(40, 21)))
        batch = iid_batch(model, cloud, 40)
        self_law = LawCloud(grid=batch.grid, cloud=batch.values)
        for k in range(batch.steps):
            assert np.all(delta_b(batch, self_law, model, k) == 0.0)

    def test_grid_mismatch(self):
        model = make_gaussian_model(PARAMS)
        batch = iid_batch(model, model.closed_form_law, 5)
        other = LawCloud(grid=np.linspace(0, 1, 11), cloud=np.zeros((3, 11)))
        with pytest.raises(ValueError):
            delta_b(batch, other, model, 0)


def constant_gap_model(c):
    # empirical kernel average is identically 1 and the law's is 0, so dB = c
    return ModelSpec(
        name="constant-gap",
        diffusion=lambda t, x: np.ones(np.shape(x)[:-1]),
        drift_interaction=lambda t, x, r: c * np.asarray(r, dtype=float),
        drift_free=lambda t, x: np.zeros(np.shape(x)[:-1]),
        kernel=lambda t, x, y: np.ones(np.broadcast_shapes(np.shape(x)[:-1], np.shape(y)[:-1])),
        initial_law=normal_sampler(),
        closed_form_law=ClosedFormLaw(
            mean=lambda t: 0.0, variance=lambda t: 1.0, mean_field=lambda t, x: np.zeros(np.shape(x)[:-1])
        ),
    )


class TestWeight:
    def test_constant_gap_closed_form(self):
        c, steps = 0.7, 25
        model = constant_gap_model(c)
        batch = iid_batch(model, model.closed_form_law, 1, steps=steps)
        rec = girsanov_weight(batch, model.closed_form_law, model)
        w_t = batch.increments[0].sum()
        assert rec.log_weight == pytest.approx(c * w_t - c * c * 1.0 / 2, abs=1e-13)
        assert rec.martingale == pytest.approx(c * w_t, abs=1e-13)
        assert rec.quad_variation == pytest.approx(c * c, abs=1e-13)

    def test_record_invariants(self):
        model = make_gaussian_model(PARAMS)
        batch = iid_batch(model, model.closed_form_law, 50)
        rec = girsanov_weight(batch, model.closed_form_law, model)
        assert rec.quad_variation >= 0
        assert rec.log_weight == rec.martingale - 0.5 * rec.quad_variation
        assert rec.weight > 0
        assert rec.contributions.shape == (50, 2)
        assert np.all(rec.contributions[:, 1] >= 0)
        assert rec.martingale == pytest.approx(rec.contributions[:, 0].sum(), abs=1e-12)

    def test_requires_increments(self):
        model = make_gaussian_model(PARAMS)
        batch = simulate_iid_copies(SimConfig(5, 1.0, 4), model, model.closed_form_law)
        with pytest.raises(ValueError):
            girsanov_weight(batch, model.closed_form_law, model)

    def test_negative_quadratic_variation_rejected(self):
        with pytest.raises(ValueError):
            WeightRecord(0.0, 0.0, -1.0, np.zeros((1, 2)))

    def test_mean_weight_is_one(self):
        lw = log_weights(make_gaussian_model(PARAMS), 100, 2000, steps=20, seed=3)
        w = np.exp(lw)
        assert abs(w.mean() - 1.0) < 3 * w.std(ddof=1) / math.sqrt(w.size)

    def test_log_weight_variance_is_order_one_in_n(self):
        model = make_gaussian_model(PARAMS)
        v100 = np.var(log_weights(model, 100, 300, seed=4), ddof=1)
        v400 = np.var(log_weights(model, 400, 300, seed=5), ddof=1)
        assert v100 / 3 < v400 < 3 * v100

    def test_refining_the_grid_keeps_weights_tame(self):
        model = make_gaussian_model(PARAMS)
        coarse = np.var(log_weights(model, 100, 300, steps=20, seed=6), ddof=1)
        fine = np.var(log_weights(model, 100, 300, steps=40, seed=6), ddof=1)
        assert 0.5 < fine / coarse < 2.0


class TestReweighting:
    def test_unit_weights_give_sample_mean(self):
        phi = np.array([0.5, 1.5, -2.0, 4.0])
        est, se = reweighted_expectation(phi, np.ones(4))
        assert est == pytest.approx(phi.mean())
        assert se == pytest.approx(phi.std(ddof=1) / 2)

    def test_indicator_gives_frequency(self):
        phi = np.array([1, 0, 0, 1, 1, 0, 1, 1], dtype=float)
        assert reweighted_expectation(phi, np.ones(8))[0] == 0.625

    def test_constant_statistic_gives_mean_weight(self):
        w = np.exp(np.random.default_rng(0).normal(-0.02, 0.2, size=5000))
        assert reweighted_expectation(np.ones(5000), w)[0] == pytest.approx(w.mean())

    def test_errors(self):
        with pytest.raises(ValueError):
            reweighted_expectation([1.0, 2.0], [1.0])
        with pytest.raises(ValueError):
            reweighted_expectation([1.0, 2.0], [1.0, 0.0])

    def test_effective_sample_size(self):
        assert effective_sample_size(np.ones(40)) == pytest.approx(40)
        assert effective_sample_size([1.0, 0.0, 0.0, 0.0]) == pytest.approx(1.0)
