import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from mfextremes.extremes import (
    ANALYTIC_GAUSSIAN,
    EMPIRICAL_QUANTILE,
    InsufficientExceedancesError,
    NormingConstants,
    RegionSet,
    build_point_pattern,
    count_at_least,
    count_in_region,
    empirical_norming,
    gaussian_norming,
    order_statistics,
    top_values,
)

finite = st.floats(-50, 50, allow_nan=False)


class TestGaussianNorming:
    @pytest.mark.parametrize("method", ["classical", "quantile"])
    def test_affine_equivariance(self, method):
        base = gaussian_norming(500, method=method)
        shifted = gaussian_norming(500, mean=2.5, sd=3.0, method=method)
        assert shifted.a == pytest.approx(3.0 * base.a, rel=1e-15)
        assert shifted.b == pytest.approx(2.5 + 3.0 * base.b, rel=1e-15)
        assert shifted.source == ANALYTIC_GAUSSIAN

    def test_classical_scale_decreasing(self):
        scales = [gaussian_norming(n).a for n in (3, 10, 100, 10**4, 10**8)]
        assert all(a > 0 for a in scales)
        assert all(x > y for x, y in zip(scales, scales[1:]))

    def test_classical_calibration_at_one_million(self):
        c = gaussian_norming(10**6)
        assert 0.85 <= 10**6 * norm.sf(c.b) <= 1.15

    def test_classical_formula(self):
        n = 1000
        r = math.sqrt(2 * math.log(n))
        c = gaussian_norming(n)
        assert c.a == pytest.approx(1 / r)
        assert c.b == pytest.approx(r - (math.log(math.log(n)) + math.log(4 * math.pi)) / (2 * r))

    def test_quantile_method_puts_one_expected_exceedance(self):
        for n in (2, 50, 1000, 10**6):
            c = gaussian_norming(n, method="quantile")
            assert n * norm.sf(c.b) == pytest.approx(1.0, rel=1e-9)

    @pytest.mark.parametrize("n", [0, 1, 2])
    def test_classical_rejects_small_n(self, n):
        with pytest.raises(ValueError):
            gaussian_norming(n)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ValueError):
            gaussian_norming(100, sd=0.0)
        with pytest.raises(ValueError):
            gaussian_norming(100, method="nope")
        with pytest.raises(ValueError):
            NormingConstants(a=0.0, b=0.0, n=1, source=ANALYTIC_GAUSSIAN)


class TestEmpiricalNorming:
    def test_integer_sample(self):
        c = empirical_norming(np.arange(1, 101), 10)
        assert c.b == 90.0
        assert c.a == pytest.approx(5.5)
        assert c.source == EMPIRICAL_QUANTILE

    def test_order_of_sample_is_irrelevant(self):
        x = np.random.default_rng(0).permutation(np.arange(1, 101))
        c = empirical_norming(x, 10)
        assert (c.a, c.b) == (pytest.approx(5.5), 90.0)

    def test_constant_sample_fails(self):
        with pytest.raises(InsufficientExceedancesError):
            empirical_norming(np.full(200, 3.0), 10)

    def test_requires_large_enough_sample(self):
        with pytest.raises(ValueError):
            empirical_norming(np.arange(99), 10)

    def test_gumbel_mean_excess_near_one(self):
        sample = np.random.default_rng(1).gumbel(size=10**6)
        c = empirical_norming(sample, 1000)
        assert abs(c.a - 1.0) < 0.2
        assert c.b == pytest.approx(-math.log(-math.log(1 - 1 / 1000)), abs=0.1)


class TestPointPattern:
    def test_arithmetic(self):
        p = build_point_pattern([3.0, 5.0], NormingConstants(2.0, 1.0, 2, ANALYTIC_GAUSSIAN))
        np.testing.assert_array_equal(p.points, [[0.5, 1.0], [1.0, 2.0]])

    def test_identity_norming(self):
        x = np.array([-1.5, 0.25, 7.0])
        p = build_point_pattern(x, NormingConstants(1.0, 0.0, 3, ANALYTIC_GAUSSIAN))
        np.testing.assert_array_equal(p.values, x)

    def test_singleton(self):
        p = build_point_pattern([4.0], NormingConstants(2.0, 1.0, 1, ANALYTIC_GAUSSIAN))
        np.testing.assert_array_equal(p.points, [[1.0, 1.5]])

    def test_count_mismatch(self):
        with pytest.raises(ValueError):
            build_point_pattern([1.0, 2.0], NormingConstants(1.0, 0.0, 3, ANALYTIC_GAUSSIAN))

    @given(
        st.lists(finite, min_size=1, max_size=40),
        st.floats(0.01, 10),
        finite,
    )
    def test_round_trip_and_structure(self, xs, a, b):
        norming = NormingConstants(a, b, len(xs), ANALYTIC_GAUSSIAN)
        p = build_point_pattern(xs, norming)
        assert p.n == len(xs)
        assert len(set(p.index_fractions.tolist())) == len(xs)
        assert p.index_fractions[-1] == 1.0 and p.index_fractions[0] > 0
        np.testing.assert_allclose(norming.denormalize(p.values), xs, rtol=1e-12, atol=1e-12)


def pattern(points):
    """Pattern with the given (i/N, value) points under identity norming."""
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    np.testing.assert_allclose(pts[:, 0], np.arange(1, n + 1) / n)
    return build_point_pattern(pts[:, 1], NormingConstants(1.0, 0.0, n, ANALYTIC_GAUSSIAN))


class TestRegions:
    def test_enumeration(self):
        p = pattern([(0.5, 1.0), (1.0, 2.0)])
        assert count_in_region(p, RegionSet([(0, 1, 1.5, 3)])) == 1

    def test_full_mass(self):
        p = pattern([(0.25, -1e6), (0.5, 0.0), (0.75, 3.0), (1.0, 1e6)])
        assert count_in_region(p, RegionSet([(0, 1, -math.inf, math.inf)])) == 4
        assert count_in_region(p, RegionSet([(0, 1, -1e300, math.inf)])) == 4

    def test_half_open_value_boundaries(self):
        p = pattern([(0.5, 1.0), (1.0, 2.0)])
        assert count_in_region(p, RegionSet([(0, 1, 1.0, 2.0)])) == 1  # 1.0 excluded, 2.0 included
        assert count_in_region(p, RegionSet([(0, 1, 2.0, 5.0)])) == 0

    def test_half_open_index_boundaries(self):
        p = pattern([(0.5, 1.0), (1.0, 2.0)])
        assert count_in_region(p, RegionSet([(0, 0.5, 0, 5)])) == 1
        assert count_in_region(p, RegionSet([(0.5, 1.0, 0, 5)])) == 1

    @pytest.mark.parametrize(
        "rects",
        [
            [(0.5, 0.5, 0, 1)],
            [(-0.1, 0.5, 0, 1)],
            [(0.0, 1.1, 0, 1)],
            [(0.0, 1.0, 1, 1)],
            [(0.0, 0.6, 0, 1), (0.5, 1.0, 0.5, 2)],
            [(0, 1, 0, 1, 2)],
        ],
    )
    def test_invalid_regions(self, rects):
        with pytest.raises(ValueError):
            RegionSet(rects)

    def test_touching_rectangles_are_disjoint(self):
        assert len(RegionSet([(0, 0.5, 0, 1), (0.5, 1, 0, 1), (0, 1, 1, 2)])) == 3

    @settings(max_examples=60)
    @given(st.lists(finite, min_size=1, max_size=30), st.lists(st.floats(0.05, 0.95), min_size=1, max_size=3))
    def test_additivity(self, values, cuts):
        n = len(values)
        p = build_point_pattern(values, NormingConstants(1.0, 0.0, n, ANALYTIC_GAUSSIAN))
        edges = [0.0] + sorted(set(cuts)) + [1.0]
        pieces = [(a, b, -1.0, 20.0) for a, b in zip(edges, edges[1:])] + [(0.0, 1.0, 20.0, math.inf)]
        union = RegionSet(pieces)
        assert count_in_region(p, union) == sum(count_in_region(p, RegionSet([r])) for r in pieces)
        assert count_in_region(p, union) == int(np.sum(np.asarray(values) > -1.0))


class TestOrderStatistics:
    def test_examples(self):
        np.testing.assert_array_equal(order_statistics([3, 1, 2], 2), [3, 2])
        np.testing.assert_array_equal(order_statistics([3, 1, 2], 3), [3, 2, 1])
        np.testing.assert_array_equal(order_statistics([4.2] * 5, 3), [4.2, 4.2, 4.2])

    @pytest.mark.parametrize("k", [0, 4])
    def test_range(self, k):
        with pytest.raises(ValueError):
            order_statistics([1, 2, 3], k)

    @given(st.lists(finite, min_size=1, max_size=50))
    def test_first_is_max_and_matches_sort(self, xs):
        assert order_statistics(xs, 1)[0] == max(xs)
        k = len(xs)
        np.testing.assert_array_equal(order_statistics(xs, k), sorted(xs, reverse=True))

    def test_rowwise_top_values(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(20, 15))
        top = top_values(x, 4)
        for row, expected in zip(top, x):
            np.testing.assert_array_equal(row, order_statistics(expected, 4))

    @settings(max_examples=200)
    @given(
        st.lists(st.integers(-3, 3).map(float), min_size=1, max_size=8),
        st.integers(-4, 4).map(lambda v: v / 2),
        st.integers(1, 8),
    )
    def test_count_order_statistic_duality(self, xs, x, k):
        if k > len(xs):
            return
        assert (count_at_least(xs, x) >= k) == (order_statistics(xs, k)[-1] >= x)
