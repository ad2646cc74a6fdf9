import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import jensenshannon

from tpop.metrics import (
    LOW_CONFIDENCE_COUNT,
    ConfusionCounts,
    MapKind,
    MapSource,
    MetricsError,
    PerformanceMap,
    bernoulli_jsd,
    conditional_rate,
    global_jsd,
    grid_points,
    jsd,
    pointwise_jsd,
)


def make_map(values, counts=None, kind=MapKind.RELIABILITY, source=MapSource.MODEL):
    values = np.asarray(values, dtype=float)
    if counts is None:
        counts = np.where(np.isnan(values), 0, 100)
    step = 1.0 / (values.shape[0] - 1)
    return PerformanceMap(step, values, counts, kind, source)


class TestGridPoints:
    def test_standard_steps(self):
        np.testing.assert_allclose(grid_points(0.5), [0.0, 0.5, 1.0])
        assert grid_points(0.02).size == 51
        assert grid_points(0.02)[-1] == 1.0

    def test_non_divisor_rejected(self):
        with pytest.raises(MetricsError, match="divide"):
            grid_points(0.3)


class TestConditionalRate:
    def test_basic(self):
        assert conditional_rate(3, 4) == 0.75
        assert conditional_rate(0, 5) == 0.0

    def test_empty_conditioning_set_is_none(self):
        assert conditional_rate(0, 0) is None

    def test_invalid_counts(self):
        with pytest.raises(MetricsError):
            conditional_rate(5, 4)
        with pytest.raises(MetricsError):
            conditional_rate(-1, 4)


class TestJsd:
    def test_identical_pmfs_give_zero(self):
        p = [0.2, 0.3, 0.5]
        assert jsd(p, p) == 0.0

    def test_disjoint_support_gives_one(self):
        assert jsd([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)

    def test_symmetry(self):
        p, q = [0.1, 0.9], [0.6, 0.4]
        assert jsd(p, q) == pytest.approx(jsd(q, p))

    def test_matches_scipy_squared_distance(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            p = rng.dirichlet(np.ones(8))
            q = rng.dirichlet(np.ones(8))
            expected = jensenshannon(p, q, base=2) ** 2
            assert jsd(p, q) == pytest.approx(expected, abs=1e-12)

    def test_validation(self):
        with pytest.raises(MetricsError, match="support"):
            jsd([0.5, 0.5], [0.2, 0.3, 0.5])
        with pytest.raises(MetricsError, match="sum to 1"):
            jsd([0.5, 0.4], [0.5, 0.5])
        with pytest.raises(MetricsError, match="non-negative"):
            jsd([1.5, -0.5], [0.5, 0.5])


class TestBernoulliJsd:
    def test_half_versus_point_mass(self):
        # JSD(Bernoulli(0.5), Bernoulli(0)) = H(1/4) - 1/2 = 0.75 log2(4/3)
        expected = 0.75 * math.log2(4 / 3)
        assert bernoulli_jsd(0.5, 0.0) == pytest.approx(expected, abs=1e-12)
        assert bernoulli_jsd(0.5, 0.0) == pytest.approx(0.31128, abs=1e-4)

    def test_matches_full_jsd(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            p, q = rng.random(2)
            full = jsd([p, 1 - p], [q, 1 - q])
            assert bernoulli_jsd(p, q) == pytest.approx(full, abs=1e-12)

    def test_nan_propagates(self):
        out = bernoulli_jsd([0.5, np.nan], [0.5, 0.5])
        assert out[0] == 0.0
        assert np.isnan(out[1])

    @given(st.floats(0, 1), st.floats(0, 1))
    @settings(max_examples=300, deadline=None)
    def test_bounds_and_symmetry(self, p, q):
        v = float(bernoulli_jsd(p, q))
        assert 0.0 <= v <= 1.0
        assert v == pytest.approx(float(bernoulli_jsd(q, p)), abs=1e-12)
        if p == q:
            assert v == pytest.approx(0.0, abs=1e-12)


class TestPerformanceMap:
    def test_nan_count_invariant_enforced(self):
        values = np.full((3, 3), 0.5)
        counts = np.full((3, 3), 10)
        counts[0, 0] = 0  # count 0 but value defined
        with pytest.raises(MetricsError, match="NaN"):
            PerformanceMap(0.5, values, counts, MapKind.RELIABILITY, MapSource.MODEL)

    def test_out_of_range_values_rejected(self):
        values = np.full((3, 3), 1.5)
        with pytest.raises(MetricsError, match=r"\[0, 1\]"):
            make_map(values)

    def test_shape_must_match_grid(self):
        with pytest.raises(MetricsError, match="3x3"):
            PerformanceMap(
                0.5,
                np.zeros((2, 2)),
                np.ones((2, 2)),
                MapKind.RELIABILITY,
                MapSource.MODEL,
            )

    def test_low_confidence_flag(self):
        counts = np.full((3, 3), 100)
        counts[1, 1] = LOW_CONFIDENCE_COUNT - 1
        m = make_map(np.full((3, 3), 0.5), counts)
        assert m.low_confidence[1, 1]
        assert m.low_confidence.sum() == 1


class TestPointwiseJsd:
    def test_identical_maps_give_zero_everywhere(self):
        m = make_map(np.random.default_rng(2).random((3, 3)))
        np.testing.assert_allclose(pointwise_jsd(m, m), 0.0, atol=1e-12)

    def test_nan_cells_stay_nan(self):
        values = np.full((3, 3), 0.5)
        values[2, 2] = np.nan
        a = make_map(values)
        b = make_map(np.full((3, 3), 0.5))
        out = pointwise_jsd(a, b)
        assert np.isnan(out[2, 2])
        assert np.nansum(out) == 0.0

    def test_kind_mismatch_rejected(self):
        a = make_map(np.full((3, 3), 0.5), kind=MapKind.RELIABILITY)
        b = make_map(np.full((3, 3), 0.5), kind=MapKind.SECURITY)
        with pytest.raises(MetricsError, match="kind"):
            pointwise_jsd(a, b)


class TestGlobalJsd:
    def test_identical_maps_give_zero(self):
        m = make_map(np.random.default_rng(3).random((3, 3)) + 0.01)
        assert global_jsd(m, m) == 0.0

    def test_scalar_invariance(self):
        # global JSD compares shapes of the normalized maps, so a uniform
        # scaling of one map leaves it unchanged
        vals = np.random.default_rng(4).random((3, 3)) * 0.8 + 0.1
        a = make_map(vals)
        b = make_map(vals * 0.5)
        assert global_jsd(a, b) == pytest.approx(0.0, abs=1e-12)

    def test_undefined_cells_excluded_symmetrically(self):
        vals_a = np.full((3, 3), 0.5)
        vals_a[0, 0] = np.nan
        vals_b = np.full((3, 3), 0.5)
        vals_b[2, 2] = np.nan
        vals_b[1, 1] = 1.0
        a = make_map(vals_a)
        b = make_map(vals_b)
        # hand computation over the 7 cells defined in both maps
        pa = np.full(7, 0.5) / 3.5
        qb = np.array([0.5, 0.5, 0.5, 1.0, 0.5, 0.5, 0.5])
        qb = qb / qb.sum()
        assert global_jsd(a, b) == pytest.approx(jsd(pa, qb), abs=1e-12)

    def test_no_common_support_rejected(self):
        vals_a = np.full((3, 3), np.nan)
        vals_a[0, 0] = 0.5
        vals_b = np.full((3, 3), np.nan)
        vals_b[1, 1] = 0.5
        with pytest.raises(MetricsError, match="defined in both"):
            global_jsd(make_map(vals_a), make_map(vals_b))

    def test_all_zero_map_rejected(self):
        a = make_map(np.zeros((3, 3)))
        b = make_map(np.full((3, 3), 0.5))
        with pytest.raises(MetricsError, match="all-zero"):
            global_jsd(a, b)


class TestConfusionCounts:
    def test_addition_and_totals(self):
        a = ConfusionCounts(1, 2, 3, 4)
        b = ConfusionCounts(10, 20, 30, 40)
        c = a + b
        assert c == ConfusionCounts(11, 22, 33, 44)
        assert c.honest_total == 33
        assert c.dishonest_total == 77

    def test_rates(self):
        c = ConfusionCounts(3, 1, 2, 6)
        assert c.reliability() == 0.75
        assert c.security() == 0.75
        assert ConfusionCounts().reliability() is None

    def test_json_round_trip_fields(self):
        c = ConfusionCounts(1, 2, 3, 4)
        assert ConfusionCounts(**c.to_json()) == c
