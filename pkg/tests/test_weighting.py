"""Histogram, kernel smoothing, and the weighting schemes."""
import math

import numpy as np
import pytest

from reld.discrepancy import LdMetric, LdProfile, ld_profile
from reld.series import Series, WindowSpec
from reld.weighting import (
    WEIGHT_FLOOR,
    Histogram,
    KernelSpec,
    build_histogram,
    invld_weights,
    normalize_weights,
    reld_weights,
    smooth_density,
    uniform_weights,
)


def _profile_from(ld_column, t0=2):
    ld = np.asarray(ld_column, dtype=np.float64)
    if ld.ndim == 1:
        ld = ld[:, None]
    return LdProfile(
        t_values=np.arange(t0, t0 + ld.shape[0], dtype=np.int64),
        ld=ld,
        metric=LdMetric("welch"),
        spec=WindowSpec(2, 2),
    )


class TestBuildHistogram:
    def test_degenerate_single_value(self):
        hist = build_histogram([5.0, 5.0, 5.0], num_bins=200)
        assert hist.counts.sum() == 3
        assert hist.counts[0] == 3
        assert (hist.counts[1:] == 0).all()
        assert np.all(np.diff(hist.edges) > 0)

    def test_hand_binning_with_right_edge_rule(self):
        hist = build_histogram([0.0, 1.0, 2.0, 3.0], num_bins=4)
        assert list(hist.counts) == [1, 1, 1, 1]
        assert hist.edges[0] == 0.0 and hist.edges[-1] == 3.0

    def test_counts_conserved_on_random_inputs(self):
        rng = np.random.default_rng(20)
        for _ in range(200):
            n = int(rng.integers(1, 500))
            vals = rng.normal(0, 10, n)
            bins = int(rng.integers(1, 300))
            assert build_histogram(vals, bins).counts.sum() == n

    def test_equal_width_ascending_edges(self):
        hist = build_histogram(np.linspace(-3, 7, 101), num_bins=50)
        widths = np.diff(hist.edges)
        assert np.allclose(widths, widths[0], rtol=1e-9)
        assert np.all(widths > 0)

    def test_near_degenerate_range_collapses(self):
        # spread far below the resolution floor: jitter must not split bins
        vals = 0.5 + np.linspace(0, 1e-7, 50)
        hist = build_histogram(vals, num_bins=200)
        assert hist.counts[0] == 50

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            build_histogram([])

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            build_histogram([1.0, np.inf])


class TestKernelSpec:
    @pytest.mark.parametrize("kwargs", [
        dict(size=4),
        dict(size=0),
        dict(sigma=0.0),
        dict(kind="box"),
    ])
    def test_rejects_bad_parameters(self, kwargs):
        with pytest.raises(ValueError):
            KernelSpec(**kwargs)

    def test_taps_symmetric_and_normalised(self):
        taps = KernelSpec(size=7, sigma=1.5).taps()
        assert taps.sum() == pytest.approx(1.0, rel=1e-12)
        assert np.allclose(taps, taps[::-1])
        assert np.argmax(taps) == 3


class TestSmoothDensity:
    def test_size_one_kernel_is_identity(self):
        hist = build_histogram(np.arange(20.0), num_bins=10)
        dens = smooth_density(hist, KernelSpec(size=1, sigma=2.0))
        assert np.array_equal(dens.density, hist.counts.astype(float))

    def test_impulse_response(self):
        counts = np.zeros(21, dtype=np.int64)
        counts[10] = 1
        hist = Histogram(edges=np.arange(22.0), counts=counts)
        kernel = KernelSpec(size=5, sigma=2.0)
        dens = smooth_density(hist, kernel)
        assert (dens.density > 0).sum() == 5
        assert np.argmax(dens.density) == 10
        assert np.allclose(dens.density[8:13], kernel.taps())

    def test_hand_convolution(self):
        counts = np.array([0, 4, 0], dtype=np.int64)
        hist = Histogram(edges=np.arange(4.0), counts=counts)
        dens = smooth_density(hist, KernelSpec(size=3, sigma=1.0))
        w = math.exp(-0.5)
        denom = 1.0 + 2.0 * w
        expected = 4.0 * np.array([w, 1.0, w]) / denom
        assert np.allclose(dens.density, expected, rtol=1e-12)

    def test_edges_lose_mass_with_zero_padding(self):
        counts = np.zeros(9, dtype=np.int64)
        counts[0] = 1
        hist = Histogram(edges=np.arange(10.0), counts=counts)
        dens = smooth_density(hist, KernelSpec(size=5, sigma=2.0))
        assert dens.density.sum() < 1.0


class TestReldWeights:
    def test_identical_ld_gives_unit_weights(self):
        table = reld_weights(_profile_from([1.5] * 40))
        assert np.all(table.weights == 1.0)
        assert table.scheme == "reld"

    def test_two_clusters_weight_ratio_matches_density_ratio(self):
        ld = np.array([0.0] * 95 + [10.0] * 5)
        table = reld_weights(_profile_from(ld), num_bins=20)
        w = table.weights[:, 0]
        normal_w, abrupt_w = w[0], w[-1]
        assert abrupt_w < 1.0 < normal_w
        # isolated clusters: smoothed densities are 95*tap0 and 5*tap0
        assert normal_w / abrupt_w == pytest.approx(95.0 / 5.0, rel=1e-9)

    def test_rank_preservation(self):
        rng = np.random.default_rng(21)
        ld = rng.normal(0, 2, 300)
        table = reld_weights(_profile_from(ld), num_bins=40)
        hist = build_histogram(ld, 40)
        dens = smooth_density(hist, KernelSpec())
        width = hist.edges[1] - hist.edges[0]
        idx = np.clip(np.floor((ld - hist.edges[0]) / width).astype(int), 0, 39)
        sample_density = dens.density[idx]
        order = np.argsort(sample_density)
        sorted_w = table.weights[order, 0]
        assert np.all(np.diff(sorted_w) >= -1e-12)

    def test_multivariate_dimensions_independent(self):
        rng = np.random.default_rng(22)
        ld = np.column_stack([rng.normal(0, 1, 100), np.full(100, 2.0)])
        table = reld_weights(_profile_from(ld))
        assert np.all(table.weights[:, 1] == 1.0)
        assert table.weights[:, 0].std() > 0

    def test_deterministic(self):
        rng = np.random.default_rng(23)
        ld = rng.normal(0, 1, 200)
        a = reld_weights(_profile_from(ld))
        b = reld_weights(_profile_from(ld))
        assert np.array_equal(a.weights, b.weights)


class TestInvldWeights:
    def test_hand_example(self):
        table = invld_weights(_profile_from([0.0, 1.0, 3.0]))
        assert np.allclose(table.weights[:, 0], [12.0 / 7.0, 6.0 / 7.0, 3.0 / 7.0], rtol=1e-12)
        assert table.scheme == "invld"

    def test_all_zero_ld_gives_unit_weights(self):
        table = invld_weights(_profile_from([0.0] * 10))
        assert np.all(table.weights == 1.0)

    def test_strictly_decreasing_in_magnitude(self):
        ld = np.array([-4.0, -1.0, 0.0, 0.5, 2.0, 6.0])
        table = invld_weights(_profile_from(ld))
        w = table.weights[:, 0]
        order = np.argsort(np.abs(ld))
        assert np.all(np.diff(w[order]) < 0)


class TestNormalizeWeights:
    def test_constant_column(self):
        w, c = normalize_weights(np.array([2.0, 2.0, 2.0]))
        assert np.array_equal(w[:, 0], [1.0, 1.0, 1.0])
        assert c[0] == 0.5

    def test_mean_one_scaling(self):
        w, c = normalize_weights(np.array([1.0, 3.0]))
        assert np.array_equal(w[:, 0], [0.5, 1.5])
        assert c[0] == 0.5

    def test_zero_entry_clamped_after_scaling(self):
        w, c = normalize_weights(np.array([0.0, 1.0, 3.0]))
        assert w[0, 0] == WEIGHT_FLOOR
        # the others keep the pre-clamp scale c = 3/4
        assert w[1, 0] == pytest.approx(0.75)
        assert w[2, 0] == pytest.approx(2.25)

    def test_all_zero_column_rejected(self):
        with pytest.raises(ValueError, match="all zero"):
            normalize_weights(np.zeros((5, 2)))

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            normalize_weights(np.array([1.0, -0.5]))

    def test_mean_one_invariant_all_schemes(self):
        rng = np.random.default_rng(24)
        series = Series(rng.normal(0, 1, (300, 2)))
        prof = ld_profile(series, WindowSpec(8, 8))
        for table in (
            reld_weights(prof),
            invld_weights(prof),
            uniform_weights(prof.t_values, prof.num_dims),
        ):
            means = table.weights.mean(axis=0)
            assert np.allclose(means, 1.0, atol=1e-12), table.scheme
            assert np.all(table.weights > 0)


class TestUniformWeights:
    def test_all_ones(self):
        table = uniform_weights(np.arange(5), 3)
        assert table.weights.shape == (5, 3)
        assert np.all(table.weights == 1.0)
        assert table.scheme == "uniform"
