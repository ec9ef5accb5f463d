"""Synthetic generators: periodic bases, abrupt events, rectangle trains."""
import numpy as np
import pytest

from reld.series import Series, WindowSpec, make_windows
from reld.synth import (
    AbruptEvent,
    LabeledSeries,
    PeriodicSpec,
    RectSpec,
    gen_periodic,
    gen_rect,
    inject_abrupt,
    window_labels,
)


class TestGenPeriodic:
    def test_noise_free_samples_repeat_exactly(self):
        s = gen_periodic(PeriodicSpec(length=512, period=64))
        v = s.values[:, 0]
        assert np.array_equal(v[:-64], v[64:])

    def test_amplitude_bound(self):
        spec = PeriodicSpec(
            length=300, period=50, amplitude=2.0,
            components=((1.0, 1.0, 0.0), (3.0, 0.5, 1.0)),
        )
        s = gen_periodic(spec)
        assert np.abs(s.values).max() <= 2.0 * (1.0 + 0.5) + 1e-12

    def test_seeded_determinism(self):
        spec = PeriodicSpec(length=256, period=32, noise_sigma=0.3, seed=9)
        a = gen_periodic(spec)
        b = gen_periodic(spec)
        assert np.array_equal(a.values, b.values)

    def test_different_seeds_differ(self):
        a = gen_periodic(PeriodicSpec(length=256, period=32, noise_sigma=0.3, seed=1))
        b = gen_periodic(PeriodicSpec(length=256, period=32, noise_sigma=0.3, seed=2))
        assert not np.array_equal(a.values, b.values)

    @pytest.mark.parametrize("kwargs", [
        dict(length=100, period=1),
        dict(length=63, period=64),
        dict(length=256, period=32, noise_sigma=-0.1),
        dict(length=256, period=32, components=()),
    ])
    def test_spec_validation(self, kwargs):
        with pytest.raises(ValueError):
            PeriodicSpec(**kwargs)


class TestInjectAbrupt:
    def test_zero_magnitude_fluke_marks_but_does_not_change(self):
        s = Series(np.zeros(50))
        lab = inject_abrupt(s, [AbruptEvent("fluke", start=10, magnitude=0.0)])
        assert np.array_equal(lab.series.values, s.values)
        assert lab.abrupt_mask.sum() == 1 and lab.abrupt_mask[10]

    def test_fluke_adds_magnitude_at_one_index(self):
        s = Series(np.zeros(50))
        lab = inject_abrupt(s, [AbruptEvent("fluke", start=7, magnitude=10.0)])
        assert lab.series.values[7, 0] == 10.0
        assert np.all(lab.series.values[np.arange(50) != 7] == 0.0)

    def test_trend_shift_is_persistent_step(self):
        s = Series(np.zeros(30))
        lab = inject_abrupt(s, [AbruptEvent("trend_shift", start=12, magnitude=3.0)])
        assert np.all(lab.series.values[:12] == 0.0)
        assert np.all(lab.series.values[12:] == 3.0)
        # only the transition index is labelled: afterwards the series is
        # locally consistent again at the new level
        assert lab.abrupt_mask.sum() == 1 and lab.abrupt_mask[12]

    def test_freq_change_rewrites_interval_at_compressed_period(self):
        spec = PeriodicSpec(length=512, period=64)
        s = gen_periodic(spec)
        lab = inject_abrupt(
            s, [AbruptEvent("freq_change", start=128, duration=64, magnitude=2.0)], periodic=spec
        )
        seg = lab.series.values[128:192, 0]
        expected = np.sin(2 * np.pi * np.arange(128, 192) / 32.0)
        assert np.allclose(seg, expected, atol=1e-12)
        assert lab.abrupt_mask[128:192].all()
        assert lab.abrupt_mask.sum() == 64
        assert np.array_equal(lab.series.values[:128], s.values[:128])

    def test_freq_change_requires_periodic_spec(self):
        with pytest.raises(ValueError, match="PeriodicSpec"):
            inject_abrupt(Series(np.zeros(50)), [AbruptEvent("freq_change", start=5, duration=4, magnitude=2.0)])

    def test_overlapping_events_rejected(self):
        s = Series(np.zeros(50))
        events = [
            AbruptEvent("trend_shift", start=10, duration=5, magnitude=1.0),
            AbruptEvent("fluke", start=12, magnitude=1.0),
        ]
        with pytest.raises(ValueError, match="overlapping"):
            inject_abrupt(s, events)

    def test_out_of_bounds_rejected(self):
        with pytest.raises(ValueError, match="exceeds"):
            inject_abrupt(Series(np.zeros(10)), [AbruptEvent("fluke", start=10, magnitude=1.0)])

    def test_event_kind_validation(self):
        with pytest.raises(ValueError, match="unknown event kind"):
            AbruptEvent("spike", start=1)
        with pytest.raises(ValueError, match="duration 1"):
            AbruptEvent("fluke", start=1, duration=3)


class TestGenRect:
    def test_plain_square_wave(self):
        lab = gen_rect(RectSpec(length=128, period=16, duty=0.5, amplitude=2.0))
        v = lab.series.values[:, 0]
        assert set(np.unique(v)) == {0.0, 2.0}
        assert np.all(v[:8] == 2.0) and np.all(v[8:16] == 0.0)
        assert not lab.abrupt_mask.any()

    def test_amplitude_growth_per_period(self):
        lab = gen_rect(RectSpec(length=96, period=16, duty=0.25, amplitude=1.0, amplitude_growth=1.5))
        v = lab.series.values[:, 0]
        assert v[0] == 1.0
        assert v[16] == 1.5
        assert v[32] == pytest.approx(2.25)

    def test_zero_removal_prob_matches_unbroken(self):
        base = gen_rect(RectSpec(length=128, period=16, seed=3))
        broken = gen_rect(RectSpec(length=128, period=16, broken=True, removal_prob=0.0, seed=3))
        assert np.array_equal(base.series.values, broken.series.values)
        assert not broken.abrupt_mask.any()

    def test_full_removal(self):
        lab = gen_rect(RectSpec(length=128, period=16, broken=True, removal_prob=1.0))
        assert np.all(lab.series.values == 0.0)
        # mask covers exactly the high part of every period
        assert lab.abrupt_mask.sum() == 8 * 8
        assert lab.abrupt_mask[:8].all() and not lab.abrupt_mask[8:16].any()

    def test_seeded_determinism(self):
        spec = RectSpec(length=256, period=16, broken=True, removal_prob=0.5, seed=11)
        a, b = gen_rect(spec), gen_rect(spec)
        assert np.array_equal(a.series.values, b.series.values)
        assert np.array_equal(a.abrupt_mask, b.abrupt_mask)

    @pytest.mark.parametrize("kwargs", [
        dict(length=128, period=16, duty=0.0),
        dict(length=128, period=16, duty=1.0),
        dict(length=128, period=16, removal_prob=1.5),
        dict(length=128, period=16, amplitude_growth=0.9),
    ])
    def test_spec_validation(self, kwargs):
        with pytest.raises(ValueError):
            RectSpec(**kwargs)


class TestWindowLabels:
    def test_all_clear_mask(self):
        lab = LabeledSeries(series=Series(np.zeros(30)), abrupt_mask=np.zeros(30, dtype=bool))
        labels = window_labels(lab, WindowSpec(4, 4))
        assert not labels.any()

    def test_single_masked_index_overlap_enumeration(self):
        q, i, o = 15, 4, 3
        mask = np.zeros(30, dtype=bool)
        mask[q] = True
        lab = LabeledSeries(series=Series(np.zeros(30)), abrupt_mask=mask)
        spec = WindowSpec(i, o)
        labels = window_labels(lab, spec)
        windows = make_windows(lab.series, spec)
        for k, pair in enumerate(windows):
            expected = pair.t <= q <= pair.t + o - 1
            assert labels[k] == expected

    def test_all_masked(self):
        lab = LabeledSeries(series=Series(np.zeros(30)), abrupt_mask=np.ones(30, dtype=bool))
        assert window_labels(lab, WindowSpec(4, 4)).all()

    def test_input_only_overlap_is_normal(self):
        # an event strictly inside the input region does not label the window
        mask = np.zeros(20, dtype=bool)
        mask[0] = True
        lab = LabeledSeries(series=Series(np.zeros(20)), abrupt_mask=mask)
        labels = window_labels(lab, WindowSpec(4, 4))
        assert not labels.any()

    def test_mask_length_validation(self):
        with pytest.raises(ValueError, match="mask shape"):
            LabeledSeries(series=Series(np.zeros(10)), abrupt_mask=np.zeros(9, dtype=bool))
