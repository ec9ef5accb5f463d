"""Synthetic series with labelled abrupt changes.

Two families: periodic bases (sums of harmonics plus optional Gaussian noise)
into which flukes, frequency changes, and trend shifts can be injected, and
rectangular pulse trains (optionally with randomly removed rectangles, the
"broken" variant). All generators are deterministic functions of their spec;
randomness comes from numpy's default generator (PCG64) seeded per spec.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .series import Series, WindowSpec, make_windows

EVENT_KINDS = ("fluke", "freq_change", "trend_shift")


@dataclass(frozen=True)
class PeriodicSpec:
    """A sampled periodic base: amplitude * sum of sin harmonics, plus noise.

    ``components`` lists (harmonic multiplier, amplitude, phase) triples; the
    top-level ``amplitude`` scales their sum. length must cover at least two
    periods.
    """

    length: int
    period: int
    amplitude: float = 1.0
    components: tuple[tuple[float, float, float], ...] = ((1.0, 1.0, 0.0),)
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.period < 2:
            raise ValueError(f"period must be >= 2 samples, got {self.period}")
        if self.length < 2 * self.period:
            raise ValueError(f"length must cover >= 2 periods, got {self.length} < {2 * self.period}")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not self.components:
            raise ValueError("components must not be empty")


@dataclass(frozen=True)
class AbruptEvent:
    """One injected abrupt change.

    fluke:        adds ``magnitude`` at index ``start`` (duration must be 1).
    freq_change:  rewrites [start, start + duration) with the same component
                  set at period p / |magnitude| (magnitude = frequency
                  multiplier); requires the generating PeriodicSpec.
    trend_shift:  adds ``magnitude`` to every index >= start (a persistent
                  level shift; duration is ignored). Only the transition index
                  is labelled abrupt: once both windows sit at the new level
                  the series is locally normal again.
    """

    kind: str
    start: int
    duration: int = 1
    magnitude: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}; expected one of {EVENT_KINDS}")
        if self.start < 0:
            raise ValueError(f"event start must be >= 0, got {self.start}")
        if self.duration < 1:
            raise ValueError(f"event duration must be >= 1, got {self.duration}")
        if self.kind == "fluke" and self.duration != 1:
            raise ValueError(f"fluke events have duration 1, got {self.duration}")
        if self.kind == "freq_change" and self.magnitude == 0:
            raise ValueError("freq_change magnitude (frequency multiplier) must be nonzero")


@dataclass(frozen=True)
class LabeledSeries:
    """A series together with a per-index abrupt-change mask."""

    series: Series
    abrupt_mask: np.ndarray

    def __post_init__(self) -> None:
        mask = np.asarray(self.abrupt_mask, dtype=bool).copy()
        if mask.shape != (self.series.length,):
            raise ValueError(f"mask shape {mask.shape} does not match series length {self.series.length}")
        mask.setflags(write=False)
        object.__setattr__(self, "abrupt_mask", mask)


@dataclass(frozen=True)
class RectSpec:
    """Rectangular pulse train: high for duty * period samples per period.

    The pulse amplitude is multiplied by ``amplitude_growth`` each period.
    With ``broken`` each rectangle is independently flattened to the low level
    with probability ``removal_prob``; removed rectangles are labelled abrupt.
    """

    length: int
    period: int
    duty: float = 0.5
    amplitude: float = 1.0
    amplitude_growth: float = 1.0
    broken: bool = False
    removal_prob: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.period < 2:
            raise ValueError(f"period must be >= 2 samples, got {self.period}")
        if self.length < 2 * self.period:
            raise ValueError(f"length must cover >= 2 periods, got {self.length} < {2 * self.period}")
        if not 0.0 < self.duty < 1.0:
            raise ValueError(f"duty must be in (0, 1), got {self.duty}")
        if self.amplitude_growth < 1.0:
            raise ValueError(f"amplitude_growth must be >= 1, got {self.amplitude_growth}")
        if not 0.0 <= self.removal_prob <= 1.0:
            raise ValueError(f"removal_prob must be in [0, 1], got {self.removal_prob}")


def periodic_waveform(t: np.ndarray, spec: PeriodicSpec, period: float | None = None) -> np.ndarray:
    """Noise-free waveform values at (possibly fractional) times ``t``.

    For integer harmonic multipliers the time axis is reduced modulo the
    period first, which makes samples one period apart bit-identical.
    """
    times = np.asarray(t, dtype=np.float64)
    p = float(spec.period if period is None else period)
    out = np.zeros_like(times)
    for mult, amp, phase in spec.components:
        tt = np.mod(times, p) if float(mult).is_integer() and float(p).is_integer() else times
        out += amp * np.sin(2.0 * np.pi * mult * tt / p + phase)
    return spec.amplitude * out


def gen_periodic(spec: PeriodicSpec) -> Series:
    """Sample the periodic base at t = 0 .. length-1, adding seeded noise."""
    x = periodic_waveform(np.arange(spec.length), spec)
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.seed)
        x = x + rng.normal(0.0, spec.noise_sigma, spec.length)
    return Series(x[:, None], name="periodic")


def _validate_events(events: list[AbruptEvent] | tuple[AbruptEvent, ...], length: int) -> None:
    intervals = []
    for ev in events:
        end = ev.start + ev.duration
        if end > length:
            raise ValueError(f"event {ev.kind} at {ev.start} (duration {ev.duration}) exceeds series length {length}")
        intervals.append((ev.start, end, ev.kind))
    intervals.sort()
    for (s0, e0, k0), (s1, e1, k1) in zip(intervals, intervals[1:]):
        if s1 < e0:
            raise ValueError(f"overlapping events: {k0} [{s0}, {e0}) and {k1} [{s1}, {e1})")


def inject_abrupt(
    series: Series,
    events: list[AbruptEvent] | tuple[AbruptEvent, ...],
    periodic: PeriodicSpec | None = None,
) -> LabeledSeries:
    """Apply abrupt-change events to a copy of the series and label them.

    The mask marks exactly the modified indices, except for trend shifts where
    only the transition index is marked (see :class:`AbruptEvent`).
    ``periodic`` is required when any event is a frequency change.
    """
    _validate_events(events, series.length)
    vals = series.values.copy()
    mask = np.zeros(series.length, dtype=bool)
    for ev in events:
        if ev.kind == "fluke":
            vals[ev.start, :] += ev.magnitude
            mask[ev.start] = True
        elif ev.kind == "freq_change":
            if periodic is None:
                raise ValueError("freq_change events need the generating PeriodicSpec")
            if series.num_dims != 1:
                raise ValueError("freq_change rewriting is only defined for univariate series")
            seg = np.arange(ev.start, ev.start + ev.duration)
            new_period = periodic.period / abs(ev.magnitude)
            vals[seg, 0] = periodic_waveform(seg, periodic, period=new_period)
            mask[ev.start : ev.start + ev.duration] = True
        else:  # trend_shift
            vals[ev.start :, :] += ev.magnitude
            mask[ev.start] = True
    return LabeledSeries(series=Series(vals, name=series.name), abrupt_mask=mask)


def gen_rect(spec: RectSpec) -> LabeledSeries:
    """Generate the rectangular pulse train, removing rectangles when broken."""
    high_len = int(round(spec.duty * spec.period))
    high_len = min(max(high_len, 1), spec.period - 1)
    vals = np.zeros(spec.length)
    mask = np.zeros(spec.length, dtype=bool)
    rng = np.random.default_rng(spec.seed)
    amp = spec.amplitude
    for start in range(0, spec.length, spec.period):
        hi_end = min(start + high_len, spec.length)
        if spec.broken and rng.random() < spec.removal_prob:
            mask[start:hi_end] = True
        else:
            vals[start:hi_end] = amp
        amp *= spec.amplitude_growth
    return LabeledSeries(series=Series(vals[:, None], name="rect"), abrupt_mask=mask)


def window_labels(labeled: LabeledSeries, spec: WindowSpec) -> np.ndarray:
    """Per-window abrupt flag: true iff the output region overlaps the mask."""
    windows = make_windows(labeled.series, spec)
    o = spec.output_len
    return np.array([labeled.abrupt_mask[p.t : p.t + o].any() for p in windows], dtype=bool)
