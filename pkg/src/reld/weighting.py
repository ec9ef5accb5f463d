"""Turn a discrepancy profile into per-sample loss weights.

The density scheme ("reld") histograms the discrepancy values per dimension,
smooths the histogram with a small Gaussian kernel, and weights each sample by
the smoothed density of its own bin: frequent (normal) states are up-weighted,
rare (abrupt) states down-weighted. The inverse scheme ("invld") is the
ablation weighting 1 / (|ld| + 1) without any density estimation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discrepancy import LdProfile

SCHEMES = ("reld", "invld", "uniform")

# Weights are scaled to mean one per dimension, then floored here so that
# every weight stays strictly positive.
WEIGHT_FLOOR = 1e-6

# When the histogram span is this small relative to the value magnitude, the
# bins would separate samples by floating-point jitter rather than structure,
# so the whole profile is treated as single-valued (one occupied bin).
_MIN_RELATIVE_SPAN = 1e-3


@dataclass(frozen=True)
class Histogram:
    """Equal-width binning of one dimension's discrepancy values."""

    edges: np.ndarray
    counts: np.ndarray

    @property
    def num_bins(self) -> int:
        return self.counts.shape[0]


@dataclass(frozen=True)
class KernelSpec:
    """Symmetric smoothing kernel: Gaussian taps on a bin grid.

    ``size`` must be odd so the kernel has a centre tap; ``sigma`` is in bin
    units. The taps are normalised to sum to one before any edge truncation.
    """

    kind: str = "gaussian"
    size: int = 5
    sigma: float = 2.0

    def __post_init__(self) -> None:
        if self.kind != "gaussian":
            raise ValueError(f"unknown kernel kind {self.kind!r}; only 'gaussian' is supported")
        if self.size < 1 or self.size % 2 == 0:
            raise ValueError(f"kernel size must be an odd positive integer, got {self.size}")
        if not self.sigma > 0:
            raise ValueError(f"kernel sigma must be > 0, got {self.sigma}")

    def taps(self) -> np.ndarray:
        offsets = np.arange(self.size, dtype=np.float64) - self.size // 2
        w = np.exp(-(offsets**2) / (2.0 * self.sigma**2))
        return w / w.sum()


@dataclass(frozen=True)
class DensityEstimate:
    """Kernel-smoothed histogram counts on the same bin grid."""

    edges: np.ndarray
    density: np.ndarray
    kernel: KernelSpec


@dataclass(frozen=True)
class WeightTable:
    """Per-window, per-dimension loss weights, scaled to mean one.

    ``scaling_c`` records the per-dimension factor applied to the raw weights.
    A single-column table (from a Hotelling profile) is broadcast across all
    series dimensions at loss time.
    """

    t_values: np.ndarray
    weights: np.ndarray
    scaling_c: np.ndarray
    scheme: str

    @property
    def num_windows(self) -> int:
        return self.weights.shape[0]

    @property
    def num_dims(self) -> int:
        return self.weights.shape[1]


def _bin_layout(values: np.ndarray, num_bins: int) -> tuple[float, float, bool]:
    """(left edge, bin width, degenerate?) for equal-width bins over the data."""
    lo = float(values.min())
    hi = float(values.max())
    span = hi - lo
    if span <= _MIN_RELATIVE_SPAN * max(1.0, abs(lo), abs(hi)):
        return lo, 1.0, True
    return lo, span / num_bins, False


def _bin_indices(values: np.ndarray, lo: float, width: float, num_bins: int) -> np.ndarray:
    idx = np.floor((values - lo) / width).astype(np.int64)
    return np.clip(idx, 0, num_bins - 1)


def build_histogram(ld: np.ndarray, num_bins: int = 200) -> Histogram:
    """Equal-width histogram of discrepancy values over [min, max].

    A value equal to the right edge of the last bin falls into the last bin;
    every other value goes to bin floor((v - min) / width). A degenerate or
    near-degenerate value range (all values equal up to the relative
    resolution floor) collapses into the first bin, with unit-width edges so
    the edge grid stays strictly ascending.
    """
    values = np.asarray(ld, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError("cannot histogram an empty value list")
    if not np.all(np.isfinite(values)):
        raise ValueError("discrepancy values must be finite")
    if num_bins < 1:
        raise ValueError(f"num_bins must be >= 1, got {num_bins}")
    lo, width, degenerate = _bin_layout(values, num_bins)
    if degenerate:
        edges = lo + np.arange(num_bins + 1, dtype=np.float64)
    else:
        edges = np.linspace(lo, float(values.max()), num_bins + 1)
    idx = _bin_indices(values, lo, width, num_bins)
    counts = np.bincount(idx, minlength=num_bins)
    return Histogram(edges=edges, counts=counts)


def smooth_density(hist: Histogram, kernel: KernelSpec = KernelSpec()) -> DensityEstimate:
    """Convolve histogram counts with the kernel taps (zero-padded at edges).

    Boundary bins lose kernel mass rather than reflecting it, and the result
    is left unnormalised: weights are scaled later anyway.
    """
    density = np.convolve(hist.counts.astype(np.float64), kernel.taps(), mode="same")
    return DensityEstimate(edges=hist.edges, density=density, kernel=kernel)


def normalize_weights(raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scale raw weights to mean one per dimension, flooring at WEIGHT_FLOOR.

    Returns (weights, scaling_c) where scaling_c[j] = N / sum(raw[:, j]). The
    floor is applied after scaling, so a zero raw weight becomes WEIGHT_FLOOR
    while the others keep the pre-floor scale.
    """
    arr = np.asarray(raw, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if not np.all(np.isfinite(arr)) or (arr < 0).any():
        raise ValueError("raw weights must be finite and non-negative")
    sums = arr.sum(axis=0)
    if (sums == 0).any():
        bad = int(np.argmax(sums == 0))
        raise ValueError(f"cannot normalize: weight column {bad} is all zero")
    scaling_c = arr.shape[0] / sums
    weights = np.maximum(arr * scaling_c, WEIGHT_FLOOR)
    # constant columns scale to exactly one (the product above can be an ulp off)
    constant = arr.min(axis=0) == arr.max(axis=0)
    weights[:, constant] = 1.0
    return weights, scaling_c


def reld_weights(
    profile: LdProfile,
    num_bins: int = 200,
    kernel: KernelSpec = KernelSpec(),
) -> WeightTable:
    """Density-proportional weights: each sample gets its bin's smoothed density.

    Each dimension is processed independently: histogram its discrepancy
    values, smooth, look up every sample's bin density, then scale to mean one.
    """
    if profile.num_windows == 0:
        raise ValueError("cannot weight an empty profile")
    raw = np.empty_like(profile.ld)
    for j in range(profile.num_dims):
        col = profile.ld[:, j]
        hist = build_histogram(col, num_bins)
        dens = smooth_density(hist, kernel)
        lo = float(hist.edges[0])
        width = float(hist.edges[1] - hist.edges[0])
        idx = _bin_indices(col, lo, width, hist.num_bins)
        raw[:, j] = dens.density[idx]
    weights, scaling_c = normalize_weights(raw)
    return WeightTable(t_values=profile.t_values, weights=weights, scaling_c=scaling_c, scheme="reld")


def invld_weights(profile: LdProfile) -> WeightTable:
    """Inverse-discrepancy weights 1 / (|ld| + 1), scaled to mean one."""
    if profile.num_windows == 0:
        raise ValueError("cannot weight an empty profile")
    raw = 1.0 / (np.abs(profile.ld) + 1.0)
    weights, scaling_c = normalize_weights(raw)
    return WeightTable(t_values=profile.t_values, weights=weights, scaling_c=scaling_c, scheme="invld")


def uniform_weights(t_values: np.ndarray, num_dims: int) -> WeightTable:
    """All-ones weights aligned with the given prediction times."""
    t = np.asarray(t_values, dtype=np.int64)
    return WeightTable(
        t_values=t,
        weights=np.ones((t.shape[0], num_dims)),
        scaling_c=np.ones(num_dims),
        scheme="uniform",
    )
