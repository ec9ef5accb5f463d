"""Local discrepancy (LD): statistics measuring how different an input window
is from its adjacent output window.

Three metrics are provided. The Welch t-statistic is the primary one; the
Hotelling t-squared and KPSS statistics are alternatives with different
multivariate/stationarity semantics. All are plain statistics, no p-values.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .series import Series, WindowSpec, make_windows

METRIC_KINDS = ("welch", "hotelling", "kpss")
LRV_KINDS = ("simple", "newey-west")

# Windows whose trend-regression residuals have an RMS at or below this
# relative level are treated as exactly trend-stationary (statistic 0).
_KPSS_DEGENERATE_RTOL = 1e-12


class SingularCovarianceError(ValueError):
    """Pooled covariance too ill-conditioned to invert; increase the ridge."""


@dataclass(frozen=True)
class LdMetric:
    """Choice of discrepancy statistic and its numerical parameters.

    epsilon stabilises the Welch denominator when both window variances are
    zero (constant windows). ridge regularises the Hotelling pooled covariance
    before inversion. lrv selects the KPSS long-run variance estimator:
    "simple" is the plain residual variance, "newey-west" adds Bartlett-
    weighted autocovariances up to ``lrv_bandwidth`` lags.
    """

    kind: str = "welch"
    epsilon: float = 1e-8
    ridge: float = 1e-8
    lrv: str = "simple"
    lrv_bandwidth: int = 4
    # The output-window covariance sums over all output points by default; the
    # legacy flag drops the first output point from the covariance (not the mean).
    hotelling_all_output_points: bool = True

    def __post_init__(self) -> None:
        if self.kind not in METRIC_KINDS:
            raise ValueError(f"unknown metric kind {self.kind!r}; expected one of {METRIC_KINDS}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.ridge < 0:
            raise ValueError(f"ridge must be >= 0, got {self.ridge}")
        if self.lrv not in LRV_KINDS:
            raise ValueError(f"unknown long-run variance kind {self.lrv!r}; expected one of {LRV_KINDS}")
        if self.lrv_bandwidth < 0:
            raise ValueError(f"lrv_bandwidth must be >= 0, got {self.lrv_bandwidth}")


@dataclass(frozen=True)
class LdProfile:
    """Per-window discrepancy values over a series.

    ``ld`` has one row per window and one column per dimension for the Welch
    and KPSS metrics; the Hotelling metric is inherently multivariate and
    produces a single column.
    """

    t_values: np.ndarray
    ld: np.ndarray
    metric: LdMetric
    spec: WindowSpec

    @property
    def num_windows(self) -> int:
        return self.ld.shape[0]

    @property
    def num_dims(self) -> int:
        return self.ld.shape[1]


def _as_2d(arr: np.ndarray, side: str) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64)
    if out.ndim == 1:
        out = out[:, None]
    if out.ndim != 2:
        raise ValueError(f"{side} window must be 1-D or 2-D, got shape {out.shape}")
    if out.shape[0] < 2:
        raise ValueError(f"{side} window needs >= 2 rows for a sample variance, got {out.shape[0]}")
    return out


def welch_ld(x: np.ndarray, y: np.ndarray, epsilon: float = 1e-8) -> np.ndarray:
    """Welch-style discrepancy between adjacent windows, per dimension.

    (mean(x) - mean(y)) / sqrt(var(x)/I + var(y)/O + epsilon) with unbiased
    variances. epsilon > 0 keeps the value finite when both variances vanish;
    epsilon = 0 is accepted for exact scale-invariance checks.
    """
    xm = _as_2d(x, "input")
    ym = _as_2d(y, "output")
    if xm.shape[1] != ym.shape[1]:
        raise ValueError(f"dimension mismatch: input has {xm.shape[1]} columns, output {ym.shape[1]}")
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    i, o = xm.shape[0], ym.shape[0]
    num = xm.mean(axis=0) - ym.mean(axis=0)
    den = np.sqrt(xm.var(axis=0, ddof=1) / i + ym.var(axis=0, ddof=1) / o + epsilon)
    return num / den


def hotelling_ld(
    x: np.ndarray,
    y: np.ndarray,
    ridge: float = 1e-8,
    all_output_points: bool = True,
) -> float:
    """Hotelling t-squared discrepancy between adjacent windows (scalar >= 0).

    (I*O / (I+O)) * (mean(x) - mean(y))' pooled_cov^-1 (mean(x) - mean(y)),
    where pooled_cov = ((I-1) cov(x) + (O-1) cov(y)) / (I+O-2) and
    ridge * identity is added before inversion.

    With ``all_output_points`` False the output covariance sums only over the
    output rows after the first one (keeping the 1/(O-1) divisor); the output
    mean always uses all O rows.

    Raises
    ------
    SingularCovarianceError
        When the ridged pooled covariance has a condition estimate above
        1/machine-epsilon (or a non-positive eigenvalue).
    """
    xm = _as_2d(x, "input")
    ym = _as_2d(y, "output")
    if xm.shape[1] != ym.shape[1]:
        raise ValueError(f"dimension mismatch: input has {xm.shape[1]} columns, output {ym.shape[1]}")
    i, o, m = xm.shape[0], ym.shape[0], xm.shape[1]
    if i + o < m + 2:
        raise ValueError(f"need input_len + output_len >= num_dims + 2, got {i}+{o} with m={m}")
    if ridge < 0:
        raise ValueError(f"ridge must be >= 0, got {ridge}")

    mx = xm.mean(axis=0)
    my = ym.mean(axis=0)
    dx = xm - mx
    cov_x = dx.T @ dx / (i - 1)
    dy = (ym if all_output_points else ym[1:]) - my
    cov_y = dy.T @ dy / (o - 1)
    pooled = ((i - 1) * cov_x + (o - 1) * cov_y) / (i + o - 2)
    a = pooled + ridge * np.eye(m)

    eigs = np.linalg.eigvalsh(a)
    _check_conditioning(eigs[np.newaxis, :], ridge, t_values=None)
    diff = mx - my
    sol = np.linalg.solve(a, diff)
    return float(i * o / (i + o) * diff @ sol)


def _check_conditioning(eigs: np.ndarray, ridge: float, t_values: np.ndarray | None) -> None:
    """eigs: (N, m) eigenvalues of each ridged pooled covariance."""
    cond_limit = 1.0 / np.finfo(np.float64).eps
    smallest = eigs[:, 0]
    largest = eigs[:, -1]
    with np.errstate(divide="ignore", invalid="ignore"):
        bad = (~np.isfinite(eigs).all(axis=1)) | (smallest <= 0) | (largest / smallest > cond_limit)
    if bad.any():
        where = ""
        if t_values is not None:
            where = f" at window t={int(t_values[int(np.argmax(bad))])}"
        raise SingularCovarianceError(
            f"pooled covariance numerically singular{where} (ridge={ridge:g}); increase ridge"
        )


def _trend_residuals(window: np.ndarray) -> np.ndarray:
    """OLS residuals of a 1-D sequence regressed on intercept + linear time trend."""
    n = window.shape[0]
    k = np.arange(n, dtype=np.float64)
    kc = k - k.mean()
    slope = (kc @ (window - window.mean())) / (kc @ kc)
    return window - window.mean() - slope * kc


def _long_run_variance(resid: np.ndarray, lrv: str, bandwidth: int) -> float:
    n = resid.shape[0]
    sigma2 = float(resid @ resid) / n
    if lrv == "newey-west":
        for h in range(1, min(bandwidth, n - 1) + 1):
            gamma = float(resid[h:] @ resid[:-h]) / n
            sigma2 += 2.0 * (1.0 - h / (bandwidth + 1.0)) * gamma
    return sigma2


def kpss_ld(window: np.ndarray, lrv: str = "simple", bandwidth: int = 4) -> float:
    """KPSS trend-stationarity statistic of one concatenated in-output window.

    Steps: (1) regress the sequence on intercept + linear time trend by OLS;
    (2) form the running partial sums of the residuals; (3) return
    sum(partial_sums^2) / (n^2 * long_run_variance). A window lying exactly on
    a line has zero residuals and returns 0 (the 0/0 convention); numerically
    this triggers when the residual RMS is at or below 1e-12 of the window
    scale, where the ratio would measure rounding noise rather than structure.
    """
    w = np.asarray(window, dtype=np.float64).ravel()
    n = w.shape[0]
    if n < 3:
        raise ValueError(f"KPSS needs a window of length >= 3, got {n}")
    if lrv not in LRV_KINDS:
        raise ValueError(f"unknown long-run variance kind {lrv!r}; expected one of {LRV_KINDS}")
    resid = _trend_residuals(w)
    scale = max(1.0, float(np.abs(w).max()))
    rss = float(resid @ resid)
    if rss <= n * (_KPSS_DEGENERATE_RTOL * scale) ** 2:
        return 0.0
    partial = np.cumsum(resid)
    sigma2 = _long_run_variance(resid, lrv, bandwidth)
    return float(partial @ partial / (n * n * sigma2))


def ld_profile(series: Series, spec: WindowSpec, metric: LdMetric = LdMetric()) -> LdProfile:
    """Apply the chosen discrepancy metric to every window pair of the series.

    Welch and KPSS are computed independently per dimension; Hotelling yields
    one column. Rows are ordered by prediction time, matching
    :func:`reld.series.make_windows`.
    """
    windows = make_windows(series, spec)
    t_values = windows.t_values
    if metric.kind == "welch":
        ld = _welch_profile(series.values, spec, len(windows), metric.epsilon)
    elif metric.kind == "kpss":
        ld = _kpss_profile(series.values, spec, len(windows), metric.lrv, metric.lrv_bandwidth)
    else:
        ld = _hotelling_profile(
            series.values, spec, len(windows), t_values, metric.ridge, metric.hotelling_all_output_points
        )
    return LdProfile(t_values=t_values, ld=ld, metric=metric, spec=spec)


def _window_stacks(values: np.ndarray, spec: WindowSpec, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Input and output window stacks, shapes (N, m, input_len) and (N, m, output_len)."""
    i, s = spec.input_len, spec.stride
    xw = sliding_window_view(values, spec.input_len, axis=0)[0 : n * s : s]
    yw = sliding_window_view(values, spec.output_len, axis=0)[i : i + n * s : s]
    return xw, yw


def _sum_and_sumsq(wins: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return wins.sum(axis=-1), np.einsum("...i,...i->...", wins, wins)


def _welch_profile(values: np.ndarray, spec: WindowSpec, n: int, epsilon: float) -> np.ndarray:
    # Column-centering keeps the windowed sums well conditioned; the statistic
    # itself is invariant to a common shift.
    centered = values - values.mean(axis=0)
    xw, yw = _window_stacks(centered, spec, n)
    i, o = spec.input_len, spec.output_len
    sx, sxx = _sum_and_sumsq(xw)
    sy, syy = _sum_and_sumsq(yw)
    mx, my = sx / i, sy / o
    var_x = np.maximum(sxx - sx * mx, 0.0) / (i - 1)
    var_y = np.maximum(syy - sy * my, 0.0) / (o - 1)
    return (mx - my) / np.sqrt(var_x / i + var_y / o + epsilon)


def _kpss_profile(values: np.ndarray, spec: WindowSpec, n: int, lrv: str, bandwidth: int) -> np.ndarray:
    total, s = spec.total_len, spec.stride
    length = total
    k = np.arange(length, dtype=np.float64)
    kc = k - k.mean()
    kden = kc @ kc
    out = np.empty((n, values.shape[1]))
    for j in range(values.shape[1]):
        wins = sliding_window_view(values[:, j], length)[0 : n * s : s]
        means = wins.mean(axis=1)
        slopes = (wins @ kc) / kden
        resid = wins - means[:, None] - slopes[:, None] * kc[None, :]
        rss = np.einsum("ni,ni->n", resid, resid)
        scale = np.maximum(1.0, np.abs(wins).max(axis=1))
        degenerate = rss <= length * (_KPSS_DEGENERATE_RTOL * scale) ** 2
        sigma2 = rss / length
        if lrv == "newey-west":
            for h in range(1, min(bandwidth, length - 1) + 1):
                gamma = np.einsum("ni,ni->n", resid[:, h:], resid[:, :-h]) / length
                sigma2 = sigma2 + 2.0 * (1.0 - h / (bandwidth + 1.0)) * gamma
        partial = np.cumsum(resid, axis=1)
        ssq = np.einsum("ni,ni->n", partial, partial)
        with np.errstate(divide="ignore", invalid="ignore"):
            stat = ssq / (length * length * sigma2)
        stat[degenerate] = 0.0
        out[:, j] = stat
    return out


def _hotelling_profile(
    values: np.ndarray,
    spec: WindowSpec,
    n: int,
    t_values: np.ndarray,
    ridge: float,
    all_output_points: bool,
) -> np.ndarray:
    i, o = spec.input_len, spec.output_len
    m = values.shape[1]
    if i + o < m + 2:
        raise ValueError(f"need input_len + output_len >= num_dims + 2, got {i}+{o} with m={m}")
    centered = values - values.mean(axis=0)
    xw, yw = _window_stacks(centered, spec, n)

    sx = xw.sum(axis=-1)
    mx = sx / i
    sxx = np.einsum("nai,nbi->nab", xw, xw)
    cov_x = (sxx - i * mx[:, :, None] * mx[:, None, :]) / (i - 1)

    sy_full = yw.sum(axis=-1)
    my = sy_full / o
    if all_output_points:
        syy = np.einsum("nai,nbi->nab", yw, yw)
        cov_y = (syy - o * my[:, :, None] * my[:, None, :]) / (o - 1)
    else:
        yw_tail = yw[:, :, 1:]
        s1 = yw_tail.sum(axis=-1)
        s2 = np.einsum("nai,nbi->nab", yw_tail, yw_tail)
        cross = s1[:, :, None] * my[:, None, :]
        cov_y = (s2 - cross - np.swapaxes(cross, 1, 2) + (o - 1) * my[:, :, None] * my[:, None, :]) / (o - 1)

    pooled = ((i - 1) * cov_x + (o - 1) * cov_y) / (i + o - 2)
    a = pooled + ridge * np.eye(m)
    eigs = np.linalg.eigvalsh(a)
    _check_conditioning(eigs, ridge, t_values)
    diff = mx - my
    sol = np.linalg.solve(a, diff[:, :, None])[:, :, 0]
    v2 = (i * o / (i + o)) * np.einsum("nm,nm->n", diff, sol)
    return v2[:, None]


def periodicity_residual(profile: LdProfile, period_samples: int) -> float:
    """Largest |ld(t + p) - ld(t)| over the profile, across all dimensions.

    A profile computed from an exactly periodic series should return a value
    at rounding-noise level; abrupt changes break the periodicity and inflate
    it by orders of magnitude.
    """
    if period_samples < 1:
        raise ValueError(f"period_samples must be >= 1, got {period_samples}")
    t = profile.t_values
    stride = profile.spec.stride
    if t.shape[0] < 2 or int(t[-1] - t[0]) < 2 * period_samples:
        raise ValueError(
            f"profile spans {int(t[-1] - t[0]) if t.shape[0] else 0} samples; "
            f"needs at least two periods ({2 * period_samples})"
        )
    if period_samples % stride != 0:
        raise ValueError(f"period {period_samples} is not a multiple of the window stride {stride}")
    k = period_samples // stride
    return float(np.abs(profile.ld[k:] - profile.ld[:-k]).max())


def window_moment_residual(
    series: Series, window_len: int, period_samples: int
) -> tuple[float, float]:
    """Largest period-offset change of the windowed mean and variance.

    Uses the population variance (divide by the window length), the form under
    which both moments of a sampled periodic function repeat with the period.
    Returns (mean_residual, variance_residual), maxima over all window starts
    and dimensions.
    """
    if window_len < 1:
        raise ValueError(f"window_len must be >= 1, got {window_len}")
    if period_samples < 1:
        raise ValueError(f"period_samples must be >= 1, got {period_samples}")
    if series.length < window_len + 2 * period_samples:
        raise ValueError(
            f"series length {series.length} too short; needs window_len + 2 periods "
            f"= {window_len + 2 * period_samples}"
        )
    wins = sliding_window_view(series.values, window_len, axis=0)
    means = wins.mean(axis=-1)
    variances = wins.var(axis=-1)
    p = period_samples
    mean_res = float(np.abs(means[p:] - means[:-p]).max())
    var_res = float(np.abs(variances[p:] - variances[:-p]).max())
    return mean_res, var_res
