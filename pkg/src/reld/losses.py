"""Weighted forecasting loss plus the comparison baselines: error-based
reweighting factors and input-preprocessing transforms."""
from __future__ import annotations

import numpy as np

from .series import Series

LOSS_KINDS = ("l2", "l1", "huber")
ERROR_REWEIGHT_KINDS = ("focal_r", "flip_focal_r", "inv_l2")


def elementwise_penalty(residual: np.ndarray, kind: str = "l2", delta: float = 1.0) -> np.ndarray:
    """Per-element penalty: squared error, absolute error, or Huber."""
    r = np.asarray(residual, dtype=np.float64)
    if kind == "l2":
        return r * r
    if kind == "l1":
        return np.abs(r)
    if kind == "huber":
        if not delta > 0:
            raise ValueError(f"huber delta must be > 0, got {delta}")
        a = np.abs(r)
        return np.where(a <= delta, 0.5 * r * r, delta * (a - 0.5 * delta))
    raise ValueError(f"unknown loss kind {kind!r}; expected one of {LOSS_KINDS}")


def elementwise_penalty_grad(residual: np.ndarray, kind: str = "l2", delta: float = 1.0) -> np.ndarray:
    """Derivative of :func:`elementwise_penalty` with respect to the residual."""
    r = np.asarray(residual, dtype=np.float64)
    if kind == "l2":
        return 2.0 * r
    if kind == "l1":
        return np.sign(r)
    if kind == "huber":
        if not delta > 0:
            raise ValueError(f"huber delta must be > 0, got {delta}")
        return np.clip(r, -delta, delta)
    raise ValueError(f"unknown loss kind {kind!r}; expected one of {LOSS_KINDS}")


def weighted_loss(
    y: np.ndarray,
    y_hat: np.ndarray,
    w: np.ndarray,
    kind: str = "l2",
    delta: float = 1.0,
) -> float:
    """Per-dimension weighted window loss.

    For the squared-error kind this is
    (1 / (m * O)) * sum_j w_j * sum_i (y[i, j] - y_hat[i, j])^2;
    the l1 and huber kinds substitute their per-element penalty under the same
    weighting. With all-ones weights and kind "l2" this is the plain MSE.
    """
    ym = np.asarray(y, dtype=np.float64)
    if ym.ndim == 1:
        ym = ym[:, None]
    ph = np.asarray(y_hat, dtype=np.float64)
    if ph.ndim == 1:
        ph = ph[:, None]
    if ym.shape != ph.shape:
        raise ValueError(f"shape mismatch: target {ym.shape} vs prediction {ph.shape}")
    wv = np.asarray(w, dtype=np.float64).ravel()
    if wv.shape[0] != ym.shape[1]:
        raise ValueError(f"weight vector has {wv.shape[0]} entries for {ym.shape[1]} dimensions")
    if (wv <= 0).any():
        raise ValueError("weights must be strictly positive")
    o, m = ym.shape
    pen = elementwise_penalty(ph - ym, kind, delta)
    return float((wv * pen.sum(axis=0)).sum() / (m * o))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def error_weight(
    e,
    kind: str = "focal_r",
    beta: float = 1.0,
    gamma: float = 1.0,
    epsilon: float = 1e-8,
):
    """Error-based loss factor for one sample (or an array of samples).

    focal_r:      sigmoid(beta * |e|) ** gamma   (emphasises large errors)
    flip_focal_r: sigmoid(-beta * |e|) ** gamma  (emphasises small errors)
    inv_l2:       1 / (|e| + epsilon)

    The returned factor multiplies the sample's loss.
    """
    if beta <= 0 or gamma <= 0 or epsilon <= 0:
        raise ValueError("beta, gamma, and epsilon must all be > 0")
    a = np.abs(np.asarray(e, dtype=np.float64))
    if not np.all(np.isfinite(a)):
        raise ValueError("error values must be finite")
    if kind == "focal_r":
        out = _sigmoid(beta * a) ** gamma
    elif kind == "flip_focal_r":
        out = _sigmoid(-beta * a) ** gamma
    elif kind == "inv_l2":
        out = 1.0 / (a + epsilon)
    else:
        raise ValueError(f"unknown error reweight kind {kind!r}; expected one of {ERROR_REWEIGHT_KINDS}")
    return float(out) if np.isscalar(e) or np.ndim(e) == 0 else out


def moving_average(series: Series, k: int) -> Series:
    """Trailing moving average of width k; the first k-1 steps average the
    available prefix so the output keeps the input's length and alignment."""
    if k < 1:
        raise ValueError(f"window width k must be >= 1, got {k}")
    if k == 1:
        return series
    vals = series.values
    csum = np.cumsum(vals, axis=0)
    t = vals.shape[0]
    sums = csum.copy()
    sums[k:] = csum[k:] - csum[:-k]
    counts = np.minimum(np.arange(1, t + 1), k).astype(np.float64)
    return Series(sums / counts[:, None], name=f"{series.name}-ma{k}")


def ema(series: Series, alpha: float) -> Series:
    """Exponential smoothing s_t = alpha * x_t + (1 - alpha) * s_{t-1}, s_0 = x_0."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    if alpha == 1.0:
        return series
    vals = series.values
    out = np.empty_like(vals)
    out[0] = vals[0]
    for t in range(1, vals.shape[0]):
        out[t] = alpha * vals[t] + (1.0 - alpha) * out[t - 1]
    return Series(out, name=f"{series.name}-ema{alpha:g}")


def filter_outliers(series: Series, z_threshold: float) -> tuple[Series, np.ndarray]:
    """Replace values beyond z_threshold standard deviations of their dimension.

    Removed values are filled by linear interpolation between the nearest kept
    neighbours (endpoints clamp to the nearest kept value). Dimensions with
    zero spread, or where the threshold would remove everything, are left
    untouched. Returns the filtered series and a T x m boolean replacement mask.
    """
    if not z_threshold > 0:
        raise ValueError(f"z_threshold must be > 0, got {z_threshold}")
    if series.length < 2:
        raise ValueError("outlier filtering needs at least 2 rows")
    vals = series.values.copy()
    mask = np.zeros(vals.shape, dtype=bool)
    idx = np.arange(series.length)
    for j in range(series.num_dims):
        col = vals[:, j]
        sigma = col.std()
        if sigma == 0.0:
            continue
        removed = np.abs(col - col.mean()) > z_threshold * sigma
        if not removed.any() or removed.all():
            continue
        kept = ~removed
        vals[removed, j] = np.interp(idx[removed], idx[kept], col[kept])
        mask[:, j] = removed
    return Series(vals, name=f"{series.name}-filtered"), mask
