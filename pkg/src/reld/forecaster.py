"""A minimal trainable forecaster: one linear map per channel from the input
window to the whole output window, trained by mini-batch gradient descent on
the per-sample weighted loss. Small enough to stay out of the way when
studying how the weighting scheme changes what gets learned."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .losses import (
    elementwise_penalty,
    elementwise_penalty_grad,
    error_weight,
    weighted_loss,
)
from .series import WindowPair, WindowSet
from .weighting import WeightTable

WEIGHT_SCHEMES = ("uniform", "reld", "invld", "error")

_MODEL_TAG = "linear-forecaster-v1"


class LinearForecaster:
    """Channel-independent direct multi-horizon linear model.

    Each dimension j has its own weight matrix W[j] (output_len x input_len)
    and bias b[j] (output_len), mapping that channel's input window to its
    output window in one step. Parameters start at zero.
    """

    def __init__(self, input_len: int, output_len: int, num_dims: int):
        if input_len < 1 or output_len < 1 or num_dims < 1:
            raise ValueError("input_len, output_len, and num_dims must all be >= 1")
        self.input_len = input_len
        self.output_len = output_len
        self.num_dims = num_dims
        self.W = np.zeros((num_dims, output_len, input_len))
        self.b = np.zeros((num_dims, output_len))

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Forecast one window: (input_len, m) -> (output_len, m)."""
        xm = np.asarray(x, dtype=np.float64)
        if xm.ndim == 1:
            xm = xm[:, None]
        if xm.shape != (self.input_len, self.num_dims):
            raise ValueError(f"expected input shape {(self.input_len, self.num_dims)}, got {xm.shape}")
        return np.einsum("joi,ij->oj", self.W, xm) + self.b.T

    def predict_batch(self, xs: np.ndarray) -> np.ndarray:
        """Forecast a stack of windows: (N, input_len, m) -> (N, output_len, m)."""
        arr = np.asarray(xs, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[1:] != (self.input_len, self.num_dims):
            raise ValueError(f"expected input shape (N, {self.input_len}, {self.num_dims}), got {arr.shape}")
        return np.einsum("joi,nij->noj", self.W, arr) + self.b.T[None, :, :]


@dataclass(frozen=True)
class TrainConfig:
    """Everything the trainer needs besides the data and the weight table."""

    learning_rate: float = 0.01
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0
    loss_kind: str = "l2"
    huber_delta: float = 1.0
    weight_scheme: str = "uniform"
    error_kind: str = "focal_r"
    error_beta: float = 1.0
    error_gamma: float = 1.0
    error_epsilon: float = 1e-8
    shuffle: bool = True

    def __post_init__(self) -> None:
        if not self.learning_rate >= 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.weight_scheme not in WEIGHT_SCHEMES:
            raise ValueError(f"unknown weight scheme {self.weight_scheme!r}; expected one of {WEIGHT_SCHEMES}")


@dataclass
class TrainResult:
    model: LinearForecaster
    loss_trace: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class EvalReport:
    """Unweighted test metrics, optionally split into normal/abrupt windows.

    The overall MSE is the count-weighted average of the split values, so
    mse == (count_normal * mse_normal + count_abrupt * mse_abrupt) / N
    whenever labels were supplied. A split value is None when its category is
    empty.
    """

    mse: float
    mae: float
    mse_normal: float | None = None
    mse_abrupt: float | None = None
    count_normal: int = 0
    count_abrupt: int = 0

    def to_dict(self) -> dict:
        return {
            "mse": self.mse,
            "mae": self.mae,
            "mse_normal": self.mse_normal,
            "mse_abrupt": self.mse_abrupt,
            "count_normal": self.count_normal,
            "count_abrupt": self.count_abrupt,
        }


def _resolve_weight_matrix(
    windows: WindowSet, weights: WeightTable | None, scheme: str
) -> np.ndarray:
    n, m = len(windows), windows.series.num_dims
    if scheme in ("uniform", "error"):
        return np.ones((n, m))
    if weights is None:
        raise ValueError(f"weight scheme {scheme!r} requires a weight table")
    if weights.num_windows != n or not np.array_equal(weights.t_values, windows.t_values):
        raise ValueError("weight table is misaligned with the training windows (t values differ)")
    if weights.num_dims == m:
        return weights.weights
    if weights.num_dims == 1:
        # One-column tables (Hotelling profiles) broadcast across channels.
        return np.repeat(weights.weights, m, axis=1)
    raise ValueError(f"weight table has {weights.num_dims} columns for a {m}-dimensional series")


def train(windows: WindowSet, weights: WeightTable | None, cfg: TrainConfig) -> TrainResult:
    """Fit the linear forecaster by mini-batch gradient descent.

    Minimises the batch mean of the per-window weighted loss. Zero parameter
    initialisation and a seeded shuffle make runs bit-reproducible for a given
    (data, weights, config). With the "error" scheme each window's loss and
    gradient are additionally multiplied by an error-based factor computed
    from the current batch predictions (treated as a constant per step).

    Raises RuntimeError naming the epoch and batch if the loss goes non-finite.
    """
    if len(windows) == 0:
        raise ValueError("cannot train on an empty window set")
    xs = windows.inputs()
    ys = windows.targets()
    n, _, m = xs.shape
    o = windows.spec.output_len
    w_mat = _resolve_weight_matrix(windows, weights, cfg.weight_scheme)

    model = LinearForecaster(windows.spec.input_len, o, m)
    rng = np.random.default_rng(cfg.seed)
    trace: list[float] = []
    scale = 1.0 / (m * o)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        epoch_sum = 0.0
        for batch_no, b0 in enumerate(range(0, n, cfg.batch_size)):
            idx = order[b0 : b0 + cfg.batch_size]
            xb, yb, wb = xs[idx], ys[idx], w_mat[idx]
            # overflow on a diverging run is caught by the finite check below
            with np.errstate(over="ignore", invalid="ignore"):
                pred = model.predict_batch(xb)
                resid = pred - yb
                pen = elementwise_penalty(resid, cfg.loss_kind, cfg.huber_delta)
                per_window = scale * (wb * pen.sum(axis=1)).sum(axis=1)
                grad_pred = scale * wb[:, None, :] * elementwise_penalty_grad(
                    resid, cfg.loss_kind, cfg.huber_delta
                )
                if cfg.weight_scheme == "error":
                    factors = error_weight(
                        np.abs(resid).mean(axis=(1, 2)),
                        cfg.error_kind,
                        cfg.error_beta,
                        cfg.error_gamma,
                        cfg.error_epsilon,
                    )
                    per_window = per_window * factors
                    grad_pred = grad_pred * factors[:, None, None]
                batch_loss = float(per_window.mean())
            if not np.isfinite(batch_loss):
                raise RuntimeError(f"training diverged: non-finite loss at epoch {epoch}, batch {batch_no}")
            inv = 1.0 / idx.shape[0]
            model.W -= cfg.learning_rate * inv * np.einsum("noj,nij->joi", grad_pred, xb)
            model.b -= cfg.learning_rate * inv * grad_pred.sum(axis=0).T
            epoch_sum += float(per_window.sum())
        trace.append(epoch_sum / n)
    return TrainResult(model=model, loss_trace=trace)


def evaluate(model: LinearForecaster, windows: WindowSet, labels: np.ndarray | None = None) -> EvalReport:
    """Unweighted MSE/MAE over all windows, split by abrupt labels if given."""
    if len(windows) == 0:
        raise ValueError("cannot evaluate on an empty window set")
    resid = model.predict_batch(windows.inputs()) - windows.targets()
    per_mse = (resid**2).mean(axis=(1, 2))
    per_mae = np.abs(resid).mean(axis=(1, 2))
    mse = float(per_mse.mean())
    mae = float(per_mae.mean())
    if labels is None:
        return EvalReport(mse=mse, mae=mae, count_normal=len(windows))
    lab = np.asarray(labels, dtype=bool)
    if lab.shape[0] != len(windows):
        raise ValueError(f"labels length {lab.shape[0]} does not match window count {len(windows)}")
    n_abrupt = int(lab.sum())
    n_normal = len(windows) - n_abrupt
    return EvalReport(
        mse=mse,
        mae=mae,
        mse_normal=float(per_mse[~lab].mean()) if n_normal else None,
        mse_abrupt=float(per_mse[lab].mean()) if n_abrupt else None,
        count_normal=n_normal,
        count_abrupt=n_abrupt,
    )


def grad_check(
    model: LinearForecaster,
    pair: WindowPair,
    w: np.ndarray,
    kind: str = "l2",
    delta: float = 1.0,
    step: float = 1e-5,
) -> float:
    """Compare the analytic weighted-loss gradient with central differences.

    Probes every parameter of the model at its current values and returns the
    largest relative error, |analytic - numeric| / max(|analytic|, |numeric|).
    Entries smaller than 1e-6 in magnitude are compared absolutely against the
    same floor, since central differences carry ~1e-11 of rounding noise.
    """
    x = pair.x if pair.x.ndim == 2 else pair.x[:, None]
    y = pair.y if pair.y.ndim == 2 else pair.y[:, None]
    wv = np.asarray(w, dtype=np.float64).ravel()
    m, o = model.num_dims, model.output_len

    resid = model.predict(x) - y
    grad_pred = wv[None, :] * elementwise_penalty_grad(resid, kind, delta) / (m * o)
    analytic_w = np.einsum("oj,ij->joi", grad_pred, x)
    analytic_b = grad_pred.T

    def loss_now() -> float:
        return weighted_loss(y, model.predict(x), wv, kind, delta)

    max_err = 0.0
    for params, analytic in ((model.W, analytic_w), (model.b, analytic_b)):
        flat_p = params.reshape(-1)
        flat_a = analytic.reshape(-1)
        for i in range(flat_p.shape[0]):
            orig = flat_p[i]
            flat_p[i] = orig + step
            up = loss_now()
            flat_p[i] = orig - step
            down = loss_now()
            flat_p[i] = orig
            numeric = (up - down) / (2.0 * step)
            denom = max(abs(flat_a[i]), abs(numeric), 1e-6)
            max_err = max(max_err, abs(flat_a[i] - numeric) / denom)
    return max_err


def save_model(model: LinearForecaster, path: str | Path) -> None:
    """Write the model as tagged text: dimensions, then row-major parameters."""
    lines = [_MODEL_TAG, f"{model.num_dims} {model.input_len} {model.output_len}"]
    for j in range(model.num_dims):
        for row in model.W[j]:
            lines.append(" ".join(repr(float(v)) for v in row))
        lines.append(" ".join(repr(float(v)) for v in model.b[j]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path: str | Path) -> LinearForecaster:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != _MODEL_TAG:
        raise ValueError(f"{path}: not a {_MODEL_TAG} file")
    m, input_len, output_len = (int(v) for v in lines[1].split())
    model = LinearForecaster(input_len, output_len, m)
    pos = 2
    for j in range(m):
        for r in range(output_len):
            model.W[j, r] = np.array([float(v) for v in lines[pos].split()])
            pos += 1
        model.b[j] = np.array([float(v) for v in lines[pos].split()])
        pos += 1
    return model
