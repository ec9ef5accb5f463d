"""Delimited exports and figure rendering for pipeline outputs.

Every CSV starts with a '#' comment line recording the full command-line flag
set, so any output can be traced back to the run that produced it. Figures are
rendered headlessly to PNG next to the delimited files.
"""
from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .discrepancy import LdProfile
from .forecaster import EvalReport, LinearForecaster
from .series import Series, WindowSet
from .weighting import DensityEstimate, Histogram, WeightTable

_FIG_KW = dict(figsize=(9, 4), dpi=130)


def flag_comment(argv: list[str] | None) -> str:
    return "# reld " + " ".join(argv) if argv else "#"


def _write_lines(path: Path, comment: str, header: str, rows) -> None:
    with open(path, "w") as fh:
        fh.write(comment + "\n")
        fh.write(header + "\n")
        for row in rows:
            fh.write(row + "\n")


def write_series_csv(path: str | Path, series: Series, comment: str = "#") -> None:
    header = ",".join(f"v{j + 1}" for j in range(series.num_dims))
    rows = (",".join(repr(float(v)) for v in row) for row in series.values)
    _write_lines(Path(path), comment, header, rows)


def write_mask_csv(path: str | Path, mask: np.ndarray, comment: str = "#") -> None:
    _write_lines(Path(path), comment, "abrupt", (str(int(v)) for v in mask))


def load_mask_csv(path: str | Path) -> np.ndarray:
    lines = [
        ln.strip()
        for ln in Path(path).read_text().splitlines()
        if ln.strip() and not ln.startswith("#")
    ]
    return np.array([bool(int(v)) for v in lines[1:]], dtype=bool)


def write_profile_csv(path: str | Path, profile: LdProfile, comment: str = "#") -> None:
    rows = (
        f"{int(profile.t_values[i])},{j},{float(profile.ld[i, j])!r}"
        for i in range(profile.num_windows)
        for j in range(profile.num_dims)
    )
    _write_lines(Path(path), comment, "t,dim,ld", rows)


def write_weights_csv(
    path: str | Path, profile: LdProfile, table: WeightTable, comment: str = "#"
) -> None:
    rows = (
        f"{int(table.t_values[i])},{j},{float(profile.ld[i, j])!r},{float(table.weights[i, j])!r}"
        for i in range(table.num_windows)
        for j in range(table.num_dims)
    )
    _write_lines(Path(path), comment, "t,dim,ld,weight", rows)


def write_density_csv(
    path: str | Path, hist: Histogram, density: DensityEstimate, comment: str = "#"
) -> None:
    rows = (
        f"{float(hist.edges[b])!r},{float(hist.edges[b + 1])!r},{int(hist.counts[b])},{float(density.density[b])!r}"
        for b in range(hist.num_bins)
    )
    _write_lines(Path(path), comment, "bin_left,bin_right,count,density", rows)


def write_loss_trace_csv(path: str | Path, trace: list[float], comment: str = "#") -> None:
    rows = (f"{e},{float(v)!r}" for e, v in enumerate(trace))
    _write_lines(Path(path), comment, "epoch,loss", rows)


def write_report_text(path: str | Path, report: dict, comment: str = "#") -> None:
    with open(path, "w") as fh:
        fh.write(comment + "\n")
        for key, value in report.items():
            fh.write(f"{key}={'' if value is None else value}\n")


def write_report_json(path: str | Path, report: dict, argv: list[str] | None = None) -> None:
    payload = dict(report)
    if argv:
        payload["flags"] = " ".join(argv)
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def eval_report_dict(report: EvalReport, extra: dict | None = None) -> dict:
    out = report.to_dict()
    if extra:
        out.update(extra)
    return out


# ---------------------------------------------------------------------------
# Figures


def save_series_figure(path: str | Path, series: Series, mask: np.ndarray | None = None) -> None:
    fig, ax = plt.subplots(**_FIG_KW)
    t = np.arange(series.length)
    for j in range(series.num_dims):
        ax.plot(t, series.values[:, j], lw=0.8, label=f"v{j + 1}")
    if mask is not None and mask.any():
        ax.fill_between(t, *ax.get_ylim(), where=mask, color="red", alpha=0.2, label="abrupt")
    ax.set_xlabel("t")
    ax.set_ylabel("value")
    if series.num_dims <= 6:
        ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_profile_figure(path: str | Path, profile: LdProfile) -> None:
    fig, ax = plt.subplots(**_FIG_KW)
    for j in range(profile.num_dims):
        ax.plot(profile.t_values, profile.ld[:, j], lw=0.8, label=f"dim {j}")
    ax.set_xlabel("t")
    ax.set_ylabel(f"local discrepancy ({profile.metric.kind})")
    if profile.num_dims <= 6:
        ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_density_figure(
    path: str | Path, hist: Histogram, density: DensityEstimate, dim: int = 0
) -> None:
    fig, ax = plt.subplots(**_FIG_KW)
    centers = 0.5 * (hist.edges[:-1] + hist.edges[1:])
    width = float(hist.edges[1] - hist.edges[0])
    ax.bar(centers, hist.counts, width=width, alpha=0.4, label="histogram")
    ax.plot(centers, density.density, color="crimson", lw=1.2, label="smoothed density")
    ax.set_xlabel(f"local discrepancy (dim {dim})")
    ax.set_ylabel("count")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_weights_figure(path: str | Path, table: WeightTable) -> None:
    fig, ax = plt.subplots(**_FIG_KW)
    for j in range(table.num_dims):
        ax.plot(table.t_values, table.weights[:, j], lw=0.8, label=f"dim {j}")
    ax.axhline(1.0, color="grey", lw=0.6, ls="--")
    ax.set_xlabel("t")
    ax.set_ylabel(f"loss weight ({table.scheme})")
    if table.num_dims <= 6:
        ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_loss_trace_figure(path: str | Path, trace: list[float]) -> None:
    fig, ax = plt.subplots(**_FIG_KW)
    ax.plot(np.arange(len(trace)), trace, lw=1.0)
    ax.set_xlabel("epoch")
    ax.set_ylabel("training loss")
    ax.set_yscale("log")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def save_forecast_figure(
    path: str | Path, model: LinearForecaster, windows: WindowSet, num_samples: int = 3
) -> None:
    """Overlay predictions on targets for a few evenly spaced test windows."""
    n = len(windows)
    picks = np.unique(np.linspace(0, n - 1, min(num_samples, n)).astype(int))
    fig, axes = plt.subplots(1, len(picks), figsize=(4 * len(picks), 3.2), dpi=130, squeeze=False)
    for ax, k in zip(axes[0], picks):
        pair = windows[int(k)]
        pred = model.predict(pair.x)
        t_in = np.arange(pair.t - windows.spec.input_len, pair.t)
        t_out = np.arange(pair.t, pair.t + windows.spec.output_len)
        ax.plot(t_in, pair.x[:, 0], color="black", lw=0.8, label="input")
        ax.plot(t_out, pair.y[:, 0], color="black", lw=0.8, ls="--", label="target")
        ax.plot(t_out, pred[:, 0], color="crimson", lw=1.0, label="forecast")
        ax.set_title(f"t={pair.t}", fontsize=9)
        ax.tick_params(labelsize=7)
    axes[0][0].legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
