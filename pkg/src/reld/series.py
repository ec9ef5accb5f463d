"""Time-series container, CSV ingestion, and rolling-window dataset construction."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class CsvFormatError(ValueError):
    """Raised when an input CSV cannot be parsed into a numeric series."""


@dataclass(frozen=True)
class Series:
    """A length-T, m-variate sequence of finite 64-bit floats.

    The value matrix is copied on construction and frozen (read-only), so a
    ``Series`` and every window sliced from it can be shared across threads.
    """

    values: np.ndarray
    name: str = "series"

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"series values must be a T x m matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            bad = np.argwhere(~np.isfinite(arr))[0]
            raise ValueError(f"series values must be finite; first offender at row {bad[0]}, column {bad[1]}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def num_dims(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class WindowSpec:
    """Rolling-window geometry: input length, output length, and stride.

    Both lengths must be >= 2 because the discrepancy statistics need a sample
    variance on each side of the window pair.
    """

    input_len: int
    output_len: int
    stride: int = 1

    def __post_init__(self) -> None:
        if self.input_len < 2:
            raise ValueError(f"input_len must be >= 2, got {self.input_len}")
        if self.output_len < 2:
            raise ValueError(f"output_len must be >= 2, got {self.output_len}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")

    @property
    def total_len(self) -> int:
        return self.input_len + self.output_len


@dataclass(frozen=True)
class WindowPair:
    """One (input, output) window pair.

    ``t`` is the prediction time: the 0-based index of the first output row.
    ``x`` covers rows [t - input_len, t - 1] and ``y`` rows [t, t + output_len - 1]
    of the source series; both are read-only views, adjacent and non-overlapping.
    """

    t: int
    x: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class WindowSet:
    """All window pairs of a series under a :class:`WindowSpec`, ordered by t."""

    pairs: tuple[WindowPair, ...]
    spec: WindowSpec
    series: Series

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)

    def __getitem__(self, i: int) -> WindowPair:
        return self.pairs[i]

    @property
    def t_values(self) -> np.ndarray:
        return np.array([p.t for p in self.pairs], dtype=np.int64)

    def inputs(self) -> np.ndarray:
        """Stacked input windows, shape (N, input_len, m), as a read-only view."""
        sw = sliding_window_view(self.series.values, self.spec.input_len, axis=0)
        n, s = len(self.pairs), self.spec.stride
        return np.moveaxis(sw[0 : n * s : s], 2, 1)

    def targets(self) -> np.ndarray:
        """Stacked output windows, shape (N, output_len, m), as a read-only view."""
        sw = sliding_window_view(self.series.values, self.spec.output_len, axis=0)
        n, s = len(self.pairs), self.spec.stride
        i = self.spec.input_len
        return np.moveaxis(sw[i : i + n * s : s], 2, 1)


def load_csv(path: str | Path, has_header: bool = True) -> Series:
    """Load a comma-separated numeric file into a :class:`Series`.

    Format: one row per time step, columns numeric with '.' decimal point.
    Lines starting with '#' are skipped (outputs written by the CLI carry a
    flag-recording comment line). With ``has_header`` the first non-comment
    line is a header row; when its first cell is named ``timestamp`` or
    ``date`` the leading column is dropped from every data row.

    Raises
    ------
    CsvFormatError
        On unreadable files, empty files, ragged rows, or non-numeric cells,
        naming the offending row and column (1-based file positions).
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise CsvFormatError(f"cannot read {path}: {exc}") from exc

    rows: list[list[float]] = []
    num_cols: int | None = None
    skip_first_col = False
    header_pending = has_header
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cells = [c.strip() for c in line.split(",")]
        if header_pending:
            header_pending = False
            skip_first_col = bool(cells) and cells[0].lower() in ("timestamp", "date")
            continue
        col_offset = 0
        if skip_first_col:
            cells = cells[1:]
            col_offset = 1
        if num_cols is None:
            num_cols = len(cells)
        elif len(cells) != num_cols:
            raise CsvFormatError(f"{path}: row {line_no}: expected {num_cols} columns, got {len(cells)}")
        parsed = []
        for col_no, cell in enumerate(cells, start=1):
            try:
                value = float(cell)
            except ValueError:
                raise CsvFormatError(
                    f"{path}: row {line_no}, column {col_no + col_offset}: not numeric: {cell!r}"
                ) from None
            if not np.isfinite(value):
                raise CsvFormatError(
                    f"{path}: row {line_no}, column {col_no + col_offset}: not finite: {cell!r}"
                )
            parsed.append(value)
        if not parsed:
            raise CsvFormatError(f"{path}: row {line_no}: no numeric columns")
        rows.append(parsed)

    if not rows:
        raise CsvFormatError(f"{path}: no data rows")
    return Series(np.array(rows, dtype=np.float64), name=path.stem)


def make_windows(series: Series, spec: WindowSpec) -> WindowSet:
    """Construct every rolling window pair of ``series`` under ``spec``.

    Returns N = floor((T - input_len - output_len) / stride) + 1 pairs with
    prediction times input_len, input_len + stride, ... The pair slices are
    read-only views into the series; nothing is copied.
    """
    total = spec.total_len
    if total > series.length:
        raise ValueError(
            f"series too short for windowing: length {series.length} < input_len + output_len = {total}"
        )
    n = (series.length - total) // spec.stride + 1
    vals = series.values
    i, o, s = spec.input_len, spec.output_len, spec.stride
    pairs = tuple(
        WindowPair(t=t, x=vals[t - i : t], y=vals[t : t + o])
        for t in range(i, i + n * s, s)
    )
    return WindowSet(pairs=pairs, spec=spec, series=series)


def window_stats(window: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-dimension mean and unbiased sample variance of a k x m slice (k >= 2)."""
    arr = np.asarray(window, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.shape[0] < 2:
        raise ValueError(f"need at least 2 rows for a sample variance, got {arr.shape[0]}")
    return arr.mean(axis=0), arr.var(axis=0, ddof=1)
