"""Loading, validation, normalization, splitting, and windowing of
multi-farm power time series.

The on-disk format is a single CSV with header
``timestamp,farm_0,...,farm_{N-1}``, ISO-8601 timestamps at a fixed
(nominally 15-minute) step, one column per farm, values in MW. Lines
starting with ``#`` are metadata comments and are skipped on read.
Internally time is an integer step index measured from a shared origin.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from datetime import datetime, timedelta

import numpy as np

from .errors import (
    DataError,
    DegenerateRangeError,
    EmptySplitError,
    LengthMismatchError,
    MissingValueError,
    NonMonotonicTimeError,
    SchemaMismatchError,
    TooShortError,
)

DEFAULT_STEP_MINUTES = 15
DEFAULT_WINDOW_LEN = 12
DEFAULT_ORIGIN = datetime(2018, 1, 1)


@dataclass(frozen=True)
class PowerSeries:
    """One farm's power trace on a shared uniform time grid.

    ``start`` is the global step index of values[0]; the timestamp of
    sample i is ``origin + (start + i) * step_minutes``.
    """

    farm_id: int
    values: np.ndarray
    origin: datetime = DEFAULT_ORIGIN
    step_minutes: int = DEFAULT_STEP_MINUTES
    start: int = 0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1:
            raise DataError(f"values must be 1-D, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise MissingValueError(f"farm {self.farm_id}: non-finite power value")
        if np.any(vals < 0.0):
            raise DataError(f"farm {self.farm_id}: negative power value")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.shape[0]

    def timestamp(self, i: int) -> datetime:
        return self.origin + timedelta(minutes=self.step_minutes * (self.start + i))


@dataclass(frozen=True)
class NormalizationSpec:
    """Per-farm min/max scaling parameters, fitted on the training split only."""

    farm_id: int
    min_val: float
    max_val: float

    def __post_init__(self):
        if not self.max_val > self.min_val:
            raise DegenerateRangeError(
                f"farm {self.farm_id}: max_val {self.max_val} must exceed min_val {self.min_val}"
            )


@dataclass(frozen=True)
class WindowedDataset:
    """Sliding-window features and one-step-ahead labels for one farm.

    ``label_start`` is the global step index of labels[0], so label i sits
    at timestamp origin + (label_start + i) * step_minutes.
    """

    farm_id: int
    features: np.ndarray  # (n, window_len)
    labels: np.ndarray  # (n,)
    window_len: int
    split_tag: str
    origin: datetime = DEFAULT_ORIGIN
    step_minutes: int = DEFAULT_STEP_MINUTES
    label_start: int = 0

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=float)
        labs = np.asarray(self.labels, dtype=float)
        if feats.ndim != 2 or feats.shape[1] != self.window_len:
            raise DataError(f"features must be (n, {self.window_len}), got {feats.shape}")
        if labs.shape != (feats.shape[0],):
            raise LengthMismatchError("labels must align with feature rows")
        feats.setflags(write=False)
        labs.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labs)

    def __len__(self) -> int:
        return self.labels.shape[0]

    def label_timestamp(self, i: int) -> datetime:
        return self.origin + timedelta(minutes=self.step_minutes * (self.label_start + i))


def _parse_timestamp(text: str, line_no: int) -> datetime:
    try:
        return datetime.fromisoformat(text)
    except ValueError as exc:
        raise SchemaMismatchError(f"line {line_no}: bad timestamp {text!r}") from exc


def load_csv(path) -> list[PowerSeries]:
    """Read a multi-farm CSV into one PowerSeries per farm column.

    Raises SchemaMismatchError for a malformed header, MissingValueError
    for empty/NaN cells, and NonMonotonicTimeError when timestamps are not
    strictly increasing at a constant spacing.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise SchemaMismatchError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0] != "timestamp":
        raise SchemaMismatchError(f"{path}: header must start with 'timestamp'")
    n_farms = len(header) - 1
    for s, name in enumerate(header[1:]):
        if name != f"farm_{s}":
            raise SchemaMismatchError(f"{path}: expected column farm_{s}, got {name!r}")

    times: list[datetime] = []
    cols = np.empty((len(rows) - 1, n_farms), dtype=float)
    for k, row in enumerate(rows[1:], start=2):
        if len(row) != n_farms + 1:
            raise SchemaMismatchError(f"{path}: line {k} has {len(row)} fields, expected {n_farms + 1}")
        times.append(_parse_timestamp(row[0].strip(), k))
        for s, cell in enumerate(row[1:]):
            cell = cell.strip()
            if not cell:
                raise MissingValueError(f"{path}: empty cell at line {k}, farm_{s}")
            try:
                val = float(cell)
            except ValueError as exc:
                raise MissingValueError(f"{path}: unparseable cell {cell!r} at line {k}") from exc
            if not np.isfinite(val):
                raise MissingValueError(f"{path}: non-finite cell at line {k}, farm_{s}")
            cols[k - 2, s] = val

    if len(times) < 2:
        raise NonMonotonicTimeError(f"{path}: need at least 2 rows to fix the time step")
    step = times[1] - times[0]
    if step <= timedelta(0):
        raise NonMonotonicTimeError(f"{path}: timestamps not strictly increasing")
    for k in range(1, len(times)):
        if times[k] - times[k - 1] != step:
            raise NonMonotonicTimeError(
                f"{path}: irregular or non-increasing step at row {k + 2}"
            )
    step_minutes = step.total_seconds() / 60.0
    if step_minutes != int(step_minutes):
        raise NonMonotonicTimeError(f"{path}: step must be a whole number of minutes")

    return [
        PowerSeries(
            farm_id=s,
            values=cols[:, s],
            origin=times[0],
            step_minutes=int(step_minutes),
            start=0,
        )
        for s in range(n_farms)
    ]


def write_csv(path, series: list[PowerSeries], comments: list[str] | None = None) -> None:
    """Write aligned farm series back to the CSV schema (9 significant digits)."""
    if not series:
        raise DataError("nothing to write")
    first = series[0]
    for s in series:
        if len(s) != len(first) or s.start != first.start or s.origin != first.origin:
            raise LengthMismatchError("all farms must share length, origin, and start")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in comments or []:
            fh.write(f"# {line}\n")
        fh.write("timestamp," + ",".join(f"farm_{s.farm_id}" for s in series) + "\n")
        for i in range(len(first)):
            stamp = first.timestamp(i).isoformat()
            vals = ",".join(f"{s.values[i]:.9g}" for s in series)
            fh.write(f"{stamp},{vals}\n")


def split_train_test(
    series: PowerSeries, boundary, window_len: int = DEFAULT_WINDOW_LEN
) -> tuple[PowerSeries, PowerSeries]:
    """Split at a boundary: train takes timestamps strictly before it.

    ``boundary`` is either a global step index or a datetime. Raises
    EmptySplitError when either side is shorter than window_len + 1.
    """
    if isinstance(boundary, datetime):
        delta_min = (boundary - series.origin).total_seconds() / 60.0
        cut = int(np.ceil(delta_min / series.step_minutes)) - series.start
    else:
        cut = int(boundary) - series.start
    cut = max(0, min(len(series), cut))
    min_len = window_len + 1
    if cut < min_len or len(series) - cut < min_len:
        raise EmptySplitError(
            f"farm {series.farm_id}: split at {cut} leaves sides {cut}/{len(series) - cut}, "
            f"need at least {min_len} each"
        )
    train = replace(series, values=series.values[:cut])
    test = replace(series, values=series.values[cut:], start=series.start + cut)
    return train, test


def fit_normalization(train: PowerSeries) -> NormalizationSpec:
    """Min/max of the training split; never call this on test data."""
    lo = float(np.min(train.values))
    hi = float(np.max(train.values))
    if hi <= lo:
        raise DegenerateRangeError(f"farm {train.farm_id}: constant training series")
    return NormalizationSpec(farm_id=train.farm_id, min_val=lo, max_val=hi)


def normalize(series: PowerSeries, spec: NormalizationSpec) -> PowerSeries:
    scale = spec.max_val - spec.min_val
    return replace(series, values=(series.values - spec.min_val) / scale)


def denormalize_values(values, spec: NormalizationSpec) -> np.ndarray:
    return np.asarray(values, dtype=float) * (spec.max_val - spec.min_val) + spec.min_val


def denormalize(series: PowerSeries, spec: NormalizationSpec) -> PowerSeries:
    return replace(series, values=denormalize_values(series.values, spec))


def make_windows(
    series: PowerSeries, window_len: int = DEFAULT_WINDOW_LEN, split_tag: str = "train"
) -> WindowedDataset:
    """Stride-1 windows: window i holds values[i : i+L], label is values[i+L]."""
    if window_len < 1:
        raise TooShortError(f"window_len must be >= 1, got {window_len}")
    if len(series) <= window_len:
        raise TooShortError(
            f"farm {series.farm_id}: series length {len(series)} must exceed window_len {window_len}"
        )
    windows = np.lib.stride_tricks.sliding_window_view(series.values, window_len)
    return WindowedDataset(
        farm_id=series.farm_id,
        features=windows[:-1].copy(),
        labels=series.values[window_len:].copy(),
        window_len=window_len,
        split_tag=split_tag,
        origin=series.origin,
        step_minutes=series.step_minutes,
        label_start=series.start + window_len,
    )
