"""Monte-Carlo posterior-predictive sampling and Gaussian interval
construction at the 90/95/99% levels.

Interval bounds are mu_hat +- z * sigma_hat with z fixed at 1.64, 1.96,
and 2.56; sigma_hat is the population (divide-by-n) standard deviation of
the prediction samples. Widths are built as 2*z*sigma_hat directly so the
cross-level ratios are exact.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .bbb import VariationalParams, sample_weights
from .data import NormalizationSpec, WindowedDataset, denormalize_values
from .errors import EmptyDatasetError, SchemaMismatchError, TooFewSamplesError
from .lstm import sequence_forward
from .numerics import RngStream

Z_LEVELS: dict[int, float] = {90: 1.64, 95: 1.96, 99: 2.56}
LEVELS = (90, 95, 99)

# Window index w draws from stream_id PREDICT_STREAM_BASE + w, so estimates
# do not depend on evaluation order and farms with distinct seeds draw
# independently.
PREDICT_STREAM_BASE = 1 << 32

PREDICTION_CSV_COLUMNS = (
    "timestamp",
    "mu_hat",
    "sigma_hat",
    "lo90",
    "hi90",
    "lo95",
    "hi95",
    "lo99",
    "hi99",
    "w90",
    "w95",
    "w99",
)


@dataclass(frozen=True)
class PredictionSamples:
    """Monte-Carlo predictions (MW) for one window."""

    window_index: int
    samples: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=float)
        if arr.ndim != 1 or arr.shape[0] < 2:
            raise TooFewSamplesError(f"need >= 2 samples, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise TooFewSamplesError("samples must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    def skewness(self) -> float:
        """Sample skewness diagnostic; intervals assume it is near zero."""
        centered = self.samples - self.samples.mean()
        s = np.sqrt(np.mean(centered * centered))
        if s == 0.0:
            return 0.0
        return float(np.mean(centered**3) / s**3)

    def kurtosis(self) -> float:
        """Excess kurtosis diagnostic (0 for a Gaussian)."""
        centered = self.samples - self.samples.mean()
        s2 = np.mean(centered * centered)
        if s2 == 0.0:
            return 0.0
        return float(np.mean(centered**4) / (s2 * s2) - 3.0)


@dataclass(frozen=True)
class IntervalEstimate:
    """Gaussian interval summary of one window's prediction samples."""

    mu_hat: float
    sigma_hat: float
    lower: dict[int, float]
    upper: dict[int, float]
    width: dict[int, float]

    def lower_at(self, level: int, clamp_zero: bool = False) -> float:
        lo = self.lower[level]
        return max(0.0, lo) if clamp_zero else lo


def estimate_interval(ps: PredictionSamples) -> IntervalEstimate:
    """Mean, population std, and the three fixed-z intervals."""
    samples = ps.samples
    mu = float(np.mean(samples))
    sigma = float(np.sqrt(np.mean((samples - mu) ** 2)))
    lower = {}
    upper = {}
    width = {}
    for level in LEVELS:
        z = Z_LEVELS[level]
        lower[level] = mu - z * sigma
        upper[level] = mu + z * sigma
        width[level] = 2.0 * z * sigma
    return IntervalEstimate(mu_hat=mu, sigma_hat=sigma, lower=lower, upper=upper, width=width)


def sample_predictions(
    vp: VariationalParams,
    window: np.ndarray,
    n_samples: int,
    rng: RngStream,
    norm: NormalizationSpec | None = None,
    window_index: int = 0,
) -> PredictionSamples:
    """Draw weights n_samples times and run the window through each draw.

    The window must be in model (normalized) units; outputs are mapped
    back to MW when a normalization spec is given.
    """
    if n_samples < 2:
        raise TooFewSamplesError(f"n_samples must be >= 2, got {n_samples}")
    out = np.empty(n_samples)
    for k in range(n_samples):
        sampled = sample_weights(vp, rng)
        out[k], _ = sequence_forward(window, sampled.weights)
    if norm is not None:
        out = denormalize_values(out, norm)
    return PredictionSamples(window_index=window_index, samples=out)


@dataclass
class WidthSeriesResult:
    """Per-window interval estimates plus their per-level mean widths."""

    estimates: list[IntervalEstimate]
    samples: list[PredictionSamples]
    mean_width: dict[int, float]


def width_series(
    vp: VariationalParams,
    dataset: WindowedDataset,
    n_samples: int,
    seed: int,
    norm: NormalizationSpec | None = None,
) -> WidthSeriesResult:
    """Interval estimate for every window of a dataset, in window order.

    Each window uses its own derived stream, so results are identical no
    matter how the windows are scheduled.
    """
    if len(dataset) == 0:
        raise EmptyDatasetError("no windows to predict")
    estimates = []
    samples = []
    for idx in range(len(dataset)):
        rng = RngStream(seed, PREDICT_STREAM_BASE + idx)
        ps = sample_predictions(vp, dataset.features[idx], n_samples, rng, norm, window_index=idx)
        samples.append(ps)
        estimates.append(estimate_interval(ps))
    mean_width = {
        level: float(np.mean([est.width[level] for est in estimates])) for level in LEVELS
    }
    return WidthSeriesResult(estimates=estimates, samples=samples, mean_width=mean_width)


def write_prediction_csv(
    path, dataset: WindowedDataset, result: WidthSeriesResult, comments: list[str] | None = None
) -> None:
    """One row per test window: mean, std, bounds, and widths per level."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in comments or []:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(PREDICTION_CSV_COLUMNS)
        for idx, est in enumerate(result.estimates):
            row = [dataset.label_timestamp(idx).isoformat(), repr(est.mu_hat), repr(est.sigma_hat)]
            for level in LEVELS:
                row.append(repr(est.lower[level]))
                row.append(repr(est.upper[level]))
            for level in LEVELS:
                row.append(repr(est.width[level]))
            writer.writerow(row)


def read_prediction_csv(path) -> dict[str, np.ndarray | list[str]]:
    """Read a prediction CSV back into column arrays keyed by header name."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows or tuple(rows[0]) != PREDICTION_CSV_COLUMNS:
        raise SchemaMismatchError(f"{path}: unexpected prediction CSV header")
    out: dict[str, np.ndarray | list[str]] = {"timestamp": [r[0] for r in rows[1:]]}
    body = np.array([[float(cell) for cell in r[1:]] for r in rows[1:]], dtype=float)
    for j, name in enumerate(PREDICTION_CSV_COLUMNS[1:]):
        out[name] = body[:, j] if body.size else np.empty(0)
    return out


def write_samples_csv(path, samples: list[PredictionSamples], comments: list[str] | None = None) -> None:
    """Raw Monte-Carlo draws, one row per window, for aggregation studies."""
    n = samples[0].n_samples if samples else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in comments or []:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(["window_index"] + [f"s{k}" for k in range(n)])
        for ps in samples:
            writer.writerow([ps.window_index] + [repr(v) for v in ps.samples])


def read_samples_csv(path) -> list[PredictionSamples]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows or rows[0][0] != "window_index":
        raise SchemaMismatchError(f"{path}: unexpected samples CSV header")
    return [
        PredictionSamples(window_index=int(r[0]), samples=np.array([float(c) for c in r[1:]]))
        for r in rows[1:]
    ]
