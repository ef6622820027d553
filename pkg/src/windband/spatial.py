"""Correlation graph over farms and the one-pass neighbor width correction.

Farms become graph nodes; an undirected edge joins two farms whenever the
Pearson correlation of their training-period power is at or above the
threshold (default 0.7). Width correction is "lazy": a farm's width moves
a fraction alpha toward a neighbor only when they disagree by more than
beta MW, evaluated on a snapshot so farm ordering never matters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import PowerSeries
from .errors import (
    ConfigInvalidError,
    DataError,
    LengthMismatchError,
    NegativeWidthError,
    ZeroVarianceError,
)

DEFAULT_THRESHOLD = 0.7


def pearson(x, y) -> float:
    """Pearson correlation of two equal-length, non-constant series."""
    xa = np.asarray(getattr(x, "values", x), dtype=float)
    ya = np.asarray(getattr(y, "values", y), dtype=float)
    if xa.shape != ya.shape or xa.ndim != 1:
        raise LengthMismatchError(f"series shapes differ: {xa.shape} vs {ya.shape}")
    if xa.shape[0] < 2:
        raise LengthMismatchError("need at least 2 points")
    xc = xa - xa.mean()
    yc = ya - ya.mean()
    sx = np.sqrt(np.mean(xc * xc))
    sy = np.sqrt(np.mean(yc * yc))
    if sx == 0.0 or sy == 0.0:
        raise ZeroVarianceError("constant series has undefined correlation")
    r = float(np.mean(xc * yc) / (sx * sy))
    return min(1.0, max(-1.0, r))


@dataclass(frozen=True)
class FarmGraph:
    """Symmetric correlation matrix plus the thresholded edge set."""

    n_farms: int
    corr: np.ndarray
    threshold: float
    edges: frozenset[tuple[int, int]]

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.edges

    def neighbors(self, i: int) -> list[int]:
        out = []
        for a, b in self.edges:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return sorted(out)

    def to_json_dict(self) -> dict:
        return {
            "n_farms": self.n_farms,
            "threshold": self.threshold,
            "corr": [[float(v) for v in row] for row in self.corr],
            "edges": sorted([list(e) for e in self.edges]),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "FarmGraph":
        corr = np.array(doc["corr"], dtype=float)
        return cls(
            n_farms=int(doc["n_farms"]),
            corr=corr,
            threshold=float(doc["threshold"]),
            edges=frozenset((int(a), int(b)) for a, b in doc["edges"]),
        )


def build_graph(series: list[PowerSeries], threshold: float = DEFAULT_THRESHOLD) -> FarmGraph:
    """Pairwise Pearson matrix and edges where r >= threshold (inclusive)."""
    n = len(series)
    if n < 2:
        raise DataError("need at least 2 farms to build a graph")
    length = len(series[0])
    for s in series:
        if len(s) != length:
            raise LengthMismatchError("farm series must be aligned")
    corr = np.eye(n)
    edges = set()
    for i in range(n):
        for j in range(i + 1, n):
            r = pearson(series[i], series[j])
            corr[i, j] = r
            corr[j, i] = r
            if r >= threshold:
                edges.add((i, j))
    corr.setflags(write=False)
    return FarmGraph(n_farms=n, corr=corr, threshold=threshold, edges=frozenset(edges))


def save_graph_json(path, graph: FarmGraph, meta: dict | None = None) -> None:
    doc = {"meta": dict(meta or {}), **graph.to_json_dict()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_graph_json(path) -> FarmGraph:
    with open(path, encoding="utf-8") as fh:
        return FarmGraph.from_json_dict(json.load(fh))


def write_corr_csv(path, graph: FarmGraph, comments: list[str] | None = None) -> None:
    """Correlation matrix as CSV, ready for heat-map rendering."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in comments or []:
            fh.write(f"# {line}\n")
        fh.write("farm," + ",".join(f"farm_{j}" for j in range(graph.n_farms)) + "\n")
        for i in range(graph.n_farms):
            fh.write(f"farm_{i}," + ",".join(repr(float(v)) for v in graph.corr[i]) + "\n")


@dataclass(frozen=True)
class CorrectionConfig:
    """Width-correction thresholds: trigger gap beta (MW) and step alpha."""

    beta: float = 20.0
    alpha: float = 0.5

    def __post_init__(self):
        if self.beta < 0:
            raise ConfigInvalidError(f"beta must be >= 0, got {self.beta}")
        if not (0.0 <= self.alpha <= 1.0):
            raise ConfigInvalidError(f"alpha must lie in [0, 1], got {self.alpha}")


def correct_widths(widths, graph: FarmGraph, cfg: CorrectionConfig) -> np.ndarray:
    """One-pass neighbor correction of per-farm widths at one timestamp.

    Qualifying neighbors (|W_j - W_i| > beta, strict) are found on the
    pre-correction snapshot; each farm then moves by alpha times the mean
    neighbor gap. Gap terms are summed in sorted order so the result is
    invariant under farm relabeling.
    """
    w = np.asarray(widths, dtype=float)
    if w.shape != (graph.n_farms,):
        raise LengthMismatchError(f"expected {graph.n_farms} widths, got shape {w.shape}")
    if np.any(w < 0.0):
        raise NegativeWidthError("widths must be non-negative")
    out = w.copy()
    for i in range(graph.n_farms):
        gaps = sorted(
            w[j] - w[i] for j in graph.neighbors(i) if abs(w[j] - w[i]) > cfg.beta
        )
        if gaps:
            out[i] = w[i] + cfg.alpha * (sum(gaps) / len(gaps))
    return out


def correct_width_table(width_table, graph: FarmGraph, cfg: CorrectionConfig) -> np.ndarray:
    """Apply correct_widths independently to each row of a (T, N) table."""
    table = np.asarray(width_table, dtype=float)
    if table.ndim != 2 or table.shape[1] != graph.n_farms:
        raise LengthMismatchError(f"expected (T, {graph.n_farms}) table, got {table.shape}")
    return np.vstack([correct_widths(row, graph, cfg) for row in table])
