"""Measurement and export layer over trajectory records.

Produces the experiment artifacts: per-step trajectory tables, per-candidate
fan tables (the h values the filter examined at each step), 2-D (h, dh)
histograms over everything the filter scanned, and per-filter summary
reports. Exports are deterministic byte-for-byte: CSV floats use shortest
round-trip formatting and JSON key order follows construction order.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .filters import count_disallowed
from .pipeline import FilterKind, Termination, TrajectoryRecord

TRAJECTORY_COLUMNS = (
    "sample_id", "k", "token", "h", "delta_h",
    "allowed_count", "disallowed_count", "termination",
)
FAN_COLUMNS = ("sample_id", "k", "token", "h_next", "allowed")


@dataclass(frozen=True)
class HistogramSpec:
    """Binning for the (h, dh) histogram.

    61 bins over [-1, 1] on both axes by default; the odd count centers a bin
    at zero so the sign boundary is never split. Out-of-range values clamp to
    the edge bins.
    """

    h_range: tuple[float, float] = (-1.0, 1.0)
    dh_range: tuple[float, float] = (-1.0, 1.0)
    bins_h: int = 61
    bins_dh: int = 61

    def __post_init__(self):
        if self.bins_h < 1 or self.bins_dh < 1:
            raise ValueError("histogram needs at least one bin per axis")
        if self.h_range[0] >= self.h_range[1] or self.dh_range[0] >= self.dh_range[1]:
            raise ValueError("histogram ranges must be non-degenerate")

    def h_edges(self) -> np.ndarray:
        return np.linspace(self.h_range[0], self.h_range[1], self.bins_h + 1)

    def dh_edges(self) -> np.ndarray:
        return np.linspace(self.dh_range[0], self.dh_range[1], self.bins_dh + 1)


@dataclass(frozen=True)
class Histogram:
    h_edges: tuple[float, ...]
    dh_edges: tuple[float, ...]
    counts: np.ndarray  # shape (bins_h, bins_dh), integer

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class FilterReport:
    filter_label: str
    runs: int
    mean_disallowed: float
    stalls: int
    per_run_disallowed: tuple[int, ...]
    histogram: Histogram


@dataclass(frozen=True)
class ExperimentReport:
    per_filter: dict[str, FilterReport]


def trajectory_table(records: Sequence[TrajectoryRecord]) -> list[dict]:
    """One row per (sample, accepted step), ordered by (sample_id, k)."""
    rows = []
    for sample_id, record in enumerate(records):
        for step in record.steps:
            rows.append({
                "sample_id": sample_id,
                "k": step.k,
                "token": step.token,
                "h": step.h_value,
                "delta_h": step.delta_h,
                "allowed_count": step.decision.allowed_count,
                "disallowed_count": step.decision.disallowed_count,
                "termination": record.termination.value,
            })
    return rows


def predicted_fan(record: TrajectoryRecord, sample_id: int = 0) -> list[dict]:
    """One row per candidate the filter examined, with its h and verdict.

    Only meaningful for barrier-filtered runs; no-control records yield an
    empty table.
    """
    if record.filter_kind is FilterKind.NOCONTROL:
        return []
    rows = []
    for decision in record.all_decisions():
        for cand in decision.candidates:
            if not math.isfinite(cand.h_next):
                continue
            rows.append({
                "sample_id": sample_id,
                "k": decision.step,
                "token": cand.token,
                "h_next": cand.h_next,
                "allowed": cand.allowed,
            })
    return rows


def fan_table(records: Sequence[TrajectoryRecord]) -> list[dict]:
    rows = []
    for sample_id, record in enumerate(records):
        rows.extend(predicted_fan(record, sample_id))
    return rows


def attractor_histogram(
    records: Sequence[TrajectoryRecord], spec: HistogramSpec | None = None
) -> Histogram:
    """2-D counts of (h_next, h_next - h_current) over every scanned candidate.

    Both allowed and disallowed candidates count; pairs outside the ranges
    clamp into the edge bins, so the total equals the number of scanned
    candidates carrying h data (all of them, for pipeline-produced records).
    """
    spec = spec or HistogramSpec()
    h_vals: list[float] = []
    dh_vals: list[float] = []
    for record in records:
        for decision in record.all_decisions():
            if not math.isfinite(decision.h_current):
                continue
            for cand in decision.candidates:
                if not math.isfinite(cand.h_next):
                    continue
                h_vals.append(cand.h_next)
                dh_vals.append(cand.h_next - decision.h_current)
    h_edges = spec.h_edges()
    dh_edges = spec.dh_edges()
    h_arr = np.clip(np.asarray(h_vals, dtype=np.float64), spec.h_range[0], spec.h_range[1])
    dh_arr = np.clip(np.asarray(dh_vals, dtype=np.float64), spec.dh_range[0], spec.dh_range[1])
    counts, _, _ = np.histogram2d(h_arr, dh_arr, bins=(h_edges, dh_edges))
    return Histogram(
        h_edges=tuple(float(e) for e in h_edges),
        dh_edges=tuple(float(e) for e in dh_edges),
        counts=counts.astype(np.int64),
    )


def summarize(
    records_per_filter: Mapping[str, Sequence[TrajectoryRecord]],
    spec: HistogramSpec | None = None,
) -> ExperimentReport:
    """Per-filter mean disallowed count, stall count, and histogram."""
    per_filter = {}
    for label, records in records_per_filter.items():
        if not records:
            raise ValueError(f"no records for filter {label!r}")
        per_run = tuple(count_disallowed(r.all_decisions()) for r in records)
        per_filter[label] = FilterReport(
            filter_label=label,
            runs=len(records),
            mean_disallowed=sum(per_run) / len(per_run),
            stalls=sum(1 for r in records if r.termination is Termination.STALLED),
            per_run_disallowed=per_run,
            histogram=attractor_histogram(records, spec),
        )
    return ExperimentReport(per_filter=per_filter)


# ---------------------------------------------------------------------------
# file formats

def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: str | Path, rows: Iterable[dict], columns: Sequence[str]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_value(row[c]) for c in columns])


def _parse_value(column: str, raw: str):
    if column in ("sample_id", "k", "token", "allowed_count", "disallowed_count"):
        return int(raw)
    if column in ("h", "delta_h", "h_next"):
        return float(raw)
    if column == "allowed":
        return raw == "true"
    return raw


def read_csv(path: str | Path) -> list[dict]:
    """Read a table written by :func:`write_csv`, restoring value types."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        return [
            {col: _parse_value(col, raw) for col, raw in zip(header, row)}
            for row in reader
        ]


def histogram_payload(hist: Histogram) -> dict:
    return {
        "h_edges": list(hist.h_edges),
        "dh_edges": list(hist.dh_edges),
        "counts": hist.counts.tolist(),
    }


def report_payload(report: FilterReport) -> dict:
    return {
        "filter": report.filter_label,
        "runs": report.runs,
        "mean_disallowed": report.mean_disallowed,
        "stalls": report.stalls,
        "per_run_disallowed": list(report.per_run_disallowed),
        "histogram": histogram_payload(report.histogram),
    }


def write_json(path: str | Path, payload: dict) -> None:
    with open(path, "w") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


def read_json(path: str | Path) -> dict:
    with open(path) as f:
        return json.load(f)
