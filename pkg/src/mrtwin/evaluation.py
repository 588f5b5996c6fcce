"""Crash-prediction scoring: interval labeling, confusion counts, metrics.

Scoring is interval-based. Each crash owns the window that precedes it; the
rest of the sequence is tiled with negative intervals of the same length
(the final partial tile is kept). An interval counts as predicted if any
alarm falls inside it, so multiple alarms in one window are one prediction,
not several. Ratios with empty denominators are reported as not-applicable
rather than zero, matching how published comparisons handle degenerate
counts.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import ConfigInvalid, IoFailure

NOT_APPLICABLE = "n.a."


class OverlappingWindowsWarning(UserWarning):
    """Two crashes sit closer than one window; their intervals were merged."""


@dataclass(frozen=True)
class GroundTruth:
    """Crash events of one sequence, with the span they happened in."""

    sequence_id: str
    span: tuple[float, float]
    frame_rate: float
    crash_times: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        start, end = self.span
        if not end > start:
            raise ValueError(f"span must be non-empty, got {self.span}")
        previous = None
        for t in self.crash_times:
            if not (start < t < end):
                raise ValueError(f"crash at {t} outside span {self.span}")
            if previous is not None and t <= previous:
                raise ValueError("crash times must be strictly increasing")
            previous = t


@dataclass(frozen=True)
class LabeledInterval:
    """Half-open [start, end) stretch of the sequence with its label."""

    start: float
    end: float
    positive: bool
    merged: bool = False


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int


@dataclass(frozen=True)
class MetricSummary:
    """One scored method. Ratios are None when their denominator is empty."""

    method: str
    tp: int
    fp: int
    tn: int
    fn: int
    tpr: float | None
    fpr: float | None
    f1: float | None
    precision: float | None


@dataclass(frozen=True)
class TtcHistogram:
    """Lead-time distribution: how far before its crash the first alarm of
    each predicted crash fired. Bin i covers gaps [i*bin_width, (i+1)*bin_width),
    with the top boundary folded into the last bin."""

    window_s: float
    bin_width: float
    counts: tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.counts)


def label_windows(gt: GroundTruth, window_s: float) -> tuple[LabeledInterval, ...]:
    """Partition the span into positive pre-crash windows and negative tiles.

    Crashes closer together than ``window_s`` share one merged positive
    interval; that is flagged on the interval and via
    OverlappingWindowsWarning.
    """
    if window_s <= 0.0:
        raise ValueError(f"window_s must be positive, got {window_s}")
    start, end = gt.span
    positives: list[LabeledInterval] = []
    for t in gt.crash_times:
        lo = max(start, t - window_s)
        if positives and lo < positives[-1].end:
            merged = positives.pop()
            warnings.warn(
                f"crashes at {merged.end} and {t} are closer than {window_s} s; "
                "their pre-crash windows were merged",
                OverlappingWindowsWarning,
            )
            positives.append(LabeledInterval(merged.start, t, True, merged=True))
        else:
            positives.append(LabeledInterval(lo, t, True))

    intervals: list[LabeledInterval] = []
    cursor = start
    for pos in positives:
        intervals.extend(_tile_negative(cursor, pos.start, window_s))
        intervals.append(pos)
        cursor = pos.end
    intervals.extend(_tile_negative(cursor, end, window_s))
    return tuple(intervals)


def _tile_negative(start: float, end: float, window_s: float) -> Iterable[LabeledInterval]:
    out = []
    cursor = start
    while end - cursor > 1e-9:
        nxt = min(cursor + window_s, end)
        out.append(LabeledInterval(cursor, nxt, False))
        cursor = nxt
    return out


def confusion(intervals: Sequence[LabeledInterval], alarms: Sequence[float]) -> Confusion:
    """Count interval outcomes. An alarm anywhere inside an interval marks it
    predicted; alarms outside every interval are ignored."""
    tp = fp = tn = fn = 0
    for interval in intervals:
        hit = any(interval.start <= a < interval.end for a in alarms)
        if interval.positive:
            tp, fn = (tp + 1, fn) if hit else (tp, fn + 1)
        else:
            fp, tn = (fp + 1, tn) if hit else (fp, tn + 1)
    return Confusion(tp, fp, tn, fn)


def metrics(method: str, conf: Confusion) -> MetricSummary:
    """Derive TPR/FPR/F1/precision, propagating not-applicable ratios."""
    tpr = conf.tp / (conf.tp + conf.fn) if conf.tp + conf.fn else None
    fpr = conf.fp / (conf.fp + conf.tn) if conf.fp + conf.tn else None
    precision = conf.tp / (conf.tp + conf.fp) if conf.tp + conf.fp else None
    if precision is None or tpr is None or precision + tpr == 0.0:
        f1 = None
    else:
        f1 = 2.0 * precision * tpr / (precision + tpr)
    return MetricSummary(method, conf.tp, conf.fp, conf.tn, conf.fn, tpr, fpr, f1, precision)


def time_to_crash_histogram(
    alarms: Sequence[float], gt: GroundTruth, window_s: float, bin_width: float
) -> TtcHistogram:
    """Histogram of lead times over predicted crashes.

    Lead time is crash time minus the earliest alarm in the crash's window
    (the closed window [t_c - window_s, t_c], so a boundary alarm lands in a
    boundary bin). Merged windows contribute once, measured against their
    final crash, which keeps the histogram total aligned with the TP count.
    """
    if bin_width <= 0.0 or window_s <= 0.0:
        raise ValueError("window_s and bin_width must be positive")
    nbins = math.ceil(window_s / bin_width)
    counts = [0] * nbins
    for interval in label_windows(gt, window_s):
        if not interval.positive:
            continue
        eligible = [a for a in alarms if interval.start <= a <= interval.end]
        if not eligible:
            continue
        gap = interval.end - min(eligible)
        idx = min(int(gap / bin_width), nbins - 1)
        counts[idx] += 1
    return TtcHistogram(window_s, bin_width, tuple(counts))


# --- file ingestion and emission ---

def load_ground_truth(path: str | Path, span: tuple[float, float], frame_rate: float) -> GroundTruth:
    """Read crash events from a csv with header ``sequence_id,crash_time_s``."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as err:
        raise IoFailure(f"cannot read {path}: {err}") from err
    if not rows or [c.strip() for c in rows[0]] != ["sequence_id", "crash_time_s"]:
        raise ConfigInvalid(f"{path}: expected header 'sequence_id,crash_time_s'")
    sequence_id = ""
    times: list[float] = []
    for row in rows[1:]:
        if not row:
            continue
        if len(row) != 2:
            raise ConfigInvalid(f"{path}: malformed row {row!r}")
        sequence_id = row[0].strip()
        times.append(float(row[1]))
    return GroundTruth(sequence_id, span, frame_rate, tuple(sorted(times)))


def load_counts(path: str | Path) -> list[tuple[str, Confusion]]:
    """Read published raw counts: header ``method,tp,fp,tn,fn`` then rows."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as err:
        raise IoFailure(f"cannot read {path}: {err}") from err
    if not rows or [c.strip().lower() for c in rows[0]] != ["method", "tp", "fp", "tn", "fn"]:
        raise ConfigInvalid(f"{path}: expected header 'method,tp,fp,tn,fn'")
    out = []
    for row in rows[1:]:
        if not row:
            continue
        if len(row) != 5:
            raise ConfigInvalid(f"{path}: malformed row {row!r}")
        out.append((row[0].strip(), Confusion(*(int(v) for v in row[1:]))))
    return out


def format_rate(value: float | None) -> str:
    return NOT_APPLICABLE if value is None else format(value, ".3f")


def summary_row(summary: MetricSummary) -> list[str]:
    """Column order used everywhere a summary is printed or written."""
    return [
        summary.method,
        str(summary.tp),
        str(summary.fp),
        str(summary.tn),
        str(summary.fn),
        format_rate(summary.tpr),
        format_rate(summary.fpr),
        format_rate(summary.f1),
        format_rate(summary.precision),
    ]


SUMMARY_HEADER = ["Method", "TP", "FP", "TN", "FN", "TPR", "FPR", "F1", "Prec."]


def write_summary_csv(path: str | Path, summaries: Sequence[MetricSummary]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(SUMMARY_HEADER)
            for summary in summaries:
                writer.writerow(summary_row(summary))
    except OSError as err:
        raise IoFailure(f"cannot write {path}: {err}") from err
    return path
