"""MAPE scoring, per-condition extrapolation reports and scatter export."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence, TextIO

import numpy as np

from .dataset import CA_TOKEN, LoadCondition, format_number
from .errors import EmptyInputError, LengthMismatch, NearZeroTruth, SinkFailure
from .nn import Mlp, predict
from .pipeline import DataSplits, Sample, feature_matrix, target_vector

NEAR_ZERO_MM = 1e-9
SCATTER_HEADER = ("subset", "series_id", "R", "R_ol", "N", "a_true", "a_pred")
TABLE_ROWS = (None, 1.5, 2.0)
SCORED_SUBSETS = ("dev_test", "extrapolation")


def mape(a_true, a_pred) -> float:
    """Mean absolute percentage error in percent."""
    a_true = np.asarray(a_true, dtype=np.float64).ravel()
    a_pred = np.asarray(a_pred, dtype=np.float64).ravel()
    if a_true.shape != a_pred.shape:
        raise LengthMismatch(f"a_true has {a_true.size} entries, a_pred has {a_pred.size}")
    if a_true.size == 0:
        raise EmptyInputError("MAPE of an empty sample")
    small = np.flatnonzero(np.abs(a_true) <= NEAR_ZERO_MM)
    if small.size:
        raise NearZeroTruth(int(small[0]), float(a_true[small[0]]))
    return float(100.0 * np.mean(np.abs(a_true - a_pred) / np.abs(a_true)))


@dataclass(frozen=True)
class ScatterPoint:
    subset: str
    series_id: str
    condition: LoadCondition
    cycles: float
    a_true: float
    a_pred: float


@dataclass(frozen=True)
class EvalReport:
    overall_dev_test_mape: float | None
    per_condition: dict[LoadCondition, float]
    counts: dict[LoadCondition, int]
    scatter: tuple[ScatterPoint, ...]
    dev_test_count: int = 0
    # conditions seen in the data but without extrapolation samples
    empty_cells: tuple[LoadCondition, ...] = field(default=())

    def conditions(self) -> list[LoadCondition]:
        return sorted(
            set(self.per_condition) | set(self.empty_cells), key=LoadCondition.sort_key
        )


def _scatter_key(p: ScatterPoint):
    return (SCORED_SUBSETS.index(p.subset), p.condition.sort_key(), p.cycles, p.series_id)


def score_predictions(
    splits: DataSplits, dev_pred: Sequence[float], extrap_pred: Sequence[float]
) -> EvalReport:
    """Build a report from predictions aligned with ``dev_test`` and ``extrapolation``."""
    dev_pred = np.asarray(dev_pred, dtype=np.float64).ravel()
    extrap_pred = np.asarray(extrap_pred, dtype=np.float64).ravel()
    if dev_pred.size != len(splits.dev_test) or extrap_pred.size != len(splits.extrapolation):
        raise LengthMismatch("predictions do not line up with the dev-test/extrapolation subsets")

    overall = mape(target_vector(splits.dev_test), dev_pred) if splits.dev_test else None

    groups: dict[LoadCondition, list[int]] = defaultdict(list)
    for i, s in enumerate(splits.extrapolation):
        groups[s.condition].append(i)
    truth = target_vector(splits.extrapolation)
    per_condition = {}
    counts = {}
    for cond in sorted(groups, key=LoadCondition.sort_key):
        idx = groups[cond]
        per_condition[cond] = mape(truth[idx], extrap_pred[idx])
        counts[cond] = len(idx)

    seen = {s.condition for s in splits.development}
    empty = tuple(sorted(seen - set(groups), key=LoadCondition.sort_key))

    points = [
        ScatterPoint(name, s.series_id, s.condition, s.cycles, s.crack_length, float(p))
        for name, samples, preds in (
            ("dev_test", splits.dev_test, dev_pred),
            ("extrapolation", splits.extrapolation, extrap_pred),
        )
        for s, p in zip(samples, preds)
    ]
    points.sort(key=_scatter_key)
    return EvalReport(overall, per_condition, counts, tuple(points), len(splits.dev_test), empty)


def evaluate(m: Mlp | Callable[[np.ndarray], np.ndarray], splits: DataSplits) -> EvalReport:
    """Score ``m`` on the dev-test subset and per condition on the extrapolation subset.

    ``m`` may also be any callable mapping an (n, 3) raw feature matrix to
    crack lengths, which is how baselines are scored.
    """
    fn = (lambda x: predict(m, x)) if isinstance(m, Mlp) else m

    def run(samples: Sequence[Sample]) -> np.ndarray:
        if not samples:
            return np.empty(0)
        return np.asarray(fn(feature_matrix(samples)), dtype=np.float64).reshape(-1)

    return score_predictions(splits, run(splits.dev_test), run(splits.extrapolation))


def persistence_predictions(splits: DataSplits, samples: Sequence[Sample]) -> np.ndarray:
    """Last development crack length of each sample's series."""
    last: dict[str, Sample] = {}
    for s in splits.development:
        if s.series_id not in last or s.cycles > last[s.series_id].cycles:
            last[s.series_id] = s
    return np.array([last[s.series_id].crack_length for s in samples], dtype=np.float64)


def persistence_baseline(splits: DataSplits) -> dict[LoadCondition, float]:
    """Per-condition extrapolation MAPE of a last-known-value forecast."""
    dev = persistence_predictions(splits, splits.dev_test)
    extrap = persistence_predictions(splits, splits.extrapolation)
    return score_predictions(splits, dev, extrap).per_condition


# --- output --------------------------------------------------------------------


def _overload_text(c: LoadCondition) -> str:
    return CA_TOKEN if c.overload_ratio is None else format_number(c.overload_ratio)


def scatter_text(report: EvalReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SCATTER_HEADER)
    for p in sorted(report.scatter, key=_scatter_key):
        writer.writerow(
            (
                p.subset,
                p.series_id,
                format_number(p.condition.stress_ratio),
                _overload_text(p.condition),
                format_number(p.cycles),
                format_number(p.a_true),
                format_number(p.a_pred),
            )
        )
    return buf.getvalue()


def export_scatter(report: EvalReport, sink: TextIO | str | Path) -> None:
    """Write predicted-vs-true points as plot-ready CSV."""
    if not report.scatter:
        raise ValueError("report has no scatter points to export")
    text = scatter_text(report)
    try:
        if isinstance(sink, (str, Path)):
            with open(sink, "w", newline="", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sink.write(text)
    except OSError as exc:
        raise SinkFailure(f"cannot write scatter CSV: {exc}") from exc


def render_tables(report: EvalReport) -> str:
    """One plain-text table per stress ratio with rows CA, 1.5 and 2.0."""
    conds = report.conditions()
    ratios = sorted({c.stress_ratio for c in conds})
    overloads = list(TABLE_ROWS)
    for c in conds:
        if c.overload_ratio not in overloads:
            overloads.append(c.overload_ratio)
    overloads = [None] + sorted(o for o in overloads if o is not None)

    lines: list[str] = []
    missing = False
    for k, r in enumerate(ratios, start=1):
        if lines:
            lines.append("")
        lines.append(f"Table {k}")
        lines.append(f"MAPE prediction error for R = {r:g}")
        lines.append("Overload ratio R_ol  MAPE (%)")
        for ol in overloads:
            cond = LoadCondition(r, ol)
            label = cond.label
            if cond in report.per_condition:
                lines.append(f"{label:<4}{report.per_condition[cond]:.2f}")
            else:
                missing = True
                lines.append(f"{label:<4}—")
    if missing:
        lines.append("")
        lines.append("— no extrapolation samples for this condition")
    return "\n".join(lines) + "\n"


def format_overall(report: EvalReport) -> str:
    if report.overall_dev_test_mape is None:
        return "MAPE(dev-test) = n/a"
    return f"MAPE(dev-test) = {report.overall_dev_test_mape:.2f}%"

