"""Three-class evaluation: confusion matrices, accuracy, macro-F1, balanced accuracy."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .exceptions import EvaluationError
from .fusion import Prediction
from .market_data import CLASS_ORDER, Horizon, TrendClass

_INDEX = {c: i for i, c in enumerate(CLASS_ORDER)}


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Rows are true classes, columns predicted, both in (Up, Down, Sideways) order."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        if counts.shape != (3, 3):
            raise ValueError("confusion matrix must be 3x3")
        if (counts < 0).any():
            raise ValueError("confusion counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    def __eq__(self, other):
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return bool((self.counts == other.counts).all())

    def __hash__(self):
        return hash(self.counts.tobytes())

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def support(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def absent_classes(self) -> list[TrendClass]:
        return [c for c, n in zip(CLASS_ORDER, self.support()) if n == 0]


def confusion(
    preds: Iterable[Prediction],
    labels: Mapping[tuple, TrendClass] | Iterable[tuple],
) -> ConfusionMatrix:
    """Tally predictions against labels keyed by ``(date, horizon days)``.

    ``labels`` may be a mapping or an iterable of ``(date, horizon, class)``
    where ``horizon`` is a :class:`Horizon` or a day count.
    """
    if not isinstance(labels, Mapping):
        table = {}
        for day, h, cls in labels:
            key = (day, h.days if isinstance(h, Horizon) else int(h))
            if key in table:
                raise EvaluationError(f"duplicate label for {key[0]} / {key[1]}d")
            table[key] = TrendClass(cls)
        labels = table
    counts = np.zeros((3, 3), dtype=np.int64)
    seen = set()
    for p in preds:
        key = p.key()
        if key in seen:
            raise EvaluationError(f"duplicate prediction for {key[0]} / {key[1]}d")
        seen.add(key)
        if key not in labels:
            raise EvaluationError(f"no label for prediction {key[0]} / {key[1]}d")
        counts[_INDEX[TrendClass(labels[key])], _INDEX[p.predicted]] += 1
    return ConfusionMatrix(counts)


def _require_samples(m: ConfusionMatrix):
    if m.total == 0:
        raise EvaluationError("empty confusion matrix")


def accuracy(m: ConfusionMatrix) -> float:
    _require_samples(m)
    return float(np.trace(m.counts)) / m.total


def per_class_f1(m: ConfusionMatrix) -> np.ndarray:
    """F1 per class as 2TP / (2TP + FP + FN); 0 where that denominator is 0."""
    c = m.counts
    tp = np.diag(c).astype(float)
    fp = c.sum(axis=0) - tp
    fn = c.sum(axis=1) - tp
    denom = 2 * tp + fp + fn
    return np.divide(2 * tp, denom, out=np.zeros(3), where=denom > 0)


def macro_f1(m: ConfusionMatrix) -> float:
    _require_samples(m)
    return float(per_class_f1(m).mean())


def per_class_recall(m: ConfusionMatrix) -> np.ndarray:
    """Recall per class; NaN for classes with no true samples."""
    support = m.support().astype(float)
    tp = np.diag(m.counts).astype(float)
    return np.divide(tp, support, out=np.full(3, np.nan), where=support > 0)


def balanced_accuracy(m: ConfusionMatrix) -> float:
    """Mean recall over the classes that occur in the truth."""
    _require_samples(m)
    recall = per_class_recall(m)
    return float(np.mean(recall[~np.isnan(recall)]))


@dataclass(frozen=True)
class EvaluationReport:
    system: str
    horizon: Horizon
    accuracy: float
    macro_f1: float
    balanced_accuracy: float
    matrix: ConfusionMatrix
    n: int
    keys: frozenset = field(default=frozenset(), repr=False)
    absent_classes: tuple = ()
    zero_f1_classes: tuple = ()

    @property
    def flags(self) -> str:
        parts = []
        if self.absent_classes:
            parts.append("absent_truth=" + "|".join(c.value for c in self.absent_classes))
        if self.zero_f1_classes:
            parts.append("zero_f1_denominator=" + "|".join(c.value for c in self.zero_f1_classes))
        return ";".join(parts)


def evaluate(
    preds: Sequence[Prediction], labels: Mapping[tuple, TrendClass], system: str, horizon: Horizon
) -> EvaluationReport:
    preds = [p for p in preds if p.horizon.days == horizon.days]
    if not preds:
        raise EvaluationError(f"no {system} predictions for horizon {horizon.label}")
    m = confusion(preds, labels)
    c = m.counts
    denom = 2 * np.diag(c) + (c.sum(axis=0) - np.diag(c)) + (c.sum(axis=1) - np.diag(c))
    return EvaluationReport(
        system=system,
        horizon=horizon,
        accuracy=accuracy(m),
        macro_f1=macro_f1(m),
        balanced_accuracy=balanced_accuracy(m),
        matrix=m,
        n=m.total,
        keys=frozenset(p.key() for p in preds),
        absent_classes=tuple(m.absent_classes()),
        zero_f1_classes=tuple(cls for cls, d in zip(CLASS_ORDER, denom) if d == 0),
    )


METRICS = ("accuracy", "macro_f1", "balanced_accuracy")


@dataclass(frozen=True)
class ComparisonRow:
    horizon: Horizon
    baseline: EvaluationReport
    ours: EvaluationReport

    def delta(self, metric: str) -> float:
        return getattr(self.ours, metric) - getattr(self.baseline, metric)


def compare(pairs: Iterable[tuple[EvaluationReport, EvaluationReport]]) -> list[ComparisonRow]:
    """Pair ``(baseline, ours)`` reports per horizon, sorted by horizon length."""
    rows = []
    for baseline, ours in pairs:
        if baseline.horizon != ours.horizon:
            raise EvaluationError("compared reports must share a horizon")
        if baseline.keys != ours.keys:
            raise EvaluationError(
                f"systems were evaluated on different (date, horizon) keys for {ours.horizon.label}"
            )
        rows.append(ComparisonRow(ours.horizon, baseline, ours))
    return sorted(rows, key=lambda r: r.horizon.days)


REPORT_HEADER = (
    "asset", "period", "system", "accuracy", "macro_f1", "balanced_acc",
    "delta_accuracy", "delta_macro_f1", "delta_balanced_acc", "n", "flags",
)


def _f4(x: float) -> str:
    return f"{x:.4f}"


def comparison_csv(rows: Sequence[ComparisonRow], asset: str = "BTC") -> str:
    """One line per system and horizon; deltas are relative to the baseline."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(REPORT_HEADER)
    for row in rows:
        for rep in (row.baseline, row.ours):
            deltas = [getattr(rep, m) - getattr(row.baseline, m) for m in METRICS]
            w.writerow(
                [asset, row.horizon.label, rep.system]
                + [_f4(getattr(rep, m)) for m in METRICS]
                + [_f4(d) for d in deltas]
                + [rep.n, rep.flags]
            )
    return out.getvalue()


def reports_csv(reports: Sequence[EvaluationReport], asset: str = "BTC") -> str:
    """Per-report lines without deltas (used when only one system was evaluated)."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("asset", "period", "system", "accuracy", "macro_f1", "balanced_acc", "n", "flags"))
    for rep in sorted(reports, key=lambda r: (r.horizon.days, r.system)):
        w.writerow(
            [asset, rep.horizon.label, rep.system]
            + [_f4(getattr(rep, m)) for m in METRICS]
            + [rep.n, rep.flags]
        )
    return out.getvalue()


def long_format_csv(reports: Sequence[EvaluationReport]) -> str:
    """Plot-ready ``metric,system,horizon,value`` rows."""
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(("metric", "system", "horizon", "value"))
    for rep in sorted(reports, key=lambda r: (r.horizon.days, r.system)):
        for m in METRICS:
            w.writerow((m, rep.system, rep.horizon.label, _f4(getattr(rep, m))))
    return out.getvalue()


def render_table(rows: Sequence[ComparisonRow], asset: str = "BTC") -> str:
    """Console table laid out like a results table: asset, period, system, metrics."""
    lines = [f"{'Asset':<6}{'Period':<8}{'System':<10}{'Accuracy':>10}{'Macro-F1':>10}{'Balanced Acc':>14}"]
    for row in rows:
        for rep in (row.baseline, row.ours):
            lines.append(
                f"{asset:<6}{row.horizon.label:<8}{rep.system:<10}"
                f"{_f4(rep.accuracy):>10}{_f4(rep.macro_f1):>10}{_f4(rep.balanced_accuracy):>14}"
            )
    return "\n".join(lines) + "\n"
