"""Classification metrics, confusion matrices, and report rendering.

Zero-denominator convention: precision, recall, and F1 are defined as 0.0
whenever their denominator is zero.  Classes with zero support still
contribute their (zero) F1 to the macro average; the report lists such
classes explicitly so downstream consumers can tell the two apart.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ClassMetrics",
    "ConfusionMatrix",
    "EvalReport",
    "AblationCell",
    "AblationReport",
    "RowNormalized",
    "confusion_matrix",
    "metrics",
    "row_normalize",
    "render_report",
    "render_ablation",
]

Label = str | int


@dataclass(frozen=True)
class ConfusionMatrix:
    """Square count grid with rows indexed by gold label, columns by prediction."""

    labels: tuple[Label, ...]
    grid: np.ndarray

    def __post_init__(self) -> None:
        if len(self.labels) == 0:
            raise ValueError("confusion matrix needs at least one label")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("confusion matrix labels must be unique")
        grid = np.asarray(self.grid, dtype=np.int64)
        n = len(self.labels)
        if grid.shape != (n, n):
            raise ValueError(f"grid shape {grid.shape} does not match {n} labels")
        if (grid < 0).any():
            raise ValueError("confusion matrix counts must be non-negative")
        grid = grid.copy()
        grid.setflags(write=False)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "grid", grid)

    @property
    def total(self) -> int:
        return int(self.grid.sum())

    @property
    def supports(self) -> np.ndarray:
        """Per-class gold counts (row sums)."""
        return self.grid.sum(axis=1)


def confusion_matrix(
    golds: Sequence[Label], preds: Sequence[Label], labels: Sequence[Label]
) -> ConfusionMatrix:
    """Count gold/predicted pairs into a grid ordered by ``labels``."""
    if len(golds) != len(preds):
        raise ValueError(f"got {len(golds)} gold labels but {len(preds)} predictions")
    if len(golds) == 0:
        raise ValueError("cannot build a confusion matrix from zero documents")
    index = {label: i for i, label in enumerate(labels)}
    grid = np.zeros((len(index), len(index)), dtype=np.int64)
    for gold, pred in zip(golds, preds):
        if gold not in index:
            raise ValueError(f"unknown gold label {gold!r}")
        if pred not in index:
            raise ValueError(f"unknown predicted label {pred!r}")
        grid[index[gold], index[pred]] += 1
    return ConfusionMatrix(labels=tuple(labels), grid=grid)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class EvalReport:
    """Aggregate and per-class scores, stored as fractions in [0, 1]."""

    accuracy: float
    macro_f1: float
    weighted_f1: float
    per_class: dict[Label, ClassMetrics]
    zero_support: tuple[Label, ...] = ()

    def __post_init__(self) -> None:
        for name in ("accuracy", "macro_f1", "weighted_f1"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")

    def to_dict(self) -> dict[str, object]:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "weighted_f1": self.weighted_f1,
            "per_class": {
                str(label): {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                }
                for label, m in self.per_class.items()
            },
            "zero_support": [str(label) for label in self.zero_support],
        }


def metrics(cm: ConfusionMatrix) -> EvalReport:
    """Compute accuracy, per-class P/R/F1, macro F1, and weighted F1."""
    total = cm.total
    if total == 0:
        raise ValueError("confusion matrix is empty")
    grid = cm.grid
    per_class: dict[Label, ClassMetrics] = {}
    zero_support: list[Label] = []
    f1s = []
    supports = []
    for i, label in enumerate(cm.labels):
        tp = int(grid[i, i])
        row = int(grid[i].sum())
        col = int(grid[:, i].sum())
        precision = tp / col if col else 0.0
        recall = tp / row if row else 0.0
        denom = precision + recall
        f1 = 2.0 * precision * recall / denom if denom else 0.0
        per_class[label] = ClassMetrics(precision, recall, f1, support=row)
        if row == 0:
            zero_support.append(label)
        f1s.append(f1)
        supports.append(row)
    accuracy = int(grid.trace()) / total
    macro_f1 = sum(f1s) / len(f1s)
    weighted_f1 = sum(s * f for s, f in zip(supports, f1s)) / total
    return EvalReport(
        accuracy=accuracy,
        macro_f1=macro_f1,
        weighted_f1=weighted_f1,
        per_class=per_class,
        zero_support=tuple(zero_support),
    )


@dataclass(frozen=True)
class RowNormalized:
    """Row-stochastic view of a confusion matrix.

    Rows with zero support cannot be normalized; they are emitted as all
    zeros and listed in ``zero_support``.
    """

    labels: tuple[Label, ...]
    fractions: np.ndarray
    zero_support: tuple[Label, ...]


def row_normalize(cm: ConfusionMatrix) -> RowNormalized:
    grid = cm.grid.astype(np.float64)
    sums = grid.sum(axis=1)
    zero_rows = sums == 0
    safe = np.where(zero_rows, 1.0, sums)
    fractions = grid / safe[:, None]
    fractions[zero_rows] = 0.0
    fractions.setflags(write=False)
    flagged = tuple(label for label, z in zip(cm.labels, zero_rows) if z)
    return RowNormalized(labels=cm.labels, fractions=fractions, zero_support=flagged)


def _pct(value: float) -> str:
    return f"{100.0 * value:.2f}"


def render_report(report: EvalReport, *, title: str | None = None) -> str:
    """Render a report as an aligned text table with two-decimal percentages."""
    lines: list[str] = []
    if title:
        lines.append(title)
    lines.append(f"accuracy     {_pct(report.accuracy):>7}")
    lines.append(f"macro F1     {_pct(report.macro_f1):>7}")
    lines.append(f"weighted F1  {_pct(report.weighted_f1):>7}")
    label_width = max([len("label")] + [len(str(l)) for l in report.per_class])
    header = f"{'label':<{label_width}}  {'precision':>9}  {'recall':>7}  {'f1':>7}  {'support':>7}"
    lines.append(header)
    for label, m in report.per_class.items():
        lines.append(
            f"{str(label):<{label_width}}  {_pct(m.precision):>9}  {_pct(m.recall):>7}"
            f"  {_pct(m.f1):>7}  {m.support:>7}"
        )
    if report.zero_support:
        names = ", ".join(str(l) for l in report.zero_support)
        lines.append(f"zero-support classes (F1 counted as 0): {names}")
    return "\n".join(lines)


@dataclass(frozen=True)
class AblationCell:
    """One grid coordinate: model kind, lexicon fusion on/off, technique string."""

    model: str
    lexicon: bool
    techniques: str


_METRIC_NAMES = ("accuracy", "macro_f1", "weighted_f1")


@dataclass
class AblationReport:
    """Grid of evaluation reports; failed cells keep their error text."""

    cells: dict[AblationCell, EvalReport] = field(default_factory=dict)
    failures: dict[AblationCell, str] = field(default_factory=dict)

    def best(self) -> dict[str, AblationCell]:
        """Argmax cell per aggregate metric; first cell wins ties."""
        out: dict[str, AblationCell] = {}
        for name in _METRIC_NAMES:
            best_cell = None
            best_value = -1.0
            for cell, report in self.cells.items():
                value = getattr(report, name)
                if value > best_value:
                    best_value = value
                    best_cell = cell
            if best_cell is not None:
                out[name] = best_cell
        return out

    def to_dict(self) -> dict[str, object]:
        rows: list[dict[str, object]] = []
        for cell, report in self.cells.items():
            rows.append(
                {
                    "model": cell.model,
                    "lexicon": cell.lexicon,
                    "techniques": cell.techniques,
                    "report": report.to_dict(),
                }
            )
        for cell, reason in self.failures.items():
            rows.append(
                {
                    "model": cell.model,
                    "lexicon": cell.lexicon,
                    "techniques": cell.techniques,
                    "error": reason,
                }
            )
        best = {
            name: {
                "model": cell.model,
                "lexicon": cell.lexicon,
                "techniques": cell.techniques,
            }
            for name, cell in self.best().items()
        }
        return {"cells": rows, "best": best}


def render_ablation(report: AblationReport) -> str:
    """Aligned text table, one row per grid cell; best value per metric marked ``*``."""
    best = report.best()
    header = ["model", "lexicon", "techniques", "accuracy", "macro F1", "weighted F1"]
    rows: list[list[str]] = []
    for cell, rep in report.cells.items():
        values = []
        for name in _METRIC_NAMES:
            mark = "*" if best.get(name) == cell else ""
            values.append(_pct(getattr(rep, name)) + mark)
        rows.append(
            [cell.model, "on" if cell.lexicon else "off", cell.techniques, *values]
        )
    for cell, reason in report.failures.items():
        rows.append(
            [
                cell.model,
                "on" if cell.lexicon else "off",
                cell.techniques,
                f"failed: {reason}",
                "",
                "",
            ]
        )
    widths = [
        max(len(header[i]), *(len(r[i]) for r in rows)) if rows else len(header[i])
        for i in range(len(header))
    ]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    for row in rows:
        lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip())
    return "\n".join(lines)
