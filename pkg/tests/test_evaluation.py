"""Metric correctness against definition-level recomputation, plus report
containers and rendering."""

from __future__ import annotations

import json
from fractions import Fraction

import numpy as np
import pytest

from senlex.evaluation import (
    AblationCell,
    AblationReport,
    ConfusionMatrix,
    confusion_matrix,
    metrics,
    render_ablation,
    render_report,
    row_normalize,
)
from senlex.randomness import derive_rng


def naive_counts(golds, preds, labels):
    grid = [[0] * len(labels) for _ in labels]
    for i, g in enumerate(labels):
        for j, p in enumerate(labels):
            grid[i][j] = sum(1 for a, b in zip(golds, preds) if a == g and b == p)
    return grid


def naive_metrics(grid):
    """Straight-from-the-definitions recomputation over python ints."""
    c = len(grid)
    total = sum(sum(row) for row in grid)
    f1s, supports = [], []
    per = {}
    for i in range(c):
        tp = grid[i][i]
        colsum = sum(grid[r][i] for r in range(c))
        rowsum = sum(grid[i])
        p = tp / colsum if colsum else 0.0
        r = tp / rowsum if rowsum else 0.0
        f1 = (2 * p * r / (p + r)) if (p + r) else 0.0
        per[i] = (p, r, f1, rowsum)
        f1s.append(f1)
        supports.append(rowsum)
    acc = sum(grid[i][i] for i in range(c)) / total
    macro = sum(f1s) / c
    weighted = sum(s * f for s, f in zip(supports, f1s)) / total
    return acc, macro, weighted, per


# --- confusion matrices ----------------------------------------------------


def test_counting_by_definition():
    cm = confusion_matrix(["A", "A", "B", "B"], ["A", "B", "B", "B"], ["A", "B"])
    assert cm.grid.tolist() == [[1, 1], [0, 2]]
    assert cm.total == 4
    assert cm.supports.tolist() == [2, 2]


def test_perfect_predictions_are_diagonal():
    golds = ["x"] * 3 + ["y"] * 2 + ["z"]
    cm = confusion_matrix(golds, golds, ["x", "y", "z"])
    assert cm.grid.tolist() == [[3, 0, 0], [0, 2, 0], [0, 0, 1]]


def test_counting_matches_naive_nested_loops():
    rng = derive_rng(1, "cm-random")
    labels = ["a", "b", "c"]
    for _ in range(100):
        n = int(rng.integers(1, 40))
        golds = [labels[i] for i in rng.integers(0, 3, n)]
        preds = [labels[i] for i in rng.integers(0, 3, n)]
        cm = confusion_matrix(golds, preds, labels)
        assert cm.grid.tolist() == naive_counts(golds, preds, labels)


def test_confusion_matrix_input_validation():
    with pytest.raises(ValueError, match="gold labels but"):
        confusion_matrix(["a"], ["a", "b"], ["a", "b"])
    with pytest.raises(ValueError, match="zero documents"):
        confusion_matrix([], [], ["a"])
    with pytest.raises(ValueError, match="unknown gold"):
        confusion_matrix(["q"], ["a"], ["a", "b"])
    with pytest.raises(ValueError, match="unknown predicted"):
        confusion_matrix(["a"], ["q"], ["a", "b"])


def test_confusion_matrix_shape_validation():
    with pytest.raises(ValueError, match="shape"):
        ConfusionMatrix(labels=("a", "b"), grid=np.zeros((2, 3), dtype=np.int64))
    with pytest.raises(ValueError, match="non-negative"):
        ConfusionMatrix(labels=("a", "b"), grid=np.array([[1, -1], [0, 2]]))
    with pytest.raises(ValueError, match="unique"):
        ConfusionMatrix(labels=("a", "a"), grid=np.zeros((2, 2), dtype=np.int64))


# --- metrics ---------------------------------------------------------------


def test_diagonal_matrix_scores_one():
    cm = ConfusionMatrix(labels=("a", "b"), grid=np.diag([3, 4]))
    report = metrics(cm)
    assert report.accuracy == 1.0
    assert report.macro_f1 == 1.0
    assert report.weighted_f1 == 1.0


def test_hand_computed_two_class_case():
    cm = ConfusionMatrix(labels=("A", "B"), grid=np.array([[1, 1], [0, 2]]))
    report = metrics(cm)
    assert report.accuracy == pytest.approx(0.75)
    a, b = report.per_class["A"], report.per_class["B"]
    assert (a.precision, a.recall) == (1.0, 0.5)
    assert a.f1 == pytest.approx(2 / 3)
    assert b.precision == pytest.approx(2 / 3)
    assert b.recall == 1.0
    assert b.f1 == pytest.approx(0.8)
    assert report.macro_f1 == pytest.approx(11 / 15)
    assert report.weighted_f1 == pytest.approx((2 * (2 / 3) + 2 * 0.8) / 4)


def test_zero_support_class_still_averaged():
    grid = np.array([[2, 0, 0], [0, 3, 0], [0, 0, 0]])
    report = metrics(ConfusionMatrix(labels=("a", "b", "c"), grid=grid))
    assert report.zero_support == ("c",)
    assert report.per_class["c"].f1 == 0.0
    assert report.macro_f1 == pytest.approx(2 / 3)
    assert report.accuracy == 1.0


def test_empty_matrix_rejected():
    cm = ConfusionMatrix(labels=("a", "b"), grid=np.zeros((2, 2), dtype=np.int64))
    with pytest.raises(ValueError, match="empty"):
        metrics(cm)


def test_metrics_match_definitions_on_random_matrices():
    rng = derive_rng(2, "metrics-random")
    for _ in range(300):
        c = int(rng.integers(2, 6))
        grid = rng.integers(0, 20, size=(c, c))
        if grid.sum() == 0:
            grid[0, 0] = 1
        labels = tuple(range(c))
        report = metrics(ConfusionMatrix(labels=labels, grid=grid))
        acc, macro, weighted, per = naive_metrics(grid.tolist())
        assert abs(report.accuracy - acc) < 1e-12
        assert abs(report.macro_f1 - macro) < 1e-12
        assert abs(report.weighted_f1 - weighted) < 1e-12
        for i in labels:
            m = report.per_class[i]
            assert abs(m.precision - per[i][0]) < 1e-12
            assert abs(m.recall - per[i][1]) < 1e-12
            assert abs(m.f1 - per[i][2]) < 1e-12
            assert m.support == per[i][3]


def test_accuracy_is_exact_integer_division():
    rng = derive_rng(3, "acc-exact")
    for _ in range(50):
        grid = rng.integers(0, 30, size=(3, 3))
        if grid.sum() == 0:
            grid[1, 1] = 7
        report = metrics(ConfusionMatrix(labels=("a", "b", "c"), grid=grid))
        trace = int(grid.trace())
        total = int(grid.sum())
        assert Fraction(report.accuracy) == Fraction(trace, total) or (
            report.accuracy == trace / total
        )


def test_aggregate_metrics_invariant_under_label_permutation():
    rng = derive_rng(4, "perm")
    grid = rng.integers(0, 15, size=(4, 4))
    grid[0, 0] += 1
    labels = ("a", "b", "c", "d")
    base = metrics(ConfusionMatrix(labels=labels, grid=grid))
    perm = [2, 0, 3, 1]
    permuted_grid = grid[np.ix_(perm, perm)]
    permuted_labels = tuple(labels[i] for i in perm)
    other = metrics(ConfusionMatrix(labels=permuted_labels, grid=permuted_grid))
    assert other.accuracy == pytest.approx(base.accuracy, abs=1e-15)
    assert other.macro_f1 == pytest.approx(base.macro_f1, abs=1e-15)
    assert other.weighted_f1 == pytest.approx(base.weighted_f1, abs=1e-15)
    for label in labels:
        assert other.per_class[label] == base.per_class[label]


# --- row normalization -----------------------------------------------------


def test_row_normalize_hand_case():
    cm = ConfusionMatrix(labels=("A", "B"), grid=np.array([[1, 1], [0, 2]]))
    normalized = row_normalize(cm)
    assert normalized.fractions.tolist() == [[0.5, 0.5], [0.0, 1.0]]
    assert normalized.zero_support == ()


def test_row_normalize_flags_zero_rows():
    grid = np.array([[2, 1], [0, 0]])
    normalized = row_normalize(ConfusionMatrix(labels=("A", "B"), grid=grid))
    assert normalized.fractions[1].tolist() == [0.0, 0.0]
    assert normalized.zero_support == ("B",)


def test_row_normalize_rows_sum_to_one():
    rng = derive_rng(5, "rownorm")
    for _ in range(50):
        grid = rng.integers(0, 10, size=(4, 4))
        cm = ConfusionMatrix(labels=("a", "b", "c", "d"), grid=grid)
        normalized = row_normalize(cm)
        for i, label in enumerate(cm.labels):
            row_sum = normalized.fractions[i].sum()
            if label in normalized.zero_support:
                assert row_sum == 0.0
            else:
                assert abs(row_sum - 1.0) < 1e-9


# --- rendering and ablation containers -------------------------------------


def test_render_report_shows_two_decimal_percentages():
    cm = ConfusionMatrix(labels=("A", "B"), grid=np.array([[1, 1], [0, 2]]))
    text = render_report(metrics(cm), title="dev set")
    assert "dev set" in text
    assert "75.00" in text
    assert "73.33" in text
    assert "support" in text


def sample_ablation():
    report = AblationReport()
    cm_good = ConfusionMatrix(labels=("a", "b"), grid=np.array([[4, 0], [1, 3]]))
    cm_bad = ConfusionMatrix(labels=("a", "b"), grid=np.array([[2, 2], [2, 2]]))
    report.cells[AblationCell("textcnn", True, "1+2+3")] = metrics(cm_good)
    report.cells[AblationCell("textcnn", False, "1+2+3")] = metrics(cm_bad)
    report.failures[AblationCell("logreg", False, "1")] = "resources missing"
    return report


def test_ablation_best_marks_argmax_cell():
    report = sample_ablation()
    best = report.best()
    winner = AblationCell("textcnn", True, "1+2+3")
    assert best["accuracy"] == winner
    assert best["macro_f1"] == winner
    assert best["weighted_f1"] == winner


def test_ablation_serialization_is_deterministic():
    a = json.dumps(sample_ablation().to_dict(), sort_keys=True)
    b = json.dumps(sample_ablation().to_dict(), sort_keys=True)
    assert a == b
    parsed = json.loads(a)
    assert len(parsed["cells"]) == 3
    assert parsed["best"]["macro_f1"]["lexicon"] is True


def test_ablation_rendering_lists_failures_and_marks_best():
    text = render_ablation(sample_ablation())
    assert "*" in text
    assert "failed: resources missing" in text
    assert "on" in text and "off" in text
