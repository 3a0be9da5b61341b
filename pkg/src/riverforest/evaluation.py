"""Confusion-matrix metrics and stratified k-fold cross-validation.

Per-class precision, recall, F-measure and FP-rate, support-weighted
averages, accuracy, and Cohen's kappa with its agreement interpretation.
Metrics are computed with exact rational arithmetic and rounded to float
once at the end, which makes the algebraic identities hold bit-exactly:
weighted recall equals accuracy, kappa is invariant under uniform count
scaling, and F always lies between precision and recall.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from typing import Mapping, Optional, Sequence

import numpy as np

from .data import Dataset, PollutionLevel
from .errors import (
    DegenerateFold,
    EmptyCounts,
    InsufficientClassMembers,
    LengthMismatch,
    MalformedMatrix,
    OutOfRange,
    UnknownClass,
)
from .forest import ForestConfig, derive_seed, forest_predict, train_forest

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class ConfusionMatrix:
    """k x k counts with rows = true class, columns = predicted class."""

    classes: tuple[PollutionLevel, ...]
    counts: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        classes = tuple(self.classes)
        if not classes:
            raise MalformedMatrix("matrix needs at least one class")
        if len(set(classes)) != len(classes):
            raise MalformedMatrix("matrix classes must be distinct")
        k = len(classes)
        rows = []
        for i, row in enumerate(self.counts):
            row = tuple(row)
            if len(row) != k:
                raise MalformedMatrix(f"row {i} has {len(row)} entries, expected {k}")
            for j, value in enumerate(row):
                if isinstance(value, bool) or not isinstance(value, int):
                    raise MalformedMatrix(f"count[{i}][{j}] must be an integer, got {value!r}")
                if value < 0:
                    raise MalformedMatrix(f"count[{i}][{j}] is negative")
            rows.append(row)
        if len(rows) != k:
            raise MalformedMatrix(f"matrix has {len(rows)} rows, expected {k}")
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "counts", tuple(rows))
        if self.total == 0:
            raise EmptyCounts("matrix has no observations")

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    @property
    def trace(self) -> int:
        return sum(self.counts[i][i] for i in range(len(self.classes)))

    def index(self, level: PollutionLevel) -> int:
        try:
            return self.classes.index(level)
        except ValueError:
            raise UnknownClass(f"{level.label!r} is not a class of this matrix") from None

    def row_total(self, i: int) -> int:
        return sum(self.counts[i])

    def col_total(self, j: int) -> int:
        return sum(row[j] for row in self.counts)


@dataclass(frozen=True)
class ClassMetrics:
    tp_rate: float
    fp_rate: float
    precision: float
    recall: float
    f_measure: float
    support: int


class Agreement(Enum):
    """Interpretation bands for kappa, from none up to almost perfect."""

    NONE = "None"
    MINIMAL = "Minimal"
    WEAK = "Weak"
    MODERATE = "Moderate"
    STRONG = "Strong"
    ALMOST_PERFECT = "Almost Perfect"

    @property
    def label(self) -> str:
        return self.value


@dataclass(frozen=True)
class EvaluationReport:
    matrix: ConfusionMatrix
    per_class: Mapping[PollutionLevel, ClassMetrics]
    weighted: ClassMetrics
    accuracy: float
    correct: int
    incorrect: int
    kappa: float
    agreement: Agreement


def build_confusion(
    truths: Sequence[PollutionLevel],
    preds: Sequence[PollutionLevel],
    classes: Sequence[PollutionLevel],
) -> ConfusionMatrix:
    """Count (true, predicted) pairs into a matrix over the given class order."""
    if len(truths) != len(preds):
        raise LengthMismatch(f"{len(truths)} truths vs {len(preds)} predictions")
    if len(truths) == 0:
        raise LengthMismatch("need at least one (truth, prediction) pair")
    classes = tuple(classes)
    position = {level: i for i, level in enumerate(classes)}
    grid = [[0] * len(classes) for _ in classes]
    for t, p in zip(truths, preds):
        if t not in position:
            raise UnknownClass(f"true label {t.label!r} not in class list")
        if p not in position:
            raise UnknownClass(f"predicted label {p.label!r} not in class list")
        grid[position[t]][position[p]] += 1
    return ConfusionMatrix(classes=classes, counts=tuple(tuple(row) for row in grid))


# -- exact per-class rationals ---------------------------------------------------

def _rational_metrics(matrix: ConfusionMatrix, i: int):
    """(tp_rate, fp_rate, precision, recall, f) as Fractions for class index i."""
    n = matrix.total
    tp = matrix.counts[i][i]
    row = matrix.row_total(i)
    col = matrix.col_total(i)
    fp = col - tp
    fn = row - tp
    tn = n - row - fp

    precision = Fraction(tp, tp + fp) if tp + fp else Fraction(0)
    recall = Fraction(tp, tp + fn) if tp + fn else Fraction(0)
    if precision + recall:
        f_measure = 2 * precision * recall / (precision + recall)
    else:
        f_measure = Fraction(0)
    fp_rate = Fraction(fp, fp + tn) if fp + tn else Fraction(0)
    return recall, fp_rate, precision, recall, f_measure


def precision(matrix: ConfusionMatrix, level: PollutionLevel) -> float:
    """tp / (tp + fp); 0 when the class is never predicted."""
    return float(_rational_metrics(matrix, matrix.index(level))[2])


def recall(matrix: ConfusionMatrix, level: PollutionLevel) -> float:
    """tp / (tp + fn); 0 when the class never occurs."""
    return float(_rational_metrics(matrix, matrix.index(level))[3])


def f_measure(matrix: ConfusionMatrix, level: PollutionLevel) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0."""
    return float(_rational_metrics(matrix, matrix.index(level))[4])


def fp_rate(matrix: ConfusionMatrix, level: PollutionLevel) -> float:
    """fp / (fp + tn): share of other-class instances predicted as this class."""
    return float(_rational_metrics(matrix, matrix.index(level))[1])


def class_metrics(matrix: ConfusionMatrix, level: PollutionLevel) -> ClassMetrics:
    i = matrix.index(level)
    tp_rate_r, fp_rate_r, precision_r, recall_r, f_r = _rational_metrics(matrix, i)
    return ClassMetrics(
        tp_rate=float(tp_rate_r),
        fp_rate=float(fp_rate_r),
        precision=float(precision_r),
        recall=float(recall_r),
        f_measure=float(f_r),
        support=matrix.row_total(i),
    )


def accuracy(matrix: ConfusionMatrix) -> tuple[float, int, int]:
    """(trace / N, correct, incorrect)."""
    n = matrix.total
    correct = matrix.trace
    return float(Fraction(correct, n)), correct, n - correct


def weighted_average(per_class: Mapping[PollutionLevel, ClassMetrics]) -> ClassMetrics:
    """Support-weighted average of each metric; support of the result is N."""
    n = sum(m.support for m in per_class.values())
    if n < 1:
        raise EmptyCounts("weighted average needs a positive total support")
    values = list(per_class.values())

    def avg(metric: str) -> float:
        return math.fsum(getattr(m, metric) * m.support for m in values) / n

    return ClassMetrics(
        tp_rate=avg("tp_rate"),
        fp_rate=avg("fp_rate"),
        precision=avg("precision"),
        recall=avg("recall"),
        f_measure=avg("f_measure"),
        support=n,
    )


def _weighted_exact(matrix: ConfusionMatrix) -> ClassMetrics:
    """Weighted row computed in exact rationals from the matrix itself.

    Keeping the weighting rational guarantees weighted recall == accuracy
    exactly (both round the same rational trace/N).
    """
    n = matrix.total
    sums = [Fraction(0)] * 5
    for i in range(len(matrix.classes)):
        weight = Fraction(matrix.row_total(i), n)
        for slot, value in enumerate(_rational_metrics(matrix, i)):
            sums[slot] += weight * value
    return ClassMetrics(
        tp_rate=float(sums[0]),
        fp_rate=float(sums[1]),
        precision=float(sums[2]),
        recall=float(sums[3]),
        f_measure=float(sums[4]),
        support=n,
    )


def cohen_kappa(matrix: ConfusionMatrix) -> float:
    """(Po - Pe) / (1 - Pe) with Po = trace/N and Pe from the marginals.

    When Pe = 1 (all mass in a single diagonal cell) the formula is 0/0;
    returns 1 if observed agreement is perfect, else 0.
    """
    n = matrix.total
    po = Fraction(matrix.trace, n)
    pe = sum(
        (
            Fraction(matrix.row_total(i), n) * Fraction(matrix.col_total(i), n)
            for i in range(len(matrix.classes))
        ),
        Fraction(0),
    )
    if pe == 1:
        return 1.0 if po == 1 else 0.0
    return float((po - pe) / (1 - pe))


def agreement_level(kappa: float) -> Agreement:
    """Band the kappa value; below 0.21 counts as no agreement."""
    if not math.isfinite(kappa) or abs(kappa) > 1.0:
        raise OutOfRange(f"kappa must lie in [-1, 1], got {kappa!r}")
    if kappa < 0.21:
        return Agreement.NONE
    if kappa < 0.40:
        return Agreement.MINIMAL
    if kappa < 0.60:
        return Agreement.WEAK
    if kappa < 0.80:
        return Agreement.MODERATE
    if kappa <= 0.90:
        return Agreement.STRONG
    return Agreement.ALMOST_PERFECT


def evaluate_matrix(matrix: ConfusionMatrix) -> EvaluationReport:
    """Full report (per-class, weighted, accuracy, kappa) from a matrix."""
    per_class = {level: class_metrics(matrix, level) for level in matrix.classes}
    acc, correct, incorrect = accuracy(matrix)
    kappa = cohen_kappa(matrix)
    return EvaluationReport(
        matrix=matrix,
        per_class=per_class,
        weighted=_weighted_exact(matrix),
        accuracy=acc,
        correct=correct,
        incorrect=incorrect,
        kappa=kappa,
        agreement=agreement_level(kappa),
    )


def evaluate(
    truths: Sequence[PollutionLevel],
    preds: Sequence[PollutionLevel],
    classes: Sequence[PollutionLevel],
) -> EvaluationReport:
    """Build the confusion matrix from label pairs and evaluate it."""
    return evaluate_matrix(build_confusion(truths, preds, classes))


# -- cross-validation -------------------------------------------------------------

def cross_validation_folds(
    dataset: Dataset, k: int, seed: int, stratified: bool = True
) -> tuple[tuple[int, ...], ...]:
    """Partition row indices into k folds.

    Stratified mode shuffles each class separately and deals members
    round-robin, so per-class counts across folds differ by at most one;
    it requires every class to have at least k members.
    """
    n = len(dataset)
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > n:
        raise DegenerateFold(f"cannot make {k} folds from {n} rows")
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, 0)))
    folds: list[list[int]] = [[] for _ in range(k)]
    if stratified:
        dataset.require_labels()
        by_class: dict[PollutionLevel, list[int]] = {}
        for i, row in enumerate(dataset):
            by_class.setdefault(row.level, []).append(i)
        for level in sorted(by_class):
            members = by_class[level]
            if len(members) < k:
                raise InsufficientClassMembers(
                    f"class {level.label!r} has {len(members)} members, fewer than k={k}"
                )
            perm = rng.permutation(len(members))
            for pos, j in enumerate(perm):
                folds[pos % k].append(members[int(j)])
    else:
        perm = rng.permutation(n)
        for pos, j in enumerate(perm):
            folds[pos % k].append(int(j))
    return tuple(tuple(sorted(fold)) for fold in folds)


def k_fold_cross_validate(
    dataset: Dataset,
    k: int,
    config: ForestConfig,
    seed: int,
    stratified: bool = True,
) -> EvaluationReport:
    """Stratified k-fold cross-validation with pooled out-of-fold predictions.

    Fold i (1-based) is predicted by a forest trained on the other folds with
    seed derive_seed(seed, i); all N out-of-fold predictions are pooled into
    one confusion matrix. Deterministic given (dataset, k, config, seed).
    """
    dataset.require_labels()
    n = len(dataset)
    folds = cross_validation_folds(dataset, k, seed, stratified=stratified)

    predictions: list[Optional[PollutionLevel]] = [None] * n
    for fold_number, fold in enumerate(folds, start=1):
        held_out = set(fold)
        train_idx = [i for i in range(n) if i not in held_out]
        train_set = dataset.subset(train_idx)
        if len(train_set.class_list) < 2:
            raise DegenerateFold(
                f"fold {fold_number} leaves a single-class training set"
            )
        fold_config = replace(config, seed=derive_seed(seed, fold_number))
        model = train_forest(train_set, fold_config)
        for i in fold:
            predictions[i] = forest_predict(model, dataset[i].sample)

    truths = [row.level for row in dataset]
    return evaluate(truths, predictions, dataset.class_list)


# -- report rendering --------------------------------------------------------------

def report_to_dict(report: EvaluationReport) -> dict:
    """JSON-ready view of the report; numbers keep full precision."""
    return {
        "matrix": {
            "classes": [level.label for level in report.matrix.classes],
            "counts": [list(row) for row in report.matrix.counts],
        },
        "per_class": {
            level.label: {
                "tp_rate": m.tp_rate,
                "fp_rate": m.fp_rate,
                "precision": m.precision,
                "recall": m.recall,
                "f_measure": m.f_measure,
                "support": m.support,
            }
            for level, m in report.per_class.items()
        },
        "weighted": {
            "tp_rate": report.weighted.tp_rate,
            "fp_rate": report.weighted.fp_rate,
            "precision": report.weighted.precision,
            "recall": report.weighted.recall,
            "f_measure": report.weighted.f_measure,
            "support": report.weighted.support,
        },
        "accuracy": report.accuracy,
        "accuracy_percent": report.accuracy * 100.0,
        "correct": report.correct,
        "incorrect": report.incorrect,
        "kappa": report.kappa,
        "agreement": report.agreement.label,
    }


def render_json(report: EvaluationReport) -> str:
    return json.dumps(report_to_dict(report), indent=2) + "\n"


_METRIC_COLUMNS = ("tp_rate", "fp_rate", "precision", "recall", "f_measure")


def render_text(report: EvaluationReport) -> str:
    """Human-readable tables: summary, per-class metrics, confusion matrix.

    Display rounding: accuracy percent to 4 decimals, kappa to 4, per-class
    metrics to 3.
    """
    lines = []
    n = report.matrix.total
    lines.append("Overall")
    lines.append(f"  Correctly classified    {report.correct:>6}   {report.accuracy * 100.0:.4f} %")
    lines.append(f"  Incorrectly classified  {report.incorrect:>6}   {(1.0 - report.accuracy) * 100.0:.4f} %")
    lines.append(f"  Total instances         {n:>6}")
    lines.append(f"  Kappa                   {report.kappa:.4f}   agreement: {report.agreement.label}")
    lines.append("")

    header = f"  {'Class':<10}{'TP Rate':>9}{'FP Rate':>9}{'Precision':>11}{'Recall':>9}{'F-Measure':>11}{'Support':>9}"
    lines.append("Per-class metrics")
    lines.append(header)
    for level in report.matrix.classes:
        m = report.per_class[level]
        lines.append(
            f"  {level.label:<10}{m.tp_rate:>9.3f}{m.fp_rate:>9.3f}{m.precision:>11.3f}"
            f"{m.recall:>9.3f}{m.f_measure:>11.3f}{m.support:>9}"
        )
    w = report.weighted
    lines.append(
        f"  {'weighted':<10}{w.tp_rate:>9.3f}{w.fp_rate:>9.3f}{w.precision:>11.3f}"
        f"{w.recall:>9.3f}{w.f_measure:>11.3f}{w.support:>9}"
    )
    lines.append("")

    lines.append("Confusion matrix (rows = observed, columns = predicted)")
    names = [level.label for level in report.matrix.classes]
    width = max(7, max(len(name) for name in names) + 1)
    lines.append("  " + " " * 10 + "".join(f"{name:>{width}}" for name in names))
    for name, row in zip(names, report.matrix.counts):
        lines.append("  " + f"{name:<10}" + "".join(f"{value:>{width}}" for value in row))
    return "\n".join(lines) + "\n"


def render_csv(report: EvaluationReport) -> str:
    """Tidy long-format CSV: class,metric,value rows covering the full report."""
    rows = [("class", "metric", "value")]
    for level in report.matrix.classes:
        m = report.per_class[level]
        for metric in _METRIC_COLUMNS:
            rows.append((level.label, metric, repr(getattr(m, metric))))
        rows.append((level.label, "support", str(m.support)))
    for metric in _METRIC_COLUMNS:
        rows.append(("weighted", metric, repr(getattr(report.weighted, metric))))
    rows.append(("weighted", "support", str(report.weighted.support)))
    rows.append(("overall", "accuracy", repr(report.accuracy)))
    rows.append(("overall", "correct", str(report.correct)))
    rows.append(("overall", "incorrect", str(report.incorrect)))
    rows.append(("overall", "kappa", repr(report.kappa)))
    rows.append(("overall", "agreement", report.agreement.label))
    return "\r\n".join(",".join(row) for row in rows) + "\r\n"


def confusion_from_dict(obj) -> ConfusionMatrix:
    """Build a matrix from {"classes": [names], "counts": [[...], ...]}."""
    if not isinstance(obj, dict):
        raise MalformedMatrix("matrix document must be a JSON object")
    raw_classes = obj.get("classes")
    raw_counts = obj.get("counts")
    if not isinstance(raw_classes, list) or not raw_classes:
        raise MalformedMatrix("matrix document needs a non-empty 'classes' list")
    if not isinstance(raw_counts, list):
        raise MalformedMatrix("matrix document needs a 'counts' grid")
    classes = tuple(PollutionLevel.parse(str(name)) for name in raw_classes)
    counts = []
    for row in raw_counts:
        if not isinstance(row, list):
            raise MalformedMatrix("counts must be a list of rows")
        counts.append(tuple(row))
    return ConfusionMatrix(classes=classes, counts=tuple(counts))
