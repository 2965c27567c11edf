"""Classifier evaluation: confusion-matrix metrics, holdout/CV protocols,
and fixed-width text reports.

Per-class rates are one-vs-rest.  ROC area uses the rank statistic (ties
counted half); PRC area integrates interpolated precision over recall steps
(average-precision style).  Error magnitudes (MAE/RMSE and their relative
forms) are computed from per-class probability error vectors against
one-hot truth, with the relative forms normalised by the same quantities
for a constant class-prior predictor.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata
from sklearn.base import clone

from .tabular import check_feature_frame


class LengthMismatchError(ValueError):
    pass


class EmptyEvaluationError(ValueError):
    pass


class FoldTooSmallError(ValueError):
    pass


@dataclass
class ConfusionMatrix:
    """Square count matrix; rows are actual classes, columns predicted."""

    classes: tuple[str, ...]
    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        k = len(self.classes)
        if self.counts.shape != (k, k):
            raise ValueError(f"counts must be {k}x{k}, got {self.counts.shape}")
        if (self.counts < 0).any():
            raise ValueError("confusion matrix entries must be non-negative")

    @classmethod
    def from_pairs(
        cls, actual: Sequence, predicted: Sequence, classes: Optional[Sequence[str]] = None
    ) -> "ConfusionMatrix":
        if len(actual) != len(predicted):
            raise LengthMismatchError(
                f"{len(actual)} actual labels vs {len(predicted)} predictions"
            )
        actual = [str(a) for a in actual]
        predicted = [str(p) for p in predicted]
        if classes is None:
            classes = sorted(set(actual) | set(predicted))
        classes = tuple(str(c) for c in classes)
        index = {c: i for i, c in enumerate(classes)}
        unknown = (set(actual) | set(predicted)) - set(classes)
        if unknown:
            raise ValueError(f"labels outside the class list: {sorted(unknown)}")
        counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
        for a, p in zip(actual, predicted):
            counts[index[a], index[p]] += 1
        return cls(classes, counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def correct(self) -> int:
        return int(np.trace(self.counts))

    def row_totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def col_totals(self) -> np.ndarray:
        return self.counts.sum(axis=0)


def kappa_statistic(matrix: ConfusionMatrix) -> float:
    """Chance-corrected agreement; 0 when expected agreement is already 1."""
    total = matrix.total
    if total == 0:
        raise EmptyEvaluationError("empty confusion matrix")
    p_o = matrix.correct / total
    p_e = float(matrix.row_totals() @ matrix.col_totals()) / (total * total)
    if 1.0 - p_e <= 0:
        return 0.0
    return (p_o - p_e) / (1.0 - p_e)


def binary_mcc(tp: float, fp: float, fn: float, tn: float) -> float:
    """Matthews correlation; defined as 0 when any marginal is zero."""
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom <= 0:
        return 0.0
    return float((tp * tn - fp * fn) / np.sqrt(denom))


def roc_area(is_positive: Sequence[bool], scores: Sequence[float]) -> float:
    """Area under the ROC curve via the rank statistic.

    Equals the fraction of (positive, negative) pairs ranked correctly by
    score, counting ties as half.  Degenerate inputs (no positives or no
    negatives) return 0.5.
    """
    is_positive = np.asarray(is_positive, dtype=bool)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = int(is_positive.sum())
    n_neg = len(is_positive) - n_pos
    if n_pos == 0 or n_neg == 0:
        return 0.5
    ranks = rankdata(scores)
    pos_rank_sum = float(ranks[is_positive].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def _threshold_blocks(is_positive: np.ndarray, scores: np.ndarray):
    """Cumulative (tp, fp) after each distinct score threshold, descending."""
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    pos = is_positive[order].astype(np.int64)
    boundaries = np.nonzero(np.diff(s))[0]
    ends = np.append(boundaries, len(s) - 1)
    tp = np.cumsum(pos)[ends]
    fp = (ends + 1) - tp
    return tp, fp


def roc_curve_points(is_positive, scores) -> list[tuple[float, float]]:
    """(false-positive rate, true-positive rate) points, origin included."""
    is_positive = np.asarray(is_positive, dtype=bool)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = int(is_positive.sum())
    n_neg = len(is_positive) - n_pos
    if n_pos == 0 or n_neg == 0:
        return [(0.0, 0.0), (1.0, 1.0)]
    tp, fp = _threshold_blocks(is_positive, scores)
    points = [(0.0, 0.0)]
    points.extend((f / n_neg, t / n_pos) for t, f in zip(tp, fp))
    return points


def prc_curve_points(is_positive, scores) -> list[tuple[float, float]]:
    """(recall, precision) points at each distinct score threshold."""
    is_positive = np.asarray(is_positive, dtype=bool)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = int(is_positive.sum())
    if n_pos == 0:
        return [(0.0, 0.0)]
    tp, fp = _threshold_blocks(is_positive, scores)
    return [(t / n_pos, t / (t + f) if t + f else 0.0) for t, f in zip(tp, fp)]


def prc_area(is_positive, scores) -> float:
    """Area under the precision-recall curve with interpolated precision.

    Interpolated precision at recall r is the maximum precision attained at
    any recall >= r; the area sums interpolated precision over each recall
    increment.  No positives gives 0.
    """
    points = prc_curve_points(is_positive, scores)
    if len(points) == 1 and points[0] == (0.0, 0.0):
        return 0.0
    recalls = np.asarray([p[0] for p in points])
    precisions = np.asarray([p[1] for p in points])
    # Running maximum from the right = interpolated precision.
    interp = np.maximum.accumulate(precisions[::-1])[::-1]
    prev_recall = 0.0
    area = 0.0
    for r, p in zip(recalls, interp):
        if r > prev_recall:
            area += (r - prev_recall) * p
            prev_recall = r
    return float(area)


@dataclass
class PerClassMetrics:
    tp_rate: float
    fp_rate: float
    precision: float
    recall: float
    f_measure: float
    mcc: float
    roc_area: float
    prc_area: float
    support: int


@dataclass
class EvaluationReport:
    matrix: ConfusionMatrix
    correct: int
    incorrect: int
    correct_pct: float
    incorrect_pct: float
    kappa: float
    mae: float
    rmse: float
    relative_absolute_error_pct: float
    root_relative_squared_error_pct: float
    per_class: list[PerClassMetrics]
    weighted_avg: PerClassMetrics
    n_instances: int
    build_seconds: float = 0.0
    test_seconds: float = 0.0
    protocol: str = ""

    @property
    def accuracy(self) -> float:
        return self.correct_pct / 100.0


def _one_hot(labels: np.ndarray, classes: tuple[str, ...]) -> np.ndarray:
    index = {c: i for i, c in enumerate(classes)}
    out = np.zeros((len(labels), len(classes)))
    for i, label in enumerate(labels):
        out[i, index[label]] = 1.0
    return out


def compute_report(
    actual: Sequence,
    predicted: Sequence,
    scores: Optional[np.ndarray] = None,
    prior_baseline: Optional[Sequence[float]] = None,
    classes: Optional[Sequence[str]] = None,
    build_seconds: float = 0.0,
    test_seconds: float = 0.0,
    protocol: str = "",
) -> EvaluationReport:
    """Full metric block for a batch of predictions.

    ``scores`` are per-row class-probability vectors aligned with
    ``classes``; when omitted, one-hot vectors from the predictions are
    used.  ``prior_baseline`` is the class distribution of the constant
    baseline predictor for the relative error metrics; when omitted, the
    empirical distribution of ``actual`` is used.
    """
    if len(actual) == 0:
        raise EmptyEvaluationError("no instances to evaluate")
    matrix = ConfusionMatrix.from_pairs(actual, predicted, classes)
    classes = matrix.classes
    k = len(classes)
    n = matrix.total
    actual_arr = np.asarray([str(a) for a in actual], dtype=object)
    predicted_arr = np.asarray([str(p) for p in predicted], dtype=object)

    if scores is None:
        scores = _one_hot(predicted_arr, classes)
    else:
        scores = np.asarray(scores, dtype=np.float64)
        if scores.shape != (n, k):
            raise LengthMismatchError(
                f"scores must be {(n, k)}, got {scores.shape}"
            )

    truth = _one_hot(actual_arr, classes)
    if prior_baseline is None:
        prior = truth.mean(axis=0)
    else:
        prior = np.asarray(prior_baseline, dtype=np.float64)
        if prior.shape != (k,):
            raise LengthMismatchError(f"prior baseline must have {k} entries")

    err = scores - truth
    mae = float(np.abs(err).mean())
    rmse = float(np.sqrt((err * err).mean()))
    base_err = np.tile(prior, (n, 1)) - truth
    base_abs = float(np.abs(base_err).mean())
    base_sq = float(np.sqrt((base_err * base_err).mean()))
    rae = 100.0 * mae / base_abs if base_abs > 0 else 0.0
    rrse = 100.0 * rmse / base_sq if base_sq > 0 else 0.0

    row_totals = matrix.row_totals()
    col_totals = matrix.col_totals()
    per_class = []
    for i, cls in enumerate(classes):
        tp = float(matrix.counts[i, i])
        fp = float(col_totals[i] - tp)
        fn = float(row_totals[i] - tp)
        tn = float(n - tp - fp - fn)
        support = int(row_totals[i])
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        fp_rate = fp / (fp + tn) if fp + tn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        positives = actual_arr == cls
        per_class.append(
            PerClassMetrics(
                tp_rate=recall,
                fp_rate=fp_rate,
                precision=precision,
                recall=recall,
                f_measure=f1,
                mcc=binary_mcc(tp, fp, fn, tn),
                roc_area=roc_area(positives, scores[:, i]),
                prc_area=prc_area(positives, scores[:, i]),
                support=support,
            )
        )

    weights = row_totals / n
    weighted = PerClassMetrics(
        tp_rate=float(sum(w * m.tp_rate for w, m in zip(weights, per_class))),
        fp_rate=float(sum(w * m.fp_rate for w, m in zip(weights, per_class))),
        precision=float(sum(w * m.precision for w, m in zip(weights, per_class))),
        recall=float(sum(w * m.recall for w, m in zip(weights, per_class))),
        f_measure=float(sum(w * m.f_measure for w, m in zip(weights, per_class))),
        mcc=float(sum(w * m.mcc for w, m in zip(weights, per_class))),
        roc_area=float(sum(w * m.roc_area for w, m in zip(weights, per_class))),
        prc_area=float(sum(w * m.prc_area for w, m in zip(weights, per_class))),
        support=int(n),
    )

    correct = matrix.correct
    return EvaluationReport(
        matrix=matrix,
        correct=correct,
        incorrect=n - correct,
        correct_pct=100.0 * correct / n,
        incorrect_pct=100.0 * (n - correct) / n,
        kappa=kappa_statistic(matrix),
        mae=mae,
        rmse=rmse,
        relative_absolute_error_pct=rae,
        root_relative_squared_error_pct=rrse,
        per_class=per_class,
        weighted_avg=weighted,
        n_instances=n,
        build_seconds=build_seconds,
        test_seconds=test_seconds,
        protocol=protocol,
    )


# -- evaluation protocols ----------------------------------------------------


@dataclass
class ProtocolConfig:
    """How to evaluate: single holdouts, cross-validation, or training set.

    ``seeds`` drive the percentage-split shuffles (one holdout per seed);
    cross-validation uses the first seed for its fold assignment.
    """

    mode: str = "percentage_split"
    split_fraction: float = 0.66
    folds: int = 10
    seeds: tuple[int, ...] = tuple(range(1, 11))
    stratified: bool = True

    def __post_init__(self):
        if self.mode not in ("percentage_split", "cross_validation", "full_training_set"):
            raise ValueError(f"unknown protocol mode: {self.mode!r}")
        if not 0.0 < self.split_fraction < 1.0:
            raise ValueError("split_fraction must be in (0, 1)")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if len(self.seeds) == 0:
            raise ValueError("at least one seed is required")


@dataclass
class SplitProtocolResult:
    reports: list[EvaluationReport]
    accuracy_mean: float
    accuracy_std: float


@dataclass
class CrossValidationResult:
    fold_reports: list[EvaluationReport]
    pooled_report: EvaluationReport


def _class_priors(y: np.ndarray, classes: tuple[str, ...]) -> np.ndarray:
    counts = np.array([(y == c).sum() for c in classes], dtype=np.float64)
    return counts / counts.sum()


def _scores_for(learner, X, classes: tuple[str, ...]) -> np.ndarray:
    """predict_proba mapped onto a fixed class order (absent classes -> 0)."""
    proba = learner.predict_proba(X)
    learner_classes = [str(c) for c in learner.classes_]
    out = np.zeros((len(X), len(classes)))
    for j, cls in enumerate(learner_classes):
        if cls in classes:
            out[:, classes.index(cls)] = proba[:, j]
    return out


def _class_order(y: np.ndarray, classes) -> tuple[str, ...]:
    if classes is None:
        return tuple(sorted(set(y)))
    return tuple(str(c) for c in classes)


def percentage_split_protocol(
    X, y, learner, config: ProtocolConfig, classes=None
) -> SplitProtocolResult:
    """One seeded shuffle-and-holdout evaluation per configured seed.

    Reports the per-seed metric blocks plus the sample mean and sample
    standard deviation (n-1 denominator) of holdout accuracy.
    """
    X = check_feature_frame(X)
    y = np.asarray([str(v) for v in y], dtype=object)
    classes = _class_order(y, classes)
    n = len(y)
    if n < 2:
        raise EmptyEvaluationError("need at least two rows to split")
    reports = []
    for seed in config.seeds:
        rng = np.random.default_rng(seed)
        perm = rng.permutation(n)
        n_train = int(round(config.split_fraction * n))
        n_train = min(max(n_train, 1), n - 1)
        train_idx, test_idx = perm[:n_train], perm[n_train:]
        model = clone(learner)
        t0 = _time.perf_counter()
        model.fit(X.iloc[train_idx], y[train_idx])
        t1 = _time.perf_counter()
        predicted = model.predict(X.iloc[test_idx])
        scores = _scores_for(model, X.iloc[test_idx], classes)
        t2 = _time.perf_counter()
        reports.append(
            compute_report(
                y[test_idx],
                predicted,
                scores=scores,
                prior_baseline=_class_priors(y[train_idx], classes),
                classes=classes,
                build_seconds=t1 - t0,
                test_seconds=t2 - t1,
                protocol=f"percentage split (seed {seed})",
            )
        )
    accuracies = np.array([r.correct_pct for r in reports])
    std = float(accuracies.std(ddof=1)) if len(accuracies) > 1 else 0.0
    return SplitProtocolResult(reports, float(accuracies.mean()), std)


def stratified_folds(y, folds: int, seed: int, stratified: bool = True) -> list[np.ndarray]:
    """Deterministic fold assignment; each fold is an index array.

    Stratified mode shuffles each class's indices with the seed and deals
    them to folds with one continuing round-robin cursor, so each class
    spreads as evenly as possible, surpluses land on consecutive folds
    starting from the front, and total fold sizes differ by at most one.
    """
    y = np.asarray([str(v) for v in y], dtype=object)
    n = len(y)
    if folds > n:
        raise FoldTooSmallError(f"{folds} folds for {n} rows leaves empty folds")
    rng = np.random.default_rng(seed)
    assignments: list[list[int]] = [[] for _ in range(folds)]
    cursor = 0
    if stratified:
        for cls in sorted(set(y)):
            idx = np.nonzero(y == cls)[0]
            rng.shuffle(idx)
            for i in idx:
                assignments[cursor % folds].append(int(i))
                cursor += 1
    else:
        for i in rng.permutation(n):
            assignments[cursor % folds].append(int(i))
            cursor += 1
    out = [np.asarray(sorted(a), dtype=np.int64) for a in assignments]
    if any(len(a) == 0 for a in out):
        raise FoldTooSmallError("a fold received zero instances")
    return out


def cross_validation_protocol(
    X, y, learner, config: ProtocolConfig, classes=None
) -> CrossValidationResult:
    """k-fold cross-validation; the pooled report aggregates all held-out
    predictions into a single confusion matrix."""
    X = check_feature_frame(X)
    y = np.asarray([str(v) for v in y], dtype=object)
    classes = _class_order(y, classes)
    folds = stratified_folds(y, config.folds, config.seeds[0], config.stratified)
    all_idx = []
    all_pred = []
    all_scores = []
    fold_reports = []
    build_total = 0.0
    test_total = 0.0
    for f, test_idx in enumerate(folds):
        train_mask = np.ones(len(y), dtype=bool)
        train_mask[test_idx] = False
        train_idx = np.nonzero(train_mask)[0]
        model = clone(learner)
        t0 = _time.perf_counter()
        model.fit(X.iloc[train_idx], y[train_idx])
        t1 = _time.perf_counter()
        predicted = model.predict(X.iloc[test_idx])
        scores = _scores_for(model, X.iloc[test_idx], classes)
        t2 = _time.perf_counter()
        build_total += t1 - t0
        test_total += t2 - t1
        fold_reports.append(
            compute_report(
                y[test_idx],
                predicted,
                scores=scores,
                prior_baseline=_class_priors(y[train_idx], classes),
                classes=classes,
                build_seconds=t1 - t0,
                test_seconds=t2 - t1,
                protocol=f"cross-validation fold {f + 1}/{len(folds)}",
            )
        )
        all_idx.append(test_idx)
        all_pred.append(predicted)
        all_scores.append(scores)
    order = np.concatenate(all_idx)
    pooled_actual = y[order]
    pooled_pred = np.concatenate(all_pred)
    pooled_scores = np.concatenate(all_scores)
    pooled = compute_report(
        pooled_actual,
        pooled_pred,
        scores=pooled_scores,
        prior_baseline=_class_priors(y, classes),
        classes=classes,
        build_seconds=build_total,
        test_seconds=test_total,
        protocol=f"stratified {len(folds)}-fold cross-validation"
        if config.stratified
        else f"{len(folds)}-fold cross-validation",
    )
    return CrossValidationResult(fold_reports, pooled)


def full_trainingset_protocol(X, y, learner, classes=None) -> EvaluationReport:
    """Train and evaluate on the same data (optimistically biased)."""
    X = check_feature_frame(X)
    y = np.asarray([str(v) for v in y], dtype=object)
    if len(y) == 0:
        raise EmptyEvaluationError("no instances to evaluate")
    classes = _class_order(y, classes)
    model = clone(learner)
    t0 = _time.perf_counter()
    model.fit(X, y)
    t1 = _time.perf_counter()
    predicted = model.predict(X)
    scores = _scores_for(model, X, classes)
    t2 = _time.perf_counter()
    return compute_report(
        y,
        predicted,
        scores=scores,
        prior_baseline=_class_priors(y, classes),
        classes=classes,
        build_seconds=t1 - t0,
        test_seconds=t2 - t1,
        protocol="evaluation on training set (optimistically biased)",
    )


# -- rendering ---------------------------------------------------------------


def _letters(k: int) -> list[str]:
    out = []
    for i in range(k):
        name = ""
        i += 1
        while i:
            i, rem = divmod(i - 1, 26)
            name = chr(ord("a") + rem) + name
        out.append(name)
    return out


def format_report(report: EvaluationReport, include_timing: bool = False) -> str:
    """Fixed-width text block: summary, per-class table, confusion matrix."""
    lines = []
    if include_timing:
        lines.append(f"Time taken to build model: {report.build_seconds:.2f} seconds")
        lines.append("")
    if report.protocol:
        lines.append(f"=== {report.protocol.capitalize()} ===")
        lines.append("")
    if include_timing:
        lines.append(f"Time taken to test model: {report.test_seconds:.2f} seconds")
        lines.append("")
    lines.append("=== Summary ===")
    lines.append("")
    lines.append(
        f"{'Correctly Classified Instances':<34}{report.correct:>8}"
        f"{report.correct_pct:>12.4f} %"
    )
    lines.append(
        f"{'Incorrectly Classified Instances':<34}{report.incorrect:>8}"
        f"{report.incorrect_pct:>12.4f} %"
    )
    lines.append(f"{'Kappa statistic':<34}{report.kappa:>8.4f}")
    lines.append(f"{'Mean absolute error':<34}{report.mae:>8.4f}")
    lines.append(f"{'Root mean squared error':<34}{report.rmse:>8.4f}")
    lines.append(
        f"{'Relative absolute error':<34}{report.relative_absolute_error_pct:>8.4f} %"
    )
    lines.append(
        f"{'Root relative squared error':<34}"
        f"{report.root_relative_squared_error_pct:>8.4f} %"
    )
    lines.append(f"{'Total Number of Instances':<34}{report.n_instances:>8}")
    lines.append("")
    lines.append("=== Detailed Accuracy By Class ===")
    lines.append("")
    header = (
        f"{'':16}{'TP Rate':>8} {'FP Rate':>8} {'Precision':>10} {'Recall':>8} "
        f"{'F-Measure':>10} {'MCC':>8} {'ROC Area':>9} {'PRC Area':>9}  Class"
    )
    lines.append(header)

    def _row(label: str, m: PerClassMetrics, cls: str) -> str:
        return (
            f"{label:16}{m.tp_rate:>8.3f} {m.fp_rate:>8.3f} {m.precision:>10.3f} "
            f"{m.recall:>8.3f} {m.f_measure:>10.3f} {m.mcc:>8.3f} "
            f"{m.roc_area:>9.3f} {m.prc_area:>9.3f}  {cls}"
        )

    for cls, metrics in zip(report.matrix.classes, report.per_class):
        lines.append(_row("", metrics, cls))
    lines.append(_row("Weighted Avg.", report.weighted_avg, ""))
    lines.append("")
    lines.append("=== Confusion Matrix ===")
    lines.append("")
    k = len(report.matrix.classes)
    letters = _letters(k)
    width = max(6, len(str(int(report.matrix.counts.max(initial=1)))) + 2)
    lines.append(
        "".join(f"{c:>{width}}" for c in letters) + "   <-- classified as"
    )
    for i, cls in enumerate(report.matrix.classes):
        row = "".join(f"{int(v):>{width}}" for v in report.matrix.counts[i])
        lines.append(f"{row} |   {letters[i]} = {cls}")
    return "\n".join(lines) + "\n"


def per_class_to_dict(m: PerClassMetrics) -> dict:
    return {
        "tp_rate": m.tp_rate,
        "fp_rate": m.fp_rate,
        "precision": m.precision,
        "recall": m.recall,
        "f_measure": m.f_measure,
        "mcc": m.mcc,
        "roc_area": m.roc_area,
        "prc_area": m.prc_area,
        "support": m.support,
    }


def report_to_dict(report: EvaluationReport, include_timing: bool = False) -> dict:
    payload = {
        "protocol": report.protocol,
        "n_instances": report.n_instances,
        "classes": list(report.matrix.classes),
        "confusion_matrix": report.matrix.counts.tolist(),
        "correct": report.correct,
        "incorrect": report.incorrect,
        "correct_pct": report.correct_pct,
        "incorrect_pct": report.incorrect_pct,
        "kappa": report.kappa,
        "mae": report.mae,
        "rmse": report.rmse,
        "relative_absolute_error_pct": report.relative_absolute_error_pct,
        "root_relative_squared_error_pct": report.root_relative_squared_error_pct,
        "per_class": {
            cls: per_class_to_dict(m)
            for cls, m in zip(report.matrix.classes, report.per_class)
        },
        "weighted_avg": per_class_to_dict(report.weighted_avg),
    }
    if include_timing:
        payload["build_seconds"] = report.build_seconds
        payload["test_seconds"] = report.test_seconds
    return payload
