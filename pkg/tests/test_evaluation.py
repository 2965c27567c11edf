import numpy as np
import pandas as pd
import pytest
from sklearn.base import BaseEstimator, ClassifierMixin

from churnseg.evaluation import (
    ConfusionMatrix,
    EmptyEvaluationError,
    FoldTooSmallError,
    LengthMismatchError,
    ProtocolConfig,
    binary_mcc,
    compute_report,
    cross_validation_protocol,
    format_report,
    full_trainingset_protocol,
    kappa_statistic,
    percentage_split_protocol,
    prc_area,
    prc_curve_points,
    report_to_dict,
    roc_area,
    stratified_folds,
)

import oracles

REFERENCE_COUNTS = [
    [4778, 9, 85, 4],
    [323, 1494, 86, 12],
    [499, 4, 1691, 0],
    [59, 2, 32, 1],
]
REFERENCE_CLASSES = ("Standard", "Unpaid Invoice", "Premium", "VIP")


def matrix_to_pairs(counts, classes):
    actual, predicted = [], []
    for i, row in enumerate(counts):
        for j, count in enumerate(row):
            actual.extend([classes[i]] * count)
            predicted.extend([classes[j]] * count)
    return actual, predicted


def reference_report():
    actual, predicted = matrix_to_pairs(REFERENCE_COUNTS, REFERENCE_CLASSES)
    return compute_report(actual, predicted, classes=REFERENCE_CLASSES)


# -- confusion matrix -----------------------------------------------------------


def test_matrix_from_pairs_counts():
    m = ConfusionMatrix.from_pairs(["a", "a", "b"], ["a", "b", "b"])
    assert m.classes == ("a", "b")
    assert m.counts.tolist() == [[1, 1], [0, 1]]
    assert m.total == 3 and m.correct == 2


def test_matrix_rejects_labels_outside_class_list():
    with pytest.raises(ValueError):
        ConfusionMatrix.from_pairs(["a"], ["z"], classes=("a", "b"))


def test_matrix_length_mismatch():
    with pytest.raises(LengthMismatchError):
        ConfusionMatrix.from_pairs(["a"], ["a", "b"])


# -- kappa ------------------------------------------------------------------------


def test_kappa_of_reference_matrix():
    assert kappa_statistic(
        ConfusionMatrix(REFERENCE_CLASSES, np.array(REFERENCE_COUNTS))
    ) == pytest.approx(0.7882, abs=5e-4)


def test_kappa_perfect_matrix_is_one():
    m = ConfusionMatrix(("a", "b"), np.array([[5, 0], [0, 7]]))
    assert kappa_statistic(m) == pytest.approx(1.0)


def test_kappa_of_marginal_outer_product_is_zero():
    # Counts proportional to an outer product of the marginals mean the
    # observed agreement equals chance agreement exactly.
    row = np.array([6, 4])
    col = np.array([3, 7])
    counts = np.outer(row, col)  # total 10*10, p_o == p_e
    m = ConfusionMatrix(("a", "b"), counts)
    assert kappa_statistic(m) == pytest.approx(0.0, abs=1e-12)


def test_kappa_degenerate_single_class_is_zero():
    m = ConfusionMatrix(("a", "b"), np.array([[8, 0], [0, 0]]))
    assert kappa_statistic(m) == 0.0


# -- MCC -------------------------------------------------------------------------


def test_mcc_zero_marginal_defined_as_zero():
    assert binary_mcc(0, 0, 5, 5) == 0.0


def test_mcc_symmetric_under_transposition():
    # Swapping actual/predicted swaps fn and fp; MCC is unchanged.
    assert binary_mcc(10, 3, 7, 20) == pytest.approx(binary_mcc(10, 7, 3, 20))


def test_mcc_perfect_and_inverted():
    assert binary_mcc(5, 0, 0, 5) == pytest.approx(1.0)
    assert binary_mcc(0, 5, 5, 0) == pytest.approx(-1.0)


# -- ROC / PRC --------------------------------------------------------------------


def test_roc_area_matches_all_pairs_oracle_random():
    rng = np.random.default_rng(2)
    for _ in range(200):
        n = int(rng.integers(2, 9))
        labels = rng.integers(0, 2, size=n).astype(bool)
        if labels.all() or not labels.any():
            continue
        scores = rng.choice([0.0, 0.25, 0.5, 0.75, 1.0], size=n)
        assert roc_area(labels, scores) == pytest.approx(
            oracles.auc_all_pairs(labels, scores), abs=1e-12
        )


def test_roc_area_degenerate_is_half():
    assert roc_area([True, True], [0.1, 0.9]) == 0.5
    assert roc_area([False, False], [0.1, 0.9]) == 0.5


def test_roc_area_perfect_and_reversed():
    assert roc_area([False, True], [0.1, 0.9]) == 1.0
    assert roc_area([True, False], [0.1, 0.9]) == 0.0


def test_prc_area_hand_case():
    # Descending scores: pos, neg, pos.  Interpolated precision is 1 up to
    # recall 0.5 and 2/3 beyond, so the area is 0.5*1 + 0.5*(2/3).
    labels = [True, False, True]
    scores = [0.9, 0.8, 0.7]
    assert prc_area(labels, scores) == pytest.approx(0.5 + 0.5 * (2 / 3), abs=1e-12)


def test_prc_area_perfect_ranking_is_one():
    assert prc_area([True, True, False], [0.9, 0.8, 0.1]) == pytest.approx(1.0)


def test_prc_area_no_positives_is_zero():
    assert prc_area([False, False], [0.5, 0.4]) == 0.0


def test_prc_curve_points_tie_blocks():
    points = prc_curve_points([True, False], [0.5, 0.5])
    assert points == [(1.0, 0.5)]


# -- compute_report ----------------------------------------------------------------


def test_reference_matrix_summary_values():
    report = reference_report()
    assert report.correct == 7964
    assert report.incorrect == 1115
    assert report.n_instances == 9079
    assert report.correct_pct == pytest.approx(87.7189, abs=1e-4)
    assert report.incorrect_pct == pytest.approx(12.2811, abs=1e-4)
    assert report.correct_pct + report.incorrect_pct == pytest.approx(100.0, abs=1e-9)
    assert report.kappa == pytest.approx(0.7882, abs=5e-4)


def test_reference_matrix_per_class_values():
    report = reference_report()
    expected = {
        "Standard": dict(precision=0.844, recall=0.980, f_measure=0.907,
                         fp_rate=0.210, mcc=0.793),
        "Unpaid Invoice": dict(precision=0.990, recall=0.780, f_measure=0.873,
                               fp_rate=0.002, mcc=0.853),
        "Premium": dict(precision=0.893, recall=0.771, f_measure=0.827,
                        fp_rate=0.029, mcc=0.781),
        "VIP": dict(precision=0.059, recall=0.011, f_measure=0.018,
                    fp_rate=0.002, mcc=0.021),
    }
    for cls, metrics in zip(report.matrix.classes, report.per_class):
        for name, want in expected[cls].items():
            assert getattr(metrics, name) == pytest.approx(want, abs=1e-3), (cls, name)
        assert metrics.tp_rate == metrics.recall


def test_reference_matrix_weighted_averages():
    report = reference_report()
    w = report.weighted_avg
    assert w.precision == pytest.approx(0.879, abs=1e-3)
    assert w.tp_rate == pytest.approx(0.877, abs=1e-3)
    assert w.f_measure == pytest.approx(0.871, abs=1e-3)
    assert w.fp_rate == pytest.approx(0.120, abs=1e-3)
    assert w.mcc == pytest.approx(0.794, abs=1e-3)


def test_weighted_average_recomputes_from_per_class():
    report = reference_report()
    supports = np.array([m.support for m in report.per_class], dtype=float)
    for name in ("tp_rate", "fp_rate", "precision", "recall", "f_measure",
                 "mcc", "roc_area", "prc_area"):
        values = np.array([getattr(m, name) for m in report.per_class])
        want = float((supports / supports.sum()) @ values)
        assert getattr(report.weighted_avg, name) == pytest.approx(want, abs=1e-9)


def test_identity_matrix_scores_perfectly():
    actual = ["a"] * 3 + ["b"] * 2
    report = compute_report(actual, actual)
    assert report.correct_pct == 100.0
    assert report.kappa == pytest.approx(1.0)


def test_mae_rmse_hand_case():
    # One instance, two classes, score (0.8, 0.2), truth (1, 0):
    # per-cell errors are 0.2 and 0.2.
    report = compute_report(
        ["a"], ["a"], scores=np.array([[0.8, 0.2]]), classes=("a", "b")
    )
    assert report.mae == pytest.approx(0.2, abs=1e-12)
    assert report.rmse == pytest.approx(0.2, abs=1e-12)


def test_relative_errors_against_prior_baseline():
    # Prior predictor (0.5, 0.5) has per-cell error 0.5; the scores above
    # have error 0.2, so RAE is 40%.
    report = compute_report(
        ["a"], ["a"],
        scores=np.array([[0.8, 0.2]]),
        prior_baseline=(0.5, 0.5),
        classes=("a", "b"),
    )
    assert report.relative_absolute_error_pct == pytest.approx(40.0, abs=1e-9)
    assert report.root_relative_squared_error_pct == pytest.approx(40.0, abs=1e-9)


def test_empty_evaluation_raises():
    with pytest.raises(EmptyEvaluationError):
        compute_report([], [])


def test_score_shape_mismatch_raises():
    with pytest.raises(LengthMismatchError):
        compute_report(["a"], ["a"], scores=np.array([[1.0]]), classes=("a", "b"))


# -- protocols ----------------------------------------------------------------------


class ConstantClassifier(ClassifierMixin, BaseEstimator):
    """Always predicts the majority class of the training labels."""

    def fit(self, X, y):
        values, counts = np.unique(np.asarray(y, dtype=object), return_counts=True)
        self.classes_ = values
        self._winner = values[int(np.argmax(counts))]
        return self

    def predict(self, X):
        return np.asarray([self._winner] * len(X), dtype=object)

    def predict_proba(self, X):
        proba = np.zeros((len(X), len(self.classes_)))
        proba[:, list(self.classes_).index(self._winner)] = 1.0
        return proba


class MemorizingClassifier(ClassifierMixin, BaseEstimator):
    """1-nearest-row lookup on the single numeric column."""

    def fit(self, X, y):
        self._x = np.asarray(X.iloc[:, 0], dtype=float)
        self._y = np.asarray(y, dtype=object)
        self.classes_ = np.unique(self._y)
        return self

    def predict(self, X):
        x = np.asarray(X.iloc[:, 0], dtype=float)
        idx = np.abs(x[:, None] - self._x[None, :]).argmin(axis=1)
        return self._y[idx]

    def predict_proba(self, X):
        pred = self.predict(X)
        proba = np.zeros((len(X), len(self.classes_)))
        lookup = {c: i for i, c in enumerate(self.classes_)}
        for i, p in enumerate(pred):
            proba[i, lookup[p]] = 1.0
        return proba


def toy_data(n=40, seed=0):
    rng = np.random.default_rng(seed)
    X = pd.DataFrame({"x": np.arange(n, dtype=float)})
    y = np.asarray(["lo" if i < n // 2 else "hi" for i in range(n)], dtype=object)
    return X, y


def test_same_seed_repeated_gives_zero_std():
    X, y = toy_data()
    config = ProtocolConfig(mode="percentage_split", seeds=(7,) * 10)
    result = percentage_split_protocol(X, y, ConstantClassifier(), config)
    assert result.accuracy_std == pytest.approx(0.0, abs=1e-12)
    assert len(result.reports) == 10


def test_constant_learner_std_reflects_class_ratio_variation():
    X, y = toy_data()
    config = ProtocolConfig(mode="percentage_split", seeds=tuple(range(1, 11)))
    result = percentage_split_protocol(X, y, ConstantClassifier(), config)
    for report in result.reports:
        majority_share = max(
            report.matrix.col_totals().max(), report.matrix.row_totals().max()
        )
        assert 0 <= report.correct_pct <= 100
    assert result.accuracy_std >= 0


def test_split_fraction_controls_test_size():
    X, y = toy_data(n=100)
    config = ProtocolConfig(mode="percentage_split", split_fraction=0.66, seeds=(1,))
    result = percentage_split_protocol(X, y, ConstantClassifier(), config)
    assert result.reports[0].n_instances == 34


def test_cv_pooled_over_exactly_all_rows():
    X, y = toy_data(n=10)
    config = ProtocolConfig(mode="cross_validation", folds=10, seeds=(1,))
    result = cross_validation_protocol(X, y, MemorizingClassifier(), config)
    assert result.pooled_report.n_instances == 10
    assert len(result.fold_reports) == 10


def test_each_instance_held_out_exactly_once():
    y = np.asarray(["a"] * 7 + ["b"] * 5, dtype=object)
    folds = stratified_folds(y, 4, seed=3)
    combined = np.concatenate(folds)
    assert sorted(combined.tolist()) == list(range(12))
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 1


def test_stratified_folds_preserve_class_balance():
    y = np.asarray(["a"] * 40 + ["b"] * 20, dtype=object)
    folds = stratified_folds(y, 5, seed=1)
    for fold in folds:
        labels = y[fold]
        assert (labels == "a").sum() == 8
        assert (labels == "b").sum() == 4


def test_too_many_folds_raise():
    y = np.asarray(["a", "b"], dtype=object)
    with pytest.raises(FoldTooSmallError):
        stratified_folds(y, 3, seed=0)


def test_full_trainingset_memorizer_is_perfect():
    X, y = toy_data()
    report = full_trainingset_protocol(X, y, MemorizingClassifier())
    assert report.correct_pct == 100.0
    assert "training set" in report.protocol


def test_protocol_config_validation():
    with pytest.raises(ValueError):
        ProtocolConfig(mode="bogus")
    with pytest.raises(ValueError):
        ProtocolConfig(split_fraction=1.5)
    with pytest.raises(ValueError):
        ProtocolConfig(folds=1)
    with pytest.raises(ValueError):
        ProtocolConfig(seeds=())


def test_protocols_accept_explicit_class_order():
    X, y = toy_data()
    report = full_trainingset_protocol(
        X, y, MemorizingClassifier(), classes=("lo", "hi")
    )
    assert report.matrix.classes == ("lo", "hi")


# -- rendering ---------------------------------------------------------------------


def test_format_report_sections_and_stability():
    report = reference_report()
    text = format_report(report)
    assert "=== Summary ===" in text
    assert "=== Detailed Accuracy By Class ===" in text
    assert "=== Confusion Matrix ===" in text
    assert "Correctly Classified Instances" in text
    assert "87.7189 %" in text
    assert "<-- classified as" in text
    assert format_report(report) == text


def test_format_report_hides_timing_by_default():
    report = reference_report()
    report.build_seconds = 1.23
    assert "seconds" not in format_report(report)
    assert "1.23 seconds" in format_report(report, include_timing=True)


def test_report_to_dict_round_trips_values():
    report = reference_report()
    payload = report_to_dict(report)
    assert payload["correct"] == 7964
    assert payload["classes"] == list(REFERENCE_CLASSES)
    assert payload["per_class"]["VIP"]["precision"] == pytest.approx(0.059, abs=1e-3)
    assert "build_seconds" not in payload
    assert "build_seconds" in report_to_dict(report, include_timing=True)
