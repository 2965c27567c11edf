"""Gain-ratio decision tree with pessimistic error pruning.

Splits maximise gain ratio among candidates whose information gain reaches
the mean gain over all candidate attributes; numeric attributes use midpoint
thresholds between consecutive distinct values, nominal attributes branch
once per observed value and are never reused along a path.  Missing values
are handled with fractional instance weights during training and weighted
multi-branch descent during prediction.  Pruning replaces a subtree by a
leaf whenever the leaf's pessimistic error estimate does not exceed the
subtree's.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .tabular import (
    MISSING,
    DegenerateDataError,
    FeatureEncoder,
    check_feature_frame,
    check_labels,
)

_GAIN_TOL = 1e-12


def _entropy(counts: np.ndarray, total: float) -> float:
    nz = counts[counts > 0]
    if nz.size <= 1 or total <= 0:
        return 0.0
    p = nz / total
    return float(-(p * np.log2(p)).sum())


def _rows_entropy(count_rows: np.ndarray, totals: np.ndarray) -> np.ndarray:
    """Entropy of each row of a (m, k) count matrix with row totals."""
    with np.errstate(divide="ignore", invalid="ignore"):
        p = count_rows / totals[:, None]
        logs = np.zeros_like(p)
        np.log2(p, out=logs, where=count_rows > 0)
        terms = np.where(count_rows > 0, p * logs, 0.0)
    return -terms.sum(axis=1)


def gain_ratio_nominal(
    codes: Sequence[int],
    y: Sequence[int],
    n_values: int,
    n_classes: int,
    weights: Optional[Sequence[float]] = None,
) -> tuple[float, float, float]:
    """(gain, split_info, gain_ratio) of a nominal attribute.

    ``codes`` are value indices in ``0..n_values-1`` with negatives meaning
    missing.  With missing values present, gain is scaled by the known
    fraction and the missing share contributes a split-information term.
    """
    codes = np.asarray(codes, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    w = np.ones(len(codes)) if weights is None else np.asarray(weights, dtype=np.float64)
    known = codes >= 0
    w_all = float(w.sum())
    w_known = float(w[known].sum())
    if w_known <= 0 or w_all <= 0:
        return 0.0, 0.0, 0.0
    branch = np.zeros((n_values, n_classes))
    np.add.at(branch, (codes[known], y[known]), w[known])
    branch_w = branch.sum(axis=1)
    class_counts = branch.sum(axis=0)
    h_node = _entropy(class_counts, w_known)
    h_children = _rows_entropy(branch, branch_w)
    h_children[branch_w <= 0] = 0.0
    gain_known = h_node - float((branch_w / w_known) @ h_children)
    gain = (w_known / w_all) * gain_known
    fracs = branch_w[branch_w > 0] / w_all
    w_missing = w_all - w_known
    if w_missing > 0:
        fracs = np.append(fracs, w_missing / w_all)
    split_info = float(-(fracs * np.log2(fracs)).sum()) if fracs.size > 1 else 0.0
    ratio = gain / split_info if split_info > 0 else 0.0
    return gain, split_info, ratio


@dataclass
class _Leaf:
    counts: np.ndarray  # per-class training weight reaching the leaf
    prediction: int

    @property
    def n(self) -> float:
        return float(self.counts.sum())

    @property
    def errors(self) -> float:
        return self.n - float(self.counts[self.prediction])


@dataclass
class _Split:
    column: str
    numeric: bool
    threshold: Optional[float]  # numeric splits only
    values: tuple[int, ...]  # nominal: category code per branch
    branch_weights: np.ndarray  # known training weight per branch
    children: list = field(default_factory=list)
    counts: np.ndarray = None  # node class distribution (for stats)

    @property
    def majority_branch(self) -> int:
        return int(np.argmax(self.branch_weights))


@dataclass(frozen=True)
class TreeStats:
    size: int
    leaves: int
    depth: int


def _node_stats(node) -> TreeStats:
    if isinstance(node, _Leaf):
        return TreeStats(1, 1, 0)
    child_stats = [_node_stats(child) for child in node.children]
    return TreeStats(
        size=1 + sum(s.size for s in child_stats),
        leaves=sum(s.leaves for s in child_stats),
        depth=1 + max(s.depth for s in child_stats),
    )


def tree_stats(model) -> TreeStats:
    """Node count, leaf count and depth of a fitted tree."""
    root = model.root_ if hasattr(model, "root_") else model
    return _node_stats(root)


def _errstate_z(confidence: float) -> float:
    # Upper-tail normal quantile used by the pessimistic error bound.
    return float(norm.isf(confidence))


def pessimistic_extra_errors(n: float, e: float, confidence: float) -> float:
    """Extra errors added by the upper confidence bound at a leaf.

    Classic pessimistic estimate: for an observed error count ``e`` out of
    ``n`` training instances, returns ``n * U - e`` where ``U`` is the upper
    binomial confidence limit at the given confidence level (with the usual
    small-count special cases).
    """
    if n <= 0:
        return 0.0
    if e < 1e-9:
        return n * (1.0 - confidence ** (1.0 / n))
    if e < 0.9999:
        base = n * (1.0 - confidence ** (1.0 / n))
        return base + e * (pessimistic_extra_errors(n, 1.0, confidence) - base)
    if e + 0.5 >= n:
        return 0.67 * (n - e)
    z2 = _errstate_z(confidence) ** 2
    f = (e + 0.5) / n
    upper = (f + z2 / (2 * n) + np.sqrt(z2 * (f * (1 - f) / n + z2 / (4 * n * n)))) / (
        1 + z2 / n
    )
    return n * upper - e


def _subtree_estimated_errors(node, confidence: float) -> float:
    if isinstance(node, _Leaf):
        return node.errors + pessimistic_extra_errors(node.n, node.errors, confidence)
    return sum(_subtree_estimated_errors(c, confidence) for c in node.children)


class DecisionTreeClassifier(ClassifierMixin, BaseEstimator):
    """Decision tree over mixed numeric/nominal DataFrame features.

    Parameters
    ----------
    min_leaf_instances : minimum training weight per branch of a split; a
        node with fewer than twice this weight becomes a leaf.
    pruning_confidence : confidence level of the pessimistic error bound.
    use_pruning : disable to keep the fully grown tree.
    """

    def __init__(
        self,
        min_leaf_instances: int = 2,
        pruning_confidence: float = 0.25,
        use_pruning: bool = True,
    ):
        self.min_leaf_instances = min_leaf_instances
        self.pruning_confidence = pruning_confidence
        self.use_pruning = use_pruning

    # -- fitting -----------------------------------------------------------

    def fit(self, X, y):
        if self.min_leaf_instances < 1:
            raise ValueError("min_leaf_instances must be >= 1")
        if not 0 < self.pruning_confidence <= 1:
            raise ValueError("pruning_confidence must be in (0, 1]")
        X = check_feature_frame(X)
        y = check_labels(y, len(X))
        if len(X) == 0:
            raise DegenerateDataError("cannot fit a tree on zero rows")
        self.classes_, y_codes = np.unique(y, return_inverse=True)
        self.encoder_ = FeatureEncoder().fit(X)
        self.feature_names_in_ = np.asarray(self.encoder_.columns, dtype=object)
        self.n_features_in_ = len(self.encoder_.columns)
        num, nom = self.encoder_.transform(X)
        k = len(self.classes_)
        self._k = k
        self._num_names = self.encoder_.numeric_columns
        self._nom_names = self.encoder_.nominal_columns
        self._nom_sizes = tuple(
            len(self.encoder_.categories[c]) for c in self._nom_names
        )
        self._num_pos = {name: i for i, name in enumerate(self._num_names)}
        self._nom_pos = {name: i for i, name in enumerate(self._nom_names)}
        # Original column position of each attribute, for the equal-ratio
        # tie-break (lowest schema index wins).
        order = {name: i for i, name in enumerate(self.encoder_.columns)}
        self._num_order = tuple(order[c] for c in self._num_names)
        self._nom_order = tuple(order[c] for c in self._nom_names)

        idx = np.arange(len(X))
        w = np.ones(len(X))
        nominal_avail = np.ones(len(self._nom_names), dtype=bool)
        self.root_ = self._build(num, nom, y_codes, idx, w, nominal_avail)
        return self

    def _leaf(self, counts: np.ndarray) -> _Leaf:
        return _Leaf(counts=counts, prediction=int(np.argmax(counts)))

    def _build(self, num, nom, y, idx, w, nominal_avail):
        k = self._k
        counts = np.bincount(y[idx], weights=w, minlength=k)
        n = float(counts.sum())
        errors = n - float(counts.max())
        min_leaf = self.min_leaf_instances
        if n < 2 * min_leaf or errors < 1e-9:
            return self._leaf(counts)

        best = None  # (ratio, order, payload)
        candidates = []

        for j, col_order in enumerate(self._num_order):
            cand = self._numeric_candidate(num[:, j], y, idx, w, n, min_leaf)
            if cand is not None:
                candidates.append((cand[0], cand[1], col_order, ("num", j) + cand[2:]))
        for j, col_order in enumerate(self._nom_order):
            if not nominal_avail[j]:
                continue
            cand = self._nominal_candidate(nom[:, j], y, idx, w, n, min_leaf, j)
            if cand is not None:
                candidates.append((cand[0], cand[1], col_order, ("nom", j) + cand[2:]))

        if not candidates:
            return self._leaf(counts)

        mean_gain = sum(c[0] for c in candidates) / len(candidates)
        best_ratio = -1.0
        chosen = None
        for gain, ratio, col_order, payload in sorted(candidates, key=lambda c: c[2]):
            if gain + _GAIN_TOL < mean_gain:
                continue
            if ratio > best_ratio + _GAIN_TOL:
                best_ratio = ratio
                chosen = payload
        if chosen is None:
            return self._leaf(counts)

        node = self._split_node(num, nom, y, idx, w, nominal_avail, chosen, counts)
        if self.use_pruning:
            node = self._maybe_prune(node, counts, n)
        return node

    def _numeric_candidate(self, col, y, idx, w, n_total, min_leaf):
        vals = col[idx]
        known = ~np.isnan(vals)
        if not known.any():
            return None
        xv = vals[known]
        yv = y[idx][known]
        wv = w[known]
        order = np.argsort(xv, kind="mergesort")
        xs = xv[order]
        if xs[0] == xs[-1]:
            return None
        ys = yv[order]
        ws = wv[order]
        m = len(xs)
        k = self._k
        one_hot = np.zeros((m, k))
        one_hot[np.arange(m), ys] = ws
        cum = one_hot.cumsum(axis=0)
        total_counts = cum[-1]
        w_known = float(total_counts.sum())
        w_missing = n_total - w_known
        cuts = np.nonzero(xs[:-1] < xs[1:])[0]
        if cuts.size == 0:
            return None
        left = cum[cuts]
        left_w = left.sum(axis=1)
        right = total_counts - left
        right_w = w_known - left_w
        valid = (left_w >= min_leaf) & (right_w >= min_leaf)
        if not valid.any():
            return None
        h_node = _entropy(total_counts, w_known)
        h_left = _rows_entropy(left, left_w)
        h_right = _rows_entropy(right, right_w)
        gain_known = h_node - (left_w * h_left + right_w * h_right) / w_known
        gains = (w_known / n_total) * gain_known
        gains[~valid] = -np.inf
        pick = int(np.argmax(gains))
        gain = float(gains[pick])
        if gain < -_GAIN_TOL:
            return None
        gain = max(gain, 0.0)
        fracs = [left_w[pick] / n_total, right_w[pick] / n_total]
        if w_missing > 1e-12:
            fracs.append(w_missing / n_total)
        fr = np.asarray(fracs)
        split_info = float(-(fr * np.log2(fr)).sum())
        ratio = gain / split_info if split_info > 0 else 0.0
        threshold = float((xs[cuts[pick]] + xs[cuts[pick] + 1]) / 2.0)
        return (gain, ratio, threshold, float(left_w[pick]), float(right_w[pick]))

    def _nominal_candidate(self, col, y, idx, w, n_total, min_leaf, j):
        codes = col[idx]
        known = codes >= 0
        if not known.any():
            return None
        n_values = self._nom_sizes[j]
        branch = np.zeros((n_values, self._k))
        np.add.at(branch, (codes[known], y[idx][known]), w[known])
        branch_w = branch.sum(axis=1)
        present = branch_w > 0
        if present.sum() < 2 or (branch_w >= min_leaf).sum() < 2:
            return None
        class_counts = branch.sum(axis=0)
        w_known = float(class_counts.sum())
        w_missing = n_total - w_known
        h_node = _entropy(class_counts, w_known)
        h_children = _rows_entropy(branch[present], branch_w[present])
        gain_known = h_node - float((branch_w[present] / w_known) @ h_children)
        gain = (w_known / n_total) * gain_known
        if gain < -_GAIN_TOL:
            return None
        gain = max(gain, 0.0)
        fracs = branch_w[present] / n_total
        if w_missing > 1e-12:
            fracs = np.append(fracs, w_missing / n_total)
        split_info = float(-(fracs * np.log2(fracs)).sum()) if fracs.size > 1 else 0.0
        ratio = gain / split_info if split_info > 0 else 0.0
        values = tuple(int(v) for v in np.nonzero(present)[0])
        weights = tuple(float(branch_w[v]) for v in values)
        return (gain, ratio, values, weights)

    def _split_node(self, num, nom, y, idx, w, nominal_avail, payload, counts):
        kind, j = payload[0], payload[1]
        if kind == "num":
            _, _, threshold, left_w, right_w = payload
            vals = num[idx, j]
            missing = np.isnan(vals)
            branches = [(vals <= threshold) & ~missing, (vals > threshold) & ~missing]
            branch_weights = np.array([left_w, right_w])
            node = _Split(
                column=self._num_names[j],
                numeric=True,
                threshold=threshold,
                values=(),
                branch_weights=branch_weights,
                counts=counts,
            )
            avail = nominal_avail
        else:
            _, _, values, weights = payload
            codes = nom[idx, j]
            missing = codes < 0
            branches = [codes == v for v in values]
            branch_weights = np.asarray(weights)
            node = _Split(
                column=self._nom_names[j],
                numeric=False,
                threshold=None,
                values=values,
                branch_weights=branch_weights,
                counts=counts,
            )
            avail = nominal_avail.copy()
            avail[j] = False

        w_known = float(branch_weights.sum())
        idx_missing = idx[missing]
        w_missing = w[missing]
        for mask, bw in zip(branches, branch_weights):
            child_idx = idx[mask]
            child_w = w[mask]
            if idx_missing.size:
                share = bw / w_known
                child_idx = np.concatenate([child_idx, idx_missing])
                child_w = np.concatenate([child_w, w_missing * share])
            node.children.append(self._build(num, nom, y, child_idx, child_w, avail))
        return node

    def _maybe_prune(self, node, counts, n):
        cf = self.pruning_confidence
        subtree_est = _subtree_estimated_errors(node, cf)
        leaf_errors = n - float(counts.max())
        leaf_est = leaf_errors + pessimistic_extra_errors(n, leaf_errors, cf)
        if leaf_est <= subtree_est + 1e-9:
            return self._leaf(counts)
        return node

    # -- prediction --------------------------------------------------------

    def _leaf_distribution(self, leaf: _Leaf) -> np.ndarray:
        # Laplace-corrected leaf counts.
        return (leaf.counts + 1.0) / (leaf.n + self._k)

    def _walk(self, node, num_row, nom_row, weight, out):
        if isinstance(node, _Leaf):
            out += weight * self._leaf_distribution(node)
            return
        if node.numeric:
            value = num_row[self._num_pos[node.column]]
            if np.isnan(value):
                self._descend_all(node, num_row, nom_row, weight, out)
                return
            branch = 0 if value <= node.threshold else 1
            self._walk(node.children[branch], num_row, nom_row, weight, out)
        else:
            code = nom_row[self._nom_pos[node.column]]
            if code == MISSING:
                self._descend_all(node, num_row, nom_row, weight, out)
                return
            try:
                branch = node.values.index(code)
            except ValueError:
                # Value unseen on this branch during training: follow the
                # majority branch so prediction stays total.
                branch = node.majority_branch
            self._walk(node.children[branch], num_row, nom_row, weight, out)

    def _descend_all(self, node, num_row, nom_row, weight, out):
        total = float(node.branch_weights.sum())
        for child, bw in zip(node.children, node.branch_weights):
            self._walk(child, num_row, nom_row, weight * bw / total, out)

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "root_")
        X = check_feature_frame(X)
        num, nom = self.encoder_.transform(X)
        out = np.zeros((len(X), self._k))
        for i in range(len(X)):
            self._walk(self.root_, num[i], nom[i], 1.0, out[i])
        out /= out.sum(axis=1, keepdims=True)
        return out

    def predict(self, X) -> np.ndarray:
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=1)]

    # -- persistence -------------------------------------------------------

    def _node_to_dict(self, node, nodes: list) -> int:
        node_id = len(nodes)
        nodes.append(None)
        if isinstance(node, _Leaf):
            nodes[node_id] = {
                "kind": "leaf",
                "counts": [float(c) for c in node.counts],
                "prediction": int(node.prediction),
            }
        else:
            children = []
            payload = {
                "kind": "split",
                "attribute": node.column,
                "numeric": node.numeric,
                "branch_weights": [float(b) for b in node.branch_weights],
                "counts": [float(c) for c in node.counts],
            }
            nodes[node_id] = payload
            if node.numeric:
                payload["threshold"] = float(node.threshold)
            else:
                payload["values"] = list(node.values)
            for child in node.children:
                children.append(self._node_to_dict(child, nodes))
            payload["children"] = children
        return node_id

    def to_dict(self) -> dict:
        check_is_fitted(self, "root_")
        nodes: list = []
        root_id = self._node_to_dict(self.root_, nodes)
        return {
            "format": "churnseg.model",
            "version": 1,
            "model": "c45",
            "params": self.get_params(),
            "classes": [str(c) for c in self.classes_],
            "encoder": self.encoder_.to_dict(),
            "root": root_id,
            "nodes": nodes,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "DecisionTreeClassifier":
        if payload.get("model") != "c45":
            raise ValueError(f"not a decision-tree model: {payload.get('model')!r}")
        est = cls(**payload["params"])
        est.classes_ = np.asarray(payload["classes"], dtype=object)
        est.encoder_ = FeatureEncoder.from_dict(payload["encoder"])
        est.feature_names_in_ = np.asarray(est.encoder_.columns, dtype=object)
        est.n_features_in_ = len(est.encoder_.columns)
        est._k = len(est.classes_)
        est._num_names = est.encoder_.numeric_columns
        est._nom_names = est.encoder_.nominal_columns
        est._nom_sizes = tuple(len(est.encoder_.categories[c]) for c in est._nom_names)
        est._num_pos = {name: i for i, name in enumerate(est._num_names)}
        est._nom_pos = {name: i for i, name in enumerate(est._nom_names)}
        nodes = payload["nodes"]

        def build(node_id: int):
            raw = nodes[node_id]
            if raw["kind"] == "leaf":
                return _Leaf(
                    counts=np.asarray(raw["counts"], dtype=np.float64),
                    prediction=int(raw["prediction"]),
                )
            node = _Split(
                column=raw["attribute"],
                numeric=bool(raw["numeric"]),
                threshold=raw.get("threshold"),
                values=tuple(raw.get("values", ())),
                branch_weights=np.asarray(raw["branch_weights"], dtype=np.float64),
                counts=np.asarray(raw["counts"], dtype=np.float64),
            )
            node.children = [build(c) for c in raw["children"]]
            return node

        est.root_ = build(payload["root"])
        return est
