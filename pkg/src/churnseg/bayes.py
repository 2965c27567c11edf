"""Naive Bayes over mixed nominal/numeric features.

Nominal attributes use add-one smoothed per-class frequency tables; numeric
attributes use Gaussian likelihoods with a floored standard deviation.
Posteriors are accumulated in log space and normalised with logsumexp, so
long products of small likelihoods stay stable.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .tabular import (
    MISSING,
    UNSEEN,
    DegenerateDataError,
    FeatureEncoder,
    check_feature_frame,
    check_labels,
)

_LOG_2PI = float(np.log(2.0 * np.pi))


class NaiveBayesClassifier(ClassifierMixin, BaseEstimator):
    """Naive Bayes classifier for DataFrame input.

    Parameters
    ----------
    sigma_floor_fraction : lower bound on a per-class standard deviation,
        as a fraction of the attribute's global range.
    sigma_floor_abs : absolute lower bound used when the range is zero.
    """

    def __init__(self, sigma_floor_fraction: float = 1e-4, sigma_floor_abs: float = 1e-9):
        self.sigma_floor_fraction = sigma_floor_fraction
        self.sigma_floor_abs = sigma_floor_abs

    def fit(self, X, y):
        X = check_feature_frame(X)
        y = check_labels(y, len(X))
        if len(X) == 0:
            raise DegenerateDataError("cannot fit on zero rows")
        self.classes_, y_codes = np.unique(y, return_inverse=True)
        k = len(self.classes_)
        self.encoder_ = FeatureEncoder().fit(X)
        self.feature_names_in_ = np.asarray(self.encoder_.columns, dtype=object)
        self.n_features_in_ = len(self.encoder_.columns)
        num, nom = self.encoder_.transform(X)

        class_counts = np.bincount(y_codes, minlength=k).astype(float)
        self.class_priors_ = (class_counts + 1.0) / (len(X) + k)

        # Nominal tables: per column a (k, V) matrix of add-one smoothed
        # value frequencies, plus the smoothed mass for an unseen value.
        self.nominal_tables_ = []
        self.nominal_unseen_ = []
        for j, name in enumerate(self.encoder_.nominal_columns):
            V = len(self.encoder_.categories[name])
            counts = np.zeros((k, V))
            known = nom[:, j] >= 0
            np.add.at(counts, (y_codes[known], nom[known, j]), 1.0)
            known_per_class = counts.sum(axis=1)
            table = (counts + 1.0) / (known_per_class[:, None] + V)
            self.nominal_tables_.append(table)
            self.nominal_unseen_.append(1.0 / (known_per_class + V))

        # Gaussian parameters per (class, numeric column); missing values are
        # skipped per attribute.  Classes with no observations for a column
        # fall back to the column's global mean/std.
        n_num = num.shape[1]
        self.numeric_means_ = np.zeros((k, n_num))
        self.numeric_sigmas_ = np.ones((k, n_num))
        for j in range(n_num):
            col = num[:, j]
            known = ~np.isnan(col)
            if not known.any():
                self.numeric_means_[:, j] = 0.0
                self.numeric_sigmas_[:, j] = self.sigma_floor_abs
                continue
            col_known = col[known]
            rng = float(col_known.max() - col_known.min())
            floor = max(rng * self.sigma_floor_fraction, self.sigma_floor_abs)
            global_mean = float(col_known.mean())
            global_sigma = (
                float(col_known.std(ddof=1)) if col_known.size > 1 else 0.0
            )
            global_sigma = max(global_sigma, floor)
            for c in range(k):
                sel = known & (y_codes == c)
                values = col[sel]
                if values.size == 0:
                    self.numeric_means_[c, j] = global_mean
                    self.numeric_sigmas_[c, j] = global_sigma
                    continue
                self.numeric_means_[c, j] = float(values.mean())
                sigma = float(values.std(ddof=1)) if values.size > 1 else 0.0
                self.numeric_sigmas_[c, j] = max(sigma, floor)
        return self

    def _joint_log_likelihood(self, num: np.ndarray, nom: np.ndarray) -> np.ndarray:
        n = num.shape[0]
        jll = np.tile(np.log(self.class_priors_), (n, 1))
        for j, table in enumerate(self.nominal_tables_):
            codes = nom[:, j]
            seen = codes >= 0
            if seen.any():
                jll[seen] += np.log(table[:, codes[seen]]).T
            unseen = codes == UNSEEN
            if unseen.any():
                jll[unseen] += np.log(self.nominal_unseen_[j])[None, :]
            # MISSING contributes no factor.
        for j in range(num.shape[1]):
            x = num[:, j]
            known = ~np.isnan(x)
            if not known.any():
                continue
            mu = self.numeric_means_[:, j]
            sigma = self.numeric_sigmas_[:, j]
            z = (x[known, None] - mu[None, :]) / sigma[None, :]
            jll[known] += -0.5 * (z * z) - np.log(sigma)[None, :] - 0.5 * _LOG_2PI
        return jll

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "class_priors_")
        X = check_feature_frame(X)
        num, nom = self.encoder_.transform(X)
        jll = self._joint_log_likelihood(num, nom)
        log_norm = logsumexp(jll, axis=1, keepdims=True)
        return np.exp(jll - log_norm)

    def predict(self, X) -> np.ndarray:
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=1)]

    def to_dict(self) -> dict:
        check_is_fitted(self, "class_priors_")
        return {
            "format": "churnseg.model",
            "version": 1,
            "model": "nb",
            "params": self.get_params(),
            "classes": [str(c) for c in self.classes_],
            "encoder": self.encoder_.to_dict(),
            "class_priors": self.class_priors_.tolist(),
            "nominal_tables": [t.tolist() for t in self.nominal_tables_],
            "nominal_unseen": [u.tolist() for u in self.nominal_unseen_],
            "numeric_means": self.numeric_means_.tolist(),
            "numeric_sigmas": self.numeric_sigmas_.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "NaiveBayesClassifier":
        if payload.get("model") != "nb":
            raise ValueError(f"not a naive-bayes model: {payload.get('model')!r}")
        est = cls(**payload["params"])
        est.classes_ = np.asarray(payload["classes"], dtype=object)
        est.encoder_ = FeatureEncoder.from_dict(payload["encoder"])
        est.feature_names_in_ = np.asarray(est.encoder_.columns, dtype=object)
        est.n_features_in_ = len(est.encoder_.columns)
        est.class_priors_ = np.asarray(payload["class_priors"], dtype=np.float64)
        est.nominal_tables_ = [
            np.asarray(t, dtype=np.float64) for t in payload["nominal_tables"]
        ]
        est.nominal_unseen_ = [
            np.asarray(u, dtype=np.float64) for u in payload["nominal_unseen"]
        ]
        est.numeric_means_ = np.asarray(payload["numeric_means"], dtype=np.float64)
        est.numeric_sigmas_ = np.asarray(payload["numeric_sigmas"], dtype=np.float64)
        return est
