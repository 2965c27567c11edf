"""Shared table utilities: input validation and mixed-type feature encoding.

The classifiers accept a pandas DataFrame with a mix of numeric and nominal
columns.  ``FeatureEncoder`` turns such a frame into two dense arrays (one
float matrix for numeric columns, one integer-code matrix for nominal
columns) so the training loops never touch pandas.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from pandas.api.types import is_bool_dtype, is_numeric_dtype

MISSING = -1
UNSEEN = -2


class DegenerateDataError(ValueError):
    """Raised when a learner is given data it cannot be fitted on."""


def check_feature_frame(X) -> pd.DataFrame:
    """Validate classifier input and return it as a DataFrame.

    Accepts a DataFrame or anything ``pd.DataFrame`` accepts (dict of
    columns, 2-D array).  Column names must be unique.
    """
    if not isinstance(X, pd.DataFrame):
        X = pd.DataFrame(X)
    if X.shape[1] == 0:
        raise ValueError("feature frame has no columns")
    if X.columns.duplicated().any():
        dupes = sorted(set(X.columns[X.columns.duplicated()].astype(str)))
        raise ValueError(f"duplicate feature columns: {dupes}")
    return X


def check_labels(y, n_rows: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError("labels must be one-dimensional")
    if len(y) != n_rows:
        raise ValueError(f"got {len(y)} labels for {n_rows} rows")
    if pd.isna(y).any():
        raise ValueError("labels contain missing values")
    return y


def column_kind(series: pd.Series) -> str:
    """Classify a column as ``numeric`` or ``nominal``.

    Boolean columns count as nominal (two-valued categories).
    """
    if is_numeric_dtype(series) and not is_bool_dtype(series):
        return "numeric"
    return "nominal"


@dataclass
class FeatureEncoder:
    """Maps a mixed-type DataFrame onto dense numeric/nominal arrays.

    Fitted state:
        columns: original column order.
        kinds: per-column "numeric" | "nominal".
        categories: per nominal column, the sorted training category list.

    ``transform`` returns ``(num, nom)`` where ``num`` is a float matrix
    (NaN marks missing) and ``nom`` an int matrix with ``MISSING`` for
    missing cells and ``UNSEEN`` for categories not seen during fit.
    """

    columns: tuple[str, ...] = ()
    kinds: tuple[str, ...] = ()
    categories: dict[str, tuple] = field(default_factory=dict)

    def fit(self, X: pd.DataFrame) -> "FeatureEncoder":
        self.columns = tuple(str(c) for c in X.columns)
        self.kinds = tuple(column_kind(X[c]) for c in X.columns)
        self.categories = {}
        for name, kind in zip(X.columns, self.kinds):
            if kind == "nominal":
                values = X[name][~pd.isna(X[name])]
                self.categories[str(name)] = tuple(sorted(set(values.astype(str))))
        return self

    def transform(self, X: pd.DataFrame) -> tuple[np.ndarray, np.ndarray]:
        if tuple(str(c) for c in X.columns) != self.columns:
            missing = [c for c in self.columns if c not in set(map(str, X.columns))]
            if missing:
                raise ValueError(f"missing feature columns: {missing}")
            X = X[list(self.columns)]
        num_cols = [c for c, k in zip(self.columns, self.kinds) if k == "numeric"]
        nom_cols = [c for c, k in zip(self.columns, self.kinds) if k == "nominal"]
        n = len(X)
        num = np.empty((n, len(num_cols)), dtype=np.float64)
        for j, name in enumerate(num_cols):
            num[:, j] = pd.to_numeric(X[name], errors="coerce").to_numpy(dtype=np.float64)
        nom = np.empty((n, len(nom_cols)), dtype=np.int64)
        for j, name in enumerate(nom_cols):
            lookup = {v: i for i, v in enumerate(self.categories[name])}
            col = X[name]
            isna = pd.isna(col).to_numpy()
            codes = np.fromiter(
                (lookup.get(v, UNSEEN) for v in col.astype(str)),
                dtype=np.int64,
                count=n,
            )
            codes[isna] = MISSING
            nom[:, j] = codes
        return num, nom

    @property
    def numeric_columns(self) -> tuple[str, ...]:
        return tuple(c for c, k in zip(self.columns, self.kinds) if k == "numeric")

    @property
    def nominal_columns(self) -> tuple[str, ...]:
        return tuple(c for c, k in zip(self.columns, self.kinds) if k == "nominal")

    def to_dict(self) -> dict:
        return {
            "columns": list(self.columns),
            "kinds": list(self.kinds),
            "categories": {k: list(v) for k, v in self.categories.items()},
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "FeatureEncoder":
        return cls(
            columns=tuple(payload["columns"]),
            kinds=tuple(payload["kinds"]),
            categories={k: tuple(v) for k, v in payload["categories"].items()},
        )
