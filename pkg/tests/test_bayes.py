import json

import numpy as np
import pandas as pd
import pytest
from scipy.stats import norm

from churnseg.bayes import NaiveBayesClassifier
from churnseg.tabular import DegenerateDataError


def four_row_binary():
    X = pd.DataFrame({"f": ["a", "a", "b", "b"]})
    y = np.array(["A", "A", "B", "B"])
    return X, y


def test_zero_rows_raise():
    with pytest.raises(DegenerateDataError):
        NaiveBayesClassifier().fit(pd.DataFrame({"f": []}), [])


def test_four_row_posterior_hand_computed():
    # Two classes, one perfectly correlated binary attribute, two rows each.
    # Add-one smoothing: prior = (2+1)/(4+2) = 1/2 per class; likelihood of
    # the matching value is (2+1)/(2+2) = 3/4, of the other (0+1)/(2+2) = 1/4,
    # so the posterior for the matching class is exactly 0.75 on every row.
    X, y = four_row_binary()
    model = NaiveBayesClassifier().fit(X, y)
    proba = model.predict_proba(X)
    for i, label in enumerate(y):
        j = list(model.classes_).index(label)
        assert proba[i, j] == pytest.approx(0.75, abs=1e-12)
    assert list(model.predict(X)) == list(y)


def test_priors_are_smoothed():
    X = pd.DataFrame({"f": ["a"] * 9 + ["b"]})
    y = ["A"] * 9 + ["B"]
    model = NaiveBayesClassifier().fit(X, y)
    a_index = list(model.classes_).index("A")
    assert model.class_priors_[a_index] == pytest.approx((9 + 1) / (10 + 2))
    assert model.class_priors_.sum() == pytest.approx(1.0, abs=1e-9)


def test_single_class_prior_is_one():
    X = pd.DataFrame({"f": ["a", "b", "a"]})
    model = NaiveBayesClassifier().fit(X, ["only"] * 3)
    assert model.class_priors_[0] == pytest.approx(1.0)


def test_nominal_tables_sum_to_one():
    rng = np.random.default_rng(0)
    X = pd.DataFrame(
        {
            "f": rng.choice(["a", "b", "c"], size=50),
            "g": rng.choice(["x", "y"], size=50),
        }
    )
    y = rng.choice(["u", "v"], size=50)
    model = NaiveBayesClassifier().fit(X, y)
    for table in model.nominal_tables_:
        assert np.allclose(table.sum(axis=1), 1.0, atol=1e-9)


def test_constant_numeric_attribute_gets_floored_sigma():
    X = pd.DataFrame({"n": [5.0, 5.0, 5.0, 7.0]})
    y = ["A", "A", "A", "B"]
    model = NaiveBayesClassifier().fit(X, y)
    assert (model.numeric_sigmas_ > 0).all()
    proba = model.predict_proba(X)
    assert np.isfinite(proba).all()


def test_all_attributes_missing_returns_priors():
    X, y = four_row_binary()
    model = NaiveBayesClassifier().fit(X, y)
    proba = model.predict_proba(pd.DataFrame({"f": [None]}))[0]
    assert proba == pytest.approx(model.class_priors_, abs=1e-12)


def test_unseen_nominal_value_uses_smoothed_mass():
    X, y = four_row_binary()
    model = NaiveBayesClassifier().fit(X, y)
    proba = model.predict_proba(pd.DataFrame({"f": ["z"]}))[0]
    # Unseen mass 1/(2+2) is equal for both classes here, so the posterior
    # falls back to the priors.
    assert proba == pytest.approx(model.class_priors_, abs=1e-12)
    assert proba.sum() == pytest.approx(1.0, abs=1e-9)


def test_posteriors_sum_to_one_generally():
    rng = np.random.default_rng(3)
    X = pd.DataFrame(
        {
            "n1": rng.normal(size=80),
            "n2": rng.exponential(size=80),
            "c": rng.choice(["a", "b", "c"], size=80),
        }
    )
    y = rng.choice(["u", "v", "w"], size=80)
    model = NaiveBayesClassifier().fit(X, y)
    proba = model.predict_proba(X)
    assert np.allclose(proba.sum(axis=1), 1.0, atol=1e-9)


def test_log_space_stable_with_50_extreme_attributes():
    rng = np.random.default_rng(7)
    n = 200
    scales = np.logspace(-8, 8, num=50)
    data = {}
    y = rng.choice(["A", "B"], size=n)
    shift = (y == "A").astype(float)
    for j, scale in enumerate(scales):
        data[f"n{j:02d}"] = (rng.normal(size=n) + shift) * scale
    X = pd.DataFrame(data)
    model = NaiveBayesClassifier().fit(X, y)
    proba = model.predict_proba(X)
    assert np.isfinite(proba).all()
    assert np.allclose(proba.sum(axis=1), 1.0, atol=1e-9)


def test_posterior_invariant_to_joint_likelihood_rescaling():
    # Adding a constant to every class's log joint likelihood (one global
    # positive rescale) must leave the normalised posterior unchanged.
    rng = np.random.default_rng(11)
    X = pd.DataFrame({"n": rng.normal(size=40), "c": rng.choice(["a", "b"], 40)})
    y = rng.choice(["u", "v"], size=40)
    model = NaiveBayesClassifier().fit(X, y)
    num, nom = model.encoder_.transform(X)
    jll = model._joint_log_likelihood(num, nom)

    def softmax(m):
        shifted = m - m.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(axis=1, keepdims=True)

    base = softmax(jll)
    rescaled = softmax(jll + 123.456)
    assert np.allclose(base, rescaled, atol=1e-12)
    assert np.allclose(model.predict_proba(X), base, atol=1e-9)


def test_duplicated_attribute_shifts_but_never_crashes():
    X, y = four_row_binary()
    model_single = NaiveBayesClassifier().fit(X, y)
    X2 = X.copy()
    X2["f_dup"] = X["f"]
    model_double = NaiveBayesClassifier().fit(X2, y)
    p1 = model_single.predict_proba(X)
    p2 = model_double.predict_proba(X2)
    assert np.isfinite(p2).all()
    # Doubling the evidence sharpens the posterior away from the single view.
    assert p2.max(axis=1).mean() > p1.max(axis=1).mean()


def test_recovers_generating_model_boundaries():
    rng = np.random.default_rng(42)
    n = 10000
    prior_a = 0.6
    y = np.where(rng.random(n) < prior_a, "A", "B")
    mu = {"A": 0.0, "B": 1.5}
    x_num = np.array([rng.normal(mu[c], 1.0) for c in y])
    p_cat = {"A": [0.7, 0.2, 0.1], "B": [0.2, 0.3, 0.5]}
    x_cat = np.array([rng.choice(["r", "s", "t"], p=p_cat[c]) for c in y])
    X = pd.DataFrame({"n": x_num, "c": x_cat})

    # Bayes-optimal prediction from the true generating model.
    def true_posterior_a(xn, xc):
        cat_idx = {"r": 0, "s": 1, "t": 2}[xc]
        la = np.log(prior_a) + norm.logpdf(xn, mu["A"], 1.0) + np.log(p_cat["A"][cat_idx])
        lb = np.log(1 - prior_a) + norm.logpdf(xn, mu["B"], 1.0) + np.log(p_cat["B"][cat_idx])
        return la > lb

    bayes_pred = np.where(
        [true_posterior_a(a, b) for a, b in zip(x_num, x_cat)], "A", "B"
    )
    bayes_rate = (bayes_pred == y).mean()

    model = NaiveBayesClassifier().fit(X, y)
    acc = (model.predict(X) == y).mean()
    assert acc >= bayes_rate - 0.02


def test_serialization_round_trip():
    rng = np.random.default_rng(21)
    X = pd.DataFrame(
        {
            "n": rng.normal(size=50),
            "c": rng.choice(["a", "b", "c"], size=50),
        }
    )
    X.loc[4, "n"] = np.nan
    X.loc[6, "c"] = None
    y = rng.choice(["u", "v"], size=50)
    model = NaiveBayesClassifier().fit(X, y)
    payload = json.loads(json.dumps(model.to_dict()))
    restored = NaiveBayesClassifier.from_dict(payload)
    assert np.array_equal(restored.predict(X), model.predict(X))
    assert np.array_equal(restored.predict_proba(X), model.predict_proba(X))
