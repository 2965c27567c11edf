from fractions import Fraction

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from churnseg.features import DerivedProfile
from churnseg.rules import (
    ACCOUNT_CLASS_ORDER,
    AccountClass,
    InvestigateNotClassifiable,
    RuleSegmenter,
    SpenderStatus,
    account_class_from_counts,
    classify_account,
    segment_dataset,
    segment_frame,
    spender_status,
    spender_status_from_cents,
)

import oracles


def make_profile(avg_cents, paid, total) -> DerivedProfile:
    declined = total - paid if total > paid else 0
    return DerivedProfile(
        age_group="25-44",
        county="Dublin",
        length_of_service_days=100,
        sale_day="Tuesday",
        sale_time_of_day="Morning",
        total_invoice_excl_bf_cents=avg_cents * total,
        total_invoices=total,
        avg_invoice_cents=Fraction(avg_cents),
        paid_count=paid,
        declined_count=declined,
        unpaid_count=0,
    )


# -- spender bands -------------------------------------------------------------


@pytest.mark.parametrize(
    "eur,expected",
    [
        (10, SpenderStatus.LOW),
        (0, SpenderStatus.LOW),
        (14.99, SpenderStatus.LOW),
        (15, SpenderStatus.AVERAGE),
        (20, SpenderStatus.AVERAGE),
        (28.99, SpenderStatus.AVERAGE),
        (29, SpenderStatus.ABOVE_AVERAGE),
        (40, SpenderStatus.ABOVE_AVERAGE),
        (49.99, SpenderStatus.ABOVE_AVERAGE),
        (50, SpenderStatus.HIGH),
        (60, SpenderStatus.HIGH),
        (69.99, SpenderStatus.HIGH),
        (70, SpenderStatus.VERY_HIGH),
        (80, SpenderStatus.VERY_HIGH),
        (1000, SpenderStatus.VERY_HIGH),
        (-5, SpenderStatus.INVESTIGATE),
        (-0.01, SpenderStatus.INVESTIGATE),
    ],
)
def test_spender_bands(eur, expected):
    assert spender_status(eur) is expected


def test_spender_rounds_to_cents_before_comparison():
    # 28.999 EUR rounds to 2900 cents, landing in the AboveAverage band.
    assert spender_status(28.999) is SpenderStatus.ABOVE_AVERAGE
    assert spender_status(28.994) is SpenderStatus.AVERAGE


def test_spender_accepts_exact_fractions():
    assert spender_status(Fraction(7000, 3) / 100) is SpenderStatus.AVERAGE


# -- account classification -----------------------------------------------------


def test_standard_when_paid_up_and_average():
    profile = make_profile(2000, paid=5, total=6)
    assert classify_account(profile, SpenderStatus.AVERAGE) is AccountClass.STANDARD


def test_unpaid_dominates_high_spend():
    profile = make_profile(9000, paid=3, total=6)
    assert classify_account(profile, SpenderStatus.VERY_HIGH) is AccountClass.UNPAID_INVOICE


def test_zero_invoices_is_paid_up():
    profile = make_profile(0, paid=0, total=0)
    assert classify_account(profile, SpenderStatus.LOW) is AccountClass.STANDARD


def test_investigate_cannot_be_classified():
    profile = make_profile(-100, paid=1, total=1)
    with pytest.raises(InvestigateNotClassifiable):
        classify_account(profile, SpenderStatus.INVESTIGATE)


@given(
    avg=st.integers(min_value=0, max_value=20000),
    total=st.integers(min_value=0, max_value=16),
    data=st.data(),
)
@settings(max_examples=300, deadline=None)
def test_exhaustive_classification(avg, total, data):
    paid = data.draw(st.integers(min_value=0, max_value=total))
    status = spender_status_from_cents(avg)
    cls = account_class_from_counts(paid, total, status)
    assert cls in set(AccountClass)


@given(
    avg=st.integers(min_value=-10000, max_value=50000),
    total=st.integers(min_value=2, max_value=16),
)
@settings(max_examples=300, deadline=None)
def test_unpaid_dominance_ignores_spend(avg, total):
    status = spender_status_from_cents(abs(avg))
    cls = account_class_from_counts(0, total, status)
    assert cls is AccountClass.UNPAID_INVOICE


@given(
    low=st.integers(min_value=0, max_value=30000),
    bump=st.integers(min_value=0, max_value=30000),
)
@settings(max_examples=300, deadline=None)
def test_spend_monotonicity_when_paid_up(low, bump):
    order = {AccountClass.STANDARD: 0, AccountClass.PREMIUM: 1, AccountClass.VIP: 2}
    a = account_class_from_counts(6, 6, spender_status_from_cents(low))
    b = account_class_from_counts(6, 6, spender_status_from_cents(low + bump))
    assert order[a] <= order[b]


def test_dense_grid_maps_to_exactly_one_class():
    for avg in range(0, 10000, 37):
        for total in range(0, 9):
            for paid in range(0, total + 1):
                status = spender_status_from_cents(avg)
                cls = account_class_from_counts(paid, total, status)
                assert isinstance(cls, AccountClass)


def test_agreement_with_prose_oracle():
    rng = np.random.default_rng(1234)
    for _ in range(20000):
        avg_cents = int(rng.integers(-5000, 20001))
        total = int(rng.integers(0, 17))
        paid = int(rng.integers(0, total + 1))
        status = spender_status_from_cents(avg_cents)
        assert status.value == oracles.spender_band(avg_cents / 100.0)
        if status is not SpenderStatus.INVESTIGATE:
            cls = account_class_from_counts(paid, total, status)
            assert cls.value == oracles.account_category(paid, total, status.value)


# -- dataset segmentation ----------------------------------------------------------


def test_segment_empty_sequence():
    results, summary = segment_dataset([])
    assert results == []
    assert sum(summary.values()) == 0


def test_segment_all_vip():
    profiles = [make_profile(10000, paid=4, total=4) for _ in range(5)]
    results, summary = segment_dataset(profiles)
    assert all(r.account_class is AccountClass.VIP for r in results)
    assert summary["VIP"] == 5


def test_segment_flags_investigate_without_class():
    results, summary = segment_dataset([make_profile(-200, paid=1, total=1)])
    assert results[0].investigate
    assert results[0].account_class is None
    assert summary["Investigate"] == 1


def test_segment_frame_appends_columns():
    frame = pd.DataFrame(
        {
            "avg_invoice": [10.0, 80.0, -2.0],
            "paid_count": [3, 4, 1],
            "total_invoices": [3, 4, 1],
        }
    )
    out, summary = segment_frame(frame)
    assert list(out["spender_status"]) == ["Low", "VeryHigh", "Investigate"]
    assert list(out["account_class"]) == ["Standard", "VIP", ""]
    assert summary == {
        "Standard": 1,
        "Unpaid Invoice": 0,
        "Premium": 0,
        "VIP": 1,
        "Investigate": 1,
    }


def test_segment_frame_requires_columns():
    with pytest.raises(KeyError):
        segment_frame(pd.DataFrame({"avg_invoice": [1.0]}))


def test_rule_segmenter_transformer():
    frame = pd.DataFrame(
        {"avg_invoice": [20.0], "paid_count": [2], "total_invoices": [2]}
    )
    out = RuleSegmenter().fit_transform(frame)
    assert out.loc[0, "account_class"] == "Standard"


def test_account_class_report_order():
    assert [c.value for c in ACCOUNT_CLASS_ORDER] == [
        "Standard",
        "Unpaid Invoice",
        "Premium",
        "VIP",
    ]
