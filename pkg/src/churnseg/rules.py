"""Spender-status banding and the four-way account classification rules."""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from fractions import Fraction
from typing import Iterable, Optional, Union

import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin

from .features import DerivedProfile, round_half_up_cents


class SpenderStatus(str, Enum):
    LOW = "Low"
    AVERAGE = "Average"
    ABOVE_AVERAGE = "AboveAverage"
    HIGH = "High"
    VERY_HIGH = "VeryHigh"
    INVESTIGATE = "Investigate"


# Total order over the five spend bands (Investigate is a data-quality flag,
# not a spend level).
SPEND_ORDER = (
    SpenderStatus.LOW,
    SpenderStatus.AVERAGE,
    SpenderStatus.ABOVE_AVERAGE,
    SpenderStatus.HIGH,
    SpenderStatus.VERY_HIGH,
)


class AccountClass(str, Enum):
    STANDARD = "Standard"
    PREMIUM = "Premium"
    VIP = "VIP"
    UNPAID_INVOICE = "Unpaid Invoice"


# Report/display order for the four account classes.
ACCOUNT_CLASS_ORDER = (
    AccountClass.STANDARD,
    AccountClass.UNPAID_INVOICE,
    AccountClass.PREMIUM,
    AccountClass.VIP,
)

# Band edges in integer cents; intervals are half-open, closed on the left:
# [0,15), [15,29), [29,50), [50,70), [70, inf) euros.  Exactly 70 euro is
# VeryHigh so that every interval follows the same half-open convention.
LOW_MAX_CENTS = 1500
AVERAGE_MAX_CENTS = 2900
ABOVE_AVERAGE_MAX_CENTS = 5000
HIGH_MAX_CENTS = 7000


class InvestigateNotClassifiable(ValueError):
    """Investigate-flagged profiles carry no account class."""


def spender_status_from_cents(avg_cents: int) -> SpenderStatus:
    """Band an average invoice amount given in whole cents."""
    if avg_cents < 0:
        return SpenderStatus.INVESTIGATE
    if avg_cents < LOW_MAX_CENTS:
        return SpenderStatus.LOW
    if avg_cents < AVERAGE_MAX_CENTS:
        return SpenderStatus.AVERAGE
    if avg_cents < ABOVE_AVERAGE_MAX_CENTS:
        return SpenderStatus.ABOVE_AVERAGE
    if avg_cents < HIGH_MAX_CENTS:
        return SpenderStatus.HIGH
    return SpenderStatus.VERY_HIGH


def spender_status(avg_invoice_eur: Union[int, float, Fraction, Decimal]) -> SpenderStatus:
    """Band an average invoice amount in euros.

    The amount is first rounded to whole cents (halves away from zero) so
    that band comparison always happens at a fixed monetary grain.
    """
    if isinstance(avg_invoice_eur, Fraction):
        cents = round_half_up_cents(avg_invoice_eur * 100)
    else:
        quantized = (Decimal(str(avg_invoice_eur)) * 100).quantize(
            Decimal("1"), rounding=ROUND_HALF_UP
        )
        cents = int(quantized)
    return spender_status_from_cents(cents)


def account_class_from_counts(
    paid_count: int, total_invoices: int, status: SpenderStatus
) -> AccountClass:
    """Classify an account from its payment counts and spend band.

    The unpaid check dominates: fewer than ``total - 1`` paid invoices makes
    the account Unpaid Invoice regardless of spend.  Otherwise Low/Average
    map to Standard, AboveAverage/High to Premium, VeryHigh to VIP.
    """
    if status is SpenderStatus.INVESTIGATE:
        raise InvestigateNotClassifiable(
            "Investigate profiles are excluded from account classification"
        )
    if paid_count < total_invoices - 1:
        return AccountClass.UNPAID_INVOICE
    if status in (SpenderStatus.LOW, SpenderStatus.AVERAGE):
        return AccountClass.STANDARD
    if status in (SpenderStatus.ABOVE_AVERAGE, SpenderStatus.HIGH):
        return AccountClass.PREMIUM
    return AccountClass.VIP


def classify_account(profile: DerivedProfile, status: SpenderStatus) -> AccountClass:
    return account_class_from_counts(profile.paid_count, profile.total_invoices, status)


@dataclass(frozen=True)
class SegmentResult:
    spender_status: SpenderStatus
    account_class: Optional[AccountClass]

    @property
    def investigate(self) -> bool:
        return self.account_class is None


def segment_profile(profile: DerivedProfile) -> SegmentResult:
    status = spender_status_from_cents(profile.avg_invoice_cents_rounded)
    if status is SpenderStatus.INVESTIGATE:
        return SegmentResult(status, None)
    return SegmentResult(status, classify_account(profile, status))


def segment_dataset(
    profiles: Iterable[DerivedProfile],
) -> tuple[list[SegmentResult], dict[str, int]]:
    """Segment every profile; also return the class-distribution summary.

    Investigate profiles are flagged (no account class) and counted under
    their own summary key.
    """
    results = [segment_profile(p) for p in profiles]
    summary = {cls.value: 0 for cls in ACCOUNT_CLASS_ORDER}
    summary[SpenderStatus.INVESTIGATE.value] = 0
    for result in results:
        if result.account_class is None:
            summary[SpenderStatus.INVESTIGATE.value] += 1
        else:
            summary[result.account_class.value] += 1
    return results, summary


SEGMENT_INPUT_COLUMNS = ("avg_invoice", "paid_count", "total_invoices")


def segment_frame(frame: pd.DataFrame) -> tuple[pd.DataFrame, dict[str, int]]:
    """Append spender_status / account_class columns to a derived frame.

    Needs the ``avg_invoice`` (euros), ``paid_count`` and ``total_invoices``
    columns.  Investigate rows get an empty account_class.
    """
    missing = [c for c in SEGMENT_INPUT_COLUMNS if c not in frame.columns]
    if missing:
        raise KeyError(f"derived frame lacks columns: {missing}")
    statuses = []
    classes = []
    summary = {cls.value: 0 for cls in ACCOUNT_CLASS_ORDER}
    summary[SpenderStatus.INVESTIGATE.value] = 0
    for avg, paid, total in zip(
        frame["avg_invoice"], frame["paid_count"], frame["total_invoices"]
    ):
        status = spender_status(avg)
        statuses.append(status.value)
        if status is SpenderStatus.INVESTIGATE:
            classes.append("")
            summary[SpenderStatus.INVESTIGATE.value] += 1
        else:
            cls = account_class_from_counts(int(paid), int(total), status)
            classes.append(cls.value)
            summary[cls.value] += 1
    out = frame.copy()
    out["spender_status"] = statuses
    out["account_class"] = classes
    return out, summary


class RuleSegmenter(BaseEstimator, TransformerMixin):
    """Transformer wrapper around :func:`segment_frame` (stateless)."""

    def fit(self, X, y=None):
        return self

    def transform(self, X: pd.DataFrame) -> pd.DataFrame:
        out, _ = segment_frame(X)
        return out
