"""Derived behavioural attributes computed from raw billing records.

All derivations are pure functions of the record plus an explicit reference
date (never the wall clock), so a pipeline run is reproducible.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import date, time
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import pandas as pd
from sklearn.base import BaseEstimator, TransformerMixin

from .ingest import MonthlyInvoice, NetworkStatus, PaymentStatus, RawCustomerRecord

AGE_GROUPS = ("0-14", "15-24", "25-44", "45-64", "65+")
AGE_UNKNOWN = "Unknown"

# Canonical alphabetical order; doubles as the match tie-break so that an
# address naming several counties always resolves the same way.
COUNTIES = (
    "Antrim", "Armagh", "Carlow", "Cavan", "Clare", "Cork", "Derry",
    "Donegal", "Down", "Dublin", "Fermanagh", "Galway", "Kerry", "Kildare",
    "Kilkenny", "Laois", "Leitrim", "Limerick", "Longford", "Louth", "Mayo",
    "Meath", "Monaghan", "Offaly", "Roscommon", "Sligo", "Tipperary",
    "Tyrone", "Waterford", "Westmeath", "Wexford", "Wicklow",
)
COUNTY_NA = "#N/A"

_COUNTY_PATTERNS = tuple(
    (name, re.compile(rf"\b{name}\b", re.IGNORECASE)) for name in COUNTIES
)

WEEKDAYS = ("Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday")

TIMES_OF_DAY = ("Night", "Morning", "Afternoon", "Evening")

PROFILE_COLUMNS = (
    "age_group",
    "county",
    "length_of_service_days",
    "sale_day",
    "sale_time_of_day",
    "total_invoice_excl_bf",
    "total_invoices",
    "avg_invoice",
    "paid_count",
    "declined_count",
    "unpaid_count",
)


class NegativeServiceError(ValueError):
    """Service length would be negative: the dates are out of order."""


def derive_age_group(age: Optional[int]) -> str:
    """Bin an age in years into the five standard bands.

    Missing or negative ages map to ``Unknown``.
    """
    if age is None or age < 0:
        return AGE_UNKNOWN
    if age <= 14:
        return "0-14"
    if age <= 24:
        return "15-24"
    if age <= 44:
        return "25-44"
    if age <= 64:
        return "45-64"
    return "65+"


def derive_county(bill_address: Optional[str]) -> str:
    """Extract a county from free-text address data.

    Case-insensitive whole-word search; the first hit in canonical
    (alphabetical) county order wins.  No hit, or no address, gives ``#N/A``.
    """
    if not bill_address:
        return COUNTY_NA
    for name, pattern in _COUNTY_PATTERNS:
        if pattern.search(bill_address):
            return name
    return COUNTY_NA


def derive_length_of_service(
    network_status: NetworkStatus,
    activation_date: date,
    inactive_date: Optional[date],
    reference_today: date,
) -> int:
    """Whole days the account has been (or was) in service.

    Inactive accounts with a recorded inactive date measure up to that date;
    everything else measures up to ``reference_today``.
    """
    if network_status is NetworkStatus.INACTIVE and inactive_date is not None:
        end = inactive_date
    else:
        end = reference_today
    days = (end - activation_date).days
    if days < 0:
        raise NegativeServiceError(
            f"activation {activation_date} is after service end {end}"
        )
    return days


def derive_sale_day(sale_date: date) -> str:
    return WEEKDAYS[sale_date.weekday()]


def derive_time_of_day(sale_time: time) -> str:
    """Bucket a time into Night/Morning/Afternoon/Evening by hour."""
    hour = sale_time.hour
    if hour < 6:
        return "Night"
    if hour < 12:
        return "Morning"
    if hour < 17:
        return "Afternoon"
    return "Evening"


@dataclass(frozen=True)
class InvoiceAggregates:
    """Billing-window totals; monetary values in integer cents.

    ``avg_cents`` is kept as an exact Fraction so that
    ``avg_cents * count == total_excl_bf_cents`` holds exactly.
    """

    total_excl_bf_cents: int
    count: int
    avg_cents: Fraction
    paid: int
    declined: int
    unpaid: int


def derive_invoice_aggregates(months: Sequence[MonthlyInvoice]) -> InvoiceAggregates:
    """Sum the window: revenue net of brought-forward, counts by status.

    Absent months are skipped entirely.  The average guards on the *total*
    being zero (an account whose invoices net to exactly zero averages zero);
    a zero count forces a zero total, so division by zero cannot occur.
    """
    total = 0
    count = 0
    paid = declined = unpaid = 0
    for month in months:
        if month.status is PaymentStatus.ABSENT:
            continue
        count += 1
        total += (month.amount_cents or 0) - (month.brought_forward_cents or 0)
        if month.status is PaymentStatus.PAID:
            paid += 1
        elif month.status is PaymentStatus.DECLINED:
            declined += 1
        elif month.status is PaymentStatus.UNPAID:
            unpaid += 1
    avg = Fraction(0) if total == 0 else Fraction(total, count)
    return InvoiceAggregates(total, count, avg, paid, declined, unpaid)


def round_half_up_cents(avg_cents: Fraction) -> int:
    """Round an exact cents value to whole cents, halves away from zero."""
    sign = -1 if avg_cents < 0 else 1
    return sign * int(abs(avg_cents) + Fraction(1, 2))


@dataclass(frozen=True)
class DerivedProfile:
    age_group: str
    county: str
    length_of_service_days: int
    sale_day: str
    sale_time_of_day: str
    total_invoice_excl_bf_cents: int
    total_invoices: int
    avg_invoice_cents: Fraction
    paid_count: int
    declined_count: int
    unpaid_count: int

    @property
    def avg_invoice_eur(self) -> float:
        return float(self.avg_invoice_cents) / 100.0

    @property
    def avg_invoice_cents_rounded(self) -> int:
        return round_half_up_cents(self.avg_invoice_cents)


def derive_profile(record: RawCustomerRecord, reference_today: date) -> DerivedProfile:
    """Compute every derived attribute for one record."""
    agg = derive_invoice_aggregates(record.monthly_invoices)
    return DerivedProfile(
        age_group=derive_age_group(record.age),
        county=derive_county(record.bill_address_county),
        length_of_service_days=derive_length_of_service(
            record.network_status,
            record.activation_date,
            record.inactive_date,
            reference_today,
        ),
        sale_day=derive_sale_day(record.sale_date),
        sale_time_of_day=derive_time_of_day(record.sale_time),
        total_invoice_excl_bf_cents=agg.total_excl_bf_cents,
        total_invoices=agg.count,
        avg_invoice_cents=agg.avg_cents,
        paid_count=agg.paid,
        declined_count=agg.declined,
        unpaid_count=agg.unpaid,
    )


def profile_row(profile: DerivedProfile) -> dict:
    """Profile as plain column values (money in euros) for tabular output."""
    return {
        "age_group": profile.age_group,
        "county": profile.county,
        "length_of_service_days": profile.length_of_service_days,
        "sale_day": profile.sale_day,
        "sale_time_of_day": profile.sale_time_of_day,
        "total_invoice_excl_bf": profile.total_invoice_excl_bf_cents / 100.0,
        "total_invoices": profile.total_invoices,
        "avg_invoice": float(profile.avg_invoice_cents) / 100.0,
        "paid_count": profile.paid_count,
        "declined_count": profile.declined_count,
        "unpaid_count": profile.unpaid_count,
    }


def derive_frame(
    records: Iterable[RawCustomerRecord], reference_today: date
) -> pd.DataFrame:
    """Profiles for many records as a DataFrame (account_id + profile columns)."""
    rows = []
    for record in records:
        row = {"account_id": record.account_id}
        row.update(profile_row(derive_profile(record, reference_today)))
        rows.append(row)
    return pd.DataFrame(rows, columns=("account_id",) + PROFILE_COLUMNS)


class ProfileDeriver(BaseEstimator, TransformerMixin):
    """Transformer wrapper around :func:`derive_frame`.

    Stateless apart from its parameters; ``fit`` is a no-op, ``transform``
    maps a sequence of records to the derived-attribute frame.
    """

    def __init__(self, reference_date: date = date(2016, 11, 30)):
        self.reference_date = reference_date

    def fit(self, X, y=None):
        return self

    def transform(self, X) -> pd.DataFrame:
        return derive_frame(X, self.reference_date)
