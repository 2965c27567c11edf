"""Parsing and validation of raw billing CSV exports into typed records.

CSV layout: one header row; fixed demographic/date columns followed by the
monthly column groups ``inv_01..inv_NN``, ``bf_01..bf_NN`` and
``pay_01..pay_NN`` (NN = observation window length, at most 16 months).
Dates use DD/MM/YYYY with four-digit years; times use HH:MM:SS; amounts are
euros with at most two decimals and are stored internally as integer cents.
Payment cells hold PAID, DECLINED, UNPAID, or are empty for months that
predate the account.
"""

from __future__ import annotations

import calendar
import csv
import io
import json
import re
from dataclasses import asdict, dataclass
from datetime import date, time
from decimal import Decimal, InvalidOperation
from enum import Enum
from typing import IO, Iterable, Optional, Sequence

MAX_WINDOW_MONTHS = 16

COLUMN_KINDS = ("numeric", "nominal", "date", "time", "text")

FIXED_COLUMNS = (
    ("account_id", "text"),
    ("age", "numeric"),
    ("gender", "nominal"),
    ("bill_address_county", "text"),
    ("network_status", "nominal"),
    ("activation_date", "date"),
    ("inactive_date", "date"),
    ("sale_date", "date"),
    ("sale_time", "time"),
)

_DATE_RE = re.compile(r"^\d{2}/\d{2}/\d{4}$")
_TIME_RE = re.compile(r"^\d{2}:\d{2}:\d{2}$")


class SchemaError(ValueError):
    """Fatal mismatch between a CSV header and the expected schema."""


class Gender(str, Enum):
    MALE = "Male"
    FEMALE = "Female"
    UNKNOWN = "Unknown"


class NetworkStatus(str, Enum):
    ACTIVE = "Active"
    INACTIVE = "Inactive"


class PaymentStatus(str, Enum):
    PAID = "Paid"
    DECLINED = "Declined"
    UNPAID = "Unpaid"
    ABSENT = "Absent"


_PAY_TOKENS = {
    "PAID": PaymentStatus.PAID,
    "DECLINED": PaymentStatus.DECLINED,
    "UNPAID": PaymentStatus.UNPAID,
    "": PaymentStatus.ABSENT,
}


@dataclass(frozen=True)
class MonthlyInvoice:
    """One month of the billing window; amounts in integer cents.

    ``status == ABSENT`` marks a month that predates the account; both
    amounts must then be None.
    """

    amount_cents: Optional[int]
    brought_forward_cents: Optional[int]
    status: PaymentStatus


@dataclass(frozen=True)
class RawCustomerRecord:
    account_id: str
    age: Optional[int]
    gender: Gender
    bill_address_county: Optional[str]
    network_status: NetworkStatus
    activation_date: date
    inactive_date: Optional[date]
    sale_date: date
    sale_time: time
    monthly_invoices: tuple[MonthlyInvoice, ...]


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str


DATE_ORDER = "DateOrderViolation"
WINDOW_OVERFLOW = "WindowOverflowViolation"
ACTIVATION_AFTER_SALE = "ActivationAfterSaleViolation"
ABSENT_AMOUNT = "AbsentAmountViolation"
ABSENT_PREFIX = "AbsentPrefixViolation"


def _month_end(d: date) -> date:
    return date(d.year, d.month, calendar.monthrange(d.year, d.month)[1])


def validate(record: RawCustomerRecord) -> list[Violation]:
    """Return one Violation per breached record invariant (empty = clean)."""
    out: list[Violation] = []
    if record.inactive_date is not None and record.inactive_date < record.activation_date:
        out.append(
            Violation(
                DATE_ORDER,
                f"inactive date {record.inactive_date} precedes activation "
                f"{record.activation_date}",
            )
        )
    if len(record.monthly_invoices) > MAX_WINDOW_MONTHS:
        out.append(
            Violation(
                WINDOW_OVERFLOW,
                f"{len(record.monthly_invoices)} monthly entries exceed the "
                f"{MAX_WINDOW_MONTHS}-month window",
            )
        )
    if record.activation_date > _month_end(record.sale_date):
        out.append(
            Violation(
                ACTIVATION_AFTER_SALE,
                f"activation {record.activation_date} falls after the end of the "
                f"sale month ({record.sale_date})",
            )
        )
    seen_real_month = False
    for i, month in enumerate(record.monthly_invoices):
        absent = month.status is PaymentStatus.ABSENT
        has_amounts = month.amount_cents is not None or month.brought_forward_cents is not None
        if absent and has_amounts:
            out.append(Violation(ABSENT_AMOUNT, f"month {i + 1} is absent but carries amounts"))
        if not absent and (month.amount_cents is None or month.brought_forward_cents is None):
            out.append(Violation(ABSENT_AMOUNT, f"month {i + 1} has a status but no amounts"))
        if absent and seen_real_month:
            out.append(
                Violation(ABSENT_PREFIX, f"absent month {i + 1} follows an invoiced month")
            )
        if not absent:
            seen_real_month = True
    return out


@dataclass(frozen=True)
class DatasetSchema:
    """Ordered column set with per-column kinds and an optional class column."""

    column_names: tuple[str, ...]
    column_kinds: tuple[str, ...]
    class_column: Optional[str] = None

    def __post_init__(self):
        if len(self.column_names) != len(self.column_kinds):
            raise SchemaError("column_names and column_kinds differ in length")
        if len(set(self.column_names)) != len(self.column_names):
            raise SchemaError("schema column names are not unique")
        bad = [k for k in self.column_kinds if k not in COLUMN_KINDS]
        if bad:
            raise SchemaError(f"unknown column kinds: {sorted(set(bad))}")
        if self.class_column is not None:
            if self.class_column not in self.column_names:
                raise SchemaError(f"class column {self.class_column!r} not in schema")
            kind = self.column_kinds[self.column_names.index(self.class_column)]
            if kind != "nominal":
                raise SchemaError(f"class column {self.class_column!r} must be nominal")

    def kind_of(self, name: str) -> str:
        return self.column_kinds[self.column_names.index(name)]


def raw_billing_schema(months: int = MAX_WINDOW_MONTHS) -> DatasetSchema:
    """The canonical raw-export schema for a billing window of ``months``."""
    if not 1 <= months <= MAX_WINDOW_MONTHS:
        raise SchemaError(f"window must be 1..{MAX_WINDOW_MONTHS} months, got {months}")
    names = [n for n, _ in FIXED_COLUMNS]
    kinds = [k for _, k in FIXED_COLUMNS]
    for prefix, kind in (("inv", "numeric"), ("bf", "numeric"), ("pay", "nominal")):
        for m in range(1, months + 1):
            names.append(f"{prefix}_{m:02d}")
            kinds.append(kind)
    return DatasetSchema(tuple(names), tuple(kinds))


def window_months(schema: DatasetSchema) -> int:
    """Infer the billing window length from a raw-export schema."""
    months = sum(1 for n in schema.column_names if n.startswith("inv_"))
    if schema.column_names != raw_billing_schema(months).column_names:
        raise SchemaError("schema does not match the raw billing export layout")
    return months


@dataclass(frozen=True)
class RowError:
    """A non-fatal, machine-readable parse failure for one data row."""

    row_number: int
    kind: str
    message: str


FIELD_COUNT = "FieldCountMismatch"
NON_NUMERIC_AGE = "NonNumericAge"
BAD_GENDER = "BadGender"
BAD_NETWORK_STATUS = "BadNetworkStatus"
BAD_DATE = "BadDate"
BAD_TIME = "BadTime"
BAD_AMOUNT = "BadAmount"
BAD_PAYMENT_STATUS = "BadPaymentStatus"
INVALID_RECORD = "InvalidRecord"


class _RowFailure(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


def _parse_date(text: str, column: str) -> date:
    if not _DATE_RE.match(text):
        raise _RowFailure(BAD_DATE, f"{column}: expected DD/MM/YYYY, got {text!r}")
    day, month, year = (int(p) for p in text.split("/"))
    try:
        return date(year, month, day)
    except ValueError as exc:
        raise _RowFailure(BAD_DATE, f"{column}: {exc}") from None


def _parse_time(text: str, column: str) -> time:
    if not _TIME_RE.match(text):
        raise _RowFailure(BAD_TIME, f"{column}: expected HH:MM:SS, got {text!r}")
    hh, mm, ss = (int(p) for p in text.split(":"))
    try:
        return time(hh, mm, ss)
    except ValueError as exc:
        raise _RowFailure(BAD_TIME, f"{column}: {exc}") from None


def _parse_cents(text: str, column: str) -> int:
    try:
        value = Decimal(text)
    except InvalidOperation:
        raise _RowFailure(BAD_AMOUNT, f"{column}: not an amount: {text!r}") from None
    cents = value.scaleb(2)
    if cents != cents.to_integral_value():
        raise _RowFailure(BAD_AMOUNT, f"{column}: more than two decimal places: {text!r}")
    return int(cents)


def _parse_row(row: Sequence[str], months: int) -> RawCustomerRecord:
    fields = dict(zip((n for n, _ in FIXED_COLUMNS), row))

    age_text = fields["age"].strip()
    if age_text == "":
        age = None
    else:
        try:
            age = int(age_text)
        except ValueError:
            raise _RowFailure(NON_NUMERIC_AGE, f"age is not a number: {age_text!r}") from None

    gender_text = fields["gender"].strip()
    if gender_text == "":
        gender = Gender.UNKNOWN
    else:
        try:
            gender = Gender(gender_text)
        except ValueError:
            raise _RowFailure(BAD_GENDER, f"unknown gender value: {gender_text!r}") from None

    status_text = fields["network_status"].strip()
    try:
        network_status = NetworkStatus(status_text)
    except ValueError:
        raise _RowFailure(
            BAD_NETWORK_STATUS, f"unknown network status: {status_text!r}"
        ) from None

    activation = _parse_date(fields["activation_date"], "activation_date")
    inactive_text = fields["inactive_date"].strip()
    inactive = None if inactive_text == "" else _parse_date(inactive_text, "inactive_date")
    sale_date = _parse_date(fields["sale_date"], "sale_date")
    sale_time = _parse_time(fields["sale_time"], "sale_time")

    county_text = fields["bill_address_county"].strip()
    county = county_text if county_text else None

    base = len(FIXED_COLUMNS)
    invoices = []
    for m in range(months):
        inv_text = row[base + m].strip()
        bf_text = row[base + months + m].strip()
        pay_text = row[base + 2 * months + m].strip()
        if pay_text not in _PAY_TOKENS:
            raise _RowFailure(
                BAD_PAYMENT_STATUS, f"pay_{m + 1:02d}: unknown token {pay_text!r}"
            )
        status = _PAY_TOKENS[pay_text]
        amount = None if inv_text == "" else _parse_cents(inv_text, f"inv_{m + 1:02d}")
        bf = None if bf_text == "" else _parse_cents(bf_text, f"bf_{m + 1:02d}")
        invoices.append(MonthlyInvoice(amount, bf, status))

    return RawCustomerRecord(
        account_id=fields["account_id"],
        age=age,
        gender=gender,
        bill_address_county=county,
        network_status=network_status,
        activation_date=activation,
        inactive_date=inactive,
        sale_date=sale_date,
        sale_time=sale_time,
        monthly_invoices=tuple(invoices),
    )


def parse_csv(
    source: IO, schema: DatasetSchema
) -> tuple[list[RawCustomerRecord], list[RowError]]:
    """Parse a raw billing CSV into typed records plus per-row errors.

    Every data row becomes either a record or a RowError (1-based row
    numbers, counted over data rows), in input order.  Records returned are
    guaranteed to pass :func:`validate`; rows that parse but breach a record
    invariant are downgraded to RowErrors.  A header not matching the schema
    raises :class:`SchemaError`.
    """
    months = window_months(schema)
    if isinstance(source, (io.RawIOBase, io.BufferedIOBase)) or (
        hasattr(source, "read") and isinstance(getattr(source, "mode", ""), str) and "b" in getattr(source, "mode", "")
    ):
        source = io.TextIOWrapper(source, encoding="utf-8", newline="")
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("input is empty; expected a header row") from None
    if tuple(header) != schema.column_names:
        raise SchemaError(
            f"header does not match schema (got {len(header)} columns, "
            f"expected {len(schema.column_names)})"
        )

    records: list[RawCustomerRecord] = []
    errors: list[RowError] = []
    for row_number, row in enumerate(reader, start=1):
        if len(row) != len(schema.column_names):
            errors.append(
                RowError(
                    row_number,
                    FIELD_COUNT,
                    f"expected {len(schema.column_names)} fields, got {len(row)}",
                )
            )
            continue
        try:
            record = _parse_row(row, months)
        except _RowFailure as failure:
            errors.append(RowError(row_number, failure.kind, str(failure)))
            continue
        violations = validate(record)
        if violations:
            summary = "; ".join(f"{v.kind}: {v.message}" for v in violations)
            errors.append(RowError(row_number, INVALID_RECORD, summary))
            continue
        records.append(record)
    return records, errors


def _format_cents(cents: Optional[int]) -> str:
    if cents is None:
        return ""
    sign = "-" if cents < 0 else ""
    cents = abs(cents)
    return f"{sign}{cents // 100}.{cents % 100:02d}"


_PAY_OUT = {
    PaymentStatus.PAID: "PAID",
    PaymentStatus.DECLINED: "DECLINED",
    PaymentStatus.UNPAID: "UNPAID",
    PaymentStatus.ABSENT: "",
}


def record_to_row(record: RawCustomerRecord, months: int) -> list[str]:
    if len(record.monthly_invoices) != months:
        raise ValueError(
            f"record has {len(record.monthly_invoices)} months, writer expects {months}"
        )
    row = [
        record.account_id,
        "" if record.age is None else str(record.age),
        record.gender.value,
        record.bill_address_county or "",
        record.network_status.value,
        record.activation_date.strftime("%d/%m/%Y"),
        "" if record.inactive_date is None else record.inactive_date.strftime("%d/%m/%Y"),
        record.sale_date.strftime("%d/%m/%Y"),
        record.sale_time.strftime("%H:%M:%S"),
    ]
    row.extend(_format_cents(m.amount_cents) for m in record.monthly_invoices)
    row.extend(_format_cents(m.brought_forward_cents) for m in record.monthly_invoices)
    row.extend(_PAY_OUT[m.status] for m in record.monthly_invoices)
    return row


def write_csv(records: Iterable[RawCustomerRecord], sink: IO, months: int) -> None:
    """Write records in the canonical raw-export layout (LF line endings)."""
    schema = raw_billing_schema(months)
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(schema.column_names)
    for record in records:
        writer.writerow(record_to_row(record, months))


def errors_to_json(errors: Sequence[RowError]) -> str:
    return json.dumps([asdict(e) for e in errors], indent=2) + "\n"
