"""Seeded synthetic billing datasets with known segmentation ground truth.

The generator builds each account backwards from an intended account class:
it picks a spend tier, places the realised average invoice strictly inside
that tier's euro band (at whole-cent resolution, so later rounding cannot
cross a band edge), and fixes the paid-invoice count to satisfy or violate
the paid-up condition.  The euro bands and the paid-up condition are
restated here from the business prose on purpose: this module must stay
independent of the production rules engine so their agreement is a genuine
two-implementation check.
"""

from __future__ import annotations

import calendar
import json
from dataclasses import dataclass, field
from datetime import date, time, timedelta
from typing import IO, Optional

import numpy as np

from .ingest import (
    Gender,
    MonthlyInvoice,
    NetworkStatus,
    PaymentStatus,
    RawCustomerRecord,
    MAX_WINDOW_MONTHS,
)

CLASS_STANDARD = "Standard"
CLASS_PREMIUM = "Premium"
CLASS_VIP = "VIP"
CLASS_UNPAID = "Unpaid Invoice"
ACCOUNT_CLASSES = (CLASS_STANDARD, CLASS_UNPAID, CLASS_PREMIUM, CLASS_VIP)

TIER_LOW = "Low"
TIER_AVERAGE = "Average"
TIER_ABOVE_AVERAGE = "AboveAverage"
TIER_HIGH = "High"
TIER_VERY_HIGH = "VeryHigh"
SPEND_TIERS = (TIER_LOW, TIER_AVERAGE, TIER_ABOVE_AVERAGE, TIER_HIGH, TIER_VERY_HIGH)

# Euro bands per spend tier, half-open [lo, hi) in cents; None = unbounded.
_TIER_BANDS_CENTS: dict[str, tuple[int, Optional[int]]] = {
    TIER_LOW: (0, 1500),
    TIER_AVERAGE: (1500, 2900),
    TIER_ABOVE_AVERAGE: (2900, 5000),
    TIER_HIGH: (5000, 7000),
    TIER_VERY_HIGH: (7000, None),
}

_TIERS_FOR_CLASS = {
    CLASS_STANDARD: (TIER_LOW, TIER_AVERAGE),
    CLASS_PREMIUM: (TIER_ABOVE_AVERAGE, TIER_HIGH),
    CLASS_VIP: (TIER_VERY_HIGH,),
    CLASS_UNPAID: SPEND_TIERS,
}

_STREETS = (
    "Main Street",
    "Harbour Road",
    "Chapel Lane",
    "Mill Road",
    "Bridge Street",
    "Castle Avenue",
    "Station Road",
    "The Green",
)

_COUNTY_NA = "#N/A"


class InfeasibleConfigError(ValueError):
    """The generator configuration cannot produce its own guarantees."""


def _default_class_mix() -> dict[str, float]:
    return {
        CLASS_STANDARD: 0.537,
        CLASS_UNPAID: 0.211,
        CLASS_PREMIUM: 0.242,
        CLASS_VIP: 0.010,
    }


def _default_spend_params() -> dict[str, tuple[float, float]]:
    # (mean, spread) in euros per tier; means sit strictly inside the bands.
    return {
        TIER_LOW: (8.0, 3.0),
        TIER_AVERAGE: (22.0, 4.0),
        TIER_ABOVE_AVERAGE: (39.0, 6.0),
        TIER_HIGH: (60.0, 5.0),
        TIER_VERY_HIGH: (85.0, 10.0),
    }


def _default_county_weights() -> dict[str, float]:
    # Dublin-heavy marginals with an explicit unknown-address share.
    return {
        "Dublin": 0.40,
        "Cork": 0.13,
        "Galway": 0.07,
        "Meath": 0.07,
        _COUNTY_NA: 0.10,
        "Kilkenny": 0.04,
        "Laois": 0.03,
        "Donegal": 0.03,
        "Leitrim": 0.02,
        "Carlow": 0.02,
        "Kildare": 0.02,
        "Wexford": 0.02,
        "Limerick": 0.02,
        "Waterford": 0.01,
        "Clare": 0.01,
        "Mayo": 0.01,
    }


@dataclass
class GeneratorConfig:
    n_rows: int
    seed: int = 0
    class_mix: dict[str, float] = field(default_factory=_default_class_mix)
    label_noise: float = 0.0
    spend_params: dict[str, tuple[float, float]] = field(default_factory=_default_spend_params)
    county_weights: dict[str, float] = field(default_factory=_default_county_weights)
    months: int = MAX_WINDOW_MONTHS
    window_end: date = date(2016, 11, 30)

    def __post_init__(self):
        if self.n_rows < 0:
            raise InfeasibleConfigError("n_rows must be non-negative")
        if not 1 <= self.months <= MAX_WINDOW_MONTHS:
            raise InfeasibleConfigError(
                f"months must be 1..{MAX_WINDOW_MONTHS}, got {self.months}"
            )
        if not 0.0 <= self.label_noise < 1.0:
            raise InfeasibleConfigError("label_noise must be in [0, 1)")
        unknown = set(self.class_mix) - set(ACCOUNT_CLASSES)
        if unknown:
            raise InfeasibleConfigError(f"unknown classes in class_mix: {sorted(unknown)}")
        total = sum(self.class_mix.values())
        if abs(total - 1.0) > 1e-9:
            raise InfeasibleConfigError(f"class_mix sums to {total}, expected 1")
        if any(p < 0 for p in self.class_mix.values()):
            raise InfeasibleConfigError("class_mix proportions must be non-negative")
        if self.class_mix.get(CLASS_UNPAID, 0.0) > 0 and self.months < 2:
            raise InfeasibleConfigError(
                "Unpaid Invoice accounts need a window of at least 2 months"
            )
        for tier in SPEND_TIERS:
            if tier not in self.spend_params:
                raise InfeasibleConfigError(f"spend_params missing tier {tier!r}")
            mean, spread = self.spend_params[tier]
            if spread <= 0:
                raise InfeasibleConfigError(f"{tier}: spread must be positive")
            lo, hi = _TIER_BANDS_CENTS[tier]
            mean_cents = mean * 100
            if mean_cents <= lo or (hi is not None and mean_cents >= hi):
                raise InfeasibleConfigError(
                    f"{tier}: mean {mean} EUR is not strictly inside its band"
                )
        means = [self.spend_params[t][0] for t in SPEND_TIERS]
        if sorted(means) != means or len(set(means)) != len(means):
            raise InfeasibleConfigError("tier means must increase strictly with the tier")
        if not self.county_weights:
            raise InfeasibleConfigError("county_weights must not be empty")
        if any(w < 0 for w in self.county_weights.values()):
            raise InfeasibleConfigError("county weights must be non-negative")


@dataclass
class GroundTruth:
    """Per-row intended labels as constructed by the generator (pre-noise)."""

    spender_status: list[str]
    account_class: list[str]


def _pick(rng: np.random.Generator, items, weights=None):
    if weights is None:
        return items[int(rng.integers(len(items)))]
    w = np.asarray(weights, dtype=np.float64)
    return items[int(rng.choice(len(items), p=w / w.sum()))]


def _sample_avg_cents(rng: np.random.Generator, tier: str, params) -> int:
    """Whole-cent average strictly inside the tier band."""
    mean, spread = params
    lo, hi = _TIER_BANDS_CENTS[tier]
    lo_eur = lo / 100.0 + 0.01
    hi_eur = (hi / 100.0 - 0.01) if hi is not None else mean + 6 * spread
    value = None
    for _ in range(64):
        draw = rng.normal(mean, spread)
        if lo_eur <= draw <= hi_eur:
            value = draw
            break
    if value is None:
        value = min(max(mean, lo_eur), hi_eur)
    cents = int(round(value * 100))
    hi_cap = (hi - 1) if hi is not None else cents
    return min(max(cents, lo + 1), max(hi_cap, lo + 1))


def _spread_amounts(rng: np.random.Generator, total_cents: int, n: int, spread_eur: float):
    """n integer-cent amounts summing exactly to total_cents."""
    base = total_cents // n
    jitter_scale = max(1, int(spread_eur * 100 / 4))
    jitter = rng.integers(-jitter_scale, jitter_scale + 1, size=n)
    amounts = base + jitter
    amounts[-1] += total_cents - int(amounts.sum())
    return [int(a) for a in amounts]


def _payment_statuses(rng: np.random.Generator, n: int, account_class: str) -> list[PaymentStatus]:
    """Statuses whose paid count satisfies (or violates) the paid-up rule."""
    if account_class == CLASS_UNPAID:
        # Paid-up rule violated: strictly fewer than n-1 paid invoices.
        paid = int(rng.integers(0, n - 1))
    else:
        paid = n - int(rng.integers(0, 2)) if n > 0 else 0
    statuses = [PaymentStatus.PAID] * paid
    for _ in range(n - paid):
        statuses.append(
            PaymentStatus.UNPAID if rng.random() < 0.6 else PaymentStatus.DECLINED
        )
    order = rng.permutation(n)
    return [statuses[i] for i in order]


def _month_start_offset(window_end: date, months_back: int) -> date:
    """First day of the month `months_back` months before window_end's month."""
    year, month = window_end.year, window_end.month
    month -= months_back
    while month <= 0:
        month += 12
        year -= 1
    return date(year, month, 1)


def _random_date_in_month(rng: np.random.Generator, first: date, cap: date) -> date:
    last_day = calendar.monthrange(first.year, first.month)[1]
    last = min(date(first.year, first.month, last_day), cap)
    span = (last - first).days
    return first + timedelta(days=int(rng.integers(0, span + 1)))


def _build_months(
    rng: np.random.Generator,
    n_absent: int,
    n_real: int,
    avg_cents: int,
    spread_eur: float,
    account_class: str,
) -> tuple[list[MonthlyInvoice], int]:
    contributions = _spread_amounts(rng, avg_cents * n_real, n_real, spread_eur)
    statuses = _payment_statuses(rng, n_real, account_class)
    months = [MonthlyInvoice(None, None, PaymentStatus.ABSENT)] * n_absent
    for i in range(n_real):
        # An unpaid previous month rolls its amount forward; the net
        # contribution is preserved so the intended average stays exact.
        bf = 0
        if i > 0 and statuses[i - 1] is PaymentStatus.UNPAID and rng.random() < 0.7:
            bf = max(months[n_absent + i - 1].amount_cents, 0)
        months.append(MonthlyInvoice(contributions[i] + bf, bf, statuses[i]))
    paid = sum(1 for s in statuses if s is PaymentStatus.PAID)
    return months, paid


def _perturb(rng, months, n_absent, avg_cents, tier, spread_eur, account_class):
    """Label-noise: flip one payment status or move the spend level."""
    n_real = len(months) - n_absent
    if rng.random() < 0.5 and n_real > 0:
        i = n_absent + int(rng.integers(n_real))
        month = months[i]
        flipped = (
            PaymentStatus.UNPAID
            if month.status is PaymentStatus.PAID
            else PaymentStatus.PAID
        )
        months = list(months)
        months[i] = MonthlyInvoice(month.amount_cents, month.brought_forward_cents, flipped)
        return months
    # Shift the average into a neighbouring band.
    tier_idx = SPEND_TIERS.index(tier)
    direction = 1 if (tier_idx == 0 or (rng.random() < 0.5 and tier_idx < 4)) else -1
    new_tier = SPEND_TIERS[tier_idx + direction]
    lo, hi = _TIER_BANDS_CENTS[new_tier]
    new_avg = lo + 100 if hi is None else int((lo + hi) // 2)
    rebuilt, _ = _build_months(
        rng, n_absent, n_real, new_avg, spread_eur, account_class
    )
    # Keep the original payment pattern; only the amounts move.
    out = list(months[:n_absent])
    for old, new in zip(months[n_absent:], rebuilt[n_absent:]):
        out.append(MonthlyInvoice(new.amount_cents, new.brought_forward_cents, old.status))
    return out


def generate(config: GeneratorConfig) -> tuple[list[RawCustomerRecord], GroundTruth]:
    """Generate records plus the intended (pre-noise) labels.

    Deterministic in the seed; each row draws from its own seed stream, so
    row i is reproducible independently of the others.
    """
    class_names = [c for c in ACCOUNT_CLASSES if config.class_mix.get(c, 0.0) > 0]
    class_probs = [config.class_mix[c] for c in class_names]
    county_names = list(config.county_weights.keys())
    county_probs = list(config.county_weights.values())

    records: list[RawCustomerRecord] = []
    truth = GroundTruth([], [])
    for i in range(config.n_rows):
        rng = np.random.default_rng((config.seed, i))
        account_class = _pick(rng, class_names, class_probs)
        tier = _pick(rng, _TIERS_FOR_CLASS[account_class])
        mean, spread = config.spend_params[tier]
        avg_cents = _sample_avg_cents(rng, tier, (mean, spread))

        max_absent = config.months - (2 if account_class == CLASS_UNPAID else 1)
        n_absent = int(rng.integers(0, max_absent + 1))
        n_real = config.months - n_absent
        months, _ = _build_months(rng, n_absent, n_real, avg_cents, spread, account_class)

        if config.label_noise > 0 and rng.random() < config.label_noise:
            months = _perturb(rng, months, n_absent, avg_cents, tier, spread, account_class)

        # Activation falls in the first non-absent month of the window.
        first_active_month = _month_start_offset(
            config.window_end, config.months - 1 - n_absent
        )
        activation = _random_date_in_month(rng, first_active_month, config.window_end)
        inactive = None
        status = NetworkStatus.ACTIVE
        if rng.random() < 0.15:
            status = NetworkStatus.INACTIVE
            span = (config.window_end - activation).days
            inactive = activation + timedelta(days=int(rng.integers(0, span + 1)))
        sale_time = time(
            int(rng.integers(0, 24)), int(rng.integers(0, 60)), int(rng.integers(0, 60))
        )

        age = None if rng.random() < 0.08 else int(rng.integers(16, 91))
        gender = _pick(
            rng, (Gender.MALE, Gender.FEMALE, Gender.UNKNOWN), (0.48, 0.48, 0.04)
        )
        county = _pick(rng, county_names, county_probs)
        if county == _COUNTY_NA:
            address = None
        else:
            street = _pick(rng, _STREETS)
            number = int(rng.integers(1, 200))
            address = f"{number} {street}, {county}"
            if rng.random() < 0.1:
                address = address.lower()

        records.append(
            RawCustomerRecord(
                account_id=f"C{i + 1:07d}",
                age=age,
                gender=gender,
                bill_address_county=address,
                network_status=status,
                activation_date=activation,
                inactive_date=inactive,
                sale_date=activation,
                sale_time=sale_time,
                monthly_invoices=tuple(months),
            )
        )
        truth.spender_status.append(tier)
        truth.account_class.append(account_class)
    return records, truth


def write_truth(truth: GroundTruth, records, sink: IO) -> None:
    sink.write("account_id,spender_status,account_class\n")
    for record, tier, cls in zip(records, truth.spender_status, truth.account_class):
        sink.write(f"{record.account_id},{tier},{cls}\n")


def config_from_json(payload: dict) -> GeneratorConfig:
    """Build a config from a JSON object of overrides."""
    kwargs = dict(payload)
    if "window_end" in kwargs:
        kwargs["window_end"] = date.fromisoformat(kwargs["window_end"])
    if "spend_params" in kwargs:
        kwargs["spend_params"] = {
            tier: (float(v[0]), float(v[1])) for tier, v in kwargs["spend_params"].items()
        }
    try:
        return GeneratorConfig(**kwargs)
    except TypeError as exc:
        raise InfeasibleConfigError(str(exc)) from None


def load_config(path: str, **overrides) -> GeneratorConfig:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    payload.update(overrides)
    return config_from_json(payload)
