"""Consumption-rate estimation and restock alerts.

Rates are exponentially weighted moving averages over daily consumption
totals. Days with no recorded entries count as zero consumption — in an
always-on tracking system the absence of events is evidence of non-use.
Refills make a day's raw total negative; totals are clamped at zero before
feeding the estimator so a big refill cannot produce a negative rate.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import datetime, timedelta, timezone

from .errors import TrayTrackError
from .inventory import Inventory

DEFAULT_ALPHA = 0.3

_DAY_MS = 86_400_000


@dataclass(frozen=True, slots=True)
class RateEstimate:
    chemical_id: str
    ewma_g_per_day: float = 0.0
    alpha: float = DEFAULT_ALPHA
    last_update_day: str | None = None  # ISO date
    days_observed: int = 0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise TrayTrackError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.ewma_g_per_day < 0:
            raise TrayTrackError("ewma_g_per_day must be >= 0")


def update_rate(est: RateEstimate, day_total_g: float, day: str | None = None) -> RateEstimate:
    """Fold one day's consumption total into the estimate."""
    if day_total_g < 0:
        raise TrayTrackError(f"day total must be >= 0 (refill-adjusted), got {day_total_g}")
    if est.days_observed == 0:
        ewma = day_total_g
    else:
        ewma = est.alpha * day_total_g + (1.0 - est.alpha) * est.ewma_g_per_day
    return replace(
        est,
        ewma_g_per_day=ewma,
        last_update_day=day or est.last_update_day,
        days_observed=est.days_observed + 1,
    )


def days_to_empty(remaining_g: float, est: RateEstimate) -> float | None:
    """Days until depletion at the current rate; None means no depletion."""
    if remaining_g < 0:
        remaining_g = 0.0
    if remaining_g == 0:
        return 0.0
    if est.ewma_g_per_day <= 0:
        return None
    return remaining_g / est.ewma_g_per_day


@dataclass(frozen=True, slots=True)
class RestockAlert:
    chemical_id: str
    name: str
    remaining_g: float
    rate_g_per_day: float
    days_to_empty: float
    projected_empty: str  # ISO date
    reorder_lead_time_days: float


def _day_of(t_ms: int) -> str:
    return datetime.fromtimestamp(t_ms / 1000, tz=timezone.utc).date().isoformat()


def estimate_rates(
    inventory: Inventory, alpha: float = DEFAULT_ALPHA, upto_ms: int | None = None
) -> dict[str, RateEstimate]:
    """EWMA per chemical over its daily totals, zero-filling silent days.

    The day range runs from each chemical's first consumption entry to
    upto_ms (default: the chemical's last entry), so the result is a pure
    function of the ledger and the cutoff.
    """
    estimates: dict[str, RateEstimate] = {}
    for chemical_id in sorted(inventory.chemicals):
        entries, daily = inventory.consumption_history(chemical_id)
        est = RateEstimate(chemical_id=chemical_id, alpha=alpha)
        if entries:
            first = min(e.t_in for e in entries)
            last = upto_ms if upto_ms is not None else max(e.t_in for e in entries)
            day_ms = (first // _DAY_MS) * _DAY_MS
            while day_ms <= last:
                day = _day_of(day_ms)
                est = update_rate(est, max(0.0, daily.get(day, 0.0)), day=day)
                day_ms += _DAY_MS
        estimates[chemical_id] = est
    return estimates


def restock_alerts(
    inventory: Inventory, estimates: dict[str, RateEstimate], now_ms: int
) -> list[RestockAlert]:
    """Chemicals projected to run out within their reorder lead time."""
    alerts = []
    for chemical_id in sorted(inventory.chemicals):
        chem = inventory.chemicals[chemical_id]
        est = estimates.get(chemical_id)
        if est is None:
            continue
        remaining = max(0.0, inventory.remaining_quantity(chemical_id).total_g)
        dte = days_to_empty(remaining, est)
        if dte is None or dte > chem.reorder_lead_time_days:
            continue
        empty_at = datetime.fromtimestamp(now_ms / 1000, tz=timezone.utc) + timedelta(days=dte)
        alerts.append(
            RestockAlert(
                chemical_id=chemical_id,
                name=chem.name,
                remaining_g=remaining,
                rate_g_per_day=est.ewma_g_per_day,
                days_to_empty=dte,
                projected_empty=empty_at.date().isoformat(),
                reorder_lead_time_days=chem.reorder_lead_time_days,
            )
        )
    return alerts
