"""Event-sourced chemical inventory.

Holds the container and chemical registries and applies OperationEvents in
emission order: Remove opens a checkout, Return closes it and emits a
ConsumptionEntry (gross out minus gross in), Adjust mutates gross in place,
Ambiguous parks in a resolution queue until a human attributes the delta,
and Anomaly (plus any cross-check that fails) lands in an anomaly list.

The inventory itself is plain mutable state; durability comes from replaying
the event journal (see the store module), so apply_event must stay
deterministic. Refills — weight coming back heavier than it left — are
recorded as negative consumption flagged ``refill`` so that per-container
conservation (initial net − Σ consumption = current net) holds exactly.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .engine import (
    ADJUST,
    AMBIGUOUS,
    ANOMALY,
    REMOVE,
    RETURN,
    OperationEvent,
    event_from_dict,
    event_to_dict,
)
from .errors import InventoryError
from .telemetry import CONTAINER_PREFIX

CHECKED_OUT = "checked-out"

# Cross-checks between measured deltas and stored grosses.
GROSS_MISMATCH_TOL_G = 0.5
NEGATIVE_NET_TOL_G = -0.5

# Human resolutions must account for the parked delta this tightly.
RESOLUTION_SUM_TOL_G = 0.01

SNAPSHOT_SCHEMA_VERSION = 1


def event_id(ev: OperationEvent) -> str:
    """Stable 16-hex-char id derived from the event's canonical form."""
    blob = json.dumps(event_to_dict(ev), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(slots=True)
class ChemicalRecord:
    chemical_id: str
    name: str
    hazard_class: str = ""
    unit: str = "g"
    reorder_lead_time_days: float = 3.0


@dataclass(slots=True)
class Checkout:
    gross_at_checkout: float
    user_badge: str | None
    t_out: int


@dataclass(slots=True)
class ContainerRecord:
    tag_id: str
    chemical_id: str
    tare_g: float
    gross_g: float
    location: str = CHECKED_OUT  # tray id once first seen on a tray
    checkout: Checkout | None = None
    registered_at: int = 0

    @property
    def net_g(self) -> float:
        return self.gross_g - self.tare_g


@dataclass(slots=True)
class ConsumptionEntry:
    chemical_id: str
    tag_id: str
    amount_g: float
    user_badge: str | None
    t_out: int
    t_in: int
    refill: bool = False


@dataclass(slots=True)
class AmbiguousRecord:
    event_id: str
    event: OperationEvent
    status: str = "open"  # open | resolved
    resolution: list | None = None
    resolved_at: int | None = None


@dataclass(slots=True)
class AnomalyRecord:
    kind: str  # engine | gross-mismatch | negative-net
    detail: str
    t: int
    tray_id: str | None = None
    tag_id: str | None = None
    delta_g: float | None = None


@dataclass(slots=True)
class RemainingReport:
    chemical_id: str
    available_g: float
    total_g: float
    containers: list  # (tag_id, location, net_g)


class Inventory:
    """Single-writer inventory state; reads may happen from anywhere."""

    def __init__(self):
        self.chemicals: dict[str, ChemicalRecord] = {}
        self.containers: dict[str, ContainerRecord] = {}
        self.consumption: list[ConsumptionEntry] = []
        self.ambiguous: dict[str, AmbiguousRecord] = {}
        self.quarantine: list[OperationEvent] = []
        self.anomalies: list[AnomalyRecord] = []

    # --- registration ---

    def register_chemical(
        self,
        chemical_id: str,
        name: str,
        hazard_class: str = "",
        unit: str = "g",
        reorder_lead_time_days: float = 3.0,
    ) -> ChemicalRecord:
        if not name:
            raise InventoryError("chemical name must be non-empty")
        if chemical_id in self.chemicals:
            raise InventoryError(f"chemical {chemical_id!r} already registered")
        if reorder_lead_time_days < 0:
            raise InventoryError("reorder_lead_time_days must be >= 0")
        record = ChemicalRecord(chemical_id, name, hazard_class, unit, reorder_lead_time_days)
        self.chemicals[chemical_id] = record
        return record

    def register_container(
        self,
        tag_id: str,
        chemical_id: str,
        tare_g: float,
        initial_gross_g: float,
        registered_at: int = 0,
    ) -> ContainerRecord:
        if not tag_id.startswith(CONTAINER_PREFIX):
            raise InventoryError(f"container tag must carry the 'C:' prefix, got {tag_id!r}")
        existing = self.containers.get(tag_id)
        if existing is not None:
            raise InventoryError(
                f"tag {tag_id!r} already registered to chemical {existing.chemical_id!r}"
            )
        if chemical_id not in self.chemicals:
            raise InventoryError(f"unknown chemical {chemical_id!r}")
        if tare_g < 0:
            raise InventoryError("tare_g must be >= 0")
        if tare_g >= initial_gross_g:
            raise InventoryError(
                f"tare {tare_g} g must be below initial gross {initial_gross_g} g"
            )
        record = ContainerRecord(
            tag_id=tag_id,
            chemical_id=chemical_id,
            tare_g=tare_g,
            gross_g=initial_gross_g,
            registered_at=registered_at,
        )
        self.containers[tag_id] = record
        return record

    # --- event application ---

    def gross_lookup(self) -> dict:
        """Live view of last-known grosses, for the event engine's matching."""
        return _GrossView(self.containers)

    def apply_event(self, ev: OperationEvent) -> list[ConsumptionEntry]:
        """Apply one engine event; returns any consumption entries produced."""
        if ev.kind == AMBIGUOUS:
            eid = event_id(ev)
            if eid not in self.ambiguous:
                self.ambiguous[eid] = AmbiguousRecord(event_id=eid, event=ev)
            return []
        if ev.kind == ANOMALY:
            self.anomalies.append(
                AnomalyRecord(
                    kind="engine",
                    detail=f"tracker anomaly ({', '.join(ev.flags) or 'unflagged'})",
                    t=ev.t_end,
                    tray_id=ev.tray_id,
                    delta_g=ev.delta_g,
                )
            )
            return []

        container = self.containers.get(ev.tag_id)
        if container is None:
            self.quarantine.append(ev)
            return []

        if ev.kind == REMOVE:
            self._apply_remove(container, ev)
            return []
        if ev.kind == RETURN:
            return self._apply_return(container, ev)
        if ev.kind == ADJUST:
            return self._apply_adjust(container, ev)
        raise InventoryError(f"unknown event kind {ev.kind!r}")

    def _apply_remove(self, container: ContainerRecord, ev: OperationEvent) -> None:
        measured_gross = -ev.delta_g
        mismatch = measured_gross - container.gross_g
        if abs(mismatch) > GROSS_MISMATCH_TOL_G:
            self.anomalies.append(
                AnomalyRecord(
                    kind="gross-mismatch",
                    detail=(
                        f"removal weighed {measured_gross:.3f} g but records said "
                        f"{container.gross_g:.3f} g"
                    ),
                    t=ev.t_end,
                    tray_id=ev.tray_id,
                    tag_id=container.tag_id,
                    delta_g=mismatch,
                )
            )
        # The checkout anchors at the gross of record, not the removal weighing.
        # The eventual return entry is anchor - measured_return, so every gross
        # transition is covered by exactly one entry and per-container sums
        # telescope: noise in the removal weighing never leaks into totals.
        # A remove on an already-open checkout keeps the original anchor for
        # the same reason (the first take's mass still has to land somewhere).
        if container.checkout is not None:
            anchor = container.checkout.gross_at_checkout
        else:
            anchor = container.gross_g
        container.gross_g = measured_gross  # the scale is the freshest truth
        container.location = CHECKED_OUT
        container.checkout = Checkout(
            gross_at_checkout=anchor, user_badge=ev.user_badge, t_out=ev.t_end
        )
        self._check_net(container, ev)

    def _apply_return(self, container: ContainerRecord, ev: OperationEvent) -> list[ConsumptionEntry]:
        entries = []
        if container.checkout is not None:
            out = container.checkout
            amount = out.gross_at_checkout - ev.delta_g
            entries.append(
                ConsumptionEntry(
                    chemical_id=container.chemical_id,
                    tag_id=container.tag_id,
                    amount_g=amount,
                    user_badge=ev.user_badge or out.user_badge,
                    t_out=out.t_out,
                    t_in=ev.t_end,
                    refill=amount < 0,
                )
            )
            container.checkout = None
        elif container.location != CHECKED_OUT:
            # Reappearance without a recorded removal: the ledger thought the
            # container was sitting on a tray the whole time. Book the gap
            # between the gross of record and this weighing so the unrecorded
            # span is accounted rather than silently rebased away.
            amount = container.gross_g - ev.delta_g
            entries.append(
                ConsumptionEntry(
                    chemical_id=container.chemical_id,
                    tag_id=container.tag_id,
                    amount_g=amount,
                    user_badge=ev.user_badge,
                    t_out=ev.t_start,
                    t_in=ev.t_end,
                    refill=amount < 0,
                )
            )
        container.gross_g = ev.delta_g
        container.location = ev.tray_id
        self._check_net(container, ev)
        self.consumption.extend(entries)
        return entries

    def _apply_adjust(self, container: ContainerRecord, ev: OperationEvent) -> list[ConsumptionEntry]:
        entries = []
        if container.checkout is not None:
            # An in-place dispense proves the container is back on a tray even
            # though no return was recorded (it was missed or left unresolved).
            # Close the stale checkout against the gross of record so the mass
            # from that span is booked once, not folded into this adjustment.
            out = container.checkout
            amount = out.gross_at_checkout - container.gross_g
            entries.append(
                ConsumptionEntry(
                    chemical_id=container.chemical_id,
                    tag_id=container.tag_id,
                    amount_g=amount,
                    user_badge=out.user_badge,
                    t_out=out.t_out,
                    t_in=ev.t_start,
                    refill=amount < 0,
                )
            )
            container.checkout = None
        container.gross_g += ev.delta_g
        container.location = ev.tray_id
        entries.append(
            ConsumptionEntry(
                chemical_id=container.chemical_id,
                tag_id=container.tag_id,
                amount_g=-ev.delta_g,
                user_badge=ev.user_badge,
                t_out=ev.t_start,
                t_in=ev.t_end,
                refill=ev.delta_g > 0,
            )
        )
        self._check_net(container, ev)
        self.consumption.extend(entries)
        return entries

    def _check_net(self, container: ContainerRecord, ev: OperationEvent) -> None:
        if container.net_g < NEGATIVE_NET_TOL_G:
            self.anomalies.append(
                AnomalyRecord(
                    kind="negative-net",
                    detail=(
                        f"net content of {container.tag_id} fell to "
                        f"{container.net_g:.3f} g"
                    ),
                    t=ev.t_end,
                    tray_id=ev.tray_id,
                    tag_id=container.tag_id,
                    delta_g=container.net_g,
                )
            )

    # --- ambiguity resolution ---

    def resolve_ambiguous(
        self, eid: str, attribution: list, resolved_at: int | None = None
    ) -> list[OperationEvent]:
        """Apply a human attribution [(tag, delta_g), ...] for a parked event.

        Each attributed tag is applied with the semantics its candidacy
        implies: a tag that went missing becomes a Remove, one that appeared
        becomes a Return, and an in-place candidate becomes an Adjust. The
        deltas must sum to the parked delta within 0.01 g.
        """
        record = self.ambiguous.get(eid)
        if record is None:
            raise InventoryError(f"no parked event with id {eid!r}")
        if record.status != "open":
            raise InventoryError(f"event {eid!r} was already resolved")
        ev = record.event

        total = sum(delta for _, delta in attribution)
        if abs(total - ev.delta_g) > RESOLUTION_SUM_TOL_G:
            raise InventoryError(
                f"attributed deltas sum to {total:.3f} g but the event recorded "
                f"{ev.delta_g:.3f} g"
            )
        seen: set[str] = set()
        applied: list[OperationEvent] = []
        for tag, delta in attribution:
            if tag in seen:
                raise InventoryError(f"tag {tag!r} attributed twice")
            seen.add(tag)
            if ev.candidates and tag not in ev.candidates:
                raise InventoryError(f"tag {tag!r} is not a candidate of event {eid!r}")
            if tag not in self.containers:
                raise InventoryError(f"tag {tag!r} is not registered")
            if tag in ev.candidates_removed:
                kind = REMOVE
                if delta >= 0:
                    raise InventoryError(f"removal share for {tag!r} must be negative")
            elif tag in ev.candidates_returned:
                kind = RETURN
                if delta <= 0:
                    raise InventoryError(f"return share for {tag!r} must be positive")
            else:
                kind = ADJUST
            applied.append(
                OperationEvent(
                    tray_id=ev.tray_id,
                    kind=kind,
                    delta_g=delta,
                    tag_id=tag,
                    user_badge=ev.user_badge,
                    t_start=ev.t_start,
                    t_end=ev.t_end,
                    flags=ev.flags + ("resolved",),
                )
            )
        for sub in applied:
            self.apply_event(sub)
        record.status = "resolved"
        record.resolution = [[tag, delta] for tag, delta in attribution]
        record.resolved_at = resolved_at
        return applied

    # --- queries ---

    def remaining_quantity(self, chemical_id: str) -> RemainingReport:
        if chemical_id not in self.chemicals:
            raise InventoryError(f"unknown chemical {chemical_id!r}")
        available = 0.0
        total = 0.0
        breakdown = []
        for tag in sorted(self.containers):
            c = self.containers[tag]
            if c.chemical_id != chemical_id:
                continue
            total += c.net_g
            if c.location != CHECKED_OUT:
                available += c.net_g
            breakdown.append((c.tag_id, c.location, c.net_g))
        return RemainingReport(chemical_id, available, total, breakdown)

    def consumption_history(
        self, chemical_id: str, t_from: int | None = None, t_to: int | None = None
    ) -> tuple[list[ConsumptionEntry], dict[str, float]]:
        """Entries whose t_in lies in [t_from, t_to], plus per-day totals."""
        if chemical_id not in self.chemicals:
            raise InventoryError(f"unknown chemical {chemical_id!r}")
        if t_from is not None and t_to is not None and t_to < t_from:
            raise InventoryError("history range is reversed")
        entries = [
            e
            for e in self.consumption
            if e.chemical_id == chemical_id
            and (t_from is None or e.t_in >= t_from)
            and (t_to is None or e.t_in <= t_to)
        ]
        daily: dict[str, float] = {}
        for e in entries:
            day = datetime.fromtimestamp(e.t_in / 1000, tz=timezone.utc).date().isoformat()
            daily[day] = daily.get(day, 0.0) + e.amount_g
        return entries, daily

    def open_ambiguous(self) -> list[AmbiguousRecord]:
        return [r for _, r in sorted(self.ambiguous.items()) if r.status == "open"]

    # --- snapshot codec (caches only; the journal is the source of truth) ---

    def snapshot(self) -> dict:
        return {
            "schema": SNAPSHOT_SCHEMA_VERSION,
            "chemicals": {
                cid: {
                    "chemical_id": c.chemical_id,
                    "name": c.name,
                    "hazard_class": c.hazard_class,
                    "unit": c.unit,
                    "reorder_lead_time_days": c.reorder_lead_time_days,
                }
                for cid, c in sorted(self.chemicals.items())
            },
            "containers": {
                tag: {
                    "tag_id": c.tag_id,
                    "chemical_id": c.chemical_id,
                    "tare_g": c.tare_g,
                    "gross_g": c.gross_g,
                    "location": c.location,
                    "checkout": None
                    if c.checkout is None
                    else {
                        "gross_at_checkout": c.checkout.gross_at_checkout,
                        "user_badge": c.checkout.user_badge,
                        "t_out": c.checkout.t_out,
                    },
                    "registered_at": c.registered_at,
                }
                for tag, c in sorted(self.containers.items())
            },
            "consumption": [
                {
                    "chemical_id": e.chemical_id,
                    "tag_id": e.tag_id,
                    "amount_g": e.amount_g,
                    "user_badge": e.user_badge,
                    "t_out": e.t_out,
                    "t_in": e.t_in,
                    "refill": e.refill,
                }
                for e in self.consumption
            ],
            "ambiguous": {
                eid: {
                    "event_id": r.event_id,
                    "event": event_to_dict(r.event),
                    "status": r.status,
                    "resolution": r.resolution,
                    "resolved_at": r.resolved_at,
                }
                for eid, r in sorted(self.ambiguous.items())
            },
            "quarantine": [event_to_dict(e) for e in self.quarantine],
            "anomalies": [
                {
                    "kind": a.kind,
                    "detail": a.detail,
                    "t": a.t,
                    "tray_id": a.tray_id,
                    "tag_id": a.tag_id,
                    "delta_g": a.delta_g,
                }
                for a in self.anomalies
            ],
        }

    @classmethod
    def from_snapshot(cls, data: dict) -> "Inventory":
        if data.get("schema") != SNAPSHOT_SCHEMA_VERSION:
            raise InventoryError(f"unsupported snapshot schema {data.get('schema')!r}")
        inv = cls()
        for cid, c in data["chemicals"].items():
            inv.chemicals[cid] = ChemicalRecord(
                chemical_id=c["chemical_id"],
                name=c["name"],
                hazard_class=c["hazard_class"],
                unit=c["unit"],
                reorder_lead_time_days=c["reorder_lead_time_days"],
            )
        for tag, c in data["containers"].items():
            checkout = c["checkout"]
            inv.containers[tag] = ContainerRecord(
                tag_id=c["tag_id"],
                chemical_id=c["chemical_id"],
                tare_g=c["tare_g"],
                gross_g=c["gross_g"],
                location=c["location"],
                checkout=None
                if checkout is None
                else Checkout(
                    gross_at_checkout=checkout["gross_at_checkout"],
                    user_badge=checkout["user_badge"],
                    t_out=checkout["t_out"],
                ),
                registered_at=c["registered_at"],
            )
        for e in data["consumption"]:
            inv.consumption.append(
                ConsumptionEntry(
                    chemical_id=e["chemical_id"],
                    tag_id=e["tag_id"],
                    amount_g=e["amount_g"],
                    user_badge=e["user_badge"],
                    t_out=e["t_out"],
                    t_in=e["t_in"],
                    refill=e["refill"],
                )
            )
        for eid, r in data["ambiguous"].items():
            inv.ambiguous[eid] = AmbiguousRecord(
                event_id=r["event_id"],
                event=event_from_dict(r["event"]),
                status=r["status"],
                resolution=r["resolution"],
                resolved_at=r["resolved_at"],
            )
        inv.quarantine = [event_from_dict(e) for e in data["quarantine"]]
        for a in data["anomalies"]:
            inv.anomalies.append(
                AnomalyRecord(
                    kind=a["kind"],
                    detail=a["detail"],
                    t=a["t"],
                    tray_id=a["tray_id"],
                    tag_id=a["tag_id"],
                    delta_g=a["delta_g"],
                )
            )
        return inv


class _GrossView:
    """Read-only mapping of tag -> last-known gross over the live registry."""

    __slots__ = ("_containers",)

    def __init__(self, containers: dict[str, ContainerRecord]):
        self._containers = containers

    def get(self, tag, default=None):
        record = self._containers.get(tag)
        return default if record is None else record.gross_g

    def __getitem__(self, tag):
        record = self._containers.get(tag)
        if record is None:
            raise KeyError(tag)
        return record.gross_g

    def __contains__(self, tag):
        return tag in self._containers
