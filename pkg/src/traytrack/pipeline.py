"""Wires frame streams through per-tray trackers into durable inventory state.

One Pipeline owns a data directory. All state mutations flow through typed
journal records; the in-memory Inventory, per-tray watermarks, and the audit
chain are deterministic functions of the journal, so a restart replays to the
same state. Journal record types:

- ``batch``   — one ingested frame batch for one tray: the events it produced
  plus the high-water sequence number, in a single line so the events and the
  watermark commit atomically.
- ``register_chemical`` / ``register_container`` — registry additions.
- ``resolution`` — a human attribution for a parked ambiguous event.
- ``note`` — free-form audit annotation; no inventory effect.

Everything except the watermark side of ``batch`` is mirrored into the audit
chain (events individually, stamped with their own end time, so the chain
bytes never depend on when the journal line was written).

Tracker state (baselines, debounce streaks, open windows) is deliberately
*not* persisted: after a restart each tray re-warms from its next frames, and
at most the in-flight batch's events are lost — the journal never goes back
in time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from . import store
from .auditlog import (
    AuditChain,
    AuditEntry,
    entry_from_line,
    entry_to_line,
    write_root,
)
from .engine import (
    OperationEvent,
    StabilityConfig,
    TrayTracker,
    event_from_dict,
    event_to_dict,
)
from .errors import AuditError, StoreError, TrayTrackError
from .inventory import Inventory
from .telemetry import TelemetryFrame

SNAPSHOT_EVERY_DEFAULT = 200

REC_BATCH = "batch"
REC_CHEMICAL = "register_chemical"
REC_CONTAINER = "register_container"
REC_RESOLUTION = "resolution"
REC_NOTE = "note"


@dataclass
class IngestReport:
    """Outcome of one ingest call."""

    accepted: int = 0
    duplicates: int = 0
    rejected: list = field(default_factory=list)  # dicts: tray_id/seq/reason
    events: list = field(default_factory=list)  # OperationEvent, in apply order


class Pipeline:
    """Single-writer pipeline: callers must serialize mutating calls."""

    def __init__(
        self,
        data_dir: str | Path,
        trays: Iterable[str],
        cfg: StabilityConfig | None = None,
        snapshot_every: int = SNAPSHOT_EVERY_DEFAULT,
    ):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.journal_path = self.data_dir / store.JOURNAL_NAME
        self.snapshot_path = self.data_dir / store.SNAPSHOT_NAME
        self.audit_path = self.data_dir / store.AUDIT_NAME
        self.roots_path = self.data_dir / store.ROOTS_NAME
        self.trays = set(trays)
        self.cfg = cfg or StabilityConfig()
        self.snapshot_every = snapshot_every

        self.inventory = Inventory()
        self.watermarks: dict[str, int] = {}
        self.events_by_tray: dict[str, list[OperationEvent]] = {}
        self.chain = AuditChain()
        self.journal_len = 0
        self._trackers: dict[str, TrayTracker] = {}
        self._load()

    # --- loading / recovery ---

    def _load(self) -> None:
        scan = store.read_journal(self.journal_path)
        store.repair_journal(self.journal_path, scan)
        records = scan.records

        start = 0
        snap = store.read_json(self.snapshot_path)
        if snap is not None:
            try:
                if snap["schema"] == 1 and snap["journal_len"] <= len(records):
                    self.inventory = Inventory.from_snapshot(snap["inventory"])
                    self.watermarks = {
                        str(k): int(v) for k, v in snap["watermarks"].items()
                    }
                    start = snap["journal_len"]
            except (KeyError, TypeError, ValueError, TrayTrackError):
                # Unusable snapshot: fall back to a full replay.
                self.inventory = Inventory()
                self.watermarks = {}
                start = 0

        for rec in records[start:]:
            self._apply_record(rec)
        self.journal_len = len(records)

        # events_by_tray is a convenience view, always rebuilt in full.
        for rec in records:
            if rec["type"] == REC_BATCH:
                tray = rec["data"]["tray_id"]
                evs = [event_from_dict(d) for d in rec["data"]["events"]]
                self.events_by_tray.setdefault(tray, []).extend(evs)

        self._reconcile_audit(records)

    def _apply_record(self, rec: dict) -> None:
        rtype, data = rec["type"], rec["data"]
        if rtype == REC_BATCH:
            tray = data["tray_id"]
            for evd in data["events"]:
                self.inventory.apply_event(event_from_dict(evd))
            self.watermarks[tray] = max(self.watermarks.get(tray, 0), data["seq_to"])
        elif rtype == REC_CHEMICAL:
            self.inventory.register_chemical(**data)
        elif rtype == REC_CONTAINER:
            self.inventory.register_container(**data)
        elif rtype == REC_RESOLUTION:
            attribution = [(tag, delta) for tag, delta in data["attribution"]]
            self.inventory.resolve_ambiguous(
                data["event_id"], attribution, resolved_at=data["resolved_at"]
            )
        elif rtype == REC_NOTE:
            pass
        else:
            raise StoreError(f"unknown journal record type {rtype!r}")

    @staticmethod
    def _audit_payloads(rtype: str, data: dict, ts: int) -> list[tuple[dict, int]]:
        """What a journal record contributes to the audit chain."""
        if rtype == REC_BATCH:
            return [
                ({"type": "event", "data": evd}, evd["t_end"])
                for evd in data["events"]
            ]
        return [({"type": rtype, "data": data}, ts)]

    def _expected_chain(self, records: list[dict]) -> AuditChain:
        chain = AuditChain()
        for rec in records:
            for payload, ts in self._audit_payloads(rec["type"], rec["data"], rec["ts"]):
                chain.append(payload, ts)
        return chain

    def _reconcile_audit(self, records: list[dict]) -> None:
        """Bring audit.ndjson in line with the journal, never masking tamper.

        A clean prefix (crash before the audit append) is extended; entries
        beyond what the journal supports (journal truncation) are dropped; a
        *divergent* entry is evidence of tampering and refuses startup.
        """
        expected = self._expected_chain(records)
        on_disk: list[AuditEntry] = []
        if self.audit_path.exists():
            raw = self.audit_path.read_bytes()
            chunks = raw.split(b"\n")
            if chunks and chunks[-1] == b"":
                chunks.pop()
            clean = 0
            for i, chunk in enumerate(chunks):
                try:
                    entry = entry_from_line(chunk.decode("utf-8"), i)
                except (AuditError, UnicodeDecodeError) as exc:
                    if i == len(chunks) - 1 and not raw.endswith(b"\n"):
                        # Partial trailing line from a crash: chop it off so
                        # later appends continue from a clean prefix.
                        with open(self.audit_path, "r+b") as fh:
                            fh.truncate(clean)
                        break
                    raise StoreError(
                        f"audit file unreadable at entry {i}: {exc}"
                    ) from exc
                on_disk.append(entry)
                clean += len(chunk) + 1

        for have, want in zip(on_disk, expected.entries):
            if have != want:
                raise StoreError(
                    f"audit entry {have.index} does not match the journal; "
                    "refusing to start"
                )

        if on_disk == expected.entries:
            pass
        elif len(on_disk) < len(expected.entries):
            # Crash landed between the journal append and the audit append.
            for e in expected.entries[len(on_disk):]:
                store.append_line(self.audit_path, entry_to_line(e))
        else:
            # The journal lost its tail; entries past it are unverifiable.
            store.rewrite_file(self.audit_path, [entry_to_line(e) for e in expected.entries])
        self.chain = expected

    # --- journaling ---

    def _record(self, rtype: str, data: dict, ts: int) -> None:
        line = store.encode_record(self.journal_len, ts, rtype, data)
        store.append_line(self.journal_path, line)
        self.journal_len += 1
        for payload, pts in self._audit_payloads(rtype, data, ts):
            entry = self.chain.append(payload, pts)
            store.append_line(self.audit_path, entry_to_line(entry))
        if self.journal_len % self.snapshot_every == 0:
            self.write_snapshot()

    def write_snapshot(self) -> None:
        store.atomic_write_json(
            self.snapshot_path,
            {
                "schema": 1,
                "journal_len": self.journal_len,
                "inventory": self.inventory.snapshot(),
                "watermarks": dict(self.watermarks),
            },
        )
        if len(self.chain):
            last = self.chain.entries[-1]
            write_root(self.roots_path, last.index, last.entry_hash)

    # --- registry ---

    def register_chemical(
        self,
        chemical_id: str,
        name: str,
        hazard_class: str = "",
        unit: str = "g",
        reorder_lead_time_days: float = 3.0,
        ts: int = 0,
    ):
        record = self.inventory.register_chemical(
            chemical_id, name, hazard_class, unit, reorder_lead_time_days
        )
        self._record(
            REC_CHEMICAL,
            {
                "chemical_id": chemical_id,
                "name": name,
                "hazard_class": hazard_class,
                "unit": unit,
                "reorder_lead_time_days": reorder_lead_time_days,
            },
            ts,
        )
        return record

    def register_container(
        self,
        tag_id: str,
        chemical_id: str,
        tare_g: float,
        initial_gross_g: float,
        ts: int = 0,
    ):
        record = self.inventory.register_container(
            tag_id, chemical_id, tare_g, initial_gross_g, registered_at=ts
        )
        self._record(
            REC_CONTAINER,
            {
                "tag_id": tag_id,
                "chemical_id": chemical_id,
                "tare_g": tare_g,
                "initial_gross_g": initial_gross_g,
                "registered_at": ts,
            },
            ts,
        )
        return record

    def seed_registry(self, chemicals: list[dict], containers: list[dict]) -> bool:
        """Apply a configured starting registry, only into an empty journal."""
        if self.journal_len:
            return False
        for chem in chemicals:
            self.register_chemical(**chem)
        for cont in containers:
            self.register_container(**cont)
        return True

    # --- mutations ---

    def resolve(self, eid: str, attribution: list, ts: int) -> list[OperationEvent]:
        applied = self.inventory.resolve_ambiguous(eid, attribution, resolved_at=ts)
        self._record(
            REC_RESOLUTION,
            {
                "event_id": eid,
                "attribution": [[tag, delta] for tag, delta in attribution],
                "resolved_at": ts,
            },
            ts,
        )
        return applied

    def add_note(self, payload: dict, ts: int) -> None:
        self._record(REC_NOTE, payload, ts)

    def tracker(self, tray_id: str) -> TrayTracker:
        tracker = self._trackers.get(tray_id)
        if tracker is None:
            tracker = TrayTracker(tray_id, self.cfg, self.inventory.gross_lookup())
            self._trackers[tray_id] = tracker
        return tracker

    def ingest(self, frames: Iterable[TelemetryFrame]) -> IngestReport:
        """Process one batch of decoded frames; durable before returning.

        Frames are grouped per tray and sorted by sequence number within the
        batch. Frames at or below a tray's watermark are duplicates of
        already-accepted work and are dropped, which is what makes re-posting
        a batch a no-op.
        """
        report = IngestReport()
        by_tray: dict[str, list[TelemetryFrame]] = {}
        for frame in frames:
            if frame.tray_id not in self.trays:
                report.rejected.append(
                    {
                        "tray_id": frame.tray_id,
                        "seq": frame.seq,
                        "reason": f"unknown tray {frame.tray_id!r}",
                    }
                )
                continue
            by_tray.setdefault(frame.tray_id, []).append(frame)

        for tray_id in sorted(by_tray):
            batch = sorted(by_tray[tray_id], key=lambda f: f.seq)
            watermark = self.watermarks.get(tray_id, -1)
            tracker = self.tracker(tray_id)
            events: list[OperationEvent] = []
            last_seq = None
            for frame in batch:
                if frame.seq <= watermark or frame.seq == last_seq:
                    report.duplicates += 1
                    continue
                # Apply as we go: the tracker matches removals against
                # last-known grosses, so a return earlier in this batch must
                # already be booked when the next take is classified.
                for ev in tracker.observe(frame):
                    self.inventory.apply_event(ev)
                    events.append(ev)
                last_seq = frame.seq
                report.accepted += 1
            if last_seq is None:
                continue  # nothing new for this tray
            data = {
                "tray_id": tray_id,
                "seq_to": last_seq,
                "events": [event_to_dict(ev) for ev in events],
            }
            # Memory first, then the journal: _record may cut a snapshot,
            # which must already see this batch's watermark.
            self.watermarks[tray_id] = max(watermark, last_seq)
            self.events_by_tray.setdefault(tray_id, []).extend(events)
            self._record(REC_BATCH, data, batch[-1].timestamp_ms)
            report.events.extend(events)
        return report
