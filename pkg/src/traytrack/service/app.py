"""FastAPI app over one Pipeline.

Concurrency: FastAPI runs the sync handlers in a threadpool; every mutating
handler serializes on one lock (which also covers per-tray ordering), while
read handlers walk the in-memory state lock-free — they may observe a state
mid-batch, but never a torn record.
"""

from __future__ import annotations

import threading
import time
from datetime import datetime, timezone

from fastapi import Body, FastAPI, HTTPException, Query, Request
from fastapi.staticfiles import StaticFiles
from starlette.concurrency import run_in_threadpool

from ..auditlog import verify_file
from ..config import ServiceConfig
from ..engine import OperationEvent
from ..errors import FrameDecodeError, InventoryError
from ..forecast import days_to_empty, estimate_rates, restock_alerts
from ..inventory import event_id
from ..pipeline import Pipeline
from ..telemetry import decode_frame, raw_to_grams
from . import schemas as S

MAX_LIMIT = 1000


def iso(ms: int) -> str:
    dt = datetime.fromtimestamp(ms / 1000, tz=timezone.utc)
    return dt.isoformat(timespec="milliseconds").replace("+00:00", "Z")


def now_ms() -> int:
    return int(time.time() * 1000)


def event_out(ev: OperationEvent) -> S.EventOut:
    return S.EventOut(
        event_id=event_id(ev),
        tray_id=ev.tray_id,
        kind=ev.kind,
        delta_g=ev.delta_g,
        tag_id=ev.tag_id,
        candidates=list(ev.candidates),
        candidates_removed=list(ev.candidates_removed),
        candidates_returned=list(ev.candidates_returned),
        user_badge=ev.user_badge,
        t_start=iso(ev.t_start),
        t_end=iso(ev.t_end),
        flags=list(ev.flags),
    )


def page(items: list, offset: int, limit: int):
    return len(items), items[offset : offset + limit]


def create_app(cfg: ServiceConfig, pipeline: Pipeline | None = None) -> FastAPI:
    if pipeline is None:
        pipeline = Pipeline(
            cfg.data_dir,
            trays=cfg.tray_ids,
            cfg=cfg.stability,
            snapshot_every=cfg.snapshot_every,
        )
        pipeline.seed_registry(cfg.registry_chemicals, cfg.registry_containers)

    app = FastAPI(title="tray tracking service", version=str(S.API_SCHEMA_VERSION))
    app.state.pipeline = pipeline
    app.state.config = cfg
    write_lock = threading.Lock()

    offset_q = Query(0, ge=0)
    limit_q = Query(100, ge=1, le=MAX_LIMIT)

    # --- ingest ---

    def _process_batch(raw: bytes) -> S.IngestResponse:
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise HTTPException(400, f"body is not UTF-8: {exc}") from exc
        rejected: list[S.Rejection] = []
        frames = []
        line_of: dict[tuple[str, int], int] = {}
        for i, line in enumerate(text.split("\n"), start=1):
            if not line.strip():
                continue
            try:
                frame = decode_frame(line)
            except FrameDecodeError as exc:
                rejected.append(S.Rejection(line=i, reason=str(exc)))
                continue
            cal = cfg.calibrations.get(frame.tray_id)
            if cal is not None:
                expect = raw_to_grams(frame.weight_raw, cal)
                if abs(expect - frame.weight_g) > 0.01:
                    rejected.append(
                        S.Rejection(
                            line=i,
                            tray_id=frame.tray_id,
                            seq=frame.seq,
                            reason=(
                                f"weight_g {frame.weight_g} disagrees with tray "
                                f"calibration ({expect:.3f} g from raw)"
                            ),
                        )
                    )
                    continue
            frames.append(frame)
            line_of.setdefault((frame.tray_id, frame.seq), i)
        with write_lock:
            report = pipeline.ingest(frames)
        for rej in report.rejected:
            rejected.append(
                S.Rejection(
                    line=line_of.get((rej.get("tray_id"), rej.get("seq"))),
                    tray_id=rej.get("tray_id"),
                    seq=rej.get("seq"),
                    reason=rej["reason"],
                )
            )
        return S.IngestResponse(
            accepted=report.accepted,
            duplicates=report.duplicates,
            rejected=rejected,
            events_emitted=len(report.events),
        )

    @app.post("/api/v1/ingest", response_model=S.IngestResponse)
    async def ingest(request: Request):
        raw = await request.body()
        return await run_in_threadpool(_process_batch, raw)

    # --- chemicals ---

    def chemical_row(chemical_id: str, rates, now: int) -> S.ChemicalRow:
        inv = pipeline.inventory
        chem = inv.chemicals[chemical_id]
        report = inv.remaining_quantity(chemical_id)
        est = rates.get(chemical_id)
        rate = est.ewma_g_per_day if est else 0.0
        dte = None
        projected = None
        if est is not None:
            dte = days_to_empty(max(0.0, report.total_g), est)
            if dte is not None and dte < 36_500:  # past ~a century, "never"
                projected = iso(now + int(dte * 86_400_000))[:10]
        locations = sorted({loc for _, loc, _ in report.containers})
        return S.ChemicalRow(
            chemical_id=chemical_id,
            name=chem.name,
            hazard_class=chem.hazard_class,
            unit=chem.unit,
            reorder_lead_time_days=chem.reorder_lead_time_days,
            total_g=report.total_g,
            available_g=report.available_g,
            locations=locations,
            rate_g_per_day=rate,
            days_to_empty=dte,
            projected_empty=projected,
        )

    @app.get("/api/v1/chemicals", response_model=S.ChemicalsResponse)
    def chemicals(offset: int = offset_q, limit: int = limit_q, now: int | None = None):
        t = now if now is not None else now_ms()
        rates = estimate_rates(pipeline.inventory, alpha=cfg.forecast_alpha, upto_ms=t)
        ids = sorted(pipeline.inventory.chemicals)
        total, window = page(ids, offset, limit)
        return S.ChemicalsResponse(
            total=total,
            offset=offset,
            limit=limit,
            chemicals=[chemical_row(cid, rates, t) for cid in window],
        )

    @app.get("/api/v1/chemicals/{chemical_id}/history", response_model=S.HistoryResponse)
    def history(
        chemical_id: str,
        from_ms: int | None = None,
        to_ms: int | None = None,
        offset: int = offset_q,
        limit: int = limit_q,
    ):
        inv = pipeline.inventory
        if chemical_id not in inv.chemicals:
            raise HTTPException(404, f"unknown chemical {chemical_id!r}")
        try:
            entries, daily = inv.consumption_history(chemical_id, from_ms, to_ms)
        except InventoryError as exc:
            raise HTTPException(400, str(exc)) from exc
        total, window = page(entries, offset, limit)
        return S.HistoryResponse(
            chemical_id=chemical_id,
            total=total,
            offset=offset,
            limit=limit,
            entries=[
                S.HistoryEntry(
                    tag_id=e.tag_id,
                    amount_g=e.amount_g,
                    user_badge=e.user_badge,
                    t_out=iso(e.t_out),
                    t_in=iso(e.t_in),
                    refill=e.refill,
                )
                for e in window
            ],
            daily=daily,
        )

    # --- containers ---

    @app.get("/api/v1/containers/{tag_id}", response_model=S.ContainerResponse)
    def container(tag_id: str):
        c = pipeline.inventory.containers.get(tag_id)
        if c is None:
            raise HTTPException(404, f"unknown container {tag_id!r}")
        checkout = None
        if c.checkout is not None:
            checkout = S.CheckoutOut(
                user_badge=c.checkout.user_badge,
                t_out=iso(c.checkout.t_out),
                gross_at_checkout=c.checkout.gross_at_checkout,
            )
        return S.ContainerResponse(
            tag_id=c.tag_id,
            chemical_id=c.chemical_id,
            chemical_name=pipeline.inventory.chemicals[c.chemical_id].name,
            tare_g=c.tare_g,
            gross_g=c.gross_g,
            net_g=c.net_g,
            location=c.location,
            registered_at=iso(c.registered_at),
            checkout=checkout,
        )

    # --- trays ---

    @app.get("/api/v1/trays", response_model=S.TraysResponse)
    def trays():
        rows = [
            S.TrayRow(
                tray_id=tray_id,
                watermark_seq=pipeline.watermarks.get(tray_id, 0),
                events_total=len(pipeline.events_by_tray.get(tray_id, [])),
            )
            for tray_id in sorted(pipeline.trays)
        ]
        return S.TraysResponse(trays=rows)

    @app.get("/api/v1/trays/{tray_id}/events", response_model=S.TrayEventsResponse)
    def tray_events(tray_id: str, offset: int = offset_q, limit: int = limit_q):
        if tray_id not in pipeline.trays:
            raise HTTPException(404, f"unknown tray {tray_id!r}")
        events = pipeline.events_by_tray.get(tray_id, [])
        total, window = page(events, offset, limit)
        return S.TrayEventsResponse(
            tray_id=tray_id,
            total=total,
            offset=offset,
            limit=limit,
            events=[event_out(ev) for ev in window],
        )

    # --- forecasting ---

    @app.get("/api/v1/alerts", response_model=S.AlertsResponse)
    def alerts(now: int | None = None):
        t = now if now is not None else now_ms()
        rates = estimate_rates(pipeline.inventory, alpha=cfg.forecast_alpha, upto_ms=t)
        found = restock_alerts(pipeline.inventory, rates, now_ms=t)
        return S.AlertsResponse(
            alerts=[
                S.AlertOut(
                    chemical_id=a.chemical_id,
                    name=a.name,
                    remaining_g=a.remaining_g,
                    rate_g_per_day=a.rate_g_per_day,
                    days_to_empty=a.days_to_empty,
                    projected_empty=a.projected_empty,
                    reorder_lead_time_days=a.reorder_lead_time_days,
                )
                for a in found
            ]
        )

    # --- ambiguity triage ---

    @app.get("/api/v1/ambiguous", response_model=S.AmbiguousResponse)
    def ambiguous(offset: int = offset_q, limit: int = limit_q):
        records = pipeline.inventory.open_ambiguous()
        total, window = page(records, offset, limit)
        return S.AmbiguousResponse(
            total=total,
            offset=offset,
            limit=limit,
            items=[
                S.AmbiguousItem(
                    event_id=r.event_id, status=r.status, event=event_out(r.event)
                )
                for r in window
            ],
        )

    @app.post("/api/v1/ambiguous/{eid}/resolve", response_model=S.ResolveResponse)
    def resolve(eid: str, body: S.ResolveRequest):
        attribution = [(item.tag_id, item.delta_g) for item in body.attribution]
        with write_lock:
            if eid not in pipeline.inventory.ambiguous:
                raise HTTPException(404, f"no parked event with id {eid!r}")
            try:
                applied = pipeline.resolve(eid, attribution, ts=now_ms())
            except InventoryError as exc:
                raise HTTPException(400, str(exc)) from exc
        return S.ResolveResponse(event_id=eid, applied=[event_out(ev) for ev in applied])

    # --- anomalies ---

    @app.get("/api/v1/anomalies", response_model=S.AnomaliesResponse)
    def anomalies(offset: int = offset_q, limit: int = limit_q):
        records = pipeline.inventory.anomalies
        total, window = page(records, offset, limit)
        return S.AnomaliesResponse(
            total=total,
            offset=offset,
            limit=limit,
            anomalies=[
                S.AnomalyOut(
                    kind=r.kind,
                    detail=r.detail,
                    t=iso(r.t),
                    tray_id=r.tray_id,
                    tag_id=r.tag_id,
                    delta_g=r.delta_g,
                )
                for r in window
            ],
        )

    # --- audit ---

    @app.get("/api/v1/audit/verify", response_model=S.AuditVerifyResponse)
    def audit_verify():
        with write_lock:  # avoid reading a file mid-append
            first_bad = verify_file(pipeline.audit_path)
            entries = len(pipeline.chain)
            head = pipeline.chain.head_hash.hex() if len(pipeline.chain) else None
        return S.AuditVerifyResponse(
            entries=entries,
            ok=first_bad is None,
            first_bad_index=first_bad,
            head_hash=head,
        )

    @app.post("/api/v1/audit/note", response_model=S.NoteResponse, status_code=201)
    def audit_note(payload: dict = Body(...)):
        with write_lock:
            pipeline.add_note(payload, ts=now_ms())
            return S.NoteResponse(audit_index=len(pipeline.chain) - 1)

    # --- registration ---

    @app.post("/api/v1/chemicals", response_model=S.RegisteredResponse, status_code=201)
    def register_chemical(body: S.RegisterChemicalRequest):
        with write_lock:
            try:
                pipeline.register_chemical(
                    body.chemical_id,
                    body.name,
                    hazard_class=body.hazard_class,
                    unit=body.unit,
                    reorder_lead_time_days=body.reorder_lead_time_days,
                    ts=now_ms(),
                )
            except InventoryError as exc:
                raise HTTPException(400, str(exc)) from exc
        return S.RegisteredResponse()

    @app.post("/api/v1/containers", response_model=S.RegisteredResponse, status_code=201)
    def register_container(body: S.RegisterContainerRequest):
        with write_lock:
            try:
                pipeline.register_container(
                    body.tag_id,
                    body.chemical_id,
                    body.tare_g,
                    body.initial_gross_g,
                    ts=now_ms(),
                )
            except InventoryError as exc:
                raise HTTPException(400, str(exc)) from exc
        return S.RegisteredResponse()

    # --- status ---

    @app.get("/api/v1/status", response_model=S.StatusResponse)
    def status():
        inv = pipeline.inventory
        return S.StatusResponse(
            journal_len=pipeline.journal_len,
            audit_entries=len(pipeline.chain),
            trays=len(pipeline.trays),
            chemicals=len(inv.chemicals),
            containers=len(inv.containers),
            open_ambiguous=len(inv.open_ambiguous()),
            anomalies=len(inv.anomalies),
        )

    if cfg.static_dir is not None and cfg.static_dir.is_dir():
        app.mount("/", StaticFiles(directory=cfg.static_dir, html=True), name="static")

    return app
