"""Request/response models for the HTTP API (all responses carry schema_version)."""

from __future__ import annotations

from pydantic import BaseModel, Field

API_SCHEMA_VERSION = 1


class Versioned(BaseModel):
    schema_version: int = API_SCHEMA_VERSION


# --- ingest ---


class Rejection(BaseModel):
    line: int | None = None  # 1-based line in the posted body, when known
    tray_id: str | None = None
    seq: int | None = None
    reason: str


class IngestResponse(Versioned):
    accepted: int
    duplicates: int
    rejected: list[Rejection]
    events_emitted: int


# --- events ---


class EventOut(BaseModel):
    event_id: str
    tray_id: str
    kind: str
    delta_g: float
    tag_id: str | None
    candidates: list[str]
    candidates_removed: list[str]
    candidates_returned: list[str]
    user_badge: str | None
    t_start: str  # UTC ISO-8601
    t_end: str
    flags: list[str]


class TrayEventsResponse(Versioned):
    tray_id: str
    total: int
    offset: int
    limit: int
    events: list[EventOut]


class TrayRow(BaseModel):
    tray_id: str
    watermark_seq: int
    events_total: int


class TraysResponse(Versioned):
    trays: list[TrayRow]


# --- inventory views ---


class ChemicalRow(BaseModel):
    chemical_id: str
    name: str
    hazard_class: str
    unit: str
    reorder_lead_time_days: float
    total_g: float
    available_g: float
    locations: list[str]
    rate_g_per_day: float
    days_to_empty: float | None
    projected_empty: str | None


class ChemicalsResponse(Versioned):
    total: int
    offset: int
    limit: int
    chemicals: list[ChemicalRow]


class CheckoutOut(BaseModel):
    user_badge: str | None
    t_out: str
    gross_at_checkout: float


class ContainerResponse(Versioned):
    tag_id: str
    chemical_id: str
    chemical_name: str
    tare_g: float
    gross_g: float
    net_g: float
    location: str
    registered_at: str
    checkout: CheckoutOut | None


class HistoryEntry(BaseModel):
    tag_id: str
    amount_g: float
    user_badge: str | None
    t_out: str
    t_in: str
    refill: bool


class HistoryResponse(Versioned):
    chemical_id: str
    total: int
    offset: int
    limit: int
    entries: list[HistoryEntry]
    daily: dict[str, float]  # ISO date -> grams consumed


# --- forecasting ---


class AlertOut(BaseModel):
    chemical_id: str
    name: str
    remaining_g: float
    rate_g_per_day: float
    days_to_empty: float
    projected_empty: str
    reorder_lead_time_days: float


class AlertsResponse(Versioned):
    alerts: list[AlertOut]


# --- ambiguity triage ---


class AmbiguousItem(BaseModel):
    event_id: str
    status: str
    event: EventOut


class AmbiguousResponse(Versioned):
    total: int
    offset: int
    limit: int
    items: list[AmbiguousItem]


class AttributionItem(BaseModel):
    tag_id: str
    delta_g: float


class ResolveRequest(BaseModel):
    attribution: list[AttributionItem] = Field(min_length=1)


class ResolveResponse(Versioned):
    event_id: str
    applied: list[EventOut]


# --- anomalies ---


class AnomalyOut(BaseModel):
    kind: str
    detail: str
    t: str
    tray_id: str | None
    tag_id: str | None
    delta_g: float | None


class AnomaliesResponse(Versioned):
    total: int
    offset: int
    limit: int
    anomalies: list[AnomalyOut]


# --- audit ---


class AuditVerifyResponse(Versioned):
    entries: int
    ok: bool
    first_bad_index: int | None
    head_hash: str | None


# --- registration ---


class RegisterChemicalRequest(BaseModel):
    chemical_id: str = Field(min_length=1)
    name: str = Field(min_length=1)
    hazard_class: str = ""
    unit: str = "g"
    reorder_lead_time_days: float = 3.0


class RegisterContainerRequest(BaseModel):
    tag_id: str = Field(min_length=1)
    chemical_id: str = Field(min_length=1)
    tare_g: float
    initial_gross_g: float


class RegisteredResponse(Versioned):
    ok: bool = True


class NoteResponse(Versioned):
    audit_index: int


# --- service status ---


class StatusResponse(Versioned):
    journal_len: int
    audit_entries: int
    trays: int
    chemicals: int
    containers: int
    open_ambiguous: int
    anomalies: int
