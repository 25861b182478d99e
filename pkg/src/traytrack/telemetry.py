"""Tray-to-server wire format: frames, ADC calibration, codec, stream checks.

One frame per newline-delimited JSON record, UTF-8, canonical key order
(sorted keys, no insignificant whitespace), versioned with ``"schema": 1``:

    {"schema":1,"seq":3,"tags":["C:A","U:alice"],"timestamp_ms":1767225600300,
     "tray_id":"T1","weight_g":650.0,"weight_raw":650000}

Tag identifiers carry a one-character type prefix: ``C:`` for containers,
``U:`` for user badges. ``weight_g`` is carried redundantly next to
``weight_raw``; a decoder given the tray's calibration recomputes it and
rejects the line when the two disagree by more than 0.01 g.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .errors import CalibrationError, FrameDecodeError

SCHEMA_VERSION = 1

# HX711-class converters produce 24-bit two's-complement counts.
RAW_MIN = -(1 << 23)
RAW_MAX = (1 << 23) - 1

CONTAINER_PREFIX = "C:"
BADGE_PREFIX = "U:"

WEIGHT_MISMATCH_TOLERANCE_G = 0.01


@dataclass(frozen=True, slots=True)
class Calibration:
    """Affine map from raw ADC counts to grams."""

    tare_offset: int = 0
    scale_g_per_count: float = 0.001

    def __post_init__(self):
        if not self.scale_g_per_count > 0:
            raise CalibrationError(
                f"scale_g_per_count must be > 0, got {self.scale_g_per_count}"
            )


@dataclass(frozen=True, slots=True)
class TelemetryFrame:
    """One tray sample: weight in raw counts and grams plus the observed tag set."""

    tray_id: str
    seq: int
    timestamp_ms: int
    weight_raw: int
    weight_g: float
    tags: tuple[str, ...] = ()

    def container_tags(self) -> tuple[str, ...]:
        return tuple(t for t in self.tags if t.startswith(CONTAINER_PREFIX))

    def badge_tags(self) -> tuple[str, ...]:
        return tuple(t for t in self.tags if t.startswith(BADGE_PREFIX))


def raw_to_grams(raw: int, cal: Calibration) -> float:
    """Convert a raw ADC count to grams: ``(raw - tare_offset) * scale``."""
    if not RAW_MIN <= raw <= RAW_MAX:
        raise CalibrationError(
            f"raw count {raw} outside 24-bit range [{RAW_MIN}, {RAW_MAX}]"
        )
    return (raw - cal.tare_offset) * cal.scale_g_per_count


def grams_to_raw(grams: float, cal: Calibration) -> int:
    """Quantize grams to the nearest raw ADC count (inverse of raw_to_grams)."""
    raw = round(grams / cal.scale_g_per_count) + cal.tare_offset
    if not RAW_MIN <= raw <= RAW_MAX:
        raise CalibrationError(
            f"{grams} g maps to raw count {raw}, outside 24-bit range"
        )
    return raw


def _validate_tags(tags: list) -> tuple[str, ...]:
    seen = set()
    for tag in tags:
        if not isinstance(tag, str) or not tag[2:] or tag[:2] not in (CONTAINER_PREFIX, BADGE_PREFIX):
            raise FrameDecodeError(
                f"tag {tag!r} must be a string with a 'C:' or 'U:' prefix", field="tags"
            )
        if tag in seen:
            raise FrameDecodeError(f"duplicate tag {tag!r}", field="tags")
        seen.add(tag)
    return tuple(tags)


def validate_frame(frame: TelemetryFrame) -> TelemetryFrame:
    """Check frame invariants; returns the frame for chaining."""
    if not RAW_MIN <= frame.weight_raw <= RAW_MAX:
        raise FrameDecodeError(
            f"weight_raw {frame.weight_raw} outside 24-bit range", field="weight_raw"
        )
    if not math.isfinite(frame.weight_g):
        raise FrameDecodeError("weight_g must be finite", field="weight_g")
    if frame.seq < 0:
        raise FrameDecodeError("seq must be non-negative", field="seq")
    _validate_tags(list(frame.tags))
    return frame


def encode_frame(frame: TelemetryFrame) -> str:
    """Encode a frame as one canonical JSON line (no trailing newline)."""
    validate_frame(frame)
    record = {
        "schema": SCHEMA_VERSION,
        "seq": frame.seq,
        "tags": list(frame.tags),
        "timestamp_ms": frame.timestamp_ms,
        "tray_id": frame.tray_id,
        "weight_g": frame.weight_g,
        "weight_raw": frame.weight_raw,
    }
    return json.dumps(record, sort_keys=True, separators=(",", ":"), allow_nan=False)


_FIELD_TYPES = {
    "schema": int,
    "seq": int,
    "timestamp_ms": int,
    "tray_id": str,
    "weight_raw": int,
    "weight_g": (int, float),
    "tags": list,
}


def decode_frame(line: str, cal: Calibration | None = None) -> TelemetryFrame:
    """Decode one frame line.

    Raises FrameDecodeError naming the offending field, or carrying the byte
    offset for malformed JSON. When ``cal`` is given, the redundant weight_g
    is recomputed from weight_raw and a mismatch > 0.01 g rejects the line
    (catches calibration drift between device and server).
    """
    try:
        record = json.loads(line, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise FrameDecodeError(f"malformed frame line: {exc.msg}", offset=exc.pos) from exc
    if not isinstance(record, dict):
        raise FrameDecodeError("frame line must be a JSON object")

    for name, types in _FIELD_TYPES.items():
        if name not in record:
            raise FrameDecodeError(f"missing field {name!r}", field=name)
        value = record[name]
        if not isinstance(value, types) or isinstance(value, bool):
            raise FrameDecodeError(f"field {name!r} has wrong type", field=name)
    if record["schema"] != SCHEMA_VERSION:
        raise FrameDecodeError(
            f"unsupported schema version {record['schema']}", field="schema"
        )

    frame = TelemetryFrame(
        tray_id=record["tray_id"],
        seq=record["seq"],
        timestamp_ms=record["timestamp_ms"],
        weight_raw=record["weight_raw"],
        weight_g=float(record["weight_g"]),
        tags=_validate_tags(record["tags"]),
    )
    validate_frame(frame)

    if cal is not None:
        recomputed = raw_to_grams(frame.weight_raw, cal)
        if abs(recomputed - frame.weight_g) > WEIGHT_MISMATCH_TOLERANCE_G:
            raise FrameDecodeError(
                f"weight_g {frame.weight_g} disagrees with raw count "
                f"({recomputed:.4f} g recomputed); calibration drift?",
                field="weight_g",
            )
    return frame


def _reject_constant(name: str):
    raise FrameDecodeError(f"non-finite number {name} not allowed", field="weight_g")


@dataclass(frozen=True, slots=True)
class StreamReport:
    """One integrity finding over a per-tray frame sequence."""

    kind: str  # "gap" or "disorder"
    index: int  # position in the sequence where the finding was made
    seq_before: int
    seq_at: int
    lost_frames: int = 0


def validate_stream(frames: list[TelemetryFrame]) -> list[StreamReport]:
    """Report every seq gap (lost frames) and any non-monotonic seq.

    Frames must share a tray_id.
    """
    reports: list[StreamReport] = []
    if not frames:
        return reports
    tray_id = frames[0].tray_id
    for i, frame in enumerate(frames):
        if frame.tray_id != tray_id:
            raise FrameDecodeError(
                f"stream mixes trays {tray_id!r} and {frame.tray_id!r}", field="tray_id"
            )
        if i == 0:
            continue
        prev = frames[i - 1].seq
        if frame.seq <= prev:
            reports.append(StreamReport("disorder", i, prev, frame.seq))
        elif frame.seq > prev + 1:
            reports.append(StreamReport("gap", i, prev, frame.seq, lost_frames=frame.seq - prev - 1))
    return reports
