"""Tamper-evident hash chain over inventory activity.

Every entry hashes the previous entry's hash, the canonical bytes of a
``{"ts": ..., "body": ...}`` envelope, and its own index:

    entry_hash = SHA-256(prev_hash || canonical(envelope) || index_be64)

with 32 zero bytes as the genesis prev_hash. The timestamp lives inside the
hashed envelope so edits to it are as detectable as edits to the payload.

The chain file holds one canonical JSON line per entry. verify_file also
re-encodes each parsed line and compares it byte-for-byte against the file,
so even mutations that json parsing would forgive (hex case, number
spelling) are caught. Checkpoint roots — the head hash at a given index —
can be exported to a sidecar file for external anchoring.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import AuditError

GENESIS_PREV = b"\x00" * 32


def canonical_payload(payload, timestamp_ms: int) -> bytes:
    """Canonical hashed bytes for one entry; rejects non-encodable payloads."""
    try:
        return json.dumps(
            {"ts": timestamp_ms, "body": payload},
            sort_keys=True,
            separators=(",", ":"),
            allow_nan=False,
        ).encode()
    except (TypeError, ValueError) as exc:
        raise AuditError(f"payload cannot be canonicalized: {exc}") from exc


def entry_hash(prev_hash: bytes, payload, timestamp_ms: int, index: int) -> bytes:
    if index < 0:
        raise AuditError(f"index must be >= 0, got {index}")
    blob = prev_hash + canonical_payload(payload, timestamp_ms) + index.to_bytes(8, "big")
    return hashlib.sha256(blob).digest()


@dataclass(frozen=True, slots=True)
class AuditEntry:
    index: int
    timestamp_ms: int
    payload: dict
    prev_hash: bytes
    entry_hash: bytes


class AuditChain:
    """In-memory chain; append is O(1), verify walks the whole chain."""

    def __init__(self, entries: list[AuditEntry] | None = None):
        self.entries: list[AuditEntry] = entries or []

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def head_hash(self) -> bytes:
        return self.entries[-1].entry_hash if self.entries else GENESIS_PREV

    def append(self, payload, timestamp_ms: int) -> AuditEntry:
        index = len(self.entries)
        prev = self.head_hash
        entry = AuditEntry(
            index=index,
            timestamp_ms=timestamp_ms,
            payload=payload,
            prev_hash=prev,
            entry_hash=entry_hash(prev, payload, timestamp_ms, index),
        )
        self.entries.append(entry)
        return entry


def verify_chain(chain: AuditChain) -> int | None:
    """None when every hash and link holds; else the first bad index."""
    prev = GENESIS_PREV
    for pos, entry in enumerate(chain.entries):
        if entry.index != pos or entry.prev_hash != prev:
            return pos
        try:
            expected = entry_hash(prev, entry.payload, entry.timestamp_ms, pos)
        except AuditError:
            return pos
        if entry.entry_hash != expected:
            return pos
        prev = entry.entry_hash
    return None


def checkpoint_root(chain: AuditChain, upto: int) -> bytes:
    """Head hash at index upto — a commitment to the whole prefix."""
    if not 0 <= upto < len(chain.entries):
        raise AuditError(f"checkpoint index {upto} outside chain of length {len(chain.entries)}")
    return chain.entries[upto].entry_hash


# --- file form ---


def _strict_hex(value, name: str, line_no: int) -> bytes:
    if not isinstance(value, str) or len(value) != 64 or value != value.lower():
        raise AuditError(f"line {line_no}: field {name!r} is not lowercase 64-char hex")
    try:
        return bytes.fromhex(value)
    except ValueError:
        raise AuditError(f"line {line_no}: field {name!r} is not hex") from None


def entry_to_line(entry: AuditEntry) -> str:
    return json.dumps(
        {
            "entry_hash": entry.entry_hash.hex(),
            "index": entry.index,
            "payload": entry.payload,
            "prev_hash": entry.prev_hash.hex(),
            "ts": entry.timestamp_ms,
        },
        sort_keys=True,
        separators=(",", ":"),
        allow_nan=False,
    )


_LINE_FIELDS = {"entry_hash", "index", "payload", "prev_hash", "ts"}


def entry_from_line(line: str, line_no: int = 0) -> AuditEntry:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as exc:
        raise AuditError(f"line {line_no}: malformed entry: {exc.msg}") from exc
    if not isinstance(record, dict) or set(record) != _LINE_FIELDS:
        raise AuditError(f"line {line_no}: entry fields must be exactly {sorted(_LINE_FIELDS)}")
    if not isinstance(record["index"], int) or isinstance(record["index"], bool):
        raise AuditError(f"line {line_no}: index must be an integer")
    if not isinstance(record["ts"], int) or isinstance(record["ts"], bool):
        raise AuditError(f"line {line_no}: ts must be integer milliseconds")
    return AuditEntry(
        index=record["index"],
        timestamp_ms=record["ts"],
        payload=record["payload"],
        prev_hash=_strict_hex(record["prev_hash"], "prev_hash", line_no),
        entry_hash=_strict_hex(record["entry_hash"], "entry_hash", line_no),
    )


def load_chain(path: str | Path) -> AuditChain:
    """Parse a chain file; malformed lines raise (use verify_file to locate)."""
    entries = []
    text = Path(path).read_text(encoding="utf-8")
    for i, line in enumerate(text.splitlines()):
        if line:
            entries.append(entry_from_line(line, i))
    return AuditChain(entries)


def verify_file(path: str | Path) -> int | None:
    """Full integrity check of a chain file; None or the first bad index.

    Each line must decode, parse, re-encode to exactly the bytes on disk,
    and carry hashes that recompute. Any single-byte change to the file
    trips at least one of those at or before the edited entry.
    """
    raw = Path(path).read_bytes()
    chunks = raw.split(b"\n")
    if chunks and chunks[-1] == b"":
        chunks.pop()  # the file's trailing newline
    prev = GENESIS_PREV
    for pos, raw_line in enumerate(chunks):
        try:
            line = raw_line.decode("utf-8")
            entry = entry_from_line(line, pos)
        except (UnicodeDecodeError, AuditError):
            return pos
        if entry_to_line(entry) != line:
            return pos  # not in canonical form: the file was edited
        if entry.index != pos or entry.prev_hash != prev:
            return pos
        try:
            expected = entry_hash(prev, entry.payload, entry.timestamp_ms, pos)
        except AuditError:
            return pos
        if entry.entry_hash != expected:
            return pos
        prev = entry.entry_hash
    return None


def write_root(path: str | Path, index: int, root: bytes) -> None:
    """Append one checkpoint root to the sidecar file."""
    line = json.dumps({"index": index, "root": root.hex()}, sort_keys=True, separators=(",", ":"))
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(line + "\n")
