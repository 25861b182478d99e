"""Append-only NDJSON persistence: journal, audit chain file, and snapshots.

The journal is the source of truth.  Every line is a canonical JSON record
``{"n": <index>, "ts": <ms>, "type": <str>, "data": {...}}`` with ``n``
strictly sequential from zero.  State-changing records are mirrored into the
audit chain file; watermark-only records are not.  Snapshots are a pure
optimization — deleting ``snapshot.json`` only makes the next start slower.

Crash behaviour: appends are flushed and fsynced one line at a time, so a
kill can leave at most one partial trailing line, which `read_journal`
detects and `repair_journal` chops off.  A partial line anywhere *else*
means real corruption and raises.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

from .errors import StoreError

JOURNAL_NAME = "journal.ndjson"
SNAPSHOT_NAME = "snapshot.json"
AUDIT_NAME = "audit.ndjson"
ROOTS_NAME = "audit_roots.ndjson"

_RECORD_FIELDS = {"n", "ts", "type", "data"}


def encode_record(n: int, ts: int, rtype: str, data: dict) -> str:
    """Canonical single-line encoding of a journal record."""
    rec = {"n": n, "ts": ts, "type": rtype, "data": data}
    try:
        return json.dumps(rec, sort_keys=True, separators=(",", ":"), allow_nan=False)
    except (TypeError, ValueError) as exc:
        raise StoreError(f"record is not JSON-encodable: {exc}") from exc


def decode_record(line: str) -> dict:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise StoreError(f"bad journal line: {exc}") from exc
    if not isinstance(rec, dict) or set(rec) != _RECORD_FIELDS:
        raise StoreError("journal record must have exactly n, ts, type, data")
    if not isinstance(rec["n"], int) or isinstance(rec["n"], bool):
        raise StoreError("journal record field 'n' must be an integer")
    if not isinstance(rec["ts"], int) or isinstance(rec["ts"], bool):
        raise StoreError("journal record field 'ts' must be an integer")
    if not isinstance(rec["type"], str):
        raise StoreError("journal record field 'type' must be a string")
    if not isinstance(rec["data"], dict):
        raise StoreError("journal record field 'data' must be an object")
    return rec


@dataclass
class JournalScan:
    """Result of reading a journal file tolerantly."""

    records: list[dict]
    clean_bytes: int  # length of the longest valid prefix of the file
    dirty: bool  # True when a partial trailing line was dropped


def append_line(path: Path, line: str) -> None:
    """Append one line and force it to disk before returning."""
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(line + "\n")
        fh.flush()
        os.fsync(fh.fileno())


def read_journal(path: Path) -> JournalScan:
    """Read all complete records, tolerating one partial trailing line.

    Raises StoreError for corruption anywhere before the final line, or for
    records whose ``n`` does not count up from zero.
    """
    if not path.exists():
        return JournalScan([], 0, False)
    raw = path.read_bytes()
    records: list[dict] = []
    clean = 0
    pos = 0
    line_no = 0
    while pos < len(raw):
        nl = raw.find(b"\n", pos)
        if nl == -1:
            # No terminating newline: the append was cut mid-write.  The
            # bytes were never acknowledged, so dropping them is safe even
            # if they happen to parse.
            return JournalScan(records, clean, True)
        chunk = raw[pos:nl]
        try:
            rec = decode_record(chunk.decode("utf-8"))
        except (UnicodeDecodeError, StoreError) as exc:
            raise StoreError(f"journal corrupt at line {line_no + 1}: {exc}") from exc
        if rec["n"] != len(records):
            raise StoreError(
                f"journal line {line_no + 1}: expected n={len(records)}, found n={rec['n']}"
            )
        records.append(rec)
        clean = nl + 1
        pos = nl + 1
        line_no += 1
    return JournalScan(records, clean, False)


def repair_journal(path: Path, scan: JournalScan) -> None:
    """Truncate a journal with a partial trailing line back to its clean prefix."""
    if not scan.dirty:
        return
    with open(path, "r+b") as fh:
        fh.truncate(scan.clean_bytes)
        fh.flush()
        os.fsync(fh.fileno())


def atomic_write_json(path: Path, payload: dict) -> None:
    """Write JSON via a temp file + rename so readers never see a torn file."""
    try:
        text = json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)
    except (TypeError, ValueError) as exc:
        raise StoreError(f"snapshot is not JSON-encodable: {exc}") from exc
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)
    dir_fd = os.open(path.parent, os.O_RDONLY)
    try:
        os.fsync(dir_fd)
    finally:
        os.close(dir_fd)


def read_json(path: Path) -> dict | None:
    """Load a JSON object, returning None when missing or unreadable."""
    if not path.exists():
        return None
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError, UnicodeDecodeError):
        return None
    return data if isinstance(data, dict) else None


def rewrite_file(path: Path, lines: list[str]) -> None:
    """Atomically replace a whole NDJSON file."""
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(line + "\n")
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)
