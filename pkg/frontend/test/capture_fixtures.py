#!/usr/bin/env python3
"""Regenerate the JSON fixtures under test/fixtures/ from a real service run.

Boots the HTTP service in-process against a scratch data dir, registers a
small known inventory, streams hand-built noiseless telemetry through
POST /api/v1/ingest, and dumps selected GET responses verbatim. The vitest
suite renders against these files, so every number the dashboard tests
assert on originated from the service, not from hand-written JSON.

Scenario (all weights exact; scale resolution 0.01 g/count):

  shelf-a   acetone  C:ACE1 placed at 150.0 g (tare 50 -> 100.0 g contents);
                     C:ACE2 (tare 20, gross 50 -> 30.0 g) registered but never
                     seen on a tray, so available 100.0 / total 130.0.
  shelf-b   ethanol  C:ETH1 (tare 100) placed at 300.0 g, then:
                     day 1: two take/return cycles consuming 10.0 and 5.0 g
                     day 2: one cycle consuming 10.0 g
                     day 4: returned 125.0 g heavier (a refill)
  shelf-c   toluene  C:TOL1 (150.0 g) and C:TOL2 (100.0 g) placed, then both
                     vanish while the scale drops only 200.0 g -> parked
                     Ambiguous event with candidates {C:TOL1, C:TOL2}.

Run from the repo root:  python3 frontend/test/capture_fixtures.py
"""

import json
import sys
import tempfile
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(REPO_ROOT / "src"))

from fastapi.testclient import TestClient

from traytrack.config import ServiceConfig
from traytrack.engine import StabilityConfig
from traytrack.service.app import create_app
from traytrack.telemetry import Calibration, TelemetryFrame, encode_frame, grams_to_raw

FIXTURES = Path(__file__).resolve().parent / "fixtures"

T0 = 1_767_225_600_000  # 2026-01-01T00:00:00Z
DAY = 86_400_000
NOW = T0 + 7 * DAY + 12 * 3_600_000  # pinned clock so reruns freeze identical bytes
HZ_MS = 100
PHASE_FRAMES = 12  # enough for a 10-frame stability window plus slack

CAL = Calibration(tare_offset=0, scale_g_per_count=0.01)

CHEMICALS = [
    {"chemical_id": "acetone", "name": "Acetone", "hazard_class": "flammable",
     "unit": "g", "reorder_lead_time_days": 3.0},
    {"chemical_id": "etoh", "name": "Ethanol", "hazard_class": "flammable",
     "unit": "g", "reorder_lead_time_days": 50.0},
    {"chemical_id": "toluene", "name": "Toluene", "hazard_class": "toxic",
     "unit": "g", "reorder_lead_time_days": 3.0},
]

CONTAINERS = [
    {"tag_id": "C:ACE1", "chemical_id": "acetone", "tare_g": 50.0, "initial_gross_g": 150.0},
    {"tag_id": "C:ACE2", "chemical_id": "acetone", "tare_g": 20.0, "initial_gross_g": 50.0},
    {"tag_id": "C:ETH1", "chemical_id": "etoh", "tare_g": 100.0, "initial_gross_g": 300.0},
    {"tag_id": "C:TOL1", "chemical_id": "toluene", "tare_g": 50.0, "initial_gross_g": 150.0},
    {"tag_id": "C:TOL2", "chemical_id": "toluene", "tare_g": 30.0, "initial_gross_g": 100.0},
]

# Per tray: (start_ms, weight_g, tags) stable phases, PHASE_FRAMES frames each.
PHASES = {
    "shelf-a": [
        (T0, 0.0, ()),
        (None, 150.0, ("C:ACE1",)),          # place -> Return +150.0
    ],
    "shelf-b": [
        (T0 + 4 * DAY + 9 * 3_600_000, 0.0, ()),
        (None, 300.0, ("C:ETH1",)),          # place -> Return +300.0
        (None, 0.0, ()),                     # take
        (None, 290.0, ("C:ETH1", "U:alice")),  # back: consumed 10.0 (day 1)
        (None, 0.0, ()),
        (None, 285.0, ("C:ETH1", "U:alice")),  # back: consumed 5.0 (day 1)
        (T0 + 5 * DAY + 11 * 3_600_000, 0.0, ()),
        (None, 275.0, ("C:ETH1", "U:bob")),    # back: consumed 10.0 (day 2)
        (T0 + 7 * DAY + 10 * 3_600_000, 0.0, ()),
        (None, 400.0, ("C:ETH1",)),            # back 125.0 heavier: refill (day 4)
    ],
    "shelf-c": [
        (T0 + 4 * DAY + 14 * 3_600_000, 0.0, ()),
        (None, 150.0, ("C:TOL1",)),          # place -> Return +150.0
        (None, 250.0, ("C:TOL1", "C:TOL2")),  # place -> Return +100.0
        (None, 50.0, ()),                    # both gone, only -200.0 observed
    ],
}


def build_frames() -> list[str]:
    lines = []
    for tray_id, phases in PHASES.items():
        seq = 0
        ts = None
        for start, grams, tags in phases:
            ts = start if start is not None else ts
            for _ in range(PHASE_FRAMES):
                frame = TelemetryFrame(
                    tray_id=tray_id,
                    seq=seq,
                    timestamp_ms=ts,
                    weight_raw=grams_to_raw(grams, CAL),
                    weight_g=grams,
                    tags=tuple(tags),
                )
                lines.append(encode_frame(frame))
                seq += 1
                ts += HZ_MS
    return lines


def dump(name: str, payload: dict) -> None:
    path = FIXTURES / name
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path.relative_to(REPO_ROOT)}")


def get(client: TestClient, url: str) -> dict:
    resp = client.get(url)
    resp.raise_for_status()
    return resp.json()


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)

    with tempfile.TemporaryDirectory() as scratch:
        cfg = ServiceConfig(
            data_dir=Path(scratch),
            stability=StabilityConfig(),
            calibrations={t: CAL for t in PHASES},
        )
        with TestClient(create_app(cfg)) as client:
            # An untouched service first: the index page's empty state.
            dump("chemicals_empty.json", get(client, "/api/v1/chemicals"))

            for chem in CHEMICALS:
                client.post("/api/v1/chemicals", json=chem).raise_for_status()
            for cont in CONTAINERS:
                client.post("/api/v1/containers", json=cont).raise_for_status()

            body = "\n".join(build_frames()) + "\n"
            resp = client.post("/api/v1/ingest", content=body.encode())
            resp.raise_for_status()
            stats = resp.json()
            print(f"ingest: {stats}")
            if stats["rejected"]:
                raise SystemExit("fixture scenario produced rejected frames")

            chemicals = get(client, f"/api/v1/chemicals?limit=1000&now={NOW}")
            ambiguous = get(client, "/api/v1/ambiguous")
            history = get(client, "/api/v1/chemicals/etoh/history")

            # The scenario is hand-designed around these values; refuse to
            # freeze fixtures that drifted.
            by_id = {c["chemical_id"]: c for c in chemicals["chemicals"]}
            assert by_id["acetone"]["available_g"] == 100.0, by_id["acetone"]
            assert by_id["acetone"]["total_g"] == 130.0, by_id["acetone"]
            etoh = by_id["etoh"]
            assert etoh["days_to_empty"] is not None, etoh
            assert 0 < etoh["days_to_empty"] <= etoh["reorder_lead_time_days"], etoh
            assert history["daily"]["2026-01-05"] == 15.0, history["daily"]
            assert len(ambiguous["items"]) == 1, ambiguous
            amb = ambiguous["items"][0]["event"]
            assert amb["delta_g"] == -200.0, amb
            assert sorted(amb["candidates"]) == ["C:TOL1", "C:TOL2"], amb

            dump("chemicals.json", chemicals)
            dump("history_etoh.json", history)
            dump("ambiguous.json", ambiguous)
            dump("status.json", get(client, "/api/v1/status"))


if __name__ == "__main__":
    main()
