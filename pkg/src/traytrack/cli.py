"""Command-line entry points: simulate, serve, replay, verify-audit, forecast.

Every subcommand is a thin wrapper over the library modules. Failures exit
nonzero and print the error class name so scripts can branch on it.
"""

from __future__ import annotations

import json
import sys
import tempfile
import time
from pathlib import Path

import click

from .auditlog import verify_file
from .config import load_config
from .engine import event_to_dict
from .errors import TrayTrackError
from .forecast import days_to_empty, estimate_rates, restock_alerts
from .pipeline import Pipeline
from .simulator import load_scenario, run
from .telemetry import decode_frame, encode_frame, raw_to_grams


def _fail(exc: Exception) -> None:
    click.echo(f"{type(exc).__name__}: {exc}", err=True)
    sys.exit(2)


def _canonical(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"), allow_nan=False)


@click.group()
def main():
    """Tray telemetry tooling: simulate, serve, replay, verify, forecast."""


@main.command()
@click.argument("scenario", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="Frames file to write (default: <scenario>.frames.ndjson).")
def simulate(scenario, out_path):
    """Render a scenario script into a telemetry frames file."""
    try:
        script = load_scenario(scenario)
        frames, truth = run(script)
    except TrayTrackError as exc:
        _fail(exc)
    out = Path(out_path) if out_path else Path(scenario).with_suffix(".frames.ndjson")
    with open(out, "w", encoding="utf-8") as fh:
        for frame in frames:
            fh.write(encode_frame(frame) + "\n")
    click.echo(f"wrote {len(frames)} frames to {out} ({len(truth)} scripted operations)")


@main.command()
@click.argument("config_path", metavar="CONFIG", type=click.Path(exists=True, dir_okay=False))
def serve(config_path):
    """Run the HTTP service described by CONFIG."""
    import uvicorn

    from .service import create_app

    try:
        cfg = load_config(config_path)
        app = create_app(cfg)
    except TrayTrackError as exc:
        _fail(exc)
    uvicorn.run(app, host=cfg.host, port=cfg.port)


def _decode_lines(lines, calibrations):
    """(frames, rejection messages). Mirrors the service's per-line checks."""
    frames, rejects = [], []
    for i, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            frame = decode_frame(line)
        except TrayTrackError as exc:
            rejects.append(f"line {i}: {exc}")
            continue
        cal = calibrations.get(frame.tray_id)
        if cal is not None:
            expect = raw_to_grams(frame.weight_raw, cal)
            if abs(expect - frame.weight_g) > 0.01:
                rejects.append(
                    f"line {i}: weight_g {frame.weight_g} disagrees with tray "
                    f"calibration ({expect:.3f} g from raw)"
                )
                continue
        frames.append(frame)
    return frames, rejects


@main.command()
@click.argument("frames_path", metavar="FRAMES", type=click.Path(exists=True, dir_okay=False))
@click.argument("config_path", metavar="CONFIG", type=click.Path(exists=True, dir_okay=False))
def replay(frames_path, config_path):
    """Run the full pipeline offline over FRAMES; print events and inventory.

    State goes to a throwaway directory, so the output is a pure function of
    the frames file and the config: EVENT lines in order, then one INVENTORY
    line with the final snapshot.
    """
    try:
        cfg = load_config(config_path)
        lines = Path(frames_path).read_text(encoding="utf-8").split("\n")
        frames, rejects = _decode_lines(lines, cfg.calibrations)
        with tempfile.TemporaryDirectory(prefix="traytrack-replay-") as scratch:
            pipe = Pipeline(
                Path(scratch) / "data",
                trays=cfg.tray_ids,
                cfg=cfg.stability,
                snapshot_every=cfg.snapshot_every,
            )
            pipe.seed_registry(cfg.registry_chemicals, cfg.registry_containers)
            report = pipe.ingest(frames)
            snapshot = pipe.inventory.snapshot()
    except TrayTrackError as exc:
        _fail(exc)
    for msg in rejects:
        click.echo(f"rejected {msg}", err=True)
    for rej in report.rejected:
        click.echo(f"rejected tray {rej['tray_id']} seq {rej['seq']}: {rej['reason']}", err=True)
    for ev in report.events:
        click.echo("EVENT " + _canonical(event_to_dict(ev)))
    click.echo("INVENTORY " + _canonical(snapshot))


@main.command("verify-audit")
@click.argument("chain", type=click.Path(exists=True, dir_okay=False))
def verify_audit(chain):
    """Check an audit chain file; exit 1 with the first bad index if broken."""
    try:
        bad = verify_file(chain)
    except TrayTrackError as exc:
        _fail(exc)
    if bad is None:
        count = sum(1 for line in Path(chain).read_text(encoding="utf-8").splitlines() if line)
        click.echo(f"ok: {count} entries")
        return
    click.echo(f"first bad entry: {bad}")
    sys.exit(1)


@main.command()
@click.argument("config_path", metavar="CONFIG", type=click.Path(exists=True, dir_okay=False))
@click.option("--now", "now_ms", type=int, default=None,
              help="Clock for the projection, epoch ms (default: wall time).")
def forecast(config_path, now_ms):
    """Print consumption rates and restock alerts for the configured data."""
    try:
        cfg = load_config(config_path)
        pipe = Pipeline(
            cfg.data_dir,
            trays=cfg.tray_ids,
            cfg=cfg.stability,
            snapshot_every=cfg.snapshot_every,
        )
        pipe.seed_registry(cfg.registry_chemicals, cfg.registry_containers)
    except TrayTrackError as exc:
        _fail(exc)
    now = now_ms if now_ms is not None else int(time.time() * 1000)
    rates = estimate_rates(pipe.inventory, alpha=cfg.forecast_alpha, upto_ms=now)
    alerted = {a.chemical_id for a in restock_alerts(pipe.inventory, rates, now_ms=now)}
    for chemical_id in sorted(pipe.inventory.chemicals):
        est = rates[chemical_id]
        remaining = max(0.0, pipe.inventory.remaining_quantity(chemical_id).total_g)
        click.echo(
            _canonical(
                {
                    "chemical_id": chemical_id,
                    "remaining_g": remaining,
                    "rate_g_per_day": est.ewma_g_per_day,
                    "days_to_empty": days_to_empty(remaining, est),
                    "alert": chemical_id in alerted,
                }
            )
        )


if __name__ == "__main__":
    main()
