"""Service configuration: a single YAML file describing one deployment.

Top-level keys (everything else is rejected so typos fail loudly):

- ``listen``: "host:port" string for the HTTP server. Default 127.0.0.1:8077.
- ``data_dir``: directory for the journal, snapshot, and audit files. Required.
- ``static_dir``: optional directory of built dashboard assets to serve at /.
- ``snapshot_every``: journal records between snapshots. Default 200.
- ``stability``: event-engine thresholds; keys mirror StabilityConfig fields.
- ``forecast``: ``alpha`` for the consumption-rate smoother. Default 0.3.
- ``trays``: mapping of tray_id -> {tare_offset, scale_g_per_count}. Frames
  from trays not listed here are rejected at ingest.
- ``registry``: optional seed lists (``chemicals``, ``containers``) applied
  once, on first start against an empty journal; edits to this section after
  that are ignored because the journal is the source of truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .engine import StabilityConfig
from .errors import CalibrationError, ConfigError
from .telemetry import Calibration

DEFAULT_LISTEN = "127.0.0.1:8077"
DEFAULT_ALPHA = 0.3
DEFAULT_SNAPSHOT_EVERY = 200

_TOP_KEYS = {
    "listen",
    "data_dir",
    "static_dir",
    "snapshot_every",
    "stability",
    "forecast",
    "trays",
    "registry",
}
_STABILITY_KEYS = {
    "window_frames",
    "stable_range_g",
    "trigger_delta_g",
    "tag_absent_scans",
    "tag_present_scans",
    "pending_timeout_s",
}
_CAL_KEYS = {"tare_offset", "scale_g_per_count"}
_CHEMICAL_KEYS = {"chemical_id", "name", "hazard_class", "unit", "reorder_lead_time_days"}
_CONTAINER_KEYS = {"tag_id", "chemical_id", "tare_g", "initial_gross_g"}


@dataclass
class ServiceConfig:
    data_dir: Path
    host: str = "127.0.0.1"
    port: int = 8077
    static_dir: Path | None = None
    snapshot_every: int = DEFAULT_SNAPSHOT_EVERY
    stability: StabilityConfig = field(default_factory=StabilityConfig)
    forecast_alpha: float = DEFAULT_ALPHA
    calibrations: dict[str, Calibration] = field(default_factory=dict)
    registry_chemicals: list[dict] = field(default_factory=list)
    registry_containers: list[dict] = field(default_factory=list)

    @property
    def tray_ids(self) -> set[str]:
        return set(self.calibrations)


def _require_mapping(value, where: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{where} must be a mapping, got {type(value).__name__}")
    return value


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    return value


def _parse_listen(value) -> tuple[str, int]:
    if not isinstance(value, str) or ":" not in value:
        raise ConfigError(f"listen must look like 'host:port', got {value!r}")
    host, _, port_text = value.rpartition(":")
    try:
        port = int(port_text)
    except ValueError:
        raise ConfigError(f"listen port must be an integer, got {port_text!r}") from None
    if not host or not 0 < port < 65536:
        raise ConfigError(f"listen must look like 'host:port', got {value!r}")
    return host, port


def _parse_stability(raw) -> StabilityConfig:
    data = _require_mapping(raw, "stability")
    unknown = set(data) - _STABILITY_KEYS
    if unknown:
        raise ConfigError(f"unknown stability keys: {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        num = _number(value, f"stability.{key}")
        if key in ("window_frames", "tag_absent_scans", "tag_present_scans"):
            if num != int(num):
                raise ConfigError(f"stability.{key} must be an integer, got {value!r}")
            num = int(num)
        kwargs[key] = num
    return StabilityConfig(**kwargs)


def _parse_trays(raw) -> dict[str, Calibration]:
    data = _require_mapping(raw, "trays")
    cals: dict[str, Calibration] = {}
    for tray_id, spec in data.items():
        if not isinstance(tray_id, str) or not tray_id:
            raise ConfigError(f"tray ids must be non-empty strings, got {tray_id!r}")
        spec = _require_mapping(spec or {}, f"trays.{tray_id}")
        unknown = set(spec) - _CAL_KEYS
        if unknown:
            raise ConfigError(f"trays.{tray_id}: unknown keys {sorted(unknown)}")
        tare = spec.get("tare_offset", 0)
        if isinstance(tare, bool) or not isinstance(tare, int):
            raise ConfigError(f"trays.{tray_id}.tare_offset must be an integer")
        scale = _number(spec.get("scale_g_per_count", 0.001), f"trays.{tray_id}.scale_g_per_count")
        try:
            cals[tray_id] = Calibration(tare_offset=tare, scale_g_per_count=scale)
        except CalibrationError as exc:
            raise ConfigError(f"trays.{tray_id}: {exc}") from exc
    return cals


def _parse_registry(raw) -> tuple[list[dict], list[dict]]:
    data = _require_mapping(raw, "registry")
    unknown = set(data) - {"chemicals", "containers"}
    if unknown:
        raise ConfigError(f"unknown registry keys: {sorted(unknown)}")
    chemicals = []
    for i, entry in enumerate(data.get("chemicals") or []):
        entry = _require_mapping(entry, f"registry.chemicals[{i}]")
        unknown = set(entry) - _CHEMICAL_KEYS
        if unknown:
            raise ConfigError(f"registry.chemicals[{i}]: unknown keys {sorted(unknown)}")
        for req in ("chemical_id", "name"):
            if not isinstance(entry.get(req), str) or not entry[req]:
                raise ConfigError(f"registry.chemicals[{i}].{req} must be a non-empty string")
        chemicals.append(dict(entry))
    containers = []
    for i, entry in enumerate(data.get("containers") or []):
        entry = _require_mapping(entry, f"registry.containers[{i}]")
        missing = _CONTAINER_KEYS - set(entry)
        unknown = set(entry) - _CONTAINER_KEYS
        if missing or unknown:
            raise ConfigError(
                f"registry.containers[{i}]: missing {sorted(missing)}, unknown {sorted(unknown)}"
            )
        for req in ("tag_id", "chemical_id"):
            if not isinstance(entry.get(req), str) or not entry[req]:
                raise ConfigError(f"registry.containers[{i}].{req} must be a non-empty string")
        _number(entry["tare_g"], f"registry.containers[{i}].tare_g")
        _number(entry["initial_gross_g"], f"registry.containers[{i}].initial_gross_g")
        containers.append(dict(entry))
    return chemicals, containers


def config_from_dict(data: dict, base_dir: Path | None = None) -> ServiceConfig:
    data = _require_mapping(data, "config")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "data_dir" not in data:
        raise ConfigError("config requires data_dir")
    if not isinstance(data["data_dir"], str) or not data["data_dir"]:
        raise ConfigError("data_dir must be a non-empty path string")

    base = base_dir or Path.cwd()
    data_dir = (base / data["data_dir"]).resolve()

    host, port = _parse_listen(data.get("listen", DEFAULT_LISTEN))

    static_dir = None
    if data.get("static_dir") is not None:
        if not isinstance(data["static_dir"], str):
            raise ConfigError("static_dir must be a path string")
        static_dir = (base / data["static_dir"]).resolve()

    snapshot_every = data.get("snapshot_every", DEFAULT_SNAPSHOT_EVERY)
    if isinstance(snapshot_every, bool) or not isinstance(snapshot_every, int) or snapshot_every < 1:
        raise ConfigError(f"snapshot_every must be a positive integer, got {snapshot_every!r}")

    stability = _parse_stability(data.get("stability", {}))

    alpha = DEFAULT_ALPHA
    if "forecast" in data:
        fc = _require_mapping(data["forecast"], "forecast")
        unknown = set(fc) - {"alpha"}
        if unknown:
            raise ConfigError(f"unknown forecast keys: {sorted(unknown)}")
        if "alpha" in fc:
            alpha = _number(fc["alpha"], "forecast.alpha")
            if not 0 < alpha <= 1:
                raise ConfigError(f"forecast.alpha must be in (0, 1], got {alpha}")

    calibrations = _parse_trays(data.get("trays", {}))

    chemicals: list[dict] = []
    containers: list[dict] = []
    if "registry" in data:
        chemicals, containers = _parse_registry(data["registry"])

    return ServiceConfig(
        data_dir=data_dir,
        host=host,
        port=port,
        static_dir=static_dir,
        snapshot_every=snapshot_every,
        stability=stability,
        forecast_alpha=alpha,
        calibrations=calibrations,
        registry_chemicals=chemicals,
        registry_containers=containers,
    )


def load_config(path: str | Path) -> ServiceConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"config {path} is not valid YAML{where}: {exc}") from exc
    if data is None:
        raise ConfigError(f"config {path} is empty")
    return config_from_dict(data, base_dir=path.parent)
