"""Scenario-driven tray simulator.

Generates telemetry frames from a scripted sequence of physical actions
(place / remove / dispense_in_place), with configurable load-cell noise,
ADC quantization through the calibration round trip, settling transients,
and probabilistic RFID reads. Also produces the ground-truth event list a
perfect detector would recover, for use as a test oracle.

Scenario files are YAML, versioned with ``schema: 1``:

    schema: 1
    tray_id: T1
    base_weight_g: 500.0
    sample_rate_hz: 10
    duration_s: 60.0
    seed: 42
    noise: {weight_sigma_g: 0.2, tag_read_prob: 0.95, spurious_tag_prob: 0.0}
    actions:
      - {time_s: 5.0, kind: place, tag_id: "C:A", gross_g: 150.0, settle_s: 0.5}
      - {time_s: 20.0, kind: remove, tag_id: "C:A", settle_s: 0.5}

Settling transients decay exponentially toward the new weight with time
constant ``settle_s / 3``; spurious reads draw from a reserved ghost-tag
namespace so tests can verify they are debounced away.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .errors import ScenarioError
from .telemetry import (
    CONTAINER_PREFIX,
    Calibration,
    TelemetryFrame,
    grams_to_raw,
    raw_to_grams,
)

SCENARIO_SCHEMA_VERSION = 1

# Fixed simulated epoch so frame streams are reproducible byte-for-byte.
SIM_EPOCH_MS = 1_767_225_600_000  # 2026-01-01T00:00:00Z

GHOST_TAG_PREFIX = CONTAINER_PREFIX + "ghost-"
_GHOST_NAMESPACE = 8

ACTION_KINDS = ("place", "remove", "dispense_in_place")


def is_ghost_tag(tag: str) -> bool:
    return tag.startswith(GHOST_TAG_PREFIX)


@dataclass(frozen=True, slots=True)
class NoiseModel:
    weight_sigma_g: float = 0.2
    tag_read_prob: float = 0.95
    spurious_tag_prob: float = 0.0

    def __post_init__(self):
        if self.weight_sigma_g < 0:
            raise ScenarioError(f"noise.weight_sigma_g must be >= 0, got {self.weight_sigma_g}")
        for name in ("tag_read_prob", "spurious_tag_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ScenarioError(f"noise.{name} must be in [0, 1], got {p}")


@dataclass(frozen=True, slots=True)
class ScriptAction:
    time_s: float
    kind: str
    tag_id: str
    gross_g: float | None = None
    delta_g: float | None = None
    settle_s: float = 0.0

    def __post_init__(self):
        if self.kind not in ACTION_KINDS:
            raise ScenarioError(f"action kind must be one of {ACTION_KINDS}, got {self.kind!r}")
        if not self.tag_id.startswith(CONTAINER_PREFIX):
            raise ScenarioError(f"action tag_id must carry the 'C:' prefix, got {self.tag_id!r}")
        if self.settle_s < 0:
            raise ScenarioError(f"settle_s must be >= 0, got {self.settle_s}")
        if self.kind == "place" and (self.gross_g is None or self.gross_g <= 0):
            raise ScenarioError(f"place of {self.tag_id} needs gross_g > 0, got {self.gross_g}")
        if self.kind == "dispense_in_place" and self.delta_g is None:
            raise ScenarioError(f"dispense_in_place of {self.tag_id} needs delta_g")


@dataclass(frozen=True, slots=True)
class ScenarioScript:
    tray_id: str
    base_weight_g: float
    sample_rate_hz: float
    duration_s: float
    actions: tuple[ScriptAction, ...] = ()
    noise: NoiseModel = field(default_factory=NoiseModel)
    seed: int = 0

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise ScenarioError(f"sample_rate_hz must be > 0, got {self.sample_rate_hz}")
        if self.duration_s < 0:
            raise ScenarioError(f"duration_s must be >= 0, got {self.duration_s}")
        if self.base_weight_g < 0:
            raise ScenarioError(f"base_weight_g must be >= 0, got {self.base_weight_g}")
        if self.seed < 0:
            raise ScenarioError(f"seed must be an unsigned integer, got {self.seed}")
        _check_action_consistency(self)

    @property
    def frame_count(self) -> int:
        return round(self.duration_s * self.sample_rate_hz)


def _check_action_consistency(script: ScenarioScript) -> None:
    last_t = -math.inf
    on_tray: set[str] = set()
    for i, act in enumerate(script.actions):
        if act.time_s < last_t:
            raise ScenarioError(f"actions not sorted by time at index {i} (t={act.time_s})")
        last_t = act.time_s
        if not 0.0 <= act.time_s <= script.duration_s:
            raise ScenarioError(
                f"action at index {i} has time {act.time_s} outside [0, {script.duration_s}]"
            )
        if act.kind == "place":
            if act.tag_id in on_tray:
                raise ScenarioError(f"place of tag already on tray: {act.tag_id} at t={act.time_s}")
            on_tray.add(act.tag_id)
        elif act.kind == "remove":
            if act.tag_id not in on_tray:
                raise ScenarioError(f"remove of absent tag: {act.tag_id} at t={act.time_s}")
            on_tray.discard(act.tag_id)
        else:  # dispense_in_place
            if act.tag_id not in on_tray:
                raise ScenarioError(f"dispense on absent tag: {act.tag_id} at t={act.time_s}")


@dataclass(frozen=True, slots=True)
class TruthEvent:
    """What a perfect detector would report for one scripted action."""

    time_s: float
    kind: str  # Remove / Return / Adjust
    tag_id: str
    delta_g: float


def ground_truth(script: ScenarioScript) -> list[TruthEvent]:
    """Expected classification and delta for every action, by script bookkeeping."""
    truth: list[TruthEvent] = []
    gross: dict[str, float] = {}
    for act in script.actions:
        if act.kind == "place":
            gross[act.tag_id] = act.gross_g
            truth.append(TruthEvent(act.time_s, "Return", act.tag_id, +act.gross_g))
        elif act.kind == "remove":
            g = gross.pop(act.tag_id)
            truth.append(TruthEvent(act.time_s, "Remove", act.tag_id, -g))
        else:
            gross[act.tag_id] += act.delta_g
            truth.append(TruthEvent(act.time_s, "Adjust", act.tag_id, act.delta_g))
    return truth


def load_scenario(path: str | Path) -> ScenarioScript:
    """Load and validate a scenario file."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ScenarioError(f"scenario file not found: {path}") from None
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}" if mark else ""
        raise ScenarioError(f"scenario parse error{where}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ScenarioError("scenario file must be a mapping")
    return scenario_from_dict(raw)


def scenario_from_dict(raw: dict) -> ScenarioScript:
    if raw.get("schema") != SCENARIO_SCHEMA_VERSION:
        raise ScenarioError(
            f"unsupported scenario schema {raw.get('schema')!r}, expected {SCENARIO_SCHEMA_VERSION}"
        )
    required = ("tray_id", "base_weight_g", "sample_rate_hz", "duration_s")
    for name in required:
        if name not in raw:
            raise ScenarioError(f"scenario missing field {name!r}")
    known = set(required) | {"schema", "actions", "noise", "seed"}
    extra = set(raw) - known
    if extra:
        raise ScenarioError(f"scenario has unknown fields: {sorted(extra)}")

    noise_raw = raw.get("noise") or {}
    if not isinstance(noise_raw, dict):
        raise ScenarioError("noise must be a mapping")
    try:
        noise = NoiseModel(**noise_raw)
    except TypeError as exc:
        raise ScenarioError(f"bad noise field: {exc}") from exc

    actions = []
    for i, entry in enumerate(raw.get("actions") or []):
        if not isinstance(entry, dict):
            raise ScenarioError(f"action at index {i} must be a mapping")
        try:
            actions.append(ScriptAction(**entry))
        except TypeError as exc:
            raise ScenarioError(f"bad action at index {i}: {exc}") from exc

    try:
        return ScenarioScript(
            tray_id=str(raw["tray_id"]),
            base_weight_g=float(raw["base_weight_g"]),
            sample_rate_hz=float(raw["sample_rate_hz"]),
            duration_s=float(raw["duration_s"]),
            actions=tuple(actions),
            noise=noise,
            seed=int(raw.get("seed", 0)),
        )
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"bad scenario field: {exc}") from exc


@dataclass(slots=True)
class _Transient:
    start_s: float
    amplitude_g: float
    tau_s: float


class TraySimulator:
    """Frame generator for one scenario; step() yields frames in time order.

    Weights pass through a grams -> raw counts -> grams round trip against
    the given calibration, so the stream carries genuine quantization.
    """

    def __init__(self, script: ScenarioScript, calibration: Calibration | None = None):
        self.script = script
        self.calibration = calibration or Calibration()
        self._rng = random.Random(script.seed)
        self._frame_idx = 0
        self._action_idx = 0
        self._on_tray: dict[str, float] = {}
        self._target_g = script.base_weight_g
        self._transients: list[_Transient] = []

    def _apply_action(self, act: ScriptAction) -> None:
        if act.kind == "place":
            self._on_tray[act.tag_id] = act.gross_g
        elif act.kind == "remove":
            del self._on_tray[act.tag_id]
        else:
            self._on_tray[act.tag_id] += act.delta_g
        new_target = self.script.base_weight_g + sum(self._on_tray.values())
        step = new_target - self._target_g
        if act.settle_s > 0 and step != 0.0:
            # Exponential approach to the new weight, continuous at the step.
            self._transients.append(_Transient(act.time_s, -step, act.settle_s / 3.0))
        self._target_g = new_target

    def _noiseless_weight(self, t: float) -> float:
        w = self._target_g
        if self._transients:
            live = []
            for tr in self._transients:
                contrib = tr.amplitude_g * math.exp(-(t - tr.start_s) / tr.tau_s)
                if abs(contrib) > 1e-9:
                    live.append(tr)
                    w += contrib
            self._transients = live
        return w

    def step(self) -> TelemetryFrame | None:
        """Produce the next frame, or None once the clock passes the duration."""
        if self._frame_idx >= self.script.frame_count:
            return None
        t = self._frame_idx / self.script.sample_rate_hz
        actions = self.script.actions
        while self._action_idx < len(actions) and actions[self._action_idx].time_s <= t:
            self._apply_action(actions[self._action_idx])
            self._action_idx += 1

        w = self._noiseless_weight(t)
        noise = self.script.noise
        if noise.weight_sigma_g > 0:
            w += self._rng.gauss(0.0, noise.weight_sigma_g)
        raw = grams_to_raw(w, self.calibration)
        weight_g = raw_to_grams(raw, self.calibration)

        tags = []
        for tag in self._on_tray:
            if noise.tag_read_prob >= 1.0 or self._rng.random() < noise.tag_read_prob:
                tags.append(tag)
        if noise.spurious_tag_prob > 0 and self._rng.random() < noise.spurious_tag_prob:
            ghost = f"{GHOST_TAG_PREFIX}{self._rng.randrange(_GHOST_NAMESPACE)}"
            if ghost not in tags:
                tags.append(ghost)

        frame = TelemetryFrame(
            tray_id=self.script.tray_id,
            seq=self._frame_idx + 1,
            timestamp_ms=SIM_EPOCH_MS + round(t * 1000),
            weight_raw=raw,
            weight_g=weight_g,
            tags=tuple(tags),
        )
        self._frame_idx += 1
        return frame


def run(
    script: ScenarioScript, calibration: Calibration | None = None
) -> tuple[list[TelemetryFrame], list[TruthEvent]]:
    """Simulate the whole scenario: full frame stream plus ground truth."""
    sim = TraySimulator(script, calibration)
    frames = []
    while (frame := sim.step()) is not None:
        frames.append(frame)
    return frames, ground_truth(script)
