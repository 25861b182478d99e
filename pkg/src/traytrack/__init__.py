"""Weight-and-RFID tray telemetry: event detection, inventory, forecasting.

The pieces, roughly in dataflow order:

- ``telemetry``: the frame wire format and calibration math.
- ``simulator``: scripted tray hardware for tests and demos.
- ``engine``: per-tray state machine turning frames into operation events.
- ``inventory``: event-sourced container/chemical state and triage.
- ``forecast``: consumption-rate smoothing and restock alerts.
- ``auditlog``: hash-chained tamper-evident record log.
- ``pipeline`` + ``store``: durable journal wiring all of the above.
- ``service`` + ``cli``: the HTTP API and command-line front ends.
"""

from .engine import OperationEvent, StabilityConfig, TrayTracker
from .errors import (
    AuditError,
    CalibrationError,
    ConfigError,
    FrameDecodeError,
    InventoryError,
    ScenarioError,
    StoreError,
    TrayTrackError,
)
from .inventory import Inventory
from .pipeline import Pipeline
from .telemetry import Calibration, TelemetryFrame, decode_frame, encode_frame

__all__ = [
    "AuditError",
    "Calibration",
    "CalibrationError",
    "ConfigError",
    "FrameDecodeError",
    "Inventory",
    "InventoryError",
    "OperationEvent",
    "Pipeline",
    "ScenarioError",
    "StabilityConfig",
    "StoreError",
    "TelemetryFrame",
    "TrayTracker",
    "TrayTrackError",
    "decode_frame",
    "encode_frame",
]

__version__ = "0.1.0"
