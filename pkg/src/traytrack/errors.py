"""Shared exception types."""


class TrayTrackError(Exception):
    """Base class for all traytrack errors."""


class ScenarioError(TrayTrackError):
    """Scenario file failed to parse or violates an invariant."""


class FrameDecodeError(TrayTrackError):
    """A telemetry line could not be decoded.

    Carries the offending field name (or None for malformed syntax) and,
    when known, the byte offset within the line.
    """

    def __init__(self, message: str, field: str | None = None, offset: int | None = None):
        super().__init__(message)
        self.field = field
        self.offset = offset


class CalibrationError(TrayTrackError):
    """Raw count outside the ADC range, or an invalid calibration."""


class InventoryError(TrayTrackError):
    """Inventory operation rejected (duplicate tag, unknown id, bad resolution...)."""


class ConfigError(TrayTrackError):
    """Service configuration file is missing, malformed, or inconsistent."""


class AuditError(TrayTrackError):
    """Audit chain operation failed (out-of-range index, bad payload)."""


class StoreError(TrayTrackError):
    """Persistence layer failure (corrupt journal, unusable data directory)."""
