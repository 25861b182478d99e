"""Per-tray operation detection.

Each tray gets a TrayTracker fed frames in seq order. While the weight sits
inside a stable band the tracker is IDLE; a weight excursion opens a PENDING
window during which tag reads are accumulated; when the weight re-stabilizes
the window closes and the weight delta is matched against the debounced tag
changes and last-known container grosses to classify what happened: Remove,
Return, Adjust, Ambiguous, or Anomaly.

Tag presence is debounced against UHF read dropouts: a tag latches present
after M consecutive hits and is declared absent only after N consecutive
misses. Spurious or flickering tags that the weight cannot corroborate are
suppressed rather than reported.

The baseline weight moves only when a window emits events, so the attributed
deltas telescope: their sum always equals the net baseline movement.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Mapping

from .errors import ConfigError, TrayTrackError
from .telemetry import CONTAINER_PREFIX, BADGE_PREFIX, TelemetryFrame

IDLE = "IDLE"
PENDING = "PENDING"

REMOVE = "Remove"
RETURN = "Return"
ADJUST = "Adjust"
AMBIGUOUS = "Ambiguous"
ANOMALY = "Anomaly"

EVENT_KINDS = (REMOVE, RETURN, ADJUST, AMBIGUOUS, ANOMALY)

# Per-container slack when explaining a weight delta by last-known grosses.
ATTRIBUTION_TOL_G = 0.5

# Multi-tag windows beyond this many changed tags are not worth a subset
# search; they go straight to Ambiguous.
_MAX_SUBSET_TAGS = 10


@dataclass(frozen=True, slots=True)
class StabilityConfig:
    window_frames: int = 10
    stable_range_g: float = 0.5
    trigger_delta_g: float = 1.0
    tag_absent_scans: int = 3
    tag_present_scans: int = 2
    pending_timeout_s: float = 120.0

    def __post_init__(self):
        for name in (
            "window_frames",
            "stable_range_g",
            "trigger_delta_g",
            "tag_absent_scans",
            "tag_present_scans",
            "pending_timeout_s",
        ):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.trigger_delta_g < self.stable_range_g:
            raise ConfigError("trigger_delta_g must be >= stable_range_g")


@dataclass(frozen=True, slots=True)
class OperationEvent:
    """Classified outcome of one pending window.

    Ambiguous events carry the full candidate set plus its split into tags
    that went missing vs. tags that appeared, so a human resolution can be
    applied with the right checkout semantics.
    """

    tray_id: str
    kind: str
    delta_g: float
    tag_id: str | None = None
    candidates: tuple[str, ...] = ()
    candidates_removed: tuple[str, ...] = ()
    candidates_returned: tuple[str, ...] = ()
    user_badge: str | None = None
    t_start: int = 0
    t_end: int = 0
    flags: tuple[str, ...] = ()


@dataclass(slots=True)
class PendingWindow:
    """Open operation: pre-event weight and tag set, plus what was seen since."""

    tray_id: str
    started_at: int
    w0: float
    tags_before: frozenset[str]
    tags_seen: set[str] = field(default_factory=set)
    badge_seen: str | None = None
    last_ts: int = 0
    gap_frames: int = 0


def is_stable(window, cfg: StabilityConfig) -> bool:
    """True iff the window is full and max - min <= stable_range_g."""
    samples = list(window)
    if len(samples) < cfg.window_frames:
        return False
    return max(samples) - min(samples) <= cfg.stable_range_g


class TagDebouncer:
    """Streak-count debounce: M consecutive hits to latch, N misses to drop."""

    __slots__ = ("present", "_hits", "_misses", "_m", "_n")

    def __init__(self, cfg: StabilityConfig):
        self.present: set[str] = set()
        self._hits: dict[str, int] = {}
        self._misses: dict[str, int] = {}
        self._m = cfg.tag_present_scans
        self._n = cfg.tag_absent_scans

    def scan(self, tags) -> None:
        seen = set(tags)
        hits = self._hits
        misses = self._misses
        present = self.present
        for tag in seen:
            misses[tag] = 0
            streak = hits.get(tag, 0) + 1
            hits[tag] = streak
            if streak >= self._m:
                present.add(tag)
        for tag in (present | hits.keys()) - seen:
            if tag in present:
                hits[tag] = 0
                streak = misses.get(tag, 0) + 1
                if streak >= self._n:
                    present.discard(tag)
                    hits.pop(tag, None)
                    misses.pop(tag, None)
                else:
                    misses[tag] = streak
            else:
                hits.pop(tag, None)  # never latched; forget the streak
                misses.pop(tag, None)

    def force_present(self, tag: str) -> None:
        self.present.add(tag)
        self._hits[tag] = self._m
        self._misses[tag] = 0

    def force_absent(self, tag: str) -> None:
        self.present.discard(tag)
        self._hits.pop(tag, None)
        self._misses.pop(tag, None)


def debounce(scans, cfg: StabilityConfig) -> frozenset[str]:
    """Replay a sequence of scans (each an iterable of tag ids) from scratch."""
    deb = TagDebouncer(cfg)
    for tags in scans:
        deb.scan(tags)
    return frozenset(deb.present)


def _best_subset(tags: list[str], delta: float, registry, tol: float):
    """Find the unique subset of tags whose grosses explain delta.

    Returns the subset as a list, or None when nothing fits or the best fit
    is shared by two different subsets (never guess between them).
    """
    n = len(tags)
    if n > _MAX_SUBSET_TAGS:
        return None
    grosses = [registry[t] for t in tags]
    best: list[str] | None = None
    best_resid = float("inf")
    tie = False
    for mask in range(1 << n):
        total = 0.0
        for i in range(n):
            if mask >> i & 1:
                total += grosses[i]
        resid = abs(delta + total)
        if resid > tol * max(1, mask.bit_count()):
            continue
        if resid < best_resid - 1e-9:
            best = [tags[i] for i in range(n) if mask >> i & 1]
            best_resid = resid
            tie = False
        elif resid <= best_resid + 1e-9:
            tie = True
    if best is None or tie:
        return None
    return best


def classify(
    pending: PendingWindow,
    w1: float,
    tags_after,
    registry: Mapping[str, float],
    cfg: StabilityConfig,
) -> list[OperationEvent]:
    """Turn a closed pending window into zero or more events.

    Case table over (removed, returned, delta): single-tag changes attribute
    the measured delta directly; multi-tag changes are decomposed only when
    last-known grosses explain the delta within per-container tolerance,
    otherwise Ambiguous. Sign contradictions and timeouts become Anomaly.
    Tag flips that the weight cannot corroborate (|delta| inside the stable
    band) produce no event at all.
    """
    delta = w1 - pending.w0
    after = frozenset(tags_after)
    removed = sorted(pending.tags_before - after)
    returned = sorted(after - pending.tags_before)
    eps = cfg.stable_range_g
    # Frames lost mid-window mean the delta is less trustworthy: widen.
    tol = ATTRIBUTION_TOL_G * (2.0 if pending.gap_frames else 1.0)
    flags = ("gap",) if pending.gap_frames else ()

    def event(kind, delta_g, tag_id=None, candidates=(), extra=()):
        cands = tuple(candidates)
        return OperationEvent(
            tray_id=pending.tray_id,
            kind=kind,
            delta_g=delta_g,
            tag_id=tag_id,
            candidates=cands,
            candidates_removed=tuple(t for t in cands if t in removed),
            candidates_returned=tuple(t for t in cands if t in returned),
            user_badge=pending.badge_seen,
            t_start=pending.started_at,
            t_end=pending.last_ts,
            flags=flags + tuple(extra),
        )

    if not removed and not returned:
        if abs(delta) <= cfg.trigger_delta_g:
            return []
        present = sorted(after)
        if len(present) == 1:
            return [event(ADJUST, delta, tag_id=present[0])]
        extra = () if present else ("no-containers",)
        return [event(AMBIGUOUS, delta, candidates=present, extra=extra)]

    if removed and not returned:
        if abs(delta) <= eps:
            return []  # reads flickered; the weight says nothing left
        if delta > eps:
            return [event(ANOMALY, delta, candidates=removed, extra=("sign-contradiction",))]
        if len(removed) == 1:
            tag = removed[0]
            gross = registry.get(tag)
            if gross is None:
                return [event(REMOVE, delta, tag_id=tag, extra=("unregistered",))]
            if abs(delta + gross) > tol:
                return [event(AMBIGUOUS, delta, candidates=removed, extra=("gross-mismatch",))]
            return [event(REMOVE, delta, tag_id=tag)]
        if any(t not in registry for t in removed):
            return [event(AMBIGUOUS, delta, candidates=removed, extra=("unregistered",))]
        subset = _best_subset(removed, delta, registry, tol)
        if subset is None:
            return [event(AMBIGUOUS, delta, candidates=removed)]
        if not subset:
            return []  # every flip was phantom; delta already inside tolerance
        if len(subset) == 1:
            return [event(REMOVE, delta, tag_id=subset[0])]
        share = (delta + sum(registry[t] for t in subset)) / len(subset)
        return [event(REMOVE, -registry[t] + share, tag_id=t) for t in subset]

    if returned and not removed:
        if abs(delta) <= eps:
            return []  # tag appeared but the weight never moved: ghost read
        if delta < -eps:
            return [event(ANOMALY, delta, candidates=returned, extra=("sign-contradiction",))]
        if len(returned) == 1:
            return [event(RETURN, delta, tag_id=returned[0])]
        return [event(AMBIGUOUS, delta, candidates=returned)]

    # Mixed removal + return (a swap inside one window): removals are only
    # explainable by registry grosses, the single return absorbs the rest.
    if len(returned) == 1 and all(t in registry for t in removed):
        return_share = delta + sum(registry[t] for t in removed)
        if return_share > eps:
            events = [event(REMOVE, -registry[t], tag_id=t) for t in removed]
            events.append(event(RETURN, return_share, tag_id=returned[0]))
            return events
    return [event(AMBIGUOUS, delta, candidates=removed + returned)]


class TrayTracker:
    """State machine for one tray; feed frames in seq order via observe()."""

    __slots__ = (
        "tray_id",
        "cfg",
        "registry",
        "mode",
        "baseline_weight_g",
        "pending",
        "stale_frames",
        "_window",
        "_debouncer",
        "_last_seq",
    )

    def __init__(
        self,
        tray_id: str,
        cfg: StabilityConfig | None = None,
        registry: Mapping[str, float] | None = None,
    ):
        self.tray_id = tray_id
        self.cfg = cfg or StabilityConfig()
        self.registry = registry if registry is not None else {}
        self.mode = IDLE
        self.baseline_weight_g: float | None = None  # None until warmed up
        self.pending: PendingWindow | None = None
        self.stale_frames = 0
        self._window: deque[float] = deque(maxlen=self.cfg.window_frames)
        self._debouncer = TagDebouncer(self.cfg)
        self._last_seq: int | None = None

    @property
    def baseline_tags(self) -> frozenset[str]:
        return frozenset(self._debouncer.present)

    def _window_mean(self) -> float:
        return sum(self._window) / len(self._window)

    def _window_stable(self) -> bool:
        w = self._window
        return len(w) == self.cfg.window_frames and max(w) - min(w) <= self.cfg.stable_range_g

    def observe(self, frame: TelemetryFrame) -> list[OperationEvent]:
        if frame.tray_id != self.tray_id:
            raise TrayTrackError(
                f"frame for tray {frame.tray_id!r} fed to tracker {self.tray_id!r}"
            )
        if self._last_seq is not None and frame.seq <= self._last_seq:
            self.stale_frames += 1
            return []
        gap = 0 if self._last_seq is None else frame.seq - self._last_seq - 1
        if self.pending is not None:
            self.pending.gap_frames += gap
        self._last_seq = frame.seq

        tags = [t for t in frame.tags if t.startswith(CONTAINER_PREFIX)]
        # Presence as of the last quiet frame. The trigger frame is already
        # part of the operation (a tag is often readable one scan before the
        # weight moves), so its reads must not count as "before".
        quiet_tags = self.baseline_tags if self.pending is None else None
        self._debouncer.scan(tags)
        self._window.append(frame.weight_g)
        w = frame.weight_g

        if self.baseline_weight_g is None:
            if self._window_stable():
                self.baseline_weight_g = self._window_mean()
            return []

        if self.pending is None:
            over_range = len(self._window) > 1 and max(self._window) - min(self._window) > self.cfg.stable_range_g
            over_delta = abs(w - self.baseline_weight_g) > self.cfg.trigger_delta_g
            if over_range or over_delta:
                self.mode = PENDING
                self.pending = PendingWindow(
                    tray_id=self.tray_id,
                    started_at=frame.timestamp_ms,
                    w0=self.baseline_weight_g,
                    tags_before=quiet_tags,
                    tags_seen=set(tags),
                    last_ts=frame.timestamp_ms,
                    gap_frames=gap,  # frames lost right at the trigger count too
                )
                self._note_badges(frame)
            return []

        pending = self.pending
        pending.tags_seen.update(tags)
        pending.last_ts = frame.timestamp_ms
        self._note_badges(frame)

        if self._window_stable():
            return self._close_window(self._window_mean())

        if frame.timestamp_ms - pending.started_at > self.cfg.pending_timeout_s * 1000:
            return self._timeout(pending)
        return []

    def _note_badges(self, frame: TelemetryFrame) -> None:
        badges = [t for t in frame.tags if t.startswith(BADGE_PREFIX)]
        if badges:
            # Latest scan wins; within one frame, pick deterministically.
            self.pending.badge_seen = max(badges)

    def _close_window(self, w1: float) -> list[OperationEvent]:
        pending = self.pending
        tags_after = frozenset(self._debouncer.present)
        events = classify(pending, w1, tags_after, self.registry, self.cfg)

        named: set[str] = set()
        for ev in events:
            if ev.tag_id is not None:
                named.add(ev.tag_id)
            named.update(ev.candidates)
        # Tag flips no event accounted for were phantoms: put presence back
        # the way the weight says it must be.
        for tag in pending.tags_before - tags_after - named:
            self._debouncer.force_present(tag)
        for tag in tags_after - pending.tags_before - named:
            self._debouncer.force_absent(tag)

        if events:
            self.baseline_weight_g = w1
        self.pending = None
        self.mode = IDLE
        return events

    def _timeout(self, pending: PendingWindow) -> list[OperationEvent]:
        w1 = self._window_mean()
        delta = w1 - pending.w0
        present = frozenset(self._debouncer.present)
        event = OperationEvent(
            tray_id=self.tray_id,
            kind=ANOMALY,
            delta_g=delta,
            candidates=tuple(sorted(pending.tags_before ^ present)),
            candidates_removed=tuple(sorted(pending.tags_before - present)),
            candidates_returned=tuple(sorted(present - pending.tags_before)),
            user_badge=pending.badge_seen,
            t_start=pending.started_at,
            t_end=pending.last_ts,
            flags=("timeout",) + (("gap",) if pending.gap_frames else ()),
        )
        # Force a fresh baseline so the tray cannot wedge mid-operation.
        self.baseline_weight_g = w1
        self._window.clear()
        self.pending = None
        self.mode = IDLE
        return [event]


def observe_frame(
    tracker: TrayTracker, frame: TelemetryFrame
) -> tuple[TrayTracker, list[OperationEvent]]:
    """Functional-style wrapper over TrayTracker.observe."""
    return tracker, tracker.observe(frame)


def event_to_dict(ev: OperationEvent) -> dict:
    """JSON-able form with stable field order semantics (sort keys to hash)."""
    return {
        "tray_id": ev.tray_id,
        "kind": ev.kind,
        "delta_g": ev.delta_g,
        "tag_id": ev.tag_id,
        "candidates": list(ev.candidates),
        "candidates_removed": list(ev.candidates_removed),
        "candidates_returned": list(ev.candidates_returned),
        "user_badge": ev.user_badge,
        "t_start": ev.t_start,
        "t_end": ev.t_end,
        "flags": list(ev.flags),
    }


def event_from_dict(data: dict) -> OperationEvent:
    if data.get("kind") not in EVENT_KINDS:
        raise TrayTrackError(f"unknown event kind {data.get('kind')!r}")
    return OperationEvent(
        tray_id=data["tray_id"],
        kind=data["kind"],
        delta_g=float(data["delta_g"]),
        tag_id=data.get("tag_id"),
        candidates=tuple(data.get("candidates", ())),
        candidates_removed=tuple(data.get("candidates_removed", ())),
        candidates_returned=tuple(data.get("candidates_returned", ())),
        user_badge=data.get("user_badge"),
        t_start=int(data.get("t_start", 0)),
        t_end=int(data.get("t_end", 0)),
        flags=tuple(data.get("flags", ())),
    )
