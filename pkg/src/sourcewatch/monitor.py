"""Live health tracking for registered sources.

The monitor never consults a wall clock; every call takes the current
time as a float of seconds. That keeps replays and simulations bit-equal
to live runs fed the same inputs.

Health states
-------------
Untracked sources report the pseudo-state "unknown". Tracked sources move
between:

* ``pending-activation``: requested, warming up until ``ready_at``
* ``active``: delivering fresh, plausible data
* ``degraded``: delivering, but the values fail the plausibility profile
* ``failed``: silent past the staleness horizon
* ``retired``: taken out of service for good

Silence is judged against a per-source staleness horizon::

    horizon = max(grace_multiplier * update_period, delay + margin)

so a slow feed is not punished for its nominal cadence and a fast feed is
not failed while its normal delivery latency has not elapsed. Defaults:
grace multiplier 3, margin 1 s; both can be overridden per source in the
registry (``monitoring`` keys ``grace-multiplier`` and ``margin-s``).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import (
    ConfigurationError,
    NotActivatableError,
    TransitionError,
    UnknownSourceError,
)
from .registry import Registry

DEFAULT_GRACE_MULTIPLIER = 3.0
DEFAULT_MARGIN_S = 1.0


class SourceState(str, enum.Enum):
    PENDING = "pending-activation"
    ACTIVE = "active"
    DEGRADED = "degraded"
    FAILED = "failed"
    RETIRED = "retired"

    def __str__(self) -> str:  # keep log lines readable
        return self.value


UNKNOWN = "unknown"  # pseudo-state of untracked sources

# closed set of legal moves between tracked states; entry transitions
# (from None) may start anywhere but RETIRED
_ALLOWED = frozenset({
    (SourceState.PENDING, SourceState.ACTIVE),
    (SourceState.ACTIVE, SourceState.DEGRADED),
    (SourceState.ACTIVE, SourceState.FAILED),
    (SourceState.DEGRADED, SourceState.ACTIVE),
    (SourceState.DEGRADED, SourceState.FAILED),
    (SourceState.FAILED, SourceState.ACTIVE),
})


def allowed_transition(from_state, to_state) -> bool:
    if from_state is None:
        return to_state is not SourceState.RETIRED
    if to_state is SourceState.RETIRED:
        return from_state is not SourceState.RETIRED
    return (from_state, to_state) in _ALLOWED


@dataclass(frozen=True)
class TransitionEvent:
    source_id: str
    from_state: SourceState | None
    to_state: SourceState
    at: float
    reason: str

    def to_doc(self) -> dict:
        return {
            "source-id": self.source_id,
            "from": None if self.from_state is None else self.from_state.value,
            "to": self.to_state.value,
            "at": self.at,
            "reason": self.reason,
        }


@dataclass(frozen=True)
class Observation:
    source_id: str
    at: float
    value: object

    def to_doc(self) -> dict:
        return {"source-id": self.source_id, "at": self.at,
                "value": self.value}


class _Tracked:
    __slots__ = ("state", "since", "ready_at", "last_seen",
                 "last_value", "last_value_at")

    def __init__(self, state: SourceState, since: float,
                 ready_at: float | None = None):
        self.state = state
        self.since = since
        self.ready_at = ready_at
        self.last_seen: float | None = None
        self.last_value = None
        self.last_value_at: float | None = None


class IngressMonitor:
    """Tracks per-source health from observations and timed sweeps."""

    def __init__(self, registry: Registry,
                 grace_multiplier: float = DEFAULT_GRACE_MULTIPLIER,
                 margin_s: float = DEFAULT_MARGIN_S):
        if grace_multiplier <= 0 or margin_s < 0:
            raise ConfigurationError(
                "grace multiplier must be positive, margin non-negative")
        self.registry = registry
        self.grace_multiplier = grace_multiplier
        self.margin_s = margin_s
        self._tracked: dict[str, _Tracked] = {}

    # -- configuration -----------------------------------------------------

    def set_registry(self, registry: Registry):
        """Swap in a newer registry (same ids keep their tracked state)."""
        self.registry = registry

    def horizon(self, source_id: str) -> float:
        """Staleness horizon in seconds for one source."""
        descriptor = self.registry.get(source_id)
        grace = float(descriptor.monitoring.get(
            "grace-multiplier", self.grace_multiplier))
        margin = float(descriptor.monitoring.get("margin-s", self.margin_s))
        period = descriptor.canonical["frequency"]
        delay = descriptor.canonical["delay"]
        return max(grace * period, delay + margin)

    def _profile(self, source_id: str) -> dict | None:
        descriptor = self.registry.get(source_id)
        return self.registry.plausibility.get(descriptor.data_type)

    def plausible(self, source_id: str, value, now: float) -> bool:
        """Judge a value against the data type's plausibility profile.

        Checks the static range first, then the change rate against the
        last accepted value. Sources without a profile accept anything.
        """
        profile = self._profile(source_id)
        if profile is None:
            return True
        if isinstance(value, bool) or not isinstance(value, (int, float)) \
                or math.isnan(value):
            return False
        low, high = profile.get("min", -math.inf), profile.get("max", math.inf)
        if not low <= value <= high:
            return False
        max_step = profile.get("max-step-per-s")
        entry = self._tracked.get(source_id)
        if max_step is not None and entry is not None \
                and entry.last_value_at is not None:
            elapsed = now - entry.last_value_at
            if abs(value - entry.last_value) > max_step * max(elapsed, 0.0):
                return False
        return True

    # -- state access --------------------------------------------------------

    def state_of(self, source_id: str):
        entry = self._tracked.get(source_id)
        return UNKNOWN if entry is None else entry.state

    def tracked_ids(self) -> tuple:
        return tuple(sorted(self._tracked))

    def ready_at(self, source_id: str) -> float | None:
        entry = self._tracked.get(source_id)
        return None if entry is None else entry.ready_at

    def snapshot(self) -> dict:
        """Serializable view of every tracked source."""
        out = {}
        for source_id in sorted(self._tracked):
            entry = self._tracked[source_id]
            out[source_id] = {
                "state": entry.state.value,
                "since": entry.since,
                "ready-at": entry.ready_at,
                "last-seen": entry.last_seen,
                "staleness-horizon": self.horizon(source_id),
            }
        return out

    # -- transitions ---------------------------------------------------------

    def _move(self, source_id: str, to_state: SourceState, now: float,
              reason: str) -> TransitionEvent:
        entry = self._tracked[source_id]
        if not allowed_transition(entry.state, to_state):
            raise TransitionError(
                f"{source_id}: illegal transition "
                f"{entry.state.value} -> {to_state.value}")
        event = TransitionEvent(source_id=source_id, from_state=entry.state,
                                to_state=to_state, at=now, reason=reason)
        entry.state = to_state
        entry.since = now
        return event

    def track(self, source_id: str, now: float,
              state: SourceState = SourceState.ACTIVE,
              ready_at: float | None = None,
              reason: str = "tracking-started") -> TransitionEvent:
        """Start tracking a registered source (entry transition)."""
        self.registry.get(source_id)
        if source_id in self._tracked:
            raise TransitionError(f"{source_id} is already tracked")
        if not allowed_transition(None, state):
            raise TransitionError(
                f"{source_id}: cannot enter tracking as {state.value}")
        entry = _Tracked(state, now, ready_at)
        self._tracked[source_id] = entry
        return TransitionEvent(source_id=source_id, from_state=None,
                               to_state=state, at=now, reason=reason)

    def pre_activate(self, source_id: str, now: float) -> TransitionEvent:
        """Ask a dormant source to warm up.

        The source becomes ``pending-activation`` and is considered ready
        after its activation delay; the switch to ``active`` still waits
        for the first plausible observation.
        """
        descriptor = self.registry.get(source_id)
        current = self.state_of(source_id)
        if current != UNKNOWN:
            raise NotActivatableError(
                f"{source_id} is {current} and cannot be pre-activated")
        ready_at = now + descriptor.canonical["activation-delay"]
        return self.track(source_id, now, state=SourceState.PENDING,
                          ready_at=ready_at, reason="pre-activation")

    def retire(self, source_id: str, now: float,
               reason: str = "operator-retired") -> TransitionEvent:
        if source_id not in self._tracked:
            raise UnknownSourceError(f"{source_id} is not tracked")
        return self._move(source_id, SourceState.RETIRED, now, reason)

    # -- inputs --------------------------------------------------------------

    def observe(self, observation: Observation) -> list:
        """Fold one observation into the state machine.

        Returns the transitions it caused (possibly none).
        """
        source_id = observation.source_id
        now = observation.at
        if source_id not in self._tracked:
            return []  # dormant sources may chatter; ignore
        entry = self._tracked[source_id]
        state = entry.state
        if state is SourceState.RETIRED:
            return []
        entry.last_seen = now

        ok = self.plausible(source_id, observation.value, now)
        if ok:
            entry.last_value = observation.value
            entry.last_value_at = now

        events = []
        if state is SourceState.PENDING:
            if ok and entry.ready_at is not None and now >= entry.ready_at:
                events.append(self._move(source_id, SourceState.ACTIVE, now,
                                         "activation-complete"))
        elif state is SourceState.ACTIVE:
            if not ok:
                events.append(self._move(source_id, SourceState.DEGRADED, now,
                                         "implausible-value"))
        elif state is SourceState.DEGRADED:
            if ok:
                events.append(self._move(source_id, SourceState.ACTIVE, now,
                                         "plausible-again"))
        elif state is SourceState.FAILED:
            if ok:
                events.append(self._move(source_id, SourceState.ACTIVE, now,
                                         "delivering-again"))
        return events

    def sweep(self, now: float) -> list:
        """Timed staleness check across all tracked sources.

        Active and degraded sources that have been silent past their
        horizon fail. Pending sources are exempt: they are not expected
        to deliver while warming up.
        """
        events = []
        for source_id in sorted(self._tracked):
            entry = self._tracked[source_id]
            if entry.state not in (SourceState.ACTIVE, SourceState.DEGRADED):
                continue
            reference = entry.last_seen if entry.last_seen is not None \
                else entry.since
            if now - reference > self.horizon(source_id):
                events.append(self._move(source_id, SourceState.FAILED, now,
                                         "stale"))
        return events
