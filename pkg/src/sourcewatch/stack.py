"""Single-threaded orchestration of the whole failover pipeline.

The stack owns one registry value, one health monitor, one replacement
manager, and one scenario store, and keeps them consistent:

* every observation, transition, decision, and operator action is
  appended to the store, in causal order (inputs before the transitions
  they cause, transitions before the decisions they trigger);
* a failure of the designated source triggers a replacement decision,
  and a recovery triggers a review; review outcomes that change nothing
  are not persisted, so quiet periods leave no decision records;
* a chosen source that is still dormant is pre-activated on the spot and
  the switch completes when its first data arrives after the delay.

All methods take injected time. Callers (service loop or simulator) are
responsible for serializing calls; the stack itself holds no locks.
"""

from __future__ import annotations

from dataclasses import replace

from .errors import UnknownSourceError
from .monitor import UNKNOWN, IngressMonitor, Observation, SourceState
from .registry import Registry, SourceDescriptor
from .replacement import (
    Action,
    ReplacementManager,
    run_assessment,
)
from .similarity import extend_assessment_matrix
from .store import ScenarioStore


class IngressStack:
    def __init__(self, registry: Registry, store: ScenarioStore,
                 now: float = 0.0, hysteresis: float = 0.0,
                 monitor: IngressMonitor | None = None,
                 track_baseline: bool = True):
        self.registry = registry
        self.store = store
        self.manager = ReplacementManager(run_assessment(registry, now=now),
                                          hysteresis=hysteresis)
        self.monitor = monitor if monitor is not None \
            else IngressMonitor(registry)
        self.monitor.set_registry(registry)
        self._listeners: list = []
        if track_baseline:
            for data_type in sorted(self.manager.pack.standard_source):
                event = self.monitor.track(
                    self.manager.pack.standard_source[data_type], now,
                    reason="baseline-source")
                self._record_transition(event)

    # -- wiring ----------------------------------------------------------------

    def subscribe(self, callback):
        """Register a listener called as callback(kind, doc) for the event
        kinds transition, decision, matrix-updated, and alarm."""
        self._listeners.append(callback)

    def _notify(self, kind: str, doc: dict):
        for callback in self._listeners:
            callback(kind, doc)

    def statuses(self) -> dict:
        return {source_id: str(self.monitor.state_of(source_id))
                for source_id in self.registry.sources}

    def active(self) -> dict:
        """Designations per data type, annotated with live health."""
        out = {}
        for data_type, info in self.manager.snapshot().items():
            source_id = info["source-id"]
            out[data_type] = dict(info)
            out[data_type]["state"] = (
                None if source_id is None
                else str(self.monitor.state_of(source_id)))
            out[data_type]["ready-at"] = (
                None if source_id is None
                else self.monitor.ready_at(source_id))
        return out

    def _data_type(self, source_id: str) -> str:
        return self.registry.get(source_id).data_type

    # -- record keeping ----------------------------------------------------------

    def _record_transition(self, event):
        body = event.to_doc()
        body["data-type"] = self._data_type(event.source_id)
        self.store.append("transition", event.at, body)
        self._notify("transition", body)

    def _record_decision(self, decision):
        body = decision.to_doc()
        self.store.append("decision", decision.decided_at, body)
        self._notify("decision", body)
        if decision.action is Action.ALARM:
            self._notify("alarm", body)

    # -- decision plumbing ---------------------------------------------------------

    def _apply_decision(self, decision, now: float):
        self._record_decision(decision)
        chosen = decision.chosen
        if decision.action is Action.ACTIVATE_FALLBACK \
                and self.monitor.state_of(chosen) == UNKNOWN:
            # dormant source chosen: start its activation clock now
            event = self.monitor.pre_activate(chosen, now)
            self._record_transition(event)
        designated = self.manager.designation(decision.data_type)
        if designated is not None:
            state = self.monitor.state_of(designated)
            assert state not in (SourceState.FAILED, SourceState.RETIRED)

    def _handle_transitions(self, events, now: float):
        for event in events:
            self._record_transition(event)
            data_type = self._data_type(event.source_id)
            designated = self.manager.designation(data_type)
            if event.to_state in (SourceState.FAILED, SourceState.RETIRED):
                if designated == event.source_id:
                    decision = self.manager.on_source_failure(
                        data_type, event.source_id, self.statuses(), now)
                    self._apply_decision(decision, now)
            elif event.to_state is SourceState.ACTIVE \
                    and event.from_state is not None:
                if designated is None:
                    decision = self.manager.resolve_vacancy(
                        data_type, self.statuses(), now)
                    self._apply_decision(decision, now)
                elif designated != event.source_id:
                    decision = self.manager.review_active(
                        data_type, self.statuses(), now)
                    if decision.action is not Action.NO_ACTION:
                        self._apply_decision(decision, now)

    # -- inputs --------------------------------------------------------------------

    def observe(self, source_id: str, value, now: float):
        """Ingest one observation; returns the transitions it caused."""
        descriptor = self.registry.get(source_id)
        self.store.append("observation", now, {
            "source-id": source_id, "value": value,
            "data-type": descriptor.data_type})
        events = self.monitor.observe(
            Observation(source_id=source_id, at=now, value=value))
        self._handle_transitions(events, now)
        return events

    def sweep(self, now: float):
        """Timed staleness pass; returns the transitions it caused."""
        events = self.monitor.sweep(now)
        self._handle_transitions(events, now)
        return events

    # -- operator commands -----------------------------------------------------------

    def set_weights(self, weights: dict, now: float):
        """Adjust assessment weights mid-run; reviews every designation."""
        merged = dict(self.registry.weights) | dict(weights)
        self.registry = self.registry.with_weights(merged)
        self.monitor.set_registry(self.registry)
        self.store.append("operator-action", now, {
            "command": "set-weights", "weights": dict(weights)})
        pack = self.manager.reweigh(weights, now)
        self._notify("matrix-updated", {
            "prepared-at": now, "digest": pack.digest,
            "matrices": {dt: pack.matrices[dt].digest
                         for dt in sorted(pack.matrices)}})
        for data_type in sorted(pack.matrices):
            if self.manager.designation(data_type) is None:
                continue
            decision = self.manager.review_active(
                data_type, self.statuses(), now)
            if decision.action is not Action.NO_ACTION:
                self._apply_decision(decision, now)
        return pack

    def pre_activate(self, source_id: str, now: float) -> float:
        """Operator warm-up request; returns the readiness time."""
        self.registry.get(source_id)
        self.store.append("operator-action", now, {
            "command": "pre-activate", "source-id": source_id,
            "data-type": self._data_type(source_id)})
        event = self.monitor.pre_activate(source_id, now)
        self._record_transition(event)
        return self.monitor.ready_at(source_id)

    def force_switch(self, data_type: str, source_id: str, now: float):
        self.store.append("operator-action", now, {
            "command": "force-switch", "data-type": data_type,
            "source-id": source_id})
        decision = self.manager.force_switch(
            data_type, source_id, self.statuses(), now)
        self._apply_decision(decision, now)
        return decision

    def register_source(self, descriptor_doc: dict, now: float):
        """Integrate a source that became available mid-run."""
        descriptor = SourceDescriptor.from_doc(descriptor_doc)
        self.store.append("operator-action", now, {
            "command": "register-source",
            "descriptor": descriptor_doc})
        grown, decisions = self.manager.on_source_available(
            descriptor, self.registry, self.statuses(), now)
        self.registry = grown
        self.monitor.set_registry(grown)
        pack = self.manager.pack
        self._notify("matrix-updated", {
            "prepared-at": now, "digest": pack.digest,
            "matrices": {dt: pack.matrices[dt].digest
                         for dt in sorted(pack.matrices)}})
        for decision in decisions:
            self._apply_decision(decision, now)
        return decisions

    def retire_source(self, source_id: str, now: float):
        """Take a tracked source out of service for good."""
        self.store.append("operator-action", now, {
            "command": "retire-source", "source-id": source_id,
            "data-type": self._data_type(source_id)})
        event = self.monitor.retire(source_id, now)
        self._handle_transitions([event], now)
        return event

    # -- restart recovery ---------------------------------------------------------

    @classmethod
    def restore(cls, registry: Registry, store: ScenarioStore,
                now: float = 0.0, hysteresis: float = 0.0,
                monitor: IngressMonitor | None = None) -> "IngressStack":
        """Rebuild a stack against an existing store directory.

        Operator actions are re-applied in arrival order so the pack
        (weights, integrated sources) matches the pre-crash state; the
        designation per data type is taken from the last recorded
        decision. Designated sources resume tracking as active and will
        fail over normally if they stay silent.
        """
        stack = cls(registry, store, now=now, hysteresis=hysteresis,
                    monitor=monitor, track_baseline=False)
        for record in store.replay(kind="operator-action"):
            body = record.body
            command = body.get("command")
            if command == "set-weights":
                merged = dict(stack.registry.weights) | dict(body["weights"])
                stack.registry = stack.registry.with_weights(merged)
                stack.manager.reweigh(body["weights"], record.at)
            elif command == "register-source":
                descriptor = SourceDescriptor.from_doc(body["descriptor"])
                grown = stack.registry.with_source(descriptor)
                matrices = dict(stack.manager.pack.matrices)
                matrices[descriptor.data_type] = extend_assessment_matrix(
                    matrices[descriptor.data_type], grown,
                    descriptor.source_id)
                stack.manager.pack = replace(stack.manager.pack,
                                             matrices=matrices)
                stack.registry = grown
        stack.monitor.set_registry(stack.registry)

        last: dict = {}
        for record in store.replay(kind="decision"):
            if record.body["action"] == Action.INTEGRATE_NEW.value:
                continue
            last[record.body["data-type"]] = record.body
        for data_type, body in last.items():
            stack.manager._designate(data_type, body["chosen"])
        for data_type in sorted(stack.manager.pack.matrices):
            designated = stack.manager.designation(data_type)
            if designated is not None:
                event = stack.monitor.track(designated, now,
                                            reason="restored-designation")
                stack._record_transition(event)
        return stack
