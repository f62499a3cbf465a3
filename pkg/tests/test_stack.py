import json

import pytest

from sourcewatch import load_registry, load_registry_file
from sourcewatch.errors import NotActivatableError
from sourcewatch.monitor import UNKNOWN, SourceState
from sourcewatch.replacement import Action
from sourcewatch.stack import IngressStack
from sourcewatch.store import ScenarioStore

CASE_STUDY = "src/sourcewatch/data/registry.json"

DRONE = {
    "source-id": "drone-imagery",
    "display-name": "Drone overflight imagery",
    "data-type": "traffic",
    "standard": False,
    "attribute-values": {
        "environmental-impact": "daylight only",
        "level-of-detail": "30 cm/pixel",
        "delay": "2 min",
        "frequency": "1/h",
        "spatial-coverage": "whole city to a different extent",
        "activation-delay": "10 min",
        "use-case": "traffic",
        "data-transfer": "radio",
        "sensor-location": "airborne",
        "dependency-on-ci": "independent",
        "autonomous-operation-time": "2 h",
    },
}


@pytest.fixture()
def registry():
    return load_registry_file(CASE_STUDY)


@pytest.fixture()
def stack(registry, tmp_path):
    store = ScenarioStore(tmp_path / "scenario")
    return IngressStack(registry, store, now=0.0)


def solo_registry():
    """Case-study registry stripped down to the standard source only."""
    with open(CASE_STUDY, encoding="utf-8") as handle:
        doc = json.load(handle)
    doc["sources"] = [s for s in doc["sources"]
                      if s["source-id"] == "traffic-sensors"]
    return load_registry(doc)


def decisions_in(store):
    return [r.body for r in store.replay(kind="decision")]


def test_fresh_stack_tracks_standard_sources(stack):
    assert stack.statuses() == {
        "traffic-sensors": "active",
        "floating-car-data": "unknown",
        "remote-sensing": "unknown",
    }
    active = stack.active()["traffic"]
    assert active["source-id"] == "traffic-sensors"
    assert active["state"] == "active"
    assert active["alarm"] is False
    records = stack.store.replay(kind="transition")
    assert len(records) == 1
    assert records[0].body["to"] == "active"
    assert records[0].body["data-type"] == "traffic"


def test_observation_recorded_before_caused_transition(stack):
    stack.observe("traffic-sensors", 350.0, now=1.0)  # out of range
    records = stack.store.replay(t0=1.0)
    assert [r.kind for r in records] == ["observation", "transition"]
    assert records[0].seq < records[1].seq
    assert records[1].body["to"] == "degraded"


def test_observation_for_unknown_source_rejected(stack):
    from sourcewatch.errors import UnknownSourceError
    with pytest.raises(UnknownSourceError):
        stack.observe("nope", 1.0, now=0.0)


def test_untracked_source_observation_is_kept(stack):
    events = stack.observe("remote-sensing", 50.0, now=2.0)
    assert events == []
    assert len(stack.store.replay(kind="observation")) == 1


def test_failure_of_designated_source_triggers_failover(stack):
    events = stack.sweep(now=4.0)  # horizon 3 s, silent since 0
    assert [e.to_state for e in events] == [SourceState.FAILED]
    assert stack.manager.designation("traffic") == "floating-car-data"
    # the chosen source was dormant, so its activation clock started
    assert stack.monitor.state_of("floating-car-data") \
        is SourceState.PENDING
    assert stack.monitor.ready_at("floating-car-data") == 4.0 + 60.0
    kinds = [r.kind for r in stack.store.replay(t0=4.0)]
    assert kinds == ["transition", "decision", "transition"]
    decision = decisions_in(stack.store)[0]
    assert decision["action"] == "activate-fallback"
    assert decision["chosen"] == "floating-car-data"
    assert decision["failed-source"] == "traffic-sensors"


def test_pending_switch_completes_on_first_data_after_delay(stack):
    stack.sweep(now=4.0)
    early = stack.observe("floating-car-data", 41.0, now=10.0)
    assert early == []
    done = stack.observe("floating-car-data", 41.0, now=64.0)
    assert [e.reason for e in done] == ["activation-complete"]
    assert stack.active()["traffic"]["state"] == "active"
    # completion is not a new decision
    assert len(decisions_in(stack.store)) == 1


def test_failure_of_bystander_source_records_no_decision(stack):
    stack.pre_activate("floating-car-data", now=0.0)
    stack.observe("floating-car-data", 40.0, now=61.0)
    stack.observe("traffic-sensors", 12.0, now=61.0)
    # fcd (horizon 6 s) goes silent while the standard keeps delivering
    stack.observe("traffic-sensors", 12.0, now=64.0)
    stack.observe("traffic-sensors", 12.0, now=68.0)
    events = stack.sweep(now=68.5)
    assert [(e.source_id, e.to_state) for e in events] == [
        ("floating-car-data", SourceState.FAILED)]
    assert decisions_in(stack.store) == []
    assert stack.manager.designation("traffic") == "traffic-sensors"


def test_standard_recovery_switches_back(stack):
    stack.pre_activate("floating-car-data", now=0.0)
    stack.observe("traffic-sensors", 10.0, now=59.0)
    stack.observe("floating-car-data", 40.0, now=61.0)
    stack.sweep(now=63.0)  # ts silent > 3 s
    assert stack.manager.designation("traffic") == "floating-car-data"
    stack.observe("floating-car-data", 40.0, now=65.0)
    back = stack.observe("traffic-sensors", 11.0, now=66.0)
    assert [e.reason for e in back] == ["delivering-again"]
    assert stack.manager.designation("traffic") == "traffic-sensors"
    history = decisions_in(stack.store)
    assert [d["action"] for d in history] == ["activate-fallback"] * 2
    assert history[-1]["chosen"] == "traffic-sensors"
    assert "standard source recovered" in history[-1]["rationale"]


def test_set_weights_records_action_and_reviews(stack):
    seen = []
    stack.subscribe(lambda kind, doc: seen.append(kind))
    before = stack.manager.pack.digest
    pack = stack.set_weights({"autonomous-operation-time": 3.0}, now=5.0)
    assert pack.digest != before
    assert stack.registry.weights["autonomous-operation-time"] == 3.0
    assert stack.registry.weights["delay"] == 1.0
    actions = stack.store.replay(kind="operator-action")
    assert actions[0].body == {
        "command": "set-weights",
        "weights": {"autonomous-operation-time": 3.0}}
    assert seen == ["matrix-updated"]
    # healthy standard stays designated; the quiet review is not stored
    assert decisions_in(stack.store) == []


def test_register_source_grows_matrix(stack):
    decisions = stack.register_source(DRONE, now=3.0)
    assert [d.action for d in decisions] == [Action.INTEGRATE_NEW]
    assert "drone-imagery" in stack.registry.sources
    assert "drone-imagery" in stack.manager.pack.matrix("traffic").source_ids
    stored = stack.store.replay(kind="operator-action")
    assert stored[0].body["command"] == "register-source"
    assert stored[0].body["descriptor"]["source-id"] == "drone-imagery"
    assert stack.manager.designation("traffic") == "traffic-sensors"


def test_alarm_when_no_candidates(tmp_path):
    seen = []
    stack = IngressStack(solo_registry(), ScenarioStore(tmp_path / "s"),
                         now=0.0)
    stack.subscribe(lambda kind, doc: seen.append(kind))
    stack.sweep(now=4.0)
    assert stack.manager.alarmed("traffic") is True
    active = stack.active()["traffic"]
    assert active["source-id"] is None
    assert active["alarm"] is True
    assert seen == ["transition", "decision", "alarm"]
    assert decisions_in(stack.store)[0]["action"] == "alarm"


def test_registration_during_alarm_clears_it(tmp_path):
    stack = IngressStack(solo_registry(), ScenarioStore(tmp_path / "s"),
                         now=0.0)
    stack.sweep(now=4.0)
    decisions = stack.register_source(DRONE, now=6.0)
    assert [d.action for d in decisions] == [
        Action.INTEGRATE_NEW, Action.ACTIVATE_FALLBACK]
    assert stack.manager.alarmed("traffic") is False
    assert stack.manager.designation("traffic") == "drone-imagery"
    # dormant choice gets its activation clock started
    assert stack.monitor.state_of("drone-imagery") is SourceState.PENDING
    assert stack.monitor.ready_at("drone-imagery") == 6.0 + 600.0


def test_force_switch_to_available_source(stack):
    stack.pre_activate("floating-car-data", now=0.0)
    stack.observe("floating-car-data", 40.0, now=61.0)
    decision = stack.force_switch("traffic", "floating-car-data", now=62.0)
    assert decision.rationale == "operator override"
    assert stack.manager.designation("traffic") == "floating-car-data"
    assert decisions_in(stack.store)[-1]["chosen"] == "floating-car-data"


def test_force_switch_to_dormant_source_pre_activates(stack):
    stack.force_switch("traffic", "remote-sensing", now=2.0)
    assert stack.monitor.state_of("remote-sensing") is SourceState.PENDING
    assert stack.monitor.ready_at("remote-sensing") == 2.0 + 1200.0


def test_force_switch_to_failed_source_rejected(stack):
    stack.sweep(now=4.0)  # standard fails, fcd designated
    with pytest.raises(NotActivatableError):
        stack.force_switch("traffic", "traffic-sensors", now=5.0)


def test_retiring_designated_source_fails_over(stack):
    event = stack.retire_source("traffic-sensors", now=2.0)
    assert event.to_state is SourceState.RETIRED
    assert stack.manager.designation("traffic") == "floating-car-data"
    kinds = [r.kind for r in stack.store.replay(t0=2.0)]
    assert kinds == ["operator-action", "transition", "decision",
                     "transition"]


def test_restore_rebuilds_pack_and_designation(registry, tmp_path):
    store = ScenarioStore(tmp_path / "scenario")
    stack = IngressStack(registry, store, now=0.0)
    stack.set_weights({"autonomous-operation-time": 3.0}, now=2.0)
    stack.sweep(now=4.0)
    stack.observe("floating-car-data", 40.0, now=65.0)
    stack.register_source(DRONE, now=70.0)
    digest = stack.manager.pack.digest
    weights = dict(stack.registry.weights)
    decisions_before = decisions_in(store)
    store.close()

    revived = IngressStack.restore(
        load_registry_file(CASE_STUDY), ScenarioStore(tmp_path / "scenario"),
        now=100.0)
    assert revived.manager.pack.digest == digest
    assert revived.registry.weights == weights
    assert "drone-imagery" in revived.registry.sources
    assert revived.manager.designation("traffic") == "floating-car-data"
    assert revived.monitor.state_of("floating-car-data") \
        is SourceState.ACTIVE
    assert revived.monitor.state_of("traffic-sensors") == UNKNOWN
    assert decisions_in(revived.store) == decisions_before


def test_restore_of_empty_store_matches_fresh_start(registry, tmp_path):
    revived = IngressStack.restore(
        registry, ScenarioStore(tmp_path / "scenario"), now=0.0)
    assert revived.manager.designation("traffic") == "traffic-sensors"
    assert revived.statuses()["traffic-sensors"] == "active"


def test_restore_after_alarm_keeps_alarm(tmp_path):
    store = ScenarioStore(tmp_path / "scenario")
    stack = IngressStack(solo_registry(), store, now=0.0)
    stack.sweep(now=4.0)
    store.close()
    revived = IngressStack.restore(
        solo_registry(), ScenarioStore(tmp_path / "scenario"), now=10.0)
    assert revived.manager.alarmed("traffic") is True
    assert revived.manager.designation("traffic") is None
    assert revived.monitor.tracked_ids() == ()


def test_event_listener_sees_causal_order(stack):
    seen = []
    stack.subscribe(lambda kind, doc: seen.append((kind, doc.get("to"))))
    stack.sweep(now=4.0)
    assert seen == [
        ("transition", "failed"),
        ("decision", None),
        ("transition", "pending-activation"),
    ]
