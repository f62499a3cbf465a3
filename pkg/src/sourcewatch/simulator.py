"""Deterministic crisis rehearsal on a virtual clock.

A script describes a timeline of stimuli (observation generators,
outages, recoveries, late registrations, operator commands) against a
registry, plus a list of expected decisions. The engine replays the
timeline on an integer-millisecond clock with a staleness sweep every
second, so a given script and seed always produce the same trace.

Scripts are JSON:

    {
      "name": "flood",
      "registry": "case-study",          # or a path, or an inline doc
      "duration-ms": 1500000,
      "seed": 0,
      "events": [
        {"at-ms": 0, "event": "generate-observations",
         "source": "traffic-sensors", "rate": "1/s",
         "payload-model": {"model": "noisy-ramp", "start": 40.0,
                           "slope-per-s": 0.005, "jitter": 2.0}},
        {"at-ms": 300000, "event": "fail-source",
         "source": "traffic-sensors", "reason": "substation flooded"}
      ],
      "expectations": [
        {"action": "activate-fallback", "chosen": "floating-car-data"}
      ]
    }

Event kinds: generate-observations, fail-source, recover-source,
register-source, operator (set-weights / pre-activate / force-switch).
Expectations are matched as an ordered subsequence of the decision
trace; each entry lists field values the decision must carry, plus the
optional "rationale-contains" substring test.
"""

from __future__ import annotations

import heapq
import itertools
import json
import random
import tempfile
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ConfigurationError
from .registry import Registry, load_registry, load_registry_file
from .stack import IngressStack
from .store import ScenarioStore
from .values import parse_rate

SWEEP_EVERY_MS = 1000

EVENT_KINDS = ("generate-observations", "fail-source", "recover-source",
               "register-source", "operator")
OPERATOR_COMMANDS = ("set-weights", "pre-activate", "force-switch")
PAYLOAD_MODELS = ("constant", "ramp", "noisy-ramp", "step")


# -- payload models -------------------------------------------------------------

def payload_value(model: dict, at_ms: int, rng: random.Random) -> float:
    """Value a generator emits at virtual time ``at_ms``."""
    kind = model["model"]
    t = at_ms / 1000.0
    if kind == "constant":
        return float(model["value"])
    if kind == "ramp":
        return float(model["start"]) + float(model["slope-per-s"]) * t
    if kind == "noisy-ramp":
        base = float(model["start"]) + float(model["slope-per-s"]) * t
        return base + rng.uniform(-float(model["jitter"]),
                                  float(model["jitter"]))
    if kind == "step":
        if t >= float(model["step-at-s"]):
            return float(model["value"])
        return float(model["start"])
    raise ConfigurationError(f"unknown payload model {kind!r}")


def _check_model(model) -> dict:
    if not isinstance(model, dict) or "model" not in model:
        raise ConfigurationError("payload-model must name a model")
    kind = model["model"]
    if kind not in PAYLOAD_MODELS:
        raise ConfigurationError(f"unknown payload model {kind!r}")
    required = {
        "constant": ("value",),
        "ramp": ("start", "slope-per-s"),
        "noisy-ramp": ("start", "slope-per-s", "jitter"),
        "step": ("start", "step-at-s", "value"),
    }[kind]
    for key in required:
        if key not in model:
            raise ConfigurationError(
                f"payload model {kind!r} needs {key!r}")
    return dict(model)


# -- scripts ----------------------------------------------------------------------

@dataclass(frozen=True)
class SimulationScript:
    name: str
    registry: Registry
    duration_ms: int
    seed: int
    events: tuple
    expectations: tuple

    @classmethod
    def from_doc(cls, doc: dict,
                 base_dir: Path | None = None) -> "SimulationScript":
        try:
            name = doc["name"]
            duration_ms = int(doc["duration-ms"])
            raw_events = doc["events"]
        except KeyError as exc:
            raise ConfigurationError(f"script is missing {exc}") from None
        if duration_ms <= 0:
            raise ConfigurationError("duration-ms must be positive")
        registry = _resolve_registry(doc.get("registry", "case-study"),
                                     base_dir)
        events = []
        for event in raw_events:
            kind = event.get("event")
            if kind not in EVENT_KINDS:
                raise ConfigurationError(f"unknown event kind {kind!r}")
            at = int(event.get("at-ms", -1))
            if at < 0:
                raise ConfigurationError(f"{kind}: at-ms must be >= 0")
            if kind == "generate-observations":
                parse_rate(event["rate"])  # fail early on bad rates
                _check_model(event.get("payload-model"))
            if kind == "operator" \
                    and event.get("command") not in OPERATOR_COMMANDS:
                raise ConfigurationError(
                    f"unknown operator command {event.get('command')!r}")
            events.append(dict(event))
        return cls(name=name, registry=registry, duration_ms=duration_ms,
                   seed=int(doc.get("seed", 0)), events=tuple(events),
                   expectations=tuple(doc.get("expectations", ())))


def _resolve_registry(spec, base_dir: Path | None) -> Registry:
    if isinstance(spec, dict):
        return load_registry(spec)
    if spec == "case-study":
        text = (resources.files("sourcewatch.data") / "registry.json")\
            .read_text(encoding="utf-8")
        return load_registry(json.loads(text))
    path = Path(spec)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    return load_registry_file(path)


def load_script(path) -> SimulationScript:
    path = Path(path)
    with open(path, encoding="utf-8") as handle:
        doc = json.load(handle)
    return SimulationScript.from_doc(doc, base_dir=path.parent)


def bundled_script_path(name: str) -> Path:
    """Path of a script shipped with the package (e.g. ``flood``)."""
    return Path(str(resources.files("sourcewatch.data") / "scripts"
                    / f"{name}.json"))


# -- engine -----------------------------------------------------------------------

class _Generator:
    __slots__ = ("source_id", "period_ms", "model", "rng", "running")

    def __init__(self, source_id, period_ms, model, rng):
        self.source_id = source_id
        self.period_ms = period_ms
        self.model = model
        self.rng = rng
        self.running = True


@dataclass
class SimulationReport:
    """Everything a run produced, in causal order."""
    name: str
    seed: int
    duration_ms: int
    decisions: list = field(default_factory=list)
    transitions: list = field(default_factory=list)
    alarms: list = field(default_factory=list)
    observation_count: int = 0
    final: dict = field(default_factory=dict)

    def to_doc(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "duration-ms": self.duration_ms,
            "observation-count": self.observation_count,
            "decisions": list(self.decisions),
            "transitions": list(self.transitions),
            "alarms": list(self.alarms),
            "final": dict(self.final),
        }


def run_script(script: SimulationScript, seed: int | None = None,
               store_dir=None, hysteresis: float = 0.0) -> SimulationReport:
    """Replay a script; returns the full trace."""
    seed = script.seed if seed is None else seed
    report = SimulationReport(name=script.name, seed=seed,
                              duration_ms=script.duration_ms)
    with tempfile.TemporaryDirectory(prefix="sourcewatch-sim-") as scratch:
        store = ScenarioStore(Path(store_dir or scratch) / "scenario")
        stack = IngressStack(script.registry, store, now=0.0,
                             hysteresis=hysteresis)

        def listen(kind, doc):
            if kind == "decision":
                report.decisions.append(doc)
            elif kind == "transition":
                report.transitions.append(doc)
            elif kind == "alarm":
                report.alarms.append(doc)

        stack.subscribe(listen)

        # script events get low tie-break numbers so that, at the same
        # millisecond, an outage beats the emission it is silencing
        heap: list = []
        tie = itertools.count()
        for event in script.events:
            heapq.heappush(heap, (event["at-ms"], next(tie), "event", event))
        dyn = itertools.count(len(script.events) + 1_000_000)
        heapq.heappush(heap, (SWEEP_EVERY_MS, next(dyn), "sweep", None))

        generators: dict = {}

        def start_generator(event, at_ms):
            source_id = event["source"]
            gen = generators.get(source_id)
            if gen is None:
                period_s = parse_rate(event["rate"])
                gen = _Generator(
                    source_id, max(1, round(period_s * 1000.0)),
                    _check_model(event["payload-model"]),
                    random.Random(f"{seed}:{source_id}"))
                generators[source_id] = gen
            gen.running = True
            heapq.heappush(heap, (at_ms, next(dyn), "emit", gen))

        while heap:
            at_ms, _, kind, payload = heapq.heappop(heap)
            if at_ms > script.duration_ms:
                break
            now = at_ms / 1000.0
            if kind == "sweep":
                stack.sweep(now)
                heapq.heappush(heap, (at_ms + SWEEP_EVERY_MS, next(dyn),
                                      "sweep", None))
            elif kind == "emit":
                gen = payload
                if not gen.running:
                    continue
                stack.observe(gen.source_id,
                              payload_value(gen.model, at_ms, gen.rng), now)
                report.observation_count += 1
                heapq.heappush(heap, (at_ms + gen.period_ms, next(dyn),
                                      "emit", gen))
            elif kind == "event":
                _apply_event(stack, payload, now, start_generator, at_ms,
                             generators)
        report.final = stack.active()
        store.close()
    return report


def _apply_event(stack: IngressStack, event: dict, now: float,
                 start_generator, at_ms: int, generators: dict):
    kind = event["event"]
    if kind == "generate-observations":
        start_generator(event, at_ms)
    elif kind == "fail-source":
        gen = generators.get(event["source"])
        if gen is None:
            raise ConfigurationError(
                f"fail-source: no generator for {event['source']!r}")
        gen.running = False
    elif kind == "recover-source":
        gen = generators.get(event["source"])
        if gen is None:
            raise ConfigurationError(
                f"recover-source: no generator for {event['source']!r}")
        start_generator({"source": event["source"]}, at_ms)
    elif kind == "register-source":
        stack.register_source(event["descriptor"], now)
    elif kind == "operator":
        command = event["command"]
        if command == "set-weights":
            stack.set_weights(event["weights"], now)
        elif command == "pre-activate":
            stack.pre_activate(event["source"], now)
        elif command == "force-switch":
            stack.force_switch(event["data-type"], event["source"], now)


# -- expectation matching ------------------------------------------------------------

def _matches(decision: dict, expectation: dict) -> bool:
    for key, want in expectation.items():
        if key == "rationale-contains":
            if want not in decision.get("rationale", ""):
                return False
        elif decision.get(key) != want:
            return False
    return True


def expectation_outcomes(decisions, expectations) -> list:
    """Ordered-subsequence match; one boolean per expectation."""
    outcomes = []
    cursor = 0
    for expectation in expectations:
        hit = None
        for position in range(cursor, len(decisions)):
            if _matches(decisions[position], expectation):
                hit = position
                break
        outcomes.append(hit is not None)
        if hit is not None:
            cursor = hit + 1
    return outcomes


def check_expectations(decisions, expectations) -> list:
    """Like expectation_outcomes, but as failure messages (empty = pass)."""
    outcomes = expectation_outcomes(decisions, expectations)
    return [
        f"expectation {index + 1} not met in order: "
        f"{json.dumps(expectation, sort_keys=True)}"
        for index, (expectation, met)
        in enumerate(zip(expectations, outcomes)) if not met
    ]


def assert_trace(script: SimulationScript, seed: int | None = None,
                 hysteresis: float = 0.0):
    """Run a script and check its expectations.

    Returns ``(report, failures)``; an empty failure list means every
    expected decision appeared, in order.
    """
    report = run_script(script, seed=seed, hysteresis=hysteresis)
    return report, check_expectations(report.decisions, script.expectations)
