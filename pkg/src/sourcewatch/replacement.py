"""Failover decisions and the active-source designation.

Before anything breaks, :func:`run_assessment` turns the registry into an
:class:`AssessmentPack`: one similarity matrix per data type plus the
designated standard (baseline) source. In a crisis the
:class:`ReplacementManager` consumes health states and answers every
disruption with a :class:`ReplacementDecision`:

* ``no-action-redundancy``: nothing to do (equivalent source already in
  place, or the trigger was stale)
* ``activate-fallback``: designation moves to the best-ranked candidate
* ``integrate-new``: a source that appeared mid-crisis was folded into
  the matrices
* ``alarm``: no candidate left; a human has to act

The manager owns the designation. It never designates a failed or
retired source, and an alarm clears the designation until some source
becomes available again.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from .errors import (
    ConfigurationError,
    NotActivatableError,
    UnknownSourceError,
)
from .monitor import UNKNOWN, SourceState
from .registry import Registry, SourceDescriptor
from .similarity import (
    AssessmentMatrix,
    RankingEntry,
    build_assessment_matrix,
    build_assessment_pack,
    extend_assessment_matrix,
    rank_candidates,
    reweigh,
)

_UNAVAILABLE = (SourceState.FAILED.value, SourceState.RETIRED.value)


class Action(str, enum.Enum):
    NO_ACTION = "no-action-redundancy"
    ACTIVATE_FALLBACK = "activate-fallback"
    INTEGRATE_NEW = "integrate-new"
    ALARM = "alarm"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class ReplacementDecision:
    data_type: str
    failed_source: str | None
    ranking: tuple          # RankingEntry, best first
    chosen: str | None
    action: Action
    decided_at: float
    rationale: str

    def __post_init__(self):
        # an alarm is exactly the absence of a chosen source
        assert (self.action is Action.ALARM) == (self.chosen is None)

    def to_doc(self) -> dict:
        return {
            "data-type": self.data_type,
            "failed-source": self.failed_source,
            "ranking": [entry.to_doc() for entry in self.ranking],
            "chosen": self.chosen,
            "action": self.action.value,
            "decided-at": self.decided_at,
            "rationale": self.rationale,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ReplacementDecision":
        return cls(
            data_type=doc["data-type"],
            failed_source=doc.get("failed-source"),
            ranking=tuple(RankingEntry(
                source_id=e["source-id"], rank_score=e["rank-score"],
                feature_sum=e["feature-sum"],
                vulnerability_sum=e["vulnerability-sum"])
                for e in doc.get("ranking", [])),
            chosen=doc.get("chosen"),
            action=Action(doc["action"]),
            decided_at=doc["decided-at"],
            rationale=doc.get("rationale", ""),
        )


@dataclass(frozen=True)
class AssessmentPack:
    """Precomputed decision basis: matrices plus baseline designations."""

    matrices: dict          # data_type -> AssessmentMatrix
    standard_source: dict   # data_type -> source_id
    prepared_at: float

    def matrix(self, data_type: str) -> AssessmentMatrix:
        try:
            return self.matrices[data_type]
        except KeyError:
            raise ConfigurationError(
                f"no assessment matrix for data type {data_type!r}") from None

    @property
    def digest(self) -> str:
        import hashlib
        import json
        doc = {"standard-source": dict(sorted(self.standard_source.items())),
               "matrices": {dt: self.matrices[dt].digest
                            for dt in sorted(self.matrices)}}
        return hashlib.sha256(
            json.dumps(doc, sort_keys=True).encode()).hexdigest()[:12]

    def to_doc(self) -> dict:
        return {
            "prepared-at": self.prepared_at,
            "standard-source": dict(self.standard_source),
            "matrices": {dt: m.to_doc() for dt, m in self.matrices.items()},
        }


def run_assessment(registry: Registry, now: float = 0.0,
                   weights: dict | None = None) -> AssessmentPack:
    """Build the full pre-crisis decision basis from the registry.

    Every data type must flag exactly one standard source; that source is
    the yardstick all candidates are ranked against later.
    """
    standards = {}
    for data_type in registry.data_types():
        standard = registry.standard_source(data_type)
        if standard is None:
            raise ConfigurationError(
                f"data type {data_type!r} has sources but none is marked "
                f"standard")
        standards[data_type] = standard
    matrices = build_assessment_pack(registry, created_at=now,
                                     weights=weights)
    return AssessmentPack(matrices=matrices, standard_source=standards,
                          prepared_at=now)


def _state(statuses: dict, source_id: str) -> str:
    state = statuses.get(source_id, UNKNOWN)
    return state.value if isinstance(state, SourceState) else str(state)


def _eligible(matrix: AssessmentMatrix, statuses: dict,
              exclude: str | None = None) -> list:
    return [source_id for source_id in matrix.source_ids
            if source_id != exclude
            and _state(statuses, source_id) not in _UNAVAILABLE]


class ReplacementManager:
    """Serialized decision-making for every data type.

    All methods mutate the designation together with the decision they
    return, so callers observe the two in lockstep. The caller is
    responsible for persisting decisions it wants on the record.
    """

    def __init__(self, pack: AssessmentPack, hysteresis: float = 0.0,
                 designations: dict | None = None):
        if hysteresis < 0:
            raise ConfigurationError("hysteresis delta must be >= 0")
        self.pack = pack
        self.hysteresis = hysteresis
        self._active: dict = dict(pack.standard_source) \
            if designations is None else dict(designations)
        self._alarms: set = {dt for dt, src in self._active.items()
                             if src is None}

    # -- designation views ---------------------------------------------------

    def designation(self, data_type: str) -> str | None:
        if data_type not in self.pack.matrices:
            raise ConfigurationError(f"unknown data type {data_type!r}")
        return self._active.get(data_type)

    def alarmed(self, data_type: str) -> bool:
        return data_type in self._alarms

    def snapshot(self) -> dict:
        return {data_type: {"source-id": self._active.get(data_type),
                            "alarm": data_type in self._alarms,
                            "standard": self.pack.standard_source[data_type]}
                for data_type in sorted(self.pack.matrices)}

    def _designate(self, data_type: str, source_id: str | None):
        self._active[data_type] = source_id
        if source_id is None:
            self._alarms.add(data_type)
        else:
            self._alarms.discard(data_type)

    # -- decision makers -----------------------------------------------------

    def _ranked(self, data_type: str, statuses: dict,
                exclude: str | None = None):
        """Eligible candidates ranked against the standard source."""
        matrix = self.pack.matrix(data_type)
        standard = self.pack.standard_source[data_type]
        eligible = _eligible(matrix, statuses, exclude=exclude)
        ranking = rank_candidates(matrix, standard, candidates=eligible)
        standard_ok = standard in eligible
        return standard, ranking, standard_ok

    def on_source_failure(self, data_type: str, failed_source: str,
                          statuses: dict, now: float) -> ReplacementDecision:
        """React to the loss of the designated source of a data type."""
        matrix = self.pack.matrix(data_type)
        if failed_source not in matrix.source_ids:
            raise UnknownSourceError(
                f"{failed_source!r} is not a {data_type!r} source")
        designated = self._active.get(data_type)
        if designated != failed_source and designated is not None:
            return ReplacementDecision(
                data_type=data_type, failed_source=failed_source,
                ranking=(), chosen=designated, action=Action.NO_ACTION,
                decided_at=now, rationale="already switched")
        standard, ranking, standard_ok = self._ranked(
            data_type, statuses, exclude=failed_source)
        if standard_ok and standard != failed_source:
            chosen, rationale = standard, (
                "standard source available; designating the baseline")
        elif ranking:
            chosen = ranking[0].source_id
            rationale = (f"best-ranked fallback for the baseline "
                         f"({ranking[0].rank_score:g})")
        else:
            self._designate(data_type, None)
            return ReplacementDecision(
                data_type=data_type, failed_source=failed_source,
                ranking=ranking, chosen=None, action=Action.ALARM,
                decided_at=now,
                rationale="no replacement candidate available")
        self._designate(data_type, chosen)
        return ReplacementDecision(
            data_type=data_type, failed_source=failed_source,
            ranking=ranking, chosen=chosen, action=Action.ACTIVATE_FALLBACK,
            decided_at=now, rationale=rationale)

    def review_active(self, data_type: str, statuses: dict,
                      now: float) -> ReplacementDecision:
        """Re-check the current designation after a recovery or reweigh.

        The standard source wins outright whenever it is healthy again;
        any other challenger must beat the incumbent's rank by more than
        the hysteresis delta.
        """
        matrix = self.pack.matrix(data_type)
        standard = self.pack.standard_source[data_type]
        incumbent = self._active.get(data_type)
        if incumbent is None:
            raise ConfigurationError(
                f"{data_type!r} has no active source to review")

        def healthy(source_id):
            return _state(statuses, source_id) == SourceState.ACTIVE.value

        ranking = rank_candidates(
            matrix, standard,
            candidates=[s for s in matrix.source_ids if healthy(s)])
        if healthy(standard) and incumbent != standard:
            self._designate(data_type, standard)
            return ReplacementDecision(
                data_type=data_type, failed_source=None, ranking=ranking,
                chosen=standard, action=Action.ACTIVATE_FALLBACK,
                decided_at=now,
                rationale="standard source recovered; switching back")
        challenger = next((entry for entry in ranking
                           if entry.source_id != incumbent), None)
        if incumbent != standard and challenger is not None \
                and not healthy(standard):
            incumbent_rank = matrix.rank_score(standard, incumbent)
            if challenger.rank_score > incumbent_rank + self.hysteresis:
                self._designate(data_type, challenger.source_id)
                return ReplacementDecision(
                    data_type=data_type, failed_source=None, ranking=ranking,
                    chosen=challenger.source_id,
                    action=Action.ACTIVATE_FALLBACK, decided_at=now,
                    rationale=(f"{challenger.source_id} outranks "
                               f"{incumbent} by more than the hysteresis "
                               f"delta {self.hysteresis:g}"))
        return ReplacementDecision(
            data_type=data_type, failed_source=None, ranking=ranking,
            chosen=incumbent, action=Action.NO_ACTION, decided_at=now,
            rationale="no healthier candidate")

    def resolve_vacancy(self, data_type: str, statuses: dict,
                        now: float) -> ReplacementDecision:
        """Try to clear an outstanding alarm after a source became usable."""
        if self._active.get(data_type) is not None:
            raise ConfigurationError(
                f"{data_type!r} has a designation; nothing to resolve")
        standard, ranking, standard_ok = self._ranked(data_type, statuses)
        if standard_ok:
            chosen, rationale = standard, "standard source available again"
        elif ranking:
            chosen = ranking[0].source_id
            rationale = "alarm cleared; best-ranked source designated"
        else:
            return ReplacementDecision(
                data_type=data_type, failed_source=None, ranking=ranking,
                chosen=None, action=Action.ALARM, decided_at=now,
                rationale="still no replacement candidate available")
        self._designate(data_type, chosen)
        return ReplacementDecision(
            data_type=data_type, failed_source=None, ranking=ranking,
            chosen=chosen, action=Action.ACTIVATE_FALLBACK, decided_at=now,
            rationale=rationale)

    def on_source_available(self, descriptor: SourceDescriptor,
                            registry: Registry, statuses: dict,
                            now: float):
        """Integrate a source that appeared mid-crisis.

        Returns ``(updated registry, decisions)``: the integrate-new
        decision, followed by a fresh failure decision when the data
        type's designation is missing or points at a failed source.
        """
        grown = registry.with_source(descriptor)
        data_type = descriptor.data_type
        matrices = dict(self.pack.matrices)
        if data_type in matrices:
            matrices[data_type] = extend_assessment_matrix(
                matrices[data_type], grown, descriptor.source_id)
        else:
            matrices[data_type] = build_assessment_matrix(
                grown, data_type, created_at=now)
        standards = dict(self.pack.standard_source)
        if data_type not in standards:
            if not descriptor.standard:
                raise ConfigurationError(
                    f"first source of data type {data_type!r} must be "
                    f"flagged standard")
            standards[data_type] = descriptor.source_id
            self._active.setdefault(data_type, descriptor.source_id)
        self.pack = replace(self.pack, matrices=matrices,
                            standard_source=standards)

        matrix = self.pack.matrix(data_type)
        incumbent = self._active.get(data_type)
        rationale = "new source integrated into the assessment"
        if incumbent is not None and incumbent != descriptor.source_id:
            assessment = matrix.pair(descriptor.source_id, incumbent)
            own = matrix.pair(incumbent, incumbent)
            if (assessment.feature_sum == own.feature_sum
                    and assessment.vulnerability_sum == own.vulnerability_sum):
                rationale += "; redundant with the active source"
        decisions = [ReplacementDecision(
            data_type=data_type, failed_source=None, ranking=(),
            chosen=descriptor.source_id, action=Action.INTEGRATE_NEW,
            decided_at=now, rationale=rationale)]

        if incumbent is None:
            decisions.append(self.resolve_vacancy(data_type, statuses, now))
        elif _state(statuses, incumbent) in _UNAVAILABLE:
            decisions.append(self.on_source_failure(
                data_type, incumbent, statuses, now))
        return grown, decisions

    def force_switch(self, data_type: str, source_id: str, statuses: dict,
                     now: float) -> ReplacementDecision:
        """Operator override: designate a source by hand."""
        matrix = self.pack.matrix(data_type)
        if source_id not in matrix.source_ids:
            raise UnknownSourceError(
                f"{source_id!r} is not a {data_type!r} source")
        if _state(statuses, source_id) in _UNAVAILABLE:
            raise NotActivatableError(f"source not available: {source_id} "
                                      f"is {_state(statuses, source_id)}")
        standard = self.pack.standard_source[data_type]
        ranking = rank_candidates(
            matrix, standard,
            candidates=_eligible(matrix, statuses))
        self._designate(data_type, source_id)
        return ReplacementDecision(
            data_type=data_type, failed_source=None, ranking=ranking,
            chosen=source_id, action=Action.ACTIVATE_FALLBACK,
            decided_at=now, rationale="operator override")

    # -- pack maintenance ------------------------------------------------------

    def reweigh(self, weights: dict, now: float) -> AssessmentPack:
        """Swap in matrices recomputed under adjusted weights."""
        matrices = {data_type: reweigh(matrix, weights)
                    for data_type, matrix in self.pack.matrices.items()}
        self.pack = replace(self.pack, matrices=matrices, prepared_at=now)
        return self.pack
