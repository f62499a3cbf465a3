"""Pairwise source assessment and candidate ranking.

For a pair of sources every schema attribute is scored -1, 0 or +1 by its
comparator, and the scores are folded into two weighted sums, one per
category. The data-features sum says how well one source's data can stand
in for the other's; the source-vulnerability sum says how likely both are
to fail together. Ranking prefers candidates with a high feature sum and
a low vulnerability sum.

Matrices are precomputed per data type so that a replacement decision in a
degraded situation is a lookup, not a computation. Sums are evaluated in
schema declaration order, which keeps rebuilds bit-identical with
incremental updates and reweighings.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace

from .errors import (
    MatrixError,
    SchemaViolation,
    UnknownAttributeError,
    UnknownSourceError,
)
from .registry import DATA_FEATURES, SOURCE_VULNERABILITY, Registry


def _pair_key(source_a: str, source_b: str) -> tuple:
    return tuple(sorted((source_a, source_b)))


def _weighted_sum(scores: dict, weights: dict, attribute_ids: tuple) -> float:
    # fixed summation order: attribute declaration order of the schema
    total = 0.0
    for attribute_id in attribute_ids:
        total += weights[attribute_id] * scores[attribute_id]
    return total


@dataclass(frozen=True)
class PairAssessment:
    """Raw per-attribute scores for one unordered source pair plus the two
    weighted category sums in effect when the pair was assessed."""

    source_a: str
    source_b: str
    scores: dict            # attribute_id -> -1 | 0 | +1
    feature_sum: float
    vulnerability_sum: float

    def score(self, attribute_id: str) -> int:
        try:
            return self.scores[attribute_id]
        except KeyError:
            raise UnknownAttributeError(
                f"no score for attribute {attribute_id!r}") from None

    def to_doc(self) -> dict:
        return {
            "source-a": self.source_a,
            "source-b": self.source_b,
            "scores": dict(self.scores),
            "feature-sum": self.feature_sum,
            "vulnerability-sum": self.vulnerability_sum,
        }


def assess_pair(registry: Registry, source_a: str, source_b: str,
                weights: dict | None = None) -> PairAssessment:
    """Score one source pair attribute by attribute.

    Identical canonical values always score +1. A per-pair override in the
    registry beats the attribute's comparator. ``weights`` defaults to the
    registry weights.
    """
    a, b = _pair_key(source_a, source_b)
    desc_a = registry.get(a)
    desc_b = registry.get(b)
    weights = registry.weights if weights is None else weights
    scores = {}
    for spec in registry.schema:
        override = registry.override_score(a, b, spec.attribute_id)
        if override is not None:
            scores[spec.attribute_id] = override
        else:
            scores[spec.attribute_id] = spec.compare(
                desc_a.attribute_values[spec.attribute_id],
                desc_b.attribute_values[spec.attribute_id])
    feature_ids = tuple(s.attribute_id for s in
                        registry.schema.category_attributes(DATA_FEATURES))
    vulnerability_ids = tuple(s.attribute_id for s in
                              registry.schema.category_attributes(SOURCE_VULNERABILITY))
    return PairAssessment(
        source_a=a, source_b=b, scores=scores,
        feature_sum=_weighted_sum(scores, weights, feature_ids),
        vulnerability_sum=_weighted_sum(scores, weights, vulnerability_ids),
    )


def _check_weights(weights: dict, known_ids: tuple) -> dict:
    for attribute_id, value in weights.items():
        if attribute_id not in known_ids:
            raise UnknownAttributeError(
                f"weight for unknown attribute: {attribute_id!r}")
        if isinstance(value, bool) or not isinstance(value, (int, float)) \
                or math.isnan(value) or math.isinf(value) or value < 0:
            raise SchemaViolation(
                f"weight must be a finite non-negative number, got {value!r}",
                attribute_id=attribute_id)
    return {k: float(v) for k, v in weights.items()}


@dataclass(frozen=True)
class AssessmentMatrix:
    """All pairwise assessments among one data type's sources.

    The matrix snapshots the weights and attribute split it was built
    with, so it stays interpretable after the registry moves on; the
    ``registry_version`` records which registry produced the raw scores.
    """

    data_type: str
    registry_version: str
    created_at: float
    weights: dict               # attribute_id -> float
    feature_ids: tuple
    vulnerability_ids: tuple
    source_ids: tuple           # sorted
    pairs: dict                 # sorted (a, b) -> PairAssessment

    def _require(self, source_id: str):
        if source_id not in self.source_ids:
            raise UnknownSourceError(
                f"source {source_id!r} not in the {self.data_type!r} matrix")

    def pair(self, source_a: str, source_b: str) -> PairAssessment:
        self._require(source_a)
        self._require(source_b)
        if source_a == source_b:
            return self._self_assessment(source_a)
        return self.pairs[_pair_key(source_a, source_b)]

    def _self_assessment(self, source_id: str) -> PairAssessment:
        scores = {aid: 1 for aid in self.feature_ids + self.vulnerability_ids}
        return PairAssessment(
            source_a=source_id, source_b=source_id, scores=scores,
            feature_sum=_weighted_sum(scores, self.weights, self.feature_ids),
            vulnerability_sum=_weighted_sum(scores, self.weights,
                                            self.vulnerability_ids))

    def feature_sum(self, source_a: str, source_b: str) -> float:
        return self.pair(source_a, source_b).feature_sum

    def vulnerability_sum(self, source_a: str, source_b: str) -> float:
        return self.pair(source_a, source_b).vulnerability_sum

    def rank_score(self, source_a: str, source_b: str) -> float:
        assessment = self.pair(source_a, source_b)
        return assessment.feature_sum - assessment.vulnerability_sum

    @property
    def digest(self) -> str:
        doc = self.to_doc()
        doc.pop("created-at")
        raw = json.dumps(doc, sort_keys=True).encode()
        return hashlib.sha256(raw).hexdigest()[:12]

    def same_contents(self, other: "AssessmentMatrix") -> bool:
        """Equality that ignores when the matrices were built."""
        return self.digest == other.digest

    def to_doc(self) -> dict:
        return {
            "data-type": self.data_type,
            "registry-version": self.registry_version,
            "created-at": self.created_at,
            "weights": dict(self.weights),
            "feature-attributes": list(self.feature_ids),
            "vulnerability-attributes": list(self.vulnerability_ids),
            "sources": list(self.source_ids),
            "pairs": [self.pairs[key].to_doc() for key in sorted(self.pairs)],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "AssessmentMatrix":
        try:
            pairs = {}
            for item in doc["pairs"]:
                assessment = PairAssessment(
                    source_a=item["source-a"],
                    source_b=item["source-b"],
                    scores=dict(item["scores"]),
                    feature_sum=float(item["feature-sum"]),
                    vulnerability_sum=float(item["vulnerability-sum"]))
                pairs[_pair_key(assessment.source_a, assessment.source_b)] = assessment
            return cls(
                data_type=doc["data-type"],
                registry_version=doc["registry-version"],
                created_at=float(doc["created-at"]),
                weights=dict(doc["weights"]),
                feature_ids=tuple(doc["feature-attributes"]),
                vulnerability_ids=tuple(doc["vulnerability-attributes"]),
                source_ids=tuple(sorted(doc["sources"])),
                pairs=pairs)
        except KeyError as exc:
            raise MatrixError(f"matrix document missing field {exc}") from None


def build_assessment_matrix(registry: Registry, data_type: str,
                            created_at: float = 0.0,
                            weights: dict | None = None) -> AssessmentMatrix:
    """Assess every unordered pair among the data type's sources."""
    descriptors = registry.sources_of(data_type)
    if not descriptors:
        raise MatrixError(f"no sources of data type {data_type!r}")
    if weights is None:
        weights = registry.weights
    else:
        weights = dict(registry.weights) | _check_weights(
            weights, registry.schema.attribute_ids)
    source_ids = tuple(sorted(d.source_id for d in descriptors))
    pairs = {}
    for i, a in enumerate(source_ids):
        for b in source_ids[i + 1:]:
            pairs[(a, b)] = assess_pair(registry, a, b, weights=weights)
    feature_ids = tuple(s.attribute_id for s in
                        registry.schema.category_attributes(DATA_FEATURES))
    vulnerability_ids = tuple(s.attribute_id for s in
                              registry.schema.category_attributes(SOURCE_VULNERABILITY))
    return AssessmentMatrix(
        data_type=data_type, registry_version=registry.version,
        created_at=created_at, weights=dict(weights),
        feature_ids=feature_ids, vulnerability_ids=vulnerability_ids,
        source_ids=source_ids, pairs=pairs)


def build_assessment_pack(registry: Registry, created_at: float = 0.0,
                          weights: dict | None = None) -> dict:
    """One matrix per data type in the registry."""
    return {data_type: build_assessment_matrix(registry, data_type,
                                               created_at=created_at,
                                               weights=weights)
            for data_type in registry.data_types()}


def extend_assessment_matrix(matrix: AssessmentMatrix, registry: Registry,
                             source_id: str,
                             created_at: float | None = None) -> AssessmentMatrix:
    """Fold one newly registered source into an existing matrix.

    Only the new source's pairs are assessed; existing pair scores are
    kept verbatim. The result is identical to a full rebuild with the
    matrix's own weights.
    """
    descriptor = registry.get(source_id)
    if descriptor.data_type != matrix.data_type:
        raise MatrixError(
            f"source {source_id!r} has data type {descriptor.data_type!r}, "
            f"matrix covers {matrix.data_type!r}")
    if source_id in matrix.source_ids:
        raise MatrixError(f"source {source_id!r} already in the matrix")
    pairs = dict(matrix.pairs)
    for other in matrix.source_ids:
        pairs[_pair_key(source_id, other)] = assess_pair(
            registry, source_id, other, weights=matrix.weights)
    return replace(
        matrix,
        registry_version=registry.version,
        created_at=matrix.created_at if created_at is None else created_at,
        source_ids=tuple(sorted(matrix.source_ids + (source_id,))),
        pairs=pairs)


def reweigh(matrix: AssessmentMatrix, weights: dict,
            created_at: float | None = None) -> AssessmentMatrix:
    """Recompute the category sums under adjusted weights.

    ``weights`` is a partial mapping merged over the matrix weights. The
    raw scores are weight-independent and are reused as stored; the result
    equals a full rebuild under the merged weights.
    """
    merged = dict(matrix.weights) | _check_weights(
        weights, matrix.feature_ids + matrix.vulnerability_ids)
    pairs = {
        key: replace(
            assessment,
            feature_sum=_weighted_sum(assessment.scores, merged,
                                      matrix.feature_ids),
            vulnerability_sum=_weighted_sum(assessment.scores, merged,
                                            matrix.vulnerability_ids))
        for key, assessment in matrix.pairs.items()
    }
    return replace(
        matrix, weights=merged, pairs=pairs,
        created_at=matrix.created_at if created_at is None else created_at)


@dataclass(frozen=True)
class RankingEntry:
    source_id: str
    rank_score: float
    feature_sum: float
    vulnerability_sum: float

    def to_doc(self) -> dict:
        return {
            "source-id": self.source_id,
            "rank-score": self.rank_score,
            "feature-sum": self.feature_sum,
            "vulnerability-sum": self.vulnerability_sum,
        }


def rank_candidates(matrix: AssessmentMatrix, reference: str,
                    candidates=None) -> tuple:
    """Rank replacement candidates against a reference source.

    Higher feature similarity raises the rank, higher vulnerability
    similarity lowers it. Ties break toward the lexically smaller source
    id so the order is total and reproducible.
    """
    matrix._require(reference)
    if candidates is None:
        candidates = [s for s in matrix.source_ids if s != reference]
    entries = []
    for source_id in candidates:
        if source_id == reference:
            continue
        assessment = matrix.pair(reference, source_id)
        entries.append(RankingEntry(
            source_id=source_id,
            rank_score=assessment.feature_sum - assessment.vulnerability_sum,
            feature_sum=assessment.feature_sum,
            vulnerability_sum=assessment.vulnerability_sum))
    entries.sort(key=lambda e: (-e.rank_score, e.source_id))
    return tuple(entries)


def _fmt(value: float) -> str:
    if value == int(value) and math.isfinite(value):
        return str(int(value))
    return f"{value:g}"


def matrix_rows(matrix: AssessmentMatrix) -> list:
    """Render the matrix as rows of strings: one row per attribute plus a
    SUM row per category, one column per source pair."""
    keys = sorted(matrix.pairs)
    header = ["attribute"] + [f"{a} / {b}" for a, b in keys]
    rows = [header]
    for category_ids, label in ((matrix.feature_ids, "SUM data features"),
                                (matrix.vulnerability_ids,
                                 "SUM source vulnerability")):
        for attribute_id in category_ids:
            rows.append([attribute_id] + [
                _fmt(matrix.pairs[key].scores[attribute_id]) for key in keys])
        if label.endswith("features"):
            sums = [matrix.pairs[key].feature_sum for key in keys]
        else:
            sums = [matrix.pairs[key].vulnerability_sum for key in keys]
        rows.append([label] + [_fmt(s) for s in sums])
    return rows


def matrix_csv_rows(matrix: AssessmentMatrix):
    """Flat per-score rows for spreadsheet export."""
    for key in sorted(matrix.pairs):
        assessment = matrix.pairs[key]
        for category, ids in ((DATA_FEATURES, matrix.feature_ids),
                              (SOURCE_VULNERABILITY, matrix.vulnerability_ids)):
            for attribute_id in ids:
                yield {
                    "source-a": assessment.source_a,
                    "source-b": assessment.source_b,
                    "category": category,
                    "attribute": attribute_id,
                    "score": assessment.scores[attribute_id],
                    "weight": matrix.weights[attribute_id],
                }
