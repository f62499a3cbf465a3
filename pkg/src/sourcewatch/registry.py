"""Attribute taxonomy, per-attribute comparators, and the source registry.

A registry bundles everything the assessment needs to run: the attribute
schema (two categories of attributes with a comparator each), the set of
source descriptors, a weight per attribute, and optional per-pair score
overrides for attribute comparisons a generic rule cannot express.

Registries are immutable once loaded. Mutation happens by deriving a new
registry value (see :meth:`Registry.with_source`) and publishing it whole.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace

from .errors import (
    RegistryParseError,
    SchemaViolation,
    UnknownAttributeError,
    UnknownSourceError,
    ValueKindMismatch,
)
from .values import VALUE_KINDS, canonicalize, normalize_text

DATA_FEATURES = "data-features"
SOURCE_VULNERABILITY = "source-vulnerability"
CATEGORIES = (DATA_FEATURES, SOURCE_VULNERABILITY)

SCORES = (-1, 0, 1)


# ---------------------------------------------------------------------------
# Comparators
# ---------------------------------------------------------------------------

def _check_score(score, context: str) -> int:
    if not isinstance(score, int) or isinstance(score, bool) or score not in SCORES:
        raise SchemaViolation(f"{context}: score must be -1, 0 or +1, got {score!r}")
    return score


@dataclass(frozen=True)
class LookupTableComparator:
    """Symmetric class-pair table with a default for unlisted pairs.

    Entries are keyed by the unordered pair of normalized values, so the
    table cannot express an asymmetric rule by construction.
    """

    entries: tuple  # ((value_a, value_b), score) pairs, values normalized
    default: int = 0

    kind = "lookup-table"

    def __post_init__(self):
        _check_score(self.default, "lookup-table default")
        seen = {}
        for pair, score in self.entries:
            _check_score(score, f"lookup-table entry {pair}")
            if pair in seen and seen[pair] != score:
                raise SchemaViolation(
                    f"conflicting lookup entries for pair {pair}: "
                    f"{seen[pair]} vs {score}")
            seen[pair] = score

    @staticmethod
    def _key(a: str, b: str) -> tuple:
        return tuple(sorted((a, b)))

    @classmethod
    def from_entries(cls, entries, default: int = 0) -> "LookupTableComparator":
        normalized = []
        for entry in entries:
            a, b = entry["pair"]
            normalized.append((cls._key(normalize_text(a), normalize_text(b)),
                               entry["score"]))
        return cls(entries=tuple(normalized), default=default)

    def compare(self, a: str, b: str) -> int:
        table = dict(self.entries)
        return table.get(self._key(a, b), self.default)

    def to_doc(self) -> dict:
        return {
            "kind": self.kind,
            "default": self.default,
            "entries": [{"pair": list(pair), "score": score}
                        for pair, score in self.entries],
        }


@dataclass(frozen=True)
class AbsoluteBandComparator:
    """Two-threshold band over the absolute difference of numeric values.

    |a - b| <= similar_within  -> +1
    |a - b| <= restricted_within -> 0
    otherwise                   -> -1

    Thresholds are in the attribute's canonical unit (seconds for durations
    and rate periods, percentage points for percentages). An "unlimited"
    duration canonicalizes to +inf and therefore scores -1 against any
    finite value, because the difference exceeds every finite threshold.
    """

    similar_within: float
    restricted_within: float

    kind = "absolute-band"

    def __post_init__(self):
        t1, t2 = self.similar_within, self.restricted_within
        if not (isinstance(t1, (int, float)) and isinstance(t2, (int, float))):
            raise SchemaViolation("absolute-band thresholds must be numeric")
        if math.isnan(t1) or math.isnan(t2) or math.isinf(t1) or math.isinf(t2):
            raise SchemaViolation("absolute-band thresholds must be finite")
        if t1 < 0 or t2 < 0 or t1 > t2:
            raise SchemaViolation(
                f"absolute-band thresholds need 0 <= T1 <= T2, "
                f"got T1={t1!r} T2={t2!r}")

    def compare(self, a: float, b: float) -> int:
        diff = abs(a - b)
        if diff <= self.similar_within:
            return 1
        if diff <= self.restricted_within:
            return 0
        return -1

    def to_doc(self) -> dict:
        return {
            "kind": self.kind,
            "similar-within": self.similar_within,
            "restricted-within": self.restricted_within,
        }


@dataclass(frozen=True)
class ExactMatchComparator:
    """Degenerate lookup: identical canonical values score +1, everything
    else scores the mismatch default."""

    mismatch: int = -1

    kind = "exact-match"

    def __post_init__(self):
        _check_score(self.mismatch, "exact-match mismatch")

    def compare(self, a, b) -> int:
        return 1 if a == b else self.mismatch

    def to_doc(self) -> dict:
        return {"kind": self.kind, "mismatch": self.mismatch}


def comparator_from_doc(doc: dict) -> object:
    kind = doc.get("kind")
    try:
        if kind == "lookup-table":
            return LookupTableComparator.from_entries(
                doc.get("entries", []), default=doc.get("default", 0))
        if kind == "absolute-band":
            return AbsoluteBandComparator(
                similar_within=doc["similar-within"],
                restricted_within=doc["restricted-within"])
        if kind == "exact-match":
            return ExactMatchComparator(mismatch=doc.get("mismatch", -1))
    except KeyError as exc:
        raise SchemaViolation(f"comparator missing field {exc}") from None
    raise SchemaViolation(f"unknown comparator kind: {kind!r}")


def compare_attribute(value_a, value_b, spec, value_kind: str = "categorical") -> int:
    """Score two raw attribute values with a comparator.

    Symmetric in its first two arguments; identical canonical values score
    +1 for every comparator kind. The result is always in {-1, 0, +1}.
    """
    a = canonicalize(value_a, value_kind)
    b = canonicalize(value_b, value_kind)
    if a == b:
        return 1
    if spec.kind in ("absolute-band",) and not isinstance(a, float):
        raise ValueKindMismatch(
            f"absolute-band comparator needs numeric values, got {value_a!r}")
    score = spec.compare(a, b)
    assert score in SCORES
    return score


# ---------------------------------------------------------------------------
# Schema
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AttributeSpec:
    attribute_id: str
    category: str
    description: str
    value_kind: str
    comparator: object

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise SchemaViolation(
                f"unknown category {self.category!r}",
                attribute_id=self.attribute_id)
        if self.value_kind not in VALUE_KINDS:
            raise SchemaViolation(
                f"unknown value kind {self.value_kind!r}",
                attribute_id=self.attribute_id)

    def compare(self, value_a, value_b) -> int:
        return compare_attribute(value_a, value_b, self.comparator, self.value_kind)

    def to_doc(self) -> dict:
        return {
            "attribute-id": self.attribute_id,
            "category": self.category,
            "description": self.description,
            "value-kind": self.value_kind,
            "comparator": self.comparator.to_doc(),
        }


@dataclass(frozen=True)
class AttributeSchema:
    attributes: tuple  # AttributeSpec, declaration order is canonical

    def __post_init__(self):
        seen = set()
        for spec in self.attributes:
            if spec.attribute_id in seen:
                raise SchemaViolation("duplicate attribute id",
                                      attribute_id=spec.attribute_id)
            seen.add(spec.attribute_id)

    def __iter__(self):
        return iter(self.attributes)

    def __contains__(self, attribute_id: str) -> bool:
        return any(a.attribute_id == attribute_id for a in self.attributes)

    @property
    def attribute_ids(self) -> tuple:
        return tuple(a.attribute_id for a in self.attributes)

    def get(self, attribute_id: str) -> AttributeSpec:
        for spec in self.attributes:
            if spec.attribute_id == attribute_id:
                return spec
        raise UnknownAttributeError(f"unknown attribute: {attribute_id!r}")

    def category_attributes(self, category: str) -> tuple:
        return tuple(a for a in self.attributes if a.category == category)

    def to_doc(self) -> dict:
        return {"attributes": [a.to_doc() for a in self.attributes]}

    @classmethod
    def from_doc(cls, doc: dict) -> "AttributeSchema":
        attrs = []
        for item in doc.get("attributes", []):
            try:
                attrs.append(AttributeSpec(
                    attribute_id=item["attribute-id"],
                    category=item["category"],
                    description=item.get("description", ""),
                    value_kind=item["value-kind"],
                    comparator=comparator_from_doc(item["comparator"]),
                ))
            except KeyError as exc:
                raise SchemaViolation(f"attribute missing field {exc}") from None
        return cls(attributes=tuple(attrs))


_DEFAULT_ATTRIBUTES = (
    # (id, category, description, value kind, comparator)
    ("environmental-impact", DATA_FEATURES,
     "non-crisis environmental conditions that degrade the feed, such as "
     "weather or darkness",
     "categorical", LookupTableComparator((), default=0)),
    ("level-of-detail", DATA_FEATURES,
     "granularity of the delivered data",
     "free-text", LookupTableComparator((), default=0)),
    ("delay", DATA_FEATURES,
     "latency from measurement to availability for processing",
     "duration", AbsoluteBandComparator(30.0, 120.0)),
    ("frequency", DATA_FEATURES,
     "update rate of the feed",
     "rate", AbsoluteBandComparator(60.0, 600.0)),
    ("spatial-coverage", DATA_FEATURES,
     "portion of the observed area the feed covers",
     "categorical", LookupTableComparator((), default=0)),
    ("activation-delay", DATA_FEATURES,
     "lead time between requesting the source and first usable data",
     "duration", AbsoluteBandComparator(120.0, 1800.0)),
    ("use-case", DATA_FEATURES,
     "which monitored service the feed informs",
     "categorical", ExactMatchComparator(mismatch=-1)),
    ("data-transfer", SOURCE_VULNERABILITY,
     "medium carrying the data to processing",
     "categorical", LookupTableComparator((), default=0)),
    ("sensor-location", SOURCE_VULNERABILITY,
     "placement of the sensing hardware relative to the observed area",
     "categorical", LookupTableComparator((), default=0)),
    ("dependency-on-ci", SOURCE_VULNERABILITY,
     "local critical infrastructure the source needs to keep operating",
     "categorical", LookupTableComparator((), default=0)),
    ("autonomous-operation-time", SOURCE_VULNERABILITY,
     "how long the source keeps delivering after its supply is interrupted",
     "duration", AbsoluteBandComparator(1800.0, 7200.0)),
)

DATA_FEATURE_IDS = tuple(a[0] for a in _DEFAULT_ATTRIBUTES if a[1] == DATA_FEATURES)
VULNERABILITY_IDS = tuple(a[0] for a in _DEFAULT_ATTRIBUTES
                          if a[1] == SOURCE_VULNERABILITY)


def default_schema() -> AttributeSchema:
    """The stock two-category schema: 7 data-feature attributes and 4
    source-vulnerability attributes.

    Lookup tables start empty here; deployments list their class pairs in
    the registry document (see the bundled case study).
    """
    return AttributeSchema(attributes=tuple(
        AttributeSpec(attribute_id=aid, category=cat, description=desc,
                      value_kind=kind, comparator=comp)
        for aid, cat, desc, kind, comp in _DEFAULT_ATTRIBUTES))


# ---------------------------------------------------------------------------
# Sources
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SourceDescriptor:
    """One data source and its attribute values.

    ``attribute_values`` holds the raw values as authored; ``canonical``
    is the comparison form derived from the schema's value kinds.
    ``notes`` carries free-text caveats per attribute (display only).
    """

    source_id: str
    display_name: str
    data_type: str
    attribute_values: dict
    standard: bool = False
    notes: dict = field(default_factory=dict)
    monitoring: dict = field(default_factory=dict)
    canonical: dict = field(default_factory=dict, compare=False)

    def to_doc(self) -> dict:
        doc = {
            "source-id": self.source_id,
            "display-name": self.display_name,
            "data-type": self.data_type,
            "standard": self.standard,
            "attribute-values": dict(self.attribute_values),
        }
        if self.notes:
            doc["notes"] = dict(self.notes)
        if self.monitoring:
            doc["monitoring"] = dict(self.monitoring)
        return doc

    @classmethod
    def from_doc(cls, doc: dict) -> "SourceDescriptor":
        try:
            return cls(
                source_id=doc["source-id"],
                display_name=doc.get("display-name", doc["source-id"]),
                data_type=doc["data-type"],
                attribute_values=dict(doc["attribute-values"]),
                standard=bool(doc.get("standard", False)),
                notes=dict(doc.get("notes", {})),
                monitoring=dict(doc.get("monitoring", {})),
            )
        except KeyError as exc:
            raise SchemaViolation(
                f"source missing field {exc}",
                source_id=doc.get("source-id")) from None


def _validate_descriptor(descriptor: SourceDescriptor,
                         schema: AttributeSchema) -> SourceDescriptor:
    """Check a descriptor against the schema and cache canonical values."""
    canonical = {}
    for attribute_id in descriptor.attribute_values:
        if attribute_id not in schema:
            raise SchemaViolation("value for unknown attribute",
                                  source_id=descriptor.source_id,
                                  attribute_id=attribute_id)
    for spec in schema:
        if spec.attribute_id not in descriptor.attribute_values:
            raise SchemaViolation("missing attribute value",
                                  source_id=descriptor.source_id,
                                  attribute_id=spec.attribute_id)
        raw = descriptor.attribute_values[spec.attribute_id]
        try:
            canonical[spec.attribute_id] = canonicalize(raw, spec.value_kind)
        except ValueKindMismatch as exc:
            raise SchemaViolation(f"bad value: {exc}",
                                  source_id=descriptor.source_id,
                                  attribute_id=spec.attribute_id) from None
    for key in descriptor.monitoring:
        if key not in ("grace-multiplier", "margin-s"):
            raise SchemaViolation(f"unknown monitoring option {key!r}",
                                  source_id=descriptor.source_id)
    return replace(descriptor, canonical=canonical)


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

def override_key(source_a: str, source_b: str, attribute_id: str) -> tuple:
    return (tuple(sorted((source_a, source_b))), attribute_id)


@dataclass(frozen=True)
class Registry:
    schema: AttributeSchema
    sources: dict          # source_id -> SourceDescriptor, insertion order
    weights: dict          # attribute_id -> float, covers every attribute
    overrides: dict = field(default_factory=dict)   # override_key -> score
    plausibility: dict = field(default_factory=dict)  # data_type -> profile

    @property
    def version(self) -> str:
        digest = hashlib.sha256(
            json.dumps(self.to_doc(), sort_keys=True).encode()).hexdigest()
        return digest[:12]

    def data_types(self) -> tuple:
        seen = []
        for descriptor in self.sources.values():
            if descriptor.data_type not in seen:
                seen.append(descriptor.data_type)
        return tuple(seen)

    def sources_of(self, data_type: str) -> tuple:
        return tuple(d for d in self.sources.values() if d.data_type == data_type)

    def standard_source(self, data_type: str):
        for descriptor in self.sources_of(data_type):
            if descriptor.standard:
                return descriptor.source_id
        return None

    def get(self, source_id: str) -> SourceDescriptor:
        try:
            return self.sources[source_id]
        except KeyError:
            raise UnknownSourceError(f"unknown source: {source_id!r}") from None

    def override_score(self, source_a: str, source_b: str, attribute_id: str):
        return self.overrides.get(override_key(source_a, source_b, attribute_id))

    def with_source(self, descriptor: SourceDescriptor) -> "Registry":
        """Derive a new registry with one more source (copy-on-write)."""
        if descriptor.source_id in self.sources:
            raise SchemaViolation("duplicate source id",
                                  source_id=descriptor.source_id)
        if descriptor.standard and self.standard_source(descriptor.data_type):
            raise SchemaViolation(
                f"data type {descriptor.data_type!r} already has a standard source",
                source_id=descriptor.source_id)
        validated = _validate_descriptor(descriptor, self.schema)
        sources = dict(self.sources)
        sources[validated.source_id] = validated
        return replace(self, sources=sources)

    def with_weights(self, weights: dict) -> "Registry":
        return replace(self, weights=_validate_weights(weights, self.schema))

    def to_doc(self) -> dict:
        return {
            "schema": self.schema.to_doc(),
            "weights": dict(self.weights),
            "sources": [d.to_doc() for d in self.sources.values()],
            "overrides": [
                {"source-a": pair[0], "source-b": pair[1],
                 "attribute-id": attribute_id, "score": score}
                for (pair, attribute_id), score in self.overrides.items()
            ],
            **({"plausibility": self.plausibility} if self.plausibility else {}),
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_doc(), indent=indent, sort_keys=False)


def _validate_weights(weights: dict, schema: AttributeSchema) -> dict:
    for attribute_id, value in weights.items():
        if attribute_id not in schema:
            raise UnknownAttributeError(
                f"weight for unknown attribute: {attribute_id!r}")
        if isinstance(value, bool) or not isinstance(value, (int, float)) \
                or math.isnan(value) or math.isinf(value) or value < 0:
            raise SchemaViolation(f"weight must be a finite non-negative "
                                  f"number, got {value!r}",
                                  attribute_id=attribute_id)
    # every attribute gets a weight, 1.0 unless stated otherwise
    return {spec.attribute_id: float(weights.get(spec.attribute_id, 1.0))
            for spec in schema}


def load_registry(document) -> Registry:
    """Parse and validate a registry document.

    ``document`` is a JSON string or an already-parsed dict with the keys
    ``schema``, ``weights``, ``sources``, ``overrides`` and optionally
    ``plausibility``. ``schema`` may be the string ``"default"``.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise RegistryParseError(f"malformed registry document: {exc}") from None
    if not isinstance(document, dict):
        raise RegistryParseError(
            f"registry document must be an object, got {type(document).__name__}")

    schema_doc = document.get("schema", "default")
    if schema_doc == "default":
        schema = default_schema()
    else:
        schema = AttributeSchema.from_doc(schema_doc)

    weights = _validate_weights(document.get("weights", {}), schema)

    sources: dict = {}
    for doc in document.get("sources", []):
        descriptor = _validate_descriptor(SourceDescriptor.from_doc(doc), schema)
        if descriptor.source_id in sources:
            raise SchemaViolation("duplicate source id",
                                  source_id=descriptor.source_id)
        sources[descriptor.source_id] = descriptor
    standards: dict = {}
    for descriptor in sources.values():
        if descriptor.standard:
            if descriptor.data_type in standards:
                raise SchemaViolation(
                    f"data type {descriptor.data_type!r} declares two standard "
                    f"sources: {standards[descriptor.data_type]!r} and "
                    f"{descriptor.source_id!r}",
                    source_id=descriptor.source_id)
            standards[descriptor.data_type] = descriptor.source_id

    overrides: dict = {}
    for item in document.get("overrides", []):
        try:
            a, b = item["source-a"], item["source-b"]
            attribute_id = item["attribute-id"]
            score = item["score"]
        except KeyError as exc:
            raise SchemaViolation(f"override missing field {exc}") from None
        for source_id in (a, b):
            if source_id not in sources:
                raise SchemaViolation("override references unknown source",
                                      source_id=source_id,
                                      attribute_id=attribute_id)
        if attribute_id not in schema:
            raise UnknownAttributeError(
                f"override for unknown attribute: {attribute_id!r}")
        _check_score(score, f"override ({a}, {b}, {attribute_id})")
        key = override_key(a, b, attribute_id)
        if key in overrides and overrides[key] != score:
            raise SchemaViolation(
                f"conflicting overrides for ({a}, {b})",
                attribute_id=attribute_id)
        overrides[key] = score

    plausibility = {}
    for data_type, profile in document.get("plausibility", {}).items():
        if not isinstance(profile, dict):
            raise RegistryParseError(
                f"plausibility profile for {data_type!r} must be an object")
        for option, value in profile.items():
            if option not in ("min", "max", "max-step-per-s"):
                raise RegistryParseError(
                    f"unknown plausibility option {option!r} for {data_type!r}")
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise RegistryParseError(
                    f"plausibility option {option!r} must be numeric")
        plausibility[data_type] = dict(profile)

    return Registry(schema=schema, sources=sources, weights=weights,
                    overrides=overrides, plausibility=plausibility)


def load_registry_file(path) -> Registry:
    with open(path, encoding="utf-8") as handle:
        return load_registry(handle.read())
