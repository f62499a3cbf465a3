import json
import random

import pytest

from sourcewatch.errors import (
    RegistryParseError,
    SchemaViolation,
    UnknownAttributeError,
    UnknownSourceError,
)
from sourcewatch.registry import (
    AbsoluteBandComparator,
    AttributeSchema,
    ExactMatchComparator,
    LookupTableComparator,
    SourceDescriptor,
    compare_attribute,
    default_schema,
    load_registry,
    load_registry_file,
)

from regsynth import random_registry_doc

CASE_STUDY = "src/sourcewatch/data/registry.json"


# --- comparators -----------------------------------------------------------

def test_lookup_table_is_symmetric_and_defaults():
    comparator = LookupTableComparator.from_entries(
        [{"pair": ["Wired", "radio"], "score": -1}], default=0)
    assert compare_attribute("wired", "radio", comparator) == -1
    assert compare_attribute("radio", "wired", comparator) == -1
    assert compare_attribute("radio", "courier", comparator) == 0


def test_lookup_table_rejects_conflicting_entries():
    with pytest.raises(SchemaViolation):
        LookupTableComparator.from_entries([
            {"pair": ["a", "b"], "score": 1},
            {"pair": ["b", "a"], "score": -1},
        ])


def test_absolute_band_thresholds():
    band = AbsoluteBandComparator(30.0, 120.0)
    assert compare_attribute("1 sec.", "5 s", band, "duration") == 1
    assert compare_attribute("1 s", "1 min.", band, "duration") == 0
    assert compare_attribute("1 s", "20 min", band, "duration") == -1
    # unlimited is infinitely far from any finite value
    assert compare_attribute("1 h", "unlimited", band, "duration") == -1


def test_absolute_band_validates_thresholds():
    with pytest.raises(SchemaViolation):
        AbsoluteBandComparator(120.0, 30.0)
    with pytest.raises(SchemaViolation):
        AbsoluteBandComparator(-1.0, 30.0)
    with pytest.raises(SchemaViolation):
        AbsoluteBandComparator(1.0, float("inf"))


def test_identity_scores_plus_one_for_every_kind():
    band = AbsoluteBandComparator(0.0, 0.0)
    assert compare_attribute("unlimited", "unlimited", band, "duration") == 1
    exact = ExactMatchComparator(mismatch=-1)
    assert compare_attribute(" Whole  City", "whole city", exact) == 1
    table = LookupTableComparator((), default=-1)
    assert compare_attribute("X", "x", table) == 1


def test_exact_match_mismatch_default():
    exact = ExactMatchComparator(mismatch=-1)
    assert compare_attribute("traffic", "flood levels", exact) == -1


# --- schema ----------------------------------------------------------------

def test_default_schema_shape():
    schema = default_schema()
    features = schema.category_attributes("data-features")
    vulnerabilities = schema.category_attributes("source-vulnerability")
    assert len(features) == 7
    assert len(vulnerabilities) == 4
    assert "delay" in schema
    assert "dependency-on-ci" in schema


def test_schema_round_trips_through_doc():
    schema = default_schema()
    again = AttributeSchema.from_doc(schema.to_doc())
    assert again == schema


def test_schema_rejects_duplicate_attribute():
    doc = default_schema().to_doc()
    doc["attributes"].append(doc["attributes"][0])
    with pytest.raises(SchemaViolation):
        AttributeSchema.from_doc(doc)


# --- registry loading ------------------------------------------------------

def test_load_case_study_registry():
    registry = load_registry_file(CASE_STUDY)
    assert registry.data_types() == ("traffic",)
    assert registry.standard_source("traffic") == "traffic-sensors"
    assert {d.source_id for d in registry.sources_of("traffic")} == {
        "traffic-sensors", "floating-car-data", "remote-sensing"}
    # every weight present, use-case deliberately neutral
    assert registry.weights["use-case"] == 0.0
    assert registry.weights["delay"] == 1.0


def test_registry_version_tracks_content():
    registry = load_registry_file(CASE_STUDY)
    reweighted = registry.with_weights({"delay": 2.0})
    assert registry.version != reweighted.version
    assert registry.version == load_registry_file(CASE_STUDY).version


def test_registry_round_trips_through_doc():
    registry = load_registry_file(CASE_STUDY)
    again = load_registry(json.loads(registry.to_json()))
    assert again.version == registry.version


def test_unknown_source_lookup():
    registry = load_registry_file(CASE_STUDY)
    with pytest.raises(UnknownSourceError):
        registry.get("smoke-detectors")


def test_missing_attribute_value_names_source_and_attribute():
    doc = random_registry_doc(random.Random(1), 1)
    del doc["sources"][0]["attribute-values"]["delay"]
    with pytest.raises(SchemaViolation) as err:
        load_registry(doc)
    assert err.value.source_id == "src-000"
    assert err.value.attribute_id == "delay"


def test_value_for_unknown_attribute_rejected():
    doc = random_registry_doc(random.Random(2), 1)
    doc["sources"][0]["attribute-values"]["color"] = "red"
    with pytest.raises(SchemaViolation):
        load_registry(doc)


def test_unparseable_value_rejected():
    doc = random_registry_doc(random.Random(3), 1)
    doc["sources"][0]["attribute-values"]["delay"] = "soonish"
    with pytest.raises(SchemaViolation) as err:
        load_registry(doc)
    assert err.value.attribute_id == "delay"


def test_duplicate_source_id_rejected():
    doc = random_registry_doc(random.Random(4), 2)
    doc["sources"][1]["source-id"] = doc["sources"][0]["source-id"]
    with pytest.raises(SchemaViolation):
        load_registry(doc)


def test_two_standard_sources_rejected():
    doc = random_registry_doc(random.Random(5), 2)
    doc["sources"][1]["standard"] = True
    with pytest.raises(SchemaViolation):
        load_registry(doc)


def test_weight_validation():
    doc = random_registry_doc(random.Random(6), 1)
    doc["weights"]["delay"] = -1
    with pytest.raises(SchemaViolation):
        load_registry(doc)
    doc["weights"]["delay"] = 1
    doc["weights"]["bogus"] = 1
    with pytest.raises(UnknownAttributeError):
        load_registry(doc)


def test_override_referencing_unknown_source_rejected():
    doc = random_registry_doc(random.Random(7), 2, with_overrides=False)
    doc["overrides"] = [{"source-a": "src-000", "source-b": "ghost",
                         "attribute-id": "delay", "score": 1}]
    with pytest.raises(SchemaViolation):
        load_registry(doc)


def test_conflicting_overrides_rejected():
    doc = random_registry_doc(random.Random(8), 2, with_overrides=False)
    doc["overrides"] = [
        {"source-a": "src-000", "source-b": "src-001",
         "attribute-id": "delay", "score": 1},
        {"source-a": "src-001", "source-b": "src-000",
         "attribute-id": "delay", "score": -1},
    ]
    with pytest.raises(SchemaViolation):
        load_registry(doc)


def test_malformed_json_raises_parse_error():
    with pytest.raises(RegistryParseError):
        load_registry("{not json")


def test_with_source_is_copy_on_write():
    registry = load_registry_file(CASE_STUDY)
    doc = random_registry_doc(random.Random(9), 1)["sources"][0]
    doc["source-id"] = "drone-imagery"
    doc["data-type"] = "traffic"
    doc["standard"] = False
    grown = registry.with_source(SourceDescriptor.from_doc(doc))
    assert "drone-imagery" in grown.sources
    assert "drone-imagery" not in registry.sources
    assert grown.version != registry.version


def test_monitoring_overrides_validated():
    doc = random_registry_doc(random.Random(10), 1)
    doc["sources"][0]["monitoring"] = {"grace-multiplier": 5}
    registry = load_registry(doc)
    assert registry.get("src-000").monitoring == {"grace-multiplier": 5}
    doc["sources"][0]["monitoring"] = {"polling": True}
    with pytest.raises(SchemaViolation):
        load_registry(doc)
