"""Data-source failover toolkit: classify sources, precompute replacement
rankings, watch live feeds, and switch over when a source dies."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    MatrixError,
    NotActivatableError,
    RegistryParseError,
    SchemaViolation,
    SourcewatchError,
    StorageError,
    UnknownAttributeError,
    UnknownSourceError,
    ValueKindMismatch,
)
from .registry import (
    AttributeSchema,
    AttributeSpec,
    Registry,
    SourceDescriptor,
    default_schema,
    load_registry,
    load_registry_file,
)
from .similarity import (
    AssessmentMatrix,
    PairAssessment,
    RankingEntry,
    assess_pair,
    build_assessment_matrix,
    build_assessment_pack,
    extend_assessment_matrix,
    rank_candidates,
    reweigh,
)
from .errors import TransitionError
from .monitor import IngressMonitor, Observation, SourceState, TransitionEvent
from .replacement import (
    Action,
    AssessmentPack,
    ReplacementDecision,
    ReplacementManager,
    run_assessment,
)
from .stack import IngressStack
from .store import ScenarioRecord, ScenarioStore
from .simulator import (
    SimulationReport,
    SimulationScript,
    assert_trace,
    load_script,
    run_script,
)

__all__ = [name for name in dir() if not name.startswith("_")]
