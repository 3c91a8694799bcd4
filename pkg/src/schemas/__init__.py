"""
Pydantic schemas for configurations, records and manifests.
"""
from .simulation import (
    Scheme,
    Scenario,
    AdversaryRule,
    C3PWorkers,
    EpsilonMode,
    SimConfig,
    DelayModel,
    CompletionRecord,
    BatchSummary,
)
from .manifest import RunManifest

__all__ = [
    # Enums
    "Scheme",
    "Scenario",
    "AdversaryRule",
    "C3PWorkers",
    "EpsilonMode",
    # Simulation
    "SimConfig",
    "DelayModel",
    "CompletionRecord",
    "BatchSummary",
    # CLI
    "RunManifest",
]
