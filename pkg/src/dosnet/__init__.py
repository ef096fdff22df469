"""Resilient transmission scheduling for networked interconnected systems under DoS."""

from .certificate import (
    EnvelopeParams,
    GainCertificate,
    TriggerParams,
    certify,
    check_dos_admissible,
    envelope_params,
    practical_bound,
    zeno_interevent_bound,
)
from .dos import DoSBudget, DoSSignal, tightest_budget, verify_budget
from .plant import PlantModel, Subsystem, validate
from .simulate import EventTriggered, Hybrid, RoundRobin, SimConfig, SimTrace, run

__all__ = [
    "DoSBudget",
    "DoSSignal",
    "EnvelopeParams",
    "EventTriggered",
    "GainCertificate",
    "Hybrid",
    "PlantModel",
    "RoundRobin",
    "SimConfig",
    "SimTrace",
    "Subsystem",
    "TriggerParams",
    "certify",
    "check_dos_admissible",
    "envelope_params",
    "practical_bound",
    "run",
    "tightest_budget",
    "validate",
    "verify_budget",
    "zeno_interevent_bound",
]
