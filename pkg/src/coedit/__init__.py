"""Replicated-text consistency maintenance: an op-buffer transformation
engine and an identifier-sequence (tombstone) engine behind one site
interface, plus a deterministic simulation and checking harness."""

from .model import (
    BoundsError,
    Delete,
    ExternalOp,
    Insert,
    NoOp,
    SiteId,
    TimestampedOp,
    VectorClock,
    apply_external,
    concurrent,
    format_op,
    happened_before,
    parse_op,
)
from .framework import Site
from .harness import FuzzSpec, RunReport, Scenario, ScriptEntry, fig1_scenario, fuzz, run_scenario
from .ot import OtSite, SequencerClient, SequencerServer, transform
from .woot import ObjectSequence, WootSite

__all__ = [
    "BoundsError",
    "Delete",
    "ExternalOp",
    "FuzzSpec",
    "Insert",
    "NoOp",
    "ObjectSequence",
    "OtSite",
    "RunReport",
    "Scenario",
    "ScriptEntry",
    "SequencerClient",
    "SequencerServer",
    "Site",
    "SiteId",
    "TimestampedOp",
    "VectorClock",
    "WootSite",
    "apply_external",
    "concurrent",
    "fig1_scenario",
    "format_op",
    "fuzz",
    "happened_before",
    "parse_op",
    "run_scenario",
    "transform",
]
