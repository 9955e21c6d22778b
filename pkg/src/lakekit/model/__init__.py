"""Bounded explicit-state model of branches, runs and merges."""

from __future__ import annotations

from .canon import brute_force_key, canonical_key
from .replay import ReplayReport, replay
from .search import CheckResult, Enumeration, Trace, check, enumerate_states, naive_reachable, reachable_keys
from .state import (
    INIT,
    INVARIANTS,
    POLICIES,
    Bounds,
    ModelState,
    Policy,
    enabled,
    no_aborted_leak,
    pipeline_atomicity,
    successors,
)
from .trace import build_trace, format_action, format_script, parse_action, parse_script, render_state, render_trace

__all__ = [
    "INIT",
    "INVARIANTS",
    "POLICIES",
    "Bounds",
    "CheckResult",
    "Enumeration",
    "ModelState",
    "Policy",
    "ReplayReport",
    "Trace",
    "brute_force_key",
    "build_trace",
    "canonical_key",
    "check",
    "enabled",
    "enumerate_states",
    "format_action",
    "format_script",
    "naive_reachable",
    "no_aborted_leak",
    "parse_action",
    "parse_script",
    "pipeline_atomicity",
    "reachable_keys",
    "render_state",
    "render_trace",
    "replay",
    "successors",
]
