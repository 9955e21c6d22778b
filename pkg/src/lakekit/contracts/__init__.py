"""Schema contracts: manifests, plan-time checks, lineage and data validation."""

from __future__ import annotations

from .check import (
    Diagnostic,
    LineageNode,
    check_plan,
    diagnostics_json,
    has_errors,
    lineage,
    node_inputs,
    plan_validation_skips,
)
from .manifest import NodeContract, PipelinePlan, load_manifest, parse_manifest
from .validate import NONNULL, ConformanceReport, Violation, validate_data

__all__ = [
    "Diagnostic", "LineageNode", "check_plan", "diagnostics_json", "has_errors", "lineage", "node_inputs",
    "plan_validation_skips", "NodeContract", "PipelinePlan", "load_manifest", "parse_manifest", "NONNULL",
    "ConformanceReport", "Violation", "validate_data",
]
