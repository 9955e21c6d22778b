"""Plan-time checking, column lineage and validation-skip planning.

Everything here works on contracts alone and never touches table data.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Mapping

from .. import errors
from ..lang.infer import InferredColumn, compare, infer_relation, origin_candidates
from ..schema import SchemaContract
from .manifest import NodeContract, PipelinePlan
from .validate import NONNULL


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # error | warning
    code: str
    node: str
    message: str
    span: tuple[str, int, int] | None = None
    column: str | None = None

    def line(self) -> str:
        where = f"{self.span[0]}:{self.span[1]}:{self.span[2]}" if self.span else "-"
        return f"{self.severity} {self.code} {self.node} {self.message} {where}"

    def to_dict(self) -> dict:
        return {
            "severity": self.severity,
            "code": self.code,
            "node": self.node,
            "column": self.column,
            "message": self.message,
            "span": None
            if self.span is None
            else {"file": self.span[0], "line": self.span[1], "col": self.span[2]},
        }


def has_errors(diags) -> bool:
    return any(d.severity == "error" for d in diags)


def diagnostics_json(diags) -> str:
    return json.dumps([d.to_dict() for d in diags], indent=2, sort_keys=True)


def _span(plan: PipelinePlan, node: NodeContract, column: str | None) -> tuple[str, int, int]:
    """Location of the first mention of ``column`` in the node's query."""
    lines = node.text.splitlines()
    if column:
        pattern = re.compile(rf"(?<![A-Za-z0-9_]){re.escape(column)}(?![A-Za-z0-9_])")
        for offset, text in enumerate(lines[1:], start=1):
            code = text.split("--")[0]
            m = pattern.search(code)
            if m:
                return (plan.path, node.line + offset, m.start() + 1)
    return (plan.path, node.line, 1)


def node_inputs(
    plan: PipelinePlan, node: NodeContract, lake_schemas: Mapping[str, SchemaContract] | None = None
) -> dict[str, SchemaContract]:
    """Contracts a node is checked against.

    Sources use the lake's schema when given (renamed to the manifest schema
    so origin annotations line up); upstream nodes use their declared output.
    """
    names = set(plan.node_names)
    out = {}
    for inp in node.inputs:
        if inp in names:
            out[inp] = plan.node(inp).declared_output
        else:
            expected = plan.sources[inp]
            lake = (lake_schemas or {}).get(inp)
            out[inp] = lake.renamed(expected.name) if lake is not None else expected
    return out


def _source_drift(expected: SchemaContract, actual: SchemaContract) -> list[str]:
    problems = []
    have = {c.name: c.type for c in actual.columns}
    for c in expected.columns:
        if c.name not in have:
            problems.append(f"column {c.name} is missing")
        elif have[c.name] != c.type:
            problems.append(f"column {c.name} is {have[c.name]}, expected {c.type}")
    for name in have:
        if name not in expected:
            problems.append(f"column {name} is not expected")
    return problems


def check_plan(plan: PipelinePlan, lake_schemas: Mapping[str, SchemaContract] | None = None) -> list[Diagnostic]:
    """All plan-time findings; an empty list means the plan composes.

    With ``lake_schemas`` (table -> contract) sources are compared against
    the lake; without it the manifest's own source declarations are trusted.
    """
    diags: list[Diagnostic] = []
    if lake_schemas is not None:
        for table, expected in plan.sources.items():
            actual = lake_schemas.get(table)
            if actual is None:
                diags.append(Diagnostic("error", "MissingSource", table, f"source table {table} is not in the lake"))
                continue
            for problem in _source_drift(expected, actual):
                diags.append(
                    Diagnostic("error", "SourceDrift", table, f"{table}: {problem}", column=problem.split()[1])
                )
    for node in plan.nodes:
        inputs = node_inputs(plan, node, lake_schemas)
        available = [s for s in inputs if lake_schemas is None or s not in plan.sources or s in lake_schemas]
        if len(available) != len(inputs):
            continue  # already reported as a missing source
        try:
            rel = infer_relation(node.transform, inputs)
        except errors.InferenceError as exc:
            diags.append(
                Diagnostic("error", exc.code, node.name, str(exc), _span(plan, node, exc.column), exc.column)
            )
            continue
        for problem in compare(rel, node.declared_output):
            diags.append(
                Diagnostic(
                    "error",
                    problem.code,
                    node.name,
                    f"{node.declared_output.name}.{problem.column}: {problem}",
                    _span(plan, node, problem.column),
                    problem.column,
                )
            )
        inferred = {c.name: c for c in rel}
        for col in node.declared_output.columns:
            c = inferred.get(col.name)
            if c is None or col.origin.kind == "fresh":
                continue
            candidates = origin_candidates(c, inputs)
            if col.origin not in candidates:
                found = ", ".join(str(o) for o in candidates)
                diags.append(
                    Diagnostic(
                        "warning",
                        "OriginMismatch",
                        node.name,
                        f"{node.declared_output.name}.{col.name} declares {col.origin}, inferred {found}",
                        _span(plan, node, col.name),
                        col.name,
                    )
                )
    return diags


# -- lineage ----------------------------------------------------------------------


@dataclass(frozen=True)
class LineageNode:
    node: str
    column: str
    kind: str | None  # None marks a lake source column
    inputs: tuple[LineageNode, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "node": self.node,
            "column": self.column,
            "kind": self.kind,
            "inputs": [i.to_dict() for i in self.inputs],
        }

    def render(self, indent: int = 0) -> str:
        kind = self.kind or "source"
        out = [f"{'  ' * indent}{self.node}.{self.column} [{kind}]"]
        out.extend(i.render(indent + 1) for i in self.inputs)
        return "\n".join(out)

    def chain(self) -> list[tuple[str, str, str | None]]:
        """First-input path from this column down to a leaf."""
        out = [(self.node, self.column, self.kind)]
        if self.inputs:
            out.extend(self.inputs[0].chain())
        return out


def _relation(plan: PipelinePlan, name: str, lake_schemas, cache) -> tuple[InferredColumn, ...]:
    if name not in cache:
        cache[name] = infer_relation(plan.node(name).transform, node_inputs(plan, plan.node(name), lake_schemas))
    return cache[name]


def lineage(
    plan: PipelinePlan, column: tuple[str, str], lake_schemas: Mapping[str, SchemaContract] | None = None
) -> LineageNode:
    """Trace ``(node, column)`` back through the plan to lake sources."""
    cache: dict[str, tuple] = {}
    names = set(plan.node_names)

    def build(node: str, col: str) -> LineageNode:
        if node not in names:
            return LineageNode(node, col, None)
        rel = _relation(plan, node, lake_schemas, cache)
        c = next((c for c in rel if c.name == col), None)
        if c is None:
            raise errors.UnknownColumn(f"{node}.{col}", [f"{node}.{x.name}" for x in rel])
        return LineageNode(node, col, c.kind, tuple(build(t, s) for t, s in c.sources))

    node, col = column
    if node not in names and node not in plan.sources:
        raise errors.UnknownColumn(f"{node}.{col}", [f"{n}.*" for n in plan.node_names])
    if node in plan.sources and col not in plan.sources[node]:
        raise errors.UnknownColumn(f"{node}.{col}", [f"{node}.{c}" for c in plan.sources[node].names])
    return build(node, col)


# -- validation skips ---------------------------------------------------------------

NULLABILITY_PRESERVING = ("identity", "join-key")


def plan_validation_skips(
    plan: PipelinePlan, lake_schemas: Mapping[str, SchemaContract] | None = None
) -> frozenset[tuple[str, str, str]]:
    """Runtime non-null checks that plan analysis proves redundant.

    ``(node, column, "nonnull")`` is skippable when the column is a pure
    passthrough (identity projections, aliases, filters, join keys) of
    columns of upstream plan nodes whose own declared contract is non-null.
    Those upstream outputs were themselves validated or proven, so the
    property carries over. Lake sources never justify a skip.
    """
    if has_errors(check_plan(plan, lake_schemas)):
        return frozenset()
    names = set(plan.node_names)
    cache: dict[str, tuple] = {}
    skips = set()
    for node in plan.nodes:
        rel = {c.name: c for c in _relation(plan, node.name, lake_schemas, cache)}
        for col in node.declared_output.columns:
            if col.type.nullable:
                continue
            c = rel[col.name]
            if c.kind not in NULLABILITY_PRESERVING or not c.sources:
                continue
            if all(
                t in names and s in plan.node(t).declared_output and not plan.node(t).declared_output.column(s).type.nullable
                for t, s in c.sources
            ):
                skips.add((node.name, col.name, NONNULL))
    return frozenset(skips)
