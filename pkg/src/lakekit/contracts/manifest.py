"""Pipeline manifests: schema blocks, source declarations and typed nodes.

A manifest is one text file::

    source raw_table: RawSchema

    schema ParentSchema {
        col1: string from RawSchema.col1
        col2: timestamp from RawSchema.col2
        _S: int64
    }

    -- parent_table: ParentSchema <- raw_table
    select col1, col2, sum(col3) as _S from raw_table group by col1, col2

A column line is ``name: type [nullable] [from Schema.col] [notnull]``; a
trailing ``?`` on the type is shorthand for ``nullable``. Each node runs from
its ``-- node: Schema <- inputs`` header to the next top-level statement.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from .. import errors
from ..lang.ast import Transform, table_refs
from ..lang.parser import parse
from ..schema import (
    BASE_TYPES,
    FRESH,
    ColumnContract,
    ColumnType,
    Origin,
    SchemaContract,
    is_narrowing,
    widens_to,
)

_NAME = r"[A-Za-z0-9_][A-Za-z0-9_\-./]*"
_HEADER = re.compile(rf"^--\s*({_NAME})\s*:\s*([A-Za-z0-9_]+)\s*<-\s*(.*?)\s*$")
_SCHEMA = re.compile(r"^schema\s+([A-Za-z0-9_]+)\s*\{(.*)$")
_SOURCE = re.compile(rf"^source\s+({_NAME})\s*:\s*([A-Za-z0-9_]+)\s*$")
_COLUMN = re.compile(r"^([A-Za-z0-9_]+)\s*:\s*([A-Za-z0-9]+)(\?)?((?:\s+\S+)*)\s*$")


@dataclass(frozen=True)
class NodeContract:
    name: str
    inputs: tuple[str, ...]
    declared_output: SchemaContract
    transform: Transform
    text: str = ""  # the exact node section, header included
    line: int = 0

    @property
    def query_line(self) -> int:
        return self.line + 1


@dataclass(frozen=True)
class PipelinePlan:
    nodes: tuple[NodeContract, ...]
    sources: dict[str, SchemaContract] = field(default_factory=dict)
    schemas: dict[str, SchemaContract] = field(default_factory=dict)
    path: str = "<manifest>"
    text: str = ""

    def node(self, name: str) -> NodeContract:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)

    @property
    def node_names(self) -> tuple[str, ...]:
        return tuple(n.name for n in self.nodes)

    def downstream(self, name: str) -> set[str]:
        """``name`` and every node that transitively reads it."""
        out = {name}
        for n in self.nodes:
            if out & set(n.inputs):
                out.add(n.name)
        return out

    def upstream(self, name: str) -> set[str]:
        """Nodes that ``name`` transitively reads (excluding itself)."""
        out: set[str] = set()
        todo = [name]
        names = set(self.node_names)
        while todo:
            for i in self.node(todo.pop()).inputs:
                if i in names and i not in out:
                    out.add(i)
                    todo.append(i)
        return out


@dataclass
class _RawColumn:
    name: str
    type: ColumnType
    origin: tuple[str, str] | None
    notnull: bool
    line: int


def _parse_column(text: str, line: int) -> _RawColumn:
    m = _COLUMN.match(text)
    if not m:
        raise errors.ManifestParseError(f"bad column declaration {text!r}", line)
    name, base, q, rest = m.groups()
    if base not in BASE_TYPES:
        raise errors.ManifestParseError(f"unknown column type {base!r}", line)
    nullable = bool(q)
    origin = None
    notnull = False
    words = rest.split()
    i = 0
    while i < len(words):
        w = words[i]
        if w == "nullable":
            nullable = True
        elif w == "notnull":
            notnull = True
        elif w == "from" and i + 1 < len(words) and re.fullmatch(r"[A-Za-z0-9_]+\.[A-Za-z0-9_]+", words[i + 1]):
            origin = tuple(words[i + 1].split("."))
            i += 1
        else:
            raise errors.ManifestParseError(f"unexpected {w!r} in column {name!r}", line)
        i += 1
    if notnull and origin is None:
        raise errors.ManifestParseError(f"column {name!r}: notnull needs a 'from' origin", line)
    return _RawColumn(name, ColumnType(base, nullable), origin, notnull, line)


def _split_columns(body: str) -> list[str]:
    return [p.strip() for p in re.split(r"[,;]", body) if p.strip()]


def parse_manifest(text: str, path: str = "<manifest>") -> PipelinePlan:
    lines = text.splitlines(keepends=True)
    raw_schemas: dict[str, tuple[int, list[_RawColumn]]] = {}
    source_decls: dict[str, tuple[str, int]] = {}
    node_sections: list[tuple[str, str, tuple[str, ...], int, list[str]]] = []
    i = 0
    current = None  # node section being collected
    while i < len(lines):
        raw = lines[i]
        stripped = raw.strip()
        lineno = i + 1
        header = _HEADER.match(stripped)
        schema = _SCHEMA.match(stripped)
        source = _SOURCE.match(stripped)
        if header:
            name, schema_name, inputs_text = header.groups()
            inputs = tuple(s.strip() for s in inputs_text.split(",") if s.strip())
            if not inputs:
                raise errors.ManifestParseError(f"node {name!r} declares no inputs", lineno)
            current = (name, schema_name, inputs, lineno, [raw])
            node_sections.append(current)
            i += 1
            continue
        if schema or source:
            current = None
        if schema:
            name, rest = schema.groups()
            if name in raw_schemas:
                raise errors.ManifestParseError(f"schema {name!r} declared twice", lineno)
            cols: list[_RawColumn] = []
            body_line = lineno
            body = rest
            while True:
                if "}" in body:
                    inner, _, after = body.partition("}")
                    for part in _split_columns(inner.split("--")[0]):
                        cols.append(_parse_column(part, body_line))
                    if after.strip():
                        raise errors.ManifestParseError("unexpected text after '}'", body_line)
                    break
                for part in _split_columns(body.split("--")[0]):
                    cols.append(_parse_column(part, body_line))
                i += 1
                if i >= len(lines):
                    raise errors.ManifestParseError(f"schema {name!r} is not closed", lineno)
                body = lines[i].strip()
                body_line = i + 1
            raw_schemas[name] = (lineno, cols)
            i += 1
            continue
        if source:
            table, schema_name = source.groups()
            if table in source_decls:
                raise errors.ManifestParseError(f"source {table!r} declared twice", lineno)
            source_decls[table] = (schema_name, lineno)
            i += 1
            continue
        if current is not None:
            current[4].append(raw)
        elif stripped and not stripped.startswith("--"):
            raise errors.ManifestParseError(f"unexpected text outside a node: {stripped!r}", lineno)
        i += 1

    schemas = _resolve_schemas(raw_schemas)
    sources = {}
    for table, (schema_name, lineno) in source_decls.items():
        if schema_name not in schemas:
            raise errors.UnknownSchema(f"line {lineno}: source {table!r} uses unknown schema {schema_name!r}")
        sources[table] = schemas[schema_name]

    if not node_sections:
        raise errors.ManifestParseError("manifest declares no nodes")
    nodes = []
    seen: set[str] = set()
    for name, schema_name, inputs, lineno, body in node_sections:
        if name in seen or name in sources:
            raise errors.ManifestParseError(f"table {name!r} is produced twice", lineno)
        seen.add(name)
        if schema_name not in schemas:
            raise errors.UnknownSchema(f"line {lineno}: node {name!r} uses unknown schema {schema_name!r}")
        query = "".join(body[1:])
        if not query.strip() or not re.sub(r"--[^\n]*", "", query).strip():
            raise errors.ManifestParseError(f"node {name!r} has no query", lineno)
        try:
            transform = parse(query, lineno + 1, 1)
        except errors.TransformSyntaxError as exc:
            raise errors.ManifestParseError(f"node {name!r}: {exc}", exc.line, exc.col) from None
        refs = table_refs(transform)
        if set(refs) != set(inputs) or len(set(inputs)) != len(inputs):
            raise errors.ManifestParseError(
                f"node {name!r} declares inputs {list(inputs)} but reads {refs}", lineno
            )
        nodes.append(NodeContract(name, inputs, schemas[schema_name], transform, "".join(body), lineno))

    produced = {n.name for n in nodes}
    for n in nodes:
        for inp in n.inputs:
            if inp not in produced and inp not in sources:
                raise errors.ManifestParseError(
                    f"node {n.name!r} reads {inp!r}, which is neither a node nor a declared source", n.line
                )
    ordered = _toposort(nodes)
    return PipelinePlan(tuple(ordered), sources, schemas, path, text)


def _resolve_schemas(raw: dict[str, tuple[int, list[_RawColumn]]]) -> dict[str, SchemaContract]:
    # origins may point at schemas declared later, so type every schema first
    for name, (lineno, cols) in raw.items():
        if not cols:
            raise errors.ManifestParseError(f"schema {name!r} has no columns", lineno)
        names = [c.name for c in cols]
        if len(set(names)) != len(names):
            raise errors.ManifestParseError(f"schema {name!r} repeats a column", lineno)
    out = {}
    for name, (lineno, cols) in raw.items():
        contracts = []
        for c in cols:
            origin = FRESH
            if c.origin is not None:
                sname, scol = c.origin
                if sname not in raw:
                    raise errors.UnknownSchema(f"line {c.line}: column {c.name!r} inherits from unknown schema {sname!r}")
                src = next((x for x in raw[sname][1] if x.name == scol), None)
                if src is None:
                    raise errors.InvalidOrigin(f"line {c.line}: schema {sname!r} has no column {scol!r}")
                if c.notnull:
                    if c.type.nullable or src.type.base != c.type.base:
                        raise errors.InvalidOrigin(
                            f"line {c.line}: {c.name!r} notnull must be the non-nullable form of {sname}.{scol}"
                        )
                    origin = Origin("inherited_notnull", sname, scol)
                elif widens_to(src.type, c.type):
                    origin = Origin("inherited", sname, scol)
                elif is_narrowing(src.type, c.type):
                    origin = Origin("inherited_narrowed", sname, scol)
                else:
                    raise errors.InvalidOrigin(
                        f"line {c.line}: {c.name}: {c.type} is not derivable from {sname}.{scol}: {src.type}"
                    )
            contracts.append(ColumnContract(c.name, c.type, origin))
        out[name] = SchemaContract(name, tuple(contracts))
    return out


def _toposort(nodes: list[NodeContract]) -> list[NodeContract]:
    """Kahn's algorithm, always emitting the earliest-declared ready node."""
    by_name = {n.name: n for n in nodes}
    deps = {n.name: {i for i in n.inputs if i in by_name} for n in nodes}
    done: list[NodeContract] = []
    emitted: set[str] = set()
    while len(done) < len(nodes):
        ready = next((n for n in nodes if n.name not in emitted and deps[n.name] <= emitted), None)
        if ready is None:
            raise errors.CycleDetected(_find_cycle({k: v - emitted for k, v in deps.items() if k not in emitted}))
        done.append(ready)
        emitted.add(ready.name)
    return done


def _find_cycle(deps: dict[str, set[str]]) -> list[str]:
    start = next(iter(deps))
    path = [start]
    seen = {start: 0}
    node = start
    while True:
        node = min(deps[node])
        if node in seen:
            return path[seen[node]:] + [node]
        seen[node] = len(path)
        path.append(node)


def load_manifest(path: str | Path) -> PipelinePlan:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise errors.ManifestParseError(f"cannot read {p}: {exc.strerror}") from None
    return parse_manifest(text, str(p))
