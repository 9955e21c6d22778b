"""Column types, schema contracts and in-memory table snapshots."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Iterator, Mapping

BASE_TYPES = ("string", "int64", "float64", "timestamp", "bool")

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

# base-type narrowings that need an explicit cast
_NARROWING_BASES = {("float64", "int64"), ("string", "timestamp")}
_WIDENING_BASES = {("int64", "float64")}


@dataclass(frozen=True, order=True)
class ColumnType:
    base: str
    nullable: bool = False

    def __post_init__(self):
        if self.base not in BASE_TYPES:
            raise ValueError(f"unknown column type {self.base!r}")

    def __str__(self) -> str:
        return self.base + ("?" if self.nullable else "")

    @classmethod
    def parse(cls, text: str) -> ColumnType:
        text = text.strip()
        nullable = text.endswith("?")
        return cls(text.rstrip("?"), nullable)

    def with_nullable(self, nullable: bool) -> ColumnType:
        return ColumnType(self.base, nullable)


def is_numeric(t: ColumnType) -> bool:
    return t.base in ("int64", "float64")


def widens_to(src: ColumnType, dst: ColumnType) -> bool:
    """True when values of ``src`` are implicitly legal where ``dst`` is expected."""
    base_ok = src.base == dst.base or (src.base, dst.base) in _WIDENING_BASES
    return base_ok and (dst.nullable or not src.nullable)


def is_narrowing(src: ColumnType, dst: ColumnType) -> bool:
    """True when going from ``src`` to ``dst`` can lose information."""
    if (src.base, dst.base) in _NARROWING_BASES:
        return True
    base_ok = src.base == dst.base or (src.base, dst.base) in _WIDENING_BASES
    return base_ok and src.nullable and not dst.nullable


# -- timestamps ----------------------------------------------------------------


def parse_timestamp(text: str) -> datetime:
    text = text.strip()
    if text.endswith("Z") or text.endswith("z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_timestamp(value: datetime) -> str:
    return value.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


def value_matches(base: str, value: Any) -> bool:
    if base == "string":
        return isinstance(value, str)
    if base == "int64":
        return isinstance(value, int) and not isinstance(value, bool) and INT64_MIN <= value <= INT64_MAX
    if base == "float64":
        return isinstance(value, float) and math.isfinite(value)
    if base == "bool":
        return isinstance(value, bool)
    if base == "timestamp":
        return isinstance(value, datetime) and value.tzinfo is not None
    return False


def encode_value(base: str, value: Any) -> Any:
    if value is None:
        return None
    if base == "timestamp":
        return format_timestamp(value)
    return value


def decode_value(base: str, value: Any) -> Any:
    if value is None:
        return None
    if base == "timestamp":
        return parse_timestamp(value)
    if base == "float64" and isinstance(value, int):
        return float(value)
    return value


# -- contracts -----------------------------------------------------------------

ORIGIN_KINDS = ("fresh", "inherited", "inherited_narrowed", "inherited_notnull")


@dataclass(frozen=True)
class Origin:
    kind: str = "fresh"
    schema: str | None = None
    column: str | None = None

    def __post_init__(self):
        if self.kind not in ORIGIN_KINDS:
            raise ValueError(f"unknown origin kind {self.kind!r}")
        if (self.kind == "fresh") != (self.schema is None):
            raise ValueError("inherited origins need a source schema, fresh ones must not")

    def __str__(self) -> str:
        if self.kind == "fresh":
            return "fresh"
        return f"{self.kind}({self.schema}.{self.column})"

    def to_dict(self) -> dict:
        if self.kind == "fresh":
            return {"kind": "fresh"}
        return {"kind": self.kind, "schema": self.schema, "column": self.column}

    @classmethod
    def from_dict(cls, d: Mapping) -> Origin:
        return cls(d["kind"], d.get("schema"), d.get("column"))


FRESH = Origin()


@dataclass(frozen=True)
class ColumnContract:
    name: str
    type: ColumnType
    origin: Origin = FRESH

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "type": self.type.base,
            "nullable": self.type.nullable,
            "origin": self.origin.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> ColumnContract:
        return cls(d["name"], ColumnType(d["type"], d["nullable"]), Origin.from_dict(d["origin"]))


@dataclass(frozen=True)
class SchemaContract:
    name: str
    columns: tuple[ColumnContract, ...]

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        if not self.columns:
            raise ValueError(f"schema {self.name!r} has no columns")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"schema {self.name!r} repeats columns {dup}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def __contains__(self, name: str) -> bool:
        return any(c.name == name for c in self.columns)

    def column(self, name: str) -> ColumnContract:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    def renamed(self, name: str) -> SchemaContract:
        return SchemaContract(name, self.columns)

    def to_dict(self) -> dict:
        return {"name": self.name, "columns": [c.to_dict() for c in self.columns]}

    @classmethod
    def from_dict(cls, d: Mapping) -> SchemaContract:
        return cls(d["name"], tuple(ColumnContract.from_dict(c) for c in d["columns"]))

    def describe(self) -> str:
        return f"{self.name}(" + ", ".join(f"{c.name}: {c.type}" for c in self.columns) + ")"


def schema_of(name: str, **types: str) -> SchemaContract:
    """Shorthand: ``schema_of("S", a="int64", b="string?")``."""
    return SchemaContract(name, tuple(ColumnContract(k, ColumnType.parse(v)) for k, v in types.items()))


# -- snapshots -------------------------------------------------------------------


@dataclass(frozen=True)
class TableSnapshot:
    """A fully materialized table version: schema plus columnar values."""

    schema: SchemaContract
    data: Mapping[str, tuple] = field(default_factory=dict)
    row_count: int = 0

    def __post_init__(self):
        data = {k: tuple(v) for k, v in self.data.items()}
        object.__setattr__(self, "data", data)
        if self.row_count < 0:
            raise ValueError("row_count must be non-negative")
        for name, values in data.items():
            if len(values) != self.row_count:
                raise ValueError(f"column {name!r} has {len(values)} values, expected {self.row_count}")

    @classmethod
    def from_columns(cls, schema: SchemaContract, columns: Mapping[str, list | tuple]) -> TableSnapshot:
        lengths = {len(v) for v in columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"ragged columns: {sorted(lengths)}")
        n = lengths.pop() if lengths else 0
        return cls(schema, dict(columns), n)

    @classmethod
    def from_rows(cls, schema: SchemaContract, rows: list[tuple] | list[list]) -> TableSnapshot:
        cols = {c.name: tuple(r[i] for r in rows) for i, c in enumerate(schema.columns)}
        return cls(schema, cols, len(rows))

    def column(self, name: str) -> tuple:
        return self.data[name]

    def rows(self) -> Iterator[tuple]:
        cols = [self.data.get(c.name, (None,) * self.row_count) for c in self.schema.columns]
        return iter(zip(*cols)) if cols else iter(())

    def payload(self) -> dict:
        """Canonical, JSON-ready form of the column data."""
        cols = []
        types = {c.name: c.type.base for c in self.schema.columns}
        for name in self.schema.names:
            if name in self.data:
                cols.append([name, [encode_value(types[name], v) for v in self.data[name]]])
        for name in sorted(set(self.data) - set(types)):
            cols.append([name, list(self.data[name])])
        return {"kind": "data", "columns": cols}

    @classmethod
    def from_payload(cls, schema: SchemaContract, payload: Mapping, row_count: int) -> TableSnapshot:
        types = {c.name: c.type.base for c in schema.columns}
        data = {}
        for name, values in payload["columns"]:
            base = types.get(name)
            data[name] = tuple(decode_value(base, v) if base else v for v in values)
        return cls(schema, data, row_count)
