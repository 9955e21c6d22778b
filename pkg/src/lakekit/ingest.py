"""CSV ingestion with a typed header line (``name:type`` or ``name:type?``)."""

from __future__ import annotations

import csv
import io
import math
from pathlib import Path

from . import errors
from .catalog import Commit, Repository
from .schema import BASE_TYPES, ColumnContract, ColumnType, SchemaContract, TableSnapshot, parse_timestamp


def _parse_cell(text: str, base: str):
    if base == "string":
        return text
    if base == "int64":
        v = int(text)
        if not -(2**63) <= v < 2**63:
            raise ValueError("out of int64 range")
        return v
    if base == "float64":
        v = float(text)
        if not math.isfinite(v):
            raise ValueError("not a finite float")
        return v
    if base == "bool":
        low = text.strip().lower()
        if low in ("true", "1"):
            return True
        if low in ("false", "0"):
            return False
        raise ValueError("not a bool")
    return parse_timestamp(text)


def parse_csv(text: str, table: str) -> TableSnapshot:
    """Parse typed CSV into a snapshot whose schema is named after ``table``.

    An empty cell is null. Strings cannot be empty for that reason.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise errors.CsvParseError(1, "missing typed header") from None
    columns = []
    for field in header:
        name, sep, typ = field.strip().partition(":")
        if not sep or not name:
            raise errors.CsvParseError(1, f"header field {field!r} must be name:type")
        nullable = typ.endswith("?")
        base = typ.rstrip("?")
        if base not in BASE_TYPES:
            raise errors.CsvParseError(1, f"unknown type {typ!r} for column {name!r}")
        columns.append(ColumnContract(name, ColumnType(base, nullable)))
    try:
        schema = SchemaContract(table, tuple(columns))
    except ValueError as exc:
        raise errors.CsvParseError(1, str(exc)) from None
    rows = []
    for record in reader:
        line = reader.line_num
        if not record:
            continue
        if len(record) != len(columns):
            raise errors.CsvParseError(line, f"expected {len(columns)} fields, found {len(record)}")
        row = []
        for cell, col in zip(record, columns):
            if cell == "":
                if not col.type.nullable:
                    raise errors.NullInNonNullable(col.name, line)
                row.append(None)
                continue
            try:
                row.append(_parse_cell(cell, col.type.base))
            except ValueError as exc:
                raise errors.CsvParseError(line, f"column {col.name!r}: cannot parse {cell!r} as {col.type.base}: {exc}") from None
        rows.append(tuple(row))
    return TableSnapshot.from_rows(schema, rows)


def import_csv(repo: Repository, table: str, path: str | Path, branch: str = "main") -> Commit:
    text = Path(path).read_text(encoding="utf-8")
    snapshot = parse_csv(text, table)
    head = repo.get_branch(branch).head
    return repo.write_table(branch, table, snapshot, head, message=f"import {table}")
