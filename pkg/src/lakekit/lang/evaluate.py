"""Reference evaluator: a pure function from (transform, input snapshots) to a snapshot.

Evaluation is row-at-a-time over small in-memory tables. Null semantics follow
SQL: arithmetic and comparisons with a null operand yield null, ``and`` is
three-valued, and a filter keeps only rows whose condition is true.
"""

from __future__ import annotations

import math
from typing import Any, Mapping

from .. import errors
from ..contracts.validate import validate_data
from ..schema import (
    INT64_MAX,
    INT64_MIN,
    ColumnType,
    SchemaContract,
    TableSnapshot,
    format_timestamp,
    parse_timestamp,
)
from .ast import (
    Aggregate,
    And,
    Cast,
    ColRef,
    Expr,
    Filter,
    IsNotNull,
    Join,
    Lit,
    Lt,
    Select,
    Sub,
    SumAgg,
    TableRef,
    Transform,
    item_name,
    unalias,
)
from .infer import expr_type, infer_schema


class _Table:
    __slots__ = ("columns", "rows")

    def __init__(self, columns: tuple, rows: list[tuple]):
        self.columns = columns  # tuple of (name, ColumnType)
        self.rows = rows

    def index(self) -> dict[str, int]:
        return {name: i for i, (name, _) in enumerate(self.columns)}

    def relation(self):
        from .infer import InferredColumn

        return tuple(InferredColumn(n, t) for n, t in self.columns)


def _check_int(v: int, what: str) -> int:
    if not INT64_MIN <= v <= INT64_MAX:
        raise errors.IntegerOverflow(f"{what}: {v} does not fit in int64")
    return v


def _check_float(v: float, what: str) -> float:
    if not math.isfinite(v):
        raise errors.ArithmeticOverflow(f"{what}: result is not finite")
    return v


def cast_value(v: Any, src: str, dst: str, column: str, row: int) -> Any:
    if src == dst:
        return v
    what = f"cast of {column!r} at row {row}"
    try:
        if dst == "float64":
            out = float(v.strip() if isinstance(v, str) else v)
            if not math.isfinite(out):
                raise ValueError(out)
            return out
        if dst == "int64":
            if src == "float64":
                return _check_int(math.trunc(v), what)
            if src == "string":
                return _check_int(int(v.strip()), what)
            return int(v)
        if dst == "timestamp":
            return parse_timestamp(v)
        if dst == "string":
            if src == "timestamp":
                return format_timestamp(v)
            if src == "bool":
                return "true" if v else "false"
            return repr(v) if src == "float64" else str(v)
    except (ValueError, OverflowError):
        raise errors.RuntimeCastError(f"{what}: cannot cast {v!r} from {src} to {dst}") from None
    raise errors.RuntimeCastError(f"{what}: no cast from {src} to {dst}")


class _Eval:
    def __init__(self, table: _Table):
        self.table = table
        self.idx = table.index()
        self.relation = table.relation()
        self.memo: dict[Expr, ColumnType] = {}

    def type_of(self, e: Expr) -> ColumnType:
        t = self.memo.get(e)
        if t is None:
            t = self.memo[e] = expr_type(e, self.relation, allow_sum=True)
        return t

    def value(self, e: Expr, row: tuple, r: int, column: str) -> Any:
        if isinstance(e, ColRef):
            return row[self.idx[e.name]]
        if isinstance(e, Lit):
            return e.value
        if isinstance(e, Cast):
            v = self.value(e.expr, row, r, column)
            if v is None:
                if not e.type.nullable:
                    raise errors.RuntimeCastNull(column, r)
                return None
            return cast_value(v, self.type_of(e.expr).base, e.type.base, column, r)
        if isinstance(e, IsNotNull):
            return self.value(e.expr, row, r, column) is not None
        if isinstance(e, Sub):
            a = self.value(e.left, row, r, column)
            b = self.value(e.right, row, r, column)
            if a is None or b is None:
                return None
            if isinstance(a, int) and isinstance(b, int):
                return _check_int(a - b, f"{column!r} at row {r}")
            return _check_float(float(a) - float(b), f"{column!r} at row {r}")
        if isinstance(e, Lt):
            a = self.value(e.left, row, r, column)
            b = self.value(e.right, row, r, column)
            if a is None or b is None:
                return None
            return a < b
        if isinstance(e, And):
            a = self.value(e.left, row, r, column)
            b = self.value(e.right, row, r, column)
            if a is False or b is False:
                return False
            if a is None or b is None:
                return None
            return True
        raise errors.InvalidAggregate(f"cannot evaluate {type(e).__name__} per row")


def _run(t: Transform, inputs: Mapping[str, TableSnapshot]) -> _Table:
    if isinstance(t, TableRef):
        snap = inputs[t.name]
        cols = tuple((c.name, c.type) for c in snap.schema.columns)
        return _Table(cols, list(snap.rows()))
    if isinstance(t, Select):
        src = _run(t.input, inputs)
        ev = _Eval(src)
        names = [item_name(i) for i in t.items]
        exprs = [unalias(i) for i in t.items]
        cols = tuple((n, ev.type_of(e)) for n, e in zip(names, exprs))
        rows = [tuple(ev.value(e, row, r, n) for n, e in zip(names, exprs)) for r, row in enumerate(src.rows)]
        return _Table(cols, rows)
    if isinstance(t, Filter):
        src = _run(t.input, inputs)
        ev = _Eval(src)
        rows = [row for r, row in enumerate(src.rows) if ev.value(t.cond, row, r, "<where>") is True]
        return _Table(src.columns, rows)
    if isinstance(t, Join):
        left = _run(t.left, inputs)
        right = _run(t.right, inputs)
        li, ri = left.index(), right.index()
        rkeep = [i for i, (n, _) in enumerate(right.columns) if n not in t.on]
        buckets: dict[tuple, list[tuple]] = {}
        for row in right.rows:
            key = tuple(row[ri[k]] for k in t.on)
            if None not in key:
                buckets.setdefault(key, []).append(row)
        rows = []
        for row in left.rows:
            key = tuple(row[li[k]] for k in t.on)
            for match in buckets.get(key, ()):
                rows.append(row + tuple(match[i] for i in rkeep))
        cols = left.columns + tuple(right.columns[i] for i in rkeep)
        return _Table(cols, rows)
    if isinstance(t, Aggregate):
        src = _run(t.input, inputs)
        ev = _Eval(src)
        gidx = [src.index()[g] for g in t.group_by]
        groups: dict[tuple, list[int]] = {}
        for r, row in enumerate(src.rows):
            groups.setdefault(tuple(row[i] for i in gidx), []).append(r)
        if not t.group_by and not groups:
            groups[()] = []
        keys = sorted(groups, key=lambda k: tuple((v is not None, v) for v in k))
        cols = []
        for item in t.items:
            cols.append((item_name(item), ev.type_of(unalias(item))))
        rows = []
        for key in keys:
            members = groups[key]
            out = []
            for item, (name, typ) in zip(t.items, cols):
                e = unalias(item)
                if isinstance(e, ColRef):
                    out.append(key[t.group_by.index(e.name)])
                    continue
                assert isinstance(e, SumAgg)
                vals = [ev.value(e.expr, src.rows[r], r, name) for r in members]
                vals = [v for v in vals if v is not None]
                if not vals and typ.nullable:
                    out.append(None)
                elif typ.base == "int64":
                    out.append(_check_int(sum(vals), f"sum for {name!r}"))
                else:
                    out.append(_check_float(math.fsum(vals), f"sum for {name!r}"))
            rows.append(tuple(out))
        return _Table(tuple(cols), rows)
    raise TypeError(f"not a transform: {t!r}")


def evaluate(
    t: Transform,
    inputs: Mapping[str, TableSnapshot],
    name: str = "result",
    *,
    schemas: Mapping[str, SchemaContract] | None = None,
) -> TableSnapshot:
    """Evaluate ``t`` over input snapshots keyed by table name.

    Inputs are first checked against ``schemas`` (default: each snapshot's
    own schema); a non-conforming input raises
    :class:`InputContractViolation` before any row is computed.
    """
    for table, snap in inputs.items():
        contract = (schemas or {}).get(table, snap.schema)
        report = validate_data(snap, contract)
        if not report.ok:
            raise errors.InputContractViolation(
                f"input {table!r}: " + "; ".join(str(v) for v in report.violations)
            )
    contract = infer_schema(t, {k: v.schema for k, v in inputs.items()}, name)
    out = _run(t, inputs)
    names = [n for n, _ in out.columns]
    data = {n: tuple(row[i] for row in out.rows) for i, n in enumerate(names)}
    return TableSnapshot(contract, data, len(out.rows))


def conform(snapshot: TableSnapshot, contract: SchemaContract) -> TableSnapshot:
    """Re-label ``snapshot`` with ``contract``, applying implicit widenings.

    Columns are reordered to the contract and int64 values bound for float64
    columns become floats. Columns absent from the contract are kept so that
    validation reports them.
    """
    data = {}
    for col in contract.columns:
        if col.name not in snapshot.data:
            continue
        values = snapshot.data[col.name]
        if col.type.base == "float64":
            values = tuple(float(v) if isinstance(v, int) and not isinstance(v, bool) else v for v in values)
        data[col.name] = values
    for name, values in snapshot.data.items():
        if name not in data:
            data[name] = values
    return TableSnapshot(contract, data, snapshot.row_count)
