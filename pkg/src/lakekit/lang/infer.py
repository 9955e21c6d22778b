"""Static schema and lineage inference for transforms.

Every output column carries a lineage *kind* and the input columns it
derives from. Kinds compose by precedence: a column that went through a cast
and then an identity projection is still a cast; anything computed is fresh.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .. import errors
from ..schema import (
    ColumnContract,
    ColumnType,
    FRESH,
    Origin,
    SchemaContract,
    is_narrowing,
    is_numeric,
    widens_to,
)
from .ast import (
    Aggregate,
    Alias,
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
    conjuncts,
    has_sum,
    item_name,
    unalias,
)

KINDS = ("identity", "join-key", "notnull", "cast", "fresh")
_RANK = {k: i for i, k in enumerate(KINDS)}

# explicit casts between different base types
CASTS = {
    ("int64", "float64"),
    ("float64", "int64"),
    ("string", "timestamp"),
    ("string", "int64"),
    ("string", "float64"),
    ("timestamp", "string"),
    ("int64", "string"),
    ("float64", "string"),
    ("bool", "string"),
    ("bool", "int64"),
}


def combine(outer: str, inner: str) -> str:
    return outer if _RANK[outer] >= _RANK[inner] else inner


@dataclass(frozen=True)
class InferredColumn:
    name: str
    type: ColumnType
    kind: str = "fresh"
    sources: tuple[tuple[str, str], ...] = ()  # (input table, column)

    def with_(self, **kw) -> InferredColumn:
        d = dict(name=self.name, type=self.type, kind=self.kind, sources=self.sources)
        d.update(kw)
        return InferredColumn(**d)


Relation = tuple  # tuple[InferredColumn, ...]


def _lookup(rel: Relation, name: str) -> InferredColumn:
    for c in rel:
        if c.name == name:
            return c
    raise errors.UnknownColumn(name, [c.name for c in rel])


def _show(e: Expr) -> str:
    from .parser import print_expr

    return print_expr(e)


def expr_type(e: Expr, rel: Relation, *, allow_sum: bool = False) -> ColumnType:
    """Type of ``e`` evaluated over rows of ``rel``."""
    if isinstance(e, ColRef):
        return _lookup(rel, e.name).type
    if isinstance(e, Lit):
        return e.type
    if isinstance(e, Cast):
        src = expr_type(e.expr, rel, allow_sum=allow_sum)
        if src.base != e.type.base and (src.base, e.type.base) not in CASTS:
            raise errors.TypeMismatch(_show(e), f"a type castable to {e.type.base}", src.base)
        return e.type
    if isinstance(e, IsNotNull):
        expr_type(e.expr, rel, allow_sum=allow_sum)
        return ColumnType("bool")
    if isinstance(e, Sub):
        lt = expr_type(e.left, rel, allow_sum=allow_sum)
        rt = expr_type(e.right, rel, allow_sum=allow_sum)
        for side, t in ((e.left, lt), (e.right, rt)):
            if not is_numeric(t):
                raise errors.TypeMismatch(_show(side), "int64 or float64", str(t))
        base = "int64" if lt.base == rt.base == "int64" else "float64"
        return ColumnType(base, lt.nullable or rt.nullable)
    if isinstance(e, Lt):
        lt = expr_type(e.left, rel, allow_sum=allow_sum)
        rt = expr_type(e.right, rel, allow_sum=allow_sum)
        if lt.base != rt.base and not (is_numeric(lt) and is_numeric(rt)):
            raise errors.TypeMismatch(_show(e), f"operands comparable with {lt}", str(rt))
        return ColumnType("bool", lt.nullable or rt.nullable)
    if isinstance(e, And):
        lt = expr_type(e.left, rel, allow_sum=allow_sum)
        rt = expr_type(e.right, rel, allow_sum=allow_sum)
        for side, t in ((e.left, lt), (e.right, rt)):
            if t.base != "bool":
                raise errors.TypeMismatch(_show(side), "bool", str(t))
        return ColumnType("bool", lt.nullable or rt.nullable)
    if isinstance(e, SumAgg):
        if not allow_sum:
            raise errors.InvalidAggregate(f"sum() is only allowed as a top-level aggregate item: {_show(e)}")
        t = expr_type(e.expr, rel, allow_sum=False)
        if not is_numeric(t):
            raise errors.TypeMismatch(_show(e), "int64 or float64", str(t))
        return t
    if isinstance(e, Alias):
        raise errors.TypeMismatch(_show(e), "an expression without alias", "nested alias")
    raise TypeError(f"not an expression: {e!r}")


def _item_column(item: Expr, rel: Relation, *, allow_sum: bool = False) -> InferredColumn:
    name = item_name(item)
    if name is None:
        raise errors.UnnamedColumn(_show(item))
    e = unalias(item)
    typ = expr_type(e, rel, allow_sum=allow_sum)
    if isinstance(e, ColRef):
        src = _lookup(rel, e.name)
        return src.with_(name=name)
    if isinstance(e, Cast) and isinstance(e.expr, ColRef):
        src = _lookup(rel, e.expr.name)
        if src.kind == "fresh":
            return InferredColumn(name, typ)
        return InferredColumn(name, typ, combine("cast", src.kind), src.sources)
    return InferredColumn(name, typ)


def _check_unique(cols) -> Relation:
    cols = tuple(cols)
    seen = set()
    for c in cols:
        if c.name in seen:
            raise errors.DuplicateColumn(c.name)
        seen.add(c.name)
    return cols


def infer_relation(t: Transform, inputs: Mapping[str, SchemaContract]) -> Relation:
    """Inferred output columns of ``t`` with types and lineage."""
    if isinstance(t, TableRef):
        if t.name not in inputs:
            raise errors.UnknownInput(t.name, sorted(inputs))
        return tuple(
            InferredColumn(c.name, c.type, "identity", ((t.name, c.name),)) for c in inputs[t.name].columns
        )
    if isinstance(t, Select):
        rel = infer_relation(t.input, inputs)
        return _check_unique(_item_column(i, rel) for i in t.items)
    if isinstance(t, Filter):
        rel = infer_relation(t.input, inputs)
        ctype = expr_type(t.cond, rel)
        if ctype.base != "bool":
            raise errors.TypeMismatch(_show(t.cond), "bool", str(ctype))
        notnull = {
            c.expr.name for c in conjuncts(t.cond) if isinstance(c, IsNotNull) and isinstance(c.expr, ColRef)
        }
        out = []
        for c in rel:
            if c.name in notnull and c.type.nullable:
                kind = c.kind if c.kind == "fresh" else combine("notnull", c.kind)
                c = c.with_(type=c.type.with_nullable(False), kind=kind)
            out.append(c)
        return tuple(out)
    if isinstance(t, Join):
        if t.kind != "inner":
            raise errors.TypeMismatch("join", "inner", t.kind)
        left = infer_relation(t.left, inputs)
        right = infer_relation(t.right, inputs)
        if not t.on or len(set(t.on)) != len(t.on):
            raise errors.TypeMismatch("join on", "distinct key columns", ", ".join(t.on) or "none")
        out = []
        for c in left:
            if c.name in t.on:
                r = _lookup(right, c.name)
                if r.type.base != c.type.base:
                    raise errors.TypeMismatch(f"join key {c.name}", str(c.type), str(r.type), column=c.name)
                traced = [x for x in (c, r) if x.kind != "fresh"]
                if not traced:
                    out.append(c)
                    continue
                kind = "join-key"
                for x in traced:
                    kind = combine(kind, x.kind)
                out.append(c.with_(kind=kind, sources=tuple(s for x in traced for s in x.sources)))
            else:
                out.append(c)
        for key in t.on:
            _lookup(left, key)
        out.extend(c for c in right if c.name not in t.on)
        return _check_unique(out)
    if isinstance(t, Aggregate):
        rel = infer_relation(t.input, inputs)
        for g in t.group_by:
            _lookup(rel, g)
        if len(set(t.group_by)) != len(t.group_by):
            raise errors.InvalidAggregate("group by repeats a column")
        out = []
        for item in t.items:
            e = unalias(item)
            if isinstance(e, ColRef):
                if e.name not in t.group_by:
                    _lookup(rel, e.name)
                    raise errors.InvalidAggregate(f"column {e.name!r} must appear in group by or inside sum()")
                out.append(_item_column(item, rel))
            elif isinstance(e, SumAgg):
                if has_sum(e.expr):
                    raise errors.InvalidAggregate(f"nested aggregate in {_show(e)}")
                out.append(_item_column(item, rel, allow_sum=True))
            else:
                raise errors.InvalidAggregate(f"aggregate items must be group keys or sum(...): {_show(e)}")
        return _check_unique(out)
    raise TypeError(f"not a transform: {t!r}")


def _origin(c: InferredColumn, inputs: Mapping[str, SchemaContract]) -> Origin:
    if c.kind == "fresh" or not c.sources:
        return FRESH
    table, column = c.sources[0]
    schema = inputs[table].name
    if c.kind == "cast":
        src = inputs[table].column(column).type
        return Origin("inherited_narrowed" if is_narrowing(src, c.type) else "inherited", schema, column)
    if c.kind == "notnull":
        return Origin("inherited_notnull", schema, column)
    return Origin("inherited", schema, column)


def origin_candidates(c: InferredColumn, inputs: Mapping[str, SchemaContract]) -> list[Origin]:
    """Every origin annotation a declaration may legitimately use for ``c``."""
    first = _origin(c, inputs)
    if first.kind == "fresh":
        return [first]
    return [Origin(first.kind, inputs[t].name, col) for t, col in c.sources]


def infer_schema(
    t: Transform,
    inputs: Mapping[str, SchemaContract],
    name: str = "inferred",
    declared: SchemaContract | None = None,
) -> SchemaContract:
    """Output contract of ``t`` over input contracts keyed by table name.

    With ``declared``, the inferred contract must also be acceptable where
    ``declared`` is expected; passthrough columns that would need an implicit
    narrowing raise :class:`IllegalNarrowing`, computed ones
    :class:`TypeMismatch`.
    """
    rel = infer_relation(t, inputs)
    if declared is not None:
        problems = compare(rel, declared)
        for p in problems:
            raise p
    return SchemaContract(name, tuple(ColumnContract(c.name, c.type, _origin(c, inputs)) for c in rel))


def compare(rel: Relation, declared: SchemaContract) -> list[errors.InferenceError]:
    """Mismatches between inferred columns and a declared contract."""
    problems: list[errors.InferenceError] = []
    inferred = {c.name: c for c in rel}
    for d in declared.columns:
        c = inferred.get(d.name)
        if c is None:
            problems.append(errors.MissingColumn(d.name, [c.name for c in rel]))
            continue
        if widens_to(c.type, d.type):
            continue
        if c.kind != "fresh" and is_narrowing(c.type, d.type):
            problems.append(errors.IllegalNarrowing(d.name, str(c.type), str(d.type)))
        else:
            problems.append(errors.TypeMismatch(d.name, str(d.type), str(c.type), column=d.name))
    for c in rel:
        if c.name not in declared:
            problems.append(errors.ExtraColumn(c.name))
    return problems
