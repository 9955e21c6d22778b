"""Random well-typed pipelines and conforming source data for tests.

Every node's declared contract is written from the inferred output of its
query, so generated plans pass plan-time checks by construction; callers
still run ``check_plan`` and discard the rare plan it rejects.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone

from lakekit.contracts import check_plan, has_errors, parse_manifest
from lakekit.lang import infer_schema, parse
from lakekit.schema import SchemaContract, TableSnapshot, is_narrowing, schema_of, widens_to

RAW = schema_of("RawSchema", k="string", ts="timestamp", a="int64", b="float64", n="string?")
RAW_DECL = """source raw_table: RawSchema

schema RawSchema {
    k: string
    ts: timestamp
    a: int64
    b: float64
    n: string nullable
}
"""
LITERALS = ("1", "2.5", "'v'")


@dataclass(frozen=True)
class GeneratedPlan:
    text: str
    node_names: tuple[str, ...]


def _items(rng: random.Random, cols: list[tuple[str, str, bool]], node: int) -> list[str]:
    """Random select items over ``cols`` given as ``(name, base, nullable)``."""
    chosen = rng.sample(cols, rng.randint(1, len(cols)))
    items = [name for name, _, _ in chosen]
    numeric = [name for name, base, _ in cols if base in ("int64", "float64")]
    floats = [name for name, base, _ in cols if base == "float64"]
    ints = [name for name, base, _ in cols if base == "int64"]
    extra = rng.randint(0, 2)
    for j in range(extra):
        alias = f"x{node}_{j}"
        pick = rng.choice(["lit", "sub", "widen", "narrow", "str"])
        if pick == "sub" and len(numeric) >= 1:
            items.append(f"{rng.choice(numeric)} - {rng.choice(numeric)} as {alias}")
        elif pick == "widen" and ints:
            items.append(f"cast({rng.choice(ints)} as float64) as {alias}")
        elif pick == "narrow" and floats:
            items.append(f"cast({rng.choice(floats)} as int64) as {alias}")
        elif pick == "str" and numeric:
            items.append(f"cast({rng.choice(numeric)} as string) as {alias}")
        else:
            items.append(f"{rng.choice(LITERALS)} as {alias}")
    return items


def _declare(schema_name: str, out: SchemaContract, inputs: dict[str, SchemaContract]) -> str:
    lines = [f"schema {schema_name} {{"]
    for c in out.columns:
        decl = f"    {c.name}: {c.type.base}" + (" nullable" if c.type.nullable else "")
        src = inputs[_table_of(inputs, c.origin.schema)] if c.origin.kind != "fresh" else None
        derivable = src is not None and (
            src.column(c.origin.column).type.base == c.type.base
            or widens_to(src.column(c.origin.column).type, c.type)
            or is_narrowing(src.column(c.origin.column).type, c.type)
        )
        if derivable:
            decl += f" from {c.origin.schema}.{c.origin.column}"
            if c.origin.kind == "inherited_notnull":
                decl += " notnull"
        lines.append(decl)
    lines.append("}")
    return "\n".join(lines)


def _table_of(inputs: dict[str, SchemaContract], schema_name: str) -> str:
    return next(t for t, s in inputs.items() if s.name == schema_name)


def random_plan(rng: random.Random, max_nodes: int = 5) -> GeneratedPlan:
    """A DAG of 1..max_nodes nodes over ``raw_table``."""
    n = rng.randint(1, max_nodes)
    contracts: dict[str, SchemaContract] = {"raw_table": RAW}
    schema_blocks: list[str] = []
    node_blocks: list[str] = []
    names: list[str] = []
    for i in range(1, n + 1):
        name = f"n{i}"
        src = rng.choice(["raw_table", *names])
        cols = [(c.name, c.type.base, c.type.nullable) for c in contracts[src].columns]
        shape = rng.random()
        if shape < 0.15 and any(c[0] == "k" for c in cols) and any(c[1] == "int64" for c in cols):
            by = "k"
            num = rng.choice([c[0] for c in cols if c[1] == "int64"])
            query = f"select k, sum({num}) as s{i} from {src} group by {by}"
            inputs = (src,)
        elif shape < 0.3 and names and any(c[0] == "k" for c in cols):
            other = rng.choice([x for x in ["raw_table", *names] if x != src])
            ocols = [c for c in contracts[other].columns if c.name != "k"]
            if "k" not in contracts[other] or not ocols:
                query = f"select {', '.join(_items(rng, cols, i))} from {src}"
                inputs = (src,)
            else:
                pick = rng.choice(ocols).name
                items = [c[0] for c in cols] + [f"j{i}"]
                query = (
                    f"select {', '.join(items)} from {src} "
                    f"join (select k, {pick} as j{i} from {other}) on k"
                )
                inputs = (src, other)
        else:
            items = _items(rng, cols, i)
            query = f"select {', '.join(items)} from {src}"
            where = []
            if any(c[0] == "a" and c[1] == "int64" for c in cols) and rng.random() < 0.3:
                where.append(f"a < {rng.randint(0, 9)}")
            nullable = [c[0] for c in cols if c[2]]
            if nullable and rng.random() < 0.4:
                where.append(f"{rng.choice(nullable)} is not null")
            if where:
                query += " where " + " and ".join(where)
            inputs = (src,)
        schema_name = f"S{i}"
        out = infer_schema(parse(query), {x: contracts[x] for x in inputs}, schema_name)
        out = SchemaContract(schema_name, out.columns)
        schema_blocks.append(_declare(schema_name, out, contracts))
        node_blocks.append(f"-- {name}: {schema_name} <- {', '.join(inputs)}\n{query}")
        contracts[name] = out
        names.append(name)
    text = RAW_DECL + "\n" + "\n\n".join(schema_blocks) + "\n\n" + "\n\n".join(node_blocks) + "\n"
    return GeneratedPlan(text, tuple(names))


def checked_plan(rng: random.Random, max_nodes: int = 5):
    """A generated plan that passes plan-time checks, with its parsed form."""
    while True:
        gen = random_plan(rng, max_nodes)
        plan = parse_manifest(gen.text, "gen.lk")
        if not has_errors(check_plan(plan, {"raw_table": RAW})):
            return gen, plan


def random_rows(rng: random.Random, count: int | None = None) -> TableSnapshot:
    """Rows conforming to ``RAW``."""
    count = rng.randint(0, 8) if count is None else count
    base = datetime(2024, 1, 1, tzinfo=timezone.utc)
    rows = []
    for _ in range(count):
        rows.append(
            (
                rng.choice("abc"),
                base + timedelta(days=rng.randint(0, 3)),
                rng.randint(-5, 12),
                round(rng.uniform(-100, 100), 2),
                rng.choice([None, "p", "q"]),
            )
        )
    return TableSnapshot.from_rows(RAW, rows)
