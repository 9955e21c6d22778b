from __future__ import annotations

import math
from datetime import datetime, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lakekit import errors
from lakekit.contracts import load_manifest
from lakekit.contracts.check import node_inputs
from lakekit.lang import (
    Aggregate,
    Alias,
    And,
    Cast,
    ColRef,
    Filter,
    IsNotNull,
    Join,
    Lit,
    Lt,
    Select,
    Sub,
    SumAgg,
    TableRef,
    evaluate,
    infer_schema,
    parse,
    parse_expr,
    print_expr,
    print_transform,
)
from lakekit.schema import ColumnType, TableSnapshot, schema_of

from conftest import FAMILY, PIPELINE

TS = datetime(2024, 1, 1, tzinfo=timezone.utc)

# -- parsing ---------------------------------------------------------------------


def test_group_by_sum_parses():
    t = parse("select col1, col2, sum(col3) as _S from raw_table group by col1, col2")
    assert isinstance(t, Aggregate)
    assert t.group_by == ("col1", "col2")
    assert t.items[2] == Alias(SumAgg(ColRef("col3")), "_S")
    assert t.input == TableRef("raw_table")


def test_keywords_are_case_insensitive():
    assert parse("SELECT a FROM t WHERE a IS NOT NULL") == parse("select a from t where a is not null")


@pytest.mark.parametrize(
    "src, line, col",
    [
        ("select", 1, 7),
        ("select a from", 1, 14),
        ("select a from t where", 1, 22),
        ("select a,\nfrom t", 2, 1),
        ("select a from t extra", 1, 17),
        ("select 'open from t", 1, 8),
    ],
)
def test_syntax_errors_carry_position(src, line, col):
    with pytest.raises(errors.TransformSyntaxError) as exc:
        parse(src)
    assert (exc.value.line, exc.value.col) == (line, col)
    assert exc.value.code == "SyntaxError"


def test_precedence():
    assert parse_expr("a - b - c") == Sub(Sub(ColRef("a"), ColRef("b")), ColRef("c"))
    assert parse_expr("a - b < c and d is not null") == And(
        Lt(Sub(ColRef("a"), ColRef("b")), ColRef("c")), IsNotNull(ColRef("d"))
    )
    assert print_expr(Sub(ColRef("a"), Sub(ColRef("b"), ColRef("c")))) == "a - (b - c)"


def test_quoted_identifiers():
    e = parse_expr('"4_grand" - col4')
    assert e == Sub(ColRef("4_grand"), ColRef("col4"))
    assert print_expr(ColRef("select")) == '"select"'


# random ASTs in the image of the parser

names = st.sampled_from(["a", "col4", "_S", "4_grand", "select", "x y", 'q"t', "Sum"])
types = st.builds(ColumnType, st.sampled_from(["string", "int64", "float64", "timestamp", "bool"]), st.booleans())
literals = st.one_of(
    st.integers(-(2**63), 2**63 - 1).map(lambda v: Lit(v, ColumnType("int64"))),
    st.floats(allow_nan=False, allow_infinity=False).map(lambda v: Lit(v, ColumnType("float64"))),
    st.text(max_size=4).map(lambda v: Lit(v, ColumnType("string"))),
    st.booleans().map(lambda v: Lit(v, ColumnType("bool"))),
    st.sampled_from(["string", "int64", "float64", "timestamp", "bool"]).map(
        lambda b: Lit(None, ColumnType(b, True))
    ),
    st.just(Lit(TS, ColumnType("timestamp"))),
)
exprs = st.recursive(
    st.one_of(names.map(ColRef), literals),
    lambda inner: st.one_of(
        st.builds(Cast, inner, types),
        st.builds(IsNotNull, inner),
        st.builds(Sub, inner, inner),
        st.builds(Lt, inner, inner),
        st.builds(And, inner, inner),
    ),
    max_leaves=6,
)
items = st.one_of(exprs, st.builds(Alias, exprs, names))


@st.composite
def transforms(draw, depth=0):
    def source():
        if depth < 2 and draw(st.booleans()):
            return draw(transforms(depth + 1))
        return TableRef(draw(names))

    rest = source()
    if draw(st.booleans()):
        rest = Join(rest, source(), tuple(draw(st.lists(names, min_size=1, max_size=2))))
    if draw(st.booleans()):
        rest = Filter(rest, draw(exprs))
    shape = draw(st.sampled_from(["select", "aggregate", "star"]))
    if shape == "star" and not isinstance(rest, TableRef):
        return rest
    if shape == "aggregate":
        group = tuple(draw(st.lists(names, min_size=1, max_size=2)))
        agg = draw(st.lists(st.builds(SumAgg, exprs), min_size=1, max_size=2))
        named = [Alias(s, draw(names)) if draw(st.booleans()) else s for s in agg]
        plain = draw(st.lists(items, max_size=2))
        return Aggregate(rest, group, tuple(plain + named))
    return Select(rest, tuple(draw(st.lists(items, min_size=1, max_size=3))))


@settings(max_examples=1000, deadline=None)
@given(transforms())
def test_print_parse_round_trip(t):
    text = print_transform(t)
    assert parse(text) == t
    assert print_transform(parse(text)) == text


# -- inference ----------------------------------------------------------------------

CHILD = schema_of("ChildSchema", col2="timestamp", col4="float64", col5="string?")


def test_grand_child_inference():
    t = parse("select col2, cast(col4 as int64) as col4 from child_table")
    out = infer_schema(t, {"child_table": CHILD})
    assert [(c.name, str(c.type)) for c in out.columns] == [("col2", "timestamp"), ("col4", "int64")]
    assert out.column("col2").origin.kind == "inherited"
    assert out.column("col4").origin.kind == "inherited_narrowed"


def test_projection_is_identity_inheritance():
    out = infer_schema(parse("select col2 from child_table"), {"child_table": CHILD})
    assert str(out.column("col2").type) == "timestamp"
    assert out.column("col2").origin.kind == "inherited"
    assert out.column("col2").origin.column == "col2"


def test_family_friend_inference():
    """Join plus filter gives col5 non-null; col4 comes from Grand.col4 (int64)."""
    plan = load_manifest(FAMILY)
    node = plan.node("family_friend")
    out = infer_schema(node.transform, node_inputs(plan, node, {}))
    assert [(c.name, str(c.type)) for c in out.columns] == [
        ("col2", "timestamp"),
        ("col4", "int64"),
        ("col5", "string"),
    ]
    assert out.column("col5").origin.kind == "inherited_notnull"


@pytest.mark.parametrize(
    "src, exc",
    [
        ("select nope from c", errors.UnknownColumn),
        ("select col2 - col5 as d from c", errors.TypeMismatch),
        ("select col2, col2 from c", errors.DuplicateColumn),
        ("select col4 < 1 and col5 as z from c", errors.TypeMismatch),
        ("select col4, sum(col4) as s from c group by col2", errors.InvalidAggregate),
        ("select col2 from c where sum(col4) < 1", errors.InvalidAggregate),
        ("select col4 from missing", errors.UnknownInput),
    ],
)
def test_inference_errors(src, exc):
    with pytest.raises(exc):
        infer_schema(parse(src), {"c": CHILD})


def test_declared_narrowing_without_cast_is_illegal():
    declared = schema_of("Grand", col2="timestamp", col4="int64")
    with pytest.raises(errors.IllegalNarrowing) as exc:
        infer_schema(parse("select col2, col4 from c"), {"c": CHILD}, declared=declared)
    assert exc.value.column == "col4"


def test_pipeline_nodes_infer_against_contracts():
    plan = load_manifest(PIPELINE)
    for node in plan.nodes:
        declared = node.declared_output
        out = infer_schema(node.transform, node_inputs(plan, node, {}), declared=declared)
        assert out.names == declared.names


# -- evaluation -----------------------------------------------------------------------


def test_sum_group_by():
    s = TableSnapshot.from_rows(schema_of("K", k="string", v="int64"), [("a", 1), ("a", 2)])
    out = evaluate(parse("select k, sum(v) as total from t group by k"), {"t": s})
    assert list(out.rows()) == [("a", 3)]


def test_filter_is_not_null():
    s = TableSnapshot.from_rows(schema_of("N", v="string?"), [("x",), (None,), ("y",)])
    out = evaluate(parse("select v from t where v is not null"), {"t": s})
    assert list(out.rows()) == [("x",), ("y",)]
    assert not out.schema.column("v").type.nullable


def test_cast_truncates_like_independent_recomputation():
    values = [1.9, 0.2, -1.5, 7.0, -0.9]
    s = TableSnapshot.from_rows(CHILD, [(TS, v, None) for v in values])
    out = evaluate(parse("select col2, cast(col4 as int64) as col4 from c"), {"c": s})
    assert list(out.column("col4")) == [int(math.trunc(v)) for v in values]


def test_join_and_subtraction():
    left = TableSnapshot.from_rows(schema_of("L", k="string", a="int64"), [("x", 5), ("y", 1)])
    right = TableSnapshot.from_rows(schema_of("R", k="string", b="float64"), [("x", 0.5), ("z", 2.0)])
    out = evaluate(parse("select k, a - b as d from l join r on k"), {"l": left, "r": right})
    assert list(out.rows()) == [("x", 4.5)]


def test_runtime_cast_error():
    s = TableSnapshot.from_rows(schema_of("S", v="string"), [("12",), ("x",)])
    with pytest.raises(errors.RuntimeCastError):
        evaluate(parse("select cast(v as int64) as n from t"), {"t": s})


def test_integer_overflow_is_reported():
    s = TableSnapshot.from_rows(schema_of("S", v="int64"), [(-(2**63),)])
    with pytest.raises(errors.IntegerOverflow):
        evaluate(parse("select v - 1 as w from t"), {"t": s})


def test_input_contract_checked_before_evaluation():
    s = TableSnapshot.from_rows(schema_of("S", v="int64?"), [(None,)])
    with pytest.raises(errors.InputContractViolation):
        evaluate(parse("select v from t"), {"t": s}, schemas={"t": schema_of("S", v="int64")})


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("ab"), st.integers(-1000, 1000)), max_size=10))
def test_sum_matches_python(rows):
    s = TableSnapshot.from_rows(schema_of("K", k="string", v="int64"), rows)
    out = evaluate(parse("select k, sum(v) as total from t group by k"), {"t": s})
    want = {}
    for k, v in rows:
        want[k] = want.get(k, 0) + v
    assert dict(out.rows()) == want


@settings(max_examples=200, deadline=None)
@given(st.lists(st.one_of(st.none(), st.integers(-50, 50)), max_size=10), st.integers(-50, 50))
def test_filters_match_python(values, bound):
    s = TableSnapshot.from_rows(schema_of("S", v="int64?"), [(v,) for v in values])
    out = evaluate(parse(f"select v from t where v is not null and v < {bound}"), {"t": s})
    assert [r[0] for r in out.rows()] == [v for v in values if v is not None and v < bound]
