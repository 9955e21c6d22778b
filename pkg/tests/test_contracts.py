from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lakekit import errors
from lakekit.contracts import (
    check_plan,
    diagnostics_json,
    has_errors,
    lineage,
    load_manifest,
    parse_manifest,
    plan_validation_skips,
    validate_data,
)
from lakekit.schema import TableSnapshot, schema_of

from conftest import FAMILY, PIPELINE

RAW_OK = {"raw_table": schema_of("RawSchema", col1="string", col2="timestamp", col3="int64")}
RAW_FLOAT = {"raw_table": schema_of("RawSchema", col1="string", col2="timestamp", col3="float64")}


def _text(path=PIPELINE):
    return path.read_text(encoding="utf-8")


def test_pipeline_manifest_loads():
    plan = load_manifest(PIPELINE)
    assert plan.node_names == ("parent_table", "child_table", "grand_child")
    assert plan.node("grand_child").inputs == ("child_table",)
    assert set(plan.sources) == {"raw_table"}


def test_family_manifest_loads():
    plan = load_manifest(FAMILY)
    assert plan.node_names == ("parent_table", "child_table", "grand_child", "family_friend")
    assert plan.node("family_friend").inputs == ("child_table", "grand_child")


def test_self_dependency_is_a_cycle():
    text = _text().replace("-- grand_child: Grand <- child_table", "-- grand_child: Grand <- grand_child")
    text = text.replace("as col4 from child_table", "as col4 from grand_child")
    with pytest.raises(errors.CycleDetected):
        parse_manifest(text)


def test_longer_cycle():
    text = _text().replace("-- parent_table: ParentSchema <- raw_table", "-- parent_table: ParentSchema <- grand_child")
    text = text.replace("from raw_table group by", "from grand_child group by")
    with pytest.raises(errors.CycleDetected):
        parse_manifest(text)


@pytest.mark.parametrize(
    "mutate, exc",
    [
        (lambda t: t.replace("schema Grand {", "schema Grand {\n    col9: decimal"), errors.ManifestParseError),
        (lambda t: t.replace("Grand <- child_table", "Missing <- child_table"), errors.UnknownSchema),
        (lambda t: t.replace("col2: timestamp from ChildSchema.col2", "col2: string from ChildSchema.col2"),
         errors.InvalidOrigin),
        (lambda t: t.replace("as col4 from child_table", "as col4 from"), errors.ManifestParseError),
        (lambda t: t.replace("-- grand_child: Grand <- child_table", "-- grand_child: Grand <- "),
         errors.ManifestParseError),
    ],
)
def test_manifest_errors(mutate, exc):
    with pytest.raises(exc):
        parse_manifest(mutate(_text()))


def test_unmodified_pipeline_checks_clean():
    assert check_plan(load_manifest(PIPELINE), RAW_OK) == []


def test_float_col3_is_caught_at_parent_sum():
    diags = check_plan(load_manifest(PIPELINE), RAW_FLOAT)
    assert has_errors(diags)
    mismatch = [d for d in diags if d.code == "TypeMismatch"]
    assert len(mismatch) == 1
    assert mismatch[0].node == "parent_table" and mismatch[0].column == "_S"
    assert mismatch[0].span[1] == 29  # the query line of parent_table


def test_missing_cast_is_one_illegal_narrowing():
    plan = parse_manifest(_text().replace("cast(col4 as int64) as col4", "col4"))
    diags = check_plan(plan, RAW_OK)
    narrowing = [d for d in diags if d.code == "IllegalNarrowing"]
    assert len(narrowing) == 1
    assert narrowing[0].node == "grand_child" and narrowing[0].column == "col4"
    assert "float64" in narrowing[0].message and "int64" in narrowing[0].message


def test_missing_source_table():
    diags = check_plan(load_manifest(PIPELINE), {})
    assert [d.code for d in diags if d.severity == "error"] == ["MissingSource"]


def test_diagnostics_json_is_stable():
    diags = check_plan(load_manifest(PIPELINE), RAW_FLOAT)
    doc = json.loads(diagnostics_json(diags))
    assert [d["code"] for d in doc] == [d.code for d in diags]
    assert diagnostics_json(diags) == diagnostics_json(check_plan(load_manifest(PIPELINE), RAW_FLOAT))


def test_family_pipeline_checks_clean():
    assert not has_errors(check_plan(load_manifest(FAMILY), RAW_OK))


# -- validate_data -------------------------------------------------------------------


def test_nullable_nulls_are_fine():
    s = schema_of("C", col5="string?")
    assert validate_data(TableSnapshot.from_rows(s, [(None,), ("x",)]), s).ok


def test_unexpected_null_names_column_and_row():
    s = schema_of("C", col4="int64")
    report = validate_data(TableSnapshot.from_rows(s, [(1,), (None,), (3,)]), s)
    assert not report.ok
    v = report.violations[0]
    assert (v.kind, v.column, v.row) == ("UnexpectedNull", "col4", 1)


def test_empty_table_conforms():
    s = schema_of("C", col4="int64", col5="string")
    assert validate_data(TableSnapshot.from_rows(s, []), s).ok


def test_type_and_shape_violations():
    s = schema_of("C", a="int64")
    assert validate_data(TableSnapshot.from_rows(s, [("x",)]), s).violations[0].kind == "ValueTypeMismatch"
    wide = TableSnapshot.from_columns(s, {"a": [1], "b": [2]})
    kinds = {v.kind for v in validate_data(wide, s).violations}
    assert "ExtraColumn" in kinds
    narrow = TableSnapshot.from_columns(schema_of("C", a="int64", b="int64"), {"a": [1]})
    assert "MissingColumn" in {v.kind for v in validate_data(narrow, narrow.schema).violations}


def test_skip_removes_only_the_named_check():
    s = schema_of("C", a="int64")
    data = TableSnapshot.from_rows(s, [(None,)])
    assert validate_data(data, s, skip=[("a", "nonnull")]).ok


@settings(max_examples=100, deadline=None)
@given(st.lists(st.one_of(st.none(), st.integers(-5, 5)), max_size=8))
def test_first_unexpected_null_is_reported(values):
    s = schema_of("C", a="int64")
    report = validate_data(TableSnapshot.from_rows(s, [(v,) for v in values]), s)
    nulls = [i for i, v in enumerate(values) if v is None]
    assert [v.row for v in report.violations] == nulls[:1]


# -- lineage -------------------------------------------------------------------------


def test_col2_is_identity_all_the_way_down():
    tree = lineage(load_manifest(PIPELINE), ("grand_child", "col2"), RAW_OK)
    assert tree.chain() == [
        ("grand_child", "col2", "identity"),
        ("child_table", "col2", "identity"),
        ("parent_table", "col2", "identity"),
        ("raw_table", "col2", None),
    ]


def test_child_col4_is_fresh():
    tree = lineage(load_manifest(PIPELINE), ("child_table", "col4"), RAW_OK)
    assert tree.kind == "fresh" and tree.inputs == ()


def test_family_friend_col5_is_notnull_over_child():
    tree = lineage(load_manifest(FAMILY), ("family_friend", "col5"), RAW_OK)
    assert tree.kind == "notnull"
    assert [(i.node, i.column) for i in tree.inputs] == [("child_table", "col5")]
    assert "family_friend.col5 [notnull]" in tree.render()


def test_lineage_unknown_column():
    with pytest.raises(errors.UnknownColumn):
        lineage(load_manifest(PIPELINE), ("grand_child", "nope"), RAW_OK)
    with pytest.raises(errors.UnknownColumn):
        lineage(load_manifest(PIPELINE), ("nowhere", "col2"), RAW_OK)


# -- validation skips ------------------------------------------------------------------

DOWNSTREAM = """
schema After {
    col5: string from FriendSchema.col5
}

-- after_friend: After <- family_friend
select col5 from family_friend
"""

RECAST = """
schema After {
    col5: string
}

-- after_friend: After <- child_table
select cast(col5 as string) as col5 from child_table where col5 is not null
"""


def test_identity_after_notnull_is_skippable():
    plan = parse_manifest(_text(FAMILY) + DOWNSTREAM)
    skips = plan_validation_skips(plan, RAW_OK)
    assert ("after_friend", "col5", "nonnull") in skips
    # the node that establishes non-null itself is still validated
    assert ("family_friend", "col5", "nonnull") not in skips


def test_cast_from_nullable_source_is_not_skippable():
    plan = parse_manifest(_text(FAMILY) + RECAST)
    assert not has_errors(check_plan(plan, RAW_OK))
    assert ("after_friend", "col5", "nonnull") not in plan_validation_skips(plan, RAW_OK)


def test_single_node_plan_has_no_skips():
    text = _text().split("-- child_table")[0]
    text = text.replace(
        text[text.index("schema ChildSchema"):text.index("-- parent_table")], ""
    )
    plan = parse_manifest(text)
    assert plan.node_names == ("parent_table",)
    assert plan_validation_skips(plan, RAW_OK) == frozenset()


def test_lake_sources_never_justify_skips():
    plan = load_manifest(PIPELINE)
    assert not any(n == "parent_table" for n, _, _ in plan_validation_skips(plan, RAW_OK))
