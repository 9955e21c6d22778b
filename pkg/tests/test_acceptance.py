"""End-to-end acceptance checks, one test per criterion.

The terminal summary lists one PASS/FAIL line per criterion number.
"""

from __future__ import annotations

import itertools
import random
import time

import pytest

from lakekit.contracts import (
    check_plan,
    has_errors,
    lineage,
    load_manifest,
    parse_manifest,
    plan_validation_skips,
)
from lakekit.ingest import import_csv
from lakekit.merge import merge_maps
from lakekit.model import Bounds, check, replay
from lakekit.runs import RunEngine, RunOptions, lake_schemas

from conftest import FAMILY, PIPELINE, RAW_CSV
from plangen import checked_plan, random_rows

LEAK_SHAPE = ["begin", "step", "fail", "branch", "merge"]


def _seed_branch(repo, name: str, rng: random.Random) -> None:
    """A fresh branch off main holding random conforming ``raw_table`` rows."""
    repo.create_branch(name, "main")
    repo.write_table(name, "raw_table", random_rows(rng), repo.resolve_ref(name))


# -- 1 -----------------------------------------------------------------------------------


@pytest.mark.criterion(1)
def test_fail_fast_schema_detection(repo, tmp_path):
    drifted = tmp_path / "float.csv"
    drifted.write_text(RAW_CSV.read_text().replace("col3:int64", "col3:float64").replace(",1\n", ",1.5\n"))
    import_csv(repo, "raw_table", drifted)
    plan = load_manifest(PIPELINE)
    reads = repo.data_reads
    started = time.perf_counter()
    diags = check_plan(plan, lake_schemas(repo, repo.resolve_ref("main"), plan))
    elapsed = time.perf_counter() - started
    assert has_errors(diags)
    assert any(d.node == "parent_table" and d.column == "_S" for d in diags)
    assert elapsed < 1.0
    assert repo.data_reads == reads

    import_csv(repo, "raw_table", RAW_CSV)
    assert check_plan(plan, lake_schemas(repo, repo.resolve_ref("main"), plan)) == []
    assert repo.data_reads == reads


# -- 2 -----------------------------------------------------------------------------------


@pytest.mark.criterion(2)
def test_narrowing_discipline(raw_repo):
    plan = load_manifest(PIPELINE)
    lake = lake_schemas(raw_repo, raw_repo.resolve_ref("main"), plan)
    assert check_plan(plan, lake) == []
    assert RunEngine(raw_repo).run(PIPELINE, "main").status == "committed"

    uncast = parse_manifest(PIPELINE.read_text().replace("cast(col4 as int64) as col4", "col4"))
    diags = [d for d in check_plan(uncast, lake) if d.severity == "error"]
    assert [(d.code, d.node, d.column) for d in diags] == [("IllegalNarrowing", "grand_child", "col4")]


# -- 3 -----------------------------------------------------------------------------------


@pytest.mark.criterion(3)
def test_pipeline_atomicity_under_every_injection_point(repo):
    rng = random.Random(3)
    engine = RunEngine(repo)
    started = time.perf_counter()
    plans = 0
    for i in range(100):
        gen, plan = checked_plan(rng)
        target = f"p{i}"
        _seed_branch(repo, target, rng)
        # exercise both a fresh target and one already holding every output
        if rng.random() < 0.5:
            assert engine.run(gen.text.encode(), target).status == "committed"
            repo.write_table(target, "raw_table", random_rows(rng), repo.resolve_ref(target))
        for fail_at in (None, *plan.node_names):
            pre = repo.tables(target)
            seen = []
            rec = engine.run(
                gen.text.encode(), target, RunOptions(fail_at_node=fail_at),
                on_step=lambda ev: seen.append(repo.tables(target)),
            )
            post = repo.tables(target)
            assert rec.status == ("committed" if fail_at is None else "aborted")
            if fail_at is not None:
                assert post == pre
            assert seen and all(m in (pre, post) for m in seen)
            # only the very last event may show the published map
            assert all(m == pre for m in seen[:-1])
        plans += 1
    assert plans >= 100
    assert time.perf_counter() - started < 60


# -- 4 -----------------------------------------------------------------------------------


@pytest.mark.criterion(4)
def test_abort_triage(repo):
    rng = random.Random(4)
    engine = RunEngine(repo)
    for i in range(40):
        gen, plan = checked_plan(rng)
        target = f"t{i}"
        _seed_branch(repo, target, rng)
        clean_branch = f"{target}-clean"
        repo.create_branch(clean_branch, target)
        clean = engine.run(gen.text.encode(), clean_branch)
        start_tables = repo.tables(target)
        for k, node in enumerate(plan.node_names, start=1):
            head = repo.resolve_ref(target)
            rec = engine.run(gen.text.encode(), target, RunOptions(fail_at_node=node))
            assert rec.status == "aborted"
            assert repo.resolve_ref(target) == head
            txn_tables = repo.tables(rec.txn_branch)
            expected = dict(start_tables)
            expected.update({n: clean.outputs[n] for n in plan.node_names[: k - 1]})
            assert txn_tables == expected
            for n in plan.node_names[: k - 1]:
                repo.read_table(rec.txn_branch, n)


def test_abort_triage_on_fixture_pipeline(raw_repo):
    engine = RunEngine(raw_repo)
    head = raw_repo.resolve_ref("main")
    rec = engine.run(PIPELINE, "main", RunOptions(fail_at_node="child_table"))
    assert raw_repo.resolve_ref("main") == head
    assert set(raw_repo.tables(rec.txn_branch)) == {"raw_table", "parent_table"}
    assert raw_repo.read_table(rec.txn_branch, "parent_table").row_count == 2


# -- 5 -----------------------------------------------------------------------------------


@pytest.mark.criterion(5)
def test_reproducibility(repo):
    rng = random.Random(5)
    engine = RunEngine(repo)
    outcomes = {"committed": 0, "aborted": 0}
    for i in range(60):
        gen, plan = checked_plan(rng)
        target = f"r{i}"
        _seed_branch(repo, target, rng)
        fail_at = rng.choice([None, None, *plan.node_names])
        rec = engine.run(gen.text.encode(), target, RunOptions(fail_at_node=fail_at))
        # the source branch moves on; reproduction must not care
        repo.write_table(target, "raw_table", random_rows(rng), repo.resolve_ref(target))
        _, again = engine.reproduce(rec.run_id, f"{target}-again")
        assert again.status == rec.status
        if rec.status == "committed":
            assert again.outputs == rec.outputs
        else:
            assert again.failure.to_dict() == rec.failure.to_dict()
        outcomes[rec.status] += 1
    assert sum(outcomes.values()) >= 50
    assert all(outcomes.values())


# -- 6 -----------------------------------------------------------------------------------


@pytest.mark.criterion(6)
def test_counterexample_reproduction():
    started = time.perf_counter()
    bounds = Bounds(3, 3, 6, 4, 2, 10)
    off = check("no_aborted_leak", bounds, "guardrail_off")
    assert not off.ok
    actions = list(off.trace.actions)
    assert [a[0] for a in actions] == LEAK_SHAPE
    assert actions[3] == ("branch", "b1", "txn/r1")
    assert actions[4] == ("merge", "b1", "main")
    # breadth-first, so nothing shorter exists; confirm independently
    shorter = Bounds(3, 3, 6, 4, 2, len(actions) - 1)
    assert check("no_aborted_leak", shorter, "guardrail_off").ok

    report = replay(actions, "guardrail_off")  # raises Divergence on any mismatch
    assert report.steps == len(actions) and report.leaked_commits

    on = check("no_aborted_leak", bounds, "guardrail_on")
    assert on.ok
    assert time.perf_counter() - started < 300


# -- 7 -----------------------------------------------------------------------------------


def _classify(base, ours, theirs):
    """Textbook per-table rule, written independently of the library."""
    merged, conflicts = {}, set()
    for t in set(base) | set(ours) | set(theirs):
        b, o, h = base.get(t), ours.get(t), theirs.get(t)
        if o == h:
            value = o
        elif o == b:
            value = h
        elif h == b:
            value = o
        else:
            conflicts.add(t)
            continue
        if value is not None:
            merged[t] = value
    return merged, conflicts


@pytest.mark.criterion(7)
def test_merge_oracle_equivalence():
    started = time.perf_counter()
    tables, values = ("a", "b", "c"), ("s1", "s2", "s3")
    maps = [
        {t: v for t, v in zip(tables, choice) if v is not None}
        for choice in itertools.product((None, *values), repeat=len(tables))
    ]
    assert len(maps) == 64
    checked = 0
    for base, ours, theirs in itertools.product(maps, repeat=3):
        merged, conflicts = merge_maps(base, ours, theirs)
        want, want_conflicts = _classify(base, ours, theirs)
        assert set(conflicts) == want_conflicts
        if not want_conflicts:
            assert merged == want
        checked += 1
    assert checked == 64**3
    assert time.perf_counter() - started < 10


# -- 8 -----------------------------------------------------------------------------------


@pytest.mark.criterion(8)
def test_contract_runtime_agreement(repo):
    rng = random.Random(8)
    engine = RunEngine(repo)
    with_skips = 0
    for i in range(1000):
        gen, plan = checked_plan(rng)
        a, b = f"g{i}", f"g{i}-full"
        _seed_branch(repo, a, rng)
        repo.create_branch(b, a)
        skipping = engine.run(gen.text.encode(), a, RunOptions(skip_redundant_checks=True))
        full = engine.run(gen.text.encode(), b, RunOptions(skip_redundant_checks=False))
        assert skipping.status == "committed", [r.diagnostic for r in skipping.node_results]
        assert full.status == "committed", [r.diagnostic for r in full.node_results]
        assert skipping.outputs == full.outputs
        with_skips += bool(plan_validation_skips(plan, lake_schemas(repo, skipping.start_commit, plan)))
    # the comparison means nothing unless some plans actually skip checks
    assert with_skips > 0


# -- 9 -----------------------------------------------------------------------------------


@pytest.mark.criterion(9)
def test_family_pipeline(raw_repo):
    plan = load_manifest(FAMILY)
    lake = lake_schemas(raw_repo, raw_repo.resolve_ref("main"), plan)
    assert not has_errors(check_plan(plan, lake))
    rec = RunEngine(raw_repo).run(FAMILY, "main")
    assert rec.status == "committed"
    friend = raw_repo.read_table("main", "family_friend")
    assert None not in list(friend.column("col5"))
    tree = lineage(plan, ("family_friend", "col5"), lake)
    assert tree.kind == "notnull"
    assert [(i.node, i.column) for i in tree.inputs] == [("child_table", "col5")]
    assert plan.node("child_table").declared_output.name == "ChildSchema"
