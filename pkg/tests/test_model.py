from __future__ import annotations

import random
from itertools import permutations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lakekit import errors
from lakekit.model import (
    INIT,
    POLICIES,
    Bounds,
    ModelState,
    Policy,
    brute_force_key,
    build_trace,
    canonical_key,
    check,
    enabled,
    enumerate_states,
    format_script,
    naive_reachable,
    parse_action,
    parse_script,
    reachable_keys,
    render_trace,
    replay,
    successors,
)
from lakekit.model.canon import rename_tables
from lakekit.model.state import no_aborted_leak, pipeline_atomicity

LEAK = [
    ("begin", "r1", "main"),
    ("step", "r1", 0),
    ("fail", "r1"),
    ("branch", "b1", "txn/r1"),
    ("merge", "b1", "main"),
]
SMALL = [Bounds(2, 2, 4, 3, 2, 6), Bounds(3, 3, 5, 3, 2, 7), Bounds(2, 2, 4, 2, 1, 6)]
# brute force relabels every permutation, so it only scales to two tables
ORACLE = [Bounds(2, 2, 4, 3, 2, 6), Bounds(2, 2, 5, 3, 2, 7), Bounds(2, 2, 4, 2, 1, 6)]


def test_bounds_validation():
    with pytest.raises(errors.BoundsTooLarge):
        Bounds(0, 1, 1, 1, 1, 1)
    assert Bounds.uniform(2) == Bounds(2, 2, 2, 2, 2, 2)
    assert Bounds().to_dict()["max_tables"] == 2


def test_unit_bounds_hand_count():
    """Every bound 1: only main fits, so create_table is the single move."""
    assert enumerate_states(Bounds.uniform(1)).states == 2
    # with room for a second branch: init, create_table, begin, branch
    res = enumerate_states(Bounds(1, 1, 1, 2, 1, 1))
    assert (res.states, res.per_depth) == (4, (1, 3))


@pytest.mark.parametrize("bounds", ORACLE)
@pytest.mark.parametrize("policy", POLICIES)
def test_canonical_classes_match_brute_force(bounds, policy):
    """Symmetry reduction neither merges nor splits classes."""
    raw, classes = naive_reachable(bounds, policy)
    assert raw >= len(classes)
    assert enumerate_states(bounds, policy).states == len(classes)
    assert len(reachable_keys(bounds, policy)) == len(classes)


@pytest.mark.parametrize("bounds", SMALL)
def test_policy_monotonicity(bounds):
    on = reachable_keys(bounds, "guardrail_on")
    off = reachable_keys(bounds, "guardrail_off")
    assert on <= off


def test_determinism():
    b = SMALL[1]
    assert enumerate_states(b).to_dict() == enumerate_states(b).to_dict()
    assert check("no_aborted_leak", b, "guardrail_off").trace == check("no_aborted_leak", b, "guardrail_off").trace


def test_guardrail_off_finds_leak_trace():
    res = check("no_aborted_leak", Bounds(3, 3, 6, 4, 2, 8), "guardrail_off")
    assert not res.ok
    assert list(res.trace.actions) == LEAK
    assert not no_aborted_leak(res.trace.final)


def test_counterexample_is_minimal():
    """No trace shorter than the one returned violates the invariant."""
    res = check("no_aborted_leak", SMALL[0], "guardrail_off")
    shorter = Bounds(**{**SMALL[0].to_dict(), "max_steps": len(res.trace) - 1})
    assert check("no_aborted_leak", shorter, "guardrail_off").ok


def test_guardrail_on_is_ok():
    assert check("no_aborted_leak", Bounds(3, 3, 5, 3, 2, 8), "guardrail_on").ok


def test_mixed_state_without_guardrail():
    res = check("pipeline_atomicity", SMALL[0], "guardrail_off")
    assert not res.ok
    assert [a[0] for a in res.trace.actions] == ["begin", "step", "fail", "branch"]
    assert check("pipeline_atomicity", SMALL[0], "guardrail_on").ok


@pytest.mark.parametrize("policy", POLICIES)
def test_merge_atomicity_holds(policy):
    assert check("merge_atomicity", SMALL[1], policy).ok


def test_unknown_invariant():
    with pytest.raises(errors.UnknownInvariant):
        check("nope", SMALL[0])


def test_successor_semantics():
    on, off = Policy.named("guardrail_on"), Policy.named("guardrail_off")
    b = Bounds(3, 3, 6, 4, 2, 10)
    state = build_trace(LEAK[:3], off).final
    assert state.branch_class("txn/r1") == "aborted"
    assert not enabled(state, ("branch", "b1", "txn/r1"), b, on)
    assert enabled(state, ("branch", "b1", "txn/r1"), b, off)
    # direct merge out of an aborted branch stays refused under both policies
    assert not enabled(state, ("merge", "txn/r1", "main"), b, off)
    # runs write only fresh tables, once
    s = build_trace([("begin", "r1", "main"), ("step", "r1", 0)], on).final
    assert not enabled(s, ("step", "r1", 0), b, on)
    assert enabled(s, ("finish", "r1"), b, on)
    with pytest.raises(ValueError):
        Policy.named("guardrail_sideways")


def test_happy_path_finish_publishes_all_writes():
    on = Policy.named("guardrail_on")
    actions = [("begin", "r1", "main"), ("step", "r1", 0), ("step", "r1", 1), ("finish", "r1")]
    final = build_trace(actions, on).final
    assert dict(final.tables(final.head("main"))).keys() == {0, 1}
    assert "txn/r1" not in {n for n, _, _ in final.branches}
    assert pipeline_atomicity(final) and no_aborted_leak(final)


# -- canonical forms ------------------------------------------------------------------


def _random_state(rng: random.Random, policy: Policy, bounds: Bounds, steps: int) -> ModelState:
    s = INIT
    for _ in range(steps):
        succ = list(successors(s, bounds, policy))
        if not succ:
            break
        s = rng.choice(succ)[1]
    return s


def _rename_users(state: ModelState, perm: dict[str, str]) -> ModelState:
    branches = tuple(sorted((perm.get(n, n), h, c) for n, h, c in state.branches))
    runs = tuple((p, perm.get(bd, bd), i, st_, bg, w) for p, bd, i, st_, bg, w in state.runs)
    return ModelState(state.commits, branches, runs)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(POLICIES))
def test_canonical_key_ignores_names(seed, policy):
    rng = random.Random(seed)
    pol = Policy.named(policy)
    s = _random_state(rng, pol, Bounds(3, 3, 6, 4, 2, 10), rng.randint(0, 9))
    key = canonical_key(s)
    users = s.user_branches()
    if len(users) > 1:
        shuffled = list(users)
        rng.shuffle(shuffled)
        assert canonical_key(_rename_users(s, dict(zip(users, shuffled)))) == key
    used = sorted({t for tables, _ in s.commits for t, _ in tables})
    for perm in list(permutations(range(3), len(used)))[:4]:
        assert canonical_key(rename_tables(s, dict(zip(used, perm)))) == key


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_canonical_and_brute_force_agree_on_pairs(seed):
    rng = random.Random(seed)
    pol = Policy.named(rng.choice(POLICIES))
    b = Bounds(2, 2, 4, 3, 2, 6)
    a = _random_state(rng, pol, b, rng.randint(0, 6))
    c = _random_state(rng, pol, b, rng.randint(0, 6))
    assert (canonical_key(a) == canonical_key(c)) == (brute_force_key(a) == brute_force_key(c))


# -- trace scripts -------------------------------------------------------------------


def test_script_round_trip():
    text = format_script(LEAK, "guardrail_off")
    assert text.splitlines()[0] == "# policy guardrail_off"
    assert parse_script(text) == (LEAK, "guardrail_off")


@pytest.mark.parametrize(
    "line",
    ["jump r1", "step r1", "step r1 x0", "branch main main", "begin 1 main", "merge b1", "fail r0"],
)
def test_bad_script_lines(line):
    with pytest.raises(errors.TraceParseError):
        parse_action(line)


def test_build_trace_refuses_disabled_action():
    with pytest.raises(errors.TraceParseError):
        build_trace([("finish", "r1")], Policy.named("guardrail_on"))


def test_render_trace_mentions_every_step():
    trace = build_trace(LEAK, Policy.named("guardrail_off"))
    text = render_trace(trace)
    for i, line in enumerate(format_script(LEAK).splitlines(), start=1):
        assert f"{i:>2}. {line}" in text
    assert "txn/r1 (aborted)" in text


# -- replay against the implementation -------------------------------------------------


def test_replay_leak_without_guardrail():
    report = replay(LEAK, "guardrail_off")
    assert report.steps == 5 and report.rejected_at is None
    assert report.leaked_commits
    assert report.mixed_state


def test_replay_leak_with_guardrail():
    report = replay(LEAK, "guardrail_on")
    assert report.steps == 3
    assert (report.rejected_at, report.rejected_code) == (4, "AbortedSourceForbidden")
    assert not report.leaked_commits and not report.mixed_state


def test_replay_empty_trace():
    report = replay([], "guardrail_on")
    assert report.steps == 0 and report.main_tables == {} and not report.mixed_state


def test_replay_happy_path():
    actions = [("begin", "r1", "main"), ("step", "r1", 0), ("step", "r1", 1), ("finish", "r1")]
    report = replay(actions)
    assert set(report.main_tables) == {"t0", "t1"}


def test_replay_name_order_is_enforced():
    with pytest.raises(errors.TraceParseError):
        replay([("begin", "r2", "main")])
    with pytest.raises(errors.TraceParseError):
        replay([("branch", "b2", "main")])


def _random_actions(rng: random.Random, n: int, policy: Policy, invalid: bool) -> list[tuple]:
    """Mostly enabled actions; with ``invalid`` some arbitrary ones mixed in."""
    bounds = Bounds(3, 3, 8, 4, 2, 12)
    s = INIT
    out = []
    for _ in range(n):
        succ = list(successors(s, bounds, policy))
        if invalid and (not succ or rng.random() < 0.2):
            runs = [f"r{i + 1}" for i in range(len(s.runs))] or ["r1"]
            names = [b[0] for b in s.branches]
            out.append(
                rng.choice(
                    [
                        ("step", rng.choice(runs), rng.randint(0, 2)),
                        ("fail", rng.choice(runs)),
                        ("finish", rng.choice(runs)),
                        ("merge", rng.choice(names), rng.choice(names)),
                        ("create_table", rng.choice(names), rng.randint(0, 2)),
                    ]
                )
            )
            break
        if not succ:
            break
        action, s = rng.choice(succ)
        out.append(action)
    return out


def test_random_replays_never_diverge():
    rng = random.Random(2024)
    for i in range(1000):
        policy = rng.choice(POLICIES)
        actions = _random_actions(rng, rng.randint(0, 10), Policy.named(policy), invalid=i % 3 == 0)
        replay(actions, policy)  # raises Divergence on any mismatch
