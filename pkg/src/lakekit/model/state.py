"""Abstract lake states and the transition relation of the bounded model.

A commit is ``(tables, parents)`` where ``tables`` maps a table index to the
commit that created its snapshot. Every write allocates a fresh snapshot, so
a snapshot is identified by the commit that introduced it and needs no
separate name. Commit 0 is Init.

Branches are ``(name, head, cls)`` sorted by name: ``main``, user branches
``b<k>`` and run branches ``txn/r<k>``. Runs are
``(plan, bound, idx, status, begin, written)`` with status one of
``running``, ``finished`` or ``failed``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from .. import errors

MAIN = "main"
POLICIES = ("guardrail_on", "guardrail_off")


@dataclass(frozen=True)
class Bounds:
    max_tables: int = 2
    max_snapshots: int = 2
    max_commits: int = 4
    max_branches: int = 2
    max_runs: int = 1
    max_steps: int = 6
    # max_commits counts commits created after Init; max_branches counts main

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not isinstance(value, int) or value < 1:
                raise errors.BoundsTooLarge(f"bound {name} must be a positive integer, got {value!r}")

    @classmethod
    def uniform(cls, n: int) -> Bounds:
        return cls(n, n, n, n, n, n)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class Policy:
    allow_branch_from_aborted: bool = False
    allow_merge_from_aborted: bool = False

    @classmethod
    def named(cls, name: str) -> Policy:
        if name == "guardrail_on":
            return cls(False, False)
        if name == "guardrail_off":
            # merging straight out of an aborted branch stays forbidden, so a
            # leak has to go through a branch taken from the aborted one
            return cls(True, False)
        raise ValueError(f"unknown policy {name!r}; expected one of {', '.join(POLICIES)}")


@dataclass(frozen=True)
class ModelState:
    commits: tuple = (((), ()),)
    branches: tuple = ((MAIN, 0, "normal"),)
    runs: tuple = ()

    # -- queries -------------------------------------------------------------------

    def head(self, name: str) -> int | None:
        for n, h, _ in self.branches:
            if n == name:
                return h
        return None

    def branch_class(self, name: str) -> str | None:
        for n, _, c in self.branches:
            if n == name:
                return c
        return None

    def tables(self, commit: int) -> dict[int, int]:
        return dict(self.commits[commit][0])

    @property
    def snapshot_count(self) -> int:
        return sum(1 for i, (tables, _) in enumerate(self.commits) if any(c == i for _, c in tables))

    def ancestors(self, commit: int) -> frozenset[int]:
        seen = {commit}
        stack = [commit]
        while stack:
            for p in self.commits[stack.pop()][1]:
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return frozenset(seen)

    def user_branches(self) -> list[str]:
        return [n for n, _, _ in self.branches if n.startswith("b")]

    # -- construction --------------------------------------------------------------

    def with_commit(self, tables: dict[int, int] | None, parents: tuple[int, ...], fresh_table: int | None = None):
        cid = len(self.commits)
        tabs = dict(tables or {})
        if fresh_table is not None:
            tabs[fresh_table] = cid
        rec = (tuple(sorted(tabs.items())), tuple(sorted(parents)))
        return ModelState(self.commits + (rec,), self.branches, self.runs), cid

    def with_branch(self, name: str, head: int, cls: str | None = None) -> ModelState:
        out = []
        found = False
        for n, h, c in self.branches:
            if n == name:
                out.append((n, head, cls or c))
                found = True
            else:
                out.append((n, h, c))
        if not found:
            out.append((name, head, cls or "normal"))
        return ModelState(self.commits, tuple(sorted(out)), self.runs)

    def without_branch(self, name: str) -> ModelState:
        return ModelState(self.commits, tuple(b for b in self.branches if b[0] != name), self.runs)

    def with_run(self, index: int, run: tuple) -> ModelState:
        runs = list(self.runs)
        if index == len(runs):
            runs.append(run)
        else:
            runs[index] = run
        return ModelState(self.commits, self.branches, tuple(runs))


def txn_name(run_index: int) -> str:
    return f"txn/r{run_index + 1}"


def run_name(run_index: int) -> str:
    return f"r{run_index + 1}"


def run_index(name: str) -> int:
    if not name.startswith("r") or not name[1:].isdigit() or int(name[1:]) < 1:
        raise ValueError(f"bad run name {name!r}")
    return int(name[1:]) - 1


INIT = ModelState()


# -- merges --------------------------------------------------------------------------


def lowest_common_ancestors(state: ModelState, a: int, b: int) -> list[int]:
    common = state.ancestors(a) & state.ancestors(b)
    below = {p for c in common for p in state.commits[c][1]}
    return sorted(common - below)


def merge_maps(base: dict, ours: dict, theirs: dict):
    merged = {}
    for t in sorted(base.keys() | ours.keys() | theirs.keys()):
        b, o, th = base.get(t), ours.get(t), theirs.get(t)
        if o == th or th == b:
            pick = o
        elif o == b:
            pick = th
        else:
            return None
        if pick is not None:
            merged[t] = pick
    return merged


def merge_outcomes(state: ModelState, src: int, dst: int) -> list[tuple]:
    """Possible results of merging commit ``src`` into head ``dst``.

    ``("no_op",)``, ``("ff", commit)``, ``("three", tables)`` or
    ``("conflict",)``. Several results are possible only when the commits
    have more than one lowest common ancestor: the implementation breaks that
    tie by content hash, which the model abstracts away.
    """
    if src == dst or src in state.ancestors(dst):
        return [("no_op",)]
    if dst in state.ancestors(src):
        return [("ff", src)]
    out = []
    for base in lowest_common_ancestors(state, dst, src):
        merged = merge_maps(state.tables(base), state.tables(dst), state.tables(src))
        result = ("conflict",) if merged is None else ("three", tuple(sorted(merged.items())))
        if result not in out:
            out.append(result)
    return out


# -- transitions ------------------------------------------------------------------------


def _apply_merge(state: ModelState, outcome: tuple, dst_branch: str, src_head: int, bounds: Bounds):
    """State after a successful merge outcome, or None when out of bounds."""
    dst = state.head(dst_branch)
    kind = outcome[0]
    if kind == "no_op":
        return state
    if kind == "ff":
        return state.with_branch(dst_branch, outcome[1])
    if len(state.commits) - 1 >= bounds.max_commits:
        return None
    new, cid = state.with_commit(dict(outcome[1]), (dst, src_head))
    return new.with_branch(dst_branch, cid)


def successors(state: ModelState, bounds: Bounds, policy: Policy) -> Iterator[tuple[tuple, ModelState]]:
    """Every enabled action with its resulting state, in a fixed order."""
    can_commit = len(state.commits) - 1 < bounds.max_commits  # Init is free
    can_write = can_commit and state.snapshot_count < bounds.max_snapshots
    can_branch = len(state.branches) < bounds.max_branches
    normal = [n for n, _, c in state.branches if c == "normal"]

    # CreateBranch from a normal branch, or from an aborted one if allowed
    if can_branch:
        name = f"b{len(state.user_branches()) + 1}"
        for src, head, cls in state.branches:
            if cls == "normal" or (cls == "aborted" and policy.allow_branch_from_aborted):
                yield ("branch", name, src), state.with_branch(name, head, "normal")

    # Begin a run on a normal branch. The plan is revealed one Step at a
    # time: a run's plan is exactly the tables it has written so far.
    if can_branch and len(state.runs) < bounds.max_runs:
        r = len(state.runs)
        for b in normal:
            head = state.head(b)
            new = state.with_run(r, ((), b, 0, "running", head, ()))
            yield ("begin", run_name(r), b), new.with_branch(txn_name(r), head, "transactional")

    for r, (plan, bound, idx, status, begin, written) in enumerate(state.runs):
        if status != "running":
            continue
        txn = txn_name(r)
        head = state.head(txn)
        # Step: create the run's next table on its branch
        if can_write:
            existing = state.tables(head)
            for t in range(bounds.max_tables):
                if t in existing:
                    continue
                new, cid = state.with_commit(existing, (head,), t)
                run = (plan + (t,), bound, idx + 1, status, begin, written + (cid,))
                yield ("step", run_name(r), t), new.with_branch(txn, cid).with_run(r, run)
        # Fail: the run's branch becomes aborted and stays around
        failed = state.with_branch(txn, head, "aborted").with_run(r, (plan, bound, idx, "failed", begin, written))
        yield ("fail", run_name(r)), failed
        # Finish: merge into the bound branch, then delete the run branch
        for outcome in merge_outcomes(state, head, state.head(bound)):
            if outcome[0] == "conflict":
                yield ("finish", run_name(r)), failed
                continue
            merged = _apply_merge(state, outcome, bound, head, bounds)
            if merged is None:
                continue
            done = merged.without_branch(txn).with_run(r, (plan, bound, idx, "finished", begin, written))
            yield ("finish", run_name(r)), done

    # CreateTable: create-only writes on normal branches (run branches are
    # written only by their run, aborted ones not at all)
    if can_write:
        for b in normal:
            head = state.head(b)
            existing = state.tables(head)
            for t in range(bounds.max_tables):
                if t not in existing:
                    new, cid = state.with_commit(existing, (head,), t)
                    yield ("create_table", b, t), new.with_branch(b, cid)

    # Merge between user-visible branches
    sources = [n for n, _, c in state.branches if c == "normal" or (c == "aborted" and policy.allow_merge_from_aborted)]
    for src in sources:
        for dst in normal:
            if src == dst:
                continue
            for outcome in merge_outcomes(state, state.head(src), state.head(dst)):
                if outcome[0] in ("conflict", "no_op"):
                    continue
                merged = _apply_merge(state, outcome, dst, state.head(src), bounds)
                if merged is not None:
                    yield ("merge", src, dst), merged


def enabled(state: ModelState, action: tuple, bounds: Bounds, policy: Policy) -> list[ModelState]:
    """Result states of ``action`` from ``state`` (empty when disabled)."""
    return [s for a, s in successors(state, bounds, policy) if a == action]


# -- invariants --------------------------------------------------------------------------


def aborted_commits(state: ModelState) -> set[int]:
    """Commits first created on a run branch whose run failed."""
    out: set[int] = set()
    for r, (_plan, _bound, _idx, status, begin, _written) in enumerate(state.runs):
        if status == "failed":
            head = state.head(txn_name(r))
            if head is not None:
                out |= state.ancestors(head) - state.ancestors(begin)
    return out


def no_aborted_leak(state: ModelState) -> bool:
    leaked = aborted_commits(state) & state.ancestors(state.head(MAIN))
    return not leaked


def pipeline_atomicity(state: ModelState) -> bool:
    """No normal head shows a run's begin state plus only part of its outputs.

    For a finished run the parts are its proper nonempty prefixes. A failed
    run never published, so every nonempty prefix of its writes counts.
    """
    heads = {state.commits[h][0] for _, h, c in state.branches if c == "normal"}
    for plan, _bound, _idx, status, begin, written in state.runs:
        if status == "finished":
            top = len(written) - 1
        elif status == "failed":
            top = len(written)
        else:
            continue
        mix = state.tables(begin)
        for t, snap in zip(plan[:top], written[:top]):
            mix[t] = snap
            if tuple(sorted(mix.items())) in heads:
                return False
    return True


def merge_atomicity_step(before: ModelState, after: ModelState) -> bool:
    """A transition moves at most one branch head."""
    old = {n: h for n, h, _ in before.branches}
    moved = sum(1 for n, h, _ in after.branches if n in old and old[n] != h)
    return moved <= 1


STATE_INVARIANTS = {
    "pipeline_atomicity": pipeline_atomicity,
    "no_aborted_leak": no_aborted_leak,
}
TRANSITION_INVARIANTS = {"merge_atomicity": merge_atomicity_step}
INVARIANTS = tuple(sorted(STATE_INVARIANTS) + sorted(TRANSITION_INVARIANTS))
