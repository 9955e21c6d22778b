"""Replay model traces against a real repository.

Every abstract commit created along the way is paired with the concrete
commit the implementation produced, and every abstract snapshot with the
concrete snapshot id. After each action the concrete branches (names,
classes, heads and table maps) must equal the abstract ones under that
pairing; otherwise :class:`~lakekit.errors.Divergence` is raised.
"""

from __future__ import annotations

import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .. import errors
from ..catalog import Repository
from ..merge import merge
from ..runs import Transaction
from ..schema import ColumnContract, ColumnType, SchemaContract, TableSnapshot
from .state import (
    INIT,
    MAIN,
    Bounds,
    ModelState,
    Policy,
    aborted_commits,
    merge_outcomes,
    pipeline_atomicity,
    successors,
    txn_name,
)
from .trace import format_action, open_bounds

_SCHEMA = SchemaContract("replay", (ColumnContract("v", ColumnType("int64")),))


@dataclass(frozen=True)
class ReplayReport:
    steps: int  # actions executed and matched
    rejected_at: int | None = None  # 1-based step both sides refused
    rejected_code: str | None = None
    main_tables: dict = field(default_factory=dict)
    leaked_commits: tuple[str, ...] = ()  # aborted-run commits reachable from main
    mixed_state: bool = False  # some normal head shows part of a run's output

    @property
    def ok(self) -> bool:
        return True  # divergence raises instead

    def to_dict(self) -> dict:
        return {
            "steps": self.steps,
            "rejected_at": self.rejected_at,
            "rejected_code": self.rejected_code,
            "main_tables": dict(self.main_tables),
            "leaked_commits": list(self.leaked_commits),
            "mixed_state": self.mixed_state,
        }


class _Replayer:
    def __init__(self, repo: Repository, policy: Policy):
        self.repo = repo
        self.policy = policy
        self.commits = {0: repo.get_branch(MAIN).head}  # abstract -> concrete
        self.snapshots: dict[int, str] = {}  # creating abstract commit -> snapshot id
        self.txns: dict[str, Transaction] = {}
        self.counter = 0

    def _fresh(self) -> TableSnapshot:
        self.counter += 1
        return TableSnapshot.from_rows(_SCHEMA, [(self.counter,)])

    def execute(self, action: tuple):
        """Run ``action`` for real; returns a short outcome tag."""
        kind = action[0]
        repo = self.repo
        if kind == "create_table":
            _, b, t = action
            repo.create_table(b, f"t{t}", self._fresh(), repo.get_branch(b).head)
            return "ok"
        if kind == "branch":
            _, name, src = action
            repo.create_branch(name, src, allow_from_aborted=self.policy.allow_branch_from_aborted)
            return "ok"
        if kind == "begin":
            _, r, b = action
            self.txns[r] = Transaction(
                repo, b, r,
                allow_from_aborted=self.policy.allow_branch_from_aborted,
                allow_merge_from_aborted=self.policy.allow_merge_from_aborted,
            )
            return "ok"
        if kind == "step":
            _, r, t = action
            self._txn(r).write(f"t{t}", self._fresh(), create_only=True)
            return "ok"
        if kind == "fail":
            self._txn(action[1]).abort()
            return "ok"
        if kind == "finish":
            try:
                self._txn(action[1]).publish()
            except errors.MergeConflict:
                return "conflict"
            return "ok"
        if kind == "merge":
            _, src, dst = action
            result = merge(
                repo, src, dst, repo.get_branch(dst).head,
                allow_merge_from_aborted=self.policy.allow_merge_from_aborted,
            )
            return "no_op" if result.kind == "no_op" else "ok"
        raise errors.TraceParseError(f"unknown action {kind!r}")

    def _txn(self, run: str) -> Transaction:
        if run not in self.txns:
            raise errors.UnknownRun(f"run {run!r} was never begun")
        return self.txns[run]

    # -- observation ------------------------------------------------------------------

    def concrete(self) -> dict:
        out = {}
        for b in self.repo.branches():
            tables = dict(self.repo.get_commit(b.head).tables)
            out[b.name] = (b.cls, b.head, tables)
        return out

    def abstract(self, state: ModelState, commits: dict[int, str], snapshots: dict[int, str]) -> dict:
        out = {}
        for name, head, cls in state.branches:
            tables = {f"t{t}": snapshots.get(c, f"?s{c}") for t, c in state.commits[head][0]}
            out[name] = (cls, commits.get(head, f"?c{head}"), tables)
        return out

    def match(self, before: ModelState, after: ModelState, observed: dict):
        """Extend the pairings so ``after`` explains ``observed``, or return None."""
        commits = dict(self.commits)
        snapshots = dict(self.snapshots)
        new = range(len(before.commits), len(after.commits))
        for cid in new:
            holders = [n for n, h, _ in after.branches if h == cid]
            if not holders or holders[0] not in observed:
                return None
            commits[cid] = observed[holders[0]][1]
            concrete_tables = observed[holders[0]][2]
            for t, creator in after.commits[cid][0]:
                if creator == cid:
                    snapshots[cid] = concrete_tables.get(f"t{t}", "")
        if self.abstract(after, commits, snapshots) != observed:
            return None
        return commits, snapshots


def replay(
    actions,
    policy: Policy | str = "guardrail_on",
    *,
    root: str | Path | None = None,
    bounds: Bounds | None = None,
) -> ReplayReport:
    """Execute ``actions`` on a fresh repository and compare after each step.

    An action the model does not enable must be refused by the
    implementation too; replay stops there and reports it.
    """
    pol = policy if isinstance(policy, Policy) else Policy.named(policy)
    actions = list(actions)
    bounds = bounds or open_bounds(actions)
    if root is None:
        with tempfile.TemporaryDirectory(prefix="lakekit-replay-") as tmp:
            return _replay(actions, pol, bounds, Path(tmp) / "repo")
    return _replay(actions, pol, bounds, Path(root))


def _replay(actions, policy: Policy, bounds: Bounds, root: Path) -> ReplayReport:
    repo = Repository.init(root, clock=lambda: 0, author="replay")
    try:
        rp = _Replayer(repo, policy)
        state = INIT
        rejected_at = rejected_code = None
        steps = 0
        for i, action in enumerate(actions, start=1):
            _check_names(state, action, i)
            candidates = [s for a, s in successors(state, bounds, policy) if a == action]
            if action[0] == "merge" and state.head(action[1]) is not None and state.head(action[2]) is not None:
                if merge_outcomes(state, state.head(action[1]), state.head(action[2])) == [("no_op",)]:
                    if state.branch_class(action[2]) == "normal" and state.branch_class(action[1]) == "normal":
                        candidates.append(state)
            try:
                outcome = rp.execute(action)
            except errors.LakeError as exc:
                if candidates:
                    raise errors.Divergence(i, f"{format_action(action)} succeeds", f"{exc.code}: {exc}") from None
                rejected_at, rejected_code = i, exc.code
                break
            if not candidates:
                raise errors.Divergence(i, f"{format_action(action)} is refused", f"implementation accepted ({outcome})")
            observed = rp.concrete()
            for cand in candidates:
                pairing = rp.match(state, cand, observed)
                if pairing is not None:
                    rp.commits, rp.snapshots = pairing
                    state = cand
                    break
            else:
                expected = rp.abstract(candidates[0], rp.commits, rp.snapshots)
                raise errors.Divergence(i, _show(expected), _show(observed))
            steps = i
        leaked = tuple(sorted(rp.commits[c] for c in aborted_commits(state) & state.ancestors(state.head(MAIN))))
        main = repo.get_commit(repo.get_branch(MAIN).head).tables
        for c in leaked:
            if not repo.is_ancestor(c, repo.get_branch(MAIN).head):
                raise errors.Divergence(steps, f"{c} reachable from main", "not reachable")
        return ReplayReport(
            steps=steps,
            rejected_at=rejected_at,
            rejected_code=rejected_code,
            main_tables=dict(main),
            leaked_commits=leaked,
            mixed_state=not pipeline_atomicity(state),
        )
    finally:
        repo.close()


def _check_names(state: ModelState, action: tuple, step: int) -> None:
    """Scripts must allocate run and branch names the way the model does."""
    if action[0] == "begin":
        want = f"r{len(state.runs) + 1}"
        if action[1] != want:
            raise errors.TraceParseError(f"step {step}: the next run must be named {want}, not {action[1]}")
    if action[0] == "branch":
        want = f"b{len(state.user_branches()) + 1}"
        if action[1] not in state.user_branches() and action[1] != want:
            raise errors.TraceParseError(f"step {step}: the next branch must be named {want}, not {action[1]}")


def _show(view: dict) -> str:
    parts = []
    for name in sorted(view):
        cls, head, tables = view[name]
        tabs = ", ".join(f"{t}={s[:10]}" for t, s in sorted(tables.items()))
        parts.append(f"{name}[{cls}]@{head[:10]}{{{tabs}}}")
    return "; ".join(parts)


__all__ = ["ReplayReport", "replay", "txn_name"]
