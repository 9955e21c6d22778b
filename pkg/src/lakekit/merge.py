"""Table-level diff, common-ancestor search and merges over commit table maps.

Conflicts are whole-table: a table conflicts when both sides moved it away
from the common ancestor to different snapshots (deletion counts as a move).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from . import errors
from .catalog import Repository


@dataclass(frozen=True)
class TableDiff:
    added: frozenset[str] = frozenset()
    removed: frozenset[str] = frozenset()
    changed: frozenset[tuple[str, str, str]] = frozenset()

    @property
    def empty(self) -> bool:
        return not (self.added or self.removed or self.changed)

    def to_dict(self) -> dict:
        return {
            "added": sorted(self.added),
            "removed": sorted(self.removed),
            "changed": [{"table": t, "from": a, "to": b} for t, a, b in sorted(self.changed)],
        }


@dataclass(frozen=True)
class MergeResult:
    kind: str  # fast_forward | three_way | no_op
    merge_commit: str
    conflicts: frozenset[str] = frozenset()

    def to_dict(self) -> dict:
        return {"kind": self.kind, "merge_commit": self.merge_commit, "conflicts": sorted(self.conflicts)}


def diff_maps(old: Mapping[str, str], new: Mapping[str, str]) -> TableDiff:
    added = frozenset(new.keys() - old.keys())
    removed = frozenset(old.keys() - new.keys())
    changed = frozenset((t, old[t], new[t]) for t in old.keys() & new.keys() if old[t] != new[t])
    return TableDiff(added, removed, changed)


def diff(repo: Repository, from_ref: str, to_ref: str) -> TableDiff:
    return diff_maps(repo.tables(from_ref), repo.tables(to_ref))


def merge_maps(base: Mapping[str, str], ours: Mapping[str, str], theirs: Mapping[str, str]):
    """Three-way merge of table maps. Returns ``(merged, conflicting_tables)``."""
    merged: dict[str, str] = {}
    conflicts: set[str] = set()
    for table in sorted(base.keys() | ours.keys() | theirs.keys()):
        b, o, t = base.get(table), ours.get(table), theirs.get(table)
        if o == t or t == b:
            pick = o
        elif o == b:
            pick = t
        else:
            conflicts.add(table)
            continue
        if pick is not None:
            merged[table] = pick
    return merged, frozenset(conflicts)


def common_ancestor(repo: Repository, a: str, b: str) -> str:
    """A lowest common ancestor of two commits; ties go to the smallest id."""
    common = repo.ancestors(a) & repo.ancestors(b)
    # common is closed under parents, so anything strictly below a member is
    # the parent of some member
    below = {p for c in common for p in repo.get_commit(c).parents}
    lowest = common - below
    return min(lowest)


def merge(
    repo: Repository,
    source: str,
    into: str,
    expected_head: str,
    *,
    allow_merge_from_aborted: bool = False,
    allow_transactional_source: bool = False,
    message: str | None = None,
) -> MergeResult:
    """Merge ``source`` into branch ``into`` atomically.

    The destination head must still equal ``expected_head``. Readers of the
    destination see either the old head or the fully merged head.
    """
    dest = repo.get_branch(into)
    if dest.cls != "normal":
        raise errors.DestinationNotNormal(f"cannot merge into {dest.cls} branch {into!r}")
    if dest.head != expected_head:
        raise errors.CasConflict(into, expected_head, dest.head)
    src = repo.guard_source(
        source, allow_aborted=allow_merge_from_aborted, allow_transactional=allow_transactional_source
    )
    if src == dest.head or repo.is_ancestor(src, dest.head):
        return MergeResult("no_op", dest.head)
    if repo.is_ancestor(dest.head, src):
        repo.advance_branch(into, expected_head, src)
        return MergeResult("fast_forward", src)
    base = repo.get_commit(common_ancestor(repo, dest.head, src))
    ours = repo.get_commit(dest.head)
    theirs = repo.get_commit(src)
    merged, conflicts = merge_maps(base.tables, ours.tables, theirs.tables)
    if conflicts:
        raise errors.MergeConflict(conflicts)
    commit = repo.new_commit(merged, (dest.head, src), message or f"merge {source} into {into}")
    repo.advance_branch(into, expected_head, commit.id)
    return MergeResult("three_way", commit.id)
