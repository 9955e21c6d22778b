"""Canonical forms of model states up to renaming.

Commit ids, user branch names, run names and table names carry no meaning
beyond identity, so two states that differ only by a consistent renaming of
them are the same state. ``canonical_key`` picks one representative encoding per class:

1. every commit gets a name-free fingerprint (a Merkle hash over its table
   map and its parents' fingerprints);
2. user branches and runs are ordered by name-free keys, trying every order
   among ties;
3. when no two commits, user branches or runs share a fingerprint the
   fingerprint order itself is the labelling;
4. otherwise commits are relabelled by a depth-first walk from the branch
   heads, visiting parents in fingerprint order and trying every order among
   unlabelled parents with equal fingerprints, and the smallest resulting
   encoding wins.

Tables are handled outside all of this by trying every order of the used
tables that a name-free colour cannot separate.

``brute_force_key`` computes the same classes by trying every permutation and
is only meant as an oracle for small states.
"""

from __future__ import annotations

from itertools import permutations, product

from .state import MAIN, ModelState, run_name, txn_name


def fingerprints(state: ModelState) -> list[int]:
    """Name-free structural hash per commit; parents always precede children."""
    fp: list[int] = []
    for cid, (tables, parents) in enumerate(state.commits):
        tabs = tuple((t, -1 if creator == cid else fp[creator]) for t, creator in tables)
        fp.append(hash((tabs, tuple(sorted(fp[p] for p in parents)))))
    return fp


def _refine(state: ModelState, fp: list[int]) -> list[tuple[int, int]]:
    """Fingerprints extended with name-free context from above each commit.

    The context of a commit covers what points at it (main, user branches and
    run branches by class, run begins and writes) and, recursively, the
    contexts of its children.
    """
    marks: list[list] = [[] for _ in state.commits]
    for name, head, cls in state.branches:
        kind = 0 if name == MAIN else 1 if name.startswith("b") else 2
        marks[head].append((kind, cls))
    for _plan, bound, _idx, status, begin, written in state.runs:
        marks[begin].append((3, status, bound == MAIN))
        for pos, w in enumerate(written):
            marks[w].append((4, pos, status))
    children: list[list[int]] = [[] for _ in state.commits]
    for cid, (_tables, parents) in enumerate(state.commits):
        for p in parents:
            children[p].append(cid)
    ctx = [0] * len(state.commits)
    for cid in range(len(state.commits) - 1, -1, -1):
        ctx[cid] = hash((tuple(sorted(marks[cid])), tuple(sorted(ctx[c] for c in children[cid]))))
    return [(fp[i], ctx[i]) for i in range(len(fp))]


def _orderings(items: list, key) -> list[list]:
    """All orders of ``items`` sorted by ``key`` with ties permuted."""
    if len(items) < 2:
        return [list(items)]
    if len(items) == 2:
        a, b = items
        ka, kb = key(a), key(b)
        if ka == kb:
            return [[a, b], [b, a]]
        return [[a, b]] if ka < kb else [[b, a]]
    groups: dict = {}
    for it in items:
        groups.setdefault(key(it), []).append(it)
    per_group = [list(permutations(groups[k])) for k in sorted(groups)]
    return [[x for grp in combo for x in grp] for combo in product(*per_group)]


def _labelings(state: ModelState, roots: list[int], fp: list[int]) -> list[dict[int, int]]:
    """Every depth-first labelling from ``roots`` allowed by fingerprint ties."""
    results: list[dict[int, int]] = []

    def walk(stack: list[int], label: dict[int, int]) -> None:
        while stack:
            c = stack.pop()
            if c in label:
                continue
            label[c] = len(label)
            parents = [p for p in state.commits[c][1] if p not in label]
            orders = _orderings(parents, lambda p: fp[p])
            if len(orders) > 1:
                for order in orders:
                    # reversed so the first parent in order is visited first
                    walk(stack + list(reversed(order)), dict(label))
                return
            stack.extend(reversed(orders[0]))
        results.append(label)

    walk(list(reversed(roots)), {})
    return results


def _encode(state: ModelState, label: dict[int, int], bnames: dict[str, str], rorder: list[int]):
    rename = dict(bnames)
    for new, old in enumerate(rorder):
        rename[txn_name(old)] = txn_name(new)

    commits = [None] * len(state.commits)
    for cid, (tables, parents) in enumerate(state.commits):
        commits[label[cid]] = (
            tuple([(t, label[c]) for t, c in tables]),
            tuple(sorted([label[p] for p in parents])),
        )
    branches = tuple(sorted([(rename.get(n, n), label[h], c) for n, h, c in state.branches]))
    runs = []
    for i in rorder:
        plan, bound, idx, status, begin, written = state.runs[i]
        runs.append((plan, rename.get(bound, bound), idx, status, label[begin], tuple([label[w] for w in written])))
    return (tuple(commits), branches, tuple(runs))


def _commit_key(state: ModelState):
    fp = fingerprints(state)
    heads = {n: h for n, h, _ in state.branches}
    classes = {n: c for n, _, c in state.branches}
    users = state.user_branches()

    def run_key(i: int):
        plan, bound, idx, status, begin, written = state.runs[i]
        txn = heads.get(txn_name(i))
        return (
            plan,
            bound == MAIN,
            -1 if bound == MAIN else fp[heads[bound]],
            idx,
            status,
            fp[begin],
            tuple(fp[w] for w in written),
            -2 if txn is None else fp[txn],
        )

    def branch_key(name: str):
        return (classes[name], fp[heads[name]])

    refined = _refine(state, fp)
    if len(set(refined)) == len(refined):
        # commits are told apart without names, so their labels are fixed;
        # only ties among user branches or runs remain to be tried
        order = sorted(range(len(fp)), key=refined.__getitem__)
        label = {cid: i for i, cid in enumerate(order)}
        best = None
        for uorder in _orderings(users, branch_key):
            bnames = {old: f"b{i + 1}" for i, old in enumerate(uorder)}
            for rorder in _orderings(list(range(len(state.runs))), run_key):
                enc = ("fp",) + _encode(state, label, bnames, rorder)
                if best is None or enc < best:
                    best = enc
        return best

    best = None
    for uorder in _orderings(users, branch_key):
        bnames = {old: f"b{i + 1}" for i, old in enumerate(uorder)}
        for rorder in _orderings(list(range(len(state.runs))), run_key):
            ordered = sorted(
                state.branches,
                key=lambda b: (
                    0 if b[0] == MAIN else 1 if b[0] in bnames else 2,
                    bnames.get(b[0], ""),
                    rorder.index(int(b[0][5:]) - 1) if b[0].startswith("txn/r") else 0,
                ),
            )
            roots = [h for _, h, _ in ordered]
            roots += [state.runs[i][4] for i in rorder]
            for label in _labelings(state, roots, fp):
                if len(label) != len(state.commits):
                    # commits unreachable from any head or run: label by id
                    for cid in range(len(state.commits)):
                        label.setdefault(cid, len(label))
                enc = ("dfs",) + _encode(state, label, bnames, rorder)
                if best is None or enc < best:
                    best = enc
    return best


def rename_tables(state: ModelState, mapping: dict[int, int]) -> ModelState:
    commits = tuple(
        (tuple(sorted((mapping[t], c) for t, c in tables)), parents) for tables, parents in state.commits
    )
    runs = tuple(
        (tuple(mapping[t] for t in plan), bound, idx, status, begin, written)
        for plan, bound, idx, status, begin, written in state.runs
    )
    return ModelState(commits, state.branches, runs)


def _table_orders(state: ModelState) -> list[dict[int, int]]:
    """Renamings of the used tables, sorted by a name-free colour, ties permuted.

    Tables that appear nowhere are indistinguishable and keep their indices
    after the used ones.
    """
    seen: dict[int, list] = {}
    for cid, (tables, _parents) in enumerate(state.commits):
        for t, creator in tables:
            seen.setdefault(t, []).append((0, int(creator == cid), len(state.commits[cid][1]), ""))
    for plan, _bound, _idx, status, _begin, _written in state.runs:
        for pos, t in enumerate(plan):
            seen.setdefault(t, []).append((1, pos, 0, status))
    used = sorted(seen)
    colour = {t: tuple(sorted(seen[t])) for t in used}
    out = []
    for order in _orderings(used, colour.__getitem__):
        out.append({t: i for i, t in enumerate(order)})
    return out


def canonical_key(state: ModelState):
    """One encoding per class of states equal up to renaming.

    Commits, user branches, runs and tables are all renamed; none of them
    carries meaning beyond identity in the model.
    """
    best = None
    for mapping in _table_orders(state):
        key = _commit_key(rename_tables(state, mapping))
        if best is None or key < best:
            best = key
    return best


def brute_force_key(state: ModelState):
    """Smallest encoding over every renaming of commits, user branches, runs and tables."""
    used = sorted({t for tables, _ in state.commits for t, _ in tables} | {t for r in state.runs for t in r[0]})
    best = None
    for perm in permutations(range(len(used))):
        key = _brute_commits(rename_tables(state, {t: perm[i] for i, t in enumerate(used)}))
        if best is None or key < best:
            best = key
    return best


def _brute_commits(state: ModelState):
    users = state.user_branches()
    best = None
    n = len(state.commits)
    for uorder in permutations(users):
        bnames = {old: f"b{i + 1}" for i, old in enumerate(uorder)}
        for rorder in permutations(range(len(state.runs))):
            for perm in permutations(range(n)):
                label = dict(enumerate(perm))
                enc = _encode(state, label, bnames, list(rorder))
                if best is None or enc < best:
                    best = enc
    return best


__all__ = ["brute_force_key", "canonical_key", "fingerprints", "run_name"]
