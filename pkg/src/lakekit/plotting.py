"""Commit-graph figures for ``log --figure`` and ``model check --figure``.

Commits are placed in columns by depth from the root and in rows by the
first branch that reaches them. Only the Agg backend is used, so nothing
needs a display.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

CLASS_COLOURS = {"normal": "#2b6cb0", "transactional": "#b7791f", "aborted": "#c53030"}


def _layout(parents: Mapping[str, Sequence[str]], lanes: Sequence[tuple[str, str]]):
    depth: dict[str, int] = {}

    def d(c: str) -> int:
        if c not in depth:
            ps = parents.get(c, ())
            depth[c] = 0 if not ps else 1 + max(d(p) for p in ps)
        return depth[c]

    for c in parents:
        d(c)
    row: dict[str, int] = {}
    for lane, (_name, head) in enumerate(lanes):
        stack = [head]
        while stack:
            c = stack.pop()
            if c in row or c not in parents:
                continue
            row[c] = lane
            stack.extend(parents[c])
    for c in parents:
        row.setdefault(c, len(lanes))
    return {c: (depth[c], -row[c]) for c in parents}


def draw_commit_graph(
    parents: Mapping[str, Sequence[str]],
    labels: Mapping[str, str],
    branches: Sequence[tuple[str, str, str]],
    path: str | Path,
    title: str = "",
) -> Path:
    """Write a PNG of a commit DAG.

    ``parents`` maps commit -> parent commits, ``labels`` commit -> text
    shown beside the node and ``branches`` lists ``(name, head, class)``.
    """
    lanes = [(n, h) for n, h, _ in sorted(branches, key=lambda b: (b[0] != "main", b[0]))]
    pos = _layout(parents, lanes)
    width = 2.0 + 1.6 * (max((x for x, _ in pos.values()), default=0) + 1)
    height = 1.5 + 0.9 * (len(lanes) + 1)
    fig, ax = plt.subplots(figsize=(width, height))
    for c, ps in parents.items():
        for p in ps:
            (x0, y0), (x1, y1) = pos[p], pos[c]
            ax.annotate(
                "", xy=(x0, y0), xytext=(x1, y1),
                arrowprops={"arrowstyle": "->", "color": "#718096", "lw": 1.2},
            )
    for c, (x, y) in pos.items():
        ax.plot([x], [y], "o", ms=12, color="#4a5568", zorder=3)
        ax.text(x, y - 0.28, labels.get(c, c), ha="center", va="top", fontsize=8)
    heads: dict[str, list[tuple[str, str]]] = {}
    for name, head, cls in branches:
        heads.setdefault(head, []).append((name, cls))
    for head, names in heads.items():
        if head not in pos:
            continue
        x, y = pos[head]
        for k, (name, cls) in enumerate(names):
            ax.text(
                x, y + 0.3 + 0.28 * k, name, ha="center", va="bottom", fontsize=8,
                color="white", bbox={"boxstyle": "round,pad=0.2", "fc": CLASS_COLOURS.get(cls, "#4a5568")},
            )
    xs = [x for x, _ in pos.values()] or [0]
    ys = [y for _, y in pos.values()] or [0]
    ax.set_xlim(min(xs) - 0.8, max(xs) + 0.8)
    ax.set_ylim(min(ys) - 0.9, max(ys) + 0.6 + 0.28 * max((len(v) for v in heads.values()), default=1))
    ax.axis("off")
    if title:
        ax.set_title(title, fontsize=10)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out


def plot_repository(repo, path: str | Path, title: str = "") -> Path:
    """Figure of every commit reachable from any branch of ``repo``."""
    branches = repo.branches()
    parents: dict[str, tuple[str, ...]] = {}
    labels: dict[str, str] = {}
    todo = [b.head for b in branches]
    while todo:
        cid = todo.pop()
        if cid in parents:
            continue
        commit = repo.get_commit(cid)
        parents[cid] = tuple(commit.parents)
        labels[cid] = f"{cid[:7]}\n{len(commit.tables)} tables"
        todo.extend(commit.parents)
    return draw_commit_graph(parents, labels, [(b.name, b.head, b.cls) for b in branches], path, title)


def plot_model_state(state, path: str | Path, title: str = "") -> Path:
    """Figure of an abstract model state (commits ``c<i>``, snapshots ``s<i>``)."""
    parents = {f"c{i}": tuple(f"c{p}" for p in ps) for i, (_, ps) in enumerate(state.commits)}
    labels = {
        f"c{i}": f"c{i}\n" + (" ".join(f"t{t}=s{c}" for t, c in tables) or "{}")
        for i, (tables, _) in enumerate(state.commits)
    }
    branches = [(n, f"c{h}", cls) for n, h, cls in state.branches]
    return draw_commit_graph(parents, labels, branches, path, title)
