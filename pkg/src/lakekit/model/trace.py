"""Line-oriented trace scripts and text diagrams of model states.

A script has one action per line; ``#`` starts a comment::

    # policy guardrail_off
    begin r1 main
    step r1 t0
    fail r1
    branch b1 txn/r1
    merge b1 main

Tables are written ``t<i>``. In diagrams a snapshot is shown as ``s<c>``,
where ``c`` is the commit that created it.
"""

from __future__ import annotations

import re

from .. import errors
from .search import Trace
from .state import INIT, Bounds, ModelState, Policy, enabled

_BRANCH = r"(?:main|b[1-9][0-9]*|txn/r[1-9][0-9]*)"
_RUN = r"r[1-9][0-9]*"
_TABLE = r"t([0-9]+)"

_PATTERNS = {
    "create_table": re.compile(rf"^create_table ({_BRANCH}) {_TABLE}$"),
    "branch": re.compile(rf"^branch (b[1-9][0-9]*) ({_BRANCH})$"),
    "begin": re.compile(rf"^begin ({_RUN}) ({_BRANCH})$"),
    "step": re.compile(rf"^step ({_RUN}) {_TABLE}$"),
    "fail": re.compile(rf"^fail ({_RUN})$"),
    "finish": re.compile(rf"^finish ({_RUN})$"),
    "merge": re.compile(rf"^merge ({_BRANCH}) ({_BRANCH})$"),
}


def format_action(action: tuple) -> str:
    kind = action[0]
    if kind in ("create_table", "step"):
        return f"{kind} {action[1]} t{action[2]}"
    return " ".join(str(a) for a in action)


def parse_action(line: str, lineno: int = 1) -> tuple:
    text = " ".join(line.split())
    kind = text.split(" ", 1)[0]
    pattern = _PATTERNS.get(kind)
    if pattern is None:
        raise errors.TraceParseError(f"line {lineno}: unknown action {kind!r}")
    m = pattern.match(text)
    if not m:
        raise errors.TraceParseError(f"line {lineno}: malformed {kind!r} action: {line.strip()!r}")
    args = m.groups()
    if kind in ("create_table", "step"):
        return (kind, args[0], int(args[1]))
    return (kind, *args)


def format_script(actions, policy: str | None = None) -> str:
    lines = []
    if policy:
        lines.append(f"# policy {policy}")
    lines.extend(format_action(a) for a in actions)
    return "\n".join(lines) + "\n"


def parse_script(text: str) -> tuple[list[tuple], str | None]:
    """Actions of a script plus the policy named in a ``# policy`` comment."""
    actions = []
    policy = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith("#"):
            m = re.match(r"^#\s*policy\s+(\S+)\s*$", line)
            if m:
                policy = m.group(1)
            continue
        if line:
            actions.append(parse_action(line, lineno))
    return actions, policy


def open_bounds(actions) -> Bounds:
    """Bounds loose enough that only enabling conditions restrict ``actions``."""
    n = len(actions) + 2
    tables = max([a[2] + 1 for a in actions if a[0] in ("create_table", "step")], default=1)
    return Bounds(tables, n, 2 * n, n + 1, n, max(n, 1))


def build_trace(actions, policy: Policy, bounds: Bounds | None = None) -> Trace:
    """Run ``actions`` through the model; every one must be enabled."""
    bounds = bounds or open_bounds(actions)
    state = INIT
    steps = []
    for i, action in enumerate(actions, start=1):
        succ = enabled(state, action, bounds, policy)
        if not succ:
            raise errors.TraceParseError(f"step {i}: {format_action(action)} is not enabled")
        state = succ[0]
        steps.append((action, state))
    return Trace(INIT, tuple(steps))


def describe_tables(tables) -> str:
    return "{" + ", ".join(f"t{t}=s{c}" for t, c in sorted(dict(tables).items())) + "}"


def render_state(state: ModelState) -> str:
    pointers: dict[int, list[str]] = {}
    for name, head, cls in state.branches:
        pointers.setdefault(head, []).append(name if cls == "normal" else f"{name} ({cls})")
    rows = []
    for cid in range(len(state.commits) - 1, -1, -1):
        tables, parents = state.commits[cid]
        par = "<- " + ", ".join(f"c{p}" for p in parents) if parents else "(init)"
        refs = ", ".join(pointers.get(cid, []))
        rows.append((f"c{cid}", par, describe_tables(tables), refs))
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    lines = []
    for r in rows:
        line = "  ".join(r[i].ljust(widths[i]) for i in range(3))
        lines.append(f"  {line}  {r[3]}".rstrip())
    for i, (plan, bound, _idx, status, begin, written) in enumerate(state.runs):
        wrote = ", ".join(f"t{t}=s{w}" for t, w in zip(plan, written)) or "nothing"
        lines.append(f"  run r{i + 1} on {bound} from c{begin}: {status}, wrote {wrote}")
    return "\n".join(lines)


def render_trace(trace: Trace) -> str:
    """Numbered actions followed by the final commit graph."""
    lines = [f"{i:>2}. {format_action(a)}" for i, a in enumerate(trace.actions, start=1)]
    if not lines:
        lines.append("    (no actions)")
    lines.append("")
    lines.append("final commit graph:")
    lines.append(render_state(trace.final))
    return "\n".join(lines)
