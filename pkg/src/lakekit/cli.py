"""Command-line interface.

Exit codes: 0 on success, 1 for diagnostics, conflicts, aborted runs and
invariant violations, 2 for usage errors. Every failure prints
``error <Code>: message`` on stderr; with ``--format json`` stdout carries
exactly one JSON document per invocation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

from . import errors
from .catalog import Repository
from .contracts import check_plan, has_errors, lineage, load_manifest, plan_validation_skips
from .ingest import import_csv
from .merge import diff as table_diff
from .merge import merge
from .runs import RunEngine, RunOptions, RunRecord, lake_schemas
from .schema import format_timestamp

DEFAULT_REPO = ".lakekit"
REPO_ENV = "LAKEKIT_REPO"
CLOCK_ENV = "LAKEKIT_CLOCK"  # fixed epoch seconds, for reproducible commit ids
AUTHOR_ENV = "LAKEKIT_AUTHOR"

# failures caused by how the command was invoked rather than by the data
USAGE_CODES = frozenset(
    {
        "NotARepository",
        "AlreadyInitialized",
        "UnknownRef",
        "UnknownRun",
        "InvalidName",
        "InvalidRunOptions",
        "UnknownInvariant",
        "TraceParseError",
        "BoundsTooLarge",
        "RepoLocked",
        "NoSuchTable",
        "UnknownColumn",
    }
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


# -- output ------------------------------------------------------------------------


class Output:
    def __init__(self, mode: str, stdout=None, stderr=None):
        self.mode = mode
        self.stdout = stdout or sys.stdout
        self.stderr = stderr or sys.stderr

    @property
    def json(self) -> bool:
        return self.mode == "json"

    def text(self, line: str = "") -> None:
        if not self.json:
            print(line, file=self.stdout)

    def doc(self, obj: Any) -> None:
        if self.json:
            print(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable), file=self.stdout)

    def error(self, code: str, message: str) -> None:
        print(f"error {code}: {message}", file=self.stderr)
        self.doc({"ok": False, "error": {"code": code, "message": message}})


def _jsonable(value):
    if isinstance(value, datetime):
        return format_timestamp(value)
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def columns(rows: Sequence[Sequence[Any]], headers: Sequence[str] | None = None) -> list[str]:
    """Left-aligned padded text columns."""
    table = [list(map(_cell, r)) for r in rows]
    if headers:
        table.insert(0, list(headers))
    if not table:
        return []
    widths = [max(len(r[i]) for r in table) for i in range(len(table[0]))]
    return ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in table]


def _cell(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, datetime):
        return format_timestamp(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


# -- helpers ------------------------------------------------------------------------


def _repo_root(args) -> Path:
    return Path(args.repo or os.environ.get(REPO_ENV) or DEFAULT_REPO)


def _repo_kwargs() -> dict:
    kw: dict[str, Any] = {"author": os.environ.get(AUTHOR_ENV, "lakekit")}
    clock = os.environ.get(CLOCK_ENV)
    if clock:
        try:
            fixed = int(clock)
        except ValueError:
            raise UsageError(f"{CLOCK_ENV} must be an integer, got {clock!r}") from None
        kw["clock"] = lambda: fixed
    return kw


def _open(args) -> Repository:
    return Repository.open(_repo_root(args), **_repo_kwargs())


def _run_options(args, fail_at: str | None = None) -> RunOptions:
    return RunOptions(
        fail_at_node=fail_at,
        allow_branch_from_aborted=getattr(args, "allow_branch_from_aborted", False),
        allow_merge_from_aborted=getattr(args, "allow_merge_from_aborted", False),
        skip_redundant_checks=not getattr(args, "no_skip_checks", False),
    )


def _short(cid: str | None) -> str:
    return "-" if not cid else cid[:12]


def _record_text(out: Output, rec: RunRecord) -> None:
    out.text(f"run {rec.run_id} {rec.status} on {rec.target_branch}")
    out.text(f"  start   {_short(rec.start_commit)}")
    out.text(f"  branch  {rec.txn_branch}")
    if rec.publish:
        out.text(f"  publish {rec.publish} {_short(rec.published_commit)}")
    if rec.resumed_from:
        out.text(f"  resumed from {rec.resumed_from}")
    rows = [(r.node, r.outcome, _short(r.snapshot)) for r in rec.node_results]
    for line in columns(rows, ("node", "outcome", "snapshot")) if rows else []:
        out.text(f"  {line}")
    for d in rec.diagnostics:
        out.text(f"  {d.line()}")
    for r in rec.node_results:
        if r.diagnostic is not None:
            out.text(f"  {r.diagnostic.line()}")


def _run_exit(rec: RunRecord) -> int:
    return 0 if rec.status == "committed" else 1


# -- repository commands -----------------------------------------------------------------


def cmd_init(args, out: Output) -> int:
    root = _repo_root(args)
    repo = Repository.init(root, **_repo_kwargs())
    try:
        head = repo.get_branch("main").head
    finally:
        repo.close()
    out.text(f"initialized {root} (main at {_short(head)})")
    out.doc({"ok": True, "root": str(root), "main": head})
    return 0


def cmd_import(args, out: Output) -> int:
    with _open(args) as repo:
        commit = import_csv(repo, args.table, args.csvfile, branch=args.branch)
        sid = commit.tables[args.table]
    out.text(f"imported {args.table} into {args.branch}: commit {_short(commit.id)} snapshot {_short(sid)}")
    out.doc({"ok": True, "table": args.table, "branch": args.branch, "commit": commit.id, "snapshot": sid})
    return 0


def cmd_branch(args, out: Output) -> int:
    with _open(args) as repo:
        if args.branch_cmd == "create":
            b = repo.create_branch(args.name, args.from_ref, allow_from_aborted=args.allow_branch_from_aborted)
            out.text(f"created {b.name} at {_short(b.head)}")
            out.doc({"ok": True, "branch": b.to_dict()})
        elif args.branch_cmd == "delete":
            repo.delete_branch(args.name, force=args.force)
            out.text(f"deleted {args.name}")
            out.doc({"ok": True, "deleted": args.name})
        else:
            branches = repo.branches()
            for line in columns([(b.name, b.cls, _short(b.head)) for b in branches], ("branch", "class", "head")):
                out.text(line)
            out.doc({"ok": True, "branches": [b.to_dict() for b in branches]})
    return 0


def cmd_tag(args, out: Output) -> int:
    with _open(args) as repo:
        tag = repo.tag_commit(args.name, args.ref)
        owner = repo.quarantine().get(tag.target)
    out.text(f"tagged {_short(tag.target)} as {tag.name}")
    if owner == "aborted":
        out.text("note: this commit belongs to an aborted run")
    out.doc({"ok": True, "tag": tag.to_dict(), "aborted": owner == "aborted"})
    return 0


def cmd_log(args, out: Output) -> int:
    with _open(args) as repo:
        commits = repo.log(args.ref, args.limit)
        quarantined = repo.quarantine()
        rows = []
        for c in commits:
            flag = quarantined.get(c.id, "")
            when = format_timestamp(datetime.fromtimestamp(c.timestamp, timezone.utc))
            rows.append((_short(c.id), when, len(c.tables), c.message, flag))
        for line in columns(rows, ("commit", "time", "tables", "message", "")):
            out.text(line)
        if args.figure:
            from .plotting import plot_repository

            plot_repository(repo, args.figure, title=f"commit graph at {args.ref}")
            out.text(f"wrote {args.figure}")
        out.doc(
            {
                "ok": True,
                "ref": args.ref,
                "commits": [dict(c.to_dict(), quarantine=quarantined.get(c.id)) for c in commits],
                "figure": args.figure,
            }
        )
    return 0


def cmd_diff(args, out: Output) -> int:
    with _open(args) as repo:
        d = table_diff(repo, args.from_ref, args.to_ref)
    for t in sorted(d.added):
        out.text(f"+ {t}")
    for t in sorted(d.removed):
        out.text(f"- {t}")
    for t, a, b in sorted(d.changed):
        out.text(f"~ {t} {_short(a)} -> {_short(b)}")
    if d.empty:
        out.text("no differences")
    out.doc({"ok": True, "diff": d.to_dict()})
    return 0


def cmd_merge(args, out: Output) -> int:
    with _open(args) as repo:
        head = repo.get_branch(args.into).head
        try:
            result = merge(
                repo, args.source, args.into, head, allow_merge_from_aborted=args.allow_merge_from_aborted
            )
        except errors.MergeConflict as exc:
            out.error(exc.code, str(exc))
            return 1
    out.text(f"{result.kind} {args.source} into {args.into}: {_short(result.merge_commit)}")
    out.doc({"ok": True, "merge": result.to_dict()})
    return 0


def cmd_query(args, out: Output) -> int:
    with _open(args) as repo:
        snap = repo.read_table(args.ref, args.table)
    names = list(snap.schema.names)
    rows = list(snap.rows())
    if args.limit is not None:
        rows = rows[: args.limit]
    for line in columns(rows, names):
        out.text(line)
    out.text(f"({snap.row_count} rows)")
    out.doc(
        {
            "ok": True,
            "ref": args.ref,
            "table": args.table,
            "schema": snap.schema.to_dict(),
            "rows": [dict(zip(names, r)) for r in rows],
            "row_count": snap.row_count,
        }
    )
    return 0


# -- contracts ---------------------------------------------------------------------


def _plan_and_lake(args):
    plan = load_manifest(args.manifest)
    with _open(args) as repo:
        commit = repo.resolve_ref(args.ref)
        lake = lake_schemas(repo, commit, plan)
    return plan, lake


def cmd_check(args, out: Output) -> int:
    plan, lake = _plan_and_lake(args)
    diags = check_plan(plan, lake)
    skips = sorted(plan_validation_skips(plan, lake)) if not has_errors(diags) else []
    for d in diags:
        out.text(d.line())
    if not has_errors(diags):
        out.text(f"ok: {len(plan.nodes)} nodes type-check against {args.ref}")
        for node, col, check in skips:
            out.text(f"skip {check} {node}.{col}")
    out.doc(
        {
            "ok": not has_errors(diags),
            "diagnostics": [d.to_dict() for d in diags],
            "skips": [{"node": n, "column": c, "check": k} for n, c, k in skips],
        }
    )
    return 1 if has_errors(diags) else 0


def cmd_lineage(args, out: Output) -> int:
    plan, lake = _plan_and_lake(args)
    node, sep, col = args.column.partition(".")
    if not sep:
        raise UsageError("column must be written node.column")
    tree = lineage(plan, (node, col), lake)
    out.text(tree.render())
    out.doc({"ok": True, "lineage": tree.to_dict()})
    return 0


# -- runs ---------------------------------------------------------------------------


def cmd_run(args, out: Output) -> int:
    with _open(args) as repo:
        rec = RunEngine(repo).run(args.manifest, args.ref, _run_options(args, args.fail_at))
    _record_text(out, rec)
    out.doc({"ok": rec.status == "committed", "run": rec.to_dict()})
    return _run_exit(rec)


def cmd_runs(args, out: Output) -> int:
    with _open(args) as repo:
        engine = RunEngine(repo)
        if args.runs_cmd == "show":
            rec = engine.get_run(args.run_id)
            _record_text(out, rec)
            out.doc({"ok": True, "run": rec.to_dict()})
            return 0
        recs = engine.list_runs()
    rows = [(r.run_id, r.status, r.target_branch, _short(r.start_commit), r.txn_branch) for r in recs]
    for line in columns(rows, ("run", "status", "target", "start", "branch")):
        out.text(line)
    out.doc({"ok": True, "runs": [r.to_dict() for r in recs]})
    return 0


def cmd_reproduce(args, out: Output) -> int:
    with _open(args) as repo:
        engine = RunEngine(repo)
        original = engine.get_run(args.run_id)
        branch, rec = engine.reproduce(args.run_id, args.branch)
    same_outputs = rec.outputs == original.outputs
    same_failure = (rec.failure is None) == (original.failure is None) and (
        rec.failure is None or (rec.failure.code, rec.failure.node) == (original.failure.code, original.failure.node)
    )
    identical = same_outputs and same_failure and rec.status == original.status
    _record_text(out, rec)
    out.text(f"reproduction of {args.run_id} on {branch.name}: {'identical' if identical else 'DIFFERENT'}")
    out.doc({"ok": identical, "branch": branch.to_dict(), "run": rec.to_dict(), "identical": identical})
    return 0 if identical else 1


def cmd_resume(args, out: Output) -> int:
    with _open(args) as repo:
        rec = RunEngine(repo).resume_from_aborted(args.run_id, args.manifest, _run_options(args))
    _record_text(out, rec)
    out.doc({"ok": rec.status == "committed", "run": rec.to_dict()})
    return _run_exit(rec)


# -- model ---------------------------------------------------------------------------


def _bounds(args):
    from .model import Bounds

    return Bounds(args.tables, args.snapshots, args.commits, args.branches, args.runs, args.steps)


def _policy_name(args) -> str:
    return f"guardrail_{args.guardrail}"


def cmd_model(args, out: Output) -> int:
    from . import model

    policy = _policy_name(args)
    if args.model_cmd == "enumerate":
        bounds = _bounds(args)
        res = model.enumerate_states(bounds, policy, cap=args.cap)
        out.text(f"{res.states} states, {res.transitions} transitions ({policy})")
        out.text("new states per depth: " + " ".join(str(n) for n in res.per_depth))
        out.text(f"largest frontier: {res.frontier_peak}")
        if not res.complete:
            out.text("note: the step bound cut exploration short")
        out.doc({"ok": True, "policy": policy, "bounds": bounds.to_dict(), **res.to_dict()})
        return 0
    if args.model_cmd == "check":
        bounds = _bounds(args)
        res = model.check(args.invariant, bounds, policy, cap=args.cap)
        if res.ok:
            out.text(f"ok: {args.invariant} holds in all {res.states} states within bounds ({policy})")
            out.doc({"ok": True, "invariant": args.invariant, "policy": policy, "states": res.states,
                     "bounds": bounds.to_dict()})
            return 0
        trace = res.trace
        script = model.format_script(trace.actions, policy)
        out.text(f"counterexample: {res.violation} ({policy}, {res.states} states explored)")
        out.text(model.render_trace(trace))
        if args.script_out:
            Path(args.script_out).write_text(script, encoding="utf-8")
            out.text(f"wrote {args.script_out}")
        if args.figure:
            from .plotting import plot_model_state

            plot_model_state(trace.final, args.figure, title=f"{args.invariant} counterexample")
            out.text(f"wrote {args.figure}")
        out.doc(
            {
                "ok": False,
                "invariant": args.invariant,
                "policy": policy,
                "states": res.states,
                "bounds": bounds.to_dict(),
                "trace": [model.format_action(a) for a in trace.actions],
                "script": script,
            }
        )
        return 1
    # replay
    text = Path(args.script).read_text(encoding="utf-8") if args.script != "-" else sys.stdin.read()
    actions, script_policy = model.parse_script(text)
    if args.guardrail_given:
        policy = _policy_name(args)
    elif script_policy:
        policy = script_policy
    try:
        model.Policy.named(policy)
    except ValueError as exc:
        raise errors.TraceParseError(str(exc)) from None
    try:
        report = model.replay(actions, policy)
    except errors.Divergence as exc:
        out.error(exc.code, str(exc))
        return 1
    out.text(f"replayed {report.steps} of {len(actions)} actions with no divergence ({policy})")
    if report.rejected_at is not None:
        out.text(f"step {report.rejected_at} refused by model and implementation alike: {report.rejected_code}")
    if report.leaked_commits:
        out.text(f"main contains {len(report.leaked_commits)} commit(s) from an aborted run")
    if report.mixed_state:
        out.text("a normal branch shows part of a run's output (mixed state)")
    out.doc({"ok": True, "policy": policy, "actions": len(actions), **report.to_dict()})
    return 0


# -- parser --------------------------------------------------------------------------


def _add_policy_flags(p, merge_flag: bool = True, branch_flag: bool = True) -> None:
    if branch_flag:
        p.add_argument("--allow-branch-from-aborted", action="store_true",
                       help="turn off the guardrail against branching from aborted runs")
    if merge_flag:
        p.add_argument("--allow-merge-from-aborted", action="store_true",
                       help="turn off the guardrail against merging aborted runs")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lakekit", description="Versioned tables with transactional, type-checked pipelines.")
    parser.add_argument("--repo", help=f"repository directory (default ${REPO_ENV} or ./{DEFAULT_REPO})")
    parser.add_argument("--format", choices=("text", "json"), default="text", help="output mode")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    sub.add_parser("init", help="create a repository")

    p = sub.add_parser("import", help="import a typed-header CSV as a table")
    p.add_argument("table")
    p.add_argument("csvfile")
    p.add_argument("--branch", default="main")

    p = sub.add_parser("branch", help="create, list or delete branches")
    bsub = p.add_subparsers(dest="branch_cmd", parser_class=_Parser, required=True)
    q = bsub.add_parser("create")
    q.add_argument("name")
    q.add_argument("--from", dest="from_ref", default="main")
    _add_policy_flags(q, merge_flag=False)
    bsub.add_parser("list")
    q = bsub.add_parser("delete")
    q.add_argument("name")
    q.add_argument("--force", action="store_true", help="also delete transactional or aborted branches")

    p = sub.add_parser("tag", help="name a commit")
    p.add_argument("name")
    p.add_argument("ref")

    p = sub.add_parser("log", help="first-parent history of a ref")
    p.add_argument("ref", nargs="?", default="main")
    p.add_argument("--limit", type=_positive, default=None)
    p.add_argument("--figure", metavar="PNG", help="also draw the commit graph")

    p = sub.add_parser("diff", help="table-level difference between two refs")
    p.add_argument("from_ref")
    p.add_argument("to_ref")

    p = sub.add_parser("merge", help="merge a ref into a branch")
    p.add_argument("source")
    p.add_argument("into")
    _add_policy_flags(p, branch_flag=False)

    p = sub.add_parser("query", help="print the rows of a table")
    p.add_argument("ref")
    p.add_argument("table")
    p.add_argument("--limit", type=_positive, default=None)

    p = sub.add_parser("check", help="plan-time type check of a manifest (reads no data)")
    p.add_argument("manifest")
    p.add_argument("--ref", default="main")

    p = sub.add_parser("lineage", help="trace a column back to its sources")
    p.add_argument("manifest")
    p.add_argument("column", help="node.column")
    p.add_argument("--ref", default="main")

    p = sub.add_parser("run", help="run a manifest transactionally")
    p.add_argument("manifest")
    p.add_argument("--ref", default="main", help="target branch")
    p.add_argument("--fail-at", metavar="NODE", help="inject a failure at this node")
    p.add_argument("--no-skip-checks", action="store_true", help="validate every output even when proven")
    _add_policy_flags(p)

    p = sub.add_parser("runs", help="inspect the run registry")
    rsub = p.add_subparsers(dest="runs_cmd", parser_class=_Parser, required=True)
    q = rsub.add_parser("show")
    q.add_argument("run_id")
    rsub.add_parser("list")

    p = sub.add_parser("reproduce", help="re-run an archived run from its starting commit")
    p.add_argument("run_id")
    p.add_argument("--branch", required=True)

    p = sub.add_parser("resume", help="re-run the failed part of an aborted run")
    p.add_argument("run_id")
    p.add_argument("manifest")
    p.add_argument("--no-skip-checks", action="store_true")
    _add_policy_flags(p)

    p = sub.add_parser("model", help="bounded model checking of branch and run semantics")
    msub = p.add_subparsers(dest="model_cmd", parser_class=_Parser, required=True)
    for name in ("enumerate", "check", "replay"):
        q = msub.add_parser(name)
        if name == "check":
            q.add_argument("invariant")
        if name == "replay":
            q.add_argument("script", help="trace script, or - for stdin")
        q.add_argument("--guardrail", choices=("on", "off"), default=None)
        if name != "replay":
            q.add_argument("--tables", type=_positive, default=3)
            q.add_argument("--snapshots", type=_positive, default=3)
            q.add_argument("--commits", type=_positive, default=6)
            q.add_argument("--branches", type=_positive, default=4)
            q.add_argument("--runs", type=_positive, default=2)
            q.add_argument("--steps", type=_positive, default=10)
            q.add_argument("--cap", type=_positive, default=10**7, help="state cap")
        if name == "check":
            q.add_argument("--script-out", metavar="FILE", help="write the counterexample script here")
            q.add_argument("--figure", metavar="PNG", help="draw the counterexample's final commit graph")
    return parser


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be positive: {v}")
    return v


COMMANDS = {
    "init": cmd_init,
    "import": cmd_import,
    "branch": cmd_branch,
    "tag": cmd_tag,
    "log": cmd_log,
    "diff": cmd_diff,
    "merge": cmd_merge,
    "query": cmd_query,
    "check": cmd_check,
    "lineage": cmd_lineage,
    "run": cmd_run,
    "runs": cmd_runs,
    "reproduce": cmd_reproduce,
    "resume": cmd_resume,
    "model": cmd_model,
}


def main(argv: Sequence[str] | None = None, *, stdout=None, stderr=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    mode = "json" if _wants_json(argv) else "text"
    out = Output(mode, stdout, stderr)
    try:
        args = build_parser().parse_args(argv)
        if args.command == "model":
            args.guardrail_given = args.guardrail is not None
            if args.guardrail is None:
                args.guardrail = "on"
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        out.error("Usage", str(exc))
        return 2
    except errors.LakeError as exc:
        out.error(exc.code, str(exc))
        return 2 if exc.code in USAGE_CODES else 1
    except KeyError as exc:
        out.error("UnknownRef", f"unknown name {exc}")
        return 2
    except OSError as exc:
        out.error("IOError", str(exc))
        return 2


def _wants_json(argv: list[str]) -> bool:
    for i, a in enumerate(argv):
        if a == "--format" and i + 1 < len(argv):
            return argv[i + 1] == "json"
        if a == "--format=json":
            return True
    return False


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
