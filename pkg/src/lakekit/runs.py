"""Transactional pipeline runs and the append-only run registry.

A run never writes to its target branch directly. It works on a fresh
``txn/<run_id>`` branch, and only a fully successful run is merged back in a
single head update. Failed runs leave their branch behind, classed
``aborted``, for inspection.
"""

from __future__ import annotations

import json
import secrets
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping

from . import errors
from .catalog import Repository
from .contracts.check import Diagnostic, check_plan, has_errors, plan_validation_skips
from .contracts.manifest import PipelinePlan, parse_manifest
from .lang.evaluate import conform, evaluate
from .merge import merge
from .schema import SchemaContract, TableSnapshot

TXN_PREFIX = "txn/"
FINAL = ("committed", "aborted", "rejected")
PUBLISH_RETRIES = 8


@dataclass(frozen=True)
class RunOptions:
    fail_at_node: str | None = None
    allow_branch_from_aborted: bool = False
    allow_merge_from_aborted: bool = False
    skip_redundant_checks: bool = True

    def to_dict(self) -> dict:
        return {
            "fail_at_node": self.fail_at_node,
            "allow_branch_from_aborted": self.allow_branch_from_aborted,
            "allow_merge_from_aborted": self.allow_merge_from_aborted,
            "skip_redundant_checks": self.skip_redundant_checks,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> RunOptions:
        return cls(**d)


@dataclass(frozen=True)
class NodeResult:
    node: str
    outcome: str  # ok | failed | skipped
    commit: str | None = None
    snapshot: str | None = None
    diagnostic: Diagnostic | None = None

    def to_dict(self) -> dict:
        return {
            "node": self.node,
            "outcome": self.outcome,
            "commit": self.commit,
            "snapshot": self.snapshot,
            "diagnostic": None if self.diagnostic is None else self.diagnostic.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> NodeResult:
        return cls(d["node"], d["outcome"], d.get("commit"), d.get("snapshot"), _diag(d.get("diagnostic")))


def _diag(d) -> Diagnostic | None:
    if d is None:
        return None
    span = d.get("span")
    return Diagnostic(
        d["severity"],
        d["code"],
        d["node"],
        d["message"],
        None if span is None else (span["file"], span["line"], span["col"]),
        d.get("column"),
    )


@dataclass(frozen=True)
class RunRecord:
    run_id: str
    target_branch: str
    start_commit: str | None
    code_hash: str
    txn_branch: str
    status: str  # running | committed | aborted | rejected
    node_results: tuple[NodeResult, ...] = ()
    diagnostics: tuple[Diagnostic, ...] = ()
    options: RunOptions = field(default_factory=RunOptions)
    started_at: int = 0
    finished_at: int | None = None
    publish: str | None = None  # merge kind on success
    published_commit: str | None = None
    resumed_from: str | None = None

    @property
    def outputs(self) -> dict[str, str]:
        return {r.node: r.snapshot for r in self.node_results if r.snapshot is not None}

    @property
    def failure(self) -> Diagnostic | None:
        for r in self.node_results:
            if r.outcome == "failed":
                return r.diagnostic
        return next((d for d in self.diagnostics if d.severity == "error"), None)

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "target_branch": self.target_branch,
            "start_commit": self.start_commit,
            "code_hash": self.code_hash,
            "txn_branch": self.txn_branch,
            "status": self.status,
            "node_results": [r.to_dict() for r in self.node_results],
            "diagnostics": [d.to_dict() for d in self.diagnostics],
            "options": self.options.to_dict(),
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "publish": self.publish,
            "published_commit": self.published_commit,
            "resumed_from": self.resumed_from,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> RunRecord:
        return cls(
            d["run_id"],
            d["target_branch"],
            d["start_commit"],
            d["code_hash"],
            d["txn_branch"],
            d["status"],
            tuple(NodeResult.from_dict(r) for r in d["node_results"]),
            tuple(_diag(x) for x in d["diagnostics"]),
            RunOptions.from_dict(d["options"]),
            d["started_at"],
            d["finished_at"],
            d.get("publish"),
            d.get("published_commit"),
            d.get("resumed_from"),
        )


class Registry:
    """Append-only JSON-lines log of run records; the last line per run wins.

    A record that reached a final status can never be superseded.
    """

    def __init__(self, root: Path):
        self.path = Path(root) / "registry.jsonl"
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._records: dict[str, RunRecord] = {}
        self._offset = 0

    def _load(self) -> dict[str, RunRecord]:
        """Parse only what was appended since the last call, by any process."""
        try:
            with open(self.path, "rb") as fh:
                fh.seek(0, 2)
                if fh.tell() < self._offset:
                    self._records, self._offset = {}, 0
                fh.seek(self._offset)
                chunk = fh.read()
        except FileNotFoundError:
            return self._records
        # a writer may be mid-line; leave the tail for next time
        end = chunk.rfind(b"\n") + 1
        for line in chunk[:end].decode("utf-8").splitlines():
            if line.strip():
                rec = RunRecord.from_dict(json.loads(line))
                self._records[rec.run_id] = rec
        self._offset += end
        return self._records

    def append(self, record: RunRecord) -> None:
        with self._lock:
            prior = self._load().get(record.run_id)
            if prior is not None and prior.status in FINAL:
                raise errors.RegistryImmutable(f"run {record.run_id} is already {prior.status}")
            line = json.dumps(record.to_dict(), sort_keys=True, separators=(",", ":"))
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    def get(self, run_id: str) -> RunRecord:
        with self._lock:
            rec = self._load().get(run_id)
        if rec is None:
            raise errors.UnknownRun(f"no run {run_id!r}")
        return rec

    def all(self) -> list[RunRecord]:
        with self._lock:
            return list(self._load().values())

    def next_id(self) -> str:
        with self._lock:
            n = len(self._load()) + 1
        return f"r{n:04d}-{secrets.token_hex(3)}"


class Transaction:
    """One sandboxed unit of work: a ``txn/<run_id>`` branch over ``target``.

    Callers write tables, then either :meth:`publish` (merge into the target
    and delete the branch) or :meth:`abort` (reclassify the branch as
    aborted and keep it).
    """

    def __init__(self, repo: Repository, target: str, run_id: str, start_ref: str | None = None, *,
                 allow_from_aborted: bool = False, allow_merge_from_aborted: bool = False):
        dest = repo.get_branch(target)
        if dest.cls != "normal":
            raise errors.DestinationNotNormal(f"runs must target a normal branch, {target!r} is {dest.cls}")
        self.repo = repo
        self.target = target
        self.branch = TXN_PREFIX + run_id
        self.allow_merge_from_aborted = allow_merge_from_aborted
        created = repo.create_branch(
            self.branch,
            start_ref or f"commit:{dest.head}",
            "transactional",
            allow_from_aborted=allow_from_aborted,
        )
        self.start_commit = created.head
        self.state = "open"  # open | published | aborted

    def _require_open(self) -> None:
        if self.state != "open":
            raise errors.TransactionClosed(f"transaction {self.branch!r} is already {self.state}")

    @property
    def head(self) -> str:
        return self.repo.get_branch(self.branch).head

    def write(self, table: str, snapshot: TableSnapshot, *, skip_checks=(), create_only: bool = False):
        self._require_open()
        return self.repo.write_table(
            self.branch, table, snapshot, self.head, skip_checks=skip_checks, create_only=create_only,
            allow_transactional=True,
            message=f"{self.branch}: write {table}",
        )

    def abort(self) -> None:
        self._require_open()
        self.repo.set_branch_class(self.branch, "aborted")
        self.state = "aborted"

    def publish(self, message: str | None = None):
        """Merge into the target; on a table conflict the transaction is aborted."""
        self._require_open()
        for _ in range(PUBLISH_RETRIES):
            expected = self.repo.get_branch(self.target).head
            try:
                result = merge(
                    self.repo,
                    self.branch,
                    self.target,
                    expected,
                    allow_transactional_source=True,
                    allow_merge_from_aborted=self.allow_merge_from_aborted,
                    message=message or f"publish {self.branch}",
                )
            except errors.CasConflict:
                continue
            except errors.MergeConflict:
                self.abort()
                raise
            self.repo.delete_branch(self.branch, force=True)
            self.state = "published"
            return result
        raise errors.CasConflict(self.target, expected, self.repo.get_branch(self.target).head)


def _error_diag(node: str, exc: Exception, path: str = "<manifest>") -> Diagnostic:
    code = getattr(exc, "code", type(exc).__name__)
    column = getattr(exc, "column", None)
    return Diagnostic("error", code, node, str(exc), None, column)


class RunEngine:
    """Runs manifests against a repository and keeps the run registry."""

    def __init__(self, repo: Repository):
        self.repo = repo
        self.registry = Registry(repo.root / "runs")
        self.recover()

    # -- registry ---------------------------------------------------------------

    def get_run(self, run_id: str) -> RunRecord:
        return self.registry.get(run_id)

    def list_runs(self) -> list[RunRecord]:
        return sorted(self.registry.all(), key=lambda r: r.run_id)

    def manifest_bytes(self, record: RunRecord) -> bytes:
        return self.repo.store.get(record.code_hash)

    def recover(self) -> list[str]:
        """Settle runs left ``running`` by a crashed process; returns their ids."""
        settled = []
        for rec in self.registry.all():
            if rec.status != "running":
                continue
            branch = self.repo._read_branch(rec.txn_branch)
            now = int(self.repo.clock())
            if branch is None or self.repo.is_ancestor(branch.head, self.repo.get_branch(rec.target_branch).head):
                if branch is not None:
                    self.repo.delete_branch(rec.txn_branch, force=True)
                final = replace(rec, status="committed", finished_at=now, publish="recovered")
            else:
                if branch.cls == "transactional":
                    self.repo.set_branch_class(rec.txn_branch, "aborted")
                diag = Diagnostic("error", "Interrupted", rec.target_branch, "run interrupted before publication")
                final = replace(rec, status="aborted", finished_at=now, diagnostics=rec.diagnostics + (diag,))
            self.registry.append(final)
            settled.append(rec.run_id)
        return settled

    # -- runs ---------------------------------------------------------------------

    def run(
        self,
        manifest: str | Path | bytes,
        target: str,
        opts: RunOptions | None = None,
        on_step: Callable[[str], None] | None = None,
    ) -> RunRecord:
        """Execute a manifest transactionally against ``target``."""
        opts = opts or RunOptions()
        data, path = _read_manifest(manifest)
        return self._execute(data, path, target, opts, on_step)

    def _execute(
        self,
        data: bytes,
        path: str,
        target: str,
        opts: RunOptions,
        on_step: Callable[[str], None] | None,
        *,
        start_ref: str | None = None,
        skip_nodes: frozenset[str] = frozenset(),
        resumed_from: str | None = None,
    ) -> RunRecord:
        repo = self.repo
        step = on_step or (lambda event: None)
        dest = repo.get_branch(target)
        if dest.cls != "normal":
            raise errors.DestinationNotNormal(f"runs must target a normal branch, {target!r} is {dest.cls}")
        code_hash = repo.store.put(data)
        run_id = self.registry.next_id()
        txn_name = TXN_PREFIX + run_id
        started = int(repo.clock())
        base = RunRecord(run_id, target, None, code_hash, txn_name, "running", options=opts,
                         started_at=started, resumed_from=resumed_from)

        def reject(diags) -> RunRecord:
            rec = replace(base, status="rejected", diagnostics=tuple(diags), finished_at=int(repo.clock()))
            self.registry.append(rec)
            return rec

        # plan-time: parse and check before any branch exists
        try:
            plan = parse_manifest(data.decode("utf-8"), path)
        except (errors.ManifestParseError, errors.CycleDetected, errors.UnknownSchema, errors.InvalidOrigin,
                UnicodeDecodeError) as exc:
            return reject([_error_diag("<manifest>", exc)])
        if opts.fail_at_node is not None and opts.fail_at_node not in plan.node_names:
            raise errors.InvalidRunOptions(f"fail_at_node {opts.fail_at_node!r} is not a node of the plan")
        start = repo.resolve_ref(start_ref) if start_ref else dest.head
        lake = lake_schemas(repo, start, plan)
        diags = check_plan(plan, lake)
        if has_errors(diags):
            return reject(diags)
        skips = plan_validation_skips(plan, lake) if opts.skip_redundant_checks else frozenset()

        # step 1: sandbox branch
        txn = Transaction(
            repo, target, run_id, f"commit:{start}",
            allow_from_aborted=opts.allow_branch_from_aborted,
            allow_merge_from_aborted=opts.allow_merge_from_aborted,
        )
        rec = replace(base, start_commit=txn.start_commit, diagnostics=tuple(diags))
        self.registry.append(rec)
        step("begin")

        # steps 2 and 3: materialize and validate every node on the sandbox
        results: list[NodeResult] = []
        failed = False
        for node in plan.nodes:
            if node.name in skip_nodes:
                results.append(NodeResult(node.name, "skipped", snapshot=repo.tables(txn.branch).get(node.name)))
                continue
            try:
                if node.name == opts.fail_at_node:
                    raise errors.InjectedFailure(f"injected failure at node {node.name!r}")
                snapshot = self._compute(plan, node.name, txn.branch, lake)
                node_skips = [(c, kind) for (n, c, kind) in skips if n == node.name]
                commit = txn.write(node.name, snapshot, skip_checks=node_skips)
                results.append(NodeResult(node.name, "ok", commit.id, commit.tables[node.name]))
            except errors.LakeError as exc:
                if isinstance(exc, errors.SchemaViolation):
                    exc_diag = Diagnostic("error", exc.code, node.name, str(exc), None,
                                          exc.report.violations[0].column if exc.report.violations else None)
                else:
                    exc_diag = _error_diag(node.name, exc)
                results.append(NodeResult(node.name, "failed", diagnostic=exc_diag))
                failed = True
            except OSError as exc:
                results.append(NodeResult(node.name, "failed", diagnostic=_error_diag(node.name, exc)))
                failed = True
            step(f"node:{node.name}")
            if failed:
                break

        # step 4: publish all or nothing
        if failed:
            txn.abort()
            rec = replace(rec, status="aborted", node_results=tuple(results), finished_at=int(repo.clock()))
            self.registry.append(rec)
            step("abort")
            return rec
        try:
            result = txn.publish(f"publish run {run_id} into {target}")
        except errors.MergeConflict as exc:
            diag = _error_diag(target, exc)
            rec = replace(rec, status="aborted", node_results=tuple(results),
                          diagnostics=rec.diagnostics + (diag,), finished_at=int(repo.clock()))
            self.registry.append(rec)
            step("abort")
            return rec
        rec = replace(rec, status="committed", node_results=tuple(results), finished_at=int(repo.clock()),
                      publish=result.kind, published_commit=result.merge_commit)
        self.registry.append(rec)
        step("publish")
        return rec

    def _compute(self, plan: PipelinePlan, name: str, branch: str, lake) -> TableSnapshot:
        node = plan.node(name)
        names = set(plan.node_names)
        inputs = {}
        schemas = {}
        for inp in node.inputs:
            snap = self.repo.read_table(branch, inp)
            inputs[inp] = snap
            schemas[inp] = plan.node(inp).declared_output if inp in names else lake[inp]
        out = evaluate(node.transform, inputs, node.declared_output.name, schemas=schemas)
        return conform(out, node.declared_output)

    # -- reproducibility ------------------------------------------------------------

    def reproduce(self, run_id: str, new_branch: str, on_step=None):
        """Re-run an archived run from its starting commit on ``new_branch``."""
        rec = self.get_run(run_id)
        if rec.start_commit is None:
            raise errors.UnknownRun(f"run {run_id!r} was rejected before it read any data")
        data = self.manifest_bytes(rec)
        branch = self.repo.create_branch(
            new_branch, f"commit:{rec.start_commit}", allow_from_aborted=rec.options.allow_branch_from_aborted
        )
        again = self._execute(data, "<archived>", new_branch, rec.options, on_step)
        return self.repo.get_branch(branch.name), again

    def resume_from_aborted(
        self, run_id: str, fixed_manifest: str | Path | bytes, opts: RunOptions | None = None, on_step=None
    ) -> RunRecord:
        """Re-run only the failed node and its descendants on top of an aborted run.

        The new sandbox starts at the aborted branch head, so upstream outputs
        are reused; publication still goes through the normal merge into the
        original target.
        """
        opts = opts or RunOptions()
        if not opts.allow_branch_from_aborted:
            raise errors.GuardrailDisabled("resuming from an aborted run needs allow_branch_from_aborted")
        rec = self.get_run(run_id)
        if rec.status != "aborted":
            raise errors.RunNotAborted(f"run {run_id!r} is {rec.status}")
        data, path = _read_manifest(fixed_manifest)
        new_plan = parse_manifest(data.decode("utf-8"), path)
        old_plan = parse_manifest(self.manifest_bytes(rec).decode("utf-8"), "<archived>")
        failed = next((r.node for r in rec.node_results if r.outcome == "failed"), None)
        done = {r.node for r in rec.node_results if r.outcome in ("ok", "skipped")}
        rerun = new_plan.downstream(failed) if failed in new_plan.node_names else set()
        reuse = set(new_plan.node_names) - rerun
        old_names = set(old_plan.node_names)
        for name in sorted(reuse):
            if name not in old_names or name not in done:
                raise errors.UpstreamManifestChanged(f"node {name!r} was not materialized by run {run_id}")
            if _section(new_plan, name) != _section(old_plan, name):
                raise errors.UpstreamManifestChanged(f"node {name!r} differs from the archived manifest")
        if new_plan.sources != old_plan.sources:
            raise errors.UpstreamManifestChanged("source declarations differ from the archived manifest")
        return self._execute(
            data, path, rec.target_branch, opts, on_step,
            start_ref=rec.txn_branch, skip_nodes=frozenset(reuse), resumed_from=run_id,
        )


def _section(plan: PipelinePlan, name: str):
    node = plan.node(name)
    return node.text.rstrip(), node.declared_output


def _read_manifest(manifest) -> tuple[bytes, str]:
    if isinstance(manifest, bytes):
        return manifest, "<manifest>"
    p = Path(manifest)
    try:
        return p.read_bytes(), str(p)
    except OSError as exc:
        raise errors.ManifestParseError(f"cannot read {p}: {exc.strerror}") from None


def lake_schemas(repo: Repository, commit: str, plan: PipelinePlan) -> dict[str, SchemaContract]:
    tables = repo.get_commit(commit).tables
    return {t: repo.snapshot_schema(tables[t]) for t in plan.sources if t in tables}
