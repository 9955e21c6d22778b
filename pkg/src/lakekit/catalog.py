"""File-backed, content-addressed catalog of table snapshots, commits and refs.

On-disk layout under the repository root::

    FORMAT                      format version + hash algorithm
    LOCK                        pid of the process holding the repository
    objects/<ab>/<digest>       write-once canonical JSON objects
    refs/branches/<name>        "<class> <head> <created_from>"
    refs/tags/<name>            "<target>"

Every commit stores its full table map, so reading a table at any commit is a
single lookup. Branch heads move only through compare-and-set.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import tempfile
import threading
import time
import weakref
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

from . import errors
from .contracts.validate import validate_data
from .schema import SchemaContract, TableSnapshot

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
HASH_ALGORITHM = "sha256"

BRANCH_CLASSES = ("normal", "transactional", "aborted")
MAIN = "main"

_NAME_RE = re.compile(r"[a-zA-Z0-9_\-./]+")


def canonical_bytes(obj) -> bytes:
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)
    return text.encode("utf-8") + b"\n"


def check_name(name: str, what: str = "branch") -> str:
    if not isinstance(name, str) or not _NAME_RE.fullmatch(name):
        raise errors.InvalidName(f"invalid {what} name {name!r}")
    parts = name.split("/")
    if any(p in ("", ".", "..") for p in parts):
        raise errors.InvalidName(f"invalid {what} name {name!r}")
    return name


@dataclass(frozen=True)
class Commit:
    id: str
    tables: Mapping[str, str]
    parents: tuple[str, ...]
    message: str
    author: str
    timestamp: int

    def record(self) -> dict:
        return {
            "kind": "commit",
            "tables": dict(self.tables),
            "parents": list(self.parents),
            "message": self.message,
            "author": self.author,
            "timestamp": self.timestamp,
        }

    def to_dict(self) -> dict:
        return {"id": self.id, **{k: v for k, v in self.record().items() if k != "kind"}}


@dataclass(frozen=True)
class Branch:
    name: str
    head: str
    cls: str = "normal"
    created_from: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "head": self.head, "class": self.cls, "created_from": self.created_from}


@dataclass(frozen=True)
class Tag:
    name: str
    target: str

    def to_dict(self) -> dict:
        return {"name": self.name, "target": self.target}


def _atomic_write(path: Path, data: bytes, durable: bool = False) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            if durable:
                fh.flush()
                os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


class ObjectStore:
    """Write-once store keyed by the digest of the stored bytes."""

    def __init__(self, root: Path, algorithm: str = HASH_ALGORITHM, durable: bool = False):
        self.root = Path(root)
        self.algorithm = algorithm
        self.durable = durable
        self.writes = 0
        self.reads = 0
        self._lock = threading.Lock()

    def digest(self, data: bytes) -> str:
        return hashlib.new(self.algorithm, data).hexdigest()

    def _path(self, digest: str) -> Path:
        return self.root / digest[:2] / digest

    def put(self, data: bytes) -> str:
        digest = self.digest(data)
        path = self._path(digest)
        if path.exists() and self.contains(digest):
            return digest
        _atomic_write(path, data, self.durable)
        with self._lock:
            self.writes += 1
        return digest

    def contains(self, digest: str) -> bool:
        try:
            self.get(digest)
        except KeyError:
            return False
        return True

    def get(self, digest: str) -> bytes:
        path = self._path(digest)
        try:
            data = path.read_bytes()
        except (FileNotFoundError, NotADirectoryError, IsADirectoryError):
            raise KeyError(digest) from None
        with self._lock:
            self.reads += 1
        if self.digest(data) != digest:
            # partially written or tampered: treat as absent
            log.warning("object %s fails digest check; ignoring", digest)
            raise KeyError(digest)
        return data

    def put_json(self, obj) -> str:
        return self.put(canonical_bytes(obj))

    def get_json(self, digest: str):
        return json.loads(self.get(digest))

    def __iter__(self):
        if not self.root.exists():
            return
        for sub in sorted(self.root.iterdir()):
            if sub.is_dir():
                for p in sorted(sub.iterdir()):
                    if not p.name.startswith("."):
                        yield p.name

    def find_prefix(self, prefix: str) -> list[str]:
        sub = self.root / prefix[:2]
        if len(prefix) < 2 or not sub.is_dir():
            return []
        return sorted(p.name for p in sub.iterdir() if p.name.startswith(prefix))


def _pid_alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    return True


def _release(path: Path, token: str) -> None:
    try:
        if path.read_text().strip() == token:
            path.unlink()
    except FileNotFoundError:
        pass


def _parse_branch(name: str, text: str) -> Branch:
    parts = text.split()
    cls, head = parts[0], parts[1]
    return Branch(name, head, cls, parts[2] if len(parts) > 2 else head)


class Repository:
    """Handle on an initialized repository directory.

    Opening takes the repository lock; use as a context manager or call
    :meth:`close`. ``clock`` returns integer epoch seconds and exists so tests
    get stable commit ids.
    """

    def __init__(
        self,
        root: str | os.PathLike,
        *,
        clock: Callable[[], int] | None = None,
        author: str = "lakekit",
        durable: bool = False,
    ):
        self.root = Path(root)
        fmt = self.root / "FORMAT"
        if not fmt.exists():
            raise errors.NotARepository(f"{self.root} is not a lakekit repository")
        version, algorithm = self._read_format(fmt)
        if version != FORMAT_VERSION:
            raise errors.NotARepository(f"unsupported repository format {version}")
        self.clock = clock or (lambda: int(time.time()))
        self.author = author
        self.durable = durable
        self.store = ObjectStore(self.root / "objects", algorithm, durable)
        self.data_reads = 0
        self._commits: dict[str, Commit] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self._lock_path = self.root / "LOCK"
        self._finalizer = None
        self._acquire_lock()

    # -- lifecycle ---------------------------------------------------------------

    @staticmethod
    def _read_format(path: Path) -> tuple[int, str]:
        fields = {}
        for line in path.read_text(encoding="utf-8").splitlines():
            key, _, value = line.partition(" ")
            fields[key] = value.strip()
        return int(fields.get("lakekit-format", 0)), fields.get("hash", HASH_ALGORITHM)

    @classmethod
    def init(cls, root: str | os.PathLike, **kwargs) -> Repository:
        root = Path(root)
        if (root / "FORMAT").exists():
            raise errors.AlreadyInitialized(f"{root} is already a repository")
        if root.exists() and any(root.iterdir()):
            raise errors.AlreadyInitialized(f"{root} is not empty")
        root.mkdir(parents=True, exist_ok=True)
        for sub in ("objects", "refs/branches", "refs/tags", "runs"):
            (root / sub).mkdir(parents=True, exist_ok=True)
        (root / "FORMAT").write_text(
            f"lakekit-format {FORMAT_VERSION}\nhash {HASH_ALGORITHM}\n", encoding="utf-8"
        )
        repo = cls(root, **kwargs)
        init = repo.new_commit({}, (), "init")
        repo._write_branch(Branch(MAIN, init.id, "normal", init.id))
        return repo

    @classmethod
    def open(cls, root: str | os.PathLike, **kwargs) -> Repository:
        return cls(root, **kwargs)

    def _acquire_lock(self) -> None:
        token = f"{os.getpid()} {id(self)}"
        for _ in range(2):
            try:
                fd = os.open(self._lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY, 0o644)
            except FileExistsError:
                try:
                    holder = self._lock_path.read_text().split()
                except FileNotFoundError:
                    continue
                pid = int(holder[0]) if holder and holder[0].isdigit() else -1
                if pid > 0 and _pid_alive(pid):
                    raise errors.RepoLocked(f"{self.root} is locked by pid {pid}") from None
                log.warning("removing stale lock left by pid %s", pid)
                self._lock_path.unlink(missing_ok=True)
                continue
            with os.fdopen(fd, "w") as fh:
                fh.write(token + "\n")
            self._finalizer = weakref.finalize(self, _release, self._lock_path, token)
            return
        raise errors.RepoLocked(f"could not lock {self.root}")

    def close(self) -> None:
        if self._finalizer is not None:
            self._finalizer()

    def __enter__(self) -> Repository:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- objects -----------------------------------------------------------------

    def new_commit(self, tables: Mapping[str, str], parents: Iterable[str], message: str) -> Commit:
        parents = tuple(parents)
        record = {
            "kind": "commit",
            "tables": dict(tables),
            "parents": list(parents),
            "message": message,
            "author": self.author,
            "timestamp": int(self.clock()),
        }
        cid = self.store.put_json(record)
        commit = Commit(cid, dict(tables), parents, message, self.author, record["timestamp"])
        self._commits[cid] = commit
        return commit

    def get_commit(self, cid: str) -> Commit:
        commit = self._commits.get(cid)
        if commit is not None:
            return commit
        try:
            rec = self.store.get_json(cid)
        except KeyError:
            raise errors.UnknownRef(f"no commit {cid}") from None
        if rec.get("kind") != "commit":
            raise errors.UnknownRef(f"object {cid} is not a commit")
        commit = Commit(cid, rec["tables"], tuple(rec["parents"]), rec["message"], rec["author"], rec["timestamp"])
        self._commits[cid] = commit
        return commit

    def put_snapshot(self, snapshot: TableSnapshot) -> str:
        data = self.store.put_json(snapshot.payload())
        return self.store.put_json(
            {"kind": "snapshot", "schema": snapshot.schema.to_dict(), "data": data, "row_count": snapshot.row_count}
        )

    def _snapshot_record(self, sid: str) -> dict:
        try:
            rec = self.store.get_json(sid)
        except KeyError:
            raise errors.CorruptObject(f"snapshot {sid} missing or corrupt") from None
        return rec

    def load_snapshot(self, sid: str) -> TableSnapshot:
        rec = self._snapshot_record(sid)
        schema = SchemaContract.from_dict(rec["schema"])
        try:
            payload = self.store.get_json(rec["data"])
        except KeyError:
            raise errors.CorruptObject(f"data object {rec['data']} missing or corrupt") from None
        self.data_reads += 1
        return TableSnapshot.from_payload(schema, payload, rec["row_count"])

    # -- refs --------------------------------------------------------------------

    def _branch_path(self, name: str) -> Path:
        return self.root / "refs" / "branches" / name

    def _tag_path(self, name: str) -> Path:
        return self.root / "refs" / "tags" / name

    def _lock_for(self, name: str) -> threading.Lock:
        with self._locks_guard:
            lock = self._locks.get(name)
            if lock is None:
                lock = self._locks[name] = threading.Lock()
            return lock

    def _read_branch(self, name: str) -> Branch | None:
        path = self._branch_path(name)
        try:
            text = path.read_text(encoding="utf-8")
        except (FileNotFoundError, IsADirectoryError, NotADirectoryError):
            return None
        return _parse_branch(name, text)

    def _write_branch(self, branch: Branch) -> None:
        line = f"{branch.cls} {branch.head} {branch.created_from}\n"
        _atomic_write(self._branch_path(branch.name), line.encode("utf-8"), self.durable)

    def get_branch(self, name: str) -> Branch:
        branch = self._read_branch(name)
        if branch is None:
            raise errors.UnknownRef(f"no branch {name!r}")
        return branch

    def branches(self) -> list[Branch]:
        base = str(self.root / "refs" / "branches")
        out = []
        for dirpath, _dirs, files in os.walk(base):
            prefix = os.path.relpath(dirpath, base).replace(os.sep, "/")
            for f in files:
                if f.startswith("."):
                    continue
                try:
                    with open(os.path.join(dirpath, f), encoding="utf-8") as fh:
                        text = fh.read()
                except FileNotFoundError:  # deleted while listing
                    continue
                out.append(_parse_branch(f if prefix == "." else f"{prefix}/{f}", text))
        return sorted(out, key=lambda b: b.name)

    def tags(self) -> list[Tag]:
        base = self.root / "refs" / "tags"
        out = []
        for dirpath, _dirs, files in os.walk(base):
            for f in files:
                if not f.startswith("."):
                    name = Path(dirpath, f).relative_to(base).as_posix()
                    out.append(Tag(name, Path(dirpath, f).read_text(encoding="utf-8").strip()))
        return sorted(out, key=lambda t: t.name)

    def resolve_ref(self, ref: str) -> str:
        """Resolve ``<branch>``, ``tag:<name>`` or ``commit:<hash-or-prefix>``."""
        if ref.startswith("tag:"):
            try:
                return self._tag_path(ref[4:]).read_text(encoding="utf-8").strip()
            except (FileNotFoundError, IsADirectoryError, NotADirectoryError):
                raise errors.UnknownRef(f"no tag {ref[4:]!r}") from None
        if ref.startswith("commit:"):
            prefix = ref[7:]
            if not re.fullmatch(r"[0-9a-f]{4,}", prefix):
                raise errors.UnknownRef(f"bad commit id {prefix!r}")
            matches = [d for d in self.store.find_prefix(prefix) if self._is_commit(d)]
            if len(matches) != 1:
                what = "no" if not matches else "ambiguous"
                raise errors.UnknownRef(f"{what} commit {prefix!r}")
            return matches[0]
        return self.get_branch(ref).head

    def _is_commit(self, digest: str) -> bool:
        try:
            self.get_commit(digest)
        except errors.UnknownRef:
            return False
        return True

    def _source_branch(self, ref: str) -> Branch | None:
        if ref.startswith(("tag:", "commit:")):
            return None
        return self._read_branch(ref)

    def quarantine(self) -> dict[str, str]:
        """Commits visible only on transactional or aborted lineage, with that class."""
        branches = self.branches()
        published: set[str] = set()
        for b in branches:
            if b.cls == "normal":
                published |= self.ancestors(b.head)
        out: dict[str, str] = {}
        for b in branches:
            if b.cls != "normal":
                own = self.ancestors(b.head) - self.ancestors(b.created_from) - published
                for c in own:
                    if out.get(c) != "aborted":
                        out[c] = b.cls
        return out

    def _commit_class(self, cid: str) -> str:
        """``quarantine().get(cid, "normal")`` without walking every branch's history."""
        branches = self.branches()
        owners = [
            b.cls for b in branches
            if b.cls != "normal" and cid in self.ancestors(b.head) and cid not in self.ancestors(b.created_from)
        ]
        if not owners or any(cid in self.ancestors(b.head) for b in branches if b.cls == "normal"):
            return "normal"
        return "aborted" if "aborted" in owners else "transactional"

    def guard_source(self, ref: str, *, allow_aborted: bool, allow_transactional: bool = False) -> str:
        """Resolve ``ref`` and enforce the aborted/transactional source guardrails."""
        cid = self.resolve_ref(ref)
        branch = self._source_branch(ref)
        if branch is not None:
            cls = branch.cls
        else:
            cls = self._commit_class(cid)
        if cls == "aborted" and not allow_aborted:
            raise errors.AbortedSourceForbidden(f"{ref!r} belongs to an aborted run")
        if cls == "transactional" and not allow_transactional:
            raise errors.TransactionalSourceForbidden(f"{ref!r} is an in-flight transactional branch")
        return cid

    def create_branch(
        self,
        name: str,
        from_ref: str = MAIN,
        cls: str = "normal",
        *,
        allow_from_aborted: bool = False,
        allow_from_transactional: bool = False,
    ) -> Branch:
        check_name(name)
        if cls not in ("normal", "transactional"):
            raise ValueError(f"cannot create a branch of class {cls!r}")
        head = self.guard_source(
            from_ref, allow_aborted=allow_from_aborted, allow_transactional=allow_from_transactional
        )
        branch = Branch(name, head, cls, head)
        with self._lock_for(name):
            path = self._branch_path(name)
            if path.exists() and path.is_file():
                raise errors.BranchExists(f"branch {name!r} exists")
            if path.is_dir() and any(path.rglob("*")):
                raise errors.InvalidName(f"{name!r} is a prefix of existing branches")
            for parent in path.relative_to(self.root / "refs" / "branches").parents:
                if str(parent) != "." and self._branch_path(parent.as_posix()).is_file():
                    raise errors.InvalidName(f"branch {parent.as_posix()!r} blocks {name!r}")
            self._write_branch(branch)
        return branch

    def delete_branch(self, name: str, *, force: bool = False) -> None:
        """Remove a branch ref. Objects stay; aborted branches are kept for triage."""
        if name == MAIN:
            raise errors.CannotDeleteMain("main cannot be deleted")
        with self._lock_for(name):
            path = self._branch_path(name)
            branch = self._read_branch(name)
            if branch is None:
                raise errors.UnknownRef(f"no branch {name!r}")
            if not force and branch.cls == "aborted":
                raise errors.AbortedBranchImmutable(f"aborted branch {name!r} is retained for triage")
            if not force and branch.cls == "transactional":
                raise errors.BranchInUse(f"branch {name!r} belongs to a running transaction")
            path.unlink()
            base = self.root / "refs" / "branches"
            parent = path.parent
            while parent != base:
                try:
                    parent.rmdir()
                except OSError:
                    break
                parent = parent.parent

    def set_branch_class(self, name: str, cls: str) -> Branch:
        """Reclassify a branch; only ``transactional -> aborted`` is legal."""
        with self._lock_for(name):
            branch = self.get_branch(name)
            if branch.cls == cls:
                return branch
            if (branch.cls, cls) != ("transactional", "aborted"):
                raise ValueError(f"cannot change class of {name!r} from {branch.cls} to {cls}")
            branch = Branch(name, branch.head, cls, branch.created_from)
            self._write_branch(branch)
            return branch

    def advance_branch(self, name: str, expected_head: str, new_head: str) -> Branch:
        """Compare-and-set the head of ``name``."""
        with self._lock_for(name):
            branch = self.get_branch(name)
            if branch.cls == "aborted":
                raise errors.AbortedBranchImmutable(f"branch {name!r} is aborted")
            if branch.head != expected_head:
                raise errors.CasConflict(name, expected_head, branch.head)
            branch = Branch(name, new_head, branch.cls, branch.created_from)
            self._write_branch(branch)
            return branch

    def tag_commit(self, name: str, target: str) -> Tag:
        check_name(name, "tag")
        cid = self.resolve_ref(target)
        path = self._tag_path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY, 0o644)
        except (FileExistsError, IsADirectoryError):
            raise errors.TagExists(f"tag {name!r} exists") from None
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(cid + "\n")
        return Tag(name, cid)

    # -- tables ------------------------------------------------------------------

    def write_table(
        self,
        branch: str,
        table: str,
        snapshot: TableSnapshot,
        expected_head: str,
        *,
        message: str | None = None,
        skip_checks=(),
        create_only: bool = False,
        allow_transactional: bool = False,
    ) -> Commit:
        """Upsert ``table`` on ``branch`` as one new commit, guarded by CAS.

        Transactional branches belong to their run; only the run's own
        transaction passes ``allow_transactional``.
        """
        check_name(table, "table")
        current = self.get_branch(branch)
        if current.cls == "aborted":
            raise errors.AbortedBranchImmutable(f"branch {branch!r} is aborted")
        if current.cls == "transactional" and not allow_transactional:
            raise errors.TransactionalBranchOwned(f"branch {branch!r} is written only by its run")
        report = validate_data(snapshot, snapshot.schema, skip_checks)
        if not report.ok:
            raise errors.SchemaViolation(report)
        if create_only and table in self.get_commit(current.head).tables:
            raise errors.TableExists(f"table {table!r} exists on {branch!r}")
        if current.head != expected_head:
            raise errors.CasConflict(branch, expected_head, current.head)
        sid = self.put_snapshot(snapshot)
        with self._lock_for(branch):
            current = self.get_branch(branch)
            if current.cls == "aborted":
                raise errors.AbortedBranchImmutable(f"branch {branch!r} is aborted")
            if current.head != expected_head:
                raise errors.CasConflict(branch, expected_head, current.head)
            base = self.get_commit(current.head)
            if create_only and table in base.tables:
                raise errors.TableExists(f"table {table!r} exists on {branch!r}")
            tables = dict(base.tables)
            tables[table] = sid
            commit = self.new_commit(tables, (current.head,), message or f"write {table}")
            self._write_branch(Branch(branch, commit.id, current.cls, current.created_from))
        return commit

    def create_table(self, branch: str, table: str, snapshot: TableSnapshot, expected_head: str, **kw) -> Commit:
        return self.write_table(branch, table, snapshot, expected_head, create_only=True, **kw)

    def tables(self, ref: str) -> dict[str, str]:
        return dict(self.get_commit(self.resolve_ref(ref)).tables)

    def snapshot_id(self, ref: str, table: str) -> str:
        tables = self.tables(ref)
        if table not in tables:
            raise errors.NoSuchTable(f"no table {table!r} at {ref!r}")
        return tables[table]

    def read_table(self, ref: str, table: str) -> TableSnapshot:
        return self.load_snapshot(self.snapshot_id(ref, table))

    def table_schema(self, ref: str, table: str) -> SchemaContract:
        """Schema of ``table`` at ``ref`` without touching row data."""
        return self.snapshot_schema(self.snapshot_id(ref, table))

    def snapshot_schema(self, sid: str) -> SchemaContract:
        return SchemaContract.from_dict(self._snapshot_record(sid)["schema"])

    # -- history -----------------------------------------------------------------

    def log(self, ref: str, limit: int | None = None) -> list[Commit]:
        if limit is not None and limit < 1:
            raise ValueError("limit must be positive")
        out = []
        cid: str | None = self.resolve_ref(ref)
        while cid is not None and (limit is None or len(out) < limit):
            commit = self.get_commit(cid)
            out.append(commit)
            cid = commit.parents[0] if commit.parents else None
        return out

    def ancestors(self, cid: str) -> set[str]:
        """``cid`` and every commit reachable through parent links."""
        seen = {cid}
        stack = [cid]
        while stack:
            for p in self.get_commit(stack.pop()).parents:
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return seen

    def is_ancestor(self, a: str, b: str) -> bool:
        return a in self.ancestors(b)

    def fsck(self) -> list[str]:
        """Return a list of integrity problems (empty when healthy)."""
        problems = []
        commits = {}
        for digest in self.store:
            try:
                rec = self.store.get_json(digest)
            except KeyError:
                problems.append(f"object {digest} fails digest check")
                continue
            except ValueError:
                continue  # raw blobs such as archived manifests
            if isinstance(rec, dict) and rec.get("kind") == "commit":
                commits[digest] = rec
        roots = [c for c, r in commits.items() if not r["parents"]]
        if len(roots) != 1:
            problems.append(f"expected one root commit, found {len(roots)}")
        for cid, rec in commits.items():
            for p in rec["parents"]:
                if p not in commits:
                    problems.append(f"commit {cid} has missing parent {p}")
            for table, sid in rec["tables"].items():
                if not self.store.contains(sid):
                    problems.append(f"commit {cid} table {table} has missing snapshot {sid}")
        state: dict[str, int] = {}

        def visit(c: str) -> bool:
            stack = [(c, iter(commits.get(c, {}).get("parents", ())))]
            state[c] = 1
            while stack:
                node, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    state[node] = 2
                    stack.pop()
                elif state.get(nxt) == 1:
                    return False
                elif nxt not in state and nxt in commits:
                    state[nxt] = 1
                    stack.append((nxt, iter(commits[nxt]["parents"])))
            return True

        for cid in commits:
            if cid not in state and not visit(cid):
                problems.append(f"parent cycle through {cid}")
        if len(roots) == 1:
            for b in self.branches():
                if b.head not in commits:
                    problems.append(f"branch {b.name} points at missing commit {b.head}")
                elif roots[0] not in self.ancestors(b.head):
                    problems.append(f"branch {b.name} does not reach the root commit")
        return problems
