"""Runtime data conformance: does a materialized snapshot honour a contract?"""

from __future__ import annotations

from dataclasses import dataclass

from ..schema import SchemaContract, TableSnapshot, value_matches

NONNULL = "nonnull"


@dataclass(frozen=True)
class Violation:
    kind: str
    column: str
    row: int | None = None
    detail: str = ""

    def __str__(self) -> str:
        args = self.column if self.row is None else f"{self.column}, {self.row}"
        text = f"{self.kind}({args})"
        return f"{text}: {self.detail}" if self.detail else text

    def to_dict(self) -> dict:
        return {"kind": self.kind, "column": self.column, "row": self.row, "detail": self.detail}


@dataclass(frozen=True)
class ConformanceReport:
    contract: str
    violations: tuple[Violation, ...] = ()
    checked_rows: int = 0
    skipped: tuple[tuple[str, str], ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "contract": self.contract,
            "ok": self.ok,
            "checked_rows": self.checked_rows,
            "violations": [v.to_dict() for v in self.violations],
            "skipped": [list(s) for s in self.skipped],
        }


def validate_data(snapshot: TableSnapshot, contract: SchemaContract, skip=()) -> ConformanceReport:
    """Check ``snapshot`` against ``contract`` and report every kind of violation.

    ``skip`` holds ``(column, "nonnull")`` pairs whose null check was proven
    redundant at plan time. Type checks are never skipped. Only the first
    offending row is reported per column and violation kind.
    """
    skip = frozenset(skip)
    violations: list[Violation] = []
    declared = {c.name: c.type for c in snapshot.schema.columns}
    for col in contract.columns:
        if col.name not in snapshot.data:
            violations.append(Violation("MissingColumn", col.name))
            continue
        have = declared.get(col.name)
        if have is not None and have.base != col.type.base:
            violations.append(Violation("TypeMismatch", col.name, detail=f"{have.base} != {col.type.base}"))
            continue
        check_nulls = not col.type.nullable and (col.name, NONNULL) not in skip
        bad_type = bad_null = None
        for i, v in enumerate(snapshot.data[col.name]):
            if v is None:
                if check_nulls and bad_null is None:
                    bad_null = i
            elif bad_type is None and not value_matches(col.type.base, v):
                bad_type = i
            if bad_type is not None and (bad_null is not None or not check_nulls):
                break
        if bad_type is not None:
            v = snapshot.data[col.name][bad_type]
            violations.append(
                Violation("ValueTypeMismatch", col.name, bad_type, f"{type(v).__name__} is not {col.type.base}")
            )
        if bad_null is not None:
            violations.append(Violation("UnexpectedNull", col.name, bad_null))
    for name in snapshot.data:
        if name not in contract:
            violations.append(Violation("ExtraColumn", name))
    used = tuple(sorted(s for s in skip if s[0] in contract))
    return ConformanceReport(contract.name, tuple(violations), snapshot.row_count, used)
