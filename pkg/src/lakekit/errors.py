"""Exception hierarchy.

Every error carries a stable ``code`` used by the CLI and by diagnostics.
"""

from __future__ import annotations


class LakeError(Exception):
    code = "LakeError"


# -- catalog -----------------------------------------------------------------


class AlreadyInitialized(LakeError):
    code = "AlreadyInitialized"


class NotARepository(LakeError):
    code = "NotARepository"


class RepoLocked(LakeError):
    code = "RepoLocked"


class UnknownRef(LakeError):
    code = "UnknownRef"


class InvalidName(LakeError):
    code = "InvalidName"


class BranchExists(LakeError):
    code = "BranchExists"


class TagExists(LakeError):
    code = "TagExists"


class CasConflict(LakeError):
    code = "CasConflict"

    def __init__(self, branch: str, expected: str, actual: str):
        super().__init__(f"branch {branch!r} head is {actual[:12]}, expected {expected[:12]}")
        self.branch = branch
        self.expected = expected
        self.actual = actual


class AbortedBranchImmutable(LakeError):
    code = "AbortedBranchImmutable"


class AbortedSourceForbidden(LakeError):
    code = "AbortedSourceForbidden"


class TransactionalSourceForbidden(LakeError):
    code = "TransactionalSourceForbidden"


class TransactionalBranchOwned(LakeError):
    code = "TransactionalBranchOwned"


class BranchInUse(LakeError):
    code = "BranchInUse"


class DestinationNotNormal(LakeError):
    code = "DestinationNotNormal"


class SchemaViolation(LakeError):
    code = "SchemaViolation"

    def __init__(self, report):
        self.report = report
        super().__init__("; ".join(str(v) for v in report.violations[:5]))


class NoSuchTable(LakeError):
    code = "NoSuchTable"


class TableExists(LakeError):
    code = "TableExists"


class CannotDeleteMain(LakeError):
    code = "CannotDeleteMain"


class CorruptObject(LakeError):
    code = "CorruptObject"


# -- merge -------------------------------------------------------------------


class MergeConflict(LakeError):
    code = "MergeConflict"

    def __init__(self, tables):
        self.tables = frozenset(tables)
        super().__init__("conflicting tables: " + ", ".join(sorted(self.tables)))


# -- transform language --------------------------------------------------------


class TransformSyntaxError(LakeError):
    code = "SyntaxError"

    def __init__(self, line: int, col: int, expected: str, found: str = ""):
        self.line = line
        self.col = col
        self.expected = expected
        self.found = found
        msg = f"{line}:{col}: expected {expected}"
        if found:
            msg += f", found {found!r}"
        super().__init__(msg)


class InferenceError(LakeError):
    code = "InferenceError"
    column: str | None = None


class UnknownColumn(InferenceError):
    code = "UnknownColumn"

    def __init__(self, name: str, available):
        self.column = name
        self.available = tuple(available)
        super().__init__(f"unknown column {name!r}; available: {', '.join(self.available) or '-'}")


class TypeMismatch(InferenceError):
    code = "TypeMismatch"

    def __init__(self, expr: str, expected: str, found: str, column: str | None = None):
        self.expr = expr
        self.expected = expected
        self.found = found
        self.column = column
        super().__init__(f"{expr}: expected {expected}, found {found}")


class IllegalNarrowing(InferenceError):
    code = "IllegalNarrowing"

    def __init__(self, column: str, from_type: str, to_type: str):
        self.column = column
        self.from_type = from_type
        self.to_type = to_type
        super().__init__(
            f"column {column!r} narrows {from_type} -> {to_type} without an explicit cast"
        )


class DuplicateColumn(InferenceError):
    code = "DuplicateColumn"

    def __init__(self, name: str):
        self.column = name
        super().__init__(f"duplicate output column {name!r}")


class UnknownInput(InferenceError):
    code = "UnknownInput"

    def __init__(self, name: str, available):
        self.available = tuple(available)
        super().__init__(f"unknown input table {name!r}; available: {', '.join(self.available) or '-'}")


class MissingColumn(InferenceError):
    code = "MissingColumn"

    def __init__(self, name: str, available):
        self.column = name
        self.available = tuple(available)
        super().__init__(f"declared column {name!r} is not produced; produced: {', '.join(self.available) or '-'}")


class ExtraColumn(InferenceError):
    code = "ExtraColumn"

    def __init__(self, name: str):
        self.column = name
        super().__init__(f"output column {name!r} is not declared")


class UnnamedColumn(InferenceError):
    code = "UnnamedColumn"

    def __init__(self, expr: str):
        super().__init__(f"computed column {expr} needs an alias")


class InvalidAggregate(InferenceError):
    code = "InvalidAggregate"


class EvaluationError(LakeError):
    code = "EvaluationError"


class RuntimeCastNull(EvaluationError):
    code = "RuntimeCastNull"

    def __init__(self, column: str, row: int):
        self.column = column
        self.row = row
        super().__init__(f"null reached non-nullable cast for {column!r} at row {row}")


class RuntimeCastError(EvaluationError):
    code = "RuntimeCastError"


class IntegerOverflow(EvaluationError):
    code = "IntegerOverflow"


class ArithmeticOverflow(EvaluationError):
    code = "ArithmeticOverflow"


class InputContractViolation(EvaluationError):
    code = "InputContractViolation"


# -- contracts -----------------------------------------------------------------


class ManifestParseError(LakeError):
    code = "ManifestParseError"

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)


class CycleDetected(LakeError):
    code = "CycleDetected"

    def __init__(self, nodes):
        self.nodes = tuple(nodes)
        super().__init__("cycle through " + " -> ".join(self.nodes))


class UnknownSchema(LakeError):
    code = "UnknownSchema"


class InvalidOrigin(LakeError):
    code = "InvalidOrigin"


# -- runs ----------------------------------------------------------------------


class UnknownRun(LakeError):
    code = "UnknownRun"


class GuardrailDisabled(LakeError):
    code = "GuardrailDisabled"


class UpstreamManifestChanged(LakeError):
    code = "UpstreamManifestChanged"


class InvalidRunOptions(LakeError):
    code = "InvalidRunOptions"


class InjectedFailure(LakeError):
    code = "InjectedFailure"


class TransactionClosed(LakeError):
    code = "TransactionClosed"


class RunNotAborted(LakeError):
    code = "RunNotAborted"


class RegistryImmutable(LakeError):
    code = "RegistryImmutable"


# -- model checker ---------------------------------------------------------------


class BoundsTooLarge(LakeError):
    code = "BoundsTooLarge"


class UnknownInvariant(LakeError):
    code = "UnknownInvariant"


class TraceParseError(LakeError):
    code = "TraceParseError"


class Divergence(LakeError):
    code = "Divergence"

    def __init__(self, step: int, expected, actual):
        self.step = step
        self.expected = expected
        self.actual = actual
        super().__init__(f"step {step}: expected {expected!r}, got {actual!r}")


# -- ingestion -------------------------------------------------------------------


class CsvParseError(LakeError):
    code = "CsvParseError"

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class NullInNonNullable(LakeError):
    code = "NullInNonNullable"

    def __init__(self, column: str, line: int):
        self.column = column
        self.line = line
        super().__init__(f"null in non-nullable column {column!r} at line {line}")
