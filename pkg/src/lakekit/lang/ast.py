"""Expression and transform trees for the pipeline language."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterator

from ..schema import ColumnType, value_matches


class Expr:
    __slots__ = ()

    def children(self) -> tuple[Expr, ...]:
        return ()

    def walk(self) -> Iterator[Expr]:
        yield self
        for c in self.children():
            yield from c.walk()


@dataclass(frozen=True)
class ColRef(Expr):
    name: str


@dataclass(frozen=True)
class Lit(Expr):
    value: Any
    type: ColumnType

    def __post_init__(self):
        if self.value is None:
            if not self.type.nullable:
                raise ValueError("null literal needs a nullable type")
        elif not value_matches(self.type.base, self.value):
            raise ValueError(f"literal {self.value!r} is not a {self.type.base}")


@dataclass(frozen=True)
class Cast(Expr):
    expr: Expr
    type: ColumnType

    def children(self):
        return (self.expr,)


@dataclass(frozen=True)
class Alias(Expr):
    expr: Expr
    name: str

    def children(self):
        return (self.expr,)


@dataclass(frozen=True)
class IsNotNull(Expr):
    expr: Expr

    def children(self):
        return (self.expr,)


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Lt(Expr):
    left: Expr
    right: Expr

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class And(Expr):
    left: Expr
    right: Expr

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class SumAgg(Expr):
    expr: Expr

    def children(self):
        return (self.expr,)


class Transform:
    __slots__ = ()

    def inputs(self) -> tuple[Transform, ...]:
        return ()


@dataclass(frozen=True)
class TableRef(Transform):
    name: str


@dataclass(frozen=True)
class Select(Transform):
    input: Transform
    items: tuple[Expr, ...]

    def inputs(self):
        return (self.input,)


@dataclass(frozen=True)
class Filter(Transform):
    input: Transform
    cond: Expr

    def inputs(self):
        return (self.input,)


@dataclass(frozen=True)
class Join(Transform):
    left: Transform
    right: Transform
    on: tuple[str, ...]
    kind: str = "inner"

    def inputs(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Aggregate(Transform):
    input: Transform
    group_by: tuple[str, ...]
    items: tuple[Expr, ...]

    def inputs(self):
        return (self.input,)


def table_refs(t: Transform) -> list[str]:
    """Names of input tables in first-reference order."""
    out: list[str] = []

    def visit(node: Transform):
        if isinstance(node, TableRef):
            if node.name not in out:
                out.append(node.name)
        for child in node.inputs():
            visit(child)

    visit(t)
    return out


def item_name(item: Expr) -> str | None:
    if isinstance(item, Alias):
        return item.name
    if isinstance(item, ColRef):
        return item.name
    return None


def unalias(item: Expr) -> Expr:
    return item.expr if isinstance(item, Alias) else item


def has_sum(e: Expr) -> bool:
    return any(isinstance(x, SumAgg) for x in e.walk())


def conjuncts(e: Expr) -> list[Expr]:
    if isinstance(e, And):
        return conjuncts(e.left) + conjuncts(e.right)
    return [e]
