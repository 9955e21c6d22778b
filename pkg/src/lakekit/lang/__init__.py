"""The closed transformation language: AST, parser, inference and evaluation."""

from __future__ import annotations

from .ast import (
    Aggregate,
    Alias,
    And,
    Cast,
    ColRef,
    Expr,
    Filter,
    IsNotNull,
    Join,
    Lit,
    Lt,
    Select,
    Sub,
    SumAgg,
    TableRef,
    Transform,
    table_refs,
)
from .evaluate import conform, evaluate
from .infer import InferredColumn, infer_relation, infer_schema
from .parser import parse, parse_expr, print_expr, print_transform

__all__ = [
    "Aggregate", "Alias", "And", "Cast", "ColRef", "Expr", "Filter", "IsNotNull", "Join", "Lit", "Lt",
    "Select", "Sub", "SumAgg", "TableRef", "Transform", "table_refs", "conform", "evaluate",
    "InferredColumn", "infer_relation", "infer_schema", "parse", "parse_expr", "print_expr",
    "print_transform",
]
