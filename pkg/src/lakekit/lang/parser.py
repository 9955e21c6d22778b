"""Lexer, recursive-descent parser and printer for the transform language.

Grammar (keywords are case-insensitive)::

    query   := SELECT ('*' | item (',' item)*) FROM source
               [JOIN source ON ident (',' ident)*]
               [WHERE expr] [GROUP BY ident (',' ident)*]
    source  := ident | '(' query ')'
    item    := expr [AS ident]
    expr    := lt (AND lt)*
    lt      := isnn ['<' isnn]
    isnn    := sub (IS NOT NULL)*
    sub     := primary ('-' primary)*
    primary := INT | FLOAT | STRING | TRUE | FALSE | NULL ['(' type ')']
             | TIMESTAMP STRING | CAST '(' expr AS type ')' | SUM '(' expr ')'
             | ident | '(' expr ')'
    type    := (string | int64 | float64 | bool | timestamp) ['?']

Identifiers are ``[A-Za-z0-9_]+`` (not a number, not a keyword) or
double-quoted. ``--`` starts a comment running to the end of the line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import TransformSyntaxError
from ..schema import BASE_TYPES, ColumnType, format_timestamp, parse_timestamp
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
    has_sum,
    unalias,
)

KEYWORDS = frozenset(
    "select from where join on group by as cast is not null sum and true false timestamp".split()
)

_FLOAT = re.compile(r"-?(?:\d+\.\d*(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+)(?![A-Za-z0-9_])")
_INT = re.compile(r"-?\d+(?![A-Za-z0-9_])")
_IDENT = re.compile(r"[A-Za-z0-9_]+")
_PUNCT = {"(", ")", ",", "*", "-", "<", "?", ";"}


@dataclass(frozen=True)
class Token:
    kind: str  # ident, kw, int, float, string, op, eof
    value: object
    line: int
    col: int
    text: str


def tokenize(source: str, line: int = 1, col: int = 1) -> list[Token]:
    tokens: list[Token] = []
    i, n = 0, len(source)

    def operand_before() -> bool:
        if not tokens:
            return False
        t = tokens[-1]
        if t.kind in ("ident", "int", "float", "string"):
            return True
        if t.kind == "kw" and t.value in ("true", "false", "null"):
            return True
        return t.kind == "op" and t.value == ")"

    while i < n:
        ch = source[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if source.startswith("--", i):
            while i < n and source[i] != "\n":
                i += 1
                col += 1
            continue
        start_line, start_col = line, col
        negative_ok = ch == "-" and i + 1 < n and source[i + 1].isdigit() and not operand_before()
        if ch.isdigit() or negative_ok:
            m = _FLOAT.match(source, i)
            if m:
                tokens.append(Token("float", float(m.group()), start_line, start_col, m.group()))
            else:
                m = _INT.match(source, i)
                if m:
                    tokens.append(Token("int", int(m.group()), start_line, start_col, m.group()))
            if m:
                col += m.end() - i
                i = m.end()
                continue
        if ch == "_" or ch.isalnum():
            m = _IDENT.match(source, i)
            word = m.group()
            if word.lower() in KEYWORDS:
                tokens.append(Token("kw", word.lower(), start_line, start_col, word))
            else:
                tokens.append(Token("ident", word, start_line, start_col, word))
            col += m.end() - i
            i = m.end()
            continue
        if ch in "'\"":
            quote = ch
            j = i + 1
            buf = []
            while True:
                if j >= n:
                    raise TransformSyntaxError(start_line, start_col, f"closing {quote}", "end of input")
                if source[j] == quote:
                    if j + 1 < n and source[j + 1] == quote:
                        buf.append(quote)
                        j += 2
                        continue
                    break
                buf.append(source[j])
                j += 1
            text = source[i : j + 1]
            kind = "string" if quote == "'" else "ident"
            tokens.append(Token(kind, "".join(buf), start_line, start_col, text))
            for c in text:
                if c == "\n":
                    line += 1
                    col = 1
                else:
                    col += 1
            i = j + 1
            continue
        if ch in _PUNCT:
            tokens.append(Token("op", ch, start_line, start_col, ch))
            i += 1
            col += 1
            continue
        raise TransformSyntaxError(line, col, "a token", ch)
    tokens.append(Token("eof", None, line, col, "end of input"))
    return tokens


class Parser:
    def __init__(self, source: str, line: int = 1, col: int = 1):
        self.tokens = tokenize(source, line, col)
        self.pos = 0

    # -- helpers -----------------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def error(self, expected: str):
        t = self.tok
        raise TransformSyntaxError(t.line, t.col, expected, t.text)

    def at_kw(self, word: str) -> bool:
        return self.tok.kind == "kw" and self.tok.value == word

    def at_op(self, op: str) -> bool:
        return self.tok.kind == "op" and self.tok.value == op

    def take_kw(self, word: str):
        if not self.at_kw(word):
            self.error(repr(word))
        self.pos += 1

    def take_op(self, op: str):
        if not self.at_op(op):
            self.error(repr(op))
        self.pos += 1

    def ident(self) -> str:
        if self.tok.kind != "ident":
            self.error("an identifier")
        value = self.tok.value
        self.pos += 1
        return value

    def ident_list(self) -> tuple[str, ...]:
        names = [self.ident()]
        while self.at_op(","):
            self.pos += 1
            names.append(self.ident())
        return tuple(names)

    # -- queries -----------------------------------------------------------------

    def parse(self) -> Transform:
        t = self.query()
        if self.at_op(";"):
            self.pos += 1
        if self.tok.kind != "eof":
            self.error("end of query")
        return t

    def query(self) -> Transform:
        self.take_kw("select")
        star = False
        items: list[Expr] = []
        if self.at_op("*"):
            self.pos += 1
            star = True
        else:
            items.append(self.item())
            while self.at_op(","):
                self.pos += 1
                items.append(self.item())
        self.take_kw("from")
        base = self.source()
        if self.at_kw("join"):
            self.pos += 1
            right = self.source()
            self.take_kw("on")
            base = Join(base, right, self.ident_list())
        if self.at_kw("where"):
            self.pos += 1
            base = Filter(base, self.expr())
        group_by = None
        if self.at_kw("group"):
            self.pos += 1
            self.take_kw("by")
            group_by = self.ident_list()
        if star:
            if group_by is not None:
                self.error("a column list (select * cannot be grouped)")
            if isinstance(base, TableRef):
                self.error("a column list (select * needs join or where)")
            return base
        if group_by is not None or any(has_sum(unalias(i)) and isinstance(unalias(i), SumAgg) for i in items):
            return Aggregate(base, group_by or (), tuple(items))
        return Select(base, tuple(items))

    def source(self) -> Transform:
        if self.at_op("("):
            self.pos += 1
            t = self.query()
            self.take_op(")")
            return t
        return TableRef(self.ident())

    def item(self) -> Expr:
        e = self.expr()
        if self.at_kw("as"):
            self.pos += 1
            return Alias(e, self.ident())
        return e

    # -- expressions -------------------------------------------------------------

    def expr(self) -> Expr:
        e = self.lt()
        while self.at_kw("and"):
            self.pos += 1
            e = And(e, self.lt())
        return e

    def lt(self) -> Expr:
        e = self.isnn()
        if self.at_op("<"):
            self.pos += 1
            e = Lt(e, self.isnn())
        return e

    def isnn(self) -> Expr:
        e = self.sub()
        while self.at_kw("is"):
            self.pos += 1
            self.take_kw("not")
            self.take_kw("null")
            e = IsNotNull(e)
        return e

    def sub(self) -> Expr:
        e = self.primary()
        while self.at_op("-"):
            self.pos += 1
            e = Sub(e, self.primary())
        return e

    def type_(self) -> ColumnType:
        t = self.tok
        if t.kind == "ident" and t.value in BASE_TYPES:
            base = t.value
        elif t.kind == "kw" and t.value == "timestamp":
            base = "timestamp"
        else:
            self.error("a type name")
        self.pos += 1
        nullable = False
        if self.at_op("?"):
            self.pos += 1
            nullable = True
        return ColumnType(base, nullable)

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "int":
            self.pos += 1
            if not -(2**63) <= t.value < 2**63:
                raise TransformSyntaxError(t.line, t.col, "an int64 literal", t.text)
            return Lit(t.value, ColumnType("int64"))
        if t.kind == "float":
            self.pos += 1
            if t.value in (float("inf"), float("-inf")):
                raise TransformSyntaxError(t.line, t.col, "a finite float literal", t.text)
            return Lit(t.value, ColumnType("float64"))
        if t.kind == "string":
            self.pos += 1
            return Lit(t.value, ColumnType("string"))
        if t.kind == "ident":
            self.pos += 1
            return ColRef(t.value)
        if t.kind == "op" and t.value == "(":
            self.pos += 1
            e = self.expr()
            self.take_op(")")
            return e
        if t.kind == "kw":
            if t.value in ("true", "false"):
                self.pos += 1
                return Lit(t.value == "true", ColumnType("bool"))
            if t.value == "null":
                self.pos += 1
                if self.at_op("("):
                    self.pos += 1
                    typ = self.type_().with_nullable(True)
                    self.take_op(")")
                    return Lit(None, typ)
                return Lit(None, ColumnType("string", True))
            if t.value == "timestamp":
                self.pos += 1
                s = self.tok
                if s.kind != "string":
                    self.error("a quoted ISO-8601 timestamp")
                try:
                    value = parse_timestamp(s.value)
                except ValueError:
                    raise TransformSyntaxError(s.line, s.col, "an ISO-8601 timestamp", s.text) from None
                self.pos += 1
                return Lit(value, ColumnType("timestamp"))
            if t.value == "cast":
                self.pos += 1
                self.take_op("(")
                e = self.expr()
                self.take_kw("as")
                typ = self.type_()
                self.take_op(")")
                return Cast(e, typ)
            if t.value == "sum":
                self.pos += 1
                self.take_op("(")
                e = self.expr()
                self.take_op(")")
                return SumAgg(e)
        self.error("an expression")


def parse(source: str, line: int = 1, col: int = 1) -> Transform:
    """Parse a transform; ``line``/``col`` offset diagnostics into a larger file."""
    return Parser(source, line, col).parse()


def parse_expr(source: str) -> Expr:
    p = Parser(source)
    e = p.expr()
    if p.tok.kind != "eof":
        p.error("end of expression")
    return e


# -- printing ------------------------------------------------------------------------


def quote_ident(name: str) -> str:
    plain = (
        _IDENT.fullmatch(name)
        and name.lower() not in KEYWORDS
        and not _INT.fullmatch(name)
        and not _FLOAT.fullmatch(name)
    )
    return name if plain else '"' + name.replace('"', '""') + '"'


def _lit(e: Lit) -> str:
    v, t = e.value, e.type
    if v is None:
        return "null" if t.base == "string" else f"null({t.base})"
    if t.base == "bool":
        return "true" if v else "false"
    if t.base == "int64":
        return str(v)
    if t.base == "float64":
        return repr(v)
    if t.base == "timestamp":
        return f"timestamp '{format_timestamp(v)}'"
    return "'" + v.replace("'", "''") + "'"


_PREC = {And: 1, Lt: 2, IsNotNull: 3, Sub: 4}


def print_expr(e: Expr, min_prec: int = 0) -> str:
    prec = _PREC.get(type(e), 5)
    if isinstance(e, And):
        s = f"{print_expr(e.left, 1)} and {print_expr(e.right, 2)}"
    elif isinstance(e, Lt):
        s = f"{print_expr(e.left, 3)} < {print_expr(e.right, 3)}"
    elif isinstance(e, IsNotNull):
        s = f"{print_expr(e.expr, 4)} is not null"
    elif isinstance(e, Sub):
        s = f"{print_expr(e.left, 4)} - {print_expr(e.right, 5)}"
    elif isinstance(e, ColRef):
        s = quote_ident(e.name)
    elif isinstance(e, Lit):
        s = _lit(e)
    elif isinstance(e, Cast):
        s = f"cast({print_expr(e.expr)} as {e.type})"
    elif isinstance(e, SumAgg):
        s = f"sum({print_expr(e.expr)})"
    elif isinstance(e, Alias):
        s = f"{print_expr(e.expr)} as {quote_ident(e.name)}"
        prec = 0
    else:
        raise TypeError(f"not an expression: {e!r}")
    return f"({s})" if prec < min_prec else s


def _source(t: Transform) -> str:
    if isinstance(t, TableRef):
        return quote_ident(t.name)
    return f"({print_transform(t)})"


def print_transform(t: Transform) -> str:
    """Render ``t`` so that ``parse(print_transform(t)) == t``."""
    if isinstance(t, TableRef):
        raise TypeError("a bare table reference is not a query")
    group_by = None
    if isinstance(t, (Select, Aggregate)):
        head = ", ".join(print_expr(i) for i in t.items)
        if isinstance(t, Aggregate) and t.group_by:
            group_by = t.group_by
        rest = t.input
    else:
        head = "*"
        rest = t
    where = None
    if isinstance(rest, Filter):
        where = rest.cond
        rest = rest.input
    if isinstance(rest, Join):
        frm = f"{_source(rest.left)} join {_source(rest.right)} on " + ", ".join(quote_ident(c) for c in rest.on)
    else:
        frm = _source(rest)
    out = f"select {head} from {frm}"
    if where is not None:
        out += f" where {print_expr(where)}"
    if group_by:
        out += " group by " + ", ".join(quote_ident(c) for c in group_by)
    return out
