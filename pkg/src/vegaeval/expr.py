"""Parser and evaluator for the supported Vega expression subset.

Supported grammar: ``datum.field`` / ``datum['field']`` references, numeric,
string, boolean and null literals, arithmetic (``+ - * /``), comparisons
(``== != === !== < <= > >=``), boolean ``&& || !`` and parentheses.

Evaluation uses null propagation: a null operand yields null, except that
``&&`` / ``||`` / ``!`` follow three-valued logic so that e.g.
``false && null`` is still false.  Callers treat a null predicate as
non-matching.
"""

from __future__ import annotations

import datetime as _dt
import json
import re
from dataclasses import dataclass

from .errors import MalformedDocument, TypeMismatch, UnknownField

# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Literal:
    value: object  # int | float | str | bool | None


@dataclass(frozen=True)
class Field:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "!" or "-"
    operand: "ExpressionAst"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "ExpressionAst"
    right: "ExpressionAst"


ExpressionAst = Literal | Field | Unary | Binary

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER_RE = re.compile(r"\d+(\.\d+)?([eE][+-]?\d+)?")

# Multi-character operators first so "===" wins over "==".
_OPERATORS = (
    "===", "!==", "==", "!=", "<=", ">=", "&&", "||",
    "<", ">", "+", "-", "*", "/", "!", "(", ")", "[", "]", ".",
)


def _tokenize(source: str) -> list[tuple[str, object]]:
    tokens: list[tuple[str, object]] = []
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "'\"":
            j = i + 1
            buf = []
            while j < n and source[j] != ch:
                if source[j] == "\\" and j + 1 < n:
                    buf.append(source[j + 1])
                    j += 2
                else:
                    buf.append(source[j])
                    j += 1
            if j >= n:
                raise MalformedDocument(f"unterminated string in expression: {source!r}")
            tokens.append(("string", "".join(buf)))
            i = j + 1
            continue
        m = _NUMBER_RE.match(source, i)
        if m:
            text = m.group(0)
            value = float(text) if ("." in text or "e" in text or "E" in text) else int(text)
            tokens.append(("number", value))
            i = m.end()
            continue
        m = _IDENT_RE.match(source, i)
        if m:
            tokens.append(("ident", m.group(0)))
            i = m.end()
            continue
        for op in _OPERATORS:
            if source.startswith(op, i):
                tokens.append(("op", op))
                i += len(op)
                break
        else:
            raise MalformedDocument(f"unexpected character {ch!r} in expression: {source!r}")
    tokens.append(("end", None))
    return tokens


class _Parser:
    def __init__(self, tokens: list[tuple[str, object]], source: str):
        self.tokens = tokens
        self.pos = 0
        self.source = source

    def peek(self) -> tuple[str, object]:
        return self.tokens[self.pos]

    def next(self) -> tuple[str, object]:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str) -> None:
        kind, value = self.next()
        if kind != "op" or value != op:
            raise MalformedDocument(f"expected {op!r} in expression: {self.source!r}")

    def parse(self) -> ExpressionAst:
        node = self.parse_or()
        if self.peek()[0] != "end":
            raise MalformedDocument(f"trailing tokens in expression: {self.source!r}")
        return node

    def parse_or(self) -> ExpressionAst:
        node = self.parse_and()
        while self.peek() == ("op", "||"):
            self.next()
            node = Binary("||", node, self.parse_and())
        return node

    def parse_and(self) -> ExpressionAst:
        node = self.parse_not()
        while self.peek() == ("op", "&&"):
            self.next()
            node = Binary("&&", node, self.parse_not())
        return node

    def parse_not(self) -> ExpressionAst:
        if self.peek() == ("op", "!"):
            self.next()
            return Unary("!", self.parse_not())
        return self.parse_comparison()

    def parse_comparison(self) -> ExpressionAst:
        node = self.parse_additive()
        kind, value = self.peek()
        if kind == "op" and value in ("==", "!=", "===", "!==", "<", "<=", ">", ">="):
            self.next()
            node = Binary(str(value), node, self.parse_additive())
        return node

    def parse_additive(self) -> ExpressionAst:
        node = self.parse_multiplicative()
        while self.peek()[0] == "op" and self.peek()[1] in ("+", "-"):
            op = str(self.next()[1])
            node = Binary(op, node, self.parse_multiplicative())
        return node

    def parse_multiplicative(self) -> ExpressionAst:
        node = self.parse_unary()
        while self.peek()[0] == "op" and self.peek()[1] in ("*", "/"):
            op = str(self.next()[1])
            node = Binary(op, node, self.parse_unary())
        return node

    def parse_unary(self) -> ExpressionAst:
        if self.peek() == ("op", "-"):
            self.next()
            return Unary("-", self.parse_unary())
        return self.parse_primary()

    def parse_primary(self) -> ExpressionAst:
        kind, value = self.next()
        if kind == "number":
            return Literal(value)
        if kind == "string":
            return Literal(value)
        if kind == "ident":
            if value == "true":
                return Literal(True)
            if value == "false":
                return Literal(False)
            if value == "null":
                return Literal(None)
            if value == "datum":
                return self.parse_field_access()
            raise MalformedDocument(f"unknown identifier {value!r} in expression: {self.source!r}")
        if kind == "op" and value == "(":
            node = self.parse_or()
            self.expect_op(")")
            return node
        raise MalformedDocument(f"unexpected token in expression: {self.source!r}")

    def parse_field_access(self) -> ExpressionAst:
        kind, value = self.next()
        if (kind, value) == ("op", "."):
            kind, name = self.next()
            if kind != "ident":
                raise MalformedDocument(f"expected field name after 'datum.': {self.source!r}")
            return Field(str(name))
        if (kind, value) == ("op", "["):
            kind, name = self.next()
            if kind != "string":
                raise MalformedDocument(f"expected quoted field in datum[...]: {self.source!r}")
            self.expect_op("]")
            return Field(str(name))
        raise MalformedDocument(f"'datum' must be followed by a field access: {self.source!r}")


def parse_expression(source: str) -> ExpressionAst:
    """Parse an expression string into an AST, or raise MalformedDocument."""
    if not isinstance(source, str) or not source.strip():
        raise MalformedDocument("expression must be a non-empty string")
    return _Parser(_tokenize(source), source).parse()


# ---------------------------------------------------------------------------
# Canonical serialization
# ---------------------------------------------------------------------------


def canonical_text(node: ExpressionAst) -> str:
    """Deterministic single-form rendering used for equality comparison."""
    if isinstance(node, Literal):
        if node.value is None:
            return "null"
        if node.value is True:
            return "true"
        if node.value is False:
            return "false"
        if isinstance(node.value, str):
            return json.dumps(node.value)
        return repr(node.value)
    if isinstance(node, Field):
        if _IDENT_RE.fullmatch(node.name):
            return f"datum.{node.name}"
        return f"datum[{json.dumps(node.name)}]"
    if isinstance(node, Unary):
        return f"({node.op}{canonical_text(node.operand)})"
    return f"({canonical_text(node.left)} {node.op} {canonical_text(node.right)})"


def rename_fields(node: ExpressionAst, renames: dict[str, str]) -> ExpressionAst:
    if isinstance(node, Field):
        return Field(renames.get(node.name, node.name))
    if isinstance(node, Unary):
        return Unary(node.op, rename_fields(node.operand, renames))
    if isinstance(node, Binary):
        return Binary(node.op, rename_fields(node.left, renames), rename_fields(node.right, renames))
    return node


def referenced_fields(node: ExpressionAst) -> set[str]:
    if isinstance(node, Field):
        return {node.name}
    if isinstance(node, Unary):
        return referenced_fields(node.operand)
    if isinstance(node, Binary):
        return referenced_fields(node.left) | referenced_fields(node.right)
    return set()


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def _is_number(value: object) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _require_bool(value: object, op: str) -> object:
    if value is None or isinstance(value, bool):
        return value
    raise TypeMismatch(f"operator {op!r} needs boolean operands, got {type(value).__name__}")


def eval_expression(node: ExpressionAst, row: dict) -> object:
    """Evaluate an AST against one row (a column-name -> value mapping)."""
    if isinstance(node, Literal):
        return node.value
    if isinstance(node, Field):
        if node.name not in row:
            raise UnknownField(f"expression references unknown field {node.name!r}")
        return row[node.name]
    if isinstance(node, Unary):
        value = eval_expression(node.operand, row)
        if node.op == "!":
            value = _require_bool(value, "!")
            return None if value is None else not value
        if value is None:
            return None
        if not _is_number(value):
            raise TypeMismatch(f"unary '-' needs a number, got {type(value).__name__}")
        return -value
    return _eval_binary(node, row)


def _eval_binary(node: Binary, row: dict) -> object:
    op = node.op
    if op in ("&&", "||"):
        left = _require_bool(eval_expression(node.left, row), op)
        # Kleene logic: a definite dominant operand decides regardless of null.
        if op == "&&" and left is False:
            return False
        if op == "||" and left is True:
            return True
        right = _require_bool(eval_expression(node.right, row), op)
        if op == "&&":
            if right is False:
                return False
            return None if (left is None or right is None) else True
        if right is True:
            return True
        return None if (left is None or right is None) else False

    left = eval_expression(node.left, row)
    right = eval_expression(node.right, row)
    if left is None or right is None:
        return None

    if op in ("+", "-", "*", "/"):
        if not (_is_number(left) and _is_number(right)):
            raise TypeMismatch(f"arithmetic {op!r} needs numbers, got "
                               f"{type(left).__name__} and {type(right).__name__}")
        if op == "+":
            return left + right
        if op == "-":
            return left - right
        if op == "*":
            return left * right
        return None if right == 0 else left / right

    if op in ("==", "==="):
        return _comparable(left, right) and left == right
    if op in ("!=", "!=="):
        return not (_comparable(left, right) and left == right)

    # Ordered comparisons require like-typed operands.
    if _is_number(left) and _is_number(right):
        pass
    elif isinstance(left, str) and isinstance(right, str):
        pass
    elif isinstance(left, _dt.date) and isinstance(right, _dt.date):
        pass
    else:
        raise TypeMismatch(f"cannot order {type(left).__name__} against {type(right).__name__}")
    if op == "<":
        return left < right
    if op == "<=":
        return left <= right
    if op == ">":
        return left > right
    return left >= right


def _comparable(left: object, right: object) -> bool:
    if _is_number(left) and _is_number(right):
        return True
    return type(left) is type(right)
