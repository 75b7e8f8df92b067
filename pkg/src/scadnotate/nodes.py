"""Syntax tree node types for the OpenSCAD subset.

A parsed tree stores argument expressions unevaluated; expansion replaces them
with plain Python values (floats, lists, bools).  Node spans are 1-based
inclusive (start_line, end_line) into the originating source file.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass, field
from typing import Any, Iterator, Optional

PRIMITIVE_NAMES = ("cube", "sphere", "cylinder")
TRANSFORM_NAMES = ("translate", "rotate", "scale", "mirror", "multmatrix")
BOOLEAN_NAMES = ("union", "difference", "intersection")


@dataclass(frozen=True)
class SourceFile:
    """A CAD program as raw text plus an index of line-start offsets."""

    path: str
    text: str
    line_index: tuple[int, ...] = ()

    @staticmethod
    def from_text(text: str, path: str = "<string>") -> "SourceFile":
        offsets = [0]
        for i, ch in enumerate(text):
            if ch == "\n":
                offsets.append(i + 1)
        return SourceFile(path=path, text=text, line_index=tuple(offsets))

    def line_of_offset(self, offset: int) -> int:
        """1-based line number containing the character at `offset`."""
        return bisect.bisect_right(self.line_index, offset)

    def line(self, number: int) -> str:
        """Text of 1-based line `number`, without the trailing newline."""
        start = self.line_index[number - 1]
        end = self.line_index[number] - 1 if number < len(self.line_index) else len(self.text)
        return self.text[start:end]

    @property
    def num_lines(self) -> int:
        if not self.text:
            return 0
        return len(self.line_index) if not self.text.endswith("\n") else len(self.line_index) - 1


# --- expression trees (pre-expansion arguments) ---


class Expr:
    """Base class for unevaluated argument expressions."""

    __slots__ = ()


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool


@dataclass(frozen=True)
class Ident(Expr):
    name: str
    line: int = 0

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Ident) and other.name == self.name

    def __hash__(self) -> int:
        return hash(("Ident", self.name))


@dataclass(frozen=True)
class Vec(Expr):
    items: tuple[Expr, ...]


@dataclass(frozen=True)
class RangeExpr(Expr):
    start: Expr
    end: Expr
    step: Optional[Expr] = None


@dataclass(frozen=True)
class BinOp(Expr):
    op: str  # one of + - * /
    left: Expr
    right: Expr
    line: int = 0

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, BinOp)
            and other.op == self.op
            and other.left == self.left
            and other.right == self.right
        )

    def __hash__(self) -> int:
        return hash(("BinOp", self.op, self.left, self.right))


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr


# --- statement nodes ---


@dataclass
class AstNode:
    """One statement-level node: primitive, transform, boolean, hull, etc.

    `kind` is the structural category; `name` the concrete operation (e.g.
    kind="primitive", name="cube") or the module name for defs/calls.
    """

    id: int
    kind: str  # primitive|transform|boolean|hull|module_def|module_call|for|assign|root
    name: str
    params: dict[str, Any]
    span: tuple[int, int]
    children: list[int] = field(default_factory=list)
    comments: list[str] = field(default_factory=list)

    def label(self) -> str:
        return f"{self.kind}:{self.name}" if self.name else self.kind


@dataclass
class SyntaxTree:
    root: int
    nodes: dict[int, AstNode]
    source: SourceFile
    special_vars: dict[str, Any] = field(default_factory=dict)

    def node(self, node_id: int) -> AstNode:
        return self.nodes[node_id]

    def children(self, node_id: int) -> list[AstNode]:
        return [self.nodes[c] for c in self.nodes[node_id].children]

    def walk(self, start: Optional[int] = None) -> Iterator[AstNode]:
        """Depth-first pre-order traversal."""
        stack = [self.root if start is None else start]
        while stack:
            node = self.nodes[stack.pop()]
            yield node
            stack.extend(reversed(node.children))

    def is_expanded(self) -> bool:
        return not any(
            n.kind in ("for", "module_def", "module_call", "assign") for n in self.walk()
        )

    def parent_map(self) -> dict[int, int]:
        parents: dict[int, int] = {}
        for node in self.walk():
            for c in node.children:
                parents[c] = node.id
        return parents

    def signature(self, node_id: Optional[int] = None) -> tuple:
        """Structural identity ignoring spans, ids, and comments."""
        node = self.nodes[self.root if node_id is None else node_id]
        params = tuple(
            (k, _sig_value(node.params[k])) for k in sorted(node.params)
        )
        return (
            node.kind,
            node.name,
            params,
            tuple(self.signature(c) for c in node.children),
        )

    def to_json(self) -> str:
        items = []
        for node_id in sorted(self.nodes):
            n = self.nodes[node_id]
            items.append(
                {
                    "id": n.id,
                    "kind": n.label(),
                    "params": {k: _json_value(v) for k, v in n.params.items()},
                    "span": list(n.span),
                    "children": list(n.children),
                }
            )
        return json.dumps({"root": self.root, "nodes": items}, indent=2, sort_keys=True)


def _sig_value(v: Any) -> Any:
    if isinstance(v, list) or isinstance(v, tuple):
        return tuple(_sig_value(x) for x in v)
    if isinstance(v, dict):
        return tuple((k, _sig_value(v[k])) for k in sorted(v))
    return v


def _json_value(v: Any) -> Any:
    if isinstance(v, Expr):
        from .printer import expr_text

        return expr_text(v)
    if isinstance(v, list):
        return [_json_value(x) for x in v]
    return v


def structurally_equal(a: SyntaxTree, b: SyntaxTree) -> bool:
    return a.signature() == b.signature()
