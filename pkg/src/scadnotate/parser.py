"""Recursive-descent parser for the OpenSCAD subset.

Supported statements: primitive calls (cube, sphere, cylinder), transform
chains (translate, rotate, scale, mirror, multmatrix), booleans (union,
difference, intersection), hull, module definition/call, for-loops over
numeric ranges, and assignments.  Anything else is a ParseError with the set
of constructs that would have been accepted.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

from .errors import ParseError, UnknownIdentifierError
from .lexer import Token, tokenize
from .nodes import (
    BOOLEAN_NAMES,
    PRIMITIVE_NAMES,
    TRANSFORM_NAMES,
    AstNode,
    BinOp,
    BoolLit,
    Expr,
    Ident,
    Neg,
    Num,
    RangeExpr,
    SourceFile,
    SyntaxTree,
    Vec,
)

EXPR_START = {"expression", "NUMBER", "IDENT", "true", "false", "(", "[", "-"}


def parse(source: SourceFile) -> SyntaxTree:
    return _Parser(source).parse()


def parse_text(text: str, path: str = "<string>") -> SyntaxTree:
    return parse(SourceFile.from_text(text, path))


def parse_file(path: str | Path) -> SyntaxTree:
    p = Path(path)
    return parse(SourceFile.from_text(p.read_text(encoding="utf-8"), str(p)))


class _Parser:
    def __init__(self, source: SourceFile):
        self.source = source
        self.tokens, self.comments = tokenize(source)
        self.pos = 0
        self.nodes: dict[int, AstNode] = {}
        self.next_id = 0
        self.comment_cursor = 0
        self.special_vars: dict[str, object] = {}
        self.module_depth = 0

    # --- token helpers ---

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def expect(self, kind: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ParseError(tok.line, tok.col, {kind})
        return self.advance()

    def fail(self, expected: set[str]) -> ParseError:
        tok = self.peek()
        return ParseError(tok.line, tok.col, expected)

    # --- node helpers ---

    def make_node(self, kind: str, name: str, params: dict, start: int, end: int) -> AstNode:
        node = AstNode(self.next_id, kind, name, params, (start, end))
        self.nodes[self.next_id] = node
        self.next_id += 1
        return node

    def pending_comments(self) -> list[str]:
        """Comments lexed before the current token, not yet attached."""
        out = []
        while (
            self.comment_cursor < len(self.comments)
            and self.comments[self.comment_cursor].next_token <= self.pos
        ):
            out.append(self.comments[self.comment_cursor].text)
            self.comment_cursor += 1
        return out

    # --- grammar ---

    def parse(self) -> SyntaxTree:
        root = self.make_node("root", "", {}, 1, max(1, self.source.num_lines))
        children = self.statements(top_level=True)
        if self.peek().kind != "EOF":
            raise self.fail({"statement", "EOF"})
        root.children = [n.id for n in children]
        root.comments.extend(c.text for c in self.comments[self.comment_cursor :])
        tree = SyntaxTree(root=root.id, nodes=self.nodes, source=self.source,
                          special_vars=self.special_vars)
        self._check_module_calls(tree)
        return tree

    def statements(self, top_level: bool = False) -> list[AstNode]:
        out: list[AstNode] = []
        stop = {"EOF"} if top_level else {"}", "EOF"}
        while self.peek().kind not in stop:
            node = self.statement()
            if node is not None:
                out.append(node)
        return out

    def statement(self) -> Optional[AstNode]:
        comments = self.pending_comments()
        tok = self.peek()
        if tok.kind == ";":
            self.advance()
            return None
        if tok.kind == "KEYWORD" and tok.text == "module":
            node = self.module_def()
        elif tok.kind == "KEYWORD" and tok.text == "for":
            node = self.for_statement()
        elif tok.kind == "IDENT":
            if self.peek(1).kind == "=":
                node = self.assignment()
            elif self.peek(1).kind == "(":
                node = self.call_statement()
            else:
                raise self.fail({"=", "("})
        else:
            raise self.fail({"statement"})
        node.comments = comments + node.comments
        return node

    def assignment(self) -> AstNode:
        name_tok = self.expect("IDENT")
        self.expect("=")
        value = self.expression()
        end_tok = self.expect(";")
        node = self.make_node(
            "assign", name_tok.text, {"value": value}, name_tok.line, end_tok.line
        )
        if name_tok.text.startswith("$"):
            self.special_vars[name_tok.text] = value
        return node

    def module_def(self) -> AstNode:
        if self.module_depth >= 2:
            tok = self.peek()
            raise ParseError(
                tok.line, tok.col, {"statement"},
                "module definitions nested more than one level are not supported",
            )
        kw = self.advance()
        name_tok = self.expect("IDENT")
        self.expect("(")
        params: list[tuple[str, Optional[Expr]]] = []
        if self.peek().kind != ")":
            while True:
                pname = self.expect("IDENT").text
                default = None
                if self.peek().kind == "=":
                    self.advance()
                    default = self.expression()
                params.append((pname, default))
                if self.peek().kind == ",":
                    self.advance()
                    continue
                break
        self.expect(")")
        self.module_depth += 1
        children, end_line = self.child_statements()
        self.module_depth -= 1
        node = self.make_node(
            "module_def", name_tok.text, {"params": params}, kw.line, end_line
        )
        node.children = [c.id for c in children]
        return node

    def for_statement(self) -> AstNode:
        kw = self.advance()
        self.expect("(")
        var_tok = self.expect("IDENT")
        self.expect("=")
        rng = self.expression()
        self.expect(")")
        children, end_line = self.child_statements()
        if not children:
            raise ParseError(kw.line, kw.col, {"statement"}, "for-loop requires a body")
        node = self.make_node(
            "for", var_tok.text, {"var": var_tok.text, "range": rng}, kw.line, end_line
        )
        node.children = [c.id for c in children]
        return node

    def call_statement(self) -> AstNode:
        name_tok = self.expect("IDENT")
        name = name_tok.text
        args, kwargs = self.arguments()
        params = {"args": args, "kwargs": kwargs}
        if name in PRIMITIVE_NAMES:
            end_tok = self.expect(";")
            return self.make_node("primitive", name, params, name_tok.line, end_tok.line)
        if name in TRANSFORM_NAMES:
            children, end_line = self.child_statements()
            if not children:
                raise ParseError(
                    name_tok.line, name_tok.col, {"statement", "{"},
                    f"{name} requires at least one child",
                )
            node = self.make_node("transform", name, params, name_tok.line, end_line)
            node.children = [c.id for c in children]
            return node
        if name in BOOLEAN_NAMES or name == "hull":
            kind = "boolean" if name in BOOLEAN_NAMES else "hull"
            children, end_line = self.child_statements()
            node = self.make_node(kind, name, params, name_tok.line, end_line)
            node.children = [c.id for c in children]
            return node
        end_tok = self.expect(";")
        return self.make_node("module_call", name, params, name_tok.line, end_tok.line)

    def child_statements(self) -> tuple[list[AstNode], int]:
        """A `{ ... }` block or a single child statement; returns (children, end line)."""
        tok = self.peek()
        if tok.kind == "{":
            self.advance()
            children = self.statements()
            end_tok = self.expect("}")
            return children, end_tok.line
        if tok.kind == ";":
            end_tok = self.advance()
            return [], end_tok.line
        child = self.statement()
        if child is None:
            raise self.fail({"statement", "{"})
        return [child], child.span[1]

    # --- argument lists ---

    def arguments(self) -> tuple[list[Expr], dict[str, Expr]]:
        self.expect("(")
        args: list[Expr] = []
        kwargs: dict[str, Expr] = {}
        if self.peek().kind != ")":
            while True:
                if self.peek().kind == "IDENT" and self.peek(1).kind == "=":
                    key = self.advance().text
                    self.advance()
                    kwargs[key] = self.expression()
                else:
                    args.append(self.expression())
                if self.peek().kind == ",":
                    self.advance()
                    continue
                break
        self.expect(")")
        return args, kwargs

    # --- expressions ---

    def expression(self) -> Expr:
        return self.additive()

    def additive(self) -> Expr:
        left = self.multiplicative()
        while self.peek().kind in ("+", "-"):
            op = self.advance()
            right = self.multiplicative()
            left = BinOp(op.kind, left, right, op.line)
        return left

    def multiplicative(self) -> Expr:
        left = self.unary()
        while self.peek().kind in ("*", "/"):
            op = self.advance()
            right = self.unary()
            left = BinOp(op.kind, left, right, op.line)
        return left

    def unary(self) -> Expr:
        if self.peek().kind == "-":
            self.advance()
            return Neg(self.unary())
        return self.primary()

    def primary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "NUMBER":
            self.advance()
            return Num(tok.value)
        if tok.kind == "KEYWORD" and tok.text in ("true", "false"):
            self.advance()
            return BoolLit(tok.text == "true")
        if tok.kind == "IDENT":
            self.advance()
            return Ident(tok.text, tok.line)
        if tok.kind == "(":
            self.advance()
            inner = self.expression()
            self.expect(")")
            return inner
        if tok.kind == "[":
            return self.vector_or_range()
        raise self.fail(EXPR_START)

    def vector_or_range(self) -> Expr:
        self.expect("[")
        if self.peek().kind == "]":
            self.advance()
            return Vec(())
        first = self.expression()
        if self.peek().kind == ":":
            self.advance()
            second = self.expression()
            if self.peek().kind == ":":
                self.advance()
                third = self.expression()
                self.expect("]")
                return RangeExpr(start=first, step=second, end=third)
            self.expect("]")
            return RangeExpr(start=first, end=second)
        items = [first]
        while self.peek().kind == ",":
            self.advance()
            items.append(self.expression())
        self.expect("]")
        return Vec(tuple(items))

    # --- validation ---

    def _check_module_calls(self, tree: SyntaxTree) -> None:
        defined = {n.name for n in tree.walk() if n.kind == "module_def"}
        for node in tree.walk():
            if node.kind == "module_call" and node.name not in defined:
                raise UnknownIdentifierError(node.span[0], node.name)
