"""Canonical source emission for syntax trees.

Printing is format-normalizing, not byte-preserving: four-space indents, one
statement per line, transform chains on a single line, attached comments on
their own line above the statement.  The contract is that reparsing the
output yields a structurally identical tree.
"""

from __future__ import annotations

from typing import Any

from .evaluate import RangeValue
from .nodes import (
    AstNode,
    BinOp,
    BoolLit,
    Ident,
    Neg,
    Num,
    RangeExpr,
    SourceFile,
    SyntaxTree,
    Vec,
)

INDENT = "    "


def format_number(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def expr_text(e: Any) -> str:
    """Render an argument expression (or plain value) back to source text."""
    if isinstance(e, bool):
        return "true" if e else "false"
    if isinstance(e, (int, float)):
        return format_number(float(e))
    if isinstance(e, list):
        return "[" + ", ".join(expr_text(x) for x in e) + "]"
    if isinstance(e, Num):
        return format_number(e.value)
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, Ident):
        return e.name
    if isinstance(e, Vec):
        return "[" + ", ".join(expr_text(x) for x in e.items) + "]"
    if isinstance(e, RangeExpr):
        if e.step is not None:
            return f"[{expr_text(e.start)} : {expr_text(e.step)} : {expr_text(e.end)}]"
        return f"[{expr_text(e.start)} : {expr_text(e.end)}]"
    if isinstance(e, RangeValue):
        if e.step != 1.0:
            return f"[{format_number(e.start)} : {format_number(e.step)} : {format_number(e.end)}]"
        return f"[{format_number(e.start)} : {format_number(e.end)}]"
    if isinstance(e, Neg):
        return "-" + _paren_if(e.operand, ("BinOp",))
    if isinstance(e, BinOp):
        left = _paren_if(e.left, _LOWER[e.op])
        right = _paren_if(e.right, _LOWER_RIGHT[e.op])
        return f"{left} {e.op} {right}"
    raise TypeError(f"cannot print {type(e).__name__}")


# operand types requiring parentheses under each operator
_LOWER = {"+": (), "-": (), "*": ("+-",), "/": ("+-",)}
_LOWER_RIGHT = {"+": (), "-": ("+-",), "*": ("+-",), "/": ("+-", "*/")}


def _paren_if(e: Any, groups: tuple) -> str:
    text = expr_text(e)
    if isinstance(e, BinOp):
        for g in groups:
            if g == "BinOp" or e.op in g:
                return f"({text})"
    if isinstance(e, Neg) and groups:
        return f"({text})"
    return text


def _call_args(node: AstNode) -> str:
    params = node.params
    if "args" in params or "kwargs" in params:
        parts = [expr_text(a) for a in params.get("args", [])]
        parts += [f"{k}={expr_text(v)}" for k, v in params.get("kwargs", {}).items()]
        return ", ".join(parts)
    name = node.name
    if name == "cube":
        out = [expr_text(params["size"])]
        if params.get("center"):
            out.append("center=true")
        return ", ".join(out)
    if name == "sphere":
        return f"r={expr_text(params['r'])}"
    if name == "cylinder":
        out = [f"h={expr_text(params['h'])}"]
        if params["r1"] == params["r2"]:
            out.append(f"r={expr_text(params['r1'])}")
        else:
            out.append(f"r1={expr_text(params['r1'])}")
            out.append(f"r2={expr_text(params['r2'])}")
        if params.get("center"):
            out.append("center=true")
        return ", ".join(out)
    if name in ("translate", "scale", "mirror"):
        return expr_text(params["v"])
    if name == "rotate":
        if "v" in params:
            return f"a={expr_text(params['a'])}, v={expr_text(params['v'])}"
        return expr_text(params["a"])
    if name == "multmatrix":
        return f"m={expr_text(params['m'])}"
    return ""


def _comment_lines(pad: str, comments: list[str]) -> list[str]:
    out = []
    for c in comments:
        for line in c.splitlines() or [""]:
            out.append(f"{pad}// {line.strip()}".rstrip())
    return out


def node_lines(tree: SyntaxTree, node_id: int, indent: int) -> list[str]:
    node = tree.nodes[node_id]
    pad = INDENT * indent
    lines = _comment_lines(pad, node.comments)
    if node.kind == "assign":
        lines.append(f"{pad}{node.name} = {expr_text(node.params['value'])};")
        return lines
    if node.kind == "module_def":
        formals = []
        for pname, default in node.params["params"]:
            formals.append(pname if default is None else f"{pname}={expr_text(default)}")
        lines.append(f"{pad}module {node.name}({', '.join(formals)}) {{")
        for c in node.children:
            lines.extend(node_lines(tree, c, indent + 1))
        lines.append(f"{pad}}}")
        return lines
    if node.kind == "for":
        head = f"{pad}for ({node.params['var']} = {expr_text(node.params['range'])})"
        return lines + _with_children(tree, node, head, indent)
    if node.kind == "primitive":
        lines.append(f"{pad}{node.name}({_call_args(node)});")
        return lines
    if node.kind == "module_call":
        lines.append(f"{pad}{node.name}({_call_args(node)});")
        return lines
    if node.kind == "transform":
        head = f"{pad}{node.name}({_call_args(node)})"
        return lines + _with_children(tree, node, head, indent, chain_single=True)
    if node.kind in ("boolean", "hull"):
        head = f"{pad}{node.name}({_call_args(node)})"
        return lines + _with_children(tree, node, head, indent)
    if node.kind == "root":
        out = []
        for c in node.children:
            out.extend(node_lines(tree, c, indent))
        out.extend(_comment_lines(pad, node.comments))
        return out
    raise TypeError(f"cannot print node kind {node.kind!r}")


def _with_children(tree: SyntaxTree, node: AstNode, head: str, indent: int,
                   chain_single: bool = False) -> list[str]:
    if not node.children:
        return [head + " {}"]
    only = tree.nodes[node.children[0]] if len(node.children) == 1 else None
    if only is not None and (chain_single or node.kind == "for") and not only.comments:
        child_lines = node_lines(tree, only.id, indent)
        return [f"{head} {child_lines[0].lstrip()}"] + child_lines[1:]
    lines = [head + " {"]
    for c in node.children:
        lines.extend(node_lines(tree, c, indent + 1))
    lines.append(INDENT * indent + "}")
    return lines


def pretty_print(tree: SyntaxTree) -> SourceFile:
    lines = node_lines(tree, tree.root, 0)
    for name, value in tree.special_vars.items():
        if not any(n.kind == "assign" and n.name == name for n in tree.walk()):
            lines.insert(0, f"{name} = {expr_text(value)};")
    text = "\n".join(lines) + ("\n" if lines else "")
    return SourceFile.from_text(text, tree.source.path)
