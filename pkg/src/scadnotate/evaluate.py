"""Expression evaluation and tree expansion.

`expand` unrolls for-loops, inlines module calls, substitutes assigned
variables, and evaluates every argument expression to a plain value, yielding
a tree containing only primitive/transform/boolean/hull nodes under the root.
Nodes inlined from a module body take the call site's span; loop bodies keep
their own spans (so unrolled iterations share one span).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Optional

from .errors import EvalError
from .nodes import (
    AstNode,
    BinOp,
    BoolLit,
    Expr,
    Ident,
    Neg,
    Num,
    RangeExpr,
    SyntaxTree,
    Vec,
)

MAX_INLINE_DEPTH = 64


@dataclass(frozen=True)
class RangeValue:
    start: float
    step: float
    end: float

    def values(self) -> list[float]:
        if self.step == 0:
            return []
        out = []
        k = 0
        tol = 1e-9 * max(1.0, abs(self.step))
        while True:
            v = self.start + k * self.step
            if self.step > 0 and v > self.end + tol:
                break
            if self.step < 0 and v < self.end - tol:
                break
            out.append(v)
            k += 1
            if k > 1_000_000:
                raise EvalError(0, "range produces more than 1e6 iterations")
        return out


class _Scope:
    """One lexical frame: variable bindings plus locally visible module defs."""

    def __init__(self, parent: Optional["_Scope"] = None):
        self.parent = parent
        self.vars: dict[str, Any] = {}
        self.modules: dict[str, AstNode] = {}

    def lookup(self, name: str) -> Any:
        scope: Optional[_Scope] = self
        while scope is not None:
            if name in scope.vars:
                return scope.vars[name]
            scope = scope.parent
        raise KeyError(name)

    def lookup_module(self, name: str) -> tuple[AstNode, "_Scope"]:
        scope: Optional[_Scope] = self
        while scope is not None:
            if name in scope.modules:
                return scope.modules[name], scope
            scope = scope.parent
        raise KeyError(name)


def eval_expr(expr: Any, scope: Optional[_Scope], line: int) -> Any:
    """Evaluate an argument expression to a float / bool / nested list value.

    Plain Python values pass through unchanged, which makes re-expansion of an
    already expanded tree a no-op.
    """
    if isinstance(expr, bool):
        return expr
    if isinstance(expr, (int, float)):
        return _check_finite(float(expr), line)
    if isinstance(expr, list):
        return [eval_expr(x, scope, line) for x in expr]
    if isinstance(expr, Num):
        return _check_finite(expr.value, line)
    if isinstance(expr, BoolLit):
        return expr.value
    if isinstance(expr, Ident):
        if scope is None:
            raise EvalError(line, f"undefined variable '{expr.name}'")
        try:
            return scope.lookup(expr.name)
        except KeyError:
            raise EvalError(expr.line or line, f"undefined variable '{expr.name}'") from None
    if isinstance(expr, Vec):
        return [eval_expr(x, scope, line) for x in expr.items]
    if isinstance(expr, RangeExpr):
        start = _expect_number(eval_expr(expr.start, scope, line), line, "range start")
        end = _expect_number(eval_expr(expr.end, scope, line), line, "range end")
        step = 1.0
        if expr.step is not None:
            step = _expect_number(eval_expr(expr.step, scope, line), line, "range step")
        return RangeValue(start, step, end)
    if isinstance(expr, Neg):
        val = eval_expr(expr.operand, scope, line)
        if isinstance(val, list):
            return [_negate(v, line) for v in val]
        return _negate(val, line)
    if isinstance(expr, BinOp):
        return _binop(expr, scope, line)
    if isinstance(expr, RangeValue):
        return expr
    raise EvalError(line, f"cannot evaluate {type(expr).__name__}")


def _negate(v: Any, line: int) -> float:
    return -_expect_number(v, line, "operand of unary minus")


def _binop(expr: BinOp, scope: Optional[_Scope], line: int) -> Any:
    line = expr.line or line
    left = eval_expr(expr.left, scope, line)
    right = eval_expr(expr.right, scope, line)
    op = expr.op
    if isinstance(left, list) and isinstance(right, list):
        if op not in "+-" or len(left) != len(right):
            raise EvalError(line, f"vector operands not supported for '{op}'")
        f = (lambda a, b: a + b) if op == "+" else (lambda a, b: a - b)
        return [_check_finite(f(_expect_number(a, line, "vector item"),
                                _expect_number(b, line, "vector item")), line)
                for a, b in zip(left, right)]
    if isinstance(left, list) or isinstance(right, list):
        vec, num = (left, right) if isinstance(left, list) else (right, left)
        num = _expect_number(num, line, f"operand of '{op}'")
        if op == "*":
            return [_check_finite(_expect_number(v, line, "vector item") * num, line) for v in vec]
        if op == "/" and vec is left:
            if num == 0:
                raise EvalError(line, "division by zero")
            return [_check_finite(_expect_number(v, line, "vector item") / num, line) for v in vec]
        raise EvalError(line, f"vector operands not supported for '{op}'")
    a = _expect_number(left, line, f"operand of '{op}'")
    b = _expect_number(right, line, f"operand of '{op}'")
    if op == "+":
        return _check_finite(a + b, line)
    if op == "-":
        return _check_finite(a - b, line)
    if op == "*":
        return _check_finite(a * b, line)
    if op == "/":
        if b == 0:
            raise EvalError(line, "division by zero")
        return _check_finite(a / b, line)
    raise EvalError(line, f"unknown operator '{op}'")


def _expect_number(v: Any, line: int, what: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise EvalError(line, f"{what} must be a number, got {type(v).__name__}")
    return float(v)


def _check_finite(v: float, line: int) -> float:
    if not math.isfinite(v):
        raise EvalError(line, "expression evaluated to a non-finite number")
    return v


# --- canonical parameter extraction ---


def _get_arg(args: list, kwargs: dict, idx: int, name: str, default: Any = None) -> Any:
    if name in kwargs:
        return kwargs[name]
    if idx < len(args):
        return args[idx]
    return default


def _as_vec3(v: Any, line: int, what: str) -> list[float]:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return [float(v)] * 3
    if isinstance(v, list) and len(v) == 3:
        return [_expect_number(x, line, what) for x in v]
    raise EvalError(line, f"{what} must be a number or a 3-vector")


def _as_bool(v: Any, line: int, what: str) -> bool:
    if isinstance(v, bool):
        return v
    raise EvalError(line, f"{what} must be true or false")


def canonical_params(node: AstNode, scope: Optional[_Scope]) -> dict[str, Any]:
    """Evaluate a call node's arguments into its canonical parameter dict."""
    if "args" not in node.params and "kwargs" not in node.params:
        return dict(node.params)  # already canonical
    line = node.span[0]
    args = [eval_expr(a, scope, line) for a in node.params.get("args", [])]
    kwargs = {
        k: eval_expr(v, scope, line)
        for k, v in node.params.get("kwargs", {}).items()
        if not k.startswith("$")
    }
    name = node.name
    if name == "cube":
        size = _get_arg(args, kwargs, 0, "size", 1.0)
        center = _get_arg(args, kwargs, 1, "center", False)
        return {"size": _as_vec3(size, line, "cube size"),
                "center": _as_bool(center, line, "cube center")}
    if name == "sphere":
        r = _get_arg(args, kwargs, 0, "r", 1.0)
        return {"r": _expect_number(r, line, "sphere radius")}
    if name == "cylinder":
        h = _expect_number(_get_arg(args, kwargs, 0, "h", 1.0), line, "cylinder height")
        r1 = _get_arg(args, kwargs, 1, "r1", None)
        r2 = _get_arg(args, kwargs, 2, "r2", None)
        if "r" in kwargs:
            r = _expect_number(kwargs["r"], line, "cylinder radius")
            r1, r2 = r, r
        r1 = 1.0 if r1 is None else _expect_number(r1, line, "cylinder r1")
        r2 = r1 if r2 is None else _expect_number(r2, line, "cylinder r2")
        center = _as_bool(_get_arg(args, kwargs, 3, "center", False), line, "cylinder center")
        return {"h": h, "r1": r1, "r2": r2, "center": center}
    if name in ("translate", "mirror"):
        v = _get_arg(args, kwargs, 0, "v", None)
        if v is None:
            raise EvalError(line, f"{name} requires a vector argument")
        if name == "mirror" and isinstance(v, (int, float)):
            raise EvalError(line, "mirror requires a 3-vector")
        return {"v": _as_vec3(v, line, f"{name} vector")}
    if name == "scale":
        v = _get_arg(args, kwargs, 0, "v", None)
        if v is None:
            raise EvalError(line, "scale requires an argument")
        return {"v": _as_vec3(v, line, "scale factor")}
    if name == "rotate":
        a = _get_arg(args, kwargs, 0, "a", None)
        v = _get_arg(args, kwargs, 1, "v", None)
        if a is None:
            raise EvalError(line, "rotate requires an angle argument")
        if v is not None:
            return {"a": _expect_number(a, line, "rotation angle"),
                    "v": _as_vec3(v, line, "rotation axis")}
        if isinstance(a, list):
            return {"a": _as_vec3(a, line, "rotation angles")}
        return {"a": [0.0, 0.0, _expect_number(a, line, "rotation angle")]}
    if name == "multmatrix":
        m = _get_arg(args, kwargs, 0, "m", None)
        if not isinstance(m, list) or len(m) not in (3, 4):
            raise EvalError(line, "multmatrix requires a 3x4 or 4x4 matrix")
        rows = []
        for row in m[:3] if len(m) == 4 else m:
            if not isinstance(row, list) or len(row) != 4:
                raise EvalError(line, "multmatrix rows must have 4 entries")
            rows.append([_expect_number(x, line, "matrix entry") for x in row])
        return {"m": rows}
    if name in ("union", "difference", "intersection", "hull"):
        return {}
    # module calls keep evaluated args for binding
    return {"args": args, "kwargs": kwargs}


# --- expansion ---


class _Expander:
    def __init__(self, tree: SyntaxTree):
        self.tree = tree
        self.nodes: dict[int, AstNode] = {}
        self.next_id = 0

    def emit(self, kind: str, name: str, params: dict, span: tuple[int, int],
             comments: list[str]) -> AstNode:
        node = AstNode(self.next_id, kind, name, params, span, comments=list(comments))
        self.nodes[self.next_id] = node
        self.next_id += 1
        return node

    def expand_list(self, child_ids: list[int], scope: _Scope,
                    span_override: Optional[tuple[int, int]], depth: int) -> list[int]:
        # module definitions are visible anywhere in their statement list
        for cid in child_ids:
            child = self.tree.nodes[cid]
            if child.kind == "module_def":
                scope.modules[child.name] = child
        out: list[int] = []
        for cid in child_ids:
            out.extend(self.expand_node(self.tree.nodes[cid], scope, span_override, depth))
        return out

    def expand_node(self, node: AstNode, scope: _Scope,
                    span_override: Optional[tuple[int, int]], depth: int) -> list[int]:
        if depth > MAX_INLINE_DEPTH:
            raise EvalError(node.span[0], "module recursion depth exceeded")
        if node.kind == "assign":
            scope.vars[node.name] = eval_expr(node.params["value"], scope, node.span[0])
            return []
        if node.kind == "module_def":
            scope.modules[node.name] = node
            return []
        if node.kind == "for":
            rng = eval_expr(node.params["range"], scope, node.span[0])
            if not isinstance(rng, RangeValue):
                raise EvalError(node.span[0], "for-loop requires a [start:end] range")
            out: list[int] = []
            for value in rng.values():
                body_scope = _Scope(scope)
                body_scope.vars[node.params["var"]] = value
                out.extend(self.expand_list(node.children, body_scope, span_override, depth))
            return out
        if node.kind == "module_call":
            try:
                definition, def_scope = scope.lookup_module(node.name)
            except KeyError:
                raise EvalError(node.span[0], f"call to undefined module '{node.name}'") from None
            call_params = canonical_params(node, scope)
            body_scope = _Scope(def_scope)
            self._bind_params(definition, call_params, body_scope, scope, node.span[0])
            span = span_override or node.span
            return self.expand_list(definition.children, body_scope, span, depth + 1)
        # geometry nodes: primitive / transform / boolean / hull
        params = canonical_params(node, scope)
        span = span_override or node.span
        children = self.expand_list(node.children, _Scope(scope), span_override, depth)
        if node.kind != "primitive" and not children:
            return []  # a transform/boolean whose body expanded to nothing
        new = self.emit(node.kind, node.name, params, span, node.comments)
        new.children = children
        return [new.id]

    def _bind_params(self, definition: AstNode, call_params: dict, body_scope: _Scope,
                     call_scope: _Scope, line: int) -> None:
        formals: list[tuple[str, Optional[Expr]]] = definition.params["params"]
        args = call_params.get("args", [])
        kwargs = call_params.get("kwargs", {})
        if len(args) > len(formals):
            raise EvalError(line, f"module '{definition.name}' takes at most "
                                  f"{len(formals)} arguments")
        for i, (pname, default) in enumerate(formals):
            if i < len(args):
                body_scope.vars[pname] = args[i]
            elif pname in kwargs:
                body_scope.vars[pname] = kwargs[pname]
            elif default is not None:
                body_scope.vars[pname] = eval_expr(default, call_scope, line)
            else:
                raise EvalError(line, f"module '{definition.name}' missing argument '{pname}'")


def expand(tree: SyntaxTree, env: Optional[dict[str, Any]] = None) -> SyntaxTree:
    """Unroll loops, inline modules, substitute variables, evaluate arguments."""
    expander = _Expander(tree)
    root_src = tree.nodes[tree.root]
    scope = _Scope()
    if env:
        scope.vars.update(env)
    root = expander.emit("root", "", {}, root_src.span, root_src.comments)
    root.children = expander.expand_list(root_src.children, scope, None, 0)
    result = SyntaxTree(root=root.id, nodes=expander.nodes, source=tree.source,
                        special_vars=dict(tree.special_vars))
    return result
