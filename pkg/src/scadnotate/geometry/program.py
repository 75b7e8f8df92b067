"""Compilation of an expanded syntax tree into a flat CSG evaluation program.

The tree is flattened into leaf tables (one row per primitive or hull node,
with transforms folded into a world-to-local affine per leaf) plus an RPN
opcode sequence over a boolean stack.  Both the compiled and the pure-numpy
kernels evaluate this same representation, so backend choice cannot change
results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import EvalError
from ..nodes import AstNode, SyntaxTree

# leaf kinds
K_CUBE, K_SPHERE, K_CYLINDER, K_HULL, K_EMPTY = 0, 1, 2, 3, 4
# opcodes
OP_PUSH, OP_UNION, OP_INTERSECT, OP_DIFFERENCE = 0, 1, 2, 3

MAX_STACK = 128
HULL_SAMPLES = 2048
SINGULAR_DET = 1e-12


@dataclass(frozen=True)
class AABB:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]
    empty: bool = False

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.lo) + np.asarray(self.hi)) / 2.0

    @property
    def size(self) -> np.ndarray:
        return np.asarray(self.hi) - np.asarray(self.lo)

    @property
    def diagonal(self) -> float:
        return 0.0 if self.empty else float(np.linalg.norm(self.size))

    def contains_point(self, p) -> bool:
        if self.empty:
            return False
        return bool(np.all(np.asarray(p) >= np.asarray(self.lo))
                    and np.all(np.asarray(p) <= np.asarray(self.hi)))


EMPTY_AABB = AABB((0.0, 0.0, 0.0), (0.0, 0.0, 0.0), empty=True)


def aabb_join(boxes: list[AABB]) -> AABB:
    live = [b for b in boxes if not b.empty]
    if not live:
        return EMPTY_AABB
    lo = np.min([b.lo for b in live], axis=0)
    hi = np.max([b.hi for b in live], axis=0)
    return AABB(tuple(lo), tuple(hi))


def aabb_intersect(boxes: list[AABB]) -> AABB:
    if any(b.empty for b in boxes) or not boxes:
        return EMPTY_AABB
    lo = np.max([b.lo for b in boxes], axis=0)
    hi = np.min([b.hi for b in boxes], axis=0)
    if np.any(lo > hi):
        return EMPTY_AABB
    return AABB(tuple(lo), tuple(hi))


@dataclass(frozen=True)
class ConvexPolytope:
    """Intersection of half-spaces {p : n·p <= d}, normals unit length."""

    half_spaces: tuple[tuple[tuple[float, float, float], float], ...]
    tolerance: float

    def contains_point(self, p, extra: float = 0.0) -> bool:
        p = np.asarray(p, dtype=float)
        for n, d in self.half_spaces:
            if float(np.dot(n, p)) > d + self.tolerance + extra:
                return False
        return True


# --- affine helpers ---


def _rot_xyz(deg: list[float]) -> np.ndarray:
    rx, ry, rz = (math.radians(a) for a in deg)
    cx, sx = math.cos(rx), math.sin(rx)
    cy, sy = math.cos(ry), math.sin(ry)
    cz, sz = math.cos(rz), math.sin(rz)
    mx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    my = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    mz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return mz @ my @ mx


def _rot_axis(deg: float, axis: list[float]) -> np.ndarray:
    v = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0:
        return np.eye(3)
    x, y, z = v / norm
    a = math.radians(deg)
    c, s = math.cos(a), math.sin(a)
    cc = 1 - c
    return np.array(
        [
            [c + x * x * cc, x * y * cc - z * s, x * z * cc + y * s],
            [y * x * cc + z * s, c + y * y * cc, y * z * cc - x * s],
            [z * x * cc - y * s, z * y * cc + x * s, c + z * z * cc],
        ]
    )


def transform_matrix(node: AstNode) -> np.ndarray:
    """3x4 affine [L|t] for a transform node with canonical params."""
    p = node.params
    m = np.zeros((3, 4))
    m[:, :3] = np.eye(3)
    if node.name == "translate":
        m[:, 3] = p["v"]
    elif node.name == "scale":
        m[:, :3] = np.diag(p["v"])
    elif node.name == "rotate":
        if "v" in p:
            m[:, :3] = _rot_axis(p["a"], p["v"])
        else:
            m[:, :3] = _rot_xyz(p["a"])
    elif node.name == "mirror":
        n = np.asarray(p["v"], dtype=float)
        nn = np.dot(n, n)
        if nn == 0:
            raise EvalError(node.span[0], "mirror normal must be nonzero")
        m[:, :3] = np.eye(3) - 2.0 * np.outer(n, n) / nn
    elif node.name == "multmatrix":
        m[:, :] = np.asarray(p["m"], dtype=float)
    else:
        raise EvalError(node.span[0], f"unknown transform '{node.name}'")
    return m


def compose(w: np.ndarray, local: np.ndarray) -> np.ndarray:
    out = np.zeros((3, 4))
    out[:, :3] = w[:, :3] @ local[:, :3]
    out[:, 3] = w[:, :3] @ local[:, 3] + w[:, 3]
    return out


IDENTITY = np.hstack([np.eye(3), np.zeros((3, 1))])


# --- surface sampling for hulls (deterministic, no RNG) ---

_GOLDEN = (1 + 5 ** 0.5) / 2


def _fibonacci_sphere(n: int, r: float) -> np.ndarray:
    i = np.arange(n, dtype=float)
    z = 1 - 2 * (i + 0.5) / n
    rho = np.sqrt(np.maximum(0.0, 1 - z * z))
    theta = 2 * math.pi * i / _GOLDEN
    return r * np.stack([rho * np.cos(theta), rho * np.sin(theta), z], axis=1)


def _ring(n: int, r: float, z: float) -> np.ndarray:
    theta = 2 * math.pi * np.arange(n) / max(n, 1)
    return np.stack([r * np.cos(theta), r * np.sin(theta), np.full(n, float(z))], axis=1)


def primitive_surface_points(node: AstNode, budget: int) -> np.ndarray:
    """Local-frame boundary samples sufficient to reconstruct the convex hull."""
    p = node.params
    if node.name == "cube":
        size = np.asarray(p["size"], dtype=float)
        lo = -size / 2 if p.get("center") else np.zeros(3)
        hi = lo + size
        corners = np.array([[x, y, z] for x in (lo[0], hi[0])
                            for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
        return corners
    if node.name == "sphere":
        return _fibonacci_sphere(max(budget, 64), p["r"])
    if node.name == "cylinder":
        h, r1, r2 = p["h"], p["r1"], p["r2"]
        z0 = -h / 2 if p.get("center") else 0.0
        m = max(budget // 2, 32)
        rings = [_ring(m, r1, z0), _ring(m, r2, z0 + h)]
        if r1 == 0:
            rings[0] = np.array([[0.0, 0.0, z0]])
        if r2 == 0:
            rings[1] = np.array([[0.0, 0.0, z0 + h]])
        return np.vstack(rings)
    raise EvalError(node.span[0], f"cannot sample surface of '{node.name}'")


# --- leaf-level conservative AABBs ---


def _box_world(w: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> AABB:
    center = (lo + hi) / 2
    half = (hi - lo) / 2
    wc = w[:, :3] @ center + w[:, 3]
    wh = np.abs(w[:, :3]) @ half
    return AABB(tuple(wc - wh), tuple(wc + wh))


def primitive_world_aabb(node: AstNode, w: np.ndarray) -> AABB:
    p = node.params
    if node.name == "cube":
        size = np.asarray(p["size"], dtype=float)
        lo = -size / 2 if p.get("center") else np.zeros(3)
        return _box_world(w, lo, lo + size)
    if node.name == "sphere":
        r = p["r"]
        c = w[:, 3]
        half = r * np.linalg.norm(w[:, :3], axis=1)
        return AABB(tuple(c - half), tuple(c + half))
    if node.name == "cylinder":
        h, r1, r2 = p["h"], p["r1"], p["r2"]
        z0 = -h / 2 if p.get("center") else 0.0
        rmax = max(r1, r2)
        lo = np.array([-rmax, -rmax, z0])
        hi = np.array([rmax, rmax, z0 + h])
        return _box_world(w, lo, hi)
    raise EvalError(node.span[0], f"no bounds for '{node.name}'")


# --- the compiled program ---


@dataclass
class ShapeProgram:
    leaf_kind: np.ndarray  # int32 [P]
    leaf_inv: np.ndarray  # float64 [P,12] world->local affine, row-major 3x4
    leaf_par: np.ndarray  # float64 [P,6]
    leaf_scale: np.ndarray  # float64 [P] world eps -> local eps factor
    leaf_sign: np.ndarray  # int8 [P] slack sign within owning block
    leaf_block: np.ndarray  # int32 [P] owning irreducible block (-1 none)
    leaf_node: np.ndarray  # int32 [P] source ast node id
    halfspaces: np.ndarray  # float64 [H,4]
    ops: np.ndarray  # int32 [M,2] full-shape program
    block_ops: np.ndarray  # int32 [Q,2] concatenated per-block programs
    block_ranges: np.ndarray  # int32 [B,2] (start,len) per block id
    max_stack: int = MAX_STACK


class _Compiler:
    def __init__(self, tree: SyntaxTree):
        self.tree = tree
        self.kind: list[int] = []
        self.inv: list[np.ndarray] = []
        self.par: list[list[float]] = []
        self.scale: list[float] = []
        self.sign: list[int] = []
        self.node_of_leaf: list[int] = []
        self.leaf_of_node: dict[int, int] = {}
        self.halfspaces: list[list[float]] = []
        self.world: dict[int, np.ndarray] = {}
        self.aabbs: dict[int, AABB] = {}
        self.polytopes: dict[int, ConvexPolytope] = {}
        self.warnings: list[str] = []

    # pass 1: create leaves, world transforms, per-node bounds
    def build_leaves(self, node_id: int, w: np.ndarray) -> AABB:
        node = self.tree.nodes[node_id]
        self.world[node_id] = w
        if node.kind == "primitive":
            box = self._add_primitive(node, w)
        elif node.kind == "transform":
            w2 = compose(w, transform_matrix(node))
            box = aabb_join([self.build_leaves(c, w2) for c in node.children])
        elif node.kind == "hull":
            box = self._add_hull(node, w)
        elif node.kind == "boolean" and node.name == "difference":
            children = [self.build_leaves(c, w) for c in node.children]
            box = children[0] if children else EMPTY_AABB
        elif node.kind == "boolean" and node.name == "intersection":
            box = aabb_intersect([self.build_leaves(c, w) for c in node.children])
        else:  # union or root
            box = aabb_join([self.build_leaves(c, w) for c in node.children])
        self.aabbs[node_id] = box
        return box

    # slack parity: leaves under an odd number of difference-subtrahend hops
    # within their own block must shrink (not grow) when the block is dilated
    def assign_signs(self, node_id: int, parity: int) -> None:
        node = self.tree.nodes[node_id]
        if node.id in self.leaf_of_node:
            self.sign[self.leaf_of_node[node.id]] = parity
        if node.kind == "boolean" and node.name == "difference":
            for i, c in enumerate(node.children):
                self.assign_signs(c, parity if i == 0 else -parity)
        elif node.kind != "hull":
            for c in node.children:
                self.assign_signs(c, parity)

    def _add_leaf(self, node: AstNode, kind: int, inv: np.ndarray, par: list[float],
                  scale: float) -> None:
        self.leaf_of_node[node.id] = len(self.kind)
        self.kind.append(kind)
        self.inv.append(inv.reshape(-1))
        par = list(par) + [0.0] * (6 - len(par))
        self.par.append(par)
        self.scale.append(scale)
        self.sign.append(1)
        self.node_of_leaf.append(node.id)

    def _add_primitive(self, node: AstNode, w: np.ndarray) -> AABB:
        lin = w[:, :3]
        det = float(np.linalg.det(lin))
        if abs(det) < SINGULAR_DET:
            self.warnings.append(
                f"line {node.span[0]}: singular transform on {node.name}; treated as empty"
            )
            self._add_leaf(node, K_EMPTY, IDENTITY, [], 1.0)
            return EMPTY_AABB
        inv_lin = np.linalg.inv(lin)
        inv = np.hstack([inv_lin, (-inv_lin @ w[:, 3]).reshape(3, 1)])
        scale = float(np.linalg.norm(inv_lin, 2))  # ||M^-1||_2 = 1/sigma_min(M)
        p = node.params
        if node.name == "cube":
            size = np.asarray(p["size"], dtype=float)
            half = size / 2
            center = np.zeros(3) if p.get("center") else half
            self._add_leaf(node, K_CUBE, inv, [*half, *center], scale)
        elif node.name == "sphere":
            self._add_leaf(node, K_SPHERE, inv, [p["r"]], scale)
        elif node.name == "cylinder":
            z0 = -p["h"] / 2 if p.get("center") else 0.0
            if p["h"] <= 0:
                raise EvalError(node.span[0], "cylinder height must be positive")
            self._add_leaf(node, K_CYLINDER, inv, [p["h"], p["r1"], p["r2"], z0], scale)
        else:
            raise EvalError(node.span[0], f"unknown primitive '{node.name}'")
        return primitive_world_aabb(node, w)

    def _add_hull(self, node: AstNode, w: np.ndarray) -> AABB:
        # world-frame samples of all child surfaces
        prims: list[tuple[AstNode, np.ndarray]] = []

        def walk(nid: int, wt: np.ndarray) -> None:
            n = self.tree.nodes[nid]
            self.world[nid] = wt
            if n.kind == "primitive":
                prims.append((n, wt))
                self.aabbs[nid] = primitive_world_aabb(n, wt)
            elif n.kind == "transform":
                w2 = compose(wt, transform_matrix(n))
                for c in n.children:
                    walk(c, w2)
                self.aabbs[nid] = aabb_join([self.aabbs[c] for c in n.children])
            else:
                raise EvalError(n.span[0], "hull supports only primitives and transforms")

        for c in node.children:
            walk(c, w)
        if not prims:
            self._add_leaf(node, K_EMPTY, IDENTITY, [], 1.0)
            return EMPTY_AABB
        budget = max(HULL_SAMPLES // len(prims), 16)
        pts = []
        for prim, wt in prims:
            local = primitive_surface_points(prim, budget)
            pts.append(local @ wt[:, :3].T + wt[:, 3])
        points = np.vstack(pts)
        box = aabb_join([self.aabbs[c] for c in node.children])
        tol = 1e-6 * max(box.diagonal, 1e-12)
        polytope = build_polytope(points, tol, self.warnings, node.span[0])
        start = len(self.halfspaces)
        self.halfspaces.extend([*hs[0], hs[1]] for hs in polytope.half_spaces)
        count = len(polytope.half_spaces)
        self._add_leaf(node, K_HULL, IDENTITY, [float(start), float(count), tol], 1.0)
        self.polytopes[node.id] = polytope
        return box

    # pass 2: opcode emission for any subtree
    def emit_ops(self, node_id: int, out: list[tuple[int, int]]) -> None:
        node = self.tree.nodes[node_id]
        if node.id in self.leaf_of_node:
            out.append((OP_PUSH, self.leaf_of_node[node.id]))
            return
        if node.kind == "transform":
            kids = node.children
            for c in kids:
                self.emit_ops(c, out)
            if len(kids) > 1:
                out.append((OP_UNION, len(kids)))
            return
        if node.kind == "boolean" or node.kind == "root":
            kids = node.children
            if not kids:
                out.append((OP_PUSH, self._false_leaf()))
                return
            for c in kids:
                self.emit_ops(c, out)
            if node.kind == "root" or node.name == "union":
                if len(kids) > 1:
                    out.append((OP_UNION, len(kids)))
            elif node.name == "intersection":
                if len(kids) > 1:
                    out.append((OP_INTERSECT, len(kids)))
            else:  # difference
                if len(kids) > 1:
                    out.append((OP_DIFFERENCE, len(kids)))
            return
        raise EvalError(node.span[0], f"cannot execute node kind '{node.kind}'")

    _false_idx: Optional[int] = None

    def _false_leaf(self) -> int:
        if self._false_idx is None:
            self._false_idx = len(self.kind)
            self.kind.append(K_EMPTY)
            self.inv.append(IDENTITY.reshape(-1))
            self.par.append([0.0] * 6)
            self.scale.append(1.0)
            self.sign.append(1)
            self.node_of_leaf.append(-1)
        return self._false_idx


def compile_tree(tree: SyntaxTree, block_roots: list[tuple[int, int]]):
    """Build the ShapeProgram plus per-node metadata for an expanded tree.

    block_roots lists (block_id, ast_node_id) for every irreducible block,
    with block ids forming 0..B-1; leaves under no block get -1.
    """
    comp = _Compiler(tree)
    comp.build_leaves(tree.root, IDENTITY)

    ops: list[tuple[int, int]] = []
    comp.emit_ops(tree.root, ops)

    block_of_node: dict[int, int] = {}
    for block_id, root_nid in block_roots:
        comp.assign_signs(root_nid, 1)
        for n in tree.walk(root_nid):
            block_of_node[n.id] = block_id

    n_blocks = len(block_roots)
    block_ops: list[tuple[int, int]] = []
    block_ranges = np.zeros((max(n_blocks, 1), 2), dtype=np.int32)
    for block_id, root_nid in sorted(block_roots):
        start = len(block_ops)
        comp.emit_ops(root_nid, block_ops)
        block_ranges[block_id] = (start, len(block_ops) - start)

    leaf_block = np.full(len(comp.kind), -1, dtype=np.int32)
    for i, nid in enumerate(comp.node_of_leaf):
        if nid >= 0:
            leaf_block[i] = block_of_node.get(nid, -1)

    program = ShapeProgram(
        leaf_kind=np.asarray(comp.kind, dtype=np.int32),
        leaf_inv=np.asarray(comp.inv, dtype=np.float64).reshape(len(comp.kind), 12),
        leaf_par=np.asarray(comp.par, dtype=np.float64).reshape(len(comp.kind), 6),
        leaf_scale=np.asarray(comp.scale, dtype=np.float64),
        leaf_sign=np.asarray(comp.sign, dtype=np.int8),
        leaf_block=leaf_block,
        leaf_node=np.asarray(comp.node_of_leaf, dtype=np.int32),
        halfspaces=np.asarray(comp.halfspaces, dtype=np.float64).reshape(-1, 4),
        ops=np.asarray(ops, dtype=np.int32).reshape(-1, 2),
        block_ops=np.asarray(block_ops, dtype=np.int32).reshape(-1, 2),
        block_ranges=block_ranges[:n_blocks],
    )
    _check_stack(program.ops)
    _check_stack(program.block_ops)
    return program, comp


def _check_stack(ops: np.ndarray) -> None:
    depth = 0
    peak = 0
    for code, arg in ops:
        if code == OP_PUSH:
            depth += 1
        else:
            depth -= arg - 1
        peak = max(peak, depth)
    if peak > MAX_STACK:
        raise EvalError(0, f"CSG expression nests deeper than {MAX_STACK}")


def build_polytope(points: np.ndarray, tol: float, warnings: list[str],
                   line: int) -> ConvexPolytope:
    """Convex hull half-spaces of a point set, with a slab fallback."""
    from scipy.spatial import ConvexHull, QhullError

    try:
        hull = ConvexHull(points)
    except QhullError:
        warnings.append(f"line {line}: degenerate hull (coplanar samples); "
                        "using thickened-slab fallback")
        return _slab_polytope(points, tol)
    half_spaces = []
    for eq in hull.equations:  # n·p + d <= 0
        n = eq[:3]
        norm = float(np.linalg.norm(n))
        half_spaces.append(((n[0] / norm, n[1] / norm, n[2] / norm), float(-eq[3] / norm)))
    return ConvexPolytope(tuple(half_spaces), tol)


def _slab_polytope(points: np.ndarray, tol: float) -> ConvexPolytope:
    center = points.mean(axis=0)
    centered = points - center
    cov = centered.T @ centered
    _, vecs = np.linalg.eigh(cov)
    eps = max(tol, 1e-9)
    half_spaces = []
    for k in range(3):
        axis = vecs[:, k]
        proj = centered @ axis
        lo, hi = float(proj.min()), float(proj.max())
        d0 = float(axis @ center)
        half_spaces.append(((axis[0], axis[1], axis[2]), d0 + hi + eps))
        half_spaces.append(((-axis[0], -axis[1], -axis[2]), -(d0 + lo - eps)))
    return ConvexPolytope(tuple(half_spaces), tol)
