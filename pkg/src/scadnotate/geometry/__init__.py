"""Implicit CSG execution of expanded syntax trees.

A Shape compiles the tree once into a flat program (transforms folded into
per-leaf affines, hulls into cached half-space sets) and answers point
membership, bounds, surface sampling, and block attribution queries through
the selected kernel backend.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..blocks import BlockSet, extract_blocks
from ..errors import EmptyShapeError, NotExpandedError
from ..nodes import SyntaxTree
from . import backend
from .program import (
    AABB,
    EMPTY_AABB,
    ConvexPolytope,
    aabb_join,
    compile_tree,
)

GRID_RESOLUTION = 128
SURFACE_BISECTIONS = 16
ATTR_EPS_FACTOR = 1e-4


@dataclass(frozen=True)
class SurfaceSample:
    point: tuple[float, float, float]
    block: int
    gt_labels: Optional[tuple[str, ...]] = None


class Shape:
    """Executable solid for an expanded tree, with per-block attribution."""

    def __init__(self, tree: SyntaxTree, blocks: Optional[BlockSet] = None):
        if not tree.is_expanded():
            raise NotExpandedError("expand the tree before executing it")
        self.tree = tree
        self.blocks = blocks if blocks is not None else extract_blocks(tree)
        leaves = self.blocks.irreducible()
        block_roots = [(b.id, b.ast_node) for b in leaves]
        self.program, self._comp = compile_tree(tree, block_roots)
        self.warnings: list[str] = list(self._comp.warnings)
        self._ops_cache: dict[int, np.ndarray] = {}
        self.block_index: dict[int, int] = {}
        for block_id, root_nid in block_roots:
            for n in tree.walk(root_nid):
                self.block_index[n.id] = block_id

    # --- bounds ---

    def bounds(self, node: Optional[int] = None) -> AABB:
        node_id = self.tree.root if node is None else node
        return self._comp.aabbs.get(node_id, EMPTY_AABB)

    @property
    def diag(self) -> float:
        return self.bounds().diagonal

    def require_nonempty(self) -> None:
        if self.bounds().empty or self.diag == 0.0:
            raise EmptyShapeError("shape produces no geometry")

    # --- membership ---

    def _node_ops(self, node_id: int) -> np.ndarray:
        ops = self._ops_cache.get(node_id)
        if ops is None:
            out: list[tuple[int, int]] = []
            self._comp.emit_ops(node_id, out)
            ops = np.asarray(out, dtype=np.int32).reshape(-1, 2)
            self._ops_cache[node_id] = ops
        return ops

    def contains(self, points, node: Optional[int] = None, eps: float = 0.0):
        """Membership of one point (returns bool) or an [N,3] batch (bool array)."""
        pts = np.asarray(points, dtype=np.float64)
        single = pts.ndim == 1
        ops = None if node is None else self._node_ops(node)
        result = backend.eval_points(self.program, pts.reshape(-1, 3), eps, ops)
        return bool(result[0]) if single else result

    def contains_block(self, block_id: int, points, eps: float = 0.0):
        block = self.blocks.block(block_id)
        return self.contains(points, node=block.ast_node, eps=eps)

    # --- hulls ---

    def hull_polytope(self, node_id: int) -> ConvexPolytope:
        try:
            return self._comp.polytopes[node_id]
        except KeyError:
            raise ValueError(f"node {node_id} is not a hull node") from None

    # --- attribution ---

    @property
    def attribution_eps(self) -> float:
        return ATTR_EPS_FACTOR * self.diag

    def attribute_block(self, points):
        """Owning irreducible block per point (earliest in source order), -1 if none."""
        pts = np.asarray(points, dtype=np.float64)
        single = pts.ndim == 1
        result = backend.attribute_points(self.program, pts.reshape(-1, 3),
                                          self.attribution_eps)
        if single:
            return int(result[0]) if result[0] >= 0 else None
        return result

    # --- surface sampling ---

    def sample_labeled_points(self, n: int, seed: int = 0,
                              gt_labels: Optional[dict[int, Sequence[str]]] = None
                              ) -> list[SurfaceSample]:
        """Deterministic boundary samples with block attribution.

        Membership is evaluated on a jittered grid over the bounds; cells whose
        sample differs from a 6-neighbor are bisected to the surface.
        """
        self.require_nonempty()
        box = self.bounds()
        res = GRID_RESOLUTION
        margin = 0.01 * box.size + 1e-9
        lo = np.asarray(box.lo) - margin
        size = box.size + 2 * margin
        cell = size / res

        rng = np.random.default_rng(seed)
        jitter = rng.uniform(-0.4, 0.4, size=(res, res, res, 3))
        idx = np.stack(np.meshgrid(np.arange(res), np.arange(res), np.arange(res),
                                   indexing="ij"), axis=-1).astype(np.float64)
        coords = lo + (idx + 0.5 + jitter) * cell

        inside = np.zeros((res, res, res), dtype=bool)
        for z0 in range(0, res, 16):  # slab-wise to bound memory
            z1 = min(z0 + 16, res)
            pts = coords[:, :, z0:z1].reshape(-1, 3)
            inside[:, :, z0:z1] = backend.eval_points(self.program, pts).reshape(
                res, res, z1 - z0)

        pairs_in = []
        pairs_out = []
        for axis in range(3):
            sl_a = [slice(None)] * 3
            sl_b = [slice(None)] * 3
            sl_a[axis] = slice(0, res - 1)
            sl_b[axis] = slice(1, res)
            a_in = inside[tuple(sl_a)]
            b_in = inside[tuple(sl_b)]
            trans = a_in != b_in
            ai = np.argwhere(trans)
            if ai.size == 0:
                continue
            bi = ai.copy()
            bi[:, axis] += 1
            a_pts = coords[ai[:, 0], ai[:, 1], ai[:, 2]]
            b_pts = coords[bi[:, 0], bi[:, 1], bi[:, 2]]
            a_is_in = a_in[trans]
            pairs_in.append(np.where(a_is_in[:, None], a_pts, b_pts))
            pairs_out.append(np.where(a_is_in[:, None], b_pts, a_pts))
        if not pairs_in:
            raise EmptyShapeError("no surface transitions detected on the sampling grid")
        p_in = np.vstack(pairs_in)
        p_out = np.vstack(pairs_out)

        total = p_in.shape[0]
        count = min(n, total)
        pick = (np.arange(count, dtype=np.int64) * total) // count
        p_in = p_in[pick]
        p_out = p_out[pick]
        for _ in range(SURFACE_BISECTIONS):
            mid = 0.5 * (p_in + p_out)
            ins = backend.eval_points(self.program, mid)
            p_in = np.where(ins[:, None], mid, p_in)
            p_out = np.where(ins[:, None], p_out, mid)

        blocks = self.attribute_block(p_in)
        samples = []
        for k in range(count):
            bid = int(blocks[k])
            labels = None
            if gt_labels is not None and bid in gt_labels:
                labels = tuple(gt_labels[bid])
            samples.append(SurfaceSample(tuple(p_in[k]), bid, labels))
        return samples


__all__ = [
    "AABB",
    "ConvexPolytope",
    "Shape",
    "SurfaceSample",
    "aabb_join",
    "backend",
]
