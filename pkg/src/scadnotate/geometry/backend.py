"""Kernel backend selection.

The compiled extension is preferred when importable; set
CADTALKER_BACKEND=python (or =compiled) to force a choice.  All entry points
take the ShapeProgram and plain numpy arrays, so callers never see which
backend is active.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernel_py

_forced = os.environ.get("CADTALKER_BACKEND", "").strip().lower()
_kernel_c = None
if _forced != "python":
    try:
        from . import _kernel_c  # type: ignore[no-redef]
    except ImportError:
        if _forced == "compiled":
            raise
        _kernel_c = None

BACKEND = "compiled" if _kernel_c is not None else "python"


def _tables(program):
    return (
        program.leaf_kind,
        program.leaf_inv,
        program.leaf_par,
        program.leaf_scale,
        program.leaf_sign,
        program.halfspaces.reshape(-1, 4),
    )


def eval_points(program, pts: np.ndarray, eps_world: float = 0.0,
                ops: np.ndarray | None = None) -> np.ndarray:
    pts = np.ascontiguousarray(pts, dtype=np.float64).reshape(-1, 3)
    if _kernel_c is None:
        return _kernel_py.eval_points(program, pts, eps_world, ops)
    use_ops = program.ops if ops is None else np.ascontiguousarray(ops, dtype=np.int32)
    return _kernel_c.eval_points(*_tables(program), use_ops, pts, eps_world)


def render_rays(program, origin: np.ndarray, dirs: np.ndarray, t0: np.ndarray,
                t1: np.ndarray, step: float, n_bisect: int) -> tuple[np.ndarray, np.ndarray]:
    origin = np.ascontiguousarray(origin, dtype=np.float64)
    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    t0 = np.ascontiguousarray(t0, dtype=np.float64)
    t1 = np.ascontiguousarray(t1, dtype=np.float64)
    if _kernel_c is None:
        return _kernel_py.render_rays(program, origin, dirs, t0, t1, step, n_bisect)
    return _kernel_c.render_rays(*_tables(program), program.ops, origin, dirs,
                                 t0, t1, step, n_bisect)


def attribute_points(program, pts: np.ndarray, eps_world: float) -> np.ndarray:
    pts = np.ascontiguousarray(pts, dtype=np.float64).reshape(-1, 3)
    if program.block_ranges.shape[0] == 0:
        return np.full(pts.shape[0], -1, dtype=np.int32)
    if _kernel_c is None:
        return _kernel_py.attribute_points(program, pts, eps_world)
    return _kernel_c.attribute_points(*_tables(program), program.block_ops,
                                      program.block_ranges, pts, eps_world)
