"""Pure-numpy evaluation kernels (fallback when the compiled core is absent).

Mirrors _kernel_c.pyx operation for operation; both backends evaluate the
same flat program, so they may differ only by floating-point accumulation
order deep in BLAS, i.e. at most one ulp on points sitting exactly on a
surface.
"""

from __future__ import annotations

import numpy as np

K_CUBE, K_SPHERE, K_CYLINDER, K_HULL, K_EMPTY = 0, 1, 2, 3, 4
OP_PUSH, OP_UNION, OP_INTERSECT, OP_DIFFERENCE = 0, 1, 2, 3


def leaf_test(program, i: int, pts: np.ndarray, eps_world: float) -> np.ndarray:
    kind = int(program.leaf_kind[i])
    n = pts.shape[0]
    if kind == K_EMPTY:
        return np.zeros(n, dtype=bool)
    if kind == K_HULL:
        start = int(program.leaf_par[i, 0])
        count = int(program.leaf_par[i, 1])
        tol = program.leaf_par[i, 2]
        hs = program.halfspaces[start : start + count]
        slack = tol + eps_world * float(program.leaf_sign[i])
        proj = pts @ hs[:, :3].T
        return np.all(proj <= hs[:, 3] + slack, axis=1)
    inv = program.leaf_inv[i].reshape(3, 4)
    local = pts @ inv[:, :3].T + inv[:, 3]
    slack = eps_world * program.leaf_scale[i] * float(program.leaf_sign[i])
    par = program.leaf_par[i]
    if kind == K_CUBE:
        half = par[0:3] + slack
        if np.any(half < 0):
            return np.zeros(n, dtype=bool)
        return np.all(np.abs(local - par[3:6]) <= half, axis=1)
    if kind == K_SPHERE:
        r = par[0] + slack
        if r < 0:
            return np.zeros(n, dtype=bool)
        return np.einsum("ij,ij->i", local, local) <= r * r
    # cylinder
    h, r1, r2, z0 = par[0], par[1], par[2], par[3]
    z = local[:, 2]
    ok_z = (z >= z0 - slack) & (z <= z0 + h + slack)
    zc = np.clip(z, z0, z0 + h)
    rz = r1 + (r2 - r1) * (zc - z0) / h
    rr = np.maximum(rz + slack, 0.0)
    ok_r = local[:, 0] ** 2 + local[:, 1] ** 2 <= rr * rr
    return ok_z & ok_r


def eval_ops(program, ops: np.ndarray, pts: np.ndarray, eps_world: float) -> np.ndarray:
    """Evaluate an RPN program over a batch of points."""
    stack: list[np.ndarray] = []
    for code, arg in ops:
        if code == OP_PUSH:
            stack.append(leaf_test(program, int(arg), pts, eps_world))
        elif code == OP_UNION:
            vals = [stack.pop() for _ in range(arg)]
            stack.append(np.logical_or.reduce(vals))
        elif code == OP_INTERSECT:
            vals = [stack.pop() for _ in range(arg)]
            stack.append(np.logical_and.reduce(vals))
        else:  # difference: first child minus the rest
            rest = [stack.pop() for _ in range(arg - 1)]
            first = stack.pop()
            if rest:
                first = first & ~np.logical_or.reduce(rest)
            stack.append(first)
    return stack[0] if stack else np.zeros(pts.shape[0], dtype=bool)


def eval_points(program, pts: np.ndarray, eps_world: float = 0.0,
                ops: np.ndarray | None = None) -> np.ndarray:
    return eval_ops(program, program.ops if ops is None else ops, pts, eps_world)


def render_rays(program, origin: np.ndarray, dirs: np.ndarray, t0: np.ndarray,
                t1: np.ndarray, step: float, n_bisect: int) -> tuple[np.ndarray, np.ndarray]:
    """March all rays in lockstep; returns (refined t, inside-side t), -1 for miss."""
    n = dirs.shape[0]
    t_out = np.full(n, -1.0)
    t_in = np.full(n, -1.0)
    alive = np.nonzero(t0 <= t1)[0]
    lo = np.empty(n)
    hi = np.empty(n)
    hit_idx: list[np.ndarray] = []
    k = 0
    while alive.size:
        t = t0[alive] + k * step
        clamped = t >= t1[alive]
        t = np.where(clamped, t1[alive], t)
        pts = origin[None, :] + t[:, None] * dirs[alive]
        inside = eval_ops(program, program.ops, pts, 0.0)
        hits = alive[inside]
        if hits.size:
            lo[hits] = t0[hits] + (k - 1) * step if k else t0[hits] - step
            hi[hits] = t[inside]
            hit_idx.append(hits)
        alive = alive[~inside & ~clamped]
        k += 1
    if not hit_idx:
        return t_out, t_in
    hits = np.concatenate(hit_idx)
    blo = lo[hits]
    bhi = hi[hits]
    for _ in range(n_bisect):
        mid = 0.5 * (blo + bhi)
        pts = origin[None, :] + mid[:, None] * dirs[hits]
        inside = eval_ops(program, program.ops, pts, 0.0)
        bhi = np.where(inside, mid, bhi)
        blo = np.where(inside, blo, mid)
    t_out[hits] = 0.5 * (blo + bhi)
    t_in[hits] = bhi
    return t_out, t_in


def attribute_points(program, pts: np.ndarray, eps_world: float) -> np.ndarray:
    """Earliest (source-order) irreducible block containing each point, -1 if none."""
    n = pts.shape[0]
    out = np.full(n, -1, dtype=np.int32)
    remaining = np.arange(n)
    for b in range(program.block_ranges.shape[0]):
        if remaining.size == 0:
            break
        start, length = program.block_ranges[b]
        ops = program.block_ops[start : start + length]
        inside = eval_ops(program, ops, pts[remaining], eps_world)
        out[remaining[inside]] = b
        remaining = remaining[~inside]
    return out
