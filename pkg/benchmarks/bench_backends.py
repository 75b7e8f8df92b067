#!/usr/bin/env python3
"""Benchmark: compiled geometry kernel vs the pure-numpy fallback.

Times point membership, depth rendering, and block attribution on a fixed
multi-part shape, printing one table row per (operation, backend).

    python benchmarks/bench_backends.py [--resolution 256] [--repeat 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from scadnotate import expand, parse_text
from scadnotate.geometry import Shape, _kernel_py
from scadnotate.render import _ray_box_interval, make_view_ring

try:
    from scadnotate.geometry import _kernel_c
except ImportError:
    _kernel_c = None

FIXTURE = """
union() {
    translate([0, 0, 0]) cube([8, 1.2, 1.2], center=true);
    translate([0.5, 0, 0.8]) cube([1.4, 7, 0.3], center=true);
    translate([-3.6, 0, 1]) cube([0.8, 2.4, 0.3], center=true);
    translate([1.8, 1.8, -0.2]) cube([1.2, 0.8, 0.8], center=true);
    translate([1.8, -1.8, -0.2]) cube([1.2, 0.8, 0.8], center=true);
    difference() {
        translate([0, 0, -1.4]) cube([3, 3, 0.6], center=true);
        translate([0, 0, -1.4]) cylinder(h=1, r=0.8, center=true);
    }
}
"""


def c_tables(program):
    return (program.leaf_kind, program.leaf_inv, program.leaf_par,
            program.leaf_scale, program.leaf_sign, program.halfspaces.reshape(-1, 4))


def timeit(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--resolution", type=int, default=256)
    ap.add_argument("--points", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    shape = Shape(expand(parse_text(FIXTURE)))
    program = shape.program
    rng = np.random.default_rng(0)
    lo = np.asarray(shape.bounds().lo)
    hi = np.asarray(shape.bounds().hi)
    pts = rng.uniform(lo, hi, size=(args.points, 3))

    cam = make_view_ring(shape.bounds(), resolution=args.resolution).cameras[0]
    origin = np.asarray(cam.position)
    dirs = cam.ray_directions()
    t0, t1 = _ray_box_interval(origin, dirs, shape.bounds())
    step = shape.diag / 1024

    surface = np.array([s.point for s in shape.sample_labeled_points(20_000, seed=1)])
    eps = shape.attribution_eps

    rows = []

    def bench(op, backend, fn):
        rows.append((op, backend, timeit(fn, args.repeat)))

    bench(f"eval {args.points} pts", "python",
          lambda: _kernel_py.eval_points(program, pts))
    if _kernel_c is not None:
        bench(f"eval {args.points} pts", "compiled",
              lambda: _kernel_c.eval_points(*c_tables(program), program.ops, pts, 0.0))

    bench(f"render {args.resolution}^2", "python",
          lambda: _kernel_py.render_rays(program, origin, dirs, t0, t1, step, 24))
    if _kernel_c is not None:
        bench(f"render {args.resolution}^2", "compiled",
              lambda: _kernel_c.render_rays(*c_tables(program), program.ops, origin,
                                            dirs, t0, t1, step, 24))

    bench("attribute 20k pts", "python",
          lambda: _kernel_py.attribute_points(program, surface, eps))
    if _kernel_c is not None:
        bench("attribute 20k pts", "compiled",
              lambda: _kernel_c.attribute_points(*c_tables(program), program.block_ops,
                                                 program.block_ranges, surface, eps))

    print(f"{'operation':<24} {'backend':<10} {'best of ' + str(args.repeat):>12}")
    print("-" * 48)
    by_op: dict[str, dict[str, float]] = {}
    for op, backend, seconds in rows:
        by_op.setdefault(op, {})[backend] = seconds
        print(f"{op:<24} {backend:<10} {seconds * 1000:>9.1f} ms")
    if _kernel_c is not None:
        print("-" * 48)
        for op, t in by_op.items():
            if "compiled" in t and "python" in t:
                print(f"{op:<24} speedup    {t['python'] / t['compiled']:>9.1f}x")
    else:
        print("compiled kernel not built; python fallback only")


if __name__ == "__main__":
    main()
