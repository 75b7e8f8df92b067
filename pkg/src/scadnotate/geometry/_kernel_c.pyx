# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled evaluation kernels for the flat CSG program.

Same semantics as _kernel_py; the per-ray march with early exit is the hot
loop that motivates compilation.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

DEF MAX_STACK = 128

cdef int K_CUBE = 0, K_SPHERE = 1, K_CYLINDER = 2, K_HULL = 3, K_EMPTY = 4
cdef int OP_PUSH = 0, OP_UNION = 1, OP_INTERSECT = 2, OP_DIFFERENCE = 3


cdef inline bint _leaf_test(int kind, const double* inv, const double* par,
                            double scale, signed char sign,
                            const double[:, ::1] halfspaces,
                            double x, double y, double z, double eps) noexcept nogil:
    cdef double lx, ly, lz, slack, half0, half1, half2, r, h, r1, r2, z0, zc, rz, rr
    cdef int start, count, k
    if kind == K_EMPTY:
        return False
    if kind == K_HULL:
        start = <int> par[0]
        count = <int> par[1]
        slack = par[2] + eps * sign
        for k in range(start, start + count):
            if halfspaces[k, 0] * x + halfspaces[k, 1] * y + halfspaces[k, 2] * z > halfspaces[k, 3] + slack:
                return False
        return True
    lx = inv[0] * x + inv[1] * y + inv[2] * z + inv[3]
    ly = inv[4] * x + inv[5] * y + inv[6] * z + inv[7]
    lz = inv[8] * x + inv[9] * y + inv[10] * z + inv[11]
    slack = eps * scale * sign
    if kind == K_CUBE:
        half0 = par[0] + slack
        half1 = par[1] + slack
        half2 = par[2] + slack
        if half0 < 0 or half1 < 0 or half2 < 0:
            return False
        if lx - par[3] > half0 or par[3] - lx > half0:
            return False
        if ly - par[4] > half1 or par[4] - ly > half1:
            return False
        if lz - par[5] > half2 or par[5] - lz > half2:
            return False
        return True
    if kind == K_SPHERE:
        r = par[0] + slack
        if r < 0:
            return False
        return lx * lx + ly * ly + lz * lz <= r * r
    # cylinder
    h = par[0]
    r1 = par[1]
    r2 = par[2]
    z0 = par[3]
    if lz < z0 - slack or lz > z0 + h + slack:
        return False
    zc = lz
    if zc < z0:
        zc = z0
    elif zc > z0 + h:
        zc = z0 + h
    rz = r1 + (r2 - r1) * (zc - z0) / h
    rr = rz + slack
    if rr < 0:
        rr = 0
    return lx * lx + ly * ly <= rr * rr


cdef bint _eval_point(const int[:, ::1] ops, int n_ops,
                      const int[::1] kind, const double[:, ::1] inv,
                      const double[:, ::1] par, const double[::1] scale,
                      const signed char[::1] sign, const double[:, ::1] halfspaces,
                      double x, double y, double z, double eps) noexcept nogil:
    cdef bint stack[MAX_STACK]
    cdef int sp = 0
    cdef int j, k, code, arg, leaf
    cdef bint v
    for j in range(n_ops):
        code = ops[j, 0]
        arg = ops[j, 1]
        if code == OP_PUSH:
            leaf = arg
            stack[sp] = _leaf_test(kind[leaf], &inv[leaf, 0], &par[leaf, 0],
                                   scale[leaf], sign[leaf], halfspaces, x, y, z, eps)
            sp += 1
        elif code == OP_UNION:
            v = False
            for k in range(arg):
                sp -= 1
                v = v or stack[sp]
            stack[sp] = v
            sp += 1
        elif code == OP_INTERSECT:
            v = True
            for k in range(arg):
                sp -= 1
                v = v and stack[sp]
            stack[sp] = v
            sp += 1
        else:
            v = False
            for k in range(arg - 1):
                sp -= 1
                v = v or stack[sp]
            sp -= 1
            stack[sp] = stack[sp] and not v
            sp += 1
    if sp == 0:
        return False
    return stack[0]


def eval_points(const int[::1] kind, const double[:, ::1] inv, const double[:, ::1] par,
                const double[::1] scale, const signed char[::1] sign,
                const double[:, ::1] halfspaces, const int[:, ::1] ops,
                const double[:, ::1] pts, double eps):
    cdef Py_ssize_t n = pts.shape[0]
    out = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] ov = out
    cdef int n_ops = ops.shape[0]
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            ov[i] = _eval_point(ops, n_ops, kind, inv, par, scale, sign, halfspaces,
                                pts[i, 0], pts[i, 1], pts[i, 2], eps)
    return out.view(bool)


def render_rays(const int[::1] kind, const double[:, ::1] inv, const double[:, ::1] par,
                const double[::1] scale, const signed char[::1] sign,
                const double[:, ::1] halfspaces, const int[:, ::1] ops,
                const double[::1] origin, const double[:, ::1] dirs,
                const double[::1] t0, const double[::1] t1,
                double step, int n_bisect):
    cdef Py_ssize_t n = dirs.shape[0]
    t_out = np.full(n, -1.0)
    t_in = np.full(n, -1.0)
    cdef double[::1] tov = t_out
    cdef double[::1] tiv = t_in
    cdef int n_ops = ops.shape[0]
    cdef Py_ssize_t r
    cdef double ox = origin[0], oy = origin[1], oz = origin[2]
    cdef double dx, dy, dz, t, lo, hi, mid
    cdef long k
    cdef bint clamped, hit, inside
    cdef int b
    with nogil:
        for r in range(n):
            if t0[r] > t1[r]:
                continue
            dx = dirs[r, 0]
            dy = dirs[r, 1]
            dz = dirs[r, 2]
            hit = False
            lo = t0[r] - step
            k = 0
            while True:
                t = t0[r] + k * step
                clamped = t >= t1[r]
                if clamped:
                    t = t1[r]
                inside = _eval_point(ops, n_ops, kind, inv, par, scale, sign, halfspaces,
                                     ox + t * dx, oy + t * dy, oz + t * dz, 0.0)
                if inside:
                    hit = True
                    hi = t
                    break
                lo = t
                if clamped:
                    break
                k += 1
            if not hit:
                continue
            for b in range(n_bisect):
                mid = 0.5 * (lo + hi)
                inside = _eval_point(ops, n_ops, kind, inv, par, scale, sign, halfspaces,
                                     ox + mid * dx, oy + mid * dy, oz + mid * dz, 0.0)
                if inside:
                    hi = mid
                else:
                    lo = mid
            tov[r] = 0.5 * (lo + hi)
            tiv[r] = hi
    return t_out, t_in


def attribute_points(const int[::1] kind, const double[:, ::1] inv, const double[:, ::1] par,
                     const double[::1] scale, const signed char[::1] sign,
                     const double[:, ::1] halfspaces, const int[:, ::1] block_ops,
                     const int[:, ::1] block_ranges, const double[:, ::1] pts, double eps):
    cdef Py_ssize_t n = pts.shape[0]
    out = np.full(n, -1, dtype=np.int32)
    cdef int[::1] ov = out
    cdef Py_ssize_t i
    cdef int b, n_blocks = block_ranges.shape[0]
    cdef int start, length
    with nogil:
        for i in range(n):
            for b in range(n_blocks):
                start = block_ranges[b, 0]
                length = block_ranges[b, 1]
                if _eval_point(block_ops[start : start + length], length, kind, inv, par,
                               scale, sign, halfspaces, pts[i, 0], pts[i, 1], pts[i, 2], eps):
                    ov[i] = b
                    break
    return out
