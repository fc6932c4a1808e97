# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: ray casting, nearest neighbor, farthest point sampling.

Mirrors pykernels operation for operation (same arithmetic order, same
strict comparisons) so both backends return bit-identical arrays. Keep the
two files in sync; the parity tests enforce it.
"""
import numpy as np

from libc.math cimport INFINITY, fabs

MIN_HIT_T = 1e-6
PARALLEL_EPS = 1e-9

cdef double _MIN_HIT_T = 1e-6
cdef double _PARALLEL_EPS = 1e-9


def cast_rays(double[::1] origin, double[:, ::1] dirs, double[:, ::1] tri_a,
              double[:, ::1] e1, double[:, ::1] e2, double[:, ::1] normals,
              double[::1] plane_num, double[::1] d00, double[::1] d01,
              double[::1] d11, double[::1] bden, double max_range):
    """See pykernels.cast_rays."""
    cdef Py_ssize_t B = dirs.shape[0]
    cdef Py_ssize_t M = tri_a.shape[0]
    t_arr = np.full(B, np.inf)
    i_arr = np.full(B, -1, dtype=np.int64)
    if B == 0 or M == 0:
        return t_arr, i_arr
    cdef double[::1] best_t = t_arr
    cdef long long[::1] best_i = i_arr
    cdef double ox = origin[0], oy = origin[1], oz = origin[2]
    cdef Py_ssize_t k, m
    cdef double dxk, dyk, dzk, den, t, wx, wy, wz, d20, d21, u, v
    cdef double n0, n1, n2, a0, a1, a2, e10, e11, e12, e20, e21, e22
    cdef double num, bd, dd00, dd01, dd11
    with nogil:
        for k in range(B):
            dxk = dirs[k, 0]
            dyk = dirs[k, 1]
            dzk = dirs[k, 2]
            for m in range(M):
                n0 = normals[m, 0]
                n1 = normals[m, 1]
                n2 = normals[m, 2]
                den = n0 * dxk + n1 * dyk + n2 * dzk
                if fabs(den) < _PARALLEL_EPS:
                    continue
                num = plane_num[m]
                t = num / den
                if t <= _MIN_HIT_T or t > max_range or t >= best_t[k]:
                    continue
                a0 = tri_a[m, 0]
                a1 = tri_a[m, 1]
                a2 = tri_a[m, 2]
                wx = (ox + t * dxk) - a0
                wy = (oy + t * dyk) - a1
                wz = (oz + t * dzk) - a2
                e10 = e1[m, 0]
                e11 = e1[m, 1]
                e12 = e1[m, 2]
                e20 = e2[m, 0]
                e21 = e2[m, 1]
                e22 = e2[m, 2]
                d20 = wx * e10 + wy * e11 + wz * e12
                d21 = wx * e20 + wy * e21 + wz * e22
                dd00 = d00[m]
                dd01 = d01[m]
                dd11 = d11[m]
                bd = bden[m]
                u = (dd11 * d20 - dd01 * d21) / bd
                if u < 0.0:
                    continue
                v = (dd00 * d21 - dd01 * d20) / bd
                if v < 0.0 or u + v > 1.0:
                    continue
                best_t[k] = t
                best_i[k] = m
    return t_arr, i_arr


def nearest_sqdist(double[:, ::1] src, double[:, ::1] dst):
    """See pykernels.nearest_sqdist."""
    cdef Py_ssize_t S = src.shape[0]
    cdef Py_ssize_t D = dst.shape[0]
    d_arr = np.full(S, np.inf)
    i_arr = np.zeros(S, dtype=np.int64)
    if S == 0 or D == 0:
        return d_arr, i_arr
    cdef double[::1] best_d = d_arr
    cdef long long[::1] best_i = i_arr
    cdef Py_ssize_t s, t
    cdef double sx, sy, sz, ddx, ddy, ddz, d2, bd
    cdef Py_ssize_t bi
    with nogil:
        for s in range(S):
            sx = src[s, 0]
            sy = src[s, 1]
            sz = src[s, 2]
            bd = INFINITY
            bi = 0
            for t in range(D):
                ddx = sx - dst[t, 0]
                ddy = sy - dst[t, 1]
                ddz = sz - dst[t, 2]
                d2 = ddx * ddx + ddy * ddy + ddz * ddz
                if d2 < bd:
                    bd = d2
                    bi = t
            best_d[s] = bd
            best_i[s] = bi
    return d_arr, i_arr


def fps_greedy(double[:, ::1] points, Py_ssize_t start, Py_ssize_t count):
    """See pykernels.fps_greedy."""
    cdef Py_ssize_t N = points.shape[0]
    sel_arr = np.empty(count, dtype=np.int64)
    cdef long long[::1] sel = sel_arr
    sel[0] = start
    if count == 1:
        return sel_arr
    d2_arr = np.full(N, np.inf)
    cdef double[::1] d2 = d2_arr
    d2[start] = -1.0
    cdef Py_ssize_t last = start
    cdef Py_ssize_t i, k, bi
    cdef double px, py, pz, nx, ny, nz, nd, best
    with nogil:
        for i in range(1, count):
            px = points[last, 0]
            py = points[last, 1]
            pz = points[last, 2]
            for k in range(N):
                nx = points[k, 0] - px
                ny = points[k, 1] - py
                nz = points[k, 2] - pz
                nd = nx * nx + ny * ny + nz * nz
                if nd < d2[k]:
                    d2[k] = nd
            best = d2[0]
            bi = 0
            for k in range(1, N):
                if d2[k] > best:
                    best = d2[k]
                    bi = k
            d2[bi] = -1.0
            sel[i] = bi
            last = bi
    return sel_arr
