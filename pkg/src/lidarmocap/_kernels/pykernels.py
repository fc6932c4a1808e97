"""Reference numpy implementations of the hot numeric kernels.

The compiled extension (_core) mirrors these routines operation for
operation: same arithmetic order, same strict comparisons, same
lowest-index tie breaking. Reductions (means, sums) are deliberately left
to callers so both backends return raw per-element arrays that compare
bit-identical.
"""
import numpy as np

# A ray hit closer than this is treated as grazing the sensor itself.
MIN_HIT_T = 1e-6
# |normal . direction| below this counts as parallel to the plane.
PARALLEL_EPS = 1e-9

_SRC_CHUNK = 1024
_DST_CHUNK = 4096


def cast_rays(origin, dirs, tri_a, e1, e2, normals, plane_num,
              d00, d01, d11, bden, max_range):
    """First-hit ray casting against a packed triangle soup.

    Args:
        origin: (3,) beam origin shared by all rays.
        dirs: (B, 3) unit ray directions.
        tri_a: (M, 3) first vertex of each triangle.
        e1, e2: (M, 3) edge vectors b - a and c - a.
        normals: (M, 3) unit triangle normals.
        plane_num: (M,) precomputed n . (a - origin).
        d00, d01, d11, bden: (M,) barycentric dot products and denominator.
        max_range: hits beyond this distance are discarded.

    Returns:
        (t, idx): (B,) float64 hit distances (inf for misses) and (B,)
        int64 triangle indices (-1 for misses). Ties on distance resolve
        to the lowest triangle index.
    """
    B = dirs.shape[0]
    M = tri_a.shape[0]
    best_t = np.full(B, np.inf)
    best_idx = np.full(B, -1, dtype=np.int64)
    if B == 0 or M == 0:
        return best_t, best_idx
    dx = dirs[:, 0]
    dy = dirs[:, 1]
    dz = dirs[:, 2]
    ox, oy, oz = origin
    for m in range(M):
        den = normals[m, 0] * dx + normals[m, 1] * dy + normals[m, 2] * dz
        with np.errstate(divide="ignore", invalid="ignore"):
            t = plane_num[m] / den
        cand = (np.abs(den) >= PARALLEL_EPS) & (t > MIN_HIT_T)
        cand &= (t <= max_range) & (t < best_t)
        sel = np.nonzero(cand)[0]
        if sel.size == 0:
            continue
        ts = t[sel]
        wx = (ox + ts * dx[sel]) - tri_a[m, 0]
        wy = (oy + ts * dy[sel]) - tri_a[m, 1]
        wz = (oz + ts * dz[sel]) - tri_a[m, 2]
        d20 = wx * e1[m, 0] + wy * e1[m, 1] + wz * e1[m, 2]
        d21 = wx * e2[m, 0] + wy * e2[m, 1] + wz * e2[m, 2]
        u = (d11[m] * d20 - d01[m] * d21) / bden[m]
        v = (d00[m] * d21 - d01[m] * d20) / bden[m]
        inside = (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0)
        hit = sel[inside]
        if hit.size == 0:
            continue
        best_t[hit] = ts[inside]
        best_idx[hit] = m
    return best_t, best_idx


def nearest_sqdist(src, dst):
    """Squared distance and index of the nearest dst point for each src point.

    Ties resolve to the lowest dst index. Returns ((S,) float64, (S,) int64).
    """
    S = src.shape[0]
    best_d = np.full(S, np.inf)
    best_i = np.zeros(S, dtype=np.int64)
    if S == 0 or dst.shape[0] == 0:
        return best_d, best_i
    for s0 in range(0, S, _SRC_CHUNK):
        s1 = min(s0 + _SRC_CHUNK, S)
        sx = src[s0:s1, 0][:, None]
        sy = src[s0:s1, 1][:, None]
        sz = src[s0:s1, 2][:, None]
        cd = best_d[s0:s1]
        ci = best_i[s0:s1]
        for t0 in range(0, dst.shape[0], _DST_CHUNK):
            t1 = min(t0 + _DST_CHUNK, dst.shape[0])
            ddx = sx - dst[t0:t1, 0][None, :]
            ddy = sy - dst[t0:t1, 1][None, :]
            ddz = sz - dst[t0:t1, 2][None, :]
            d2 = ddx * ddx + ddy * ddy + ddz * ddz
            loc = np.argmin(d2, axis=1)
            locd = d2[np.arange(s1 - s0), loc]
            better = locd < cd
            cd[better] = locd[better]
            ci[better] = loc[better] + t0
    return best_d, best_i


def fps_greedy(points, start, count):
    """Greedy farthest point sampling from a given start index.

    Each subsequent pick maximizes squared distance to the selected set;
    ties resolve to the lowest index. Already-selected indices are marked
    with a sentinel so duplicate points still yield distinct indices.
    Returns (count,) int64 selection in pick order.
    """
    N = points.shape[0]
    sel = np.empty(count, dtype=np.int64)
    sel[0] = start
    if count == 1:
        return sel
    d2 = np.full(N, np.inf)
    d2[start] = -1.0
    last = start
    for i in range(1, count):
        px, py, pz = points[last]
        nx = points[:, 0] - px
        ny = points[:, 1] - py
        nz = points[:, 2] - pz
        nd = nx * nx + ny * ny + nz * nz
        np.minimum(d2, nd, out=d2)
        last = int(np.argmax(d2))
        d2[last] = -1.0
        sel[i] = last
    return sel
