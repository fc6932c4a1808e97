"""Benchmark the compiled kernels against the pure-Python reference.

Runs ray casting, nearest-neighbor search, and farthest-point sampling on
both backends, asserts the outputs are identical down to the bit, and
prints a timing table.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import time

import numpy as np

from lidarmocap import _kernels
from lidarmocap.scan_sim import SensorSpec, TriangleMesh, _PackedScene, beam_directions


def _timeit(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _make_scene(rng, n_tris):
    centers = rng.uniform(-8.0, 8.0, size=(n_tris, 3))
    centers[:, 2] = rng.uniform(-1.0, 3.0, size=n_tris)
    offsets = rng.normal(scale=0.5, size=(n_tris, 3, 3))
    vertices = (centers[:, None, :] + offsets).reshape(-1, 3)
    faces = np.arange(3 * n_tris).reshape(-1, 3)
    return TriangleMesh(vertices, faces, label="body")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    try:
        compiled = _kernels.get_backend("compiled")
    except ImportError:
        print("compiled backend not built; nothing to compare")
        return
    python = _kernels.get_backend("python")
    rng = np.random.default_rng(0)

    rows = []

    spec = SensorSpec(h_resolution=512, v_lines=32)
    scene = _PackedScene([_make_scene(rng, 400)])
    dirs = beam_directions(spec)
    origin = np.asarray(spec.center, dtype=np.float64)

    plane_num = np.einsum("ij,ij->i", scene.normals, scene.tri_a - origin)

    def cast(impl):
        return _kernels.cast_rays(origin, dirs, scene.tri_a, scene.e1,
                                  scene.e2, scene.normals, plane_num,
                                  scene.d00, scene.d01, scene.d11,
                                  scene.bden, spec.max_range, impl=impl)

    t_py, (tp, ip) = _timeit(lambda: cast(python), args.repeat)
    t_co, (tc, ic) = _timeit(lambda: cast(compiled), args.repeat)
    assert np.array_equal(tp, tc) and np.array_equal(ip, ic)
    rows.append(("cast_rays 16384x400", t_py, t_co))

    src = rng.normal(size=(4000, 3))
    dst = rng.normal(size=(7000, 3))
    t_py, (dp, jp) = _timeit(
        lambda: _kernels.nearest_sqdist(src, dst, impl=python), args.repeat)
    t_co, (dc, jc) = _timeit(
        lambda: _kernels.nearest_sqdist(src, dst, impl=compiled), args.repeat)
    assert np.array_equal(dp, dc) and np.array_equal(jp, jc)
    rows.append(("nearest_sqdist 4000x7000", t_py, t_co))

    pts = rng.normal(size=(20000, 3))
    t_py, fp = _timeit(
        lambda: _kernels.fps_greedy(pts, 17, 256, impl=python), args.repeat)
    t_co, fc = _timeit(
        lambda: _kernels.fps_greedy(pts, 17, 256, impl=compiled), args.repeat)
    assert np.array_equal(fp, fc)
    rows.append(("fps_greedy 20000->256", t_py, t_co))

    print(f"{'kernel':<26} {'python':>10} {'compiled':>10} {'speedup':>8}")
    for name, t_py, t_co in rows:
        print(f"{name:<26} {t_py * 1e3:>8.2f}ms {t_co * 1e3:>8.2f}ms "
              f"{t_py / t_co:>7.1f}x")
    print("outputs identical across backends: yes")


if __name__ == "__main__":
    main()
