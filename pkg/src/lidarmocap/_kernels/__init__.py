"""Numeric kernel dispatch.

The compiled extension (_core, built from _core.pyx) is the fast path; the
numpy module (pykernels) is the reference implementation and fallback. Both
produce bit-identical outputs, so selection never changes results.

Set LIDARMOCAP_KERNELS=python to force the fallback, or
LIDARMOCAP_KERNELS=compiled to require the extension (raises if missing).
"""
import os

import numpy as np

from . import pykernels

_choice = os.environ.get("LIDARMOCAP_KERNELS", "").strip().lower()
if _choice in ("python", "pure", "numpy"):
    _impl = pykernels
    BACKEND = "python"
elif _choice == "compiled":
    from . import _core as _impl
    BACKEND = "compiled"
else:
    try:
        from . import _core as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = pykernels
        BACKEND = "python"

MIN_HIT_T = pykernels.MIN_HIT_T
PARALLEL_EPS = pykernels.PARALLEL_EPS


def get_backend(name):
    """Return a kernel module by name ("python" or "compiled")."""
    if name == "python":
        return pykernels
    if name == "compiled":
        from . import _core
        return _core
    raise ValueError(f"unknown kernel backend: {name!r}")


def _c3(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def cast_rays(origin, dirs, tri_a, e1, e2, normals, plane_num,
              d00, d01, d11, bden, max_range, impl=None):
    impl = impl or _impl
    return impl.cast_rays(_c3(origin), _c3(dirs), _c3(tri_a), _c3(e1),
                          _c3(e2), _c3(normals), _c3(plane_num), _c3(d00),
                          _c3(d01), _c3(d11), _c3(bden), float(max_range))


def nearest_sqdist(src, dst, impl=None):
    impl = impl or _impl
    return impl.nearest_sqdist(_c3(src), _c3(dst))


def fps_greedy(points, start, count, impl=None):
    impl = impl or _impl
    return impl.fps_greedy(_c3(points), int(start), int(count))
