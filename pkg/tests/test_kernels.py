import numpy as np
import pytest

from conftest import make_triangle_soup
from lidarmocap import _kernels
from lidarmocap.scan_sim import SensorSpec, _PackedScene, beam_directions

try:
    COMPILED = _kernels.get_backend("compiled")
except ImportError:
    COMPILED = None

PYTHON = _kernels.get_backend("python")

needs_compiled = pytest.mark.skipif(COMPILED is None,
                                    reason="compiled backend not built")


def test_backend_names():
    assert _kernels.BACKEND in ("python", "compiled")
    with pytest.raises(ValueError):
        _kernels.get_backend("vectorized")


@needs_compiled
def test_cast_rays_backends_bit_identical(rng):
    scene = _PackedScene([make_triangle_soup(rng, 300)])
    spec = SensorSpec(h_resolution=256, v_lines=16)
    dirs = beam_directions(spec)
    origin = np.asarray(spec.center, dtype=np.float64)
    plane_num = np.einsum("ij,ij->i", scene.normals, scene.tri_a - origin)
    args = (origin, dirs, scene.tri_a, scene.e1, scene.e2, scene.normals,
            plane_num, scene.d00, scene.d01, scene.d11, scene.bden, 120.0)
    t_py, i_py = _kernels.cast_rays(*args, impl=PYTHON)
    t_co, i_co = _kernels.cast_rays(*args, impl=COMPILED)
    assert np.array_equal(t_py, t_co)
    assert np.array_equal(i_py, i_co)
    assert (i_py >= 0).any() and (i_py < 0).any()


@needs_compiled
def test_nearest_sqdist_backends_bit_identical(rng):
    # sizes straddle both chunking boundaries of the python backend
    src = rng.normal(size=(1500, 3))
    dst = rng.normal(size=(5000, 3))
    d_py, i_py = _kernels.nearest_sqdist(src, dst, impl=PYTHON)
    d_co, i_co = _kernels.nearest_sqdist(src, dst, impl=COMPILED)
    assert np.array_equal(d_py, d_co)
    assert np.array_equal(i_py, i_co)


@needs_compiled
def test_nearest_sqdist_tie_goes_to_lowest_index():
    src = np.zeros((1, 3))
    dst = np.array([[1., 0., 0.], [-1., 0., 0.], [0., 1., 0.]])
    for impl in (PYTHON, COMPILED):
        d2, idx = _kernels.nearest_sqdist(src, dst, impl=impl)
        assert idx.tolist() == [0]
        assert d2.tolist() == [1.0]


@needs_compiled
def test_fps_backends_bit_identical(rng):
    pts = rng.normal(size=(3000, 3))
    a = _kernels.fps_greedy(pts, 11, 300, impl=PYTHON)
    b = _kernels.fps_greedy(pts, 11, 300, impl=COMPILED)
    assert np.array_equal(a, b)


@needs_compiled
def test_fps_backends_identical_with_duplicates():
    pts = np.repeat(np.arange(5.0)[:, None], 3, axis=1)
    pts = np.vstack([pts, pts, pts])
    a = _kernels.fps_greedy(pts, 2, 10, impl=PYTHON)
    b = _kernels.fps_greedy(pts, 2, 10, impl=COMPILED)
    assert np.array_equal(a, b)
    assert len(set(a.tolist())) == 10
