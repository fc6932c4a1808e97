"""Shared builders for the test suite."""
import numpy as np
import pytest

from lidarmocap.body_model import BodyModel
from lidarmocap.scan_sim import TriangleMesh


def make_toy_model(rng, n_joints=4, n_vertices=20, n_shape=10):
    """Random valid body model with a random ancestor-ordered tree."""
    parents = np.empty(n_joints, dtype=np.int64)
    parents[0] = -1
    for j in range(1, n_joints):
        parents[j] = rng.integers(0, j)
    template = rng.normal(size=(n_vertices, 3))
    regressor = np.abs(rng.normal(size=(n_joints, n_vertices))) + 1e-3
    regressor /= regressor.sum(axis=1, keepdims=True)
    weights = np.abs(rng.normal(size=(n_vertices, n_joints))) + 1e-3
    weights /= weights.sum(axis=1, keepdims=True)
    shape_dirs = rng.normal(size=(n_vertices, 3, n_shape)) * 0.05
    return BodyModel(template_vertices=template, kinematic_parents=parents,
                     joint_regressor=regressor, skin_weights=weights,
                     shape_dirs=shape_dirs)


def two_joint_model():
    """Two joints on the y axis, vertices hard-bound 0/1."""
    return BodyModel(
        template_vertices=np.array([[0.0, 0.0, 0.0], [0.0, 1.0, 0.0],
                                    [0.0, 2.0, 0.0], [1.0, 1.0, 0.0]]),
        kinematic_parents=np.array([-1, 0]),
        joint_regressor=np.array([[1.0, 0.0, 0.0, 0.0],
                                  [0.0, 1.0, 0.0, 0.0]]),
        skin_weights=np.array([[1.0, 0.0], [0.0, 1.0],
                               [0.0, 1.0], [0.0, 1.0]]),
        shape_dirs=np.zeros((4, 3, 10)),
    )


def three_chain_model():
    """Three-joint chain along +y at unit spacing, one vertex per joint."""
    return BodyModel(
        template_vertices=np.array([[0.0, 0.0, 0.0], [0.0, 1.0, 0.0],
                                    [0.0, 2.0, 0.0]]),
        kinematic_parents=np.array([-1, 0, 1]),
        joint_regressor=np.eye(3),
        skin_weights=np.eye(3),
        shape_dirs=np.zeros((3, 3, 10)),
    )


def make_triangle_soup(rng, n_tris, spread=8.0, size=0.5, label="body"):
    """Random disconnected triangles scattered around the sensor."""
    centers = rng.uniform(-spread, spread, size=(n_tris, 3))
    centers[:, 2] = rng.uniform(-1.0, 3.0, size=n_tris)
    offsets = rng.normal(scale=size, size=(n_tris, 3, 3))
    vertices = (centers[:, None, :] + offsets).reshape(-1, 3)
    faces = np.arange(3 * n_tris).reshape(-1, 3)
    return TriangleMesh(vertices, faces, label=label)


def make_box(center, half, label="body"):
    """Axis-aligned box as 12 triangles."""
    cx, cy, cz = center
    hx, hy, hz = half
    v = np.array([[cx - hx, cy - hy, cz - hz], [cx + hx, cy - hy, cz - hz],
                  [cx + hx, cy + hy, cz - hz], [cx - hx, cy + hy, cz - hz],
                  [cx - hx, cy - hy, cz + hz], [cx + hx, cy - hy, cz + hz],
                  [cx + hx, cy + hy, cz + hz], [cx - hx, cy + hy, cz + hz]])
    f = np.array([[0, 1, 2], [0, 2, 3], [4, 6, 5], [4, 7, 6],
                  [0, 4, 5], [0, 5, 1], [1, 5, 6], [1, 6, 2],
                  [2, 6, 7], [2, 7, 3], [3, 7, 4], [3, 4, 0]])
    return TriangleMesh(v, f, label=label)


def make_wall(y, half_width=30.0, z_lo=-10.0, z_hi=10.0, label="static"):
    """Vertical wall in the plane y = const, two triangles."""
    v = np.array([[-half_width, y, z_lo], [half_width, y, z_lo],
                  [half_width, y, z_hi], [-half_width, y, z_hi]])
    f = np.array([[0, 1, 2], [0, 2, 3]])
    return TriangleMesh(v, f, label=label)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
