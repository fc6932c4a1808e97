import numpy as np
import pytest

import oracles
from lidarmocap.errors import (DegenerateRotationError, EmptyInputError,
                               InvalidArgumentError)
from lidarmocap.geometry import (PointCloud, RigidTransform, Triangle,
                                 axis_angle_to_matrix, farthest_point_sample,
                                 geodesic_angle_deg, is_rotation, knn,
                                 matrix_to_rot6d, nearest_neighbor_sqdist,
                                 ray_triangle_intersect, rot6d_to_matrix,
                                 unidirectional_chamfer)


def rot_z(deg):
    rad = np.radians(deg)
    c, s = np.cos(rad), np.sin(rad)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


# ---------------------------------------------------------------------------
# Rotation representations
# ---------------------------------------------------------------------------

def test_rot6d_identity():
    assert np.allclose(rot6d_to_matrix(np.array([1., 0., 0., 0., 1., 0.])),
                       np.eye(3), atol=1e-12)


def test_rot6d_swapped_basis_columns():
    R = rot6d_to_matrix(np.array([0., 1., 0., 1., 0., 0.]))
    expected = np.array([[0., 1., 0.], [1., 0., 0.], [0., 0., -1.]])
    assert np.allclose(R, expected, atol=1e-12)
    assert np.isclose(np.linalg.det(R), 1.0)


def test_rot6d_unnormalized_input_still_rotation(rng):
    for _ in range(20):
        r6 = rng.normal(size=6) * rng.uniform(0.1, 10.0)
        R = rot6d_to_matrix(r6)
        assert is_rotation(R)


def test_rot6d_round_trip(rng):
    Rs = oracles.random_rotations(rng, 100)
    back = rot6d_to_matrix(matrix_to_rot6d(Rs))
    assert np.max(np.abs(back - Rs)) < 1e-12


def test_rot6d_degenerate_first_column():
    with pytest.raises(DegenerateRotationError):
        rot6d_to_matrix(np.array([0., 0., 0., 0., 1., 0.]))


def test_rot6d_degenerate_collinear():
    with pytest.raises(DegenerateRotationError):
        rot6d_to_matrix(np.array([1., 0., 0., 2., 0., 0.]))


def test_matrix_to_rot6d_identity():
    assert np.allclose(matrix_to_rot6d(np.eye(3)),
                       [1., 0., 0., 0., 1., 0.])


def test_matrix_to_rot6d_z90_columns():
    assert np.allclose(matrix_to_rot6d(rot_z(90.0)),
                       [0., 1., 0., -1., 0., 0.], atol=1e-15)


def test_axis_angle_zero_is_identity():
    assert np.allclose(axis_angle_to_matrix(np.zeros(3)), np.eye(3))


def test_axis_angle_quarter_turn_z():
    assert np.allclose(axis_angle_to_matrix(np.array([0., 0., np.pi / 2])),
                       rot_z(90.0), atol=1e-15)


def test_axis_angle_half_turn_x():
    R = axis_angle_to_matrix(np.array([np.pi, 0., 0.]))
    assert np.allclose(R, np.diag([1., -1., -1.]), atol=1e-15)


def test_axis_angle_batched_matches_scalar(rng):
    aa = rng.normal(size=(50, 3))
    batch = axis_angle_to_matrix(aa)
    for i in range(50):
        assert np.array_equal(batch[i], axis_angle_to_matrix(aa[i]))


def test_geodesic_same_rotation_is_zero(rng):
    # arccos loses about sqrt(eps) of precision at its endpoint, so the
    # self-distance of a generic rotation floors near 1e-6 degrees.
    for R in oracles.random_rotations(rng, 10):
        assert geodesic_angle_deg(R, R) < 1e-5
    assert geodesic_angle_deg(np.eye(3), np.eye(3)) == 0.0


def test_geodesic_identity_vs_z90():
    assert np.isclose(geodesic_angle_deg(np.eye(3), rot_z(90.0)), 90.0,
                      atol=1e-9)


def test_geodesic_shared_axis_difference():
    assert np.isclose(geodesic_angle_deg(rot_z(30.0), rot_z(150.0)), 120.0,
                      atol=1e-9)


def test_geodesic_symmetric_and_left_invariant(rng):
    R1, R2, L = oracles.random_rotations(rng, 3)
    a = geodesic_angle_deg(R1, R2)
    assert np.isclose(a, geodesic_angle_deg(R2, R1), atol=1e-9)
    assert np.isclose(a, geodesic_angle_deg(L @ R1, L @ R2), atol=1e-6)


def test_geodesic_rejects_bad_shapes():
    with pytest.raises(InvalidArgumentError):
        geodesic_angle_deg(np.eye(2), np.eye(2))


# ---------------------------------------------------------------------------
# Rigid transforms
# ---------------------------------------------------------------------------

def test_rigid_transform_identity_apply(rng):
    pts = rng.normal(size=(10, 3))
    assert np.array_equal(RigidTransform.identity().apply(pts), pts)


def test_rigid_transform_compose_inverse(rng):
    R1 = oracles.random_rotations(rng, 1)[0]
    R2 = oracles.random_rotations(rng, 1)[0]
    a = RigidTransform(R1, np.array([1., -2., 0.5]))
    b = RigidTransform(R2, np.array([0.1, 0.2, 0.3]))
    pts = rng.normal(size=(7, 3))
    assert np.allclose(a.compose(b).apply(pts), a.apply(b.apply(pts)),
                       atol=1e-12)
    assert np.allclose(a.inverse().apply(a.apply(pts)), pts, atol=1e-12)


def test_rigid_transform_matrix_round_trip(rng):
    R = oracles.random_rotations(rng, 1)[0]
    t = RigidTransform(R, np.array([3., 1., -4.]))
    again = RigidTransform.from_matrix(t.matrix())
    assert np.allclose(again.rotation, R)
    assert np.allclose(again.translation, t.translation)


def test_rigid_transform_rejects_non_rotation():
    with pytest.raises(InvalidArgumentError):
        RigidTransform(np.eye(3) * 1.1, np.zeros(3))


# ---------------------------------------------------------------------------
# Ray / triangle
# ---------------------------------------------------------------------------

TRI = Triangle(np.array([-1., -1., 5.]), np.array([1., -1., 5.]),
               np.array([0., 1., 5.]))


def test_ray_hits_axis_aligned_triangle():
    hit = ray_triangle_intersect(np.zeros(3), np.array([0., 0., 1.]), TRI)
    assert hit is not None
    t, point = hit
    assert np.isclose(t, 5.0, atol=1e-12)
    assert np.allclose(point, [0., 0., 5.], atol=1e-12)


def test_ray_parallel_to_triangle_misses():
    assert ray_triangle_intersect(np.zeros(3), np.array([1., 0., 0.]),
                                  TRI) is None


def test_ray_outside_barycentric_misses():
    assert ray_triangle_intersect(np.array([5., 5., 0.]),
                                  np.array([0., 0., 1.]), TRI) is None


def test_ray_behind_origin_misses():
    assert ray_triangle_intersect(np.zeros(3), np.array([0., 0., -1.]),
                                  TRI) is None


def test_ray_requires_unit_direction():
    with pytest.raises(InvalidArgumentError):
        ray_triangle_intersect(np.zeros(3), np.array([0., 0., 2.]), TRI)


def test_triangle_rejects_degenerate():
    with pytest.raises(InvalidArgumentError):
        Triangle(np.zeros(3), np.ones(3), 2.0 * np.ones(3))


def test_ray_triangle_matches_brute_oracle(rng):
    hits = 0
    for _ in range(10_000):
        a, b, c = rng.normal(size=(3, 3)) * 2.0
        area = 0.5 * np.linalg.norm(np.cross(b - a, c - a))
        if area < 1e-6:
            continue
        tri = Triangle(a, b, c)
        origin = rng.normal(size=3) * 3.0
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        got = ray_triangle_intersect(origin, direction, tri)
        want = oracles.ray_triangle_hit(origin, direction, a, b, c)
        assert (got is None) == (want is None)
        if got is not None:
            hits += 1
            t, point = got
            assert abs(t - want) < 1e-6
            assert np.allclose(point, origin + t * direction, atol=1e-9)
    assert hits > 100


# ---------------------------------------------------------------------------
# Point clouds
# ---------------------------------------------------------------------------

def test_point_cloud_validation():
    with pytest.raises(InvalidArgumentError):
        PointCloud(np.zeros((2, 2)))
    with pytest.raises(InvalidArgumentError):
        PointCloud(np.array([[0., 0., np.nan]]))
    with pytest.raises(InvalidArgumentError):
        PointCloud(np.zeros((3, 3)), beam_ids=np.zeros(2, dtype=np.int64))


def test_point_cloud_select_keeps_beam_ids():
    pc = PointCloud(np.arange(12.0).reshape(4, 3),
                    beam_ids=np.array([5, 6, 7, 8]))
    sel = pc.select(np.array([2, 0]))
    assert np.array_equal(sel.points, pc.points[[2, 0]])
    assert np.array_equal(sel.beam_ids, [7, 5])


def test_point_cloud_centroid():
    pc = PointCloud(np.array([[0., 0., 0.], [2., 4., 6.]]))
    assert np.allclose(pc.centroid(), [1., 2., 3.])


# ---------------------------------------------------------------------------
# Farthest point sampling
# ---------------------------------------------------------------------------

def test_fps_all_points_when_n_equals_count(rng):
    pts = rng.normal(size=(9, 3))
    idx = farthest_point_sample(pts, 9, seed=4)
    assert sorted(idx.tolist()) == list(range(9))


def test_fps_square_corners_beat_center():
    pts = np.array([[0., 0., 0.], [1., 0., 0.], [0., 1., 0.],
                    [1., 1., 0.], [0.5, 0.5, 0.]])
    for seed in range(8):
        idx = farthest_point_sample(pts, 4, seed=seed)
        assert sorted(idx.tolist()) == [0, 1, 2, 3]


def test_fps_single_point_is_seed_choice():
    pts = np.arange(15.0).reshape(5, 3)
    for seed in range(5):
        idx = farthest_point_sample(pts, 1, seed=seed)
        expected = int(np.random.default_rng(seed).integers(5))
        assert idx.tolist() == [expected]


def test_fps_deterministic(rng):
    pts = rng.normal(size=(40, 3))
    a = farthest_point_sample(pts, 12, seed=7)
    b = farthest_point_sample(pts, 12, seed=7)
    assert np.array_equal(a, b)


def test_fps_indices_distinct_even_with_duplicates():
    pts = np.zeros((6, 3))
    idx = farthest_point_sample(pts, 4, seed=1)
    assert len(set(idx.tolist())) == 4


def test_fps_attains_exhaustive_maxmin_on_small_clouds(rng):
    for _ in range(60):
        n_pts = int(rng.integers(3, 13))
        count = int(rng.integers(2, min(6, n_pts) + 1))
        pts = rng.normal(size=(n_pts, 3))
        idx = farthest_point_sample(pts, count, seed=int(rng.integers(100)))
        achieved = oracles.min_pairwise_sq(pts[idx])
        best = oracles.maxmin_subset_value(pts, count)
        assert achieved == best


def test_fps_requires_points_and_positive_n(rng):
    with pytest.raises(EmptyInputError):
        farthest_point_sample(np.zeros((0, 3)), 2, seed=0)
    with pytest.raises(InvalidArgumentError):
        farthest_point_sample(rng.normal(size=(4, 3)), 0, seed=0)


def test_fps_caps_count_at_cloud_size(rng):
    pts = rng.normal(size=(5, 3))
    idx = farthest_point_sample(pts, 11, seed=0)
    assert sorted(idx.tolist()) == list(range(5))


# ---------------------------------------------------------------------------
# kNN and chamfer
# ---------------------------------------------------------------------------

def test_knn_coincident_point():
    ref = np.array([[1., 1., 1.], [2., 2., 2.]])
    assert knn(np.array([[2., 2., 2.]]), ref, 1).tolist() == [[1]]


def test_knn_two_nearest_on_a_line():
    ref = np.array([[1., 0., 0.], [2., 0., 0.], [3., 0., 0.]])
    assert knn(np.zeros((1, 3)), ref, 2).tolist() == [[0, 1]]


def test_knn_ties_take_lowest_index():
    ref = np.array([[1., 0., 0.], [-1., 0., 0.], [0., 1., 0.]])
    assert knn(np.zeros((1, 3)), ref, 2).tolist() == [[0, 1]]


def test_knn_matches_brute_oracle(rng):
    q = rng.normal(size=(50, 3))
    r = rng.normal(size=(50, 3))
    assert np.array_equal(knn(q, r, 5), oracles.knn_brute(q, r, 5))


def test_knn_k_bounds(rng):
    r = rng.normal(size=(4, 3))
    with pytest.raises(InvalidArgumentError):
        knn(r, r, 5)
    with pytest.raises(InvalidArgumentError):
        knn(r, r, 0)


def test_nearest_sqdist_matches_brute(rng):
    src = rng.normal(size=(130, 3))
    dst = rng.normal(size=(210, 3))
    d2, idx = nearest_neighbor_sqdist(src, dst)
    od2, oidx = oracles.nearest_brute(src, dst)
    assert np.array_equal(idx, oidx)
    assert np.allclose(d2, od2, atol=1e-12)


def test_chamfer_zero_for_equal_clouds(rng):
    pts = rng.normal(size=(20, 3))
    assert unidirectional_chamfer(pts, pts) == 0.0


def test_chamfer_single_min_by_hand():
    src = np.array([[0., 0., 0.]])
    dst = np.array([[1., 0., 0.], [3., 0., 0.]])
    assert np.isclose(unidirectional_chamfer(src, dst), 1.0)


def test_chamfer_is_asymmetric():
    src = np.array([[0., 0., 0.]])
    dst = np.array([[1., 0., 0.], [3., 0., 0.]])
    assert np.isclose(unidirectional_chamfer(dst, src), 5.0)


def test_chamfer_rejects_empty():
    with pytest.raises(EmptyInputError):
        unidirectional_chamfer(np.zeros((0, 3)), np.ones((1, 3)))
    with pytest.raises(EmptyInputError):
        unidirectional_chamfer(np.ones((1, 3)), np.zeros((0, 3)))
