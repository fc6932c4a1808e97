import numpy as np
import pytest

import oracles
from lidarmocap.errors import EmptyInputError, InvalidArgumentError
from lidarmocap.geometry import PointCloud
from lidarmocap.preprocess import (N_FPS, Track, cluster_instances,
                                   hungarian_assign, normalize_frame,
                                   remove_background, track_instances,
                                   track_sequence, vertex_guidance)


def blob(rng, center, n=30, scale=0.08):
    return rng.normal(scale=scale, size=(n, 3)) + np.asarray(center,
                                                             dtype=float)


# ---------------------------------------------------------------------------
# Background removal
# ---------------------------------------------------------------------------

def test_background_removal_of_itself_is_empty(rng):
    pts = rng.normal(size=(50, 3))
    out = remove_background(PointCloud(pts), PointCloud(pts), 0.1)
    assert len(out) == 0


def test_background_keeps_the_new_point(rng):
    bg = rng.normal(size=(50, 3))
    frame = np.vstack([bg, bg[0] + [1.0, 0.0, 0.0]])
    out = remove_background(PointCloud(frame), PointCloud(bg), 0.1)
    assert len(out) == 1
    assert np.allclose(out.points[0], bg[0] + [1.0, 0.0, 0.0])


def test_background_matches_brute_filter(rng):
    frame = rng.normal(size=(120, 3))
    bg = rng.normal(size=(80, 3))
    out = remove_background(PointCloud(frame), PointCloud(bg), 0.05)
    d2, _ = oracles.nearest_brute(frame, bg)
    keep = d2 > 0.05 ** 2
    assert np.array_equal(out.points, frame[keep])


def test_background_boundary_point_is_removed():
    frame = np.array([[0.05, 0.0, 0.0], [0.2, 0.0, 0.0]])
    bg = np.zeros((1, 3))
    out = remove_background(PointCloud(frame), PointCloud(bg), 0.05)
    assert np.array_equal(out.points, frame[[1]])


def test_empty_background_warns_and_passes_through(rng):
    pts = rng.normal(size=(10, 3))
    with pytest.warns(UserWarning):
        out = remove_background(PointCloud(pts),
                                PointCloud(np.zeros((0, 3))), 0.1)
    assert np.array_equal(out.points, pts)


# ---------------------------------------------------------------------------
# Clustering
# ---------------------------------------------------------------------------

def test_two_distant_blobs_form_two_clusters(rng):
    pts = np.vstack([blob(rng, (0, 0, 0)), blob(rng, (10, 0, 0))])
    clusters, noise = cluster_instances(PointCloud(pts), eps=0.5, min_pts=5)
    assert len(clusters) == 2
    assert len(noise) == 0
    assert sorted(clusters[0].tolist()) == list(range(30))
    assert sorted(clusters[1].tolist()) == list(range(30, 60))


def test_tight_cloud_is_one_cluster(rng):
    pts = blob(rng, (1, 2, 3), n=20, scale=0.01)
    clusters, noise = cluster_instances(PointCloud(pts), eps=0.5,
                                        min_pts=20)
    assert len(clusters) == 1
    assert len(noise) == 0


def test_isolated_point_is_noise(rng):
    pts = np.vstack([blob(rng, (0, 0, 0), n=12), [[50.0, 0.0, 0.0]]])
    clusters, noise = cluster_instances(PointCloud(pts), eps=0.5, min_pts=4)
    assert len(clusters) == 1
    assert noise.tolist() == [12]


def test_clusters_ordered_by_smallest_member(rng):
    pts = np.vstack([blob(rng, (10, 0, 0), n=10),
                     blob(rng, (0, 0, 0), n=10)])
    clusters, _ = cluster_instances(PointCloud(pts), eps=0.5, min_pts=3)
    assert clusters[0][0] < clusters[1][0]
    for ix in clusters:
        assert np.array_equal(ix, np.sort(ix))


def test_empty_cloud_clusters_to_nothing():
    clusters, noise = cluster_instances(PointCloud(np.zeros((0, 3))),
                                        eps=0.5, min_pts=3)
    assert clusters == []
    assert len(noise) == 0


def test_clustering_matches_brute_reachability(rng):
    for _ in range(25):
        n = int(rng.integers(5, 120))
        pts = rng.uniform(-2.0, 2.0, size=(n, 3))
        eps = float(rng.uniform(0.3, 0.9))
        min_pts = int(rng.integers(2, 6))
        clusters, noise = cluster_instances(PointCloud(pts), eps, min_pts)
        oc, on = oracles.dbscan_brute(pts, eps, min_pts)
        assert len(clusters) == len(oc)
        for got, want in zip(clusters, oc):
            assert np.array_equal(got, want)
        assert np.array_equal(noise, on)


def test_cluster_parameter_validation(rng):
    pc = PointCloud(rng.normal(size=(5, 3)))
    with pytest.raises(InvalidArgumentError):
        cluster_instances(pc, eps=0.0, min_pts=3)
    with pytest.raises(InvalidArgumentError):
        cluster_instances(pc, eps=0.5, min_pts=0)


# ---------------------------------------------------------------------------
# Assignment
# ---------------------------------------------------------------------------

def test_diagonal_dominant_cost_assigns_diagonal():
    cost = np.array([[0.1, 5.0, 5.0], [5.0, 0.1, 5.0], [5.0, 5.0, 0.1]])
    pairs, total = hungarian_assign(cost)
    assert pairs == [(0, 0), (1, 1), (2, 2)]
    assert np.isclose(total, 0.3)


def test_antidiagonal_two_by_two():
    pairs, total = hungarian_assign(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert pairs == [(0, 1), (1, 0)]
    assert total == 0.0


def test_assignment_matches_brute_force(rng):
    for _ in range(50):
        m = int(rng.integers(1, 6))
        n = int(rng.integers(1, 6))
        cost = rng.uniform(size=(m, n))
        pairs, total = hungarian_assign(cost)
        _, brute_total = oracles.hungarian_brute(cost)
        assert np.isclose(total, brute_total, atol=1e-12)
        assert len(pairs) == min(m, n)
        assert pairs == sorted(pairs)


def test_assignment_empty_matrix():
    pairs, total = hungarian_assign(np.zeros((0, 3)))
    assert pairs == []
    assert total == 0.0


# ---------------------------------------------------------------------------
# Tracking
# ---------------------------------------------------------------------------

def test_track_rejects_duplicate_frame(rng):
    track = Track(7)
    track.add_frame(0, PointCloud(rng.normal(size=(5, 3))))
    with pytest.raises(InvalidArgumentError):
        track.add_frame(0, PointCloud(rng.normal(size=(5, 3))))


def test_track_rejects_empty_cloud():
    track = Track(0)
    with pytest.raises(EmptyInputError):
        track.add_frame(0, PointCloud(np.zeros((0, 3))))


def test_stationary_clusters_continue_their_tracks(rng):
    a = PointCloud(blob(rng, (0, 0, 0)))
    b = PointCloud(blob(rng, (5, 0, 0)))
    tracks = track_instances([], [a, b], frame_index=0, max_dist=1.0)
    assert [t.track_id for t in tracks] == [0, 1]
    tracks = track_instances(tracks, [a, b], frame_index=1, max_dist=1.0)
    assert [t.track_id for t in tracks] == [0, 1]
    assert tracks[0].frame_indices() == [0, 1]
    assert np.allclose(tracks[0].last_centroid, a.centroid())


def test_crossing_clusters_keep_nearest_continuation(rng):
    left = blob(rng, (0, 0, 0))
    right = blob(rng, (4, 0, 0))
    tracks = track_instances([], [PointCloud(left), PointCloud(right)],
                             frame_index=0, max_dist=10.0)
    # swap the presentation order; centroids move only slightly
    moved_left = PointCloud(left + [0.3, 0.0, 0.0])
    moved_right = PointCloud(right - [0.3, 0.0, 0.0])
    tracks = track_instances(tracks, [moved_right, moved_left],
                             frame_index=1, max_dist=10.0)
    assert len(tracks) == 2
    by_id = {t.track_id: t for t in tracks}
    assert np.allclose(by_id[0].last_centroid, moved_left.centroid())
    assert np.allclose(by_id[1].last_centroid, moved_right.centroid())


def test_far_cluster_spawns_new_track(rng):
    a = PointCloud(blob(rng, (0, 0, 0)))
    tracks = track_instances([], [a], frame_index=0, max_dist=1.0)
    far = PointCloud(blob(rng, (30, 0, 0)))
    tracks = track_instances(tracks, [a, far], frame_index=1, max_dist=1.0)
    assert [t.track_id for t in tracks] == [0, 1]
    assert tracks[1].frame_indices() == [1]


def test_gap_leaves_track_unextended(rng):
    a = PointCloud(blob(rng, (0, 0, 0)))
    tracks = track_instances([], [a], frame_index=0, max_dist=1.0)
    tracks = track_instances(tracks, [], frame_index=1, max_dist=1.0)
    tracks = track_instances(tracks, [a], frame_index=2, max_dist=1.0)
    assert tracks[0].frame_indices() == [0, 2]


def test_track_sequence_two_walkers(rng):
    frames = []
    for t in range(5):
        frames.append([PointCloud(blob(rng, (0.2 * t, 0, 0))),
                       PointCloud(blob(rng, (8 - 0.2 * t, 0, 0)))])
    tracks = track_sequence(frames, max_dist=1.0)
    assert [t.track_id for t in tracks] == [0, 1]
    for track in tracks:
        assert track.frame_indices() == list(range(5))


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------

def test_normalize_downsamples_to_fixed_count(rng):
    pts = rng.normal(size=(300, 3))
    nf = normalize_frame(PointCloud(pts), seed=1)
    assert nf.points.shape == (N_FPS, 3)
    assert np.max(np.abs(nf.points.mean(axis=0))) < 1e-9
    assert len(set(nf.source_indices.tolist())) == N_FPS


def test_normalize_exact_count_keeps_the_set(rng):
    pts = rng.normal(size=(256, 3))
    nf = normalize_frame(PointCloud(pts), seed=2)
    assert sorted(nf.source_indices.tolist()) == list(range(256))


def test_normalize_pads_small_clouds_from_members(rng):
    pts = rng.normal(size=(100, 3))
    nf = normalize_frame(PointCloud(pts), seed=3)
    assert nf.points.shape == (N_FPS, 3)
    assert set(nf.source_indices.tolist()) <= set(range(100))
    # the first 100 entries keep every original point once
    assert nf.source_indices[:100].tolist() == list(range(100))
    recon = nf.points + nf.loc
    assert np.allclose(recon, pts[nf.source_indices], atol=1e-12)


def test_normalize_loc_is_mean_of_selected(rng):
    pts = rng.normal(size=(40, 3)) + [5.0, 1.0, 0.0]
    nf = normalize_frame(PointCloud(pts), seed=4, n_fps=16)
    assert np.allclose(nf.loc, pts[nf.source_indices].mean(axis=0))


def test_normalize_deterministic(rng):
    pts = rng.normal(size=(500, 3))
    a = normalize_frame(PointCloud(pts), seed=9)
    b = normalize_frame(PointCloud(pts), seed=9)
    assert np.array_equal(a.points, b.points)
    assert np.array_equal(a.source_indices, b.source_indices)


def test_normalize_rejects_empty():
    with pytest.raises(EmptyInputError):
        normalize_frame(PointCloud(np.zeros((0, 3))), seed=0)


# ---------------------------------------------------------------------------
# Vertex guidance
# ---------------------------------------------------------------------------

def test_guidance_recovers_all_vertices(rng):
    verts = rng.normal(size=(25, 3))
    tr = np.array([2.0, -1.0, 0.5])
    idx = vertex_guidance(PointCloud(verts + tr), verts, tr, k=1)
    assert idx.tolist() == list(range(25))


def test_guidance_single_point_single_vertex(rng):
    verts = rng.normal(size=(25, 3))
    tr = np.array([0.0, 4.0, 0.0])
    idx = vertex_guidance(PointCloud(verts[[7]] + tr), verts, tr, k=1)
    assert idx.tolist() == [7]


def test_guidance_matches_brute_union(rng):
    verts = rng.normal(size=(30, 3))
    pts = rng.normal(size=(15, 3))
    tr = np.array([1.0, 1.0, 1.0])
    idx = vertex_guidance(PointCloud(pts + tr), verts, tr, k=3)
    want = np.unique(oracles.knn_brute(pts, verts, 3))
    assert np.array_equal(idx, want)
