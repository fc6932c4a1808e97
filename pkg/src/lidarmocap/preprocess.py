"""Raw LiDAR frames to per-person normalized sequences.

Pipeline stages: background removal, DBSCAN instance clustering, Hungarian
centroid tracking, fixed-count resampling, and ground-truth vertex
guidance sampling. Every stage is deterministic: cluster and track order
follow point indices, and all randomness flows from explicit seeds.
"""
import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree

from . import _kernels
from .errors import EmptyInputError, InvalidArgumentError
from .geometry import PointCloud, as_points, farthest_point_sample, knn

# Fixed per-frame point count after normalization.
N_FPS = 256
# Clustering defaults for 128-beam outdoor scans.
DEFAULT_EPS = 0.4
DEFAULT_MIN_PTS = 10
# Track gating: a cluster farther than this from a track's last centroid
# cannot continue that track.
DEFAULT_MAX_DIST = 1.0


def remove_background(frame, background, threshold):
    """Points of `frame` farther than `threshold` from every background point.

    A point exactly at the threshold distance is treated as background.
    An empty background keeps the frame unchanged (with a warning), since
    there is nothing to subtract.
    """
    if not threshold > 0.0:
        raise InvalidArgumentError(
            f"background threshold must be > 0, got {threshold}")
    if not isinstance(frame, PointCloud):
        frame = PointCloud(as_points(frame))
    bg = as_points(background)
    if bg.shape[0] == 0:
        warnings.warn("empty background cloud; frame returned unchanged",
                      stacklevel=2)
        return frame
    d2, _ = _kernels.nearest_sqdist(frame.points, bg)
    return frame.select(d2 > threshold * threshold)


def cluster_instances(pc, eps, min_pts):
    """DBSCAN clustering of a point cloud.

    A point is core when its eps-ball (inclusive of the point itself)
    holds at least min_pts points. Clusters grow breadth-first from core
    points in ascending index order, so a border point reachable from
    several clusters joins the earliest-formed one. Returned clusters are
    sorted-ascending index arrays, ordered by their smallest member index;
    points in no cluster come back in the noise array.

    Returns:
        (clusters, noise): list of int64 index arrays and an int64 array.
    """
    if not eps > 0.0:
        raise InvalidArgumentError(f"eps must be > 0, got {eps}")
    if int(min_pts) < 1:
        raise InvalidArgumentError(f"min_pts must be >= 1, got {min_pts}")
    min_pts = int(min_pts)
    pts = as_points(pc)
    N = pts.shape[0]
    if N == 0:
        return [], np.empty(0, dtype=np.int64)
    tree = cKDTree(pts)
    neighborhoods = tree.query_ball_point(pts, eps)
    neighborhoods = [np.sort(np.asarray(nb, dtype=np.int64))
                     for nb in neighborhoods]
    core = np.array([len(nb) >= min_pts for nb in neighborhoods])
    label = np.full(N, -1, dtype=np.int64)
    clusters = []
    for seed in range(N):
        if not core[seed] or label[seed] != -1:
            continue
        cid = len(clusters)
        label[seed] = cid
        members = [seed]
        queue = deque([seed])
        while queue:
            j = queue.popleft()
            for k in neighborhoods[j]:
                if label[k] != -1:
                    continue
                label[k] = cid
                members.append(int(k))
                if core[k]:
                    queue.append(int(k))
        clusters.append(np.sort(np.asarray(members, dtype=np.int64)))
    clusters.sort(key=lambda c: int(c[0]))
    noise = np.nonzero(label == -1)[0].astype(np.int64)
    return clusters, noise


def hungarian_assign(cost):
    """Minimum-total-cost one-to-one assignment.

    Args:
        cost: (M, N) finite cost matrix.

    Returns:
        (pairs, total): min(M, N) (row, col) pairs sorted by row, and the
        summed cost of the assignment.
    """
    c = np.asarray(cost, dtype=np.float64)
    if c.ndim != 2:
        raise InvalidArgumentError(f"cost must be 2-D, got shape {c.shape}")
    if c.size and not np.isfinite(c).all():
        raise InvalidArgumentError("cost matrix contains non-finite values")
    if c.shape[0] == 0 or c.shape[1] == 0:
        return [], 0.0
    rows, cols = linear_sum_assignment(c)
    pairs = sorted(zip(rows.tolist(), cols.tolist()))
    total = float(c[rows, cols].sum())
    return pairs, total


@dataclass
class Track:
    """One tracked instance: per-frame clouds and centroids, gaps allowed."""
    track_id: int
    frames: dict = field(default_factory=dict)
    centroids: dict = field(default_factory=dict)

    def add_frame(self, frame_index, cloud):
        if frame_index in self.frames:
            raise InvalidArgumentError(
                f"track {self.track_id} already has frame {frame_index}")
        if len(cloud) == 0:
            raise EmptyInputError("cannot add an empty cloud to a track")
        self.frames[frame_index] = cloud
        self.centroids[frame_index] = cloud.centroid()

    @property
    def last_frame(self):
        return max(self.frames)

    @property
    def last_centroid(self):
        return self.centroids[self.last_frame]

    def frame_indices(self):
        return sorted(self.frames)


def track_instances(tracks, clusters, frame_index, max_dist):
    """Continue tracks with this frame's clusters via Hungarian matching.

    The cost is the Euclidean distance between a track's last centroid and
    a cluster's centroid; matched pairs with cost above max_dist are
    rejected. Unmatched clusters spawn new tracks (ids allocated in
    cluster order); unmatched tracks simply record no entry for the frame.

    Args:
        tracks: list of Track, updated in place.
        clusters: list of PointCloud for this frame.
        frame_index: integer frame key.
        max_dist: gating distance in meters.

    Returns:
        The same list of tracks, with new tracks appended.
    """
    if max_dist < 0.0:
        raise InvalidArgumentError(f"max_dist must be >= 0, got {max_dist}")
    centroids = [c.centroid() for c in clusters]
    matched_clusters = set()
    if tracks and clusters:
        cost = np.empty((len(tracks), len(clusters)))
        for i, tr in enumerate(tracks):
            for j, cc in enumerate(centroids):
                cost[i, j] = float(np.linalg.norm(tr.last_centroid - cc))
        pairs, _ = hungarian_assign(cost)
        for i, j in pairs:
            if cost[i, j] <= max_dist:
                tracks[i].add_frame(frame_index, clusters[j])
                matched_clusters.add(j)
    next_id = max((t.track_id for t in tracks), default=-1) + 1
    for j, cloud in enumerate(clusters):
        if j not in matched_clusters:
            track = Track(next_id)
            track.add_frame(frame_index, cloud)
            tracks.append(track)
            next_id += 1
    return tracks


def track_sequence(frame_clusters, max_dist=DEFAULT_MAX_DIST):
    """Fold track_instances over a whole sequence of per-frame clusters.

    Args:
        frame_clusters: list over frames of lists of PointCloud.

    Returns:
        list of Track, ordered by track id.
    """
    tracks = []
    for frame_index, clusters in enumerate(frame_clusters):
        track_instances(tracks, clusters, frame_index, max_dist)
    return tracks


@dataclass
class NormalizedFrame:
    """A fixed-count, zero-centered resampling of one instance frame."""
    points: np.ndarray
    loc: np.ndarray
    source_indices: np.ndarray


def normalize_frame(pc, seed, n_fps=N_FPS):
    """Resample a cloud to exactly n_fps points and subtract their mean.

    Clouds with at least n_fps points are downsampled by farthest point
    sampling; smaller clouds keep every point and are padded by seeded
    resampling with replacement. The subtracted mean is returned as loc.

    Returns:
        NormalizedFrame with exactly n_fps points; source_indices maps
        each output point back to an input index.
    """
    if int(n_fps) < 1:
        raise InvalidArgumentError(f"n_fps must be >= 1, got {n_fps}")
    n_fps = int(n_fps)
    pts = as_points(pc, allow_empty=False)
    N = pts.shape[0]
    if N >= n_fps:
        indices = farthest_point_sample(pts, n_fps, seed)
    else:
        rng = np.random.default_rng(seed)
        pad = rng.integers(0, N, size=n_fps - N)
        indices = np.concatenate([np.arange(N, dtype=np.int64),
                                  pad.astype(np.int64)])
    selected = pts[indices]
    loc = selected.mean(axis=0)
    return NormalizedFrame(selected - loc, loc, indices)


def vertex_guidance(pc, gt_vertices, gt_translation, k=1):
    """Ground-truth mesh vertices nearest to the captured points.

    The cloud is moved into the mesh frame by subtracting the ground-truth
    translation; each point then votes for its k nearest vertices and the
    deduplicated union is returned.

    Returns:
        Sorted unique int64 vertex indices.
    """
    pts = as_points(pc, allow_empty=False)
    verts = as_points(gt_vertices, allow_empty=False)
    tr = np.asarray(gt_translation, dtype=np.float64).reshape(3)
    nn = knn(pts - tr, verts, k)
    return np.unique(nn)
