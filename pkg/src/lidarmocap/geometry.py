"""Rotation representations, ray-triangle intersection, sampling, and
point-set distances.

Conventions:
    * Points are float64 arrays of shape (N, 3) in meters.
    * Rotations are 3x3 matrices acting on column vectors.
    * All tie breaks resolve to the lowest index, so every routine is
      deterministic for a given input and seed.
"""
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import _kernels
from .errors import (DegenerateRotationError, EmptyInputError,
                     InvalidArgumentError)

# Norms below this cannot be safely normalized.
DEGENERATE_NORM = 1e-12
# Orthonormality tolerance for rotation validity checks.
ROTATION_TOL = 1e-6
# Triangles with area at or below this are rejected as degenerate.
MIN_TRIANGLE_AREA = 1e-12
# farthest_point_sample certifies optimality by enumeration when the number
# of candidate subsets is at most this.
FPS_EXACT_SUBSET_LIMIT = 1024


def as_points(pc, allow_empty=True):
    """Coerce a PointCloud or array-like to a validated (N, 3) float64 array.

    Raises:
        InvalidArgumentError: wrong shape or non-finite coordinates.
        EmptyInputError: empty input when allow_empty is False.
    """
    if isinstance(pc, PointCloud):
        pts = pc.points
    else:
        pts = np.asarray(pc, dtype=np.float64)
        if pts.ndim == 1 and pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise InvalidArgumentError(
                f"expected points of shape (N, 3), got {pts.shape}")
        if not np.isfinite(pts).all():
            raise InvalidArgumentError("points contain non-finite values")
    if not allow_empty and pts.shape[0] == 0:
        raise EmptyInputError("operation requires at least one point")
    return pts


@dataclass
class PointCloud:
    """A set of 3D points, optionally tagged with originating beam indices."""
    points: np.ndarray
    beam_ids: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1 and pts.size == 0:
            pts = pts.reshape(0, 3)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise InvalidArgumentError(
                f"expected points of shape (N, 3), got {pts.shape}")
        if not np.isfinite(pts).all():
            raise InvalidArgumentError("points contain non-finite values")
        self.points = pts
        if self.beam_ids is not None:
            ids = np.asarray(self.beam_ids, dtype=np.int64).reshape(-1)
            if ids.shape[0] != pts.shape[0]:
                raise InvalidArgumentError(
                    f"beam_ids length {ids.shape[0]} does not match "
                    f"{pts.shape[0]} points")
            self.beam_ids = ids

    def __len__(self):
        return self.points.shape[0]

    def select(self, index):
        """A new cloud containing the points at `index` (any numpy index)."""
        ids = None if self.beam_ids is None else self.beam_ids[index]
        return PointCloud(self.points[index], ids)

    def centroid(self):
        if len(self) == 0:
            raise EmptyInputError("centroid of an empty cloud")
        return self.points.mean(axis=0)


# ---------------------------------------------------------------------------
# Rotations
# ---------------------------------------------------------------------------

def rot6d_to_matrix(r6):
    """Rotation matrix from a 6D representation (first two matrix columns).

    Gram-Schmidt: b1 = normalize(a1), b2 = normalize(a2 - (b1.a2) b1),
    b3 = b1 x b2. Supports batching: (..., 6) -> (..., 3, 3).

    Raises:
        DegenerateRotationError: a1 near zero or a2 near parallel to a1.
    """
    r = np.asarray(r6, dtype=np.float64)
    if r.shape[-1] != 6:
        raise InvalidArgumentError(
            f"expected trailing dimension 6, got {r.shape}")
    a1 = r[..., :3]
    a2 = r[..., 3:]
    n1 = np.linalg.norm(a1, axis=-1, keepdims=True)
    if np.any(n1 <= DEGENERATE_NORM):
        raise DegenerateRotationError("first 6D column has near-zero norm")
    b1 = a1 / n1
    proj = np.sum(b1 * a2, axis=-1, keepdims=True)
    resid = a2 - proj * b1
    n2 = np.linalg.norm(resid, axis=-1, keepdims=True)
    if np.any(n2 <= DEGENERATE_NORM):
        raise DegenerateRotationError(
            "6D columns are near collinear; rotation is underdetermined")
    b2 = resid / n2
    b3 = np.cross(b1, b2)
    return np.stack([b1, b2, b3], axis=-1)


def matrix_to_rot6d(R):
    """First two columns of R, flattened column-major: (..., 3, 3) -> (..., 6)."""
    R = np.asarray(R, dtype=np.float64)
    if R.shape[-2:] != (3, 3):
        raise InvalidArgumentError(f"expected (..., 3, 3), got {R.shape}")
    return np.concatenate([R[..., :, 0], R[..., :, 1]], axis=-1)


def axis_angle_to_matrix(aa):
    """Rodrigues rotation from an axis-angle vector (angle = norm, radians).

    The zero vector maps to the identity. Supports batching:
    (..., 3) -> (..., 3, 3).
    """
    aa = np.asarray(aa, dtype=np.float64)
    if aa.shape[-1] != 3:
        raise InvalidArgumentError(
            f"expected trailing dimension 3, got {aa.shape}")
    angle = np.linalg.norm(aa, axis=-1, keepdims=True)
    safe = np.where(angle > 0.0, angle, 1.0)
    axis = aa / safe
    x = axis[..., 0]
    y = axis[..., 1]
    z = axis[..., 2]
    a = angle[..., 0]
    c = np.cos(a)
    s = np.sin(a)
    t = 1.0 - c
    row0 = np.stack([t * x * x + c, t * x * y - s * z, t * x * z + s * y], -1)
    row1 = np.stack([t * x * y + s * z, t * y * y + c, t * y * z - s * x], -1)
    row2 = np.stack([t * x * z - s * y, t * y * z + s * x, t * z * z + c], -1)
    return np.stack([row0, row1, row2], axis=-2)


def is_rotation(R, tol=ROTATION_TOL):
    """True when R is orthonormal with determinant +1 (within tol)."""
    R = np.asarray(R, dtype=np.float64)
    if R.shape[-2:] != (3, 3) or not np.isfinite(R).all():
        return False
    eye = np.eye(3)
    gram = np.swapaxes(R, -1, -2) @ R
    if not np.all(np.abs(gram - eye) <= tol):
        return False
    return bool(np.all(np.abs(np.linalg.det(R) - 1.0) <= tol))


def require_rotations(R, what="rotation"):
    """Raise InvalidArgumentError unless every matrix in R is a rotation."""
    if not is_rotation(R):
        raise InvalidArgumentError(f"{what} is not a valid rotation matrix")


def geodesic_angle_deg(R1, R2):
    """Geodesic distance between rotations in degrees.

    arccos(clamp((trace(R1^T R2) - 1) / 2)). Batched over leading dims.
    """
    R1 = np.asarray(R1, dtype=np.float64)
    R2 = np.asarray(R2, dtype=np.float64)
    if R1.shape[-2:] != (3, 3) or R2.shape[-2:] != (3, 3):
        raise InvalidArgumentError("geodesic_angle_deg expects (..., 3, 3)")
    tr = np.sum(R1 * R2, axis=(-2, -1))
    cosang = np.clip((tr - 1.0) / 2.0, -1.0, 1.0)
    return np.degrees(np.arccos(cosang))


@dataclass(frozen=True)
class RigidTransform:
    """A rotation followed by a translation: x -> R x + t."""
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        require_rotations(R.reshape(3, 3), "RigidTransform.rotation")
        if not np.isfinite(t).all():
            raise InvalidArgumentError("translation must be finite")
        object.__setattr__(self, "rotation", R.reshape(3, 3))
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (4, 4):
            raise InvalidArgumentError(f"expected a 4x4 matrix, got {m.shape}")
        return cls(m[:3, :3], m[:3, 3])

    def matrix(self):
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def apply(self, points):
        pts = np.asarray(points, dtype=np.float64)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        out = pts @ self.rotation.T + self.translation
        return out[0] if single else out

    def compose(self, other):
        """The transform equivalent to applying `other` first, then self."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation
                              + self.translation)

    def inverse(self):
        return RigidTransform(self.rotation.T,
                              -(self.rotation.T @ self.translation))


# ---------------------------------------------------------------------------
# Triangles and rays
# ---------------------------------------------------------------------------

@dataclass
class Triangle:
    """A 3D triangle with a unit normal; degenerate triangles are rejected."""
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    normal: np.ndarray = field(init=False)
    area: float = field(init=False)

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=np.float64).reshape(3)
        self.b = np.asarray(self.b, dtype=np.float64).reshape(3)
        self.c = np.asarray(self.c, dtype=np.float64).reshape(3)
        for v in (self.a, self.b, self.c):
            if not np.isfinite(v).all():
                raise InvalidArgumentError("triangle vertex is non-finite")
        cross = np.cross(self.b - self.a, self.c - self.a)
        norm = float(np.linalg.norm(cross))
        self.area = 0.5 * norm
        if self.area <= MIN_TRIANGLE_AREA:
            raise InvalidArgumentError(
                f"degenerate triangle (area {self.area:g} m^2)")
        self.normal = cross / norm


def ray_triangle_intersect(origin, direction, tri):
    """First intersection of a ray with a triangle, or None.

    The ray is origin + t * direction for t > 1e-6 (hits closer than that
    graze the origin and do not count). Rays within 1e-9 of parallel to the
    triangle plane miss. Boundary points (edges, vertices) count as hits.

    Args:
        origin: (3,) ray origin.
        direction: (3,) unit direction (norm within 1e-6 of 1).
        tri: Triangle.

    Returns:
        (t, point) on hit, None on miss.
    """
    origin = np.asarray(origin, dtype=np.float64).reshape(3)
    direction = np.asarray(direction, dtype=np.float64).reshape(3)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-6:
        raise InvalidArgumentError("ray direction must be a unit vector")
    n = tri.normal
    den = float(n @ direction)
    if abs(den) < _kernels.PARALLEL_EPS:
        return None
    t = float(n @ (tri.a - origin)) / den
    if t <= _kernels.MIN_HIT_T:
        return None
    p = origin + t * direction
    e1 = tri.b - tri.a
    e2 = tri.c - tri.a
    w = p - tri.a
    d00 = float(e1 @ e1)
    d01 = float(e1 @ e2)
    d11 = float(e2 @ e2)
    d20 = float(w @ e1)
    d21 = float(w @ e2)
    den_b = d00 * d11 - d01 * d01
    u = (d11 * d20 - d01 * d21) / den_b
    v = (d00 * d21 - d01 * d20) / den_b
    if u < 0.0 or v < 0.0 or u + v > 1.0:
        return None
    return t, p


# ---------------------------------------------------------------------------
# Sampling and distances
# ---------------------------------------------------------------------------

def _min_pairwise_sq(d2, subset):
    best = math.inf
    for i, a in enumerate(subset):
        for b in subset[i + 1:]:
            v = d2[a, b]
            if v < best:
                best = v
    return best


def _certify_maxmin(pts, greedy_idx, start, count):
    """Upgrade a greedy FPS pick to the exact max-min dispersion optimum.

    Only called for tiny instances (subset count bounded by
    FPS_EXACT_SUBSET_LIMIT). Among optimal subsets, prefers those that
    contain the greedy start, then the lexicographically smallest; the
    greedy result is kept whenever it already attains the optimum.
    """
    N = pts.shape[0]
    diff = pts[:, None, :] - pts[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    greedy_val = _min_pairwise_sq(d2, list(greedy_idx))
    # The greedy set wins every tie, so only a strictly better subset
    # replaces it; among better subsets, prefer ones containing the start,
    # then the lexicographically smallest.
    best_key = (greedy_val, 2)
    best_subset = None
    for subset in combinations(range(N), count):
        key = (_min_pairwise_sq(d2, subset), 1 if start in subset else 0)
        if key > best_key:
            best_key = key
            best_subset = subset
    if best_subset is None:
        return greedy_idx
    ordered = sorted(best_subset)
    if start in best_subset:
        ordered = [start] + [i for i in ordered if i != start]
    return np.asarray(ordered, dtype=np.int64)


def farthest_point_sample(pc, n, seed):
    """Indices of min(n, N) points spread to maximize mutual distance.

    Greedy farthest point sampling: the first index is drawn from the seed,
    each subsequent index maximizes distance to the already-selected set,
    and distance ties resolve to the lowest index. On tiny instances (at
    most FPS_EXACT_SUBSET_LIMIT candidate subsets) the greedy pick is
    checked against exhaustive max-min dispersion search and replaced by
    the optimum when the greedy set falls short, so small-sample results
    are exactly optimal.

    Args:
        pc: point cloud or (N, 3) array, N >= 1.
        n: requested sample size, >= 1.
        seed: integer seed controlling the starting index.

    Returns:
        (min(n, N),) int64 indices, all distinct, in selection order.
    """
    pts = as_points(pc, allow_empty=False)
    if int(n) < 1:
        raise InvalidArgumentError(f"sample size must be >= 1, got {n}")
    N = pts.shape[0]
    count = min(int(n), N)
    start = int(np.random.default_rng(seed).integers(N))
    idx = _kernels.fps_greedy(pts, start, count)
    if 2 <= count < N and math.comb(N, count) <= FPS_EXACT_SUBSET_LIMIT:
        idx = _certify_maxmin(pts, idx, start, count)
    return idx


def knn(query, reference, k):
    """Indices of the k nearest reference points for each query point.

    Returns (Q, k) int64, each row ordered by ascending distance with ties
    resolved to the lowest reference index.
    """
    q = as_points(query, allow_empty=False)
    r = as_points(reference, allow_empty=False)
    k = int(k)
    if k < 1 or k > r.shape[0]:
        raise InvalidArgumentError(
            f"k must be in [1, {r.shape[0]}], got {k}")
    out = np.empty((q.shape[0], k), dtype=np.int64)
    chunk = max(1, int(4_000_000 / max(1, r.shape[0])))
    for q0 in range(0, q.shape[0], chunk):
        q1 = min(q0 + chunk, q.shape[0])
        diff = q[q0:q1, None, :] - r[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        out[q0:q1] = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return out


def nearest_neighbor_sqdist(src, dst):
    """Per-src squared distance to (and index of) the nearest dst point."""
    s = as_points(src)
    d = as_points(dst, allow_empty=False)
    return _kernels.nearest_sqdist(s, d)


def unidirectional_chamfer(src, dst):
    """Mean over src points of the squared distance to the nearest dst point.

    Not symmetric: unidirectional_chamfer(a, b) != unidirectional_chamfer(b, a)
    in general. Units are squared meters.
    """
    s = as_points(src, allow_empty=False)
    d = as_points(dst, allow_empty=False)
    d2, _ = _kernels.nearest_sqdist(s, d)
    return float(d2.mean())
