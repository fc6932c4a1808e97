"""Spinning LiDAR scan simulation over triangle meshes.

Beams leave a fixed sensor center on a regular azimuth/elevation grid and
record the first triangle hit within range. Everything is deterministic:
beam order is fixed, distance ties go to the lowest triangle index, and
the per-beam results never depend on how work is split across threads.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import EmptyInputError, FormatError, InvalidArgumentError
from .geometry import MIN_TRIANGLE_AREA, PointCloud, as_points
from .textutil import fmt_float, fmt_floats, parse_floats, read_records

DEFAULT_H_RESOLUTION = 2048
DEFAULT_V_LINES = 128
DEFAULT_H_FOV_DEG = 360.0
DEFAULT_V_FOV_DEG = 45.0
DEFAULT_CENTER = (0.0, 0.0, 2.0)
DEFAULT_MAX_RANGE = 120.0

BODY_LABEL = "body"


@dataclass
class SensorSpec:
    """Geometry of the simulated scanner.

    Azimuth is measured from the +y axis toward +x; elevation from the
    horizontal plane toward +z. A 360 degree horizontal field of view is
    sampled with an exclusive endpoint (no duplicated seam column); any
    narrower field includes both endpoints. Elevation always includes both
    extreme lines, so the lines span the full +-v_fov_deg/2.
    """
    h_resolution: int = DEFAULT_H_RESOLUTION
    v_lines: int = DEFAULT_V_LINES
    h_fov_deg: float = DEFAULT_H_FOV_DEG
    v_fov_deg: float = DEFAULT_V_FOV_DEG
    center: tuple = DEFAULT_CENTER
    max_range: float = DEFAULT_MAX_RANGE

    def __post_init__(self):
        self.h_resolution = int(self.h_resolution)
        self.v_lines = int(self.v_lines)
        self.h_fov_deg = float(self.h_fov_deg)
        self.v_fov_deg = float(self.v_fov_deg)
        self.center = tuple(float(c) for c in self.center)
        self.max_range = float(self.max_range)
        if self.h_resolution < 1 or self.v_lines < 1:
            raise InvalidArgumentError(
                "h_resolution and v_lines must be >= 1")
        if not 0.0 < self.h_fov_deg <= 360.0:
            raise InvalidArgumentError(
                f"h_fov_deg must be in (0, 360], got {self.h_fov_deg}")
        if not 0.0 <= self.v_fov_deg < 180.0:
            raise InvalidArgumentError(
                f"v_fov_deg must be in [0, 180), got {self.v_fov_deg}")
        if len(self.center) != 3 or not np.isfinite(self.center).all():
            raise InvalidArgumentError("center must be 3 finite values")
        if not self.max_range > 0.0:
            raise InvalidArgumentError(
                f"max_range must be positive, got {self.max_range}")

    @property
    def n_beams(self):
        return self.h_resolution * self.v_lines


_SPEC_KEYS = ("h_resolution", "v_lines", "h_fov_deg", "v_fov_deg",
              "center", "max_range")


def load_sensor_spec(path):
    """Read a SensorSpec from a key-value text file (see FORMATS.md).

    Keys not present keep their defaults; unknown or repeated keys are
    format errors.
    """
    values = {}
    for lineno, tokens in read_records(path):
        key = tokens[0]
        if key not in _SPEC_KEYS:
            raise FormatError(path, f"unknown sensor key {key!r}", line=lineno)
        if key in values:
            raise FormatError(path, f"duplicate sensor key {key!r}",
                              line=lineno)
        if key == "center":
            values[key] = tuple(parse_floats(path, lineno, tokens[1:], 3))
        else:
            (values[key],) = parse_floats(path, lineno, tokens[1:], 1)
    try:
        return SensorSpec(**values)
    except InvalidArgumentError as exc:
        raise FormatError(path, f"invalid sensor spec: {exc}") from exc


def save_sensor_spec(path, spec):
    lines = ["# lidarmocap sensor spec",
             f"h_resolution {spec.h_resolution}",
             f"v_lines {spec.v_lines}",
             f"h_fov_deg {fmt_float(spec.h_fov_deg)}",
             f"v_fov_deg {fmt_float(spec.v_fov_deg)}",
             f"center {fmt_floats(spec.center)}",
             f"max_range {fmt_float(spec.max_range)}"]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass
class TriangleMesh:
    """An indexed triangle mesh with a label used for body segmentation."""
    vertices: np.ndarray
    faces: np.ndarray
    label: str = BODY_LABEL

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        f = np.asarray(self.faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3 or v.shape[0] < 3:
            raise InvalidArgumentError(
                f"vertices must be (V, 3) with V >= 3, got {v.shape}")
        if not np.isfinite(v).all():
            raise InvalidArgumentError("mesh vertices contain non-finite "
                                       "values")
        if f.ndim != 2 or f.shape[1] != 3 or f.shape[0] < 1:
            raise InvalidArgumentError(
                f"faces must be (F, 3) with F >= 1, got {f.shape}")
        if f.min() < 0 or f.max() >= v.shape[0]:
            raise InvalidArgumentError(
                f"face indices must be in [0, {v.shape[0] - 1}]")
        tri = v[f]
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        areas = 0.5 * np.linalg.norm(cross, axis=1)
        bad = np.nonzero(areas <= MIN_TRIANGLE_AREA)[0]
        if bad.size:
            raise InvalidArgumentError(
                f"face {bad[0]} is degenerate (area {areas[bad[0]]:g} m^2)")
        self.vertices = v
        self.faces = f

    @property
    def n_faces(self):
        return self.faces.shape[0]

    def transformed(self, rigid):
        """This mesh with vertices moved by a RigidTransform."""
        return TriangleMesh(rigid.apply(self.vertices), self.faces,
                            self.label)


def beam_directions(spec):
    """Unit beam directions for a sensor, shape (n_beams, 3).

    Beams are line-major: all azimuths of the lowest elevation line first,
    then the next line up. Direction is
    (cos(el) sin(az), cos(el) cos(az), sin(el)).
    """
    n_az = spec.h_resolution
    if spec.h_fov_deg == 360.0:
        az = -180.0 + np.arange(n_az) * (360.0 / n_az)
    elif n_az == 1:
        az = np.zeros(1)
    else:
        az = np.linspace(-spec.h_fov_deg / 2.0, spec.h_fov_deg / 2.0, n_az)
    if spec.v_lines == 1:
        el = np.zeros(1)
    else:
        el = np.linspace(-spec.v_fov_deg / 2.0, spec.v_fov_deg / 2.0,
                         spec.v_lines)
    az = np.radians(az)
    el = np.radians(el)
    cos_el = np.cos(el)[:, None]
    sin_el = np.sin(el)[:, None]
    sin_az = np.sin(az)[None, :]
    cos_az = np.cos(az)[None, :]
    dirs = np.empty((spec.v_lines, n_az, 3))
    dirs[:, :, 0] = cos_el * sin_az
    dirs[:, :, 1] = cos_el * cos_az
    dirs[:, :, 2] = sin_el + np.zeros_like(sin_az)
    return dirs.reshape(-1, 3)


class _PackedScene:
    """Triangle soup of one or more meshes, precomputed for ray casting."""

    def __init__(self, meshes):
        if not meshes:
            raise EmptyInputError("scene contains no meshes")
        tris = []
        labels = []
        for mesh in meshes:
            tris.append(mesh.vertices[mesh.faces])
            labels.extend([mesh.label] * mesh.n_faces)
        tri = np.concatenate(tris, axis=0)
        self.tri_a = np.ascontiguousarray(tri[:, 0])
        self.e1 = np.ascontiguousarray(tri[:, 1] - tri[:, 0])
        self.e2 = np.ascontiguousarray(tri[:, 2] - tri[:, 0])
        cross = np.cross(self.e1, self.e2)
        norms = np.linalg.norm(cross, axis=1, keepdims=True)
        self.normals = cross / norms
        self.d00 = np.einsum("ij,ij->i", self.e1, self.e1)
        self.d01 = np.einsum("ij,ij->i", self.e1, self.e2)
        self.d11 = np.einsum("ij,ij->i", self.e2, self.e2)
        self.bden = self.d00 * self.d11 - self.d01 * self.d01
        self.labels = np.asarray(labels)

    def cast(self, origin, dirs, max_range, threads=1):
        origin = np.asarray(origin, dtype=np.float64).reshape(3)
        plane_num = np.einsum("ij,ij->i", self.normals,
                              self.tri_a - origin)
        args = (origin, dirs, self.tri_a, self.e1, self.e2, self.normals,
                plane_num, self.d00, self.d01, self.d11, self.bden,
                max_range)
        if threads <= 1 or dirs.shape[0] < 2 * threads:
            return _kernels.cast_rays(*args)
        bounds = np.linspace(0, dirs.shape[0], threads + 1).astype(int)
        chunks = [(args[0], dirs[lo:hi]) + args[2:]
                  for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda a: _kernels.cast_rays(*a), chunks))
        t = np.concatenate([p[0] for p in parts])
        idx = np.concatenate([p[1] for p in parts])
        return t, idx


def scan_scene(spec, meshes, body_only=False, threads=1):
    """One full scan of a list of meshes.

    Args:
        spec: SensorSpec.
        meshes: list of TriangleMesh (any mix of body and static geometry).
        body_only: keep only beams whose first hit lands on a mesh labeled
            "body" (static geometry still occludes).
        threads: beam-parallel worker count; results are identical for any
            value.

    Returns:
        PointCloud with beam_ids set to the originating beam index. An
        empty scene scans to an empty cloud.
    """
    if not meshes:
        return PointCloud(np.zeros((0, 3)), np.zeros(0, dtype=np.int64))
    packed = _PackedScene(meshes)
    dirs = beam_directions(spec)
    t, idx = packed.cast(spec.center, dirs, spec.max_range, threads)
    hit = idx >= 0
    if body_only:
        body = np.zeros(len(packed.labels) + 1, dtype=bool)
        body[:-1] = packed.labels == BODY_LABEL
        hit = hit & body[idx]
    beam_ids = np.nonzero(hit)[0]
    points = (np.asarray(spec.center)
              + t[beam_ids, None] * dirs[beam_ids])
    return PointCloud(points, beam_ids)


def simulate_sequence(spec, frames, body_only=False, threads=1):
    """Scan a mesh animation: one scan per frame of meshes.

    Parallelizes over frames; each frame is a pure function of its meshes,
    so results are identical for any thread count.

    Args:
        frames: non-empty list of mesh lists, one list per frame.

    Returns:
        list of PointCloud, one per frame.
    """
    if not frames:
        raise EmptyInputError("animation contains no frames")
    if threads <= 1 or len(frames) == 1:
        return [scan_scene(spec, frame, body_only=body_only, threads=threads)
                for frame in frames]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(
            lambda frame: scan_scene(spec, frame, body_only=body_only),
            frames))


def crop_occlusion(pc, origin, radius):
    """Keep exactly the points strictly farther than `radius` from `origin`.

    A point at exactly the radius is removed; input order is preserved.
    """
    if radius < 0.0:
        raise InvalidArgumentError(f"radius must be >= 0, got {radius}")
    if not isinstance(pc, PointCloud):
        pc = PointCloud(as_points(pc))
    origin = np.asarray(origin, dtype=np.float64).reshape(3)
    diff = pc.points - origin
    d2 = np.einsum("ij,ij->i", diff, diff)
    return pc.select(d2 > radius * radius)


def random_crop(pc, radius_range, seed):
    """Crop around a seed-chosen cloud point with a seed-drawn radius.

    The crop center is a point of the cloud picked uniformly; the radius
    is uniform in [radius_range[0], radius_range[1]). Note the center
    point itself is removed whenever the radius is positive or zero
    (distance 0 is never > r).
    """
    lo, hi = (float(radius_range[0]), float(radius_range[1]))
    if lo < 0.0 or hi < lo:
        raise InvalidArgumentError(
            f"radius range must satisfy 0 <= lo <= hi, got ({lo}, {hi})")
    if not isinstance(pc, PointCloud):
        pc = PointCloud(as_points(pc))
    if len(pc) == 0:
        raise EmptyInputError("cannot crop an empty cloud")
    rng = np.random.default_rng(seed)
    center = pc.points[int(rng.integers(len(pc)))]
    radius = float(rng.uniform(lo, hi))
    return crop_occlusion(pc, center, radius)
