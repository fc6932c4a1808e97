"""On-disk sequence format: manifests, binary point frames, annotations.

Layout of a sequence directory:

    manifest.txt                 structured text, format-versioned
    sensor.cfg                   optional sensor spec (key-value text)
    frames/frame_000123.bin      count-prefixed little-endian float32 xyz
    persons/person_00.txt        per-person annotation (text)

Floats in text files use repr() (exact round trip); point frames store
float32. Writers take an exclusive lock (.lock file) on the directory.
Readers validate every documented invariant and fail with located
diagnostics; nothing is silently coerced.
"""
import os
import re
import struct
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .errors import (FormatError, InvalidArgumentError, SequenceLockedError)
from .geometry import PointCloud
from .scan_sim import TriangleMesh, save_sensor_spec
from .textutil import fmt_floats, parse_floats, parse_int, read_records

FORMAT_VERSION = 1
DEFAULT_FRAME_RATE_HZ = 10.0

_MANIFEST_NAME = "manifest.txt"
_LOCK_NAME = ".lock"
_ID_RE = re.compile(r"^[A-Za-z0-9_.-]+$")


@dataclass
class Frame:
    """One captured frame: a timestamp in seconds and its point cloud."""
    timestamp: float
    cloud: PointCloud

    def __post_init__(self):
        self.timestamp = float(self.timestamp)
        if not np.isfinite(self.timestamp):
            raise InvalidArgumentError("frame timestamp must be finite")
        if not isinstance(self.cloud, PointCloud):
            self.cloud = PointCloud(self.cloud)


@dataclass
class PersonAnnotations:
    """Ground-truth SMPL-style parameters for one person over a sequence.

    poses_aa holds per-frame, per-joint axis-angle rotations; shape is
    constant for the person; translations are per-frame, meters.
    """
    person_id: int
    shape: np.ndarray
    poses_aa: np.ndarray
    translations: np.ndarray
    source_path: str | None = None

    def __post_init__(self):
        self.person_id = int(self.person_id)
        if self.person_id < 0:
            raise InvalidArgumentError(
                f"person_id must be >= 0, got {self.person_id}")
        self.shape = np.asarray(self.shape, dtype=np.float64).reshape(-1)
        self.poses_aa = np.asarray(self.poses_aa, dtype=np.float64)
        self.translations = np.asarray(self.translations, dtype=np.float64)
        if self.poses_aa.ndim != 3 or self.poses_aa.shape[2] != 3:
            raise InvalidArgumentError(
                f"poses_aa must be (T, J, 3), got {self.poses_aa.shape}")
        T = self.poses_aa.shape[0]
        if self.translations.shape != (T, 3):
            raise InvalidArgumentError(
                f"translations must be ({T}, 3), "
                f"got {self.translations.shape}")
        for name, arr in (("shape", self.shape),
                          ("poses_aa", self.poses_aa),
                          ("translations", self.translations)):
            if not np.isfinite(arr).all():
                raise InvalidArgumentError(
                    f"{name} contains non-finite values")

    @property
    def n_frames(self):
        return self.poses_aa.shape[0]

    @property
    def n_joints(self):
        return self.poses_aa.shape[1]

    def as_prediction(self):
        """Convert to a metrics.SmplPrediction (rotation matrices)."""
        from .metrics import SmplPrediction
        return SmplPrediction.from_axis_angle(self.poses_aa, self.shape,
                                              self.translations)


@dataclass
class SequenceManifest:
    sequence_id: str
    frame_rate_hz: float = DEFAULT_FRAME_RATE_HZ
    coordinate_frame: str = "sensor"
    sensor_spec: str | None = None
    timestamps: list = field(default_factory=list)
    frame_files: list = field(default_factory=list)
    person_files: dict = field(default_factory=dict)

    @property
    def frame_count(self):
        return len(self.frame_files)

    @property
    def person_ids(self):
        return sorted(self.person_files)


@dataclass
class Sequence:
    manifest: SequenceManifest
    frames: list
    annotations: dict


# ---------------------------------------------------------------------------
# Point frames (binary)
# ---------------------------------------------------------------------------

def write_point_frame(path, cloud):
    """Count-prefixed little-endian float32 xyz records."""
    pts = cloud.points if isinstance(cloud, PointCloud) else \
        PointCloud(cloud).points
    payload = np.ascontiguousarray(pts, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", pts.shape[0]))
        fh.write(payload.tobytes())


def read_point_frame(path):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise FormatError(path, f"cannot read file: {exc.strerror}") from exc
    if len(data) < 4:
        raise FormatError(path, "truncated point file: missing count header")
    (count,) = struct.unpack_from("<I", data)
    expected = 4 + 12 * count
    if len(data) != expected:
        raise FormatError(
            path, f"count mismatch: header says {count} points "
                  f"({expected} bytes) but file has {len(data)} bytes")
    pts = np.frombuffer(data, dtype="<f4", offset=4).reshape(count, 3)
    pts = pts.astype(np.float64)
    if not np.isfinite(pts).all():
        raise FormatError(path, "point file contains non-finite coordinates")
    return PointCloud(pts)


# ---------------------------------------------------------------------------
# Annotations (text)
# ---------------------------------------------------------------------------

def write_person_annotations(path, ann):
    lines = ["# lidarmocap person annotation",
             f"format_version {FORMAT_VERSION}",
             f"person_id {ann.person_id}",
             f"joint_count {ann.n_joints}",
             f"shape_coeffs {ann.shape.shape[0]}",
             f"frame_count {ann.n_frames}",
             f"shape {fmt_floats(ann.shape)}"]
    for t in range(ann.n_frames):
        lines.append(f"frame {t}")
        lines.append(f"translation {fmt_floats(ann.translations[t])}")
        lines.append("pose")
        for j in range(ann.n_joints):
            lines.append(fmt_floats(ann.poses_aa[t, j]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_person_annotations(path):
    records = read_records(path)
    pos = 0

    def take(what):
        nonlocal pos
        if pos >= len(records):
            last = records[-1][0] if records else None
            raise FormatError(path, f"unexpected end of file, expected {what}",
                              line=last)
        rec = records[pos]
        pos += 1
        return rec

    def take_keyed(key, n_values):
        lineno, tokens = take(key)
        if tokens[0] != key or len(tokens) != n_values + 1:
            raise FormatError(path, f"expected '{key}' record", line=lineno)
        return lineno, tokens[1:]

    lineno, (version,) = take_keyed("format_version", 1)
    if parse_int(path, lineno, version, "format version") != FORMAT_VERSION:
        raise FormatError(path, f"unsupported format version {version}",
                          line=lineno)
    lineno, (pid,) = take_keyed("person_id", 1)
    person_id = parse_int(path, lineno, pid, "person id")
    lineno, (jc,) = take_keyed("joint_count", 1)
    n_joints = parse_int(path, lineno, jc, "joint count")
    lineno, (sc,) = take_keyed("shape_coeffs", 1)
    n_shape = parse_int(path, lineno, sc, "shape coefficient count")
    lineno, (fc,) = take_keyed("frame_count", 1)
    n_frames = parse_int(path, lineno, fc, "frame count")
    if n_joints < 1 or n_shape < 1 or n_frames < 0:
        raise FormatError(path, "joint_count and shape_coeffs must be >= 1",
                          line=lineno)
    lineno, tokens = take("shape")
    if tokens[0] != "shape":
        raise FormatError(path, "expected 'shape' record", line=lineno)
    shape = parse_floats(path, lineno, tokens[1:], n_shape)
    poses = np.empty((n_frames, n_joints, 3))
    translations = np.empty((n_frames, 3))
    for t in range(n_frames):
        lineno, (ft,) = take_keyed("frame", 1)
        if parse_int(path, lineno, ft, "frame index") != t:
            raise FormatError(
                path, f"person {person_id}: expected frame {t}, got {ft}",
                line=lineno)
        lineno, tokens = take("translation")
        if tokens[0] != "translation":
            raise FormatError(path, "expected 'translation' record",
                              line=lineno)
        tr = parse_floats(path, lineno, tokens[1:], 3)
        if not np.isfinite(tr).all():
            raise FormatError(
                path, f"non-finite translation for person {person_id} "
                      f"at frame {t}", line=lineno)
        translations[t] = tr
        lineno, tokens = take("pose")
        if tokens != ["pose"]:
            raise FormatError(path, "expected 'pose' record", line=lineno)
        for j in range(n_joints):
            lineno, tokens = take(f"pose row {j}")
            aa = parse_floats(path, lineno, tokens, 3)
            if not np.isfinite(aa).all():
                raise FormatError(
                    path, f"non-finite pose for person {person_id} at "
                          f"frame {t}, joint {j}", line=lineno)
            poses[t, j] = aa
    if pos != len(records):
        raise FormatError(path, "unexpected content after the last frame",
                          line=records[pos][0])
    if not np.isfinite(shape).all():
        raise FormatError(path, f"non-finite shape for person {person_id}")
    return PersonAnnotations(person_id, shape, poses, translations,
                             source_path=str(path))


# ---------------------------------------------------------------------------
# Sequence directories
# ---------------------------------------------------------------------------

@contextmanager
def _directory_lock(path):
    lock = os.path.join(path, _LOCK_NAME)
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise SequenceLockedError(
            f"sequence directory {path} is locked by another writer "
            f"(stale? remove {lock})") from None
    os.close(fd)
    try:
        yield
    finally:
        os.unlink(lock)


def write_sequence(path, sequence_id, frames, annotations=None,
                   frame_rate_hz=DEFAULT_FRAME_RATE_HZ,
                   coordinate_frame="sensor", sensor_spec=None):
    """Write a sequence directory.

    Args:
        path: target directory (created if missing).
        sequence_id: token matching [A-Za-z0-9_.-]+.
        frames: list of Frame with strictly increasing timestamps.
        annotations: iterable of PersonAnnotations (frame counts must
            match) or None.
        sensor_spec: optional SensorSpec, stored as sensor.cfg.

    Returns:
        The manifest that was written.
    """
    if not _ID_RE.match(sequence_id or ""):
        raise InvalidArgumentError(
            f"sequence_id must match {_ID_RE.pattern}, got {sequence_id!r}")
    frames = [f if isinstance(f, Frame) else Frame(*f) for f in frames]
    ts = [f.timestamp for f in frames]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise InvalidArgumentError(
            "frame timestamps must be strictly increasing")
    anns = {}
    for ann in (annotations or []):
        if ann.person_id in anns:
            raise InvalidArgumentError(
                f"duplicate person_id {ann.person_id}")
        if ann.n_frames != len(frames):
            raise InvalidArgumentError(
                f"person {ann.person_id} has {ann.n_frames} annotation "
                f"frames but the sequence has {len(frames)}")
        anns[ann.person_id] = ann
    os.makedirs(path, exist_ok=True)
    with _directory_lock(path):
        manifest = SequenceManifest(sequence_id, float(frame_rate_hz),
                                    coordinate_frame)
        os.makedirs(os.path.join(path, "frames"), exist_ok=True)
        for i, frame in enumerate(frames):
            rel = f"frames/frame_{i:06d}.bin"
            write_point_frame(os.path.join(path, rel), frame.cloud)
            manifest.frame_files.append(rel)
            manifest.timestamps.append(frame.timestamp)
        if anns:
            os.makedirs(os.path.join(path, "persons"), exist_ok=True)
        for pid in sorted(anns):
            rel = f"persons/person_{pid:02d}.txt"
            write_person_annotations(os.path.join(path, rel), anns[pid])
            manifest.person_files[pid] = rel
        if sensor_spec is not None:
            save_sensor_spec(os.path.join(path, "sensor.cfg"), sensor_spec)
            manifest.sensor_spec = "sensor.cfg"
        _write_manifest(os.path.join(path, _MANIFEST_NAME), manifest)
    return manifest


def _write_manifest(path, m):
    lines = ["# lidarmocap sequence manifest",
             f"format_version {FORMAT_VERSION}",
             f"sequence_id {m.sequence_id}",
             f"frame_rate_hz {repr(float(m.frame_rate_hz))}",
             f"coordinate_frame {m.coordinate_frame}",
             f"frame_count {m.frame_count}"]
    if m.sensor_spec:
        lines.append(f"sensor_spec {m.sensor_spec}")
    for pid in sorted(m.person_files):
        lines.append(f"person {pid} {m.person_files[pid]}")
    for i, (t, rel) in enumerate(zip(m.timestamps, m.frame_files)):
        lines.append(f"frame {i} {repr(float(t))} {rel}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_sequence(path):
    """Read and validate a sequence directory written by write_sequence.

    Returns:
        Sequence(manifest, frames, annotations); annotations keyed by
        person id.
    """
    mpath = os.path.join(path, _MANIFEST_NAME)
    if not os.path.isfile(mpath):
        raise FormatError(mpath, "manifest not found")
    records = read_records(mpath)
    header = {}
    persons = {}
    frame_rows = []
    declared_count = None
    for lineno, tokens in records:
        key = tokens[0]
        if key == "person":
            if len(tokens) != 3:
                raise FormatError(mpath, "expected 'person <id> <file>'",
                                  line=lineno)
            pid = parse_int(mpath, lineno, tokens[1], "person id")
            if pid in persons:
                raise FormatError(mpath, f"duplicate person id {pid}",
                                  line=lineno)
            persons[pid] = tokens[2]
        elif key == "frame":
            if len(tokens) != 4:
                raise FormatError(
                    mpath, "expected 'frame <index> <timestamp> <file>'",
                    line=lineno)
            idx = parse_int(mpath, lineno, tokens[1], "frame index")
            if idx != len(frame_rows):
                raise FormatError(
                    mpath, f"expected frame index {len(frame_rows)}, "
                           f"got {idx}", line=lineno)
            (t,) = parse_floats(mpath, lineno, [tokens[2]], 1)
            frame_rows.append((t, tokens[3], lineno))
        elif key in ("format_version", "sequence_id", "frame_rate_hz",
                     "coordinate_frame", "frame_count", "sensor_spec"):
            if len(tokens) != 2:
                raise FormatError(mpath, f"expected '{key} <value>'",
                                  line=lineno)
            if key in header:
                raise FormatError(mpath, f"duplicate key {key!r}",
                                  line=lineno)
            header[key] = (tokens[1], lineno)
        else:
            raise FormatError(mpath, f"unknown manifest record {key!r}",
                              line=lineno)
    for required in ("format_version", "sequence_id", "frame_rate_hz",
                     "frame_count"):
        if required not in header:
            raise FormatError(mpath, f"missing required key {required!r}")
    version = parse_int(mpath, header["format_version"][1],
                        header["format_version"][0], "format version")
    if version != FORMAT_VERSION:
        raise FormatError(mpath, f"unsupported format version {version}")
    declared_count = parse_int(mpath, header["frame_count"][1],
                               header["frame_count"][0], "frame count")
    if declared_count != len(frame_rows):
        raise FormatError(
            mpath, f"frame_count says {declared_count} but the manifest "
                   f"lists {len(frame_rows)} frames")
    ts = [row[0] for row in frame_rows]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise FormatError(mpath, "frame timestamps must be strictly "
                                 "increasing")
    (rate,) = parse_floats(mpath, header["frame_rate_hz"][1],
                           [header["frame_rate_hz"][0]], 1)
    manifest = SequenceManifest(
        header["sequence_id"][0],
        rate,
        header.get("coordinate_frame", ("sensor", 0))[0],
        header.get("sensor_spec", (None, 0))[0])
    frames = []
    for t, rel, lineno in frame_rows:
        fpath = os.path.join(path, rel)
        if not os.path.isfile(fpath):
            raise FormatError(mpath, f"referenced frame file {rel} "
                                     f"does not exist", line=lineno)
        frames.append(Frame(t, read_point_frame(fpath)))
        manifest.timestamps.append(t)
        manifest.frame_files.append(rel)
    if manifest.sensor_spec:
        spath = os.path.join(path, manifest.sensor_spec)
        if not os.path.isfile(spath):
            raise FormatError(mpath, f"referenced sensor spec "
                                     f"{manifest.sensor_spec} does not exist")
    annotations = {}
    for pid in sorted(persons):
        rel = persons[pid]
        apath = os.path.join(path, rel)
        if not os.path.isfile(apath):
            raise FormatError(mpath, f"referenced annotation file {rel} "
                                     f"does not exist")
        ann = read_person_annotations(apath)
        if ann.person_id != pid:
            raise FormatError(
                apath, f"manifest says person {pid} but the file says "
                       f"person {ann.person_id}")
        if ann.n_frames != len(frames):
            raise FormatError(
                apath, f"person {pid} has {ann.n_frames} annotation frames "
                       f"but {mpath} lists {len(frames)}")
        annotations[pid] = ann
        manifest.person_files[pid] = rel
    return Sequence(manifest, frames, annotations)


# ---------------------------------------------------------------------------
# Track sidecar (original frame indices and subtracted centroids)
# ---------------------------------------------------------------------------

def write_locs(path, rows):
    """Per-frame normalization centroids: (orig_frame, timestamp, loc)."""
    lines = ["# lidarmocap track locations: orig_frame timestamp x y z"]
    for orig, t, loc in rows:
        lines.append(f"{int(orig)} {repr(float(t))} {fmt_floats(loc)}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_locs(path):
    rows = []
    for lineno, tokens in read_records(path):
        if len(tokens) != 5:
            raise FormatError(path, "expected 'orig_frame timestamp x y z'",
                              line=lineno)
        orig = parse_int(path, lineno, tokens[0], "frame index")
        vals = parse_floats(path, lineno, tokens[1:], 4)
        rows.append((orig, vals[0], np.asarray(vals[1:])))
    return rows


# ---------------------------------------------------------------------------
# Triangle mesh animation import (ASCII OBJ subset)
# ---------------------------------------------------------------------------

_OBJ_SKIP = {"vn", "vt", "vp", "o", "g", "s", "usemtl", "mtllib"}


def read_obj(path, label="body"):
    """Read the v/f subset of an ASCII OBJ file as a TriangleMesh.

    Vertices are 'v x y z'; faces are triangles with 1-based indices, with
    'i/t/n' style references reduced to the vertex index. Normal, texture,
    grouping, and material records are ignored; anything else is an error.
    """
    vertices = []
    faces = []
    for lineno, tokens in read_records(path):
        kind = tokens[0]
        if kind == "v":
            if len(tokens) != 4:
                raise FormatError(path, "vertex records must be 'v x y z'",
                                  line=lineno)
            vertices.append(parse_floats(path, lineno, tokens[1:], 3))
        elif kind == "f":
            if len(tokens) != 4:
                raise FormatError(
                    path, f"face must have exactly 3 vertices, got "
                          f"{len(tokens) - 1} (triangles only)", line=lineno)
            idx = []
            for ref in tokens[1:]:
                first = ref.split("/", 1)[0]
                i = parse_int(path, lineno, first, "face vertex index")
                if i < 1:
                    raise FormatError(
                        path, f"face index {i} out of range (1-based "
                              f"positive indices only)", line=lineno)
                if i > len(vertices):
                    raise FormatError(
                        path, f"face index {i} out of range "
                              f"({len(vertices)} vertices so far)",
                        line=lineno)
                idx.append(i - 1)
            faces.append(idx)
        elif kind in _OBJ_SKIP:
            continue
        else:
            raise FormatError(path, f"unsupported record {kind!r} "
                                    f"(subset reads 'v' and 'f')",
                              line=lineno)
    if not vertices or not faces:
        raise FormatError(path, "mesh needs at least one vertex and one face")
    try:
        return TriangleMesh(np.asarray(vertices), np.asarray(faces),
                            label=label)
    except InvalidArgumentError as exc:
        raise FormatError(path, f"invalid mesh: {exc}") from exc


def write_obj(path, mesh):
    lines = ["# lidarmocap triangle mesh"]
    for v in mesh.vertices:
        lines.append(f"v {fmt_floats(v)}")
    for f in mesh.faces:
        lines.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def import_mesh_animation(path, label="body"):
    """Load a mesh animation: one OBJ file, or a directory of them.

    Directory entries are ordered by file name; all frames must share the
    same topology (identical face arrays and vertex counts).

    Returns:
        list of TriangleMesh, one per frame.
    """
    if os.path.isdir(path):
        names = sorted(n for n in os.listdir(path)
                       if n.lower().endswith(".obj"))
        if not names:
            raise FormatError(path, "directory contains no .obj files")
        meshes = [read_obj(os.path.join(path, n), label=label)
                  for n in names]
    else:
        meshes = [read_obj(path, label=label)]
        names = [os.path.basename(path)]
    first = meshes[0]
    for name, mesh in zip(names[1:], meshes[1:]):
        if (mesh.vertices.shape != first.vertices.shape
                or not np.array_equal(mesh.faces, first.faces)):
            raise FormatError(
                os.path.join(path, name) if os.path.isdir(path) else path,
                f"topology changes at {name}: all animation frames must "
                f"share vertex count and face indices")
    return meshes
