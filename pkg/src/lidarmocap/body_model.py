"""Linear blend skinning body model.

A model is a template mesh, a kinematic tree, a joint regressor, skin
weights, and linear shape blendshapes. Posing runs:

    shaped template -> rest joints -> forward kinematics -> skinning

Pose-dependent blendshapes are intentionally not modeled; only the linear
shape space and LBS apply. Joint rotations are local to each joint's
parent; the root rotation is global.
"""
import struct
import warnings

import numpy as np
from dataclasses import dataclass

from .errors import FormatError, InvalidArgumentError
from .geometry import require_rotations
from .textutil import fmt_floats, parse_floats, parse_int, read_records

# Size of the shape coefficient vector in the reference body.
SHAPE_COEFFS = 10
# Row sums of the regressor and skin weights must be 1 within this.
WEIGHT_ROW_TOL = 1e-5
# Shape coefficients beyond this many standard deviations trigger a warning.
SHAPE_WARN_SD = 10.0

_MAGIC = b"LMBM"
_CONTAINER_VERSION = 1


@dataclass
class BodyModel:
    """Template geometry plus the fixed quantities that drive skinning.

    Attributes:
        template_vertices: (V, 3) rest-pose vertices, meters.
        kinematic_parents: (J,) parent joint indices; entry 0 is the root
            and holds -1, every other entry is a smaller joint index.
        joint_regressor: (J, V) rows summing to 1; maps vertices to joints.
        skin_weights: (V, J) nonnegative rows summing to 1.
        shape_dirs: (V, 3, K) linear shape displacement basis.
    """
    template_vertices: np.ndarray
    kinematic_parents: np.ndarray
    joint_regressor: np.ndarray
    skin_weights: np.ndarray
    shape_dirs: np.ndarray

    def __post_init__(self):
        self.template_vertices = np.asarray(self.template_vertices,
                                            dtype=np.float64)
        self.kinematic_parents = np.asarray(self.kinematic_parents,
                                            dtype=np.int64).reshape(-1)
        self.joint_regressor = np.asarray(self.joint_regressor,
                                          dtype=np.float64)
        self.skin_weights = np.asarray(self.skin_weights, dtype=np.float64)
        self.shape_dirs = np.asarray(self.shape_dirs, dtype=np.float64)
        self.validate()

    @property
    def n_vertices(self):
        return self.template_vertices.shape[0]

    @property
    def n_joints(self):
        return self.kinematic_parents.shape[0]

    @property
    def n_shape_coeffs(self):
        return self.shape_dirs.shape[2]

    def validate(self):
        t = self.template_vertices
        if t.ndim != 2 or t.shape[1] != 3 or t.shape[0] < 1:
            raise InvalidArgumentError(
                f"template_vertices must be (V, 3) with V >= 1, got {t.shape}")
        V = t.shape[0]
        parents = self.kinematic_parents
        J = parents.shape[0]
        if J < 1:
            raise InvalidArgumentError("model needs at least one joint")
        if parents[0] != -1:
            raise InvalidArgumentError(
                "kinematic_parents[0] must be -1 (the root)")
        for j in range(1, J):
            if not 0 <= parents[j] < j:
                raise InvalidArgumentError(
                    f"kinematic_parents[{j}] = {parents[j]} must be a "
                    f"smaller joint index")
        if self.joint_regressor.shape != (J, V):
            raise InvalidArgumentError(
                f"joint_regressor must be ({J}, {V}), "
                f"got {self.joint_regressor.shape}")
        if self.skin_weights.shape != (V, J):
            raise InvalidArgumentError(
                f"skin_weights must be ({V}, {J}), "
                f"got {self.skin_weights.shape}")
        if (self.shape_dirs.ndim != 3 or self.shape_dirs.shape[0] != V
                or self.shape_dirs.shape[1] != 3
                or self.shape_dirs.shape[2] < 1):
            raise InvalidArgumentError(
                f"shape_dirs must be ({V}, 3, K) with K >= 1, "
                f"got {self.shape_dirs.shape}")
        for name, arr in (("template_vertices", t),
                          ("joint_regressor", self.joint_regressor),
                          ("skin_weights", self.skin_weights),
                          ("shape_dirs", self.shape_dirs)):
            if not np.isfinite(arr).all():
                raise InvalidArgumentError(f"{name} contains non-finite values")
        if np.any(self.skin_weights < 0.0):
            raise InvalidArgumentError("skin_weights must be nonnegative")
        wsum = self.skin_weights.sum(axis=1)
        if np.any(np.abs(wsum - 1.0) > WEIGHT_ROW_TOL):
            bad = int(np.argmax(np.abs(wsum - 1.0)))
            raise InvalidArgumentError(
                f"skin_weights row {bad} sums to {wsum[bad]!r}, expected 1")
        rsum = self.joint_regressor.sum(axis=1)
        if np.any(np.abs(rsum - 1.0) > WEIGHT_ROW_TOL):
            bad = int(np.argmax(np.abs(rsum - 1.0)))
            raise InvalidArgumentError(
                f"joint_regressor row {bad} sums to {rsum[bad]!r}, expected 1")


def pose_from_axis_angle(aa):
    """(J, 3) per-joint axis-angle vectors -> (J, 3, 3) rotation matrices."""
    from .geometry import axis_angle_to_matrix
    aa = np.asarray(aa, dtype=np.float64)
    if aa.ndim != 2 or aa.shape[1] != 3:
        raise InvalidArgumentError(f"expected (J, 3) axis-angle, got {aa.shape}")
    return axis_angle_to_matrix(aa)


def pose_from_rot6d(r6):
    """(J, 6) per-joint 6D rotations -> (J, 3, 3) rotation matrices."""
    from .geometry import rot6d_to_matrix
    r6 = np.asarray(r6, dtype=np.float64)
    if r6.ndim != 2 or r6.shape[1] != 6:
        raise InvalidArgumentError(f"expected (J, 6) rotations, got {r6.shape}")
    return rot6d_to_matrix(r6)


def shaped_template(model, shape):
    """Template vertices displaced along the shape basis: T + S beta."""
    beta = _check_shape_coeffs(model, shape)
    offsets = np.tensordot(model.shape_dirs, beta, axes=([2], [0]))
    return model.template_vertices + offsets


def rest_joints(model, shaped_vertices=None, shape=None):
    """Joint positions regressed from (shaped) template vertices."""
    if shaped_vertices is None:
        if shape is None:
            shaped_vertices = model.template_vertices
        else:
            shaped_vertices = shaped_template(model, shape)
    return model.joint_regressor @ shaped_vertices


def _check_shape_coeffs(model, shape):
    beta = np.asarray(shape, dtype=np.float64).reshape(-1)
    if beta.shape[0] != model.n_shape_coeffs:
        raise InvalidArgumentError(
            f"expected {model.n_shape_coeffs} shape coefficients, "
            f"got {beta.shape[0]}")
    if not np.isfinite(beta).all():
        raise InvalidArgumentError("shape coefficients must be finite")
    if np.any(np.abs(beta) > SHAPE_WARN_SD):
        warnings.warn(
            f"shape coefficient magnitude exceeds {SHAPE_WARN_SD:g} SD; "
            f"the shape space is unreliable this far out", stacklevel=3)
    return beta


def _check_pose(model, pose):
    R = np.asarray(pose, dtype=np.float64)
    if R.shape != (model.n_joints, 3, 3):
        raise InvalidArgumentError(
            f"pose must be ({model.n_joints}, 3, 3) rotation matrices, "
            f"got {R.shape}")
    require_rotations(R, "pose")
    return R


def _global_transforms(model, R, j0):
    """Forward kinematics: per-joint global rotation and joint position."""
    J = model.n_joints
    parents = model.kinematic_parents
    g_rot = np.empty((J, 3, 3))
    g_pos = np.empty((J, 3))
    g_rot[0] = R[0]
    g_pos[0] = j0[0]
    for j in range(1, J):
        p = parents[j]
        g_rot[j] = g_rot[p] @ R[j]
        g_pos[j] = g_rot[p] @ (j0[j] - j0[p]) + g_pos[p]
    return g_rot, g_pos


def forward(model, pose, shape, translation=(0.0, 0.0, 0.0)):
    """Pose the model: shape blendshapes, forward kinematics, then LBS.

    Args:
        model: BodyModel.
        pose: (J, 3, 3) per-joint local rotation matrices (root is global).
        shape: (K,) shape coefficients.
        translation: (3,) root translation applied to everything, meters.

    Returns:
        (joints, vertices): (J, 3) posed joint positions and (V, 3) posed
        vertices, both in world coordinates.
    """
    R = _check_pose(model, pose)
    tr = np.asarray(translation, dtype=np.float64).reshape(3)
    if not np.isfinite(tr).all():
        raise InvalidArgumentError("translation must be finite")
    shaped = shaped_template(model, shape)
    j0 = rest_joints(model, shaped)
    g_rot, g_pos = _global_transforms(model, R, j0)
    # Skinning transforms move a rest-pose point into the posed frame:
    # A_j x = G_rot[j] (x - j0[j]) + g_pos[j].
    a_pos = g_pos - np.einsum("jab,jb->ja", g_rot, j0)
    W = model.skin_weights
    t_rot = np.einsum("vj,jab->vab", W, g_rot)
    t_pos = W @ a_pos
    vertices = np.einsum("vab,vb->va", t_rot, shaped) + t_pos + tr
    joints = g_pos + tr
    return joints, vertices


def global_joint_rotations(model, pose):
    """Per-joint global rotations: the product of local rotations to the root."""
    R = _check_pose(model, pose)
    j0 = rest_joints(model)
    g_rot, _ = _global_transforms(model, R, j0)
    return g_rot


def root_relative(joints, vertices=None):
    """Subtract the root joint position from joints (and vertices)."""
    joints = np.asarray(joints, dtype=np.float64)
    root = joints[0]
    if vertices is None:
        return joints - root
    return joints - root, np.asarray(vertices, dtype=np.float64) - root


# ---------------------------------------------------------------------------
# Model container I/O
# ---------------------------------------------------------------------------

_ARRAYS = (
    ("template_vertices", "f"),
    ("kinematic_parents", "i"),
    ("joint_regressor", "f"),
    ("skin_weights", "f"),
    ("shape_dirs", "f"),
)
_DTYPES = {"f": np.dtype("<f8"), "i": np.dtype("<i8")}


def save_body_model(path, model):
    """Write a model to the binary container format (see FORMATS.md)."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _CONTAINER_VERSION, len(_ARRAYS)))
        for name, code in _ARRAYS:
            arr = np.ascontiguousarray(getattr(model, name),
                                       dtype=_DTYPES[code])
            nb = name.encode("utf-8")
            fh.write(struct.pack("<I", len(nb)))
            fh.write(nb)
            fh.write(code.encode("ascii"))
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes())


def _read_exact(fh, n, path, what):
    data = fh.read(n)
    if len(data) != n:
        raise FormatError(path, f"truncated file while reading {what}")
    return data


def load_body_model(path):
    """Load a model from the binary container or the text format.

    The binary container is recognized by its magic bytes; anything else
    is parsed as text.
    """
    with open(path, "rb") as fh:
        head = fh.read(len(_MAGIC))
    if head == _MAGIC:
        return _load_binary_model(path)
    return load_body_model_text(path)


def _load_binary_model(path):
    expected = dict(_ARRAYS)
    found = {}
    with open(path, "rb") as fh:
        _read_exact(fh, len(_MAGIC), path, "magic")
        version, count = struct.unpack(
            "<II", _read_exact(fh, 8, path, "header"))
        if version != _CONTAINER_VERSION:
            raise FormatError(
                path, f"unsupported container version {version} "
                      f"(this build reads version {_CONTAINER_VERSION})")
        for _ in range(count):
            (nlen,) = struct.unpack("<I", _read_exact(fh, 4, path,
                                                      "array header"))
            name = _read_exact(fh, nlen, path, "array name").decode("utf-8")
            code = _read_exact(fh, 1, path, "array dtype").decode("ascii")
            if name not in expected:
                raise FormatError(path, f"unknown array {name!r}")
            if name in found:
                raise FormatError(path, f"duplicate array {name!r}")
            if code != expected[name]:
                raise FormatError(
                    path, f"array {name!r} has dtype code {code!r}, "
                          f"expected {expected[name]!r}")
            (ndim,) = struct.unpack("<I", _read_exact(fh, 4, path,
                                                      "array rank"))
            if ndim > 8:
                raise FormatError(path, f"array {name!r} rank {ndim} "
                                        f"is out of range")
            shape = struct.unpack(f"<{ndim}Q",
                                  _read_exact(fh, 8 * ndim, path,
                                              "array shape"))
            n_items = 1
            for s in shape:
                n_items *= s
            if n_items > 2 ** 33:
                raise FormatError(
                    path, f"array {name!r} claims {n_items} elements; "
                          f"file is corrupt or not a model container")
            payload = _read_exact(fh, 8 * n_items, path,
                                  f"array {name!r} payload")
            found[name] = np.frombuffer(
                payload, dtype=_DTYPES[code]).reshape(shape)
        if fh.read(1):
            raise FormatError(path, "trailing bytes after the last array")
    missing = [n for n, _ in _ARRAYS if n not in found]
    if missing:
        raise FormatError(path, f"missing arrays: {', '.join(missing)}")
    try:
        return BodyModel(**found)
    except InvalidArgumentError as exc:
        raise FormatError(path, f"invalid model: {exc}") from exc


def save_body_model_text(path, model):
    """Write a model in the line-oriented text format (see FORMATS.md)."""
    lines = ["# lidarmocap body model",
             "format_version 1",
             f"joints {model.n_joints}",
             f"vertices {model.n_vertices}",
             f"shape_coeffs {model.n_shape_coeffs}",
             "parents",
             " ".join(str(int(p)) for p in model.kinematic_parents),
             "template"]
    for v in model.template_vertices:
        lines.append(fmt_floats(v))
    lines.append("joint_regressor")
    for row in model.joint_regressor:
        lines.append(fmt_floats(row))
    lines.append("skin_weights")
    for row in model.skin_weights:
        lines.append(fmt_floats(row))
    lines.append("shape_dirs")
    for v in model.shape_dirs:
        lines.append(fmt_floats(v))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_body_model_text(path):
    records = read_records(path)
    if not records:
        raise FormatError(path, "empty model file")
    pos = 0

    def take(what):
        nonlocal pos
        if pos >= len(records):
            raise FormatError(path, f"unexpected end of file, expected {what}",
                              line=records[-1][0])
        rec = records[pos]
        pos += 1
        return rec

    lineno, tokens = take("format_version")
    if tokens[0] != "format_version":
        raise FormatError(path, "file must start with format_version",
                          line=lineno)
    version = parse_int(path, lineno, tokens[1], "format version")
    if version != 1:
        raise FormatError(path, f"unsupported format version {version}",
                          line=lineno)
    dims = {}
    for key in ("joints", "vertices", "shape_coeffs"):
        lineno, tokens = take(key)
        if len(tokens) != 2 or tokens[0] != key:
            raise FormatError(path, f"expected '{key} <count>'", line=lineno)
        dims[key] = parse_int(path, lineno, tokens[1], f"{key} count")
    J, V, K = dims["joints"], dims["vertices"], dims["shape_coeffs"]

    def section(name, rows, cols):
        lineno, tokens = take(f"section {name}")
        if tokens != [name]:
            raise FormatError(path, f"expected section {name!r}", line=lineno)
        out = np.empty((rows, cols))
        for r in range(rows):
            lineno, tokens = take(f"{name} row {r}")
            out[r] = parse_floats(path, lineno, tokens, cols)
        return out

    lineno, tokens = take("parents")
    if tokens != ["parents"]:
        raise FormatError(path, "expected section 'parents'", line=lineno)
    lineno, tokens = take("parent indices")
    if len(tokens) != J:
        raise FormatError(path, f"expected {J} parent indices, "
                                f"got {len(tokens)}", line=lineno)
    parents = [parse_int(path, lineno, t, "parent index") for t in tokens]
    template = section("template", V, 3)
    regressor = section("joint_regressor", J, V)
    weights = section("skin_weights", V, J)
    sdirs = section("shape_dirs", V, 3 * K).reshape(V, 3, K)
    if pos != len(records):
        raise FormatError(path, "unexpected content after shape_dirs",
                          line=records[pos][0])
    try:
        return BodyModel(template, parents, regressor, weights, sdirs)
    except InvalidArgumentError as exc:
        raise FormatError(path, f"invalid model: {exc}") from exc
