"""Losses and evaluation metrics for sequence predictions.

Losses follow the literal summed forms (no averaging); reported metrics
are means. Position metrics are millimeters, angles degrees, and the
scene-level unidirectional Chamfer distance (SUCD) squared meters with an
RMS-millimeter companion value.
"""
import csv
from dataclasses import dataclass, field, fields

import numpy as np

from . import body_model as bm
from .errors import InvalidArgumentError
from .geometry import (as_points, geodesic_angle_deg, is_rotation,
                       unidirectional_chamfer)
from .textutil import fmt_float

_MODES = ("P", "PS", "PST")


@dataclass
class LossWeights:
    """Weights of the prior (lam1, lam2) and solver (lam3..lam8) losses.

    Defaults follow the reference configuration: lam1 = 1, lam2 = 1e3,
    lam3 = 100 / N_J, lam4 = 100 / N_V, lam5 = 1/5, lam6 = lam7 = 1,
    lam8 = 1e3, with N_J = 24 joints and N_V = 6890 vertices.
    """
    lam1: float = 1.0
    lam2: float = 1e3
    lam3: float = 100.0 / 24.0
    lam4: float = 100.0 / 6890.0
    lam5: float = 1.0 / 5.0
    lam6: float = 1.0
    lam7: float = 1.0
    lam8: float = 1e3

    def __post_init__(self):
        for f in fields(self):
            v = float(getattr(self, f.name))
            if not np.isfinite(v) or v < 0.0:
                raise InvalidArgumentError(
                    f"{f.name} must be finite and >= 0, got {v}")
            setattr(self, f.name, v)

    @classmethod
    def for_model(cls, n_joints, n_vertices, **overrides):
        """Defaults with lam3 and lam4 scaled to a model's dimensions."""
        values = {"lam3": 100.0 / n_joints, "lam4": 100.0 / n_vertices}
        values.update(overrides)
        return cls(**values)


def mse_joint_loss(pred, gt):
    """Sum over frames of the squared L2 error over all joint coordinates."""
    p = np.asarray(pred, dtype=np.float64)
    g = np.asarray(gt, dtype=np.float64)
    if p.shape != g.shape:
        raise InvalidArgumentError(
            f"shape mismatch: {p.shape} vs {g.shape}")
    d = p - g
    return float(np.sum(d * d))


def consistency_loss(fv, fp):
    """KL divergence from the point-feature to the vertex-feature histogram.

    Both vectors are smoothed by adding 1e-12 and normalized to sum 1, so
    the result is well defined and nonnegative for any nonnegative input:
    sum_i fv_i log(fv_i / fp_i).
    """
    v = np.asarray(fv, dtype=np.float64).reshape(-1)
    p = np.asarray(fp, dtype=np.float64).reshape(-1)
    if v.shape != p.shape:
        raise InvalidArgumentError(
            f"length mismatch: {v.shape[0]} vs {p.shape[0]}")
    if v.shape[0] == 0:
        raise InvalidArgumentError("feature vectors must be non-empty")
    if not (np.isfinite(v).all() and np.isfinite(p).all()):
        raise InvalidArgumentError("feature vectors must be finite")
    if np.any(v < 0.0) or np.any(p < 0.0):
        raise InvalidArgumentError("feature vectors must be nonnegative")
    v = v + 1e-12
    p = p + 1e-12
    v = v / v.sum()
    p = p / p.sum()
    return float(np.sum(v * np.log(v / p)))


def prior_loss(j_loss, c_loss, w=None):
    """Weighted prior-network loss: lam1 * joints + lam2 * consistency."""
    w = w or LossWeights()
    return w.lam1 * float(j_loss) + w.lam2 * float(c_loss)


def solver_loss(components, w=None):
    """Weighted solver loss over six components.

    Args:
        components: (joints, vertices, pose, shape, translation, sucd).
    """
    w = w or LossWeights()
    c = [float(x) for x in components]
    if len(c) != 6:
        raise InvalidArgumentError(
            f"expected 6 loss components, got {len(c)}")
    lams = (w.lam3, w.lam4, w.lam5, w.lam6, w.lam7, w.lam8)
    return float(sum(l * x for l, x in zip(lams, c)))


@dataclass
class SmplPrediction:
    """Per-frame pose and translation with a per-sequence shape.

    Attributes:
        poses: (T, J, 3, 3) per-joint local rotation matrices.
        shape: (K,) shape coefficients, constant over the sequence.
        translations: (T, 3) root translations, meters.
    """
    poses: np.ndarray
    shape: np.ndarray
    translations: np.ndarray

    def __post_init__(self):
        self.poses = np.asarray(self.poses, dtype=np.float64)
        self.shape = np.asarray(self.shape, dtype=np.float64).reshape(-1)
        self.translations = np.asarray(self.translations,
                                       dtype=np.float64)
        if self.poses.ndim != 4 or self.poses.shape[2:] != (3, 3):
            raise InvalidArgumentError(
                f"poses must be (T, J, 3, 3), got {self.poses.shape}")
        if (self.translations.ndim != 2 or self.translations.shape[1] != 3
                or self.translations.shape[0] != self.poses.shape[0]):
            raise InvalidArgumentError(
                f"translations must be ({self.poses.shape[0]}, 3), "
                f"got {self.translations.shape}")
        for name, arr in (("poses", self.poses), ("shape", self.shape),
                          ("translations", self.translations)):
            if not np.isfinite(arr).all():
                raise InvalidArgumentError(f"{name} contains non-finite "
                                           f"values")
        if not is_rotation(self.poses):
            raise InvalidArgumentError("poses contain invalid rotations")

    @classmethod
    def from_axis_angle(cls, poses_aa, shape, translations):
        aa = np.asarray(poses_aa, dtype=np.float64)
        if aa.ndim != 3 or aa.shape[2] != 3:
            raise InvalidArgumentError(
                f"expected (T, J, 3) axis-angle poses, got {aa.shape}")
        from .geometry import axis_angle_to_matrix
        return cls(axis_angle_to_matrix(aa), shape, translations)

    @property
    def n_frames(self):
        return self.poses.shape[0]

    @property
    def n_joints(self):
        return self.poses.shape[1]


def _check_pair(pred, gt, model=None):
    if pred.n_frames != gt.n_frames:
        raise InvalidArgumentError(
            f"frame count mismatch: prediction has {pred.n_frames}, "
            f"ground truth has {gt.n_frames}")
    if pred.n_joints != gt.n_joints:
        raise InvalidArgumentError(
            f"joint count mismatch: {pred.n_joints} vs {gt.n_joints}")
    if model is not None and pred.n_joints != model.n_joints:
        raise InvalidArgumentError(
            f"pose has {pred.n_joints} joints but the model has "
            f"{model.n_joints}")


def jv_error_frames(pred, gt, model, mode):
    """Per-frame mean joint and vertex position errors in millimeters.

    Modes substitute ground-truth parameters into the prediction before
    posing: P uses ground-truth shape and translation (pose error only),
    PS uses ground-truth translation (pose + shape), PST uses all
    predicted parameters. P and PS compare root-relative positions, so a
    translation error alone scores zero there.

    Returns:
        (joint_mm, vertex_mm): two (T,) arrays.
    """
    if mode not in _MODES:
        raise InvalidArgumentError(
            f"mode must be one of {_MODES}, got {mode!r}")
    _check_pair(pred, gt, model)
    T = pred.n_frames
    joint_mm = np.empty(T)
    vertex_mm = np.empty(T)
    pred_shape = gt.shape if mode == "P" else pred.shape
    for t in range(T):
        pred_tr = (pred.translations[t] if mode == "PST"
                   else gt.translations[t])
        jp, vp = bm.forward(model, pred.poses[t], pred_shape, pred_tr)
        jg, vg = bm.forward(model, gt.poses[t], gt.shape,
                            gt.translations[t])
        if mode != "PST":
            jp, vp = bm.root_relative(jp, vp)
            jg, vg = bm.root_relative(jg, vg)
        joint_mm[t] = np.linalg.norm(jp - jg, axis=1).mean() * 1000.0
        vertex_mm[t] = np.linalg.norm(vp - vg, axis=1).mean() * 1000.0
    return joint_mm, vertex_mm


def jv_error(pred, gt, model, mode):
    """Aggregate joint/vertex position error in millimeters (mean over frames)."""
    joint_mm, vertex_mm = jv_error_frames(pred, gt, model, mode)
    return float(joint_mm.mean()), float(vertex_mm.mean())


def angle_error(pred_poses, gt_poses, model):
    """Mean geodesic angle between global joint rotations, in degrees.

    Accepts (T, J, 3, 3) or a single frame (J, 3, 3).
    """
    p = np.asarray(pred_poses, dtype=np.float64)
    g = np.asarray(gt_poses, dtype=np.float64)
    if p.ndim == 3:
        p = p[None]
    if g.ndim == 3:
        g = g[None]
    if p.shape != g.shape:
        raise InvalidArgumentError(
            f"pose shape mismatch: {p.shape} vs {g.shape}")
    total = 0.0
    frames = p.shape[0]
    for t in range(frames):
        gp = bm.global_joint_rotations(model, p[t])
        gg = bm.global_joint_rotations(model, g[t])
        total += float(geodesic_angle_deg(gp, gg).mean())
    return total / frames


@dataclass
class SucdResult:
    """Scene-level unidirectional Chamfer distance over a sequence.

    sum_sq_m is the canonical per-sequence sum of per-frame mean squared
    point-to-mesh distances; frame_mean_sq_m divides it by the number of
    non-empty frames; rms_mm is the root mean squared distance over all
    points, in millimeters. Empty frames are skipped and counted.
    """
    sum_sq_m: float
    frame_mean_sq_m: float
    rms_mm: float
    frames_used: int
    frames_skipped: int


def sucd(frames, pred_vertices):
    """SUCD of captured clouds against predicted mesh vertices.

    Args:
        frames: per-frame point clouds in world coordinates.
        pred_vertices: per-frame (V, 3) predicted vertices, same length.

    Returns:
        SucdResult.
    """
    if len(frames) != len(pred_vertices):
        raise InvalidArgumentError(
            f"frame count mismatch: {len(frames)} clouds vs "
            f"{len(pred_vertices)} vertex frames")
    total = 0.0
    total_sq = 0.0
    total_pts = 0
    used = 0
    skipped = 0
    for cloud, verts in zip(frames, pred_vertices):
        pts = as_points(cloud)
        if pts.shape[0] == 0:
            skipped += 1
            continue
        term = unidirectional_chamfer(pts, verts)
        total += term
        total_sq += term * pts.shape[0]
        total_pts += pts.shape[0]
        used += 1
    frame_mean = total / used if used else 0.0
    rms_mm = float(np.sqrt(total_sq / total_pts) * 1000.0) if total_pts else 0.0
    return SucdResult(total, frame_mean, rms_mm, used, skipped)


# ---------------------------------------------------------------------------
# Evaluation records and reports
# ---------------------------------------------------------------------------

@dataclass
class EvaluationRecord:
    """One evaluated (sequence, person) pair."""
    sequence_id: str
    person_id: int
    n_frames: int
    joint_mm: dict = field(default_factory=dict)
    vertex_mm: dict = field(default_factory=dict)
    angle_deg: float = 0.0
    sucd_result: SucdResult | None = None


def evaluate_prediction(pred, gt, model, sequence_id="sequence",
                        person_id=0, clouds=None):
    """All metrics for one prediction/ground-truth pair.

    Args:
        clouds: optional per-frame world-coordinate point clouds; enables
            SUCD (predicted vertices are posed from `pred`).

    Returns:
        EvaluationRecord.
    """
    record = EvaluationRecord(sequence_id, int(person_id), pred.n_frames)
    for mode in _MODES:
        j, v = jv_error(pred, gt, model, mode)
        record.joint_mm[mode] = j
        record.vertex_mm[mode] = v
    record.angle_deg = angle_error(pred.poses, gt.poses, model)
    if clouds is not None:
        verts = []
        for t in range(pred.n_frames):
            _, v = bm.forward(model, pred.poses[t], pred.shape,
                              pred.translations[t])
            verts.append(v)
        record.sucd_result = sucd(clouds, verts)
    return record


_COLUMNS = ("sequence", "person", "frames",
            "j_p_mm", "v_p_mm", "j_ps_mm", "v_ps_mm", "j_pst_mm",
            "v_pst_mm", "ang_deg", "sucd_sum_sq_m", "sucd_mean_sq_m",
            "sucd_rms_mm", "frames_skipped")


def _record_row(r):
    row = [r.sequence_id, str(r.person_id), str(r.n_frames)]
    for mode in _MODES:
        row.append(fmt_float(r.joint_mm[mode]))
        row.append(fmt_float(r.vertex_mm[mode]))
    row.append(fmt_float(r.angle_deg))
    if r.sucd_result is None:
        row.extend(["", "", "", ""])
    else:
        s = r.sucd_result
        row.extend([fmt_float(s.sum_sq_m), fmt_float(s.frame_mean_sq_m),
                    fmt_float(s.rms_mm), str(s.frames_skipped)])
    return row


def format_report(records):
    """Human-readable metrics report, one block per record."""
    records = sorted(records, key=lambda r: (r.sequence_id, r.person_id))
    lines = []
    for r in records:
        lines.append(f"sequence {r.sequence_id} person {r.person_id} "
                     f"({r.n_frames} frames)")
        for mode in _MODES:
            lines.append(f"  J Err {mode:<3} {r.joint_mm[mode]:.6f} mm   "
                         f"V Err {mode:<3} {r.vertex_mm[mode]:.6f} mm")
        lines.append(f"  Ang Err    {r.angle_deg:.6f} deg")
        if r.sucd_result is not None:
            s = r.sucd_result
            lines.append(f"  SUCD sum   {s.sum_sq_m:.9f} m^2   "
                         f"per-frame mean {s.frame_mean_sq_m:.9f} m^2   "
                         f"rms {s.rms_mm:.6f} mm")
            if s.frames_skipped:
                lines.append(f"  ({s.frames_skipped} empty frames skipped)")
    return "\n".join(lines) + "\n"


def write_report_csv(path, records):
    """Machine-readable report: one CSV row per (sequence, person)."""
    records = sorted(records, key=lambda r: (r.sequence_id, r.person_id))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_COLUMNS)
        for r in records:
            writer.writerow(_record_row(r))
