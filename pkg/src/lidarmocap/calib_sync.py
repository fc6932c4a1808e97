"""Cross-sensor rigid calibration (ICP) and jump-peak time synchronization.

Calibration is classic point-to-point ICP: alternate nearest-neighbor
correspondence with a closed-form SVD rigid fit. Synchronization finds the
shared jump peak in per-stream height traces and reports frame offsets
against the first stream.
"""
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (DegenerateRegistrationError, FormatError,
                     InvalidArgumentError, NoPeakError)
from .geometry import RigidTransform, as_points
from .textutil import fmt_float, parse_floats, read_records

DEFAULT_MAX_ITERS = 100
DEFAULT_TOL = 1e-10
# Second singular value below this (relative to the first) means the
# points do not constrain a rotation.
_RANK_TOL = 1e-9


@dataclass
class IcpResult:
    """Registration output: transform mapping source onto target.

    residual is the final root-mean-square correspondence distance in
    meters; residuals holds the value after every iteration (monotone
    non-increasing).
    """
    transform: RigidTransform
    residual: float
    residuals: list


def _require_nondegenerate(pts, name):
    if pts.shape[0] < 3:
        raise DegenerateRegistrationError(
            f"{name} cloud needs >= 3 points, got {pts.shape[0]}")
    centered = pts - pts.mean(axis=0)
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv[1] <= _RANK_TOL * max(sv[0], 1.0):
        raise DegenerateRegistrationError(
            f"{name} cloud is collinear; rotation is unconstrained")


def _fit_rigid(source, target):
    """Least-squares rigid transform taking source points to paired targets.

    Kabsch with reflection correction: cross-covariance SVD, determinant
    sign fix, translation from centroids.
    """
    cs = source.mean(axis=0)
    ct = target.mean(axis=0)
    H = (source - cs).T @ (target - ct)
    U, S, Vt = np.linalg.svd(H)
    if S[1] <= _RANK_TOL * max(S[0], 1.0):
        raise DegenerateRegistrationError(
            "rank-deficient cross-covariance; correspondence geometry is "
            "degenerate")
    V = Vt.T
    d = np.sign(np.linalg.det(V @ U.T))
    R = V @ np.diag([1.0, 1.0, d]) @ U.T
    return RigidTransform(R, ct - R @ cs)


def icp_register(source, target, max_iters=DEFAULT_MAX_ITERS,
                 tol=DEFAULT_TOL, init=None):
    """Register source onto target with point-to-point ICP.

    Each iteration matches every source point to its nearest target point
    under the current transform, refits the rigid transform in closed form
    from the original source, and records the RMS correspondence distance.
    Iteration stops when the RMS improves by less than tol or after
    max_iters rounds.

    Args:
        source, target: clouds of >= 3 non-collinear points.
        init: initial RigidTransform; default aligns the centroids.

    Returns:
        IcpResult; the transform maps source coordinates onto target.
    """
    src = as_points(source, allow_empty=False)
    tgt = as_points(target, allow_empty=False)
    _require_nondegenerate(src, "source")
    _require_nondegenerate(tgt, "target")
    if int(max_iters) < 1:
        raise InvalidArgumentError(f"max_iters must be >= 1, got {max_iters}")
    if tol < 0.0:
        raise InvalidArgumentError(f"tol must be >= 0, got {tol}")
    if init is None:
        init = RigidTransform(np.eye(3),
                              tgt.mean(axis=0) - src.mean(axis=0))
    transform = init
    residuals = []
    prev = np.inf
    for _ in range(int(max_iters)):
        moved = transform.apply(src)
        _, nn = _kernels.nearest_sqdist(moved, tgt)
        corr = tgt[nn]
        transform = _fit_rigid(src, corr)
        diff = transform.apply(src) - corr
        residual = float(np.sqrt(np.mean(np.einsum("ij,ij->i", diff, diff))))
        residuals.append(residual)
        if prev - residual < tol:
            break
        prev = residual
    return IcpResult(transform, residuals[-1], residuals)


# ---------------------------------------------------------------------------
# Temporal synchronization
# ---------------------------------------------------------------------------

@dataclass
class HeightTrace:
    """Per-frame vertical coordinate of a tracked subject."""
    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.timestamps, dtype=np.float64).reshape(-1)
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if t.shape[0] != v.shape[0]:
            raise InvalidArgumentError(
                f"timestamps ({t.shape[0]}) and values ({v.shape[0]}) "
                f"differ in length")
        if not (np.isfinite(t).all() and np.isfinite(v).all()):
            raise InvalidArgumentError("height trace must be finite")
        if t.shape[0] >= 2 and np.any(np.diff(t) <= 0.0):
            raise InvalidArgumentError(
                "height trace timestamps must be strictly increasing")
        self.timestamps = t
        self.values = v

    def __len__(self):
        return self.values.shape[0]


def smooth_trace(values, window):
    """Centered moving average with partial windows at the edges."""
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    w = int(window)
    if w < 1:
        raise InvalidArgumentError(f"window must be >= 1, got {window}")
    if w == 1:
        return v.copy()
    half_lo = w // 2
    half_hi = (w - 1) // 2
    csum = np.concatenate([[0.0], np.cumsum(v)])
    n = v.shape[0]
    idx = np.arange(n)
    lo = np.maximum(idx - half_lo, 0)
    hi = np.minimum(idx + half_hi, n - 1)
    return (csum[hi + 1] - csum[lo]) / (hi + 1 - lo)


def detect_jump_peak(trace, window=1):
    """Frame index of the jump apex: global max after smoothing.

    Ties resolve to the earliest frame. A trace that is constant after
    smoothing has no peak.
    """
    if len(trace) <= int(window):
        raise InvalidArgumentError(
            f"trace length {len(trace)} must exceed window {window}")
    smoothed = smooth_trace(trace.values, window)
    if np.all(smoothed == smoothed[0]):
        raise NoPeakError("height trace is constant; no jump peak found")
    return int(np.argmax(smoothed))


def align_streams(traces, window=1):
    """Frame offsets aligning every stream's jump peak to the first stream.

    offsets[i] = peak(stream 0) - peak(stream i): adding the offset to a
    stream's frame index maps it to the reference timeline. offsets[0] is
    always 0.
    """
    if len(traces) < 2:
        raise InvalidArgumentError(
            f"alignment needs >= 2 streams, got {len(traces)}")
    peaks = [detect_jump_peak(t, window) for t in traces]
    return [peaks[0] - p for p in peaks]


# ---------------------------------------------------------------------------
# File interchange
# ---------------------------------------------------------------------------

def save_height_trace(path, trace):
    lines = ["# lidarmocap height trace"]
    for t, v in zip(trace.timestamps, trace.values):
        lines.append(f"{fmt_float(t)} {fmt_float(v)}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_height_trace(path):
    ts = []
    vs = []
    for lineno, tokens in read_records(path):
        t, v = parse_floats(path, lineno, tokens, 2)
        ts.append(t)
        vs.append(v)
    try:
        return HeightTrace(np.asarray(ts), np.asarray(vs))
    except InvalidArgumentError as exc:
        raise FormatError(path, f"invalid height trace: {exc}") from exc


def save_transform(path, transform):
    """Write a RigidTransform as a 4x4 row-major text matrix."""
    m = transform.matrix()
    lines = ["# lidarmocap rigid transform (4x4 row-major)"]
    for row in m:
        lines.append(" ".join(fmt_float(x) for x in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_transform(path):
    records = read_records(path)
    if len(records) != 4:
        raise FormatError(path, f"expected 4 matrix rows, got {len(records)}")
    rows = [parse_floats(path, lineno, tokens, 4)
            for lineno, tokens in records]
    m = np.asarray(rows)
    if not np.allclose(m[3], [0.0, 0.0, 0.0, 1.0], atol=1e-12):
        raise FormatError(path, "last row must be 0 0 0 1")
    try:
        return RigidTransform.from_matrix(m)
    except InvalidArgumentError as exc:
        raise FormatError(path, f"invalid transform: {exc}") from exc
