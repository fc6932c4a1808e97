"""Command line interface: simulate, preprocess, evaluate, calibrate, sync.

Exit codes: 0 success, 2 usage, 3 configuration (missing files, bad
config), 4 validation (malformed or inconsistent data), 5 computation
(degenerate registration, no detectable peak).

Precedence of settings: config file over flags over built-in defaults.
All randomness derives from the single --seed value, so reruns with the
same inputs produce byte-identical outputs.
"""
import argparse
import os
import sys

import numpy as np

from . import body_model as bm
from . import calib_sync, dataset_io, metrics, preprocess, scan_sim
from .errors import (ConfigError, DegenerateRegistrationError,
                     DegenerateRotationError, FormatError,
                     InvalidArgumentError, NoPeakError, SequenceLockedError,
                     ToolkitError)
from .geometry import PointCloud
from .textutil import read_records

EX_OK = 0
EX_USAGE = 2
EX_CONFIG = 3
EX_VALIDATION = 4
EX_COMPUTE = 5


def _parse_bool(text):
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0,
                        help="seed for all randomness (default 0)")
    common.add_argument("--config", metavar="FILE",
                        help="key-value config file; overrides flags")

    parser = argparse.ArgumentParser(
        prog="lidarmocap",
        description="LiDAR body-capture toolkit: scan simulation, "
                    "preprocessing, metrics, calibration, and sync.")
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="command")
    subparsers = {}

    sim = sub.add_parser(
        "simulate", parents=[common],
        help="scan a mesh animation into a sequence directory")
    sim.add_argument("--animation", required=True, metavar="PATH",
                     help="OBJ file or directory of per-frame OBJ files "
                          "(labeled as body geometry)")
    sim.add_argument("--static", action="append", default=[],
                     metavar="FILE",
                     help="OBJ file of static scene geometry; repeatable")
    sim.add_argument("--spec", metavar="FILE",
                     help="sensor spec config; defaults to 2048x128 beams, "
                          "360/45 degree FOV, center (0,0,2), 120 m range")
    sim.add_argument("--out", required=True, metavar="DIR",
                     help="output sequence directory")
    sim.add_argument("--sequence-id", default="sim")
    sim.add_argument("--frame-rate", type=float, default=10.0,
                     help="frames per second (default 10)")
    sim.add_argument("--body-only", action="store_true",
                     help="keep only beams whose first hit is body geometry")
    sim.add_argument("--crop-range", nargs=2, type=float,
                     metavar=("MIN", "MAX"),
                     help="apply a random occlusion crop with radius drawn "
                          "from this range, per frame")
    sim.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                     help="worker threads (results are thread-count "
                          "independent)")
    subparsers["simulate"] = sim

    pre = sub.add_parser(
        "preprocess", parents=[common],
        help="background removal, clustering, tracking, normalization")
    pre.add_argument("--input", required=True, metavar="DIR",
                     help="raw sequence directory")
    pre.add_argument("--out", required=True, metavar="DIR",
                     help="output directory (one track_NN subdirectory per "
                          "tracked instance)")
    pre.add_argument("--background", metavar="FILE",
                     help="background point frame (.bin) to subtract")
    pre.add_argument("--background-threshold", type=float, default=0.1,
                     help="background distance threshold in meters "
                          "(default 0.1)")
    pre.add_argument("--eps", type=float, default=preprocess.DEFAULT_EPS,
                     help="DBSCAN radius in meters (default 0.4)")
    pre.add_argument("--min-pts", type=int,
                     default=preprocess.DEFAULT_MIN_PTS,
                     help="DBSCAN core threshold (default 10)")
    pre.add_argument("--max-dist", type=float,
                     default=preprocess.DEFAULT_MAX_DIST,
                     help="tracking gate in meters (default 1.0)")
    pre.add_argument("--nfps", type=int, default=preprocess.N_FPS,
                     help="points per normalized frame (default 256)")
    pre.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                     help="accepted for interface symmetry; preprocessing "
                          "is sequential by contract")
    subparsers["preprocess"] = pre

    ev = sub.add_parser(
        "evaluate", parents=[common],
        help="J/V position, angle, and SUCD metrics for predictions")
    ev.add_argument("--model", required=True, metavar="FILE",
                    help="body model container (binary or text)")
    ev.add_argument("--pred", required=True, metavar="PATH",
                    help="predicted annotations: sequence dir, dir of "
                         "person_*.txt, or a single file")
    ev.add_argument("--gt", required=True, metavar="PATH",
                    help="ground-truth annotations (same forms as --pred)")
    ev.add_argument("--clouds", action="append", default=[],
                    metavar="PID:TRACKDIR",
                    help="per-person track directory for SUCD; repeatable")
    ev.add_argument("--sequence-id", default="eval",
                    help="sequence id used in the report")
    ev.add_argument("--report", metavar="FILE",
                    help="write the human-readable report here too")
    ev.add_argument("--csv", metavar="FILE",
                    help="write the machine-readable report here")
    subparsers["evaluate"] = ev

    cal = sub.add_parser(
        "calibrate", parents=[common],
        help="ICP rigid registration between two captures")
    cal.add_argument("source", metavar="SOURCE",
                     help="point frame (.bin) or sequence directory")
    cal.add_argument("target", metavar="TARGET",
                     help="point frame (.bin) or sequence directory")
    cal.add_argument("--frame", type=int, default=0,
                     help="frame index used when given a sequence "
                          "directory (default 0)")
    cal.add_argument("--out", required=True, metavar="FILE",
                     help="output transform file (4x4 row-major text)")
    cal.add_argument("--max-iters", type=int,
                     default=calib_sync.DEFAULT_MAX_ITERS)
    cal.add_argument("--tol", type=float, default=calib_sync.DEFAULT_TOL,
                     help="stop when the RMS residual improves by less "
                          "than this (meters)")
    subparsers["calibrate"] = cal

    syn = sub.add_parser(
        "sync", parents=[common],
        help="jump-peak frame offsets across capture streams")
    syn.add_argument("traces", nargs="+", metavar="TRACE",
                     help="height trace file or track directory; at "
                          "least two")
    syn.add_argument("--window", type=int, default=5,
                     help="moving-average smoothing window (default 5)")
    syn.add_argument("--out", metavar="FILE",
                     help="output offsets file")
    subparsers["sync"] = syn

    return parser, subparsers


def _apply_config(parser, args, path):
    """Overlay config-file values onto parsed args (config wins)."""
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    seen_append = set()
    for lineno, tokens in read_records(path):
        key = tokens[0]
        values = tokens[1:]
        dest = key.replace("-", "_")
        if dest == "config":
            raise ConfigError(f"{path}:{lineno}: config files cannot nest")
        action = next((a for a in parser._actions if a.dest == dest), None)
        if action is None:
            raise ConfigError(
                f"{path}:{lineno}: unknown configuration key {key!r}")
        if isinstance(action, argparse._StoreTrueAction):
            convert = _parse_bool
        else:
            convert = action.type or str
        try:
            converted = [convert(v) for v in values]
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for "
                              f"{key!r}: {exc}") from None
        if isinstance(action, argparse._AppendAction):
            if dest not in seen_append:
                setattr(args, dest, [])
                seen_append.add(dest)
            if len(converted) != 1:
                raise ConfigError(f"{path}:{lineno}: {key!r} takes one "
                                  f"value per line")
            getattr(args, dest).append(converted[0])
        elif action.nargs in (None, "?") or isinstance(
                action, argparse._StoreTrueAction):
            if len(converted) != 1:
                raise ConfigError(f"{path}:{lineno}: {key!r} takes exactly "
                                  f"one value")
            setattr(args, dest, converted[0])
        elif isinstance(action.nargs, int):
            if len(converted) != action.nargs:
                raise ConfigError(f"{path}:{lineno}: {key!r} takes "
                                  f"{action.nargs} values")
            setattr(args, dest, converted)
        else:
            setattr(args, dest, converted)


def _require_file(path, what):
    if not os.path.isfile(path):
        raise ConfigError(f"{what} not found: {path}")


def _require_path(path, what):
    if not os.path.exists(path):
        raise ConfigError(f"{what} not found: {path}")


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _cmd_simulate(args):
    _require_path(args.animation, "animation")
    for p in args.static:
        _require_file(p, "static mesh")
    if args.spec:
        _require_file(args.spec, "sensor spec")
        spec = scan_sim.load_sensor_spec(args.spec)
    else:
        spec = scan_sim.SensorSpec()
    if args.frame_rate <= 0.0:
        raise InvalidArgumentError(
            f"--frame-rate must be positive, got {args.frame_rate}")
    body_frames = dataset_io.import_mesh_animation(args.animation,
                                                   label="body")
    statics = [dataset_io.read_obj(p, label="static") for p in args.static]
    mesh_frames = [[mesh] + statics for mesh in body_frames]
    clouds = scan_sim.simulate_sequence(spec, mesh_frames,
                                        body_only=args.body_only,
                                        threads=max(1, args.threads))
    if args.crop_range is not None:
        clouds = [scan_sim.random_crop(c, args.crop_range,
                                       seed=[args.seed, 101, i])
                  if len(c) else c
                  for i, c in enumerate(clouds)]
    frames = [dataset_io.Frame(i / args.frame_rate, c)
              for i, c in enumerate(clouds)]
    dataset_io.write_sequence(args.out, args.sequence_id, frames,
                              frame_rate_hz=args.frame_rate,
                              sensor_spec=spec)
    for i, c in enumerate(clouds):
        print(f"frame {i}: {len(c)} points")
    print(f"wrote {len(frames)} frames to {args.out}")
    return EX_OK


# ---------------------------------------------------------------------------
# preprocess
# ---------------------------------------------------------------------------

def _cmd_preprocess(args):
    _require_file(os.path.join(args.input, "manifest.txt"),
                  "sequence manifest")
    background = None
    if args.background:
        _require_file(args.background, "background frame")
        background = dataset_io.read_point_frame(args.background)
    seq = dataset_io.read_sequence(args.input)
    if not seq.frames:
        print("no frames in input sequence; nothing to do")
        return EX_OK
    frame_clusters = []
    for frame in seq.frames:
        cloud = frame.cloud
        if background is not None:
            cloud = preprocess.remove_background(cloud, background,
                                                 args.background_threshold)
        clusters, _ = preprocess.cluster_instances(cloud, args.eps,
                                                   args.min_pts)
        frame_clusters.append([cloud.select(ix) for ix in clusters])
    tracks = preprocess.track_sequence(frame_clusters,
                                       max_dist=args.max_dist)
    if not tracks:
        print("no instances found; nothing to write")
        return EX_OK
    os.makedirs(args.out, exist_ok=True)
    for track in sorted(tracks, key=lambda t: t.track_id):
        tdir = os.path.join(args.out, f"track_{track.track_id:02d}")
        frames = []
        locs = []
        for orig in track.frame_indices():
            nf = preprocess.normalize_frame(
                track.frames[orig],
                seed=[args.seed, track.track_id, orig],
                n_fps=args.nfps)
            timestamp = seq.frames[orig].timestamp
            frames.append(dataset_io.Frame(timestamp,
                                           PointCloud(nf.points)))
            locs.append((orig, timestamp, nf.loc))
        seq_id = f"{seq.manifest.sequence_id}_track{track.track_id:02d}"
        dataset_io.write_sequence(tdir, seq_id, frames,
                                  frame_rate_hz=seq.manifest.frame_rate_hz,
                                  coordinate_frame=
                                  seq.manifest.coordinate_frame)
        dataset_io.write_locs(os.path.join(tdir, "locs.txt"), locs)
        print(f"track {track.track_id}: {len(frames)} frames -> {tdir}")
    print(f"wrote {len(tracks)} tracks to {args.out}")
    return EX_OK


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def _load_annotation_set(path, what):
    _require_path(path, f"{what} annotations")
    if os.path.isdir(path):
        if os.path.isfile(os.path.join(path, "manifest.txt")):
            return dataset_io.read_sequence(path).annotations
        names = sorted(n for n in os.listdir(path)
                       if n.startswith("person_") and n.endswith(".txt"))
        if not names:
            raise ConfigError(f"{what} annotations: no person_*.txt "
                              f"files in {path}")
        anns = {}
        for name in names:
            ann = dataset_io.read_person_annotations(
                os.path.join(path, name))
            if ann.person_id in anns:
                raise InvalidArgumentError(
                    f"duplicate person id {ann.person_id} in {path}")
            anns[ann.person_id] = ann
        return anns
    ann = dataset_io.read_person_annotations(path)
    return {ann.person_id: ann}


def _load_track_clouds(path, n_frames):
    """World-coordinate clouds per original frame from a track directory."""
    _require_file(os.path.join(path, "manifest.txt"), "track manifest")
    _require_file(os.path.join(path, "locs.txt"), "track locs")
    seq = dataset_io.read_sequence(path)
    locs = dataset_io.read_locs(os.path.join(path, "locs.txt"))
    if len(locs) != len(seq.frames):
        raise InvalidArgumentError(
            f"{path}: locs.txt has {len(locs)} rows but the track has "
            f"{len(seq.frames)} frames")
    clouds = [np.zeros((0, 3)) for _ in range(n_frames)]
    for (orig, _, loc), frame in zip(locs, seq.frames):
        if not 0 <= orig < n_frames:
            raise InvalidArgumentError(
                f"{path}: locs.txt references frame {orig} but the "
                f"annotations have {n_frames} frames")
        clouds[orig] = frame.cloud.points + loc
    return clouds


def _cmd_evaluate(args):
    _require_file(args.model, "body model")
    model = bm.load_body_model(args.model)
    pred_anns = _load_annotation_set(args.pred, "prediction")
    gt_anns = _load_annotation_set(args.gt, "ground-truth")
    if sorted(pred_anns) != sorted(gt_anns):
        raise InvalidArgumentError(
            f"person ids differ: predictions have {sorted(pred_anns)}, "
            f"ground truth has {sorted(gt_anns)}")
    cloud_dirs = {}
    for item in args.clouds:
        pid_text, sep, cpath = item.partition(":")
        if not sep:
            raise ConfigError(
                f"--clouds takes PID:TRACKDIR, got {item!r}")
        cloud_dirs[int(pid_text)] = cpath
    records = []
    for pid in sorted(gt_anns):
        pred = pred_anns[pid]
        gt = gt_anns[pid]
        if pred.n_frames != gt.n_frames:
            raise InvalidArgumentError(
                f"frame count mismatch for person {pid}: "
                f"{pred.source_path or '--pred'} has {pred.n_frames}, "
                f"{gt.source_path or '--gt'} has {gt.n_frames}")
        clouds = None
        if pid in cloud_dirs:
            clouds = _load_track_clouds(cloud_dirs[pid], gt.n_frames)
        records.append(metrics.evaluate_prediction(
            pred.as_prediction(), gt.as_prediction(), model,
            sequence_id=args.sequence_id, person_id=pid, clouds=clouds))
    report = metrics.format_report(records)
    print(report, end="")
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(report)
    if args.csv:
        metrics.write_report_csv(args.csv, records)
    return EX_OK


# ---------------------------------------------------------------------------
# calibrate / sync
# ---------------------------------------------------------------------------

def _load_cloud_arg(path, frame_index, what):
    _require_path(path, f"{what} capture")
    if os.path.isdir(path):
        seq = dataset_io.read_sequence(path)
        if not 0 <= frame_index < len(seq.frames):
            raise InvalidArgumentError(
                f"{what}: frame {frame_index} out of range "
                f"({len(seq.frames)} frames in {path})")
        return seq.frames[frame_index].cloud
    return dataset_io.read_point_frame(path)


def _cmd_calibrate(args):
    source = _load_cloud_arg(args.source, args.frame, "source")
    target = _load_cloud_arg(args.target, args.frame, "target")
    try:
        result = calib_sync.icp_register(source, target,
                                         max_iters=args.max_iters,
                                         tol=args.tol)
    except DegenerateRegistrationError as exc:
        raise DegenerateRegistrationError(
            f"{args.source} -> {args.target}: {exc}") from exc
    calib_sync.save_transform(args.out, result.transform)
    print(f"iterations: {len(result.residuals)}")
    print(f"rms residual: {result.residual:.9f} m")
    print(f"wrote transform to {args.out}")
    return EX_OK


def _load_trace_arg(path):
    _require_path(path, "height trace")
    if os.path.isdir(path):
        locs_path = os.path.join(path, "locs.txt")
        _require_file(locs_path, "track locs")
        rows = dataset_io.read_locs(locs_path)
        if not rows:
            raise InvalidArgumentError(f"{path}: empty track")
        return calib_sync.HeightTrace(
            np.asarray([r[1] for r in rows]),
            np.asarray([r[2][2] for r in rows]))
    return calib_sync.load_height_trace(path)


def _cmd_sync(args):
    if len(args.traces) < 2:
        print("error: sync needs at least two traces", file=sys.stderr)
        return EX_USAGE
    traces = [_load_trace_arg(p) for p in args.traces]
    try:
        offsets = calib_sync.align_streams(traces, window=args.window)
    except NoPeakError as exc:
        raise NoPeakError(f"{' '.join(args.traces)}: {exc}") from exc
    lines = ["# lidarmocap frame offsets: stream offset source"]
    for i, (off, src) in enumerate(zip(offsets, args.traces)):
        lines.append(f"{i} {off} {src}")
        print(f"stream {i}: offset {off} ({src})")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"wrote offsets to {args.out}")
    return EX_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "preprocess": _cmd_preprocess,
    "evaluate": _cmd_evaluate,
    "calibrate": _cmd_calibrate,
    "sync": _cmd_sync,
}


def main(argv=None):
    parser, subparsers = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EX_OK
    try:
        if getattr(args, "config", None):
            _apply_config(subparsers[args.command], args, args.config)
        return _COMMANDS[args.command](args)
    except (ConfigError, SequenceLockedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EX_CONFIG
    except (FormatError, InvalidArgumentError,
            DegenerateRotationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EX_VALIDATION
    except (DegenerateRegistrationError, NoPeakError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EX_COMPUTE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EX_CONFIG
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EX_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
