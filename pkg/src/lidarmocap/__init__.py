"""LiDAR body-capture toolkit.

Scan simulation against triangle meshes, point-cloud preprocessing
(background removal, clustering, tracking, sampling), body-model
forward kinematics, capture metrics, rigid calibration, and stream
synchronization.
"""
from ._kernels import BACKEND as _KERNEL_BACKEND
from .body_model import (BodyModel, forward, global_joint_rotations,
                         load_body_model, pose_from_axis_angle,
                         pose_from_rot6d, rest_joints, root_relative,
                         save_body_model, shaped_template)
from .calib_sync import (HeightTrace, IcpResult, align_streams,
                         detect_jump_peak, icp_register, load_height_trace,
                         load_transform, save_height_trace, save_transform,
                         smooth_trace)
from .dataset_io import (Frame, PersonAnnotations, Sequence,
                         SequenceManifest, import_mesh_animation, read_locs,
                         read_obj, read_person_annotations, read_point_frame,
                         read_sequence, write_locs, write_obj,
                         write_person_annotations, write_point_frame,
                         write_sequence)
from .errors import (ConfigError, DegenerateRegistrationError,
                     DegenerateRotationError, EmptyInputError, FormatError,
                     InvalidArgumentError, NoPeakError, SequenceLockedError,
                     ToolkitError)
from .geometry import (PointCloud, RigidTransform, Triangle,
                       axis_angle_to_matrix, farthest_point_sample,
                       geodesic_angle_deg, knn, matrix_to_rot6d,
                       ray_triangle_intersect, rot6d_to_matrix,
                       unidirectional_chamfer)
from .metrics import (EvaluationRecord, LossWeights, SmplPrediction,
                      SucdResult, angle_error, consistency_loss,
                      evaluate_prediction, jv_error, mse_joint_loss,
                      prior_loss, solver_loss, sucd)
from .preprocess import (N_FPS, NormalizedFrame, Track, cluster_instances,
                         hungarian_assign, normalize_frame,
                         remove_background, track_sequence,
                         vertex_guidance)
from .scan_sim import (SensorSpec, TriangleMesh, beam_directions,
                       crop_occlusion, load_sensor_spec, random_crop,
                       save_sensor_spec, scan_scene, simulate_sequence)

__version__ = "0.1.0"


def kernel_backend():
    """Name of the active numeric kernel backend: compiled or python."""
    return _KERNEL_BACKEND


__all__ = [
    "BodyModel", "ConfigError", "DegenerateRegistrationError",
    "DegenerateRotationError", "EmptyInputError", "EvaluationRecord",
    "FormatError", "Frame", "HeightTrace", "IcpResult",
    "InvalidArgumentError", "LossWeights", "N_FPS", "NoPeakError",
    "NormalizedFrame", "PersonAnnotations", "PointCloud", "RigidTransform",
    "SensorSpec", "Sequence", "SequenceLockedError", "SequenceManifest",
    "SmplPrediction", "SucdResult", "ToolkitError", "Track", "TriangleMesh",
    "align_streams", "angle_error", "axis_angle_to_matrix",
    "beam_directions", "cluster_instances", "consistency_loss",
    "crop_occlusion", "detect_jump_peak", "evaluate_prediction",
    "farthest_point_sample", "forward", "geodesic_angle_deg",
    "global_joint_rotations", "hungarian_assign", "icp_register",
    "import_mesh_animation", "jv_error", "kernel_backend", "knn",
    "load_body_model", "load_height_trace", "load_sensor_spec",
    "load_transform", "matrix_to_rot6d", "mse_joint_loss",
    "normalize_frame", "pose_from_axis_angle", "pose_from_rot6d",
    "prior_loss", "random_crop", "ray_triangle_intersect", "read_locs",
    "read_obj", "read_person_annotations", "read_point_frame",
    "read_sequence", "remove_background", "rest_joints", "root_relative",
    "rot6d_to_matrix", "save_body_model", "save_height_trace",
    "save_sensor_spec", "save_transform", "scan_scene", "shaped_template",
    "simulate_sequence", "smooth_trace", "solver_loss", "sucd",
    "track_sequence", "unidirectional_chamfer", "write_locs", "write_obj",
    "write_person_annotations", "write_point_frame", "write_sequence",
]
