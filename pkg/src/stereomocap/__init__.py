"""Stereo retroreflector tracking: simulation, detection, matching, pose and metrics."""

from .geometry import CameraModel, Pose, UnitQuaternion, compose, invert, project, projection_matrix, stereo_rig, transform_point
from .scene import Frame, MarkerGeometry, NoiseSpec, TrialTrajectory, default_geometry, render_frame, sample_trajectory
from .detect import DetectParams, Feature, detect
from .correspond import Correspondence, match
from .triangulate import TriangulationParams, triangulate
from .rigid import PoseEstimate, TrackParams, match_geometry, register, track_frame_pair
from .metrics import MetricReport, PoseSample, orientation_error, position_rmse, synchronize

__all__ = [
    "CameraModel", "Pose", "UnitQuaternion", "compose", "invert", "project", "projection_matrix",
    "stereo_rig", "transform_point", "Frame", "MarkerGeometry", "NoiseSpec", "TrialTrajectory",
    "default_geometry", "render_frame", "sample_trajectory", "DetectParams", "Feature", "detect",
    "Correspondence", "match", "TriangulationParams", "triangulate", "PoseEstimate", "TrackParams",
    "match_geometry", "register", "track_frame_pair", "MetricReport", "PoseSample",
    "orientation_error", "position_rmse", "synchronize",
]
