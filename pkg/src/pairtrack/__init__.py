"""Tracking with paired begin/end detections over a multi-sweep lidar buffer."""
from .detection import ClassLabel, Frame, GroundTruthTrack, PairedDetection, derive_time_targets
from .evaluation import MotReport, evaluate
from .geometry import OrientedBox2D, iou2d
from .tracker import TrackerConfig, run_sequence, step

__all__ = [
    "ClassLabel",
    "Frame",
    "GroundTruthTrack",
    "MotReport",
    "OrientedBox2D",
    "PairedDetection",
    "TrackerConfig",
    "derive_time_targets",
    "evaluate",
    "iou2d",
    "run_sequence",
    "step",
]
