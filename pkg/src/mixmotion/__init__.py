"""Mixed character/scene motion guidance toolkit.

Scene motion from camera trajectories and a reference depth map, whole-body
pose rasterization, motion-adaptive normalization, diffusion schedule algebra,
pixel metrics, and the file formats tying them together.
"""

from mixmotion.geometry import CameraPose, Intrinsics, PointCloud, ProjectedPoints, RigidTransform
from mixmotion.scene_motion import CameraTrajectory, MotionField, PluckerField, track_pair, track_sequence

__all__ = [
    "CameraPose",
    "CameraTrajectory",
    "Intrinsics",
    "MotionField",
    "PluckerField",
    "PointCloud",
    "ProjectedPoints",
    "RigidTransform",
    "track_pair",
    "track_sequence",
]

__version__ = "0.1.0"
