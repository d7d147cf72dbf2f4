"""SE(3) camera math: quaternions, rigid transforms, pinhole (un)projection.

Conventions used throughout the package:

* quaternions are stored ``(x, y, z, w)``, as in TUM trajectory files;
* cameras are right-handed with +z forward, +x right, +y down;
* a :class:`CameraPose` is camera-to-world, ``X_w = R @ X_c + t``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from mixmotion.errors import InvalidInputError

Z_EPS = 1e-6

# Quaternions this close to unit norm are stored untouched so that
# write/read cycles stay bit-exact.
_UNIT_TOL = 1e-12


def _as_quat(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    if q.shape != (4,):
        raise InvalidInputError(f"quaternion must have 4 components, got {q.shape}")
    if not np.all(np.isfinite(q)):
        raise InvalidInputError("quaternion has non-finite components")
    n = float(np.sqrt(np.dot(q, q)))
    if n == 0.0:
        raise InvalidInputError("zero-norm quaternion")
    if abs(n - 1.0) > _UNIT_TOL:
        q = q / n
    return q


def quat_to_rotation(q) -> np.ndarray:
    """Rotation matrix of a quaternion given as ``(x, y, z, w)``.

    The quaternion does not need to be normalized; ``q`` and ``-q`` give the
    same matrix.
    """
    x, y, z, w = np.asarray(q, dtype=np.float64).reshape(4)
    n2 = x * x + y * y + z * z + w * w
    if not np.isfinite(n2) or n2 == 0.0:
        raise InvalidInputError("zero-norm quaternion")
    s = 2.0 / n2
    xx, yy, zz = s * x * x, s * y * y, s * z * z
    xy, xz, yz = s * x * y, s * x * z, s * y * z
    wx, wy, wz = s * w * x, s * w * y, s * w * z
    return np.array(
        [
            [1.0 - (yy + zz), xy - wz, xz + wy],
            [xy + wz, 1.0 - (xx + zz), yz - wx],
            [xz - wy, yz + wx, 1.0 - (xx + yy)],
        ]
    )


def quat_multiply(a, b) -> np.ndarray:
    """Hamilton product ``a * b`` of ``(x, y, z, w)`` quaternions."""
    ax, ay, az, aw = a
    bx, by, bz, bw = b
    # scalar-vector terms are summed before the cross product so that
    # conj(q) * q cancels exactly
    return np.array(
        [
            (aw * bx + bw * ax) + (ay * bz - az * by),
            (aw * by + bw * ay) + (az * bx - ax * bz),
            (aw * bz + bw * az) + (ax * by - ay * bx),
            aw * bw - (ax * bx + ay * by + az * bz),
        ]
    )


def quat_conjugate(q) -> np.ndarray:
    x, y, z, w = q
    return np.array([-x, -y, -z, w])


@dataclass(frozen=True)
class CameraPose:
    """Camera-to-world pose: translation plus unit quaternion ``(x, y, z, w)``."""

    translation: np.ndarray
    rotation: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=np.float64).reshape(-1)
        if t.shape != (3,) or not np.all(np.isfinite(t)):
            raise InvalidInputError("translation must be a finite 3-vector")
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "rotation", _as_quat(self.rotation))

    @classmethod
    def identity(cls) -> "CameraPose":
        return cls(np.zeros(3), np.array([0.0, 0.0, 0.0, 1.0]))

    @classmethod
    def from_vector(cls, v) -> "CameraPose":
        """Build from a 7-vector ``(tx, ty, tz, qx, qy, qz, qw)``."""
        v = np.asarray(v, dtype=np.float64).reshape(-1)
        if v.shape != (7,):
            raise InvalidInputError(f"pose vector must have 7 entries, got {v.shape}")
        return cls(v[:3], v[3:])

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.translation, self.rotation])

    @property
    def rotation_matrix(self) -> np.ndarray:
        return quat_to_rotation(self.rotation)

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return self.translation


@dataclass(frozen=True)
class RigidTransform:
    """4x4 homogeneous rigid transform."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (4, 4):
            raise InvalidInputError(f"rigid transform must be 4x4, got {m.shape}")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(4))

    @classmethod
    def from_rt(cls, rotation, translation) -> "RigidTransform":
        m = np.eye(4)
        m[:3, :3] = rotation
        m[:3, 3] = translation
        return cls(m)

    @property
    def rotation(self) -> np.ndarray:
        return self.matrix[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.matrix[:3, 3]

    def is_valid(self, tol: float = 1e-6) -> bool:
        r = self.rotation
        return (
            np.allclose(self.matrix[3], [0.0, 0.0, 0.0, 1.0], atol=0.0)
            and np.allclose(r @ r.T, np.eye(3), atol=tol)
            and abs(np.linalg.det(r) - 1.0) <= tol
        )

    def apply(self, points) -> np.ndarray:
        """Transform an ``(N, 3)`` (or ``(3,)``) array of points."""
        p = np.asarray(points, dtype=np.float64)
        return p @ self.rotation.T + self.translation


def pose_to_cam_to_world(pose: CameraPose) -> RigidTransform:
    return RigidTransform.from_rt(pose.rotation_matrix, pose.translation)


def invert_transform(T: RigidTransform) -> RigidTransform:
    rt = T.rotation.T
    return RigidTransform.from_rt(rt, -rt @ T.translation)


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Transform applying ``b`` first, then ``a``."""
    return RigidTransform(a.matrix @ b.matrix)


def relative_motion(src: CameraPose, dst: CameraPose) -> RigidTransform:
    """Map from ``src`` camera coordinates into ``dst`` camera coordinates.

    Equal to ``compose(invert_transform(T_dst), T_src)`` but formed from the
    quaternions directly, so identical poses give the exact identity.
    """
    q = quat_multiply(quat_conjugate(dst.rotation), src.rotation)
    r_dst_t = dst.rotation_matrix.T
    return RigidTransform.from_rt(quat_to_rotation(q), r_dst_t @ (src.translation - dst.translation))


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        for name in ("fx", "fy", "cx", "cy"):
            v = float(getattr(self, name))
            if not np.isfinite(v):
                raise InvalidInputError(f"intrinsic {name} must be finite")
            object.__setattr__(self, name, v)
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidInputError("focal lengths must be positive")
        if int(self.width) < 1 or int(self.height) < 1:
            raise InvalidInputError("image size must be at least 1x1")
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray
    source_pixels: np.ndarray
    frame: Literal["camera", "world"] = "camera"

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class ProjectedPoints:
    pixels: np.ndarray
    depths: np.ndarray
    valid: np.ndarray = field(repr=False)


def valid_depth_mask(depth: np.ndarray) -> np.ndarray:
    return np.isfinite(depth) & (depth > 0)


def unproject(depth, k: Intrinsics) -> PointCloud:
    """Back-project every valid depth pixel into camera coordinates.

    Pixels with non-positive or non-finite depth produce no point.
    """
    depth = np.asarray(depth, dtype=np.float64)
    if depth.shape != k.shape:
        raise InvalidInputError(f"depth shape {depth.shape} does not match intrinsics {k.shape}")
    v, u = np.nonzero(valid_depth_mask(depth))
    d = depth[v, u]
    pts = np.stack([d * (u - k.cx) / k.fx, d * (v - k.cy) / k.fy, d], axis=1)
    return PointCloud(pts, np.stack([u, v], axis=1), "camera")


def project(points, k: Intrinsics, z_eps: float = Z_EPS) -> ProjectedPoints:
    """Pinhole projection of camera-frame points.

    Points with ``z < z_eps`` are flagged invalid; their pixels are NaN.
    """
    p = points.points if isinstance(points, PointCloud) else np.asarray(points, dtype=np.float64)
    p = np.atleast_2d(p)
    z = p[:, 2]
    valid = z >= z_eps
    safe_z = np.where(valid, z, 1.0)
    pix = np.stack([k.fx * p[:, 0] / safe_z + k.cx, k.fy * p[:, 1] / safe_z + k.cy], axis=1)
    pix[~valid] = np.nan
    return ProjectedPoints(pix, z.copy(), valid)
