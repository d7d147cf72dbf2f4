"""Scene motion tracking: camera-induced pixel displacement between frames.

A reference depth map is lifted into the camera of frame ``l``, carried
through world space into the camera of frame ``l+1`` and projected again.
The displacement of each source pixel is the scene motion for that pair.
Fields are anchored at source pixels (Middlebury flow convention).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numba
import numpy as np

from mixmotion.errors import EmptyFieldError, InvalidInputError
from mixmotion.geometry import Z_EPS, CameraPose, Intrinsics, relative_motion


@dataclass(frozen=True)
class CameraTrajectory:
    poses: tuple[CameraPose, ...]
    intrinsics: tuple[Intrinsics, ...]
    timestamps: tuple[float, ...] | None = None

    def __post_init__(self):
        poses = tuple(self.poses)
        intr = tuple(self.intrinsics)
        if len(poses) != len(intr):
            raise InvalidInputError(f"{len(poses)} poses but {len(intr)} intrinsics")
        if intr and len({k.shape for k in intr}) != 1:
            raise InvalidInputError("all frames must share the same image size")
        if self.timestamps is not None and len(self.timestamps) != len(poses):
            raise InvalidInputError("timestamp count does not match pose count")
        object.__setattr__(self, "poses", poses)
        object.__setattr__(self, "intrinsics", intr)
        if self.timestamps is not None:
            object.__setattr__(self, "timestamps", tuple(float(t) for t in self.timestamps))

    @classmethod
    def with_shared_intrinsics(cls, poses: Sequence[CameraPose], k: Intrinsics, timestamps=None):
        return cls(tuple(poses), (k,) * len(poses), timestamps)

    def __len__(self):
        return len(self.poses)

    @property
    def frames(self) -> list[tuple[CameraPose, Intrinsics]]:
        return list(zip(self.poses, self.intrinsics))

    @property
    def shape(self) -> tuple[int, int]:
        return self.intrinsics[0].shape


@dataclass(frozen=True)
class MotionField:
    """Per-pixel displacement ``flow[v, u] = (du, dv)`` in pixels.

    Invalid pixels hold zero displacement.
    """

    flow: np.ndarray
    valid: np.ndarray
    frame_index: int = 0

    def __post_init__(self):
        flow = np.asarray(self.flow, dtype=np.float64)
        valid = np.asarray(self.valid, dtype=bool)
        if flow.ndim != 3 or flow.shape[2] != 2 or valid.shape != flow.shape[:2]:
            raise InvalidInputError(f"flow must be HxWx2 with an HxW mask, got {flow.shape} / {valid.shape}")
        object.__setattr__(self, "flow", flow)
        object.__setattr__(self, "valid", valid)

    @property
    def u(self) -> np.ndarray:
        return self.flow[..., 0]

    @property
    def v(self) -> np.ndarray:
        return self.flow[..., 1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.valid.shape


@dataclass(frozen=True)
class PluckerField:
    """``data[v, u] = (d, o x d)``: unit ray direction then moment."""

    data: np.ndarray

    @property
    def direction(self) -> np.ndarray:
        return self.data[..., :3]

    @property
    def moment(self) -> np.ndarray:
        return self.data[..., 3:]


class MotionStats(NamedTuple):
    mean_magnitude: float
    max_magnitude: float
    valid_fraction: float


@numba.njit(nogil=True, cache=True)
def _track_rows(depth, k0, k1, dm, t, z_eps, r0, r1, flow, valid):
    # dm = R - I of the relative motion, so D = dm @ X + t vanishes exactly
    # for a static camera and the field is exactly zero.
    fx, fy, cx, cy = k0[0], k0[1], k0[2], k0[3]
    gx, gy, hx, hy = k1[0], k1[1], k1[2], k1[3]
    w = depth.shape[1]
    for v in range(r0, r1):
        ay = (v - cy) / fy
        for u in range(w):
            d = depth[v, u]
            if not (d >= z_eps and math.isfinite(d)):
                valid[v, u] = False
                flow[v, u, 0] = 0.0
                flow[v, u, 1] = 0.0
                continue
            ax = (u - cx) / fx
            x = d * ax
            y = d * ay
            dx = dm[0, 0] * x + dm[0, 1] * y + dm[0, 2] * d + t[0]
            dy = dm[1, 0] * x + dm[1, 1] * y + dm[1, 2] * d + t[1]
            dz = dm[2, 0] * x + dm[2, 1] * y + dm[2, 2] * d + t[2]
            z2 = d + dz
            if z2 < z_eps:
                valid[v, u] = False
                flow[v, u, 0] = 0.0
                flow[v, u, 1] = 0.0
                continue
            # normalized-coordinate change: x'/z' - x/z = (dx - ax*dz) / z'
            nx = (dx - ax * dz) / z2
            ny = (dy - ay * dz) / z2
            flow[v, u, 0] = gx * nx + (gx - fx) * ax + (hx - cx)
            flow[v, u, 1] = gy * ny + (gy - fy) * ay + (hy - cy)
            valid[v, u] = True


def _kvec(k: Intrinsics) -> np.ndarray:
    return np.array([k.fx, k.fy, k.cx, k.cy])


def track_pair(
    depth,
    k_l: Intrinsics,
    k_l1: Intrinsics,
    pose_l: CameraPose,
    pose_l1: CameraPose,
    *,
    frame_index: int = 0,
    z_eps: float = Z_EPS,
) -> MotionField:
    """Scene motion of every source pixel from frame ``l`` to frame ``l+1``.

    ``depth`` is expressed in the camera of frame ``l``. Pixels with missing
    depth, or whose point lands behind the next camera, are invalid.
    Endpoints outside the image stay valid.
    """
    depth = np.ascontiguousarray(depth, dtype=np.float64)
    if depth.shape != k_l.shape:
        raise InvalidInputError(f"depth shape {depth.shape} does not match intrinsics {k_l.shape}")
    if k_l1.shape != k_l.shape:
        raise InvalidInputError("source and target intrinsics must share the image size")
    rel = relative_motion(pose_l, pose_l1)
    dm = np.ascontiguousarray(rel.rotation - np.eye(3))
    t = np.ascontiguousarray(rel.translation)
    h, w = depth.shape
    flow = np.empty((h, w, 2))
    valid = np.empty((h, w), dtype=bool)
    _track_rows(depth, _kvec(k_l), _kvec(k_l1), dm, t, float(z_eps), 0, h, flow, valid)
    if not valid.any():
        raise EmptyFieldError("no pixel has usable depth for this frame pair")
    return MotionField(flow, valid, frame_index)


def track_sequence(depth, traj: CameraTrajectory, *, threads: int = 1, z_eps: float = Z_EPS) -> list[MotionField]:
    """Scene motion for each consecutive pair of a trajectory.

    The same reference depth is placed in each frame-``l`` camera. Pairs are
    computed on a pool of ``threads`` workers; output order follows frame
    index regardless of completion order.
    """
    if len(traj) < 2:
        raise InvalidInputError("trajectory needs at least two frames")
    if threads < 1:
        raise InvalidInputError("threads must be >= 1")
    depth = np.ascontiguousarray(depth, dtype=np.float64)

    def one(l):
        return track_pair(
            depth,
            traj.intrinsics[l],
            traj.intrinsics[l + 1],
            traj.poses[l],
            traj.poses[l + 1],
            frame_index=l,
            z_eps=z_eps,
        )

    pairs = range(len(traj) - 1)
    if threads == 1:
        return [one(l) for l in pairs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, pairs))


def plucker_embedding(pose: CameraPose, k: Intrinsics) -> PluckerField:
    """Per-pixel Plücker coordinates of the camera rays in world frame."""
    v, u = np.mgrid[0 : k.height, 0 : k.width].astype(np.float64)
    rays = np.stack([(u - k.cx) / k.fx, (v - k.cy) / k.fy, np.ones_like(u)], axis=-1)
    d = rays @ pose.rotation_matrix.T
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    o = np.broadcast_to(pose.center, d.shape)
    return PluckerField(np.concatenate([d, np.cross(o, d)], axis=-1))


def motion_stats(field: MotionField) -> MotionStats:
    n = field.valid.size
    count = int(np.count_nonzero(field.valid))
    if count == 0:
        return MotionStats(0.0, 0.0, 0.0)
    mag = np.hypot(field.u[field.valid], field.v[field.valid])
    return MotionStats(float(mag.mean()), float(mag.max()), count / n)
