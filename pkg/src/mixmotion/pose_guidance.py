"""Whole-body keypoints: parsing, stick-figure rasterization, guidance packing.

Keypoint layout is COCO-WholeBody: 17 body, 68 face and 21 points per hand.
Face and hands are optional per frame. The skeleton topology and palette
live in ``data/skeleton.json`` and are part of the output contract.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Sequence

import numpy as np

from mixmotion import raster
from mixmotion.errors import InvalidInputError, ParseError, SchemaError

GROUP_SIZES = {"body": 17, "face": 68, "hand_left": 21, "hand_right": 21}
OPTIONAL_GROUPS = ("face", "hand_left", "hand_right")
DEFAULT_CONF_THRESHOLD = 0.3


def _load_skeleton() -> dict:
    with resources.files("mixmotion").joinpath("data/skeleton.json").open("r", encoding="utf-8") as fh:
        return json.load(fh)


SKELETON = _load_skeleton()


@dataclass(frozen=True)
class KeypointSet:
    """One frame of keypoints, each group an ``(n, 3)`` array of ``x, y, conf``."""

    body: np.ndarray
    face: np.ndarray | None = None
    hand_left: np.ndarray | None = None
    hand_right: np.ndarray | None = None
    frame_index: int = 0

    def group(self, name: str) -> np.ndarray | None:
        return getattr(self, name)

    @property
    def present_groups(self) -> tuple[str, ...]:
        return tuple(g for g in GROUP_SIZES if self.group(g) is not None)


@dataclass(frozen=True)
class PoseImage:
    pixels: np.ndarray
    groups: tuple[str, ...] = ()

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape[:2]


@dataclass(frozen=True)
class RasterOptions:
    draw_face: bool = True
    draw_hands: bool = True
    conf_threshold: float = DEFAULT_CONF_THRESHOLD


@dataclass(frozen=True)
class GuidancePack:
    """Channel stack ``(6 + 3M) x H x W`` in ``[0, 1]``.

    Order: reference image RGB, reference pose RGB, then each driving pose RGB.
    """

    data: np.ndarray
    channel_order: tuple[str, ...] = field(default=())

    @property
    def num_driving(self) -> int:
        return (self.data.shape[0] - 6) // 3

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape[1:]


def _check_group(name: str, value, where: str) -> np.ndarray:
    n = GROUP_SIZES[name]
    if not isinstance(value, list):
        raise SchemaError(f"group {name!r} must be a list of [x, y, confidence] triples", field=where)
    if len(value) != n:
        raise SchemaError(f"group {name!r} needs {n} points, got {len(value)}", field=where)
    try:
        arr = np.array(value, dtype=np.float64)
    except (TypeError, ValueError):
        raise SchemaError(f"group {name!r} has non-numeric entries", field=where) from None
    if arr.shape != (n, 3):
        raise SchemaError(f"group {name!r} entries must be [x, y, confidence] triples", field=where)
    if not np.all(np.isfinite(arr)):
        raise SchemaError(f"group {name!r} has non-finite values", field=where)
    if np.any((arr[:, 2] < 0) | (arr[:, 2] > 1)):
        raise SchemaError(f"group {name!r} has confidences outside [0, 1]", field=where)
    return arr


def parse_keypoints(text: str) -> list[KeypointSet]:
    """Parse a keypoint document (JSON list of frames) into ordered frames."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"malformed keypoint document: {e.msg}", line=e.lineno) from None
    if not isinstance(doc, list):
        raise SchemaError("top level must be a list of frames", field="$")
    frames = []
    for i, fr in enumerate(doc):
        where = f"$[{i}]"
        if not isinstance(fr, dict):
            raise SchemaError("frame must be an object", field=where)
        unknown = set(fr) - set(GROUP_SIZES) - {"frame_index"}
        if unknown:
            raise SchemaError(f"unknown keys {sorted(unknown)}", field=where)
        if "body" not in fr or fr["body"] is None:
            raise SchemaError("frame has no 'body' group", field=where)
        groups = {"body": _check_group("body", fr["body"], f"{where}.body")}
        for g in OPTIONAL_GROUPS:
            if fr.get(g) is not None:
                groups[g] = _check_group(g, fr[g], f"{where}.{g}")
        idx = fr.get("frame_index", i)
        if not isinstance(idx, int) or isinstance(idx, bool):
            raise SchemaError("frame_index must be an integer", field=f"{where}.frame_index")
        frames.append(KeypointSet(frame_index=idx, **groups))
    return frames


def dump_keypoints(frames: Sequence[KeypointSet]) -> str:
    doc = []
    for kp in frames:
        fr = {"frame_index": kp.frame_index}
        for g in GROUP_SIZES:
            arr = kp.group(g)
            if arr is not None:
                fr[g] = np.asarray(arr, dtype=float).tolist()
        doc.append(fr)
    return json.dumps(doc)


def line_thickness(canvas) -> int:
    h, w = canvas
    return max(1, round(min(h, w) / 256))


def stick_joints(body: np.ndarray) -> np.ndarray:
    """18 stick-figure joints from the 17 COCO body points (neck = shoulder midpoint)."""
    out = np.empty((18, 3))
    for i, src in enumerate(SKELETON["stick_joints_from_coco"]):
        if src == "neck":
            ls, rs = body[5], body[6]
            out[i] = [(ls[0] + rs[0]) / 2, (ls[1] + rs[1]) / 2, min(ls[2], rs[2])]
        else:
            out[i] = body[src]
    return out


def rasterize_pose(kp: KeypointSet, canvas, opts: RasterOptions | None = None) -> PoseImage:
    """Draw a keypoint frame as a colored stick figure on a black canvas."""
    opts = opts or RasterOptions()
    h, w = canvas
    if h < 1 or w < 1:
        raise InvalidInputError("canvas must be at least 1x1")
    img = np.zeros((h, w, 3), dtype=np.uint8)
    th = line_thickness(canvas)
    thr = opts.conf_threshold
    drawn = []

    joints = stick_joints(np.asarray(kp.body, dtype=np.float64))
    ok = joints[:, 2] >= thr
    colors = SKELETON["stick_colors"]
    for (a, b), color in zip(SKELETON["stick_limbs"], colors):
        if ok[a] and ok[b]:
            raster.draw_line(img, joints[a, :2], joints[b, :2], color, th)
    for j in np.flatnonzero(ok):
        raster.draw_disc(img, joints[j, :2], th + 1, colors[j])
    drawn.append("body")

    if opts.draw_face and kp.face is not None:
        face = np.asarray(kp.face)
        for idx, closed in SKELETON["face_polylines"]:
            chain = list(idx) + ([idx[0]] if closed else [])
            for a, b in zip(chain[:-1], chain[1:]):
                if face[a, 2] >= thr and face[b, 2] >= thr:
                    raster.draw_line(img, face[a, :2], face[b, :2], SKELETON["face_color"], th)
        drawn.append("face")

    if opts.draw_hands:
        for g in ("hand_left", "hand_right"):
            hand = kp.group(g)
            if hand is None:
                continue
            hand = np.asarray(hand)
            for (a, b), color in zip(SKELETON["hand_edges"], SKELETON["hand_colors"]):
                if hand[a, 2] >= thr and hand[b, 2] >= thr:
                    raster.draw_line(img, hand[a, :2], hand[b, :2], color, th)
            drawn.append(g)
    return PoseImage(img, tuple(drawn))


def _as_rgb8(img, what: str) -> np.ndarray:
    arr = img.pixels if isinstance(img, PoseImage) else np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise InvalidInputError(f"{what} must be an HxWx3 image, got {arr.shape}")
    if arr.dtype != np.uint8:
        raise InvalidInputError(f"{what} must be 8-bit, got {arr.dtype}")
    return arr


def pack_guidance(ref_image, ref_pose, driving: Sequence) -> GuidancePack:
    planes = [_as_rgb8(ref_image, "reference image"), _as_rgb8(ref_pose, "reference pose")]
    planes += [_as_rgb8(p, f"driving pose {i}") for i, p in enumerate(driving)]
    shape = planes[0].shape[:2]
    for i, p in enumerate(planes):
        if p.shape[:2] != shape:
            raise InvalidInputError(f"plane {i} has size {p.shape[:2]}, expected {shape}")
    data = np.concatenate([p.transpose(2, 0, 1) for p in planes], axis=0).astype(np.float32) / np.float32(255.0)
    names = ["ref_image", "ref_pose"] + [f"driving_{i:05d}" for i in range(len(driving))]
    order = tuple(f"{n}.{c}" for n in names for c in "rgb")
    return GuidancePack(data, order)


def unpack_guidance(pack: GuidancePack) -> tuple[np.ndarray, np.ndarray, list[np.ndarray]]:
    """Inverse of :func:`pack_guidance`, back to 8-bit ``H x W x 3`` planes."""
    data = np.asarray(pack.data)
    if data.ndim != 3 or data.shape[0] < 6 or data.shape[0] % 3:
        raise InvalidInputError(f"guidance pack must have 6 + 3M channels, got {data.shape}")
    u8 = np.rint(data * 255.0).astype(np.uint8)
    rgb = [u8[i : i + 3].transpose(1, 2, 0) for i in range(0, data.shape[0], 3)]
    return rgb[0], rgb[1], rgb[2:]
