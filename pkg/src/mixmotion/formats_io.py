"""Readers and writers for trajectories, depth maps, flow fields, images and tensors.

All binary integers and floats are little-endian. Byte layouts are
documented in ``docs/formats.md``.
"""

from __future__ import annotations

import json
import os
import re
import struct
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
from PIL import Image

from mixmotion.errors import FormatError, InvalidInputError, ParseError
from mixmotion.geometry import CameraPose, Intrinsics
from mixmotion.scene_motion import CameraTrajectory, MotionField

FLO_MAGIC = 202021.25
FLO_INVALID = 1e9
FLO_INVALID_THRESHOLD = 1e8

TENSOR_MAGIC = b"MMTK"
TENSOR_VERSION = 1
DTYPE_TAGS = {0: np.dtype("<f4"), 1: np.dtype("<f8"), 2: np.dtype("u1")}
_TAG_OF = {np.dtype(v).str: k for k, v in DTYPE_TAGS.items()}

PathLike = str | os.PathLike


# --------------------------------------------------------------------- trajectories


def parse_tum(text: str) -> tuple[list[float], list[CameraPose]]:
    """Parse ``timestamp tx ty tz qx qy qz qw`` lines; ``#`` starts a comment."""
    stamps, poses = [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 8:
            raise ParseError(f"expected 8 fields, got {len(parts)}", line=lineno)
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise ParseError("non-numeric field", line=lineno) from None
        try:
            poses.append(CameraPose.from_vector(vals[1:]))
        except InvalidInputError as e:
            raise ParseError(str(e), line=lineno) from None
        stamps.append(vals[0])
    return stamps, poses


def format_tum(stamps: Iterable[float], poses: Iterable[CameraPose]) -> str:
    lines = ["# timestamp tx ty tz qx qy qz qw"]
    for ts, pose in zip(stamps, poses):
        lines.append(" ".join(repr(float(x)) for x in (ts, *pose.as_vector())))
    return "\n".join(lines) + "\n"


def _intrinsics_from_doc(doc: Mapping, n: int) -> tuple[Intrinsics, ...]:
    try:
        w, h = int(doc["width"]), int(doc["height"])
        if "frames" in doc:
            frames = doc["frames"]
            if len(frames) != n:
                raise ParseError(f"intrinsics list has {len(frames)} frames, trajectory has {n}", field="frames")
            return tuple(Intrinsics(f["fx"], f["fy"], f["cx"], f["cy"], w, h) for f in frames)
        k = Intrinsics(doc["fx"], doc["fy"], doc["cx"], doc["cy"], w, h)
    except KeyError as e:
        raise ParseError("intrinsics sidecar is missing a key", field=e.args[0]) from None
    except (TypeError, InvalidInputError) as e:
        raise ParseError(f"bad intrinsics: {e}") from None
    return (k,) * n


def read_intrinsics(path: PathLike, n: int) -> tuple[Intrinsics, ...]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ParseError(f"malformed intrinsics file {path}: {e.msg}", line=e.lineno) from None
    return _intrinsics_from_doc(doc, n)


def intrinsics_doc(intrinsics: tuple[Intrinsics, ...]) -> dict:
    k0 = intrinsics[0]
    doc = {"width": k0.width, "height": k0.height}
    if all(k == k0 for k in intrinsics):
        doc.update(fx=k0.fx, fy=k0.fy, cx=k0.cx, cy=k0.cy)
    else:
        doc["frames"] = [{"fx": k.fx, "fy": k.fy, "cx": k.cx, "cy": k.cy} for k in intrinsics]
    return doc


def read_trajectory(path: PathLike, intrinsics: PathLike | Intrinsics | None = None) -> CameraTrajectory:
    """Read a TUM trajectory; intrinsics come from a JSON sidecar.

    Without an explicit ``intrinsics`` argument, ``<path>.intrinsics.json``
    next to the trajectory is used.
    """
    path = Path(path)
    stamps, poses = parse_tum(path.read_text(encoding="utf-8"))
    if not poses:
        raise ParseError(f"trajectory {path} contains no poses")
    if isinstance(intrinsics, Intrinsics):
        intr = (intrinsics,) * len(poses)
    else:
        side = Path(intrinsics) if intrinsics is not None else path.with_name(path.name + ".intrinsics.json")
        if not side.exists():
            raise ParseError(f"intrinsics sidecar {side} not found")
        intr = read_intrinsics(side, len(poses))
    return CameraTrajectory(tuple(poses), intr, tuple(stamps))


def write_trajectory(traj: CameraTrajectory, path: PathLike, intrinsics_path: PathLike | None = None) -> None:
    path = Path(path)
    stamps = traj.timestamps if traj.timestamps is not None else tuple(float(i) for i in range(len(traj)))
    path.write_text(format_tum(stamps, traj.poses), encoding="utf-8")
    side = Path(intrinsics_path) if intrinsics_path is not None else path.with_name(path.name + ".intrinsics.json")
    side.write_text(json.dumps(intrinsics_doc(traj.intrinsics)), encoding="utf-8")


# --------------------------------------------------------------------- depth


def read_pfm(path: PathLike) -> np.ndarray:
    """Read a single-channel PFM; negative scale means little-endian payload."""
    data = Path(path).read_bytes()
    m = re.match(rb"(P[fF])\s+(\d+)\s+(\d+)\s+(\S+)\s", data)
    if m is None:
        raise FormatError(f"{path}: not a PFM file")
    kind, w, h, scale = m.group(1), int(m.group(2)), int(m.group(3)), float(m.group(4))
    channels = 3 if kind == b"PF" else 1
    dtype = np.dtype("<f4") if scale < 0 else np.dtype(">f4")
    need = w * h * channels * 4
    payload = data[m.end() : m.end() + need]
    if len(payload) != need:
        raise FormatError(f"{path}: truncated PFM payload ({len(payload)} of {need} bytes)")
    arr = np.frombuffer(payload, dtype=dtype).reshape(h, w, channels)
    arr = np.flipud(arr).astype(np.float32)  # rows are stored bottom-to-top
    return arr[..., 0] if channels == 1 else arr


def write_pfm(path: PathLike, arr: np.ndarray) -> None:
    arr = np.asarray(arr, dtype="<f4")
    if arr.ndim != 2:
        raise InvalidInputError("only single-channel PFM is written")
    h, w = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(np.ascontiguousarray(np.flipud(arr)).tobytes())


def read_depth(path: PathLike, scale: float = 1.0) -> np.ndarray:
    """Depth in world units: 16-bit single-channel raster or PFM, times ``scale``.

    Zero (and non-finite) samples are invalid and stay zero / non-finite.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"depth file not found: {path}")
    if path.suffix.lower() == ".pfm":
        raw = read_pfm(path).astype(np.float64)
    else:
        try:
            with Image.open(path) as im:
                raw = np.array(im)
        except OSError as e:
            raise FormatError(f"{path}: cannot decode image ({e})") from None
        if raw.ndim != 2 or raw.dtype not in (np.uint16, np.int32):
            raise FormatError(f"{path}: depth must be a 16-bit single-channel raster, got {raw.dtype} {raw.shape}")
        raw = raw.astype(np.float64)
    return raw * float(scale)


def write_depth_png(path: PathLike, raw) -> None:
    raw = np.asarray(raw)
    if raw.dtype != np.uint16 or raw.ndim != 2:
        raise InvalidInputError("16-bit depth rasters must be uint16 H x W")
    Image.fromarray(raw).save(path)


# --------------------------------------------------------------------- flow


def encode_flo(field: MotionField) -> bytes:
    h, w = field.shape
    data = field.flow.astype("<f4")
    data[~field.valid] = FLO_INVALID
    return struct.pack("<fii", FLO_MAGIC, w, h) + data.tobytes()


def decode_flo(blob: bytes, frame_index: int = 0) -> MotionField:
    if len(blob) < 12:
        raise FormatError("flow file shorter than its 12-byte header")
    magic, w, h = struct.unpack_from("<fii", blob)
    if magic != FLO_MAGIC:
        raise FormatError(f"bad .flo magic {magic!r}")
    if w < 0 or h < 0:
        raise FormatError(f"bad .flo size {w}x{h}")
    need = 12 + 8 * w * h
    if len(blob) != need:
        raise FormatError(f".flo payload has {len(blob) - 12} bytes, expected {need - 12}")
    flow = np.frombuffer(blob, dtype="<f4", offset=12).reshape(h, w, 2).astype(np.float64)
    valid = np.all(np.isfinite(flow) & (np.abs(flow) < FLO_INVALID_THRESHOLD), axis=2)
    flow[~valid] = 0.0
    return MotionField(flow, valid, frame_index)


def write_flo(field: MotionField, path: PathLike) -> None:
    Path(path).write_bytes(encode_flo(field))


def read_flo(path: PathLike, frame_index: int = 0) -> MotionField:
    return decode_flo(Path(path).read_bytes(), frame_index)


# --------------------------------------------------------------------- RGB images


def read_rgb(path: PathLike) -> np.ndarray:
    try:
        with Image.open(path) as im:
            return np.array(im.convert("RGB"))
    except FileNotFoundError:
        raise
    except OSError as e:
        raise FormatError(f"{path}: cannot decode image ({e})") from None


def write_rgb(path: PathLike, img: np.ndarray) -> None:
    img = np.asarray(img)
    if img.dtype != np.uint8 or img.ndim != 3 or img.shape[2] != 3:
        raise InvalidInputError("RGB images must be uint8 H x W x 3")
    Image.fromarray(img, "RGB").save(path)


# --------------------------------------------------------------------- tensor container


def encode_tensors(entries) -> bytes:
    """Serialize ``name -> array`` entries (a mapping or a sequence of pairs)."""
    items = list(entries.items()) if isinstance(entries, Mapping) else list(entries)
    names = [n for n, _ in items]
    dup = {n for n in names if names.count(n) > 1}
    if dup:
        raise FormatError(f"duplicate tensor names: {sorted(dup)}")
    out = [TENSOR_MAGIC, struct.pack("<II", TENSOR_VERSION, len(items))]
    for name, arr in items:
        arr = np.asarray(arr)
        key = arr.dtype.newbyteorder("<").str if arr.dtype.itemsize > 1 else arr.dtype.str
        if key not in _TAG_OF:
            raise FormatError(f"entry {name!r}: unsupported dtype {arr.dtype} (f32, f64, u8 only)")
        tag = _TAG_OF[key]
        raw = name.encode("utf-8")
        out.append(struct.pack("<I", len(raw)) + raw)
        out.append(struct.pack("<BI", tag, arr.ndim))
        out.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        out.append(np.ascontiguousarray(arr, dtype=DTYPE_TAGS[tag]).tobytes())
    return b"".join(out)


def decode_tensors(blob: bytes) -> dict[str, np.ndarray]:
    pos = 0

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(blob):
            raise FormatError(f"truncated tensor container while reading {what} at byte {pos}")
        chunk = blob[pos : pos + n]
        pos += n
        return chunk

    if take(4, "magic") != TENSOR_MAGIC:
        raise FormatError("bad tensor container magic")
    version, count = struct.unpack("<II", take(8, "header"))
    if version != TENSOR_VERSION:
        raise FormatError(f"unsupported tensor container version {version}")
    out: dict[str, np.ndarray] = {}
    for i in range(count):
        (nlen,) = struct.unpack("<I", take(4, f"entry {i} name length"))
        try:
            name = take(nlen, f"entry {i} name").decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError(f"entry {i} name is not UTF-8 (byte {pos})") from None
        if name in out:
            raise FormatError(f"duplicate tensor name {name!r}")
        tag, ndim = struct.unpack("<BI", take(5, f"entry {name!r} dtype/ndim"))
        if tag not in DTYPE_TAGS:
            raise FormatError(f"entry {name!r}: unknown dtype tag {tag}")
        if ndim > 32:
            raise FormatError(f"entry {name!r}: implausible ndim {ndim}")
        dims = struct.unpack(f"<{ndim}Q", take(8 * ndim, f"entry {name!r} dims"))
        dt = DTYPE_TAGS[tag]
        n = int(np.prod(dims, dtype=np.uint64)) if ndim else 1
        payload = take(n * dt.itemsize, f"entry {name!r} payload")
        out[name] = np.frombuffer(payload, dtype=dt).reshape(dims).copy()
    if pos != len(blob):
        raise FormatError(f"{len(blob) - pos} trailing bytes after tensor container")
    return out


def write_tensor(entries, path: PathLike) -> None:
    Path(path).write_bytes(encode_tensors(entries))


def read_tensor(path: PathLike) -> dict[str, np.ndarray]:
    return decode_tensors(Path(path).read_bytes())
