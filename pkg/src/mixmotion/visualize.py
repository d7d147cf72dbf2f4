"""Motion-field renderings: dense color-wheel images and arrow plots."""

from __future__ import annotations

import numpy as np

from mixmotion import raster
from mixmotion.formats_io import FLO_INVALID_THRESHOLD
from mixmotion.scene_motion import MotionField


def make_colorwheel() -> np.ndarray:
    """Middlebury color wheel (55 hues, RGB in [0, 255])."""
    ry, yg, gc, cb, bm, mr = 15, 6, 4, 11, 13, 6
    wheel = np.zeros((ry + yg + gc + cb + bm + mr, 3))
    col = 0
    wheel[0:ry, 0] = 255
    wheel[0:ry, 1] = np.floor(255 * np.arange(ry) / ry)
    col += ry
    wheel[col : col + yg, 0] = 255 - np.floor(255 * np.arange(yg) / yg)
    wheel[col : col + yg, 1] = 255
    col += yg
    wheel[col : col + gc, 1] = 255
    wheel[col : col + gc, 2] = np.floor(255 * np.arange(gc) / gc)
    col += gc
    wheel[col : col + cb, 1] = 255 - np.floor(255 * np.arange(cb) / cb)
    wheel[col : col + cb, 2] = 255
    col += cb
    wheel[col : col + bm, 2] = 255
    wheel[col : col + bm, 0] = np.floor(255 * np.arange(bm) / bm)
    col += bm
    wheel[col : col + mr, 2] = 255 - np.floor(255 * np.arange(mr) / mr)
    wheel[col : col + mr, 0] = 255
    return wheel


_WHEEL = make_colorwheel()


def _usable(field: MotionField) -> np.ndarray:
    f = field.flow
    return field.valid & np.all(np.isfinite(f) & (np.abs(f) <= FLO_INVALID_THRESHOLD), axis=2)


def flow_hue_position(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Fractional color-wheel index of each direction, in ``[0, ncols - 1]``."""
    a = np.arctan2(-v, -u) / np.pi
    return (a + 1.0) / 2.0 * (len(_WHEEL) - 1)


def flow_to_color(field: MotionField, max_magnitude: float | None = None) -> np.ndarray:
    """Dense visualization: hue is direction, saturation grows with magnitude.

    Magnitudes are normalized by the field's largest valid magnitude unless
    ``max_magnitude`` is given. Zero motion is white, invalid pixels black.
    """
    ok = _usable(field)
    u = np.where(ok, field.u, 0.0)
    v = np.where(ok, field.v, 0.0)
    rad = np.hypot(u, v)
    if max_magnitude is None:
        max_magnitude = float(rad[ok].max()) if ok.any() else 0.0
    rad = rad / max_magnitude if max_magnitude > 0 else np.zeros_like(rad)
    fk = flow_hue_position(u, v)
    k0 = np.floor(fk).astype(int)
    k1 = (k0 + 1) % len(_WHEEL)
    f = (fk - k0)[..., None]
    col = ((1 - f) * _WHEEL[k0] + f * _WHEEL[k1]) / 255.0
    r = rad[..., None]
    inside = r <= 1
    col = np.where(inside, 1 - r * (1 - col), col * 0.75)
    img = np.floor(255.0 * col).astype(np.uint8)
    img[~ok] = 0
    return img


def arrow_segments(field: MotionField, stride: int) -> tuple[np.ndarray, np.ndarray]:
    """``(sources, targets)`` of one arrow per ``stride x stride`` cell.

    Sources are cell centers with valid motion; targets are source plus
    displacement. Both are ``(N, 2)`` arrays of ``(x, y)``.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    h, w = field.shape
    ys = np.arange(stride // 2, h, stride)
    xs = np.arange(stride // 2, w, stride)
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    yy, xx = yy.ravel(), xx.ravel()
    ok = _usable(field)[yy, xx]
    src = np.stack([xx[ok], yy[ok]], axis=1).astype(np.float64)
    dst = src + field.flow[yy[ok], xx[ok]]
    return src, dst


def flow_to_arrows(
    field: MotionField,
    stride: int = 16,
    underlay: np.ndarray | None = None,
    color=(0, 255, 0),
    head_fraction: float = 0.3,
) -> np.ndarray:
    """Sparse visualization: a segment from each sampled source pixel to its target.

    A two-stroke arrowhead sits at the target; zero motion draws a dot.
    """
    h, w = field.shape
    if underlay is not None:
        img = np.array(underlay, dtype=np.uint8, copy=True)
        if img.shape != (h, w, 3):
            raise ValueError(f"underlay must be {h}x{w}x3, got {img.shape}")
    else:
        img = np.zeros((h, w, 3), dtype=np.uint8)
    src, dst = arrow_segments(field, stride)
    for (x0, y0), (x1, y1) in zip(src, dst):
        raster.draw_line(img, (x0, y0), (x1, y1), color)
        dx, dy = x1 - x0, y1 - y0
        length = np.hypot(dx, dy)
        if length < 1.0:
            continue
        head = max(2.0, head_fraction * min(length, 4.0 * stride))
        ux, uy = dx / length, dy / length
        for s in (1.0, -1.0):
            # wings at +-30 degrees from the reversed shaft
            c, sn = np.cos(np.pi / 6), s * np.sin(np.pi / 6)
            wx = -(ux * c - uy * sn) * head
            wy = -(ux * sn + uy * c) * head
            raster.draw_line(img, (x1, y1), (x1 + wx, y1 + wy), color)
    return img
