"""Minimal deterministic raster primitives on ``H x W x 3`` uint8 canvases.

Pixel ``(x, y)`` is column ``x``, row ``y``; pixel centers sit on integer
coordinates. Everything outside the canvas is clipped.
"""

from __future__ import annotations

import math

import numpy as np


def _round(x: float) -> int:
    return int(math.floor(x + 0.5))


def _clip_segment(x0, y0, x1, y1, xmin, ymin, xmax, ymax):
    """Liang-Barsky clip; returns None when the segment misses the box."""
    dx, dy = x1 - x0, y1 - y0
    t0, t1 = 0.0, 1.0
    for p, q in ((-dx, x0 - xmin), (dx, xmax - x0), (-dy, y0 - ymin), (dy, ymax - y0)):
        if p == 0:
            if q < 0:
                return None
            continue
        r = q / p
        if p < 0:
            if r > t1:
                return None
            t0 = max(t0, r)
        else:
            if r < t0:
                return None
            t1 = min(t1, r)
    return x0 + t0 * dx, y0 + t0 * dy, x0 + t1 * dx, y0 + t1 * dy


def bresenham(x0: int, y0: int, x1: int, y1: int) -> list[tuple[int, int]]:
    """Integer pixels of the segment between two integer endpoints, inclusive."""
    pts = []
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x, y = x0, y0
    while True:
        pts.append((x, y))
        if x == x1 and y == y1:
            return pts
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy


def line_mask(shape, p0, p1, thickness: int = 1) -> np.ndarray:
    """Boolean mask of a segment.

    Width 1 uses Bresenham on rounded endpoints; wider lines cover every
    pixel center within ``thickness / 2`` of the segment.
    """
    h, w = shape
    mask = np.zeros((h, w), dtype=bool)
    (x0, y0), (x1, y1) = p0, p1
    if not all(math.isfinite(c) for c in (x0, y0, x1, y1)):
        return mask
    if thickness <= 1:
        lo_x, lo_y, hi_x, hi_y = -2.0, -2.0, w + 1.0, h + 1.0
        inside = all(lo_x <= x <= hi_x for x in (x0, x1)) and all(lo_y <= y <= hi_y for y in (y0, y1))
        if not inside:
            clipped = _clip_segment(x0, y0, x1, y1, lo_x, lo_y, hi_x, hi_y)
            if clipped is None:
                return mask
            x0, y0, x1, y1 = clipped
        for x, y in bresenham(_round(x0), _round(y0), _round(x1), _round(y1)):
            if 0 <= x < w and 0 <= y < h:
                mask[y, x] = True
        return mask
    r = thickness / 2.0
    xa = max(0, int(math.floor(min(x0, x1) - r)))
    xb = min(w - 1, int(math.ceil(max(x0, x1) + r)))
    ya = max(0, int(math.floor(min(y0, y1) - r)))
    yb = min(h - 1, int(math.ceil(max(y0, y1) + r)))
    if xa > xb or ya > yb:
        return mask
    yy, xx = np.mgrid[ya : yb + 1, xa : xb + 1].astype(np.float64)
    dx, dy = x1 - x0, y1 - y0
    len2 = dx * dx + dy * dy
    if len2 == 0.0:
        s = np.zeros_like(xx)
    else:
        s = np.clip(((xx - x0) * dx + (yy - y0) * dy) / len2, 0.0, 1.0)
    d2 = (xx - (x0 + s * dx)) ** 2 + (yy - (y0 + s * dy)) ** 2
    mask[ya : yb + 1, xa : xb + 1] = d2 <= r * r
    return mask


def disc_mask(shape, center, radius: float) -> np.ndarray:
    h, w = shape
    mask = np.zeros((h, w), dtype=bool)
    cx, cy = center
    if not (math.isfinite(cx) and math.isfinite(cy)):
        return mask
    xa, xb = max(0, int(math.floor(cx - radius))), min(w - 1, int(math.ceil(cx + radius)))
    ya, yb = max(0, int(math.floor(cy - radius))), min(h - 1, int(math.ceil(cy + radius)))
    if xa > xb or ya > yb:
        return mask
    yy, xx = np.mgrid[ya : yb + 1, xa : xb + 1]
    mask[ya : yb + 1, xa : xb + 1] = (xx - cx) ** 2 + (yy - cy) ** 2 <= radius * radius
    return mask


def draw_line(img: np.ndarray, p0, p1, color, thickness: int = 1) -> None:
    img[line_mask(img.shape[:2], p0, p1, thickness)] = color


def draw_disc(img: np.ndarray, center, radius: float, color) -> None:
    img[disc_mask(img.shape[:2], center, radius)] = color
