"""Frame-wise pixel metrics: L1, PSNR and single-scale SSIM on [0, 1] images."""

from __future__ import annotations

import math

import numpy as np
from scipy.ndimage import correlate1d

from mixmotion.errors import InvalidInputError

PSNR_CAP_DB = 99.0
SSIM_WIN = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03
BT601 = np.array([0.299, 0.587, 0.114])


def to_unit(img) -> np.ndarray:
    """8-bit images are divided by 255; float images are taken as already in [0, 1]."""
    arr = np.asarray(img)
    if arr.dtype == np.uint8:
        return arr.astype(np.float64) / 255.0
    return arr.astype(np.float64)


def _pair(a, b):
    a, b = to_unit(a), to_unit(b)
    if a.shape != b.shape:
        raise InvalidInputError(f"image sizes differ: {a.shape} vs {b.shape}")
    return a, b


def l1(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean(np.abs(a - b)))


def mse(a, b) -> float:
    a, b = _pair(a, b)
    d = a - b
    return float(np.mean(d * d))


def psnr(a, b) -> float:
    """PSNR in dB with peak 1.0; identical images report ``PSNR_CAP_DB``."""
    m = mse(a, b)
    if m == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(1.0 / m))


def luminance(img: np.ndarray) -> np.ndarray:
    if img.ndim == 2:
        return img
    if img.ndim == 3 and img.shape[2] == 3:
        return img @ BT601
    raise InvalidInputError(f"expected H x W or H x W x 3 image, got {img.shape}")


def gaussian_window(size: int = SSIM_WIN, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return g / g.sum()


def _filter_valid(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    r = len(g) // 2
    y = correlate1d(correlate1d(x, g, axis=0, mode="constant"), g, axis=1, mode="constant")
    return y[r : x.shape[0] - r, r : x.shape[1] - r]


def ssim_map(a, b) -> np.ndarray:
    a, b = _pair(a, b)
    ya, yb = luminance(a), luminance(b)
    if min(ya.shape) < SSIM_WIN:
        raise InvalidInputError(f"SSIM needs images of at least {SSIM_WIN}x{SSIM_WIN}, got {ya.shape}")
    g = gaussian_window()
    c1, c2 = SSIM_K1**2, SSIM_K2**2
    mu_a, mu_b = _filter_valid(ya, g), _filter_valid(yb, g)
    saa = _filter_valid(ya * ya, g) - mu_a * mu_a
    sbb = _filter_valid(yb * yb, g) - mu_b * mu_b
    sab = _filter_valid(ya * yb, g) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * sab + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (saa + sbb + c2)
    return num / den


def ssim(a, b) -> float:
    """Mean local SSIM of the BT.601 luminance, 11x11 Gaussian window (sigma 1.5)."""
    return float(ssim_map(a, b).mean())


METRICS = {"l1": l1, "psnr": psnr, "ssim": ssim}
