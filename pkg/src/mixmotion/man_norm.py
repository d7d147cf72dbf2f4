"""Motion-adaptive normalization (forward only).

Features are instance-normalized per channel and then modulated by
spatial scale and shift maps predicted from the scene-motion field::

    out = gamma(m) * (f - mu_c) / sqrt(var_c + eps) + beta(m)

``gamma`` and ``beta`` come from a shared 3x3 conv + ReLU followed by two
parallel 3x3 conv heads, in the style of spatially-adaptive normalization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from mixmotion.errors import InvalidInputError
from mixmotion.scene_motion import MotionField

DEFAULT_EPS = 1e-5
DEFAULT_HIDDEN = 64


class NormStats(NamedTuple):
    mu: np.ndarray
    sigma: np.ndarray


@dataclass(frozen=True)
class ConvSpec:
    weights: np.ndarray  # out x in x kh x kw
    bias: np.ndarray
    padding: int

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if w.ndim != 4:
            raise InvalidInputError(f"conv weights must be 4-D, got shape {w.shape}")
        kh, kw = w.shape[2:]
        if kh % 2 == 0 or kw % 2 == 0:
            raise InvalidInputError(f"kernel size must be odd, got {kh}x{kw}")
        if kh != kw or int(self.padding) != (kh - 1) // 2:
            raise InvalidInputError("padding must be (k - 1) / 2 for a square kernel")
        if b.shape != (w.shape[0],):
            raise InvalidInputError(f"bias length {b.shape[0]} does not match {w.shape[0]} outputs")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "padding", int(self.padding))

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def zeros(cls, in_channels: int, out_channels: int, k: int = 3) -> "ConvSpec":
        return cls(np.zeros((out_channels, in_channels, k, k)), np.zeros(out_channels), (k - 1) // 2)

    @classmethod
    def random(cls, in_channels: int, out_channels: int, rng: np.random.Generator, k: int = 3) -> "ConvSpec":
        scale = 1.0 / np.sqrt(in_channels * k * k)
        w = rng.normal(0.0, scale, size=(out_channels, in_channels, k, k))
        b = rng.normal(0.0, 0.1, size=out_channels)
        return cls(w, b, (k - 1) // 2)


class ManSpecs(NamedTuple):
    shared: ConvSpec
    gamma: ConvSpec
    beta: ConvSpec


def init_man_specs(channels: int, *, hidden: int = DEFAULT_HIDDEN, seed: int = 0, zero_heads: bool = False) -> ManSpecs:
    """Seeded weights for the modulation stack; ``zero_heads`` mimics zero-conv init."""
    rng = np.random.default_rng(seed)
    shared = ConvSpec.random(2, hidden, rng)
    if zero_heads:
        return ManSpecs(shared, ConvSpec.zeros(hidden, channels), ConvSpec.zeros(hidden, channels))
    return ManSpecs(shared, ConvSpec.random(hidden, channels, rng), ConvSpec.random(hidden, channels, rng))


def specs_to_entries(specs: ManSpecs) -> dict[str, np.ndarray]:
    out = {}
    for name, spec in specs._asdict().items():
        out[f"{name}.weights"] = spec.weights
        out[f"{name}.bias"] = spec.bias
        out[f"{name}.padding"] = np.array([spec.padding], dtype=np.uint8)
    return out


def specs_from_entries(entries: dict[str, np.ndarray]) -> ManSpecs:
    try:
        return ManSpecs(
            *(
                ConvSpec(entries[f"{n}.weights"], entries[f"{n}.bias"], int(entries[f"{n}.padding"][0]))
                for n in ManSpecs._fields
            )
        )
    except KeyError as e:
        raise InvalidInputError(f"weight container lacks entry {e.args[0]!r}") from None


def instance_norm(f, eps: float = DEFAULT_EPS) -> tuple[np.ndarray, NormStats]:
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 3 or f.shape[1] * f.shape[2] < 1:
        raise InvalidInputError(f"features must be C x H x W with H*W >= 1, got {f.shape}")
    mu = f.mean(axis=(1, 2))
    centered = f - mu[:, None, None]
    var = np.mean(centered * centered, axis=(1, 2))
    out = centered / np.sqrt(var + eps)[:, None, None]
    return out, NormStats(mu, np.sqrt(var))


def conv2d(x, spec: ConvSpec) -> np.ndarray:
    """Zero-padded, shape-preserving 2-D cross-correlation of a ``C x H x W`` map."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3 or x.shape[0] != spec.in_channels:
        raise InvalidInputError(f"expected {spec.in_channels} input channels, got shape {x.shape}")
    p = spec.padding
    kh, kw = spec.weights.shape[2:]
    xp = np.pad(x, ((0, 0), (p, p), (p, p)))
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))  # C, H, W, kh, kw
    out = np.tensordot(spec.weights, win, axes=([1, 2, 3], [0, 3, 4]))
    return out + spec.bias[:, None, None]


def resize_bilinear(x, out_shape) -> np.ndarray:
    """Half-pixel-center (align_corners=False) bilinear resize of a ``C x h x w`` map."""
    x = np.asarray(x, dtype=np.float64)
    c, h, w = x.shape
    oh, ow = out_shape
    if h < 1 or w < 1:
        raise InvalidInputError("input must be at least 1x1")
    if (oh, ow) == (h, w):
        return x.copy()

    def axis(n_in, n_out):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.maximum(src, 0.0)
        i0 = np.minimum(np.floor(src).astype(int), n_in - 1)
        i1 = np.minimum(i0 + 1, n_in - 1)
        return i0, i1, src - i0

    y0, y1, wy = axis(h, oh)
    x0, x1, wx = axis(w, ow)
    top = x[:, y0][:, :, x0] * (1 - wx) + x[:, y0][:, :, x1] * wx
    bot = x[:, y1][:, :, x0] * (1 - wx) + x[:, y1][:, :, x1] * wx
    return top * (1 - wy)[:, None] + bot * wy[:, None]


def _motion_planes(m_s) -> np.ndarray:
    if isinstance(m_s, MotionField):
        flow = np.where(m_s.valid[..., None], m_s.flow, 0.0)
    else:
        flow = np.asarray(m_s, dtype=np.float64)
        if flow.ndim != 3 or flow.shape[2] != 2:
            raise InvalidInputError(f"motion must be H x W x 2, got {flow.shape}")
        flow = np.where(np.isfinite(flow), flow, 0.0)
    return flow.transpose(2, 0, 1)


def modulation_params(m_s, specs: ManSpecs, target_shape) -> tuple[np.ndarray, np.ndarray]:
    """Spatial ``(gamma, beta)``, each ``C x H x W``, predicted from the motion field.

    Displacements are resized to feature resolution without rescaling their
    magnitudes.
    """
    c, h, w = target_shape
    if specs.shared.in_channels != 2:
        raise InvalidInputError("shared conv must take the 2 motion channels")
    for name, head in (("gamma", specs.gamma), ("beta", specs.beta)):
        if head.in_channels != specs.shared.out_channels:
            raise InvalidInputError(f"{name} head expects {head.in_channels} inputs, shared conv gives {specs.shared.out_channels}")
        if head.out_channels != c:
            raise InvalidInputError(f"{name} head produces {head.out_channels} channels, features have {c}")
    m = resize_bilinear(_motion_planes(m_s), (h, w))
    hidden = np.maximum(conv2d(m, specs.shared), 0.0)
    return conv2d(hidden, specs.gamma), conv2d(hidden, specs.beta)


def man_apply(f, m_s, specs: ManSpecs, eps: float = DEFAULT_EPS) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    normed, _ = instance_norm(f, eps)
    gamma, beta = modulation_params(m_s, specs, f.shape)
    return gamma * normed + beta
