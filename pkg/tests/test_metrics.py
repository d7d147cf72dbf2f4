import numpy as np
import pytest

import oracles
from mixmotion.errors import InvalidInputError
from mixmotion.metrics import PSNR_CAP_DB, l1, psnr, ssim, to_unit


def test_l1_examples(rng):
    a = rng.random((8, 9, 3))
    assert l1(a, a) == 0
    assert l1(np.zeros((4, 4, 3)), np.ones((4, 4, 3))) == 1
    b = rng.random((8, 9, 3))
    assert abs(l1(a, b) - oracles.l1_loop(a, b)) < 1e-9


def test_psnr_examples():
    a = np.zeros((16, 16, 3))
    assert psnr(a, a) == PSNR_CAP_DB
    assert abs(psnr(a, np.full_like(a, 0.1)) - 20.0) < 1e-9
    assert abs(psnr(a, np.full_like(a, 0.5)) - 10 * np.log10(4)) < 1e-12
    assert abs(psnr(a, np.full_like(a, 0.5)) - 6.0206) < 1e-4


def test_psnr_monotone_in_noise(rng):
    a = rng.random((32, 32, 3))
    base = rng.normal(size=a.shape)
    vals = [psnr(a, a + s * base) for s in (0.001, 0.01, 0.05, 0.1, 0.3)]
    assert all(x >= y for x, y in zip(vals, vals[1:]))


def test_ssim_identity(rng):
    a = rng.random((20, 24, 3))
    assert abs(ssim(a, a) - 1.0) < 1e-9


def test_ssim_negative_image(rng):
    a = 0.5 + 0.4 * np.sign(rng.normal(size=(32, 32)))[..., None].repeat(3, axis=2)
    assert ssim(a, 1 - a) < 0


def test_ssim_matches_direct_definition(rng):
    for _ in range(3):
        a = rng.random((18, 21, 3))
        b = np.clip(a + rng.normal(0, 0.1, a.shape), 0, 1)
        assert abs(ssim(a, b) - oracles.ssim_loop(a, b)) < 1e-6


def test_ssim_too_small():
    with pytest.raises(InvalidInputError):
        ssim(np.zeros((10, 30, 3)), np.zeros((10, 30, 3)))


def test_size_mismatch():
    for fn in (l1, psnr, ssim):
        with pytest.raises(InvalidInputError):
            fn(np.zeros((12, 12, 3)), np.zeros((12, 13, 3)))


def test_symmetry(rng):
    a, b = rng.random((2, 16, 16, 3))
    for fn in (l1, psnr, ssim):
        assert abs(fn(a, b) - fn(b, a)) < 1e-9


def test_uint8_ingest():
    a = np.full((12, 12, 3), 255, np.uint8)
    assert to_unit(a).max() == 1.0
    assert l1(a, np.zeros_like(a)) == 1.0
