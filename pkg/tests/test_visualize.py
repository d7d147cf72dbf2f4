import numpy as np

from mixmotion.scene_motion import MotionField
from mixmotion.visualize import arrow_segments, flow_hue_position, flow_to_arrows, flow_to_color


def uniform(h, w, u, v):
    return MotionField(np.broadcast_to([u, v], (h, w, 2)).copy(), np.ones((h, w), bool))


def test_zero_field_is_white_with_black_invalid():
    valid = np.ones((6, 8), bool)
    valid[2, 3] = False
    img = flow_to_color(MotionField(np.zeros((6, 8, 2)), valid))
    assert (img[valid] == 255).all()
    assert (img[2, 3] == 0).all()


def test_uniform_field_single_hue():
    img = flow_to_color(uniform(5, 7, 3.0, 0.0))
    assert (img == img[0, 0]).all()
    assert len(np.unique(img.reshape(-1, 3), axis=0)) == 1
    assert not (img[0, 0] == 255).all()


def test_hue_sweeps_continuously_over_rotation():
    n = 720
    phi = np.linspace(0, 2 * np.pi, n, endpoint=False)
    pos = flow_hue_position(np.cos(phi), np.sin(phi))
    span = pos.max() - pos.min()
    steps = np.diff(np.r_[pos, pos[0]])
    jumps = np.abs(steps) > span / 2
    assert jumps.sum() == 1  # exactly one wrap of the wheel
    assert np.abs(steps[~jumps]).max() < 2 * span / n + 1e-9
    assert np.all(np.sign(steps[~jumps]) == np.sign(steps[~jumps][0]))
    # rendered rotational field: neighbouring directions get neighbouring colors
    f = MotionField(np.stack([np.cos(phi), np.sin(phi)], -1)[None], np.ones((1, n), bool))
    img = flow_to_color(f).astype(int)
    assert np.abs(np.diff(img[0], axis=0)).max() <= 12
    assert len(np.unique(img[0], axis=0)) > 50


def test_max_magnitude_override():
    f = uniform(3, 3, 1.0, 0.0)
    assert not np.array_equal(flow_to_color(f), flow_to_color(f, max_magnitude=10.0))


def test_zero_field_arrows_are_dots():
    f = MotionField(np.zeros((32, 32, 2)), np.ones((32, 32), bool))
    img = flow_to_arrows(f, stride=8)
    lit = np.argwhere(img.any(axis=2))
    src, dst = arrow_segments(f, 8)
    assert len(lit) == len(src) == 16
    assert {tuple(p) for p in lit[:, ::-1]} == {tuple(p) for p in src.astype(int)}


def test_uniform_arrows_are_parallel_and_equal():
    f = uniform(40, 40, 5.0, 2.0)
    src, dst = arrow_segments(f, 10)
    d = dst - src
    assert np.array_equal(d, np.broadcast_to([5.0, 2.0], d.shape))


def test_endpoints_read_back(rng):
    flow = rng.normal(0, 4, (48, 64, 2))
    f = MotionField(flow, np.ones((48, 64), bool))
    src, dst = arrow_segments(f, 8)
    for (x, y), (x1, y1) in zip(src, dst):
        assert x1 == x + flow[int(y), int(x), 0] and y1 == y + flow[int(y), int(x), 1]
    img = flow_to_arrows(f, 8)
    for x1, y1 in dst:
        xi, yi = int(np.floor(x1 + 0.5)), int(np.floor(y1 + 0.5))
        if 0 <= xi < 64 and 0 <= yi < 48:
            assert img[yi, xi].any()


def test_arrow_underlay_and_invalid_cells(rng):
    under = rng.integers(0, 256, (16, 16, 3), dtype=np.uint8)
    valid = np.zeros((16, 16), bool)
    f = MotionField(np.ones((16, 16, 2)), valid)
    assert np.array_equal(flow_to_arrows(f, 4, underlay=under), under)
    assert len(arrow_segments(f, 4)[0]) == 0
