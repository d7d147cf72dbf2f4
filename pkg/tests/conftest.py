import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mixmotion.geometry import CameraPose, Intrinsics  # noqa: E402


def random_quat(rng, max_angle=np.pi):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    ang = rng.uniform(-max_angle, max_angle)
    return np.r_[axis * np.sin(ang / 2), np.cos(ang / 2)]


def random_pose(rng, max_angle=0.3, max_shift=0.3):
    return CameraPose(rng.uniform(-max_shift, max_shift, 3), random_quat(rng, max_angle))


def random_intrinsics(rng, h, w):
    f = rng.uniform(0.6, 1.6) * max(h, w)
    return Intrinsics(f * rng.uniform(0.9, 1.1), f, rng.uniform(0.3, 0.7) * w, rng.uniform(0.3, 0.7) * h, w, h)


def kvec(k):
    return (k.fx, k.fy, k.cx, k.cy)


def pvec(p):
    return (p.translation, p.rotation)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for name, (ok, detail) in sorted(results.items(), key=lambda kv: int(kv[0].split()[0][1:])):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
