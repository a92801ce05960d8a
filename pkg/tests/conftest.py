import numpy as np
import pytest

from emscan import Pose, wrap_angle


def pose_close(a: Pose, b: Pose, atol: float = 1e-9) -> bool:
    return (abs(a.tx - b.tx) <= atol
            and abs(a.ty - b.ty) <= atol
            and abs(wrap_angle(a.theta - b.theta)) <= atol)


def assert_pose_close(a: Pose, b: Pose, atol: float = 1e-9) -> None:
    assert pose_close(a, b, atol), f"{a} != {b} (atol={atol})"


def random_pose(rng, translation: float = 0.5, angle: float = np.pi) -> Pose:
    tx, ty = rng.uniform(-translation, translation, 2)
    return Pose(tx, ty, rng.uniform(-angle, angle))


def random_cloud(rng, n: int, span: float = 4.0) -> np.ndarray:
    return rng.uniform(-span / 2, span / 2, (n, 2))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
