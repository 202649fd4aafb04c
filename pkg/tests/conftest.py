import numpy as np
import pytest

from splatfx import sh as shlib
from splatfx.camera import look_at
from splatfx.scene import Gaussian, GaussianScene, quat_normalize


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_unit_quats(rng, n):
    return quat_normalize(rng.normal(size=(n, 4)))


def random_scene(rng, n=20, spread=2.0, degree=3) -> GaussianScene:
    """Small valid scene with full random SH up to `degree`."""
    sh = rng.normal(0.0, 0.3, size=(n, shlib.NUM_COEFFS, 3))
    sh[:, shlib.ROWS_FOR_DEGREE[degree]:, :] = 0.0
    return GaussianScene(
        centers=rng.uniform(-spread, spread, size=(n, 3)),
        rotations=random_unit_quats(rng, n),
        scales=rng.uniform(0.05, 0.4, size=(n, 3)),
        opacities=rng.uniform(0.2, 0.95, size=n),
        sh=sh,
        sh_degree=degree,
    )


def random_dirs(rng, n):
    d = rng.normal(size=(n, 3))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def flat_splat(center, depth_axis_scale=0.01, size=3.0, opacity=0.9, rgb=(0.6, 0.4, 0.2)):
    """Large flat splat facing +z, constant color."""
    sh = np.zeros((shlib.NUM_COEFFS, 3))
    sh[0] = (np.asarray(rgb) - shlib.DC_OFFSET) / shlib.SH_C0
    return Gaussian(center=center, rotation=(1, 0, 0, 0),
                    scale=(size, size, depth_axis_scale), opacity=opacity, sh=sh)


@pytest.fixture
def front_camera():
    """Identity-rotation camera at the origin looking along +z."""
    return look_at((0, 0, 0), (0, 0, 1), width=64, height=64, focal=(100, 100), far=50)
