"""Gaussian primitive scene model.

A scene is a flat structure-of-arrays over N primitives: centers,
unit quaternions (wxyz), positive scales, opacities in [0, 1] and
16x3 spherical-harmonics color coefficients. Opacity and scale are
stored in activated form; raw (logit / log) values exist only at the
file boundary. Scenes are treated as immutable after construction:
every transformation returns a new scene value.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import sh as shlib

SCALE_FLOOR = 1e-8


class SceneError(ValueError):
    """Raised for invalid scene data or unreadable scene files."""


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Unit quaternion(s) (..., 4) wxyz -> rotation matrix (..., 3, 3)."""
    q = np.asarray(q, dtype=np.float64)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    m = np.empty(q.shape[:-1] + (3, 3), dtype=np.float64)
    m[..., 0, 0] = 1 - 2 * (y * y + z * z)
    m[..., 0, 1] = 2 * (x * y - w * z)
    m[..., 0, 2] = 2 * (x * z + w * y)
    m[..., 1, 0] = 2 * (x * y + w * z)
    m[..., 1, 1] = 1 - 2 * (x * x + z * z)
    m[..., 1, 2] = 2 * (y * z - w * x)
    m[..., 2, 0] = 2 * (x * z - w * y)
    m[..., 2, 1] = 2 * (y * z + w * x)
    m[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def quat_from_matrix(m: np.ndarray) -> np.ndarray:
    """Rotation matrix (3, 3) -> unit quaternion wxyz, w >= 0."""
    m = np.asarray(m, dtype=np.float64)
    t = np.trace(m)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2
        q = np.array([0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s])
    else:
        i = int(np.argmax(np.diag(m)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(m[i, i] - m[j, j] - m[k, k] + 1.0) * 2
        q = np.empty(4)
        q[0] = (m[k, j] - m[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (m[j, i] + m[i, j]) / s
        q[1 + k] = (m[k, i] + m[i, k]) / s
    if q[0] < 0:
        q = -q
    return quat_normalize(q)


@dataclass
class Gaussian:
    """One splat primitive: center, unit quaternion, scale, opacity, SH rows."""

    center: np.ndarray
    rotation: np.ndarray
    scale: np.ndarray
    opacity: float
    sh: np.ndarray

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(4)
        self.scale = np.asarray(self.scale, dtype=np.float64).reshape(3)
        self.opacity = float(self.opacity)
        self.sh = np.asarray(self.sh, dtype=np.float64).reshape(shlib.NUM_COEFFS, 3)

    def validate(self):
        if abs(np.linalg.norm(self.rotation) - 1.0) > 1e-6:
            raise SceneError(f"rotation quaternion not unit: |q| = {np.linalg.norm(self.rotation)}")
        if np.any(self.scale <= 0):
            raise SceneError(f"scale components must be strictly positive, got {self.scale}")
        if not 0.0 <= self.opacity <= 1.0:
            raise SceneError(f"opacity must lie in [0, 1], got {self.opacity}")

    def color(self, direction: np.ndarray, degree: int = shlib.MAX_DEGREE) -> np.ndarray:
        return shlib.eval_sh(self.sh, direction, degree)


def covariance(g: Gaussian) -> np.ndarray:
    """World covariance R S S^T R^T of one primitive (symmetric PD)."""
    r = quat_to_matrix(quat_normalize(g.rotation))
    rs = r * g.scale[np.newaxis, :]
    return rs @ rs.T


@dataclass
class GaussianScene:
    """Ordered set of primitives held as arrays for vectorized rendering."""

    centers: np.ndarray        # (N, 3)
    rotations: np.ndarray      # (N, 4) wxyz, unit
    scales: np.ndarray         # (N, 3) positive
    opacities: np.ndarray      # (N,) in [0, 1]
    sh: np.ndarray             # (N, 16, 3)
    sh_degree: int = shlib.MAX_DEGREE
    _bounds: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=np.float64))
        self.rotations = np.atleast_2d(np.asarray(self.rotations, dtype=np.float64))
        self.scales = np.atleast_2d(np.asarray(self.scales, dtype=np.float64))
        self.opacities = np.asarray(self.opacities, dtype=np.float64).reshape(-1)
        self.sh = np.asarray(self.sh, dtype=np.float64).reshape(-1, shlib.NUM_COEFFS, 3)

    def __len__(self) -> int:
        return self.centers.shape[0]

    @classmethod
    def empty(cls) -> "GaussianScene":
        return cls(
            centers=np.zeros((0, 3)),
            rotations=np.zeros((0, 4)),
            scales=np.zeros((0, 3)),
            opacities=np.zeros(0),
            sh=np.zeros((0, shlib.NUM_COEFFS, 3)),
            sh_degree=0,
        )

    @classmethod
    def from_gaussians(cls, gaussians: list, sh_degree: int = shlib.MAX_DEGREE) -> "GaussianScene":
        if not gaussians:
            return cls.empty()
        return cls(
            centers=np.stack([g.center for g in gaussians]),
            rotations=np.stack([g.rotation for g in gaussians]),
            scales=np.stack([g.scale for g in gaussians]),
            opacities=np.array([g.opacity for g in gaussians]),
            sh=np.stack([g.sh for g in gaussians]),
            sh_degree=sh_degree,
        )

    def gaussian(self, i: int) -> Gaussian:
        return Gaussian(
            center=self.centers[i],
            rotation=self.rotations[i],
            scale=self.scales[i],
            opacity=self.opacities[i],
            sh=self.sh[i],
        )

    @property
    def gaussians(self) -> list:
        return [self.gaussian(i) for i in range(len(self))]

    @property
    def bounds(self) -> np.ndarray:
        """Axis-aligned box over centers: array [[minx,miny,minz],[maxx,maxy,maxz]]."""
        if self._bounds is None:
            if len(self) == 0:
                self._bounds = np.zeros((2, 3))
            else:
                self._bounds = np.stack([self.centers.min(axis=0), self.centers.max(axis=0)])
        return self._bounds

    def validate(self):
        n = len(self)
        if self.rotations.shape != (n, 4) or self.scales.shape != (n, 3):
            raise SceneError("scene arrays have inconsistent lengths")
        if n == 0:
            return
        norms = np.linalg.norm(self.rotations, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise SceneError("scene contains non-unit rotation quaternions")
        if np.any(self.scales <= 0):
            raise SceneError("scene contains non-positive scales")
        if np.any((self.opacities < 0) | (self.opacities > 1)):
            raise SceneError("scene contains opacities outside [0, 1]")
        if not 0 <= self.sh_degree <= shlib.MAX_DEGREE:
            raise SceneError(f"sh_degree must be in 0..3, got {self.sh_degree}")
        active = shlib.ROWS_FOR_DEGREE[self.sh_degree]
        if np.any(self.sh[:, active:, :] != 0.0):
            raise SceneError("nonzero SH rows above the declared sh_degree")

    def covariances(self) -> np.ndarray:
        """World covariances for all primitives, (N, 3, 3)."""
        r = quat_to_matrix(self.rotations)
        rs = r * self.scales[:, np.newaxis, :]
        return rs @ np.swapaxes(rs, 1, 2)

    def with_sh(self, new_sh: np.ndarray, sh_degree: int = None) -> "GaussianScene":
        """New scene sharing geometry with replaced color coefficients."""
        return GaussianScene(
            centers=self.centers,
            rotations=self.rotations,
            scales=self.scales,
            opacities=self.opacities,
            sh=np.asarray(new_sh, dtype=np.float64),
            sh_degree=self.sh_degree if sh_degree is None else sh_degree,
        )

    def extended(self, other: "GaussianScene") -> "GaussianScene":
        """Concatenation; the receiver's primitives come first."""
        if len(other) == 0:
            return self
        return GaussianScene(
            centers=np.concatenate([self.centers, other.centers]),
            rotations=np.concatenate([self.rotations, other.rotations]),
            scales=np.concatenate([self.scales, other.scales]),
            opacities=np.concatenate([self.opacities, other.opacities]),
            sh=np.concatenate([self.sh, other.sh]),
            sh_degree=max(self.sh_degree, other.sh_degree),
        )


def clamp_degenerate_scales(scales: np.ndarray) -> np.ndarray:
    """Floor near-zero scales so covariances stay invertible."""
    scales = np.asarray(scales, dtype=np.float64)
    if np.any(scales < SCALE_FLOOR):
        n = int(np.sum(np.any(scales < SCALE_FLOOR, axis=-1)))
        warnings.warn(f"clamped degenerate scales on {n} primitives to {SCALE_FLOOR}")
        scales = np.maximum(scales, SCALE_FLOOR)
    return scales
