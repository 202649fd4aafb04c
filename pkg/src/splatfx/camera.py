"""Pinhole camera with world-to-view rotation R and translation t.

View space is +z forward: a world point p sits at view depth
(R @ p + t)_z. Pixel (x, y) samples the ray through its center
(x + 0.5, y + 0.5).
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class Camera:
    rotation: np.ndarray         # (3, 3) world-to-view
    translation: np.ndarray      # (3,)
    focal: np.ndarray            # (fx, fy) pixels
    principal_point: np.ndarray  # (cx, cy) pixels
    width: int
    height: int
    near: float = 0.01
    far: float = 100.0

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        self.focal = np.asarray(self.focal, dtype=np.float64).reshape(2)
        self.principal_point = np.asarray(self.principal_point, dtype=np.float64).reshape(2)
        self.width = int(self.width)
        self.height = int(self.height)
        self.near = float(self.near)
        self.far = float(self.far)

    def validate(self):
        err = np.abs(self.rotation @ self.rotation.T - np.eye(3)).max()
        if err > 1e-6:
            raise ValueError(f"camera rotation not orthonormal (max deviation {err:g})")
        if not 0 < self.near < self.far:
            raise ValueError(f"require 0 < near < far, got near={self.near}, far={self.far}")
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image size must be at least 1x1, got {self.width}x{self.height}")

    @property
    def position(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    def to_view(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    def view_to_world(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.translation) @ self.rotation

    def project_view(self, view_points: np.ndarray):
        """View-space points -> (pixel coords (..., 2), view depth (...,))."""
        v = np.asarray(view_points, dtype=np.float64)
        z = v[..., 2]
        px = self.focal[0] * v[..., 0] / z + self.principal_point[0]
        py = self.focal[1] * v[..., 1] / z + self.principal_point[1]
        return np.stack([px, py], axis=-1), z

    def pixel_dirs_view(self) -> np.ndarray:
        """Unnormalized view-space ray directions per pixel, (H, W, 3) with z = 1."""
        xs = (np.arange(self.width) + 0.5 - self.principal_point[0]) / self.focal[0]
        ys = (np.arange(self.height) + 0.5 - self.principal_point[1]) / self.focal[1]
        gx, gy = np.meshgrid(xs, ys)
        return np.stack([gx, gy, np.ones_like(gx)], axis=-1)

    def resized(self, width: int, height: int) -> "Camera":
        """Same field of view at a different raster resolution."""
        sx, sy = width / self.width, height / self.height
        return Camera(
            rotation=self.rotation,
            translation=self.translation,
            focal=self.focal * np.array([sx, sy]),
            principal_point=self.principal_point * np.array([sx, sy]),
            width=width,
            height=height,
            near=self.near,
            far=self.far,
        )

    def to_dict(self) -> dict:
        return {
            "rotation": self.rotation.reshape(-1).tolist(),
            "translation": self.translation.tolist(),
            "focal": self.focal.tolist(),
            "principal_point": self.principal_point.tolist(),
            "width": self.width,
            "height": self.height,
            "near": self.near,
            "far": self.far,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Camera":
        required = {"rotation", "translation", "focal", "principal_point", "width", "height"}
        missing = required - set(d)
        if missing:
            raise ValueError(f"camera spec missing fields: {sorted(missing)}")
        cam = cls(
            rotation=np.asarray(d["rotation"], dtype=np.float64).reshape(3, 3),
            translation=d["translation"],
            focal=d["focal"],
            principal_point=d["principal_point"],
            width=d["width"],
            height=d["height"],
            near=d.get("near", 0.01),
            far=d.get("far", 100.0),
        )
        cam.validate()
        return cam


def look_at(eye, target, up=(0.0, 1.0, 0.0), focal=None, width=640, height=360,
            near=0.01, far=100.0, fov_deg=60.0) -> Camera:
    """Camera at `eye` looking toward `target` (+z forward, y down in view)."""
    eye = np.asarray(eye, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    up = np.asarray(up, dtype=np.float64)

    fwd = target - eye
    fwd = fwd / np.linalg.norm(fwd)
    right = np.cross(fwd, up)
    n = np.linalg.norm(right)
    if n < 1e-9:
        right = np.cross(fwd, np.array([1.0, 0.0, 0.0]))
        n = np.linalg.norm(right)
    right /= n
    down = np.cross(fwd, right)

    rot = np.stack([right, down, fwd])  # rows: view x, y, z in world terms
    trans = -rot @ eye
    if focal is None:
        f = 0.5 * width / math.tan(math.radians(fov_deg) / 2)
        focal = (f, f)
    return Camera(
        rotation=rot,
        translation=trans,
        focal=focal,
        principal_point=(width / 2, height / 2),
        width=width,
        height=height,
        near=near,
        far=far,
    )


def orbit_poses(center, radius: float, elevation_deg: float, count: int,
                up=(0.0, 1.0, 0.0), **camera_kwargs) -> list:
    """Evenly spaced azimuth ring of cameras looking at `center`."""
    center = np.asarray(center, dtype=np.float64)
    up = np.asarray(up, dtype=np.float64)
    up = up / np.linalg.norm(up)
    # Orthonormal frame spanning the orbit plane.
    a = np.array([1.0, 0.0, 0.0])
    if abs(np.dot(a, up)) > 0.9:
        a = np.array([0.0, 0.0, 1.0])
    e1 = a - np.dot(a, up) * up
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(up, e1)

    elev = math.radians(elevation_deg)
    cams = []
    for i in range(count):
        az = 2 * math.pi * i / count
        offset = radius * (
            math.cos(elev) * (math.cos(az) * e1 + math.sin(az) * e2) + math.sin(elev) * up
        )
        cams.append(look_at(center + offset, center, up=up, **camera_kwargs))
    return cams
