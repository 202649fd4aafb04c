"""Deterministic test scenes built from analytic primitives.

Planes, spheres and boxes are tiled with flattened Gaussians; the
primitives themselves are kept alongside the scene so tests can query
exact ray-surface depths independently of the splatting path. Floaters
are small low-opacity blobs excluded from the ground truth.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import sh as shlib
from .camera import Camera
from .scene import Gaussian, GaussianScene, quat_from_matrix


def _orthonormal_tangents(normal: np.ndarray):
    n = normal / np.linalg.norm(normal)
    a = np.array([1.0, 0.0, 0.0])
    if abs(np.dot(a, n)) > 0.9:
        a = np.array([0.0, 1.0, 0.0])
    t1 = np.cross(n, a)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(n, t1)
    return t1, t2, n


def _dc_from_rgb(rgb: np.ndarray) -> np.ndarray:
    """DC coefficients that evaluate to the given base color."""
    return (np.asarray(rgb, dtype=np.float64) - shlib.DC_OFFSET) / shlib.SH_C0


@dataclass
class PlaneSpec:
    center: tuple
    normal: tuple = (0.0, 1.0, 0.0)
    size: tuple = (10.0, 10.0)        # extent along the two tangents
    spacing: float = 0.25
    thickness: float = 0.01
    opacity: float = 0.95
    color: tuple = None               # None -> random per-splat colors
    footprint: float = 0.85           # splat sigma as a fraction of spacing
    ground_truth: bool = True


@dataclass
class SphereSpec:
    center: tuple = (0.0, 0.0, 0.0)
    radius: float = 1.0
    count: int = 400
    thickness: float = 0.01
    opacity: float = 0.95
    color: tuple = None
    ground_truth: bool = True


@dataclass
class BoxSpec:
    center: tuple = (0.0, 0.0, 0.0)
    half_sizes: tuple = (1.0, 1.0, 1.0)
    spacing: float = 0.25
    thickness: float = 0.01
    opacity: float = 0.95
    color: tuple = None
    footprint: float = 0.85
    ground_truth: bool = True


@dataclass
class FloaterSpec:
    """Sparse isotropic blobs; never part of the true surface."""
    count: int = 10
    region: tuple = ((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0))
    scale: float = 0.05
    opacity: float = 0.05
    color: tuple = (0.5, 0.5, 0.5)
    positions: tuple = None           # overrides count/region when given
    ground_truth: bool = False


@dataclass
class SyntheticTruth:
    """Analytic surfaces backing a generated scene."""
    planes: list = field(default_factory=list)    # (center, t1, t2, n, half_u, half_v)
    spheres: list = field(default_factory=list)   # (center, radius)
    boxes: list = field(default_factory=list)     # (center, half_sizes)

    def ray_depths(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        """Smallest positive ray parameter per direction (inf where no hit).

        Parameters are in units of the given directions, which need not
        be normalized.
        """
        origin = np.asarray(origin, dtype=np.float64)
        dirs = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
        best = np.full(dirs.shape[0], math.inf)

        for center, t1, t2, n, hu, hv in self.planes:
            denom = dirs @ n
            with np.errstate(divide="ignore", invalid="ignore"):
                t = np.dot(n, center - origin) / denom
            p = origin[None, :] + t[:, None] * dirs - center
            ok = (np.isfinite(t) & (t > 0)
                  & (np.abs(p @ t1) <= hu + 1e-9) & (np.abs(p @ t2) <= hv + 1e-9))
            np.minimum(best, np.where(ok, t, math.inf), out=best)

        for center, radius in self.spheres:
            oc = origin - center
            a = np.sum(dirs * dirs, axis=1)
            b = dirs @ oc
            disc = b * b - a * (np.dot(oc, oc) - radius * radius)
            sq = np.sqrt(np.maximum(disc, 0.0))
            for root in ((-b - sq) / a, (-b + sq) / a):
                ok = (disc >= 0) & (root > 0)
                np.minimum(best, np.where(ok, root, math.inf), out=best)

        for center, half in self.boxes:
            lo = np.asarray(center) - half
            hi = np.asarray(center) + half
            with np.errstate(divide="ignore", invalid="ignore"):
                ta = (lo[None, :] - origin[None, :]) / dirs
                tb = (hi[None, :] - origin[None, :]) / dirs
            tmin = np.max(np.minimum(ta, tb), axis=1)
            tmax = np.min(np.maximum(ta, tb), axis=1)
            t = np.where(tmin > 0, tmin, tmax)
            ok = (tmax >= tmin) & (t > 0)
            np.minimum(best, np.where(ok, t, math.inf), out=best)
        return best

    def ray_depth(self, origin: np.ndarray, direction: np.ndarray) -> float:
        d = np.asarray(direction, dtype=np.float64)
        d = d / np.linalg.norm(d)
        return float(self.ray_depths(origin, d[None, :])[0])

    def depth_map(self, camera: Camera) -> np.ndarray:
        """Per-pixel view depth of the true surface (inf where none)."""
        dirs_view = camera.pixel_dirs_view().reshape(-1, 3)   # z component = 1
        dirs_world = dirs_view @ camera.rotation              # R^T row-wise
        t = self.ray_depths(camera.position, dirs_world)      # view z equals t
        return t.reshape(camera.height, camera.width)

    def surface_height(self, point_uv: np.ndarray, up: np.ndarray, origin_h: float = 1e3) -> float:
        """Height along `up` of the topmost surface over a lateral position."""
        up = np.asarray(up, dtype=np.float64)
        t1, t2, n = _orthonormal_tangents(up)
        origin = point_uv[0] * t1 + point_uv[1] * t2 + origin_h * n
        t = self.ray_depth(origin, -n)
        return origin_h - t if math.isfinite(t) else -math.inf


def _tile_plane(rng, spec: PlaneSpec, gaussians, truth: SyntheticTruth):
    center = np.asarray(spec.center, dtype=np.float64)
    t1, t2, n = _orthonormal_tangents(np.asarray(spec.normal, dtype=np.float64))
    hu, hv = spec.size[0] / 2, spec.size[1] / 2
    rot = quat_from_matrix(np.stack([t1, t2, n], axis=1))
    nu = max(1, int(round(spec.size[0] / spec.spacing)) + 1)
    nv = max(1, int(round(spec.size[1] / spec.spacing)) + 1)
    us = np.linspace(-hu, hu, nu)
    vs = np.linspace(-hv, hv, nv)
    footprint = spec.spacing * spec.footprint
    for u in us:
        for v in vs:
            rgb = np.asarray(spec.color) if spec.color is not None else rng.uniform(0.1, 0.9, 3)
            sh = np.zeros((shlib.NUM_COEFFS, 3))
            sh[0] = _dc_from_rgb(rgb)
            gaussians.append(Gaussian(
                center=center + u * t1 + v * t2,
                rotation=rot,
                scale=(footprint, footprint, spec.thickness),
                opacity=spec.opacity,
                sh=sh,
            ))
    if spec.ground_truth:
        truth.planes.append((center, t1, t2, n, hu, hv))


def _tile_sphere(rng, spec: SphereSpec, gaussians, truth: SyntheticTruth):
    center = np.asarray(spec.center, dtype=np.float64)
    count = spec.count
    golden = math.pi * (3.0 - math.sqrt(5.0))
    # mean spacing on the sphere drives the tangential footprint
    footprint = 0.9 * math.sqrt(4 * math.pi * spec.radius ** 2 / count)
    for i in range(count):
        y = 1.0 - 2.0 * (i + 0.5) / count
        r = math.sqrt(max(0.0, 1.0 - y * y))
        az = golden * i
        n = np.array([r * math.cos(az), y, r * math.sin(az)])
        t1, t2, nn = _orthonormal_tangents(n)
        rgb = np.asarray(spec.color) if spec.color is not None else rng.uniform(0.1, 0.9, 3)
        sh = np.zeros((shlib.NUM_COEFFS, 3))
        sh[0] = _dc_from_rgb(rgb)
        gaussians.append(Gaussian(
            center=center + spec.radius * n,
            rotation=quat_from_matrix(np.stack([t1, t2, nn], axis=1)),
            scale=(footprint, footprint, spec.thickness),
            opacity=spec.opacity,
            sh=sh,
        ))
    if spec.ground_truth:
        truth.spheres.append((center, spec.radius))


def _tile_box(rng, spec: BoxSpec, gaussians, truth: SyntheticTruth):
    center = np.asarray(spec.center, dtype=np.float64)
    half = np.asarray(spec.half_sizes, dtype=np.float64)
    for axis in range(3):
        for sign in (-1.0, 1.0):
            normal = np.zeros(3)
            normal[axis] = sign
            u_axis, v_axis = (axis + 1) % 3, (axis + 2) % 3
            size = (2 * half[u_axis], 2 * half[v_axis])
            face = PlaneSpec(
                center=tuple(center + normal * half[axis]),
                normal=tuple(normal),
                size=size,
                spacing=spec.spacing,
                thickness=spec.thickness,
                opacity=spec.opacity,
                color=spec.color,
                footprint=spec.footprint,
                ground_truth=False,
            )
            _tile_plane(rng, face, gaussians, truth)
    if spec.ground_truth:
        truth.boxes.append((center, half))


def generate_synthetic_scene(specs: list, seed: int = 0):
    """Build (scene, truth) from primitive specs; deterministic per seed."""
    if not specs:
        raise ValueError("primitive spec list must be non-empty")
    rng = np.random.default_rng(seed)
    gaussians = []
    truth = SyntheticTruth()
    for spec in specs:
        if isinstance(spec, PlaneSpec):
            _tile_plane(rng, spec, gaussians, truth)
        elif isinstance(spec, SphereSpec):
            _tile_sphere(rng, spec, gaussians, truth)
        elif isinstance(spec, BoxSpec):
            _tile_box(rng, spec, gaussians, truth)
        elif isinstance(spec, FloaterSpec):
            if spec.positions is not None:
                pts = np.atleast_2d(np.asarray(spec.positions, dtype=np.float64))
            else:
                lo, hi = np.asarray(spec.region[0]), np.asarray(spec.region[1])
                pts = rng.uniform(lo, hi, size=(spec.count, 3))
            for p in pts:
                sh = np.zeros((shlib.NUM_COEFFS, 3))
                sh[0] = _dc_from_rgb(np.asarray(spec.color, dtype=np.float64))
                gaussians.append(Gaussian(
                    center=p,
                    rotation=(1.0, 0.0, 0.0, 0.0),
                    scale=(spec.scale,) * 3,
                    opacity=spec.opacity,
                    sh=sh,
                ))
        else:
            raise ValueError(f"unknown primitive spec: {type(spec).__name__}")
    scene = GaussianScene.from_gaussians(gaussians, sh_degree=0)
    return scene, truth
