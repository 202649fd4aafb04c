"""Snow accumulation as added splats, with soft sphere-like shading.

Placement casts parallel rays downward on a lattice over the scene
bounds. Each ray's splat intersections are clustered into weighted
Gumbel fits; the heaviest cluster's mode is the surface depth, which
rejects floaters that bias plain alpha-blended depth. Accepted points
receive a flattened snow splat. At render time snow splats ignore
their SH colors: a per-pixel normal is sampled by treating the splat
footprint as a sphere (Mahalanobis radius -> unit sphere), then lit
with wrap lighting to fake subsurface scattering.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .. import sh as shlib
from ..camera import Camera
from ..raster import ALPHA_MAX, MIN_ALPHA, ProjectedSplat, ProjectedSplats, SplatShader
from ..scene import GaussianScene, quat_from_matrix, quat_to_matrix

BETA_INIT = 0.2
BETA_MIN = 1e-3
PDF_THRESHOLD = 0.5
MIN_CLUSTER_WEIGHT = 0.5
SNOW_OPACITY = 0.95
FOOTPRINT_FACTOR = 0.75


@dataclass
class SnowParams:
    thickness: float = 0.1
    grid_spacing: float = 0.25
    up: np.ndarray = (0.0, 1.0, 0.0)
    min_up_dot: float = 0.65
    albedo: np.ndarray = (0.9, 0.9, 0.95)
    wrap: float = 0.5
    light_dir: np.ndarray = (0.0, 1.0, 0.0)   # toward the light

    def __post_init__(self):
        self.thickness = float(self.thickness)
        self.grid_spacing = float(self.grid_spacing)
        if self.thickness < 0:
            raise ValueError(f"snow thickness must be >= 0, got {self.thickness}")
        if self.grid_spacing <= 0:
            raise ValueError(f"grid spacing must be positive, got {self.grid_spacing}")
        if not 0.0 <= self.wrap <= 1.0:
            raise ValueError(f"wrap must lie in [0, 1], got {self.wrap}")
        if not 0.0 <= self.min_up_dot <= 1.0:
            raise ValueError(f"min_up_dot must lie in [0, 1], got {self.min_up_dot}")
        self.up = np.asarray(self.up, dtype=np.float64).reshape(3)
        self.up = self.up / np.linalg.norm(self.up)
        self.albedo = np.asarray(self.albedo, dtype=np.float64).reshape(3)
        self.light_dir = np.asarray(self.light_dir, dtype=np.float64).reshape(3)
        self.light_dir = self.light_dir / np.linalg.norm(self.light_dir)


@dataclass
class GumbelCluster:
    """Running weighted Gumbel fit over one contiguous depth group."""

    mu: float
    beta: float = BETA_INIT
    weight: float = 0.0
    # accumulators for the weighted mean / variance update
    _m2: float = 0.0
    members: list = field(default_factory=list)

    def pdf(self, x: float) -> float:
        z = (x - self.mu) / self.beta
        if z > 500.0 or z < -500.0:
            return 0.0
        return math.exp(-z - math.exp(-z)) / self.beta

    def add(self, x: float, w: float, index: int):
        if w <= 0:
            w = 1e-12
        had = self.weight > 0
        self.weight += w
        delta = x - self.mu
        self.mu += (w / self.weight) * delta
        self._m2 += w * delta * (x - self.mu)
        self.members.append(index)
        if had:
            # Gumbel variance is pi^2 beta^2 / 6
            std = math.sqrt(max(self._m2 / self.weight, 0.0))
            self.beta = max(BETA_MIN, math.sqrt(6.0) / math.pi * std)


def _as_sample_arrays(samples):
    if (isinstance(samples, tuple) and len(samples) == 2
            and isinstance(samples[0], np.ndarray) and isinstance(samples[1], np.ndarray)):
        depths, alphas = samples
    else:
        arr = np.asarray(list(samples), dtype=np.float64).reshape(-1, 2)
        depths, alphas = arr[:, 0], arr[:, 1]
    return np.asarray(depths, dtype=np.float64), np.asarray(alphas, dtype=np.float64)


def gumbel_depth_detailed(samples):
    """Cluster ordered (depth, alpha) samples; returns (d, W, winner, clusters)."""
    depths, alphas = _as_sample_arrays(samples)
    if depths.size == 0:
        return 0.0, 0.0, None, []
    if np.any(np.diff(depths) < 0):
        raise ValueError("samples must be ordered by ascending depth")

    clusters = []
    current = None
    best = (0.0, 0.0, None)
    transmittance = 1.0
    for i, (x, a) in enumerate(zip(depths, alphas)):
        w = a * transmittance
        if current is None:
            current = GumbelCluster(mu=float(x))
            current.add(float(x), w, i)
        elif current.pdf(float(x)) >= PDF_THRESHOLD:
            current.add(float(x), w, i)
        else:
            clusters.append(current)
            if best[1] <= current.weight:
                best = (current.mu, current.weight, current)
            current = GumbelCluster(mu=float(x))
            current.add(float(x), w, i)
        transmittance *= (1.0 - a)
    # the loop never closes the last cluster; finalize it here
    clusters.append(current)
    if best[1] <= current.weight:
        best = (current.mu, current.weight, current)
    return best[0], best[1], best[2], clusters


def gumbel_depth(samples):
    """Depth and weight of the heaviest Gumbel cluster; (0, 0) when empty."""
    d, w, _, _ = gumbel_depth_detailed(samples)
    return d, w


def alpha_blend_depth(samples) -> float:
    """Plain expected depth sum(T_i a_i d_i), for comparison against clustering."""
    depths, alphas = _as_sample_arrays(samples)
    t = np.cumprod(np.concatenate([[1.0], 1.0 - alphas[:-1]]))
    return float(np.sum(t * alphas * depths))


def wrap_diffuse(n: np.ndarray, light: np.ndarray, wrap: float):
    """Soft diffuse term max(0, (n.l + wrap) / (1 + wrap))."""
    ndotl = np.sum(np.asarray(n, dtype=np.float64) * np.asarray(light, dtype=np.float64),
                   axis=-1)
    return np.maximum(0.0, (ndotl + wrap) / (1.0 + wrap))


def sample_normals_batch(means2d: np.ndarray, view_centers: np.ndarray,
                         quad: np.ndarray, pix: np.ndarray, camera: Camera) -> np.ndarray:
    """Spherical normals for splat/pixel pairs, in world space.

    means2d (K, 2), view_centers (K, 3), quad (K, P) Mahalanobis^2 of
    each pixel against each splat's 2D covariance, pix (K-broadcastable
    (P, 2)). Returns (K, P, 3) unit vectors.
    """
    k, p = quad.shape
    d_param = np.sqrt(np.clip(quad, 0.0, 1.0))                  # (K, P)

    vc = view_centers
    vc_norm = np.linalg.norm(vc, axis=1, keepdims=True)
    n2 = -vc / np.maximum(vc_norm, 1e-12)                       # (K, 3) center -> camera

    z = vc[:, 2][:, None]                                       # (K, 1)
    qx = (pix[None, :, 0] - camera.principal_point[0]) / camera.focal[0] * z
    qy = (pix[None, :, 1] - camera.principal_point[1]) / camera.focal[1] * z
    d_vec = np.stack([qx - vc[:, 0][:, None],
                      qy - vc[:, 1][:, None],
                      np.zeros((k, p))], axis=-1)               # (K, P, 3)

    # project out the n2 component along n1 = (0, 0, -1): d' = d - s n1
    n1_dot_n2 = -n2[:, 2]                                       # (K,)
    safe = np.abs(n1_dot_n2) > 1e-9
    s = np.einsum("kpc,kc->kp", d_vec, n2) / np.where(safe, n1_dot_n2, 1.0)[:, None]
    d_proj = d_vec.copy()
    d_proj[..., 2] += s

    norm = np.linalg.norm(d_proj, axis=-1, keepdims=True)
    d_hat = d_proj / np.maximum(norm, 1e-12)

    # d_hat is unit and perpendicular to n2, so the sum is unit by construction
    delta = np.sqrt(np.maximum(1.0 - d_param ** 2, 0.0))
    n_view = d_param[..., None] * d_hat + delta[..., None] * n2[:, None, :]
    n_view = np.where(norm > 1e-9, n_view, np.broadcast_to(n2[:, None, :], n_view.shape))
    n_view = np.where(safe[:, None, None], n_view,
                      np.broadcast_to(n2[:, None, :], n_view.shape))
    return n_view @ camera.rotation  # R^T applied row-wise -> world space


def sample_normal(splat: ProjectedSplat, pixel, camera: Camera) -> np.ndarray:
    """World-space sphere normal for one splat at one pixel."""
    pixel = np.asarray(pixel, dtype=np.float64).reshape(1, 2)
    cov = np.asarray(splat.cov2d, dtype=np.float64)
    det = cov[0, 0] * cov[1, 1] - cov[0, 1] ** 2
    vc = np.asarray(splat.view_center, dtype=np.float64).reshape(1, 3)
    if det <= 1e-12:
        n2 = -vc[0] / np.linalg.norm(vc[0])
        return n2 @ camera.rotation
    delta = pixel[0] - splat.mean2d
    quad = (cov[1, 1] * delta[0] ** 2 - 2 * cov[0, 1] * delta[0] * delta[1]
            + cov[0, 0] * delta[1] ** 2) / det
    out = sample_normals_batch(splat.mean2d.reshape(1, 2), vc,
                               np.array([[quad]]), pixel, camera)
    return out[0, 0]


class SnowShader(SplatShader):
    """Wrap-lit albedo for snow splats; replaces their SH color per pixel."""

    def __init__(self, params: SnowParams, camera: Camera, source_mask: np.ndarray):
        self.params = params
        self.camera = camera
        self.source_mask = source_mask
        self.elapsed = 0.0

    def shade(self, projected: ProjectedSplats, rows: np.ndarray,
              pix: np.ndarray, quad: np.ndarray) -> np.ndarray:
        start = time.perf_counter()
        normals = sample_normals_batch(
            projected.means2d[rows], projected.view_centers[rows], quad, pix, self.camera)
        lit = wrap_diffuse(normals, self.params.light_dir, self.params.wrap)
        out = lit[..., None] * self.params.albedo[None, None, :]
        self.elapsed += time.perf_counter() - start
        return out

    def inline_params(self, camera: Camera):
        """View-space light and shading constants for the compositing kernel."""
        return camera.rotation @ self.params.light_dir, self.params.albedo, self.params.wrap


def _lattice(lo: float, hi: float, spacing: float) -> np.ndarray:
    count = int(math.floor((hi - lo) / spacing + 1e-9)) + 1
    return lo + spacing * np.arange(count)


def place_snow(scene: GaussianScene, params: SnowParams) -> GaussianScene:
    """Snow splats over the scene's upward-facing surfaces (row-major lattice)."""
    if params.thickness == 0.0 or len(scene) == 0:
        return GaussianScene.empty()

    up = params.up
    a = np.array([1.0, 0.0, 0.0])
    if abs(np.dot(a, up)) > 0.9:
        a = np.array([0.0, 0.0, 1.0])
    t1 = np.cross(up, a)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(up, t1)

    centers_u = scene.centers @ t1
    centers_v = scene.centers @ t2
    heights = scene.centers @ up
    origin_h = float(heights.max()) + 3.0 * float(scene.scales.max()) + 1.0
    depths_along_ray = origin_h - heights

    # 2D covariance of each splat in the (t1, t2) plane
    rot = quat_to_matrix(scene.rotations)
    rs = rot * scene.scales[:, None, :]
    basis = np.stack([t1, t2], axis=0)                      # (2, 3)
    m = np.einsum("ab,nbc->nac", basis, rs)                 # (N, 2, 3)
    cov2 = m @ np.swapaxes(m, 1, 2)                         # (N, 2, 2)
    det = cov2[:, 0, 0] * cov2[:, 1, 1] - cov2[:, 0, 1] ** 2
    det = np.maximum(det, 1e-18)
    conic = np.stack([cov2[:, 1, 1] / det, -cov2[:, 0, 1] / det, cov2[:, 0, 0] / det], axis=1)

    lam = 0.5 * (cov2[:, 0, 0] + cov2[:, 1, 1]) + np.sqrt(np.maximum(
        0.25 * (cov2[:, 0, 0] - cov2[:, 1, 1]) ** 2 + cov2[:, 0, 1] ** 2, 0.0))
    radius = 3.0 * np.sqrt(lam)

    # minor principal axis in world space, oriented upward: local surface normal
    minor = np.take_along_axis(
        rot, np.argmin(scene.scales, axis=1)[:, None, None].repeat(3, axis=1), axis=2)[:, :, 0]
    flip = np.sign(minor @ up)
    flip[flip == 0] = 1.0
    minor = minor * flip[:, None]

    bounds = scene.bounds
    corners = np.array([[bounds[i, 0], bounds[j, 1], bounds[k, 2]]
                        for i in (0, 1) for j in (0, 1) for k in (0, 1)])
    us = _lattice(float((corners @ t1).min()), float((corners @ t1).max()), params.grid_spacing)
    vs = _lattice(float((corners @ t2).min()), float((corners @ t2).max()), params.grid_spacing)

    # bin splats by the lattice cells their footprint overlaps (in depth order)
    order = np.argsort(depths_along_ray, kind="stable")
    iu0 = np.clip(np.searchsorted(us, centers_u[order] - radius[order]), 0, len(us) - 1)
    iu1 = np.clip(np.searchsorted(us, centers_u[order] + radius[order]), 0, len(us) - 1)
    iv0 = np.clip(np.searchsorted(vs, centers_v[order] - radius[order]), 0, len(vs) - 1)
    iv1 = np.clip(np.searchsorted(vs, centers_v[order] + radius[order]), 0, len(vs) - 1)
    nu = iu1 - iu0 + 1
    nv = iv1 - iv0 + 1
    counts = nu * nv
    total = int(counts.sum())
    gauss_of_pair = np.repeat(order, counts)
    starts = np.repeat(np.cumsum(counts) - counts, counts)
    within = np.arange(total) - starts
    wxs = np.repeat(nu, counts)
    du = within % wxs
    dv = within // wxs
    cell_of_pair = (np.repeat(iu0, counts) + du) * len(vs) + (np.repeat(iv0, counts) + dv)
    pair_order = np.argsort(cell_of_pair, kind="stable")
    cell_sorted = cell_of_pair[pair_order]
    gauss_sorted = gauss_of_pair[pair_order]
    cell_bounds = np.searchsorted(cell_sorted, np.arange(len(us) * len(vs) + 1))

    snow = []
    snow_rot = quat_from_matrix(np.stack([t2, up, t1], axis=1))
    half = params.thickness / 2.0
    foot = FOOTPRINT_FACTOR * params.grid_spacing
    dc = (params.albedo - shlib.DC_OFFSET) / shlib.SH_C0

    for iu, u in enumerate(us):
        for iv, v in enumerate(vs):
            cell = iu * len(vs) + iv
            cand = gauss_sorted[cell_bounds[cell]:cell_bounds[cell + 1]]
            if cand.size == 0:
                continue
            d0 = u - centers_u[cand]
            d1 = v - centers_v[cand]
            cn = conic[cand]
            quad = cn[:, 0] * d0 * d0 + 2 * cn[:, 1] * d0 * d1 + cn[:, 2] * d1 * d1
            alpha = np.minimum(scene.opacities[cand] * np.exp(-0.5 * quad), ALPHA_MAX)
            good = alpha >= MIN_ALPHA
            if not np.any(good):
                continue
            cand = cand[good]
            alpha = alpha[good]
            depth = depths_along_ray[cand]

            d, w, winner, _ = gumbel_depth_detailed((depth, alpha))
            if winner is None or w < MIN_CLUSTER_WEIGHT:
                continue

            member = np.asarray(winner.members, dtype=int)
            t_run = np.cumprod(np.concatenate([[1.0], 1.0 - alpha[:-1]]))
            weights = (alpha * t_run)[member]
            n_est = (minor[cand[member]] * weights[:, None]).sum(axis=0)
            norm = np.linalg.norm(n_est)
            if norm < 1e-9:
                continue
            if float(n_est @ up) / norm < params.min_up_dot:
                continue

            surface = u * t1 + v * t2 + (origin_h - d) * up
            sh = np.zeros((shlib.NUM_COEFFS, 3))
            sh[0] = dc
            snow.append((surface + half * up, sh))

    if not snow:
        return GaussianScene.empty()
    centers = np.stack([s[0] for s in snow])
    n = len(snow)
    return GaussianScene(
        centers=centers,
        rotations=np.tile(snow_rot, (n, 1)),
        scales=np.tile([foot, max(half, 1e-6), foot], (n, 1)),
        opacities=np.full(n, SNOW_OPACITY),
        sh=np.stack([s[1] for s in snow]),
        sh_degree=0,
    )


@dataclass
class SnowResult:
    """Scene extended with snow plus the hook that shades it at render time."""

    scene: GaussianScene
    snow_mask: np.ndarray
    placed: GaussianScene
    params: SnowParams

    def make_shader(self, camera: Camera) -> SnowShader:
        if not np.any(self.snow_mask):
            return None
        return SnowShader(self.params, camera, self.snow_mask)


def apply_snow(scene: GaussianScene, params: SnowParams) -> SnowResult:
    """Extend the scene with placed snow; shading happens via the returned hook."""
    placed = place_snow(scene, params)
    if len(placed) == 0:
        return SnowResult(scene=scene, snow_mask=np.zeros(len(scene), dtype=bool),
                          placed=placed, params=params)
    extended = scene.extended(placed)
    mask = np.zeros(len(extended), dtype=bool)
    mask[len(scene):] = True
    return SnowResult(scene=extended, snow_mask=mask, placed=placed, params=params)
