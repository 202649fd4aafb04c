"""Flood pass: trochoidal water surface with reflection and refraction.

The water plane is displaced by a sum of Gerstner waves; normals come
from the exact cross product of the parametric tangents, so they agree
with finite differences of the displaced surface to first order in the
step. Shading splits energy by the Schlick Fresnel factor between a
screen-space-marched reflection and a refracted scene lookup attenuated
by per-channel absorption over the underwater path.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels as kernels
from ..camera import Camera
from ..raster import FrameBuffer

GRAVITY = 9.81
SSR_STEPS = 64
SSR_BIAS = 0.05
SSR_REFINE = 4
# the fixed step budget covers twice the far plane so grazing reflections
# cross the whole screen; bisection refinement restores hit precision
SSR_DISTANCE_FACTOR = 2.0
# one Newton pass against the wave height; surface slopes stay small at
# valid steepness sums so the residual is second order
WAVE_REFINE_ITERS = 1
PATH_CAP = 1e6


@dataclass
class GerstnerWave:
    direction: np.ndarray          # unit 2-vector on the water plane
    wavelength: float
    steepness: float               # Q in [0, 1]
    phase_speed: float = None      # None -> deep-water dispersion sqrt(g/k)
    phase0: float = 0.0

    def __post_init__(self):
        self.direction = np.asarray(self.direction, dtype=np.float64).reshape(2)
        n = np.linalg.norm(self.direction)
        if n == 0:
            raise ValueError("wave direction must be nonzero")
        self.direction = self.direction / n
        if self.wavelength <= 0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")
        if not 0.0 <= self.steepness <= 1.0:
            raise ValueError(f"steepness must lie in [0, 1], got {self.steepness}")

    @property
    def wave_number(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def omega(self) -> float:
        k = self.wave_number
        if self.phase_speed is not None:
            return self.phase_speed * k
        return math.sqrt(GRAVITY * k)


@dataclass
class WaterParams:
    origin: np.ndarray = (0.0, 0.0, 0.0)
    normal: np.ndarray = (0.0, 1.0, 0.0)
    waves: list = field(default_factory=list)
    deep_color: np.ndarray = (0.02, 0.08, 0.15)
    shallow_color: np.ndarray = (0.1, 0.3, 0.35)
    ior: float = 1.33
    absorption: np.ndarray = (0.45, 0.15, 0.1)   # per world unit, rgb

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        self.normal = np.asarray(self.normal, dtype=np.float64).reshape(3)
        n = np.linalg.norm(self.normal)
        if abs(n - 1.0) > 1e-6:
            if n == 0:
                raise ValueError("water normal must be nonzero")
            self.normal = self.normal / n
        self.deep_color = np.asarray(self.deep_color, dtype=np.float64).reshape(3)
        self.shallow_color = np.asarray(self.shallow_color, dtype=np.float64).reshape(3)
        self.absorption = np.asarray(self.absorption, dtype=np.float64).reshape(3)
        if self.ior <= 1.0:
            raise ValueError(f"index of refraction must exceed 1, got {self.ior}")
        total_q = sum(w.steepness for w in self.waves)
        if total_q > 1.0 + 1e-9:
            raise ValueError(f"total wave steepness {total_q:.3f} > 1 would self-intersect")

    def plane_tangents(self):
        n = self.normal
        a = np.array([1.0, 0.0, 0.0])
        if abs(np.dot(a, n)) > 0.9:
            a = np.array([0.0, 0.0, 1.0])
        t1 = np.cross(n, a)
        t1 /= np.linalg.norm(t1)
        t2 = np.cross(n, t1)
        return t1, t2


def gerstner_displace(xz: np.ndarray, t: float, waves: list) -> np.ndarray:
    """Surface offset at plane coordinates xz: (..., 2) -> (..., 3).

    Components are (tangent-u, up, tangent-v); amplitude per wave is
    steepness / wave_number, the trochoid parameterization in which the
    sum of steepnesses bounds loop formation.
    """
    xz = np.asarray(xz, dtype=np.float64)
    out = np.zeros(xz.shape[:-1] + (3,))
    for w in waves:
        k = w.wave_number
        amp = w.steepness / k
        theta = k * (xz[..., 0] * w.direction[0] + xz[..., 1] * w.direction[1]) \
            - w.omega * t + w.phase0
        c = np.cos(theta)
        out[..., 0] += amp * w.direction[0] * c
        out[..., 2] += amp * w.direction[1] * c
        out[..., 1] += amp * np.sin(theta)
    return out


def gerstner_normal(xz: np.ndarray, t: float, waves: list) -> np.ndarray:
    """Exact unit normal of the displaced surface at plane coordinates xz."""
    xz = np.asarray(xz, dtype=np.float64)
    shape = xz.shape[:-1]
    # tangent rows d(surface)/du and d(surface)/dv in (u, up, v) components
    du = np.zeros(shape + (3,))
    dv = np.zeros(shape + (3,))
    du[..., 0] = 1.0
    dv[..., 2] = 1.0
    for w in waves:
        k = w.wave_number
        dx, dz = w.direction
        theta = k * (xz[..., 0] * dx + xz[..., 1] * dz) - w.omega * t + w.phase0
        s = np.sin(theta)
        c = np.cos(theta)
        q = w.steepness
        du[..., 0] += -q * dx * dx * s
        du[..., 1] += q * dx * c
        du[..., 2] += -q * dx * dz * s
        dv[..., 0] += -q * dz * dx * s
        dv[..., 1] += q * dz * c
        dv[..., 2] += -q * dz * dz * s
    n = np.cross(dv, du)
    # cross(dv, du) points along +up for the flat surface
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    return n


def schlick_fresnel(cos_theta, ior: float):
    """Schlick reflectance R0 + (1 - R0)(1 - cos)^5."""
    r0 = ((1.0 - ior) / (1.0 + ior)) ** 2
    cos_theta = np.clip(cos_theta, 0.0, 1.0)
    return r0 + (1.0 - r0) * (1.0 - cos_theta) ** 5


def _refract(incident: np.ndarray, normal: np.ndarray, eta: float) -> np.ndarray:
    """Snell refraction of unit rays; incident points into the surface."""
    cos_i = -np.sum(incident * normal, axis=-1, keepdims=True)
    sin2_t = eta * eta * (1.0 - cos_i * cos_i)
    cos_t = np.sqrt(np.maximum(1.0 - sin2_t, 0.0))
    return eta * incident + (eta * cos_i - cos_t) * normal


def ssr_trace(fb: FrameBuffer, camera: Camera, origin_view: np.ndarray,
              dir_view: np.ndarray, steps: int = SSR_STEPS, bias: float = SSR_BIAS,
              max_distance: float = None):
    """March one reflected ray through the depth buffer.

    Returns (rgb, hit). A hit is declared when the marched view depth
    exceeds the buffer depth by more than `bias`; leaving the screen or
    exhausting the march falls back to the frame's background color.
    """
    colors, hits = ssr_trace_batch(
        fb, camera,
        np.asarray(origin_view, dtype=np.float64).reshape(1, 3),
        np.asarray(dir_view, dtype=np.float64).reshape(1, 3),
        steps=steps, bias=bias, max_distance=max_distance)
    return colors[0], bool(hits[0])


def ssr_trace_batch(fb: FrameBuffer, camera: Camera, origins: np.ndarray,
                    dirs: np.ndarray, steps: int = SSR_STEPS, bias: float = SSR_BIAS,
                    max_distance: float = None, scene_depth: np.ndarray = None,
                    engine: str = "auto"):
    """Screen-space march; origins/dirs in view space, (R, 3)."""
    if max_distance is None:
        max_distance = camera.far
    if scene_depth is None:
        scene_depth = fb.normalized_depth().astype(np.float32)
    h, w = scene_depth.shape

    if engine != "numpy" and kernels.HAVE_NUMBA:
        n_rays = origins.shape[0]
        out_color = np.empty((n_rays, 3))
        out_hit = np.zeros(n_rays, dtype=bool)
        kernels.ssr_march(
            np.ascontiguousarray(origins, dtype=np.float64),
            np.ascontiguousarray(dirs, dtype=np.float64),
            scene_depth, np.ascontiguousarray(fb.color),
            camera.focal[0], camera.focal[1],
            camera.principal_point[0], camera.principal_point[1], camera.near,
            max_distance / steps, steps, bias, SSR_REFINE,
            fb.background, out_color, out_hit)
        return out_color, out_hit

    n_rays = origins.shape[0]
    colors = np.tile(fb.background, (n_rays, 1))
    hit = np.zeros(n_rays, dtype=bool)
    active = np.arange(n_rays)
    pos_lo = np.array(origins, dtype=np.float64)       # last confirmed-free position
    dirs = np.asarray(dirs, dtype=np.float64)

    step_len = max_distance / steps
    for _ in range(steps):
        if active.size == 0:
            break
        q = pos_lo[active] + dirs[active] * step_len
        z = q[:, 2]
        in_front = z > camera.near
        px = camera.focal[0] * q[:, 0] / np.maximum(z, 1e-9) + camera.principal_point[0]
        py = camera.focal[1] * q[:, 1] / np.maximum(z, 1e-9) + camera.principal_point[1]
        on_screen = in_front & (px >= 0) & (px < w) & (py >= 0) & (py < h)

        # rays off screen are done: fallback color stands
        still = active[on_screen]
        q = q[on_screen]
        px = px[on_screen]
        py = py[on_screen]

        buf = scene_depth[py.astype(int), px.astype(int)]
        crossed = q[:, 2] - buf > bias

        hit_rows = still[crossed]
        if hit_rows.size:
            hx, hy, hq = px[crossed], py[crossed], q[crossed]
            lo = pos_lo[hit_rows]
            hi = hq
            for _ in range(SSR_REFINE):
                mid = 0.5 * (lo + hi)
                mz = mid[:, 2]
                mx = camera.focal[0] * mid[:, 0] / np.maximum(mz, 1e-9) + camera.principal_point[0]
                my = camera.focal[1] * mid[:, 1] / np.maximum(mz, 1e-9) + camera.principal_point[1]
                mx = np.clip(mx, 0, w - 1)
                my = np.clip(my, 0, h - 1)
                mbuf = scene_depth[my.astype(int), mx.astype(int)]
                over = mz - mbuf > bias
                hi = np.where(over[:, None], mid, hi)
                lo = np.where(over[:, None], lo, mid)
                hx = np.where(over, mx, hx)
                hy = np.where(over, my, hy)
            colors[hit_rows] = fb.color[hy.astype(int), hx.astype(int)]
            hit[hit_rows] = True

        pos_lo[still[~crossed]] = q[~crossed]
        active = still[~crossed]

    return colors, hit


BODY_DEPTH_SCALE = 5.0   # shallow -> deep color transition length, world units


def _apply_flood_kernel(fb: FrameBuffer, camera: Camera, params: WaterParams,
                        t: float, debug) -> FrameBuffer:
    out = fb.copy()
    h, w = fb.depth.shape
    # float32 keeps the depth buffer cache-resident for the march; both
    # engines read the same quantization so results agree exactly
    scene_depth = fb.normalized_depth().astype(np.float32)
    t1, t2 = params.plane_tangents()
    num = float(np.dot(params.normal, params.origin - camera.position))

    k_count = len(params.waves)
    wave_dir = np.zeros((k_count, 2))
    wave_k = np.ones(k_count)
    wave_omega = np.zeros(k_count)
    wave_q = np.zeros(k_count)
    wave_phase = np.zeros(k_count)
    for i, wv in enumerate(params.waves):
        wave_dir[i] = wv.direction
        wave_k[i] = wv.wave_number
        wave_omega[i] = wv.omega
        wave_q[i] = wv.steepness
        wave_phase[i] = wv.phase0

    out_color = out.color.reshape(-1, 3)
    out_z = np.empty(h * w)
    water_mask = np.zeros(h * w, dtype=bool)
    refl_w = np.empty(h * w)
    kernels.flood_pass(
        scene_depth, np.ascontiguousarray(fb.color), camera.rotation,
        camera.position, camera.translation,
        camera.focal[0], camera.focal[1],
        camera.principal_point[0], camera.principal_point[1], camera.near,
        params.origin, t1, t2, params.normal, num,
        wave_dir, wave_k, wave_omega, wave_q, wave_phase, t, WAVE_REFINE_ITERS,
        params.ior, params.absorption, params.shallow_color, params.deep_color,
        BODY_DEPTH_SCALE, PATH_CAP, fb.background,
        SSR_DISTANCE_FACTOR * camera.far / SSR_STEPS, SSR_STEPS, SSR_BIAS, SSR_REFINE,
        out_color, out_z, water_mask, refl_w)

    out.color = out_color.reshape(h, w, 3)
    flat_depth = out.depth.reshape(-1)
    flat_alpha = out.alpha_acc.reshape(-1)
    flat_depth[water_mask] = out_z[water_mask]
    flat_alpha[water_mask] = 1.0
    out.depth = flat_depth.reshape(h, w)
    out.alpha_acc = flat_alpha.reshape(h, w)
    if debug is not None:
        debug["reflected_weight"] = refl_w[water_mask]
        debug["refracted_weight"] = 1.0 - refl_w[water_mask]
        debug["mask"] = water_mask.reshape(h, w)
    return out


def apply_flood(fb: FrameBuffer, camera: Camera, params: WaterParams, t: float = 0.0,
                debug: dict = None, engine: str = "auto") -> FrameBuffer:
    """Replace pixels beyond the water surface with water shading."""
    if fb.depth is None or fb.color is None:
        raise ValueError("flood needs color and depth buffers")
    if engine != "numpy" and kernels.HAVE_NUMBA:
        return _apply_flood_kernel(fb, camera, params, t, debug)
    out = fb.copy()
    h, w = fb.depth.shape
    scene_depth = fb.normalized_depth().astype(np.float32)
    scene_z = scene_depth.reshape(-1).astype(np.float64)

    dirs_view = camera.pixel_dirs_view().reshape(-1, 3)       # view z component = 1,
    dirs_world = dirs_view @ camera.rotation                  # so ray param = view depth
    origin = camera.position
    n = params.normal
    t1, t2 = params.plane_tangents()

    denom = dirs_world @ n
    num = np.dot(n, params.origin - origin)
    with np.errstate(divide="ignore", invalid="ignore"):
        z_base = num / denom
    hits_plane = np.isfinite(z_base) & (z_base > 0)

    # candidates, with slack for how far the waves can move the intersection
    max_amp = sum(wv.steepness / wv.wave_number for wv in params.waves)
    with np.errstate(divide="ignore", invalid="ignore"):
        slack = np.abs(max_amp / denom)
    cand = hits_plane & (scene_z > z_base - slack - 1e-12) & (z_base + slack > camera.near)
    rows = np.flatnonzero(cand)
    if rows.size == 0:
        if debug is not None:
            debug["reflected_weight"] = np.zeros(0)
            debug["refracted_weight"] = np.zeros(0)
            debug["mask"] = cand.reshape(h, w)
        return out

    # refine the intersection against the wave height, then shade inputs
    d_rows = dirs_world[rows]
    z_rows = z_base[rows]
    if params.waves:
        for _ in range(WAVE_REFINE_ITERS):
            p = origin[None, :] + z_rows[:, None] * d_rows
            rel = p - params.origin
            uv = np.stack([rel @ t1, rel @ t2], axis=-1)
            height = gerstner_displace(uv, t, params.waves)[..., 1]
            z_rows = (num + height) / denom[rows]
    p = origin[None, :] + z_rows[:, None] * d_rows
    rel = p - params.origin
    uv = np.stack([rel @ t1, rel @ t2], axis=-1)
    n_local = gerstner_normal(uv, t, params.waves)
    n_world = (n_local[:, 0, None] * t1[None, :]
               + n_local[:, 1, None] * n[None, :]
               + n_local[:, 2, None] * t2[None, :])
    view_dir_all = d_rows / np.linalg.norm(d_rows, axis=1, keepdims=True)
    cos_theta = np.clip(-np.sum(view_dir_all * n_world, axis=1), 0.0, 1.0)
    refl_w = schlick_fresnel(cos_theta, params.ior)
    refl_dir = view_dir_all - 2.0 * np.sum(view_dir_all * n_world, axis=1,
                                           keepdims=True) * n_world

    underwater = (scene_z[rows] > z_rows) & (z_rows > camera.near)
    rows = rows[underwater]
    water = np.zeros(h * w, dtype=bool)
    water[rows] = True
    if rows.size == 0:
        if debug is not None:
            debug["reflected_weight"] = np.zeros(0)
            debug["refracted_weight"] = np.zeros(0)
            debug["mask"] = water.reshape(h, w)
        return out
    z_rows = z_rows[underwater]
    d_rows = d_rows[underwater]
    n_world = n_world[underwater]
    refl_dir = refl_dir[underwater]
    refl_w = refl_w[underwater]
    refr_w = 1.0 - refl_w

    p_w = origin[None, :] + z_rows[:, None] * d_rows
    view_dir = d_rows / np.linalg.norm(d_rows, axis=1, keepdims=True)
    origin_view = p_w @ camera.rotation.T + camera.translation
    refl_dir_view = refl_dir @ camera.rotation.T
    # nudge off the surface so the march does not immediately self-intersect
    refl_color, _ = ssr_trace_batch(fb, camera, origin_view + refl_dir_view * 1e-3,
                                    refl_dir_view,
                                    max_distance=SSR_DISTANCE_FACTOR * camera.far,
                                    scene_depth=scene_depth, engine=engine)

    # refraction: offset the screen sample along the refracted direction
    refr_dir = _refract(view_dir, n_world, 1.0 / params.ior)
    depth_below = np.where(np.isfinite(scene_z[rows]),
                           np.maximum(scene_z[rows] - z_rows, 0.0), PATH_CAP)
    offset = np.minimum(depth_below, 1.0)[:, None]
    sample_world = p_w + refr_dir * offset
    sample_view = sample_world @ camera.rotation.T + camera.translation
    sz = np.maximum(sample_view[:, 2], camera.near)
    sx = np.clip(camera.focal[0] * sample_view[:, 0] / sz + camera.principal_point[0], 0, w - 1)
    sy = np.clip(camera.focal[1] * sample_view[:, 1] / sz + camera.principal_point[1], 0, h - 1)
    sxi, syi = sx.astype(int), sy.astype(int)

    sampled_z = scene_depth[syi, sxi]
    # sampled point must itself be underwater content; otherwise keep this pixel's own
    with np.errstate(invalid="ignore"):
        valid = (sampled_z > z_base[syi * w + sxi]) | ~np.isfinite(sampled_z)
    flat_color = fb.color.reshape(-1, 3)
    refr_scene = np.where(valid[:, None], fb.color[syi, sxi], flat_color[rows])
    path = np.where(valid, np.where(np.isfinite(sampled_z),
                                    np.maximum(sampled_z - z_rows, 0.0), PATH_CAP),
                    np.minimum(depth_below, PATH_CAP))

    atten = np.exp(-params.absorption[None, :] * path[:, None])
    capped = np.minimum(path, PATH_CAP)
    body_mix = capped / (capped + BODY_DEPTH_SCALE)
    body = params.shallow_color[None, :] + (params.deep_color - params.shallow_color)[None, :] \
        * body_mix[:, None]
    refr_color = atten * refr_scene + (1.0 - atten) * body

    shaded = refl_w[:, None] * refl_color + refr_w[:, None] * refr_color
    flat_out = out.color.reshape(-1, 3)
    flat_out[rows] = shaded
    out.color = flat_out.reshape(h, w, 3)
    out_depth = out.depth.reshape(-1)
    out_alpha = out.alpha_acc.reshape(-1)
    out_depth[rows] = z_rows
    out_alpha[rows] = 1.0
    out.depth = out_depth.reshape(h, w)
    out.alpha_acc = out_alpha.reshape(h, w)

    if debug is not None:
        debug["reflected_weight"] = refl_w
        debug["refracted_weight"] = refr_w
        debug["mask"] = water.reshape(h, w)
    return out
