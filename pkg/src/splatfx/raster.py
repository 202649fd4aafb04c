"""Tile-based forward splatting.

Projection follows EWA splatting: world covariance -> view via the
camera rotation, then through the local affine Jacobian of the pinhole
map; the upper-left 2x2 block is the screen-space footprint. Pixels
composite front to back with per-splat evaluated alpha
a = opacity * exp(-0.5 * d^T cov2d^-1 d), clamped to 0.99 so
transmittance never reaches zero. Depth accumulates sum(T_i a_i d_i)
with no background term.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as kernels
from . import sh as shlib
from .camera import Camera
from .scene import GaussianScene

TILE = 16
ALPHA_MAX = 0.99
MIN_ALPHA = 1.0 / 255.0
COV2D_BLUR = 0.3          # px^2 diagonal loading, anti-aliasing floor
MIN_EXTENT_PX = 0.3       # cull splats smaller than this on screen (3-sigma, pre-blur)
CHUNK = 128


@dataclass
class RenderOptions:
    background: np.ndarray = (0.0, 0.0, 0.0)
    transmittance_cutoff: float = 1e-4
    keep_samples: bool = False
    sh_degree: int = None

    def __post_init__(self):
        self.background = np.asarray(self.background, dtype=np.float64).reshape(3)
        if not 0.0 < self.transmittance_cutoff < 1.0:
            raise ValueError("transmittance_cutoff must lie in (0, 1)")


@dataclass
class ProjectedSplat:
    mean2d: np.ndarray
    cov2d: np.ndarray
    view_depth: float
    color: np.ndarray
    opacity: float
    source_index: int
    view_center: np.ndarray = None


@dataclass
class ProjectedSplats:
    """Culled, depth-sorted splats as arrays (ascending view depth)."""

    means2d: np.ndarray       # (M, 2)
    cov2d: np.ndarray         # (M, 2, 2) regularized
    depths: np.ndarray        # (M,)
    colors: np.ndarray        # (M, 3)
    opacities: np.ndarray     # (M,)
    source_index: np.ndarray  # (M,) index into the scene
    view_centers: np.ndarray  # (M, 3) splat centers in view space

    def __len__(self) -> int:
        return self.means2d.shape[0]

    def splat(self, i: int) -> ProjectedSplat:
        return ProjectedSplat(
            mean2d=self.means2d[i],
            cov2d=self.cov2d[i],
            view_depth=float(self.depths[i]),
            color=self.colors[i],
            opacity=float(self.opacities[i]),
            source_index=int(self.source_index[i]),
            view_center=self.view_centers[i],
        )


@dataclass
class SampleStore:
    """Per-pixel (depth, evaluated alpha) contributions in compositing order."""

    width: int
    pixel_idx: np.ndarray
    depths: np.ndarray
    alphas: np.ndarray

    def at(self, x: int, y: int):
        sel = self.pixel_idx == (y * self.width + x)
        return self.depths[sel], self.alphas[sel]


@dataclass
class FrameBuffer:
    color: np.ndarray          # (H, W, 3) linear
    depth: np.ndarray          # (H, W) expected view depth, 0 where empty
    alpha_acc: np.ndarray      # (H, W) 1 - final transmittance
    background: np.ndarray = field(default_factory=lambda: np.zeros(3))
    samples: SampleStore = None

    @property
    def height(self) -> int:
        return self.color.shape[0]

    @property
    def width(self) -> int:
        return self.color.shape[1]

    def copy(self) -> "FrameBuffer":
        return FrameBuffer(
            color=self.color.copy(),
            depth=self.depth.copy(),
            alpha_acc=self.alpha_acc.copy(),
            background=self.background.copy(),
            samples=self.samples,
        )

    def normalized_depth(self, eps: float = 1e-6) -> np.ndarray:
        """Opacity-normalized depth; +inf on empty (sky) pixels."""
        out = np.full_like(self.depth, np.inf)
        covered = self.alpha_acc > eps
        out[covered] = self.depth[covered] / self.alpha_acc[covered]
        return out


def pixel_samples(fb: FrameBuffer, x: int, y: int) -> list:
    """Ordered (depth, alpha) contributions of one pixel."""
    if fb.samples is None:
        raise ValueError("frame was rendered without keep_samples")
    depths, alphas = fb.samples.at(x, y)
    return list(zip(depths.tolist(), alphas.tolist()))


def project(scene: GaussianScene, camera: Camera, sh_degree: int = None,
            colors: np.ndarray = None) -> ProjectedSplats:
    """Project all primitives, cull, and sort by ascending view depth."""
    camera.validate()
    degree = scene.sh_degree if sh_degree is None else min(sh_degree, scene.sh_degree)
    n = len(scene)
    if n == 0:
        z = np.zeros(0)
        return ProjectedSplats(np.zeros((0, 2)), np.zeros((0, 2, 2)), z,
                               np.zeros((0, 3)), z, np.zeros(0, dtype=int), np.zeros((0, 3)))

    view = camera.to_view(scene.centers)
    z = view[:, 2]
    keep = (z > camera.near) & (z < camera.far)

    view = view[keep]
    z = z[keep]
    idx = np.flatnonzero(keep)
    if idx.size == 0:
        zz = np.zeros(0)
        return ProjectedSplats(np.zeros((0, 2)), np.zeros((0, 2, 2)), zz,
                               np.zeros((0, 3)), zz, idx, np.zeros((0, 3)))

    cov_world = scene.covariances()[keep]
    r = camera.rotation
    cov_view = np.einsum("ij,njk,lk->nil", r, cov_world, r)

    fx, fy = camera.focal
    tan_x = 0.5 * camera.width / fx
    tan_y = 0.5 * camera.height / fy
    tx = np.clip(view[:, 0] / z, -1.3 * tan_x, 1.3 * tan_x) * z
    ty = np.clip(view[:, 1] / z, -1.3 * tan_y, 1.3 * tan_y) * z

    j = np.zeros((len(z), 2, 3))
    j[:, 0, 0] = fx / z
    j[:, 0, 2] = -fx * tx / (z * z)
    j[:, 1, 1] = fy / z
    j[:, 1, 2] = -fy * ty / (z * z)
    cov2d = np.einsum("nab,nbc,ndc->nad", j, cov_view, j)

    # extent cull uses the raw footprint, before the anti-aliasing floor
    half_trace = 0.5 * (cov2d[:, 0, 0] + cov2d[:, 1, 1])
    det_shift = np.sqrt(np.maximum(
        0.25 * (cov2d[:, 0, 0] - cov2d[:, 1, 1]) ** 2 + cov2d[:, 0, 1] ** 2, 0.0))
    lam_max_raw = half_trace + det_shift
    big_enough = 3.0 * np.sqrt(np.maximum(lam_max_raw, 0.0)) >= MIN_EXTENT_PX

    cov2d[:, 0, 0] += COV2D_BLUR
    cov2d[:, 1, 1] += COV2D_BLUR

    means2d = np.stack([
        fx * view[:, 0] / z + camera.principal_point[0],
        fy * view[:, 1] / z + camera.principal_point[1],
    ], axis=1)

    radius = 3.0 * np.sqrt(lam_max_raw + COV2D_BLUR)
    on_screen = (
        (means2d[:, 0] + radius > 0) & (means2d[:, 0] - radius < camera.width)
        & (means2d[:, 1] + radius > 0) & (means2d[:, 1] - radius < camera.height)
    )
    keep2 = big_enough & on_screen

    idx = idx[keep2]
    order = np.argsort(z[keep2], kind="stable")

    sel = scene.sh[idx]
    if colors is None:
        dirs = scene.centers[idx] - camera.position
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        col = shlib.eval_sh_many(sel, dirs, degree)
    else:
        col = np.asarray(colors, dtype=np.float64)[idx]

    return ProjectedSplats(
        means2d=means2d[keep2][order],
        cov2d=cov2d[keep2][order],
        depths=z[keep2][order],
        colors=col[order],
        opacities=scene.opacities[idx][order],
        source_index=idx[order],
        view_centers=view[keep2][order],
    )


class SplatShader:
    """Per-pixel color override for a subset of source splats.

    Subclasses set `source_mask` over scene indices and implement
    `shade`, receiving the chunk's projected rows, the pixel centers
    and the Mahalanobis quadratic form already evaluated by the
    compositor.
    """

    source_mask: np.ndarray = None

    def shade(self, projected: ProjectedSplats, rows: np.ndarray,
              pix: np.ndarray, quad: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def _tile_assignments(splats: ProjectedSplats, width: int, height: int):
    """Splat -> tile binning. Returns (tiles_x, sorted pair arrays, boundaries)."""
    tiles_x = (width + TILE - 1) // TILE
    tiles_y = (height + TILE - 1) // TILE

    lam1 = 0.5 * (splats.cov2d[:, 0, 0] + splats.cov2d[:, 1, 1])
    lam2 = np.sqrt(np.maximum(
        0.25 * (splats.cov2d[:, 0, 0] - splats.cov2d[:, 1, 1]) ** 2
        + splats.cov2d[:, 0, 1] ** 2, 0.0))
    radius = 3.0 * np.sqrt(lam1 + lam2)

    x0 = np.clip(((splats.means2d[:, 0] - radius) // TILE).astype(int), 0, tiles_x - 1)
    x1 = np.clip(((splats.means2d[:, 0] + radius) // TILE).astype(int), 0, tiles_x - 1)
    y0 = np.clip(((splats.means2d[:, 1] - radius) // TILE).astype(int), 0, tiles_y - 1)
    y1 = np.clip(((splats.means2d[:, 1] + radius) // TILE).astype(int), 0, tiles_y - 1)

    nx = x1 - x0 + 1
    ny = y1 - y0 + 1
    counts = nx * ny
    total = int(counts.sum())
    splat_of_pair = np.repeat(np.arange(len(splats)), counts)
    starts = np.repeat(np.cumsum(counts) - counts, counts)
    within = np.arange(total) - starts
    wx = np.repeat(nx, counts)
    dx = within % wx
    dy = within // wx
    tile_of_pair = (np.repeat(y0, counts) + dy) * tiles_x + (np.repeat(x0, counts) + dx)

    order = np.argsort(tile_of_pair, kind="stable")  # stable keeps depth order per tile
    tile_sorted = tile_of_pair[order]
    splat_sorted = splat_of_pair[order]
    bounds = np.searchsorted(tile_sorted, np.arange(tiles_x * tiles_y + 1))
    return tiles_x, tiles_y, splat_sorted, bounds


def _conics(splats: ProjectedSplats) -> np.ndarray:
    """Closed-form inverses of the 2x2 footprints, rows (a, b, c)."""
    a = splats.cov2d[:, 0, 0]
    b = splats.cov2d[:, 0, 1]
    c = splats.cov2d[:, 1, 1]
    det = a * c - b * b
    return np.stack([c / det, -b / det, a / det], axis=1)


def _rasterize_kernel(splats: ProjectedSplats, camera: Camera, opts: RenderOptions,
                      shader: SplatShader) -> FrameBuffer:
    h, w = camera.height, camera.width
    tiles_x, tiles_y, splat_sorted, bounds = _tile_assignments(splats, w, h)

    if shader is not None:
        shade_mask = np.ascontiguousarray(shader.source_mask[splats.source_index])
        light_view, albedo, wrap = shader.inline_params(camera)
    else:
        shade_mask = np.zeros(len(splats), dtype=bool)
        light_view = np.zeros(3)
        albedo = np.zeros(3)
        wrap = 0.0

    # unit center->camera directions, shared by all pixels of a shaded splat
    vc = splats.view_centers
    cam_dirs = -vc / np.maximum(np.linalg.norm(vc, axis=1, keepdims=True), 1e-12)

    color = np.zeros((h * w, 3))
    depth = np.zeros(h * w)
    transmittance = np.ones(h * w)
    # q beyond which alpha is provably under the skip threshold (slack keeps
    # borderline candidates on the exact exp path)
    q_reject = 2.0 * np.log(np.maximum(splats.opacities / MIN_ALPHA, 1e-12)) + 1e-9
    kernels.composite_tiles(
        h, w, TILE, tiles_x, tiles_y, splat_sorted, bounds,
        np.ascontiguousarray(splats.means2d), _conics(splats),
        np.ascontiguousarray(splats.colors), np.ascontiguousarray(splats.opacities),
        np.ascontiguousarray(splats.depths), q_reject,
        opts.transmittance_cutoff, ALPHA_MAX, MIN_ALPHA,
        shade_mask, np.ascontiguousarray(vc), np.ascontiguousarray(cam_dirs),
        camera.focal[0], camera.focal[1],
        camera.principal_point[0], camera.principal_point[1],
        light_view, albedo, wrap,
        color, depth, transmittance)

    color += transmittance[:, None] * opts.background[np.newaxis, :]
    return FrameBuffer(
        color=color.reshape(h, w, 3),
        depth=depth.reshape(h, w),
        alpha_acc=(1.0 - transmittance).reshape(h, w),
        background=opts.background.copy(),
        samples=None,
    )


def rasterize(scene: GaussianScene, camera: Camera, opts: RenderOptions = None,
              shader: SplatShader = None, splats: ProjectedSplats = None,
              engine: str = "auto") -> FrameBuffer:
    """Render the scene into color / depth / accumulated-opacity buffers.

    The numba kernel and the vectorized numpy path produce the same
    buffers; numpy is kept for sample retention and as the reference.
    """
    opts = opts or RenderOptions()
    if splats is None:
        splats = project(scene, camera, sh_degree=opts.sh_degree)
    h, w = camera.height, camera.width

    use_kernel = (
        engine != "numpy"
        and kernels.HAVE_NUMBA
        and not opts.keep_samples
        and (shader is None or hasattr(shader, "inline_params"))
    )
    if use_kernel and len(splats) > 0:
        return _rasterize_kernel(splats, camera, opts, shader)

    color = np.zeros((h * w, 3))
    depth = np.zeros(h * w)
    transmittance = np.ones(h * w)

    sample_chunks = [] if opts.keep_samples else None

    if len(splats) > 0:
        conic = _conics(splats)

        shader_rows = None
        if shader is not None:
            shader_rows = shader.source_mask[splats.source_index]

        tiles_x, tiles_y, splat_sorted, bounds = _tile_assignments(splats, w, h)
        cutoff = opts.transmittance_cutoff

        for ty in range(tiles_y):
            yl = ty * TILE
            yh = min(yl + TILE, h)
            for tx in range(tiles_x):
                t_id = ty * tiles_x + tx
                rows_all = splat_sorted[bounds[t_id]:bounds[t_id + 1]]
                if rows_all.size == 0:
                    continue
                xl = tx * TILE
                xh = min(xl + TILE, w)
                gx, gy = np.meshgrid(np.arange(xl, xh) + 0.5, np.arange(yl, yh) + 0.5)
                pix = np.stack([gx.ravel(), gy.ravel()], axis=1)  # (P, 2)
                pix_global = (np.repeat(np.arange(yl, yh), xh - xl) * w
                              + np.tile(np.arange(xl, xh), yh - yl))

                t_run = transmittance[pix_global]
                col_acc = color[pix_global]
                dep_acc = depth[pix_global]
                # a pixel stops for good once a contribution would cross the
                # cutoff; the latch must survive chunk boundaries
                active = np.ones(pix.shape[0], dtype=bool)

                for lo in range(0, rows_all.size, CHUNK):
                    rows = rows_all[lo:lo + CHUNK]
                    d = pix[np.newaxis, :, :] - splats.means2d[rows][:, np.newaxis, :]
                    cn = conic[rows]
                    quad = (cn[:, 0, None] * d[..., 0] ** 2
                            + 2.0 * cn[:, 1, None] * d[..., 0] * d[..., 1]
                            + cn[:, 2, None] * d[..., 1] ** 2)
                    alpha = splats.opacities[rows][:, None] * np.exp(-0.5 * quad)
                    np.minimum(alpha, ALPHA_MAX, out=alpha)
                    alpha[alpha < MIN_ALPHA] = 0.0

                    om = 1.0 - alpha
                    test_t = t_run[np.newaxis, :] * np.cumprod(om, axis=0)
                    allowed = (test_t >= cutoff) & active[np.newaxis, :]
                    active &= ~((~(test_t >= cutoff)) & (alpha > 0)).any(axis=0)
                    alpha_eff = np.where(allowed, alpha, 0.0)
                    om_eff = 1.0 - alpha_eff
                    cp = np.cumprod(om_eff, axis=0)
                    t_before = np.empty_like(cp)
                    t_before[0] = t_run
                    t_before[1:] = t_run[np.newaxis, :] * cp[:-1]
                    weight = alpha_eff * t_before  # (K, P)

                    cols = np.broadcast_to(
                        splats.colors[rows][:, None, :], weight.shape + (3,))
                    if shader_rows is not None:
                        sub = np.flatnonzero(shader_rows[rows])
                        if sub.size:
                            cols = np.array(cols)
                            cols[sub] = shader.shade(splats, rows[sub], pix, quad[sub])

                    col_acc += np.einsum("kp,kpc->pc", weight, cols)
                    dep_acc += weight.T @ splats.depths[rows]
                    t_run = t_run * cp[-1]

                    if sample_chunks is not None:
                        ks, ps = np.nonzero(alpha_eff >= MIN_ALPHA)
                        if ks.size:
                            sample_chunks.append((
                                pix_global[ps],
                                splats.depths[rows][ks],
                                alpha_eff[ks, ps],
                            ))
                    if not active.any() or t_run.max() < cutoff:
                        break

                transmittance[pix_global] = t_run
                color[pix_global] = col_acc
                depth[pix_global] = dep_acc

    color += transmittance[:, None] * opts.background[np.newaxis, :]

    store = None
    if sample_chunks is not None:
        if sample_chunks:
            store = SampleStore(
                width=w,
                pixel_idx=np.concatenate([s[0] for s in sample_chunks]),
                depths=np.concatenate([s[1] for s in sample_chunks]),
                alphas=np.concatenate([s[2] for s in sample_chunks]),
            )
        else:
            store = SampleStore(width=w, pixel_idx=np.zeros(0, dtype=int),
                                depths=np.zeros(0), alphas=np.zeros(0))

    return FrameBuffer(
        color=color.reshape(h, w, 3),
        depth=depth.reshape(h, w),
        alpha_acc=(1.0 - transmittance).reshape(h, w),
        background=opts.background.copy(),
        samples=store,
    )
