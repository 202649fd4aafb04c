"""Photorealistic color restyling as one affine map over SH coefficients.

Every coefficient row is first rescaled by its basis constant so the
whole 16x3 block lives in one shared color space; there a single
3x3 matrix plus bias acts uniformly. The bias attaches to the DC row
only: for an affine map F, F(c0 + delta) = M c0 + b + M delta, so
view-dependent deltas transform linearly and the map commutes exactly
with color evaluation at every direction. Transforms are estimated in
closed form from pixel statistics (mean/std or full whitening and
recoloring); no training involved.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import sh as shlib
from .scene import GaussianScene

FACTORED_K = 16
EPS_LOADING = 1e-6
DET_FLOOR = 1e-9


@dataclass
class UnifiedSHMap:
    """Per-row scale into the unified color space, plus the DC offset."""

    lam: np.ndarray = field(default_factory=lambda: shlib.ROW_CONSTANTS.copy())
    dc_offset: float = shlib.DC_OFFSET

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=np.float64).reshape(shlib.NUM_COEFFS)
        if np.any(self.lam == 0.0):
            raise ValueError("unified map requires nonzero per-row scales")

    def to_unified(self, sh: np.ndarray) -> np.ndarray:
        """sh (..., 16, 3) -> unified (..., 16, 3); row 0 becomes the base color."""
        u = np.asarray(sh, dtype=np.float64) * self.lam[:, np.newaxis]
        u[..., 0, :] += self.dc_offset
        return u

    def to_sh(self, unified: np.ndarray) -> np.ndarray:
        """Exact inverse of to_unified."""
        u = np.array(unified, dtype=np.float64, copy=True)
        u[..., 0, :] -= self.dc_offset
        return u / self.lam[:, np.newaxis]


def sh_to_unified(sh: np.ndarray) -> np.ndarray:
    return UnifiedSHMap().to_unified(sh)


def unified_to_sh(unified: np.ndarray) -> np.ndarray:
    return UnifiedSHMap().to_sh(unified)


@dataclass
class ColorTransform:
    """Affine rgb map c' = M c + b, optionally carried in factored P T Q form."""

    matrix: np.ndarray
    bias: np.ndarray
    factored: tuple = None       # (P (3,k), T (k,k), Q (k,3)) with M = P @ T @ Q
    regularized: bool = False    # estimation needed diagonal loading

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64).reshape(3, 3)
        self.bias = np.asarray(self.bias, dtype=np.float64).reshape(3)

    @classmethod
    def identity(cls) -> "ColorTransform":
        return cls(matrix=np.eye(3), bias=np.zeros(3))

    @classmethod
    def from_factored(cls, p: np.ndarray, t: np.ndarray, q: np.ndarray,
                      bias=(0.0, 0.0, 0.0)) -> "ColorTransform":
        p = np.asarray(p, dtype=np.float64)
        t = np.asarray(t, dtype=np.float64)
        q = np.asarray(q, dtype=np.float64)
        if p.shape != (3, FACTORED_K) or t.shape != (FACTORED_K, FACTORED_K) \
                or q.shape != (FACTORED_K, 3):
            raise ValueError(
                f"factored shapes must be (3,{FACTORED_K}), ({FACTORED_K},{FACTORED_K}), "
                f"({FACTORED_K},3); got {p.shape}, {t.shape}, {q.shape}")
        return cls(matrix=p @ t @ q, bias=bias, factored=(p, t, q))

    def validate(self):
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("transform matrix contains non-finite entries")
        if self.factored is not None:
            p, t, q = self.factored
            if np.abs(p @ t @ q - self.matrix).max() > 1e-6:
                raise ValueError("factored form disagrees with the composed matrix")

    def is_invertible(self) -> bool:
        return abs(np.linalg.det(self.matrix)) > DET_FLOOR


def apply_transform(scene: GaussianScene, t: ColorTransform) -> GaussianScene:
    """Map every primitive's colors; geometry and opacity untouched."""
    u = sh_to_unified(scene.sh)                      # (N, 16, 3)
    u = u @ t.matrix.T
    u[:, 0, :] += t.bias
    return scene.with_sh(unified_to_sh(u))


def compose(outer: ColorTransform, inner: ColorTransform) -> ColorTransform:
    """Transform equal to applying `inner` first, then `outer`."""
    return ColorTransform(
        matrix=outer.matrix @ inner.matrix,
        bias=outer.matrix @ inner.bias + outer.bias,
        regularized=outer.regularized or inner.regularized,
    )


def invert_transform(t: ColorTransform) -> ColorTransform:
    if not t.is_invertible():
        raise ValueError("transform matrix is singular; cannot invert")
    m_inv = np.linalg.inv(t.matrix)
    return ColorTransform(matrix=m_inv, bias=-m_inv @ t.bias)


def two_stage_pipeline(scene: GaussianScene, content_transform: ColorTransform,
                       style_transform: ColorTransform) -> GaussianScene:
    """Normalize into the content space, then colorize with the style map."""
    return apply_transform(apply_transform(scene, content_transform), style_transform)


def _sym_sqrt_and_inv(cov: np.ndarray):
    """Symmetric square root and inverse root; returns (sqrt, inv_sqrt, loaded)."""
    loaded = False
    eigval, eigvec = np.linalg.eigh(cov)
    if eigval.min() < 1e-9:
        cov = cov + EPS_LOADING * np.eye(3)
        eigval, eigvec = np.linalg.eigh(cov)
        loaded = True
    root = eigvec @ np.diag(np.sqrt(eigval)) @ eigvec.T
    inv_root = eigvec @ np.diag(1.0 / np.sqrt(eigval)) @ eigvec.T
    return root, inv_root, loaded


def estimate_transform(content_pixels: np.ndarray, style_pixels: np.ndarray,
                       method: str = "full_covariance") -> ColorTransform:
    """Closed-form transform matching content statistics to style statistics.

    mean_std matches per-channel mean and standard deviation;
    full_covariance whitens with the content covariance root and
    recolors with the style covariance root.
    """
    content = np.asarray(content_pixels, dtype=np.float64).reshape(-1, 3)
    style = np.asarray(style_pixels, dtype=np.float64).reshape(-1, 3)
    if len(content) < 2 or len(style) < 2:
        raise ValueError("need at least 2 pixels per side to estimate statistics")

    mu_c = content.mean(axis=0)
    mu_s = style.mean(axis=0)
    regularized = False

    if method == "mean_std":
        var_c = content.var(axis=0)
        var_s = style.var(axis=0)
        if var_c.min() < 1e-9 or var_s.min() < 1e-9:
            var_c = var_c + EPS_LOADING
            var_s = var_s + EPS_LOADING
            regularized = True
        m = np.diag(np.sqrt(var_s / var_c))
    elif method == "full_covariance":
        cov_c = np.cov(content, rowvar=False, ddof=0)
        cov_s = np.cov(style, rowvar=False, ddof=0)
        root_s, _, loaded_s = _sym_sqrt_and_inv(cov_s)
        _, inv_root_c, loaded_c = _sym_sqrt_and_inv(cov_c)
        regularized = loaded_s or loaded_c
        m = root_s @ inv_root_c
    else:
        raise ValueError(f"unknown estimation method: {method!r}")

    return ColorTransform(matrix=m, bias=mu_s - m @ mu_c, regularized=regularized)


def unified_dc_colors(scene: GaussianScene) -> np.ndarray:
    """View-independent base color of every primitive, (N, 3)."""
    return shlib.DC_OFFSET + shlib.SH_C0 * scene.sh[:, 0, :]


def content_consistency_metric(scene_a: GaussianScene, scene_b: GaussianScene,
                               cameras, opts=None) -> float:
    """Mean L1 over base colors plus mean L1 over renders at the given cameras."""
    from .raster import RenderOptions, rasterize

    if len(scene_a) != len(scene_b):
        raise ValueError(f"primitive count mismatch: {len(scene_a)} vs {len(scene_b)}")
    dc_term = float(np.abs(unified_dc_colors(scene_a) - unified_dc_colors(scene_b)).mean())

    opts = opts or RenderOptions()
    render_term = 0.0
    if cameras:
        for cam in cameras:
            fa = rasterize(scene_a, cam, opts)
            fb = rasterize(scene_b, cam, opts)
            render_term += float(np.abs(fa.color - fb.color).mean())
        render_term /= len(cameras)
    return dc_term + render_term


def style_distance_metric(image: np.ndarray, style_image: np.ndarray) -> float:
    """Sum over channels of |mean difference| + |std difference|."""
    a = np.asarray(image, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(style_image, dtype=np.float64).reshape(-1, 3)
    if a.size == 0 or b.size == 0:
        raise ValueError("images must be non-empty")
    return float(
        np.abs(a.mean(axis=0) - b.mean(axis=0)).sum()
        + np.abs(a.std(axis=0) - b.std(axis=0)).sum()
    )


def cycle_error_metric(scene: GaussianScene, content_t: ColorTransform,
                       camera, reference_image: np.ndarray, opts=None) -> float:
    """Round-trip through the transform and back; coefficient and image L1."""
    from .raster import RenderOptions, rasterize

    restored = apply_transform(apply_transform(scene, content_t), invert_transform(content_t))
    coeff_term = float(np.abs(restored.sh - scene.sh).mean())
    fb = rasterize(restored, camera, opts or RenderOptions())
    image_term = float(np.abs(fb.color - np.asarray(reference_image, dtype=np.float64)).mean())
    return coeff_term + image_term


def save_transform(t: ColorTransform, path) -> None:
    if t.factored is not None:
        p, tt, q = t.factored
        doc = {"P": p.reshape(-1).tolist(), "T": tt.reshape(-1).tolist(),
               "Q": q.reshape(-1).tolist(), "bias": t.bias.tolist()}
    else:
        doc = {"matrix": t.matrix.reshape(-1).tolist(), "bias": t.bias.tolist()}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2)


def load_transform(path) -> ColorTransform:
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    if not isinstance(doc, dict):
        raise ValueError("transform file must hold a key-value document")
    bias = np.asarray(doc.get("bias", [0.0, 0.0, 0.0]), dtype=np.float64)
    if bias.shape != (3,):
        raise ValueError(f"bias must hold 3 floats, got shape {bias.shape}")

    if "matrix" in doc:
        m = np.asarray(doc["matrix"], dtype=np.float64)
        if m.size != 9:
            raise ValueError(f"matrix must hold 9 floats row-major, got {m.size}")
        t = ColorTransform(matrix=m.reshape(3, 3), bias=bias)
    elif {"P", "T", "Q"} <= set(doc):
        p = np.asarray(doc["P"], dtype=np.float64)
        tt = np.asarray(doc["T"], dtype=np.float64)
        q = np.asarray(doc["Q"], dtype=np.float64)
        if p.size != 3 * FACTORED_K or tt.size != FACTORED_K ** 2 or q.size != 3 * FACTORED_K:
            raise ValueError("factored transform has wrong element counts")
        t = ColorTransform.from_factored(
            p.reshape(3, FACTORED_K), tt.reshape(FACTORED_K, FACTORED_K),
            q.reshape(FACTORED_K, 3), bias)
    else:
        raise ValueError("transform file needs either 'matrix' or 'P'/'T'/'Q'")
    t.validate()
    return t
