"""splatfx: Gaussian splat rendering with restyling and climate effects."""

from .camera import Camera, look_at, orbit_poses
from .ply import load_scene, save_scene
from .raster import FrameBuffer, RenderOptions, pixel_samples, project, rasterize
from .scene import Gaussian, GaussianScene, SceneError, covariance
from .sh import eval_sh
from .style import (
    ColorTransform,
    UnifiedSHMap,
    apply_transform,
    estimate_transform,
    invert_transform,
    two_stage_pipeline,
)

__version__ = "0.1.0"

__all__ = [
    "Camera",
    "look_at",
    "orbit_poses",
    "load_scene",
    "save_scene",
    "FrameBuffer",
    "RenderOptions",
    "project",
    "rasterize",
    "pixel_samples",
    "Gaussian",
    "GaussianScene",
    "SceneError",
    "covariance",
    "eval_sh",
    "ColorTransform",
    "UnifiedSHMap",
    "apply_transform",
    "estimate_transform",
    "invert_transform",
    "two_stage_pipeline",
    "__version__",
]
