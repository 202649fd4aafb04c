"""Snow placement, sphere-normal sampling, wrap lighting and the render hook."""

import numpy as np
import pytest

from splatfx.camera import look_at
from splatfx.effects.smog import SmogParams, apply_smog
from splatfx.effects.snow import (
    SnowParams,
    apply_snow,
    place_snow,
    sample_normal,
    sample_normals_batch,
    wrap_diffuse,
)
from splatfx.raster import ProjectedSplat, RenderOptions, rasterize
from splatfx.synthetic import FloaterSpec, PlaneSpec, generate_synthetic_scene

UP = np.array([0.0, 1.0, 0.0])


def plane_scene(height=5.0, size=10.0, with_floaters=False):
    specs = [PlaneSpec(center=(0, height, 0), normal=(0, 1, 0), size=(size, size),
                       spacing=0.25, opacity=0.95, color=(0.4, 0.45, 0.5))]
    if with_floaters:
        specs.append(FloaterSpec(count=40, region=((-5, height + 1.0, -5),
                                                   (5, height + 2.5, 5)),
                                 scale=0.08, opacity=0.08))
    scene, truth = generate_synthetic_scene(specs, seed=11)
    return scene, truth


def snow_params(**kw):
    defaults = dict(thickness=0.2, grid_spacing=0.5, up=UP, min_up_dot=0.65,
                    albedo=(0.9, 0.9, 0.95), wrap=0.5, light_dir=(0, 1, 0))
    defaults.update(kw)
    return SnowParams(**defaults)


# -------------------------------------------------------------------- placement

def test_plane_lattice_count_and_heights():
    scene, _ = plane_scene()
    placed = place_snow(scene, snow_params())
    assert len(placed) == 21 * 21
    heights = placed.centers @ UP
    np.testing.assert_allclose(heights, 5.0 + 0.1, atol=1e-2)


def test_vertical_wall_places_nothing():
    specs = [PlaneSpec(center=(0, 2, 0), normal=(0, 0, 1), size=(10, 4),
                       spacing=0.25, opacity=0.95, color=(0.5, 0.5, 0.5))]
    scene, _ = generate_synthetic_scene(specs, seed=0)
    placed = place_snow(scene, snow_params())
    assert len(placed) == 0


def test_floaters_do_not_shift_snow():
    scene_clean, _ = plane_scene()
    scene_dirty, _ = plane_scene(with_floaters=True)
    clean = place_snow(scene_clean, snow_params())
    dirty = place_snow(scene_dirty, snow_params())
    assert len(dirty) == len(clean)
    # identical lattice order: compare heights pairwise
    h_clean = clean.centers @ UP
    h_dirty = dirty.centers @ UP
    assert np.abs(h_dirty - h_clean).max() <= 0.05


def test_zero_thickness_changes_nothing():
    scene, _ = plane_scene()
    result = apply_snow(scene, snow_params(thickness=0.0))
    assert result.scene is scene
    assert len(result.placed) == 0
    assert not result.snow_mask.any()


def test_snow_splat_geometry():
    scene, _ = plane_scene()
    params = snow_params(thickness=0.3, grid_spacing=0.5)
    placed = place_snow(scene, params)
    np.testing.assert_allclose(placed.opacities, 0.95)
    # minor axis thickness/2 along up, footprint 0.75 * spacing laterally
    assert np.allclose(sorted(placed.scales[0]), sorted([0.375, 0.15, 0.375]))


# -------------------------------------------------------------- normal sampling

def axis_splat(distance=10.0, cov=None):
    cam = look_at((0, 0, 0), (0, 0, 1), width=64, height=64, focal=(100, 100), far=50)
    cov = np.eye(2) if cov is None else cov
    splat = ProjectedSplat(
        mean2d=np.array([32.0, 32.0]), cov2d=cov, view_depth=distance,
        color=np.zeros(3), opacity=1.0, source_index=0,
        view_center=np.array([0.0, 0.0, distance]))
    return splat, cam


def test_normal_at_center_faces_camera():
    splat, cam = axis_splat()
    n = sample_normal(splat, (32.0, 32.0), cam)
    # n2 in view space is (0, 0, -1); world equals view for this camera
    np.testing.assert_allclose(cam.rotation @ n, [0, 0, -1], atol=1e-9)
    np.testing.assert_allclose(np.linalg.norm(n), 1.0, atol=1e-12)


def test_normal_at_silhouette_is_perpendicular():
    splat, cam = axis_splat()
    n = sample_normal(splat, (33.0, 32.0), cam)   # offset 1 px, cov identity: D = 1
    n2_world = np.array([0.0, 0.0, -1.0]) @ cam.rotation
    assert abs(n @ n2_world) < 1e-6
    np.testing.assert_allclose(np.linalg.norm(n), 1.0, atol=1e-9)


def test_disk_reproduces_orthographic_sphere_normals():
    """Identity 2D covariance on the optical axis: normals equal the unit
    sphere's under orthographic projection, within 1e-3 radians."""
    splat, cam = axis_splat()
    worst = 0.0
    for dx in np.linspace(-0.95, 0.95, 11):
        for dy in np.linspace(-0.95, 0.95, 11):
            r2 = dx * dx + dy * dy
            if r2 >= 0.98:
                continue
            n = sample_normal(splat, (32.0 + dx, 32.0 + dy), cam)
            expected_view = np.array([dx, dy, -np.sqrt(1.0 - r2)])
            expected = expected_view @ cam.rotation
            angle = np.arccos(np.clip(n @ expected, -1, 1))
            worst = max(worst, angle)
    assert worst < 1e-3


def test_normals_unit_and_continuous():
    cov = np.eye(2) * 32.0 ** 2   # 32 px splat radius
    splat, cam = axis_splat(cov=cov)
    xs = np.arange(32.0 - 31.0, 32.0 + 31.0)
    pix = np.stack([xs, np.full_like(xs, 32.0)], axis=1)
    delta = pix - splat.mean2d
    quad = (delta[:, 0] ** 2 + delta[:, 1] ** 2) / 32.0 ** 2
    normals = sample_normals_batch(splat.mean2d[None], splat.view_center[None],
                                   quad[None], pix, cam)[0]
    np.testing.assert_allclose(np.linalg.norm(normals, axis=1), 1.0, atol=1e-6)
    dots = np.clip(np.sum(normals[1:] * normals[:-1], axis=1), -1, 1)
    assert np.arccos(dots).max() < 0.2


def test_degenerate_covariance_falls_back_to_camera_facing():
    splat, cam = axis_splat(cov=np.zeros((2, 2)))
    n = sample_normal(splat, (40.0, 40.0), cam)
    np.testing.assert_allclose(cam.rotation @ n, [0, 0, -1], atol=1e-9)


# --------------------------------------------------------------- wrap lighting

def test_wrap_diffuse_table():
    n = np.array([0.0, 1.0, 0.0])
    assert wrap_diffuse(n, n, 0.3) == 1.0
    l_perp = np.array([1.0, 0.0, 0.0])
    np.testing.assert_allclose(wrap_diffuse(n, l_perp, 0.5), 1.0 / 3.0, atol=1e-12)
    # n.l = -wrap: zero crossing
    ang = np.arccos(-0.5)
    l_back = np.array([np.sin(ang), np.cos(ang), 0.0])
    np.testing.assert_allclose(wrap_diffuse(n, l_back, 0.5), 0.0, atol=1e-12)


def test_wrap_diffuse_clamps_negative():
    n = np.array([0.0, 1.0, 0.0])
    assert wrap_diffuse(n, -n, 0.2) == 0.0


# ------------------------------------------------------------------ render hook

def overhead_camera():
    return look_at((0, 12.0, 0), (0, 5.0, 0), up=(0, 0, 1), width=64, height=64,
                   focal=(70, 70), far=60)


def test_snow_shade_floor_and_peak_under_overhead_light():
    """Light straight down: every sampled point shades at least
    albedo * wrap/(1+wrap); the peak sits at the splat center."""
    splat, cam = axis_splat()
    xs = np.linspace(31.05, 32.95, 20)
    pix = np.stack([xs, np.full_like(xs, 32.0)], axis=1)
    delta = pix - splat.mean2d
    quad = delta[:, 0] ** 2 + delta[:, 1] ** 2
    # light toward the camera, i.e. along n2 for this on-axis splat
    light = np.array([0.0, 0.0, -1.0]) @ cam.rotation
    normals = sample_normals_batch(splat.mean2d[None], splat.view_center[None],
                                   quad[None], pix, cam)[0]
    lit = wrap_diffuse(normals, light, 0.5)
    assert np.all(lit >= 0.5 / 1.5 - 1e-9)
    center = sample_normal(splat, (32.0, 32.0), cam)
    assert wrap_diffuse(center, light, 0.5) == 1.0
    assert lit.max() <= 1.0


def test_snow_render_floor_and_center_peaks():
    """Composited snow stays above the wrap floor mix and peaks at centers."""
    scene, _ = plane_scene()
    params = snow_params(thickness=0.3, wrap=0.5, light_dir=(0, 1, 0))
    result = apply_snow(scene, params)
    cam = overhead_camera()
    fb = rasterize(result.scene, cam, RenderOptions(), shader=result.make_shader(cam))
    snow_pixels = fb.alpha_acc > 0.99
    assert snow_pixels.mean() > 0.5
    # near the axis every contribution shades at least albedo * wrap/(1+wrap);
    # off-axis the center->camera direction tilts and the bound relaxes
    central = fb.color[28:37, 28:37, 0]
    assert central.min() > 0.25
    # the central splat projects to the principal point: local maximum there
    # versus the cell-center pixel between four splats (2.55 px per 0.25 world)
    assert fb.color[32, 32, 0] > fb.color[35, 35, 0]
    assert fb.color[snow_pixels][:, 0].max() <= 0.95


def test_snow_then_smog_composes():
    """Pipeline order: the smog pass applied to the snow-rendered buffer
    equals requesting both passes together."""
    from splatfx.service import SessionState, render_frame

    scene, _ = plane_scene()
    state = SessionState(base_scene=scene)
    state.climate = state.climate.merged({
        "snow": {"thickness": 0.2, "grid_spacing": 0.5},
        "smog": {"color": [0.5, 0.5, 0.5], "density": 0.08},
    })
    cam = overhead_camera()
    both, _, _ = render_frame(state, cam, ["snow", "smog"])
    snow_only, _, _ = render_frame(state, cam, ["snow"])

    result = apply_snow(scene, state.climate.snow)
    fb = rasterize(result.scene, cam, RenderOptions(), shader=result.make_shader(cam))
    np.testing.assert_array_equal(snow_only, fb.color)
    np.testing.assert_array_equal(both, apply_smog(fb, state.climate.smog).color)


def test_param_validation():
    with pytest.raises(ValueError, match="thickness"):
        snow_params(thickness=-1)
    with pytest.raises(ValueError, match="grid"):
        snow_params(grid_spacing=0)
    with pytest.raises(ValueError, match="wrap"):
        snow_params(wrap=2)
