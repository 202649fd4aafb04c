import numpy as np
import pytest

from splatfx.camera import Camera, look_at, orbit_poses


def test_look_at_projects_target_to_principal_point():
    cam = look_at((1, 2, -5), (0.5, 0, 3), width=80, height=60)
    cam.validate()
    pix, z = cam.project_view(cam.to_view(np.array([0.5, 0.0, 3.0])))
    np.testing.assert_allclose(pix, cam.principal_point, atol=1e-9)
    assert z > 0


def test_position_inverts_translation():
    cam = look_at((3, -1, 2), (0, 0, 0))
    np.testing.assert_allclose(cam.position, [3, -1, 2], atol=1e-12)


def test_view_world_round_trip(rng):
    cam = look_at((1, 4, -2), (0, 1, 0))
    pts = rng.normal(size=(10, 3))
    np.testing.assert_allclose(cam.view_to_world(cam.to_view(pts)), pts, atol=1e-12)


def test_validation_rejects_bad_cameras():
    cam = look_at((0, 0, 0), (0, 0, 1))
    cam.rotation = cam.rotation * 1.1
    with pytest.raises(ValueError, match="orthonormal"):
        cam.validate()
    cam2 = look_at((0, 0, 0), (0, 0, 1), near=5.0, far=1.0)
    with pytest.raises(ValueError, match="near"):
        cam2.validate()


def test_resized_preserves_field_of_view():
    cam = look_at((0, 0, 0), (0, 0, 1), width=640, height=360)
    half = cam.resized(320, 180)
    np.testing.assert_allclose(half.focal, cam.focal / 2)
    np.testing.assert_allclose(half.principal_point, cam.principal_point / 2)


def test_orbit_count_and_radius():
    cams = orbit_poses((0, 0, 0), radius=7.0, elevation_deg=25, count=6)
    assert len(cams) == 6
    for cam in cams:
        cam.validate()
        np.testing.assert_allclose(np.linalg.norm(cam.position), 7.0, atol=1e-9)
        pix, _ = cam.project_view(cam.to_view(np.zeros(3)))
        np.testing.assert_allclose(pix, cam.principal_point, atol=1e-6)


def test_dict_round_trip():
    cam = look_at((2, 1, -3), (0, 0, 1), width=100, height=70, far=42.0)
    back = Camera.from_dict(cam.to_dict())
    np.testing.assert_allclose(back.rotation, cam.rotation)
    np.testing.assert_allclose(back.focal, cam.focal)
    assert back.far == 42.0
    with pytest.raises(ValueError, match="missing"):
        Camera.from_dict({"rotation": np.eye(3).tolist()})
