"""Tests for camera poses, ray generation, projection and pose sampling."""

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.append(str(Path(__file__).resolve().parent.parent))

from camera.distribution import FFHQ_POSES, AFHQ_POSES, PoseDistribution, pose_preset, sample_pose, side_view_angle
from camera.pose import (
    CameraPose,
    angles_from_center,
    camera_from_angles,
    generate_rays,
    load_camera,
    project,
    save_camera,
)
from common.errors import ParameterError


def test_frontal_pose():
    cam = camera_from_angles(0.0, 0.0)
    np.testing.assert_allclose(cam.center, [0, 0, 1], atol=1e-15)
    np.testing.assert_allclose(cam.forward, [0, 0, -1], atol=1e-15)
    np.testing.assert_allclose(cam.up, [0, 1, 0], atol=1e-15)
    np.testing.assert_allclose(cam.right, [1, 0, 0], atol=1e-15)


def test_quarter_turn_azimuth():
    cam = camera_from_angles(np.pi / 2, 0.0)
    np.testing.assert_allclose(cam.center, [1, 0, 0], atol=1e-15)


def test_focal_length_for_twelve_degrees():
    cam = camera_from_angles(0.0, 0.0, fov_deg=12.0, width=128, height=128)
    assert abs(cam.focal - 64.0 / np.tan(np.radians(6.0))) < 1e-12


@pytest.mark.parametrize(
    "kwargs",
    [
        {"fov_deg": 0.0},
        {"fov_deg": -5.0},
        {"near": 1.2, "far": 1.0},
        {"near": 0.0},
        {"elevation": np.pi / 2},
        {"width": 0},
    ],
)
def test_invalid_cameras_rejected(kwargs):
    params = {"azimuth": 0.0, "elevation": 0.0}
    params.update(kwargs)
    with pytest.raises(ParameterError):
        camera_from_angles(**params)


def test_frame_is_orthonormal_and_right_handed():
    rng = np.random.default_rng(0)
    for _ in range(50):
        cam = camera_from_angles(rng.uniform(-np.pi, np.pi), rng.uniform(-1.4, 1.4))
        frame = cam.rotation
        np.testing.assert_allclose(frame @ frame.T, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(np.cross(cam.right, cam.up), -cam.forward, atol=1e-12)


def test_single_pixel_ray_is_optical_axis():
    cam = camera_from_angles(0.3, 0.1, width=1, height=1)
    origins, dirs = generate_rays(cam)
    np.testing.assert_allclose(origins[0, 0], cam.center)
    np.testing.assert_allclose(dirs[0, 0], cam.forward, atol=1e-15)


def test_central_pixel_of_odd_image_is_optical_axis():
    cam = camera_from_angles(-0.2, 0.05, width=5, height=5)
    _, dirs = generate_rays(cam)
    np.testing.assert_allclose(dirs[2, 2], cam.forward, atol=1e-15)


def test_corner_ray_angle_matches_pinhole_geometry():
    cam = camera_from_angles(0.0, 0.0, fov_deg=12.0, width=64, height=64)
    _, dirs = generate_rays(cam)
    offset = (64 / 2 - 0.5) / cam.focal
    expected = np.arctan(np.hypot(offset, offset))
    angle = np.arccos(np.clip(dirs[0, 0] @ cam.forward, -1, 1))
    assert abs(angle - expected) < 1e-9
    # the corner ray is slightly inside the fov/2 * sqrt(2) pinhole bound
    assert angle < np.arctan(np.sqrt(2) * np.tan(np.radians(6.0)))


def test_directions_are_unit_and_mirror_symmetric():
    cam = camera_from_angles(0.0, 0.0, width=16, height=12)
    origins, dirs = generate_rays(cam)
    np.testing.assert_allclose(np.linalg.norm(dirs, axis=-1), 1.0, atol=1e-9)
    assert np.all(origins == cam.center)
    mirrored = dirs[:, ::-1] * np.array([-1.0, 1.0, 1.0])
    np.testing.assert_allclose(mirrored, dirs, atol=1e-15)
    flipped = dirs[::-1, :] * np.array([1.0, -1.0, 1.0])
    np.testing.assert_allclose(flipped, dirs, atol=1e-15)


def test_angle_round_trip():
    rng = np.random.default_rng(2)
    for _ in range(100):
        az, el = rng.uniform(-np.pi + 1e-3, np.pi - 1e-3), rng.uniform(-1.5, 1.5)
        back = angles_from_center(camera_from_angles(az, el).center)
        assert abs(back[0] - az) < 1e-9
        assert abs(back[1] - el) < 1e-9


def test_origin_projects_to_principal_point():
    rng = np.random.default_rng(4)
    for _ in range(20):
        cam = camera_from_angles(rng.normal(0, 0.3), rng.normal(0, 0.15), width=128, height=96)
        uv, distance, in_front = project(cam, np.zeros(3))
        np.testing.assert_allclose(uv, [64.0, 48.0], atol=1e-6)
        assert abs(distance - 1.0) < 1e-12 and in_front


def test_project_inverts_ray_generation():
    cam = camera_from_angles(0.4, -0.1, width=8, height=6)
    origins, dirs = generate_rays(cam)
    points = origins + 0.95 * dirs
    uv, distance, _ = project(cam, points)
    rows, cols = np.meshgrid(np.arange(6), np.arange(8), indexing="ij")
    np.testing.assert_allclose(uv[..., 0], cols + 0.5, atol=1e-9)
    np.testing.assert_allclose(uv[..., 1], rows + 0.5, atol=1e-9)
    np.testing.assert_allclose(distance, 0.95, atol=1e-12)


def test_camera_json_round_trip(tmp_path):
    cam = camera_from_angles(0.45, -0.05, width=32, height=16)
    save_camera(cam, tmp_path / "cam.json")
    assert load_camera(tmp_path / "cam.json") == cam
    assert set(cam.to_dict()) == {"azimuth", "elevation", "fov_deg", "near", "far", "width", "height"}


def test_zero_std_pose_is_frontal():
    rng = np.random.default_rng(0)
    dist = PoseDistribution(0.0, 0.0)
    for _ in range(10):
        assert sample_pose(dist, rng) == (0.0, 0.0)


def test_pose_sample_moments():
    rng = np.random.default_rng(123)
    az, el = sample_pose(FFHQ_POSES, rng, size=100_000)
    assert abs(np.std(az) / 0.3 - 1) < 0.02
    assert abs(np.std(el) / 0.15 - 1) < 0.02


def test_side_view_angles():
    assert abs(side_view_angle(FFHQ_POSES) - 0.45) < 1e-15
    assert abs(side_view_angle(AFHQ_POSES) - 0.225) < 1e-15
    assert pose_preset("FFHQ") is FFHQ_POSES
    with pytest.raises(ParameterError):
        pose_preset("celeba")


def test_negative_std_rejected():
    with pytest.raises(ParameterError):
        PoseDistribution(-0.1, 0.1)


def test_camera_pose_defaults_match_dataset_constants():
    cam = CameraPose()
    assert (cam.fov_deg, cam.near, cam.far) == (12.0, 0.88, 1.12)
