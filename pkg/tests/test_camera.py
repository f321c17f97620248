import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aionfit.camera import (
    CameraIntrinsics,
    CameraPose,
    CameraTrack,
    camera_point_to_world,
    init_world_from_camera,
    project,
    project_with_jacobian,
    world_point_to_camera,
)
from aionfit.errors import BehindCameraError, InputError
from aionfit.rotation import axis_angle_to_matrix

INTR = CameraIntrinsics(fx=1000.0, fy=1000.0, cx=500.0, cy=500.0)


def random_pose(rng) -> CameraPose:
    return CameraPose(axis_angle_to_matrix(rng.normal(scale=1.0, size=3)), rng.normal(size=3))


def test_on_axis_point():
    assert np.allclose(project(INTR, [0.0, 0.0, 2.0]), [500.0, 500.0])


def test_projection_arithmetic():
    assert np.allclose(project(INTR, [2.0, 4.0, 2.0]), [1500.0, 2500.0])


def test_projective_homogeneity_factor_three():
    p = np.array([0.3, -0.2, 1.5])
    assert np.allclose(project(INTR, 3.0 * p), project(INTR, p), atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(
    x=st.floats(-5, 5),
    y=st.floats(-5, 5),
    z=st.floats(0.01, 50),
    lam=st.floats(0.01, 100),
)
def test_projective_homogeneity_property(x, y, z, lam):
    p = np.array([x, y, z])
    assert np.allclose(project(INTR, lam * p), project(INTR, p), rtol=1e-9, atol=1e-9)


def test_behind_camera_raises():
    with pytest.raises(BehindCameraError):
        project(INTR, [0.0, 0.0, 0.0])
    with pytest.raises(BehindCameraError):
        project(INTR, [0.0, 0.0, -1.0])
    with pytest.raises(BehindCameraError):
        project(INTR, [0.0, 0.0, 5e-7])  # below the depth epsilon


def test_projection_jacobian_matches_finite_differences():
    rng = np.random.default_rng(0)
    for _ in range(50):
        p = rng.normal(size=3)
        p[2] = rng.uniform(0.5, 5.0)
        _, jac = project_with_jacobian(INTR, p)
        for i in range(3):
            e = np.zeros(3)
            e[i] = 1e-6
            numeric = (project(INTR, p + e) - project(INTR, p - e)) / 2e-6
            assert np.allclose(jac[:, i], numeric, rtol=1e-5, atol=1e-5)


def test_world_point_identity_and_translation():
    pose = CameraPose.identity()
    p = np.array([1.0, 2.0, 3.0])
    assert np.array_equal(world_point_to_camera(pose, 1.0, p), p)
    pose = CameraPose(np.eye(3), np.array([0.0, 0.0, 1.0]))
    assert np.allclose(world_point_to_camera(pose, 2.0, np.zeros(3)), [0.0, 0.0, 2.0])


def test_rigid_round_trip():
    rng = np.random.default_rng(1)
    for _ in range(100):
        pose = random_pose(rng)
        scale = rng.uniform(0.2, 3.0)
        p = rng.normal(size=3)
        q = world_point_to_camera(pose, scale, p)
        assert np.allclose(camera_point_to_world(pose, scale, q), p, atol=1e-10)


def test_init_world_identity_camera():
    pose = CameraPose.identity()
    orient = np.array([0.1, 0.2, 0.3])
    trans = np.array([1.0, -2.0, 0.5])
    orient_w, trans_w = init_world_from_camera(pose, 1.0, orient, trans)
    assert np.allclose(orient_w, orient, atol=1e-12)
    assert np.allclose(trans_w, trans, atol=1e-12)


def test_init_world_translation_example():
    pose = CameraPose(np.eye(3), np.array([1.0, 0.0, 0.0]))
    _, trans_w = init_world_from_camera(pose, 1.0, np.zeros(3), np.zeros(3))
    assert np.allclose(trans_w, [-1.0, 0.0, 0.0], atol=1e-15)


def test_init_world_round_trip():
    rng = np.random.default_rng(2)
    for _ in range(100):
        pose = random_pose(rng)
        scale = rng.uniform(0.3, 2.0)
        orient_c = rng.normal(scale=0.8, size=3)
        gamma_c = rng.normal(size=3)
        orient_w, gamma_w = init_world_from_camera(pose, scale, orient_c, gamma_c)
        assert np.linalg.norm(orient_w) <= np.pi + 1e-12
        # translations invert exactly
        assert np.allclose(world_point_to_camera(pose, scale, gamma_w), gamma_c, atol=1e-10)
        # orientations compose back to the camera-frame rotation
        recovered = pose.rot @ axis_angle_to_matrix(orient_w)
        assert np.allclose(recovered, axis_angle_to_matrix(orient_c), atol=1e-10)


def test_static_identity_detection():
    track = CameraTrack.static_identity(4, INTR)
    assert track.is_static_identity()
    rng = np.random.default_rng(3)
    moving = CameraTrack((CameraPose.identity(), random_pose(rng)), INTR)
    assert not moving.is_static_identity()


def test_track_validation():
    with pytest.raises(InputError):
        CameraTrack((), INTR)
    with pytest.raises(InputError):
        CameraTrack((CameraPose.identity(),), INTR, scale=0.0)
    with pytest.raises(InputError):
        CameraIntrinsics(fx=-1.0, fy=1.0, cx=0.0, cy=0.0)
    with pytest.raises(InputError):
        CameraPose(np.eye(3) * 1.1, np.zeros(3))


def test_intrinsics_matrix_rows():
    mat = INTR.matrix
    assert mat.shape == (2, 3)
    assert np.array_equal(mat, [[1000.0, 0.0, 500.0], [0.0, 1000.0, 500.0]])
