"""Perspective projection and world/camera rigid transforms."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BehindCameraError, InputError
from .rotation import axis_angle_to_matrix, is_rotation, matrix_to_axis_angle

# Points with camera-frame depth at or below this are treated as behind the camera.
EPS_DEPTH = 1e-6


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise InputError("focal lengths must be positive")

    @property
    def matrix(self) -> np.ndarray:
        """The 2x3 projection rows [[fx, 0, cx], [0, fy, cy]]."""
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy]])


@dataclass(frozen=True)
class CameraPose:
    """World-to-camera rigid transform for one frame."""

    rot: np.ndarray  # (3, 3)
    trans: np.ndarray  # (3,)

    def __post_init__(self):
        object.__setattr__(self, "rot", np.asarray(self.rot, dtype=float).reshape(3, 3))
        object.__setattr__(self, "trans", np.asarray(self.trans, dtype=float).reshape(3))
        if not is_rotation(self.rot, tol=1e-8):
            raise InputError("camera rotation is not a proper rotation within 1e-8")
        if not np.all(np.isfinite(self.trans)):
            raise InputError("camera translation must be finite")

    @classmethod
    def identity(cls) -> "CameraPose":
        return cls(np.eye(3), np.zeros(3))


@dataclass(frozen=True)
class CameraTrack:
    """Per-frame poses with shared intrinsics and a global translation scale."""

    poses: tuple[CameraPose, ...]
    intrinsics: CameraIntrinsics
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "poses", tuple(self.poses))
        if len(self.poses) < 1:
            raise InputError("camera track needs at least one frame")
        if not self.scale > 0:
            raise InputError("camera scale must be positive")

    def __len__(self) -> int:
        return len(self.poses)

    @classmethod
    def static_identity(cls, num_frames: int, intrinsics: CameraIntrinsics) -> "CameraTrack":
        return cls((CameraPose.identity(),) * num_frames, intrinsics, 1.0)

    def is_static_identity(self) -> bool:
        """True when every pose is the identity; the single-image path."""
        return all(
            np.array_equal(p.rot, np.eye(3)) and not p.trans.any() for p in self.poses
        )


def project(intrinsics: CameraIntrinsics, point: np.ndarray) -> np.ndarray:
    """Perspective projection of a camera-frame point to pixels."""
    point = np.asarray(point, dtype=float).reshape(3)
    if point[2] <= EPS_DEPTH:
        raise BehindCameraError(f"point depth {point[2]:.3g} is at or behind the camera")
    inv_z = 1.0 / point[2]
    return np.array(
        [
            intrinsics.fx * point[0] * inv_z + intrinsics.cx,
            intrinsics.fy * point[1] * inv_z + intrinsics.cy,
        ]
    )


def project_with_jacobian(
    intrinsics: CameraIntrinsics, point: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Projection plus its 2x3 Jacobian with respect to the camera-frame point."""
    point = np.asarray(point, dtype=float).reshape(3)
    if point[2] <= EPS_DEPTH:
        raise BehindCameraError(f"point depth {point[2]:.3g} is at or behind the camera")
    x, y, z = point
    inv_z = 1.0 / z
    uv = np.array([intrinsics.fx * x * inv_z + intrinsics.cx, intrinsics.fy * y * inv_z + intrinsics.cy])
    jac = np.array(
        [
            [intrinsics.fx * inv_z, 0.0, -intrinsics.fx * x * inv_z * inv_z],
            [0.0, intrinsics.fy * inv_z, -intrinsics.fy * y * inv_z * inv_z],
        ]
    )
    return uv, jac


def world_point_to_camera(pose: CameraPose, scale: float, point_world: np.ndarray) -> np.ndarray:
    """Apply the scaled world-to-camera transform: R p + scale * T."""
    point_world = np.asarray(point_world, dtype=float).reshape(3)
    return pose.rot @ point_world + scale * pose.trans


def camera_point_to_world(pose: CameraPose, scale: float, point_cam: np.ndarray) -> np.ndarray:
    """Inverse of world_point_to_camera."""
    point_cam = np.asarray(point_cam, dtype=float).reshape(3)
    return pose.rot.T @ (point_cam - scale * pose.trans)


def init_world_from_camera(
    pose: CameraPose, scale: float, orient_cam: np.ndarray, trans_cam: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Lift camera-frame orientation and translation estimates into the world frame.

    The orientation is composed in matrix form and converted back to the
    axis-angle representative with angle in [0, pi].
    """
    orient_cam = np.asarray(orient_cam, dtype=float).reshape(3)
    rot_world = pose.rot.T @ axis_angle_to_matrix(orient_cam)
    orient_world = matrix_to_axis_angle(rot_world)
    trans_world = camera_point_to_world(pose, scale, trans_cam)
    return orient_world, trans_world
