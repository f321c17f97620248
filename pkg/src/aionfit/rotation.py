"""Axis-angle rotation utilities with stable behavior near zero angle."""

from __future__ import annotations

import numpy as np

# Below this angle the closed forms are replaced by their series expansions,
# which avoids dividing by a vanishing angle.
SMALL_ANGLE = 1e-8


def skew(v: np.ndarray) -> np.ndarray:
    """Cross-product matrix of a 3-vector."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def axis_angle_to_matrix(aa: np.ndarray) -> np.ndarray:
    """Rodrigues formula, series-expanded below SMALL_ANGLE.

    Returns a proper rotation (R R^T = I, det R = +1) for any finite input.
    """
    aa = np.asarray(aa, dtype=float)
    if aa.shape != (3,):
        raise ValueError(f"axis-angle must be a 3-vector, got shape {aa.shape}")
    if not np.all(np.isfinite(aa)):
        raise ValueError("axis-angle must be finite")
    theta2 = float(aa @ aa)
    theta = np.sqrt(theta2)
    if theta < SMALL_ANGLE:
        a = 1.0 - theta2 / 6.0
        b = 0.5 - theta2 / 24.0
    else:
        a = np.sin(theta) / theta
        b = (1.0 - np.cos(theta)) / theta2
    k = skew(aa)
    return np.eye(3) + a * k + b * (k @ k)


def matrix_to_axis_angle(rot: np.ndarray) -> np.ndarray:
    """Inverse of the Rodrigues map, returning the representative with angle in [0, pi].

    Uses the quaternion route, which is stable for all rotation angles
    including those near pi.
    """
    rot = np.asarray(rot, dtype=float)
    tr = rot[0, 0] + rot[1, 1] + rot[2, 2]
    # Shepperd's method: branch on the largest of (trace, diagonal entries).
    if tr > max(rot[0, 0], rot[1, 1], rot[2, 2]):
        w = 0.5 * np.sqrt(max(1.0 + tr, 0.0))
        f = 0.25 / w
        q = np.array(
            [
                w,
                f * (rot[2, 1] - rot[1, 2]),
                f * (rot[0, 2] - rot[2, 0]),
                f * (rot[1, 0] - rot[0, 1]),
            ]
        )
    else:
        i = int(np.argmax([rot[0, 0], rot[1, 1], rot[2, 2]]))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(max(rot[i, i] - rot[j, j] - rot[k, k] + 1.0, 0.0))
        f = 0.5 / s
        q = np.empty(4)
        q[0] = f * (rot[k, j] - rot[j, k])
        q[1 + i] = 0.5 * s
        q[1 + j] = f * (rot[j, i] + rot[i, j])
        q[1 + k] = f * (rot[k, i] + rot[i, k])
    if q[0] < 0.0:
        q = -q
    vec_norm = float(np.linalg.norm(q[1:]))
    if vec_norm < 1e-16:
        return np.zeros(3)
    angle = 2.0 * np.arctan2(vec_norm, q[0])
    return (angle / vec_norm) * q[1:]


def canonicalize_axis_angle(aa: np.ndarray) -> np.ndarray:
    """Map any axis-angle to the equivalent representative with magnitude <= pi."""
    aa = np.asarray(aa, dtype=float)
    theta = float(np.linalg.norm(aa))
    if theta <= np.pi:
        return aa.copy()
    reduced = np.fmod(theta, 2.0 * np.pi)
    if reduced > np.pi:
        reduced -= 2.0 * np.pi
    return aa * (reduced / theta)


def rotation_gradient(aa: np.ndarray, bar_rot: np.ndarray) -> np.ndarray:
    """Adjoint of axis_angle_to_matrix.

    Given the cotangent ``bar_rot`` (same shape as the rotation matrix),
    returns d<bar_rot, R(aa)>/d aa. Uses the closed-form derivative of the
    exponential map; below SMALL_ANGLE the limit dR/da_i = skew(e_i) is exact
    to first order.
    """
    aa = np.asarray(aa, dtype=float)
    theta2 = float(aa @ aa)
    if theta2 < SMALL_ANGLE * SMALL_ANGLE:
        return np.array(
            [
                bar_rot[2, 1] - bar_rot[1, 2],
                bar_rot[0, 2] - bar_rot[2, 0],
                bar_rot[1, 0] - bar_rot[0, 1],
            ]
        )
    rot = axis_angle_to_matrix(aa)
    k = skew(aa)
    imr = np.eye(3) - rot
    grad = np.empty(3)
    for i in range(3):
        # d R / d aa_i = (aa_i * K + skew(aa x (I - R) e_i)) / theta^2 @ R
        d = (aa[i] * k + skew(np.cross(aa, imr[:, i]))) @ rot / theta2
        grad[i] = float(np.sum(bar_rot * d))
    return grad


def is_rotation(rot: np.ndarray, tol: float = 1e-8) -> bool:
    """True when rot is orthonormal with determinant +1 within tol."""
    rot = np.asarray(rot, dtype=float)
    if rot.shape != (3, 3) or not np.all(np.isfinite(rot)):
        return False
    if not np.allclose(rot @ rot.T, np.eye(3), atol=tol, rtol=0.0):
        return False
    return bool(abs(np.linalg.det(rot) - 1.0) <= max(tol, 1e-10))
