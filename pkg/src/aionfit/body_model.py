"""Dual-template parametric body model: blendshapes, forward kinematics, skinning.

The rest template is a linear blend of an adult and a child template; the
blend weight rides along as an eleventh shape coefficient. Joints come from a
linear regressor over rest vertices and are posed by rigid transforms chained
along the kinematic tree; vertices follow by linear blend skinning.

Root convention: the global orientation rotates the whole body about the
world origin, so the posed root joint equals R(global_orient) @ rest_root.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError
from .rotation import axis_angle_to_matrix, rotation_gradient

_UP_AXES = {"x": 0, "y": 1, "z": 2}


@dataclass(frozen=True)
class BodyModelData:
    """Immutable model definition; safe to share across threads.

    ``parents[0]`` must be -1 (the root sentinel); every other joint must
    reach the root through its parent chain. Rows of the joint regressor and
    of the skinning weights must each sum to one.
    """

    name: str
    up_axis: str
    joint_names: tuple[str, ...]
    parents: np.ndarray  # (K+1,) int
    adult_template: np.ndarray  # (V, 3) meters
    child_template: np.ndarray  # (V, 3) meters
    shape_blendshapes: np.ndarray  # (V, 3, 10)
    joint_regressor: np.ndarray  # (K+1, V)
    skinning_weights: np.ndarray  # (V, K+1)
    faces: np.ndarray  # (F, 3) int
    pose_blendshapes: np.ndarray | None = None  # (V, 3, 9K)

    # Derived, filled in by __post_init__.
    _topo_order: np.ndarray = field(init=False, repr=False, compare=False)
    _rest_joints_base: np.ndarray = field(init=False, repr=False, compare=False)
    _rest_joints_delta: np.ndarray = field(init=False, repr=False, compare=False)
    _rest_joints_shape_dirs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        conv = {
            "parents": np.asarray(self.parents, dtype=int),
            "adult_template": np.asarray(self.adult_template, dtype=float),
            "child_template": np.asarray(self.child_template, dtype=float),
            "shape_blendshapes": np.asarray(self.shape_blendshapes, dtype=float),
            "joint_regressor": np.asarray(self.joint_regressor, dtype=float),
            "skinning_weights": np.asarray(self.skinning_weights, dtype=float),
            "faces": np.asarray(self.faces, dtype=int).reshape(-1, 3),
            "joint_names": tuple(self.joint_names),
        }
        if self.pose_blendshapes is not None:
            conv["pose_blendshapes"] = np.asarray(self.pose_blendshapes, dtype=float)
        for key, value in conv.items():
            object.__setattr__(self, key, value)
        self._validate()
        # Joint rest positions are linear in (kid_factor, betas); precompute
        # the regressed pieces so the fitter never touches vertex arrays.
        object.__setattr__(self, "_topo_order", self._topological_order())
        object.__setattr__(self, "_rest_joints_base", self.joint_regressor @ self.adult_template)
        object.__setattr__(
            self,
            "_rest_joints_delta",
            self.joint_regressor @ (self.child_template - self.adult_template),
        )
        object.__setattr__(
            self,
            "_rest_joints_shape_dirs",
            np.einsum("jv,vdk->jdk", self.joint_regressor, self.shape_blendshapes),
        )

    # ------------------------------------------------------------------
    # Structure
    # ------------------------------------------------------------------

    @property
    def vertex_count(self) -> int:
        return self.adult_template.shape[0]

    @property
    def joint_count(self) -> int:
        """Body joints excluding the root."""
        return len(self.parents) - 1

    @property
    def num_joints(self) -> int:
        """All joints including the root."""
        return len(self.parents)

    @property
    def up_index(self) -> int:
        return _UP_AXES[self.up_axis]

    def _validate(self) -> None:
        v = self.adult_template.shape[0]
        kj1 = len(self.parents)
        if self.up_axis not in _UP_AXES:
            raise ModelError(f"unknown up axis {self.up_axis!r}")
        if self.adult_template.shape != (v, 3) or self.child_template.shape != (v, 3):
            raise ModelError("adult and child templates must both be (V, 3)")
        if self.shape_blendshapes.shape != (v, 3, 10):
            raise ModelError(
                f"shape blendshapes must be (V, 3, 10), got {self.shape_blendshapes.shape}"
            )
        if self.joint_regressor.shape != (kj1, v):
            raise ModelError(
                f"joint regressor must be ({kj1}, {v}), got {self.joint_regressor.shape}"
            )
        if self.skinning_weights.shape != (v, kj1):
            raise ModelError(
                f"skinning weights must be ({v}, {kj1}), got {self.skinning_weights.shape}"
            )
        if len(self.joint_names) != kj1:
            raise ModelError("joint_names length must match the joint count")
        if self.pose_blendshapes is not None:
            expected = (v, 3, 9 * (kj1 - 1))
            if self.pose_blendshapes.shape != expected:
                raise ModelError(f"pose blendshapes must be {expected}")
        if np.any(self.joint_regressor < -1e-12):
            raise ModelError("joint regressor must be nonnegative")
        if np.any(self.skinning_weights < -1e-12):
            raise ModelError("skinning weights must be nonnegative")
        if not np.allclose(self.joint_regressor.sum(axis=1), 1.0, atol=1e-6, rtol=0.0):
            raise ModelError("each joint regressor row must sum to 1 within 1e-6")
        if not np.allclose(self.skinning_weights.sum(axis=1), 1.0, atol=1e-6, rtol=0.0):
            raise ModelError("each skinning weight row must sum to 1 within 1e-6")
        if self.parents[0] != -1:
            raise ModelError("parents[0] must be the root sentinel -1")
        for j in range(1, kj1):
            p = int(self.parents[j])
            if not 0 <= p < kj1 or p == j:
                raise ModelError(f"joint {j} has invalid parent {p}")
        self._topological_order()  # raises on unreachable joints / cycles
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= v):
            raise ModelError("face indices out of range")

    def _topological_order(self) -> np.ndarray:
        kj1 = len(self.parents)
        children: list[list[int]] = [[] for _ in range(kj1)]
        for j in range(1, kj1):
            children[int(self.parents[j])].append(j)
        order, stack = [], [0]
        while stack:
            j = stack.pop()
            order.append(j)
            stack.extend(reversed(children[j]))
        if len(order) != kj1:
            raise ModelError("kinematic tree has joints unreachable from the root")
        return np.asarray(order, dtype=int)


@dataclass
class ShapeParams:
    """Shape coefficients plus the adult-to-child template blend weight.

    ``kid_factor`` is clamped into [0, 1] on construction; 0 selects the
    adult template, 1 the child template. It is carried as the eleventh
    entry of the stacked shape vector.
    """

    betas: np.ndarray
    kid_factor: float = 0.0

    def __post_init__(self):
        self.betas = np.asarray(self.betas, dtype=float).reshape(-1)
        if self.betas.shape != (10,):
            raise ValueError(f"betas must have 10 entries, got {self.betas.shape}")
        if not np.all(np.isfinite(self.betas)) or not np.isfinite(self.kid_factor):
            raise ValueError("shape parameters must be finite")
        self.kid_factor = float(min(1.0, max(0.0, self.kid_factor)))

    def as_vector(self) -> np.ndarray:
        """The 11-entry vector with the blend weight stacked last."""
        return np.concatenate([self.betas, [self.kid_factor]])


@dataclass
class PoseParams:
    """Axis-angle global orientation plus per-joint body rotations."""

    global_orient: np.ndarray  # (3,)
    body_pose: np.ndarray  # (K, 3)

    def __post_init__(self):
        self.global_orient = np.asarray(self.global_orient, dtype=float).reshape(3)
        self.body_pose = np.asarray(self.body_pose, dtype=float)
        if self.body_pose.ndim != 2 or self.body_pose.shape[1] != 3:
            raise ValueError("body_pose must be (K, 3)")
        if not np.all(np.isfinite(self.global_orient)) or not np.all(np.isfinite(self.body_pose)):
            raise ValueError("pose parameters must be finite")

    @classmethod
    def identity(cls, joint_count: int) -> "PoseParams":
        return cls(np.zeros(3), np.zeros((joint_count, 3)))


@dataclass
class MeshResult:
    """Posed vertices and joints in the body-local frame (before translation)."""

    vertices: np.ndarray  # (V, 3)
    joints: np.ndarray  # (K+1, 3)


# ----------------------------------------------------------------------
# Rest geometry
# ----------------------------------------------------------------------


def interpolate_template(model: BodyModelData, kid_factor: float) -> np.ndarray:
    """Blend of the two templates; endpoints reproduce the stored arrays exactly."""
    if not 0.0 <= kid_factor <= 1.0:
        raise ValueError(f"kid_factor must lie in [0, 1], got {kid_factor}")
    if kid_factor == 0.0:
        return model.adult_template.copy()
    if kid_factor == 1.0:
        return model.child_template.copy()
    return kid_factor * model.child_template + (1.0 - kid_factor) * model.adult_template


def shape_offset(model: BodyModelData, betas: np.ndarray) -> np.ndarray:
    """Per-vertex displacement produced by the shape coefficients."""
    betas = np.asarray(betas, dtype=float).reshape(-1)
    if betas.shape[0] != model.shape_blendshapes.shape[2]:
        raise ValueError("betas length does not match the shape blendshapes")
    if not np.all(np.isfinite(betas)):
        raise ValueError("betas must be finite")
    return model.shape_blendshapes @ betas


def rest_vertices(model: BodyModelData, shape: ShapeParams) -> np.ndarray:
    return interpolate_template(model, shape.kid_factor) + shape_offset(model, shape.betas)


def rest_joints(model: BodyModelData, kid_factor: float, betas: np.ndarray) -> np.ndarray:
    """Regressed joint positions of the unposed body; linear in all inputs."""
    return (
        model._rest_joints_base
        + kid_factor * model._rest_joints_delta
        + model._rest_joints_shape_dirs @ np.asarray(betas, dtype=float)
    )


def rest_joints_backward(
    model: BodyModelData, bar_joints: np.ndarray
) -> tuple[np.ndarray, float]:
    """Adjoint of rest_joints with respect to (betas, kid_factor)."""
    bar_betas = np.einsum("jd,jdk->k", bar_joints, model._rest_joints_shape_dirs)
    bar_kid = float(np.sum(bar_joints * model._rest_joints_delta))
    return bar_betas, bar_kid


# ----------------------------------------------------------------------
# Forward kinematics on joints (with hand-written reverse mode)
# ----------------------------------------------------------------------


@dataclass
class FkCache:
    """Intermediates retained by fk_joints for the backward pass."""

    local_rot: np.ndarray  # (K+1, 3, 3)
    global_rot: np.ndarray  # (K+1, 3, 3)
    local_off: np.ndarray  # (K+1, 3) bone offsets in the rest pose
    skin_trans: np.ndarray  # (K+1, 3) translation part of the skinning transforms
    global_orient: np.ndarray
    body_pose: np.ndarray


def fk_joints(
    model: BodyModelData,
    joints_rest: np.ndarray,
    global_orient: np.ndarray,
    body_pose: np.ndarray,
) -> tuple[np.ndarray, FkCache]:
    """Pose the rest joints along the kinematic tree.

    Returns the posed joints (root rotated about the origin) and the cache
    needed by fk_joints_backward. The recursion carries the skinning
    translation (posed minus rotated rest joint), which keeps the identity
    pose bit-exact instead of accumulating telescoped rounding.
    """
    kj1 = model.num_joints
    parents = model.parents
    local_rot = np.empty((kj1, 3, 3))
    local_rot[0] = axis_angle_to_matrix(global_orient)
    for j in range(1, kj1):
        local_rot[j] = axis_angle_to_matrix(body_pose[j - 1])
    local_off = joints_rest.copy()
    local_off[1:] -= joints_rest[parents[1:]]

    global_rot = np.empty_like(local_rot)
    posed = np.empty((kj1, 3))
    skin_trans = np.empty((kj1, 3))
    global_rot[0] = local_rot[0]
    posed[0] = local_rot[0] @ joints_rest[0]
    skin_trans[0] = posed[0] - global_rot[0] @ joints_rest[0]
    for j in model._topo_order[1:]:
        p = parents[j]
        global_rot[j] = global_rot[p] @ local_rot[j]
        posed[j] = global_rot[p] @ joints_rest[j] + skin_trans[p]
        skin_trans[j] = posed[j] - global_rot[j] @ joints_rest[j]
    cache = FkCache(
        local_rot, global_rot, local_off, skin_trans, np.asarray(global_orient), body_pose
    )
    return posed, cache


def fk_joints_backward(
    model: BodyModelData, cache: FkCache, bar_joints: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Adjoint of fk_joints: cotangents for (global_orient, body_pose, rest joints)."""
    kj1 = model.num_joints
    parents = model.parents
    bar_grot = np.zeros((kj1, 3, 3))
    bar_pos = bar_joints.copy()
    bar_lrot = np.empty((kj1, 3, 3))
    bar_loff = np.empty((kj1, 3))
    for j in model._topo_order[:0:-1]:
        p = parents[j]
        bar_grot[p] += bar_grot[j] @ cache.local_rot[j].T
        bar_grot[p] += np.outer(bar_pos[j], cache.local_off[j])
        bar_pos[p] += bar_pos[j]
        parent_rot_t = cache.global_rot[p].T
        bar_lrot[j] = parent_rot_t @ bar_grot[j]
        bar_loff[j] = parent_rot_t @ bar_pos[j]
    bar_lrot[0] = bar_grot[0] + np.outer(bar_pos[0], cache.local_off[0])
    bar_loff[0] = cache.local_rot[0].T @ bar_pos[0]

    bar_rest = np.zeros((kj1, 3))
    bar_rest[0] = bar_loff[0]
    for j in range(1, kj1):
        bar_rest[j] += bar_loff[j]
        bar_rest[parents[j]] -= bar_loff[j]

    bar_orient = rotation_gradient(cache.global_orient, bar_lrot[0])
    bar_pose = np.empty_like(cache.body_pose)
    for j in range(1, kj1):
        bar_pose[j - 1] = rotation_gradient(cache.body_pose[j - 1], bar_lrot[j])
    return bar_orient, bar_pose, bar_rest


# ----------------------------------------------------------------------
# Full mesh forward
# ----------------------------------------------------------------------


def forward(model: BodyModelData, shape: ShapeParams, pose: PoseParams) -> MeshResult:
    """Generate posed vertices and joints for one parameter set.

    Deterministic and pure. With identity pose, zero betas and no pose
    blendshapes the vertices equal the interpolated template.
    """
    if pose.body_pose.shape[0] != model.joint_count:
        raise ModelError(
            f"body_pose has {pose.body_pose.shape[0]} joints, model has {model.joint_count}"
        )
    v_shaped = rest_vertices(model, shape)
    joints_rest = model.joint_regressor @ v_shaped
    posed_joints, cache = fk_joints(model, joints_rest, pose.global_orient, pose.body_pose)

    v_posed = v_shaped
    if model.pose_blendshapes is not None:
        feats = (cache.local_rot[1:] - np.eye(3)).reshape(-1)
        v_posed = v_shaped + model.pose_blendshapes @ feats

    vertices = np.zeros_like(v_posed)
    weights = model.skinning_weights
    for j in range(model.num_joints):
        vertices += weights[:, j : j + 1] * (
            v_posed @ cache.global_rot[j].T + cache.skin_trans[j]
        )
    return MeshResult(vertices=vertices, joints=posed_joints)


def world_joints(mesh: MeshResult, trans: np.ndarray) -> np.ndarray:
    """Body-local joints shifted by the root translation."""
    trans = np.asarray(trans, dtype=float).reshape(3)
    if not np.all(np.isfinite(trans)):
        raise ValueError("translation must be finite")
    return mesh.joints + trans


def neutral_height(model: BodyModelData, shape: ShapeParams) -> float:
    """Extent of the zero-pose mesh along the model's up axis, in meters."""
    coords = rest_vertices(model, shape)[:, model.up_index]
    return float(coords.max() - coords.min())
