"""Shared test utilities: independent oracles and toy problem builders.

The oracles here are deliberately written as plain per-element loops and
4x4 homogeneous transforms, independent of the library's vectorized paths.
"""

from __future__ import annotations

import numpy as np

from aionfit.body_model import BodyModelData, PoseParams, ShapeParams
from aionfit.camera import CameraIntrinsics, CameraPose, CameraTrack
from aionfit.keypoints import JointMap, KeypointFrame, KeypointTrack
from aionfit.rotation import axis_angle_to_matrix
from aionfit.state import PersonState


def _hom(rot: np.ndarray, trans: np.ndarray) -> np.ndarray:
    mat = np.eye(4)
    mat[:3, :3] = rot
    mat[:3, 3] = trans
    return mat


def naive_forward(model: BodyModelData, shape: ShapeParams, pose: PoseParams):
    """Loop-based mesh generation used as the reference for forward().

    Returns (vertices, joints).
    """
    nverts, njoints = model.vertex_count, model.num_joints
    if shape.kid_factor == 0.0:
        interp = model.adult_template.copy()
    elif shape.kid_factor == 1.0:
        interp = model.child_template.copy()
    else:
        interp = (
            shape.kid_factor * model.child_template
            + (1.0 - shape.kid_factor) * model.adult_template
        )
    v_shaped = interp.copy()
    for v in range(nverts):
        for d in range(3):
            for k in range(10):
                v_shaped[v, d] += model.shape_blendshapes[v, d, k] * shape.betas[k]
    joints_rest = np.zeros((njoints, 3))
    for j in range(njoints):
        for v in range(nverts):
            joints_rest[j] += model.joint_regressor[j, v] * v_shaped[v]

    transforms: list = [None] * njoints
    root_rot = axis_angle_to_matrix(pose.global_orient)
    transforms[0] = _hom(root_rot, np.zeros(3)) @ _hom(np.eye(3), joints_rest[0])
    for j in list(model._topo_order)[1:]:
        parent = model.parents[j]
        local = _hom(
            axis_angle_to_matrix(pose.body_pose[j - 1]), joints_rest[j] - joints_rest[parent]
        )
        transforms[j] = transforms[parent] @ local
    joints = np.array([transforms[j][:3, 3] for j in range(njoints)])

    v_posed = v_shaped
    if model.pose_blendshapes is not None:
        feats = np.concatenate(
            [
                (axis_angle_to_matrix(pose.body_pose[j - 1]) - np.eye(3)).reshape(-1)
                for j in range(1, njoints)
            ]
        )
        v_posed = v_shaped + model.pose_blendshapes @ feats

    vertices = np.zeros((nverts, 3))
    for v in range(nverts):
        for j in range(njoints):
            skin = transforms[j] @ _hom(np.eye(3), -joints_rest[j])
            homog = skin @ np.append(v_posed[v], 1.0)
            vertices[v] += model.skinning_weights[v, j] * homog[:3]
    return vertices, joints


def finite_difference_gradient(fun, x: np.ndarray, h_rel: float = 1e-5) -> np.ndarray:
    """Central differences of a (value, gradient) callable; ignores its gradient."""
    grad = np.zeros_like(x)
    for i in range(x.shape[0]):
        h = h_rel * max(1.0, abs(x[i]))
        xp = x.copy()
        xp[i] += h
        xm = x.copy()
        xm[i] -= h
        grad[i] = (fun(xp)[0] - fun(xm)[0]) / (2.0 * h)
    return grad


def relative_gradient_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Componentwise relative error with a floor for near-zero entries."""
    return float(np.max(np.abs(analytic - numeric) / np.maximum(1e-3, np.abs(numeric))))


def make_toy_chain(seed: int, joint_count: int = 4, extra_vertices: int = 6) -> BodyModelData:
    """Small random chain model (V <= 50, K_j <= 4) for kernel and gradient tests."""
    rng = np.random.default_rng(seed)
    kj1 = joint_count + 1
    parents = np.array([-1] + list(range(kj1 - 1)), dtype=int)
    adult = np.zeros((kj1, 3))
    child = np.zeros((kj1, 3))
    adult[0] = rng.normal(scale=0.1, size=3)
    child[0] = adult[0] * 0.5
    for j in range(1, kj1):
        step = np.array([0.0, 0.3, 0.0]) + rng.normal(scale=0.05, size=3)
        adult[j] = adult[j - 1] + step
        child[j] = child[j - 1] + step * rng.uniform(0.3, 0.7)

    paired = np.stack([adult + [0.0, 0.0, 0.04], adult - [0.0, 0.0, 0.04]], axis=1)
    adult_v = paired.reshape(-1, 3)
    paired_c = np.stack([child + [0.0, 0.0, 0.03], child - [0.0, 0.0, 0.03]], axis=1)
    child_v = paired_c.reshape(-1, 3)
    extra_a = rng.normal(scale=0.2, size=(extra_vertices, 3)) + adult.mean(axis=0)
    extra_c = 0.5 * extra_a
    adult_v = np.concatenate([adult_v, extra_a])
    child_v = np.concatenate([child_v, extra_c])
    nverts = adult_v.shape[0]

    regressor = np.zeros((kj1, nverts))
    for j in range(kj1):
        regressor[j, 2 * j] = 0.5
        regressor[j, 2 * j + 1] = 0.5
    weights = rng.uniform(0.01, 1.0, size=(nverts, kj1))
    weights /= weights.sum(axis=1, keepdims=True)
    blendshapes = 0.02 * rng.standard_normal((nverts, 3, 10))
    faces = np.array([[0, 1, 2], [1, 2, 3]], dtype=int)
    return BodyModelData(
        name=f"toy-chain-{seed}",
        up_axis="y",
        joint_names=tuple(f"j{j}" for j in range(kj1)),
        parents=parents,
        adult_template=adult_v,
        child_template=child_v,
        shape_blendshapes=blendshapes,
        joint_regressor=regressor,
        skinning_weights=weights,
        faces=faces,
    )


def random_fit_problem(seed: int, frames: int = 3, tracks: int = 2):
    """Randomized small fitting problem with active residuals for gradient checks.

    Returns (model, states, cams, detections, jmap). Detections include some
    confidences below the floor and joints are viewed from a moving camera,
    so every energy term and skip rule participates.
    """
    rng = np.random.default_rng(seed)
    model = make_toy_chain(seed, joint_count=4)
    kj1 = model.num_joints
    intr = CameraIntrinsics(fx=800.0, fy=820.0, cx=400.0, cy=300.0)
    poses = []
    for t in range(frames):
        angle = 0.15 * t + rng.normal(scale=0.02)
        eye = np.array([2.5 * np.sin(angle), 0.4, -2.5 * np.cos(angle)])
        forward_dir = -eye / np.linalg.norm(eye)
        up = np.array([0.0, 1.0, 0.0])
        right = np.cross(forward_dir, up)
        right /= np.linalg.norm(right)
        down = np.cross(forward_dir, right)
        rot = np.stack([right, down, forward_dir])
        poses.append(CameraPose(rot, -rot @ eye))
    cams = CameraTrack(tuple(poses), intr, scale=float(rng.uniform(0.8, 1.2)))

    mapped = [0, 1, 2, 3]  # model joints observed by keypoints 0..3
    jmap = JointMap(tuple(mapped), tuple(range(len(mapped))))
    states, detections = [], []
    for ti in range(tracks):
        state = PersonState.zeros(f"t{ti}", np.arange(frames), model.joint_count)
        state.global_orient = rng.normal(scale=0.4, size=(frames, 3))
        state.body_pose = rng.normal(scale=0.3, size=(frames, model.joint_count, 3))
        state.trans = rng.normal(scale=0.2, size=(frames, 3)) + [ti * 0.6 - 0.3, 0.0, 0.0]
        state.betas = rng.normal(scale=0.4, size=10)
        state.kid_factor = float(rng.uniform(0.25, 0.75))
        frames_list = []
        for t in range(frames):
            points = rng.uniform(0, 800, size=(len(mapped), 2))
            confidences = rng.uniform(0, 1, size=len(mapped))
            confidences[rng.integers(0, len(mapped))] = 0.01  # below the floor
            frames_list.append(
                KeypointFrame(frame_index=t, points=points, confidences=confidences)
            )
        states.append(state)
        detections.append(KeypointTrack(track_id=f"t{ti}", frames=frames_list))
    return model, states, cams, detections, jmap


def parse_obj(text: str):
    """Strict reference OBJ parser for the export tests."""
    vertices, faces = [], []
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "v":
            assert len(parts) == 4, f"line {line_no}: vertex needs 3 coordinates"
            vertices.append([float(p) for p in parts[1:]])
        elif parts[0] == "f":
            assert len(parts) == 4, f"line {line_no}: only triangles expected"
            indices = [int(p.split("/")[0]) for p in parts[1:]]
            assert all(i >= 1 for i in indices), f"line {line_no}: OBJ faces are 1-indexed"
            faces.append([i - 1 for i in indices])
        else:
            raise AssertionError(f"line {line_no}: unexpected record {parts[0]!r}")
    verts = np.asarray(vertices, dtype=float)
    face_arr = np.asarray(faces, dtype=int)
    if face_arr.size:
        assert face_arr.max() < len(verts), "face references a missing vertex"
    return verts, face_arr
