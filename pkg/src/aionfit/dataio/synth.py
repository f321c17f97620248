"""Synthetic scenario generation: toy humanoid models and rendered keypoint tracks.

Ground-truth bodies hold still in the world while the camera moves along a
configurable path, so the rendered 2D tracks carry real multi-view parallax
while the smoothness energy of the truth is exactly zero. All sampling is
driven by one seed and is bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..body_model import BodyModelData, fk_joints, rest_joints
from ..camera import EPS_DEPTH, CameraIntrinsics, CameraPose, CameraTrack
from ..errors import InputError, SynthError
from ..keypoints import COCO17, KeypointFrame, KeypointTrack, get_convention
from ..state import PersonState
from .formats import DetectionFile, NamedJointMap, ResultBundle, model_content_hash

# Toy humanoid joints: name, parent, adult (x, y), child (x, y). Mapped
# joints are named after the detection keypoint they observe, so the default
# joint map is the name intersection with the convention. The child template
# has infant proportions (large head and torso, short limbs), not a scaled
# adult: a uniform rescale cannot map one onto the other, which is what makes
# the blend weight observable from 2D projections alone.
_TOY_JOINTS = [
    ("pelvis", -1, (0.00, 1.00), (0.00, 0.340)),
    ("spine", 0, (0.00, 1.25), (0.00, 0.445)),
    ("neck", 1, (0.00, 1.48), (0.00, 0.550)),
    ("nose", 2, (0.00, 1.60), (0.00, 0.650)),
    ("left_shoulder", 2, (0.20, 1.44), (0.055, 0.530)),
    ("left_elbow", 4, (0.48, 1.42), (0.125, 0.525)),
    ("left_wrist", 5, (0.74, 1.40), (0.185, 0.520)),
    ("right_shoulder", 2, (-0.20, 1.44), (-0.055, 0.530)),
    ("right_elbow", 7, (-0.48, 1.42), (-0.125, 0.525)),
    ("right_wrist", 8, (-0.74, 1.40), (-0.185, 0.520)),
    ("left_hip", 0, (0.10, 0.97), (0.042, 0.330)),
    ("left_knee", 10, (0.12, 0.53), (0.050, 0.195)),
    ("left_ankle", 11, (0.13, 0.10), (0.055, 0.060)),
    ("right_hip", 0, (-0.10, 0.97), (-0.042, 0.330)),
    ("right_knee", 13, (-0.12, 0.53), (-0.050, 0.195)),
    ("right_ankle", 14, (-0.13, 0.10), (-0.055, 0.060)),
]

DEFAULT_INTRINSICS = CameraIntrinsics(fx=1000.0, fy=1000.0, cx=500.0, cy=500.0)


def make_toy_humanoid(name: str = "toy-humanoid", blendshape_scale: float = 0.01) -> BodyModelData:
    """A 16-joint dual-template humanoid with distinct adult and child proportions.

    Two vertices straddle each joint (so the regressor reproduces the joint
    positions exactly), plus a head-top vertex and two foot-sole vertices
    that define the standing height: 1.70 m adult, 0.80 m child.
    """
    names = [row[0] for row in _TOY_JOINTS]
    parents = np.array([row[1] for row in _TOY_JOINTS], dtype=int)
    adult_joints = np.array([[x, y, 0.0] for _, _, (x, y), _ in _TOY_JOINTS])
    child_joints = np.array([[x, y, 0.0] for _, _, _, (x, y) in _TOY_JOINTS])
    kj1 = len(names)

    side = np.array([0.0, 0.0, 0.03])
    adult_v = [adult_joints + side, adult_joints - side]
    child_v = [child_joints + side, child_joints - side]
    adult_extra = np.array([[0.0, 1.70, 0.0], [0.13, 0.0, 0.0], [-0.13, 0.0, 0.0]])
    child_extra = np.array([[0.0, 0.80, 0.0], [0.08, 0.0, 0.0], [-0.08, 0.0, 0.0]])
    adult_template = np.concatenate([np.stack(adult_v, axis=1).reshape(-1, 3), adult_extra])
    child_template = np.concatenate([np.stack(child_v, axis=1).reshape(-1, 3), child_extra])
    nverts = adult_template.shape[0]

    regressor = np.zeros((kj1, nverts))
    weights = np.zeros((nverts, kj1))
    for j in range(kj1):
        regressor[j, 2 * j] = 0.5
        regressor[j, 2 * j + 1] = 0.5
        weights[2 * j, j] = 1.0
        weights[2 * j + 1, j] = 1.0
    head = names.index("nose")
    weights[2 * kj1, head] = 1.0
    weights[2 * kj1 + 1, names.index("left_ankle")] = 1.0
    weights[2 * kj1 + 2, names.index("right_ankle")] = 1.0

    rng = np.random.default_rng(1234)  # fixed: blendshapes are part of the model identity
    blendshapes = blendshape_scale * rng.standard_normal((nverts, 3, 10))

    faces = np.array(
        [
            [2 * head, 2 * head + 1, 2 * kj1],
            [0, 1, 2 * names.index("spine")],
            [2 * names.index("left_shoulder"), 2 * names.index("right_shoulder"), 2 * names.index("neck")],
        ],
        dtype=int,
    )
    return BodyModelData(
        name=name,
        up_axis="y",
        joint_names=tuple(names),
        parents=parents,
        adult_template=adult_template,
        child_template=child_template,
        shape_blendshapes=blendshapes,
        joint_regressor=regressor,
        skinning_weights=weights,
        faces=faces,
    )


def default_jointmap(model: BodyModelData, convention_name: str = COCO17.name) -> NamedJointMap:
    """Name-identity pairs between model joints and convention keypoints."""
    convention = get_convention(convention_name)
    pairs = [(n, n) for n in model.joint_names if n in convention.keypoint_names]
    if not pairs:
        raise InputError(
            f"no model joint name matches convention {convention_name!r}; "
            "provide an explicit joint map"
        )
    return NamedJointMap(pairs)


@dataclass(frozen=True)
class SynthScenario:
    """Shape of one generated sequence.

    ``kid_factors`` gives the true template blend per track (a scalar is
    broadcast). ``pose_mode`` is "zero" or "constant"; a constant pose is
    drawn once per track and held, keeping world joints static over time.
    """

    frames: int
    tracks: int = 1
    kid_factors: tuple[float, ...] | float = 1.0
    noise_px: float = 0.0
    camera_path: str = "static"  # static | orbit | line
    pose_mode: str = "zero"
    pose_scale: float = 0.0
    orient_scale: float = 0.4
    spacing: float = 0.9
    betas: tuple | None = None  # optional per-track 10-vectors
    convention: str = COCO17.name

    def __post_init__(self):
        if self.frames < 1:
            raise InputError("frames must be >= 1")
        if self.tracks < 1:
            raise InputError("tracks must be >= 1")
        if self.camera_path not in ("orbit", "line", "static"):
            raise InputError(f"unknown camera path {self.camera_path!r}")
        if self.pose_mode not in ("zero", "constant"):
            raise InputError(f"unknown pose mode {self.pose_mode!r}")
        if self.noise_px < 0:
            raise InputError("noise_px must be nonnegative")

    def kid_factor_for(self, track: int) -> float:
        if isinstance(self.kid_factors, (int, float)):
            return float(self.kid_factors)
        return float(self.kid_factors[track])


@dataclass
class SynthResult:
    detections: DetectionFile
    cameras: CameraTrack
    truth: ResultBundle
    jointmap: NamedJointMap


def _look_at(eye: np.ndarray, target: np.ndarray) -> CameraPose:
    forward = target - eye
    norm = np.linalg.norm(forward)
    if norm < 1e-9:
        raise SynthError("camera eye coincides with its target")
    forward = forward / norm
    up = np.array([0.0, 1.0, 0.0])
    right = np.cross(forward, up)
    rnorm = np.linalg.norm(right)
    if rnorm < 1e-9:  # looking straight up/down; pick an arbitrary right
        right = np.array([1.0, 0.0, 0.0])
    else:
        right = right / rnorm
    down = np.cross(forward, right)
    rot = np.stack([right, down, forward])
    return CameraPose(rot, -rot @ eye)


def _camera_track(scenario: SynthScenario, center: np.ndarray, body_scale: float) -> CameraTrack:
    nframes = scenario.frames
    if scenario.camera_path == "static":
        return CameraTrack.static_identity(nframes, DEFAULT_INTRINSICS)
    radius = max(3.0, 2.6 * body_scale)
    poses = []
    if scenario.camera_path == "orbit":
        sweep = np.deg2rad(300.0)
        angles = (
            np.linspace(0.0, sweep, nframes) if nframes > 1 else np.array([0.0])
        )
        for a in angles:
            eye = center + radius * np.array([np.sin(a), 0.0, -np.cos(a)])
            poses.append(_look_at(eye, center))
    else:  # line
        offsets = np.linspace(-1.5, 1.5, nframes) if nframes > 1 else np.array([0.0])
        for o in offsets:
            eye = center + np.array([o, 0.2, -radius])
            poses.append(_look_at(eye, center))
    return CameraTrack(tuple(poses), DEFAULT_INTRINSICS, 1.0)


def _sample_states(
    model: BodyModelData, scenario: SynthScenario, rng: np.random.Generator
) -> list[PersonState]:
    states = []
    frame_indices = np.arange(scenario.frames)
    depth_offset = 4.0 if scenario.camera_path == "static" else 0.0
    for ti in range(scenario.tracks):
        state = PersonState.zeros(f"track-{ti:03d}", frame_indices, model.joint_count)
        state.kid_factor = scenario.kid_factor_for(ti)
        if scenario.betas is not None:
            state.betas = np.asarray(scenario.betas[ti], dtype=float).copy()
        orient = rng.normal(scale=scenario.orient_scale / np.sqrt(3.0), size=3)
        base = np.array(
            [
                (ti - (scenario.tracks - 1) / 2.0) * scenario.spacing,
                0.0,
                depth_offset,
            ]
        )
        base += rng.normal(scale=0.15, size=3)
        state.global_orient[:] = orient
        state.trans[:] = base
        if scenario.pose_mode == "constant" and scenario.pose_scale > 0:
            pose = rng.normal(scale=scenario.pose_scale, size=(model.joint_count, 3))
            state.body_pose[:] = pose
        states.append(state)
    return states


def synth_generate(
    model: BodyModelData, scenario: SynthScenario, seed: int = 0
) -> SynthResult:
    """Render exact keypoint tracks for a seeded scenario, plus the ground truth.

    With zero pixel noise, reprojecting the truth reproduces the detections
    bit for bit. Raises SynthError when no placement keeps every mapped
    joint in front of every camera.
    """
    convention = get_convention(scenario.convention)
    named_map = default_jointmap(model, scenario.convention)
    jmap = named_map.resolve(model, convention)

    rng = np.random.default_rng(seed)
    for _attempt in range(20):
        states = _sample_states(model, scenario, rng)
        world = []
        for state in states:
            joints_rest = rest_joints(model, state.kid_factor, state.betas)
            seq = np.empty((scenario.frames, model.num_joints, 3))
            for t in range(scenario.frames):
                posed, _ = fk_joints(
                    model, joints_rest, state.global_orient[t], state.body_pose[t]
                )
                seq[t] = posed + state.trans[t]
            world.append(seq)
        center = np.mean([seq.mean(axis=(0, 1)) for seq in world], axis=0)
        if scenario.camera_path == "static":
            center = np.array([0.0, center[1], 4.0])
        body_scale = max(
            float(np.ptp(seq[0, :, model.up_index])) for seq in world
        )
        cams = _camera_track(scenario, center, body_scale)

        visible = True
        for seq in world:
            for t in range(scenario.frames):
                pose = cams.poses[t]
                for mj in jmap.model_joints:
                    depth = float((pose.rot @ seq[t, mj] + pose.trans)[2])
                    if depth <= max(EPS_DEPTH, 0.25):
                        visible = False
                        break
                if not visible:
                    break
            if not visible:
                break
        if visible:
            break
    else:
        raise SynthError("could not place all tracks in front of the cameras")

    tracks = []
    for state, seq in zip(states, world):
        frames = []
        for t in range(scenario.frames):
            pose = cams.poses[t]
            points = np.zeros((convention.size, 2))
            confidences = np.zeros(convention.size)
            for mj, kp in jmap.pairs:
                q = pose.rot @ seq[t, mj] + cams.scale * pose.trans
                points[kp] = [
                    cams.intrinsics.fx * q[0] / q[2] + cams.intrinsics.cx,
                    cams.intrinsics.fy * q[1] / q[2] + cams.intrinsics.cy,
                ]
                confidences[kp] = 1.0
            if scenario.noise_px > 0:
                noise = rng.normal(scale=scenario.noise_px, size=(len(jmap), 2))
                for i, (_, kp) in enumerate(jmap.pairs):
                    points[kp] += noise[i]
            frames.append(
                KeypointFrame(frame_index=t, points=points, confidences=confidences)
            )
        tracks.append(KeypointTrack(track_id=state.track_id, frames=frames))

    detections = DetectionFile(convention=scenario.convention, tracks=tracks)
    truth = ResultBundle(
        model_hash=model_content_hash(model),
        camera_scale=cams.scale,
        states=states,
        sequence_id=f"synth-seed-{seed}",
        diagnostics={"scenario": "synthetic", "seed": int(seed)},
    )
    return SynthResult(detections=detections, cameras=cams, truth=truth, jointmap=named_map)
