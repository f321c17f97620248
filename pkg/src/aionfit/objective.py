"""Energy terms for the two-stage fit and their exact gradients.

Evaluation is pure and deterministic: tracks, frames and mapped joints are
always reduced in a fixed order, so repeated calls are bit-stable.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .body_model import (
    BodyModelData,
    fk_joints,
    fk_joints_backward,
    rest_joints,
    rest_joints_backward,
)
from .camera import EPS_DEPTH, CameraTrack, project_with_jacobian
from .errors import ConfigurationError, InputError, NumericalError
from .keypoints import JointMap, KeypointTrack
from .state import FreeParameterLayout, PersonState, TrackGradients

# Detections with confidence below this contribute nothing to the data term.
DEFAULT_CONFIDENCE_FLOOR = 0.05


@dataclass(frozen=True)
class RobustLossConfig:
    """Scale of the saturating reprojection penalty, in pixels."""

    sigma: float = 100.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise InputError("sigma must be positive")


@dataclass(frozen=True)
class StageWeights:
    """Term weights and iteration budget for one optimization stage."""

    lambda_data: float = 0.0
    lambda_smooth: float = 0.0
    lambda_pose: float = 0.0
    lambda_beta: float = 0.0
    iterations: int = 1

    def __post_init__(self):
        for name in ("lambda_data", "lambda_smooth", "lambda_pose", "lambda_beta"):
            if getattr(self, name) < 0:
                raise InputError(f"{name} must be nonnegative")
        if self.iterations < 1:
            raise InputError("iterations must be >= 1")


@dataclass(frozen=True)
class PosePrior:
    """Pose plausibility prior.

    The default kind penalizes the squared body-pose parameters directly.
    The external-latent kind defers to a pluggable 32-dimensional encoder;
    the encoder must expose ``encode(body_pose) -> (32,)`` and, when the
    prior participates in gradient-based fitting,
    ``jacobian(body_pose) -> (32, K*3)``.
    """

    kind: str = "gaussian-parameter-space"
    latent_dim: int = 0
    encoder: object = None

    def __post_init__(self):
        if self.kind not in ("gaussian-parameter-space", "external-latent"):
            raise ConfigurationError(f"unknown pose prior kind {self.kind!r}")
        if self.kind == "external-latent":
            if self.latent_dim != 32:
                raise ConfigurationError("external-latent priors use a 32-dim latent")
            if self.encoder is None:
                raise ConfigurationError("external-latent prior selected with no encoder registered")
        elif self.latent_dim not in (0, None):
            raise ConfigurationError("latent_dim is only meaningful for external-latent priors")


GAUSSIAN_PRIOR = PosePrior()


def geman_mcclure(residual: np.ndarray, cfg: RobustLossConfig) -> float:
    """Saturating robust cost |r|^2 / (sigma^2 + |r|^2), bounded in [0, 1)."""
    residual = np.asarray(residual, dtype=float)
    if not np.all(np.isfinite(residual)):
        raise InputError("residual must be finite")
    sq = float(residual @ residual) if residual.ndim == 1 else float(np.sum(residual * residual))
    return sq / (cfg.sigma * cfg.sigma + sq)


def _check_alignment(
    states: list[PersonState], cams: CameraTrack, detections: list[KeypointTrack]
) -> None:
    if len(states) != len(detections):
        raise InputError(
            f"got {len(states)} states but {len(detections)} detection tracks"
        )
    for state, track in zip(states, detections):
        if state.num_frames != track.num_frames:
            raise InputError(
                f"track {track.track_id!r}: {state.num_frames} state frames vs "
                f"{track.num_frames} detection frames"
            )
        if track.frames and track.frames[-1].frame_index >= len(cams):
            raise InputError(
                f"track {track.track_id!r} references frame "
                f"{track.frames[-1].frame_index} beyond the camera track"
            )


def e_data(
    model: BodyModelData,
    states: list[PersonState],
    cams: CameraTrack,
    detections: list[KeypointTrack],
    jmap: JointMap,
    cfg: RobustLossConfig = RobustLossConfig(),
    confidence_floor: float = DEFAULT_CONFIDENCE_FLOOR,
) -> float:
    """Confidence-weighted robust reprojection energy.

    Joints with confidence below the floor or behind the camera contribute
    zero.
    """
    _check_alignment(states, cams, detections)
    sigma_sq = cfg.sigma * cfg.sigma
    total = 0.0
    for state, track in zip(states, detections):
        joints_rest = rest_joints(model, state.kid_factor, state.betas)
        for t, det in enumerate(track.frames):
            posed, _ = fk_joints(model, joints_rest, state.global_orient[t], state.body_pose[t])
            world = posed + state.trans[t]
            pose = cams.poses[det.frame_index]
            for mj, kp in jmap.pairs:
                conf = det.confidences[kp]
                if conf < confidence_floor:
                    continue
                q = pose.rot @ world[mj] + cams.scale * pose.trans
                if q[2] <= EPS_DEPTH:
                    continue
                uv = np.array(
                    [
                        cams.intrinsics.fx * q[0] / q[2] + cams.intrinsics.cx,
                        cams.intrinsics.fy * q[1] / q[2] + cams.intrinsics.cy,
                    ]
                )
                r = uv - det.points[kp]
                sq = float(r @ r)
                total += conf * sq / (sigma_sq + sq)
    return total


def e_smooth(joint_sequences: list[np.ndarray]) -> float:
    """Sum of squared consecutive-frame world-joint displacements."""
    total = 0.0
    for seq in joint_sequences:
        seq = np.asarray(seq, dtype=float)
        if seq.ndim != 3:
            raise InputError("each joint sequence must be (T, K+1, 3)")
        if seq.shape[0] >= 2:
            diff = seq[:-1] - seq[1:]
            total += float(np.sum(diff * diff))
    return total


def e_pose(states: list[PersonState], prior: PosePrior = GAUSSIAN_PRIOR) -> float:
    """Pose plausibility energy summed over tracks and frames."""
    total = 0.0
    if prior.kind == "gaussian-parameter-space":
        for state in states:
            total += float(np.sum(state.body_pose * state.body_pose))
        return total
    encoder = prior.encoder
    for state in states:
        for t in range(state.num_frames):
            latent = np.asarray(encoder.encode(state.body_pose[t]), dtype=float)
            total += float(latent @ latent)
    return total


def e_beta(states: list[PersonState]) -> float:
    """Squared shape-coefficient norm per track; the kid_factor is excluded."""
    return float(sum(np.sum(s.betas * s.betas) for s in states))


def world_joint_sequences(model: BodyModelData, states: list[PersonState]) -> list[np.ndarray]:
    """World-frame joints (T, K+1, 3) for every track."""
    out = []
    for state in states:
        joints_rest = rest_joints(model, state.kid_factor, state.betas)
        seq = np.empty((state.num_frames, model.num_joints, 3))
        for t in range(state.num_frames):
            posed, _ = fk_joints(model, joints_rest, state.global_orient[t], state.body_pose[t])
            seq[t] = posed + state.trans[t]
        out.append(seq)
    return out


@dataclass
class EnergyBreakdown:
    data: float = 0.0
    smooth: float = 0.0
    pose: float = 0.0
    beta: float = 0.0
    total: float = 0.0


def objective_breakdown(
    model: BodyModelData,
    states: list[PersonState],
    cams: CameraTrack,
    detections: list[KeypointTrack],
    jmap: JointMap,
    cfg: RobustLossConfig,
    weights: StageWeights,
    prior: PosePrior = GAUSSIAN_PRIOR,
    confidence_floor: float = DEFAULT_CONFIDENCE_FLOOR,
) -> EnergyBreakdown:
    """Evaluate the weighted objective; terms with zero weight are skipped."""
    out = EnergyBreakdown()
    if weights.lambda_data > 0:
        out.data = e_data(model, states, cams, detections, jmap, cfg, confidence_floor)
    if weights.lambda_smooth > 0:
        out.smooth = e_smooth(world_joint_sequences(model, states))
    if weights.lambda_pose > 0:
        out.pose = e_pose(states, prior)
    if weights.lambda_beta > 0:
        out.beta = e_beta(states)
    out.total = (
        weights.lambda_data * out.data
        + weights.lambda_smooth * out.smooth
        + weights.lambda_pose * out.pose
        + weights.lambda_beta * out.beta
    )
    return out


def total_objective(
    model: BodyModelData,
    states: list[PersonState],
    cams: CameraTrack,
    detections: list[KeypointTrack],
    jmap: JointMap,
    cfg: RobustLossConfig,
    weights: StageWeights,
    prior: PosePrior = GAUSSIAN_PRIOR,
    confidence_floor: float = DEFAULT_CONFIDENCE_FLOOR,
) -> float:
    return objective_breakdown(
        model, states, cams, detections, jmap, cfg, weights, prior, confidence_floor
    ).total


def objective_value_and_gradient(
    model: BodyModelData,
    states: list[PersonState],
    cams: CameraTrack,
    detections: list[KeypointTrack],
    jmap: JointMap,
    cfg: RobustLossConfig,
    weights: StageWeights,
    layout: FreeParameterLayout,
    prior: PosePrior = GAUSSIAN_PRIOR,
    confidence_floor: float = DEFAULT_CONFIDENCE_FLOOR,
) -> tuple[float, np.ndarray]:
    """Weighted objective and its exact gradient over the layout's free blocks.

    One forward-kinematics pass per frame is shared by the data and
    smoothness terms; the adjoint is then pushed back through the kinematic
    chain by hand.
    """
    _check_alignment(states, cams, detections)
    sigma_sq = cfg.sigma * cfg.sigma
    lam_d, lam_s = weights.lambda_data, weights.lambda_smooth
    lam_p, lam_b = weights.lambda_pose, weights.lambda_beta

    sums = EnergyBreakdown()
    track_grads: list[TrackGradients] = []
    scale_grad = 0.0

    for state, track in zip(states, detections):
        grads = TrackGradients.zeros_like(state)
        nframes = state.num_frames
        joints_rest = rest_joints(model, state.kid_factor, state.betas)
        world = np.empty((nframes, model.num_joints, 3))
        caches = []
        for t in range(nframes):
            posed, cache = fk_joints(
                model, joints_rest, state.global_orient[t], state.body_pose[t]
            )
            world[t] = posed + state.trans[t]
            caches.append(cache)
        bar_world = np.zeros_like(world)

        if lam_d > 0:
            for t, det in enumerate(track.frames):
                pose = cams.poses[det.frame_index]
                for mj, kp in jmap.pairs:
                    conf = det.confidences[kp]
                    if conf < confidence_floor:
                        continue
                    q = pose.rot @ world[t, mj] + cams.scale * pose.trans
                    if q[2] <= EPS_DEPTH:
                        continue
                    uv, jac = project_with_jacobian(cams.intrinsics, q)
                    r = uv - det.points[kp]
                    sq = float(r @ r)
                    denom = sigma_sq + sq
                    sums.data += conf * sq / denom
                    # d(rho)/dr = 2 sigma^2 r / (sigma^2 + |r|^2)^2
                    bar_uv = (lam_d * conf * 2.0 * sigma_sq / (denom * denom)) * r
                    bar_q = jac.T @ bar_uv
                    bar_world[t, mj] += pose.rot.T @ bar_q
                    scale_grad += float(pose.trans @ bar_q)

        if lam_s > 0 and nframes >= 2:
            diff = world[:-1] - world[1:]
            sums.smooth += float(np.sum(diff * diff))
            bar_world[:-1] += (2.0 * lam_s) * diff
            bar_world[1:] -= (2.0 * lam_s) * diff

        if lam_p > 0:
            if prior.kind == "gaussian-parameter-space":
                sums.pose += float(np.sum(state.body_pose * state.body_pose))
                grads.body_pose += (2.0 * lam_p) * state.body_pose
            else:
                encoder = prior.encoder
                if not hasattr(encoder, "jacobian"):
                    raise ConfigurationError(
                        "external-latent prior needs a jacobian() for gradient-based fitting"
                    )
                for t in range(nframes):
                    latent = np.asarray(encoder.encode(state.body_pose[t]), dtype=float)
                    sums.pose += float(latent @ latent)
                    jac = np.asarray(encoder.jacobian(state.body_pose[t]), dtype=float)
                    grads.body_pose[t] += (2.0 * lam_p) * (latent @ jac).reshape(
                        state.body_pose[t].shape
                    )

        if lam_b > 0:
            sums.beta += float(state.betas @ state.betas)
            grads.betas += (2.0 * lam_b) * state.betas

        # Push the world-joint adjoints back through the kinematic chain.
        bar_rest_total = np.zeros((model.num_joints, 3))
        for t in range(nframes):
            if not bar_world[t].any():
                continue
            grads.trans[t] += bar_world[t].sum(axis=0)
            bar_orient, bar_pose, bar_rest = fk_joints_backward(model, caches[t], bar_world[t])
            grads.global_orient[t] += bar_orient
            grads.body_pose[t] += bar_pose
            bar_rest_total += bar_rest
        bar_betas, bar_kid = rest_joints_backward(model, bar_rest_total)
        grads.betas += bar_betas
        grads.kid_factor += bar_kid
        track_grads.append(grads)

    total = lam_d * sums.data + lam_s * sums.smooth + lam_p * sums.pose + lam_b * sums.beta
    grad = layout.scatter_gradient(track_grads, scale_grad)
    if not np.isfinite(total):
        raise NumericalError("objective value is not finite")
    if not np.all(np.isfinite(grad)):
        index = int(np.flatnonzero(~np.isfinite(grad))[0])
        raise NumericalError(f"gradient entry {index} is not finite", parameter_index=index)
    return total, grad


def gradient(
    model: BodyModelData,
    states: list[PersonState],
    cams: CameraTrack,
    detections: list[KeypointTrack],
    jmap: JointMap,
    cfg: RobustLossConfig,
    weights: StageWeights,
    layout: FreeParameterLayout,
    prior: PosePrior = GAUSSIAN_PRIOR,
    confidence_floor: float = DEFAULT_CONFIDENCE_FLOOR,
) -> np.ndarray:
    """Flat gradient of the weighted objective over the layout's free parameters."""
    return objective_value_and_gradient(
        model, states, cams, detections, jmap, cfg, weights, layout, prior, confidence_floor
    )[1]


def reprojection_errors(
    model: BodyModelData,
    states: list[PersonState],
    cams: CameraTrack,
    detections: list[KeypointTrack],
    jmap: JointMap,
    confidence_floor: float = DEFAULT_CONFIDENCE_FLOOR,
) -> list[np.ndarray]:
    """Per-frame mean pixel error over counted joints, one array per track.

    Frames with no counted joints yield NaN.
    """
    _check_alignment(states, cams, detections)
    out = []
    for state, track in zip(states, detections):
        joints_rest = rest_joints(model, state.kid_factor, state.betas)
        errors = np.full(state.num_frames, np.nan)
        for t, det in enumerate(track.frames):
            posed, _ = fk_joints(model, joints_rest, state.global_orient[t], state.body_pose[t])
            world = posed + state.trans[t]
            pose = cams.poses[det.frame_index]
            norms = []
            for mj, kp in jmap.pairs:
                if det.confidences[kp] < confidence_floor:
                    continue
                q = pose.rot @ world[mj] + cams.scale * pose.trans
                if q[2] <= EPS_DEPTH:
                    continue
                uv = np.array(
                    [
                        cams.intrinsics.fx * q[0] / q[2] + cams.intrinsics.cx,
                        cams.intrinsics.fy * q[1] / q[2] + cams.intrinsics.cy,
                    ]
                )
                norms.append(float(np.linalg.norm(uv - det.points[kp])))
            if norms:
                errors[t] = float(np.mean(norms))
        out.append(errors)
    return out
