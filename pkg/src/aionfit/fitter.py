"""Two-stage optimization driver: initialization, stage schedules, reports.

Stage one frees only global orientation and root translation against the
reprojection energy. Stage two frees everything (shape, per-frame pose, the
template blend weight through a sigmoid, the camera scale through an
exponential) and adds the smoothness, pose and shape priors.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .body_model import BodyModelData, ShapeParams, neutral_height
from .camera import CameraTrack, init_world_from_camera
from .errors import FitError, InputError
from .keypoints import JointMap, KeypointTrack
from .lbfgs import LbfgsOptions, lbfgs_minimize
from .objective import (
    DEFAULT_CONFIDENCE_FLOOR,
    GAUSSIAN_PRIOR,
    PosePrior,
    RobustLossConfig,
    StageWeights,
    objective_value_and_gradient,
    reprojection_errors,
)
from .state import BoundedReparam, FreeParameterLayout, PersonState

STAGE1_FREE = ("global_orient", "trans")
STAGE2_FREE = ("global_orient", "trans", "body_pose", "betas", "kid_factor")


@dataclass(frozen=True)
class FitConfig:
    """All fitting knobs, preloaded with the published schedule.

    Stage one runs 30 iterations on the data term alone (weight 0.001);
    stage two runs 60 iterations adding smoothness (5), pose (0.04) and
    shape (0.05) priors. The blend weight starts at 1 (child template) and
    the camera scale at 1, both optimized in stage two only.
    """

    stage1: StageWeights = StageWeights(lambda_data=0.001, iterations=30)
    stage2: StageWeights = StageWeights(
        lambda_data=0.001,
        lambda_smooth=5.0,
        lambda_pose=0.04,
        lambda_beta=0.05,
        iterations=60,
    )
    lbfgs: LbfgsOptions = LbfgsOptions(
        step_scale=1.0, history=10, grad_tol=1e-7, max_evals_per_iter=20
    )
    alpha_init: float = 1.0
    camera_scale_init: float = 1.0
    robust: RobustLossConfig = RobustLossConfig()
    confidence_floor: float = DEFAULT_CONFIDENCE_FLOOR
    # The published blend-weight init of exactly 1 sits on the sigmoid
    # boundary where the gradient vanishes, so the internal coordinate is
    # seeded at 1 - kid_clip; kid_temp rescales the logistic so the blend
    # direction stays visible next to unconstrained parameters.
    kid_clip: float = 1e-2
    kid_temp: float = 0.25
    pose_prior: PosePrior = GAUSSIAN_PRIOR

    def __post_init__(self):
        if not 0.0 <= self.alpha_init <= 1.0:
            raise InputError("alpha_init must lie in [0, 1]")
        if not self.camera_scale_init > 0:
            raise InputError("camera_scale_init must be positive")


@dataclass
class StageReport:
    """Trace and convergence flags for one optimization stage."""

    name: str
    trace: list[float]
    iterations: int
    converged: bool
    line_search_failed: bool
    gradient_inf_norm: float


@dataclass
class FitReport:
    """Everything a caller needs to judge and serialize a fit."""

    states: list[PersonState]
    camera_scale: float
    stages: list[StageReport]
    reprojection_px: dict[str, np.ndarray]  # per-track per-frame mean pixel error
    mean_reprojection_px: float
    rejected_tracks: list[tuple[str, str]]


def _pinhole_depth(fy: float, model_height: float, bbox_height: float) -> float:
    """Similar-triangles depth estimate from the model and detection heights."""
    return fy * model_height / bbox_height


def init_tracks(
    model: BodyModelData,
    detections: list[KeypointTrack],
    cams: CameraTrack,
    hints: list[PersonState] | None = None,
    cfg: FitConfig = FitConfig(),
) -> tuple[list[PersonState], list[KeypointTrack], float, list[tuple[str, str]]]:
    """Build initial states for every usable track.

    With hints (camera-frame estimates), orientation and translation are
    lifted into the world frame with unit camera scale. Without hints the
    pose starts at zero and the translation comes from a pinhole depth
    heuristic on the detected keypoints. The blend weight starts at
    ``cfg.alpha_init`` in both paths. Returns the states, the detection
    tracks they correspond to, the initial camera scale and the rejected
    tracks with reasons.
    """
    if not detections:
        raise InputError("no detection tracks provided")
    if hints is not None and len(hints) != len(detections):
        raise InputError("hints must align one-to-one with detection tracks")
    floor = cfg.confidence_floor
    joint_count = model.joint_count
    states: list[PersonState] = []
    kept: list[KeypointTrack] = []
    rejected: list[tuple[str, str]] = []
    model_height = neutral_height(model, ShapeParams(np.zeros(10), cfg.alpha_init))

    for ti, track in enumerate(detections):
        nframes = track.num_frames
        if nframes == 0:
            rejected.append((track.track_id, "track has no frames"))
            continue
        if track.frames[-1].frame_index >= len(cams):
            raise InputError(
                f"track {track.track_id!r} references a frame beyond the camera track"
            )
        if not any(np.any(f.confidences >= floor) for f in track.frames):
            rejected.append(
                (track.track_id, f"no keypoint reaches the confidence floor {floor}")
            )
            continue
        state = PersonState.zeros(
            track.track_id, [f.frame_index for f in track.frames], joint_count
        )
        state.kid_factor = cfg.alpha_init

        if hints is not None:
            hint = hints[ti]
            if hint.num_frames != nframes or hint.joint_count != joint_count:
                raise InputError(f"hints for track {track.track_id!r} have wrong shape")
            state.betas = hint.betas.copy()
            state.body_pose = hint.body_pose.copy()
            for t, det in enumerate(track.frames):
                pose = cams.poses[det.frame_index]
                orient_w, trans_w = init_world_from_camera(
                    pose, 1.0, hint.global_orient[t], hint.trans[t]
                )
                state.global_orient[t] = orient_w
                state.trans[t] = trans_w
        else:
            intr = cams.intrinsics
            filled = np.zeros(nframes, dtype=bool)
            for t, det in enumerate(track.frames):
                usable = det.confidences >= floor
                pts = det.points[usable]
                if pts.shape[0] < 2:
                    continue
                bbox_h = float(pts[:, 1].max() - pts[:, 1].min())
                if bbox_h <= 1e-6:
                    continue
                depth = _pinhole_depth(intr.fy, model_height, bbox_h)
                center = pts.mean(axis=0)
                gamma_cam = np.array(
                    [
                        (center[0] - intr.cx) * depth / intr.fx,
                        (center[1] - intr.cy) * depth / intr.fy,
                        depth,
                    ]
                )
                _, trans_w = init_world_from_camera(
                    cams.poses[det.frame_index], 1.0, np.zeros(3), gamma_cam
                )
                state.trans[t] = trans_w
                filled[t] = True
            if not filled.any():
                rejected.append(
                    (track.track_id, "no frame has enough keypoints for depth initialization")
                )
                continue
            # Bridge unfilled frames from the nearest initialized neighbor.
            good = np.flatnonzero(filled)
            for t in range(nframes):
                if not filled[t]:
                    state.trans[t] = state.trans[good[np.argmin(np.abs(good - t))]]

        states.append(state)
        kept.append(track)
    return states, kept, cfg.camera_scale_init, rejected


def make_stage_function(
    model: BodyModelData,
    states: list[PersonState],
    cams: CameraTrack,
    detections: list[KeypointTrack],
    jmap: JointMap,
    cfg: FitConfig,
    weights: StageWeights,
    free_kinds,
    optimize_camera_scale: bool,
):
    """Objective callable over the stage's internal parameter vector.

    Returns (fun, y0, layout, reparam); fun maps the internal vector to
    (value, gradient) with the bounded reparameterizations applied.
    """
    layout = FreeParameterLayout(states, free_kinds, optimize_camera_scale)
    reparam = BoundedReparam(layout, kid_clip=cfg.kid_clip, kid_temp=cfg.kid_temp)
    x0 = layout.flatten(states, cams.scale)
    y0 = reparam.to_internal(x0)

    def fun(y: np.ndarray) -> tuple[float, np.ndarray]:
        x = reparam.to_external(y)
        eval_states, scale = layout.unflatten(x, states, cams.scale)
        eval_cams = replace(cams, scale=scale)
        value, grad_x = objective_value_and_gradient(
            model,
            eval_states,
            eval_cams,
            detections,
            jmap,
            cfg.robust,
            weights,
            layout,
            cfg.pose_prior,
            cfg.confidence_floor,
        )
        return value, reparam.chain_gradient(y, grad_x)

    return fun, y0, layout, reparam


def _camera_scale_observable(cams: CameraTrack) -> bool:
    """The scale only moves pixels when some camera translation is nonzero."""
    return len(cams) > 1 and any(np.linalg.norm(p.trans) > 0 for p in cams.poses)


def _run_stage(
    name: str,
    model: BodyModelData,
    states: list[PersonState],
    cams: CameraTrack,
    detections: list[KeypointTrack],
    jmap: JointMap,
    cfg: FitConfig,
    weights: StageWeights,
    free_kinds,
    optimize_camera_scale: bool,
) -> tuple[list[PersonState], float, StageReport]:
    fun, y0, layout, reparam = make_stage_function(
        model, states, cams, detections, jmap, cfg, weights, free_kinds, optimize_camera_scale
    )
    opts = replace(cfg.lbfgs, max_iterations=weights.iterations)
    result = lbfgs_minimize(fun, y0, opts)
    x = reparam.to_external(result.x)
    new_states, new_scale = layout.unflatten(x, states, cams.scale)
    report = StageReport(
        name=name,
        trace=list(result.trace),
        iterations=result.iterations,
        converged=result.converged,
        line_search_failed=result.line_search_failed,
        gradient_inf_norm=float(np.max(np.abs(result.gradient), initial=0.0)),
    )
    return new_states, new_scale, report


def stage1(
    model: BodyModelData,
    states: list[PersonState],
    cams: CameraTrack,
    detections: list[KeypointTrack],
    jmap: JointMap,
    cfg: FitConfig = FitConfig(),
) -> tuple[list[PersonState], float, StageReport]:
    """Orientation and translation only, against the data term alone."""
    weights = StageWeights(
        lambda_data=cfg.stage1.lambda_data, iterations=cfg.stage1.iterations
    )
    return _run_stage(
        "stage1", model, states, cams, detections, jmap, cfg, weights, STAGE1_FREE, False
    )


def stage2(
    model: BodyModelData,
    states: list[PersonState],
    cams: CameraTrack,
    detections: list[KeypointTrack],
    jmap: JointMap,
    cfg: FitConfig = FitConfig(),
) -> tuple[list[PersonState], float, StageReport]:
    """All person parameters plus the camera scale, with priors active."""
    return _run_stage(
        "stage2",
        model,
        states,
        cams,
        detections,
        jmap,
        cfg,
        cfg.stage2,
        STAGE2_FREE,
        _camera_scale_observable(cams),
    )


def fit(
    model: BodyModelData,
    detections: list[KeypointTrack],
    cams: CameraTrack,
    jmap: JointMap,
    hints: list[PersonState] | None = None,
    cfg: FitConfig = FitConfig(),
) -> FitReport:
    """Initialize, run both stages and assemble the report.

    Deterministic: identical inputs and configuration produce bit-identical
    reports.
    """
    states, kept, scale, rejected = init_tracks(model, detections, cams, hints, cfg)
    if not states:
        details = "; ".join(f"{tid}: {why}" for tid, why in rejected)
        raise FitError(f"every track was rejected ({details})")

    cams = replace(cams, scale=scale)
    states, scale, report1 = stage1(model, states, cams, kept, jmap, cfg)
    cams = replace(cams, scale=scale)
    states, scale, report2 = stage2(model, states, cams, kept, jmap, cfg)
    cams = replace(cams, scale=scale)

    per_track = reprojection_errors(
        model, states, cams, kept, jmap, cfg.confidence_floor
    )
    reproj = {s.track_id: errs for s, errs in zip(states, per_track)}
    all_errs = np.concatenate([e for e in per_track]) if per_track else np.array([np.nan])
    mean_err = float(np.nanmean(all_errs)) if np.any(np.isfinite(all_errs)) else float("nan")

    return FitReport(
        states=states,
        camera_scale=scale,
        stages=[report1, report2],
        reprojection_px=reproj,
        mean_reprojection_px=mean_err,
        rejected_tracks=rejected,
    )
