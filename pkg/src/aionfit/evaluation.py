"""Result-to-result evaluation: turns parameter bundles into a metric report."""

from __future__ import annotations

import numpy as np

from .body_model import BodyModelData, ShapeParams, fk_joints, neutral_height, rest_joints
from .camera import EPS_DEPTH, CameraTrack
from .dataio.formats import ResultBundle, model_content_hash
from .errors import InputError
from .metrics import ahd, aphd, kp_l1_2d, kp_l1_3d, mpjpe, param_l2, pck
from .state import PersonState


def _world_joints(model: BodyModelData, state: PersonState) -> np.ndarray:
    joints_rest = rest_joints(model, state.kid_factor, state.betas)
    seq = np.empty((state.num_frames, model.num_joints, 3))
    for t in range(state.num_frames):
        posed, _ = fk_joints(model, joints_rest, state.global_orient[t], state.body_pose[t])
        seq[t] = posed + state.trans[t]
    return seq


def _paired_tracks(
    predicted: ResultBundle, reference: ResultBundle
) -> list[tuple[PersonState, PersonState]]:
    ref_by_id = {s.track_id: s for s in reference.states}
    if set(ref_by_id) != {s.track_id: None for s in predicted.states}.keys():
        raise InputError("predicted and reference results cover different track ids")
    pairs = []
    for pred in predicted.states:
        ref = ref_by_id[pred.track_id]
        if not np.array_equal(pred.frame_indices, ref.frame_indices):
            raise InputError(f"track {pred.track_id!r}: frame indices differ")
        if pred.joint_count != ref.joint_count:
            raise InputError(f"track {pred.track_id!r}: joint counts differ")
        pairs.append((pred, ref))
    return pairs


def evaluation_report(
    model: BodyModelData,
    predicted: ResultBundle,
    reference: ResultBundle,
    cams: CameraTrack | None = None,
) -> list[dict]:
    """Flat list of {name, value, units} comparing a prediction to a reference.

    3D joint metrics and heights always appear; the 2D metrics require a
    camera track. Both bundles must reference the supplied model by hash.
    """
    model_hash = model_content_hash(model)
    for bundle, label in ((predicted, "predicted"), (reference, "reference")):
        if bundle.model_hash != model_hash:
            raise InputError(
                f"{label} results reference model {bundle.model_hash}, "
                f"but the supplied model hashes to {model_hash}"
            )
    pairs = _paired_tracks(predicted, reference)

    mpjpe_values: list[float] = []
    kp3d_values: list[float] = []
    param_values: list[float] = []
    height_pairs: list[tuple[float, float]] = []
    pck_hits: dict[float, list[float]] = {0.05: [], 0.1: []}
    kp2d_values: list[float] = []

    for pred, ref in pairs:
        pred_joints = _world_joints(model, pred)
        ref_joints = _world_joints(model, ref)
        for t in range(pred.num_frames):
            mpjpe_values.append(mpjpe(pred_joints[t] * 1000.0, ref_joints[t] * 1000.0))
            kp3d_values.append(kp_l1_3d(pred_joints[t], ref_joints[t]))
        pred_pose = np.concatenate(
            [pred.global_orient.reshape(-1), pred.body_pose.reshape(-1)]
        )
        ref_pose = np.concatenate([ref.global_orient.reshape(-1), ref.body_pose.reshape(-1)])
        param_values.append(param_l2(pred_pose, pred.betas, ref_pose, ref.betas))
        height_pairs.append(
            (
                neutral_height(model, ShapeParams(ref.betas, ref.kid_factor)),
                neutral_height(model, ShapeParams(pred.betas, pred.kid_factor)),
            )
        )
        if cams is not None:
            for t in range(pred.num_frames):
                frame_idx = int(pred.frame_indices[t])
                if frame_idx >= len(cams):
                    raise InputError(
                        f"track {pred.track_id!r} frame {frame_idx} is beyond the camera track"
                    )
                pose = cams.poses[frame_idx]
                pred_uv, ref_uv = [], []
                for mj in range(model.num_joints):
                    qp = pose.rot @ pred_joints[t, mj] + cams.scale * pose.trans
                    qr = pose.rot @ ref_joints[t, mj] + cams.scale * pose.trans
                    if qp[2] <= EPS_DEPTH or qr[2] <= EPS_DEPTH:
                        continue
                    pred_uv.append(
                        [
                            cams.intrinsics.fx * qp[0] / qp[2] + cams.intrinsics.cx,
                            cams.intrinsics.fy * qp[1] / qp[2] + cams.intrinsics.cy,
                        ]
                    )
                    ref_uv.append(
                        [
                            cams.intrinsics.fx * qr[0] / qr[2] + cams.intrinsics.cx,
                            cams.intrinsics.fy * qr[1] / qr[2] + cams.intrinsics.cy,
                        ]
                    )
                if len(pred_uv) >= 2:
                    pred_uv = np.asarray(pred_uv)
                    ref_uv = np.asarray(ref_uv)
                    for threshold in pck_hits:
                        pck_hits[threshold].append(pck(pred_uv, ref_uv, threshold))
                    kp2d_values.append(kp_l1_2d(pred_uv, ref_uv))

    report = [
        {"name": "mpjpe", "value": float(np.mean(mpjpe_values)), "units": "mm"},
        {"name": "ahd", "value": ahd(height_pairs), "units": "m"},
        {"name": "aphd", "value": aphd(height_pairs), "units": "percent"},
        {"name": "param_l2", "value": float(np.mean(param_values)), "units": "dimensionless"},
        {"name": "kp_l1_3d", "value": float(np.mean(kp3d_values)), "units": "m"},
    ]
    if cams is not None and kp2d_values:
        report.append(
            {"name": "pck@0.05", "value": float(np.mean(pck_hits[0.05])), "units": "fraction"}
        )
        report.append(
            {"name": "pck@0.1", "value": float(np.mean(pck_hits[0.1])), "units": "fraction"}
        )
        report.append({"name": "kp_l1_2d", "value": float(np.mean(kp2d_values)), "units": "px"})
    return report
