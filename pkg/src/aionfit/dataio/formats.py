"""Versioned, self-describing JSON schemas for every artifact the tools exchange.

All arrays are stored row-major as nested lists of float64; serialization is
canonical (sorted keys, fixed separators), so identical documents are
byte-identical on disk and hashes are stable.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..body_model import BodyModelData
from ..camera import CameraIntrinsics, CameraPose, CameraTrack
from ..errors import InputError, SchemaError
from ..fitter import FitConfig
from ..keypoints import (
    JointMap,
    KeypointConvention,
    KeypointFrame,
    KeypointTrack,
    get_convention,
)
from ..lbfgs import LbfgsOptions
from ..objective import RobustLossConfig, StageWeights
from ..state import PersonState

MODEL_VERSION = "aionfit-model/1"
CAMERAS_VERSION = "aionfit-cameras/1"
DETECTIONS_VERSION = "aionfit-detections/1"
JOINTMAP_VERSION = "aionfit-jointmap/1"
CONFIG_VERSION = "aionfit-config/1"
RESULTS_VERSION = "aionfit-results/1"


def canonical_json(doc: dict) -> str:
    """Deterministic serialization used for files and content hashing."""
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _compact_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)


def save_document(doc: dict, path: str | Path) -> None:
    Path(path).write_text(canonical_json(doc), encoding="utf-8")


def load_document(path: str | Path, expected_version: str) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    check_version(doc, expected_version, str(path))
    return doc


def check_version(doc: dict, expected: str, context: str = "document") -> None:
    if not isinstance(doc, dict):
        raise SchemaError(f"{context}: expected a JSON object")
    version = doc.get("version")
    if version != expected:
        raise SchemaError(f"{context}: unknown version {version!r} (expected {expected!r})")


def _require(doc: dict, key: str, context: str):
    if key not in doc:
        raise SchemaError(f"{context}: missing field {key!r}")
    return doc[key]


def _array(doc: dict, key: str, context: str, shape: tuple | None = None) -> np.ndarray:
    raw = _require(doc, key, context)
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{context}: field {key!r} is not numeric: {exc}") from exc
    if shape is not None and arr.shape != shape:
        raise SchemaError(f"{context}: field {key!r} has shape {arr.shape}, expected {shape}")
    return arr


# ----------------------------------------------------------------------
# Body model
# ----------------------------------------------------------------------


def model_to_dict(model: BodyModelData) -> dict:
    doc = {
        "version": MODEL_VERSION,
        "name": model.name,
        "dtype": "float64",
        "up_axis": model.up_axis,
        "joint_names": list(model.joint_names),
        "parents": model.parents.tolist(),
        "vertex_count": int(model.vertex_count),
        "joint_count": int(model.joint_count),
        "adult_template": model.adult_template.tolist(),
        "child_template": model.child_template.tolist(),
        "shape_blendshapes": model.shape_blendshapes.tolist(),
        "pose_blendshapes": None
        if model.pose_blendshapes is None
        else model.pose_blendshapes.tolist(),
        "joint_regressor": model.joint_regressor.tolist(),
        "skinning_weights": model.skinning_weights.tolist(),
        "faces": model.faces.tolist(),
    }
    return doc


def model_from_dict(doc: dict, context: str = "model") -> BodyModelData:
    check_version(doc, MODEL_VERSION, context)
    if doc.get("dtype") != "float64":
        raise SchemaError(f"{context}: dtype must be 'float64'")
    v = int(_require(doc, "vertex_count", context))
    kj = int(_require(doc, "joint_count", context))
    pose_bs = doc.get("pose_blendshapes")
    try:
        model = BodyModelData(
            name=str(doc.get("name", "")),
            up_axis=str(_require(doc, "up_axis", context)),
            joint_names=tuple(_require(doc, "joint_names", context)),
            parents=np.asarray(_require(doc, "parents", context), dtype=int),
            adult_template=_array(doc, "adult_template", context, (v, 3)),
            child_template=_array(doc, "child_template", context, (v, 3)),
            shape_blendshapes=_array(doc, "shape_blendshapes", context, (v, 3, 10)),
            joint_regressor=_array(doc, "joint_regressor", context, (kj + 1, v)),
            skinning_weights=_array(doc, "skinning_weights", context, (v, kj + 1)),
            faces=np.asarray(_require(doc, "faces", context), dtype=int).reshape(-1, 3),
            pose_blendshapes=None if pose_bs is None else np.asarray(pose_bs, dtype=float),
        )
    except (ValueError, TypeError) as exc:
        raise SchemaError(f"{context}: {exc}") from exc
    return model


def model_content_hash(model: BodyModelData) -> str:
    digest = hashlib.sha256(_compact_json(model_to_dict(model)).encode("utf-8")).hexdigest()
    return f"sha256:{digest}"


def save_model(model: BodyModelData, path: str | Path) -> None:
    save_document(model_to_dict(model), path)


def load_model(path: str | Path) -> BodyModelData:
    return model_from_dict(load_document(path, MODEL_VERSION), str(path))


# ----------------------------------------------------------------------
# Cameras
# ----------------------------------------------------------------------


def cameras_to_dict(cams: CameraTrack) -> dict:
    return {
        "version": CAMERAS_VERSION,
        "intrinsics": {
            "fx": cams.intrinsics.fx,
            "fy": cams.intrinsics.fy,
            "cx": cams.intrinsics.cx,
            "cy": cams.intrinsics.cy,
        },
        "scale": cams.scale,
        "frames": [
            {"rotation": pose.rot.reshape(-1).tolist(), "translation": pose.trans.tolist()}
            for pose in cams.poses
        ],
    }


def cameras_from_dict(doc: dict, context: str = "cameras") -> CameraTrack:
    check_version(doc, CAMERAS_VERSION, context)
    intr = _require(doc, "intrinsics", context)
    frames = _require(doc, "frames", context)
    if not isinstance(frames, list) or not frames:
        raise SchemaError(f"{context}: frames must be a nonempty list")
    try:
        intrinsics = CameraIntrinsics(
            fx=float(intr["fx"]), fy=float(intr["fy"]), cx=float(intr["cx"]), cy=float(intr["cy"])
        )
        poses = []
        for i, frame in enumerate(frames):
            rot = np.asarray(frame["rotation"], dtype=float)
            if rot.shape != (9,):
                raise SchemaError(f"{context}: frame {i}: rotation must have 9 entries")
            poses.append(
                CameraPose(rot.reshape(3, 3), np.asarray(frame["translation"], dtype=float))
            )
        return CameraTrack(tuple(poses), intrinsics, float(doc.get("scale", 1.0)))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{context}: {exc}") from exc


def save_cameras(cams: CameraTrack, path: str | Path) -> None:
    save_document(cameras_to_dict(cams), path)


def load_cameras(path: str | Path) -> CameraTrack:
    return cameras_from_dict(load_document(path, CAMERAS_VERSION), str(path))


# ----------------------------------------------------------------------
# Detections
# ----------------------------------------------------------------------


@dataclass
class DetectionFile:
    """Per-track 2D keypoint records under a named convention."""

    convention: str
    tracks: list[KeypointTrack]

    def __post_init__(self):
        conv = get_convention(self.convention)
        for track in self.tracks:
            for frame in track.frames:
                if frame.points.shape[0] != conv.size:
                    raise InputError(
                        f"track {track.track_id!r} frame {frame.frame_index}: "
                        f"{frame.points.shape[0]} keypoints, convention "
                        f"{conv.name!r} declares {conv.size}"
                    )


def detections_to_dict(det: DetectionFile) -> dict:
    return {
        "version": DETECTIONS_VERSION,
        "convention": det.convention,
        "tracks": [
            {
                "track_id": track.track_id,
                "frames": [
                    {
                        "frame_index": int(frame.frame_index),
                        "points": frame.points.tolist(),
                        "confidences": frame.confidences.tolist(),
                    }
                    for frame in track.frames
                ],
            }
            for track in det.tracks
        ],
    }


def detections_from_dict(doc: dict, context: str = "detections") -> DetectionFile:
    check_version(doc, DETECTIONS_VERSION, context)
    convention = _require(doc, "convention", context)
    tracks_raw = _require(doc, "tracks", context)
    tracks = []
    for ti, track_doc in enumerate(tracks_raw):
        tctx = f"{context}: track {ti}"
        track_id = str(_require(track_doc, "track_id", tctx))
        frames = []
        for fi, frame_doc in enumerate(_require(track_doc, "frames", tctx)):
            fctx = f"{tctx} ({track_id!r}) record {fi}"
            try:
                frames.append(
                    KeypointFrame(
                        frame_index=int(_require(frame_doc, "frame_index", fctx)),
                        points=np.asarray(_require(frame_doc, "points", fctx), dtype=float),
                        confidences=np.asarray(
                            _require(frame_doc, "confidences", fctx), dtype=float
                        ),
                    )
                )
            except (TypeError, ValueError) as exc:
                raise SchemaError(f"{fctx}: {exc}") from exc
        try:
            tracks.append(KeypointTrack(track_id=track_id, frames=frames))
        except InputError as exc:
            raise SchemaError(f"{tctx}: {exc}") from exc
    try:
        return DetectionFile(convention=str(convention), tracks=tracks)
    except InputError as exc:
        raise SchemaError(f"{context}: {exc}") from exc


def save_detections(det: DetectionFile, path: str | Path) -> None:
    save_document(detections_to_dict(det), path)


def load_detections(path: str | Path) -> DetectionFile:
    return detections_from_dict(load_document(path, DETECTIONS_VERSION), str(path))


# ----------------------------------------------------------------------
# Joint map
# ----------------------------------------------------------------------


@dataclass
class NamedJointMap:
    """Serializable (model joint name, detection keypoint name) pairs."""

    pairs: list[tuple[str, str]]

    def resolve(self, model: BodyModelData, convention: KeypointConvention) -> JointMap:
        jmap = JointMap.from_names(model.joint_names, convention, self.pairs)
        jmap.validate_against(model.num_joints, convention)
        return jmap


def jointmap_to_dict(named: NamedJointMap) -> dict:
    return {
        "version": JOINTMAP_VERSION,
        "pairs": [[joint, keypoint] for joint, keypoint in named.pairs],
    }


def jointmap_from_dict(doc: dict, context: str = "jointmap") -> NamedJointMap:
    check_version(doc, JOINTMAP_VERSION, context)
    pairs_raw = _require(doc, "pairs", context)
    pairs = []
    for i, item in enumerate(pairs_raw):
        if not isinstance(item, (list, tuple)) or len(item) != 2:
            raise SchemaError(f"{context}: pair {i} must be [joint_name, keypoint_name]")
        pairs.append((str(item[0]), str(item[1])))
    return NamedJointMap(pairs)


def save_jointmap(named: NamedJointMap, path: str | Path) -> None:
    save_document(jointmap_to_dict(named), path)


def load_jointmap(path: str | Path) -> NamedJointMap:
    return jointmap_from_dict(load_document(path, JOINTMAP_VERSION), str(path))


# ----------------------------------------------------------------------
# Fit configuration
# ----------------------------------------------------------------------


def _stage_to_dict(weights: StageWeights) -> dict:
    return {
        "lambda_data": weights.lambda_data,
        "lambda_smooth": weights.lambda_smooth,
        "lambda_pose": weights.lambda_pose,
        "lambda_beta": weights.lambda_beta,
        "iterations": weights.iterations,
    }


def _stage_from_dict(doc: dict, context: str) -> StageWeights:
    try:
        return StageWeights(
            lambda_data=float(doc.get("lambda_data", 0.0)),
            lambda_smooth=float(doc.get("lambda_smooth", 0.0)),
            lambda_pose=float(doc.get("lambda_pose", 0.0)),
            lambda_beta=float(doc.get("lambda_beta", 0.0)),
            iterations=int(doc.get("iterations", 1)),
        )
    except (TypeError, ValueError, InputError) as exc:
        raise SchemaError(f"{context}: {exc}") from exc


def config_to_dict(cfg: FitConfig) -> dict:
    return {
        "version": CONFIG_VERSION,
        "stage1": _stage_to_dict(cfg.stage1),
        "stage2": _stage_to_dict(cfg.stage2),
        "lbfgs": {
            "step_scale": cfg.lbfgs.step_scale,
            "history": cfg.lbfgs.history,
            "grad_tol": cfg.lbfgs.grad_tol,
            "max_evals_per_iter": cfg.lbfgs.max_evals_per_iter,
        },
        "alpha_init": cfg.alpha_init,
        "camera_scale_init": cfg.camera_scale_init,
        "robust_sigma": cfg.robust.sigma,
        "confidence_floor": cfg.confidence_floor,
        "kid_clip": cfg.kid_clip,
    }


def config_from_dict(doc: dict, context: str = "config") -> FitConfig:
    check_version(doc, CONFIG_VERSION, context)
    defaults = FitConfig()
    lb = doc.get("lbfgs", {})
    try:
        return FitConfig(
            stage1=_stage_from_dict(doc.get("stage1", _stage_to_dict(defaults.stage1)), context),
            stage2=_stage_from_dict(doc.get("stage2", _stage_to_dict(defaults.stage2)), context),
            lbfgs=LbfgsOptions(
                step_scale=float(lb.get("step_scale", defaults.lbfgs.step_scale)),
                history=int(lb.get("history", defaults.lbfgs.history)),
                grad_tol=float(lb.get("grad_tol", defaults.lbfgs.grad_tol)),
                max_evals_per_iter=int(
                    lb.get("max_evals_per_iter", defaults.lbfgs.max_evals_per_iter)
                ),
            ),
            alpha_init=float(doc.get("alpha_init", defaults.alpha_init)),
            camera_scale_init=float(doc.get("camera_scale_init", defaults.camera_scale_init)),
            robust=RobustLossConfig(sigma=float(doc.get("robust_sigma", defaults.robust.sigma))),
            confidence_floor=float(doc.get("confidence_floor", defaults.confidence_floor)),
            kid_clip=float(doc.get("kid_clip", defaults.kid_clip)),
        )
    except (TypeError, ValueError, InputError) as exc:
        raise SchemaError(f"{context}: {exc}") from exc


def save_config(cfg: FitConfig, path: str | Path) -> None:
    save_document(config_to_dict(cfg), path)


def load_config(path: str | Path) -> FitConfig:
    return config_from_dict(load_document(path, CONFIG_VERSION), str(path))


# ----------------------------------------------------------------------
# Results
# ----------------------------------------------------------------------


@dataclass
class ResultBundle:
    """Fit output for one sequence: states, camera scale, diagnostics."""

    model_hash: str
    camera_scale: float
    states: list[PersonState]
    sequence_id: str = "seq-000"
    diagnostics: dict = field(default_factory=dict)


def _sanitize(value):
    """Make diagnostics JSON-safe: numpy scalars to floats, non-finite to None."""
    if isinstance(value, dict):
        return {str(k): _sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_sanitize(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_sanitize(v) for v in value.tolist()]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if np.isfinite(value) else None
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    return value


def results_to_dict(bundle: ResultBundle) -> dict:
    return {
        "version": RESULTS_VERSION,
        "sequence_id": bundle.sequence_id,
        "model_hash": bundle.model_hash,
        "camera_scale": bundle.camera_scale,
        "tracks": [
            {
                "track_id": state.track_id,
                "betas": state.betas.tolist(),
                "kid_factor": state.kid_factor,
                "frames": [
                    {
                        "frame_index": int(state.frame_indices[t]),
                        "global_orient": state.global_orient[t].tolist(),
                        "body_pose": state.body_pose[t].tolist(),
                        "trans": state.trans[t].tolist(),
                    }
                    for t in range(state.num_frames)
                ],
            }
            for state in bundle.states
        ],
        "diagnostics": _sanitize(bundle.diagnostics),
    }


def results_from_dict(doc: dict, context: str = "results") -> ResultBundle:
    check_version(doc, RESULTS_VERSION, context)
    states = []
    for ti, track_doc in enumerate(_require(doc, "tracks", context)):
        tctx = f"{context}: track {ti}"
        frames = _require(track_doc, "frames", tctx)
        if not frames:
            raise SchemaError(f"{tctx}: track has no frames")
        try:
            states.append(
                PersonState(
                    track_id=str(_require(track_doc, "track_id", tctx)),
                    frame_indices=np.asarray([f["frame_index"] for f in frames], dtype=int),
                    global_orient=np.asarray([f["global_orient"] for f in frames], dtype=float),
                    body_pose=np.asarray([f["body_pose"] for f in frames], dtype=float),
                    trans=np.asarray([f["trans"] for f in frames], dtype=float),
                    betas=np.asarray(_require(track_doc, "betas", tctx), dtype=float),
                    kid_factor=float(_require(track_doc, "kid_factor", tctx)),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"{tctx}: {exc}") from exc
    return ResultBundle(
        model_hash=str(_require(doc, "model_hash", context)),
        camera_scale=float(_require(doc, "camera_scale", context)),
        states=states,
        sequence_id=str(doc.get("sequence_id", "seq-000")),
        diagnostics=doc.get("diagnostics", {}),
    )


def save_results(bundle: ResultBundle, path: str | Path) -> None:
    save_document(results_to_dict(bundle), path)


def load_results(path: str | Path) -> ResultBundle:
    return results_from_dict(load_document(path, RESULTS_VERSION), str(path))
