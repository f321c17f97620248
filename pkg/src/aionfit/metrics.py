"""Evaluation metrics: joint errors, keypoint accuracy, height bias, parameter losses."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, MetricError


@dataclass(frozen=True)
class EvalPair:
    """One prediction/reference pair with its units declared."""

    predicted: np.ndarray
    reference: np.ndarray
    units: str

    def __post_init__(self):
        object.__setattr__(self, "predicted", np.asarray(self.predicted, dtype=float))
        object.__setattr__(self, "reference", np.asarray(self.reference, dtype=float))
        if self.predicted.shape != self.reference.shape:
            raise InputError(
                f"shape mismatch: {self.predicted.shape} vs {self.reference.shape}"
            )
        if not self.units:
            raise InputError("units must be declared")


def mpjpe(pred: np.ndarray, ref: np.ndarray, root_index: int = 0, align_root: bool = True) -> float:
    """Mean per-joint position error after root alignment, in the input units.

    Each skeleton is shifted so its root joint sits at the origin before the
    joint distances are averaged. Procrustes alignment is deliberately not
    applied here; pass align_root=False for raw coordinates.
    """
    pred = np.asarray(pred, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if pred.shape != ref.shape or pred.ndim != 2 or pred.shape[1] != 3:
        raise InputError(f"joint arrays must share shape (J, 3), got {pred.shape} vs {ref.shape}")
    if align_root:
        pred = pred - pred[root_index]
        ref = ref - ref[root_index]
    return float(np.mean(np.linalg.norm(pred - ref, axis=1)))


def pck(pred: np.ndarray, ref: np.ndarray, threshold_fraction: float) -> float:
    """Fraction of keypoints within threshold_fraction of the normalization length.

    The normalization length is the longer side of the reference-keypoint
    bounding box.
    """
    if threshold_fraction <= 0:
        raise InputError("threshold_fraction must be positive")
    pred = np.asarray(pred, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if pred.shape != ref.shape or pred.ndim != 2 or pred.shape[1] != 2:
        raise InputError(f"keypoint arrays must share shape (J, 2), got {pred.shape} vs {ref.shape}")
    extent = ref.max(axis=0) - ref.min(axis=0)
    norm = float(extent.max())
    if norm <= 0:
        raise MetricError("reference keypoints have a degenerate bounding box")
    errors = np.linalg.norm(pred - ref, axis=1)
    return float(np.mean(errors <= threshold_fraction * norm))


def ahd(pairs: list[tuple[float, float]]) -> float:
    """Signed mean height difference, reference minus predicted."""
    if not pairs:
        raise MetricError("height difference of an empty set is undefined")
    return float(np.mean([ref - pred for ref, pred in pairs]))


def aphd(pairs: list[tuple[float, float]]) -> float:
    """Signed mean percentage height difference relative to the reference.

    Negative values mean systematic over-prediction of height.
    """
    if not pairs:
        raise MetricError("percentage height difference of an empty set is undefined")
    for ref, _ in pairs:
        if ref <= 0:
            raise MetricError(f"reference height must be positive, got {ref}")
    return float(100.0 * np.mean([(ref - pred) / ref for ref, pred in pairs]))


def param_l2(
    pred_pose: np.ndarray,
    pred_betas: np.ndarray,
    ref_pose: np.ndarray,
    ref_betas: np.ndarray,
) -> float:
    """Squared parameter distance: |pose - pose*|^2 + |betas - betas*|^2."""
    pred_pose = np.asarray(pred_pose, dtype=float)
    ref_pose = np.asarray(ref_pose, dtype=float)
    pred_betas = np.asarray(pred_betas, dtype=float)
    ref_betas = np.asarray(ref_betas, dtype=float)
    if pred_pose.shape != ref_pose.shape:
        raise InputError("pose arrays must share a shape")
    if pred_betas.shape != ref_betas.shape:
        raise InputError("shape-coefficient arrays must share a shape")
    dp = pred_pose - ref_pose
    db = pred_betas - ref_betas
    return float(np.sum(dp * dp) + np.sum(db * db))


def kp_l1_3d(pred: np.ndarray, ref: np.ndarray) -> float:
    """Elementwise absolute error summed over 3D keypoints."""
    pred = np.asarray(pred, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if pred.shape != ref.shape:
        raise InputError(f"shape mismatch: {pred.shape} vs {ref.shape}")
    return float(np.sum(np.abs(pred - ref)))


def kp_l1_2d(projected: np.ndarray, ref: np.ndarray, visible: np.ndarray | None = None) -> float:
    """Elementwise absolute error summed over visible projected keypoints."""
    projected = np.asarray(projected, dtype=float)
    ref = np.asarray(ref, dtype=float)
    if projected.shape != ref.shape or projected.ndim != 2 or projected.shape[1] != 2:
        raise InputError(f"keypoint arrays must share shape (J, 2), got {projected.shape} vs {ref.shape}")
    diff = np.abs(projected - ref)
    if visible is not None:
        visible = np.asarray(visible, dtype=bool).reshape(-1)
        if visible.shape[0] != projected.shape[0]:
            raise InputError("visibility mask length mismatch")
        diff = diff[visible]
    return float(np.sum(diff))
