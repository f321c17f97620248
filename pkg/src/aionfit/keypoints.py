"""Keypoint detections, named conventions and the model-joint adapter."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InputError


@dataclass
class KeypointFrame:
    """2D detections for one identity in one frame."""

    frame_index: int
    points: np.ndarray  # (J, 2) pixels
    confidences: np.ndarray  # (J,) in [0, 1]

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 2)
        self.confidences = np.asarray(self.confidences, dtype=float).reshape(-1)
        if self.points.shape[0] != self.confidences.shape[0]:
            raise InputError("points and confidences must have matching length")
        if not np.all(np.isfinite(self.confidences)):
            raise InputError("confidences must be finite")
        if np.any(self.confidences < 0.0) or np.any(self.confidences > 1.0):
            raise InputError("confidences must lie in [0, 1]")


@dataclass
class KeypointTrack:
    """One identity's detections over a sequence of frames."""

    track_id: str
    frames: list[KeypointFrame]

    def __post_init__(self):
        indices = [f.frame_index for f in self.frames]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise InputError(f"track {self.track_id!r}: frame indices must strictly increase")

    @property
    def num_frames(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class KeypointConvention:
    """Named ordering of detection keypoints, with the facial subset declared."""

    name: str
    keypoint_names: tuple[str, ...]
    facial: tuple[str, ...] = ()

    def __post_init__(self):
        unknown = set(self.facial) - set(self.keypoint_names)
        if unknown:
            raise ConfigurationError(f"facial keypoints not in convention: {sorted(unknown)}")

    @property
    def size(self) -> int:
        return len(self.keypoint_names)

    def index_of(self, name: str) -> int:
        try:
            return self.keypoint_names.index(name)
        except ValueError:
            raise InputError(f"keypoint {name!r} not in convention {self.name!r}") from None

    @property
    def facial_indices(self) -> tuple[int, ...]:
        return tuple(self.keypoint_names.index(n) for n in self.facial)


COCO17 = KeypointConvention(
    name="coco17",
    keypoint_names=(
        "nose",
        "left_eye",
        "right_eye",
        "left_ear",
        "right_ear",
        "left_shoulder",
        "right_shoulder",
        "left_elbow",
        "right_elbow",
        "left_wrist",
        "right_wrist",
        "left_hip",
        "right_hip",
        "left_knee",
        "right_knee",
        "left_ankle",
        "right_ankle",
    ),
    facial=("nose", "left_eye", "right_eye", "left_ear", "right_ear"),
)

_REGISTRY: dict[str, KeypointConvention] = {COCO17.name: COCO17}


def register_convention(conv: KeypointConvention, replace: bool = False) -> None:
    if conv.name in _REGISTRY and not replace:
        raise ConfigurationError(f"convention {conv.name!r} already registered")
    _REGISTRY[conv.name] = conv


def get_convention(name: str) -> KeypointConvention:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise InputError(f"unknown keypoint convention {name!r}") from None


@dataclass(frozen=True)
class JointMap:
    """Pairs of (model joint index, detection keypoint index); may be partial.

    The detection side must be injective: two model joints cannot feed the
    same keypoint.
    """

    model_joints: tuple[int, ...]
    keypoints: tuple[int, ...]

    def __post_init__(self):
        if len(self.model_joints) != len(self.keypoints):
            raise InputError("joint map sides must have equal length")
        if len(set(self.keypoints)) != len(self.keypoints):
            raise InputError("joint map must be injective on the detection side")

    def __len__(self) -> int:
        return len(self.model_joints)

    @property
    def pairs(self) -> tuple[tuple[int, int], ...]:
        return tuple(zip(self.model_joints, self.keypoints))

    def validate_against(self, num_model_joints: int, convention: KeypointConvention) -> None:
        if self.model_joints and max(self.model_joints) >= num_model_joints:
            raise InputError("joint map references a model joint out of range")
        if self.model_joints and min(self.model_joints) < 0:
            raise InputError("joint map model indices must be nonnegative")
        if self.keypoints and (max(self.keypoints) >= convention.size or min(self.keypoints) < 0):
            raise InputError("joint map references a keypoint out of range")

    @classmethod
    def from_names(
        cls,
        joint_names: tuple[str, ...] | list[str],
        convention: KeypointConvention,
        pairs: list[tuple[str, str]],
    ) -> "JointMap":
        joint_names = list(joint_names)
        model_idx, kp_idx = [], []
        for joint_name, kp_name in pairs:
            if joint_name not in joint_names:
                raise InputError(f"model joint {joint_name!r} not found")
            model_idx.append(joint_names.index(joint_name))
            kp_idx.append(convention.index_of(kp_name))
        return cls(tuple(model_idx), tuple(kp_idx))
