"""Detection-file filtering helpers."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigurationError
from ..keypoints import KeypointTrack, get_convention
from .formats import DetectionFile


def filter_by_face_confidence(det: DetectionFile, floor: float = 0.7) -> DetectionFile:
    """Drop frames whose mean facial-keypoint confidence does not exceed the floor.

    Track structure is preserved; tracks may come back empty when every
    frame fails the check.
    """
    convention = get_convention(det.convention)
    facial = convention.facial_indices
    if not facial:
        raise ConfigurationError(
            f"convention {convention.name!r} declares no facial keypoints"
        )
    facial = np.asarray(facial, dtype=int)
    tracks = []
    for track in det.tracks:
        kept = [f for f in track.frames if float(np.mean(f.confidences[facial])) > floor]
        tracks.append(KeypointTrack(track_id=track.track_id, frames=kept))
    return DetectionFile(convention=det.convention, tracks=tracks)
