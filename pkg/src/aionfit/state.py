"""Per-person parameter state and the flat free-parameter layout."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InputError

# Block kinds in the order they appear inside each track's segment.
PER_FRAME_KINDS = ("global_orient", "trans", "body_pose")
PER_TRACK_KINDS = ("betas", "kid_factor")
ALL_KINDS = PER_FRAME_KINDS + PER_TRACK_KINDS


@dataclass
class PersonState:
    """All parameters of one identity track.

    Pose and translation are per frame; shape (betas and kid_factor) is
    shared over the whole track.
    """

    track_id: str
    frame_indices: np.ndarray  # (T,) int
    global_orient: np.ndarray  # (T, 3)
    body_pose: np.ndarray  # (T, K, 3)
    trans: np.ndarray  # (T, 3)
    betas: np.ndarray  # (10,)
    kid_factor: float

    def __post_init__(self):
        self.frame_indices = np.asarray(self.frame_indices, dtype=int).reshape(-1)
        self.global_orient = np.asarray(self.global_orient, dtype=float)
        self.body_pose = np.asarray(self.body_pose, dtype=float)
        self.trans = np.asarray(self.trans, dtype=float)
        self.betas = np.asarray(self.betas, dtype=float).reshape(-1)
        t = self.frame_indices.shape[0]
        if self.global_orient.shape != (t, 3) or self.trans.shape != (t, 3):
            raise InputError("global_orient and trans must be (T, 3)")
        if self.body_pose.ndim != 3 or self.body_pose.shape[0] != t or self.body_pose.shape[2] != 3:
            raise InputError("body_pose must be (T, K, 3)")
        if self.betas.shape != (10,):
            raise InputError("betas must have 10 entries")

    @property
    def num_frames(self) -> int:
        return int(self.frame_indices.shape[0])

    @property
    def joint_count(self) -> int:
        return int(self.body_pose.shape[1])

    def copy(self) -> "PersonState":
        return PersonState(
            track_id=self.track_id,
            frame_indices=self.frame_indices.copy(),
            global_orient=self.global_orient.copy(),
            body_pose=self.body_pose.copy(),
            trans=self.trans.copy(),
            betas=self.betas.copy(),
            kid_factor=self.kid_factor,
        )

    @classmethod
    def zeros(cls, track_id: str, frame_indices, joint_count: int) -> "PersonState":
        frame_indices = np.asarray(frame_indices, dtype=int)
        t = frame_indices.shape[0]
        return cls(
            track_id=track_id,
            frame_indices=frame_indices,
            global_orient=np.zeros((t, 3)),
            body_pose=np.zeros((t, joint_count, 3)),
            trans=np.zeros((t, 3)),
            betas=np.zeros(10),
            kid_factor=0.0,
        )


@dataclass
class TrackGradients:
    """Per-track gradient accumulators matching PersonState block shapes."""

    global_orient: np.ndarray
    trans: np.ndarray
    body_pose: np.ndarray
    betas: np.ndarray
    kid_factor: float = 0.0

    @classmethod
    def zeros_like(cls, state: PersonState) -> "TrackGradients":
        return cls(
            global_orient=np.zeros_like(state.global_orient),
            trans=np.zeros_like(state.trans),
            body_pose=np.zeros_like(state.body_pose),
            betas=np.zeros_like(state.betas),
        )


class FreeParameterLayout:
    """Maps free parameter blocks to and from one flat vector.

    The flat vector concatenates, for each track in order, the free blocks
    (global_orient, trans, body_pose per frame; betas, kid_factor per track)
    and finally the global camera-scale slot when enabled. flatten and
    unflatten are exact inverses: they only gather and scatter values.
    Bounded reparameterizations live in BoundedReparam, not here.
    """

    def __init__(self, states: list[PersonState], free_kinds, optimize_camera_scale: bool):
        free_kinds = tuple(free_kinds)
        unknown = set(free_kinds) - set(ALL_KINDS)
        if unknown:
            raise InputError(f"unknown parameter kinds: {sorted(unknown)}")
        self.free_kinds = free_kinds
        self.optimize_camera_scale = bool(optimize_camera_scale)
        self._slices: list[dict[str, slice]] = []
        self.kid_indices: list[int] = []
        offset = 0
        for state in states:
            t, k = state.num_frames, state.joint_count
            sizes = {
                "global_orient": t * 3,
                "trans": t * 3,
                "body_pose": t * k * 3,
                "betas": 10,
                "kid_factor": 1,
            }
            track_slices = {}
            for kind in ALL_KINDS:
                if kind in free_kinds:
                    track_slices[kind] = slice(offset, offset + sizes[kind])
                    if kind == "kid_factor":
                        self.kid_indices.append(offset)
                    offset += sizes[kind]
            self._slices.append(track_slices)
        self.camera_scale_index = offset if self.optimize_camera_scale else None
        self.size = offset + (1 if self.optimize_camera_scale else 0)

    def flatten(self, states: list[PersonState], camera_scale: float) -> np.ndarray:
        if len(states) != len(self._slices):
            raise InputError("layout was built for a different number of tracks")
        x = np.empty(self.size)
        for state, track_slices in zip(states, self._slices):
            for kind, sl in track_slices.items():
                if kind == "kid_factor":
                    x[sl] = state.kid_factor
                else:
                    x[sl] = getattr(state, kind).reshape(-1)
        if self.camera_scale_index is not None:
            x[self.camera_scale_index] = camera_scale
        return x

    def unflatten(
        self, x: np.ndarray, template_states: list[PersonState], camera_scale: float
    ) -> tuple[list[PersonState], float]:
        """Rebuild states from the flat vector; frozen blocks are copied verbatim."""
        if x.shape != (self.size,):
            raise InputError(f"expected flat vector of length {self.size}, got {x.shape}")
        states = []
        for template, track_slices in zip(template_states, self._slices):
            state = template.copy()
            for kind, sl in track_slices.items():
                if kind == "kid_factor":
                    state.kid_factor = float(x[sl][0])
                else:
                    block = getattr(state, kind)
                    block[...] = x[sl].reshape(block.shape)
            states.append(state)
        if self.camera_scale_index is not None:
            camera_scale = float(x[self.camera_scale_index])
        return states, camera_scale

    def scatter_gradient(self, track_grads: list[TrackGradients], scale_grad: float) -> np.ndarray:
        """Assemble the flat gradient for the free blocks."""
        g = np.zeros(self.size)
        for grads, track_slices in zip(track_grads, self._slices):
            for kind, sl in track_slices.items():
                if kind == "kid_factor":
                    g[sl] = grads.kid_factor
                else:
                    g[sl] = getattr(grads, kind).reshape(-1)
        if self.camera_scale_index is not None:
            g[self.camera_scale_index] = scale_grad
        return g


class BoundedReparam:
    """Smooth change of variables keeping bounded parameters feasible.

    The kid_factor entries ride through a tempered sigmoid (so they stay in
    (0, 1)) and the camera-scale entry through an exponential (so it stays
    positive). The optimizer works on the internal vector; the layout sees
    the external one. ``kid_temp`` rescales the logistic: smaller values make
    one internal unit move the blend weight further, which keeps the
    direction visible to the optimizer when the weight starts near a bound.
    """

    def __init__(self, layout: FreeParameterLayout, kid_clip: float = 1e-2, kid_temp: float = 1.0):
        if not 0.0 < kid_clip < 0.5:
            raise InputError("kid_clip must lie in (0, 0.5)")
        if not kid_temp > 0:
            raise InputError("kid_temp must be positive")
        self.sigmoid_indices = np.asarray(layout.kid_indices, dtype=int)
        self.log_index = layout.camera_scale_index
        self.kid_clip = float(kid_clip)
        self.kid_temp = float(kid_temp)

    def to_internal(self, x: np.ndarray) -> np.ndarray:
        y = np.array(x, dtype=float)
        if self.sigmoid_indices.size:
            p = np.clip(x[self.sigmoid_indices], self.kid_clip, 1.0 - self.kid_clip)
            y[self.sigmoid_indices] = self.kid_temp * np.log(p / (1.0 - p))
        if self.log_index is not None:
            y[self.log_index] = np.log(x[self.log_index])
        return y

    def to_external(self, y: np.ndarray) -> np.ndarray:
        x = np.array(y, dtype=float)
        if self.sigmoid_indices.size:
            x[self.sigmoid_indices] = _sigmoid(y[self.sigmoid_indices] / self.kid_temp)
        if self.log_index is not None:
            x[self.log_index] = np.exp(y[self.log_index])
        return x

    def chain_gradient(self, y: np.ndarray, grad_external: np.ndarray) -> np.ndarray:
        g = np.array(grad_external, dtype=float)
        if self.sigmoid_indices.size:
            s = _sigmoid(y[self.sigmoid_indices] / self.kid_temp)
            g[self.sigmoid_indices] *= s * (1.0 - s) / self.kid_temp
        if self.log_index is not None:
            g[self.log_index] *= np.exp(y[self.log_index])
        return g


def _sigmoid(y: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * y))
