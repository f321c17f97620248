"""Pydantic request/response envelopes for the HTTP service.

Document payloads (model, cameras, detections, ...) travel as the same
versioned JSON objects the file formats use; the core loaders validate them.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class FitRequest(BaseModel):
    model: dict
    cameras: dict
    detections: dict
    jointmap: dict | None = None
    config: dict | None = None
    hints: dict | None = None  # results-schema document in the camera frame
    sequence_id: str = "seq-000"


class FitResponse(BaseModel):
    results: dict


class MetricsRequest(BaseModel):
    model: dict
    predicted: dict
    reference: dict
    cameras: dict | None = None


class MetricValue(BaseModel):
    name: str
    value: float
    units: str


class MetricsResponse(BaseModel):
    report: list[MetricValue]


class ScenarioSpec(BaseModel):
    frames: int = Field(ge=1)
    tracks: int = Field(default=1, ge=1)
    kid_factors: float | list[float] = 1.0
    noise_px: float = Field(default=0.0, ge=0.0)
    camera_path: str = "static"
    pose_mode: str = "zero"
    pose_scale: float = 0.0
    orient_scale: float = 0.4
    seed: int = 0


class SynthRequest(BaseModel):
    scenario: ScenarioSpec
    model: dict | None = None  # defaults to the bundled toy humanoid


class SynthResponse(BaseModel):
    model: dict
    cameras: dict
    detections: dict
    jointmap: dict
    truth: dict


class ExportMeshRequest(BaseModel):
    model: dict
    results: dict
    track_ids: list[str] | None = None
    frame_stride: int = Field(default=1, ge=1)


class MeshEntry(BaseModel):
    track_id: str
    frame_index: int
    obj: str


class ExportMeshResponse(BaseModel):
    meshes: list[MeshEntry]


class PackageRequest(BaseModel):
    results: list[dict]
    model_hash: str | None = None  # defaults to the hash carried by the results
    license_note: str | None = None


class PackageResponse(BaseModel):
    manifest: dict
    sequences: list[dict]
