"""FastAPI application exposing the fitting, metrics, synth and packaging core."""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..body_model import PoseParams, ShapeParams, forward
from ..dataio.formats import (
    ResultBundle,
    cameras_from_dict,
    cameras_to_dict,
    config_from_dict,
    detections_from_dict,
    detections_to_dict,
    jointmap_from_dict,
    jointmap_to_dict,
    model_content_hash,
    model_from_dict,
    model_to_dict,
    results_from_dict,
    results_to_dict,
)
from ..dataio.objio import obj_text
from ..dataio.package import DEFAULT_LICENSE_NOTE, build_package
from ..dataio.synth import SynthScenario, default_jointmap, make_toy_humanoid, synth_generate
from ..errors import AionfitError, InputError
from ..evaluation import evaluation_report
from ..fitter import FitConfig, fit
from ..keypoints import get_convention
from . import schemas


def create_app() -> FastAPI:
    app = FastAPI(
        title="aionfit",
        version=__version__,
        description="Age-inclusive body-model fitting to 2D keypoint tracks.",
    )

    @app.exception_handler(AionfitError)
    async def _aionfit_error(_request: Request, exc: AionfitError) -> JSONResponse:
        return JSONResponse(
            status_code=400,
            content={"detail": {"category": type(exc).__name__, "message": str(exc)}},
        )

    @app.get("/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/fit", response_model=schemas.FitResponse)
    def run_fit(req: schemas.FitRequest) -> schemas.FitResponse:
        model = model_from_dict(req.model)
        cams = cameras_from_dict(req.cameras)
        det = detections_from_dict(req.detections)
        convention = get_convention(det.convention)
        named = (
            jointmap_from_dict(req.jointmap)
            if req.jointmap is not None
            else default_jointmap(model, det.convention)
        )
        jmap = named.resolve(model, convention)
        cfg = config_from_dict(req.config) if req.config is not None else FitConfig()
        hints = None
        if req.hints is not None:
            hint_bundle = results_from_dict(req.hints, "hints")
            by_id = {s.track_id: s for s in hint_bundle.states}
            missing = [t.track_id for t in det.tracks if t.track_id not in by_id]
            if missing:
                raise InputError(f"hints missing for tracks: {missing}")
            hints = [by_id[t.track_id] for t in det.tracks]
        report = fit(model, det.tracks, cams, jmap, hints=hints, cfg=cfg)
        bundle = ResultBundle(
            model_hash=model_content_hash(model),
            camera_scale=report.camera_scale,
            states=report.states,
            sequence_id=req.sequence_id,
            diagnostics={
                "stages": [
                    {
                        "name": s.name,
                        "iterations": s.iterations,
                        "converged": s.converged,
                        "line_search_failed": s.line_search_failed,
                        "gradient_inf_norm": s.gradient_inf_norm,
                        "objective_trace": s.trace,
                    }
                    for s in report.stages
                ],
                "mean_reprojection_px": report.mean_reprojection_px,
                "reprojection_px": report.reprojection_px,
                "rejected_tracks": report.rejected_tracks,
            },
        )
        return schemas.FitResponse(results=results_to_dict(bundle))

    @app.post("/metrics", response_model=schemas.MetricsResponse)
    def run_metrics(req: schemas.MetricsRequest) -> schemas.MetricsResponse:
        model = model_from_dict(req.model)
        predicted = results_from_dict(req.predicted, "predicted")
        reference = results_from_dict(req.reference, "reference")
        cams = cameras_from_dict(req.cameras) if req.cameras is not None else None
        report = evaluation_report(model, predicted, reference, cams)
        return schemas.MetricsResponse(report=[schemas.MetricValue(**row) for row in report])

    @app.post("/synth", response_model=schemas.SynthResponse)
    def run_synth(req: schemas.SynthRequest) -> schemas.SynthResponse:
        model = make_toy_humanoid() if req.model is None else model_from_dict(req.model)
        spec = req.scenario
        kid = spec.kid_factors
        scenario = SynthScenario(
            frames=spec.frames,
            tracks=spec.tracks,
            kid_factors=tuple(kid) if isinstance(kid, list) else float(kid),
            noise_px=spec.noise_px,
            camera_path=spec.camera_path,
            pose_mode=spec.pose_mode,
            pose_scale=spec.pose_scale,
            orient_scale=spec.orient_scale,
        )
        out = synth_generate(model, scenario, seed=spec.seed)
        return schemas.SynthResponse(
            model=model_to_dict(model),
            cameras=cameras_to_dict(out.cameras),
            detections=detections_to_dict(out.detections),
            jointmap=jointmap_to_dict(out.jointmap),
            truth=results_to_dict(out.truth),
        )

    @app.post("/export-mesh", response_model=schemas.ExportMeshResponse)
    def run_export(req: schemas.ExportMeshRequest) -> schemas.ExportMeshResponse:
        model = model_from_dict(req.model)
        bundle = results_from_dict(req.results, "results")
        if bundle.model_hash != model_content_hash(model):
            raise InputError("results reference a different model (hash mismatch)")
        wanted = set(req.track_ids) if req.track_ids else None
        meshes = []
        for state in bundle.states:
            if wanted is not None and state.track_id not in wanted:
                continue
            shape = ShapeParams(state.betas, state.kid_factor)
            for t in range(0, state.num_frames, req.frame_stride):
                pose = PoseParams(state.global_orient[t], state.body_pose[t])
                mesh = forward(model, shape, pose)
                meshes.append(
                    schemas.MeshEntry(
                        track_id=state.track_id,
                        frame_index=int(state.frame_indices[t]),
                        obj=obj_text(mesh, state.trans[t], model.faces),
                    )
                )
        return schemas.ExportMeshResponse(meshes=meshes)

    @app.post("/package", response_model=schemas.PackageResponse)
    def run_package(req: schemas.PackageRequest) -> schemas.PackageResponse:
        bundles = [results_from_dict(doc, f"results[{i}]") for i, doc in enumerate(req.results)]
        if not bundles:
            raise InputError("no results supplied")
        model_hash = req.model_hash or bundles[0].model_hash
        note = req.license_note if req.license_note is not None else DEFAULT_LICENSE_NOTE
        pkg = build_package(bundles, model_hash, note)
        return schemas.PackageResponse(
            manifest=pkg.manifest,
            sequences=[results_to_dict(b) for b in pkg.sequences],
        )

    return app


app = create_app()
