"""Command-line front end: a thin client for the aionfit service.

Subcommands mirror the service endpoints (fit, metrics, synth, export-mesh,
package) plus `serve` to run the HTTP service itself. Without --server the
service runs in-process, so everything works offline. Exit codes: 0 success,
1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .dataio.formats import (
    CAMERAS_VERSION,
    CONFIG_VERSION,
    DETECTIONS_VERSION,
    JOINTMAP_VERSION,
    MODEL_VERSION,
    RESULTS_VERSION,
    canonical_json,
    load_document,
    results_from_dict,
)
from .dataio.package import DEFAULT_LICENSE_NOTE, DatasetPackage, verify_package, write_package
from .errors import AionfitError, SchemaError
from .fitter import FitConfig
from .service.client import ServiceClient

MODEL_PATH_ENV = "AIONFIT_MODEL_PATH"
SERVER_ENV = "AIONFIT_SERVER"


def resolve_model_path(arg: str) -> Path:
    """Use the argument directly, or look it up under $AIONFIT_MODEL_PATH."""
    path = Path(arg)
    if path.exists():
        return path
    search = os.environ.get(MODEL_PATH_ENV)
    if search:
        candidate = Path(search) / arg
        if candidate.exists():
            return candidate
    raise SchemaError(f"model file not found: {arg} (searched ${MODEL_PATH_ENV} too)")


def _write(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(doc), encoding="utf-8")


def _config_payload(args) -> dict | None:
    """Merge the optional config file with explicit flag overrides."""
    overrides = {
        ("stage1", "iterations"): args.stage1_iterations,
        ("stage1", "lambda_data"): args.stage1_lambda_data,
        ("stage2", "iterations"): args.stage2_iterations,
        ("stage2", "lambda_data"): args.stage2_lambda_data,
        ("stage2", "lambda_smooth"): args.stage2_lambda_smooth,
        ("stage2", "lambda_pose"): args.stage2_lambda_pose,
        ("stage2", "lambda_beta"): args.stage2_lambda_beta,
        ("lbfgs", "step_scale"): args.lbfgs_step_scale,
        ("lbfgs", "history"): args.lbfgs_history,
        ("lbfgs", "grad_tol"): args.lbfgs_grad_tol,
        ("lbfgs", "max_evals_per_iter"): args.lbfgs_max_evals,
        ("alpha_init",): args.alpha_init,
        ("camera_scale_init",): args.camera_scale_init,
        ("robust_sigma",): args.sigma,
        ("confidence_floor",): args.confidence_floor,
        ("kid_clip",): args.kid_clip,
        ("kid_temp",): args.kid_temp,
    }
    set_overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.config is None and not set_overrides:
        return None
    if args.config is not None:
        doc = load_document(args.config, CONFIG_VERSION)
    else:
        from .dataio.formats import config_to_dict

        doc = config_to_dict(FitConfig())
    for key, value in set_overrides.items():
        target = doc
        for part in key[:-1]:
            target = target.setdefault(part, {})
        target[key[-1]] = value
    return doc


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("fit configuration (defaults: published schedule)")
    group.add_argument("--config", help="config file (aionfit-config/1); flags override it")
    group.add_argument("--stage1-iterations", type=int)
    group.add_argument("--stage1-lambda-data", type=float)
    group.add_argument("--stage2-iterations", type=int)
    group.add_argument("--stage2-lambda-data", type=float)
    group.add_argument("--stage2-lambda-smooth", type=float)
    group.add_argument("--stage2-lambda-pose", type=float)
    group.add_argument("--stage2-lambda-beta", type=float)
    group.add_argument("--lbfgs-step-scale", type=float)
    group.add_argument("--lbfgs-history", type=int)
    group.add_argument("--lbfgs-grad-tol", type=float)
    group.add_argument("--lbfgs-max-evals", type=int)
    group.add_argument("--alpha-init", type=float)
    group.add_argument("--camera-scale-init", type=float)
    group.add_argument("--sigma", type=float, help="robust loss scale in pixels")
    group.add_argument("--confidence-floor", type=float)
    group.add_argument("--kid-clip", type=float)
    group.add_argument("--kid-temp", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aionfit",
        description="Fit an age-inclusive body model to 2D keypoint tracks.",
    )
    parser.add_argument(
        "--server",
        default=os.environ.get(SERVER_ENV),
        help=f"service URL; default runs the service in-process (${SERVER_ENV})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit the model to detections and cameras")
    p.add_argument("--model", required=True, help="model file (aionfit-model/1)")
    p.add_argument("--cameras", required=True, help="camera file (aionfit-cameras/1)")
    p.add_argument("--detections", required=True, help="detections file (aionfit-detections/1)")
    p.add_argument("--jointmap", help="joint map file (aionfit-jointmap/1); default by names")
    p.add_argument("--hints", help="camera-frame initial estimates (aionfit-results/1)")
    p.add_argument("--out", required=True, help="output results file")
    p.add_argument("--sequence-id", default="seq-000")
    _add_config_flags(p)

    p = sub.add_parser("metrics", help="compare predicted results to a reference")
    p.add_argument("--model", required=True)
    p.add_argument("--predicted", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--cameras", help="camera file enabling the 2D metrics")
    p.add_argument("--out", help="write the machine-readable report here")

    p = sub.add_parser("synth", help="generate a synthetic scenario")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--model", help="model file; default is the bundled toy humanoid")
    p.add_argument("--frames", type=int, required=True)
    p.add_argument("--tracks", type=int, default=1)
    p.add_argument(
        "--kid-factor",
        type=float,
        action="append",
        help="true blend weight; repeat per track (default 1.0)",
    )
    p.add_argument("--noise-px", type=float, default=0.0)
    p.add_argument("--camera-path", choices=("static", "orbit", "line"), default="static")
    p.add_argument("--pose-mode", choices=("zero", "constant"), default="zero")
    p.add_argument("--pose-scale", type=float, default=0.0)
    p.add_argument("--orient-scale", type=float, default=0.4)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("export-mesh", help="write per-frame OBJ meshes from results")
    p.add_argument("--model", required=True)
    p.add_argument("--results", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--track", action="append", help="restrict to these track ids")
    p.add_argument("--stride", type=int, default=1, help="export every Nth frame")

    p = sub.add_parser("package", help="bundle result files into a dataset package")
    p.add_argument("results", nargs="+", help="result files (aionfit-results/1)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--license-note", default=None)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def _cmd_fit(args, client: ServiceClient) -> int:
    payload = {
        "model": load_document(resolve_model_path(args.model), MODEL_VERSION),
        "cameras": load_document(args.cameras, CAMERAS_VERSION),
        "detections": load_document(args.detections, DETECTIONS_VERSION),
        "sequence_id": args.sequence_id,
    }
    if args.jointmap:
        payload["jointmap"] = load_document(args.jointmap, JOINTMAP_VERSION)
    if args.hints:
        payload["hints"] = load_document(args.hints, RESULTS_VERSION)
    config = _config_payload(args)
    if config is not None:
        payload["config"] = config
    response = client.post("/fit", payload)
    results = response["results"]
    _write(Path(args.out), results)
    diag = results.get("diagnostics", {})
    print(f"wrote {args.out}")
    print(f"camera scale: {results.get('camera_scale'):.6f}")
    mean_px = diag.get("mean_reprojection_px")
    if mean_px is not None:
        print(f"mean reprojection: {mean_px:.3f} px")
    for track in results.get("tracks", []):
        print(f"track {track['track_id']}: kid_factor={track['kid_factor']:.4f}")
    return 0


def _cmd_metrics(args, client: ServiceClient) -> int:
    payload = {
        "model": load_document(resolve_model_path(args.model), MODEL_VERSION),
        "predicted": load_document(args.predicted, RESULTS_VERSION),
        "reference": load_document(args.reference, RESULTS_VERSION),
    }
    if args.cameras:
        payload["cameras"] = load_document(args.cameras, CAMERAS_VERSION)
    response = client.post("/metrics", payload)
    rows = response["report"]
    width = max(len(r["name"]) for r in rows)
    for row in rows:
        print(f"{row['name']:<{width}}  {row['value']:>14.6f}  {row['units']}")
    if args.out:
        _write(Path(args.out), {"report": rows})
    return 0


def _cmd_synth(args, client: ServiceClient) -> int:
    kid = args.kid_factor if args.kid_factor else [1.0]
    scenario = {
        "frames": args.frames,
        "tracks": args.tracks,
        "kid_factors": kid[0] if len(kid) == 1 else kid,
        "noise_px": args.noise_px,
        "camera_path": args.camera_path,
        "pose_mode": args.pose_mode,
        "pose_scale": args.pose_scale,
        "orient_scale": args.orient_scale,
        "seed": args.seed,
    }
    payload: dict = {"scenario": scenario}
    if args.model:
        payload["model"] = load_document(resolve_model_path(args.model), MODEL_VERSION)
    response = client.post("/synth", payload)
    out = Path(args.out_dir)
    for name in ("model", "cameras", "detections", "jointmap", "truth"):
        _write(out / f"{name}.json", response[name])
        print(f"wrote {out / f'{name}.json'}")
    return 0


def _cmd_export_mesh(args, client: ServiceClient) -> int:
    payload = {
        "model": load_document(resolve_model_path(args.model), MODEL_VERSION),
        "results": load_document(args.results, RESULTS_VERSION),
        "frame_stride": args.stride,
    }
    if args.track:
        payload["track_ids"] = args.track
    response = client.post("/export-mesh", payload)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for entry in response["meshes"]:
        path = out / f"{entry['track_id']}_frame{entry['frame_index']:05d}.obj"
        path.write_text(entry["obj"], encoding="utf-8")
    print(f"wrote {len(response['meshes'])} meshes to {out}")
    return 0


def _cmd_package(args, client: ServiceClient) -> int:
    payload = {"results": [load_document(p, RESULTS_VERSION) for p in args.results]}
    if args.license_note is not None:
        payload["license_note"] = args.license_note
    response = client.post("/package", payload)
    pkg = DatasetPackage(
        manifest=response["manifest"],
        sequences=[results_from_dict(doc) for doc in response["sequences"]],
    )
    write_package(pkg, args.out_dir)
    verify_package(args.out_dir)
    print(f"packaged {len(pkg.sequences)} sequences into {args.out_dir} (verified)")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "serve":
        return _cmd_serve(args)
    handlers = {
        "fit": _cmd_fit,
        "metrics": _cmd_metrics,
        "synth": _cmd_synth,
        "export-mesh": _cmd_export_mesh,
        "package": _cmd_package,
    }
    try:
        with ServiceClient(args.server) as client:
            return handlers[args.command](args, client)
    except AionfitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
