"""Anonymized dataset packaging: manifests, verification, image-payload checks.

A package is a directory holding a manifest plus one results file per
sequence. Verification confirms the manifest matches the contents and that
no payload carries an image signature; mesh parameters stand in for any
identifiable imagery.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from ..errors import PackageError, SchemaError
from .formats import ResultBundle, canonical_json, results_from_dict, results_to_dict

PACKAGE_VERSION = "aionfit-package/1"
DEFAULT_LICENSE_NOTE = (
    "Contains derived 3D body parameters only; no imagery. "
    "Use remains subject to the source recordings' license."
)

# Magic prefixes of common raster formats; any payload starting with one of
# these fails verification. WEBP is handled separately (RIFF container).
IMAGE_SIGNATURES: tuple[bytes, ...] = (
    b"\x89PNG\r\n\x1a\n",
    b"\xff\xd8\xff",
    b"GIF87a",
    b"GIF89a",
    b"II*\x00",
    b"MM\x00*",
    b"BM",
)


@dataclass
class DatasetPackage:
    """In-memory package: manifest plus the sequence payloads."""

    manifest: dict
    sequences: list[ResultBundle]


def _sequence_entry(bundle: ResultBundle) -> dict:
    return {
        "id": bundle.sequence_id,
        "tracks": len(bundle.states),
        "frames": int(sum(s.num_frames for s in bundle.states)),
    }


def build_package(
    results: list[ResultBundle],
    model_hash: str,
    license_note: str = DEFAULT_LICENSE_NOTE,
) -> DatasetPackage:
    """Assemble and validate the package structure in memory."""
    if not results:
        raise PackageError("cannot package an empty result list")
    seen = set()
    for bundle in results:
        if bundle.model_hash != model_hash:
            raise PackageError(
                f"sequence {bundle.sequence_id!r} references model {bundle.model_hash}, "
                f"package declares {model_hash}"
            )
        if bundle.sequence_id in seen:
            raise PackageError(f"duplicate sequence id {bundle.sequence_id!r}")
        seen.add(bundle.sequence_id)
    manifest = {
        "version": PACKAGE_VERSION,
        "model_hash": model_hash,
        "license_note": license_note,
        "sequences": [_sequence_entry(b) for b in results],
    }
    return DatasetPackage(manifest=manifest, sequences=list(results))


def write_package(pkg: DatasetPackage, out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    (out_dir / "sequences").mkdir(parents=True, exist_ok=True)
    (out_dir / "manifest.json").write_text(canonical_json(pkg.manifest), encoding="utf-8")
    for bundle in pkg.sequences:
        path = out_dir / "sequences" / f"{bundle.sequence_id}.json"
        path.write_text(canonical_json(results_to_dict(bundle)), encoding="utf-8")
    return out_dir


def load_package(package_dir: str | Path) -> DatasetPackage:
    package_dir = Path(package_dir)
    manifest_path = package_dir / "manifest.json"
    if not manifest_path.exists():
        raise PackageError(f"{package_dir}: no manifest.json")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise PackageError(f"{manifest_path}: invalid JSON: {exc}") from exc
    if manifest.get("version") != PACKAGE_VERSION:
        raise PackageError(f"{manifest_path}: unknown version {manifest.get('version')!r}")
    sequences = []
    for entry in manifest.get("sequences", []):
        path = package_dir / "sequences" / f"{entry['id']}.json"
        if not path.exists():
            raise PackageError(f"manifest lists sequence {entry['id']!r} but {path} is missing")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
            sequences.append(results_from_dict(doc, str(path)))
        except (json.JSONDecodeError, SchemaError) as exc:
            raise PackageError(f"{path}: {exc}") from exc
    return DatasetPackage(manifest=manifest, sequences=sequences)


def _looks_like_image(path: Path) -> bool:
    head = path.read_bytes()[:16]
    if any(head.startswith(sig) for sig in IMAGE_SIGNATURES):
        return True
    return head.startswith(b"RIFF") and head[8:12] == b"WEBP"


def verify_package(package_dir: str | Path) -> dict:
    """Check manifest consistency and the absence of image payloads.

    Returns the manifest on success; raises PackageError otherwise.
    """
    package_dir = Path(package_dir)
    pkg = load_package(package_dir)
    listed = {entry["id"]: entry for entry in pkg.manifest.get("sequences", [])}
    if not listed:
        raise PackageError(f"{package_dir}: manifest lists no sequences")
    actual = {bundle.sequence_id: bundle for bundle in pkg.sequences}
    if set(listed) != set(actual):
        raise PackageError(f"{package_dir}: manifest does not match the stored sequences")
    for seq_id, entry in listed.items():
        got = _sequence_entry(actual[seq_id])
        if got != entry:
            raise PackageError(
                f"{package_dir}: sequence {seq_id!r} counts {got} do not match manifest {entry}"
            )
        if actual[seq_id].model_hash != pkg.manifest.get("model_hash"):
            raise PackageError(f"{package_dir}: sequence {seq_id!r} has a foreign model hash")
    expected_files = {package_dir / "manifest.json"} | {
        package_dir / "sequences" / f"{seq_id}.json" for seq_id in listed
    }
    for path in sorted(package_dir.rglob("*")):
        if path.is_dir():
            continue
        if path not in expected_files:
            raise PackageError(f"{package_dir}: unexpected payload {path.name}")
        if _looks_like_image(path):
            raise PackageError(f"{package_dir}: {path.name} carries an image signature")
    return pkg.manifest


def package_dataset(
    results: list[ResultBundle],
    model_hash: str,
    out_path: str | Path,
    license_note: str = DEFAULT_LICENSE_NOTE,
) -> DatasetPackage:
    """Build, write and verify a dataset package in one step."""
    pkg = build_package(results, model_hash, license_note)
    write_package(pkg, out_path)
    verify_package(out_path)
    return pkg
