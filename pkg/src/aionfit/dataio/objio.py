"""Wavefront OBJ export for posed meshes."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..body_model import MeshResult
from ..errors import InputError


def obj_text(mesh: MeshResult, trans: np.ndarray, faces: np.ndarray) -> str:
    """Render a mesh as OBJ text: world-space vertices, 1-indexed faces.

    Formatting is fixed at six decimals so identical meshes produce
    identical files.
    """
    faces = np.asarray(faces, dtype=int).reshape(-1, 3)
    vertices = mesh.vertices + np.asarray(trans, dtype=float).reshape(3)
    if not np.all(np.isfinite(vertices)):
        raise InputError("mesh vertices must be finite")
    if faces.size and (faces.min() < 0 or faces.max() >= vertices.shape[0]):
        raise InputError("face indices out of range")
    lines = [f"v {x:.6f} {y:.6f} {z:.6f}" for x, y, z in vertices]
    lines += [f"f {a + 1} {b + 1} {c + 1}" for a, b, c in faces]
    return "\n".join(lines) + "\n"


def export_obj(mesh: MeshResult, trans: np.ndarray, faces: np.ndarray, path: str | Path) -> None:
    """Write the mesh to an OBJ file; joints are not written."""
    Path(path).write_text(obj_text(mesh, trans, faces), encoding="utf-8")
