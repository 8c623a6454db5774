"""Mesh and point-cloud files through trimesh: binary PLY with extra vertex properties, and OBJ."""

import io
import logging
from pathlib import Path

import numpy as np
import trimesh
from trimesh.exchange.ply import export_ply, load_ply

from common.errors import FormatError
from geometry.mesh import TriMesh

logger = logging.getLogger(__name__)

MESH_FORMATS = ("ply", "obj")
POSITION_FIELDS = ("x", "y", "z")


def to_trimesh(mesh, with_noise=True):
    """Wrap a TriMesh for export; ``noise`` becomes a float32 vertex attribute."""
    attributes = {}
    if with_noise and mesh.noise is not None:
        attributes["noise"] = mesh.noise.astype(np.float32)
    return trimesh.Trimesh(mesh.vertices, mesh.faces, vertex_attributes=attributes, process=False)


def write_ply(path, geometry):
    """Write a trimesh geometry (mesh or point cloud) as binary little-endian PLY."""
    Path(path).write_bytes(export_ply(geometry, encoding="binary"))


def read_ply(path):
    """Read a PLY file back into arrays.

    Returns:
        Tuple ``(vertices, faces, properties)``: float64 positions, an ``(F, 3)``
        face array (``None`` without a face element) and a dict of the remaining
        vertex properties.

    Raises:
        FormatError: If the file is not a PLY file or is truncated or corrupt.
    """
    data = Path(path).read_bytes()
    if not data.startswith(b"ply") or b"end_header" not in data:
        raise FormatError(f"{path} is not a PLY file")
    try:
        kwargs = load_ply(io.BytesIO(data))
        elements = kwargs["metadata"]["_ply_raw"]
        records = elements["vertex"]["data"]
        properties = {name: np.array(records[name]) for name in records.dtype.names if name not in POSITION_FIELDS}
    except Exception as exc:
        raise FormatError(f"{path} could not be read as PLY: {exc}") from exc

    vertices = np.asarray(kwargs.get("vertices", np.zeros((0, 3))), dtype=np.float64).reshape(-1, 3)
    faces = None
    if "face" in elements:
        found = kwargs.get("faces")
        faces = np.zeros((0, 3), dtype=np.int64) if found is None else np.asarray(found, dtype=np.int64).reshape(-1, 3)
    return vertices, faces, properties


def export_mesh(mesh, path, format="ply"):
    """Write ``mesh`` as PLY (with a ``noise`` vertex property when present) or OBJ."""
    path = Path(path)
    if format == "ply":
        write_ply(path, to_trimesh(mesh))
    elif format == "obj":
        if mesh.noise is not None:
            logger.warning("OBJ has no per-vertex scalar; dropping the noise attribute for %s", path)
        to_trimesh(mesh, with_noise=False).export(path, file_type="obj")
    else:
        raise FormatError(f"unknown mesh format {format!r}, expected one of {MESH_FORMATS}")
    logger.info("Saved mesh (%d vertices, %d faces) to %s", mesh.n_vertices, mesh.n_faces, path)


def import_mesh(path):
    """Read a PLY mesh back into a TriMesh (``noise`` restored when present)."""
    vertices, faces, properties = read_ply(path)
    faces = np.zeros((0, 3), dtype=np.int64) if faces is None else faces
    noise = properties.get("noise")
    return TriMesh(vertices, faces, None if noise is None else noise.astype(np.float64))
