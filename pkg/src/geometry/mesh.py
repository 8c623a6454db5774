"""Triangle meshes: marching-cubes extraction, midpoint subdivision and vertex noise."""

import logging
from dataclasses import dataclass

import mcubes
import numpy as np

from common.errors import ShapeError

logger = logging.getLogger(__name__)

# edges of a triangle as (corner, corner) pairs, in face order
FACE_EDGES = ((0, 1), (1, 2), (2, 0))


@dataclass
class TriMesh:
    """Indexed triangle mesh.

    Attributes:
        vertices: ``(V, 3)`` world coordinates.
        faces: ``(F, 3)`` vertex indices, counter-clockwise seen from outside.
        noise: Optional ``(V,)`` per-vertex scalar.
    """

    vertices: np.ndarray
    faces: np.ndarray
    noise: np.ndarray = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise ShapeError("face indices out of range")
        if self.noise is not None:
            self.noise = np.asarray(self.noise, dtype=np.float64).reshape(-1)
            if self.noise.size != len(self.vertices):
                raise ShapeError(f"noise has {self.noise.size} entries for {len(self.vertices)} vertices")

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    def is_empty(self):
        return self.n_faces == 0

    def face_edges(self):
        """``(F, 3, 2)`` sorted vertex pairs of every face edge."""
        pairs = np.stack([self.faces[:, list(e)] for e in FACE_EDGES], axis=1)
        return np.sort(pairs, axis=-1)

    def edges(self):
        """Unique undirected edges as a sorted ``(E, 2)`` array."""
        if self.is_empty():
            return np.zeros((0, 2), dtype=np.int64)
        return np.unique(self.face_edges().reshape(-1, 2), axis=0)

    def face_areas(self):
        a, b, c = (self.vertices[self.faces[:, i]] for i in range(3))
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def area(self):
        return float(self.face_areas().sum())

    def signed_volume(self):
        """Enclosed volume for a closed mesh; negative when faces point inwards."""
        a, b, c = (self.vertices[self.faces[:, i]] for i in range(3))
        return float(np.sum(a * np.cross(b, c)) / 6.0)

    def euler_characteristic(self):
        return self.n_vertices - len(self.edges()) + self.n_faces

    def boundary_edge_count(self):
        """Edges used by exactly one face (0 for a watertight mesh)."""
        if self.is_empty():
            return 0
        _, counts = np.unique(self.face_edges().reshape(-1, 2), axis=0, return_counts=True)
        return int(np.sum(counts == 1))


def clean_mesh(vertices, faces):
    """Merge coincident vertices, drop zero-area faces and unreferenced vertices.

    Vertices come out sorted by coordinate, so their order depends only on where
    they lie on the lattice.
    """
    if len(faces) == 0:
        return TriMesh.empty()
    vertices, inverse = np.unique(np.asarray(vertices, dtype=np.float64), axis=0, return_inverse=True)
    faces = inverse.reshape(-1)[np.asarray(faces, dtype=np.int64)]
    distinct = (faces[:, 0] != faces[:, 1]) & (faces[:, 1] != faces[:, 2]) & (faces[:, 2] != faces[:, 0])
    faces = faces[distinct]
    mesh = TriMesh(vertices, faces)
    faces = faces[mesh.face_areas() > 0]
    used, remap = np.unique(faces, return_inverse=True)
    return TriMesh(vertices[used], remap.reshape(-1, 3))


def marching_cubes(grid, iso=0.0):
    """Extract the ``iso`` level set of an SdfGrid.

    Vertices are linearly interpolated along lattice edges and mapped to world
    coordinates; faces point away from the negative (inside) region.

    Returns:
        TriMesh, empty when the grid never crosses ``iso``.
    """
    values = grid.volume
    if not (np.any(values < iso) and np.any(values > iso)):
        logger.warning("SDF grid has no crossing of level %g; mesh is empty", iso)
        return TriMesh.empty()
    lattice, faces = mcubes.marching_cubes(values, float(iso))
    mesh = clean_mesh(grid.to_world(lattice), faces)
    if mesh.signed_volume() < 0:
        mesh = TriMesh(mesh.vertices, mesh.faces[:, ::-1])
    logger.info("Marching cubes: %d vertices, %d faces", mesh.n_vertices, mesh.n_faces)
    return mesh


def subdivide(mesh):
    """Split every triangle into four at its edge midpoints.

    Shared edges share their midpoint, so ``V' = V + E`` and ``F' = 4F``. The
    noise attribute is dropped; attach noise after the last subdivision.
    """
    if mesh.is_empty():
        return TriMesh(mesh.vertices, mesh.faces)
    edges, edge_ids = np.unique(mesh.face_edges().reshape(-1, 2), axis=0, return_inverse=True)
    mid = mesh.n_vertices + edge_ids.reshape(-1, 3)
    midpoints = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    a, b, c = mesh.faces[:, 0], mesh.faces[:, 1], mesh.faces[:, 2]
    ab, bc, ca = mid[:, 0], mid[:, 1], mid[:, 2]
    faces = np.concatenate(
        [
            np.stack([a, ab, ca], axis=1),
            np.stack([ab, b, bc], axis=1),
            np.stack([ca, bc, c], axis=1),
            np.stack([ab, bc, ca], axis=1),
        ]
    )
    return TriMesh(np.concatenate([mesh.vertices, midpoints]), faces)


def attach_vertex_noise(mesh, rng):
    """Return a copy of ``mesh`` with one standard-normal draw per vertex."""
    return TriMesh(mesh.vertices.copy(), mesh.faces.copy(), rng.standard_normal(mesh.n_vertices))
