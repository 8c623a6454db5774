"""Tests for lattice sampling, marching cubes, subdivision, vertex noise and mesh files."""

import logging
import sys
from pathlib import Path

import numpy as np
import pytest
import trimesh

sys.path.append(str(Path(__file__).resolve().parent.parent))

from camera.pose import camera_from_angles, generate_rays
from common.errors import FormatError, ParameterError, ShapeError
from field.analytic import AnalyticSdf
from field.scene import ConstantScene
from geometry.grid import SdfGrid, default_bounds, lattice_points, load_grid, sample_grid, save_grid
from geometry.mesh import TriMesh, attach_vertex_noise, marching_cubes, subdivide
from geometry.mesh_io import export_mesh, import_mesh, read_ply
from rendering.density import DensityParams
from rendering.renderer import render

TETRAHEDRON = TriMesh(
    np.array([[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]),
    np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]),
)


@pytest.fixture(scope="module")
def sphere_mesh():
    grid = sample_grid(AnalyticSdf.sphere(0.25), bounds=0.5, resolution=128)
    return grid, marching_cubes(grid)


def raycast(mesh, origin, dirs, chunk=16):
    """Nearest ray-triangle hit distance and cosine of incidence (brute force)."""
    v0, v1, v2 = (mesh.vertices[mesh.faces[:, i]] for i in range(3))
    e1, e2 = v1 - v0, v2 - v0
    normals = np.cross(e1, e2)
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    s = origin - v0
    q = np.cross(s, e1)
    t_all, cos_all = [], []
    for start in range(0, len(dirs), chunk):
        d = dirs[start : start + chunk]
        p = np.cross(d[:, None, :], e2[None])
        det = np.sum(e1[None] * p, axis=-1)
        ok = np.abs(det) > 1e-14
        inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
        u = np.sum(s[None] * p, axis=-1) * inv
        v = (d @ q.T) * inv
        t = np.sum(e2 * q, axis=-1)[None] * inv
        hit = ok & (u >= 0) & (v >= 0) & (u + v <= 1) & (t > 0)
        t = np.where(hit, t, np.inf)
        nearest = np.argmin(t, axis=1)
        t_all.append(t[np.arange(len(d)), nearest])
        cos_all.append(np.abs(np.sum(d * normals[nearest], axis=1)))
    return np.concatenate(t_all), np.concatenate(cos_all)


def test_grid_center_sample():
    grid = sample_grid(AnalyticSdf.sphere(0.25), bounds=0.5, resolution=3)
    assert grid.volume[1, 1, 1] == -0.25
    assert grid.values.size == 27


def test_constant_field_grid():
    grid = sample_grid(ConstantScene(0.7), bounds=1.0, resolution=5)
    assert np.all(grid.values == 0.7)


def test_grid_is_bitwise_equal_to_serial_evaluation():
    shape = AnalyticSdf.torus(0.2, 0.07)
    bounds = default_bounds()
    serial = shape.evaluate(lattice_points(bounds, 40))
    one = sample_grid(shape, resolution=40, threads=1)
    many = sample_grid(shape, resolution=40, threads=4)
    assert np.array_equal(one.values, serial)
    assert np.array_equal(many.values, serial)


def test_default_bounds_follow_camera_shell():
    np.testing.assert_allclose(default_bounds(), [[-0.616] * 3, [0.616] * 3], atol=1e-15)


def test_grid_validation():
    with pytest.raises(ParameterError):
        sample_grid(AnalyticSdf.sphere(0.25), resolution=1)
    with pytest.raises(ShapeError):
        SdfGrid(3, 1.0, np.zeros(26))
    with pytest.raises(ParameterError):
        SdfGrid(2, 1.0, np.full(8, np.nan))


def test_grid_file_round_trip(tmp_path):
    grid = sample_grid(AnalyticSdf.box((0.1, 0.2, 0.3)), bounds=(-0.5, 0.5), resolution=9)
    save_grid(grid, tmp_path / "grid.raw")
    loaded = load_grid(tmp_path / "grid.raw")
    assert loaded.resolution == 9
    np.testing.assert_array_equal(loaded.bounds, grid.bounds)
    np.testing.assert_array_equal(loaded.values, grid.values.astype(np.float32))


def test_all_positive_grid_gives_empty_mesh():
    mesh = marching_cubes(sample_grid(ConstantScene(1.0), bounds=1.0, resolution=4))
    assert mesh.is_empty() and mesh.n_vertices == 0


def test_sphere_vertices_lie_within_half_a_cell(sphere_mesh):
    grid, mesh = sphere_mesh
    half_cell = 0.5 * grid.spacing[0]
    radii = np.linalg.norm(mesh.vertices, axis=1)
    assert np.all(np.abs(radii - 0.25) <= half_cell)


def test_sphere_area_and_volume(sphere_mesh):
    _, mesh = sphere_mesh
    assert abs(mesh.area() / (4 * np.pi * 0.25**2) - 1) < 0.02
    # faces point outwards
    assert abs(mesh.signed_volume() / (4 / 3 * np.pi * 0.25**3) - 1) < 0.02


def test_sphere_mesh_is_closed():
    mesh = marching_cubes(sample_grid(AnalyticSdf.sphere(0.25), bounds=0.5, resolution=48))
    assert mesh.boundary_edge_count() == 0
    assert mesh.euler_characteristic() == 2


def test_marching_cubes_vertices_are_near_the_zero_set():
    shape = AnalyticSdf.torus(0.25, 0.1)
    grid = sample_grid(shape, bounds=0.5, resolution=64)
    mesh = marching_cubes(grid)
    assert not mesh.is_empty()
    assert np.all(np.abs(shape.evaluate(mesh.vertices)) < np.linalg.norm(grid.spacing))


def test_subdivide_single_triangle():
    mesh = subdivide(TriMesh(np.eye(3), [[0, 1, 2]]))
    assert mesh.n_faces == 4 and mesh.n_vertices == 6
    assert abs(mesh.area() - TriMesh(np.eye(3), [[0, 1, 2]]).area()) < 1e-15


def test_subdivide_tetrahedron():
    mesh = subdivide(TETRAHEDRON)
    assert len(TETRAHEDRON.edges()) == 6
    assert mesh.n_faces == 16 and mesh.n_vertices == 10
    assert mesh.euler_characteristic() == TETRAHEDRON.euler_characteristic() == 2
    assert mesh.boundary_edge_count() == 0
    assert abs(mesh.signed_volume() - TETRAHEDRON.signed_volume()) < 1e-12


def test_subdivide_twice_on_extracted_mesh(sphere_mesh):
    _, mesh = sphere_mesh
    twice = subdivide(subdivide(mesh))
    assert twice.n_faces == 16 * mesh.n_faces
    assert twice.euler_characteristic() == mesh.euler_characteristic()


def test_subdivide_drops_noise():
    noisy = attach_vertex_noise(TETRAHEDRON, np.random.default_rng(0))
    assert subdivide(noisy).noise is None


def test_vertex_noise_on_empty_mesh():
    assert attach_vertex_noise(TriMesh.empty(), np.random.default_rng(0)).noise.size == 0


def test_vertex_noise_moments_and_determinism():
    mesh = TriMesh(np.zeros((100_000, 3)), np.zeros((0, 3), dtype=np.int64))
    noisy = attach_vertex_noise(mesh, np.random.default_rng(7))
    assert abs(noisy.noise.mean()) < 0.02
    assert abs(noisy.noise.std() - 1) < 0.02
    np.testing.assert_array_equal(noisy.vertices, mesh.vertices)
    again = attach_vertex_noise(mesh, np.random.default_rng(7))
    assert np.array_equal(noisy.noise, again.noise)


def test_trimesh_validation():
    with pytest.raises(ShapeError):
        TriMesh(np.zeros((3, 3)), [[0, 1, 3]])
    with pytest.raises(ShapeError):
        TriMesh(np.zeros((3, 3)), [[0, 1, 2]], noise=np.zeros(2))


def test_ply_round_trip_with_noise(tmp_path):
    mesh = attach_vertex_noise(subdivide(TETRAHEDRON), np.random.default_rng(1))
    export_mesh(mesh, tmp_path / "mesh.ply")
    loaded = import_mesh(tmp_path / "mesh.ply")
    np.testing.assert_array_equal(loaded.vertices, mesh.vertices.astype(np.float32))
    np.testing.assert_array_equal(loaded.faces, mesh.faces)
    assert loaded.noise.astype(np.float32).tobytes() == mesh.noise.astype(np.float32).tobytes()


def test_empty_mesh_ply(tmp_path):
    export_mesh(TriMesh.empty(), tmp_path / "empty.ply")
    loaded = import_mesh(tmp_path / "empty.ply")
    assert loaded.vertices.shape == (0, 3) and loaded.faces.shape == (0, 3) and loaded.noise is None


def test_obj_drops_noise_with_warning(tmp_path, caplog):
    mesh = attach_vertex_noise(TETRAHEDRON, np.random.default_rng(0))
    with caplog.at_level(logging.WARNING, logger="geometry.mesh_io"):
        export_mesh(mesh, tmp_path / "mesh.obj", format="obj")
    assert "noise" in caplog.text
    lines = (tmp_path / "mesh.obj").read_text().splitlines()
    assert sum(line.startswith("v ") for line in lines) == 4
    assert sum(line.startswith("f ") for line in lines) == 4

    reloaded = trimesh.load(tmp_path / "mesh.obj", force="mesh", process=False)
    np.testing.assert_allclose(reloaded.vertices, TETRAHEDRON.vertices, atol=1e-6)
    np.testing.assert_array_equal(reloaded.faces, TETRAHEDRON.faces)


def test_mesh_file_errors(tmp_path):
    with pytest.raises(FormatError):
        export_mesh(TETRAHEDRON, tmp_path / "mesh.stl", format="stl")
    (tmp_path / "bad.ply").write_bytes(b"not a ply\n")
    with pytest.raises(FormatError):
        read_ply(tmp_path / "bad.ply")
    export_mesh(TETRAHEDRON, tmp_path / "cut.ply")
    data = (tmp_path / "cut.ply").read_bytes()
    (tmp_path / "cut.ply").write_bytes(data[:-5])
    with pytest.raises(FormatError):
        read_ply(tmp_path / "cut.ply")


def test_rendered_depth_agrees_with_extracted_mesh():
    radius = 0.1
    cam = camera_from_angles(0.2, 0.1, width=32, height=32)
    buffers = render(AnalyticSdf.sphere(radius), cam, DensityParams(1e-3), 128, np.random.default_rng(0))
    mesh = marching_cubes(sample_grid(AnalyticSdf.sphere(radius), bounds=0.15, resolution=64))
    origins, dirs = generate_rays(cam)
    t_mesh, cosine = raycast(mesh, cam.center, dirs.reshape(-1, 3))
    t_mesh, cosine = t_mesh.reshape(32, 32), cosine.reshape(32, 32)
    checked = buffers.valid & np.isfinite(t_mesh) & (cosine >= 0.7)
    assert checked.sum() > 200
    close = np.abs(buffers.depth - t_mesh)[checked] <= 2 * buffers.bin_size
    assert close.mean() >= 0.99
