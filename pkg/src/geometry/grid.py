"""Sampling a scene's signed distance on a regular lattice."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from camera.pose import DEFAULT_FAR
from common.errors import FormatError, ParameterError, ShapeError
from common.parallel import map_chunks
from field.scene import as_scene

logger = logging.getLogger(__name__)

DEFAULT_RESOLUTION = 128
BOUNDS_SCALE = 0.55
POINTS_PER_CHUNK = 32768


def default_bounds(far=DEFAULT_FAR):
    """The camera-shell cube ``[-far, far]^3`` shrunk by ``BOUNDS_SCALE``."""
    half = BOUNDS_SCALE * float(far)
    return np.array([[-half] * 3, [half] * 3])


def as_bounds(bounds):
    """Accept a half-extent, a ``(lo, hi)`` pair or a ``(2, 3)`` array; return ``(2, 3)``."""
    if bounds is None:
        return default_bounds()
    array = np.asarray(bounds, dtype=np.float64)
    if array.ndim == 0:
        array = np.array([[-float(array)] * 3, [float(array)] * 3])
    elif array.shape == (2,):
        array = np.repeat(array[:, None], 3, axis=1)
    if array.shape != (2, 3):
        raise ShapeError(f"bounds must be a scalar, a (lo, hi) pair or (2, 3), got {array.shape}")
    if not np.all(array[1] > array[0]):
        raise ParameterError(f"bounds need hi > lo on every axis, got {array.tolist()}")
    return array


@dataclass
class SdfGrid:
    """Signed distances on a ``resolution^3`` lattice spanning ``bounds``.

    ``values`` is flat in C order over ``(x, y, z)`` lattice indices; lattice point
    ``(i, j, k)`` sits at ``lo + (i, j, k) * spacing``.
    """

    resolution: int
    bounds: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.resolution = int(self.resolution)
        if self.resolution < 2:
            raise ParameterError(f"grid resolution must be at least 2, got {self.resolution}")
        self.bounds = as_bounds(self.bounds)
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if self.values.size != self.resolution**3:
            raise ShapeError(f"grid holds {self.values.size} values, expected {self.resolution ** 3}")
        if not np.all(np.isfinite(self.values)):
            raise ParameterError("grid values must be finite")

    @property
    def spacing(self):
        return (self.bounds[1] - self.bounds[0]) / (self.resolution - 1)

    @property
    def volume(self):
        return self.values.reshape((self.resolution,) * 3)

    def axes(self):
        return [np.linspace(self.bounds[0, a], self.bounds[1, a], self.resolution) for a in range(3)]

    def to_world(self, lattice):
        """Map continuous lattice coordinates ``(..., 3)`` to world coordinates."""
        return self.bounds[0] + np.asarray(lattice, dtype=np.float64) * self.spacing


def lattice_points(bounds, resolution, slab=slice(None)):
    """World coordinates of the lattice points in the given range of x slabs, ``(n, 3)``."""
    xs, ys, zs = (np.linspace(bounds[0, a], bounds[1, a], resolution) for a in range(3))
    gx, gy, gz = np.meshgrid(xs[slab], ys, zs, indexing="ij")
    return np.stack([gx, gy, gz], axis=-1).reshape(-1, 3)


def sample_grid(field, bounds=None, resolution=DEFAULT_RESOLUTION, mods=None, threads=None):
    """Evaluate the SDF of ``field`` on a regular lattice.

    Work is split into fixed groups of x slabs, so the grid does not depend on
    ``threads``.

    Args:
        field: A scene, a FieldNetwork (with ``mods``) or an AnalyticSdf.
        bounds: Half-extent, ``(lo, hi)`` or ``(2, 3)`` array; defaults to
            :func:`default_bounds`.
        resolution: Lattice points per axis.
        mods: Modulation signals when ``field`` is a network.
        threads: Worker count, ``None`` for all cores.

    Returns:
        SdfGrid.
    """
    resolution = int(resolution)
    if resolution < 2:
        raise ParameterError(f"grid resolution must be at least 2, got {resolution}")
    bounds = as_bounds(bounds)
    scene = as_scene(field, mods)

    def work(slab):
        return np.asarray(scene.sdf(lattice_points(bounds, resolution, slab)), dtype=np.float64).reshape(-1)

    slabs_per_chunk = max(1, POINTS_PER_CHUNK // resolution**2)
    values = np.concatenate(map_chunks(work, resolution, slabs_per_chunk, threads))
    logger.info("Sampled %d^3 SDF grid over %s", resolution, bounds.tolist())
    return SdfGrid(resolution, bounds, values)


def save_grid(grid, path):
    """Write raw little-endian float32 values to ``path`` and a ``.json`` sidecar next to it."""
    path = Path(path)
    path.write_bytes(np.ascontiguousarray(grid.values, dtype="<f4").tobytes())
    meta = {
        "resolution": grid.resolution,
        "bounds": grid.bounds.tolist(),
        "dtype": "float32",
        "byte_order": "little",
        "order": "C, axes x y z",
    }
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2))
    logger.info("Saved SDF grid to %s", path)


def load_grid(path):
    path = Path(path)
    try:
        meta = json.loads(path.with_suffix(".json").read_text())
        resolution, bounds = int(meta["resolution"]), meta["bounds"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path.with_suffix('.json')} is not a grid sidecar") from exc
    values = np.frombuffer(path.read_bytes(), dtype="<f4")
    if values.size != resolution**3:
        raise FormatError(f"{path} holds {values.size} values, expected {resolution ** 3}")
    return SdfGrid(resolution, bounds, values.astype(np.float64))
