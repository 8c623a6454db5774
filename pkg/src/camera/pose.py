"""Camera on the unit sphere looking at the origin, with pinhole ray generation.

World axes: +y is up and the frontal camera sits at +z. Azimuth rotates the
camera about +y, elevation tilts it towards +y. Pixel ``(row, col)`` has its
centre at continuous image coordinates ``(u, v) = (col + 0.5, row + 0.5)``; the
principal point is the image centre and ``v`` grows downwards.
"""

import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from common.errors import ParameterError, ShapeError

logger = logging.getLogger(__name__)

DEFAULT_FOV_DEG = 12.0
DEFAULT_NEAR = 0.88
DEFAULT_FAR = 1.12
WORLD_UP = np.array([0.0, 1.0, 0.0])


@dataclass(frozen=True)
class CameraPose:
    """Camera pose and intrinsics.

    Attributes:
        azimuth: Radians about +y; 0 is the frontal view.
        elevation: Radians, strictly inside (-pi/2, pi/2).
        fov_deg: Full field of view in degrees (both axes use the same focal length).
        near: Ray start distance.
        far: Ray end distance.
        width: Image width in pixels.
        height: Image height in pixels.
    """

    azimuth: float = 0.0
    elevation: float = 0.0
    fov_deg: float = DEFAULT_FOV_DEG
    near: float = DEFAULT_NEAR
    far: float = DEFAULT_FAR
    width: int = 64
    height: int = 64

    def __post_init__(self):
        if not np.isfinite(self.azimuth) or not np.isfinite(self.elevation):
            raise ParameterError("camera angles must be finite")
        if not abs(self.elevation) < np.pi / 2:
            raise ParameterError(f"elevation must lie inside (-pi/2, pi/2), got {self.elevation}")
        if not 0.0 < self.fov_deg < 180.0:
            raise ParameterError(f"fov must lie in (0, 180) degrees, got {self.fov_deg}")
        if not 0.0 < self.near < self.far:
            raise ParameterError(f"need 0 < near < far, got near={self.near}, far={self.far}")
        if int(self.width) < 1 or int(self.height) < 1:
            raise ParameterError(f"image size must be positive, got {self.width}x{self.height}")

    @property
    def center(self):
        ce = np.cos(self.elevation)
        return np.array([ce * np.sin(self.azimuth), np.sin(self.elevation), ce * np.cos(self.azimuth)])

    @property
    def forward(self):
        return -self.center

    @property
    def right(self):
        r = np.cross(self.forward, WORLD_UP)
        return r / np.linalg.norm(r)

    @property
    def up(self):
        return np.cross(self.right, self.forward)

    @property
    def focal(self):
        """Focal length in pixels, ``(w / 2) / tan(fov / 2)``."""
        return (self.width / 2.0) / np.tan(np.radians(self.fov_deg) / 2.0)

    @property
    def rotation(self):
        """Rows are the camera right, up and forward axes in world coordinates."""
        return np.stack([self.right, self.up, self.forward])

    def with_angles(self, azimuth, elevation):
        return CameraPose(azimuth, elevation, self.fov_deg, self.near, self.far, self.width, self.height)

    def with_resolution(self, width, height=None):
        return CameraPose(self.azimuth, self.elevation, self.fov_deg, self.near, self.far, int(width), int(height or width))

    def to_dict(self):
        record = asdict(self)
        record["width"] = int(record["width"])
        record["height"] = int(record["height"])
        return record

    @classmethod
    def from_dict(cls, record):
        try:
            return cls(
                float(record["azimuth"]),
                float(record["elevation"]),
                float(record["fov_deg"]),
                float(record["near"]),
                float(record["far"]),
                int(record["width"]),
                int(record["height"]),
            )
        except KeyError as exc:
            raise ParameterError(f"camera record is missing key {exc}") from exc


def camera_from_angles(azimuth, elevation, fov_deg=DEFAULT_FOV_DEG, near=DEFAULT_NEAR, far=DEFAULT_FAR, width=64, height=64):
    """Build a camera on the unit sphere looking at the origin."""
    return CameraPose(float(azimuth), float(elevation), float(fov_deg), float(near), float(far), int(width), int(height))


def angles_from_center(center):
    """Recover ``(azimuth, elevation)`` from a camera centre on the unit sphere."""
    x, y, z = np.asarray(center, dtype=np.float64)
    return float(np.arctan2(x, z)), float(np.arctan2(y, np.hypot(x, z)))


def pixel_grid(cam):
    """Camera-plane coordinates ``(x, y)`` of every pixel centre, each ``(H, W)``."""
    rows, cols = np.meshgrid(np.arange(cam.height), np.arange(cam.width), indexing="ij")
    f = cam.focal
    x = (cols + 0.5 - cam.width / 2.0) / f
    y = -(rows + 0.5 - cam.height / 2.0) / f
    return x, y


def generate_rays(cam):
    """Per-pixel ray origins and unit directions.

    Returns:
        Tuple ``(origins, directions)``, both ``(H, W, 3)``.
    """
    x, y = pixel_grid(cam)
    dirs = x[..., None] * cam.right + y[..., None] * cam.up + cam.forward
    dirs = dirs / np.linalg.norm(dirs, axis=-1, keepdims=True)
    origins = np.broadcast_to(cam.center, dirs.shape).copy()
    return origins, dirs


def project(cam, points):
    """Project world points into the image.

    Args:
        cam: CameraPose.
        points: ``(..., 3)`` world points.

    Returns:
        Tuple ``(uv, distance, in_front)``: continuous image coordinates
        ``(..., 2)`` as ``(u, v)``, the distance from the camera centre and a mask of
        points in front of the camera.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.shape[-1] != 3:
        raise ShapeError(f"points must end in a 3-vector axis, got {points.shape}")
    rel = points - cam.center
    local = rel @ cam.rotation.T
    xc, yc, zc = local[..., 0], local[..., 1], local[..., 2]
    in_front = zc > 0
    safe = np.where(in_front, zc, 1.0)
    f = cam.focal
    u = cam.width / 2.0 + f * xc / safe
    v = cam.height / 2.0 - f * yc / safe
    return np.stack([u, v], axis=-1), np.linalg.norm(rel, axis=-1), in_front


def save_camera(cam, path):
    path = Path(path)
    path.write_text(json.dumps(cam.to_dict(), indent=2))
    logger.info("Saved camera to %s", path)


def load_camera(path):
    return CameraPose.from_dict(json.loads(Path(path).read_text()))
