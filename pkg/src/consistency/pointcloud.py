"""Depth maps lifted to world-space point clouds."""

import logging
from dataclasses import dataclass

import numpy as np
import trimesh

from camera.pose import CameraPose, generate_rays
from common.errors import ShapeError
from geometry.mesh_io import write_ply

logger = logging.getLogger(__name__)


@dataclass
class DepthPointCloud:
    """World points of the valid pixels of one depth map.

    Attributes:
        points: ``(n, 3)`` world coordinates, ``origin + depth * direction``.
        camera: Camera the depth map was rendered from.
        pixels: ``(n, 2)`` integer ``(row, col)`` of the pixel each point came from.
        mask: ``(H, W)`` pixels that passed the opacity filter.
    """

    points: np.ndarray
    camera: CameraPose
    pixels: np.ndarray
    mask: np.ndarray

    def __len__(self):
        return len(self.points)


def unproject(depth, cam, valid=None):
    """Turn a depth map into a point cloud along the camera's pixel rays.

    Args:
        depth: ``(H, W)`` distances along each pixel ray.
        cam: CameraPose with matching ``height`` and ``width``.
        valid: Optional ``(H, W)`` mask; defaults to every finite depth.

    Raises:
        ShapeError: If the buffers do not match the camera size.
    """
    depth = np.asarray(depth, dtype=np.float64)
    if depth.shape != (cam.height, cam.width):
        raise ShapeError(f"depth map is {depth.shape}, camera is {(cam.height, cam.width)}")
    if valid is None:
        valid = np.isfinite(depth)
    valid = np.asarray(valid, dtype=bool)
    if valid.shape != depth.shape:
        raise ShapeError(f"validity mask is {valid.shape}, depth map is {depth.shape}")
    origins, dirs = generate_rays(cam)
    points = origins[valid] + depth[valid][:, None] * dirs[valid]
    return DepthPointCloud(points, cam, np.argwhere(valid), valid)


def export_point_clouds(clouds, path):
    """Write several clouds into one PLY point file with a ``view`` index per point."""
    points = np.concatenate([np.zeros((0, 3))] + [c.points for c in clouds])
    views = np.concatenate([np.zeros(0, np.uint8)] + [np.full(len(c), i, dtype=np.uint8) for i, c in enumerate(clouds)])
    cloud = trimesh.PointCloud(points)
    cloud.vertex_attributes = {"view": views}
    write_ply(path, cloud)
    logger.info("Saved %d points from %d views to %s", len(points), len(clouds), path)
