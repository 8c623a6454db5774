"""Depth-guided RGB warping between views and the median L1 reprojection error."""

import logging
from dataclasses import dataclass

import numpy as np

from camera.pose import project
from common.errors import PreconditionError, ShapeError
from common.numerics import lower_median
from consistency.pointcloud import unproject
from rendering.export import to_uint8

logger = logging.getLogger(__name__)

OCCLUSION_BINS = 2.0


@dataclass
class Reprojection:
    """A source image splatted into a destination view.

    Attributes:
        rgb: ``(H, W, 3)`` warped colours, zero where nothing landed.
        depth: ``(H, W)`` distance of the splatted point from the destination camera.
        coverage: ``(H, W)`` pixels that received a splat.
        occluded: ``(H, W)`` covered pixels whose destination depth is nearer than
            the splat by more than the threshold.
    """

    rgb: np.ndarray
    depth: np.ndarray
    coverage: np.ndarray
    occluded: np.ndarray

    @property
    def visible(self):
        return self.coverage & ~self.occluded


def _check_buffer(array, cam, what, channels=None):
    array = np.asarray(array)
    expected = (cam.height, cam.width) + ((channels,) if channels else ())
    if array.shape != expected:
        raise ShapeError(f"{what} is {array.shape}, expected {expected}")
    return array


def warp_coordinates(src_depth, src_valid, src_cam, dst_cam):
    """Continuous destination pixel coordinates of every valid source pixel.

    Returns:
        Tuple ``(uv, distance, ok)``: ``(H, W, 2)`` coordinates, ``(H, W)`` distance
        from the destination camera and ``(H, W)`` mask of valid pixels that land in
        front of it.
    """
    src_valid = _check_buffer(src_valid, src_cam, "source mask").astype(bool)
    depth = np.where(src_valid, _check_buffer(src_depth, src_cam, "source depth"), 0.0)
    cloud = unproject(depth, src_cam, np.ones_like(src_valid))
    uv, distance, in_front = project(dst_cam, cloud.points.reshape(src_cam.height, src_cam.width, 3))
    return uv, distance, src_valid & in_front


def reproject(src_depth, src_valid, src_rgb, src_cam, dst_cam, dst_depth=None, dst_valid=None, occlusion_threshold=0.0):
    """Warp a source RGB render into a destination view with a z-buffered splat.

    Every valid source pixel is unprojected with its depth, projected into the
    destination camera and written to the nearest pixel; when several land on the
    same pixel the one nearest to the destination camera wins.

    Args:
        src_depth, src_valid, src_rgb: Source buffers matching ``src_cam``.
        src_cam, dst_cam: CameraPoses.
        dst_depth: Optional destination depth map for the occlusion test.
        dst_valid: Optional destination validity; pixels outside it are never
            marked occluded.
        occlusion_threshold: Distance a splat may lie behind ``dst_depth`` before
            the pixel counts as occluded.

    Returns:
        Reprojection.
    """
    src_rgb = _check_buffer(src_rgb, src_cam, "source colour", 3)
    uv, distance, ok = warp_coordinates(src_depth, src_valid, src_cam, dst_cam)
    cols = np.floor(uv[..., 0])
    rows = np.floor(uv[..., 1])
    ok &= (cols >= 0) & (cols < dst_cam.width) & (rows >= 0) & (rows < dst_cam.height)

    target = rows[ok].astype(np.int64) * dst_cam.width + cols[ok].astype(np.int64)
    dist = distance[ok]
    colours = src_rgb[ok]
    order = np.lexsort((dist, target))
    first = np.unique(target[order], return_index=True)[1]
    winners = order[first]

    size = dst_cam.height * dst_cam.width
    rgb = np.zeros((size, 3))
    depth = np.zeros(size)
    coverage = np.zeros(size, dtype=bool)
    rgb[target[winners]] = colours[winners]
    depth[target[winners]] = dist[winners]
    coverage[target[winners]] = True

    shape = (dst_cam.height, dst_cam.width)
    occluded = np.zeros(shape, dtype=bool)
    depth, coverage = depth.reshape(shape), coverage.reshape(shape)
    if dst_depth is not None:
        dst_depth = _check_buffer(dst_depth, dst_cam, "destination depth")
        known = np.ones(shape, dtype=bool) if dst_valid is None else _check_buffer(dst_valid, dst_cam, "destination mask")
        occluded = coverage & known & (dst_depth < depth - occlusion_threshold)
    return Reprojection(rgb.reshape(shape + (3,)), depth, coverage, occluded)


def _as_8bit(image):
    image = np.asarray(image)
    return image.astype(np.int64) if image.dtype == np.uint8 else to_uint8(image).astype(np.int64)


def pixel_l1(warped, reference):
    """Per-pixel mean absolute RGB difference on the 0-255 scale, ``(H, W)``."""
    warped, reference = _as_8bit(warped), _as_8bit(reference)
    if warped.shape != reference.shape:
        raise ShapeError(f"images differ in shape: {warped.shape} vs {reference.shape}")
    return np.abs(warped - reference).mean(axis=-1)


def reprojection_error(warped, reference, mask):
    """Lower median of the per-pixel L1 error over ``mask``.

    Float images in ``[0, 1]`` are quantised to 8 bits first; ``uint8`` images are
    used as they are.

    Raises:
        PreconditionError: If ``mask`` selects no pixel.
    """
    errors = pixel_l1(warped, reference)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != errors.shape:
        raise ShapeError(f"mask is {mask.shape}, images are {errors.shape}")
    if not mask.any():
        raise PreconditionError("reprojection mask selects no pixel")
    return lower_median(errors[mask])


def mean_reprojection(sides, dst_cam, dst_depth=None, dst_valid=None, occlusion_threshold=0.0):
    """Average several side renders warped into one destination view.

    Args:
        sides: Iterable of ``(depth, valid, rgb, cam)`` tuples.
        dst_cam: Destination camera.
        dst_depth, dst_valid, occlusion_threshold: As for :func:`reproject`.

    Returns:
        Tuple ``(mean_rgb, count)``: averaged colours and the number of views that
        reached each pixel unoccluded.
    """
    total = np.zeros((dst_cam.height, dst_cam.width, 3))
    count = np.zeros((dst_cam.height, dst_cam.width), dtype=np.int64)
    for depth, valid, rgb, cam in sides:
        warp = reproject(depth, valid, rgb, cam, dst_cam, dst_depth, dst_valid, occlusion_threshold)
        total[warp.visible] += warp.rgb[warp.visible]
        count += warp.visible
    mean = total / np.maximum(count, 1)[..., None]
    logger.debug("Mean reprojection covers %d pixels", int(np.sum(count > 0)))
    return mean, count
