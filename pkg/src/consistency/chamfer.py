"""Median-based modified Chamfer distance between two point clouds."""

import numpy as np
from sklearn.neighbors import KDTree

from common.errors import ParameterError, PreconditionError, ShapeError
from common.numerics import lower_median

BRUTE_FORCE_LIMIT = 2048
CANDIDATES = 4
PAIRS_PER_CHUNK = 1 << 22


def _as_points(cloud, what):
    points = getattr(cloud, "points", cloud)
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ShapeError(f"{what} must be an (n, 3) array, got {points.shape}")
    if len(points) == 0:
        raise PreconditionError(f"{what} is empty")
    return points


def _squared(query, candidates):
    return np.sum((candidates - query[:, None, :]) ** 2, axis=-1)


def brute_force_nearest(query, reference):
    """Squared distance from every query point to its nearest reference point."""
    rows = max(1, PAIRS_PER_CHUNK // len(reference))
    parts = [_squared(query[s : s + rows], reference[None, :, :]).min(axis=1) for s in range(0, len(query), rows)]
    return np.concatenate(parts)


def nearest_squared_distances(query, reference):
    """Squared nearest-neighbour distances from ``query`` to ``reference``.

    Large references go through a KDTree that proposes a few candidates; the
    distances are then recomputed the same way the brute-force search does, so both
    paths return identical numbers.
    """
    query = np.asarray(query, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if len(reference) < BRUTE_FORCE_LIMIT:
        return brute_force_nearest(query, reference)
    k = min(CANDIDATES, len(reference))
    _, index = KDTree(reference).query(query, k=k)
    return _squared(query, reference[index]).min(axis=1)


def chamfer_terms(s1, s2, bin_size):
    """Bin-normalised squared nearest distances in both directions.

    Returns:
        Tuple ``(s1_to_s2, s2_to_s1)`` of per-point values.
    """
    if not bin_size > 0:
        raise ParameterError(f"bin_size must be positive, got {bin_size}")
    p1 = _as_points(s1, "first cloud") / bin_size
    p2 = _as_points(s2, "second cloud") / bin_size
    return nearest_squared_distances(p1, p2), nearest_squared_distances(p2, p1)


def modified_chamfer(s1, s2, bin_size):
    """``median_x min_y |x-y|^2 + median_y min_x |x-y|^2`` with distances in bins.

    Distances are divided by ``bin_size`` before squaring; medians of even counts
    take the lower middle value.

    Args:
        s1, s2: DepthPointClouds or ``(n, 3)`` arrays.
        bin_size: Volume sampling bin length.

    Raises:
        PreconditionError: If either cloud is empty.
    """
    forward, backward = chamfer_terms(s1, s2, bin_size)
    return lower_median(forward) + lower_median(backward)
