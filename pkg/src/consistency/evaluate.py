"""Frontal/side view-consistency evaluation: renders, Chamfer, reprojection, reports."""

import dataclasses
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import matplotlib
import numpy as np
import pandas as pd

from common.errors import EvaluationError, PreconditionError
from common.numerics import lower_median
from consistency.chamfer import chamfer_terms
from consistency.pointcloud import export_point_clouds, unproject
from consistency.reprojection import OCCLUSION_BINS, pixel_l1, reproject, reprojection_error
from rendering.density import DensityParams
from rendering.export import write_png
from rendering.renderer import render

logger = logging.getLogger(__name__)

EVAL_ALPHA = 1e-3
EVAL_SAMPLES = 128
EVAL_RESOLUTION = 128
DISTANCE_MAP_RANGE = 4.0
L1_MAP_RANGE = 64.0


@dataclass
class ConsistencyReport:
    """Outcome of one frontal/side evaluation.

    ``chamfer`` is in bin units; ``reprojection_l1`` is on the 0-255 scale and NaN
    when no pixel survived the reprojection masks.
    """

    chamfer: float
    reprojection_l1: float
    valid_fraction: float
    bin_size: float
    frontal_camera: dict
    side_camera: dict
    n_samples: int
    alpha: float
    frontal_to_side: np.ndarray = dataclasses.field(repr=False)
    side_to_frontal: np.ndarray = dataclasses.field(repr=False)
    distance_map: np.ndarray = dataclasses.field(repr=False)
    l1_map: np.ndarray = dataclasses.field(repr=False)
    frontal_valid: np.ndarray = dataclasses.field(repr=False)
    clouds: tuple = dataclasses.field(repr=False, default=())

    def to_record(self):
        """Scalar summary for JSON and CSV."""
        return {
            "chamfer": self.chamfer,
            "reprojection_l1": self.reprojection_l1,
            "valid_fraction": self.valid_fraction,
            "frontal_points": int(self.frontal_to_side.size),
            "side_points": int(self.side_to_frontal.size),
            "median_frontal_to_side": lower_median(self.frontal_to_side),
            "median_side_to_frontal": lower_median(self.side_to_frontal),
            "bin_size": self.bin_size,
            "n_samples": self.n_samples,
            "alpha": self.alpha,
        }


def evaluate_pair(
    field,
    frontal_cam,
    side_cam,
    n_samples=EVAL_SAMPLES,
    resolution=EVAL_RESOLUTION,
    params=None,
    rng=None,
    mods=None,
    threads=None,
    mask_occlusion=True,
):
    """Render a frontal and a side view and measure how well they agree.

    Both views are rendered with the same per-pixel sampling offsets, so a pair of
    identical cameras scores exactly zero.

    Args:
        field: Scene, FieldNetwork (with ``mods``) or AnalyticSdf.
        frontal_cam, side_cam: CameraPoses; their resolution is replaced by
            ``resolution``.
        n_samples: Samples per ray.
        resolution: Square image size of both renders.
        params: DensityParams, default ``alpha = 1e-3``.
        rng: Generator for the sampling offsets.
        mods: Modulation signals when ``field`` is a network.
        threads: Worker count.
        mask_occlusion: Drop side pixels hidden behind the frontal surface from the
            reprojection error; when False every covered pixel counts.

    Raises:
        EvaluationError: If either view has no ray above the opacity threshold.
    """
    params = params or DensityParams(EVAL_ALPHA)
    rng = rng or np.random.default_rng(0)
    frontal_cam = frontal_cam.with_resolution(resolution)
    side_cam = side_cam.with_resolution(resolution)
    seed = int(rng.integers(2**63))
    frontal = render(field, frontal_cam, params, n_samples, np.random.default_rng(seed), mods=mods, threads=threads)
    side = render(field, side_cam, params, n_samples, np.random.default_rng(seed), mods=mods, threads=threads)
    if not frontal.valid.any() or not side.valid.any():
        raise EvaluationError("every ray was filtered by the opacity test; nothing to compare")

    frontal_cloud = unproject(frontal.depth, frontal_cam, frontal.valid)
    side_cloud = unproject(side.depth, side_cam, side.valid)
    forward, backward = chamfer_terms(frontal_cloud, side_cloud, frontal.bin_size)
    chamfer = lower_median(forward) + lower_median(backward)

    distance_map = np.zeros(frontal.valid.shape)
    distance_map[frontal.valid] = np.sqrt(forward)

    threshold = OCCLUSION_BINS * frontal.bin_size
    warp = reproject(
        side.depth,
        side.valid,
        side.color,
        side_cam,
        frontal_cam,
        dst_depth=frontal.depth if mask_occlusion else None,
        dst_valid=frontal.valid,
        occlusion_threshold=threshold,
    )
    mask = warp.visible & frontal.valid
    l1_map = np.where(mask, pixel_l1(warp.rgb, frontal.color), 0.0)
    try:
        l1 = reprojection_error(warp.rgb, frontal.color, mask)
    except PreconditionError:
        logger.warning("No side pixel reprojects onto the frontal surface; reprojection error is undefined")
        l1 = float("nan")

    valid_fraction = float((frontal.valid.sum() + side.valid.sum()) / (2 * frontal.valid.size))
    logger.info(
        "Consistency: chamfer %.4f bins, reprojection L1 %.2f, %.1f%% valid", chamfer, l1, 100 * valid_fraction
    )
    return ConsistencyReport(
        chamfer=chamfer,
        reprojection_l1=l1,
        valid_fraction=valid_fraction,
        bin_size=frontal.bin_size,
        frontal_camera=frontal_cam.to_dict(),
        side_camera=side_cam.to_dict(),
        n_samples=int(n_samples),
        alpha=params.alpha,
        frontal_to_side=forward,
        side_to_frontal=backward,
        distance_map=distance_map,
        l1_map=l1_map,
        frontal_valid=frontal.valid,
        clouds=(frontal_cloud, side_cloud),
    )


def colorize(values, vmax, cmap="viridis", mask=None):
    """Map ``values / vmax`` through a matplotlib colormap; masked-out pixels are black."""
    rgb = matplotlib.colormaps[cmap](np.clip(np.asarray(values) / vmax, 0.0, 1.0))[..., :3]
    if mask is not None:
        rgb = np.where(np.asarray(mask)[..., None], rgb, 0.0)
    return rgb


def write_report(report, directory, stem="consistency", error_maps=True, clouds=False):
    """Write the JSON record, and optionally the error-map PNGs and a point-cloud PLY.

    Returns:
        List of the file names written.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    record = report.to_record()
    record = {key: None if isinstance(value, float) and np.isnan(value) else value for key, value in record.items()}
    record.update(frontal_camera=report.frontal_camera, side_camera=report.side_camera)
    (directory / f"{stem}.json").write_text(json.dumps(record, indent=2))
    written = [f"{stem}.json"]
    if error_maps:
        distance = colorize(report.distance_map, DISTANCE_MAP_RANGE, mask=report.frontal_valid)
        write_png(directory / f"{stem}_distance.png", distance)
        write_png(directory / f"{stem}_l1.png", colorize(report.l1_map, L1_MAP_RANGE, "magma"))
        written += [f"{stem}_distance.png", f"{stem}_l1.png"]
    if clouds and report.clouds:
        export_point_clouds(list(report.clouds), directory / f"{stem}_clouds.ply")
        written.append(f"{stem}_clouds.ply")
    logger.info("Saved consistency report to %s", directory / f"{stem}.json")
    return written


def aggregate_reports(records, labels=None):
    """One row per evaluation plus a trailing ``mean`` row."""
    frame = pd.DataFrame(records)
    labels = range(len(frame)) if labels is None else labels
    frame.insert(0, "identity", [str(label) for label in labels])
    means = frame.drop(columns="identity").mean(numeric_only=True)
    mean_row = pd.DataFrame([{"identity": "mean", **means.to_dict()}])
    return pd.concat([frame, mean_row], ignore_index=True)


def save_aggregate(records, path, labels=None):
    frame = aggregate_reports(records, labels)
    frame.to_csv(path, index=False)
    logger.info("Saved %d consistency rows to %s", len(frame) - 1, path)
    return frame
