"""Zero-mean Gaussian camera pose distributions and dataset presets."""

from dataclasses import dataclass

import numpy as np

from common.errors import ParameterError

SIDE_VIEW_FACTOR = 1.5


@dataclass(frozen=True)
class PoseDistribution:
    """Independent zero-mean normal distributions for azimuth and elevation (radians)."""

    azimuth_std: float
    elevation_std: float

    def __post_init__(self):
        if self.azimuth_std < 0 or self.elevation_std < 0:
            raise ParameterError("pose standard deviations must be non-negative")


FFHQ_POSES = PoseDistribution(0.3, 0.15)
AFHQ_POSES = PoseDistribution(0.15, 0.15)
PRESETS = {"ffhq": FFHQ_POSES, "afhq": AFHQ_POSES}


def pose_preset(name):
    try:
        return PRESETS[name.lower()]
    except KeyError:
        raise ParameterError(f"unknown pose preset '{name}', expected one of {sorted(PRESETS)}") from None


def sample_pose(dist, rng, size=None):
    """Draw ``(azimuth, elevation)``; arrays of shape ``size`` when given."""
    azimuth = rng.normal(0.0, dist.azimuth_std, size=size)
    elevation = rng.normal(0.0, dist.elevation_std, size=size)
    if size is None:
        return float(azimuth), float(elevation)
    return azimuth, elevation


def side_view_angle(dist, factor=SIDE_VIEW_FACTOR):
    """Azimuth of the side view used by the consistency experiments (1.5 std)."""
    return factor * dist.azimuth_std
