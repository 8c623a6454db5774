"""Pose, Eikonal and minimal-surface losses and their weighted total."""

from dataclasses import dataclass

import numpy as np

from common.errors import ParameterError, PreconditionError
from field.network import sdf_input_gradient

DEFAULT_LAMBDA_VIEW = 15.0
DEFAULT_LAMBDA_EIK = 0.1
DEFAULT_LAMBDA_SURF = 0.05
DEFAULT_SURFACE_SHARPNESS = 100.0


@dataclass(frozen=True)
class LossWeights:
    """Weights of the volume-renderer loss terms.

    ``surface_sharpness`` is the inverse-length constant inside the minimal-surface
    penalty ``exp(-k |d|)``.
    """

    lambda_view: float = DEFAULT_LAMBDA_VIEW
    lambda_eik: float = DEFAULT_LAMBDA_EIK
    lambda_surf: float = DEFAULT_LAMBDA_SURF
    surface_sharpness: float = DEFAULT_SURFACE_SHARPNESS

    def __post_init__(self):
        for name in ("lambda_view", "lambda_eik", "lambda_surf"):
            if not getattr(self, name) >= 0:
                raise ParameterError(f"{name} must be non-negative")
        if not self.surface_sharpness > 0:
            raise ParameterError("surface_sharpness must be positive")


@dataclass(frozen=True)
class LossBreakdown:
    adv: float
    view: float
    eikonal: float
    surface: float
    total: float


def smoothed_l1(predicted, true):
    """``e^2`` where ``|e| <= 1``, ``|e|`` elsewhere, with ``e = predicted - true``."""
    e = np.asarray(predicted, dtype=np.float64) - np.asarray(true, dtype=np.float64)
    loss = np.where(np.abs(e) <= 1.0, e * e, np.abs(e))
    return float(loss) if loss.ndim == 0 else loss


def pose_loss(predicted, true):
    """Smoothed L1 summed over the azimuth and elevation of a pose.

    Args:
        predicted: ``(azimuth, elevation)`` estimate, or an ``(B, 2)`` batch.
        true: Matching true angles.

    Returns:
        Scalar for a single pose, mean over the batch otherwise.
    """
    per_angle = np.asarray(smoothed_l1(predicted, true))
    if per_angle.shape[-1] != 2:
        raise PreconditionError("pose loss expects (azimuth, elevation) pairs")
    per_pose = per_angle.sum(axis=-1)
    return float(np.mean(per_pose))


def _nonempty(values, what):
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise PreconditionError(f"{what} batch is empty")
    return values


def eikonal_loss(gradients):
    """Mean of ``(||g|| - 1)^2`` over a ``(B, 3)`` batch of SDF gradients."""
    gradients = _nonempty(gradients, "gradient").reshape(-1, 3)
    return float(np.mean((np.linalg.norm(gradients, axis=1) - 1.0) ** 2))


def minimal_surface_loss(sdf_values, sharpness=DEFAULT_SURFACE_SHARPNESS):
    """Mean of ``exp(-sharpness |d|)``; penalises spurious near-zero SDF values."""
    d = _nonempty(sdf_values, "SDF")
    return float(np.mean(np.exp(-sharpness * np.abs(d))))


def total_volume_loss(adv, view, eik, surf, weights=None):
    """Weighted sum ``adv + l_view view + l_eik eik + l_surf surf``.

    ``adv`` comes from outside (adversarial training is not part of this project).
    """
    weights = weights or LossWeights()
    total = adv + weights.lambda_view * view + weights.lambda_eik * eik + weights.lambda_surf * surf
    return LossBreakdown(float(adv), float(view), float(eik), float(surf), float(total))


def field_regularizers(net, mods, points, weights=None):
    """Eikonal and minimal-surface terms of a network at caller-chosen points."""
    weights = weights or LossWeights()
    points = _nonempty(points, "point").reshape(-1, 3)
    eik = eikonal_loss(sdf_input_gradient(net, points, mods))
    surf = minimal_surface_loss(net.sdf(points, mods), weights.surface_sharpness)
    return total_volume_loss(0.0, 0.0, eik, surf, weights)
