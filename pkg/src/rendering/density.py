"""SDF to volume density: a scaled logistic of the negated distance."""

from dataclasses import dataclass

import numpy as np

from common.errors import ParameterError
from common.numerics import sigmoid

TRAINING_ALPHA = 0.1
RENDER_ALPHA = 0.01


@dataclass(frozen=True)
class DensityParams:
    """Tightness ``alpha`` of the density around the zero level set (scene units)."""

    alpha: float = RENDER_ALPHA

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise ParameterError(f"alpha must be positive, got {self.alpha}")


def sdf_to_density(d, params):
    """``sigma = sigmoid(-d / alpha) / alpha``; always in ``(0, 1/alpha)`` up to underflow."""
    if not isinstance(params, DensityParams):
        params = DensityParams(float(params))
    return sigmoid(-np.asarray(d, dtype=np.float64) / params.alpha) / params.alpha
