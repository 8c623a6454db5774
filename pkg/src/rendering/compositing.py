"""Discrete volume-rendering quadrature and expected termination depth."""

from dataclasses import dataclass

import numpy as np

from common.errors import PreconditionError, ShapeError

OPACITY_THRESHOLD = 0.5


@dataclass
class CompositeWeights:
    """Per-sample compositing terms, trailing axis ``N``; ``opacity`` drops it."""

    transmittance: np.ndarray
    alpha: np.ndarray
    weights: np.ndarray
    opacity: np.ndarray


def compositing_weights(samples, densities):
    """Alpha-compositing weights for densities at the given samples.

    ``a_i = 1 - exp(-sigma_i * bin)`` for every sample (the last bin included) and
    ``T_i = exp(-sum_{j<i} sigma_j * bin)``.
    """
    densities = np.asarray(densities, dtype=np.float64)
    if densities.shape != samples.t.shape:
        raise ShapeError(f"densities {densities.shape} do not match samples {samples.t.shape}")
    if np.any(densities < 0) or np.any(np.isnan(densities)):
        raise PreconditionError("densities must be non-negative")
    optical = densities * samples.bin_size
    alpha = -np.expm1(-optical)
    accumulated = np.zeros_like(optical)
    accumulated[..., 1:] = np.cumsum(optical[..., :-1], axis=-1)
    transmittance = np.exp(-accumulated)
    weights = transmittance * alpha
    opacity = np.clip(weights.sum(axis=-1), 0.0, 1.0)
    return CompositeWeights(transmittance, alpha, weights, opacity)


def composite(samples, densities, values):
    """Integrate per-sample values along rays.

    Args:
        samples: RaySamples for one ray ``(N,)`` or a batch ``(R, N)``.
        densities: Non-negative densities with the same shape as ``samples.t``.
        values: ``(..., N, K)`` values to integrate (colour, features, ...).

    Returns:
        Tuple ``(integrated, weights)`` with ``integrated`` of shape ``(..., K)``.

    Raises:
        PreconditionError: On a negative density.
    """
    cw = compositing_weights(samples, densities)
    values = np.asarray(values, dtype=np.float64)
    if values.shape[:-1] != cw.weights.shape:
        raise ShapeError(f"values {values.shape} do not match samples {cw.weights.shape}")
    integrated = np.einsum("...n,...nk->...k", cw.weights, values)
    return integrated, cw


def expected_depth(samples, weights, threshold=OPACITY_THRESHOLD):
    """Unnormalised expected termination distance ``sum w_i t_i`` and its validity.

    A ray is valid when its accumulated opacity reaches ``threshold``.
    """
    depth = np.sum(weights.weights * samples.t, axis=-1)
    valid = weights.opacity >= threshold
    return depth, valid
