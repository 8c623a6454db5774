"""Even-bin ray sampling with a single random offset per ray.

Every ray is cut into ``N`` bins of equal length and shifted by one offset
``delta`` in ``[0, bin)``; the samples of a ray are fully determined by that
offset. There is no stratified or hierarchical sampling.
"""

from dataclasses import dataclass

import numpy as np

from common.errors import ParameterError


@dataclass(frozen=True)
class RaySamples:
    """Sample distances along one ray or a batch of rays.

    Attributes:
        t_near: Start of the sampling range.
        t_far: End of the sampling range.
        n_samples: Samples per ray.
        delta: Offset per ray, scalar or shape ``(R,)``.
        t: Sample distances, ``(N,)`` or ``(R, N)``.
    """

    t_near: float
    t_far: float
    n_samples: int
    delta: np.ndarray
    t: np.ndarray

    @property
    def bin_size(self):
        return bin_size(self.t_near, self.t_far, self.n_samples)


def bin_size(t_near, t_far, n_samples):
    return (t_far - t_near) / n_samples


def _validate(t_near, t_far, n_samples):
    if not (np.isfinite(t_near) and np.isfinite(t_far) and t_far > t_near):
        raise ParameterError(f"need t_far > t_near, got [{t_near}, {t_far}]")
    if int(n_samples) != n_samples or n_samples < 1:
        raise ParameterError(f"sample count must be a positive integer, got {n_samples}")


def samples_from_delta(t_near, t_far, n_samples, delta):
    """Deterministic samples ``t_i = bin * i + t_near + delta`` for given offsets."""
    _validate(t_near, t_far, n_samples)
    n_samples = int(n_samples)
    step = bin_size(t_near, t_far, n_samples)
    delta = np.asarray(delta, dtype=np.float64)
    if np.any(delta < 0) or np.any(delta >= step):
        raise ParameterError(f"offset must lie in [0, {step})")
    t = step * np.arange(n_samples) + t_near + delta[..., None]
    return RaySamples(float(t_near), float(t_far), n_samples, delta, t)


def draw_offsets(t_near, t_far, n_samples, count, rng):
    """Draw ``count`` offsets uniformly in ``[0, bin)``.

    An offset whose last sample would round onto ``t_far`` is replaced by 0.
    """
    _validate(t_near, t_far, n_samples)
    step = bin_size(t_near, t_far, int(n_samples))
    delta = rng.random(count) * step
    last = step * (int(n_samples) - 1) + t_near + delta
    return np.where(last < t_far, delta, 0.0)


def sample_ray(t_near, t_far, n_samples, rng):
    """Samples for a single ray."""
    delta = draw_offsets(t_near, t_far, n_samples, 1, rng)[0]
    return samples_from_delta(t_near, t_far, n_samples, delta)


def sample_rays(t_near, t_far, n_samples, count, rng):
    """Samples for ``count`` rays, one independent offset per ray."""
    return samples_from_delta(t_near, t_far, n_samples, draw_offsets(t_near, t_far, n_samples, count, rng))
