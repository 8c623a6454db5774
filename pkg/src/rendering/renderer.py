"""Image rendering: rays, samples, field queries, densities and compositing per pixel."""

import logging
from dataclasses import dataclass

import numpy as np

from camera.pose import generate_rays
from common.parallel import map_chunks
from field.scene import as_scene
from rendering.compositing import OPACITY_THRESHOLD, compositing_weights, expected_depth
from rendering.density import sdf_to_density
from rendering.sampling import RaySamples, draw_offsets, samples_from_delta

logger = logging.getLogger(__name__)

POINTS_PER_CHUNK = 32768


@dataclass
class RenderBuffers:
    """Per-pixel render outputs, all with leading shape ``(H, W)``.

    Attributes:
        color: ``(H, W, 3)`` integrated colour.
        feature: ``(H, W, F)`` integrated feature vectors (``F`` may be 0).
        depth: ``(H, W)`` unnormalised expected termination distance.
        opacity: ``(H, W)`` accumulated opacity in ``[0, 1]``.
        valid: ``(H, W)`` rays whose opacity reaches the threshold.
        bin_size: Sampling bin length used for the render.
    """

    color: np.ndarray
    feature: np.ndarray
    depth: np.ndarray
    opacity: np.ndarray
    valid: np.ndarray
    bin_size: float

    @property
    def height(self):
        return self.depth.shape[0]

    @property
    def width(self):
        return self.depth.shape[1]


def render_rays(scene, origins, dirs, samples, params):
    """Render a flat batch of rays; returns colour, feature, depth, opacity and validity."""
    points = origins[:, None, :] + samples.t[..., None] * dirs[:, None, :]
    count, n_samples = samples.t.shape
    ray_dirs = np.repeat(dirs, n_samples, axis=0)
    d, c, f = scene.query(points.reshape(-1, 3), ray_dirs)
    sigma = sdf_to_density(np.reshape(d, (count, n_samples)), params)
    weights = compositing_weights(samples, sigma)
    values = np.concatenate(
        [np.reshape(c, (count, n_samples, 3)), np.reshape(f, (count, n_samples, scene.feature_dim))], axis=-1
    )
    integrated = np.einsum("rn,rnk->rk", weights.weights, values)
    depth, valid = expected_depth(samples, weights, OPACITY_THRESHOLD)
    return integrated[:, :3], integrated[:, 3:], depth, weights.opacity, valid


def render(field, cam, params, n_samples, rng, mods=None, threads=None):
    """Render ``field`` from ``cam``.

    Args:
        field: A scene, a FieldNetwork (with ``mods``) or an AnalyticSdf.
        cam: CameraPose; its ``near``/``far`` bound the samples and its size sets
            the image resolution.
        params: DensityParams.
        n_samples: Samples per ray.
        rng: ``numpy.random.Generator``; every ray offset is drawn from it before
            any work is split across threads.
        mods: Modulation signals when ``field`` is a network.
        threads: Worker count, ``None`` for all cores. Output does not depend on it.

    Returns:
        RenderBuffers.
    """
    scene = as_scene(field, mods)
    origins, dirs = generate_rays(cam)
    height, width = cam.height, cam.width
    origins = origins.reshape(-1, 3)
    dirs = dirs.reshape(-1, 3)
    total = origins.shape[0]
    samples = samples_from_delta(cam.near, cam.far, n_samples, draw_offsets(cam.near, cam.far, n_samples, total, rng))

    def work(sl):
        chunk = RaySamples(samples.t_near, samples.t_far, samples.n_samples, samples.delta[sl], samples.t[sl])
        return render_rays(scene, origins[sl], dirs[sl], chunk, params)

    chunk_rays = max(1, POINTS_PER_CHUNK // int(n_samples))
    parts = map_chunks(work, total, chunk_rays, threads)
    color, feature, depth, opacity, valid = (np.concatenate(p, axis=0) for p in zip(*parts))
    buffers = RenderBuffers(
        color.reshape(height, width, 3),
        feature.reshape(height, width, scene.feature_dim),
        depth.reshape(height, width),
        opacity.reshape(height, width),
        valid.reshape(height, width),
        samples.bin_size,
    )
    logger.debug("Rendered %dx%d image, %d of %d rays valid", width, height, int(valid.sum()), total)
    return buffers
