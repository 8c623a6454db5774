"""Sphere initialisation: regress the field network onto an analytic sphere SDF."""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from tqdm import tqdm

from common.errors import ParameterError, TrainingError
from field.analytic import AnalyticSdf
from field.mapping import mapping_forward
from field.network import param_gradient_regression

logger = logging.getLogger(__name__)

DIVERGENCE_FACTOR = 10.0
DIVERGENCE_PATIENCE = 100


@dataclass(frozen=True)
class SphereInitConfig:
    """Settings of the sphere fit.

    The step size warms up linearly over the first ``warmup_fraction`` of the
    steps, then follows a cosine from ``learning_rate`` down to
    ``min_learning_rate``.

    Attributes:
        radius: Target sphere radius.
        iterations: Gradient steps.
        learning_rate: Peak Adam step size.
        min_learning_rate: Step size at the last iteration.
        warmup_fraction: Share of the steps spent ramping up to the peak.
        batch_size: Points per step.
        box_half: Points are drawn uniformly in ``[-box_half, box_half]^3``.
        shell_fraction: Share of each batch drawn near the surface.
        shell_std: Radial spread of shell points, as a multiple of ``radius``.
        near_fraction: Share of each batch drawn uniformly in
            ``[-near_scale * radius, near_scale * radius]^3``.
        near_scale: Half-extent of the near box, as a multiple of ``radius``.
        fresh_latent: Draw a new latent code every step so the fit holds for any z.
        beta1: Adam first-moment decay.
        beta2: Adam second-moment decay.
        eps: Adam denominator guard.
    """

    radius: float = 0.1
    iterations: int = 10000
    learning_rate: float = 3e-4
    min_learning_rate: float = 1e-6
    warmup_fraction: float = 0.05
    batch_size: int = 1024
    box_half: float = 1.2 * 1.12
    shell_fraction: float = 0.5
    shell_std: float = 0.1
    near_fraction: float = 0.25
    near_scale: float = 2.0
    fresh_latent: bool = True
    beta1: float = 0.0
    beta2: float = 0.9
    eps: float = 1e-8

    def __post_init__(self):
        if not self.radius > 0:
            raise ParameterError(f"radius must be positive, got {self.radius}")
        if int(self.iterations) < 1:
            raise ParameterError(f"iterations must be at least 1, got {self.iterations}")
        if int(self.batch_size) < 1:
            raise ParameterError("batch_size must be at least 1")
        if not self.learning_rate > 0 or not self.box_half > 0 or not self.near_scale > 0:
            raise ParameterError("learning_rate, box_half and near_scale must be positive")
        if not self.min_learning_rate >= 0:
            raise ParameterError("min_learning_rate must be non-negative")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ParameterError("warmup_fraction must lie in [0, 1)")
        fractions = (self.shell_fraction, self.near_fraction)
        if min(fractions) < 0.0 or sum(fractions) > 1.0:
            raise ParameterError("shell_fraction and near_fraction must be non-negative and sum to at most 1")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ParameterError("Adam decays must lie in [0, 1)")


def learning_rate_at(cfg, step):
    """Step size for 0-based ``step``: linear warmup, then cosine decay."""
    total = int(cfg.iterations)
    warmup = int(cfg.warmup_fraction * total)
    if step < warmup:
        return cfg.learning_rate * (step + 1) / warmup
    floor = min(cfg.min_learning_rate, cfg.learning_rate)
    progress = (step - warmup) / max(1, total - 1 - warmup)
    return floor + 0.5 * (cfg.learning_rate - floor) * (1.0 + np.cos(np.pi * min(progress, 1.0)))


class Adam:
    """Adam on a dict of live parameter arrays (updated in place)."""

    def __init__(self, params, learning_rate, beta1=0.0, beta2=0.9, eps=1e-8):
        self.params = params
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {name: np.zeros_like(p) for name, p in params.items()}
        self.v = {name: np.zeros_like(p) for name, p in params.items()}

    def step(self, grads):
        self.step_count += 1
        bias1 = 1.0 - self.beta1**self.step_count
        bias2 = 1.0 - self.beta2**self.step_count
        for name, grad in grads.items():
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * grad
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * grad * grad
            m_hat = self.m[name] / bias1
            v_hat = self.v[name] / bias2
            self.params[name] -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


def sample_shell(rng, count, radius, spread):
    """Points at distance ``radius + N(0, spread * radius)`` in uniform directions."""
    dirs = rng.standard_normal((count, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = np.abs(radius + spread * radius * rng.standard_normal(count))
    return dirs * radii[:, None]


def sample_training_points(cfg, rng):
    """One batch: uniform box points, near-field points around the sphere, shell points."""
    n_shell = int(round(cfg.batch_size * cfg.shell_fraction))
    n_near = min(int(round(cfg.batch_size * cfg.near_fraction)), cfg.batch_size - n_shell)
    near_half = cfg.near_scale * cfg.radius
    box = rng.uniform(-cfg.box_half, cfg.box_half, size=(cfg.batch_size - n_shell - n_near, 3))
    near = rng.uniform(-near_half, near_half, size=(n_near, 3))
    shell = sample_shell(rng, n_shell, cfg.radius, cfg.shell_std)
    return np.concatenate([box, near, shell], axis=0)


def sphere_init_fit(net, cfg, rng, progress=False):
    """Fit a copy of ``net`` to the SDF of a centred sphere.

    Args:
        net: Field network to start from (left untouched).
        cfg: SphereInitConfig.
        rng: ``numpy.random.Generator``.
        progress: Show a tqdm progress bar.

    Returns:
        Tuple ``(fitted_net, history)`` with ``history`` the MSE of every step.

    Raises:
        TrainingError: If the loss stays above 10x its first value for 100
            consecutive steps or becomes non-finite. ``history`` is attached.
    """
    net = net.copy()
    target = AnalyticSdf.sphere(cfg.radius)
    optimizer = Adam(net.parameters(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    z = rng.standard_normal(net.architecture.z_dim)
    history = []
    above = 0

    with tqdm(total=int(cfg.iterations), desc="Sphere init", unit="step", disable=not progress) as pbar:
        for step in range(int(cfg.iterations)):
            optimizer.learning_rate = learning_rate_at(cfg, step)
            if cfg.fresh_latent:
                z = rng.standard_normal(net.architecture.z_dim)
            points = sample_training_points(cfg, rng)
            loss, grads = param_gradient_regression(net, points, target.evaluate(points), mapping_forward(net.mapping, z))
            history.append(loss)
            if not np.isfinite(loss):
                raise TrainingError(f"sphere fit produced a non-finite loss at step {len(history)}", np.array(history))
            above = above + 1 if loss > DIVERGENCE_FACTOR * history[0] else 0
            if above >= DIVERGENCE_PATIENCE:
                raise TrainingError(
                    f"sphere fit diverged: loss above {DIVERGENCE_FACTOR:g}x its first value for "
                    f"{DIVERGENCE_PATIENCE} steps",
                    np.array(history),
                )
            optimizer.step(grads)
            pbar.update(1)
            if len(history) % 500 == 0:
                pbar.set_postfix(mse=f"{loss:.3e}")

    logger.info("Sphere fit finished: mse %.3e -> %.3e over %d steps", history[0], history[-1], len(history))
    return net, np.array(history)


def sphere_fit_residual(net, radius, rng, count=4096, spread=0.1, z=None):
    """Held-out mean ``|d_pred - d_true|`` on shell points around the sphere."""
    if z is None:
        z = rng.standard_normal(net.architecture.z_dim)
    points = sample_shell(rng, count, radius, spread)
    predicted = net.sdf(points, mapping_forward(net.mapping, z))
    return float(np.mean(np.abs(predicted - AnalyticSdf.sphere(radius).evaluate(points))))


def history_frame(history):
    return pd.DataFrame({"iteration": np.arange(1, len(history) + 1), "mse": np.asarray(history)})


def save_history(history, path):
    """Write the loss history as CSV with columns ``iteration, mse``."""
    history_frame(history).to_csv(path, index=False)
    logger.info("Saved %d loss history rows to %s", len(history), path)
