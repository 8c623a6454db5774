"""Finite-difference checks of the hand-written field derivatives."""

import logging
import re
from dataclasses import dataclass

import numpy as np
import pandas as pd

from field.mapping import mapping_forward
from field.network import (
    FieldArchitecture,
    FieldNetwork,
    color_param_gradient_regression,
    param_gradient_regression,
    sdf_input_gradient,
)

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-4
INPUT_STEP = 1e-4
PARAM_STEP = 1e-5


@dataclass(frozen=True)
class GradcheckConfig:
    """Size of the random check.

    ``networks * points`` input-gradient configurations are tested; parameter
    gradients are checked on ``entries`` random entries of every parameter array.
    """

    networks: int = 5
    points: int = 20
    batch: int = 8
    entries: int = 6
    width: int = 32
    z_dim: int = 16
    mapping_width: int = 32
    feature_dim: int = 16
    tolerance: float = DEFAULT_TOLERANCE

    @property
    def architecture(self):
        return FieldArchitecture(
            z_dim=self.z_dim,
            mapping_width=self.mapping_width,
            width=self.width,
            feature_dim=self.feature_dim,
        )


def relative_error(analytic, numeric):
    """``||a - n|| / max(||a||, ||n||, 1e-12)``."""
    analytic = np.ravel(analytic)
    numeric = np.ravel(numeric)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / scale)


def layer_of(param_name):
    """Group a parameter name by its layer: ``trunk.3.weight`` -> ``trunk.3``."""
    return re.sub(r"\.(weight|bias)$", "", param_name)


def numeric_input_gradient(net, x, mods, step=INPUT_STEP):
    """Central differences of d with respect to each coordinate of ``x``."""
    grad = np.zeros(3)
    for axis in range(3):
        offset = np.zeros(3)
        offset[axis] = step
        plus = net.sdf((x + offset)[None, :], mods)[0]
        minus = net.sdf((x - offset)[None, :], mods)[0]
        grad[axis] = (plus - minus) / (2.0 * step)
    return grad


def check_input_gradient(net, points, mods, gradient_fn=sdf_input_gradient, step=INPUT_STEP):
    """Max relative error of ``gradient_fn`` against central differences over ``points``."""
    worst = 0.0
    analytic = gradient_fn(net, points, mods)
    for x, a in zip(points, analytic):
        worst = max(worst, relative_error(a, numeric_input_gradient(net, x, mods, step)))
    return worst


def _entry_indices(array, count, rng):
    size = array.size
    chosen = rng.choice(size, size=min(count, size), replace=False)
    return [np.unravel_index(int(i), array.shape) for i in np.sort(chosen)]


def check_param_gradients(net, z, points, targets, entries, rng, gradient_fn=param_gradient_regression, step=PARAM_STEP):
    """Per-parameter max relative error of the SDF regression gradients.

    The latent code ``z`` is pushed through the mapping network for every
    perturbed evaluation, so mapping parameters are checked too.
    """
    _, analytic = gradient_fn(net, points, targets, mapping_forward(net.mapping, z))
    params = net.parameters()
    errors = {}
    for name, grad in analytic.items():
        array = params[name]
        a_vals, n_vals = [], []
        for idx in _entry_indices(array, entries, rng):
            saved = array[idx]
            array[idx] = saved + step
            plus, _ = param_gradient_regression(net, points, targets, mapping_forward(net.mapping, z))
            array[idx] = saved - step
            minus, _ = param_gradient_regression(net, points, targets, mapping_forward(net.mapping, z))
            array[idx] = saved
            a_vals.append(grad[idx])
            n_vals.append((plus - minus) / (2.0 * step))
        errors[name] = relative_error(a_vals, n_vals)
    return errors


def check_color_gradients(net, mods, points, dirs, targets, entries, rng, step=PARAM_STEP):
    """Per-parameter max relative error of the colour-path gradients."""
    _, analytic = color_param_gradient_regression(net, points, dirs, targets, mods)
    params = net.parameters()
    errors = {}
    for name, grad in analytic.items():
        array = params[name]
        a_vals, n_vals = [], []
        for idx in _entry_indices(array, entries, rng):
            saved = array[idx]
            array[idx] = saved + step
            plus, _ = color_param_gradient_regression(net, points, dirs, targets, mods)
            array[idx] = saved - step
            minus, _ = color_param_gradient_regression(net, points, dirs, targets, mods)
            array[idx] = saved
            a_vals.append(grad[idx])
            n_vals.append((plus - minus) / (2.0 * step))
        errors[name] = relative_error(a_vals, n_vals)
    return errors


def _random_dirs(rng, count):
    dirs = rng.standard_normal((count, 3))
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def run_gradcheck(config, rng, input_gradient_fn=sdf_input_gradient):
    """Run every check on ``config.networks`` freshly initialised networks.

    Args:
        config: GradcheckConfig.
        rng: ``numpy.random.Generator``.
        input_gradient_fn: Analytic input-gradient function under test; the CLI
            swaps in a corrupted one for its negative control.

    Returns:
        DataFrame with one row per layer: ``layer``, ``kind``, ``max_rel_error``,
        ``passed``.
    """
    worst = {}

    def record(layer, kind, err):
        key = (layer, kind)
        worst[key] = max(worst.get(key, 0.0), err)

    for _ in range(config.networks):
        net = FieldNetwork.initialize(config.architecture, rng)
        z = rng.standard_normal(config.z_dim)
        mods = mapping_forward(net.mapping, z)

        points = rng.uniform(-0.5, 0.5, size=(config.points, 3))
        record("input", "input", check_input_gradient(net, points, mods, input_gradient_fn))

        batch = rng.uniform(-0.5, 0.5, size=(config.batch, 3))
        targets = rng.uniform(-0.3, 0.3, size=config.batch)
        for name, err in check_param_gradients(net, z, batch, targets, config.entries, rng).items():
            record(layer_of(name), "parameter", err)

        dirs = _random_dirs(rng, config.batch)
        color_targets = rng.uniform(0.0, 1.0, size=(config.batch, 3))
        for name, err in check_color_gradients(net, mods, batch, dirs, color_targets, config.entries, rng).items():
            record(layer_of(name), "parameter", err)

    rows = [
        {"layer": layer, "kind": kind, "max_rel_error": err, "passed": err < config.tolerance}
        for (layer, kind), err in worst.items()
    ]
    report = pd.DataFrame(rows, columns=["layer", "kind", "max_rel_error", "passed"])
    failed = int((~report["passed"]).sum())
    logger.info("Gradient check over %d networks: %d of %d layers failed", config.networks, failed, len(report))
    return report
