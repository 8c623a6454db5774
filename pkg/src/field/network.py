"""FiLM-SIREN field network: SDF path, colour path and their derivatives.

The trunk is a stack of modulated sine layers shared by both paths. The SDF head
is a single affine layer on the trunk output; the colour path concatenates the
view direction to the trunk output, runs one more modulated sine layer (whose
output is the feature vector) and an affine colour head squashed by a sigmoid.

Derivatives are written out by hand for this architecture only:
:func:`sdf_input_gradient` (d w.r.t. x, used by the Eikonal term) and
:func:`param_gradient_regression` (MSE w.r.t. every parameter reachable from d,
mapping network included).
"""

from dataclasses import dataclass
from typing import List

import numpy as np

from common.errors import PreconditionError, ShapeError
from common.numerics import sigmoid
from field.layers import AffineLayer, FilmSirenLayer, linear_bias, siren_uniform
from field.mapping import MappingNetwork, mapping_forward

TRUNK_DEPTH = 8
DEFAULT_WIDTH = 256
DEFAULT_FEATURE_DIM = 256
DEFAULT_Z_DIM = 256
DEFAULT_MAPPING_WIDTH = 256
OMEGA0 = 30.0
INPUT_DIM = 3
UNIT_TOLERANCE = 1e-6


@dataclass(frozen=True)
class FieldArchitecture:
    """Layer widths of a field network.

    ``depth`` is 8 for every network built by the commands; smaller values are only
    used by closed-form checks.
    """

    z_dim: int = DEFAULT_Z_DIM
    mapping_width: int = DEFAULT_MAPPING_WIDTH
    width: int = DEFAULT_WIDTH
    depth: int = TRUNK_DEPTH
    feature_dim: int = DEFAULT_FEATURE_DIM
    omega0: float = OMEGA0

    def __post_init__(self):
        for name in ("z_dim", "mapping_width", "width", "depth", "feature_dim"):
            if int(getattr(self, name)) < 1:
                raise ShapeError(f"{name} must be at least 1")

    @property
    def film_widths(self):
        """Output width of every FiLM layer: trunk layers then the colour layer."""
        return [self.width] * self.depth + [self.feature_dim]


@dataclass
class FieldSample:
    """Field outputs for one query (scalars/vectors) or a batch (leading axis B)."""

    d: np.ndarray
    c: np.ndarray
    f: np.ndarray


@dataclass
class FieldNetwork:
    """Mapping network plus the modulated trunk and its two heads."""

    architecture: FieldArchitecture
    mapping: MappingNetwork
    trunk: List[FilmSirenLayer]
    sdf_head: AffineLayer
    color_film: FilmSirenLayer
    color_head: AffineLayer

    def __post_init__(self):
        arch = self.architecture
        if len(self.trunk) != arch.depth:
            raise ShapeError(f"trunk must have {arch.depth} layers, has {len(self.trunk)}")
        expected_in = INPUT_DIM
        for i, layer in enumerate(self.trunk):
            if layer.in_features != expected_in or layer.out_features != arch.width:
                raise ShapeError(f"trunk layer {i} has shape {layer.weight.shape}")
            expected_in = arch.width
        if self.sdf_head.weight.shape != (1, arch.width):
            raise ShapeError("SDF head must map the trunk output to a scalar")
        if self.color_film.weight.shape != (arch.feature_dim, arch.width + INPUT_DIM):
            raise ShapeError("colour FiLM layer must map trunk output + view direction to features")
        if self.color_head.weight.shape != (3, arch.feature_dim):
            raise ShapeError("colour head must map features to 3 channels")
        if self.mapping.widths != arch.film_widths:
            raise ShapeError("mapping network widths do not match the field architecture")

    @classmethod
    def initialize(cls, architecture, rng):
        """Build a network with SIREN initialisation.

        Args:
            architecture: Layer widths.
            rng: ``numpy.random.Generator``.
        """
        arch = architecture
        trunk = []
        in_features = INPUT_DIM
        for i in range(arch.depth):
            weight = siren_uniform(rng, arch.width, in_features, first=(i == 0), omega0=arch.omega0)
            trunk.append(FilmSirenLayer(weight, linear_bias(rng, arch.width, in_features)))
            in_features = arch.width
        sdf_head = AffineLayer(
            siren_uniform(rng, 1, arch.width, first=False, omega0=arch.omega0), np.zeros(1)
        )
        color_in = arch.width + INPUT_DIM
        color_film = FilmSirenLayer(
            siren_uniform(rng, arch.feature_dim, color_in, first=False, omega0=arch.omega0),
            linear_bias(rng, arch.feature_dim, color_in),
        )
        color_head = AffineLayer(
            siren_uniform(rng, 3, arch.feature_dim, first=False, omega0=arch.omega0), np.zeros(3)
        )
        mapping = MappingNetwork.initialize(
            rng, arch.z_dim, arch.mapping_width, arch.film_widths, arch.omega0
        )
        return cls(arch, mapping, trunk, sdf_head, color_film, color_head)

    def parameters(self):
        """Ordered dict of parameter name -> array (the live arrays, not copies)."""
        params = dict(self.mapping.parameters())
        for i, layer in enumerate(self.trunk):
            params[f"trunk.{i}.weight"] = layer.weight
            params[f"trunk.{i}.bias"] = layer.bias
        params["sdf_head.weight"] = self.sdf_head.weight
        params["sdf_head.bias"] = self.sdf_head.bias
        params["color_film.weight"] = self.color_film.weight
        params["color_film.bias"] = self.color_film.bias
        params["color_head.weight"] = self.color_head.weight
        params["color_head.bias"] = self.color_head.bias
        return params

    def copy(self):
        return FieldNetwork(
            self.architecture,
            self.mapping.copy(),
            [layer.copy() for layer in self.trunk],
            self.sdf_head.copy(),
            self.color_film.copy(),
            self.color_head.copy(),
        )

    def modulations(self, z):
        """Shortcut for :func:`mapping_forward` on this network's mapping network."""
        return mapping_forward(self.mapping, z)

    def _check_mods(self, mods):
        widths = self.architecture.film_widths
        if len(mods) != len(widths):
            raise ShapeError(f"expected {len(widths)} modulation pairs, got {len(mods)}")
        for i, (g, w) in enumerate(zip(mods.gammas, widths)):
            if g.shape != (w,):
                raise ShapeError(f"modulation {i} has width {g.shape}, layer width is {w}")

    def trunk_forward(self, x, mods, keep_cache=False):
        """Run the shared trunk on a ``(B, 3)`` batch.

        Returns:
            ``(h, caches)``; ``caches`` holds ``(input, pre, arg)`` per layer when
            ``keep_cache`` is set, otherwise it is empty.
        """
        self._check_mods(mods)
        h = x
        caches = []
        for i, layer in enumerate(self.trunk):
            out, pre, arg = layer.forward_cached(h, mods.gammas[i], mods.betas[i])
            if keep_cache:
                caches.append((h, pre, arg))
            h = out
        return h, caches

    def sdf(self, x, mods):
        """Signed distance for a ``(B, 3)`` batch of points."""
        x = _as_points(x)
        h, _ = self.trunk_forward(x, mods)
        return self.sdf_head.forward(h)[:, 0]


def _as_points(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != INPUT_DIM:
        raise ShapeError(f"points must have shape (B, 3), got {x.shape}")
    return x


def _check_unit(v):
    norms = np.linalg.norm(v, axis=-1)
    if np.any(np.abs(norms - 1.0) > UNIT_TOLERANCE):
        raise PreconditionError("view directions must be unit vectors")


def field_query(net, x, v, mods):
    """Evaluate SDF, colour and feature at points ``x`` seen from directions ``v``.

    Accepts a single point/direction (shapes ``(3,)``) or batches ``(B, 3)``.

    Returns:
        FieldSample; ``d`` is never influenced by ``v``.

    Raises:
        PreconditionError: If a direction is not unit length within 1e-6.
        ShapeError: If shapes or modulation widths do not match the network.
    """
    single = np.ndim(x) == 1
    x = _as_points(np.atleast_2d(x))
    v = np.asarray(np.atleast_2d(v), dtype=np.float64)
    if v.shape != x.shape:
        if v.shape == (1, INPUT_DIM):
            v = np.broadcast_to(v, x.shape)
        else:
            raise ShapeError(f"directions {v.shape} do not match points {x.shape}")
    _check_unit(v)

    h, _ = net.trunk_forward(x, mods)
    d = net.sdf_head.forward(h)[:, 0]
    color_in = np.concatenate([h, v], axis=1)
    f = net.color_film.forward(color_in, mods.gammas[-1], mods.betas[-1])
    c = sigmoid(net.color_head.forward(f))
    if single:
        return FieldSample(d[0], c[0], f[0])
    return FieldSample(d, c, f)


def _trunk_backward(net, caches, mods, grad_h):
    """Backpropagate ``grad_h`` through the trunk, collecting every gradient."""
    grads = {}
    grad_gammas = [None] * len(mods)
    grad_betas = [None] * len(mods)
    for i in reversed(range(len(net.trunk))):
        layer_in, pre, arg = caches[i]
        g = net.trunk[i].backward(layer_in, pre, arg, mods.gammas[i], grad_h)
        grads[f"trunk.{i}.weight"] = g["weight"]
        grads[f"trunk.{i}.bias"] = g["bias"]
        grad_gammas[i] = g["gamma"]
        grad_betas[i] = g["beta"]
        grad_h = g["x"]
    return grad_h, grads, grad_gammas, grad_betas


def sdf_input_gradient(net, x, mods):
    """Exact reverse-mode derivative of d with respect to the query point.

    Args:
        net: Field network.
        x: Point ``(3,)`` or batch ``(B, 3)``.
        mods: Modulation signals for this network.

    Returns:
        Gradient with the same shape as ``x``.
    """
    single = np.ndim(x) == 1
    x = _as_points(np.atleast_2d(x))
    _, caches = net.trunk_forward(x, mods, keep_cache=True)
    grad_h = np.broadcast_to(net.sdf_head.weight, (x.shape[0], net.architecture.width))
    grad_x, _, _, _ = _trunk_backward(net, caches, mods, grad_h)
    return grad_x[0] if single else grad_x


def param_gradient_regression(net, points, targets, mods):
    """MSE between predicted and target SDF values and its parameter gradients.

    Gradients cover the trunk, the SDF head and, when ``mods`` came from
    :func:`mapping_forward`, the mapping network. Colour-path parameters are not
    reachable from d and are left out.

    Args:
        net: Field network.
        points: ``(B, 3)`` query points.
        targets: ``(B,)`` target signed distances.
        mods: Modulation signals.

    Returns:
        Tuple ``(loss, grads)`` with ``grads`` a dict keyed like
        :meth:`FieldNetwork.parameters`.

    Raises:
        PreconditionError: If the batch is empty.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.size == 0:
        raise PreconditionError("regression batch is empty")
    points = _as_points(points)
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    if targets.shape[0] != points.shape[0]:
        raise ShapeError(f"{points.shape[0]} points but {targets.shape[0]} targets")

    batch = points.shape[0]
    h, caches = net.trunk_forward(points, mods, keep_cache=True)
    d = net.sdf_head.forward(h)[:, 0]
    residual = d - targets
    loss = float(np.mean(residual**2))

    grad_d = (2.0 / batch) * residual[:, None]
    grad_h, grad_w, grad_b = net.sdf_head.backward(h, grad_d)
    grads = {"sdf_head.weight": grad_w, "sdf_head.bias": grad_b}
    _, trunk_grads, grad_gammas, grad_betas = _trunk_backward(net, caches, mods, grad_h)
    grads.update(trunk_grads)
    if mods.cache is not None:
        grads.update(net.mapping.backward(mods, grad_gammas, grad_betas))
    return loss, grads


def color_param_gradient_regression(net, points, dirs, targets, mods):
    """MSE on colour and its gradients for the colour-path parameters.

    The trunk output is treated as a constant, so only ``color_film.*`` and
    ``color_head.*`` gradients are returned.

    Returns:
        Tuple ``(loss, grads)``.
    """
    points = _as_points(points)
    if points.shape[0] == 0:
        raise PreconditionError("regression batch is empty")
    dirs = np.broadcast_to(np.asarray(dirs, dtype=np.float64), points.shape)
    _check_unit(dirs)
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != (points.shape[0], 3):
        raise ShapeError(f"colour targets must have shape ({points.shape[0]}, 3)")

    h, _ = net.trunk_forward(points, mods)
    color_in = np.concatenate([h, dirs], axis=1)
    f, pre, arg = net.color_film.forward_cached(color_in, mods.gammas[-1], mods.betas[-1])
    c = sigmoid(net.color_head.forward(f))
    residual = c - targets
    loss = float(np.mean(residual**2))

    grad_logit = (2.0 / residual.size) * residual * c * (1.0 - c)
    grad_f, grad_w, grad_b = net.color_head.backward(f, grad_logit)
    g = net.color_film.backward(color_in, pre, arg, mods.gammas[-1], grad_f)
    grads = {
        "color_head.weight": grad_w,
        "color_head.bias": grad_b,
        "color_film.weight": g["weight"],
        "color_film.bias": g["bias"],
    }
    return loss, grads
