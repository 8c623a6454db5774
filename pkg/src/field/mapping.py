"""Mapping network: latent code -> per-layer FiLM frequencies and phases."""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from common.errors import ShapeError
from field.layers import AffineLayer, linear_bias

MAPPING_DEPTH = 3
LEAKY_SLOPE = 0.2
HEAD_WEIGHT_SCALE = 0.25


@dataclass
class ModulationSignals:
    """One (gamma, beta) pair per FiLM layer.

    Indices ``0 .. depth-1`` are the trunk layers; the last pair belongs to the
    colour-path layer. ``latent`` and ``cache`` are set when the signals come from
    :func:`mapping_forward`, which lets gradients flow back into the mapping network.
    """

    gammas: List[np.ndarray]
    betas: List[np.ndarray]
    latent: Optional[np.ndarray] = None
    cache: Optional[dict] = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.gammas) != len(self.betas):
            raise ShapeError("gammas and betas must have one entry per FiLM layer")
        self.gammas = [np.asarray(g, dtype=np.float64) for g in self.gammas]
        self.betas = [np.asarray(b, dtype=np.float64) for b in self.betas]
        for g, b in zip(self.gammas, self.betas):
            if g.shape != b.shape:
                raise ShapeError(f"gamma {g.shape} and beta {b.shape} widths differ")

    def __len__(self):
        return len(self.gammas)

    @property
    def intermediate(self):
        """Intermediate code ``w`` (output of the last hidden layer), if known."""
        if self.cache is None:
            return None
        return self.cache["activations"][-1]

    @classmethod
    def constant(cls, widths, gamma=1.0, beta=0.0):
        """Signals with the same gamma and beta everywhere (handy for tests)."""
        return cls(
            [np.full(w, float(gamma)) for w in widths],
            [np.full(w, float(beta)) for w in widths],
        )


def leaky_relu(x, slope=LEAKY_SLOPE):
    return np.where(x > 0, x, slope * x)


@dataclass
class MappingNetwork:
    """Three affine layers with leaky-rectifier activation plus a modulation head.

    Attributes:
        hidden: The three hidden affine layers; the last one's activation is ``w``.
        head: Affine layer from ``w`` to ``[gamma_0..gamma_K, beta_0..beta_K]``.
        widths: Output width of every FiLM layer the signals feed.
        slope: Negative slope of the leaky rectifier.
    """

    hidden: List[AffineLayer]
    head: AffineLayer
    widths: List[int]
    slope: float = LEAKY_SLOPE

    def __post_init__(self):
        if len(self.hidden) != MAPPING_DEPTH:
            raise ShapeError(f"mapping network needs exactly {MAPPING_DEPTH} hidden layers")
        for prev, nxt in zip(self.hidden[:-1], self.hidden[1:]):
            if prev.out_features != nxt.in_features:
                raise ShapeError("mapping hidden layer widths do not chain")
        if self.head.in_features != self.hidden[-1].out_features:
            raise ShapeError("mapping head input must match the last hidden width")
        if self.head.out_features != 2 * sum(self.widths):
            raise ShapeError(
                f"mapping head must emit {2 * sum(self.widths)} values, "
                f"emits {self.head.out_features}"
            )
        self.widths = [int(w) for w in self.widths]

    @property
    def z_dim(self):
        return self.hidden[0].in_features

    @classmethod
    def initialize(cls, rng, z_dim, hidden_width, widths, omega0):
        """Kaiming-normal hidden layers; small head weights; gamma bias = omega0."""
        hidden = []
        fan_in = z_dim
        gain = np.sqrt(2.0 / (1.0 + LEAKY_SLOPE**2))
        for _ in range(MAPPING_DEPTH):
            weight = rng.standard_normal((hidden_width, fan_in)) * gain / np.sqrt(fan_in)
            hidden.append(AffineLayer(weight, linear_bias(rng, hidden_width, fan_in)))
            fan_in = hidden_width
        total = sum(widths)
        head_weight = (
            rng.standard_normal((2 * total, hidden_width))
            * gain
            / np.sqrt(hidden_width)
            * HEAD_WEIGHT_SCALE
        )
        head_bias = np.concatenate([np.full(total, float(omega0)), np.zeros(total)])
        return cls(hidden, AffineLayer(head_weight, head_bias), list(widths))

    def split(self, head_out):
        """Cut a flat head output into per-layer gamma and beta lists."""
        total = sum(self.widths)
        bounds = np.cumsum([0] + self.widths)
        gammas = [head_out[bounds[i]:bounds[i + 1]] for i in range(len(self.widths))]
        betas = [head_out[total + bounds[i]:total + bounds[i + 1]] for i in range(len(self.widths))]
        return gammas, betas

    def backward(self, mods, grad_gammas, grad_betas):
        """Gradients of the mapping parameters given gamma/beta gradients.

        Args:
            mods: Signals produced by :func:`mapping_forward` (must carry a cache).
            grad_gammas: Per-layer gamma gradients; ``None`` entries count as zero.
            grad_betas: Per-layer beta gradients; ``None`` entries count as zero.

        Returns:
            Dict of parameter name -> gradient.
        """
        grad_head_out = np.concatenate(
            [g if g is not None else np.zeros(w) for g, w in zip(grad_gammas, self.widths)]
            + [b if b is not None else np.zeros(w) for b, w in zip(grad_betas, self.widths)]
        )
        inputs = mods.cache["inputs"]
        pre = mods.cache["pre"]
        w = mods.cache["activations"][-1]

        grads = {}
        grad_out = grad_head_out[None, :]
        grad_x, grads["mapping.head.weight"], grads["mapping.head.bias"] = self.head.backward(
            w[None, :], grad_out
        )
        for i in reversed(range(MAPPING_DEPTH)):
            grad_pre = grad_x * np.where(pre[i] > 0, 1.0, self.slope)[None, :]
            grad_x, gw, gb = self.hidden[i].backward(inputs[i][None, :], grad_pre)
            grads[f"mapping.hidden.{i}.weight"] = gw
            grads[f"mapping.hidden.{i}.bias"] = gb
        return grads

    def parameters(self):
        params = {}
        for i, layer in enumerate(self.hidden):
            params[f"mapping.hidden.{i}.weight"] = layer.weight
            params[f"mapping.hidden.{i}.bias"] = layer.bias
        params["mapping.head.weight"] = self.head.weight
        params["mapping.head.bias"] = self.head.bias
        return params

    def copy(self):
        return MappingNetwork([h.copy() for h in self.hidden], self.head.copy(), list(self.widths), self.slope)


def mapping_forward(net, z):
    """Map a latent code to modulation signals.

    Args:
        net: Mapping network.
        z: Latent vector of length ``net.z_dim``.

    Returns:
        ModulationSignals with one (gamma, beta) pair per FiLM layer.

    Raises:
        ShapeError: If ``z`` has the wrong dimension.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (net.z_dim,):
        raise ShapeError(f"latent code must have shape ({net.z_dim},), got {z.shape}")
    inputs, pre, activations = [], [], []
    h = z
    for layer in net.hidden:
        inputs.append(h)
        u = layer.forward(h[None, :])[0]
        pre.append(u)
        h = leaky_relu(u, net.slope)
        activations.append(h)
    head_out = net.head.forward(h[None, :])[0]
    gammas, betas = net.split(head_out)
    cache = {"inputs": inputs, "pre": pre, "activations": activations}
    return ModulationSignals(gammas, betas, latent=z.copy(), cache=cache)
