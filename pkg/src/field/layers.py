"""Dense layers of the field network with hand-written forward and backward passes.

Both layer kinds work on batches: inputs are ``(B, in)`` arrays, outputs ``(B, out)``.
"""

from dataclasses import dataclass

import numpy as np

from common.errors import ShapeError


@dataclass
class AffineLayer:
    """Fully connected layer ``y = x W^T + b``.

    Attributes:
        weight: ``(out, in)`` matrix.
        bias: ``(out,)`` vector.
    """

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(
                f"affine layer expects weight (out, in) and bias (out,), got "
                f"{self.weight.shape} and {self.bias.shape}"
            )

    @property
    def in_features(self):
        return self.weight.shape[1]

    @property
    def out_features(self):
        return self.weight.shape[0]

    def forward(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.in_features:
            raise ShapeError(f"expected input width {self.in_features}, got {x.shape[-1]}")
        return x @ self.weight.T + self.bias

    def backward(self, x, grad_out):
        """Return ``(grad_x, grad_weight, grad_bias)`` for a batch."""
        grad_weight = grad_out.T @ x
        grad_bias = grad_out.sum(axis=0)
        grad_x = grad_out @ self.weight
        return grad_x, grad_weight, grad_bias

    def copy(self):
        return AffineLayer(self.weight.copy(), self.bias.copy())


@dataclass
class FilmSirenLayer:
    """FiLM-modulated sine layer ``sin(gamma * (x W^T + b) + beta)``.

    The modulation (gamma, beta) is not owned by the layer; the mapping network
    produces it per latent code.
    """

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(
                f"FiLM layer expects weight (out, in) and bias (out,), got "
                f"{self.weight.shape} and {self.bias.shape}"
            )

    @property
    def in_features(self):
        return self.weight.shape[1]

    @property
    def out_features(self):
        return self.weight.shape[0]

    def _check_modulation(self, gamma, beta):
        gamma = np.asarray(gamma, dtype=np.float64)
        beta = np.asarray(beta, dtype=np.float64)
        if gamma.shape != (self.out_features,) or beta.shape != (self.out_features,):
            raise ShapeError(
                f"modulation must have width {self.out_features}, got gamma {gamma.shape} "
                f"and beta {beta.shape}"
            )
        return gamma, beta

    def forward_cached(self, x, gamma, beta):
        """Forward pass that also returns the values the backward pass needs.

        Returns:
            Tuple ``(out, pre, arg)`` where ``pre = x W^T + b`` and
            ``arg = gamma * pre + beta``.
        """
        gamma, beta = self._check_modulation(gamma, beta)
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.in_features:
            raise ShapeError(f"expected input width {self.in_features}, got {x.shape[-1]}")
        pre = x @ self.weight.T + self.bias
        arg = gamma * pre + beta
        return np.sin(arg), pre, arg

    def forward(self, x, gamma, beta):
        return self.forward_cached(x, gamma, beta)[0]

    def backward(self, x, pre, arg, gamma, grad_out):
        """Backward pass through one modulated layer.

        Returns:
            Dict with ``x``, ``weight``, ``bias``, ``gamma`` and ``beta`` gradients.
            Gamma and beta gradients are summed over the batch.
        """
        grad_arg = grad_out * np.cos(arg)
        grad_pre = grad_arg * gamma
        return {
            "x": grad_pre @ self.weight,
            "weight": grad_pre.T @ x,
            "bias": grad_pre.sum(axis=0),
            "gamma": (grad_arg * pre).sum(axis=0),
            "beta": grad_arg.sum(axis=0),
        }

    def copy(self):
        return FilmSirenLayer(self.weight.copy(), self.bias.copy())


def film_siren_forward(layer, x, gamma, beta):
    """Evaluate one FiLM-SIREN layer on a single input vector or a batch."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return layer.forward(x[None, :], gamma, beta)[0]
    return layer.forward(x, gamma, beta)


def siren_uniform(rng, out_features, in_features, first, omega0):
    """Sample a SIREN weight matrix.

    The first layer draws from ``U(-1/in, 1/in)``; later layers from
    ``U(-sqrt(6/in)/omega0, sqrt(6/in)/omega0)``.
    """
    if first:
        bound = 1.0 / in_features
    else:
        bound = np.sqrt(6.0 / in_features) / omega0
    return rng.uniform(-bound, bound, size=(out_features, in_features))


def linear_bias(rng, out_features, in_features):
    """Default dense-layer bias, ``U(-1/sqrt(in), 1/sqrt(in))``."""
    bound = 1.0 / np.sqrt(in_features)
    return rng.uniform(-bound, bound, size=out_features)
