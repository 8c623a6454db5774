"""Closed-form signed distance functions used as oracles and fitting targets."""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from common.errors import ParameterError, ShapeError

SHAPES = ("sphere", "box", "torus")


@dataclass(frozen=True)
class AnalyticSdf:
    """An exact signed distance function, negative inside.

    Attributes:
        shape: One of ``sphere``, ``box`` or ``torus``.
        center: World-space centre.
        radius: Sphere radius.
        half_extents: Box half sizes along x, y, z.
        radii: Torus ``(major, minor)`` radii; the ring lies in the xz plane.
    """

    shape: str
    center: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    radius: float = 0.0
    half_extents: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    radii: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ParameterError(f"unknown shape '{self.shape}', expected one of {SHAPES}")
        if len(self.center) != 3:
            raise ShapeError("center must have 3 components")
        if self.shape == "sphere" and not self.radius > 0:
            raise ParameterError(f"sphere radius must be positive, got {self.radius}")
        if self.shape == "box" and (len(self.half_extents) != 3 or min(self.half_extents) <= 0):
            raise ParameterError(f"box half extents must be three positive values, got {self.half_extents}")
        if self.shape == "torus":
            if len(self.radii) != 2 or min(self.radii) <= 0:
                raise ParameterError(f"torus radii must be positive, got {self.radii}")
            if self.radii[1] >= self.radii[0]:
                raise ParameterError("torus minor radius must be smaller than the major radius")

    @classmethod
    def sphere(cls, radius, center=(0.0, 0.0, 0.0)):
        return cls("sphere", center=tuple(center), radius=float(radius))

    @classmethod
    def box(cls, half_extents, center=(0.0, 0.0, 0.0)):
        return cls("box", center=tuple(center), half_extents=tuple(float(h) for h in half_extents))

    @classmethod
    def torus(cls, major, minor, center=(0.0, 0.0, 0.0)):
        return cls("torus", center=tuple(center), radii=(float(major), float(minor)))

    def evaluate(self, points):
        """Signed distance for a ``(..., 3)`` array of points."""
        p = _local(points, self.center)
        if self.shape == "sphere":
            return np.linalg.norm(p, axis=-1) - self.radius
        if self.shape == "box":
            q = np.abs(p) - np.asarray(self.half_extents)
            outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
            inside = np.minimum(np.max(q, axis=-1), 0.0)
            return outside + inside
        major, minor = self.radii
        ring = np.hypot(p[..., 0], p[..., 2]) - major
        return np.hypot(ring, p[..., 1]) - minor

    def gradient(self, points):
        """Analytic gradient of :meth:`evaluate`; unit length off the medial axis."""
        p = _local(points, self.center)
        if self.shape == "sphere":
            return _normalize(p)
        if self.shape == "box":
            q = np.abs(p) - np.asarray(self.half_extents)
            sign = np.where(p < 0, -1.0, 1.0)
            outside = np.any(q > 0, axis=-1)
            grad_out = _normalize(np.maximum(q, 0.0)) * sign
            axis = np.argmax(q, axis=-1)
            grad_in = np.zeros_like(p)
            np.put_along_axis(grad_in, axis[..., None], 1.0, axis=-1)
            grad_in = grad_in * sign
            return np.where(outside[..., None], grad_out, grad_in)
        major, _ = self.radii
        rho = np.hypot(p[..., 0], p[..., 2])
        radial = np.stack([p[..., 0], np.zeros_like(rho), p[..., 2]], axis=-1)
        radial = radial / np.maximum(rho, 1e-300)[..., None]
        ring = rho - major
        tube = np.stack([ring, p[..., 1]], axis=-1)
        tube = tube / np.maximum(np.linalg.norm(tube, axis=-1), 1e-300)[..., None]
        grad = radial * tube[..., 0:1]
        grad[..., 1] = tube[..., 1]
        return grad


def _local(points, center):
    points = np.asarray(points, dtype=np.float64)
    if points.shape[-1] != 3:
        raise ShapeError(f"points must end in a 3-vector axis, got {points.shape}")
    return points - np.asarray(center, dtype=np.float64)


def _normalize(v):
    norm = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / np.maximum(norm, 1e-300)


def analytic_sdf_eval(shape, x):
    """Signed distance of ``x`` (a point or ``(..., 3)`` batch) to ``shape``."""
    d = shape.evaluate(x)
    return float(d) if np.ndim(d) == 0 else d
