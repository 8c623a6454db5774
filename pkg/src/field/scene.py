"""Renderable scenes: a common face over network fields and analytic shapes.

Renderers, grid samplers and the consistency suite only ever call ``sdf`` and
``query``, so they work unchanged on either kind of scene.
"""

import numpy as np

from common.errors import PreconditionError, ShapeError
from field.analytic import AnalyticSdf
from field.network import UNIT_TOLERANCE, FieldNetwork, field_query


def default_color(points):
    """Smooth position-dependent colour ramp in ``(0, 1)``."""
    return 0.5 + 0.5 * np.tanh(2.0 * np.asarray(points, dtype=np.float64))


class NetworkScene:
    """A field network bound to one set of modulation signals.

    Args:
        net: Field network.
        mods: Modulation signals (usually ``mapping_forward(net.mapping, z)``).
        view_direction: When given, every colour query uses this direction instead
            of the ray direction (the fixed frontal view used at inference).
    """

    def __init__(self, net, mods, view_direction=None):
        if not isinstance(net, FieldNetwork):
            raise TypeError("NetworkScene needs a FieldNetwork")
        self.net = net
        self.mods = mods
        if view_direction is not None:
            view_direction = np.asarray(view_direction, dtype=np.float64)
            if view_direction.shape != (3,):
                raise ShapeError("view_direction must be a 3-vector")
            if abs(np.linalg.norm(view_direction) - 1.0) > UNIT_TOLERANCE:
                raise PreconditionError("view_direction must be a unit vector")
        self.view_direction = view_direction
        net._check_mods(mods)

    @property
    def feature_dim(self):
        return self.net.architecture.feature_dim

    def sdf(self, points):
        points = np.asarray(points, dtype=np.float64)
        flat = points.reshape(-1, 3)
        return self.net.sdf(flat, self.mods).reshape(points.shape[:-1])

    def query(self, points, dirs):
        """Return ``(d, c, f)`` for ``(B, 3)`` points and directions."""
        if self.view_direction is not None:
            dirs = self.view_direction[None, :]
        sample = field_query(self.net, points, dirs, self.mods)
        return sample.d, sample.c, sample.f


class AnalyticScene:
    """An analytic SDF with a colour function of position; it has no features."""

    feature_dim = 0

    def __init__(self, shape, color_fn=None):
        self.shape = shape
        self.color_fn = color_fn or default_color

    def sdf(self, points):
        return self.shape.evaluate(points)

    def query(self, points, dirs):
        points = np.asarray(points, dtype=np.float64)
        d = self.shape.evaluate(points)
        c = np.asarray(self.color_fn(points), dtype=np.float64)
        return d, c, np.zeros(points.shape[:-1] + (0,))


class ConstantScene:
    """The same signed distance everywhere; a large value stands in for empty space."""

    feature_dim = 0

    def __init__(self, value=1e6, color=(0.0, 0.0, 0.0)):
        self.value = float(value)
        self.color = np.asarray(color, dtype=np.float64)

    def sdf(self, points):
        points = np.asarray(points, dtype=np.float64)
        return np.full(points.shape[:-1], self.value)

    def query(self, points, dirs):
        points = np.asarray(points, dtype=np.float64)
        lead = points.shape[:-1]
        return (
            np.full(lead, self.value),
            np.broadcast_to(self.color, lead + (3,)).copy(),
            np.zeros(lead + (0,)),
        )


def as_scene(field, mods=None, color_fn=None, view_direction=None):
    """Wrap a network, an analytic SDF or an existing scene as a scene."""
    if isinstance(field, FieldNetwork):
        if mods is None:
            raise PreconditionError("a network scene needs modulation signals")
        return NetworkScene(field, mods, view_direction)
    if isinstance(field, AnalyticSdf):
        return AnalyticScene(field, color_fn)
    if hasattr(field, "sdf") and hasattr(field, "query"):
        return field
    raise TypeError(f"cannot render a {type(field).__name__}")
