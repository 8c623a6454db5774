"""Run configuration: a strict pydantic schema loaded from JSON and overridden by flags."""

import json
import logging
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from camera.distribution import PRESETS, side_view_angle
from camera.pose import DEFAULT_FAR, DEFAULT_FOV_DEG, DEFAULT_NEAR, CameraPose
from common.errors import ParameterError
from consistency.evaluate import EVAL_ALPHA, EVAL_RESOLUTION, EVAL_SAMPLES
from field.gradcheck import DEFAULT_TOLERANCE, GradcheckConfig
from field.network import DEFAULT_FEATURE_DIM, DEFAULT_MAPPING_WIDTH, DEFAULT_WIDTH, DEFAULT_Z_DIM, FieldArchitecture
from geometry.grid import DEFAULT_RESOLUTION
from losses.regularizers import LossWeights
from losses.sphere_init import SphereInitConfig
from rendering.density import RENDER_ALPHA

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES = 24


class Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SceneBlock(Block):
    """What to render: an analytic shape or a saved field network."""

    kind: Literal["sphere", "box", "torus", "network"] = "sphere"
    radius: float = Field(0.1, gt=0)
    half_extents: tuple[float, float, float] = (0.08, 0.08, 0.08)
    major: float = Field(0.08, gt=0)
    minor: float = Field(0.03, gt=0)
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    network: Optional[str] = None

    @model_validator(mode="after")
    def _network_needs_path(self):
        if self.kind == "network" and not self.network:
            raise ValueError("scene.network must name a network file when scene.kind is 'network'")
        return self


class NetworkBlock(Block):
    z_dim: int = Field(DEFAULT_Z_DIM, ge=1)
    mapping_width: int = Field(DEFAULT_MAPPING_WIDTH, ge=1)
    width: int = Field(DEFAULT_WIDTH, ge=1)
    feature_dim: int = Field(DEFAULT_FEATURE_DIM, ge=1)

    def architecture(self):
        return FieldArchitecture(
            z_dim=self.z_dim, mapping_width=self.mapping_width, width=self.width, feature_dim=self.feature_dim
        )


class CameraBlock(Block):
    azimuth: float = 0.0
    elevation: float = 0.0
    fov_deg: float = Field(DEFAULT_FOV_DEG, gt=0, lt=180)
    near: float = Field(DEFAULT_NEAR, gt=0)
    far: float = Field(DEFAULT_FAR, gt=0)
    dataset: Literal["ffhq", "afhq"] = "ffhq"
    side_azimuth: Optional[float] = None
    side_elevation: float = 0.0

    def pose(self, resolution):
        return CameraPose(self.azimuth, self.elevation, self.fov_deg, self.near, self.far, resolution, resolution)

    def side_pose(self, resolution):
        """Side view; its azimuth defaults to 1.5 standard deviations of the dataset's poses."""
        azimuth = self.side_azimuth if self.side_azimuth is not None else side_view_angle(PRESETS[self.dataset])
        return self.pose(resolution).with_angles(azimuth, self.side_elevation)


class RenderBlock(Block):
    n_samples: int = Field(DEFAULT_SAMPLES, ge=1)
    alpha: float = Field(RENDER_ALPHA, gt=0)
    resolution: int = Field(64, ge=1)
    frontal_view: bool = False


class LossBlock(Block):
    lambda_view: float = Field(15.0, ge=0)
    lambda_eik: float = Field(0.1, ge=0)
    lambda_surf: float = Field(0.05, ge=0)

    def weights(self):
        return LossWeights(self.lambda_view, self.lambda_eik, self.lambda_surf)


class SphereInitBlock(Block):
    radius: float = Field(0.1, gt=0)
    iterations: int = Field(10000, ge=1)
    learning_rate: float = Field(SphereInitConfig.learning_rate, gt=0)
    batch_size: int = Field(1024, ge=1)

    def settings(self):
        return SphereInitConfig(
            radius=self.radius, iterations=self.iterations, learning_rate=self.learning_rate, batch_size=self.batch_size
        )


class MeshBlock(Block):
    resolution: int = Field(DEFAULT_RESOLUTION, ge=2)
    bounds: Optional[float] = Field(None, gt=0)
    iso: float = 0.0
    subdivide: int = Field(0, ge=0)
    noise: bool = False
    format: Literal["ply", "obj"] = "ply"
    save_grid: bool = False


class ConsistencyBlock(Block):
    n_samples: int = Field(EVAL_SAMPLES, ge=1)
    resolution: int = Field(EVAL_RESOLUTION, ge=1)
    alpha: float = Field(EVAL_ALPHA, gt=0)
    identities: int = Field(1, ge=1)
    mask_occlusion: bool = True
    export_clouds: bool = False


class GradcheckBlock(Block):
    networks: int = Field(5, ge=1)
    points: int = Field(20, ge=1)
    tolerance: float = Field(DEFAULT_TOLERANCE, gt=0)

    def settings(self):
        return GradcheckConfig(networks=self.networks, points=self.points, tolerance=self.tolerance)


class RunConfig(Block):
    """Everything a command needs; unknown keys anywhere are rejected."""

    seed: int = Field(0, ge=0, lt=2**64)
    scene: SceneBlock = SceneBlock()
    network: NetworkBlock = NetworkBlock()
    camera: CameraBlock = CameraBlock()
    render: RenderBlock = RenderBlock()
    losses: LossBlock = LossBlock()
    sphere_init: SphereInitBlock = SphereInitBlock()
    mesh: MeshBlock = MeshBlock()
    consistency: ConsistencyBlock = ConsistencyBlock()
    gradcheck: GradcheckBlock = GradcheckBlock()


def load_config(path=None):
    """Read and validate a JSON config; ``None`` gives the defaults.

    Raises:
        ParameterError: If the file cannot be read.
        ValidationError: If its content is not a valid config.
    """
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParameterError(f"cannot read config file {path}: {exc}") from exc
    config = RunConfig.model_validate_json(text)
    logger.info("Loaded config from %s", path)
    return config


def apply_overrides(config, overrides):
    """Return a re-validated copy with dotted keys replaced, e.g. ``{"render.alpha": 0.001}``.

    ``None`` values are skipped so unset flags leave the config alone.
    """
    data = config.model_dump()
    for key, value in overrides.items():
        if value is None:
            continue
        node = data
        *parents, leaf = key.split(".")
        for part in parents:
            node = node[part]
        node[leaf] = value
    return RunConfig.model_validate(data)


def config_to_json(config):
    return json.loads(config.model_dump_json())
