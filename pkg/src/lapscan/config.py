"""Pipeline configuration document (YAML or JSON).

Six sections mirror the parameter types of the processing stages:
sampling, trajectory, scan, postprocess, icp, metrics.  Unknown keys are
rejected, and every value is pushed through the corresponding module
constructor at load time so invariants fail fast with a clear message.
"""

from __future__ import annotations

from pathlib import Path
from typing import Literal, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import InputError
from .geometry import Rotation
from .pointcloud import OutlierParams
from .registration import IcpParams, SimilarityTransform
from .sampling import SampleConfig, TrajectoryConfig
from .simulator import OrganShape, ScanConfig

# Trajectory geometry defaults (mm): trocar pivots 120 above the sample with
# the tip inserted 40 past the RCM; open kinds stand off 80 (close) or 120 (far).
TROCAR_RCM_HEIGHT = 120.0
TROCAR_INSERTION_DEPTH = 40.0
D_LAP_CLOSE = 80.0
D_LAP_FAR = 120.0


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SamplingSection(StrictModel):
    scheme: Literal["fibonacci", "equal_angle"] = "fibonacci"
    n_points: int = 100
    theta_max: float = 90.0
    d_azimuth: float | None = None
    d_altitude: float | None = None

    def to_sample_config(self) -> SampleConfig:
        return SampleConfig(scheme=self.scheme, n_points=self.n_points,
                            theta_max=self.theta_max,
                            d_azimuth=self.d_azimuth, d_altitude=self.d_altitude)


class TrajectorySection(StrictModel):
    kind: Literal["trocar", "open_close", "open_far"] = "open_far"
    sample_center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    rcm_height: float | None = None
    insertion_depth: float | None = None
    d_lap: float | None = None
    up: tuple[float, float, float] = (0.0, 1.0, 0.0)

    def to_trajectory_config(self, sample: SampleConfig) -> TrajectoryConfig:
        rcm_height = self.rcm_height
        insertion = self.insertion_depth
        d_lap = self.d_lap
        if self.kind == "trocar":
            rcm_height = TROCAR_RCM_HEIGHT if rcm_height is None else rcm_height
            insertion = TROCAR_INSERTION_DEPTH if insertion is None else insertion
        elif d_lap is None:
            d_lap = D_LAP_CLOSE if self.kind == "open_close" else D_LAP_FAR
        return TrajectoryConfig(kind=self.kind, sample_center=self.sample_center,
                                rcm_height=rcm_height, insertion_depth=insertion,
                                d_lap=d_lap, sample=sample, up=self.up)


class PerturbationSpec(StrictModel):
    scale: float = 1.0
    quaternion_xyzw: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 1.0)
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def to_similarity(self) -> SimilarityTransform:
        x, y, z, w = self.quaternion_xyzw
        return SimilarityTransform(self.scale, Rotation(np.array([w, x, y, z])),
                                   np.array(self.translation))


class OrganSection(StrictModel):
    semi_axes: tuple[float, float, float] = (50.0, 30.0, 25.0)
    bump_amplitude: float = 2.0
    bump_frequency: int = 4
    seed: int | None = None        # None: follow the run seed
    n_points: int = 30000

    def to_shape(self, run_seed: int) -> OrganShape:
        return OrganShape(semi_axes=self.semi_axes, bump_amplitude=self.bump_amplitude,
                          bump_frequency=self.bump_frequency,
                          seed=self.seed if self.seed is not None else run_seed)


class ScanSection(StrictModel):
    fov_half_angle: float = 35.0
    max_range: float = 300.0
    noise_sigma: float = 0.1
    dropout_fraction: float = 0.05
    frame_perturbation: Union[Literal["random", "identity"], PerturbationSpec] = "random"
    organ: OrganSection = Field(default_factory=OrganSection)

    def to_scan_config(self) -> ScanConfig:
        if self.frame_perturbation == "random":
            perturb = None
        elif self.frame_perturbation == "identity":
            perturb = SimilarityTransform.identity()
        else:
            perturb = self.frame_perturbation.to_similarity()
        return ScanConfig(fov_half_angle=self.fov_half_angle, max_range=self.max_range,
                          noise_sigma=self.noise_sigma,
                          dropout_fraction=self.dropout_fraction,
                          frame_perturbation=perturb)


class PostprocessSection(StrictModel):
    voxel: float = 0.5
    outlier_k: int = 20
    outlier_std_ratio: float = 1.0
    crop_radius: float = 60.0
    normals_k: int | None = None   # estimate normals on the result when set

    def to_outlier_params(self) -> OutlierParams:
        return OutlierParams(k=self.outlier_k, std_ratio=self.outlier_std_ratio)


class IcpSection(StrictModel):
    max_correspondence_distance: float = 5.0
    max_iterations: int = 50
    relative_rmse_tolerance: float = 1e-6
    tukey_k: float = 1.0
    umeyama_with_scale: bool = True

    def to_icp_params(self) -> IcpParams:
        return IcpParams(max_correspondence_distance=self.max_correspondence_distance,
                         max_iterations=self.max_iterations,
                         relative_rmse_tolerance=self.relative_rmse_tolerance,
                         tukey_k=self.tukey_k)


class MetricsSection(StrictModel):
    trim_fraction: float = 0.05


class PipelineConfig(StrictModel):
    sampling: SamplingSection = Field(default_factory=SamplingSection)
    trajectory: TrajectorySection = Field(default_factory=TrajectorySection)
    scan: ScanSection = Field(default_factory=ScanSection)
    postprocess: PostprocessSection = Field(default_factory=PostprocessSection)
    icp: IcpSection = Field(default_factory=IcpSection)
    metrics: MetricsSection = Field(default_factory=MetricsSection)


def validate_config(cfg: PipelineConfig) -> None:
    """Run every section through its module constructor."""
    sample = cfg.sampling.to_sample_config()
    cfg.trajectory.to_trajectory_config(sample)
    cfg.scan.to_scan_config()
    cfg.scan.organ.to_shape(0)
    cfg.postprocess.to_outlier_params()
    if cfg.postprocess.voxel <= 0.0:
        raise InputError("postprocess.voxel must be > 0")
    if cfg.postprocess.crop_radius <= 0.0:
        raise InputError("postprocess.crop_radius must be > 0")
    cfg.icp.to_icp_params()
    if not 0.0 <= cfg.metrics.trim_fraction < 1.0:
        raise InputError("metrics.trim_fraction must be in [0, 1)")


def parse_config(data: dict | None) -> PipelineConfig:
    try:
        cfg = PipelineConfig.model_validate(data or {})
    except ValidationError as exc:
        raise InputError(f"invalid configuration: {exc}") from exc
    validate_config(cfg)
    return cfg


def load_config(path) -> PipelineConfig:
    """Parse and validate a YAML/JSON configuration file."""
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise InputError(f"cannot parse configuration file: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise InputError("configuration root must be a mapping")
    return parse_config(data)
