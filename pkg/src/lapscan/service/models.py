"""Request/response models for the HTTP service.

Pose payloads travel inline as rows matching the pose CSV layout
(quaternion scalar-last); point clouds are referenced by server-side file
paths since they are routinely hundreds of thousands of points.
"""

from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ..config import (IcpSection, PipelineConfig, PostprocessSection,
                      SamplingSection, ScanSection, TrajectorySection)
from ..geometry import Pose, Rotation


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PoseRow(StrictModel):
    frame_id: int = 0
    tx: float = 0.0
    ty: float = 0.0
    tz: float = 0.0
    qx: float = 0.0
    qy: float = 0.0
    qz: float = 0.0
    qw: float = 1.0

    @classmethod
    def from_pose(cls, frame_id: int, pose: Pose) -> "PoseRow":
        w, x, y, z = pose.rotation.wxyz
        tx, ty, tz = pose.translation
        return cls(frame_id=frame_id, tx=tx, ty=ty, tz=tz, qx=x, qy=y, qz=z, qw=w)

    def to_pose(self) -> Pose:
        return Pose(Rotation(np.array([self.qw, self.qx, self.qy, self.qz])),
                    np.array([self.tx, self.ty, self.tz]))


class SamplePosesRequest(StrictModel):
    sampling: SamplingSection = Field(default_factory=SamplingSection)
    trajectory: TrajectorySection = Field(default_factory=TrajectorySection)
    output_csv: str | None = None


class SamplePosesResponse(StrictModel):
    kind: str
    rcm: tuple[float, float, float]
    poses: list[PoseRow]
    output_csv: str | None = None


class SimulateScanRequest(StrictModel):
    scan: ScanSection = Field(default_factory=ScanSection)
    sampling: SamplingSection = Field(default_factory=SamplingSection)
    trajectory: TrajectorySection = Field(default_factory=TrajectorySection)
    poses: list[PoseRow] | None = None   # overrides sampling/trajectory when given
    organ_ply: str | None = None         # synthesized when omitted
    seed: int = 0
    output_dir: str


class SimulateScanResponse(StrictModel):
    n_points: int
    n_poses: int
    artifacts: dict[str, str]


class HandEyeRequest(StrictModel):
    robot_poses: list[PoseRow]
    camera_poses: list[PoseRow]
    output_csv: str | None = None


class HandEyeResponse(StrictModel):
    pose: PoseRow
    pairs_used: int


class ProcessRequest(StrictModel):
    input_ply: str
    output_ply: str
    postprocess: PostprocessSection = Field(default_factory=PostprocessSection)
    threads: int = 1


class ProcessResponse(StrictModel):
    counts: dict[str, int]
    output_ply: str


class RegisterRequest(StrictModel):
    source_ply: str
    target_ply: str
    correspondences_csv: str | None = None
    icp: IcpSection = Field(default_factory=IcpSection)
    output_dir: str | None = None
    threads: int = 1


class RegisterResponse(StrictModel):
    scale: float
    pose: PoseRow
    inlier_rmse_mm: float
    fitness: float
    iterations: int
    artifacts: dict[str, str] = Field(default_factory=dict)


class EvaluateRequest(StrictModel):
    source_ply: str
    target_ply: str
    trim_fraction: float = 0.05
    output_json: str | None = None
    threads: int = 1


class CloudMetricsResponse(StrictModel):
    chamfer_mm: float
    hausdorff_mm: float
    rmse_mm: float
    trim_fraction: float


class EvaluatePosesRequest(StrictModel):
    pred: list[PoseRow] | None = None
    pred_csv: str | None = None
    gt: list[PoseRow] | None = None
    gt_csv: str | None = None
    with_scale: bool = True
    output_json: str | None = None


class PoseMetricsResponse(StrictModel):
    rpe_rotation_rad: float
    rpe_translation_mm: float
    coverage: float


class PipelineRequest(StrictModel):
    config: PipelineConfig = Field(default_factory=PipelineConfig)
    seed: int = 0
    output_dir: str
    threads: int = 1


class PipelineResponse(StrictModel):
    metrics: dict[str, float]
    artifacts: dict[str, str]


class HealthResponse(StrictModel):
    status: str
    version: str
