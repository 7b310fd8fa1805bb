"""HTTP service exposing the pipeline over JSON.

Validation problems map to 400, numerical failures (degenerate geometry,
no overlap) to 422; both carry the offending message in `detail`.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, io, pipeline
from ..config import validate_config
from ..errors import ComputeError, InputError
from ..geometry import Pose
from ..metrics import cloud_metrics, evaluate_poses
from ..sampling import Trajectory, generate_trajectory
from ..simulator import simulate_scan, synth_organ
from . import models

app = FastAPI(title="lapscan", version=__version__)


@app.exception_handler(InputError)
async def _input_error(request: Request, exc: InputError):
    return JSONResponse(status_code=400, content={"detail": str(exc), "kind": "validation"})


@app.exception_handler(ComputeError)
async def _compute_error(request: Request, exc: ComputeError):
    return JSONResponse(status_code=422, content={"detail": str(exc), "kind": "numerical"})


def _rows(poses) -> list[models.PoseRow]:
    return [models.PoseRow.from_pose(fid, p) for fid, p in poses]


@app.get("/health", response_model=models.HealthResponse)
def health():
    return models.HealthResponse(status="ok", version=__version__)


@app.post("/sample-poses", response_model=models.SamplePosesResponse)
def sample_poses(req: models.SamplePosesRequest):
    traj = generate_trajectory(req.trajectory.to_trajectory_config(
        req.sampling.to_sample_config()))
    if req.output_csv:
        io.write_poses(traj, req.output_csv)
    return models.SamplePosesResponse(kind=traj.kind, rcm=tuple(traj.rcm),
                                      poses=_rows(traj.poses), output_csv=req.output_csv)


@app.post("/simulate-scan", response_model=models.SimulateScanResponse)
def simulate_scan_endpoint(req: models.SimulateScanRequest):
    if req.poses is not None:
        traj = Trajectory(poses=tuple((r.frame_id, r.to_pose()) for r in req.poses))
    else:
        traj = generate_trajectory(req.trajectory.to_trajectory_config(
            req.sampling.to_sample_config()))
    if req.organ_ply:
        organ = io.read_ply(req.organ_ply)
        if organ.normals is None:
            raise InputError("organ cloud needs normals (nx, ny, nz)")
    else:
        organ = synth_organ(req.scan.organ.to_shape(req.seed), req.scan.organ.n_points)

    result = simulate_scan(organ, traj, req.scan.to_scan_config(), seed=req.seed)
    out = Path(req.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    artifacts = {}
    if not req.organ_ply:
        io.write_ply(organ, out / "organ.ply", binary=True)
        artifacts["organ.ply"] = str(out / "organ.ply")
    io.write_ply(result.scan, out / "scan.ply", binary=True)
    io.write_poses(result.true_poses, out / "true_poses.csv")
    io.write_poses(result.estimated_poses, out / "estimated_poses.csv")
    io.write_correspondences(np.arange(len(result.scan)), result.source_indices,
                             out / "correspondences.csv")
    artifacts.update({name: str(out / name) for name in
                      ("scan.ply", "true_poses.csv", "estimated_poses.csv",
                       "correspondences.csv")})
    return models.SimulateScanResponse(n_points=len(result.scan), n_poses=len(traj),
                                       artifacts=artifacts)


@app.post("/handeye", response_model=models.HandEyeResponse)
def handeye(req: models.HandEyeRequest):
    robot = [(r.frame_id, r.to_pose()) for r in req.robot_poses]
    camera = [(r.frame_id, r.to_pose()) for r in req.camera_poses]
    pose, pairs_used = pipeline.hand_eye_from_sequences(robot, camera)
    if req.output_csv:
        io.write_poses([(0, pose)], req.output_csv)
    return models.HandEyeResponse(pose=models.PoseRow.from_pose(0, pose),
                                  pairs_used=pairs_used)


@app.post("/process", response_model=models.ProcessResponse)
def process(req: models.ProcessRequest):
    cloud = io.read_ply(req.input_ply)
    processed, counts = pipeline.postprocess_cloud(cloud, req.postprocess,
                                                   workers=req.threads)
    io.write_ply(processed, req.output_ply)
    return models.ProcessResponse(counts=counts, output_ply=req.output_ply)


@app.post("/register", response_model=models.RegisterResponse)
def register(req: models.RegisterRequest):
    source = io.read_ply(req.source_ply)
    target = io.read_ply(req.target_ply)
    corr = io.read_correspondences(req.correspondences_csv) if req.correspondences_csv else None
    total, result, aligned = pipeline.register_clouds(
        source, target, corr, req.icp.to_icp_params(),
        with_scale=req.icp.umeyama_with_scale, workers=req.threads)
    artifacts = {}
    if req.output_dir:
        out = Path(req.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        io.write_poses([(0, Pose(total.rotation, total.translation))], out / "transform.csv")
        io.write_ply(aligned, out / "aligned.ply", binary=True)
        artifacts = {"transform.csv": str(out / "transform.csv"),
                     "aligned.ply": str(out / "aligned.ply")}
    rigid = Pose(total.rotation, total.translation)
    return models.RegisterResponse(scale=total.scale,
                                   pose=models.PoseRow.from_pose(0, rigid),
                                   inlier_rmse_mm=result.inlier_rmse,
                                   fitness=result.fitness,
                                   iterations=result.iterations_run,
                                   artifacts=artifacts)


@app.post("/evaluate", response_model=models.CloudMetricsResponse)
def evaluate(req: models.EvaluateRequest):
    src = io.read_ply(req.source_ply)
    dst = io.read_ply(req.target_ply)
    cm = cloud_metrics(src, dst, req.trim_fraction, workers=req.threads)
    payload = pipeline.cloud_metrics_dict(cm)
    if req.output_json:
        io.write_metrics(payload, req.output_json)
    return models.CloudMetricsResponse(**payload)


@app.post("/evaluate-poses", response_model=models.PoseMetricsResponse)
def evaluate_poses_endpoint(req: models.EvaluatePosesRequest):
    pred = _poses_from(req.pred, req.pred_csv, "pred")
    gt = _poses_from(req.gt, req.gt_csv, "gt")
    pm = evaluate_poses(pred, gt, with_scale=req.with_scale)
    payload = pipeline.pose_metrics_dict(pm)
    if req.output_json:
        io.write_metrics(payload, req.output_json)
    return models.PoseMetricsResponse(**payload)


def _poses_from(rows, csv_path, name):
    if (rows is None) == (csv_path is None):
        raise InputError(f"provide exactly one of {name} or {name}_csv")
    if rows is not None:
        return [(r.frame_id, r.to_pose()) for r in rows]
    return io.read_poses(csv_path)


@app.post("/pipeline", response_model=models.PipelineResponse)
def pipeline_endpoint(req: models.PipelineRequest):
    validate_config(req.config)
    metrics, artifacts = pipeline.run_pipeline(req.config, req.seed, req.output_dir,
                                               workers=req.threads)
    return models.PipelineResponse(metrics=metrics, artifacts=artifacts)
