"""Orchestration of the full synthetic acquisition/evaluation run.

This module is the single implementation behind both the CLI subcommands
and the HTTP service endpoints.  The end-to-end run mirrors the physical
protocol: command a trajectory, capture a reconstruction-like scan in an
arbitrary similarity frame, coarse-align it with known correspondences
(the batch substitute for interactive point picking), clean it, refine
with point-to-plane ICP against the reference capture, and report trimmed
cloud metrics plus pose errors.

The reference (ground-truth) cloud is a noise-free, dropout-free,
unperturbed capture along the same trajectory: the laser-scanner stand-in,
complete with surface normals.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import io
from .config import PipelineConfig
from .errors import InputError
from .geometry import Pose
from .metrics import CloudMetrics, PoseMetrics, cloud_metrics, evaluate_poses
from .pointcloud import (PointCloud, crop_by_centroid, estimate_normals,
                         remove_statistical_outliers, voxel_downsample)
from .registration import (IcpParams, RegistrationResult, SimilarityTransform,
                           icp_point_to_plane, umeyama)
from .calibration import motion_pairs, solve_hand_eye
from .sampling import Trajectory, generate_trajectory
from .simulator import ScanConfig, ScanResult, simulate_scan, synth_organ


def sample_trajectory(cfg: PipelineConfig) -> Trajectory:
    sample = cfg.sampling.to_sample_config()
    return generate_trajectory(cfg.trajectory.to_trajectory_config(sample))


def reference_scan(organ: PointCloud, traj: Trajectory) -> PointCloud:
    """Noise-free unperturbed capture: the ground-truth scan stand-in."""
    cfg = ScanConfig(noise_sigma=0.0, dropout_fraction=0.0,
                     frame_perturbation=SimilarityTransform.identity())
    gt = simulate_scan(organ, traj, cfg, seed=0).scan
    if len(gt) == 0:
        raise InputError("trajectory does not see any organ point")
    return gt


def postprocess_cloud(cloud: PointCloud, section, workers: int = 1) -> tuple[PointCloud, dict]:
    """Downsample, remove statistical outliers, crop; optional normals."""
    counts = {"input": len(cloud)}
    cloud = voxel_downsample(cloud, section.voxel)
    counts["after_downsample"] = len(cloud)
    cloud, _ = remove_statistical_outliers(cloud, section.to_outlier_params(), workers=workers)
    counts["after_outlier_removal"] = len(cloud)
    cloud = crop_by_centroid(cloud, section.crop_radius)
    counts["after_crop"] = len(cloud)
    if section.normals_k is not None:
        cloud = estimate_normals(cloud, section.normals_k, workers=workers)
    return cloud, counts


def register_clouds(source: PointCloud, target: PointCloud,
                    correspondences: tuple[np.ndarray, np.ndarray] | None,
                    params: IcpParams, with_scale: bool = True,
                    workers: int = 1) -> tuple[SimilarityTransform, RegistrationResult, PointCloud]:
    """Coarse similarity from correspondences (if any), then ICP refinement.

    Returns the total transform, the ICP result, and the aligned source.
    """
    if correspondences is not None:
        src_idx, dst_idx = correspondences
        if len(src_idx) != len(dst_idx):
            raise InputError("correspondence index lists differ in length")
        if len(src_idx) and (src_idx.max() >= len(source) or dst_idx.max() >= len(target)):
            raise InputError("correspondence index out of range")
        coarse = umeyama(source.points[src_idx], target.points[dst_idx],
                         with_scale=with_scale)
    else:
        coarse = SimilarityTransform.identity()
    moved = coarse.apply_to_cloud(source)
    result = icp_point_to_plane(moved, target, params, workers=workers)
    total = coarse.compose_with_pose(result.transform)
    return total, result, total.apply_to_cloud(source)


def hand_eye_from_sequences(robot, camera) -> tuple[Pose, int]:
    """Solve the flange-to-camera transform from two framed pose sequences."""
    robot_by_id = dict(robot)
    camera_by_id = dict(camera)
    common = sorted(set(robot_by_id) & set(camera_by_id))
    if len(common) < 3:
        raise InputError("hand-eye calibration needs at least 3 common frames")
    pairs = motion_pairs([robot_by_id[i] for i in common],
                         [camera_by_id[i] for i in common])
    return solve_hand_eye(pairs), len(pairs)


def cloud_metrics_dict(cm: CloudMetrics) -> dict:
    return {"chamfer_mm": cm.chamfer, "hausdorff_mm": cm.hausdorff,
            "rmse_mm": cm.rmse, "trim_fraction": cm.trim_fraction}


def pose_metrics_dict(pm: PoseMetrics) -> dict:
    out = {"rpe_rotation_rad": pm.rpe_rotation, "rpe_translation_mm": pm.rpe_translation}
    if pm.coverage is not None:
        out["coverage"] = pm.coverage
    return out


def run_pipeline(cfg: PipelineConfig, seed: int, output_dir,
                 workers: int = 1) -> tuple[dict, dict]:
    """Full synthetic run; returns (metrics dict, artifact path dict).

    All artifacts land in output_dir: the commanded trajectory, the organ
    and ground-truth clouds, the raw scan with its pose estimates and
    correspondences, the processed and aligned clouds, the registration
    transform, and metrics.json.
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)

    traj = sample_trajectory(cfg)
    organ = synth_organ(cfg.scan.organ.to_shape(seed), cfg.scan.organ.n_points)
    gt = reference_scan(organ, traj)
    scan_cfg = cfg.scan.to_scan_config()
    result: ScanResult = simulate_scan(organ, traj, scan_cfg, seed=seed)
    if len(result.scan) == 0:
        raise InputError("simulated scan is empty; trajectory does not see the organ")

    correspondences = (np.arange(len(result.scan)), result.source_indices)
    coarse = umeyama(result.scan.points, organ.points[result.source_indices],
                     with_scale=cfg.icp.umeyama_with_scale)
    coarse_cloud = coarse.apply_to_cloud(result.scan)
    processed, counts = postprocess_cloud(coarse_cloud, cfg.postprocess, workers=workers)
    icp_result = icp_point_to_plane(processed, gt, cfg.icp.to_icp_params(), workers=workers)
    aligned = SimilarityTransform.from_pose(icp_result.transform).apply_to_cloud(processed)
    total = coarse.compose_with_pose(icp_result.transform)

    cm = cloud_metrics(aligned, gt, cfg.metrics.trim_fraction, workers=workers)
    pm = evaluate_poses(list(result.estimated_poses.poses), list(result.true_poses.poses))
    metrics = {**cloud_metrics_dict(cm), **pose_metrics_dict(pm)}

    artifacts = {}

    def emit(name: str, writer) -> None:
        path = out / name
        writer(path)
        artifacts[name] = str(path)

    emit("trajectory.csv", lambda p: io.write_poses(traj, p))
    emit("organ.ply", lambda p: io.write_ply(organ, p, binary=True))
    emit("ground_truth.ply", lambda p: io.write_ply(gt, p, binary=True))
    emit("scan.ply", lambda p: io.write_ply(result.scan, p, binary=True))
    emit("true_poses.csv", lambda p: io.write_poses(result.true_poses, p))
    emit("estimated_poses.csv", lambda p: io.write_poses(result.estimated_poses, p))
    emit("correspondences.csv",
         lambda p: io.write_correspondences(*correspondences, p))
    emit("processed.ply", lambda p: io.write_ply(processed, p, binary=True))
    emit("aligned.ply", lambda p: io.write_ply(aligned, p, binary=True))
    emit("registration.csv",
         lambda p: io.write_poses([(0, Pose(total.rotation, total.translation))], p))
    emit("metrics.json", lambda p: io.write_metrics(metrics, p))

    summary = {
        "counts": counts,
        "registration": {
            "scale": total.scale,
            "inlier_rmse_mm": icp_result.inlier_rmse,
            "fitness": icp_result.fitness,
            "iterations": icp_result.iterations_run,
        },
    }
    emit("summary.json", lambda p: io.write_metrics(summary, p))
    return metrics, artifacts
