"""Command-line interface.

Every subcommand is a thin wrapper over the pipeline layer also used by the
HTTP service.  Exit codes: 0 success, 1 validation error (arguments, files,
configuration), 2 numerical failure (degenerate geometry, no overlap).
"""

from __future__ import annotations

import sys
from pathlib import Path

import click
import numpy as np

from . import io, pipeline
from .config import PipelineConfig, load_config
from .errors import ComputeError, InputError
from .geometry import Pose
from .metrics import cloud_metrics, evaluate_poses
from .sampling import Trajectory
from .simulator import simulate_scan, synth_organ


def _load_config_opt(path: str | None) -> PipelineConfig:
    return load_config(path) if path else PipelineConfig()


@click.group()
def cli():
    """Multi-view scan planning, simulation, registration and evaluation."""


@cli.command("sample-poses")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="Pipeline configuration (sampling/trajectory sections used).")
@click.option("--output", required=True, type=click.Path(dir_okay=False),
              help="Pose CSV destination.")
def sample_poses_cmd(config_path, output):
    """Generate an acquisition trajectory and write it as pose CSV."""
    cfg = _load_config_opt(config_path)
    traj = pipeline.sample_trajectory(cfg)
    io.write_poses(traj, output)
    click.echo(f"wrote {len(traj)} poses to {output}")


@cli.command("simulate-scan")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--trajectory", "trajectory_csv", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--organ", "organ_ply", type=click.Path(exists=True, dir_okay=False),
              help="Organ PLY with normals; synthesized from config when omitted.")
@click.option("--output-dir", required=True, type=click.Path(file_okay=False))
@click.option("--seed", default=0, show_default=True, type=int)
def simulate_scan_cmd(config_path, trajectory_csv, organ_ply, output_dir, seed):
    """Simulate a scan along a trajectory; write scan PLY and pose CSVs."""
    cfg = _load_config_opt(config_path)
    poses = io.read_poses(trajectory_csv)
    traj = Trajectory(poses=tuple(poses))
    if organ_ply:
        organ = io.read_ply(organ_ply)
        if organ.normals is None:
            raise InputError("organ cloud needs normals (nx, ny, nz)")
    else:
        organ = synth_organ(cfg.scan.organ.to_shape(seed), cfg.scan.organ.n_points)
    result = simulate_scan(organ, traj, cfg.scan.to_scan_config(), seed=seed)

    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not organ_ply:
        io.write_ply(organ, out / "organ.ply", binary=True)
    io.write_ply(result.scan, out / "scan.ply", binary=True)
    io.write_poses(result.true_poses, out / "true_poses.csv")
    io.write_poses(result.estimated_poses, out / "estimated_poses.csv")
    io.write_correspondences(np.arange(len(result.scan)), result.source_indices,
                             out / "correspondences.csv")
    click.echo(f"captured {len(result.scan)} points over {len(traj)} poses -> {out}")


@cli.command("handeye")
@click.option("--robot", "robot_csv", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--camera", "camera_csv", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", required=True, type=click.Path(dir_okay=False))
def handeye_cmd(robot_csv, camera_csv, output):
    """Solve the flange-to-camera transform from two pose CSVs."""
    robot = io.read_poses(robot_csv)
    camera = io.read_poses(camera_csv)
    pose, pairs_used = pipeline.hand_eye_from_sequences(robot, camera)
    io.write_poses([(0, pose)], output)
    click.echo(f"solved hand-eye from {pairs_used} motion pairs -> {output}")


@cli.command("process")
@click.option("--input", "input_ply", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--output", required=True, type=click.Path(dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--threads", default=1, show_default=True, type=int)
def process_cmd(input_ply, output, config_path, threads):
    """Post-process a cloud: voxel downsample, outlier removal, centroid crop."""
    cfg = _load_config_opt(config_path)
    cloud = io.read_ply(input_ply)
    processed, counts = pipeline.postprocess_cloud(cloud, cfg.postprocess, workers=threads)
    io.write_ply(processed, output, binary=_is_binary(input_ply))
    stages = " -> ".join(f"{k}={v}" for k, v in counts.items())
    click.echo(f"{stages}; wrote {output}")


def _is_binary(path: str) -> bool:
    with open(path, "rb") as f:
        head = f.read(256)
    return b"binary_little_endian" in head


@cli.command("register")
@click.option("--source", "source_ply", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--target", "target_ply", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--correspondences", "correspondences_csv",
              type=click.Path(exists=True, dir_okay=False),
              help="CSV src_index,dst_index for the coarse similarity stage.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--output-dir", required=True, type=click.Path(file_okay=False))
@click.option("--threads", default=1, show_default=True, type=int)
def register_cmd(source_ply, target_ply, correspondences_csv, config_path, output_dir, threads):
    """Align source onto target; write transform CSV and aligned PLY."""
    cfg = _load_config_opt(config_path)
    source = io.read_ply(source_ply)
    target = io.read_ply(target_ply)
    corr = io.read_correspondences(correspondences_csv) if correspondences_csv else None
    total, result, aligned = pipeline.register_clouds(
        source, target, corr, cfg.icp.to_icp_params(),
        with_scale=cfg.icp.umeyama_with_scale, workers=threads)

    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_poses([(0, Pose(total.rotation, total.translation))], out / "transform.csv")
    io.write_ply(aligned, out / "aligned.ply", binary=_is_binary(source_ply))
    click.echo(f"scale={total.scale:.6f} inlier_rmse={result.inlier_rmse:.6f} mm "
               f"fitness={result.fitness:.4f} iterations={result.iterations_run}")


@cli.command("evaluate")
@click.option("--source", "source_ply", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--target", "target_ply", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--trim", default=0.05, show_default=True, type=float)
@click.option("--output", required=True, type=click.Path(dir_okay=False))
@click.option("--threads", default=1, show_default=True, type=int)
def evaluate_cmd(source_ply, target_ply, trim, output, threads):
    """Trimmed Chamfer/Hausdorff/RMSE between two clouds -> metrics JSON."""
    src = io.read_ply(source_ply)
    dst = io.read_ply(target_ply)
    cm = cloud_metrics(src, dst, trim, workers=threads)
    io.write_metrics(pipeline.cloud_metrics_dict(cm), output)
    click.echo(f"chamfer={cm.chamfer:.6f} hausdorff={cm.hausdorff:.6f} "
               f"rmse={cm.rmse:.6f} (mm) -> {output}")


@cli.command("evaluate-poses")
@click.option("--pred", "pred_csv", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--gt", "gt_csv", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--with-scale/--no-scale", default=True, show_default=True)
@click.option("--output", required=True, type=click.Path(dir_okay=False))
def evaluate_poses_cmd(pred_csv, gt_csv, with_scale, output):
    """Align predicted poses to ground truth; report RPE and coverage."""
    pred = io.read_poses(pred_csv)
    gt = io.read_poses(gt_csv)
    pm = evaluate_poses(pred, gt, with_scale=with_scale)
    io.write_metrics(pipeline.pose_metrics_dict(pm), output)
    click.echo(f"rpe_rotation={pm.rpe_rotation:.6e} rad "
               f"rpe_translation={pm.rpe_translation:.6e} mm "
               f"coverage={pm.coverage:.4f} -> {output}")


@cli.command("pipeline")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--output-dir", required=True, type=click.Path(file_okay=False))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--threads", default=1, show_default=True, type=int)
def pipeline_cmd(config_path, output_dir, seed, threads):
    """Full synthetic run: sample, simulate, process, register, evaluate."""
    cfg = _load_config_opt(config_path)
    metrics, artifacts = pipeline.run_pipeline(cfg, seed, output_dir, workers=threads)
    click.echo(f"wrote {len(artifacts)} artifacts to {output_dir}")
    for key in sorted(metrics):
        click.echo(f"{key}={metrics[key]}")


@cli.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve_cmd(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service.app import app
    uvicorn.run(app, host=host, port=port)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except InputError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except ComputeError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
