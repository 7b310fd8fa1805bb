import json

import numpy as np
import pytest

from lapscan.cli import main
from lapscan.geometry import Pose, compose, random_pose
from lapscan.io import read_metrics, read_ply, read_poses, write_ply, write_poses
from lapscan.pointcloud import PointCloud
from lapscan.simulator import OrganShape, synth_organ


def run(*args):
    return main([str(a) for a in args])


def test_sample_poses_writes_csv(tmp_path, capsys):
    out = tmp_path / "poses.csv"
    assert run("sample-poses", "--output", out) == 0
    poses = read_poses(out)
    assert len(poses) == 50  # default: 100 spiral points, upper half kept


def test_sample_poses_with_config(tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("sampling:\n  n_points: 16\ntrajectory:\n  kind: trocar\n")
    out = tmp_path / "poses.csv"
    assert run("sample-poses", "--config", cfg, "--output", out) == 0
    assert len(read_poses(out)) == 8


def test_invalid_config_exits_1_without_outputs(tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("sampling:\n  n_points: 0\n")
    out = tmp_path / "poses.csv"
    assert run("sample-poses", "--config", cfg, "--output", out) == 1
    assert not out.exists()


def test_unknown_config_key_exits_1(tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("sampling:\n  n_pointz: 5\n")
    assert run("sample-poses", "--config", cfg, "--output", tmp_path / "p.csv") == 1


def test_missing_file_exits_1(tmp_path):
    assert run("evaluate", "--source", tmp_path / "a.ply",
               "--target", tmp_path / "b.ply", "--output", tmp_path / "m.json") == 1


def test_simulate_and_evaluate_round_trip(tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(
        "sampling:\n  n_points: 32\n"
        "scan:\n  noise_sigma: 0.0\n  dropout_fraction: 0.0\n"
        "  frame_perturbation: identity\n  organ:\n    n_points: 3000\n")
    poses = tmp_path / "poses.csv"
    assert run("sample-poses", "--config", cfg, "--output", poses) == 0
    sim = tmp_path / "sim"
    assert run("simulate-scan", "--config", cfg, "--trajectory", poses,
               "--output-dir", sim, "--seed", 1) == 0
    for name in ("organ.ply", "scan.ply", "true_poses.csv",
                 "estimated_poses.csv", "correspondences.csv"):
        assert (sim / name).exists()

    out = tmp_path / "metrics.json"
    assert run("evaluate", "--source", sim / "organ.ply",
               "--target", sim / "organ.ply", "--output", out) == 0
    metrics = read_metrics(out)
    assert metrics["chamfer_mm"] == 0.0
    assert set(metrics) == {"chamfer_mm", "hausdorff_mm", "rmse_mm", "trim_fraction"}
    # The noise-free identity-frame scan lies exactly on the organ surface.
    scan_on_organ = tmp_path / "scan_metrics.json"
    assert run("evaluate", "--source", sim / "scan.ply",
               "--target", sim / "organ.ply", "--output", scan_on_organ) == 0
    directed = read_metrics(scan_on_organ)
    assert directed["chamfer_mm"] < 0.5  # organ->scan direction sees unscanned underside


def test_process_command(tmp_path, rng):
    cloud = synth_organ(OrganShape(seed=2), 3000)
    noisy = PointCloud(np.vstack([cloud.points, [[500.0, 500.0, 500.0]]]))
    src = tmp_path / "in.ply"
    write_ply(noisy, src)
    out = tmp_path / "out.ply"
    assert run("process", "--input", src, "--output", out) == 0
    processed = read_ply(out)
    assert len(processed) <= len(noisy)
    assert np.abs(processed.points).max() < 100.0


def test_handeye_command(tmp_path, rng):
    x_true = random_pose(rng, translation_scale=50.0)
    flange = [(i, random_pose(rng)) for i in range(12)]
    camera = [(i, compose(p, x_true)) for i, p in flange]
    write_poses(flange, tmp_path / "robot.csv")
    write_poses(camera, tmp_path / "camera.csv")
    out = tmp_path / "handeye.csv"
    assert run("handeye", "--robot", tmp_path / "robot.csv",
               "--camera", tmp_path / "camera.csv", "--output", out) == 0
    solved = read_poses(out)
    assert len(solved) == 1
    np.testing.assert_allclose(solved[0][1].translation, x_true.translation, atol=1e-6)


def test_register_command_and_no_overlap_exit_2(tmp_path, rng):
    organ = synth_organ(OrganShape(seed=3), 4000)
    write_ply(organ, tmp_path / "target.ply")
    moved = PointCloud(organ.points + np.array([0.8, 0.0, 0.0]))
    write_ply(moved, tmp_path / "source.ply")
    outdir = tmp_path / "reg"
    assert run("register", "--source", tmp_path / "source.ply",
               "--target", tmp_path / "target.ply", "--output-dir", outdir) == 0
    transform = read_poses(outdir / "transform.csv")[0][1]
    np.testing.assert_allclose(transform.translation, [-0.8, 0.0, 0.0], atol=1e-2)
    assert (outdir / "aligned.ply").exists()

    far = PointCloud(organ.points + np.array([500.0, 0.0, 0.0]))
    write_ply(far, tmp_path / "far.ply")
    assert run("register", "--source", tmp_path / "far.ply",
               "--target", tmp_path / "target.ply",
               "--output-dir", tmp_path / "reg2") == 2


def test_evaluate_poses_command(tmp_path, rng):
    gt = [(i, random_pose(rng)) for i in range(10)]
    write_poses(gt, tmp_path / "gt.csv")
    write_poses(gt, tmp_path / "pred.csv")
    out = tmp_path / "pm.json"
    assert run("evaluate-poses", "--pred", tmp_path / "pred.csv",
               "--gt", tmp_path / "gt.csv", "--output", out) == 0
    pm = read_metrics(out)
    assert pm["rpe_rotation_rad"] < 1e-9
    assert pm["coverage"] == 1.0
    assert set(pm) == {"rpe_rotation_rad", "rpe_translation_mm", "coverage"}


def test_pipeline_reproducible(tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(
        "sampling:\n  n_points: 48\n"
        "scan:\n  organ:\n    n_points: 4000\n")
    assert run("pipeline", "--config", cfg, "--output-dir", tmp_path / "a",
               "--seed", 9) == 0
    assert run("pipeline", "--config", cfg, "--output-dir", tmp_path / "b",
               "--seed", 9) == 0
    assert (tmp_path / "a/metrics.json").read_bytes() == (tmp_path / "b/metrics.json").read_bytes()
    payload = json.loads((tmp_path / "a/metrics.json").read_text())
    assert set(payload) == {"chamfer_mm", "hausdorff_mm", "rmse_mm", "trim_fraction",
                            "rpe_rotation_rad", "rpe_translation_mm", "coverage"}
    # Different seed changes the artifacts.
    assert run("pipeline", "--config", cfg, "--output-dir", tmp_path / "c",
               "--seed", 10) == 0
    assert (tmp_path / "a/metrics.json").read_bytes() != (tmp_path / "c/metrics.json").read_bytes()


def test_usage_error_exits_1():
    assert run("no-such-command") == 1
    assert run("evaluate") == 1  # missing required options
