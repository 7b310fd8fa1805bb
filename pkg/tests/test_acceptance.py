"""Acceptance suite: one test per release criterion, one PASS/FAIL line each.

Run with `pytest -s tests/test_acceptance.py` to see the per-criterion lines.
"""

import time
from contextlib import contextmanager

import numpy as np
import pytest

from conftest import brute_knn, brute_radius, random_rotation_matrix
from lapscan.calibration import MotionPair, solve_hand_eye
from lapscan.config import PipelineConfig
from lapscan.errors import RankDeficiencyError
from lapscan.geometry import (Pose, Rotation, compose, invert, pose_difference,
                              random_pose, rotation_angle)
from lapscan.metrics import cloud_metrics, rpe
from lapscan.pipeline import run_pipeline
from lapscan.pointcloud import (KdTree, OutlierParams, PointCloud,
                                remove_statistical_outliers, voxel_downsample)
from lapscan.registration import IcpParams, icp_point_to_plane, umeyama
from lapscan.sampling import (SampleConfig, TrajectoryConfig,
                              equal_angle_directions, fibonacci_directions,
                              generate_trajectory, rcm_residual)
from lapscan.simulator import OrganShape, synth_organ


@contextmanager
def criterion(number: int, name: str):
    try:
        yield
    except Exception:
        print(f"\nACCEPTANCE {number} ({name}): FAIL")
        raise
    print(f"\nACCEPTANCE {number} ({name}): PASS")


def _nn_geodesic_cv(dirs: np.ndarray) -> float:
    dots = np.clip(dirs @ dirs.T, -1.0, 1.0)
    np.fill_diagonal(dots, -1.0)
    nearest = np.arccos(dots.max(axis=1))
    return float(nearest.std() / nearest.mean())


def test_criterion_1_fibonacci_sampler():
    with criterion(1, "fibonacci sampler uniformity"):
        t0 = time.perf_counter()
        dirs = fibonacci_directions(500, 90.0)
        elapsed = time.perf_counter() - t0
        assert elapsed < 0.1
        np.testing.assert_allclose(np.linalg.norm(dirs, axis=1), 1.0, atol=1e-12)
        cv = _nn_geodesic_cv(dirs)
        grid = equal_angle_directions(15.0, 6.0, 90.0)  # 241 points vs 250
        assert cv < 0.25
        assert cv < _nn_geodesic_cv(grid)


def test_criterion_2_trajectory_geometry():
    with criterion(2, "trajectory geometry and RCM"):
        kinds = [
            TrajectoryConfig(kind="trocar", rcm_height=120.0, insertion_depth=40.0,
                             sample=SampleConfig(n_points=400, theta_max=90.0)),
            TrajectoryConfig(kind="open_close", d_lap=80.0,
                             sample=SampleConfig(n_points=400, theta_max=90.0)),
            TrajectoryConfig(kind="open_far", d_lap=120.0,
                             sample=SampleConfig(n_points=400, theta_max=90.0)),
        ]
        for cfg in kinds:
            traj = generate_trajectory(cfg)
            assert len(traj) == 200  # upper half of the sphere survives the cap
            assert rcm_residual(traj) < 1e-6
        # Trocar with RCM 120 above the centre and 40 inserted: every tip is
        # exactly 40 from the RCM, and the zenith pose tip exactly 80 above.
        trocar = generate_trajectory(kinds[0])
        tips = np.array([p.translation for _, p in trocar.poses])
        np.testing.assert_allclose(np.linalg.norm(tips - trocar.rcm, axis=1), 40.0,
                                   atol=1e-9)
        zenith = generate_trajectory(TrajectoryConfig(
            kind="trocar", rcm_height=120.0, insertion_depth=40.0,
            sample=SampleConfig(scheme="equal_angle", d_azimuth=360.0,
                                d_altitude=45.0, theta_max=45.0)))
        np.testing.assert_allclose(zenith.poses[0][1].translation, [0.0, 80.0, 0.0],
                                   atol=1e-9)


def test_criterion_3_hand_eye():
    with criterion(3, "hand-eye synthetic recovery"):
        rng = np.random.default_rng(303)
        t0 = time.perf_counter()
        for _ in range(100):
            x_true = random_pose(rng, translation_scale=60.0)
            pairs = []
            for _ in range(20):
                axis = rng.normal(size=3)
                axis /= np.linalg.norm(axis)
                angle = rng.uniform(np.radians(10.0), np.radians(170.0))
                a = Pose(Rotation.from_axis_angle(axis, angle), rng.normal(size=3) * 40)
                b = compose(invert(x_true), compose(a, x_true))
                pairs.append(MotionPair(a, b))
            solved = solve_hand_eye(pairs)
            rot_err, trans_err = pose_difference(solved, x_true)
            assert rot_err < 1e-6
            assert trans_err < 1e-6
        assert time.perf_counter() - t0 < 1.0

        degenerate = []
        for _ in range(10):
            a = Pose(Rotation.from_axis_angle([0, 0, 1], rng.uniform(0.3, 2.0)),
                     rng.normal(size=3) * 30)
            degenerate.append(MotionPair(a, a))
        with pytest.raises(RankDeficiencyError):
            solve_hand_eye(degenerate)


def test_criterion_4_kdtree_and_outliers():
    with criterion(4, "KD-tree and outlier removal vs brute force"):
        rng = np.random.default_rng(404)
        for instance in range(100):
            n = int(np.exp(rng.uniform(np.log(30), np.log(10_000))))
            pts = rng.uniform(-20, 20, size=(n, 3))
            if instance % 3 == 0:
                pts = np.round(pts)  # force distance ties
            tree = KdTree(pts)
            for _ in range(3):
                q = rng.uniform(-22, 22, size=3)
                k = int(rng.integers(1, min(n, 25) + 1))
                d, idx = tree.knn(q, k)
                bd, bidx = brute_knn(pts, q, k)
                np.testing.assert_array_equal(idx, bidx)
                np.testing.assert_array_equal(d, bd)
                r = float(rng.uniform(0.0, 5.0))
                np.testing.assert_array_equal(tree.radius(q, r), brute_radius(pts, q, r))
            if n <= 1500:
                cloud = PointCloud(pts)
                _, mask = remove_statistical_outliers(cloud, OutlierParams(k=20))
                dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
                np.fill_diagonal(dist, np.inf)
                mean_d = np.sort(dist, axis=1)[:, :20].mean(axis=1)
                expected = mean_d <= mean_d.mean() + mean_d.std()
                np.testing.assert_array_equal(mask, expected)

        # Planted outlier: 21 unit-spaced points plus one 100 mm away.
        cluster = np.column_stack([np.arange(21.0), np.zeros(21), np.zeros(21)])
        planted = PointCloud(np.vstack([cluster, [100.0, 100.0, 100.0]]))
        _, mask = remove_statistical_outliers(planted, OutlierParams(k=20, std_ratio=1.0))
        assert mask[:21].all() and not mask[21]


def test_criterion_5_umeyama():
    with criterion(5, "similarity recovery"):
        rng = np.random.default_rng(505)
        for _ in range(100):
            src = rng.normal(size=(15, 3)) * 25
            r = random_rotation_matrix(rng)
            s = rng.uniform(0.2, 4.0)
            t = rng.normal(size=3) * 80
            st = umeyama(src, s * src @ r.T + t)
            assert abs(st.scale - s) / s < 1e-9
            assert rotation_angle(Rotation.from_matrix(st.rotation.as_matrix() @ r.T)) < 1e-9
            assert np.linalg.norm(st.translation - t) < 1e-6


def test_criterion_6_icp_convergence_basin():
    with criterion(6, "ICP convergence basin"):
        organ = voxel_downsample(synth_organ(OrganShape(seed=606), 60_000), 0.5)
        successes = 0
        for trial in range(50):
            rng = np.random.default_rng(10_000 + trial)
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            angle = np.radians(rng.uniform(0.0, 5.0))
            shift = rng.normal(size=3)
            shift *= rng.uniform(0.0, 2.0) / np.linalg.norm(shift)
            perturb = Pose(Rotation.from_axis_angle(axis, angle), shift)
            source = PointCloud(perturb.apply(organ.points)
                                + rng.normal(scale=0.1, size=organ.points.shape))
            t0 = time.perf_counter()
            result = icp_point_to_plane(source, organ, IcpParams())
            assert time.perf_counter() - t0 < 5.0
            history = np.array(result.rmse_history)
            assert np.all(np.diff(history) <= 1e-12)
            if result.inlier_rmse <= 0.2:
                successes += 1
        assert successes >= 48  # >= 95% of 50


def test_criterion_7_metric_fixtures():
    with criterion(7, "metric fixtures and invariances"):
        src = PointCloud(np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]))
        dst = PointCloud(np.array([[0.0, 0.0, 0.0]]))
        m = cloud_metrics(src, dst, 0.0)
        assert m.chamfer == pytest.approx(0.25, abs=1e-15)
        assert m.hausdorff == pytest.approx(1.0, abs=1e-15)
        assert m.rmse == pytest.approx(np.sqrt(1.0 / 3.0), abs=1e-15)

        rng = np.random.default_rng(707)
        a = rng.normal(size=(300, 3)) * 15
        b = rng.normal(size=(280, 3)) * 15
        base = cloud_metrics(PointCloud(a), PointCloud(b), 0.05)
        move = random_pose(rng)
        moved = cloud_metrics(PointCloud(move.apply(a)), PointCloud(move.apply(b)), 0.05)
        assert moved.chamfer == pytest.approx(base.chamfer, abs=1e-9)
        assert moved.hausdorff == pytest.approx(base.hausdorff, abs=1e-9)
        assert moved.rmse == pytest.approx(base.rmse, abs=1e-9)

        swapped = cloud_metrics(PointCloud(b), PointCloud(a), 0.05)
        assert swapped.chamfer == pytest.approx(base.chamfer, abs=1e-12)

        last = cloud_metrics(PointCloud(a), PointCloud(b), 0.0)
        for frac in (0.05, 0.1, 0.2):
            cur = cloud_metrics(PointCloud(a), PointCloud(b), frac)
            assert cur.chamfer <= last.chamfer + 1e-12
            assert cur.hausdorff <= last.hausdorff + 1e-12
            assert cur.rmse <= last.rmse + 1e-12
            last = cur


def test_criterion_8_end_to_end_pipeline(tmp_path):
    with criterion(8, "end-to-end synthetic pipeline"):
        t0 = time.perf_counter()
        for kind, theta in [("trocar", 50.0), ("open_close", 90.0), ("open_far", 90.0)]:
            cfg = PipelineConfig.model_validate({
                "sampling": {"n_points": 160, "theta_max": theta},
                "trajectory": {"kind": kind},
                "scan": {"noise_sigma": 0.3, "dropout_fraction": 0.05,
                         "frame_perturbation": "random"},
            })
            metrics, _ = run_pipeline(cfg, seed=808, output_dir=tmp_path / kind)
            assert metrics["chamfer_mm"] <= 0.6, kind
            assert metrics["rmse_mm"] <= 0.9, kind
            if kind == "open_far":
                run_pipeline(cfg, seed=808, output_dir=tmp_path / "rerun")
                first = (tmp_path / "open_far/metrics.json").read_bytes()
                second = (tmp_path / "rerun/metrics.json").read_bytes()
                assert first == second
        assert time.perf_counter() - t0 < 60.0


def test_criterion_9_pose_evaluation():
    with criterion(9, "pose evaluation"):
        from lapscan.metrics import evaluate_poses
        from lapscan.registration import SimilarityTransform

        rng = np.random.default_rng(909)
        gt = [(i, random_pose(rng, translation_scale=60.0)) for i in range(40)]
        sim = SimilarityTransform(rng.uniform(0.5, 2.0), Rotation.random(rng),
                                  rng.normal(size=3) * 25)
        pred = [(fid, sim.apply_to_pose(p)) for fid, p in gt]
        pm = evaluate_poses(pred, gt)
        assert pm.rpe_rotation < 1e-9
        assert pm.rpe_translation < 1e-9 * 1e3  # mm scale: 1e-6 mm

        # Per-step rotations of exactly 0.01 rad about random axes.
        steps = 600
        gt_long = [Pose.identity()]
        for _ in range(steps):
            gt_long.append(compose(gt_long[-1], random_pose(rng, translation_scale=5.0)))
        pred_long = [gt_long[0]]
        for i in range(steps):
            rel = compose(invert(gt_long[i]), gt_long[i + 1])
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            noise = Pose(Rotation.from_axis_angle(axis, 0.01), np.zeros(3))
            pred_long.append(compose(pred_long[-1], compose(rel, noise)))
        pm = rpe(list(enumerate(pred_long)), list(enumerate(gt_long)))
        assert abs(pm.rpe_rotation - 0.01) / 0.01 < 0.10
