"""Reconstruction quality metrics: trimmed cloud distances and pose errors.

Cloud metrics are symmetric: nearest-neighbour distances are computed in
both directions, each direction is trimmed of its largest fraction of
distances (guarding against holes in either cloud), then pooled.  Chamfer
is the mean of the two directional means, Hausdorff the pooled maximum,
RMSE the pooled root mean square.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .geometry import Pose, compose, invert, rotation_angle
from .pointcloud import KdTree, PointCloud
from .registration import umeyama

FramedPoses = list[tuple[int, Pose]]


@dataclass(frozen=True)
class CloudMetrics:
    chamfer: float
    hausdorff: float
    rmse: float
    trim_fraction: float


@dataclass(frozen=True)
class PoseMetrics:
    rpe_rotation: float
    rpe_translation: float
    coverage: float | None = None


def nn_distances(src: PointCloud, dst: PointCloud, workers: int = 1) -> np.ndarray:
    """Distance from every src point to its nearest dst point."""
    if len(src) == 0 or len(dst) == 0:
        raise InputError("nearest-neighbour distances need non-empty clouds")
    d, _ = KdTree(dst.points).nearest_bulk(src.points, workers=workers)
    return d


def trim_top(distances, fraction: float) -> np.ndarray:
    """Drop the floor(fraction * n) largest values, keeping original order.

    Ties at the cut boundary keep the earlier-indexed values.
    """
    if not 0.0 <= fraction < 1.0:
        raise InputError("trim fraction must be in [0, 1)")
    d = np.asarray(distances, dtype=np.float64)
    n_drop = int(np.floor(fraction * len(d)))
    if n_drop == 0:
        return d.copy()
    order = np.lexsort((np.arange(len(d)), d))
    keep = np.sort(order[:len(d) - n_drop])
    return d[keep]


def cloud_metrics(src: PointCloud, dst: PointCloud, trim_fraction: float = 0.05,
                  workers: int = 1) -> CloudMetrics:
    """Symmetric Chamfer/Hausdorff/RMSE after per-direction trimming."""
    d_st = trim_top(nn_distances(src, dst, workers=workers), trim_fraction)
    d_ts = trim_top(nn_distances(dst, src, workers=workers), trim_fraction)
    pooled = np.concatenate([d_st, d_ts])
    return CloudMetrics(
        chamfer=float(0.5 * (d_st.mean() + d_ts.mean())),
        hausdorff=float(pooled.max()),
        rmse=float(np.sqrt(np.mean(pooled ** 2))),
        trim_fraction=trim_fraction,
    )


def _common_frames(pred: FramedPoses, gt: FramedPoses) -> list[int]:
    pred_ids = {fid for fid, _ in pred}
    gt_ids = {fid for fid, _ in gt}
    return sorted(pred_ids & gt_ids)


def align_trajectory(pred: FramedPoses, gt: FramedPoses,
                     with_scale: bool = True) -> FramedPoses:
    """Similarity-align predicted poses onto ground truth over common frames.

    The similarity is fitted on the position sequences; predicted positions
    are mapped through it and predicted rotations are left-composed with the
    recovered rotation.  Only common frames are returned.
    """
    common = _common_frames(pred, gt)
    if len(common) < 3:
        raise InputError("trajectory alignment needs at least 3 common frames")
    pred_by_id = dict(pred)
    gt_by_id = dict(gt)
    p = np.array([pred_by_id[i].translation for i in common])
    g = np.array([gt_by_id[i].translation for i in common])
    sim = umeyama(p, g, with_scale=with_scale)
    return [(i, sim.apply_to_pose(pred_by_id[i])) for i in common]


def rpe(pred: FramedPoses, gt: FramedPoses) -> PoseMetrics:
    """Mean relative pose error over consecutive common frames.

    For adjacent common frames (i, j) the error motion is
    (gt_i^-1 gt_j)^-1 (pred_i^-1 pred_j); rotation errors are averaged in
    radians, translation errors in mm.
    """
    common = _common_frames(pred, gt)
    if len(common) < 2:
        raise InputError("relative pose error needs at least 2 common frames")
    pred_by_id = dict(pred)
    gt_by_id = dict(gt)
    rot_sum = 0.0
    trans_sum = 0.0
    n = 0
    for i, j in zip(common[:-1], common[1:]):
        rel_gt = compose(invert(gt_by_id[i]), gt_by_id[j])
        rel_pred = compose(invert(pred_by_id[i]), pred_by_id[j])
        err = compose(invert(rel_gt), rel_pred)
        rot_sum += rotation_angle(err.rotation)
        trans_sum += float(np.linalg.norm(err.translation))
        n += 1
    return PoseMetrics(rpe_rotation=rot_sum / n, rpe_translation=trans_sum / n)


def pose_coverage(predicted_frame_ids, total_frames: int) -> float:
    """Fraction of frames that received a predicted pose."""
    if total_frames < 1:
        raise InputError("total_frames must be >= 1")
    return len(set(predicted_frame_ids)) / total_frames


def evaluate_poses(pred: FramedPoses, gt: FramedPoses,
                   with_scale: bool = True) -> PoseMetrics:
    """Align, compute RPE, and report coverage against the ground truth."""
    aligned = align_trajectory(pred, gt, with_scale=with_scale)
    base = rpe(aligned, gt)
    coverage = pose_coverage([fid for fid, _ in aligned], len(gt))
    return PoseMetrics(rpe_rotation=base.rpe_rotation,
                       rpe_translation=base.rpe_translation,
                       coverage=coverage)
