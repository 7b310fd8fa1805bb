"""Cloud alignment: closed-form similarity fit and robust point-to-plane ICP.

The correspondence-based similarity fit (Umeyama) replaces interactive point
picking for the coarse stage and also resolves the scale ambiguity of
monocular reconstructions; ICP then refines a rigid transform against the
target's normals with a redescending Tukey loss (zero influence beyond the
cutoff k).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, NoOverlapError, RankDeficiencyError
from .geometry import Pose, Rotation, compose
from .pointcloud import KdTree, PointCloud


@dataclass(frozen=True, eq=False)
class SimilarityTransform:
    """x -> scale * R x + t."""

    scale: float
    rotation: Rotation
    translation: np.ndarray

    def __post_init__(self):
        if not self.scale > 0.0:
            raise InputError("scale must be > 0")
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        t.flags.writeable = False
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "SimilarityTransform":
        return cls(1.0, Rotation.identity(), np.zeros(3))

    @classmethod
    def from_pose(cls, pose: Pose) -> "SimilarityTransform":
        return cls(1.0, pose.rotation, pose.translation)

    def apply(self, points) -> np.ndarray:
        return self.scale * self.rotation.apply(points) + self.translation

    def apply_to_pose(self, pose: Pose) -> Pose:
        """Map a pose into the transformed frame (position scaled, rotation composed)."""
        return Pose(self.rotation * pose.rotation, self.apply(pose.translation))

    def apply_to_cloud(self, cloud: PointCloud) -> PointCloud:
        normals = self.rotation.apply(cloud.normals) if cloud.normals is not None else None
        return PointCloud(self.apply(cloud.points), normals)

    def inverse(self) -> "SimilarityTransform":
        rinv = self.rotation.inverse()
        return SimilarityTransform(1.0 / self.scale, rinv,
                                   -rinv.apply(self.translation) / self.scale)

    def compose_with_pose(self, pose: Pose) -> "SimilarityTransform":
        """Similarity applying self first, then the rigid pose."""
        return SimilarityTransform(self.scale, pose.rotation * self.rotation,
                                   pose.rotation.apply(self.translation) + pose.translation)


def umeyama(src, dst, with_scale: bool = True) -> SimilarityTransform:
    """Least-squares similarity (rigid if with_scale is off) mapping src onto dst.

    Minimizes sum ||dst_i - (s R src_i + t)||^2 with a reflection-corrected
    rotation.  Degenerate (collinear or coincident) source sets raise
    RankDeficiencyError.
    """
    src = np.asarray(src, dtype=np.float64).reshape(-1, 3)
    dst = np.asarray(dst, dtype=np.float64).reshape(-1, 3)
    if len(src) != len(dst):
        raise InputError("src and dst must have the same length")
    if len(src) < 3:
        raise InputError("need at least 3 correspondences")

    mu_src = src.mean(axis=0)
    mu_dst = dst.mean(axis=0)
    x = src - mu_src
    y = dst - mu_dst
    cov = y.T @ x / len(src)
    u, d, vt = np.linalg.svd(cov)
    if d[0] <= 0.0 or d[1] < 1e-9 * d[0]:
        raise RankDeficiencyError(
            "correspondences are collinear or coincident; rotation is not determined")
    s = np.ones(3)
    if np.linalg.det(u) * np.linalg.det(vt) < 0.0:
        s[2] = -1.0
    rot_m = u @ np.diag(s) @ vt

    if with_scale:
        var_src = (x ** 2).sum() / len(src)
        scale = float((d * s).sum() / var_src)
        if not scale > 0.0:
            raise RankDeficiencyError("recovered scale is non-positive")
    else:
        scale = 1.0
    rot = Rotation.from_matrix(rot_m)
    t = mu_dst - scale * rot.apply(mu_src)
    return SimilarityTransform(scale, rot, t)


def tukey_weight(residual, k: float):
    """Tukey biweight: (1 - (r/k)^2)^2 for |r| <= k, exactly 0 beyond."""
    if k <= 0.0:
        raise InputError("tukey cutoff k must be > 0")
    r = np.asarray(residual, dtype=np.float64)
    w = np.zeros_like(r)
    inside = np.abs(r) <= k
    u = r[inside] / k
    w[inside] = (1.0 - u * u) ** 2
    if np.isscalar(residual):
        return float(w)
    return w


@dataclass(frozen=True)
class IcpParams:
    max_correspondence_distance: float = 5.0
    max_iterations: int = 50
    relative_rmse_tolerance: float = 1e-6
    tukey_k: float = 1.0

    def __post_init__(self):
        if self.max_correspondence_distance <= 0.0:
            raise InputError("max_correspondence_distance must be > 0")
        if self.max_iterations < 1:
            raise InputError("max_iterations must be >= 1")
        if self.relative_rmse_tolerance <= 0.0:
            raise InputError("relative_rmse_tolerance must be > 0")
        if self.tukey_k <= 0.0:
            raise InputError("tukey_k must be > 0")


@dataclass(frozen=True)
class RegistrationResult:
    transform: Pose
    inlier_rmse: float
    fitness: float
    iterations_run: int
    rmse_history: tuple[float, ...] = ()  # accepted-iteration RMSE trace


def icp_point_to_plane(source: PointCloud, target: PointCloud,
                       params: IcpParams = IcpParams(),
                       init: Pose | None = None, workers: int = 1) -> RegistrationResult:
    """Iteratively align source onto target minimizing plane residuals.

    Each iteration matches every transformed source point to its nearest
    target point within max_correspondence_distance, then solves the
    Tukey-weighted, small-angle linearization of
    sum w(r_i) ((R p_i + t - q_i) . n_i)^2.  A step that would increase the
    correspondence RMSE is rejected and iteration stops; the best transform
    (composed with init) is returned.
    """
    if len(source) == 0:
        raise InputError("source cloud is empty")
    if target.normals is None:
        raise InputError("point-to-plane ICP needs target normals")

    tree = KdTree(target.points)
    current = init if init is not None else Pose.identity()
    best = current
    best_rmse = np.inf
    best_fitness = 0.0
    prev_rmse = None
    iterations = 0
    history: list[float] = []

    for _ in range(params.max_iterations):
        moved = current.apply(source.points)
        dist, idx = tree.nearest_bulk(moved, workers=workers)
        inlier = dist <= params.max_correspondence_distance
        if not inlier.any():
            if best_rmse == np.inf:
                raise NoOverlapError(
                    "no correspondences within "
                    f"{params.max_correspondence_distance} mm at the initial transform")
            break
        rmse = float(np.sqrt(np.mean(dist[inlier] ** 2)))
        if rmse > best_rmse + 1e-12:
            break  # reject the step, keep the best accepted transform
        iterations += 1
        best, best_rmse = current, rmse
        best_fitness = float(inlier.mean())
        history.append(rmse)
        if prev_rmse is not None and abs(prev_rmse - rmse) < params.relative_rmse_tolerance * max(rmse, 1e-300):
            break
        prev_rmse = rmse

        p = moved[inlier]
        q = target.points[idx[inlier]]
        n = target.normals[idx[inlier]]
        r = np.einsum("ij,ij->i", p - q, n)
        sqrt_w = np.sqrt(tukey_weight(r, params.tukey_k))
        a = np.hstack([np.cross(p, n), n]) * sqrt_w[:, None]
        b = -r * sqrt_w
        x, *_ = np.linalg.lstsq(a, b, rcond=None)
        step = Pose(Rotation.from_axis_angle(x[:3], float(np.linalg.norm(x[:3]))), x[3:])
        current = compose(step, current)

    return RegistrationResult(transform=best, inlier_rmse=best_rmse,
                              fitness=best_fitness, iterations_run=iterations,
                              rmse_history=tuple(history))
