"""Point-cloud container, exact spatial index, and the cleaning chain.

The KD-tree wraps scipy's cKDTree for pruning but resolves every query to
brute-force-identical results: candidate sets are re-ranked with exact
numpy distances, ties broken toward the lower input index.

The cleaning chain mirrors a standard reconstruction post-process:
voxel downsample, statistical outlier removal (mean distance to the k
nearest neighbours thresholded at population mean + std_ratio * std),
then a centroid-radius crop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import InputError

NORMAL_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Points in mm with optional per-point unit normals."""

    points: np.ndarray
    normals: np.ndarray | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise InputError("point coordinates must be finite")
        pts = pts.copy()
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        if self.normals is not None:
            nrm = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)
            if len(nrm) != len(pts):
                raise InputError("normals must match points in count")
            if not np.all(np.isfinite(nrm)):
                raise InputError("normals must be finite")
            if len(nrm) and np.max(np.abs(np.linalg.norm(nrm, axis=1) - 1.0)) > NORMAL_TOL:
                raise InputError("normals must be unit length")
            nrm = nrm.copy()
            nrm.flags.writeable = False
            object.__setattr__(self, "normals", nrm)

    def __len__(self) -> int:
        return len(self.points)

    def select(self, index) -> "PointCloud":
        """New cloud with the given row selection (mask or indices)."""
        normals = self.normals[index] if self.normals is not None else None
        return PointCloud(self.points[index], normals)

    def centroid(self) -> np.ndarray:
        if len(self) == 0:
            raise InputError("empty cloud has no centroid")
        return self.points.mean(axis=0)


class KdTree:
    """Immutable exact spatial index over a fixed point set."""

    def __init__(self, points: np.ndarray):
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if len(points) == 0:
            raise InputError("cannot index an empty point set")
        self._points = points
        self._tree = cKDTree(points)

    def __len__(self) -> int:
        return len(self._points)

    def _exact(self, query: np.ndarray, candidates: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        d = np.linalg.norm(self._points[candidates] - query, axis=1)
        order = np.lexsort((candidates, d))
        return d[order], candidates[order]

    def knn(self, query, k: int) -> tuple[np.ndarray, np.ndarray]:
        """Distances and indices of the k nearest points, ties to lower index."""
        query = np.asarray(query, dtype=np.float64)
        if query.ndim == 2:
            pairs = [self.knn(q, k) for q in query]
            return np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])
        if not 1 <= k <= len(self):
            raise InputError(f"k must be in [1, {len(self)}]")
        kth = float(np.atleast_1d(self._tree.query(query, k=k)[0])[-1])
        # Inflate the cutoff a few ulps so boundary ties survive the ball query.
        cutoff = kth * (1.0 + 1e-12) + 1e-12
        cand = np.asarray(self._tree.query_ball_point(query, cutoff), dtype=np.intp)
        d, idx = self._exact(query, cand)
        return d[:k], idx[:k]

    def radius(self, query, r: float) -> np.ndarray:
        """Indices (ascending) of all points with distance <= r."""
        if r < 0.0:
            raise InputError("radius must be >= 0")
        query = np.asarray(query, dtype=np.float64).reshape(3)
        cand = np.asarray(self._tree.query_ball_point(query, r * (1.0 + 1e-12) + 1e-12),
                          dtype=np.intp)
        if len(cand) == 0:
            return cand
        keep = np.linalg.norm(self._points[cand] - query, axis=1) <= r
        return np.sort(cand[keep])

    def nearest_bulk(self, queries: np.ndarray, workers: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized 1-NN (exact distances; index ties resolved by scipy)."""
        d, idx = self._tree.query(np.asarray(queries, dtype=np.float64), k=1, workers=workers)
        return np.atleast_1d(d), np.atleast_1d(idx)

    def knn_distances_bulk(self, queries: np.ndarray, k: int, workers: int = 1) -> np.ndarray:
        """Vectorized k-NN distances only, shape (n, k)."""
        d, _ = self._tree.query(np.asarray(queries, dtype=np.float64), k=k, workers=workers)
        return np.atleast_2d(d)


def build_kdtree(cloud: PointCloud) -> KdTree:
    if len(cloud) == 0:
        raise InputError("cannot build a KD-tree over an empty cloud")
    return KdTree(cloud.points)


@dataclass(frozen=True)
class OutlierParams:
    k: int = 20
    std_ratio: float = 1.0

    def __post_init__(self):
        if self.k < 1:
            raise InputError("k must be >= 1")
        if self.std_ratio < 0.0:
            raise InputError("std_ratio must be >= 0")


def voxel_downsample(cloud: PointCloud, voxel: float) -> PointCloud:
    """One point per occupied voxel: the centroid of its members.

    Voxel of p is floor((p - min_corner) / voxel); output voxels appear in
    order of their first member, so the result is deterministic for a fixed
    input order.  Normals are averaged and renormalized when present.
    """
    if voxel <= 0.0:
        raise InputError("voxel size must be > 0")
    if len(cloud) == 0:
        return cloud
    idx3 = np.floor((cloud.points - cloud.points.min(axis=0)) / voxel).astype(np.int64)
    _, first, inverse = np.unique(idx3, axis=0, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    groups = rank[inverse]  # voxel id in first-member order

    n_vox = len(first)
    counts = np.bincount(groups, minlength=n_vox).astype(np.float64)
    pts = np.empty((n_vox, 3))
    for axis in range(3):
        pts[:, axis] = np.bincount(groups, weights=cloud.points[:, axis], minlength=n_vox)
    pts /= counts[:, None]

    normals = None
    if cloud.normals is not None:
        acc = np.empty((n_vox, 3))
        for axis in range(3):
            acc[:, axis] = np.bincount(groups, weights=cloud.normals[:, axis], minlength=n_vox)
        norm = np.linalg.norm(acc, axis=1)
        degenerate = norm < 1e-12
        if np.any(degenerate):
            # Cancelled averages fall back to the first member's normal.
            first_by_group = first[order]
            acc[degenerate] = cloud.normals[first_by_group[degenerate]]
            norm = np.linalg.norm(acc, axis=1)
        normals = acc / norm[:, None]
    return PointCloud(pts, normals)


def neighbor_mean_distances(cloud: PointCloud, k: int, workers: int = 1) -> np.ndarray:
    """Mean distance from each point to its k nearest neighbours (self excluded)."""
    if len(cloud) <= k:
        raise InputError("cloud must contain more than k points")
    tree = KdTree(cloud.points)
    d = tree.knn_distances_bulk(cloud.points, k + 1, workers=workers)
    return d[:, 1:].mean(axis=1)


def remove_statistical_outliers(cloud: PointCloud, params: OutlierParams = OutlierParams(),
                                workers: int = 1) -> tuple[PointCloud, np.ndarray]:
    """Drop points whose mean k-NN distance exceeds mean + std_ratio * std.

    Returns the filtered cloud and the kept mask aligned with the input.
    """
    mean_d = neighbor_mean_distances(cloud, params.k, workers=workers)
    threshold = mean_d.mean() + params.std_ratio * mean_d.std()
    mask = mean_d <= threshold
    return cloud.select(mask), mask


def crop_by_centroid(cloud: PointCloud, radius: float) -> PointCloud:
    """Keep points within radius of the centroid (boundary inclusive)."""
    if radius <= 0.0:
        raise InputError("crop radius must be > 0")
    if len(cloud) == 0:
        raise InputError("cannot crop an empty cloud")
    center = cloud.centroid()
    return cloud.select(np.linalg.norm(cloud.points - center, axis=1) <= radius)


def estimate_normals(cloud: PointCloud, k: int, viewpoint=None, workers: int = 1) -> PointCloud:
    """Per-point normals from the covariance of the k nearest neighbours.

    Each normal is the smallest-eigenvalue eigenvector, flipped to face the
    viewpoint (default: far above the centroid, since scans view from above).
    """
    if k < 3:
        raise InputError("normal estimation needs k >= 3")
    if len(cloud) <= k:
        raise InputError("cloud must contain more than k points")
    if viewpoint is None:
        viewpoint = cloud.centroid() + np.array([0.0, 1e6, 0.0])
    viewpoint = np.asarray(viewpoint, dtype=np.float64).reshape(3)

    tree = cKDTree(cloud.points)
    _, idx = tree.query(cloud.points, k=k + 1, workers=workers)
    neighbors = cloud.points[idx[:, 1:]]            # (n, k, 3)
    centered = neighbors - neighbors.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered) / k
    _, vecs = np.linalg.eigh(cov)
    normals = vecs[:, :, 0]
    flip = np.einsum("ni,ni->n", normals, viewpoint - cloud.points) < 0.0
    normals[flip] *= -1.0
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    return PointCloud(cloud.points, normals)
