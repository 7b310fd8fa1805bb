"""Synthetic stand-in for the acquisition rig and the reference scanner.

An organ-like surface is a radially perturbed ellipsoid sampled with a
full-sphere spiral; normals come from the analytic gradient of its implicit
function.  A scan walks a trajectory and captures the organ points that are
inside the viewing cone, in range, and front-facing; captured points get
Gaussian noise and random dropout, and the whole scan is mapped by a
similarity to mimic the arbitrary frame and scale of a monocular
reconstruction.

Per-pose randomness is seeded with (seed, frame_id) so adding or removing
poses never reshuffles the noise of the remaining ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InputError
from .geometry import Rotation
from .pointcloud import PointCloud
from .registration import SimilarityTransform
from .sampling import Trajectory, fibonacci_sphere, optical_axis


@dataclass(frozen=True)
class OrganShape:
    semi_axes: tuple[float, float, float] = (50.0, 30.0, 25.0)
    bump_amplitude: float = 2.0
    bump_frequency: int = 4
    seed: int = 0

    def __post_init__(self):
        if not all(a > 0.0 for a in self.semi_axes):
            raise InputError("semi_axes must be positive")
        if self.bump_amplitude < 0.0:
            raise InputError("bump_amplitude must be >= 0")
        if self.bump_frequency < 1:
            raise InputError("bump_frequency must be >= 1")


@dataclass(frozen=True)
class ScanConfig:
    fov_half_angle: float = 35.0
    max_range: float = 300.0
    noise_sigma: float = 0.1
    dropout_fraction: float = 0.05
    frame_perturbation: SimilarityTransform | None = None  # None: random from seed

    def __post_init__(self):
        if not 0.0 < self.fov_half_angle < 90.0:
            raise InputError("fov_half_angle must be in (0, 90) degrees")
        if self.max_range <= 0.0:
            raise InputError("max_range must be > 0")
        if self.noise_sigma < 0.0:
            raise InputError("noise_sigma must be >= 0")
        if not 0.0 <= self.dropout_fraction < 1.0:
            raise InputError("dropout_fraction must be in [0, 1)")


class _BumpField:
    """Sum of seeded sinusoids over the sphere, bounded to [-1, 1]."""

    N_WAVES = 3

    def __init__(self, frequency: int, seed: int):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0x0B5E]))
        raw = rng.normal(size=(self.N_WAVES, 3))
        self.axes = raw / np.linalg.norm(raw, axis=1, keepdims=True)
        self.phases = rng.uniform(0.0, 2.0 * np.pi, size=self.N_WAVES)
        weights = rng.uniform(0.5, 1.0, size=self.N_WAVES)
        self.weights = weights / weights.sum()
        self.frequency = float(frequency)

    def value(self, u: np.ndarray) -> np.ndarray:
        phase = self.frequency * (u @ self.axes.T) + self.phases
        return np.sin(phase) @ self.weights

    def gradient(self, u: np.ndarray) -> np.ndarray:
        phase = self.frequency * (u @ self.axes.T) + self.phases
        coeff = self.frequency * np.cos(phase) * self.weights
        return coeff @ self.axes


def _surface(shape: OrganShape, u: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Surface points, outward normals and radii for unit directions u."""
    a, b, c = shape.semi_axes
    inv_sq = np.array([1.0 / (a * a), 1.0 / (b * b), 1.0 / (c * c)])
    g = (u * u) @ inv_sq
    t = 1.0 / np.sqrt(g)                      # ellipsoid radius along u
    field = _BumpField(shape.bump_frequency, shape.seed)
    rho = t + shape.bump_amplitude * field.value(u)
    points = rho[:, None] * u

    # Normal of F(p) = |p| - rho(p/|p|):  u - (I - u u^T) grad_u(rho) / rho.
    grad_t = -(t ** 3)[:, None] * (u * inv_sq)
    grad_rho = grad_t + shape.bump_amplitude * field.gradient(u)
    radial = np.einsum("ij,ij->i", u, grad_rho)
    tangential = grad_rho - radial[:, None] * u
    normals = u - tangential / rho[:, None]
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    return points, normals, rho


def synth_organ(shape: OrganShape, n_points: int) -> PointCloud:
    """Deterministic organ-like cloud with outward analytic normals.

    Directions come from an oversampled spiral thinned by local surface
    area (rho^2 / cos of the surface tilt), so the point density is close
    to uniform over the surface rather than over directions.
    """
    if n_points < 100:
        raise InputError("n_points must be >= 100")
    u = fibonacci_sphere(8 * n_points)
    points, normals, rho = _surface(shape, u)
    cos_tilt = np.maximum(np.einsum("ij,ij->i", u, normals), 1e-3)
    weights = rho * rho / cos_tilt
    cumulative = np.cumsum(weights)
    cumulative /= cumulative[-1]
    idx = np.arange(n_points)
    picks = np.searchsorted(cumulative, (idx + 0.5) / n_points)
    # Nudge repeats forward so every pick is a distinct direction.
    picks = np.maximum.accumulate(picks - idx) + idx
    picks = np.clip(picks, 0, len(u) - 1)
    return PointCloud(points[picks], normals[picks])


class ScanResult(NamedTuple):
    scan: PointCloud
    true_poses: Trajectory
    estimated_poses: Trajectory
    source_indices: np.ndarray


def _random_similarity(rng: np.random.Generator) -> SimilarityTransform:
    return SimilarityTransform(
        scale=float(rng.uniform(0.5, 2.0)),
        rotation=Rotation.random(rng),
        translation=rng.uniform(-50.0, 50.0, size=3),
    )


def simulate_scan(organ: PointCloud, traj: Trajectory, cfg: ScanConfig,
                  seed: int = 0) -> ScanResult:
    """Capture the organ along a trajectory.

    A point is captured by a pose when it lies inside the viewing cone,
    within range, and its normal faces the camera; each point is owned by
    the first pose that sees it.  Noise and dropout are drawn per pose.
    The scan (and the estimated poses) live in the perturbed frame;
    true_poses is the input trajectory.
    """
    if organ.normals is None:
        raise InputError("organ cloud needs normals for visibility tests")
    if len(traj) == 0:
        raise InputError("trajectory is empty")

    cos_fov = np.cos(np.radians(cfg.fov_half_angle))
    owned = np.full(len(organ), -1, dtype=np.int64)  # owning frame id, -1 = unseen
    by_frame: dict[int, np.ndarray] = {}
    for frame_id, pose in traj.poses:
        cam = pose.translation
        axis = optical_axis(pose)
        to_point = organ.points - cam
        rng_range = np.linalg.norm(to_point, axis=1)
        cone = (to_point @ axis) >= cos_fov * rng_range
        visible = cone & (rng_range <= cfg.max_range)
        facing = np.einsum("ij,ij->i", organ.normals, -to_point) > 0.0
        captured = visible & facing & (owned < 0)
        idx = np.flatnonzero(captured)
        if len(idx):
            owned[idx] = frame_id
            by_frame[frame_id] = idx

    pieces = []
    sources = []
    for frame_id, _ in traj.poses:
        idx = by_frame.get(frame_id)
        if idx is None:
            continue
        rng = np.random.default_rng(np.random.SeedSequence([seed, frame_id]))
        noise = rng.normal(size=(len(idx), 3)) * cfg.noise_sigma
        keep = rng.random(len(idx)) >= cfg.dropout_fraction
        pieces.append(organ.points[idx[keep]] + noise[keep])
        sources.append(idx[keep])

    if pieces:
        points = np.vstack(pieces)
        sources = np.concatenate(sources)
    else:
        points = np.zeros((0, 3))
        sources = np.zeros(0, dtype=np.int64)

    perturb = cfg.frame_perturbation
    if perturb is None:
        perturb = _random_similarity(
            np.random.default_rng(np.random.SeedSequence([seed, 0xF0A3])))
    scan = PointCloud(perturb.apply(points),
                      perturb.rotation.apply(organ.normals[sources]) if len(sources) else None)
    estimated = Trajectory(
        poses=tuple((fid, perturb.apply_to_pose(p)) for fid, p in traj.poses),
        rcm=None, kind=traj.kind)
    return ScanResult(scan=scan, true_poses=traj,
                      estimated_poses=estimated, source_indices=sources)


def subsample_frames(n_total: int, n_keep: int) -> list[int]:
    """Evenly spaced frame indices: floor(i * n_total / n_keep)."""
    if n_keep < 1:
        raise InputError("n_keep must be >= 1")
    if n_keep > n_total:
        raise InputError("n_keep must not exceed n_total")
    return [(i * n_total) // n_keep for i in range(n_keep)]


def sliding_window_pairs(indices: list[int], window: int) -> list[tuple[int, int]]:
    """All pairs of list entries at positional distance 1..window, in order."""
    if window < 1:
        raise InputError("window must be >= 1")
    pairs = []
    for a in range(len(indices)):
        for b in range(a + 1, min(a + window, len(indices) - 1) + 1):
            pairs.append((indices[a], indices[b]))
    return pairs
