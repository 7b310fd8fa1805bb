"""Viewing-direction samplers and acquisition trajectories.

Directions live on the unit sphere with +y as the default vertical axis.
The Fibonacci spiral advances the azimuth by the golden angle pi*(3 - sqrt(5))
per point; an elevation cap keeps only directions whose elevation exceeds
90 deg - theta_max, restricting poses to the top of the sphere.

Three trajectory kinds convert directions into camera poses: the open kinds
place the camera at a fixed stand-off distance looking at the sample, the
trocar kind pivots the scope about an elevated remote centre of motion (RCM)
with the tip inserted a fixed depth past it.  Every pose's optical axis
passes through the RCM.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import ConstraintError, EmptyTrajectoryError, InputError
from .geometry import Pose, Rotation

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))

TrajectoryKind = Literal["trocar", "open_close", "open_far"]


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def fibonacci_sphere(n: int) -> np.ndarray:
    """Full golden-angle spiral: n near-uniform unit vectors, no cap."""
    if n < 1:
        raise InputError("n must be >= 1")
    i = np.arange(n, dtype=np.float64)
    y = 1.0 - 2.0 * (i + 0.5) / n
    r = np.sqrt(np.maximum(0.0, 1.0 - y * y))
    theta = i * GOLDEN_ANGLE
    return np.column_stack([r * np.cos(theta), y, r * np.sin(theta)])


def fibonacci_directions(n: int, theta_max: float) -> np.ndarray:
    """Spiral directions with elevation strictly above 90 - theta_max degrees."""
    _check_theta_max(theta_max)
    pts = fibonacci_sphere(n)
    elevation = np.degrees(np.arcsin(np.clip(pts[:, 1], -1.0, 1.0)))
    return pts[elevation > 90.0 - theta_max]


def equal_angle_directions(d_azimuth: float, d_altitude: float,
                           theta_max: float = 90.0) -> np.ndarray:
    """Fixed-increment azimuth/altitude grid above the cap, pole emitted once.

    Rings sit at altitudes 90 - theta_max + k * d_altitude (k = 1, 2, ...)
    strictly below the pole; the pole itself is always the last direction.
    """
    if not 0.0 < d_azimuth <= 360.0:
        raise InputError("d_azimuth must be in (0, 360]")
    if not 0.0 < d_altitude <= 90.0:
        raise InputError("d_altitude must be in (0, 90]")
    _check_theta_max(theta_max)
    azimuths = np.arange(0.0, 360.0 - 1e-9, d_azimuth)
    dirs = []
    k = 1
    while True:
        altitude = 90.0 - theta_max + k * d_altitude
        if altitude >= 90.0 - 1e-9:
            break
        alt = np.radians(altitude)
        az = np.radians(azimuths)
        ring = np.column_stack([np.cos(alt) * np.cos(az),
                                np.full_like(az, np.sin(alt)),
                                np.cos(alt) * np.sin(az)])
        dirs.append(ring)
        k += 1
    dirs.append(np.array([[0.0, 1.0, 0.0]]))
    return np.vstack(dirs)


def _check_theta_max(theta_max: float):
    if not 0.0 < theta_max <= 90.0:
        raise InputError("theta_max must be in (0, 90] degrees")


@dataclass(frozen=True)
class SampleConfig:
    """Direction sampler choice and its parameters."""

    scheme: Literal["fibonacci", "equal_angle"] = "fibonacci"
    n_points: int = 100
    theta_max: float = 90.0
    d_azimuth: float | None = None
    d_altitude: float | None = None

    def __post_init__(self):
        if self.scheme not in ("fibonacci", "equal_angle"):
            raise InputError(f"unknown sampling scheme {self.scheme!r}")
        if self.n_points < 1:
            raise InputError("n_points must be >= 1")
        _check_theta_max(self.theta_max)
        if self.scheme == "equal_angle" and (self.d_azimuth is None or self.d_altitude is None):
            raise InputError("equal_angle sampling needs d_azimuth and d_altitude")

    def directions(self) -> np.ndarray:
        if self.scheme == "fibonacci":
            return fibonacci_directions(self.n_points, self.theta_max)
        return equal_angle_directions(self.d_azimuth, self.d_altitude, self.theta_max)


@dataclass(frozen=True)
class TrajectoryConfig:
    kind: TrajectoryKind
    sample_center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    rcm_height: float | None = None       # trocar only
    insertion_depth: float | None = None  # trocar only
    d_lap: float | None = None            # open kinds only
    sample: SampleConfig = field(default_factory=SampleConfig)
    up: tuple[float, float, float] = (0.0, 1.0, 0.0)

    def __post_init__(self):
        if self.kind == "trocar":
            if self.rcm_height is None or self.insertion_depth is None:
                raise InputError("trocar trajectory needs rcm_height and insertion_depth")
            if not self.rcm_height > self.insertion_depth > 0.0:
                raise InputError("trocar needs rcm_height > insertion_depth > 0")
        elif self.kind in ("open_close", "open_far"):
            if self.d_lap is None or not self.d_lap > 0.0:
                raise InputError("open trajectories need d_lap > 0")
        else:
            raise InputError(f"unknown trajectory kind {self.kind!r}")
        if np.linalg.norm(self.up) == 0.0:
            raise InputError("up vector must be non-zero")


@dataclass(frozen=True)
class Trajectory:
    """Ordered (frame_id, pose) sequence with the RCM it pivots about."""

    poses: tuple[tuple[int, Pose], ...]
    rcm: np.ndarray | None = None
    kind: str | None = None

    def __len__(self) -> int:
        return len(self.poses)

    def frame_ids(self) -> list[int]:
        return [fid for fid, _ in self.poses]


def look_at_pose(center, direction, distance: float, up_hint=(0.0, 1.0, 0.0)) -> Pose:
    """Camera at center + distance * direction with its +z axis on -direction.

    The camera x axis is normalize(up_hint x optical_axis); when up_hint is
    parallel to the optical axis the fallback hint (1, 0, 0) is used.
    """
    center = np.asarray(center, dtype=np.float64).reshape(3)
    direction = np.asarray(direction, dtype=np.float64).reshape(3)
    norm = np.linalg.norm(direction)
    if norm == 0.0:
        raise InputError("viewing direction must be non-zero")
    if abs(norm - 1.0) > 1e-9:
        raise ConstraintError("viewing direction must be unit length")
    if distance < 0.0:
        raise InputError("distance must be >= 0")
    optical = -direction
    x_axis = np.cross(np.asarray(up_hint, dtype=np.float64), optical)
    if np.linalg.norm(x_axis) < 1e-6:
        x_axis = np.cross(np.array([1.0, 0.0, 0.0]), optical)
    x_axis = _unit(x_axis)
    y_axis = np.cross(optical, x_axis)
    rot = Rotation.from_matrix(np.column_stack([x_axis, y_axis, optical]))
    return Pose(rot, center + distance * direction)


def _rotation_to(target_up: np.ndarray) -> Rotation:
    """Minimal rotation taking +y onto target_up."""
    src = np.array([0.0, 1.0, 0.0])
    dst = _unit(target_up)
    c = float(np.dot(src, dst))
    if c > 1.0 - 1e-12:
        return Rotation.identity()
    if c < -1.0 + 1e-12:
        return Rotation.from_axis_angle(np.array([1.0, 0.0, 0.0]), np.pi)
    axis = np.cross(src, dst)
    return Rotation.from_axis_angle(axis, np.arccos(np.clip(c, -1.0, 1.0)))


def generate_trajectory(cfg: TrajectoryConfig) -> Trajectory:
    """Camera poses for one acquisition pass; frame ids count up from 0."""
    dirs = cfg.sample.directions()
    if len(dirs) == 0:
        raise EmptyTrajectoryError("elevation cap removed every sampled direction")
    up = _unit(np.asarray(cfg.up, dtype=np.float64))
    tilt = _rotation_to(up)
    dirs = tilt.apply(dirs)
    center = np.asarray(cfg.sample_center, dtype=np.float64)

    poses = []
    if cfg.kind == "trocar":
        rcm = center + cfg.rcm_height * up
        for i, u in enumerate(dirs):
            tip = rcm - cfg.insertion_depth * u
            poses.append((i, look_at_pose(tip, u, 0.0, up_hint=up)))
    else:
        rcm = center
        for i, u in enumerate(dirs):
            poses.append((i, look_at_pose(center, u, cfg.d_lap, up_hint=up)))
    return Trajectory(poses=tuple(poses), rcm=rcm, kind=cfg.kind)


def optical_axis(pose: Pose) -> np.ndarray:
    """World-frame viewing direction (+z of the camera frame)."""
    return pose.rotation.as_matrix()[:, 2]


def rcm_residual(traj: Trajectory) -> float:
    """Largest distance from the RCM to any pose's optical-axis line, in mm."""
    if traj.rcm is None:
        raise InputError("trajectory has no RCM")
    worst = 0.0
    for _, pose in traj.poses:
        axis = optical_axis(pose)
        offset = traj.rcm - pose.translation
        dist = np.linalg.norm(offset - np.dot(offset, axis) * axis)
        worst = max(worst, float(dist))
    return worst
