"""Rigid-body primitives: unit quaternions, poses and dual quaternions.

Quaternions are Hamilton-convention and stored scalar-first (w, x, y, z).
All types are immutable values; every operation returns a new object.
Lengths are millimetres throughout the package.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConstraintError

UNIT_TOL = 1e-9


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


def _quat_mul(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    pw, px, py, pz = p
    qw, qx, qy, qz = q
    return np.array([
        pw * qw - px * qx - py * qy - pz * qz,
        pw * qx + px * qw + py * qz - pz * qy,
        pw * qy - px * qz + py * qw + pz * qx,
        pw * qz + px * qy - py * qx + pz * qw,
    ])


def _quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


@dataclass(frozen=True, eq=False)
class Rotation:
    """Unit quaternion with canonical sign (w >= 0)."""

    wxyz: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.wxyz, dtype=np.float64).reshape(4)
        norm = float(np.linalg.norm(q))
        if norm == 0.0 or not np.all(np.isfinite(q)):
            raise ConstraintError("quaternion must be finite and non-zero")
        # Skip the division when already unit so that file round-trips are
        # bitwise stable; renormalize otherwise.
        if abs(norm - 1.0) > 1e-12:
            q = q / norm
        if q[0] < 0.0:
            q = -q
        object.__setattr__(self, "wxyz", _frozen(q))

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(np.array([1.0, 0.0, 0.0, 0.0]))

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> "Rotation":
        axis = np.asarray(axis, dtype=np.float64).reshape(3)
        n = np.linalg.norm(axis)
        if n == 0.0:
            if angle == 0.0:
                return cls.identity()
            raise ConstraintError("rotation axis must be non-zero")
        half = 0.5 * angle
        return cls(np.concatenate([[np.cos(half)], np.sin(half) / n * axis]))

    @classmethod
    def from_matrix(cls, m) -> "Rotation":
        m = np.asarray(m, dtype=np.float64).reshape(3, 3)
        # Shepperd's method: pick the largest diagonal combination for stability.
        t = np.trace(m)
        if t > 0:
            s = np.sqrt(t + 1.0) * 2.0
            q = np.array([0.25 * s,
                          (m[2, 1] - m[1, 2]) / s,
                          (m[0, 2] - m[2, 0]) / s,
                          (m[1, 0] - m[0, 1]) / s])
        elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
            s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
            q = np.array([(m[2, 1] - m[1, 2]) / s,
                          0.25 * s,
                          (m[0, 1] + m[1, 0]) / s,
                          (m[0, 2] + m[2, 0]) / s])
        elif m[1, 1] > m[2, 2]:
            s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
            q = np.array([(m[0, 2] - m[2, 0]) / s,
                          (m[0, 1] + m[1, 0]) / s,
                          0.25 * s,
                          (m[1, 2] + m[2, 1]) / s])
        else:
            s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
            q = np.array([(m[1, 0] - m[0, 1]) / s,
                          (m[0, 2] + m[2, 0]) / s,
                          (m[1, 2] + m[2, 1]) / s,
                          0.25 * s])
        return cls(q)

    @classmethod
    def random(cls, rng: np.random.Generator) -> "Rotation":
        """Uniformly distributed rotation (normalized Gaussian quaternion)."""
        return cls(rng.normal(size=4))

    def as_matrix(self) -> np.ndarray:
        w, x, y, z = self.wxyz
        return np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ])

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.as_matrix().T

    def inverse(self) -> "Rotation":
        return Rotation(_quat_conj(self.wxyz))

    def __mul__(self, other: "Rotation") -> "Rotation":
        return Rotation(_quat_mul(self.wxyz, other.wxyz))


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform: x -> R x + t, translation in mm."""

    rotation: Rotation
    translation: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(t)):
            raise ConstraintError("translation must be finite")
        object.__setattr__(self, "translation", _frozen(t))

    @classmethod
    def identity(cls) -> "Pose":
        return cls(Rotation.identity(), np.zeros(3))

    @classmethod
    def from_matrix(cls, m) -> "Pose":
        m = np.asarray(m, dtype=np.float64)
        return cls(Rotation.from_matrix(m[:3, :3]), m[:3, 3])

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation.as_matrix()
        m[:3, 3] = self.translation
        return m

    def apply(self, points) -> np.ndarray:
        return self.rotation.apply(points) + self.translation


def compose(a: Pose, b: Pose) -> Pose:
    """Pose applying b first, then a: result(x) = a(b(x))."""
    return Pose(a.rotation * b.rotation,
                a.rotation.apply(b.translation) + a.translation)


def invert(p: Pose) -> Pose:
    rinv = p.rotation.inverse()
    return Pose(rinv, -rinv.apply(p.translation))


def rotation_angle(r: Rotation) -> float:
    """Rotation angle in [0, pi]; identical for q and -q."""
    w = abs(float(r.wxyz[0]))
    v = float(np.linalg.norm(r.wxyz[1:]))
    return 2.0 * np.arctan2(v, w)


def pose_difference(a: Pose, b: Pose) -> tuple[float, float]:
    """(rotation angle, translation norm) of the relative transform a^-1 b."""
    d = compose(invert(a), b)
    return rotation_angle(d.rotation), float(np.linalg.norm(d.translation))


@dataclass(frozen=True, eq=False)
class DualQuaternion:
    """Dual quaternion d = real + eps * dual encoding a rigid transform."""

    real: np.ndarray
    dual: np.ndarray

    def __post_init__(self):
        real = _frozen(np.asarray(self.real, dtype=np.float64).reshape(4))
        dual = _frozen(np.asarray(self.dual, dtype=np.float64).reshape(4))
        if abs(np.linalg.norm(real) - 1.0) > UNIT_TOL:
            raise ConstraintError("dual quaternion real part must be unit")
        if abs(float(np.dot(real, dual))) > UNIT_TOL:
            raise ConstraintError("dual quaternion parts must be orthogonal")
        object.__setattr__(self, "real", real)
        object.__setattr__(self, "dual", dual)


def dq_from_pose(p: Pose) -> DualQuaternion:
    q = p.rotation.wxyz
    t = np.concatenate([[0.0], p.translation])
    return DualQuaternion(q, 0.5 * _quat_mul(t, q))


def pose_from_dq(d: DualQuaternion) -> Pose:
    t = 2.0 * _quat_mul(d.dual, _quat_conj(d.real))
    return Pose(Rotation(d.real), t[1:])


def random_pose(rng: np.random.Generator, translation_scale: float = 100.0) -> Pose:
    """Uniform random rotation with Gaussian translation; test/simulation helper."""
    return Pose(Rotation.random(rng), rng.normal(scale=translation_scale, size=3))
