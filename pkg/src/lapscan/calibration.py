"""Hand-eye calibration: solve AX = XB from paired relative motions.

A_i are relative end-effector motions, B_i the matching relative camera
motions; X is the fixed flange-to-camera transform.  The solver uses the
dual-quaternion screw formulation: each pair contributes a 6x8 block to a
constraint matrix whose two-dimensional nullspace, combined under the unit
and orthogonality constraints, yields X in closed form.

Screw congruence (equal rotation angle and pitch of A_i and B_i) is checked
per pair; mild violations warn, gross ones abort.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InputError, RankDeficiencyError
from .geometry import (DualQuaternion, Pose, compose, dq_from_pose, invert,
                       pose_from_dq, rotation_angle)

ANGLE_TOL = 1e-3


@dataclass(frozen=True)
class MotionPair:
    robot_motion: Pose
    camera_motion: Pose


def relative_motions(poses: list[Pose]) -> list[Pose]:
    """Consecutive relative transforms: out[i] = poses[i]^-1 * poses[i+1]."""
    if len(poses) < 2:
        raise InputError("need at least 2 poses to form relative motions")
    return [compose(invert(poses[i]), poses[i + 1]) for i in range(len(poses) - 1)]


def motion_pairs(robot_poses: list[Pose], camera_poses: list[Pose]) -> list[MotionPair]:
    """Pair up relative motions of two equally long absolute pose sequences."""
    if len(robot_poses) != len(camera_poses):
        raise InputError("robot and camera pose sequences must have equal length")
    a = relative_motions(robot_poses)
    b = relative_motions(camera_poses)
    return [MotionPair(ra, rb) for ra, rb in zip(a, b)]


def _skew(v: np.ndarray) -> np.ndarray:
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def _screw_block(a: DualQuaternion, b: DualQuaternion) -> np.ndarray:
    ar, ad = a.real[1:], a.dual[1:]
    br, bd = b.real[1:], b.dual[1:]
    block = np.zeros((6, 8))
    block[:3, 0] = ar - br
    block[:3, 1:4] = _skew(ar + br)
    block[3:, 0] = ad - bd
    block[3:, 1:4] = _skew(ad + bd)
    block[3:, 4] = ar - br
    block[3:, 5:8] = _skew(ar + br)
    return block


def _rotation_axis(p: Pose) -> np.ndarray | None:
    v = p.rotation.wxyz[1:]
    norm = np.linalg.norm(v)
    if norm < 1e-12:
        return None
    return v / norm


def solve_hand_eye(pairs: list[MotionPair], angle_tolerance: float = ANGLE_TOL) -> Pose:
    """Least-squares X with A_i X = X B_i for all motion pairs.

    Pairs whose rotation is below angle_tolerance are dropped (they do not
    constrain the rotation); all remaining axes parallel is a degenerate
    configuration and raises RankDeficiencyError.
    """
    if len(pairs) < 2:
        raise InputError("hand-eye calibration needs at least 2 motion pairs")

    usable = []
    for i, pair in enumerate(pairs):
        ang_a = rotation_angle(pair.robot_motion.rotation)
        ang_b = rotation_angle(pair.camera_motion.rotation)
        if ang_a <= angle_tolerance or ang_b <= angle_tolerance:
            warnings.warn(f"motion pair {i} has near-zero rotation; skipped", stacklevel=2)
            continue
        if abs(ang_a - ang_b) > 10.0 * angle_tolerance:
            raise InputError(
                f"motion pair {i} violates screw congruence: rotation angles "
                f"{ang_a:.6f} vs {ang_b:.6f} rad")
        if abs(ang_a - ang_b) > angle_tolerance:
            warnings.warn(
                f"motion pair {i} rotation angles differ by {abs(ang_a - ang_b):.2e} rad",
                stacklevel=2)
        usable.append(pair)
    if len(usable) < 2:
        raise InputError("fewer than 2 usable motion pairs after filtering")

    axes = [_rotation_axis(p.robot_motion) for p in usable]
    max_spread = 0.0
    for i in range(len(axes)):
        for j in range(i + 1, len(axes)):
            c = abs(float(np.dot(axes[i], axes[j])))
            max_spread = max(max_spread, float(np.arccos(np.clip(c, -1.0, 1.0))))
    if max_spread <= ANGLE_TOL:
        raise RankDeficiencyError(
            "all motion rotation axes are parallel; hand-eye problem is rank deficient")

    blocks = []
    for pair in usable:
        a = dq_from_pose(pair.robot_motion)
        b = dq_from_pose(pair.camera_motion)
        # Resolve the sign ambiguity so the scalar parts can match.
        if a.real[0] * b.real[0] < 0.0:
            b = DualQuaternion(-b.real, -b.dual)
        blocks.append(_screw_block(a, b))
    t_matrix = np.vstack(blocks)

    _, s, vt = np.linalg.svd(t_matrix)
    if s[5] < 1e-8 * s[0]:
        raise RankDeficiencyError(
            "constraint matrix nullspace exceeds two dimensions; "
            "motion set does not determine the hand-eye transform")
    v7, v8 = vt[6], vt[7]
    u1, w1 = v7[:4], v7[4:]
    u2, w2 = v8[:4], v8[4:]

    # lambda1 * v7 + lambda2 * v8 must satisfy |q| = 1 and q . q' = 0.
    qa = float(u1 @ w1)
    qb = float(u1 @ w2 + u2 @ w1)
    qc = float(u2 @ w2)
    scale = max(abs(qa), abs(qb), abs(qc), 1e-300)
    candidates = []
    if abs(qa) > 1e-12 * scale:
        disc = max(qb * qb - 4.0 * qa * qc, 0.0)
        for root in ((-qb + np.sqrt(disc)) / (2.0 * qa), (-qb - np.sqrt(disc)) / (2.0 * qa)):
            candidates.append((root, 1.0))
    elif abs(qb) > 1e-12 * scale:
        candidates.append((-qc / qb, 1.0))
        candidates.append((1.0, 0.0))
    else:
        candidates.append((1.0, 0.0))
        candidates.append((0.0, 1.0))

    def real_norm_sq(alpha: float, beta: float) -> float:
        return (alpha * alpha * float(u1 @ u1) + 2.0 * alpha * beta * float(u1 @ u2)
                + beta * beta * float(u2 @ u2))

    alpha, beta = max(candidates, key=lambda ab: real_norm_sq(*ab))
    lam = 1.0 / np.sqrt(real_norm_sq(alpha, beta))
    x = lam * (alpha * v7 + beta * v8)
    q, q_dual = x[:4], x[4:]
    q_dual = q_dual - float(q @ q_dual) * q  # exact orthogonality
    return pose_from_dq(DualQuaternion(q, q_dual))
