"""Quaternion helpers.

Quaternions are scalar-first ``(w, x, y, z)`` float64 arrays. Batched
variants operate on ``(n, 4)`` arrays and are the hot path of the blend
loop; the scalar variants exist for clarity at call sites that handle a
single rotation.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import ConfigurationError

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])

_AXES = {"X": 0, "Y": 1, "Z": 2}
EULER_ORDERS = ("XYZ", "XZY", "YXZ", "YZX", "ZXY", "ZYX")


def identity(n: int) -> np.ndarray:
    """(n, 4) array of identity quaternions."""
    out = np.zeros((n, 4))
    out[:, 0] = 1.0
    return out


def normalize(q: np.ndarray) -> np.ndarray:
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a*b; supports (4,) and broadcastable (n, 4) inputs."""
    aw, ax, ay, az = np.moveaxis(np.asarray(a, dtype=float), -1, 0)
    bw, bx, by, bz = np.moveaxis(np.asarray(b, dtype=float), -1, 0)
    return np.stack(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ],
        axis=-1,
    )


def rotate_vector(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector(s) v by quaternion(s) q (v' = q v q*)."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    w = q[..., 0:1]
    u = q[..., 1:4]
    t = 2.0 * np.cross(u, v)
    return v + w * t + np.cross(u, t)


def from_axis_angle(axis: int, degrees: float) -> np.ndarray:
    """Quaternion for a rotation of `degrees` about coordinate axis 0/1/2."""
    half = math.radians(degrees) * 0.5
    q = np.zeros(4)
    q[0] = math.cos(half)
    q[1 + axis] = math.sin(half)
    return q


def from_euler_tuple(angles, order: str) -> tuple:
    """from_euler on plain floats; the motion-conversion hot path."""
    if order not in EULER_ORDERS:
        raise ConfigurationError(f"unknown Euler order {order!r}")
    w, x, y, z = 1.0, 0.0, 0.0, 0.0
    for letter, angle in zip(order, angles):
        half = math.radians(angle) * 0.5
        c, s = math.cos(half), math.sin(half)
        axis = _AXES[letter]
        if axis == 0:
            w, x, y, z = w * c - x * s, w * s + x * c, y * c + z * s, z * c - y * s
        elif axis == 1:
            w, x, y, z = w * c - y * s, x * c - z * s, w * s + y * c, z * c + x * s
        else:
            w, x, y, z = w * c - z * s, x * c + y * s, y * c - x * s, w * s + z * c
    n = math.sqrt(w * w + x * x + y * y + z * z)
    return (w / n, x / n, y / n, z / n)


def from_euler(angles, order: str) -> np.ndarray:
    """Compose three axis rotations applied in the declared order.

    `angles` are degrees, one per letter of `order`; the first letter is the
    first (outermost) rotation applied, matching BVH channel convention where
    channel values are consumed left to right.
    """
    return np.array(from_euler_tuple(angles, order))


def to_matrix(q: np.ndarray) -> np.ndarray:
    """(n, 4) unit quaternions -> (n, 3, 3) rotation matrices."""
    q = np.atleast_2d(q)
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    out = np.empty((q.shape[0], 3, 3))
    out[:, 0, 0] = 1 - 2 * (y * y + z * z)
    out[:, 0, 1] = 2 * (x * y - w * z)
    out[:, 0, 2] = 2 * (x * z + w * y)
    out[:, 1, 0] = 2 * (x * y + w * z)
    out[:, 1, 1] = 1 - 2 * (x * x + z * z)
    out[:, 1, 2] = 2 * (y * z - w * x)
    out[:, 2, 0] = 2 * (x * z - w * y)
    out[:, 2, 1] = 2 * (y * z + w * x)
    out[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return out


def slerp_batch(qa: np.ndarray, qb: np.ndarray, w: float) -> np.ndarray:
    """Shortest-arc spherical interpolation between (n, 4) quaternion rows.

    Signs of `qb` rows are flipped onto the hemisphere of `qa` so crossfades
    never take the long way around. Result rows are renormalized.
    """
    dot = np.einsum("ij,ij->i", qa, qb)
    qb = np.where(dot[:, None] < 0.0, -qb, qb)
    dot = np.clip(np.abs(dot), -1.0, 1.0)
    theta = np.arccos(dot)
    sin_theta = np.sin(theta)
    # nearly parallel rows fall back to a normalized lerp
    near = sin_theta < 1e-9
    safe_sin = np.where(near, 1.0, sin_theta)
    wa = np.where(near, 1.0 - w, np.sin((1.0 - w) * theta) / safe_sin)
    wb = np.where(near, w, np.sin(w * theta) / safe_sin)
    return normalize(wa[:, None] * qa + wb[:, None] * qb)


def angle_batch(qa: np.ndarray, qb: np.ndarray) -> np.ndarray:
    """Geodesic angle (radians) between quaternion rows, sign-insensitive.

    Uses the atan2 form rather than 2*acos(|dot|): acos is ill-conditioned
    near 1, and identical rows must measure exactly zero.
    """
    dot = np.einsum("ij,ij->i", qa, qb)
    qb = np.where(dot[:, None] < 0.0, -qb, qb)
    # 2*acos(|dot|) == 4*atan2(|qa-qb|, |qa+qb|) after sign alignment
    return 4.0 * np.arctan2(
        np.linalg.norm(qa - qb, axis=1), np.linalg.norm(qa + qb, axis=1)
    )
