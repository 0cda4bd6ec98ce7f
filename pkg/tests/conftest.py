from __future__ import annotations

import math

import numpy as np
import pytest

from castelet import quat
from castelet.clips import ClipLibrary, Take, split_take
from castelet.skeleton import Joint, Pose, Skeleton


def random_skeleton(rng: np.random.Generator, n_joints: int) -> Skeleton:
    joints = [Joint("j0", None, rng.normal(size=3), ("Zrotation", "Xrotation", "Yrotation"))]
    for i in range(1, n_joints):
        parent = int(rng.integers(0, i))
        joints.append(Joint(f"j{i}", parent, rng.normal(size=3), ("Zrotation", "Xrotation", "Yrotation")))
    return Skeleton(joints)


def random_quaternions(rng: np.random.Generator, n: int) -> np.ndarray:
    q = rng.normal(size=(n, 4))
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def random_pose(rng: np.random.Generator, n_joints: int) -> Pose:
    return Pose(rng.normal(size=3), random_quaternions(rng, n_joints))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260810)


# ------------------------------------------------- shared clip libraries

IDLE_SECONDS = 1.0
ACTION_SECONDS = 1.5
IDLE_DRIFT_DEG = 5.0  # idles never end where they start
BASE_STEP_DEG = 20.0
LIB_RATE = 30


def _two_joint_skeleton() -> Skeleton:
    return Skeleton(
        [
            Joint("hips", None, np.zeros(3)),
            Joint("arm", 0, np.array([0.0, 0.5, 0.0])),
        ]
    )


def _curve_pose(theta_deg: float) -> Pose:
    root = np.array([theta_deg / 100.0, 0.0, 0.0])
    rots = np.array(
        [quat.from_axis_angle(2, theta_deg), quat.from_axis_angle(0, theta_deg * 0.5)]
    )
    return Pose(root, rots)


_IDLE_SAMPLES = int(IDLE_SECONDS * LIB_RATE)  # samples per idle segment
_ACTION_SAMPLES = int(ACTION_SECONDS * LIB_RATE)


def _theta_for_sample(k: int, i: int) -> float:
    """Curve of take k at sample i: idle k-1, action k, idle k.

    Segment-local float expressions, so the idle shared by takes k and k+1
    produces bit-identical poses in both.
    """
    ft = 1.0 / LIB_RATE
    base = BASE_STEP_DEG * (k - 1)
    if i <= _IDLE_SAMPLES:
        return base + IDLE_DRIFT_DEG * (i * ft)
    if i <= _IDLE_SAMPLES + _ACTION_SAMPLES:
        u = (i - _IDLE_SAMPLES) / _ACTION_SAMPLES
        s = u * u * (3 - 2 * u)  # smoothstep
        lo = base + IDLE_DRIFT_DEG * IDLE_SECONDS
        return lo + s * (BASE_STEP_DEG * k - lo)
    j = i - _IDLE_SAMPLES - _ACTION_SAMPLES
    return BASE_STEP_DEG * k + IDLE_DRIFT_DEG * (j * ft)


def make_chained_library(n_actions: int = 3) -> ClipLibrary:
    """Actions a1..aN chained through idles i0..iN, boundaries exact."""
    sk = _two_joint_skeleton()
    ft = 1.0 / LIB_RATE
    n_samples = _IDLE_SAMPLES + _ACTION_SAMPLES + _IDLE_SAMPLES + 1
    lib = ClipLibrary()
    for k in range(1, n_actions + 1):
        poses = [_curve_pose(_theta_for_sample(k, i)) for i in range(n_samples)]
        take = Take(f"take{k}", sk, poses, ft)
        i_start, action, i_end = split_take(
            take, IDLE_SECONDS, IDLE_SECONDS + ACTION_SECONDS, (f"i{k-1}", f"a{k}", f"i{k}")
        )
        if f"i{k-1}" not in lib:
            lib.add(i_start)
        lib.add(action)
        lib.add(i_end)
    return lib
