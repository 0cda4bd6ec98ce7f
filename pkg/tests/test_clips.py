"""Take splitting, clip sampling, palindromic idles, chain validation."""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from castelet import quat
from castelet.bvh import frames_to_take, parse_bvh
from castelet.clips import (
    AnimationClip,
    ClipLibrary,
    Take,
    concat_clips,
    sample_clip,
    sample_palindrome,
    split_take,
    validate_chain,
)
from castelet.errors import ChainError, ContractError, SplitError
from castelet.skeleton import Joint, Pose, Skeleton, lerp_pose, pose_distance

FIXTURES = Path(__file__).parent / "fixtures"


def one_joint_skeleton():
    return Skeleton([Joint("only", None, np.zeros(3))])


def ramp_take(n=11, frame_time=1.0, degrees_per_step=3.0, take_id="t"):
    """Rotation about x grows linearly; distinct pose per sample."""
    sk = one_joint_skeleton()
    poses = [
        Pose(np.array([0.1 * i, 0.0, 0.0]), np.array([quat.from_axis_angle(0, degrees_per_step * i)]))
        for i in range(n)
    ]
    return Take(take_id, sk, poses, frame_time)


def ramp_idle(start_deg, end_deg, n, frame_time, clip_id="idle"):
    sk = one_joint_skeleton()
    step = (end_deg - start_deg) / (n - 1)
    poses = [Pose(np.zeros(3), np.array([quat.from_axis_angle(0, start_deg + step * i)])) for i in range(n)]
    return AnimationClip(clip_id, "idle", sk, poses, frame_time)


# -------------------------------------------------------------- split_take


def test_split_durations():
    take = ramp_take(n=11, frame_time=1.0)  # duration 10 s
    a, b, c = split_take(take, 2.0, 7.0, ("i0", "act", "i1"))
    assert a.duration == pytest.approx(2.0)
    assert b.duration == pytest.approx(5.0)
    assert c.duration == pytest.approx(3.0)
    assert b.start_idle_id == "i0" and b.end_idle_id == "i1"
    assert a.kind == "idle" and b.kind == "action" and c.kind == "idle"


def test_split_reassembly_is_identity():
    take = ramp_take(n=23, frame_time=0.25)
    parts = split_take(take, 1.0, 3.5, ("i0", "act", "i1"))
    back = concat_clips("t", list(parts))
    assert back.sample_count == take.sample_count
    assert back.frame_time == take.frame_time
    for orig, redo in zip(take.poses, back.poses):
        assert np.array_equal(orig.joint_rotations, redo.joint_rotations)
        assert np.array_equal(orig.root_translation, redo.root_translation)
    assert back.timestamps() == take.timestamps()


def test_split_boundary_poses_are_shared_exactly():
    take = ramp_take(n=11, frame_time=0.5)
    a, b, c = split_take(take, 2.0, 3.5, ("i0", "act", "i1"))
    assert pose_distance(b.first_pose, a.last_pose) == 0.0
    assert pose_distance(b.last_pose, c.first_pose) == 0.0


def test_split_rejects_bad_cuts():
    take = ramp_take(n=11, frame_time=1.0)
    with pytest.raises(SplitError):
        split_take(take, 0.0, 5.0, ("a", "b", "c"))
    with pytest.raises(SplitError):
        split_take(take, 7.0, 2.0, ("a", "b", "c"))
    with pytest.raises(SplitError):
        split_take(take, 2.0, 10.0, ("a", "b", "c"))
    with pytest.raises(SplitError):
        split_take(take, 2.0, 2.4, ("a", "b", "c"))  # snaps onto i1 == i2


def test_split_fixture_take_chains_exactly():
    doc = parse_bvh((FIXTURES / "biped17.bvh").read_text())
    take = frames_to_take(doc)
    d = take.duration
    a, b, c = split_take(take, d / 3, 2 * d / 3, ("i0", "act", "i1"))
    lib = ClipLibrary([a, b, c])
    report = lib.validate(tolerance=0.0)
    assert report.ok, report.lines()
    back = concat_clips(take.id, [a, b, c])
    assert all(
        np.array_equal(x.joint_rotations, y.joint_rotations)
        for x, y in zip(take.poses, back.poses)
    )


# -------------------------------------------------------------- sample_clip


def test_sample_clip_clamps_endpoints():
    clip = ramp_idle(0, 30, 7, 0.5)
    assert sample_clip(clip, -1.0) is clip.poses[0]
    assert sample_clip(clip, 0.0) is clip.poses[0]
    assert sample_clip(clip, 99.0) is clip.poses[-1]


def test_sample_clip_knot_identity():
    clip = ramp_idle(0, 30, 7, 1.0 / 60.0)
    for k in range(7):
        assert sample_clip(clip, k / 60.0) is clip.poses[k]


def test_sample_clip_midpoint_is_lerp():
    clip = ramp_idle(0, 30, 4, 2.0)
    got = sample_clip(clip, 3.0)
    expected = lerp_pose(clip.poses[1], clip.poses[2], 0.5)
    assert pose_distance(got, expected) < 1e-12


# -------------------------------------------------------- sample_palindrome


def test_palindrome_reflection_arithmetic():
    clip = ramp_idle(0, 30, 5, 0.5)  # duration 2.0
    got = sample_palindrome(clip, 2.5)
    assert pose_distance(got, sample_clip(clip, 1.5)) == 0.0


def test_palindrome_period_closure():
    clip = ramp_idle(0, 30, 5, 0.5)
    assert pose_distance(sample_palindrome(clip, 0.0), sample_palindrome(clip, 4.0)) == 0.0


def test_palindrome_periodicity_on_dyadic_grid():
    clip = ramp_idle(0, 33, 9, 0.25)  # duration 2.0, period 4.0
    for k in range(0, 257, 3):
        t = k / 64.0
        assert pose_distance(sample_palindrome(clip, t), sample_palindrome(clip, t + 4.0)) == 0.0


def test_palindrome_never_leaves_clip_range():
    clip = ramp_idle(0, 30, 5, 0.5)
    d = clip.duration
    for k in range(1000):
        t = k * 0.0173
        u = math.fmod(t, 2 * d)
        s = u if u <= d else 2 * d - u
        assert 0.0 <= s <= d + 1e-12


def test_palindrome_removes_wrap_jump():
    # start and end poses differ by 30 degrees; naive looping jumps at wrap
    clip = ramp_idle(0, 30, 121, 1.0 / 60.0)  # duration 2 s
    h = 1.0 / 60.0
    steps = int(round(2 * clip.duration / h))

    def max_step(sampler):
        worst = 0.0
        prev = sampler(0.0)
        for k in range(1, steps + 1):
            cur = sampler(k * h)
            worst = max(worst, pose_distance(prev, cur))
            prev = cur
        return worst

    def naive_loop(t):
        return sample_clip(clip, math.fmod(t, clip.duration))

    forward_max = max_step(lambda t: sample_clip(clip, min(t, clip.duration)))
    palindrome_max = max_step(lambda t: sample_palindrome(clip, t))
    naive_max = max_step(naive_loop)
    assert palindrome_max <= forward_max + 1e-12
    assert naive_max > 10 * palindrome_max


def test_palindrome_rejects_actions():
    sk = one_joint_skeleton()
    poses = [Pose.identity(1), Pose.identity(1)]
    action = AnimationClip("a", "action", sk, poses, 1.0, start_idle_id="i", end_idle_id="i")
    with pytest.raises(ContractError):
        sample_palindrome(action, 0.0)


# ------------------------------------------------------------- chain checks


def chained_library():
    take = ramp_take(n=31, frame_time=0.1)
    i0, a1, i1 = split_take(take, 1.0, 2.0, ("i0", "a1", "i1"))
    take2 = Take("t2", take.skeleton, take.poses[20:], 0.1)
    i1b, a2, i2 = split_take(take2, 0.3, 0.7, ("i1", "a2", "i2"))
    lib = ClipLibrary([i0, a1, i1b, a2, i2])
    return lib


def test_validate_chain_single_action():
    lib = chained_library()
    assert validate_chain(lib, ["a1"], tolerance=0.05).ok


def test_validate_chain_shared_idle_ok():
    lib = chained_library()
    report = validate_chain(lib, ["a1", "a2"], tolerance=10.0)
    assert not any(v.kind == "idle-mismatch" for v in report.violations)


def test_validate_chain_mismatch_names_both_clips():
    lib = chained_library()
    report = validate_chain(lib, ["a2", "a1"], tolerance=10.0)
    bad = [v for v in report.violations if v.kind == "idle-mismatch"]
    assert len(bad) == 1
    assert "a2" in bad[0].message and "a1" in bad[0].message


def test_validate_chain_unknown_id():
    lib = chained_library()
    with pytest.raises(ChainError):
        validate_chain(lib, ["nope"], tolerance=0.05)


def test_library_boundary_distance_reported():
    sk = one_joint_skeleton()
    idle = ramp_idle(0, 5, 3, 1.0, clip_id="i")
    far = [Pose(np.zeros(3), np.array([quat.from_axis_angle(0, 90 + 5 * i)])) for i in range(3)]
    action = AnimationClip("a", "action", sk, far, 1.0, start_idle_id="i", end_idle_id="i")
    report = ClipLibrary([idle, action]).validate(tolerance=0.05)
    assert not report.ok
    assert all(v.kind == "boundary-distance" for v in report.violations)
    assert report.violations[0].distance > 1.0
