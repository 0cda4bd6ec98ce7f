"""Blend state machine: traces, queueing, suspend, live override, safety."""
from __future__ import annotations

import math
import random

import numpy as np
import pytest

from castelet import quat
from castelet.clips import sample_clip, sample_palindrome
from castelet.errors import ContractError
from castelet.fsm import (
    ACTING,
    ALLOWED_TRANSITIONS,
    IDLE,
    LIVE,
    SUSPENDING,
    TRANSITION_IN,
    TRANSITION_OUT,
    OavFsm,
    TriggerResult,
)
from castelet.skeleton import Pose, pose_distance

from conftest import make_chained_library, _curve_pose


@pytest.fixture(scope="module")
def library():
    return make_chained_library(3)


def make_fsm(live=False, fade=0.4):
    return OavFsm("i0", fade_duration=fade, live_binding_configured=live)


def run_ticks(fsm, library, n, dt=0.1, stream=None):
    states = []
    for _ in range(n):
        _, snap = fsm.tick(dt, library, stream_pose=stream)
        states.append(snap.state)
    return states


# -------------------------------------------------------------- triggering


def test_happy_path_state_table(library):
    fsm = make_fsm()
    assert fsm.trigger_action("a1", library).status == "accepted"
    states = run_ticks(fsm, library, 25, dt=0.1)
    # snapshots record the post-advance state: the tick where the 0.4 s ramp
    # completes already reads ACTING, and the action clock runs from staging
    expected = (
        [TRANSITION_IN] * 3          # ramp 0.1..0.3
        + [ACTING] * 11              # commit at ramp 0.4; clock 0.4..1.4
        + [TRANSITION_OUT] * 4       # entered when clock hits 1.5
        + [IDLE] * 7
    )
    assert states == expected
    assert fsm.current_idle == "i1"


def test_trigger_rejected_on_idle_mismatch(library):
    fsm = make_fsm()
    result = fsm.trigger_action("a2", library)
    assert result.status == "rejected"
    assert "i1" in result.reason and "i0" in result.reason
    assert fsm.state == IDLE


def test_trigger_unknown_action(library):
    fsm = make_fsm()
    with pytest.raises(Exception):
        fsm.trigger_action("nope", library)
    with pytest.raises(ContractError):
        fsm.trigger_action("i0", library)  # idles cannot be triggered


def test_queued_action_fires_after_idle(library):
    fsm = make_fsm()
    fsm.trigger_action("a1", library)
    run_ticks(fsm, library, 2, dt=0.1)
    assert fsm.trigger_action("a2", library).status == "queued"
    states = run_ticks(fsm, library, 40, dt=0.1)
    # hand-simulated: a1 finishes its ramp, acts, fades out, idles one tick;
    # a2 drains the tick after landing and runs the same cycle
    expected = (
        [TRANSITION_IN] * 1
        + [ACTING] * 11
        + [TRANSITION_OUT] * 4
        + [IDLE] * 1
        + [TRANSITION_IN] * 3
        + [ACTING] * 11
        + [TRANSITION_OUT] * 4
        + [IDLE] * 5
    )
    assert states == expected
    assert fsm.current_idle == "i2"


def test_queued_action_with_wrong_idle_is_dropped(library):
    fsm = make_fsm()
    fsm.trigger_action("a1", library)
    assert fsm.trigger_action("a3", library).status == "queued"  # needs i2
    snaps = []
    for _ in range(25):
        _, snap = fsm.tick(0.1, library)
        snaps.append(snap)
    notices = [n for s in snaps for n in s.notices]
    assert any("a3" in n and "dropped" in n for n in notices)
    assert fsm.state == IDLE and fsm.current_idle == "i1"


def test_transition_weight_ramp_is_linear(library):
    fsm = make_fsm(fade=0.4)
    fsm.trigger_action("a1", library)
    _, snap = fsm.tick(0.2, library)
    staging = snap.channel_weights[1]  # bus B stages the first action
    assert staging == pytest.approx(0.5)
    assert snap.bus_crossfade == pytest.approx(0.5)


# ----------------------------------------------------------------- suspend


def test_suspend_early_lands_in_start_idle(library):
    fsm = make_fsm()
    fsm.trigger_action("a1", library)
    run_ticks(fsm, library, 5, dt=0.1)  # ~0.5/1.5 into the action? no: clock 0.5
    # progress 0.5/1.5 = 33% < midpoint
    assert fsm.suspend(library).status == "accepted"
    assert fsm.state == SUSPENDING
    run_ticks(fsm, library, 5, dt=0.1)
    assert fsm.state == IDLE
    assert fsm.current_idle == "i0"


def test_suspend_late_lands_in_end_idle(library):
    fsm = make_fsm()
    fsm.trigger_action("a1", library)
    run_ticks(fsm, library, 14, dt=0.1)  # clock 1.4 of 1.5 -> 93%
    fsm.suspend(library)
    run_ticks(fsm, library, 5, dt=0.1)
    assert fsm.state == IDLE and fsm.current_idle == "i1"


def test_suspend_in_idle_is_reported_noop(library):
    fsm = make_fsm()
    result = fsm.suspend(library)
    assert result.status == "noop"
    assert fsm.state == IDLE


def test_suspend_then_retrigger_same_action(library):
    fsm = make_fsm()
    fsm.trigger_action("a1", library)
    run_ticks(fsm, library, 5, dt=0.1)
    fsm.suspend(library)
    assert fsm.trigger_action("a1", library).status == "queued"
    states = run_ticks(fsm, library, 6, dt=0.1)
    assert IDLE in states and TRANSITION_IN in states  # drained after landing
    run_ticks(fsm, library, 10, dt=0.1)
    assert fsm.state == ACTING


# ------------------------------------------------------------------- live


def stream_pose_at(theta):
    return _curve_pose(theta)


def test_set_live_requires_binding(library):
    fsm = make_fsm(live=False)
    assert fsm.set_live(True, library).status == "rejected"
    assert fsm.state == IDLE


def test_live_holds_until_first_frame(library):
    fsm = make_fsm(live=True)
    pose0, _ = fsm.tick(0.1, library)
    fsm.set_live(True, library)
    for _ in range(5):
        pose, snap = fsm.tick(0.1, library)
        assert snap.state == LIVE
        assert pose_distance(pose, pose0) == 0.0  # frozen on the captured pose


def test_live_converges_to_stream(library):
    fsm = make_fsm(live=True)
    fsm.tick(0.1, library)
    fsm.set_live(True, library)
    target = stream_pose_at(33.0)
    for _ in range(6):  # fade 0.4 at dt 0.1 -> weight 1 after 4 ticks
        pose, _ = fsm.tick(0.1, library, stream_pose=target)
    assert pose_distance(pose, target) == 0.0


def test_live_off_picks_nearest_idle_by_brute_force(library):
    fsm = make_fsm(live=True)
    fsm.tick(0.1, library)
    fsm.set_live(True, library)
    target = stream_pose_at(38.0)
    for _ in range(6):
        fsm.tick(0.1, library, stream_pose=target)
    current = fsm.last_pose
    expected = min(
        library.idles(), key=lambda c: (pose_distance(current, c.first_pose), c.id)
    )
    fsm.set_live(False, library)
    states = run_ticks(fsm, library, 6, dt=0.1)
    assert states[2] == LIVE and states[3] == IDLE  # fade-out happens inside Live
    assert fsm.current_idle == expected.id
    assert expected.id == "i2"  # 38 degrees sits nearest the 40-degree idle


# ------------------------------------------------- invariants & properties


def collect_mix(snapshots):
    for snap in snapshots:
        total = sum(w for _, w in snap.mix_weights)
        assert all(w >= -1e-12 for _, w in snap.mix_weights)
        assert abs(total - 1.0) <= 1e-6


def test_mix_weights_always_convex(library):
    fsm = make_fsm(live=True)
    snaps = []
    fsm.trigger_action("a1", library)
    for k in range(120):
        _, snap = fsm.tick(1.0 / 60.0, library)
        snaps.append(snap)
    fsm.suspend(library)
    for k in range(30):
        _, snap = fsm.tick(1.0 / 60.0, library)
        snaps.append(snap)
    fsm.set_live(True, library)
    for k in range(30):
        _, snap = fsm.tick(1.0 / 60.0, library, stream_pose=stream_pose_at(10.0))
        snaps.append(snap)
    fsm.set_live(False, library)
    for k in range(30):
        _, snap = fsm.tick(1.0 / 60.0, library)
        snaps.append(snap)
    collect_mix(snaps)


def random_event_walk(seed, library, ticks=120):
    """Drive random events; returns observed transitions and snapshots."""
    rng = random.Random(seed)
    fsm = make_fsm(live=True, fade=rng.choice([0.0, 0.2, 0.4]))
    transitions = []
    snaps = []
    actions = [c.id for c in library.actions()]
    for _ in range(ticks):
        roll = rng.random()
        if roll < 0.15:
            fsm.trigger_action(rng.choice(actions), library)
        elif roll < 0.22:
            fsm.suspend(library)
        elif roll < 0.28:
            fsm.set_live(rng.random() < 0.5, library)
        stream = stream_pose_at(rng.uniform(-30, 90)) if rng.random() < 0.5 else None
        _, snap = fsm.tick(rng.choice([1.0 / 60.0, 0.05, 0.13]), library, stream_pose=stream)
        transitions.extend(fsm.take_transitions())
        snaps.append(snap)
    return transitions, snaps


def test_random_walks_stay_inside_declared_graph(library):
    for seed in range(60):
        transitions, snaps = random_event_walk(seed, library)
        for edge in transitions:
            assert edge in ALLOWED_TRANSITIONS, f"illegal transition {edge} (seed {seed})"
        collect_mix(snaps)


def test_determinism_bitwise(library):
    def run():
        fsm = make_fsm(live=True)
        fsm.trigger_action("a1", library)
        out = []
        for k in range(200):
            stream = stream_pose_at(k * 0.31) if k % 3 == 0 else None
            if k == 50:
                fsm.suspend(library)
            if k == 80:
                fsm.set_live(True, library)
            if k == 140:
                fsm.set_live(False, library)
            pose, snap = fsm.tick(1.0 / 60.0, library, stream_pose=stream)
            out.append((pose, snap))
        return out

    first, second = run(), run()
    for (p1, s1), (p2, s2) in zip(first, second):
        assert np.array_equal(p1.root_translation, p2.root_translation)
        assert np.array_equal(p1.joint_rotations, p2.joint_rotations)
        assert s1 == s2


def test_no_pops_through_full_traversal(library):
    """Idle -> action -> idle at 60 Hz never steps farther than clips + ramps."""
    h = 1.0 / 60.0
    fade = 0.4
    fsm = make_fsm(fade=fade)

    # intra-clip bound: the largest single-tick step any clip can produce
    intra = 0.0
    diameter = 0.0
    poses = []
    for clip in library.clips.values():
        series = [sample_clip(clip, k * h) for k in range(int(clip.duration / h) + 1)]
        for a, b in zip(series, series[1:]):
            intra = max(intra, pose_distance(a, b))
        poses.extend(series[:: max(1, len(series) // 10)])
    for i in range(len(poses)):
        for j in range(i + 1, len(poses)):
            diameter = max(diameter, pose_distance(poses[i], poses[j]))
    ramp_bound = (h / fade) * diameter

    prev, _ = fsm.tick(h, library)
    fsm.trigger_action("a1", library)
    worst = 0.0
    for _ in range(240):
        cur, _ = fsm.tick(h, library)
        worst = max(worst, pose_distance(prev, cur))
        prev = cur
    assert worst <= intra + ramp_bound + 1e-9
