#!/usr/bin/env python3
"""Generate the committed BVH test fixtures.

Run from the repo root:  python3 tools/make_fixtures.py
Outputs land in tests/fixtures/ and are committed; tests assert
hand-counted structural constants against them, so regenerate only when
deliberately changing the fixtures.
"""
from __future__ import annotations

import math
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from castelet.bvh import BvhDocument, serialize_bvh  # noqa: E402
from castelet.skeleton import Joint, Skeleton  # noqa: E402

FIXTURES = Path(__file__).resolve().parents[1] / "tests" / "fixtures"

ROOT_CHANNELS = ("Xposition", "Yposition", "Zposition", "Zrotation", "Xrotation", "Yrotation")
ROT_ZXY = ("Zrotation", "Xrotation", "Yrotation")


def finger(side, name, base_offset, seg1, seg2, seg3, parent, joints, in_hand=True):
    """Neuron hands carry an InHand segment before three phalanges (thumb omits it)."""
    idx = len(joints)
    if in_hand:
        joints.append(Joint(f"{side}InHand{name}", parent, np.array(base_offset), ROT_ZXY))
        parent = idx
        idx += 1
        first = seg1
    else:
        first = base_offset
    joints.append(Joint(f"{side}Hand{name}1", parent, np.array(first), ROT_ZXY))
    joints.append(Joint(f"{side}Hand{name}2", idx, np.array(seg2), ROT_ZXY))
    joints.append(Joint(f"{side}Hand{name}3", idx + 1, np.array(seg3), ROT_ZXY))
    return idx + 2  # index of segment 3 (gets an end site)


def neuron59() -> Skeleton:
    """The 59-joint full-body-with-fingers rig that inertial suits export."""
    j: list[Joint] = []
    ends: dict[int, np.ndarray] = {}
    j.append(Joint("Hips", None, np.zeros(3), ROOT_CHANNELS))  # 0

    for side, sx in (("Right", -1.0), ("Left", 1.0)):
        up = len(j)
        j.append(Joint(f"{side}UpLeg", 0, np.array([sx * 10.0, -2.0, 0.0]), ROT_ZXY))
        j.append(Joint(f"{side}Leg", up, np.array([0.0, -42.0, 0.0]), ROT_ZXY))
        j.append(Joint(f"{side}Foot", up + 1, np.array([0.0, -40.0, 0.0]), ROT_ZXY))
        ends[up + 2] = np.array([0.0, -8.0, 14.0])

    spine = len(j)
    j.append(Joint("Spine", 0, np.array([0.0, 8.0, 0.0]), ROT_ZXY))
    j.append(Joint("Spine1", spine, np.array([0.0, 12.0, 0.0]), ROT_ZXY))
    j.append(Joint("Spine2", spine + 1, np.array([0.0, 12.0, 0.0]), ROT_ZXY))
    j.append(Joint("Spine3", spine + 2, np.array([0.0, 12.0, 0.0]), ROT_ZXY))
    spine3 = spine + 3
    j.append(Joint("Neck", spine3, np.array([0.0, 14.0, 0.0]), ROT_ZXY))
    j.append(Joint("Head", spine + 4, np.array([0.0, 10.0, 0.0]), ROT_ZXY))
    ends[spine + 5] = np.array([0.0, 16.0, 0.0])

    for side, sx in (("Right", -1.0), ("Left", 1.0)):
        sh = len(j)
        j.append(Joint(f"{side}Shoulder", spine3, np.array([sx * 4.0, 10.0, 0.0]), ROT_ZXY))
        j.append(Joint(f"{side}Arm", sh, np.array([sx * 14.0, 0.0, 0.0]), ROT_ZXY))
        j.append(Joint(f"{side}ForeArm", sh + 1, np.array([sx * 26.0, 0.0, 0.0]), ROT_ZXY))
        hand = sh + 3
        j.append(Joint(f"{side}Hand", sh + 2, np.array([sx * 24.0, 0.0, 0.0]), ROT_ZXY))
        tip = finger(side, "Thumb", [sx * 3.0, -2.0, 3.0], None,
                     [sx * 4.0, 0.0, 1.5], [sx * 3.0, 0.0, 1.0], hand, j, in_hand=False)
        ends[tip] = np.array([sx * 2.5, 0.0, 0.5])
        for name, z in (("Index", 3.0), ("Middle", 1.0), ("Ring", -1.0), ("Pinky", -3.0)):
            tip = finger(side, name, [sx * 4.0, 0.0, z], [sx * 5.0, 0.0, 0.5],
                         [sx * 3.5, 0.0, 0.0], [sx * 2.5, 0.0, 0.0], hand, j)
            ends[tip] = np.array([sx * 2.0, 0.0, 0.0])

    return Skeleton(j, ends)


def biped17() -> Skeleton:
    j: list[Joint] = []
    ends: dict[int, np.ndarray] = {}
    j.append(Joint("Hips", None, np.zeros(3), ROOT_CHANNELS))
    j.append(Joint("Spine", 0, np.array([0.0, 12.0, 0.0]), ROT_ZXY))
    j.append(Joint("Chest", 1, np.array([0.0, 18.0, 0.0]), ROT_ZXY))
    j.append(Joint("Neck", 2, np.array([0.0, 16.0, 0.0]), ROT_ZXY))
    j.append(Joint("Head", 3, np.array([0.0, 8.0, 0.0]), ROT_ZXY))
    ends[4] = np.array([0.0, 18.0, 0.0])
    for side, sx in (("Left", 1.0), ("Right", -1.0)):
        a = len(j)
        j.append(Joint(f"{side}Arm", 2, np.array([sx * 18.0, 12.0, 0.0]), ROT_ZXY))
        j.append(Joint(f"{side}ForeArm", a, np.array([sx * 28.0, 0.0, 0.0]), ROT_ZXY))
        j.append(Joint(f"{side}Hand", a + 1, np.array([sx * 25.0, 0.0, 0.0]), ROT_ZXY))
        ends[a + 2] = np.array([sx * 12.0, 0.0, 0.0])
    for side, sx in (("Left", 1.0), ("Right", -1.0)):
        a = len(j)
        j.append(Joint(f"{side}UpLeg", 0, np.array([sx * 9.0, -4.0, 0.0]), ROT_ZXY))
        j.append(Joint(f"{side}Leg", a, np.array([0.0, -40.0, 0.0]), ROT_ZXY))
        j.append(Joint(f"{side}Foot", a + 1, np.array([0.0, -39.0, 0.0]), ROT_ZXY))
        ends[a + 2] = np.array([0.0, -7.0, 13.0])
    return Skeleton(j, ends)


def chain5() -> Skeleton:
    """Five joints exercising every proper rotation order plus root positions."""
    orders = [
        ("Zrotation", "Xrotation", "Yrotation"),
        ("Xrotation", "Yrotation", "Zrotation"),
        ("Zrotation", "Yrotation", "Xrotation"),
        ("Yrotation", "Xrotation", "Zrotation"),
        ("Xrotation", "Zrotation", "Yrotation"),
    ]
    j = [Joint("base", None, np.zeros(3), ("Xposition", "Yposition", "Zposition") + orders[0])]
    for i in range(1, 5):
        j.append(Joint(f"link{i}", i - 1, np.array([0.0, 15.0, 2.0 * i]), orders[i]))
    return Skeleton(j, {4: np.array([0.0, 10.0, 0.0])})


def motion_rows(skeleton, frame_count, frame_time, seed, root_travel=20.0):
    """Smooth deterministic sinusoids per channel; roughly lifelike amplitudes."""
    rng = np.random.default_rng(seed)
    specs = []
    for joint in skeleton.joints:
        for label in joint.channel_spec:
            if label.endswith("position"):
                amp, base = root_travel, (95.0 if label == "Yposition" else 0.0)
            else:
                amp, base = float(rng.uniform(4.0, 35.0)), 0.0
            specs.append((amp, base, float(rng.uniform(0.3, 1.6)), float(rng.uniform(0, 2 * math.pi))))
    rows = np.zeros((frame_count, len(specs)))
    for f in range(frame_count):
        t = f * frame_time
        for c, (amp, base, freq, phase) in enumerate(specs):
            rows[f, c] = base + amp * math.sin(2 * math.pi * freq * t + phase)
    return rows


def main():
    FIXTURES.mkdir(parents=True, exist_ok=True)
    for name, skeleton, frames, ft, seed in (
        ("neuron59", neuron59(), 120, 1.0 / 60.0, 7),
        ("biped17", biped17(), 90, 1.0 / 30.0, 11),
        ("chain5", chain5(), 40, 0.05, 13),
    ):
        doc = BvhDocument(skeleton, ft, motion_rows(skeleton, frames, ft, seed))
        path = FIXTURES / f"{name}.bvh"
        path.write_text(serialize_bvh(doc))
        total = sum(len(j.channel_spec) for j in skeleton.joints)
        print(f"{path.name}: {len(skeleton)} joints, {total} channels, {frames} frames")


if __name__ == "__main__":
    main()
