#!/usr/bin/env python3
"""Build the committed demo bundle at shows/andersen_demo/.

Five silhouette characters begin as traditional rear-lit shadows on the
translucent backdrop (invisible casters), get "peeled" into visible
figures one by one, then play chained bow/wave/return actions. One avatar
(the princess) carries a retarget map from the 59-joint capture rig so the
live path is exercisable against this bundle.

Run from the repo root: python3 tools/make_demo_show.py
"""
from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))
sys.path.insert(0, str(ROOT / "tools"))

from make_fixtures import biped17, neuron59  # noqa: E402

from castelet import quat  # noqa: E402
from castelet.bundle import write_clip_files  # noqa: E402
from castelet.bvh import BvhDocument, serialize_bvh  # noqa: E402
from castelet.clips import Take, split_take  # noqa: E402
from castelet.skeleton import Pose  # noqa: E402

OUT = ROOT / "shows" / "andersen_demo"
RATE = 30
IDLE_SAMPLES = 36  # 1.2 s
ACTION_SAMPLES = 60  # 2.0 s

# (axis, [posture0, posture1, posture2] degrees, sway amp, drift deg/s)
MOTION = {
    "Spine": (0, [0.0, 28.0, 4.0], 1.0, 0.8),
    "Chest": (0, [0.0, 22.0, 2.0], 1.2, -0.6),
    "Neck": (0, [0.0, 12.0, -6.0], 1.5, 0.5),
    "Head": (0, [0.0, 8.0, -8.0], 2.0, -0.7),
    "LeftArm": (2, [-65.0, -50.0, -60.0], 2.0, 0.9),
    "LeftForeArm": (2, [-10.0, -30.0, -15.0], 2.5, -0.8),
    "RightArm": (2, [65.0, 50.0, -35.0], 2.0, -0.9),
    "RightForeArm": (2, [10.0, 30.0, 60.0], 2.5, 0.8),
    "LeftUpLeg": (0, [0.0, -8.0, 0.0], 0.8, 0.4),
    "RightUpLeg": (0, [0.0, -8.0, 0.0], 0.8, -0.4),
}
WAVE_BUMP = {"RightForeArm": 25.0}  # flourish inside action 2


def joint_angle(name, posture, local_t, phase):
    axis, bases, amp, drift = MOTION[name]
    sway = amp * math.sin(2.0 * math.pi * 0.25 * local_t + phase)
    return bases[posture % 3] + drift * local_t + sway, axis


def idle_pose(skeleton, posture, local_t):
    n = len(skeleton)
    quats = np.tile(quat.IDENTITY, (n, 1))
    for j, joint in enumerate(skeleton.joints):
        if joint.name in MOTION:
            angle, axis = joint_angle(joint.name, posture, local_t, j * 0.9)
            quats[j] = quat.from_axis_angle(axis, angle)
    sway = 0.01 * math.sin(2.0 * math.pi * 0.2 * local_t)
    return Pose(np.array([sway, 0.0, 0.0]), quats)


def action_pose(skeleton, k, u):
    """Blend posture k-1 -> k%3 boundaries exactly at u=0 and u=1."""
    s = u * u * (3 - 2 * u)
    idle_end_t = (IDLE_SAMPLES / RATE)
    a = idle_pose(skeleton, k - 1, idle_end_t)  # where the start idle stops
    b = idle_pose(skeleton, k % 3, 0.0)  # where the end idle begins
    n = len(skeleton)
    quats = np.empty((n, 4))
    for j, joint in enumerate(skeleton.joints):
        if joint.name in MOTION:
            angle_a, axis = joint_angle(joint.name, k - 1, idle_end_t, j * 0.9)
            angle_b, _ = joint_angle(joint.name, k % 3, 0.0, j * 0.9)
            angle = angle_a + s * (angle_b - angle_a)
            if k == 2 and joint.name in WAVE_BUMP:
                angle += WAVE_BUMP[joint.name] * math.sin(math.pi * u) * math.sin(6 * math.pi * u)
            quats[j] = quat.from_axis_angle(axis, angle)
        else:
            quats[j] = quat.IDENTITY
    root = (1 - s) * a.root_translation + s * b.root_translation
    return Pose(root, quats)


def build_take(skeleton, k):
    """Take k: idle k-1, action k, idle k (postures mod 3)."""
    ft = 1.0 / RATE
    poses = []
    for i in range(IDLE_SAMPLES + 1):
        poses.append(idle_pose(skeleton, k - 1, i * ft))
    for i in range(1, ACTION_SAMPLES):
        poses.append(action_pose(skeleton, k, i / ACTION_SAMPLES))
    for i in range(IDLE_SAMPLES + 1):
        poses.append(idle_pose(skeleton, k % 3, i * ft))
    return Take(f"take{k}", skeleton, poses, ft)


HUMANOID_MESH = {
    "vertices": [
        [-0.10, -0.86], [0.10, -0.86],          # feet
        [0.14, -0.45], [0.16, 0.02],            # right leg up to hip
        [0.42, 0.28], [0.50, 0.10],             # right arm
        [0.24, 0.42], [0.16, 0.58],             # right shoulder/neck
        [0.12, 0.62], [0.15, 0.78], [0.0, 0.88],  # head right/top
        [-0.15, 0.78], [-0.12, 0.62],           # head left
        [-0.16, 0.58], [-0.24, 0.42],           # left neck/shoulder
        [-0.50, 0.10], [-0.42, 0.28],           # left arm
        [-0.16, 0.02], [-0.14, -0.45],          # left hip/leg
    ],
    "polygons": [[0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18]],
    "weights": [
        [["LeftFoot", 0.5], ["RightFoot", 0.5]],
        [["RightFoot", 1.0]],
        [["RightLeg", 1.0]],
        [["RightUpLeg", 0.7], ["Hips", 0.3]],
        [["RightForeArm", 1.0]],
        [["RightHand", 1.0]],
        [["RightArm", 0.6], ["Chest", 0.4]],
        [["Chest", 0.6], ["Neck", 0.4]],
        [["Neck", 0.5], ["Head", 0.5]],
        [["Head", 1.0]],
        [["Head", 1.0]],
        [["Head", 1.0]],
        [["Neck", 0.5], ["Head", 0.5]],
        [["Chest", 0.6], ["Neck", 0.4]],
        [["LeftArm", 0.6], ["Chest", 0.4]],
        [["LeftHand", 1.0]],
        [["LeftForeArm", 1.0]],
        [["LeftUpLeg", 0.7], ["Hips", 0.3]],
        [["LeftLeg", 1.0]],
    ],
}

AVATARS = [
    ("scholar", -2.6, [0.45, 0.45, 0.48, 1.0]),
    ("shadow", -1.3, [0.02, 0.02, 0.03, 1.0]),
    ("princess", 0.0, [0.92, 0.92, 0.95, 1.0]),
    ("courtier1", 1.3, [0.25, 0.2, 0.3, 1.0]),
    ("courtier2", 2.6, [0.2, 0.28, 0.25, 1.0]),
]

RETARGET_ENTRIES = [
    {"source": name, "target": name}
    for name in [
        "Hips", "Spine", "Neck", "Head",
        "LeftArm", "LeftForeArm", "LeftHand",
        "RightArm", "RightForeArm", "RightHand",
        "LeftUpLeg", "LeftLeg", "LeftFoot",
        "RightUpLeg", "RightLeg", "RightFoot",
    ]
] + [{"source": "Spine3", "target": "Chest"}]


def main():
    clips_dir = OUT / "clips"
    rigs_dir = OUT / "rigs"
    meshes_dir = OUT / "meshes"
    for d in (clips_dir, rigs_dir, meshes_dir):
        d.mkdir(parents=True, exist_ok=True)

    skeleton = biped17()
    scaled = skeleton.scaled(0.01)  # author in meters, persist in centimeters
    written_idles = set()
    for k in (1, 2, 3):
        take = build_take(scaled, k)
        t1 = IDLE_SAMPLES / RATE
        t2 = (IDLE_SAMPLES + ACTION_SAMPLES) / RATE
        ids = (f"i{k-1}", f"a{k}", f"i{k % 3}")
        idle_start, action, idle_end = split_take(take, t1, t2, ids)
        for clip in (idle_start, action, idle_end):
            if clip.kind == "idle":
                if clip.id in written_idles:
                    continue
                written_idles.add(clip.id)
            write_clip_files(clip, clips_dir, unit_scale=0.01)

    # stream-source hierarchy for the live path (hierarchy only, no motion)
    src = neuron59()
    doc = BvhDocument(src, 1.0 / 60.0, np.zeros((1, 180)))
    hierarchy = serialize_bvh(doc).split("MOTION")[0].rstrip() + "\n"
    (rigs_dir / "neuron59.bvh").write_text(hierarchy)

    (meshes_dir / "humanoid.json").write_text(json.dumps(HUMANOID_MESH, indent=1) + "\n")

    peel_steps = []
    for name, _, _ in AVATARS:
        peel_steps.append({"type": "effect", "effect": {"kind": "set_visible", "target": name, "value": True}})
        peel_steps.append({"type": "effect", "effect": {"kind": "set_casts_shadow", "target": name, "value": False}})
        peel_steps.append({"type": "wait", "seconds": 0.5})

    manifest = {
        "name": "andersen-demo",
        "tick_rate": 60,
        "fade_duration": 0.4,
        "chain_tolerance": 0.05,
        "notes": {
            "physical_stage": "narrator desk stage left, projection surface center",
            "performer_area": "capture volume offstage right",
            "audience": "frontal seating",
        },
        "clips_dir": "clips",
        "scene": {
            "stage": {"min": [-4.0, 0.0, -3.0], "max": [4.0, 4.0, 3.0]},
            "screens": [
                {
                    "name": "backdrop",
                    "normal": [0.0, 0.0, 1.0],
                    "offset": -2.0,
                    "bounds": [[-4.0, -0.2], [4.0, -0.2], [4.0, 3.2], [-4.0, 3.2]],
                    "translucency": 0.65,
                },
                {
                    "name": "scrim",
                    "normal": [0.0, 0.0, 1.0],
                    "offset": -2.8,
                    "bounds": [[-4.5, -0.2], [4.5, -0.2], [4.5, 3.6], [-4.5, 3.6]],
                    "translucency": 0.3,
                },
            ],
            "lights": [
                {"name": "key", "position": [0.0, 2.2, 2.5], "enabled": True},
                {"name": "rim", "position": [-3.0, 2.8, 1.0], "enabled": False},
            ],
            "camera": {
                "kind": "orthographic",
                "position": [0.0, 1.4, 9.0],
                "look": [0.0, 0.0, -1.0],
                "up": [0.0, 1.0, 0.0],
                "viewport": [1280, 720],
                "view_height": 5.0,
            },
        },
        "avatars": [
            {
                "id": name,
                "skeleton_from": "i0",
                "mesh_file": "meshes/humanoid.json",
                "position": [x, 0.9, 0.0],
                "yaw_degrees": 0.0,
                "visible": False,
                "casts_shadow": True,
                "tint": tint,
                "initial_idle": "i0",
                **(
                    {
                        "retarget": {
                            "source_rig": "rigs/neuron59.bvh",
                            "unit_scale": 0.01,
                            "root_translation_scale": 1.0,
                            "entries": RETARGET_ENTRIES,
                        }
                    }
                    if name == "princess"
                    else {}
                ),
            }
            for name, x, tint in AVATARS
        ],
        "cues": [
            {"label": "house-shadows", "steps": [
                {"type": "effect", "effect": {"kind": "set_translucency", "target": "backdrop", "value": 0.8}},
            ]},
            {"label": "peel-the-shadows", "steps": peel_steps},
            {"label": "bows", "steps": [
                {"type": "trigger", "oav": "scholar", "action": "a1"},
                {"type": "wait", "seconds": 0.3},
                {"type": "trigger", "oav": "princess", "action": "a1"},
                {"type": "wait", "seconds": 0.3},
                {"type": "trigger", "oav": "shadow", "action": "a1"},
            ]},
            {"label": "waves", "steps": [
                {"type": "trigger", "oav": "princess", "action": "a2"},
                {"type": "trigger", "oav": "scholar", "action": "a2"},
            ]},
            {"label": "shadow-returns", "steps": [
                {"type": "trigger", "oav": "shadow", "action": "a2"},
                {"type": "wait", "seconds": 1.0},
                {"type": "trigger", "oav": "shadow", "action": "a3"},
            ]},
            {"label": "dim-the-backdrop", "steps": [
                {"type": "effect", "effect": {"kind": "set_translucency", "target": "backdrop", "value": 0.35}},
                {"type": "effect", "effect": {"kind": "move_light", "target": "key", "value": [0.5, 2.0, 4.0]}},
            ]},
            {"label": "rest", "steps": [
                {"type": "trigger", "oav": "princess", "action": "a3"},
                {"type": "trigger", "oav": "scholar", "action": "a3"},
            ]},
        ],
    }
    (OUT / "show.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
