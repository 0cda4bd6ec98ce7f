"""BVH parse/serialize round trips and pose conversion.

The reference player at the bottom is a self-contained BVH reader and
matrix-based FK used as an oracle; it shares no code with the library.
"""
from __future__ import annotations

import math
import re
from pathlib import Path

import numpy as np
import pytest

from castelet.bvh import (
    BvhDocument,
    frames_to_take,
    parse_bvh,
    parse_hierarchy,
    serialize_bvh,
    take_to_document,
)
from castelet.errors import BvhParseError
from castelet.skeleton import forward_kinematics

FIXTURES = Path(__file__).parent / "fixtures"

MINIMAL = """HIERARCHY
ROOT root
{
    OFFSET 0.0 0.0 0.0
    CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation
    End Site
    {
        OFFSET 0.0 1.0 0.0
    }
}
MOTION
Frames: 1
Frame Time: 0.033333
0.0 0.0 0.0 0.0 0.0 0.0
"""


def test_minimal_document():
    doc = parse_bvh(MINIMAL)
    assert len(doc.skeleton) == 1
    assert doc.skeleton.joints[0].name == "root"
    assert doc.skeleton.joints[0].channel_spec == (
        "Xposition", "Yposition", "Zposition", "Zrotation", "Xrotation", "Yrotation",
    )
    assert 0 in doc.skeleton.end_sites
    assert doc.frame_count == 1 and doc.channel_count == 6
    take = frames_to_take(doc, unit_scale=1.0)
    assert np.allclose(take.poses[0].root_translation, 0)
    assert np.allclose(take.poses[0].joint_rotations, [[1, 0, 0, 0]])


def test_tabs_and_flat_braces_accepted():
    squashed = MINIMAL.replace("\n{", " {").replace("    ", "\t")
    doc = parse_bvh(squashed)
    assert len(doc.skeleton) == 1 and doc.frame_count == 1


def test_frame_count_mismatch_names_line():
    text = MINIMAL.replace("Frames: 1", "Frames: 2")
    with pytest.raises(BvhParseError) as err:
        parse_bvh(text)
    assert "2" in str(err.value) and err.value.line is not None

    extra = MINIMAL + "0.0 0.0 0.0 0.0 0.0 0.0\n"
    with pytest.raises(BvhParseError) as err:
        parse_bvh(extra)
    assert err.value.line == 15  # the surplus row


def test_row_length_mismatch_names_line():
    bad = MINIMAL.replace("0.0 0.0 0.0 0.0 0.0 0.0", "0.0 0.0 0.0 0.0 0.0")
    with pytest.raises(BvhParseError) as err:
        parse_bvh(bad)
    assert err.value.line == 14


def test_non_numeric_token_rejected():
    bad = MINIMAL.replace("0.0 0.0 0.0 0.0 0.0 0.0", "0.0 0.0 oops 0.0 0.0 0.0")
    with pytest.raises(BvhParseError):
        parse_bvh(bad)


def test_missing_keywords_rejected():
    with pytest.raises(BvhParseError):
        parse_bvh(MINIMAL.replace("HIERARCHY", "HIGHERARCHY"))
    with pytest.raises(BvhParseError):
        parse_bvh(MINIMAL.split("MOTION")[0])


def test_neuron_fixture_hand_counted_structure():
    doc = parse_bvh((FIXTURES / "neuron59.bvh").read_text())
    # counted on the committed fixture: full body plus 15 joints per hand
    assert len(doc.skeleton) == 59
    assert doc.channel_count == 6 + 58 * 3 == 180
    assert doc.frame_count == 120
    names = [j.name for j in doc.skeleton.joints]
    assert names[0] == "Hips"
    assert "RightInHandIndex" in names and "LeftHandPinky3" in names
    assert len(doc.skeleton.end_sites) == 13  # head + 2 feet + 10 fingertips


@pytest.mark.parametrize("name", ["neuron59", "biped17", "chain5"])
def test_round_trip_drift_and_fixed_point(name):
    text = (FIXTURES / name).with_suffix(".bvh").read_text()
    doc = parse_bvh(text)
    once = serialize_bvh(doc)
    doc2 = parse_bvh(once)
    assert [j.name for j in doc2.skeleton.joints] == [j.name for j in doc.skeleton.joints]
    assert [j.parent for j in doc2.skeleton.joints] == [j.parent for j in doc.skeleton.joints]
    assert np.max(np.abs(doc2.frames - doc.frames)) < 1e-4
    assert abs(doc2.frame_time - doc.frame_time) < 1e-6
    # one round trip reaches the fixed point
    assert serialize_bvh(doc2) == once


def test_frame_time_echo():
    doc = parse_bvh(MINIMAL)
    assert "Frame Time: 0.033333" in serialize_bvh(doc)


def test_frames_to_take_zero_rows_are_identity():
    doc = parse_bvh(MINIMAL)
    take = frames_to_take(doc)
    assert np.allclose(take.poses[0].joint_rotations, [[1, 0, 0, 0]])
    assert np.allclose(take.poses[0].root_translation, 0)


def test_frames_to_take_single_channel():
    text = MINIMAL.replace(
        "0.0 0.0 0.0 0.0 0.0 0.0", "0.0 0.0 0.0 90.0 0.0 0.0"
    )
    take = frames_to_take(parse_bvh(text), unit_scale=1.0)
    q = take.poses[0].joint_rotations[0]
    assert np.allclose(q, [math.sqrt(2) / 2, 0, 0, math.sqrt(2) / 2], atol=1e-12)


def test_frames_to_take_scales_translations():
    text = MINIMAL.replace(
        "0.0 0.0 0.0 0.0 0.0 0.0", "100.0 200.0 300.0 0.0 0.0 0.0"
    )
    take = frames_to_take(parse_bvh(text))  # default 0.01 scale
    assert np.allclose(take.poses[0].root_translation, [1.0, 2.0, 3.0])
    assert take.frame_time == pytest.approx(0.033333)


def test_parse_hierarchy_alone():
    sk = parse_hierarchy(MINIMAL.split("MOTION")[0])
    assert len(sk) == 1


@pytest.mark.parametrize("name", ["biped17", "chain5"])
def test_take_to_document_round_trips_poses(name):
    doc = parse_bvh((FIXTURES / name).with_suffix(".bvh").read_text())
    take = frames_to_take(doc, unit_scale=1.0)
    doc2 = take_to_document(take, unit_scale=1.0)
    take2 = frames_to_take(doc2, unit_scale=1.0)
    for a, b in zip(take.poses, take2.poses):
        assert np.allclose(a.root_translation, b.root_translation, atol=1e-9)
        dots = np.abs(np.sum(a.joint_rotations * b.joint_rotations, axis=1))
        assert np.all(dots > 1.0 - 1e-9)


# ----------------------------------------------------------------- oracle


class _RefJoint:
    def __init__(self, name, parent, offset, channels):
        self.name, self.parent, self.offset, self.channels = name, parent, offset, channels


def _ref_parse(text):
    """Minimal independent BVH reader (whitespace-tokenized, stack-based)."""
    toks = text.split()
    pos = 0

    def nxt():
        nonlocal pos
        pos += 1
        return toks[pos - 1]

    joints = []
    stack = []
    assert nxt() == "HIERARCHY"
    while True:
        t = nxt()
        if t in ("ROOT", "JOINT"):
            name = nxt()
            parent = stack[-1] if stack else None
            assert nxt() == "{"
            assert nxt() == "OFFSET"
            off = [float(nxt()) for _ in range(3)]
            assert nxt() == "CHANNELS"
            n = int(nxt())
            ch = [nxt() for _ in range(n)]
            joints.append(_RefJoint(name, parent, off, ch))
            stack.append(len(joints) - 1)
        elif t == "End":
            assert nxt() == "Site"
            assert nxt() == "{"
            assert nxt() == "OFFSET"
            [nxt() for _ in range(3)]
            assert nxt() == "}"
        elif t == "}":
            stack.pop()
            if not stack:
                break
    assert nxt() == "MOTION"
    assert nxt() == "Frames:"
    frames = int(nxt())
    assert nxt() == "Frame"
    assert nxt().startswith("Time:")
    frame_time = float(nxt())
    rows = []
    for _ in range(frames):
        rows.append([float(nxt()) for _ in range(sum(len(j.channels) for j in joints))])
    return joints, rows, frame_time


def _axis_m(axis, deg):
    a = math.radians(deg)
    c, s = math.cos(a), math.sin(a)
    if axis == "X":
        return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])
    if axis == "Y":
        return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def _ref_positions(joints, row, scale):
    """4x4 world transforms of one frame, channel values consumed in order."""
    world = []
    out = []
    i = 0
    for j in joints:
        local = np.eye(4)
        local[:3, 3] = j.offset
        trans = np.zeros(3)
        rot = np.eye(3)
        for ch in j.channels:
            v = row[i]
            i += 1
            if ch.endswith("position"):
                trans["XYZ".index(ch[0])] = v
            else:
                rot = rot @ _axis_m(ch[0], v)
        if j.parent is None:
            local[:3, 3] = trans  # root offset is a rest hint only
        local[:3, :3] = rot
        m = local if j.parent is None else world[j.parent] @ local
        world.append(m)
        out.append(m[:3, 3] * scale)
    return np.array(out)


@pytest.mark.parametrize("name", ["neuron59", "chain5"])
def test_first_frame_fk_matches_reference_player(name):
    text = (FIXTURES / name).with_suffix(".bvh").read_text()
    doc = parse_bvh(text)
    take = frames_to_take(doc, unit_scale=0.01)
    got = forward_kinematics(take.skeleton, take.poses[0]).positions

    joints, rows, _ = _ref_parse(text)
    expected = _ref_positions(joints, rows[0], 0.01)
    assert np.max(np.linalg.norm(got - expected, axis=1)) < 1e-3
