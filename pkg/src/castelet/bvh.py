"""BVH file parsing, canonical serialization, and pose conversion.

The dialect is the de-facto standard: HIERARCHY with nested ROOT/JOINT/End
Site blocks, then MOTION with one whitespace-separated channel row per
line. The hierarchy section is parsed from a token stream, so tabs,
spaces, and brace placement are all interchangeable; motion rows stay
line-based so a short or long row can be reported by line number.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from . import quat
from .clips import Take
from .errors import BvhParseError, ConfigurationError
from .skeleton import Joint, Pose, Skeleton

CHANNEL_LABELS = (
    "Xposition",
    "Yposition",
    "Zposition",
    "Xrotation",
    "Yrotation",
    "Zrotation",
)

DEFAULT_UNIT_SCALE = 0.01  # mocap exports are conventionally centimeters


@dataclass
class BvhDocument:
    """Parsed file: hierarchy plus raw channel rows in source units/degrees."""

    skeleton: Skeleton
    frame_time: float
    frames: np.ndarray  # (frame_count, channel_count)

    @property
    def channel_count(self) -> int:
        return sum(len(j.channel_spec) for j in self.skeleton.joints)

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]


class _Tokens:
    def __init__(self, lines, start_line=1):
        self.items = []  # (token, 1-based line)
        for lineno, line in enumerate(lines, start_line):
            for tok in line.split():
                self.items.append((tok, lineno))
        self.pos = 0

    def peek(self):
        return self.items[self.pos] if self.pos < len(self.items) else (None, self.last_line())

    def next(self, expect=None):
        tok, line = self.peek()
        if tok is None:
            raise BvhParseError("unexpected end of input", line)
        if expect is not None and tok != expect:
            raise BvhParseError(f"expected {expect!r}, found {tok!r}", line)
        self.pos += 1
        return tok, line

    def next_float(self):
        tok, line = self.next()
        try:
            return float(tok), line
        except ValueError:
            raise BvhParseError(f"expected a number, found {tok!r}", line) from None

    def next_int(self):
        tok, line = self.next()
        try:
            return int(tok), line
        except ValueError:
            raise BvhParseError(f"expected an integer, found {tok!r}", line) from None

    def last_line(self):
        return self.items[-1][1] if self.items else 1


def _parse_offset(tokens) -> np.ndarray:
    tokens.next(expect="OFFSET")
    return np.array([tokens.next_float()[0] for _ in range(3)])


def _parse_joint_block(tokens, name, parent, joints, end_sites):
    index = len(joints)
    tokens.next(expect="{")
    offset = _parse_offset(tokens)
    tok, line = tokens.peek()
    channels: tuple[str, ...] = ()
    if tok == "CHANNELS":
        tokens.next()
        count, cline = tokens.next_int()
        labels = []
        for _ in range(count):
            label, lline = tokens.next()
            if label not in CHANNEL_LABELS:
                raise BvhParseError(f"unknown channel label {label!r}", lline)
            labels.append(label)
        channels = tuple(labels)
    joints.append(Joint(name, parent, offset, channels))
    while True:
        tok, line = tokens.peek()
        if tok == "JOINT":
            tokens.next()
            child_name, _ = tokens.next()
            _parse_joint_block(tokens, child_name, index, joints, end_sites)
        elif tok == "End":
            tokens.next()
            site_tok, sline = tokens.next()
            if site_tok.lower() != "site":
                raise BvhParseError(f"expected 'Site' after 'End', found {site_tok!r}", sline)
            tokens.next(expect="{")
            end_sites[index] = _parse_offset(tokens)
            tokens.next(expect="}")
        elif tok == "}":
            tokens.next()
            return
        else:
            raise BvhParseError(f"unexpected token {tok!r} in joint block", line)


def parse_hierarchy(text: str) -> Skeleton:
    """Parse a HIERARCHY block (with or without a trailing MOTION section)."""
    lines = text.splitlines()
    skeleton, _ = _parse_hierarchy_lines(lines)
    return skeleton


def _parse_hierarchy_lines(lines) -> tuple[Skeleton, int]:
    """Returns the skeleton and the line index where MOTION may start."""
    hier_line = None
    for i, line in enumerate(lines):
        if line.strip() == "HIERARCHY":
            hier_line = i
            break
        if line.strip():
            raise BvhParseError("expected HIERARCHY keyword", i + 1)
    if hier_line is None:
        raise BvhParseError("missing HIERARCHY keyword", 1)
    # tokenize until the MOTION line (if any)
    motion_line = None
    for i in range(hier_line + 1, len(lines)):
        if lines[i].strip() == "MOTION":
            motion_line = i
            break
    end = motion_line if motion_line is not None else len(lines)
    tokens = _Tokens(lines[hier_line + 1 : end], start_line=hier_line + 2)
    tok, line = tokens.next()
    if tok != "ROOT":
        raise BvhParseError(f"expected ROOT, found {tok!r}", line)
    root_name, _ = tokens.next()
    joints: list[Joint] = []
    end_sites: dict[int, np.ndarray] = {}
    _parse_joint_block(tokens, root_name, None, joints, end_sites)
    tok, line = tokens.peek()
    if tok is not None:
        raise BvhParseError(f"unexpected token {tok!r} after hierarchy", line)
    try:
        skeleton = Skeleton(joints, end_sites)
    except ConfigurationError as exc:
        raise BvhParseError(str(exc), line) from exc
    return skeleton, (motion_line if motion_line is not None else len(lines))


_FRAMES_RE = re.compile(r"^Frames:\s*(\d+)$")
_FRAME_TIME_RE = re.compile(r"^Frame\s+Time:\s*([0-9.eE+-]+)$")


def parse_bvh(text: str) -> BvhDocument:
    """Parse a complete BVH document; errors carry 1-based line numbers."""
    lines = text.splitlines()
    skeleton, motion_line = _parse_hierarchy_lines(lines)
    if motion_line >= len(lines) or lines[motion_line].strip() != "MOTION":
        raise BvhParseError("missing MOTION keyword", min(motion_line + 1, len(lines)))
    channel_count = sum(len(j.channel_spec) for j in skeleton.joints)

    i = motion_line + 1
    frame_count = None
    frame_time = None
    while i < len(lines) and (frame_count is None or frame_time is None):
        stripped = lines[i].strip()
        if not stripped:
            i += 1
            continue
        m = _FRAMES_RE.match(stripped)
        if m and frame_count is None:
            frame_count = int(m.group(1))
            i += 1
            continue
        m = _FRAME_TIME_RE.match(stripped)
        if m and frame_time is None:
            frame_time = float(m.group(1))
            i += 1
            continue
        raise BvhParseError(f"expected Frames:/Frame Time: header, found {stripped!r}", i + 1)
    if frame_count is None:
        raise BvhParseError("missing 'Frames:' line", i)
    if frame_time is None:
        raise BvhParseError("missing 'Frame Time:' line", i)
    if frame_time <= 0.0:
        raise BvhParseError(f"frame time must be positive, got {frame_time}", i)
    if frame_count < 1:
        raise BvhParseError("frame count must be at least 1", i)

    rows = np.empty((frame_count, channel_count))
    row = 0
    while i < len(lines):
        stripped = lines[i].strip()
        if not stripped:
            i += 1
            continue
        if row >= frame_count:
            raise BvhParseError(
                f"declared Frames: {frame_count} but more motion rows follow", i + 1
            )
        parts = stripped.split()
        if len(parts) != channel_count:
            raise BvhParseError(
                f"motion row has {len(parts)} values, hierarchy declares {channel_count} channels",
                i + 1,
            )
        try:
            rows[row] = [float(p) for p in parts]
        except ValueError:
            raise BvhParseError("non-numeric value in motion row", i + 1) from None
        row += 1
        i += 1
    if row != frame_count:
        raise BvhParseError(
            f"declared Frames: {frame_count} but found only {row} motion rows", len(lines)
        )
    return BvhDocument(skeleton, frame_time, rows)


def _format_vec(v) -> str:
    return " ".join(f"{float(c):.6f}" for c in v)


def _write_joint(out, skeleton, children, index, depth):
    joint = skeleton.joints[index]
    tag = "ROOT" if joint.parent is None else "JOINT"
    pad = "\t" * depth
    out.append(f"{pad}{tag} {joint.name}")
    out.append(f"{pad}{{")
    inner = "\t" * (depth + 1)
    out.append(f"{inner}OFFSET {_format_vec(joint.offset)}")
    if joint.channel_spec:
        out.append(f"{inner}CHANNELS {len(joint.channel_spec)} {' '.join(joint.channel_spec)}")
    if index in skeleton.end_sites:
        out.append(f"{inner}End Site")
        out.append(f"{inner}{{")
        out.append(f"{inner}\tOFFSET {_format_vec(skeleton.end_sites[index])}")
        out.append(f"{inner}}}")
    for child in children[index]:
        _write_joint(out, skeleton, children, child, depth + 1)
    out.append(f"{pad}}}")


def serialize_bvh(doc: BvhDocument) -> str:
    """Emit canonical BVH text: tab indentation, 6-decimal numbers."""
    children: list[list[int]] = [[] for _ in doc.skeleton.joints]
    for i, joint in enumerate(doc.skeleton.joints):
        if joint.parent is not None:
            children[joint.parent].append(i)
    out = ["HIERARCHY"]
    _write_joint(out, doc.skeleton, children, 0, 0)
    out.append("MOTION")
    out.append(f"Frames: {doc.frame_count}")
    out.append(f"Frame Time: {doc.frame_time:.6f}")
    for row in doc.frames:
        out.append(" ".join(f"{v:.6f}" for v in row))
    return "\n".join(out) + "\n"


@dataclass
class _JointChannels:
    """Precomputed row slots for one joint's channels."""

    rot_order: str
    rot_slots: list[int]
    pos_slots: list[int]  # x, y, z row positions, -1 where absent


def channel_layout(skeleton: Skeleton) -> list[_JointChannels]:
    """Per-joint rotation order and row positions, validated once."""
    layout = []
    base = 0
    for joint in skeleton.joints:
        order = ""
        rot_slots = []
        pos_slots = [-1, -1, -1]
        for k, label in enumerate(joint.channel_spec):
            if label not in CHANNEL_LABELS:
                raise ConfigurationError(f"unsupported channel label {label!r}")
            axis = "XYZ".index(label[0])
            if label.endswith("rotation"):
                order += label[0]
                rot_slots.append(base + k)
            else:
                pos_slots[axis] = base + k
        if order and order not in quat.EULER_ORDERS:
            raise ConfigurationError(
                f"joint {joint.name!r} rotation channels {order} are not a proper Euler order"
            )
        layout.append(_JointChannels(order, rot_slots, pos_slots))
        base += len(joint.channel_spec)
    return layout


def row_to_pose(row, layout, unit_scale: float) -> Pose:
    """One channel row -> Pose; translations scaled, rotations to quaternions."""
    values = row.tolist() if isinstance(row, np.ndarray) else list(row)
    n = len(layout)
    quats = np.empty((n, 4))
    for j, jc in enumerate(layout):
        if jc.rot_order:
            angles = [values[s] for s in jc.rot_slots]
            quats[j] = quat.from_euler_tuple(angles, jc.rot_order)
        else:
            quats[j] = (1.0, 0.0, 0.0, 0.0)
    root = layout[0]
    tx = values[root.pos_slots[0]] if root.pos_slots[0] >= 0 else 0.0
    ty = values[root.pos_slots[1]] if root.pos_slots[1] >= 0 else 0.0
    tz = values[root.pos_slots[2]] if root.pos_slots[2] >= 0 else 0.0
    return Pose(np.array([tx, ty, tz]) * unit_scale, quats)


def frames_to_take(
    doc: BvhDocument, unit_scale: float = DEFAULT_UNIT_SCALE, take_id: str = "take"
) -> Take:
    """Convert motion rows into a scene-unit take.

    Non-root position channels are ignored: poses carry a root translation
    only, and joint offsets dominate on production rigs.
    """
    layout = channel_layout(doc.skeleton)
    poses = [row_to_pose(row, layout, unit_scale) for row in doc.frames]
    return Take(take_id, doc.skeleton.scaled(unit_scale), poses, doc.frame_time)


def take_to_document(take: Take, unit_scale: float = DEFAULT_UNIT_SCALE) -> BvhDocument:
    """Inverse of frames_to_take for recording export.

    Joints without rotation channels (or a root without position channels)
    are given standard ones so the motion survives the trip to disk.
    """
    joints = []
    for i, joint in enumerate(take.skeleton.joints):
        spec = joint.channel_spec
        if i == 0:
            if not any(l.endswith("position") for l in spec):
                spec = ("Xposition", "Yposition", "Zposition") + tuple(
                    l for l in spec if l.endswith("rotation")
                )
            if not any(l.endswith("rotation") for l in spec):
                spec = tuple(spec) + ("Zrotation", "Xrotation", "Yrotation")
        elif not spec:
            spec = ("Zrotation", "Xrotation", "Yrotation")
        joints.append(
            Joint(joint.name, joint.parent, np.asarray(joint.offset) / unit_scale, tuple(spec))
        )
    skeleton = Skeleton(
        joints, {i: np.asarray(o) / unit_scale for i, o in take.skeleton.end_sites.items()}
    )
    layout = channel_layout(skeleton)
    channel_count = sum(len(j.channel_spec) for j in joints)
    rows = np.zeros((take.sample_count, channel_count))
    for f, pose in enumerate(take.poses):
        row = rows[f]
        for j, jc in enumerate(layout):
            if jc.rot_order:
                angles = _quat_to_euler(pose.joint_rotations[j], jc.rot_order)
                for slot, angle in zip(jc.rot_slots, angles):
                    row[slot] = angle
        root = layout[0]
        for axis in range(3):
            if root.pos_slots[axis] >= 0:
                row[root.pos_slots[axis]] = pose.root_translation[axis] / unit_scale
    return BvhDocument(skeleton, take.frame_time, rows)


def _quat_to_euler(q, order: str) -> list[float]:
    """Unit quaternion -> degrees for R = R_a(θ0)·R_b(θ1)·R_c(θ2), axes per `order`."""
    import math

    m = quat.to_matrix(np.asarray(q))[0]
    i, j, k = ("XYZ".index(ch) for ch in order)
    eps = 1.0 if (j - i) % 3 == 1 else -1.0  # cyclic vs anticyclic axis triple
    sb = max(-1.0, min(1.0, eps * m[i, k]))
    b = math.asin(sb)
    if abs(sb) < 1.0 - 1e-9:
        a = math.atan2(-eps * m[j, k], m[k, k])
        c = math.atan2(-eps * m[i, j], m[i, i])
    else:
        # gimbal lock: only a ± c survives; put it all in the first angle
        a = math.atan2(sb * m[j, i], m[j, j])
        c = 0.0
    return [math.degrees(a), math.degrees(b), math.degrees(c)]
