"""Takes, animation clips, take splitting, and palindromic idle playback.

A take is a raw uniformly-sampled recording; clips are its split products.
Uniform sampling is guaranteed by both producers (motion files and the
fixed-timestep recorder), and keeping timestamps implicit (index *
frame_time) makes split/reassemble exact instead of accumulating float
error.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ChainError, ContractError, SplitError
from .skeleton import Pose, Skeleton, lerp_pose, pose_distance

# relative index tolerance when deciding a sample time lands on a knot
_KNOT_SNAP = 1e-9


class _Sampled:
    """Shared sampling behavior for takes and clips."""

    poses: list[Pose]
    frame_time: float

    @property
    def sample_count(self) -> int:
        return len(self.poses)

    @property
    def duration(self) -> float:
        return (len(self.poses) - 1) * self.frame_time

    def timestamps(self) -> list[float]:
        return [i * self.frame_time for i in range(len(self.poses))]

    def _check(self):
        if self.frame_time <= 0.0:
            raise ContractError(f"frame_time must be positive, got {self.frame_time}")
        if not self.poses:
            raise ContractError("at least one sample required")
        counts = {p.joint_count for p in self.poses}
        if len(counts) != 1:
            raise ContractError(f"inconsistent pose joint counts {sorted(counts)}")


@dataclass
class Take(_Sampled):
    """Raw recorded performance, later split into idle/action/idle clips."""

    id: str
    skeleton: Skeleton
    poses: list[Pose]
    frame_time: float

    def __post_init__(self):
        self._check()
        if self.poses[0].joint_count != len(self.skeleton):
            raise ContractError("take poses do not match the skeleton")


@dataclass
class AnimationClip(_Sampled):
    """Either an action (bounded by idles) or an idle hold."""

    id: str
    kind: str  # "action" | "idle"
    skeleton: Skeleton
    poses: list[Pose]
    frame_time: float
    start_idle_id: str | None = None
    end_idle_id: str | None = None

    def __post_init__(self):
        self._check()
        if self.kind not in ("action", "idle"):
            raise ContractError(f"unknown clip kind {self.kind!r}")
        if len(self.poses) < 2:
            raise ContractError(f"clip {self.id!r} needs at least 2 samples for duration > 0")
        if self.kind == "idle" and (self.start_idle_id or self.end_idle_id):
            raise ContractError(f"idle clip {self.id!r} must not carry idle references")
        if self.kind == "action" and not (self.start_idle_id and self.end_idle_id):
            raise ContractError(f"action clip {self.id!r} must reference its start and end idles")

    @property
    def first_pose(self) -> Pose:
        return self.poses[0]

    @property
    def last_pose(self) -> Pose:
        return self.poses[-1]


def split_take(take: Take, t1: float, t2: float, ids: tuple[str, str, str]):
    """Cut a take into (starting idle, action, ending idle) at t1 < t2.

    Cut times snap to the nearest sample so the three products partition the
    take exactly, with the cut samples duplicated into both neighbors. Each
    product is re-based to start at 0.
    """
    n = take.sample_count
    i1 = int(round(t1 / take.frame_time))
    i2 = int(round(t2 / take.frame_time))
    # 0 < i1 < i2 < n-1 also guarantees every segment keeps >= 2 samples
    if not (0 < i1 < i2 < n - 1):
        raise SplitError(
            f"cut indices {i1}, {i2} out of range for a take of {n} samples "
            f"(need 0 < t1 < t2 < duration with 2+ samples per segment)"
        )
    idle_start_id, action_id, idle_end_id = ids
    ft = take.frame_time
    idle_start = AnimationClip(idle_start_id, "idle", take.skeleton, take.poses[: i1 + 1], ft)
    action = AnimationClip(
        action_id,
        "action",
        take.skeleton,
        take.poses[i1 : i2 + 1],
        ft,
        start_idle_id=idle_start_id,
        end_idle_id=idle_end_id,
    )
    idle_end = AnimationClip(idle_end_id, "idle", take.skeleton, take.poses[i2:], ft)
    return idle_start, action, idle_end


def concat_clips(take_id: str, parts: list[AnimationClip]) -> Take:
    """Rebuild a take from consecutive clips, dropping duplicated cut samples."""
    if not parts:
        raise ContractError("nothing to concatenate")
    poses = list(parts[0].poses)
    for clip in parts[1:]:
        poses.extend(clip.poses[1:])
    return Take(take_id, parts[0].skeleton, poses, parts[0].frame_time)


def sample_clip(clip: AnimationClip, t: float) -> Pose:
    """Pose at time t, clamped to [0, duration], linear between samples."""
    if t < 0.0:
        t = 0.0
    n = len(clip.poses)
    u = t / clip.frame_time
    k = int(u)
    if k >= n - 1:
        return clip.poses[n - 1]
    w = u - k
    if w < _KNOT_SNAP:
        return clip.poses[k]
    if w > 1.0 - _KNOT_SNAP:
        return clip.poses[k + 1]
    return lerp_pose(clip.poses[k], clip.poses[k + 1], w)


def sample_palindrome(clip: AnimationClip, t: float) -> Pose:
    """Ping-pong sampling: forward over [0, D], mirrored back over [D, 2D].

    Continuous and 2D-periodic even when the idle's first and last poses
    differ, which is what removes the wrap jump of naive looping.
    """
    if clip.kind != "idle":
        raise ContractError(f"palindrome playback is for idle clips, got kind {clip.kind!r}")
    if t < 0.0:
        t = 0.0
    d = clip.duration
    u = math.fmod(t, 2.0 * d)
    s = u if u <= d else 2.0 * d - u
    return sample_clip(clip, s)


@dataclass
class ChainViolation:
    kind: str  # "idle-mismatch" | "boundary-distance" | "unresolved"
    message: str
    distance: float | None = None


@dataclass
class ChainReport:
    violations: list[ChainViolation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def lines(self) -> list[str]:
        return [v.message for v in self.violations]


class ClipLibrary:
    """Clips by id plus the chain edges implied by start/end idle references."""

    def __init__(self, clips: list[AnimationClip] | None = None):
        self.clips: dict[str, AnimationClip] = {}
        for clip in clips or []:
            self.add(clip)

    def add(self, clip: AnimationClip):
        if clip.id in self.clips:
            raise ChainError(f"duplicate clip id {clip.id!r}")
        self.clips[clip.id] = clip

    def __contains__(self, clip_id: str) -> bool:
        return clip_id in self.clips

    def get(self, clip_id: str) -> AnimationClip:
        try:
            return self.clips[clip_id]
        except KeyError:
            raise ChainError(f"unknown clip id {clip_id!r}") from None

    def actions(self) -> list[AnimationClip]:
        return [c for c in self.clips.values() if c.kind == "action"]

    def idles(self) -> list[AnimationClip]:
        return [c for c in self.clips.values() if c.kind == "idle"]

    def _check_action_boundaries(self, clip: AnimationClip, tolerance: float) -> list[ChainViolation]:
        found = []
        for ref, which in ((clip.start_idle_id, "start"), (clip.end_idle_id, "end")):
            if ref not in self.clips:
                found.append(
                    ChainViolation(
                        "unresolved",
                        f"action {clip.id!r} references missing {which} idle {ref!r}",
                    )
                )
                continue
            idle = self.clips[ref]
            if idle.kind != "idle":
                found.append(
                    ChainViolation(
                        "unresolved",
                        f"action {clip.id!r} {which} idle {ref!r} is not an idle clip",
                    )
                )
                continue
            if which == "start":
                dist = pose_distance(clip.first_pose, idle.last_pose)
            else:
                dist = pose_distance(clip.last_pose, idle.first_pose)
            if dist > tolerance:
                found.append(
                    ChainViolation(
                        "boundary-distance",
                        f"action {clip.id!r} {which} boundary is {dist:.6f} from idle "
                        f"{ref!r} (tolerance {tolerance})",
                        distance=dist,
                    )
                )
        return found

    def validate(self, tolerance: float) -> ChainReport:
        """Check every action's idle references and boundary pose distances."""
        report = ChainReport()
        for clip in self.actions():
            report.violations.extend(self._check_action_boundaries(clip, tolerance))
        return report


def validate_chain(library: ClipLibrary, sequence: list[str], tolerance: float) -> ChainReport:
    """Verify a playback sequence of action ids chains through shared idles."""
    report = ChainReport()
    actions = [library.get(a) for a in sequence]
    for clip in actions:
        if clip.kind != "action":
            raise ChainError(f"clip {clip.id!r} in sequence is not an action")
    for prev, nxt in zip(actions, actions[1:]):
        if prev.end_idle_id != nxt.start_idle_id:
            report.violations.append(
                ChainViolation(
                    "idle-mismatch",
                    f"action {prev.id!r} ends in idle {prev.end_idle_id!r} but "
                    f"{nxt.id!r} starts from idle {nxt.start_idle_id!r}",
                )
            )
    for clip in actions:
        report.violations.extend(library._check_action_boundaries(clip, tolerance))
    return report
