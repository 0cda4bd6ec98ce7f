"""Rotation-copy retargeting from a mocap skeleton onto a silhouette rig.

Silhouette rigs are authored to mirror the capture rest pose, so plain
rotation transport with optional per-joint constant offsets is enough;
unmapped rig joints simply hold their rest rotation (flat shapes rarely
keep fingers or toes).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import quat
from .errors import BindingError, ContractError
from .skeleton import Pose, Skeleton


@dataclass
class MapEntry:
    source_joint: str
    target_joint: str
    rotation_offset: np.ndarray = field(default_factory=lambda: quat.IDENTITY.copy())


@dataclass
class RetargetMap:
    entries: list[MapEntry]
    root_translation_scale: float = 1.0

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.target_joint in seen:
                raise BindingError(f"target joint {e.target_joint!r} mapped twice")
            seen.add(e.target_joint)

    @staticmethod
    def identity(skeleton: Skeleton) -> "RetargetMap":
        return RetargetMap([MapEntry(j.name, j.name) for j in skeleton.joints])


@dataclass
class BoundRetarget:
    source: Skeleton
    target: Skeleton
    pairs: list[tuple[int, int, np.ndarray]]  # (source idx, target idx, offset quat)
    root_translation_scale: float
    unmapped_target: list[str]  # held at rest
    unmapped_source: list[str]

    def report_lines(self) -> list[str]:
        lines = []
        if self.unmapped_target:
            lines.append(
                "target joints held at rest: " + ", ".join(self.unmapped_target)
            )
        if self.unmapped_source:
            lines.append("source joints unused: " + ", ".join(self.unmapped_source))
        return lines


def bind_map(map_: RetargetMap, source: Skeleton, target: Skeleton) -> BoundRetarget:
    """Resolve names to indices; unknown names fail loudly, gaps are reported."""
    pairs = []
    mapped_targets = set()
    mapped_sources = set()
    for entry in map_.entries:
        if entry.source_joint not in source.name_to_index:
            raise BindingError(f"source skeleton has no joint {entry.source_joint!r}")
        if entry.target_joint not in target.name_to_index:
            raise BindingError(f"target skeleton has no joint {entry.target_joint!r}")
        offset = np.asarray(entry.rotation_offset, dtype=float)
        pairs.append(
            (
                source.index_of(entry.source_joint),
                target.index_of(entry.target_joint),
                offset / np.linalg.norm(offset),
            )
        )
        mapped_targets.add(entry.target_joint)
        mapped_sources.add(entry.source_joint)
    unmapped_target = [j.name for j in target.joints if j.name not in mapped_targets]
    unmapped_source = [j.name for j in source.joints if j.name not in mapped_sources]
    return BoundRetarget(
        source, target, pairs, map_.root_translation_scale, unmapped_target, unmapped_source
    )


def retarget_pose(bound: BoundRetarget, source_pose: Pose) -> Pose:
    """Transport rotations pair by pair; unmapped target joints stay identity."""
    if source_pose.joint_count != len(bound.source):
        raise ContractError(
            f"source pose has {source_pose.joint_count} joints, skeleton "
            f"{len(bound.source)}"
        )
    rotations = quat.identity(len(bound.target))
    src = source_pose.joint_rotations
    for s_idx, t_idx, offset in bound.pairs:
        rotations[t_idx] = quat.multiply(offset, src[s_idx])
    rotations = quat.normalize(rotations)
    return Pose(source_pose.root_translation * bound.root_translation_scale, rotations)
