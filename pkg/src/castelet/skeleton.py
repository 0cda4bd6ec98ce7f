"""Joint hierarchies, poses, and flat silhouette skinning.

Everything here is a pure function over immutable value types; the engine
tick loop calls into this module every frame, so the hot paths (forward
kinematics, pose interpolation, skinning) are written to avoid per-joint
numpy overhead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import quat
from .errors import ConfigurationError, ContractError


@dataclass(frozen=True)
class Joint:
    name: str
    parent: int | None  # None for the root
    offset: np.ndarray  # (3,) scene units
    channel_spec: tuple[str, ...] = ()


class Skeleton:
    """Topologically ordered joint list (parents precede children).

    `end_sites` keeps BVH End Site offsets keyed by their leaf joint index;
    they carry no channels and do not appear in poses.
    """

    def __init__(self, joints: list[Joint], end_sites: dict[int, np.ndarray] | None = None):
        if not joints:
            raise ConfigurationError("skeleton needs at least one joint")
        roots = [i for i, j in enumerate(joints) if j.parent is None]
        if roots != [0]:
            raise ConfigurationError(f"expected exactly one root joint at index 0, found roots {roots}")
        names = set()
        for i, j in enumerate(joints):
            if j.parent is not None and not (0 <= j.parent < i):
                raise ConfigurationError(f"joint {j.name!r} parent index {j.parent} is not before index {i}")
            if j.name in names:
                raise ConfigurationError(f"duplicate joint name {j.name!r}")
            names.add(j.name)
            if not np.all(np.isfinite(j.offset)):
                raise ConfigurationError(f"joint {j.name!r} offset is not finite")
        self.joints = list(joints)
        self.end_sites = dict(end_sites or {})
        self.name_to_index = {j.name: i for i, j in enumerate(joints)}
        # flat views used by the FK inner loop
        self._parents = [(-1 if j.parent is None else j.parent) for j in joints]
        self._offsets = [tuple(float(c) for c in j.offset) for j in joints]

    def __len__(self):
        return len(self.joints)

    def index_of(self, name: str) -> int:
        try:
            return self.name_to_index[name]
        except KeyError:
            raise ConfigurationError(f"unknown joint name {name!r}") from None

    def scaled(self, factor: float) -> "Skeleton":
        """Copy with all offsets (and end sites) multiplied by `factor`."""
        joints = [
            Joint(j.name, j.parent, np.asarray(j.offset, dtype=float) * factor, j.channel_spec)
            for j in self.joints
        ]
        ends = {i: np.asarray(off, dtype=float) * factor for i, off in self.end_sites.items()}
        return Skeleton(joints, ends)

    def rest_positions(self) -> np.ndarray:
        """(J, 3) world joint positions of the identity pose.

        Matches forward_kinematics: the root offset is a rest hint only and
        never moves the root (motion data owns the root position).
        """
        pos = np.zeros((len(self.joints), 3))
        for i, j in enumerate(self.joints):
            if j.parent is not None:
                pos[i] = pos[j.parent] + j.offset
        return pos


@dataclass(frozen=True)
class Pose:
    """Root translation plus one unit quaternion per joint.

    Treated as immutable; functions return fresh poses instead of mutating.
    """

    root_translation: np.ndarray  # (3,)
    joint_rotations: np.ndarray  # (J, 4) unit quaternions, w first

    @staticmethod
    def identity(joint_count: int) -> "Pose":
        return Pose(np.zeros(3), quat.identity(joint_count))

    @property
    def joint_count(self) -> int:
        return self.joint_rotations.shape[0]

    def validate(self, skeleton: Skeleton) -> None:
        if self.joint_count != len(skeleton):
            raise ContractError(
                f"pose has {self.joint_count} rotations for a {len(skeleton)}-joint skeleton"
            )
        norms = np.linalg.norm(self.joint_rotations, axis=1)
        if not np.all(np.abs(norms - 1.0) <= 1e-6):
            worst = int(np.argmax(np.abs(norms - 1.0)))
            raise ContractError(f"joint {worst} quaternion norm {norms[worst]:.8f} is not unit")


@dataclass
class WorldTransforms:
    """Per-joint world rotation and position, in skeleton joint order."""

    rotations: np.ndarray  # (J, 4)
    positions: np.ndarray  # (J, 3)
    _matrices: np.ndarray | None = field(default=None, repr=False)

    def matrices(self) -> np.ndarray:
        """(J, 3, 3) rotation matrices, computed once per instance."""
        if self._matrices is None:
            self._matrices = quat.to_matrix(self.rotations)
        return self._matrices


def forward_kinematics(skeleton: Skeleton, pose: Pose) -> WorldTransforms:
    """world(root) = T(root_translation)·R(q0); world(j) = world(parent)·T(offset_j)·R(q_j).

    The inner loop runs on plain floats: per-joint numpy calls would
    dominate the tick budget on production rigs.
    """
    n = len(skeleton)
    if pose.joint_count != n:
        raise ContractError(f"pose joint count {pose.joint_count} != skeleton {n}")
    parents = skeleton._parents
    offsets = skeleton._offsets
    quats = pose.joint_rotations.tolist()
    rx, ry, rz = (float(c) for c in pose.root_translation)
    rot: list[tuple] = [()] * n
    pos: list[tuple] = [()] * n
    for j in range(n):
        qw, qx, qy, qz = quats[j]
        p = parents[j]
        if p < 0:
            rot[j] = (qw, qx, qy, qz)
            pos[j] = (rx, ry, rz)
            continue
        pw, px, py, pz = rot[p]
        rot[j] = (
            pw * qw - px * qx - py * qy - pz * qz,
            pw * qx + px * qw + py * qz - pz * qy,
            pw * qy - px * qz + py * qw + pz * qx,
            pw * qz + px * qy - py * qx + pz * qw,
        )
        ox, oy, oz = offsets[j]
        # rotate the local offset by the parent world rotation
        tx = 2.0 * (py * oz - pz * oy)
        ty = 2.0 * (pz * ox - px * oz)
        tz = 2.0 * (px * oy - py * ox)
        ppx, ppy, ppz = pos[p]
        pos[j] = (
            ppx + ox + pw * tx + py * tz - pz * ty,
            ppy + oy + pw * ty + pz * tx - px * tz,
            ppz + oz + pw * tz + px * ty - py * tx,
        )
    return WorldTransforms(np.array(rot), np.array(pos))


def lerp_pose(a: Pose, b: Pose, w: float) -> Pose:
    """Blend two poses: linear root translation, shortest-arc slerp per joint.

    Endpoints are exact: w=0 returns `a`, w=1 returns `b`.
    """
    if a.joint_count != b.joint_count:
        raise ContractError(f"pose joint counts differ: {a.joint_count} vs {b.joint_count}")
    if w <= 0.0:
        return a
    if w >= 1.0:
        return b
    root = (1.0 - w) * a.root_translation + w * b.root_translation
    return Pose(root, quat.slerp_batch(a.joint_rotations, b.joint_rotations, w))


def pose_distance(a: Pose, b: Pose) -> float:
    """Root euclidean distance plus per-joint geodesic angles (radians).

    Zero iff the poses are identical up to quaternion sign.
    """
    if a.joint_count != b.joint_count:
        raise ContractError(f"pose joint counts differ: {a.joint_count} vs {b.joint_count}")
    d = float(np.linalg.norm(a.root_translation - b.root_translation))
    return d + float(np.sum(quat.angle_batch(a.joint_rotations, b.joint_rotations)))


class SilhouetteMesh:
    """Flat polygon mesh in the rig-local z=0 plane with per-vertex skin weights.

    `polygons` are index loops (an outline plus optional holes). Weights must
    be nonnegative and sum to 1 per vertex; a vertex with no weight is a
    validation error, not a runtime fallback. Call `bind(skeleton)` before
    skinning.
    """

    def __init__(self, vertices, polygons, skin_weights):
        self.vertices = np.asarray(vertices, dtype=float).reshape(-1, 2)
        self.polygons = [list(p) for p in polygons]
        self.skin_weights = [list(ws) for ws in skin_weights]
        if len(self.skin_weights) != len(self.vertices):
            raise ConfigurationError(
                f"{len(self.vertices)} vertices but {len(self.skin_weights)} weight lists"
            )
        for poly in self.polygons:
            for idx in poly:
                if not (0 <= idx < len(self.vertices)):
                    raise ConfigurationError(f"polygon references vertex {idx} out of range")
        for v, ws in enumerate(self.skin_weights):
            total = 0.0
            for _, weight in ws:
                if weight < 0.0:
                    raise ConfigurationError(f"vertex {v} has a negative skin weight")
                total += weight
            if abs(total - 1.0) > 1e-6:
                raise ConfigurationError(f"vertex {v} weights sum to {total:.8f}, expected 1")
        self._skeleton: Skeleton | None = None
        self._vidx = None
        self._jidx = None
        self._w = None
        self._local = None

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    def bind(self, skeleton: Skeleton) -> "SilhouetteMesh":
        """Validate joint indices against `skeleton` and precompute bind-space data."""
        vidx, jidx, wts = [], [], []
        for v, ws in enumerate(self.skin_weights):
            for joint, weight in ws:
                if not (0 <= joint < len(skeleton)):
                    raise ConfigurationError(
                        f"vertex {v} skinned to joint {joint}, skeleton has {len(skeleton)}"
                    )
                vidx.append(v)
                jidx.append(joint)
                wts.append(weight)
        self._skeleton = skeleton
        self._vidx = np.asarray(vidx, dtype=np.intp)
        self._jidx = np.asarray(jidx, dtype=np.intp)
        self._w = np.asarray(wts, dtype=float)
        rest3 = np.zeros((len(self.vertices), 3))
        rest3[:, :2] = self.vertices
        # identity-pose bind: the inverse bind transform is a pure translation
        bind_pos = skeleton.rest_positions()
        self._local = rest3[self._vidx] - bind_pos[self._jidx]
        return self

    @property
    def bound_skeleton(self) -> Skeleton | None:
        return self._skeleton

    def skin(self, transforms: WorldTransforms) -> np.ndarray:
        return skin_silhouette(self, transforms)


def skin_silhouette(mesh: SilhouetteMesh, transforms: WorldTransforms) -> np.ndarray:
    """Linear-blend-skin the mesh: (V, 3) deformed vertex positions.

    Each vertex is the weight-blended image of its rest position under the
    joint world transforms composed with the inverse bind transforms.
    """
    if mesh._skeleton is None:
        raise ContractError("mesh is not bound to a skeleton")
    if transforms.rotations.shape[0] != len(mesh._skeleton):
        raise ContractError(
            f"{transforms.rotations.shape[0]} transforms for a "
            f"{len(mesh._skeleton)}-joint skeleton"
        )
    mats = transforms.matrices()
    moved = np.einsum("kab,kb->ka", mats[mesh._jidx], mesh._local) + transforms.positions[mesh._jidx]
    out = np.zeros((mesh.vertex_count, 3))
    np.add.at(out, mesh._vidx, mesh._w[:, None] * moved)
    return out


def euler_to_quaternion(angles, order: str) -> np.ndarray:
    """Degrees-to-quaternion at the BVH boundary; see quat.from_euler."""
    return quat.from_euler(angles, order)
