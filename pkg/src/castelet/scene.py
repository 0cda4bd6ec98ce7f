"""The virtual castelet: stage, screens, lights, avatar instances, and the
per-tick composition into 2D frames.

Shadows are exact projective transports of the flat silhouette polygons
from a point light onto a screen plane, clipped to the screen bounds; no
rasterization is involved, so every reported vertex satisfies the plane
equation analytically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ContractError, EffectError
from .frames import Layer, RenderFrame
from .skeleton import Pose, Skeleton, SilhouetteMesh, forward_kinematics, skin_silhouette

PARALLEL_EPS = 1e-12


@dataclass
class Plane:
    """Screen plane n.x = d with a finite convex bounds polygon.

    Bounds are 2D points in the plane's own (u, v) frame; the frame is
    derived deterministically from the normal (see `basis`), with origin at
    the point d*n.
    """

    name: str
    normal: np.ndarray
    offset: float
    bounds: list[tuple[float, float]]
    translucency: float = 1.0

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        norm = np.linalg.norm(n)
        if norm == 0.0:
            raise ContractError(f"screen {self.name!r} has a zero normal")
        self.normal = n / norm
        if not (0.0 <= self.translucency <= 1.0):
            raise ContractError(f"screen {self.name!r} translucency outside [0, 1]")
        if len(self.bounds) < 3:
            raise ContractError(f"screen {self.name!r} bounds need at least 3 points")

    def basis(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(origin, u, v): u from the x axis (or y when near-parallel), v = n x u."""
        n = self.normal
        seed = np.array([1.0, 0.0, 0.0]) if abs(n[0]) <= 0.9 else np.array([0.0, 1.0, 0.0])
        u = seed - np.dot(seed, n) * n
        u = u / np.linalg.norm(u)
        v = np.cross(n, u)
        return self.offset * n, u, v

    def to_plane_coords(self, points: np.ndarray) -> np.ndarray:
        origin, u, v = self.basis()
        rel = points - origin
        return np.stack([rel @ u, rel @ v], axis=1)

    def from_plane_coords(self, coords) -> np.ndarray:
        origin, u, v = self.basis()
        coords = np.asarray(coords, dtype=float)
        return origin + coords[:, :1] * u + coords[:, 1:2] * v


@dataclass
class PointLight:
    name: str
    position: np.ndarray
    enabled: bool = True

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)


@dataclass
class Camera:
    kind: str  # "orthographic" | "perspective"
    position: np.ndarray
    look: np.ndarray
    up: np.ndarray
    viewport: tuple[float, float]
    fov: float | None = None  # vertical, radians (perspective)
    view_height: float | None = None  # meters (orthographic)

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        self.look = np.asarray(self.look, dtype=float)
        self.up = np.asarray(self.up, dtype=float)
        if self.kind not in ("orthographic", "perspective"):
            raise ContractError(f"unknown camera kind {self.kind!r}")
        f = self.look / np.linalg.norm(self.look)
        if np.linalg.norm(np.cross(f, self.up)) < 1e-9:
            raise ContractError("camera look and up are parallel")
        if self.kind == "perspective":
            if self.fov is None or not (0.0 < self.fov < math.pi):
                raise ContractError("perspective camera needs fov in (0, pi)")
        else:
            if self.view_height is None or self.view_height <= 0.0:
                raise ContractError("orthographic camera needs a positive view height")
        self._forward = f
        right = np.cross(f, self.up)
        self._right = right / np.linalg.norm(right)
        self._cam_up = np.cross(self._right, f)


@dataclass
class AvatarInstance:
    """Static placement and look of one avatar; runtime state lives elsewhere."""

    id: str
    skeleton: Skeleton
    mesh: SilhouetteMesh
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    yaw_degrees: float = 0.0
    visible: bool = True
    casts_shadow: bool = True
    tint: tuple[float, float, float, float] = (0.05, 0.05, 0.08, 1.0)

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)

    def root_matrix(self) -> np.ndarray:
        a = math.radians(self.yaw_degrees)
        c, s = math.cos(a), math.sin(a)
        return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


@dataclass
class CasteletScene:
    stage_min: np.ndarray
    stage_max: np.ndarray
    screens: list[Plane]
    lights: list[PointLight]
    avatars: list[AvatarInstance]
    camera: Camera
    notes: dict = field(default_factory=dict)  # documentation only (physical spaces)

    def avatar(self, avatar_id: str) -> AvatarInstance:
        for inst in self.avatars:
            if inst.id == avatar_id:
                return inst
        raise EffectError(f"unknown avatar {avatar_id!r}")

    def light(self, name: str) -> PointLight:
        for light in self.lights:
            if light.name == name:
                return light
        raise EffectError(f"unknown light {name!r}")

    def screen(self, name: str) -> Plane:
        for screen in self.screens:
            if screen.name == name:
                return screen
        raise EffectError(f"unknown screen {name!r}")

    def validation_warnings(self) -> list[str]:
        warnings = []
        if any(a.casts_shadow for a in self.avatars) and not any(
            l.enabled for l in self.lights
        ):
            warnings.append("avatars cast shadows but no light is enabled")
        return warnings


# ------------------------------------------------------------- projection


def project_shadow_point(light: np.ndarray, plane: tuple[np.ndarray, float], point):
    """Shadow of `point` cast from `light` onto plane (n, d), or None.

    None when the ray is parallel to the plane or the plane is not beyond
    the point as seen from the light (t < 1).
    """
    n, d = plane
    light = np.asarray(light, dtype=float)
    point = np.asarray(point, dtype=float)
    direction = point - light
    denom = float(np.dot(n, direction))
    if abs(denom) < PARALLEL_EPS:
        return None
    t = (d - float(np.dot(n, light))) / denom
    if t < 1.0:
        return None
    return light + t * direction


def project_shadow_batch(light, plane, points: np.ndarray):
    """Vectorized projection of (V, 3) points; returns (V, 3) or None if any fail."""
    n, d = plane
    direction = points - light
    denom = direction @ n
    if np.any(np.abs(denom) < PARALLEL_EPS):
        return None
    t = (d - float(np.dot(n, light))) / denom
    if np.any(t < 1.0):
        return None
    return light + t[:, None] * direction


def camera_project(camera: Camera, point) -> tuple[float, float] | None:
    """World point -> viewport (x right, y down, origin top-left), or None."""
    out = camera_project_batch(camera, np.asarray(point, dtype=float)[None, :])
    if out is None:
        return None
    return float(out[0, 0]), float(out[0, 1])


def camera_project_batch(camera: Camera, points: np.ndarray):
    """(V, 3) -> (V, 2) viewport points; None if any point is behind a
    perspective eye plane (torn polygons are worse than absent ones)."""
    rel = points - camera.position
    x = rel @ camera._right
    y = rel @ camera._cam_up
    z = rel @ camera._forward
    w, h = camera.viewport
    if camera.kind == "perspective":
        if np.any(z <= 1e-9):
            return None
        s = (h / 2.0) / math.tan(camera.fov / 2.0)
        px = w / 2.0 + s * x / z
        py = h / 2.0 - s * y / z
    else:
        s = h / camera.view_height
        px = w / 2.0 + s * x
        py = h / 2.0 - s * y
    return np.stack([px, py], axis=1)


def camera_depth(camera: Camera, point) -> float:
    return float(np.dot(np.asarray(point, dtype=float) - camera.position, camera._forward))


# ---------------------------------------------------------------- clipping


def clip_polygon(subject: list[tuple[float, float]], bounds: list[tuple[float, float]]):
    """Sutherland-Hodgman clip of `subject` against convex `bounds` (2D).

    Bounds may wind either way; the inside test follows the bounds' own
    signed area.
    """
    if len(subject) < 3:
        return []
    area2 = 0.0
    for (x0, y0), (x1, y1) in zip(bounds, bounds[1:] + bounds[:1]):
        area2 += x0 * y1 - x1 * y0
    flip = -1.0 if area2 < 0.0 else 1.0

    output = list(subject)
    b_prev = bounds[-1]
    for b_cur in bounds:
        if not output:
            return []
        ex, ey = b_cur[0] - b_prev[0], b_cur[1] - b_prev[1]

        def inside(p):
            return flip * (ex * (p[1] - b_prev[1]) - ey * (p[0] - b_prev[0])) >= 0.0

        def intersect(p, q):
            dx, dy = q[0] - p[0], q[1] - p[1]
            denom = ex * dy - ey * dx
            if denom == 0.0:
                return q
            t = (ex * (p[1] - b_prev[1]) - ey * (p[0] - b_prev[0])) / -denom
            return (p[0] + t * dx, p[1] + t * dy)

        clipped = []
        prev = output[-1]
        prev_in = inside(prev)
        for cur in output:
            cur_in = inside(cur)
            if cur_in:
                if not prev_in:
                    clipped.append(intersect(prev, cur))
                clipped.append(cur)
            elif prev_in:
                clipped.append(intersect(prev, cur))
            prev, prev_in = cur, cur_in
        output = clipped
        b_prev = b_cur
    return output


def _all_inside(points2d: np.ndarray, bounds: list[tuple[float, float]]) -> bool:
    """Fast path: every point inside the convex bounds (either winding)."""
    b = np.asarray(bounds)
    edges = np.roll(b, -1, axis=0) - b
    rel = points2d[:, None, :] - b[None, :, :]
    cross = edges[None, :, 0] * rel[:, :, 1] - edges[None, :, 1] * rel[:, :, 0]
    return bool(np.all(cross >= 0.0) or np.all(cross <= 0.0))


# ------------------------------------------------------------- composition


def compose_frame(scene: CasteletScene, poses: dict[str, Pose], tick: int, time: float) -> RenderFrame:
    """Deterministic painter-ordered frame for the given avatar poses.

    Silhouette layers appear for visible avatars; shadow layers for every
    (casting avatar, enabled light, screen) whose full projection lands at
    least partly inside the screen bounds. A mesh with holes contributes
    one layer per polygon loop.
    """
    layers: list[Layer] = []
    for inst in scene.avatars:
        try:
            pose = poses[inst.id]
        except KeyError:
            raise ContractError(f"no pose supplied for avatar {inst.id!r}") from None
        if not (inst.visible or inst.casts_shadow):
            continue
        transforms = forward_kinematics(inst.skeleton, pose)
        verts = skin_silhouette(inst.mesh, transforms)
        verts = verts @ inst.root_matrix().T + inst.position

        if inst.visible:
            projected = camera_project_batch(scene.camera, verts)
            if projected is not None:
                depth = camera_depth(scene.camera, inst.position)
                for loop in inst.mesh.polygons:
                    layers.append(
                        Layer(
                            kind="silhouette",
                            avatar=inst.id,
                            light=None,
                            screen=None,
                            depth=depth,
                            color=tuple(inst.tint),
                            points=tuple((float(projected[i, 0]), float(projected[i, 1])) for i in loop),
                        )
                    )

        if inst.casts_shadow:
            for light in scene.lights:
                if not light.enabled:
                    continue
                for screen in scene.screens:
                    layers.extend(
                        _shadow_layers(scene, inst, light, screen, verts)
                    )

    layers.sort(key=lambda l: (-l.depth, l.kind, l.avatar, l.light or "", l.screen or ""))
    return RenderFrame(tick=tick, time=time, layers=tuple(layers))


def _shadow_layers(scene, inst, light, screen, verts):
    plane = (screen.normal, screen.offset)
    shadow3 = project_shadow_batch(light.position, plane, verts)
    if shadow3 is None:
        return []  # grazing/behind-light geometry: drop whole layer, never tear
    coords = screen.to_plane_coords(shadow3)
    alpha = screen.translucency * inst.tint[3]
    color = (0.0, 0.0, 0.0, alpha)
    out = []
    for loop in inst.mesh.polygons:
        loop_pts = coords[loop]
        if _all_inside(loop_pts, screen.bounds):
            clipped = [tuple(p) for p in loop_pts.tolist()]
        else:
            clipped = clip_polygon([tuple(p) for p in loop_pts.tolist()], screen.bounds)
            if len(clipped) < 3:
                continue
        world = screen.from_plane_coords(np.asarray(clipped))
        projected = camera_project_batch(scene.camera, world)
        if projected is None:
            continue
        centroid = world.mean(axis=0)
        out.append(
            Layer(
                kind="shadow",
                avatar=inst.id,
                light=light.name,
                screen=screen.name,
                depth=camera_depth(scene.camera, centroid),
                color=color,
                points=tuple((float(p[0]), float(p[1])) for p in projected),
            )
        )
    return out


# ----------------------------------------------------------------- effects


@dataclass(frozen=True)
class SceneEffect:
    kind: str  # set_visible | set_casts_shadow | move_light | set_translucency | move_oav
    target: str
    value: object = None

    EFFECT_KINDS = ("set_visible", "set_casts_shadow", "move_light", "set_translucency", "move_oav")


def apply_scene_effect(scene: CasteletScene, effect: SceneEffect) -> CasteletScene:
    """Return a scene with exactly one field changed; the input is untouched."""
    kind = effect.kind
    if kind in ("set_visible", "set_casts_shadow"):
        inst = scene.avatar(effect.target)
        changed = replace(inst)  # shallow copy sharing rig data
        if kind == "set_visible":
            changed.visible = bool(effect.value)
        else:
            changed.casts_shadow = bool(effect.value)
        avatars = [changed if a.id == effect.target else a for a in scene.avatars]
        return replace(scene, avatars=avatars)
    if kind == "move_oav":
        inst = scene.avatar(effect.target)
        changed = replace(inst)
        value = effect.value or {}
        if "position" in value:
            changed.position = np.asarray(value["position"], dtype=float)
        if "yaw_degrees" in value:
            changed.yaw_degrees = float(value["yaw_degrees"])
        avatars = [changed if a.id == effect.target else a for a in scene.avatars]
        return replace(scene, avatars=avatars)
    if kind == "move_light":
        light = scene.light(effect.target)
        moved = PointLight(light.name, np.asarray(effect.value, dtype=float), light.enabled)
        lights = [moved if l.name == effect.target else l for l in scene.lights]
        return replace(scene, lights=lights)
    if kind == "set_translucency":
        screen = scene.screen(effect.target)
        changed_screen = Plane(
            screen.name, screen.normal.copy(), screen.offset, list(screen.bounds),
            float(effect.value),
        )
        screens = [changed_screen if s.name == effect.target else s for s in scene.screens]
        return replace(scene, screens=screens)
    raise EffectError(f"unknown scene effect {kind!r}")
