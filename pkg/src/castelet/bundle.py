"""Show bundle loading and clip persistence.

A bundle is a directory:

    show.json            manifest (schemas/show.schema.json)
    clips/<x>.bvh        clip motion
    clips/<x>.clip.json  sidecar (id, kind, idle references, unit scale)
    rigs/*.bvh           optional stream-source hierarchies for retargeting
    meshes/*.json        optional silhouette meshes

Loading validates everything it can and reports every violation at once;
a show that loads is a show the operator can run.
"""
from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

from .bvh import channel_layout, frames_to_take, parse_bvh, serialize_bvh, take_to_document
from .clips import AnimationClip, ClipLibrary, Take
from .engine import Cue, EffectStep, SetLiveStep, Show, StreamLink, SuspendStep, TriggerStep, WaitStep
from .errors import CasteletError, ShowLoadError
from .fsm import DEFAULT_FADE, OavFsm
from .retarget import MapEntry, RetargetMap, bind_map
from .scene import AvatarInstance, Camera, CasteletScene, Plane, PointLight, SceneEffect
from .skeleton import SilhouetteMesh

DEFAULT_CHAIN_TOLERANCE = 0.05


def _schema(name: str) -> dict:
    with resources.files("castelet.schemas").joinpath(name).open() as fh:
        return json.load(fh)


def _validate_json(instance, schema_name: str, where: str, report: list[str]):
    try:
        import jsonschema
    except ImportError:  # schema validation is a convenience, not a crutch
        return
    validator = jsonschema.Draft202012Validator(_schema(schema_name))
    for error in validator.iter_errors(instance):
        path = "/".join(str(p) for p in error.absolute_path)
        report.append(f"{where}: {path or '<root>'}: {error.message}")


def load_clip_file(bvh_path: Path) -> tuple[AnimationClip, float]:
    """One clip from its BVH and sidecar pair; returns (clip, unit_scale)."""
    sidecar_path = bvh_path.with_suffix("").with_suffix(".clip.json")
    if not sidecar_path.exists():
        raise CasteletError(f"missing sidecar {sidecar_path.name} for {bvh_path.name}")
    sidecar = json.loads(sidecar_path.read_text())
    unit_scale = float(sidecar.get("unit_scale", 0.01))
    doc = parse_bvh(bvh_path.read_text())
    take = frames_to_take(doc, unit_scale=unit_scale, take_id=sidecar["id"])
    clip = AnimationClip(
        sidecar["id"],
        sidecar["kind"],
        take.skeleton,
        take.poses,
        take.frame_time,
        start_idle_id=sidecar.get("start_idle"),
        end_idle_id=sidecar.get("end_idle"),
    )
    return clip, unit_scale


def write_clip_files(clip: AnimationClip, directory: Path, unit_scale: float = 0.01):
    """Persist a clip as <id>.bvh + <id>.clip.json."""
    directory.mkdir(parents=True, exist_ok=True)
    take = Take(clip.id, clip.skeleton, clip.poses, clip.frame_time)
    doc = take_to_document(take, unit_scale=unit_scale)
    (directory / f"{clip.id}.bvh").write_text(serialize_bvh(doc))
    sidecar = {"id": clip.id, "kind": clip.kind, "unit_scale": unit_scale}
    if clip.kind == "action":
        sidecar["start_idle"] = clip.start_idle_id
        sidecar["end_idle"] = clip.end_idle_id
    (directory / f"{clip.id}.clip.json").write_text(json.dumps(sidecar, indent=2) + "\n")


def _load_mesh(spec: dict, skeleton) -> SilhouetteMesh:
    weights = []
    for per_vertex in spec["weights"]:
        resolved = []
        for joint, w in per_vertex:
            idx = skeleton.index_of(joint) if isinstance(joint, str) else int(joint)
            resolved.append((idx, float(w)))
        weights.append(resolved)
    return SilhouetteMesh(spec["vertices"], spec["polygons"], weights).bind(skeleton)


def _default_mesh(skeleton) -> SilhouetteMesh:
    """Fallback card: a narrow rectangle skinned rigidly to the root."""
    return SilhouetteMesh(
        vertices=[(-0.25, 0.0), (0.25, 0.0), (0.25, 1.7), (-0.25, 1.7)],
        polygons=[[0, 1, 2, 3]],
        skin_weights=[[(0, 1.0)]] * 4,
    ).bind(skeleton)


def load_show(bundle_dir: str | Path) -> Show:
    """Load and cross-validate a bundle; raises ShowLoadError with the full
    violation report (never just the first problem)."""
    bundle = Path(bundle_dir)
    report: list[str] = []
    manifest_path = bundle / "show.json"
    if not manifest_path.exists():
        raise ShowLoadError([f"missing manifest {manifest_path}"])
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise ShowLoadError([f"show.json does not parse: {exc}"]) from exc
    _validate_json(manifest, "show.schema.json", "show.json", report)
    if report:
        raise ShowLoadError(report)

    chain_tolerance = float(manifest.get("chain_tolerance", DEFAULT_CHAIN_TOLERANCE))
    default_fade = float(manifest.get("fade_duration", DEFAULT_FADE))

    # ---- clips
    library = ClipLibrary()
    clips_dir = bundle / manifest.get("clips_dir", "clips")
    sidecar_report: list[str] = []
    for bvh_path in sorted(clips_dir.glob("*.bvh")):
        sidecar_path = bvh_path.with_suffix("").with_suffix(".clip.json")
        if sidecar_path.exists():
            _validate_json(
                json.loads(sidecar_path.read_text()), "clip-sidecar.schema.json",
                sidecar_path.name, sidecar_report,
            )
        try:
            clip, _ = load_clip_file(bvh_path)
            library.add(clip)
        except CasteletError as exc:
            report.append(f"clip {bvh_path.name}: {exc}")
    report.extend(sidecar_report)
    chain_report = library.validate(chain_tolerance)
    report.extend(chain_report.lines())

    # ---- scene
    scene_spec = manifest["scene"]
    screens = []
    for s in scene_spec.get("screens", []):
        try:
            screens.append(
                Plane(s["name"], np.asarray(s["normal"], dtype=float), float(s["offset"]),
                      [tuple(p) for p in s["bounds"]], float(s.get("translucency", 1.0)))
            )
        except CasteletError as exc:
            report.append(f"screen {s.get('name')!r}: {exc}")
    lights = [
        PointLight(l["name"], np.asarray(l["position"], dtype=float), bool(l.get("enabled", True)))
        for l in scene_spec.get("lights", [])
    ]
    cam = scene_spec["camera"]
    try:
        camera = Camera(
            cam["kind"],
            np.asarray(cam["position"], dtype=float),
            np.asarray(cam["look"], dtype=float),
            np.asarray(cam["up"], dtype=float),
            tuple(float(v) for v in cam["viewport"]),
            fov=math.radians(cam["fov_degrees"]) if "fov_degrees" in cam else None,
            view_height=cam.get("view_height"),
        )
    except CasteletError as exc:
        report.append(f"camera: {exc}")
        camera = None

    # ---- avatars
    avatars = []
    fsms: dict[str, OavFsm] = {}
    streams: dict[str, StreamLink] = {}
    for spec in manifest.get("avatars", []):
        oav_id = spec["id"]
        skeleton_from = spec["skeleton_from"]
        if skeleton_from not in library:
            report.append(f"avatar {oav_id!r}: rig clip {skeleton_from!r} not in library")
            continue
        skeleton = library.get(skeleton_from).skeleton
        try:
            if "mesh" in spec:
                mesh = _load_mesh(spec["mesh"], skeleton)
            elif "mesh_file" in spec:
                mesh = _load_mesh(json.loads((bundle / spec["mesh_file"]).read_text()), skeleton)
            else:
                mesh = _default_mesh(skeleton)
        except CasteletError as exc:
            report.append(f"avatar {oav_id!r} mesh: {exc}")
            continue
        avatars.append(
            AvatarInstance(
                oav_id,
                skeleton,
                mesh,
                position=np.asarray(spec.get("position", [0, 0, 0]), dtype=float),
                yaw_degrees=float(spec.get("yaw_degrees", 0.0)),
                visible=bool(spec.get("visible", True)),
                casts_shadow=bool(spec.get("casts_shadow", True)),
                tint=tuple(spec.get("tint", (0.05, 0.05, 0.08, 1.0))),
            )
        )
        initial_idle = spec["initial_idle"]
        if initial_idle not in library:
            report.append(f"avatar {oav_id!r}: initial idle {initial_idle!r} not in library")
            continue
        retarget_spec = spec.get("retarget")
        fsms[oav_id] = OavFsm(
            initial_idle,
            fade_duration=float(spec.get("fade_duration", default_fade)),
            live_binding_configured=retarget_spec is not None,
        )
        if retarget_spec is not None:
            try:
                streams[oav_id] = _bind_stream(bundle, retarget_spec, skeleton)
            except CasteletError as exc:
                report.append(f"avatar {oav_id!r} retarget: {exc}")

    # ---- cues
    cues = []
    for index, cue_spec in enumerate(manifest.get("cues", [])):
        steps = []
        for step in cue_spec.get("steps", []):
            kind = step["type"]
            if kind == "trigger":
                steps.append(TriggerStep(step["oav"], step["action"]))
                if step["oav"] not in fsms:
                    report.append(f"cue {index}: unknown avatar {step['oav']!r}")
                if step["action"] not in library:
                    report.append(f"cue {index}: unknown action {step['action']!r}")
                elif library.get(step["action"]).kind != "action":
                    report.append(f"cue {index}: clip {step['action']!r} is not an action")
            elif kind == "suspend":
                steps.append(SuspendStep(step["oav"]))
                if step["oav"] not in fsms:
                    report.append(f"cue {index}: unknown avatar {step['oav']!r}")
            elif kind == "set_live":
                steps.append(SetLiveStep(step["oav"], bool(step["on"])))
                if step["oav"] not in fsms:
                    report.append(f"cue {index}: unknown avatar {step['oav']!r}")
            elif kind == "effect":
                eff = step["effect"]
                steps.append(EffectStep(SceneEffect(eff["kind"], eff["target"], eff.get("value"))))
            elif kind == "wait":
                steps.append(WaitStep(float(step["seconds"])))
            else:
                report.append(f"cue {index}: unknown step type {kind!r}")
        label = cue_spec.get("label", f"cue-{index}")
        cues.append(Cue(index, label, tuple(steps)))
    labels = [c.label for c in cues]
    for label in sorted(set(l for l in labels if labels.count(l) > 1)):
        report.append(f"duplicate cue label {label!r}")

    if camera is None or report:
        raise ShowLoadError(report or ["camera failed to build"])

    scene = CasteletScene(
        stage_min=np.asarray(scene_spec["stage"]["min"], dtype=float),
        stage_max=np.asarray(scene_spec["stage"]["max"], dtype=float),
        screens=screens,
        lights=lights,
        avatars=avatars,
        camera=camera,
        notes=manifest.get("notes", {}),
    )
    # effect targets are resolvable only once the scene exists
    post_report = []
    for cue in cues:
        for step in cue.steps:
            if isinstance(step, EffectStep):
                try:
                    from .scene import apply_scene_effect

                    apply_scene_effect(scene, step.effect)
                except CasteletError as exc:
                    post_report.append(f"cue {cue.index}: {exc}")
    post_report.extend(scene.validation_warnings())
    if post_report:
        raise ShowLoadError(post_report)

    show = Show(
        scene,
        library,
        fsms,
        cues,
        tick_rate=float(manifest["tick_rate"]),
        streams=streams,
        name=manifest.get("name", bundle.name),
    )
    return show


def _bind_stream(bundle: Path, spec: dict, target_skeleton) -> StreamLink:
    source_path = bundle / spec["source_rig"]
    if not source_path.exists():
        raise CasteletError(f"source rig {spec['source_rig']!r} not found")
    from .bvh import parse_hierarchy

    source_skeleton = parse_hierarchy(source_path.read_text())
    entries = [
        MapEntry(
            e["source"],
            e["target"],
            rotation_offset=np.asarray(e.get("rotation_offset", [1.0, 0.0, 0.0, 0.0]), dtype=float),
        )
        for e in spec.get("entries", [])
    ]
    rmap = RetargetMap(entries, root_translation_scale=float(spec.get("root_translation_scale", 1.0)))
    unit_scale = float(spec.get("unit_scale", 0.01))
    bound = bind_map(rmap, source_skeleton, target_skeleton)
    return StreamLink(bound, channel_layout(source_skeleton), unit_scale)
