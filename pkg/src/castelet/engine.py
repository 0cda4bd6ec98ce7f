"""Show state and the master tick loop.

One Show instance is owned by a single engine thread. Other execution
contexts (control connections, mocap listeners) interact only through
`enqueue`, which stamps events onto tick boundaries; identical bundles,
event scripts, and dt schedules therefore reproduce identical frames,
which is what makes session replay a meaningful check.
"""
from __future__ import annotations

import heapq
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

from .bvh import channel_layout, row_to_pose
from .clips import ClipLibrary, Take
from .errors import ContractError
from .frames import RenderFrame, frame_hash
from .fsm import LIVE, OavFsm
from .retarget import BoundRetarget, retarget_pose
from .scene import CasteletScene, SceneEffect, apply_scene_effect, compose_frame
from .skeleton import Pose


# --------------------------------------------------------------- cue model


@dataclass(frozen=True)
class TriggerStep:
    oav: str
    action: str


@dataclass(frozen=True)
class SuspendStep:
    oav: str


@dataclass(frozen=True)
class SetLiveStep:
    oav: str
    on: bool


@dataclass(frozen=True)
class EffectStep:
    effect: SceneEffect


@dataclass(frozen=True)
class WaitStep:
    seconds: float


CueStep = object  # union of the five step shapes above


@dataclass(frozen=True)
class Cue:
    index: int
    label: str
    steps: tuple


@dataclass
class StreamLink:
    """Per-avatar mocap link config plus deterministic health counters."""

    bound: BoundRetarget
    layout: list
    unit_scale: float
    frames_received: int = 0
    gaps: int = 0
    dropped: int = 0
    last_frame_tick: int | None = None
    recent_ticks: list[int] = field(default_factory=list)
    last_retargeted: Pose | None = None

    def health(self, tick: int, tick_rate: float) -> dict:
        window = int(tick_rate)  # frames over the last second of engine time
        recent = [t for t in self.recent_ticks if t > tick - window]
        return {
            "connected": self.last_frame_tick is not None,
            "frames_per_second": float(len(recent)),
            "sequence_gaps": self.gaps,
            "dropped": self.dropped,
            "last_frame_age": (
                None
                if self.last_frame_tick is None
                else (tick - self.last_frame_tick) / tick_rate
            ),
        }


@dataclass
class Recording:
    oav: str
    poses: list[Pose]
    state: str = "rolling"  # rolling | stopped


class Show:
    """Loaded production: scene, clips, retargets, cue list, engine clock."""

    def __init__(
        self,
        scene: CasteletScene,
        library: ClipLibrary,
        fsms: dict[str, OavFsm],
        cues: list[Cue],
        tick_rate: float,
        streams: dict[str, StreamLink] | None = None,
        name: str = "untitled",
    ):
        if tick_rate <= 0:
            raise ContractError("tick_rate must be positive")
        self.name = name
        self.scene = scene
        self.library = library
        self.fsms = fsms
        self.cues = list(cues)
        self.cursor = 0
        self.tick_rate = float(tick_rate)
        self.dt = 1.0 / float(tick_rate)
        self.clock = 0.0
        self.tick_index = 0  # index of the next frame to produce
        self.streams = streams or {}
        self.recording: Recording | None = None
        self._queue: list = []  # heap of (due_tick, seq, source, event)
        self._seq = 0
        self._lock = threading.Lock()
        self.log_records: list[dict] = []
        self._log_file = None
        self.hash_every = 1
        self.last_frame: RenderFrame | None = None
        self.notices: list[str] = []

    # ------------------------------------------------------------ logging

    def open_log(self, path: Path):
        path.parent.mkdir(parents=True, exist_ok=True)
        self._log_file = open(path, "w")

    def close_log(self):
        if self._log_file:
            self._log_file.close()
            self._log_file = None

    def _log(self, source: str, event: dict, tick: int | None = None):
        record = {"tick": self.tick_index if tick is None else tick, "source": source, "event": event}
        self.log_records.append(record)
        if self._log_file:
            self._log_file.write(json.dumps(record, sort_keys=True) + "\n")
            self._log_file.flush()

    # ---------------------------------------------------------- enqueueing

    def enqueue(self, event: dict, source: str = "control", due_tick: int | None = None):
        """Thread-safe event injection; applied at the tick boundary."""
        with self._lock:
            due = self.tick_index if due_tick is None else due_tick
            heapq.heappush(self._queue, (due, self._seq, source, event))
            self._seq += 1

    # ------------------------------------------------------------ cue list

    def go(self) -> dict:
        """Fire the cue under the cursor; returns per-step dispositions."""
        if self.cursor >= len(self.cues):
            return {"status": "end of show", "cursor": self.cursor, "fired": []}
        cue = self.cues[self.cursor]
        fired = self._dispatch_steps(cue.steps, delay_ticks=0)
        self.cursor += 1
        return {"status": "ok", "cue": cue.label, "cursor": self.cursor, "fired": fired}

    def _dispatch_steps(self, steps, delay_ticks: int) -> list[dict]:
        results = []
        for i, step in enumerate(steps):
            if isinstance(step, WaitStep):
                remaining = steps[i + 1 :]
                delay = delay_ticks + max(1, int(round(step.seconds * self.tick_rate)))
                if remaining:
                    self.enqueue(
                        {"type": "_steps", "steps": remaining},
                        source="cue",
                        due_tick=self.tick_index + delay,
                    )
                results.append({"step": "wait", "status": "scheduled", "ticks": delay})
                return results
            results.append(self._apply_step(step))
        return results

    def _apply_step(self, step) -> dict:
        if isinstance(step, TriggerStep):
            result = self.fsms[step.oav].trigger_action(step.action, self.library)
            return {"step": f"trigger {step.oav}:{step.action}", "status": result.status,
                    "reason": result.reason}
        if isinstance(step, SuspendStep):
            result = self.fsms[step.oav].suspend(self.library)
            return {"step": f"suspend {step.oav}", "status": result.status, "reason": result.reason}
        if isinstance(step, SetLiveStep):
            result = self.fsms[step.oav].set_live(step.on, self.library)
            return {"step": f"set_live {step.oav} {step.on}", "status": result.status,
                    "reason": result.reason}
        if isinstance(step, EffectStep):
            self.scene = apply_scene_effect(self.scene, step.effect)
            return {"step": f"effect {step.effect.kind} {step.effect.target}", "status": "applied"}
        raise ContractError(f"unknown cue step {step!r}")

    def back(self) -> dict:
        if self.cursor == 0:
            return {"status": "at start", "cursor": 0}
        self.cursor -= 1
        return {
            "status": "ok",
            "cursor": self.cursor,
            "warning": "cursor moved without rewinding world state",
        }

    def goto(self, index: int) -> dict:
        if not (0 <= index <= len(self.cues)):
            return {"status": "error", "error": f"index {index} out of range", "cursor": self.cursor}
        self.cursor = index
        return {
            "status": "ok",
            "cursor": self.cursor,
            "warning": "cursor moved without rewinding world state",
        }

    # ----------------------------------------------------------- recording

    def start_recording(self, oav: str) -> dict:
        if self.recording and self.recording.state == "rolling":
            raise ContractError("a recording is already rolling")
        fsm = self.fsms[oav]
        if fsm.state != LIVE:
            raise ContractError(f"avatar {oav!r} must be live to record (state {fsm.state})")
        self.recording = Recording(oav, [])
        return {"status": "rolling", "oav": oav}

    def stop_recording(self) -> Take:
        if not self.recording or self.recording.state != "rolling":
            raise ContractError("no recording is rolling")
        rec = self.recording
        rec.state = "stopped"
        self.recording = None
        inst = self.scene.avatar(rec.oav)
        return Take(f"{rec.oav}-take", inst.skeleton, rec.poses, self.dt)

    # ---------------------------------------------------------------- tick

    def tick(self, dt: float | None = None) -> tuple[RenderFrame, dict]:
        """Advance one step: drain due events, tick FSMs, compose the frame."""
        dt = self.dt if dt is None else dt
        if dt <= 0:
            raise ContractError("dt must be positive")
        acks = self._drain_events()

        poses: dict[str, Pose] = {}
        fsm_snaps: dict[str, dict] = {}
        for inst in self.scene.avatars:
            fsm = self.fsms[inst.id]
            pose, snap = fsm.tick(dt, self.library)
            poses[inst.id] = pose
            fsm_snaps[inst.id] = {
                "state": snap.state,
                "current_idle": snap.current_idle,
                "active_action": snap.active_action,
                "queue": list(snap.queue),
                "notices": list(snap.notices),
            }
            self.notices.extend(f"{inst.id}: {n}" for n in snap.notices)

        if self.recording and self.recording.state == "rolling":
            link = self.streams.get(self.recording.oav)
            recorded = link.last_retargeted if link and link.last_retargeted else None
            self.recording.poses.append(recorded if recorded is not None else poses[self.recording.oav])

        self.clock += dt
        frame = compose_frame(self.scene, poses, self.tick_index, self.clock)
        self.last_frame = frame
        if self.hash_every and self.tick_index % self.hash_every == 0:
            self._log("frame", {"hash": frame_hash(frame)})
        snapshot = {
            "clock": self.clock,
            "tick": self.tick_index,
            "cursor": self.cursor,
            "avatars": fsm_snaps,
            "recording": None if not self.recording else {
                "oav": self.recording.oav,
                "state": self.recording.state,
                "samples": len(self.recording.poses),
            },
            "streams": {
                oav: link.health(self.tick_index, self.tick_rate)
                for oav, link in self.streams.items()
            },
            "acks": acks,
        }
        self.tick_index += 1
        return frame, snapshot

    def _drain_events(self) -> list[dict]:
        acks = []
        while True:
            with self._lock:
                if not self._queue or self._queue[0][0] > self.tick_index:
                    return acks
                due, seq, source, event = heapq.heappop(self._queue)
            result = self._apply_event(event, source)
            if result is not None:
                acks.append(result)

    def _apply_event(self, event: dict, source: str):
        kind = event.get("type")
        if kind == "go":
            self._log(source, event)
            return {"event": "go", **self.go()}
        if kind == "back":
            self._log(source, event)
            return {"event": "back", **self.back()}
        if kind == "goto":
            self._log(source, event)
            return {"event": "goto", **self.goto(int(event["index"]))}
        if kind == "trigger":
            self._log(source, event)
            result = self.fsms[event["oav"]].trigger_action(event["action"], self.library)
            return {"event": "trigger", "status": result.status, "reason": result.reason}
        if kind == "suspend":
            self._log(source, event)
            result = self.fsms[event["oav"]].suspend(self.library)
            return {"event": "suspend", "status": result.status, "reason": result.reason}
        if kind == "set_live":
            self._log(source, event)
            result = self.fsms[event["oav"]].set_live(bool(event["on"]), self.library)
            return {"event": "set_live", "status": result.status, "reason": result.reason}
        if kind == "effect":
            self._log(source, event)
            eff = event["effect"]
            self.scene = apply_scene_effect(
                self.scene, SceneEffect(eff["kind"], eff["target"], eff.get("value"))
            )
            return {"event": "effect", "status": "applied"}
        if kind == "record":
            self._log(source, event)
            if event["on"]:
                return {"event": "record", **self.start_recording(event["oav"])}
            take = self.stop_recording()
            return {"event": "record", "status": "stopped", "samples": take.sample_count}
        if kind == "_steps":
            steps = event["steps"]
            return {"event": "cue-continuation", "fired": self._dispatch_steps(steps, 0)}
        if kind == "stream":
            self._log(source, event)
            self._apply_stream(event)
            return None
        if kind == "stream_gap":
            self._log(source, event)
            link = self.streams.get(event["oav"])
            if link:
                link.gaps += int(event.get("missing", 1))
            return None
        raise ContractError(f"unknown event type {kind!r}")

    def _apply_stream(self, event: dict):
        oav = event["oav"]
        link = self.streams.get(oav)
        if link is None:
            self.notices.append(f"stream pose for unknown avatar {oav!r} ignored")
            return
        source_pose = row_to_pose(event["channels"], link.layout, link.unit_scale)
        target_pose = retarget_pose(link.bound, source_pose)
        link.last_retargeted = target_pose
        link.frames_received += 1
        link.last_frame_tick = self.tick_index
        link.recent_ticks.append(self.tick_index)
        if len(link.recent_ticks) > 4 * int(self.tick_rate):
            del link.recent_ticks[: len(link.recent_ticks) - 2 * int(self.tick_rate)]
        self.fsms[oav].apply_stream_pose(target_pose)

    # ------------------------------------------------------------- scripts

    def run_script(self, events: list[dict], ticks: int):
        """Deterministic headless run; yields (frame, snapshot) per tick."""
        for item in events:
            self.enqueue(item["event"], source="script", due_tick=int(item["tick"]))
        for _ in range(ticks):
            yield self.tick()
