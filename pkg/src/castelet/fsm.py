"""Per-avatar animation state machine: two buses, each mixing an action
channel against an idle channel.

Topology: one bus is "audible" while the other stages the next action.
Triggering an action loads the staging bus with (current idle, new action),
ramps that bus's channel weight 0 -> 1, and crossfades between buses over
the same window, so consecutive actions alternate buses. Suspending and
live hand-off blend from a captured output pose instead, which keeps every
transition continuous no matter when it fires.

All clocks and weights are plain floats driven only by tick(dt): identical
event/tick sequences reproduce identical outputs bit for bit.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .clips import AnimationClip, ClipLibrary, sample_clip, sample_palindrome
from .errors import ContractError
from .skeleton import Pose, lerp_pose, pose_distance

IDLE = "idle"
TRANSITION_IN = "transition-in"
ACTING = "acting"
TRANSITION_OUT = "transition-out"
SUSPENDING = "suspending"
LIVE = "live"

STATES = (IDLE, TRANSITION_IN, ACTING, TRANSITION_OUT, SUSPENDING, LIVE)

# Reachable edges. Suspend is honored from any transition phase, and live
# override may capture the avatar in any state; live always lands in an idle.
ALLOWED_TRANSITIONS = frozenset(
    [
        (IDLE, TRANSITION_IN),
        (TRANSITION_IN, ACTING),
        (ACTING, TRANSITION_OUT),
        (TRANSITION_OUT, IDLE),
        (ACTING, SUSPENDING),
        (TRANSITION_IN, SUSPENDING),
        (TRANSITION_OUT, SUSPENDING),
        (SUSPENDING, IDLE),
        (LIVE, IDLE),
    ]
    + [(s, LIVE) for s in STATES if s != LIVE]
)

DEFAULT_FADE = 0.4


@dataclass
class Bus:
    idle_id: str | None = None
    idle_clock: float = 0.0
    action_id: str | None = None
    action_clock: float = 0.0
    channel_weight: float = 0.0  # 1 = action fully audible, 0 = idle fully audible


@dataclass
class TriggerResult:
    status: str  # "accepted" | "queued" | "rejected" | "noop"
    reason: str = ""


@dataclass
class FsmSnapshot:
    state: str
    current_idle: str | None
    active_action: str | None
    queue: tuple[str, ...]
    bus_crossfade: float
    channel_weights: tuple[float, float]
    clocks: dict
    mix_weights: tuple  # ((label, weight), ...) of every pose entering the mix
    notices: tuple[str, ...]


class OavFsm:
    """One avatar's animation brain; owned by the engine tick loop."""

    def __init__(
        self,
        initial_idle: str,
        fade_duration: float = DEFAULT_FADE,
        live_binding_configured: bool = False,
    ):
        if fade_duration < 0.0:
            raise ContractError("fade_duration must be >= 0")
        self.state = IDLE
        self.fade_duration = fade_duration
        self.live_binding_configured = live_binding_configured
        self.buses = [Bus(idle_id=initial_idle), Bus()]
        self.audible = 0
        self.bus_crossfade = 0.0
        self.queue: deque[str] = deque()
        self.last_pose: Pose | None = None
        self._ramp = 0.0
        # suspend: blend a captured pose down onto a chosen idle
        self._held: Pose | None = None
        self._held_weight = 0.0
        # live override
        self._stream_pose: Pose | None = None
        self._live_phase = None  # "in" | "out"
        self._live_weight = 0.0
        self._live_entry: Pose | None = None
        self._exit_held: Pose | None = None
        self._exit_weight = 1.0
        self._notices: list[str] = []
        self._transitions: list[tuple[str, str]] = []

    # ------------------------------------------------------------- queries

    @property
    def current_idle(self) -> str | None:
        return self.buses[self.audible].idle_id

    @property
    def active_action(self) -> str | None:
        for bus in self.buses:
            if bus.action_id is not None:
                return bus.action_id
        return None

    def _staging(self) -> int:
        return 1 - self.audible

    def _set_state(self, new: str):
        if new != self.state:
            self._transitions.append((self.state, new))
            self.state = new

    # -------------------------------------------------------------- events

    def trigger_action(self, action_id: str, library: ClipLibrary) -> TriggerResult:
        """Operator GO for one action; chained actions queue while busy."""
        clip = library.get(action_id)
        if clip.kind != "action":
            raise ContractError(f"clip {action_id!r} is not an action")
        if self.state == IDLE:
            if clip.start_idle_id != self.current_idle:
                return TriggerResult(
                    "rejected",
                    f"action {action_id!r} starts from idle {clip.start_idle_id!r} "
                    f"but avatar is in idle {self.current_idle!r}",
                )
            self._begin_transition_in(action_id)
            return TriggerResult("accepted")
        self.queue.append(action_id)
        return TriggerResult("queued", f"avatar busy ({self.state})")

    def _begin_transition_in(self, action_id: str):
        src = self.buses[self.audible]
        dst = self.buses[self._staging()]
        # stage a copy of the running idle (same clock: both buses agree at weight 0)
        dst.idle_id = src.idle_id
        dst.idle_clock = src.idle_clock
        dst.action_id = action_id
        dst.action_clock = 0.0
        dst.channel_weight = 0.0
        self._ramp = 0.0
        self._set_state(TRANSITION_IN)

    def suspend(self, library: ClipLibrary) -> TriggerResult:
        """Blend whatever is playing down onto the nearer boundary idle."""
        if self.state not in (ACTING, TRANSITION_IN, TRANSITION_OUT):
            return TriggerResult("noop", f"nothing to suspend in state {self.state}")
        bus = self.buses[self.audible if self.state != TRANSITION_IN else self._staging()]
        action = library.get(bus.action_id)
        progress = bus.action_clock / action.duration if action.duration > 0 else 1.0
        target = action.start_idle_id if progress < 0.5 else action.end_idle_id
        self._held = self._current_pose(library)
        self._held_weight = 1.0
        self._ramp = 0.0
        # collapse both buses onto the landing idle
        landing = self.buses[self.audible]
        landing.idle_id = target
        landing.idle_clock = 0.0
        landing.action_id = None
        landing.channel_weight = 0.0
        other = self.buses[self._staging()]
        other.action_id = None
        other.channel_weight = 0.0
        self.bus_crossfade = float(self.audible)
        self._set_state(SUSPENDING)
        return TriggerResult("accepted", f"suspending toward idle {target!r}")

    def set_live(self, on: bool, library: ClipLibrary) -> TriggerResult:
        if on:
            if not self.live_binding_configured:
                return TriggerResult("rejected", "no live retarget binding configured")
            if self.state == LIVE:
                return TriggerResult("noop", "already live")
            self._live_entry = self._current_pose(library)
            self._live_phase = "in"
            self._live_weight = 0.0
            self._set_state(LIVE)
            return TriggerResult("accepted")
        if self.state != LIVE:
            return TriggerResult("noop", "not live")
        current = self._current_pose(library)
        idles = library.idles()
        if not idles:
            raise ContractError("library has no idle clips to land on")
        nearest = min(idles, key=lambda c: (pose_distance(current, c.first_pose), c.id))
        self._exit_held = current
        self._exit_weight = 1.0
        self._live_phase = "out"
        landing = self.buses[self.audible]
        landing.idle_id = nearest.id
        landing.idle_clock = 0.0
        landing.action_id = None
        landing.channel_weight = 0.0
        other = self.buses[self._staging()]
        other.action_id = None
        other.channel_weight = 0.0
        self.bus_crossfade = float(self.audible)
        return TriggerResult("accepted", f"blending back into idle {nearest.id!r}")

    def apply_stream_pose(self, pose: Pose):
        """Latest-wins delivery from the mocap link (pre-retargeted)."""
        self._stream_pose = pose

    # ---------------------------------------------------------------- tick

    def tick(self, dt: float, library: ClipLibrary, stream_pose: Pose | None = None):
        """Advance dt seconds; returns (output pose, FsmSnapshot)."""
        if dt <= 0.0:
            raise ContractError("dt must be positive")
        if stream_pose is not None:
            self._stream_pose = stream_pose

        if self.state == IDLE and self.queue:
            self._drain_queue(library)

        self._advance(dt, library)
        pose, mix = self._mix(library)
        self.last_pose = pose
        snapshot = FsmSnapshot(
            state=self.state,
            current_idle=self.current_idle,
            active_action=self.active_action,
            queue=tuple(self.queue),
            bus_crossfade=self.bus_crossfade,
            channel_weights=(self.buses[0].channel_weight, self.buses[1].channel_weight),
            clocks={
                "idle": self.buses[self.audible].idle_clock,
                "action": self.buses[self._staging()].action_clock
                if self.state == TRANSITION_IN
                else self.buses[self.audible].action_clock,
            },
            mix_weights=tuple(mix),
            notices=tuple(self._notices),
        )
        self._notices.clear()
        return pose, snapshot

    def _drain_queue(self, library: ClipLibrary):
        action_id = self.queue.popleft()
        clip = library.get(action_id)
        if clip.start_idle_id != self.current_idle:
            self._notices.append(
                f"queued action {action_id!r} dropped: starts from idle "
                f"{clip.start_idle_id!r}, avatar is in {self.current_idle!r}"
            )
            return
        self._begin_transition_in(action_id)

    def _fade_step(self, dt: float) -> float:
        """Linear ramp progress for this tick, 0..1 complete."""
        if self.fade_duration <= 0.0:
            return 1.0
        self._ramp += dt
        return min(1.0, self._ramp / self.fade_duration)

    def _advance(self, dt: float, library: ClipLibrary):
        for bus in self.buses:
            if bus.idle_id is not None:
                bus.idle_clock += dt
            if bus.action_id is not None:
                bus.action_clock += dt

        if self.state == TRANSITION_IN:
            w = self._fade_step(dt)
            staging = self._staging()
            self.buses[staging].channel_weight = w
            self.bus_crossfade = float(self.audible) + (staging - self.audible) * w
            if w >= 1.0:
                self.audible = staging
                self.bus_crossfade = float(staging)
                self.buses[staging].channel_weight = 1.0
                self._set_state(ACTING)
        elif self.state == ACTING:
            bus = self.buses[self.audible]
            action = library.get(bus.action_id)
            if bus.action_clock >= action.duration:
                bus.idle_id = action.end_idle_id
                bus.idle_clock = 0.0
                self._ramp = 0.0
                self._set_state(TRANSITION_OUT)
        elif self.state == TRANSITION_OUT:
            w = self._fade_step(dt)
            bus = self.buses[self.audible]
            bus.channel_weight = 1.0 - w
            if w >= 1.0:
                bus.channel_weight = 0.0
                bus.action_id = None
                self._set_state(IDLE)
        elif self.state == SUSPENDING:
            w = self._fade_step(dt)
            self._held_weight = 1.0 - w
            if w >= 1.0:
                self._held = None
                self._held_weight = 0.0
                self._set_state(IDLE)
        elif self.state == LIVE:
            if self._live_phase == "in":
                # the ramp waits for the first streamed pose
                if self._stream_pose is not None:
                    self._live_weight = min(1.0, self._live_weight + (
                        dt / self.fade_duration if self.fade_duration > 0 else 1.0
                    ))
            else:  # "out"
                step = dt / self.fade_duration if self.fade_duration > 0 else 1.0
                self._exit_weight = max(0.0, self._exit_weight - step)
                if self._exit_weight <= 0.0:
                    self._exit_held = None
                    self._live_phase = None
                    self._stream_pose = None
                    self._set_state(IDLE)

    # ----------------------------------------------------------- sampling

    def _bus_pose(self, index: int, library: ClipLibrary):
        """Pose of one bus plus its (label, weight) contributions at weight 1."""
        bus = self.buses[index]
        cw = bus.channel_weight
        idle_clip = library.get(bus.idle_id) if bus.idle_id else None
        if cw <= 0.0 or bus.action_id is None:
            pose = sample_palindrome(idle_clip, bus.idle_clock)
            return pose, [(f"idle:{bus.idle_id}", 1.0)]
        action_clip = library.get(bus.action_id)
        action_pose = sample_clip(action_clip, bus.action_clock)
        if cw >= 1.0:
            return action_pose, [(f"action:{bus.action_id}", 1.0)]
        idle_pose = sample_palindrome(idle_clip, bus.idle_clock)
        pose = lerp_pose(idle_pose, action_pose, cw)
        return pose, [(f"idle:{bus.idle_id}", 1.0 - cw), (f"action:{bus.action_id}", cw)]

    def _fsm_pose(self, library: ClipLibrary):
        """Two-bus mix, before any suspend/live overlay."""
        x = self.bus_crossfade
        if x <= 0.0:
            pose, mix = self._bus_pose(0, library)
        elif x >= 1.0:
            pose, mix = self._bus_pose(1, library)
        else:
            pose_a, mix_a = self._bus_pose(0, library)
            pose_b, mix_b = self._bus_pose(1, library)
            pose = lerp_pose(pose_a, pose_b, x)
            mix = [(l, w * (1.0 - x)) for l, w in mix_a] + [(l, w * x) for l, w in mix_b]
        return pose, mix

    def _mix(self, library: ClipLibrary):
        if self.state == SUSPENDING and self._held is not None:
            idle_pose, idle_mix = self._fsm_pose(library)
            hw = self._held_weight
            pose = lerp_pose(idle_pose, self._held, hw)
            return pose, [(l, w * (1.0 - hw)) for l, w in idle_mix] + [("held", hw)]
        if self.state == LIVE:
            if self._live_phase == "in":
                lw = self._live_weight
                if self._stream_pose is None or lw <= 0.0:
                    return self._live_entry, [("held", 1.0)]
                if lw >= 1.0:
                    return self._stream_pose, [("stream", 1.0)]
                pose = lerp_pose(self._live_entry, self._stream_pose, lw)
                return pose, [("held", 1.0 - lw), ("stream", lw)]
            # phase "out": captured pose fades onto the landing idle
            ew = self._exit_weight
            idle_pose, idle_mix = self._fsm_pose(library)
            if ew >= 1.0:
                return self._exit_held, [("held", 1.0)]
            pose = lerp_pose(idle_pose, self._exit_held, ew)
            return pose, [(l, w * (1.0 - ew)) for l, w in idle_mix] + [("held", ew)]
        return self._fsm_pose(library)

    def _current_pose(self, library: ClipLibrary) -> Pose:
        """Output as of the most recent tick (or the cold-start idle pose)."""
        if self.last_pose is not None:
            return self.last_pose
        return self._fsm_pose(library)[0]

    def take_transitions(self) -> list[tuple[str, str]]:
        """Drain the (from, to) transition log; used by safety tests."""
        out = self._transitions
        self._transitions = []
        return out
