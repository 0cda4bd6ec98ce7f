"""Per-tick 2D frame description: layers, serialization, hashing.

A frame is a painter-ordered list of filled polygons. The JSON form is the
documented interchange format (consoles draw straight from it); the hash
is computed over a canonical binary encoding so determinism checks are
bit-exact and cheap enough to run every tick.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass


@dataclass(frozen=True)
class Layer:
    kind: str  # "silhouette" | "shadow"
    avatar: str
    light: str | None  # shadow layers carry their (light, screen) pair
    screen: str | None
    depth: float  # camera-axis distance; larger paints earlier
    color: tuple[float, float, float, float]
    points: tuple[tuple[float, float], ...]

    def source(self):
        if self.kind == "shadow":
            return (self.avatar, self.light, self.screen)
        return self.avatar


@dataclass(frozen=True)
class RenderFrame:
    tick: int
    time: float
    layers: tuple[Layer, ...]


def frame_to_dict(frame: RenderFrame) -> dict:
    layers = []
    for layer in frame.layers:
        source = {"avatar": layer.avatar}
        if layer.kind == "shadow":
            source["light"] = layer.light
            source["screen"] = layer.screen
        layers.append(
            {
                "kind": layer.kind,
                "source": source,
                "depth": layer.depth,
                "color": list(layer.color),
                "points": [[x, y] for x, y in layer.points],
            }
        )
    return {"tick": frame.tick, "time": frame.time, "layers": layers}


def frame_to_json(frame: RenderFrame) -> str:
    return json.dumps(frame_to_dict(frame), sort_keys=True, separators=(",", ":"))


def frame_hash(frame: RenderFrame) -> str:
    """sha256 over a canonical binary encoding (exact float64 bits)."""
    h = hashlib.sha256()
    h.update(struct.pack("<Qd", frame.tick, frame.time))
    for layer in frame.layers:
        for text in (layer.kind, layer.avatar, layer.light or "", layer.screen or ""):
            raw = text.encode("utf-8")
            h.update(struct.pack("<I", len(raw)))
            h.update(raw)
        h.update(struct.pack("<5d", layer.depth, *layer.color))
        h.update(struct.pack("<I", len(layer.points)))
        for x, y in layer.points:
            h.update(struct.pack("<2d", x, y))
    return h.hexdigest()


def chain_hash(previous: str, frame: RenderFrame) -> str:
    """Rolling digest across a frame sequence; '' seeds the chain."""
    h = hashlib.sha256()
    h.update(previous.encode("ascii"))
    h.update(frame_hash(frame).encode("ascii"))
    return h.hexdigest()


def _css_color(color) -> str:
    r, g, b, a = color
    return f"rgba({int(round(r * 255))},{int(round(g * 255))},{int(round(b * 255))},{a:.3f})"


def frame_to_svg(frame: RenderFrame, viewport: tuple[float, float]) -> str:
    """One <g> per layer in painter order, for golden-file review."""
    w, hgt = viewport
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w:g}" height="{hgt:g}" '
        f'viewBox="0 0 {w:g} {hgt:g}">',
        f'<rect width="{w:g}" height="{hgt:g}" fill="#101014"/>',
    ]
    for i, layer in enumerate(frame.layers):
        pts = " ".join(f"{x:.3f},{y:.3f}" for x, y in layer.points)
        label = layer.avatar if layer.kind == "silhouette" else (
            f"{layer.avatar}-{layer.light}-{layer.screen}"
        )
        parts.append(f'<g id="layer{i}-{layer.kind}-{label}">')
        parts.append(f'<polygon points="{pts}" fill="{_css_color(layer.color)}"/>')
        parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts)
