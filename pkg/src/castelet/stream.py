"""Live mocap wire protocol: length-framed binary over TCP.

Layout (all integers little-endian):

  handshake: magic ``CVOS`` | u16 version=1 | u32 hierarchy byte length |
             hierarchy bytes (UTF-8 BVH HIERARCHY block) | f32 frame_time |
             u32 channel_count
  frame:     u32 sequence | channel_count x f32

No acknowledgements; the receiver may simply disconnect on a protocol
error. Frames arriving out of order are dropped (a live puppet wants the
freshest pose, never a re-ordered one); gaps are counted but the late
frames still play.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .bvh import parse_hierarchy
from .errors import StreamProtocolError
from .skeleton import Skeleton

MAGIC = b"CVOS"
PROTOCOL_VERSION = 1

_HEAD_FIXED = struct.Struct("<4sHI")  # magic, version, hierarchy length
_HEAD_TAIL = struct.Struct("<fI")  # frame_time, channel_count
_FRAME_SEQ = struct.Struct("<I")


@dataclass
class StreamHeader:
    protocol_version: int
    hierarchy_text: str
    frame_time: float
    channel_count: int

    def skeleton(self) -> Skeleton:
        return parse_hierarchy(self.hierarchy_text)

    @staticmethod
    def for_skeleton(skeleton: Skeleton, frame_time: float) -> "StreamHeader":
        from .bvh import BvhDocument, serialize_bvh
        import numpy as np

        channel_count = sum(len(j.channel_spec) for j in skeleton.joints)
        doc = BvhDocument(skeleton, frame_time, np.zeros((1, channel_count)))
        hierarchy = serialize_bvh(doc).split("MOTION")[0].rstrip() + "\n"
        return StreamHeader(PROTOCOL_VERSION, hierarchy, frame_time, channel_count)


@dataclass
class StreamFrame:
    sequence: int
    channels: tuple[float, ...]


@dataclass
class GapEvent:
    after_sequence: int
    received_sequence: int

    @property
    def missing(self) -> int:
        return self.received_sequence - self.after_sequence - 1


def encode_handshake(header: StreamHeader) -> bytes:
    payload = header.hierarchy_text.encode("utf-8")
    return (
        _HEAD_FIXED.pack(MAGIC, header.protocol_version, len(payload))
        + payload
        + _HEAD_TAIL.pack(header.frame_time, header.channel_count)
    )


def encode_frame(frame: StreamFrame) -> bytes:
    return _FRAME_SEQ.pack(frame.sequence) + struct.pack(
        f"<{len(frame.channels)}f", *frame.channels
    )


@dataclass
class StreamDecoder:
    """Incremental single-consumer decoder; one instance per connection.

    Feed raw bytes as they arrive; complete frames come back in order.
    Protocol violations raise StreamProtocolError and the instance must be
    discarded (the peer gets disconnected anyway).
    """

    header: StreamHeader | None = None
    gaps: list[GapEvent] = field(default_factory=list)
    dropped_out_of_order: int = 0
    frames_decoded: int = 0
    _buf: bytearray = field(default_factory=bytearray)
    _last_seq: int | None = None
    _frame_struct: struct.Struct | None = None

    def feed(self, data: bytes) -> list[StreamFrame]:
        self._buf.extend(data)
        out: list[StreamFrame] = []
        if self.header is None and not self._try_handshake():
            return out
        while True:
            frame = self._try_frame()
            if frame is None:
                return out
            if self._last_seq is not None:
                if frame.sequence <= self._last_seq:
                    self.dropped_out_of_order += 1
                    continue
                if frame.sequence > self._last_seq + 1:
                    self.gaps.append(GapEvent(self._last_seq, frame.sequence))
            self._last_seq = frame.sequence
            self.frames_decoded += 1
            out.append(frame)

    def finish(self) -> int:
        """Call at disconnect; returns the number of trailing bytes discarded."""
        leftover = len(self._buf)
        self._buf.clear()
        return leftover

    def _try_handshake(self) -> bool:
        if len(self._buf) < _HEAD_FIXED.size:
            return False
        magic, version, hier_len = _HEAD_FIXED.unpack_from(self._buf, 0)
        if magic != MAGIC:
            raise StreamProtocolError(f"bad magic {magic!r}")
        if version != PROTOCOL_VERSION:
            raise StreamProtocolError(f"unsupported protocol version {version}")
        total = _HEAD_FIXED.size + hier_len + _HEAD_TAIL.size
        if len(self._buf) < total:
            return False
        hierarchy = bytes(self._buf[_HEAD_FIXED.size : _HEAD_FIXED.size + hier_len]).decode("utf-8")
        frame_time, channel_count = _HEAD_TAIL.unpack_from(self._buf, _HEAD_FIXED.size + hier_len)
        try:
            skeleton = parse_hierarchy(hierarchy)
        except Exception as exc:
            raise StreamProtocolError(f"handshake hierarchy does not parse: {exc}") from exc
        implied = sum(len(j.channel_spec) for j in skeleton.joints)
        if implied != channel_count:
            raise StreamProtocolError(
                f"handshake declares {channel_count} channels, hierarchy implies {implied}"
            )
        self.header = StreamHeader(version, hierarchy, frame_time, channel_count)
        self._frame_struct = struct.Struct(f"<I{channel_count}f")
        del self._buf[:total]
        return True

    def _try_frame(self) -> StreamFrame | None:
        fs = self._frame_struct
        if fs is None or len(self._buf) < fs.size:
            return None
        values = fs.unpack_from(self._buf, 0)
        del self._buf[: fs.size]
        return StreamFrame(values[0], values[1:])


def decode_stream(chunks) -> "tuple[StreamHeader, list[StreamFrame], StreamDecoder]":
    """Decode an iterable of byte chunks; returns (header, frames, decoder).

    The decoder is returned so callers can inspect gap/drop accounting.
    """
    decoder = StreamDecoder()
    frames: list[StreamFrame] = []
    for chunk in chunks:
        frames.extend(decoder.feed(chunk))
    decoder.finish()
    if decoder.header is None:
        raise StreamProtocolError("stream ended before the handshake completed")
    return decoder.header, frames, decoder
