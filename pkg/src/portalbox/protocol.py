"""Wire format between the simulation server and viewers.

Server -> client messages are binary: one type byte, then the payload.
Frame messages carry a fixed header, a JSON metrics blob, and the
zlib-compressed RGBA image (lossless; viewer pixels stay oracle-grade).
A CRC32 of the raw RGBA rides in the header so the viewer can prove its
decoded pixels match the server's.

    offset  size  field
    0       1     message type (0x01 = frame)
    1       4     frame index          (u32 LE)
    5       2     total width          (u16 LE, both eyes side by side)
    7       2     height               (u16 LE)
    9       4     CRC32 of raw RGBA    (u32 LE)
    13      4     metrics JSON length  (u32 LE)
    17      n     metrics JSON (UTF-8)
    17+n    4     payload length       (u32 LE)
    21+n    m     zlib-compressed RGBA

Client -> server messages are text frames holding one JSON object:
{"kind": "move", "x": strafe, "y": forward, "t": ms}
{"kind": "look", "yaw": radians, "pitch": radians, "t": ms}
{"kind": "toggle", "name": "portal-box" | "stencil" | "instanced" |
                   "hidden-area" | "freeze-left-eye-debug", "t": ms}
{"kind": "respawn", "t": ms}
"""

from __future__ import annotations

import json
import math
import struct
import zlib
from dataclasses import dataclass, field
from typing import Any, Optional

MSG_FRAME = 0x01

TOGGLE_NAMES = ("portal-box", "stencil", "instanced", "hidden-area", "freeze-left-eye-debug")

_HEADER = struct.Struct("<BIHHII")


class ProtocolError(ValueError):
    pass


@dataclass
class FrameMessage:
    frame_index: int
    width: int
    height: int
    checksum: int
    metrics: dict[str, Any]
    rgba: bytes


def encode_frame(frame_index: int, width: int, height: int, rgba: bytes,
                 metrics: dict[str, Any]) -> bytes:
    crc = zlib.crc32(rgba) & 0xFFFFFFFF
    meta = dict(metrics)
    meta["checksum"] = crc
    meta_bytes = json.dumps(meta, separators=(",", ":")).encode("utf-8")
    payload = zlib.compress(rgba, 6)
    head = _HEADER.pack(MSG_FRAME, frame_index, width, height, crc, len(meta_bytes))
    return head + meta_bytes + struct.pack("<I", len(payload)) + payload


def decode_frame(data: bytes) -> FrameMessage:
    if len(data) < _HEADER.size:
        raise ProtocolError("frame message too short")
    mtype, index, width, height, crc, meta_len = _HEADER.unpack_from(data, 0)
    if mtype != MSG_FRAME:
        raise ProtocolError(f"unexpected message type 0x{mtype:02x}")
    off = _HEADER.size
    meta_end = off + meta_len
    if len(data) < meta_end + 4:
        raise ProtocolError("truncated metrics blob")
    metrics = json.loads(data[off:meta_end].decode("utf-8"))
    (payload_len,) = struct.unpack_from("<I", data, meta_end)
    payload = data[meta_end + 4:meta_end + 4 + payload_len]
    if len(payload) != payload_len:
        raise ProtocolError("truncated image payload")
    try:
        rgba = zlib.decompress(payload)
    except zlib.error as e:
        raise ProtocolError(f"corrupt image payload: {e}") from e
    if len(rgba) != width * height * 4:
        raise ProtocolError("image payload has the wrong size")
    if (zlib.crc32(rgba) & 0xFFFFFFFF) != crc:
        raise ProtocolError("image checksum mismatch")
    return FrameMessage(index, width, height, crc, metrics, rgba)


@dataclass
class InputEvent:
    kind: str  # move | look | toggle | respawn
    move: tuple[float, float] = (0.0, 0.0)  # strafe (+right), forward (+ahead)
    look: tuple[float, float] = (0.0, 0.0)  # yaw delta, pitch delta (radians)
    toggle: Optional[str] = None
    timestamp: float = 0.0


def parse_input_event(text: str) -> InputEvent:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ProtocolError(f"malformed input event: {e}") from e
    kind = doc.get("kind")
    t = float(doc.get("t", 0.0))
    if kind == "move":
        x, y = float(doc.get("x", 0.0)), float(doc.get("y", 0.0))
        mag = math.hypot(x, y)
        if mag > 1.0:
            x, y = x / mag, y / mag
        return InputEvent("move", move=(x, y), timestamp=t)
    if kind == "look":
        return InputEvent("look", look=(float(doc.get("yaw", 0.0)), float(doc.get("pitch", 0.0))),
                          timestamp=t)
    if kind == "toggle":
        name = doc.get("name")
        if name not in TOGGLE_NAMES:
            raise ProtocolError(f"unknown toggle {name!r}")
        return InputEvent("toggle", toggle=name, timestamp=t)
    if kind == "respawn":
        return InputEvent("respawn", timestamp=t)
    raise ProtocolError(f"unknown input kind {kind!r}")
