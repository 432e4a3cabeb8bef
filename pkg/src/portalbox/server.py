"""Live walkthrough server: one simulation loop, any number of viewers.

The first connection holds input authority; later viewers spectate. Input
events drain at the start of each tick (frame-atomic), the rig integrates
at 1.5 m/s with a fixed simulation step, and every rendered frame is
broadcast as a lossless frame message. Slow clients drop frames rather
than stalling the loop. Non-websocket GETs serve the viewer page and a
/healthz liveness probe.
"""

from __future__ import annotations

import asyncio
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .geometry import Pose
from .protocol import InputEvent, encode_frame, parse_input_event
from .scene import Scene
from .scheduler import FrameRenderer, RenderMode, RenderTargets, frame_step, plan_passes

WS_PATH = "/ws"
TICK_S = 1.0 / 30.0
SPEED_MPS = 1.5
PITCH_LIMIT = math.pi / 2 - 1e-3

_MIME = {".html": "text/html", ".js": "text/javascript", ".css": "text/css",
         ".map": "application/json", ".png": "image/png"}


def apply_inputs(rig, events: list[InputEvent], dt: float, *, speed: float = SPEED_MPS):
    """Apply look deltas then translate along the new facing, on the floor plane.

    Move events set the held movement vector; the last one in the batch
    wins. Returns (rig', held_move) so the caller can persist key state.
    """
    if dt <= 0:
        raise ValueError("dt must be > 0")
    head = rig.head
    fwd = head.forward()
    yaw = math.atan2(-fwd[0], -fwd[2])
    pitch = math.asin(max(-1.0, min(1.0, fwd[1])))
    move: Optional[tuple[float, float]] = None
    for ev in events:
        if ev.kind == "look":
            yaw += ev.look[0]
            pitch = max(-PITCH_LIMIT, min(PITCH_LIMIT, pitch + ev.look[1]))
        elif ev.kind == "move":
            move = ev.move
    pose = Pose.from_yaw_pitch_roll(head.position, yaw, pitch, 0.0)
    if move is not None and (move[0] or move[1]):
        flat_fwd = np.array([-math.sin(yaw), 0.0, -math.cos(yaw)])
        right = np.array([math.cos(yaw), 0.0, -math.sin(yaw)])
        step = (move[1] * flat_fwd + move[0] * right) * speed * dt
        pose = Pose(pose.position + step, pose.orientation)
    return rig.moved(pose), move


@dataclass
class SimToggles:
    portal_box: bool = True
    stencil: bool = False
    instanced: bool = False
    hidden_area: bool = False
    freeze_left: bool = False

    @property
    def mode(self) -> RenderMode:
        if self.stencil and self.instanced:
            return RenderMode.STENCIL_INSTANCED
        if self.stencil:
            return RenderMode.STENCIL_MULTI_PASS
        if self.instanced:
            return RenderMode.INSTANCED_SINGLE_PASS
        return RenderMode.NAIVE_MULTI_PASS

    def flip(self, name: str):
        attr = {"portal-box": "portal_box", "stencil": "stencil", "instanced": "instanced",
                "hidden-area": "hidden_area", "freeze-left-eye-debug": "freeze_left"}[name]
        setattr(self, attr, not getattr(self, attr))

    def as_dict(self) -> dict:
        return {
            "portal-box": self.portal_box,
            "stencil": self.stencil,
            "instanced": self.instanced,
            "hidden-area": self.hidden_area,
            "freeze-left-eye-debug": self.freeze_left,
        }


class Simulation:
    """Single-writer simulation: drain inputs, step, render, encode."""

    def __init__(self, scene: Scene, width: int = 256, height: int = 256,
                 workers: int = 1):
        self.scene = scene
        self.rig = scene.rig
        self.space = scene.start_space
        self.toggles = SimToggles()
        self.targets = RenderTargets.create(width, height)
        self.renderer = FrameRenderer(scene, self.targets, workers=workers)
        self.frame_index = 0
        self.held_move: tuple[float, float] = (0.0, 0.0)
        self._frozen_left: Optional[np.ndarray] = None

    def tick(self, events: list[InputEvent], dt: float = TICK_S) -> bytes:
        for ev in events:
            if ev.kind == "toggle":
                before = self.toggles.freeze_left
                self.toggles.flip(ev.toggle)
                self.renderer.portal_box = self.toggles.portal_box
                if not before and self.toggles.freeze_left:
                    self._frozen_left = None  # captured after the next render
                if before and not self.toggles.freeze_left:
                    self._frozen_left = None
            elif ev.kind == "respawn":
                self.rig = self.scene.rig
                self.space = self.scene.start_space
                self.held_move = (0.0, 0.0)

        motion = [ev for ev in events if ev.kind in ("move", "look")]
        if not any(ev.kind == "move" for ev in motion) and self.held_move != (0.0, 0.0):
            motion.append(InputEvent("move", move=self.held_move))
        prev_head = self.rig.head
        rig, held = apply_inputs(self.rig, motion, dt)
        if held is not None:
            self.held_move = held
        self.rig, crossings = frame_step(self.scene, rig, prev_head, rig.head)
        for ev in crossings:
            self.space = self.scene.partner_of(ev.portal_id).space

        t0 = time.perf_counter()
        plan = plan_passes(
            self.scene, self.rig, self.toggles.mode, True,
            current_space=self.space, hidden_area_mask=self.toggles.hidden_area,
        )
        frame = self.renderer.execute_plan(plan)
        ms = (time.perf_counter() - t0) * 1000.0

        buf = self.targets.main.frame.color
        half = self.targets.main.eye_width
        if self.toggles.freeze_left:
            if self._frozen_left is None:
                self._frozen_left = buf[:, :half].copy()
            composed = buf.copy()
            composed[:, :half] = self._frozen_left
            rgba = composed.tobytes()
        else:
            rgba = buf.tobytes()

        head = self.rig.head
        metrics = {
            "frame": self.frame_index,
            "pass_count": frame.pass_count,
            "fragments_shaded": frame.fragments_shaded,
            "triangles_submitted": frame.triangles_submitted,
            "frame_ms": round(ms, 3),
            "space": self.space,
            "head": {
                "position": [round(float(v), 5) for v in head.position],
            },
            "toggles": self.toggles.as_dict(),
        }
        msg = encode_frame(
            self.frame_index, self.targets.main.frame.width,
            self.targets.main.frame.height, rgba, metrics,
        )
        self.frame_index += 1
        return msg


class StreamServer:
    def __init__(self, scene: Scene, port: int, *, width: int = 256, height: int = 256,
                 workers: int = 1, static_dir: Optional[Path] = None,
                 tick_rate: float = 30.0):
        self.sim = Simulation(scene, width, height, workers)
        self.port = port
        self.tick_s = 1.0 / tick_rate
        self.static_dir = static_dir
        self.inputs: asyncio.Queue[InputEvent] = asyncio.Queue()
        self.clients: dict = {}
        self.authority = None
        self._stop = asyncio.Event()

    # -- HTTP side ---------------------------------------------------------

    def _static_response(self, connection, request):
        if request.path == WS_PATH:
            return None  # proceed with the websocket handshake
        if request.path == "/healthz":
            return connection.respond(200, "ok\n")
        if self.static_dir is not None:
            rel = request.path.lstrip("/") or "index.html"
            candidate = (self.static_dir / rel).resolve()
            if candidate.is_file() and str(candidate).startswith(str(self.static_dir.resolve())):
                from websockets.datastructures import Headers
                from websockets.http11 import Response

                body = candidate.read_bytes()
                ctype = _MIME.get(candidate.suffix, "application/octet-stream")
                return Response(200, "OK", Headers([
                    ("Content-Type", ctype), ("Content-Length", str(len(body))),
                ]), body)
        return connection.respond(404, "not found\n")

    # -- websocket side ------------------------------------------------------

    async def _handler(self, ws):
        queue: asyncio.Queue[bytes] = asyncio.Queue(maxsize=4)
        self.clients[ws] = queue
        if self.authority is None:
            self.authority = ws
        sender = asyncio.create_task(self._send_loop(ws, queue))
        try:
            async for message in ws:
                if isinstance(message, bytes):
                    continue
                if ws is not self.authority:
                    continue
                try:
                    self.inputs.put_nowait(parse_input_event(message))
                except ValueError:
                    pass
        finally:
            sender.cancel()
            self.clients.pop(ws, None)
            if self.authority is ws:
                self.authority = next(iter(self.clients), None)

    async def _send_loop(self, ws, queue: asyncio.Queue):
        while True:
            msg = await queue.get()
            await ws.send(msg)

    async def _frame_loop(self):
        loop = asyncio.get_running_loop()
        next_tick = loop.time()
        while not self._stop.is_set():
            if not self.clients:
                self.sim.held_move = (0.0, 0.0)
                await asyncio.sleep(0.05)
                next_tick = loop.time()
                continue
            events = []
            while not self.inputs.empty():
                events.append(self.inputs.get_nowait())
            msg = await loop.run_in_executor(None, self.sim.tick, events, TICK_S)
            for queue in list(self.clients.values()):
                if queue.full():
                    try:
                        queue.get_nowait()  # drop the oldest frame, never stall
                    except asyncio.QueueEmpty:
                        pass
                queue.put_nowait(msg)
            next_tick += self.tick_s
            delay = next_tick - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            else:
                next_tick = loop.time()

    async def run(self):
        from websockets.asyncio.server import serve

        async with serve(
            self._handler, "0.0.0.0", self.port,
            process_request=self._static_response, max_size=64 * 1024 * 1024,
        ):
            looper = asyncio.create_task(self._frame_loop())
            try:
                await self._stop.wait()
            finally:
                looper.cancel()

    def stop(self):
        self._stop.set()


def serve_scene(scene: Scene, port: int, **kwargs) -> None:
    """Blocking entry point: run the stream server until interrupted."""
    server = StreamServer(scene, port, **kwargs)
    try:
        asyncio.run(server.run())
    except KeyboardInterrupt:
        pass
