"""Benchmark harness: scripted trajectories, per-frame metrics, CSV output.

Counts (passes, triangles, fragments) are exactly reproducible across runs
and worker counts; wall times are machine-dependent and reported as the
trend signal only.
"""

from __future__ import annotations

import math
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .fixtures import build_four_room_scene, build_test_scene, build_transition_scene, look_at_pose
from .geometry import Pose
from .scene import Scene
from .scene_io import load_scene
from .scheduler import (
    FrameRenderer,
    RenderMode,
    RenderTargets,
    frame_step,
    plan_passes,
)

SPEED_MPS = 1.5
TICK_S = 1.0 / 30.0


@dataclass
class FrameMetrics:
    frame: int
    total_ms: float
    plan_ms: float
    raster_ms: float
    pass_count: int
    triangles_submitted: int
    fragments_shaded: int
    fragments_stencil_rejected: int
    fragments_depth_rejected: int
    space: int
    per_pass: list[dict] = field(default_factory=list)
    image: Optional[bytes] = None  # zlib-compressed RGBA of the stereo target
    image_size: tuple[int, int] = (0, 0)


@dataclass
class BenchConfig:
    scene: str = "test:3"
    mode: RenderMode = RenderMode.NAIVE_MULTI_PASS
    frames: int = 30
    width: int = 256  # per eye
    height: int = 256
    trajectory: str = "orbit"
    seed: int = 0
    frustum_cull: bool = True
    portal_box: bool = True
    hidden_area_mask: bool = False
    workers: int = 1
    dump_every: Optional[int] = None

    def __post_init__(self):
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        if self.width < 16 or self.height < 16:
            raise ValueError("resolution must be at least 16x16 per eye")


@dataclass
class BenchRun:
    config: BenchConfig
    portal_count: int
    series: list[FrameMetrics]
    summary: dict[str, float]


def resolve_scene(selector: str) -> Scene:
    if selector.startswith("test:"):
        return build_test_scene(int(selector.split(":", 1)[1]))
    if selector == "rooms":
        return build_four_room_scene()
    if selector == "transition":
        return build_transition_scene()
    return load_scene(selector)


class OrbitTrajectory:
    """Circle the arena center, always looking at it; never crosses portals."""

    def __init__(self, scene: Scene, frames: int, seed: int, radius: float = 11.0):
        self.frames = frames
        self.radius = radius
        self.phase = (seed % 360) * math.pi / 180.0
        self.height = 1.7

    def initial_pose(self, rig) -> Pose:
        # Place the rig on the ring directly; walking there from the scene
        # start pose could tunnel through a portal.
        return self.target_pose(0, rig)

    def target_pose(self, i: int, rig) -> Pose:
        a = self.phase + 2.0 * math.pi * i / max(self.frames, 1)
        eye = (self.radius * math.sin(a), self.height, self.radius * math.cos(a))
        return look_at_pose(eye, (0.0, 1.2, 0.0))

    def on_teleport(self):
        pass


class FixedTrajectory:
    def __init__(self, scene: Scene, frames: int, seed: int):
        self.pose = scene.rig.head

    def initial_pose(self, rig) -> Pose:
        return self.pose

    def target_pose(self, i: int, rig) -> Pose:
        return self.pose

    def on_teleport(self):
        pass


class WalkthroughTrajectory:
    """Walk to the first portal, enter it obliquely, keep walking after it.

    The approach leg comes in at roughly 30 degrees off the portal normal,
    so one eye always leads the head through the plane.
    """

    def __init__(self, scene: Scene, frames: int, seed: int):
        self.step = SPEED_MPS * TICK_S
        self.crossed = False
        rng = np.random.default_rng(seed)
        self.waypoints: list[np.ndarray] = []
        portals = scene.enabled_portals()
        if portals:
            portal = portals[0]
            n = portal.front_normal()
            lateral = portal.pose.apply_direction((1.0, 0.0, 0.0))
            c = portal.position.copy()
            c[1] = scene.rig.head.position[1]
            offset = 1.2 + 0.2 * float(rng.uniform(-1.0, 1.0))
            approach = c + 2.0 * n + offset * lateral
            beyond = c - 0.4 * n
            self.waypoints = [approach, beyond]
        else:
            fwd = scene.rig.head.forward()
            self.waypoints = [scene.rig.head.position + 6.0 * fwd]

    def initial_pose(self, rig) -> Pose:
        return rig.head

    def target_pose(self, i: int, rig) -> Pose:
        pos = rig.head.position
        if self.crossed or not self.waypoints:
            d = rig.head.forward()
            d = np.array([d[0], 0.0, d[2]])
            n = np.linalg.norm(d)
            d = d / n if n > 1e-9 else np.array([0.0, 0.0, -1.0])
            return look_at_pose(pos + self.step * d, pos + (self.step + 1.0) * d)
        wp = self.waypoints[0]
        d = wp - pos
        d[1] = 0.0
        dist = float(np.linalg.norm(d))
        if dist <= self.step:
            self.waypoints.pop(0)
            step = d
        else:
            step = d / dist * self.step
        new = pos + step
        look_dir = step / max(float(np.linalg.norm(step)), 1e-9)
        return look_at_pose(new, new + look_dir)

    def on_teleport(self):
        self.crossed = True
        self.waypoints = []


TRAJECTORIES = {
    "orbit": OrbitTrajectory,
    "fixed": FixedTrajectory,
    "walkthrough": WalkthroughTrajectory,
}


def run_bench(config: BenchConfig) -> BenchRun:
    """Render the configured trajectory and collect per-frame metrics."""
    scene = resolve_scene(config.scene)
    if config.trajectory not in TRAJECTORIES:
        raise ValueError(f"unknown trajectory {config.trajectory!r} "
                         f"(available: {', '.join(sorted(TRAJECTORIES))})")
    traj = TRAJECTORIES[config.trajectory](scene, config.frames, config.seed)
    targets = RenderTargets.create(config.width, config.height)
    renderer = FrameRenderer(
        scene, targets, portal_box=config.portal_box, workers=config.workers
    )
    rig = scene.rig.moved(traj.initial_pose(scene.rig))
    current_space = scene.start_space
    series: list[FrameMetrics] = []
    for i in range(config.frames):
        t0 = time.perf_counter()
        target_pose = traj.target_pose(i, rig)
        rig, events = frame_step(scene, rig, rig.head, target_pose)
        for ev in events:
            current_space = scene.partner_of(ev.portal_id).space
            traj.on_teleport()
        t1 = time.perf_counter()
        plan = plan_passes(
            scene, rig, config.mode, config.frustum_cull,
            current_space=current_space, hidden_area_mask=config.hidden_area_mask,
        )
        t2 = time.perf_counter()
        frame = renderer.execute_plan(plan)
        t3 = time.perf_counter()

        image = None
        size = (0, 0)
        if config.dump_every and (i % config.dump_every == 0 or i == config.frames - 1):
            buf = targets.main.frame.color
            image = zlib.compress(buf.tobytes(), level=6)
            size = (targets.main.frame.width, targets.main.frame.height)
        series.append(
            FrameMetrics(
                frame=i,
                total_ms=(t3 - t0) * 1000.0,
                plan_ms=(t2 - t1) * 1000.0,
                raster_ms=(t3 - t2) * 1000.0,
                pass_count=frame.pass_count,
                triangles_submitted=frame.triangles_submitted,
                fragments_shaded=frame.fragments_shaded,
                fragments_stencil_rejected=frame.total("fragments_stencil_rejected"),
                fragments_depth_rejected=frame.total("fragments_depth_rejected"),
                space=current_space,
                per_pass=[
                    {
                        "index": r.index,
                        "purpose": r.purpose,
                        "eye": r.eye,
                        "space": r.space,
                        "portal": r.portal_id,
                        "fragments_shaded": r.stats.fragments_shaded,
                        "ms": r.ms,
                    }
                    for r in frame.records
                ],
                image=image,
                image_size=size,
            )
        )
    return BenchRun(config, len(scene.enabled_portals()), series, summarize(series))


def summarize(series: list[FrameMetrics]) -> dict[str, float]:
    n = len(series)
    avg = lambda k: sum(getattr(m, k) for m in series) / n
    frame_ms = avg("total_ms")
    return {
        "fps": 1000.0 / frame_ms if frame_ms > 0 else float("inf"),
        "frame_ms": frame_ms,
        "plan_ms": avg("plan_ms"),
        "raster_ms": avg("raster_ms"),
        "passes": avg("pass_count"),
        "fragments": avg("fragments_shaded"),
    }


SUMMARY_ROWS = ("fps", "frame_ms", "plan_ms", "raster_ms", "passes", "fragments")
SUMMARY_COLUMNS = (0, 2, 4, 6)


def emit_csv(runs: list[BenchRun], path) -> tuple[Path, Path]:
    """Write the portal-count summary matrix and the per-frame long CSV.

    The matrix puts one column per portal count (0/2/4/6) and one row per
    metric; the long CSV at `<stem>_frames.csv` has one row per frame.
    Absolute times are machine-specific; the footer says so.
    """
    if not runs or not any(r.series for r in runs):
        raise ValueError("cannot emit CSV from an empty series")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    by_count: dict[int, BenchRun] = {}
    for r in runs:
        by_count.setdefault(r.portal_count, r)

    lines = ["metric," + ",".join(str(c) for c in SUMMARY_COLUMNS)]
    for row in SUMMARY_ROWS:
        cells = []
        for c in SUMMARY_COLUMNS:
            run = by_count.get(c)
            cells.append(f"{run.summary[row]:.3f}" if run is not None else "")
        lines.append(f"{row}," + ",".join(cells))
    lines.append("# wall times are machine-specific; pass and fragment counts are the "
                 "reproducible signal")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    frames_path = path.with_name(path.stem + "_frames.csv")
    header = ("portals,mode,trajectory,frame,total_ms,plan_ms,raster_ms,passes,"
              "triangles,fragments_color,fragments_stencil_rejected,space")
    rows = [header]
    for r in runs:
        for m in r.series:
            rows.append(
                f"{r.portal_count},{r.config.mode.value},{r.config.trajectory},{m.frame},"
                f"{m.total_ms:.3f},{m.plan_ms:.3f},{m.raster_ms:.3f},{m.pass_count},"
                f"{m.triangles_submitted},{m.fragments_shaded},"
                f"{m.fragments_stencil_rejected},{m.space}"
            )
    frames_path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return path, frames_path


def emit_frames(run: BenchRun, directory, every: int = 1) -> list[Path]:
    """Write the captured stereo frames as PNG files."""
    from PIL import Image

    if every < 1:
        raise ValueError("every must be >= 1")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for m in run.series:
        if m.image is None or m.frame % every != 0:
            continue
        w, h = m.image_size
        rgba = np.frombuffer(zlib.decompress(m.image), dtype=np.uint8).reshape(h, w, 4)
        p = directory / f"{run.config.mode.value}_{m.frame:05d}.png"
        Image.fromarray(rgba, mode="RGBA").save(p, format="PNG")
        written.append(p)
    if not written:
        raise ValueError("no captured frames to write; set dump_every in the config")
    return written
