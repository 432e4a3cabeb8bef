"""Impossible-space validation: reachability and real-space containment.

A user who walks through portals stays inside the tracked play area while
their virtual position wanders room to room. For a room reached through
portals p1, p2, ..., pk the virtual-to-real map is the inverse of the
composed teleport transforms; containment holds when every walkable point
of the room maps into the tracked rectangle. Walkable points are sampled
on a grid over the room's upward-facing floor triangles.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .geometry import Transform
from .portals import portal_view_transform
from .scene import Scene, SpaceId

FLOOR_NORMAL_MIN_Y = 0.9


@dataclass
class SpaceReport:
    space: SpaceId
    reachable: bool
    contained: bool
    sampled_points: int = 0
    violations: list[tuple[float, float]] = field(default_factory=list)


@dataclass
class ValidationReport:
    start_space: SpaceId
    spaces: dict[SpaceId, SpaceReport]

    @property
    def all_reachable(self) -> bool:
        return all(r.reachable for r in self.spaces.values())

    @property
    def all_contained(self) -> bool:
        return all(r.contained for r in self.spaces.values() if r.reachable)

    @property
    def ok(self) -> bool:
        return self.all_reachable and self.all_contained

    def summary(self) -> str:
        lines = [f"start space: {self.start_space}"]
        for sid in sorted(self.spaces):
            r = self.spaces[sid]
            state = "unreachable" if not r.reachable else (
                "contained" if r.contained else f"{len(r.violations)} points outside"
            )
            lines.append(f"space {sid}: {state} ({r.sampled_points} samples)")
        return "\n".join(lines)


def space_graph_paths(scene: Scene) -> dict[SpaceId, Transform]:
    """BFS over enabled portal pairs: real-to-virtual transform per space.

    The start space maps with the identity; crossing a portal composes its
    teleport transform on the left. First-found (shortest) path wins when
    loops exist.
    """
    paths: dict[SpaceId, Transform] = {scene.start_space: Transform.identity()}
    queue = deque([scene.start_space])
    while queue:
        sid = queue.popleft()
        for portal in scene.enabled_portals():
            if portal.space != sid:
                continue
            dst = scene.partner_of(portal.id)
            if dst.space in paths:
                continue
            step = portal_view_transform(portal, dst)
            paths[dst.space] = step @ paths[sid]
            queue.append(dst.space)
    return paths


def _floor_triangles_2d(scene: Scene, space: SpaceId) -> np.ndarray:
    tris = []
    for mesh in scene.meshes:
        if mesh.space != space:
            continue
        t = mesh.triangles
        n = np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0])
        lens = np.linalg.norm(n, axis=1)
        up = np.zeros(len(t), dtype=bool)
        ok = lens > 1e-12
        up[ok] = n[ok, 1] / lens[ok] > FLOOR_NORMAL_MIN_Y
        if up.any():
            tris.append(t[up])
    if not tris:
        return np.empty((0, 3, 3))
    return np.concatenate(tris)


def _sample_walkable(tris: np.ndarray, grid: float) -> np.ndarray:
    """Grid points (x, y, z) covered by the floor triangles, seen from above."""
    if len(tris) == 0:
        return np.empty((0, 3))
    xz = tris[:, :, [0, 2]]
    lo = xz.reshape(-1, 2).min(axis=0)
    hi = xz.reshape(-1, 2).max(axis=0)
    xs = np.arange(lo[0] + grid / 2, hi[0], grid)
    zs = np.arange(lo[1] + grid / 2, hi[1], grid)
    if len(xs) == 0 or len(zs) == 0:
        return np.empty((0, 3))
    gx, gz = np.meshgrid(xs, zs)
    pts = np.stack([gx.ravel(), gz.ravel()], axis=1)
    covered = np.zeros(len(pts), dtype=bool)
    heights = np.zeros(len(pts))
    for tri in tris:
        a, b, c = tri[:, [0, 2]]
        d = float((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
        if abs(d) < 1e-12:
            continue
        w0 = (b[0] - pts[:, 0]) * (c[1] - pts[:, 1]) - (b[1] - pts[:, 1]) * (c[0] - pts[:, 0])
        w1 = (c[0] - pts[:, 0]) * (a[1] - pts[:, 1]) - (c[1] - pts[:, 1]) * (a[0] - pts[:, 0])
        w2 = (a[0] - pts[:, 0]) * (b[1] - pts[:, 1]) - (a[1] - pts[:, 1]) * (b[0] - pts[:, 0])
        if d > 0:
            inside = (w0 >= 0) & (w1 >= 0) & (w2 >= 0)
        else:
            inside = (w0 <= 0) & (w1 <= 0) & (w2 <= 0)
        newly = inside & ~covered
        if newly.any():
            l0 = w0[newly] / d
            l1 = w1[newly] / d
            l2 = w2[newly] / d
            heights[newly] = l0 * tri[0, 1] + l1 * tri[1, 1] + l2 * tri[2, 1]
            covered |= inside
    pts3 = np.stack([pts[covered, 0], heights[covered], pts[covered, 1]], axis=1)
    return pts3


def validate_impossible_space(scene: Scene, grid: float = 0.05) -> ValidationReport:
    """Check that every space is reachable and folds into the tracked bounds."""
    paths = space_graph_paths(scene)
    bounds = scene.tracked_bounds
    reports: dict[SpaceId, SpaceReport] = {}
    for sid in sorted(scene.spaces):
        if sid not in paths:
            reports[sid] = SpaceReport(sid, reachable=False, contained=False)
            continue
        to_real = paths[sid].inverse()
        walkable = _sample_walkable(_floor_triangles_2d(scene, sid), grid)
        if len(walkable) == 0:
            reports[sid] = SpaceReport(sid, reachable=True, contained=True, sampled_points=0)
            continue
        real = to_real.apply_points(walkable)
        bad = ~(
            (real[:, 0] >= bounds.min_x - 1e-9)
            & (real[:, 0] <= bounds.max_x + 1e-9)
            & (real[:, 2] >= bounds.min_z - 1e-9)
            & (real[:, 2] <= bounds.max_z + 1e-9)
        )
        violations = [(float(x), float(z)) for x, z in real[bad][:, [0, 2]][:32]]
        reports[sid] = SpaceReport(
            sid,
            reachable=True,
            contained=not bad.any(),
            sampled_points=len(walkable),
            violations=violations,
        )
    return ValidationReport(scene.start_space, reports)
