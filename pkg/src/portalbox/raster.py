"""Deterministic software rasterizer.

A render pass resolves per-pixel depth winners across all of its draw
items first, then shades each winner once: fragment ordering never leaks
into the output, per-pass color fill is bounded by the viewport area, and
identical inputs produce byte-identical buffers regardless of how the
viewport is split across workers.

Fill convention is the top-left rule at pixel centers, so triangles that
share an edge cover each boundary pixel exactly once. Near-plane clipping
(or the oblique replacement plane) happens as polygon clipping in view
space before rasterization. Depth is view-space distance, interpolated
perspective-correctly via 1/z.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .geometry import Transform
from .scene import Mesh, Projection

Viewport = tuple[int, int, int, int]  # x0, y0, width, height

COMPARE_ALWAYS = "always"
COMPARE_EQUAL = "equal"
COMPARE_NOT_EQUAL = "not-equal"
WRITE_KEEP = "keep"
WRITE_REPLACE = "replace"

# Stencil value reserved for the hidden-area mask; shading passes that
# respect the mask never match it, so portal references stop at 254.
MASK_REJECT_REF = 255

_SIDE_GUARD = 1.125  # clip side planes slightly outside the viewport
_W_GUARD = 1e-4  # minimum view-space distance when the oblique plane rules


@dataclass(frozen=True)
class StencilPolicy:
    compare: str = COMPARE_ALWAYS
    ref: int = 0
    write: str = WRITE_KEEP
    color_write: bool = True
    depth_write: bool = True

    def __post_init__(self):
        if self.compare not in (COMPARE_ALWAYS, COMPARE_EQUAL, COMPARE_NOT_EQUAL):
            raise ValueError(f"unknown stencil compare {self.compare!r}")
        if self.write not in (WRITE_KEEP, WRITE_REPLACE):
            raise ValueError(f"unknown stencil write action {self.write!r}")
        if not 0 <= self.ref <= 255:
            raise ValueError("stencil reference must fit in 8 bits")

    @classmethod
    def permissive(cls) -> "StencilPolicy":
        return cls()

    @classmethod
    def mark_only(cls, ref: int) -> "StencilPolicy":
        """Writes the stencil reference where the geometry wins; nothing else."""
        return cls(compare=COMPARE_ALWAYS, ref=ref, write=WRITE_REPLACE,
                   color_write=False, depth_write=False)

    @classmethod
    def depth_only(cls) -> "StencilPolicy":
        return cls(color_write=False, depth_write=False)

    @classmethod
    def masked_to(cls, ref: int) -> "StencilPolicy":
        return cls(compare=COMPARE_EQUAL, ref=ref)


class FrameTarget:
    """Color/depth/stencil buffers plus a per-pixel space-id debug channel."""

    def __init__(self, width: int, height: int):
        if width < 1 or height < 1:
            raise ValueError("target must be at least 1x1")
        self.width = width
        self.height = height
        self.color = np.zeros((height, width, 4), dtype=np.uint8)
        self.depth = np.full((height, width), np.inf, dtype=np.float32)
        self.stencil = np.zeros((height, width), dtype=np.uint8)
        self.space_id = np.zeros((height, width), dtype=np.int32)
        self.reset_counters()
        self.clear_color = (0, 0, 0, 255)

    def reset_counters(self):
        self.fragments_shaded = 0
        self.fragments_stencil_rejected = 0
        self.fragments_depth_rejected = 0
        self.triangles_submitted = 0
        self.triangles_culled = 0

    def counters(self) -> dict[str, int]:
        return {
            "fragments_shaded": self.fragments_shaded,
            "fragments_stencil_rejected": self.fragments_stencil_rejected,
            "fragments_depth_rejected": self.fragments_depth_rejected,
            "triangles_submitted": self.triangles_submitted,
            "triangles_culled": self.triangles_culled,
        }


@dataclass
class StereoTarget:
    """One side-by-side buffer: left eye in columns [0, W), right in [W, 2W)."""

    frame: FrameTarget
    eye_width: int

    @classmethod
    def create(cls, eye_width: int, height: int) -> "StereoTarget":
        return cls(FrameTarget(eye_width * 2, height), eye_width)

    def viewport(self, eye: str) -> Viewport:
        if eye == "left":
            return (0, 0, self.eye_width, self.frame.height)
        if eye == "right":
            return (self.eye_width, 0, self.eye_width, self.frame.height)
        raise ValueError(f"unknown eye {eye!r}")


def clear(target: FrameTarget, color=(0, 0, 0, 255)) -> None:
    c = tuple(int(v) for v in color)
    if len(c) == 3:
        c = c + (255,)
    target.color[:] = np.array(c, dtype=np.uint8)
    target.depth[:] = np.inf
    target.stencil[:] = 0
    target.space_id[:] = 0
    target.reset_counters()
    target.clear_color = c


def read_pixel(target: FrameTarget, x: int, y: int):
    if not (0 <= x < target.width and 0 <= y < target.height):
        raise IndexError(f"pixel ({x}, {y}) outside {target.width}x{target.height} target")
    return (
        tuple(int(v) for v in target.color[y, x]),
        float(target.depth[y, x]),
        int(target.stencil[y, x]),
        int(target.space_id[y, x]),
    )


@dataclass
class DrawItem:
    """One mesh scheduled into a pass, with its stencil policy.

    When `screen_source` is set, shaded fragments copy color and space id
    from that target at the same pixel instead of using the mesh color
    (how portal surfaces display the portal-view result).
    """

    mesh: Mesh
    policy: StencilPolicy = field(default_factory=StencilPolicy.permissive)
    screen_source: Optional[FrameTarget] = None


@dataclass
class PassStats:
    fragments_shaded: int = 0
    fragments_stencil_rejected: int = 0
    fragments_depth_rejected: int = 0
    triangles_submitted: int = 0
    triangles_culled: int = 0

    def add_to(self, target: FrameTarget):
        target.fragments_shaded += self.fragments_shaded
        target.fragments_stencil_rejected += self.fragments_stencil_rejected
        target.fragments_depth_rejected += self.fragments_depth_rejected
        target.triangles_submitted += self.triangles_submitted
        target.triangles_culled += self.triangles_culled


@njit(cache=True, nogil=True)
def _raster_kernel(xy, invd, attr, bx0, by0, bx1, by1, ox, oy, win_depth, win_attr):
    """Rasterize triangles into the winner arrays for one pixel band.

    Pixel bounds [bx0, bx1) x [by0, by1) are in target coordinates; the
    winner arrays are indexed relative to the viewport origin (ox, oy).
    Coverage uses the top-left rule at pixel centers; the nearest fragment
    per pixel wins, first-submitted on exact depth ties. Returns the number
    of covered fragments and of screen-degenerate triangles skipped.
    """
    covered = 0
    degenerate = 0
    for t in range(xy.shape[0]):
        ax = xy[t, 0, 0]
        ay = xy[t, 0, 1]
        bx = xy[t, 1, 0]
        by = xy[t, 1, 1]
        cx = xy[t, 2, 0]
        cy = xy[t, 2, 1]
        ia = invd[t, 0]
        ib = invd[t, 1]
        ic = invd[t, 2]
        area = (bx - ax) * (cy - ay) - (cx - ax) * (by - ay)
        if area == 0.0:
            degenerate += 1
            continue
        if area < 0.0:
            bx, cx = cx, bx
            by, cy = cy, by
            ib, ic = ic, ib
            area = -area

        minx = min(ax, min(bx, cx))
        maxx = max(ax, max(bx, cx))
        miny = min(ay, min(by, cy))
        maxy = max(ay, max(by, cy))
        px0 = int(math.ceil(minx - 0.5))
        px1 = int(math.floor(maxx - 0.5))
        py0 = int(math.ceil(miny - 0.5))
        py1 = int(math.floor(maxy - 0.5))
        if px0 < bx0:
            px0 = bx0
        if py0 < by0:
            py0 = by0
        if px1 > bx1 - 1:
            px1 = bx1 - 1
        if py1 > by1 - 1:
            py1 = by1 - 1
        if px0 > px1 or py0 > py1:
            continue

        d0x = bx - ax
        d0y = by - ay
        d1x = cx - bx
        d1y = cy - by
        d2x = ax - cx
        d2y = ay - cy
        tl0 = (d0y == 0.0 and d0x > 0.0) or d0y < 0.0
        tl1 = (d1y == 0.0 and d1x > 0.0) or d1y < 0.0
        tl2 = (d2y == 0.0 and d2x > 0.0) or d2y < 0.0

        aid = attr[t]
        for py in range(py0, py1 + 1):
            pyc = py + 0.5
            for px in range(px0, px1 + 1):
                pxc = px + 0.5
                e0 = d0x * (pyc - ay) - d0y * (pxc - ax)
                if e0 < 0.0 or (e0 == 0.0 and not tl0):
                    continue
                e1 = d1x * (pyc - by) - d1y * (pxc - bx)
                if e1 < 0.0 or (e1 == 0.0 and not tl1):
                    continue
                e2 = d2x * (pyc - cy) - d2y * (pxc - cx)
                if e2 < 0.0 or (e2 == 0.0 and not tl2):
                    continue
                covered += 1
                w = (e1 * ia + e2 * ib + e0 * ic) / area
                d = 1.0 / w
                ly = py - oy
                lx = px - ox
                if d < win_depth[ly, lx]:
                    win_depth[ly, lx] = d
                    win_attr[ly, lx] = aid
    return covered, degenerate


def _clip_polygon(verts: np.ndarray, normal: np.ndarray, offset: float) -> np.ndarray:
    """Sutherland-Hodgman clip of a view-space polygon against one plane."""
    vals = verts @ normal + offset
    n = len(verts)
    out = []
    for i in range(n):
        j = (i + 1) % n
        va, vb = vals[i], vals[j]
        if va >= 0.0:
            out.append(verts[i])
        if (va >= 0.0) != (vb >= 0.0):
            t = va / (va - vb)
            out.append(verts[i] + t * (verts[j] - verts[i]))
    return np.array(out) if out else np.empty((0, 3))


def _clip_planes(proj: Projection) -> list[tuple[np.ndarray, float]]:
    tx, ty = proj.tan_half()
    sx, sy = tx * _SIDE_GUARD, ty * _SIDE_GUARD
    planes = []
    if proj.oblique is not None:
        n, d = proj.oblique
        planes.append((np.asarray(n, dtype=np.float64), float(d)))
        planes.append((np.array([0.0, 0.0, -1.0]), -_W_GUARD))
    else:
        planes.append((np.array([0.0, 0.0, -1.0]), -proj.near))
    planes.append((np.array([0.0, 0.0, 1.0]), proj.far))
    planes.append((np.array([-1.0, 0.0, -sx]), 0.0))
    planes.append((np.array([1.0, 0.0, -sx]), 0.0))
    planes.append((np.array([0.0, -1.0, -sy]), 0.0))
    planes.append((np.array([0.0, 1.0, -sy]), 0.0))
    return planes


def _project(view_pts: np.ndarray, proj: Projection, viewport: Viewport):
    """View-space points (..., 3) to screen xy (y down) and 1/depth."""
    vx0, vy0, vw, vh = viewport
    tx, ty = proj.tan_half()
    invd = 1.0 / (-view_pts[..., 2])
    ndc_x = view_pts[..., 0] * invd / tx
    ndc_y = view_pts[..., 1] * invd / ty
    sx = vx0 + (ndc_x + 1.0) * (vw * 0.5)
    sy = vy0 + (1.0 - ndc_y) * (vh * 0.5)
    return np.stack([sx, sy], axis=-1), invd


def execute_pass(
    target: FrameTarget,
    items: Sequence[DrawItem],
    view: Transform | Sequence[Transform],
    proj: Projection | Sequence[Projection],
    viewport: Viewport | Sequence[Viewport],
    *,
    workers: int = 1,
) -> PassStats:
    """Run one render pass: every item, one or two views, one depth resolve per view.

    With two views (instanced stereo) the geometry arrays are built once and
    each triangle is emitted into both viewports; `triangles_submitted` then
    counts each source triangle once. Projections may differ per view (the
    oblique plane lives in view space).
    """
    views = [view] if isinstance(view, Transform) else list(view)
    viewports = [viewport] if isinstance(viewport, tuple) else list(viewport)
    projs = [proj] * len(views) if isinstance(proj, Projection) else list(proj)
    if len(views) != len(viewports) or len(projs) != len(views):
        raise ValueError("need one viewport and one projection per view")
    for vp in viewports:
        x0, y0, w, h = vp
        if x0 < 0 or y0 < 0 or x0 + w > target.width or y0 + h > target.height:
            raise ValueError(f"viewport {vp} outside target")

    stats = PassStats()
    if not items:
        return stats

    # Per-triangle attribute tables, shared across views.
    world = [np.ascontiguousarray(it.mesh.triangles) for it in items]
    counts = [len(w) for w in world]
    total = sum(counts)
    stats.triangles_submitted = total
    tri_item = np.repeat(np.arange(len(items), dtype=np.int32), counts)
    tri_color = np.concatenate([it.mesh.color for it in items]) if total else np.empty((0, 3), np.uint8)
    tri_space = np.concatenate(
        [np.full(c, it.mesh.space, dtype=np.int32) for it, c in zip(items, counts)]
    )
    cullable = np.concatenate(
        [np.full(c, it.mesh.cull_backfaces, dtype=bool) for it, c in zip(items, counts)]
    )
    all_world = np.concatenate(world) if total else np.empty((0, 3, 3))

    for view_t, vp, vproj in zip(views, viewports, projs):
        planes = _clip_planes(vproj)
        vm = view_t.m
        tris = all_world @ vm[:3, :3].T + vm[:3, 3]

        # Back-face cull in view space: front means the winding is
        # counter-clockwise as seen from the camera at the origin.
        e1 = tris[:, 1] - tris[:, 0]
        e2 = tris[:, 2] - tris[:, 0]
        nrm = np.cross(e1, e2)
        facing = np.einsum("ij,ij->i", nrm, -tris[:, 0])
        keep = ~(cullable & (facing <= 0.0))
        degenerate3d = np.einsum("ij,ij->i", nrm, nrm) < 1e-24
        keep &= ~degenerate3d
        stats.triangles_culled += int(total - keep.sum())

        idx = np.nonzero(keep)[0]
        if len(idx) == 0:
            continue
        kt = tris[idx]

        # Plane classification: all-inside triangles skip the clipper.
        inside = np.ones(len(idx), dtype=bool)
        dead = np.zeros(len(idx), dtype=bool)
        for n, d in planes:
            vals = kt @ n + d
            pos = vals >= 0.0
            inside &= pos.all(axis=1)
            dead |= ~pos.any(axis=1)
        dead &= ~inside
        stats.triangles_culled += int(dead.sum())
        needs_clip = ~inside & ~dead

        parts_xy = []
        parts_invd = []
        parts_attr = []
        easy = idx[inside]
        if len(easy):
            xy, invd = _project(tris[easy], vproj, vp)
            parts_xy.append(xy)
            parts_invd.append(invd)
            parts_attr.append(easy.astype(np.int32))
        for local_i in np.nonzero(needs_clip)[0]:
            poly = kt[local_i]
            for n, d in planes:
                poly = _clip_polygon(poly, n, d)
                if len(poly) < 3:
                    break
            if len(poly) < 3:
                stats.triangles_culled += 1
                continue
            xy, invd = _project(poly, vproj, vp)
            k = len(poly) - 2
            fan_xy = np.empty((k, 3, 2))
            fan_invd = np.empty((k, 3))
            for f in range(k):
                fan_xy[f, 0] = xy[0]
                fan_xy[f, 1] = xy[f + 1]
                fan_xy[f, 2] = xy[f + 2]
                fan_invd[f] = (invd[0], invd[f + 1], invd[f + 2])
            parts_xy.append(fan_xy)
            parts_invd.append(fan_invd)
            parts_attr.append(np.full(k, idx[local_i], dtype=np.int32))
        if not parts_xy:
            continue
        r_xy = np.ascontiguousarray(np.concatenate(parts_xy))
        r_invd = np.ascontiguousarray(np.concatenate(parts_invd))
        r_attr = np.ascontiguousarray(np.concatenate(parts_attr))

        _resolve_view(
            target, items, vp, r_xy, r_invd, r_attr,
            tri_item, tri_color, tri_space, stats, workers,
        )

    stats.add_to(target)
    return stats


def _resolve_view(target, items, vp, r_xy, r_invd, r_attr,
                  tri_item, tri_color, tri_space, stats, workers):
    vx0, vy0, vw, vh = vp
    sl = np.s_[vy0:vy0 + vh, vx0:vx0 + vw]
    win_depth = target.depth[sl].astype(np.float64)
    win_attr = np.full((vh, vw), -1, dtype=np.int32)

    # Screen-degenerate triangles are counted once here, not per band.
    areas = (
        (r_xy[:, 1, 0] - r_xy[:, 0, 0]) * (r_xy[:, 2, 1] - r_xy[:, 0, 1])
        - (r_xy[:, 2, 0] - r_xy[:, 0, 0]) * (r_xy[:, 1, 1] - r_xy[:, 0, 1])
    )
    stats.triangles_culled += int((areas == 0.0).sum())

    bands = max(1, min(int(workers), vh))
    edges = np.linspace(0, vh, bands + 1, dtype=np.int64)

    def run_band(b):
        # Bands own disjoint row ranges of the winner arrays, so parallel
        # execution cannot race and the result is split-independent.
        return _raster_kernel(
            r_xy, r_invd, r_attr,
            vx0, vy0 + int(edges[b]), vx0 + vw, vy0 + int(edges[b + 1]),
            vx0, vy0, win_depth, win_attr,
        )

    if bands == 1:
        results = [run_band(0)]
    else:
        with ThreadPoolExecutor(max_workers=bands) as pool:
            results = list(pool.map(run_band, range(bands)))
    covered = sum(r[0] for r in results)

    winners = win_attr >= 0
    n_win = int(winners.sum())
    stats.fragments_depth_rejected += covered - n_win
    if n_win == 0:
        return

    # Items sharing a stencil policy and sampling source resolve together.
    group_of_item = np.empty(len(items), dtype=np.int32)
    groups: dict[tuple, int] = {}
    group_members: list[tuple[StencilPolicy, Optional[FrameTarget]]] = []
    for i, item in enumerate(items):
        key = (item.policy, id(item.screen_source))
        g = groups.get(key)
        if g is None:
            g = len(group_members)
            groups[key] = g
            group_members.append((item.policy, item.screen_source))
        group_of_item[i] = g

    safe_attr = np.where(winners, win_attr, 0)
    win_group = np.where(winners, group_of_item[tri_item[safe_attr]], -1)

    stencil = target.stencil[sl]
    for g, (pol, source) in enumerate(group_members):
        sel = win_group == g
        n_sel = int(sel.sum())
        if n_sel == 0:
            continue
        if pol.compare == COMPARE_ALWAYS:
            passed = sel
            n_pass = n_sel
        elif pol.compare == COMPARE_EQUAL:
            passed = sel & (stencil == pol.ref)
            n_pass = int(passed.sum())
        else:
            passed = sel & (stencil != pol.ref)
            n_pass = int(passed.sum())
        stats.fragments_stencil_rejected += n_sel - n_pass
        if n_pass == 0:
            continue
        if pol.depth_write:
            d = target.depth[sl]
            d[passed] = win_depth[passed].astype(np.float32)
        if pol.write == WRITE_REPLACE:
            stencil[passed] = pol.ref
        if pol.color_write:
            stats.fragments_shaded += n_pass
            color = target.color[sl]
            space = target.space_id[sl]
            if source is not None:
                ys, xs = np.nonzero(passed)
                color[ys, xs] = source.color[ys + vy0, xs + vx0]
                space[ys, xs] = source.space_id[ys + vy0, xs + vx0]
            else:
                rgb = tri_color[win_attr[passed]]
                color[passed, :3] = rgb
                color[passed, 3] = 255
                space[passed] = tri_space[win_attr[passed]]


def draw_mesh(
    target: FrameTarget,
    mesh: Mesh,
    view: Transform,
    proj: Projection,
    stencil: StencilPolicy | None = None,
    viewport: Viewport | None = None,
    *,
    screen_source: Optional[FrameTarget] = None,
    workers: int = 1,
) -> PassStats:
    """Rasterize one mesh as a single render pass."""
    vp = viewport or (0, 0, target.width, target.height)
    item = DrawItem(mesh, stencil or StencilPolicy.permissive(), screen_source)
    return execute_pass(target, [item], view, proj, vp, workers=workers)


def draw_mesh_instanced_stereo(
    target: StereoTarget,
    mesh: Mesh,
    left_view: Transform,
    right_view: Transform,
    proj: Projection,
    stencil: StencilPolicy | None = None,
    *,
    workers: int = 1,
) -> PassStats:
    """Traverse the mesh once, emitting each triangle into both eye viewports."""
    item = DrawItem(mesh, stencil or StencilPolicy.permissive(), None)
    return execute_pass(
        target.frame,
        [item],
        [left_view, right_view],
        proj,
        [target.viewport("left"), target.viewport("right")],
        workers=workers,
    )


def apply_hidden_area_mask(target: FrameTarget, viewport: Viewport,
                           mask_tris: np.ndarray) -> int:
    """Stamp the reject value into the stencil under a normalized 2D mask.

    `mask_tris` is (T, 3, 2) in [0, 1]^2 viewport coordinates, x right and
    y down. Returns the number of masked pixels.
    """
    mask_tris = np.asarray(mask_tris, dtype=np.float64)
    if mask_tris.size == 0:
        return 0
    if mask_tris.ndim != 3 or mask_tris.shape[1:] != (3, 2):
        raise ValueError("mask triangles must have shape (T, 3, 2)")
    vx0, vy0, vw, vh = viewport
    xy = np.empty_like(mask_tris)
    xy[..., 0] = vx0 + mask_tris[..., 0] * vw
    xy[..., 1] = vy0 + mask_tris[..., 1] * vh
    invd = np.ones(mask_tris.shape[:2])
    attr = np.arange(len(mask_tris), dtype=np.int32)
    win_depth = np.full((target.height, target.width), np.inf)
    win_attr = np.full((target.height, target.width), -1, dtype=np.int32)
    _raster_kernel(
        np.ascontiguousarray(xy), np.ascontiguousarray(invd), attr,
        vx0, vy0, vx0 + vw, vy0 + vh, 0, 0, win_depth, win_attr,
    )
    masked = win_attr >= 0
    target.stencil[masked] = MASK_REJECT_REF
    return int(masked.sum())


def save_color_png(target: FrameTarget, path, viewport: Viewport | None = None) -> None:
    from PIL import Image

    if viewport is None:
        img = target.color
    else:
        x0, y0, w, h = viewport
        img = target.color[y0:y0 + h, x0:x0 + w]
    Image.fromarray(img, mode="RGBA").save(path, format="PNG")


def save_debug_pngs(target: FrameTarget, directory, prefix: str = "frame") -> list[str]:
    """Grayscale dumps of depth, stencil, and space-id for golden tests."""
    from pathlib import Path

    from PIL import Image

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []

    depth = target.depth.copy()
    finite = np.isfinite(depth)
    if finite.any():
        lo, hi = float(depth[finite].min()), float(depth[finite].max())
        span = (hi - lo) or 1.0
        gray = np.where(finite, 255 - ((depth - lo) / span * 215.0), 0.0)
    else:
        gray = np.zeros_like(depth)
    for name, arr in (
        ("depth", gray.astype(np.uint8)),
        ("stencil", target.stencil),
        ("space", np.clip(target.space_id * 37 % 256, 0, 255).astype(np.uint8)),
    ):
        p = directory / f"{prefix}_{name}.png"
        Image.fromarray(arr, mode="L").save(p, format="PNG")
        written.append(str(p))
    return written
