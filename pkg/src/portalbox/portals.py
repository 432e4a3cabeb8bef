"""Portal geometry: view transforms, plane-crossing detection, wall boxes.

All functions are pure. The portal-to-portal transform is

    T = dst_pose . flip . src_pose^-1

where `flip` is the half-turn about the portal's local up axis. That
convention makes "facing into the source portal" map to "facing out of the
destination portal", and sends a quad-local point (x, y) to (-x, y) on the
partner quad.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import Pose, Transform
from .portals_boxes import portal_box_triangles  # re-exported for tests
from .scene import MATERIAL_PORTAL_SURFACE, Mesh, Portal, Scene

__all__ = [
    "CrossingEvent",
    "portal_view_transform",
    "detect_crossing",
    "teleport",
    "make_portal_box",
    "eye_inside_box",
]

_FLIP = Transform.rotation_y(np.pi)

QUAD_EDGE_TOL = 1e-9


@dataclass(frozen=True)
class CrossingEvent:
    """A front-to-back portal plane crossing along a head motion segment."""

    portal_id: int
    t: float  # parameter along the motion segment, 0 at its start
    point: np.ndarray  # world-space entry point on the portal plane


def portal_view_transform(src: Portal, dst: Portal) -> Transform:
    """Rigid map taking viewpoints in front of `src` to virtual viewpoints at `dst`."""
    if src.partner_id != dst.id or dst.partner_id != src.id:
        raise ValueError(f"portals {src.id} and {dst.id} are not partnered")
    return dst.pose @ _FLIP @ src.pose.inverse()


def teleport(head: Pose, src: Portal, dst: Portal) -> Pose:
    """Carry a whole pose through the portal pair (position and orientation)."""
    if not src.enabled:
        raise ValueError(f"portal {src.id} is disabled and never teleports")
    return head.transformed(portal_view_transform(src, dst))


def detect_crossing(prev_head, new_head, portal: Portal) -> Optional[CrossingEvent]:
    """Front-to-back plane crossing with the hit inside the quad extents.

    A point exactly on the plane counts as "not yet crossed", so the event
    fires on the segment that moves strictly past the plane. Back-to-front
    motion never triggers; re-entry is the partner portal's job.
    """
    if not portal.enabled:
        return None
    inv = portal.pose.inverse()
    p0 = inv.apply_point(prev_head)
    p1 = inv.apply_point(new_head)
    if not (p0[2] >= 0.0 and p1[2] < 0.0):
        return None
    t = p0[2] / (p0[2] - p1[2])
    hit = p0 + t * (p1 - p0)
    if abs(hit[0]) > portal.width / 2.0 + QUAD_EDGE_TOL:
        return None
    if abs(hit[1]) > portal.height / 2.0 + QUAD_EDGE_TOL:
        return None
    return CrossingEvent(portal.id, float(t), portal.pose.apply_point(hit))


def make_portal_box(portal: Portal) -> Mesh:
    """The portal rendered as a shallow wall box instead of a bare quad.

    The box extrudes `box_depth` behind the quad. The front face is wound to
    face outward (visible only from outside, so an eye inside the box can
    look back out into the source space); the side and back faces are wound
    to face the box interior, so an eye carried inside the wall still sees
    portal imagery on every surface around it. Every face is one-sided.
    """
    if portal.box_depth <= 0:
        raise ValueError("box_depth must be > 0")
    tris = portal_box_triangles(portal.width, portal.height, portal.box_depth)
    world = portal.pose.apply_points(tris.reshape(-1, 3)).reshape(tris.shape)
    return Mesh(
        world,
        np.array([255, 255, 255], dtype=np.uint8),
        portal.space,
        cull_backfaces=True,
        material=MATERIAL_PORTAL_SURFACE,
        name=f"portal-box-{portal.id}",
    )


def make_portal_quad(portal: Portal) -> Mesh:
    """Plane-only portal surface (the wall box disabled), front face only."""
    hw, hh = portal.width / 2.0, portal.height / 2.0
    local = np.array(
        [
            [[-hw, -hh, 0.0], [hw, -hh, 0.0], [hw, hh, 0.0]],
            [[-hw, -hh, 0.0], [hw, hh, 0.0], [-hw, hh, 0.0]],
        ]
    )
    world = portal.pose.apply_points(local.reshape(-1, 3)).reshape(local.shape)
    return Mesh(
        world,
        np.array([255, 255, 255], dtype=np.uint8),
        portal.space,
        cull_backfaces=True,
        material=MATERIAL_PORTAL_SURFACE,
        name=f"portal-quad-{portal.id}",
    )


def eye_inside_box(eye, portal: Portal) -> bool:
    """True iff the eye is strictly inside the portal's wall-box volume."""
    p = portal.pose.inverse().apply_point(eye)
    return (
        -portal.box_depth < p[2] < 0.0
        and abs(p[0]) < portal.width / 2.0
        and abs(p[1]) < portal.height / 2.0
    )


def resolve_crossings(scene: Scene, prev_head: Pose, new_head: Pose,
                      max_hops: int = 8) -> tuple[Pose, list[CrossingEvent]]:
    """Walk the head motion segment through any portals it crosses, in order.

    Multiple crossings in one step are processed in ascending t; after each
    teleport the remaining motion is re-expressed in the destination frame
    and re-checked, so the result is order-correct at any step size.
    """
    events: list[CrossingEvent] = []
    pos0 = prev_head.position
    pose1 = new_head
    for _ in range(max_hops):
        best: Optional[CrossingEvent] = None
        for portal in scene.enabled_portals():
            ev = detect_crossing(pos0, pose1.position, portal)
            if ev is not None and (best is None or ev.t < best.t):
                best = ev
        if best is None:
            return pose1, events
        events.append(best)
        src = scene.portals[best.portal_id]
        dst = scene.partner_of(best.portal_id)
        t = portal_view_transform(src, dst)
        pos0 = t.apply_point(best.point)
        pose1 = pose1.transformed(t)
    return pose1, events
