"""World model: spaces, meshes, portals, the stereo rig, tracked bounds.

A scene lives in one virtual coordinate system. Spaces are integer labels
on meshes and portal endpoints; portals link two labeled openings and the
teleport transform folds the virtual layout back into the tracked play
area. A scene is treated as immutable while a frame renders; enable-flag
changes go through `set_portal_enabled`, which returns an updated copy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .geometry import Pose, Transform, _as_vec3

SpaceId = int

MIN_TRIANGLE_AREA = 1e-12

MATERIAL_SOLID = "solid"
MATERIAL_PORTAL_SURFACE = "portal-surface"


@dataclass
class Projection:
    """Perspective frustum; the oblique plane, when set, replaces the near clip.

    The oblique plane is (normal, offset) in view space; points p with
    normal . p + offset >= 0 are kept.
    """

    fov_y: float  # vertical field of view, radians
    aspect: float = 1.0
    near: float = 0.05
    far: float = 100.0
    oblique: Optional[tuple[np.ndarray, float]] = None

    def __post_init__(self):
        if self.near <= 0:
            raise ValueError("near plane distance must be > 0")
        if self.far <= self.near:
            raise ValueError("far must exceed near")
        if not 0 < self.fov_y < math.pi:
            raise ValueError("fov_y must be in (0, pi)")

    def with_oblique(self, normal, offset: float) -> "Projection":
        n = _as_vec3(normal)
        n = n / np.linalg.norm(n)
        return replace(self, oblique=(n, float(offset)))

    def tan_half(self) -> tuple[float, float]:
        ty = math.tan(self.fov_y / 2.0)
        return ty * self.aspect, ty


@dataclass
class StereoRig:
    """Head pose + interpupillary distance; eye viewpoints are always derived."""

    head: Pose
    ipd: float = 0.064
    projection: Projection = field(default_factory=lambda: Projection(fov_y=math.radians(90.0)))

    def __post_init__(self):
        if self.ipd <= 0:
            raise ValueError("ipd must be > 0")

    def eye_position(self, eye: str) -> np.ndarray:
        sign = -0.5 if eye == "left" else 0.5
        return self.head.position + sign * self.ipd * self.head.right()

    def eye_pose(self, eye: str) -> Pose:
        if eye not in ("left", "right"):
            raise ValueError(f"unknown eye {eye!r}")
        return Pose(self.eye_position(eye), self.head.orientation)

    def moved(self, head: Pose) -> "StereoRig":
        return replace(self, head=head)


@dataclass
class Portal:
    """An oriented rectangular opening with a partner link.

    Pose convention: origin at the quad center, +Z is the front normal and
    points into the space the portal is viewed from, +Y is up. Crossing is
    motion from the +Z side to the -Z side. The wall box extrudes behind
    the quad (local -Z) by `box_depth`.
    """

    id: int
    partner_id: int
    space: SpaceId
    position: np.ndarray
    yaw_pitch_roll: tuple[float, float, float] = (0.0, 0.0, 0.0)  # radians
    width: float = 1.0
    height: float = 2.0
    box_depth: float = 0.5
    enabled: bool = True

    def __post_init__(self):
        self.position = _as_vec3(self.position)
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"portal {self.id}: width and height must be > 0")
        if self.box_depth <= 0:
            raise ValueError(f"portal {self.id}: box_depth must be > 0")
        self._pose_cache: Optional[Transform] = None

    @property
    def pose(self) -> Transform:
        if self._pose_cache is None:
            y, p, r = self.yaw_pitch_roll
            self._pose_cache = Transform.from_yaw_pitch_roll(self.position, y, p, r)
        return self._pose_cache

    def front_normal(self) -> np.ndarray:
        return self.pose.apply_direction((0.0, 0.0, 1.0))

    def quad_corners(self) -> np.ndarray:
        """(4, 3) world corners, counter-clockwise seen from the front."""
        hw, hh = self.width / 2.0, self.height / 2.0
        local = np.array(
            [[-hw, -hh, 0.0], [hw, -hh, 0.0], [hw, hh, 0.0], [-hw, hh, 0.0]]
        )
        return self.pose.apply_points(local)


@dataclass
class Mesh:
    """A triangle soup with per-face flat colors.

    `triangles` is (T, 3, 3) float64 world-space positions, counter-clockwise
    winding seen from the front. `colors` is either a single RGB triple or a
    (T, 3) uint8 array of per-face colors.
    """

    triangles: np.ndarray
    color: np.ndarray
    space: SpaceId
    cull_backfaces: bool = True
    material: str = MATERIAL_SOLID
    name: str = ""

    def __post_init__(self):
        self.triangles = np.asarray(self.triangles, dtype=np.float64)
        if self.triangles.ndim != 3 or self.triangles.shape[1:] != (3, 3):
            raise ValueError("triangles must have shape (T, 3, 3)")
        c = np.asarray(self.color, dtype=np.uint8)
        if c.shape == (3,):
            c = np.broadcast_to(c, (len(self.triangles), 3)).copy()
        elif c.shape != (len(self.triangles), 3):
            raise ValueError("color must be one RGB triple or one per face")
        self.color = c
        areas = triangle_areas(self.triangles)
        if len(areas) and float(areas.min()) <= MIN_TRIANGLE_AREA:
            raise ValueError(f"mesh {self.name!r} has a degenerate triangle")

    def __len__(self) -> int:
        return len(self.triangles)


def triangle_areas(tris: np.ndarray) -> np.ndarray:
    e1 = tris[:, 1] - tris[:, 0]
    e2 = tris[:, 2] - tris[:, 0]
    return 0.5 * np.linalg.norm(np.cross(e1, e2), axis=1)


@dataclass
class TrackedBounds:
    """Axis-aligned rectangle on the floor plane: the real play space."""

    min_x: float
    max_x: float
    min_z: float
    max_z: float

    def __post_init__(self):
        if self.max_x <= self.min_x or self.max_z <= self.min_z:
            raise ValueError("tracked bounds must have positive extent")

    def contains_xz(self, x: float, z: float, slack: float = 1e-9) -> bool:
        return (
            self.min_x - slack <= x <= self.max_x + slack
            and self.min_z - slack <= z <= self.max_z + slack
        )


@dataclass
class Scene:
    spaces: dict[SpaceId, str]
    meshes: list[Mesh]
    portals: dict[int, Portal]
    tracked_bounds: TrackedBounds
    rig: StereoRig
    start_space: SpaceId = 1

    def __post_init__(self):
        self.validate_links()

    def validate_links(self):
        for mesh in self.meshes:
            if mesh.space not in self.spaces:
                raise ValueError(f"mesh {mesh.name!r} references unknown space {mesh.space}")
        for p in self.portals.values():
            if p.space not in self.spaces:
                raise ValueError(f"portal {p.id} references unknown space {p.space}")
            partner = self.portals.get(p.partner_id)
            if partner is None:
                raise ValueError(f"portal {p.id} references missing partner {p.partner_id}")
            if partner.partner_id != p.id:
                raise ValueError(f"portal pair {p.id}/{p.partner_id} is not symmetric")
            if partner.enabled != p.enabled:
                raise ValueError(f"portal pair {p.id}/{p.partner_id} has mismatched enable flags")
            # An eye can sit up to ipd/2 past the quad plane while the head
            # has not crossed; the wall box must still enclose it beyond the
            # near clip or the box interior would vanish from that eye.
            min_depth = self.rig.ipd / 2.0 + self.rig.projection.near
            if p.box_depth <= min_depth:
                raise ValueError(
                    f"portal {p.id}: box_depth {p.box_depth} must exceed ipd/2 + near = {min_depth}"
                )
            self._check_portal_envelope(p)

    # Portals must sit near their space's geometry; the slack accommodates
    # quads standing above platform tops and inside wall openings.
    ENVELOPE_SLACK = 3.0

    def _check_portal_envelope(self, portal: Portal) -> None:
        space_tris = [m.triangles for m in self.meshes if m.space == portal.space]
        if not space_tris:
            return
        pts = np.concatenate(space_tris).reshape(-1, 3)
        lo = pts.min(axis=0) - self.ENVELOPE_SLACK
        hi = pts.max(axis=0) + self.ENVELOPE_SLACK
        corners = portal.quad_corners()
        if ((corners < lo) | (corners > hi)).any():
            raise ValueError(
                f"portal {portal.id} lies outside the geometry envelope of space {portal.space}"
            )

    def partner_of(self, portal_id: int) -> Portal:
        return self.portals[self.portals[portal_id].partner_id]

    def enabled_portals(self) -> list[Portal]:
        return [p for p in sorted(self.portals.values(), key=lambda p: p.id) if p.enabled]

    def total_triangles(self) -> int:
        return sum(len(m) for m in self.meshes)


def set_portal_enabled(scene: Scene, portal_id: int, enabled: bool) -> Scene:
    """Enable or disable a portal pair atomically; returns the updated scene."""
    if portal_id not in scene.portals:
        raise KeyError(f"unknown portal id {portal_id}")
    partner_id = scene.portals[portal_id].partner_id
    portals = dict(scene.portals)
    for pid in (portal_id, partner_id):
        portals[pid] = replace(portals[pid], enabled=enabled)
    return replace(scene, portals=portals)


# ---------------------------------------------------------------------------
# Primitive mesh builders


def quad_mesh(corners, color, space: SpaceId, *, cull_backfaces=True,
              material=MATERIAL_SOLID, name="") -> Mesh:
    """Two triangles from 4 corners given counter-clockwise (seen from front)."""
    c = np.asarray(corners, dtype=np.float64)
    tris = np.array([[c[0], c[1], c[2]], [c[0], c[2], c[3]]])
    return Mesh(tris, np.asarray(color), space, cull_backfaces=cull_backfaces,
                material=material, name=name)


def box_mesh(center, size, color, space: SpaceId, *, name="") -> Mesh:
    """Axis-aligned box, all 12 triangles wound outward."""
    cx, cy, cz = _as_vec3(center)
    hx, hy, hz = np.asarray(size, dtype=np.float64) / 2.0
    lo = np.array([cx - hx, cy - hy, cz - hz])
    hi = np.array([cx + hx, cy + hy, cz + hz])
    return Mesh(_box_triangles(lo, hi, outward=True), np.asarray(color), space, name=name)


def _box_triangles(lo: np.ndarray, hi: np.ndarray, outward: bool) -> np.ndarray:
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    # Corner layout: bit 0 = x, bit 1 = y, bit 2 = z.
    c = np.array(
        [
            [x0, y0, z0], [x1, y0, z0], [x0, y1, z0], [x1, y1, z0],
            [x0, y0, z1], [x1, y0, z1], [x0, y1, z1], [x1, y1, z1],
        ]
    )
    # Faces as CCW quads seen from outside.
    quads = [
        (4, 5, 7, 6),  # +Z
        (1, 0, 2, 3),  # -Z
        (5, 1, 3, 7),  # +X
        (0, 4, 6, 2),  # -X
        (6, 7, 3, 2),  # +Y
        (0, 1, 5, 4),  # -Y
    ]
    tris = []
    for a, b, cc, d in quads:
        if not outward:
            a, b, cc, d = a, d, cc, b
        tris.append([c[a], c[b], c[cc]])
        tris.append([c[a], c[cc], c[d]])
    return np.array(tris, dtype=np.float64)


def regular_prism_mesh(center, radius: float, height: float, sides: int, color,
                       space: SpaceId, *, taper: float = 1.0, name="") -> Mesh:
    """A low-poly open-topped prism/cone ("bowl" style occluder)."""
    cx, cy, cz = _as_vec3(center)
    ang = np.linspace(0.0, 2 * math.pi, sides, endpoint=False)
    bot = np.stack([cx + radius * np.cos(ang), np.full(sides, cy), cz + radius * np.sin(ang)], axis=1)
    top_r = radius * taper
    top = np.stack(
        [cx + top_r * np.cos(ang), np.full(sides, cy + height), cz + top_r * np.sin(ang)], axis=1
    )
    tris = []
    for i in range(sides):
        j = (i + 1) % sides
        # Outward winding for a ring traversed counter-clockwise seen from +Y.
        tris.append([bot[i], top[i], top[j]])
        tris.append([bot[i], top[j], bot[j]])
    cap_center = np.array([cx, cy + height, cz])
    for i in range(sides):
        j = (i + 1) % sides
        tris.append([top[i], cap_center, top[j]])
    return Mesh(np.array(tris), np.asarray(color), space, name=name)


def wall_with_opening(center, width: float, height: float, opening_w: float,
                      opening_h: float, opening_bottom: float, yaw: float, color,
                      space: SpaceId, *, name="") -> list[Mesh]:
    """A vertical wall (facing local +Z after yaw) with a rectangular hole.

    `center` is the wall's bottom-center on the floor; the opening is
    horizontally centered, its sill `opening_bottom` above the floor.
    """
    t = Transform.from_yaw_pitch_roll(_as_vec3(center), yaw, 0.0, 0.0)
    hw = width / 2.0
    ow = opening_w / 2.0
    o0, o1 = opening_bottom, opening_bottom + opening_h
    panels = []
    if o0 > 0:
        panels.append(((-ow, 0.0), (ow, o0)))  # under the opening
    if o1 < height:
        panels.append(((-ow, o1), (ow, height)))  # above the opening
    panels.append(((-hw, 0.0), (-ow, height)))  # left of the opening
    panels.append(((ow, 0.0), (hw, height)))  # right of the opening
    meshes = []
    for i, ((x0, y0), (x1, y1)) in enumerate(panels):
        if x1 - x0 <= 1e-9 or y1 - y0 <= 1e-9:
            continue
        local = [(x0, y0, 0.0), (x1, y0, 0.0), (x1, y1, 0.0), (x0, y1, 0.0)]
        corners = t.apply_points(np.array(local))
        meshes.append(
            quad_mesh(corners, color, space, cull_backfaces=False, name=f"{name}-panel{i}")
        )
    return meshes
