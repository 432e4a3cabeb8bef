"""Authored scenes: the benchmark arena, a four-room folded layout, and a
transition test room.

The arena is an open plane with six colored platforms in a ring, each
carrying a portal that faces the center, plus filler geometry (a bowl and
cubes) that can occlude portals from the start pose. The four-room scene
chains rooms A-B-C-D through three portal pairs so that every room's image
in real coordinates lands inside a 4x4 m tracked square. The transition
room has a single portal in a wall with a brightly colored "backstage"
volume hidden behind it, for exercising eye-in-the-wall behavior.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import Pose
from .scene import (
    Mesh,
    Portal,
    Projection,
    Scene,
    StereoRig,
    TrackedBounds,
    box_mesh,
    quad_mesh,
    regular_prism_mesh,
    wall_with_opening,
)

ARENA_SPACE = 1

PLATFORM_COLORS = [
    ("blue", (60, 120, 230)),
    ("green", (60, 200, 90)),
    ("red", (220, 70, 60)),
    ("yellow", (235, 200, 60)),
    ("magenta", (200, 70, 200)),
    ("cyan", (70, 200, 210)),
]

PORTAL_WIDTH = 1.0
PORTAL_HEIGHT = 2.0
PORTAL_BOX_DEPTH = 0.5
EYE_HEIGHT = 1.6


def look_at_pose(eye, target) -> Pose:
    eye = np.asarray(eye, dtype=np.float64)
    d = np.asarray(target, dtype=np.float64) - eye
    d = d / np.linalg.norm(d)
    yaw = math.atan2(-d[0], -d[2])
    pitch = math.asin(max(-1.0, min(1.0, d[1])))
    return Pose.from_yaw_pitch_roll(eye, yaw, pitch, 0.0)


def _floor(half: float, color, space: int, name: str) -> Mesh:
    c = [(-half, 0.0, -half), (-half, 0.0, half), (half, 0.0, half), (half, 0.0, -half)]
    return quad_mesh(c, color, space, name=name)


def build_test_scene(pairs: int) -> Scene:
    """The measurement arena with 0..3 enabled portal pairs."""
    if not 0 <= pairs <= 3:
        raise ValueError("pairs must be in 0..3")
    spaces = {ARENA_SPACE: "arena"}
    meshes = [_floor(22.0, (86, 92, 86), ARENA_SPACE, "floor")]

    ring_r = 6.0
    portals: dict[int, Portal] = {}
    for k, (cname, rgb) in enumerate(PLATFORM_COLORS):
        theta = math.radians(60.0 * k)
        px, pz = ring_r * math.sin(theta), -ring_r * math.cos(theta)
        space = 2 + k
        spaces[space] = f"{cname}-platform"
        meshes.append(
            box_mesh((px, 0.25, pz), (2.4, 0.5, 2.4), rgb, space, name=f"platform-{cname}")
        )
        if k < 2 * pairs:
            yaw = math.atan2(-px, -pz)  # face the arena center
            portals[k + 1] = Portal(
                id=k + 1,
                partner_id=(k + 2) if k % 2 == 0 else k,
                space=space,
                position=np.array([px, 0.5 + PORTAL_HEIGHT / 2.0, pz]),
                yaw_pitch_roll=(yaw, 0.0, 0.0),
                width=PORTAL_WIDTH,
                height=PORTAL_HEIGHT,
                box_depth=PORTAL_BOX_DEPTH,
            )

    # Filler geometry that can occlude portals from the start pose.
    meshes.append(
        regular_prism_mesh((0.0, 0.0, -2.0), 1.0, 1.4, 16, (100, 170, 90), ARENA_SPACE,
                           taper=1.25, name="bowl")
    )
    meshes.append(box_mesh((2.6, 0.3, 1.5), (0.6, 0.6, 0.6), (235, 205, 70), ARENA_SPACE,
                           name="cube-a"))
    meshes.append(box_mesh((3.2, 0.3, 2.1), (0.6, 0.6, 0.6), (225, 190, 60), ARENA_SPACE,
                           name="cube-b"))

    rig = StereoRig(
        head=Pose.from_yaw_pitch_roll((0.0, EYE_HEIGHT, 2.5), 0.0, 0.0, 0.0),
        ipd=0.064,
        projection=Projection(fov_y=math.radians(90.0), aspect=1.0, near=0.05, far=200.0),
    )
    return Scene(
        spaces=spaces,
        meshes=meshes,
        portals=portals,
        tracked_bounds=TrackedBounds(-25.0, 25.0, -25.0, 25.0),
        rig=rig,
        start_space=ARENA_SPACE,
    )


# ---------------------------------------------------------------------------
# Four folded rooms in a 4x4 m tracked square.

ROOM_W = 3.6  # lateral extent of every room
ROOM_D = 1.7  # depth of every room
WALL_H = 2.5
ROOM_COLORS = [(150, 160, 200), (200, 160, 130), (150, 200, 150), (200, 150, 180)]


def build_four_room_scene() -> Scene:
    """Rooms A-D chained by three portal pairs, all folding into [-2, 2]^2.

    Virtual layout (rooms 20 m apart on x so nothing overlaps virtually):
      A: x in [-1.8, 1.8], z in [-1.8, -0.1]; exit portal on its far wall.
      B at x=20: z in [0, 1.7]; entry and exit both on its z=0 wall.
      C at x=40: z in [-1.7, 0]; entry and exit both on its z=0 wall.
      D at x=60: z in [0, 1.7].
    The portal poses are chosen so each room's image in real coordinates is
    either the south half strip (z in [-1.8, -0.1]) or the north half strip
    (z in [-0.1, 1.6]) of the tracked square.
    """
    spaces = {1: "room-a", 2: "room-b", 3: "room-c", 4: "room-d"}
    meshes: list[Mesh] = []

    def room_floor(cx: float, z0: float, z1: float, space: int):
        c = [(cx - ROOM_W / 2, 0.0, z0), (cx - ROOM_W / 2, 0.0, z1),
             (cx + ROOM_W / 2, 0.0, z1), (cx + ROOM_W / 2, 0.0, z0)]
        meshes.append(quad_mesh(c, ROOM_COLORS[space - 1], space, name=f"floor-{space}"))

    def portal_wall(center, yaw: float, space: int, openings: list[float]):
        # One wall that may carry one or two 1x2 m openings, built as panels.
        color = tuple(int(v * 0.85) for v in ROOM_COLORS[space - 1])
        xs = sorted(openings)
        cx, cy, cz = center
        hw = ROOM_W / 2
        edges = [-hw]
        for x in xs:
            edges += [x - PORTAL_WIDTH / 2, x + PORTAL_WIDTH / 2]
        edges.append(hw)
        t = Pose.from_yaw_pitch_roll(center, yaw, 0.0, 0.0).to_transform()
        for i in range(0, len(edges) - 1):
            x0, x1 = edges[i], edges[i + 1]
            if x1 - x0 <= 1e-9:
                continue
            is_opening = i % 2 == 1
            y1 = PORTAL_HEIGHT if is_opening else 0.0
            local = [(x0, y1, 0.0), (x1, y1, 0.0), (x1, WALL_H, 0.0), (x0, WALL_H, 0.0)]
            if y1 >= WALL_H:
                continue
            corners = t.apply_points(np.array(local))
            meshes.append(quad_mesh(corners, color, space, cull_backfaces=False,
                                    name=f"wall-{space}-{i}"))

    py = PORTAL_HEIGHT / 2.0

    # Room A: south half, identity map. Exit opening on the north wall, east side.
    room_floor(0.0, -1.8, -0.1, 1)
    portal_wall((0.0, 0.0, -0.1), math.pi, 1, [-1.2])  # wall faces south into A
    portal_wall((0.0, 0.0, -1.8), 0.0, 1, [])

    # Room B: entry (east side) and exit (west side) share the z=0 wall.
    room_floor(20.0, 0.0, ROOM_D, 2)
    portal_wall((20.0, 0.0, 0.0), 0.0, 2, [1.2, -1.2])  # faces north into B
    portal_wall((20.0, 0.0, ROOM_D), math.pi, 2, [])

    # Room C: mirrored; both openings on its z=0 wall, which faces south into C.
    room_floor(40.0, -ROOM_D, 0.0, 3)
    portal_wall((40.0, 0.0, 0.0), math.pi, 3, [1.2, 0.0])
    portal_wall((40.0, 0.0, -ROOM_D), 0.0, 3, [])

    # Room D: like B.
    room_floor(60.0, 0.0, ROOM_D, 4)
    portal_wall((60.0, 0.0, 0.0), 0.0, 4, [0.0])
    portal_wall((60.0, 0.0, ROOM_D), math.pi, 4, [])

    def portal(pid, partner, space, pos, yaw):
        return Portal(
            id=pid, partner_id=partner, space=space,
            position=np.array(pos, dtype=np.float64),
            yaw_pitch_roll=(yaw, 0.0, 0.0),
            width=PORTAL_WIDTH, height=PORTAL_HEIGHT, box_depth=PORTAL_BOX_DEPTH,
        )

    # Each partner's image in real coordinates lands exactly on its host
    # opening, facing the other way; the lateral offsets below keep the
    # three real openings (x = +1.2, -1.2, 0.0 on the half-strip seam)
    # disjoint and every room's real footprint inside the square.
    portals = {
        1: portal(1, 2, 1, (1.2, py, -0.1), math.pi),   # A seam wall, east side
        2: portal(2, 1, 2, (21.2, py, 0.0), 0.0),       # B z=0 wall, east side
        3: portal(3, 4, 2, (18.8, py, 0.0), 0.0),       # B z=0 wall, west side
        4: portal(4, 3, 3, (38.8, py, 0.0), math.pi),   # C z=0 wall, west side
        5: portal(5, 6, 3, (40.0, py, 0.0), math.pi),   # C z=0 wall, center
        6: portal(6, 5, 4, (60.0, py, 0.0), 0.0),       # D z=0 wall, center
    }

    rig = StereoRig(
        head=Pose.from_yaw_pitch_roll((0.0, EYE_HEIGHT, -1.0), math.pi, 0.0, 0.0),
        ipd=0.064,
        projection=Projection(fov_y=math.radians(90.0), aspect=1.0, near=0.05, far=200.0),
    )
    return Scene(
        spaces=spaces,
        meshes=meshes,
        portals=portals,
        tracked_bounds=TrackedBounds(-2.0, 2.0, -2.0, 2.0),
        rig=rig,
        start_space=1,
    )


# ---------------------------------------------------------------------------
# Transition test room: one portal, hidden geometry behind its wall.

NEAR_SPACE = 1
FAR_SPACE = 2
BACKSTAGE_SPACE = 3


def build_transition_scene() -> Scene:
    """A room with one portal and a bright backstage volume behind the wall.

    Space 1 is the approach room (z < 0), space 2 a fully enclosed far room
    50 m away, and space 3 the backstage panel sitting behind the portal
    wall. Backstage pixels are exactly what a correct portal-box transition
    must never show.
    """
    spaces = {NEAR_SPACE: "near-room", FAR_SPACE: "far-room", BACKSTAGE_SPACE: "backstage"}
    meshes: list[Mesh] = []

    # Approach room: floor plus the portal wall at z = 0 facing south.
    c = [(-5.0, 0.0, -6.0), (-5.0, 0.0, 0.0), (5.0, 0.0, 0.0), (5.0, 0.0, -6.0)]
    meshes.append(quad_mesh(c, (120, 126, 134), NEAR_SPACE, name="near-floor"))
    meshes.extend(
        wall_with_opening((0.0, 0.0, 0.0), 10.0, 4.0, PORTAL_WIDTH, PORTAL_HEIGHT, 0.0,
                          math.pi, (140, 140, 150), NEAR_SPACE, name="portal-wall")
    )

    # Backstage: a big bright panel behind the wall, beyond the portal box.
    bp = [(4.0, 0.0, 1.2), (-4.0, 0.0, 1.2), (-4.0, 4.0, 1.2), (4.0, 4.0, 1.2)]
    meshes.append(quad_mesh(bp, (255, 120, 0), BACKSTAGE_SPACE, cull_backfaces=False,
                            name="backstage-panel"))

    # Far room: enclosed 8x8 box at x = 50 so its portal view only ever shows
    # far-room surfaces (or background through its own opening).
    fx, fz = 50.0, 0.0
    fc = [(fx - 4, 0.0, fz), (fx - 4, 0.0, fz + 8), (fx + 4, 0.0, fz + 8), (fx + 4, 0.0, fz)]
    meshes.append(quad_mesh(fc, (96, 140, 110), FAR_SPACE, name="far-floor"))
    cc = [(fx - 4, 4.0, fz), (fx + 4, 4.0, fz), (fx + 4, 4.0, fz + 8), (fx - 4, 4.0, fz + 8)]
    meshes.append(quad_mesh(cc, (90, 120, 100), FAR_SPACE, cull_backfaces=False,
                            name="far-ceiling"))
    meshes.extend(
        wall_with_opening((fx, 0.0, fz), 8.0, 4.0, PORTAL_WIDTH, PORTAL_HEIGHT, 0.0,
                          0.0, (110, 160, 125), FAR_SPACE, name="far-south-wall")
    )
    for center, yaw in (((fx, 0.0, fz + 8), math.pi), ((fx - 4, 0.0, fz + 4), -math.pi / 2),
                        ((fx + 4, 0.0, fz + 4), math.pi / 2)):
        w = 8.0
        t = Pose.from_yaw_pitch_roll(np.asarray(center), yaw, 0.0, 0.0).to_transform()
        local = [(-w / 2, 0.0, 0.0), (w / 2, 0.0, 0.0), (w / 2, 4.0, 0.0), (-w / 2, 4.0, 0.0)]
        meshes.append(quad_mesh(t.apply_points(np.array(local)), (110, 160, 125), FAR_SPACE,
                                cull_backfaces=False, name=f"far-wall-{yaw:.2f}"))

    portals = {
        1: Portal(id=1, partner_id=2, space=NEAR_SPACE,
                  position=np.array([0.0, PORTAL_HEIGHT / 2, 0.0]),
                  yaw_pitch_roll=(math.pi, 0.0, 0.0),
                  width=PORTAL_WIDTH, height=PORTAL_HEIGHT, box_depth=PORTAL_BOX_DEPTH),
        2: Portal(id=2, partner_id=1, space=FAR_SPACE,
                  position=np.array([fx, PORTAL_HEIGHT / 2, fz]),
                  yaw_pitch_roll=(0.0, 0.0, 0.0),
                  width=PORTAL_WIDTH, height=PORTAL_HEIGHT, box_depth=PORTAL_BOX_DEPTH),
    }

    rig = StereoRig(
        head=Pose.from_yaw_pitch_roll((0.0, EYE_HEIGHT, -3.0), math.pi, 0.0, 0.0),
        ipd=0.064,
        projection=Projection(fov_y=math.radians(90.0), aspect=1.0, near=0.05, far=200.0),
    )
    return Scene(
        spaces=spaces,
        meshes=meshes,
        portals=portals,
        tracked_bounds=TrackedBounds(-10.0, 10.0, -10.0, 10.0),
        rig=rig,
        start_space=NEAR_SPACE,
    )
