"""Scene document I/O.

Scenes are stored as indented JSON with top-level keys `spaces`, `meshes`,
`portals`, `tracked_bounds`, and `rig`. Angles in the document are
yaw/pitch/roll in degrees; everything spatial is meters. Primitives
(`box`, `quad`, `prism`) are load-time sugar; saving always writes explicit
triangle lists, and save -> load -> save is byte-stable.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

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
)


class SceneFormatError(ValueError):
    pass


def _require(obj: dict, key: str, context: str):
    if key not in obj:
        raise SceneFormatError(f"{context}: missing required key {key!r}")
    return obj[key]


def _mesh_from_doc(doc: dict, index: int) -> Mesh:
    ctx = f"meshes[{index}]"
    space = int(_require(doc, "space", ctx))
    color = np.asarray(_require(doc, "color", ctx), dtype=np.uint8)
    cull = bool(doc.get("cull_backfaces", True))
    material = doc.get("material", "solid")
    name = doc.get("name", f"mesh{index}")
    prim = doc.get("primitive")
    if prim is not None:
        kind = _require(prim, "kind", f"{ctx}.primitive")
        if kind == "box":
            mesh = box_mesh(prim["center"], prim["size"], color, space, name=name)
        elif kind == "quad":
            mesh = quad_mesh(np.asarray(prim["corners"], dtype=np.float64), color, space,
                             cull_backfaces=cull, name=name)
        elif kind == "prism":
            mesh = regular_prism_mesh(
                prim["center"], float(prim["radius"]), float(prim["height"]),
                int(prim["sides"]), color, space,
                taper=float(prim.get("taper", 1.0)), name=name,
            )
        else:
            raise SceneFormatError(f"{ctx}: unknown primitive kind {kind!r}")
        mesh.cull_backfaces = cull
        mesh.material = material
        return mesh
    tris = np.asarray(_require(doc, "triangles", ctx), dtype=np.float64)
    if doc.get("colors") is not None:
        color = np.asarray(doc["colors"], dtype=np.uint8)
    return Mesh(tris, color, space, cull_backfaces=cull, material=material, name=name)


def _portal_from_doc(doc: dict, index: int) -> Portal:
    ctx = f"portals[{index}]"
    ypr_deg = doc.get("yaw_pitch_roll_deg", (0.0, 0.0, 0.0))
    try:
        return Portal(
            id=int(_require(doc, "id", ctx)),
            partner_id=int(_require(doc, "partner", ctx)),
            space=int(_require(doc, "space", ctx)),
            position=np.asarray(_require(doc, "position", ctx), dtype=np.float64),
            yaw_pitch_roll=tuple(math.radians(a) for a in ypr_deg),
            width=float(_require(doc, "width", ctx)),
            height=float(_require(doc, "height", ctx)),
            box_depth=float(doc.get("box_depth", 0.5)),
            enabled=bool(doc.get("enabled", True)),
        )
    except ValueError as e:
        raise SceneFormatError(f"{ctx}: {e}") from e


def scene_from_dict(doc: dict[str, Any]) -> Scene:
    spaces_doc = _require(doc, "spaces", "document")
    spaces = {int(s["id"]): str(s.get("name", f"space-{s['id']}")) for s in spaces_doc}
    meshes = [_mesh_from_doc(m, i) for i, m in enumerate(doc.get("meshes", []))]
    portals = {}
    for i, p in enumerate(doc.get("portals", [])):
        portal = _portal_from_doc(p, i)
        if portal.id in portals:
            raise SceneFormatError(f"duplicate portal id {portal.id}")
        portals[portal.id] = portal
    tb = _require(doc, "tracked_bounds", "document")
    bounds = TrackedBounds(
        float(tb["min_x"]), float(tb["max_x"]), float(tb["min_z"]), float(tb["max_z"])
    )
    rig_doc = _require(doc, "rig", "document")
    ypr = [math.radians(a) for a in rig_doc.get("yaw_pitch_roll_deg", (0.0, 0.0, 0.0))]
    rig = StereoRig(
        head=Pose.from_yaw_pitch_roll(np.asarray(rig_doc["position"], dtype=np.float64), *ypr),
        ipd=float(rig_doc.get("ipd", 0.064)),
        projection=Projection(
            fov_y=math.radians(float(rig_doc.get("fov_deg", 90.0))),
            aspect=float(rig_doc.get("aspect", 1.0)),
            near=float(rig_doc.get("near", 0.05)),
            far=float(rig_doc.get("far", 200.0)),
        ),
    )
    try:
        return Scene(
            spaces=spaces,
            meshes=meshes,
            portals=portals,
            tracked_bounds=bounds,
            rig=rig,
            start_space=int(doc.get("start_space", min(spaces) if spaces else 1)),
        )
    except ValueError as e:
        raise SceneFormatError(str(e)) from e


def scene_to_dict(scene: Scene) -> dict[str, Any]:
    head = scene.rig.head
    # Recover yaw/pitch from the head orientation (roll-free rigs).
    fwd = head.forward()
    yaw = math.degrees(math.atan2(-fwd[0], -fwd[2]))
    pitch = math.degrees(math.asin(max(-1.0, min(1.0, fwd[1]))))
    return {
        "spaces": [{"id": sid, "name": name} for sid, name in sorted(scene.spaces.items())],
        "meshes": [
            {
                "name": m.name,
                "space": m.space,
                "color": m.color[0].tolist(),
                "colors": None if (m.color == m.color[0]).all() else m.color.tolist(),
                "cull_backfaces": m.cull_backfaces,
                "material": m.material,
                "triangles": m.triangles.tolist(),
            }
            for m in scene.meshes
        ],
        "portals": [
            {
                "id": p.id,
                "partner": p.partner_id,
                "space": p.space,
                "position": p.position.tolist(),
                "yaw_pitch_roll_deg": [math.degrees(a) for a in p.yaw_pitch_roll],
                "width": p.width,
                "height": p.height,
                "box_depth": p.box_depth,
                "enabled": p.enabled,
            }
            for p in sorted(scene.portals.values(), key=lambda p: p.id)
        ],
        "tracked_bounds": {
            "min_x": scene.tracked_bounds.min_x,
            "max_x": scene.tracked_bounds.max_x,
            "min_z": scene.tracked_bounds.min_z,
            "max_z": scene.tracked_bounds.max_z,
        },
        "rig": {
            "position": head.position.tolist(),
            "yaw_pitch_roll_deg": [yaw, pitch, 0.0],
            "ipd": scene.rig.ipd,
            "fov_deg": math.degrees(scene.rig.projection.fov_y),
            "aspect": scene.rig.projection.aspect,
            "near": scene.rig.projection.near,
            "far": scene.rig.projection.far,
        },
        "start_space": scene.start_space,
    }


def load_scene(source) -> Scene:
    """Load a scene document from a path, file object, or JSON string."""
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = str(source)
        if not text.lstrip().startswith("{"):
            p = Path(text)
            try:
                exists = p.is_file()
            except OSError:
                exists = False
            if not exists:
                raise SceneFormatError(f"scene file not found: {text}")
            text = p.read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SceneFormatError(f"malformed scene document: {e}") from e
    if not isinstance(doc, dict):
        raise SceneFormatError("scene document must be a JSON object")
    return scene_from_dict(doc)


def save_scene(scene: Scene, path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=2), encoding="utf-8")
