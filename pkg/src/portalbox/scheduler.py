"""Turns a scene + rig + render mode into an ordered pass list and runs it.

Pass-count laws with N portals scheduled (frustum culling off):

    naive              2 + 2N   (per eye: N portal views, then the main pass)
    stencil            4 + 2N   (per eye: mark, N masked views, masked main)
    instanced          1 + N    (every pass renders both eyes at once)
    stencil-instanced  2 + N

Portal views always precede the main pass of their eye block. Portals seen
through portals are not re-rendered (depth 1): inside a portal view, other
portal surfaces draw as opaque placeholders.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import Pose, Transform
from .portals import make_portal_box, make_portal_quad, portal_view_transform, resolve_crossings
from .raster import (
    MASK_REJECT_REF,
    COMPARE_NOT_EQUAL,
    DrawItem,
    PassStats,
    StencilPolicy,
    StereoTarget,
    apply_hidden_area_mask,
    clear,
    execute_pass,
)
from .scene import Mesh, Portal, Projection, Scene, SpaceId, StereoRig

PURPOSE_STENCIL_MARK = "stencil-mark"
PURPOSE_PORTAL_VIEW = "portal-view"
PURPOSE_MAIN = "main-scene"
PURPOSE_MASK = "hidden-area-mask"

EYES = ("left", "right")

DISABLED_PORTAL_COLOR = np.array([90, 90, 96], dtype=np.uint8)
PLACEHOLDER_PORTAL_COLOR = np.array([40, 40, 52], dtype=np.uint8)

MAX_PORTAL_REFS = MASK_REJECT_REF - 1


class RenderMode(enum.Enum):
    NAIVE_MULTI_PASS = "naive"
    STENCIL_MULTI_PASS = "stencil"
    INSTANCED_SINGLE_PASS = "instanced"
    STENCIL_INSTANCED = "stencil-instanced"

    @property
    def uses_stencil(self) -> bool:
        return self in (RenderMode.STENCIL_MULTI_PASS, RenderMode.STENCIL_INSTANCED)

    @property
    def instanced(self) -> bool:
        return self in (RenderMode.INSTANCED_SINGLE_PASS, RenderMode.STENCIL_INSTANCED)


def expected_pass_count(mode: RenderMode, n_portals: int) -> int:
    if mode is RenderMode.NAIVE_MULTI_PASS:
        return 2 + 2 * n_portals
    if mode is RenderMode.STENCIL_MULTI_PASS:
        return 2 + 2 + 2 * n_portals
    if mode is RenderMode.INSTANCED_SINGLE_PASS:
        return 1 + n_portals
    return 1 + 1 + n_portals


@dataclass
class RenderPass:
    purpose: str
    eye: str  # "left" | "right" | "both"
    viewpoint: Pose  # camera pose for single-eye passes; transformed head for "both"
    space: SpaceId
    stencil: StencilPolicy
    portal_id: Optional[int] = None
    # World-space plane (normal, offset) clipping the portal view to the
    # destination side; converted to view space per eye at execution.
    oblique_world: Optional[tuple[np.ndarray, float]] = None
    view_transform: Optional[Transform] = None  # portal view transform for "both" passes


@dataclass
class FramePlan:
    mode: RenderMode
    passes: list[RenderPass]
    portal_ids: list[int]  # scheduled portals, in stencil-reference order
    visible: dict[int, bool]  # enabled portal id -> scheduled this frame
    stencil_refs: dict[int, int]
    current_space: SpaceId
    rig: StereoRig  # the rig the viewpoints were derived from
    hidden_area_mask: bool = False

    @property
    def pass_count(self) -> int:
        return len(self.passes)

    @property
    def space_ids(self) -> list[SpaceId]:
        return [p.space for p in self.passes]

    def dump(self) -> str:
        lines = []
        for i, p in enumerate(self.passes):
            portal = f" portal={p.portal_id}" if p.portal_id is not None else ""
            lines.append(f"[{i:2d}] {p.purpose:<16} {p.eye:<5} space={p.space}{portal}")
        return "\n".join(lines)


def _frustum_planes(proj: Projection) -> list[tuple[np.ndarray, float]]:
    tx, ty = proj.tan_half()
    return [
        (np.array([0.0, 0.0, -1.0]), -proj.near),
        (np.array([0.0, 0.0, 1.0]), proj.far),
        (np.array([-1.0, 0.0, -tx]), 0.0),
        (np.array([1.0, 0.0, -tx]), 0.0),
        (np.array([0.0, -1.0, -ty]), 0.0),
        (np.array([0.0, 1.0, -ty]), 0.0),
    ]


def _polygon_intersects_frustum(poly_view: np.ndarray, planes) -> bool:
    from .raster import _clip_polygon

    poly = poly_view
    for n, d in planes:
        poly = _clip_polygon(poly, n, d)
        if len(poly) < 3:
            return False
    return True


def _portal_box_faces(portal: Portal) -> list[np.ndarray]:
    hw, hh, dpt = portal.width / 2.0, portal.height / 2.0, portal.box_depth
    quads = [
        [(-hw, -hh, 0.0), (hw, -hh, 0.0), (hw, hh, 0.0), (-hw, hh, 0.0)],
        [(-hw, -hh, -dpt), (hw, -hh, -dpt), (hw, hh, -dpt), (-hw, hh, -dpt)],
        [(-hw, -hh, 0.0), (-hw, hh, 0.0), (-hw, hh, -dpt), (-hw, -hh, -dpt)],
        [(hw, -hh, 0.0), (hw, hh, 0.0), (hw, hh, -dpt), (hw, -hh, -dpt)],
        [(-hw, -hh, 0.0), (hw, -hh, 0.0), (hw, -hh, -dpt), (-hw, -hh, -dpt)],
        [(-hw, hh, 0.0), (hw, hh, 0.0), (hw, hh, -dpt), (-hw, hh, -dpt)],
    ]
    return [portal.pose.apply_points(np.array(q)) for q in quads]


def visible_portals(scene: Scene, rig: StereoRig) -> list[int]:
    """Enabled portals whose wall box intersects either eye frustum.

    Conservative: occlusion is resolved by depth and stencil downstream,
    never by the planner. The whole box is tested (not just the quad) so a
    portal still schedules its view pass while an eye sits inside the wall.
    """
    planes = _frustum_planes(rig.projection)
    out = []
    for portal in scene.enabled_portals():
        faces = _portal_box_faces(portal)
        hit = False
        for eye in EYES:
            view = rig.eye_pose(eye).to_transform().inverse()
            for face in faces:
                if _polygon_intersects_frustum(view.apply_points(face), planes):
                    hit = True
                    break
            if hit:
                break
        if hit:
            out.append(portal.id)
    return out


def _portal_plane_world(portal: Portal) -> tuple[np.ndarray, float]:
    """Plane through the destination quad keeping the destination-room side."""
    n = portal.front_normal()
    return n, -float(n @ portal.position)


def plan_passes(
    scene: Scene,
    rig: StereoRig,
    mode: RenderMode,
    frustum_cull: bool = True,
    *,
    current_space: Optional[SpaceId] = None,
    oblique_clip: bool = True,
    hidden_area_mask: bool = False,
) -> FramePlan:
    """Build the ordered pass list for one frame."""
    if current_space is None:
        current_space = scene.start_space
    enabled = scene.enabled_portals()
    if frustum_cull:
        scheduled = visible_portals(scene, rig)
    else:
        scheduled = [p.id for p in enabled]
    scheduled = sorted(scheduled)
    if len(scheduled) > MAX_PORTAL_REFS:
        raise ValueError(f"cannot schedule more than {MAX_PORTAL_REFS} portals per frame")
    refs = {pid: i + 1 for i, pid in enumerate(scheduled)}
    visible = {p.id: p.id in refs for p in enabled}

    def portal_passes(eye: str) -> list[RenderPass]:
        out = []
        for pid in scheduled:
            src = scene.portals[pid]
            dst = scene.partner_of(pid)
            t = portal_view_transform(src, dst)
            oblique = _portal_plane_world(dst) if oblique_clip else None
            if eye == "both":
                viewpoint = rig.head.transformed(t)
            else:
                viewpoint = rig.eye_pose(eye).transformed(t)
            policy = (
                StencilPolicy.masked_to(refs[pid]) if mode.uses_stencil else StencilPolicy.permissive()
            )
            out.append(
                RenderPass(
                    purpose=PURPOSE_PORTAL_VIEW,
                    eye=eye,
                    viewpoint=viewpoint,
                    space=dst.space,
                    stencil=policy,
                    portal_id=pid,
                    oblique_world=oblique,
                    view_transform=t if eye == "both" else None,
                )
            )
        return out

    def mark_pass(eye: str) -> RenderPass:
        viewpoint = rig.head if eye == "both" else rig.eye_pose(eye)
        return RenderPass(
            purpose=PURPOSE_STENCIL_MARK,
            eye=eye,
            viewpoint=viewpoint,
            space=current_space,
            stencil=StencilPolicy.depth_only(),
        )

    def main_pass(eye: str) -> RenderPass:
        viewpoint = rig.head if eye == "both" else rig.eye_pose(eye)
        if mode.uses_stencil:
            policy = StencilPolicy.masked_to(0)
        elif hidden_area_mask:
            policy = StencilPolicy(compare=COMPARE_NOT_EQUAL, ref=MASK_REJECT_REF)
        else:
            policy = StencilPolicy.permissive()
        return RenderPass(
            purpose=PURPOSE_MAIN, eye=eye, viewpoint=viewpoint, space=current_space, stencil=policy
        )

    def mask_pass(eye: str) -> RenderPass:
        viewpoint = rig.head if eye == "both" else rig.eye_pose(eye)
        return RenderPass(
            purpose=PURPOSE_MASK,
            eye=eye,
            viewpoint=viewpoint,
            space=current_space,
            stencil=StencilPolicy.mark_only(MASK_REJECT_REF),
        )

    passes: list[RenderPass] = []
    if mode.instanced:
        if mode.uses_stencil:
            passes.append(mark_pass("both"))
        if hidden_area_mask:
            passes.append(mask_pass("both"))
        passes.extend(portal_passes("both"))
        passes.append(main_pass("both"))
    else:
        for eye in EYES:
            if mode.uses_stencil:
                passes.append(mark_pass(eye))
            if hidden_area_mask:
                passes.append(mask_pass(eye))
            passes.extend(portal_passes(eye))
            passes.append(main_pass(eye))

    return FramePlan(
        mode=mode,
        passes=passes,
        portal_ids=scheduled,
        visible=visible,
        stencil_refs=refs,
        current_space=current_space,
        rig=rig,
        hidden_area_mask=hidden_area_mask,
    )


# ---------------------------------------------------------------------------
# Execution


@dataclass
class RenderTargets:
    main: StereoTarget
    portal_views: dict[int, StereoTarget] = field(default_factory=dict)
    background: tuple = (18, 22, 30, 255)

    @classmethod
    def create(cls, eye_width: int, height: int, background=(18, 22, 30, 255)) -> "RenderTargets":
        return cls(StereoTarget.create(eye_width, height), {}, tuple(background))

    def view_target(self, portal_id: int) -> StereoTarget:
        st = self.portal_views.get(portal_id)
        if st is None:
            st = StereoTarget.create(self.main.eye_width, self.main.frame.height)
            self.portal_views[portal_id] = st
        return st

    def clear_frame(self, portal_ids: Sequence[int]) -> None:
        clear(self.main.frame, self.background)
        for pid in portal_ids:
            clear(self.view_target(pid).frame, self.background)


@dataclass
class PassRecord:
    index: int
    purpose: str
    eye: str
    space: SpaceId
    portal_id: Optional[int]
    stats: PassStats
    ms: float
    masked_pixels: int = 0


@dataclass
class ExecutedFrame:
    records: list[PassRecord]
    plan: FramePlan

    @property
    def pass_count(self) -> int:
        return len(self.records)

    def total(self, name: str) -> int:
        return sum(getattr(r.stats, name) for r in self.records)

    @property
    def fragments_shaded(self) -> int:
        return self.total("fragments_shaded")

    @property
    def triangles_submitted(self) -> int:
        return self.total("triangles_submitted")

    def color_fragments_for_eye(self, eye: str) -> int:
        return sum(r.stats.fragments_shaded for r in self.records if r.eye == eye)


def _scene_draw_items(scene: Scene, policy: StencilPolicy) -> list[DrawItem]:
    return [DrawItem(mesh, policy) for mesh in scene.meshes]


def _portal_surface_mesh(portal: Portal, portal_box: bool) -> Mesh:
    mesh = make_portal_box(portal) if portal_box else make_portal_quad(portal)
    return mesh


def default_hidden_area_mask(corner_frac: float = 0.25) -> np.ndarray:
    """Corner-wedge mask triangles in normalized viewport coordinates."""
    f = float(corner_frac)
    return np.array(
        [
            [[0.0, 0.0], [f, 0.0], [0.0, f]],
            [[1.0, 0.0], [1.0, f], [1.0 - f, 0.0]],
            [[0.0, 1.0], [0.0, 1.0 - f], [f, 1.0]],
            [[1.0, 1.0], [1.0 - f, 1.0], [1.0, 1.0 - f]],
        ]
    )


class FrameRenderer:
    """Executes frame plans against a pooled set of render targets."""

    def __init__(
        self,
        scene: Scene,
        targets: RenderTargets,
        *,
        portal_box: bool = True,
        workers: int = 1,
        mask_tris: Optional[np.ndarray] = None,
    ):
        self.scene = scene
        self.targets = targets
        self._portal_box = portal_box
        self.workers = workers
        self.mask_tris = default_hidden_area_mask() if mask_tris is None else mask_tris
        self._surface_cache: dict[tuple, Mesh] = {}
        self._cache_token = None

    @property
    def portal_box(self) -> bool:
        return self._portal_box

    @portal_box.setter
    def portal_box(self, value: bool) -> None:
        if value != self._portal_box:
            self._surface_cache.clear()
        self._portal_box = value

    def set_scene(self, scene: Scene) -> None:
        self.scene = scene

    def _cached_surface(self, portal: Portal, role: str) -> Mesh:
        """Portal surface meshes are immutable per scene version; reuse them."""
        if self._cache_token != id(self.scene):
            self._surface_cache.clear()
            self._cache_token = id(self.scene)
        key = (portal.id, role)
        mesh = self._surface_cache.get(key)
        if mesh is None:
            if role == "disabled":
                mesh = make_portal_box(portal)
                mesh.color[:] = DISABLED_PORTAL_COLOR
            else:
                mesh = _portal_surface_mesh(portal, self._portal_box)
                if role == "placeholder":
                    mesh.color[:] = PLACEHOLDER_PORTAL_COLOR
            self._surface_cache[key] = mesh
        return mesh

    def _surface_items(self, plan: FramePlan, purpose: str,
                       policy: StencilPolicy) -> list[DrawItem]:
        """Portal surfaces as seen by one pass kind.

        Main pass: scheduled portals display their portal-view buffer (via
        screen-space sampling in non-stencil modes; in stencil modes those
        pixels were already filled, the surface just participates in depth).
        Inside a portal view every surface is an opaque placeholder.
        Disabled portals are opaque everywhere.
        """
        items = []
        for portal in sorted(self.scene.portals.values(), key=lambda p: p.id):
            if not portal.enabled:
                items.append(DrawItem(self._cached_surface(portal, "disabled"), policy))
                continue
            scheduled = plan.visible.get(portal.id, False)
            if purpose == PURPOSE_MAIN and scheduled and not plan.mode.uses_stencil:
                source = self.targets.view_target(portal.id).frame
                items.append(
                    DrawItem(self._cached_surface(portal, "surface"), policy, screen_source=source)
                )
            elif purpose == PURPOSE_MAIN and scheduled:
                # Marked pixels were already shaded by the portal-view pass;
                # the surface only participates in depth resolution here.
                items.append(DrawItem(self._cached_surface(portal, "surface"), policy))
            elif purpose == PURPOSE_STENCIL_MARK and scheduled:
                items.append(
                    DrawItem(
                        self._cached_surface(portal, "surface"),
                        StencilPolicy.mark_only(plan.stencil_refs[portal.id]),
                    )
                )
            else:
                items.append(DrawItem(self._cached_surface(portal, "placeholder"), policy))
        return items

    def _pass_items(self, plan: FramePlan, rp: RenderPass) -> list[DrawItem]:
        items = _scene_draw_items(self.scene, rp.stencil)
        items.extend(self._surface_items(plan, rp.purpose, rp.stencil))
        return items

    def _views_and_viewports(self, rp: RenderPass, target: StereoTarget, rig: StereoRig):
        base_proj = rig.projection
        if rp.eye == "both":
            poses = []
            for eye in EYES:
                pose = rig.eye_pose(eye)
                if rp.view_transform is not None:
                    pose = pose.transformed(rp.view_transform)
                poses.append(pose)
            viewports = [target.viewport("left"), target.viewport("right")]
        else:
            poses = [rp.viewpoint]
            viewports = [target.viewport(rp.eye)]
        views = [p.to_transform().inverse() for p in poses]
        projs = []
        for v in views:
            if rp.oblique_world is not None:
                n_w, d_w = rp.oblique_world
                n_v = v.apply_direction(n_w)
                point_w = -d_w * n_w  # a point on the plane
                p_v = v.apply_point(point_w)
                projs.append(base_proj.with_oblique(n_v, -float(n_v @ p_v)))
            else:
                projs.append(base_proj)
        return views, projs, viewports

    def execute_plan(self, plan: FramePlan) -> ExecutedFrame:
        for pid in plan.portal_ids:
            portal = self.scene.portals.get(pid)
            if portal is None or not portal.enabled:
                raise ValueError(f"plan references portal {pid} not enabled in this scene")

        self.targets.clear_frame(plan.portal_ids if not plan.mode.uses_stencil else [])
        records: list[PassRecord] = []
        for i, rp in enumerate(plan.passes):
            t0 = time.perf_counter()
            masked = 0
            if rp.purpose == PURPOSE_MASK:
                eyes = EYES if rp.eye == "both" else (rp.eye,)
                for eye in eyes:
                    masked += apply_hidden_area_mask(
                        self.targets.main.frame, self.targets.main.viewport(eye), self.mask_tris
                    )
                stats = PassStats()
            else:
                if rp.purpose == PURPOSE_PORTAL_VIEW and not plan.mode.uses_stencil:
                    target = self.targets.view_target(rp.portal_id)
                else:
                    target = self.targets.main
                views, projs, viewports = self._views_and_viewports(rp, target, plan.rig)
                items = self._pass_items(plan, rp)
                stats = execute_pass(
                    target.frame, items, views, projs, viewports, workers=self.workers
                )
            ms = (time.perf_counter() - t0) * 1000.0
            records.append(
                PassRecord(i, rp.purpose, rp.eye, rp.space, rp.portal_id, stats, ms, masked)
            )
        return ExecutedFrame(records, plan)


def execute_plan(plan: FramePlan, scene: Scene, targets: RenderTargets,
                 **renderer_kwargs) -> ExecutedFrame:
    """One-shot plan execution; long-lived callers keep a FrameRenderer."""
    return FrameRenderer(scene, targets, **renderer_kwargs).execute_plan(plan)


def frame_step(
    scene: Scene, rig: StereoRig, prev_head: Pose, new_head: Pose
) -> tuple[StereoRig, list]:
    """Apply head motion, teleporting the whole rig on head-center crossings.

    Eyes are never carried through a portal individually; the rig follows
    the head center, which is what keeps single-pass stereo coherent.
    """
    final_pose, events = resolve_crossings(scene, prev_head, new_head)
    return rig.moved(final_pose), events
