import math

import numpy as np
import pytest

from portalbox.fixtures import build_test_scene, build_transition_scene, look_at_pose
from portalbox.geometry import Pose
from portalbox.portals import portal_view_transform
from portalbox.scene import (
    Portal,
    Projection,
    Scene,
    StereoRig,
    TrackedBounds,
    quad_mesh,
    set_portal_enabled,
)
from portalbox.scheduler import (
    PURPOSE_MAIN,
    PURPOSE_PORTAL_VIEW,
    PURPOSE_STENCIL_MARK,
    FrameRenderer,
    RenderMode,
    RenderTargets,
    expected_pass_count,
    frame_step,
    plan_passes,
    visible_portals,
)

ORBIT_POSE = look_at_pose((0, 1.7, 11.0), (0, 1.2, 0))


def test_pass_count_law_all_modes_even_counts(arena3):
    for pairs in range(4):
        scene = build_test_scene(pairs)
        for mode in RenderMode:
            plan = plan_passes(scene, scene.rig, mode, frustum_cull=False)
            n = 2 * pairs
            assert plan.pass_count == expected_pass_count(mode, n), (pairs, mode)


def test_pass_count_law_odd_count_via_visibility():
    # One portal in view, its partner far behind the camera: N = 1.
    floor = quad_mesh([(-9, 0, -9), (-9, 0, 9), (9, 0, 9), (9, 0, -9)], (80, 80, 80), 1)
    portals = {
        1: Portal(id=1, partner_id=2, space=1, position=np.array([0.0, 1.5, -3.0])),
        2: Portal(id=2, partner_id=1, space=2, position=np.array([200.0, 1.5, 0.0])),
    }
    rig = StereoRig(head=Pose.from_yaw_pitch_roll((0, 1.5, 0), 0, 0, 0),
                    projection=Projection(fov_y=math.radians(90)))
    scene = Scene(spaces={1: "r", 2: "elsewhere"}, meshes=[floor], portals=portals,
                  tracked_bounds=TrackedBounds(-9, 9, -9, 9), rig=rig)
    assert visible_portals(scene, scene.rig) == [1]
    for mode, expect in [
        (RenderMode.NAIVE_MULTI_PASS, 4),
        (RenderMode.STENCIL_MULTI_PASS, 6),
        (RenderMode.INSTANCED_SINGLE_PASS, 2),
        (RenderMode.STENCIL_INSTANCED, 3),
    ]:
        plan = plan_passes(scene, scene.rig, mode, frustum_cull=True)
        assert plan.pass_count == expect == expected_pass_count(mode, 1)


def test_disabling_one_pair_yields_ten_naive_passes(arena3):
    scene = set_portal_enabled(arena3, 1, False)
    plan = plan_passes(scene, scene.rig, RenderMode.NAIVE_MULTI_PASS, frustum_cull=False)
    assert plan.pass_count == 10


def test_portal_views_precede_their_eyes_main_pass(arena3):
    rig = arena3.rig.moved(ORBIT_POSE)
    for mode in RenderMode:
        plan = plan_passes(arena3, rig, mode)
        main_index = {}
        for i, p in enumerate(plan.passes):
            if p.purpose == PURPOSE_MAIN:
                main_index[p.eye] = i
        for i, p in enumerate(plan.passes):
            if p.purpose == PURPOSE_PORTAL_VIEW:
                assert i < main_index[p.eye]


def test_stencil_refs_are_one_based_consecutive(arena3):
    rig = arena3.rig.moved(ORBIT_POSE)
    plan = plan_passes(arena3, rig, RenderMode.STENCIL_MULTI_PASS)
    assert plan.portal_ids == sorted(plan.portal_ids)
    assert [plan.stencil_refs[p] for p in plan.portal_ids] == list(
        range(1, len(plan.portal_ids) + 1)
    )


def test_portal_view_viewpoint_is_transformed_eye(arena3):
    rig = arena3.rig.moved(ORBIT_POSE)
    plan = plan_passes(arena3, rig, RenderMode.NAIVE_MULTI_PASS)
    for rp in plan.passes:
        if rp.purpose != PURPOSE_PORTAL_VIEW:
            continue
        src = arena3.portals[rp.portal_id]
        dst = arena3.partner_of(rp.portal_id)
        t = portal_view_transform(src, dst)
        expect = rig.eye_pose(rp.eye).transformed(t)
        assert np.allclose(rp.viewpoint.position, expect.position, atol=1e-12)
        assert rp.space == dst.space


def test_visible_portals_excludes_behind_and_off_frustum(arena3):
    # Looking at the blue portal from close up: the portal behind the rig
    # (on the opposite side of the ring) must not schedule.
    rig = arena3.rig.moved(look_at_pose((0, 1.5, -3.5), (0, 1.5, -6)))
    vis = visible_portals(arena3, rig)
    assert 1 in vis  # dead ahead
    assert 4 not in vis  # behind the rig (platform at +z side)
    plan = plan_passes(arena3, rig, RenderMode.NAIVE_MULTI_PASS, frustum_cull=True)
    assert plan.pass_count == expected_pass_count(
        RenderMode.NAIVE_MULTI_PASS, len(vis)
    )
    assert plan.pass_count < expected_pass_count(RenderMode.NAIVE_MULTI_PASS, 6)


def test_visible_portals_is_conservative_against_quad_sampling(arena3):
    # Any portal with a quad sample point inside either eye frustum must be
    # in the visible set (the planner may include more, never less).
    poses = [
        ORBIT_POSE,
        look_at_pose((0, 1.5, -3.5), (0, 1.5, -6)),
        look_at_pose((8, 1.0, 8), (0, 1.5, 0)),
        look_at_pose((-10, 2.5, 1), (5, 1.5, -3)),
    ]
    proj = arena3.rig.projection
    tx, ty = proj.tan_half()
    for pose in poses:
        rig = arena3.rig.moved(pose)
        vis = set(visible_portals(arena3, rig))
        for portal in arena3.enabled_portals():
            corners = portal.quad_corners()
            samples = [corners[i] * (1 - t) + corners[(i + 2) % 4] * t
                       for i in range(4) for t in np.linspace(0, 1, 5)]
            inside_any = False
            for eye in ("left", "right"):
                view = rig.eye_pose(eye).to_transform().inverse()
                for s in samples:
                    v = view.apply_point(s)
                    if not (-proj.far <= v[2] <= -proj.near):
                        continue
                    if abs(v[0]) <= -v[2] * tx and abs(v[1]) <= -v[2] * ty:
                        inside_any = True
                        break
                if inside_any:
                    break
            if inside_any:
                assert portal.id in vis


def test_plan_dump_golden():
    scene = build_test_scene(1)
    rig = scene.rig.moved(ORBIT_POSE)
    plan = plan_passes(scene, rig, RenderMode.STENCIL_INSTANCED)
    assert plan.dump() == "\n".join(
        [
            "[ 0] stencil-mark     both  space=1",
            "[ 1] portal-view      both  space=3 portal=1",
            "[ 2] portal-view      both  space=2 portal=2",
            "[ 3] main-scene       both  space=1",
        ]
    )


def test_execute_plan_rejects_mismatched_scene(arena3):
    rig = arena3.rig.moved(ORBIT_POSE)
    plan = plan_passes(arena3, rig, RenderMode.NAIVE_MULTI_PASS)
    other = set_portal_enabled(arena3, 1, False)
    renderer = FrameRenderer(other, RenderTargets.create(32, 32))
    with pytest.raises(ValueError, match="not enabled"):
        renderer.execute_plan(plan)


def _render(scene, rig, mode, size=96, **plan_kwargs):
    targets = RenderTargets.create(size, size)
    renderer = FrameRenderer(scene, targets)
    plan = plan_passes(scene, rig, mode, **plan_kwargs)
    frame = renderer.execute_plan(plan)
    return targets, frame


def test_instanced_output_byte_equals_multipass(arena3):
    rig = arena3.rig.moved(ORBIT_POSE)
    t_naive, f_naive = _render(arena3, rig, RenderMode.NAIVE_MULTI_PASS)
    t_inst, f_inst = _render(arena3, rig, RenderMode.INSTANCED_SINGLE_PASS)
    a, b = t_naive.main.frame, t_inst.main.frame
    assert (a.color == b.color).all()
    assert (a.depth == b.depth).all()
    assert (a.stencil == b.stencil).all()
    assert (a.space_id == b.space_id).all()
    assert f_inst.triangles_submitted * 2 == f_naive.triangles_submitted


def test_stencil_color_output_equals_naive(arena3):
    rig = arena3.rig.moved(ORBIT_POSE)
    t_naive, f_naive = _render(arena3, rig, RenderMode.NAIVE_MULTI_PASS)
    t_st, f_st = _render(arena3, rig, RenderMode.STENCIL_MULTI_PASS)
    assert (t_naive.main.frame.color == t_st.main.frame.color).all()
    assert (t_naive.main.frame.space_id == t_st.main.frame.space_id).all()
    # The whole point: the stencil path shades far fewer color fragments.
    assert f_st.fragments_shaded < f_naive.fragments_shaded


def test_stencil_instanced_equals_stencil(arena3):
    rig = arena3.rig.moved(ORBIT_POSE)
    t_a, _ = _render(arena3, rig, RenderMode.STENCIL_MULTI_PASS)
    t_b, _ = _render(arena3, rig, RenderMode.STENCIL_INSTANCED)
    assert (t_a.main.frame.color == t_b.main.frame.color).all()


def test_stencil_mode_per_eye_fill_bounded_by_viewport(arena3):
    rig = arena3.rig.moved(ORBIT_POSE)
    size = 96
    _, frame = _render(arena3, rig, RenderMode.STENCIL_MULTI_PASS, size=size)
    for eye in ("left", "right"):
        assert frame.color_fragments_for_eye(eye) <= size * size


def test_mark_passes_shade_no_color(arena3):
    rig = arena3.rig.moved(ORBIT_POSE)
    _, frame = _render(arena3, rig, RenderMode.STENCIL_MULTI_PASS)
    marks = [r for r in frame.records if r.purpose == PURPOSE_STENCIL_MARK]
    assert marks
    assert all(r.stats.fragments_shaded == 0 for r in marks)


def test_deterministic_across_runs_and_workers(arena3):
    rig = arena3.rig.moved(ORBIT_POSE)
    buffers = []
    counts = []
    for workers in (1, 1, 4):
        targets = RenderTargets.create(64, 64)
        renderer = FrameRenderer(arena3, targets, workers=workers)
        plan = plan_passes(arena3, rig, RenderMode.STENCIL_MULTI_PASS)
        frame = renderer.execute_plan(plan)
        buffers.append(targets.main.frame.color.copy())
        counts.append(
            (frame.fragments_shaded, frame.total("fragments_depth_rejected"),
             frame.total("triangles_culled"))
        )
    assert (buffers[0] == buffers[1]).all()
    assert (buffers[0] == buffers[2]).all()
    assert counts[0] == counts[1] == counts[2]


def test_oblique_clip_prevents_leakage(transition_scene):
    # Park a bright box behind the destination portal's plane, squarely
    # between the virtual camera and the plane. With the oblique clip it
    # is cut away; without it, it covers the portal view.
    from dataclasses import replace

    from portalbox.scene import box_mesh

    clutter = box_mesh((50.0, 1.0, -0.6), (3.0, 2.0, 0.4), (255, 0, 255), 2,
                       name="clutter")
    scene = replace(transition_scene, meshes=transition_scene.meshes + [clutter])
    rig = scene.rig.moved(look_at_pose((0, 1.6, -1.5), (0, 1.0, 0)))
    t_on, _ = _render(scene, rig, RenderMode.NAIVE_MULTI_PASS, oblique_clip=True)
    t_off, _ = _render(scene, rig, RenderMode.NAIVE_MULTI_PASS, oblique_clip=False)
    on, off = t_on.main.frame.color, t_off.main.frame.color
    magenta_on = int(((on[..., 0] == 255) & (on[..., 2] == 255)).sum())
    magenta_off = int(((off[..., 0] == 255) & (off[..., 2] == 255)).sum())
    assert magenta_on == 0
    assert magenta_off > 0


def test_hidden_area_mask_reduces_fill(arena3):
    rig = arena3.rig.moved(ORBIT_POSE)
    size = 96
    _, base = _render(arena3, rig, RenderMode.STENCIL_MULTI_PASS, size=size)
    _, masked = _render(arena3, rig, RenderMode.STENCIL_MULTI_PASS, size=size,
                        hidden_area_mask=True)
    masked_px = sum(r.masked_pixels for r in masked.records)
    assert masked_px > 0
    for eye in ("left", "right"):
        assert masked.color_fragments_for_eye(eye) <= size * size
    assert masked.fragments_shaded < base.fragments_shaded


def test_flicker_freedom_along_straight_walk(transition_scene):
    # Diagonal 1 cm steps through the portal while looking straight at the
    # wall: the center pixel flips from wall to portal content exactly once
    # over the whole walk, and the post-crossing frame renders from the
    # destination space.
    import numpy as np

    from portalbox.portals import portal_view_transform

    scene = transition_scene
    size = 96
    targets = RenderTargets.create(size, size)
    renderer = FrameRenderer(scene, targets)
    d = np.array([1.0, 0.0, 1.0]) / math.sqrt(2.0)
    rig = scene.rig.moved(Pose.from_yaw_pitch_roll((-1.2, 1.6, -1.2), math.pi, 0, 0))
    space = scene.start_space
    centers = []
    crossed_frame = None
    direction = d
    for i in range(200):
        target = Pose(rig.head.position + 0.01 * direction, rig.head.orientation)
        rig, events = frame_step(scene, rig, rig.head, target)
        for ev in events:
            t = portal_view_transform(scene.portals[ev.portal_id],
                                      scene.partner_of(ev.portal_id))
            direction = t.apply_direction(direction)
            space = scene.partner_of(ev.portal_id).space
            crossed_frame = i
        plan = plan_passes(scene, rig, RenderMode.NAIVE_MULTI_PASS, current_space=space)
        frame = renderer.execute_plan(plan)
        centers.append(int(targets.main.frame.space_id[size // 2, size // 4]))
        if crossed_frame is not None and i >= crossed_frame + 3:
            break
    assert crossed_frame is not None
    assert space == 2
    changes = sum(1 for a, b in zip(centers, centers[1:]) if a != b)
    assert changes == 1
    assert centers[0] == 1 and centers[-1] == 2


def test_frame_step_no_crossing_keeps_rig(arena3):
    rig = arena3.rig
    prev = rig.head
    new = Pose(prev.position + np.array([0.0, 0.0, 0.1]), prev.orientation)
    rig2, events = frame_step(arena3, rig, prev, new)
    assert events == []
    assert np.allclose(rig2.head.position, new.position)


def test_frame_step_crossing_teleports_whole_rig(transition_scene):
    scene = transition_scene
    start = Pose.from_yaw_pitch_roll((0.0, 1.6, -0.05), math.pi, 0, 0)
    end = Pose.from_yaw_pitch_roll((0.0, 1.6, 0.05), math.pi, 0, 0)
    rig = scene.rig.moved(start)
    rig2, events = frame_step(scene, rig, start, end)
    assert len(events) == 1 and events[0].portal_id == 1
    # The far portal sits at x=50; the rig lands just inside the far room.
    assert abs(rig2.head.position[0] - 50.0) < 0.2
    # Eyes move with the head: still ipd apart, straddling it symmetrically.
    d = rig2.eye_position("right") - rig2.eye_position("left")
    assert abs(np.linalg.norm(d) - rig2.ipd) < 1e-9
