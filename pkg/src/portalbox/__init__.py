"""portalbox: a deterministic stereoscopic software renderer with traversable portals."""

from .geometry import Pose, Transform
from .portals import (
    CrossingEvent,
    detect_crossing,
    eye_inside_box,
    make_portal_box,
    portal_view_transform,
    teleport,
)
from .raster import (
    DrawItem,
    FrameTarget,
    StencilPolicy,
    StereoTarget,
    apply_hidden_area_mask,
    clear,
    draw_mesh,
    draw_mesh_instanced_stereo,
    read_pixel,
)
from .scene import Mesh, Portal, Projection, Scene, SpaceId, StereoRig, set_portal_enabled
from .scene_io import load_scene, save_scene
from .scheduler import (
    FramePlan,
    FrameRenderer,
    RenderMode,
    RenderTargets,
    execute_plan,
    expected_pass_count,
    frame_step,
    plan_passes,
    visible_portals,
)
from .validation import validate_impossible_space

__version__ = "0.1.0"
