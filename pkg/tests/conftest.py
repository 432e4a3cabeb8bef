import math

import numpy as np
import pytest

from portalbox.fixtures import build_four_room_scene, build_test_scene, build_transition_scene
from portalbox.geometry import Transform
from portalbox.raster import FrameTarget, clear, draw_mesh
from portalbox.scene import Mesh, Projection


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # Compile the numba kernels once so timed tests measure steady state.
    t = FrameTarget(8, 8)
    clear(t)
    tri = np.array([[[-1.0, -1.0, -3.0], [1.0, -1.0, -3.0], [0.0, 1.0, -3.0]]])
    mesh = Mesh(tri, np.array([10, 10, 10]), space=1)
    draw_mesh(t, mesh, Transform.identity(), Projection(fov_y=math.radians(90)))


@pytest.fixture(scope="session")
def arena3():
    return build_test_scene(3)


@pytest.fixture(scope="session")
def four_rooms():
    return build_four_room_scene()


@pytest.fixture(scope="session")
def transition_scene():
    return build_transition_scene()
