"""Triangle layout for the portal wall box, in portal-local coordinates.

The quad spans x in [-w/2, w/2], y in [-h/2, h/2] at z = 0; the box
extrudes to z = -depth. Winding: the front face (z = 0) faces outward
(+Z); the four sides and the back face are wound toward the interior, so
an eye inside the wall sees them while the front face culls away and lets
it look back out.
"""

from __future__ import annotations

import numpy as np


def portal_box_triangles(width: float, height: float, depth: float) -> np.ndarray:
    hw, hh = width / 2.0, height / 2.0
    z0, z1 = 0.0, -depth

    def quad(a, b, c, d):
        return [[a, b, c], [a, c, d]]

    tris = []
    # Front face: normal +Z (outward).
    tris += quad((-hw, -hh, z0), (hw, -hh, z0), (hw, hh, z0), (-hw, hh, z0))
    # Back face: normal +Z (toward the interior).
    tris += quad((-hw, -hh, z1), (hw, -hh, z1), (hw, hh, z1), (-hw, hh, z1))
    # Left side (x = -hw): normal +X, toward the interior.
    tris += quad((-hw, -hh, z0), (-hw, -hh, z1), (-hw, hh, z1), (-hw, hh, z0))
    # Right side (x = +hw): normal -X, toward the interior.
    tris += quad((hw, -hh, z0), (hw, hh, z0), (hw, hh, z1), (hw, -hh, z1))
    # Bottom (y = -hh): normal +Y, toward the interior.
    tris += quad((-hw, -hh, z0), (hw, -hh, z0), (hw, -hh, z1), (-hw, -hh, z1))
    # Top (y = +hh): normal -Y, toward the interior.
    tris += quad((-hw, hh, z0), (-hw, hh, z1), (hw, hh, z1), (hw, hh, z0))
    return np.array(tris, dtype=np.float64)
