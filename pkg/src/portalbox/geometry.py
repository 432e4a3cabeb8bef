"""Rigid transforms, poses, and small vector helpers.

Everything is float64 and right-handed: +Y is up, the floor is the XZ
plane, and cameras look along their local -Z axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ORTHONORMAL_TOL = 1e-6


def _as_vec3(v) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64)
    if a.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {a.shape}")
    return a


class Transform:
    """A rigid 4x4 homogeneous transform (rotation + translation, meters)."""

    __slots__ = ("m",)

    def __init__(self, m=None):
        if m is None:
            self.m = np.eye(4, dtype=np.float64)
        else:
            self.m = np.array(m, dtype=np.float64)
            if self.m.shape != (4, 4):
                raise ValueError("Transform needs a 4x4 matrix")
            self._check_rigid()

    def _check_rigid(self):
        r = self.m[:3, :3]
        if not np.allclose(r @ r.T, np.eye(3), atol=ORTHONORMAL_TOL):
            raise ValueError("rotation block is not orthonormal")
        if np.linalg.det(r) < 0:
            raise ValueError("rotation block has negative determinant")
        if not np.allclose(self.m[3], (0.0, 0.0, 0.0, 1.0), atol=ORTHONORMAL_TOL):
            raise ValueError("bottom row must be (0, 0, 0, 1)")

    @classmethod
    def identity(cls) -> "Transform":
        return cls()

    @classmethod
    def from_rotation_translation(cls, rot: np.ndarray, pos) -> "Transform":
        t = cls._from_parts(rot, _as_vec3(pos))
        t._check_rigid()
        return t

    @classmethod
    def _from_parts(cls, rot: np.ndarray, pos: np.ndarray) -> "Transform":
        # Internal fast path for rotation blocks that are orthonormal by
        # construction (quaternions, yaw/pitch/roll products).
        t = cls.__new__(cls)
        m = np.eye(4, dtype=np.float64)
        m[:3, :3] = rot
        m[:3, 3] = pos
        t.m = m
        return t

    @classmethod
    def translation(cls, pos) -> "Transform":
        return cls.from_rotation_translation(np.eye(3), pos)

    @classmethod
    def rotation_y(cls, angle: float) -> "Transform":
        c, s = math.cos(angle), math.sin(angle)
        rot = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
        return cls._from_parts(rot, np.zeros(3))

    @classmethod
    def from_yaw_pitch_roll(cls, pos, yaw: float, pitch: float, roll: float) -> "Transform":
        """Yaw about +Y, then pitch about local +X, then roll about local +Z."""
        return cls._from_parts(yaw_pitch_roll_matrix(yaw, pitch, roll), _as_vec3(pos))

    @property
    def rotation(self) -> np.ndarray:
        return self.m[:3, :3]

    @property
    def position(self) -> np.ndarray:
        return self.m[:3, 3]

    def compose(self, other: "Transform") -> "Transform":
        """self applied after other: (self @ other)(p) = self(other(p))."""
        t = Transform.__new__(Transform)
        t.m = self.m @ other.m
        return t

    def __matmul__(self, other: "Transform") -> "Transform":
        return self.compose(other)

    def inverse(self) -> "Transform":
        r = self.m[:3, :3]
        t = Transform.__new__(Transform)
        m = np.eye(4, dtype=np.float64)
        m[:3, :3] = r.T
        m[:3, 3] = -r.T @ self.m[:3, 3]
        t.m = m
        return t

    def apply_point(self, p) -> np.ndarray:
        return self.m[:3, :3] @ _as_vec3(p) + self.m[:3, 3]

    def apply_points(self, pts: np.ndarray) -> np.ndarray:
        """Transform an (..., 3) array of points."""
        return pts @ self.m[:3, :3].T + self.m[:3, 3]

    def apply_direction(self, d) -> np.ndarray:
        return self.m[:3, :3] @ _as_vec3(d)

    def is_rigid(self, tol: float = ORTHONORMAL_TOL) -> bool:
        r = self.m[:3, :3]
        return (
            np.allclose(r @ r.T, np.eye(3), atol=tol)
            and np.linalg.det(r) > 0
            and np.allclose(self.m[3], (0, 0, 0, 1), atol=tol)
        )

    def __repr__(self):
        return f"Transform(pos={np.round(self.position, 4).tolist()})"

    def allclose(self, other: "Transform", atol: float = 1e-9) -> bool:
        return np.allclose(self.m, other.m, atol=atol)


def yaw_pitch_roll_matrix(yaw: float, pitch: float, roll: float) -> np.ndarray:
    cy, sy = math.cos(yaw), math.sin(yaw)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cr, sr = math.cos(roll), math.sin(roll)
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rx = np.array([[1, 0, 0], [0, cp, -sp], [0, sp, cp]])
    rz = np.array([[cr, -sr, 0], [sr, cr, 0], [0, 0, 1]])
    return ry @ rx @ rz


def quat_normalize(q: np.ndarray) -> np.ndarray:
    n = float(np.linalg.norm(q))
    if n < 1e-12:
        raise ValueError("cannot normalize a zero quaternion")
    return q / n


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = quat_normalize(np.asarray(q, dtype=np.float64))
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(r: np.ndarray) -> np.ndarray:
    # Shepperd's method: pick the largest diagonal combination for stability.
    t = np.trace(r)
    if t > 0:
        s = math.sqrt(t + 1.0) * 2
        return quat_normalize(
            np.array(
                [0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s]
            )
        )
    i = int(np.argmax(np.diag(r)))
    if i == 0:
        s = math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2
        q = [(r[2, 1] - r[1, 2]) / s, 0.25 * s, (r[0, 1] + r[1, 0]) / s, (r[0, 2] + r[2, 0]) / s]
    elif i == 1:
        s = math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2
        q = [(r[0, 2] - r[2, 0]) / s, (r[0, 1] + r[1, 0]) / s, 0.25 * s, (r[1, 2] + r[2, 1]) / s]
    else:
        s = math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2
        q = [(r[1, 0] - r[0, 1]) / s, (r[0, 2] + r[2, 0]) / s, (r[1, 2] + r[2, 1]) / s, 0.25 * s]
    return quat_normalize(np.array(q))


def quat_from_yaw_pitch_roll(yaw: float, pitch: float, roll: float) -> np.ndarray:
    return matrix_to_quat(yaw_pitch_roll_matrix(yaw, pitch, roll))


def quat_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Smallest rotation angle (radians) taking orientation a to b.

    Uses the chord length 2*sin(theta/4), which stays accurate for tiny
    angles where acos of the dot product loses all precision.
    """
    a = quat_normalize(np.asarray(a, dtype=np.float64))
    b = quat_normalize(np.asarray(b, dtype=np.float64))
    chord = min(float(np.linalg.norm(a - b)), float(np.linalg.norm(a + b)))
    return 4.0 * math.asin(min(1.0, chord / 2.0))


@dataclass
class Pose:
    """Position plus unit-quaternion orientation (w, x, y, z)."""

    position: np.ndarray
    orientation: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        self.position = _as_vec3(self.position)
        self.orientation = np.asarray(self.orientation, dtype=np.float64)
        if self.orientation.shape != (4,):
            raise ValueError("orientation must be a quaternion (w, x, y, z)")
        n = float(np.linalg.norm(self.orientation))
        if abs(n - 1.0) > ORTHONORMAL_TOL:
            raise ValueError(f"orientation quaternion not normalized (|q| = {n})")
        self.orientation = self.orientation / n

    @classmethod
    def from_yaw_pitch_roll(cls, position, yaw: float = 0.0, pitch: float = 0.0, roll: float = 0.0) -> "Pose":
        return cls(_as_vec3(position), quat_from_yaw_pitch_roll(yaw, pitch, roll))

    def to_transform(self) -> Transform:
        return Transform._from_parts(quat_to_matrix(self.orientation), self.position)

    def transformed(self, t: Transform) -> "Pose":
        rot = t.rotation @ quat_to_matrix(self.orientation)
        return Pose(t.apply_point(self.position), matrix_to_quat(rot))

    def forward(self) -> np.ndarray:
        """World-space view direction (local -Z)."""
        return quat_to_matrix(self.orientation) @ np.array([0.0, 0.0, -1.0])

    def right(self) -> np.ndarray:
        """World-space lateral axis (local +X)."""
        return quat_to_matrix(self.orientation) @ np.array([1.0, 0.0, 0.0])

    def up(self) -> np.ndarray:
        return quat_to_matrix(self.orientation) @ np.array([0.0, 1.0, 0.0])
