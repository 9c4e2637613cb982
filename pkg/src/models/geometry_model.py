"""
Geometry Model

Immutable value types for positions, orientations, rigid transforms and
camera intrinsics. Follows the thin model principle - validation and
serialisation only, the algebra lives in GeometryLogic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

UNIT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Vec3:
    """A point or direction in meters (base frame unless stated)."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not all(math.isfinite(c) for c in (self.x, self.y, self.z)):
            raise ValueError(f"Vec3 components must be finite, got {(self.x, self.y, self.z)}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)

    def to_list(self):
        return [self.x, self.y, self.z]

    @classmethod
    def from_array(cls, values) -> Vec3:
        """Build a Vec3 from any length-3 sequence or array.

        Args:
            values: Sequence of three numbers

        Returns:
            Vec3: The vector
        """
        arr = np.asarray(values, dtype=np.float64).reshape(3)
        return cls(float(arr[0]), float(arr[1]), float(arr[2]))

    def distance_to(self, other: Vec3) -> float:
        return float(np.linalg.norm(self.as_array() - other.as_array()))


@dataclass(frozen=True)
class UnitQuaternion:
    """Orientation as a unit quaternion, scalar first (w, x, y, z).

    q and -q describe the same rotation; comparisons go through
    GeometryLogic.quat_angle_deg, never through field equality.
    """

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        norm = math.sqrt(self.w ** 2 + self.x ** 2 + self.y ** 2 + self.z ** 2)
        if not math.isfinite(norm) or abs(norm - 1.0) > UNIT_TOLERANCE:
            raise ValueError(f"Quaternion must be unit length within {UNIT_TOLERANCE}, norm is {norm}")

    @classmethod
    def identity(cls) -> UnitQuaternion:
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def normalized(cls, w, x, y, z) -> UnitQuaternion:
        """Build a quaternion from possibly non-unit components.

        Args:
            w, x, y, z (float): Quaternion components, scalar first

        Returns:
            UnitQuaternion: The normalized quaternion

        Raises:
            ValueError: If the components have zero norm
        """
        arr = np.array([w, x, y, z], dtype=np.float64)
        norm = float(np.linalg.norm(arr))
        if norm < 1e-12 or not math.isfinite(norm):
            raise ValueError("Quaternion components must have non-zero finite norm")
        arr = arr / norm
        return cls(float(arr[0]), float(arr[1]), float(arr[2]), float(arr[3]))

    @classmethod
    def from_rotation(cls, rotation: Rotation) -> UnitQuaternion:
        x, y, z, w = rotation.as_quat()
        return cls.normalized(w, x, y, z)

    def as_rotation(self) -> Rotation:
        # scipy stores quaternions scalar last
        return Rotation.from_quat([self.x, self.y, self.z, self.w])

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z], dtype=np.float64)

    def to_list(self):
        return [self.w, self.x, self.y, self.z]


@dataclass(frozen=True)
class Pose:
    """Camera pose x = (p, theta) in the base frame.

    The orientation maps camera-frame vectors into the base frame.
    """

    position: Vec3
    orientation: UnitQuaternion

    def to_dict(self):
        """Convert pose to dictionary.

        Returns:
            dict: Pose data
        """
        return {
            'position': self.position.to_list(),
            'orientation': self.orientation.to_list(),
        }

    @classmethod
    def from_dict(cls, data) -> Pose:
        """Build a pose from its dictionary form.

        Args:
            data (dict): {'position': [x, y, z], 'orientation': [w, x, y, z]}

        Returns:
            Pose: The pose
        """
        return cls(
            position=Vec3.from_array(data['position']),
            orientation=UnitQuaternion.normalized(*data['orientation']),
        )


@dataclass(frozen=True, eq=False)
class HomogeneousTransform:
    """Rigid transform: p' = rotation @ p + translation."""

    rotation: np.ndarray
    translation: Vec3

    def __post_init__(self):
        rot = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        if not np.allclose(rot @ rot.T, np.eye(3), atol=UNIT_TOLERANCE):
            raise ValueError("Rotation must be orthonormal")
        if abs(np.linalg.det(rot) - 1.0) > UNIT_TOLERANCE:
            raise ValueError("Rotation must have determinant +1")
        rot.setflags(write=False)
        object.__setattr__(self, 'rotation', rot)

    @classmethod
    def identity(cls) -> HomogeneousTransform:
        return cls(np.eye(3), Vec3(0.0, 0.0, 0.0))

    def matrix(self) -> np.ndarray:
        m = np.eye(4, dtype=np.float64)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation.as_array()
        return m

    def allclose(self, other: HomogeneousTransform, atol: float = UNIT_TOLERANCE) -> bool:
        return bool(np.allclose(self.matrix(), other.matrix(), atol=atol))


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("Focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("Principal point must lie inside the image")

    def contains(self, u: float, v: float) -> bool:
        """True when the pixel lies inside the image rectangle."""
        return 0.0 <= u < self.width and 0.0 <= v < self.height

    def to_dict(self):
        return {
            'fx': self.fx, 'fy': self.fy, 'cx': self.cx, 'cy': self.cy,
            'width': self.width, 'height': self.height,
        }

    @classmethod
    def from_dict(cls, data) -> CameraIntrinsics:
        return cls(
            fx=float(data['fx']), fy=float(data['fy']),
            cx=float(data['cx']), cy=float(data['cy']),
            width=int(data['width']), height=int(data['height']),
        )


@dataclass(frozen=True)
class PixelCoord:
    """Projected pixel; depth is the camera-frame Z in meters."""

    u: float
    v: float
    depth: float = field(default=0.0)


@dataclass(frozen=True)
class BehindCamera:
    """Projection outcome for points with camera-frame Z at or below 1e-6."""

    depth: float
