"""
Scene Model

Static tabletop world: object primitives, the hidden attribute with its
visibility cone, fiducial markers and the episode's home/goal poses.
Follows the thin model principle - value types and serialisation only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np

from src.models.geometry_model import CameraIntrinsics, HomogeneousTransform, Pose, Vec3
from src.models.grid_model import GridSpec


@dataclass(frozen=True)
class BoxShape:
    dims: Vec3

    def __post_init__(self):
        if min(self.dims.to_list()) <= 0:
            raise ValueError("Box dimensions must be positive")

    def to_dict(self):
        return {'type': 'box', 'dims': self.dims.to_list()}


@dataclass(frozen=True)
class CylinderShape:
    """Cylinder with its axis along the object's local z."""

    radius: float
    height: float

    def __post_init__(self):
        if self.radius <= 0 or self.height <= 0:
            raise ValueError("Cylinder radius and height must be positive")

    def to_dict(self):
        return {'type': 'cylinder', 'radius': self.radius, 'height': self.height}


Shape = Union[BoxShape, CylinderShape]


@dataclass(frozen=True)
class ObjectSpec:
    """Tabletop object; pose.position is the shape centroid.

    surface_attributes are "key: value" facts, visible whenever the object is.
    """

    id: str
    shape: Shape
    pose: Pose
    surface_attributes: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def name(self) -> str:
        return self.id.replace('_', ' ')

    def to_dict(self):
        return {
            'id': self.id,
            'shape': self.shape.to_dict(),
            'pose': self.pose.to_dict(),
            'surface_attributes': list(self.surface_attributes),
        }


@dataclass(frozen=True)
class HiddenAttribute:
    """Fact observable only from inside a view cone and distance band around an opening."""

    owner_id: str
    fact: str
    opening_center: Vec3
    opening_normal: Vec3
    cone_half_angle: float
    min_distance: float
    max_distance: float

    def __post_init__(self):
        norm = float(np.linalg.norm(self.opening_normal.as_array()))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError("Opening normal must be unit length")
        if not 0 < self.cone_half_angle < 90:
            raise ValueError("Cone half angle must lie in (0, 90) degrees")
        if not 0 < self.min_distance < self.max_distance:
            raise ValueError("Distance band must satisfy 0 < min_distance < max_distance")

    def to_dict(self):
        return {
            'owner_id': self.owner_id,
            'fact': self.fact,
            'opening_center': self.opening_center.to_list(),
            'opening_normal': self.opening_normal.to_list(),
            'cone_half_angle': self.cone_half_angle,
            'min_distance': self.min_distance,
            'max_distance': self.max_distance,
        }


@dataclass(frozen=True)
class Marker:
    """Fiducial marker; its local +z is the face normal."""

    id: int
    pose: Pose


@dataclass(frozen=True)
class TableBounds:
    """Axis-aligned table rectangle at z = 0."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError("Table bounds must have positive area")

    @property
    def center(self) -> Vec3:
        return Vec3((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0, 0.0)

    def corners(self):
        return [
            Vec3(self.x_min, self.y_min, 0.0),
            Vec3(self.x_max, self.y_min, 0.0),
            Vec3(self.x_max, self.y_max, 0.0),
            Vec3(self.x_min, self.y_max, 0.0),
        ]


@dataclass(frozen=True)
class SceneSpec:
    """A complete, immutable episode scene."""

    scene_id: str
    table_bounds: TableBounds
    objects: Tuple[ObjectSpec, ...]
    hidden: HiddenAttribute
    markers: Tuple[Marker, ...]
    grid: GridSpec
    home_pose: Pose
    goal_pose: Pose
    query: str
    truth_answer: str
    intrinsics: CameraIntrinsics
    description: str = ''

    def object_by_id(self, object_id: str) -> Optional[ObjectSpec]:
        return next((o for o in self.objects if o.id == object_id), None)

    @property
    def marker_poses(self):
        return {m.id: m.pose for m in self.markers}


@dataclass(frozen=True)
class ObservationFacts:
    """Symbolic stand-in for the camera image at one pose."""

    camera_pose: Pose
    visible_object_ids: Tuple[str, ...]
    visible_surface_facts: Tuple[Tuple[str, str], ...]
    hidden_fact_visible: bool
    detected_markers: Tuple[Tuple[int, HomogeneousTransform], ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.hidden_fact_visible and not self.visible_object_ids:
            raise ValueError("A visible hidden fact requires its owner to be visible")

    def to_dict(self):
        return {
            'camera_pose': self.camera_pose.to_dict(),
            'visible_object_ids': list(self.visible_object_ids),
            'visible_surface_facts': [list(f) for f in self.visible_surface_facts],
            'hidden_fact_visible': self.hidden_fact_visible,
            'detected_marker_ids': [mid for mid, _ in self.detected_markers],
        }


