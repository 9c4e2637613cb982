"""
Action Model

The eight action spaces, the actions a policy may emit and the outcome of
validating them.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

from src.models.geometry_model import Vec3
from src.models.grid_model import GridSpec, VertexIndex

ALLOWED_ROTATIONS = (-35.0, 0.0, 35.0)


class ActionSpaceKind(str, Enum):
    """Action space names as used in experiment files and on the command line."""

    NAP = 'NAP'
    TWO_D_NA = '2DNA'
    TWO_D_A = '2DA'
    THREE_D_D = '3DD'
    THREE_D_C = '3DC'
    THREE_D_X = '3Dx'
    THREE_D_X_N = '3DxN'
    THREE_D_XY = '3Dxy'

    @property
    def has_rotation(self) -> bool:
        return self in (ActionSpaceKind.THREE_D_X, ActionSpaceKind.THREE_D_X_N, ActionSpaceKind.THREE_D_XY)


ALL_KINDS = tuple(ActionSpaceKind)


@dataclass(frozen=True)
class VertexTarget:
    index: VertexIndex

    def to_dict(self):
        return {'vertex': list(self.index)}


@dataclass(frozen=True)
class ContinuousPoint:
    point: Vec3

    def to_dict(self):
        return {'point': self.point.to_list()}


Target = Union[VertexTarget, ContinuousPoint]


@dataclass(frozen=True)
class Action:
    """A move to a target with absolute rotations about base x and y."""

    target: Target
    rot_x_deg: float = 0.0
    rot_y_deg: float = 0.0

    def __post_init__(self):
        if self.rot_x_deg not in ALLOWED_ROTATIONS or self.rot_y_deg not in ALLOWED_ROTATIONS:
            raise ValueError(f"Rotations must be one of {ALLOWED_ROTATIONS}")

    def to_dict(self):
        """Convert action to dictionary.

        Returns:
            dict: Action data
        """
        data = self.target.to_dict()
        data.update({'rot_x_deg': self.rot_x_deg, 'rot_y_deg': self.rot_y_deg})
        return data

    @classmethod
    def from_dict(cls, data) -> Optional[Action]:
        if data is None:
            return None
        if 'vertex' in data:
            target = VertexTarget(VertexIndex(*(int(n) for n in data['vertex'])))
        else:
            target = ContinuousPoint(Vec3.from_array(data['point']))
        return cls(target, float(data.get('rot_x_deg', 0.0)), float(data.get('rot_y_deg', 0.0)))


@dataclass(frozen=True)
class ActionSpaceRules:
    """Pure function of kind; see ActionSpaceLogic.rules_for."""

    kind: ActionSpaceKind
    grid: GridSpec
    allows_movement: bool
    allows_continuous: bool
    allows_rot_x: bool
    allows_rot_y: bool
    annotated: bool
    include_home_obs: bool

    def describe(self) -> str:
        if not self.allows_movement:
            return "No movement: the answer must come from the home observation."
        parts = ["continuous points inside the grid cube" if self.allows_continuous
                 else "grid vertices of the %s grid" % ('2D' if self.grid.dimensionality.value == 'TwoD' else '3D')]
        if self.allows_rot_x:
            parts.append("rotations of -35, 0 or +35 degrees about base x")
        if self.allows_rot_y:
            parts.append("rotations of -35, 0 or +35 degrees about base y")
        return "Allowed: " + "; ".join(parts) + "."


class RejectionReason(str, Enum):
    OUT_OF_BOUNDS = 'OutOfBounds'
    WRONG_TARGET_TYPE = 'WrongTargetType'
    ROTATION_NOT_ALLOWED = 'RotationNotAllowed'
    REVISIT = 'Revisit'


@dataclass(frozen=True)
class Rejection:
    reason: RejectionReason
    detail: str = ''

    def __bool__(self):
        return False


@dataclass(frozen=True)
class Valid:
    vertex: VertexIndex

    def __bool__(self):
        return True
