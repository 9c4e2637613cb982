"""
Grid Model

Value types for the virtual grid anchored in the base frame and for its
projected overlay.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Tuple

from src.models.geometry_model import Vec3


class GridDimensionality(str, Enum):
    TWO_D = 'TwoD'
    THREE_D = 'ThreeD'


class VertexIndex(NamedTuple):
    """Lattice index of a grid vertex."""

    i: int
    j: int
    k: int

    def sort_key(self):
        # Tie-break order is (k, j, i)
        return (self.k, self.j, self.i)


@dataclass(frozen=True)
class GridSpec:
    """Parameterizable cube spanning [anchor, anchor + extent]."""

    anchor: Vec3
    extent: Vec3
    spacing_xy: float
    spacing_z: float
    dimensionality: GridDimensionality = GridDimensionality.THREE_D
    annotated: bool = True

    def to_dict(self):
        """Convert grid spec to dictionary.

        Returns:
            dict: Grid spec data
        """
        return {
            'anchor': self.anchor.to_list(),
            'extent': self.extent.to_list(),
            'spacing_xy': self.spacing_xy,
            'spacing_z': self.spacing_z,
            'dimensionality': self.dimensionality.value,
            'annotated': self.annotated,
        }

    @classmethod
    def from_dict(cls, data) -> GridSpec:
        return cls(
            anchor=Vec3.from_array(data['anchor']),
            extent=Vec3.from_array(data['extent']),
            spacing_xy=float(data['spacing_xy']),
            spacing_z=float(data['spacing_z']),
            dimensionality=GridDimensionality(data.get('dimensionality', 'ThreeD')),
            annotated=bool(data.get('annotated', True)),
        )


@dataclass(frozen=True)
class GridVertex:
    index: VertexIndex
    position: Vec3
    label: str = ''


@dataclass(frozen=True)
class LineSegment:
    """Clipped overlay edge in pixels; depth is the mean camera-frame Z."""

    u0: float
    v0: float
    u1: float
    v1: float
    depth: float


@dataclass(frozen=True)
class TextLabel:
    u: float
    v: float
    text: str
    depth: float


@dataclass(frozen=True)
class OverlayPrimitiveSet:
    """Drawable form of the projected grid.

    visible_vertices lists every vertex in front of the camera, whether or
    not its pixel falls inside the image.
    """

    segments: Tuple[LineSegment, ...] = field(default_factory=tuple)
    labels: Tuple[TextLabel, ...] = field(default_factory=tuple)
    visible_vertices: Tuple[VertexIndex, ...] = field(default_factory=tuple)

    @property
    def is_empty(self) -> bool:
        return not self.segments and not self.labels
