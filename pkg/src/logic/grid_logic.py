"""
Grid Logic

Generates the virtual grid, labels its vertices and projects it into image
space as the Enhanced Observation overlay.
"""

from __future__ import annotations

import dataclasses
import logging
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.logic.geometry_logic import GeometryLogic
from src.models.geometry_model import CameraIntrinsics, HomogeneousTransform, Pose, Vec3
from src.models.grid_model import (
    GridDimensionality,
    GridSpec,
    GridVertex,
    LineSegment,
    OverlayPrimitiveSet,
    TextLabel,
    VertexIndex,
)

logger = logging.getLogger(__name__)

MULTIPLE_TOLERANCE = 1e-9
TIE_TOLERANCE = 1e-12

# Cohen-Sutherland outcodes
_INSIDE, _LEFT, _RIGHT, _BOTTOM, _TOP = 0, 1, 2, 4, 8


def _steps(extent: float, spacing: float) -> int:
    return int(round(extent / spacing))


class GridLogic:
    """Business logic for the virtual grid."""

    @staticmethod
    def default_spec(dimensionality=GridDimensionality.THREE_D, annotated=True) -> GridSpec:
        """The 0.6 x 0.6 x 0.3 m cube anchored at (-0.3, 0.1, 0).

        Args:
            dimensionality (GridDimensionality): TwoD or ThreeD
            annotated (bool): Whether vertices carry "(x; y)" labels

        Returns:
            GridSpec: The default grid
        """
        return GridSpec(
            anchor=Vec3(-0.3, 0.1, 0.0),
            extent=Vec3(0.6, 0.6, 0.3),
            spacing_xy=0.2,
            spacing_z=0.1,
            dimensionality=GridDimensionality(dimensionality),
            annotated=annotated,
        )

    @staticmethod
    def validate_spec(spec: GridSpec):
        """Validate a grid spec.

        Args:
            spec (GridSpec): Spec to check

        Returns:
            tuple: (success: bool, error: str|None)
        """
        extent = spec.extent.to_list()
        if any(e <= 0 for e in extent):
            return False, "Grid extent components must be positive"
        if spec.spacing_xy <= 0 or spec.spacing_z <= 0:
            return False, "Grid spacings must be positive"
        pairs = [('x', extent[0], spec.spacing_xy),
                 ('y', extent[1], spec.spacing_xy),
                 ('z', extent[2], spec.spacing_z)]
        for axis, length, spacing in pairs:
            if spacing > length + MULTIPLE_TOLERANCE:
                return False, f"Grid spacing along {axis} exceeds the extent"
            steps = _steps(length, spacing)
            if abs(steps * spacing - length) > MULTIPLE_TOLERANCE:
                return False, f"Grid extent along {axis} ({length}) is not a multiple of {spacing}"
        return True, None

    @staticmethod
    def shape(spec: GridSpec) -> Tuple[int, int, int, int]:
        """Lattice shape as (nx, ny, k_first, k_last), counts of steps along x and y."""
        nx = _steps(spec.extent.x, spec.spacing_xy)
        ny = _steps(spec.extent.y, spec.spacing_xy)
        nz = _steps(spec.extent.z, spec.spacing_z)
        if spec.dimensionality == GridDimensionality.TWO_D:
            return nx, ny, 1, 1
        return nx, ny, 1, nz

    @staticmethod
    def vertex_position(spec: GridSpec, index: VertexIndex) -> Vec3:
        return Vec3(
            spec.anchor.x + index.i * spec.spacing_xy,
            spec.anchor.y + index.j * spec.spacing_xy,
            spec.anchor.z + index.k * spec.spacing_z,
        )

    @staticmethod
    def label_vertex(v: GridVertex, annotated: bool) -> str:
        """Format the "(x; y)" annotation of a vertex in base-frame meters.

        Args:
            v (GridVertex): Vertex to label
            annotated (bool): Whether labels are shown at all

        Returns:
            str: The label, empty when not annotated
        """
        if not annotated:
            return ''
        return f"({_one_decimal(v.position.x)}; {_one_decimal(v.position.y)})"

    @staticmethod
    def generate_vertices(spec: GridSpec) -> List[GridVertex]:
        """Enumerate grid vertices in row-major order (k outer, then j, then i).

        Args:
            spec (GridSpec): Grid spec

        Returns:
            list: GridVertex objects

        Raises:
            ValueError: If the grid spec is invalid
        """
        return list(_vertices(spec))

    @staticmethod
    def vertex_at(spec: GridSpec, index: VertexIndex) -> Optional[GridVertex]:
        nx, ny, k_first, k_last = GridLogic.shape(spec)
        if not (0 <= index.i <= nx and 0 <= index.j <= ny and k_first <= index.k <= k_last):
            return None
        return _vertices(spec)[_flat_index(spec, index)]

    @staticmethod
    def nearest_vertex(spec: GridSpec, p: Vec3) -> GridVertex:
        """Vertex closest to p; ties go to the smallest (k, j, i) index.

        Args:
            spec (GridSpec): Grid spec
            p (Vec3): Query point

        Returns:
            GridVertex: The nearest vertex
        """
        positions = _positions(spec)
        distances = np.linalg.norm(positions - p.as_array(), axis=1)
        best = float(distances.min())
        # Row-major order already sorts by (k, j, i)
        first = int(np.flatnonzero(distances <= best + TIE_TOLERANCE)[0])
        return _vertices(spec)[first]

    @staticmethod
    def contains(spec: GridSpec, p: Vec3, tolerance: float = MULTIPLE_TOLERANCE) -> bool:
        """Cube-bounds predicate: p inside [anchor, anchor + extent]."""
        lo = spec.anchor.as_array() - tolerance
        hi = spec.anchor.as_array() + spec.extent.as_array() + tolerance
        point = p.as_array()
        return bool(np.all(point >= lo) and np.all(point <= hi))

    @staticmethod
    def vertex_from_label(spec: GridSpec, x: float, y: float, z: Optional[float] = None) -> Optional[GridVertex]:
        """Resolve "(x; y)" label coordinates (plus z for 3D grids) to a vertex.

        Args:
            spec (GridSpec): Grid spec
            x, y (float): Label coordinates in meters
            z (float, optional): Height in meters, required for 3D grids

        Returns:
            GridVertex or None: The vertex, None when the label names no vertex
        """
        nx, ny, k_first, k_last = GridLogic.shape(spec)
        i = _snap(x, spec.anchor.x, spec.spacing_xy)
        j = _snap(y, spec.anchor.y, spec.spacing_xy)
        if k_first == k_last:
            k = k_first
            if z is not None and _snap(z, spec.anchor.z, spec.spacing_z) != k:
                return None
        else:
            if z is None:
                return None
            k = _snap(z, spec.anchor.z, spec.spacing_z)
        if i is None or j is None or k is None:
            return None
        return GridLogic.vertex_at(spec, VertexIndex(i, j, k))

    @staticmethod
    def project_grid(spec: GridSpec, k: CameraIntrinsics, camera_pose: Pose) -> OverlayPrimitiveSet:
        """Project the grid into the image as line segments and labels.

        Edges are kept when both endpoints are in front of the camera and
        some part survives clipping to the image rectangle. Labels are kept
        when the vertex pixel lies inside the image.

        Args:
            spec (GridSpec): Grid spec
            k (CameraIntrinsics): Camera intrinsics
            camera_pose (Pose): Camera pose

        Returns:
            OverlayPrimitiveSet: The overlay, possibly empty
        """
        vertices = _vertices(spec)
        uv, depth, in_front = GeometryLogic.project_many(k, camera_pose, _positions(spec))
        segments = []
        for a, b in _edges(spec):
            if not (in_front[a] and in_front[b]):
                continue
            clipped = _clip_segment(uv[a, 0], uv[a, 1], uv[b, 0], uv[b, 1], k.width - 1, k.height - 1)
            if clipped is None:
                continue
            segments.append(LineSegment(*clipped, depth=float((depth[a] + depth[b]) / 2.0)))
        labels = []
        visible = []
        for n, vertex in enumerate(vertices):
            if not in_front[n]:
                continue
            visible.append(vertex.index)
            if spec.annotated and k.contains(uv[n, 0], uv[n, 1]):
                labels.append(TextLabel(float(uv[n, 0]), float(uv[n, 1]), vertex.label, float(depth[n])))
        return OverlayPrimitiveSet(tuple(segments), tuple(labels), tuple(visible))

    @staticmethod
    def grid_from_markers(spec: GridSpec, marker_poses: Dict[int, Pose],
                          detections: Sequence[Tuple[int, HomogeneousTransform]],
                          camera_pose: Pose) -> GridSpec:
        """Re-anchor the grid through the lowest-id detected reference marker.

        The anchor is expressed in the reference marker frame, then mapped back
        to the base frame with V_B = T_C^B T_M^C V_M using the detected
        marker-to-camera transform.

        Args:
            spec (GridSpec): Calibrated grid spec
            marker_poses (dict): Marker id -> configured marker Pose
            detections (list): (marker id, marker-to-camera transform) pairs
            camera_pose (Pose): Camera pose

        Returns:
            GridSpec: The marker-anchored spec, or spec itself when no known marker was detected
        """
        known = sorted((mid, t) for mid, t in detections if mid in marker_poses)
        if not known:
            logger.debug("No reference marker detected, keeping the calibrated grid anchor")
            return spec
        marker_id, t_marker_to_cam = known[0]
        t_marker_to_base = GeometryLogic.pose_to_transform(marker_poses[marker_id])
        anchor_in_marker = GeometryLogic.transform_point(GeometryLogic.invert(t_marker_to_base), spec.anchor)
        anchor = GeometryLogic.marker_vertex_to_base(
            GeometryLogic.pose_to_transform(camera_pose), t_marker_to_cam, anchor_in_marker)
        return dataclasses.replace(spec, anchor=anchor)


def _one_decimal(value: float) -> str:
    text = f"{value:.1f}"
    return '0.0' if text == '-0.0' else text


def _snap(value: float, origin: float, spacing: float) -> Optional[int]:
    steps = (value - origin) / spacing
    index = int(round(steps))
    if abs(steps - index) > 0.25:
        return None
    return index


def _flat_index(spec: GridSpec, index: VertexIndex) -> int:
    nx, ny, k_first, _ = GridLogic.shape(spec)
    return ((index.k - k_first) * (ny + 1) + index.j) * (nx + 1) + index.i


@lru_cache(maxsize=64)
def _vertices(spec: GridSpec) -> Tuple[GridVertex, ...]:
    ok, error = GridLogic.validate_spec(spec)
    if not ok:
        raise ValueError(error)
    nx, ny, k_first, k_last = GridLogic.shape(spec)
    out = []
    for k in range(k_first, k_last + 1):
        for j in range(ny + 1):
            for i in range(nx + 1):
                index = VertexIndex(i, j, k)
                vertex = GridVertex(index, GridLogic.vertex_position(spec, index))
                out.append(dataclasses.replace(vertex, label=GridLogic.label_vertex(vertex, spec.annotated)))
    return tuple(out)


@lru_cache(maxsize=64)
def _positions(spec: GridSpec) -> np.ndarray:
    positions = np.array([v.position.to_list() for v in _vertices(spec)], dtype=np.float64)
    positions.setflags(write=False)
    return positions


@lru_cache(maxsize=64)
def _edges(spec: GridSpec) -> Tuple[Tuple[int, int], ...]:
    nx, ny, k_first, k_last = GridLogic.shape(spec)
    edges = []
    for k in range(k_first, k_last + 1):
        for j in range(ny + 1):
            for i in range(nx + 1):
                here = _flat_index(spec, VertexIndex(i, j, k))
                if i < nx:
                    edges.append((here, _flat_index(spec, VertexIndex(i + 1, j, k))))
                if j < ny:
                    edges.append((here, _flat_index(spec, VertexIndex(i, j + 1, k))))
                if k < k_last:
                    edges.append((here, _flat_index(spec, VertexIndex(i, j, k + 1))))
    return tuple(edges)


def _outcode(u, v, xmax, ymax):
    code = _INSIDE
    if u < 0:
        code |= _LEFT
    elif u > xmax:
        code |= _RIGHT
    if v < 0:
        code |= _BOTTOM
    elif v > ymax:
        code |= _TOP
    return code


def _clip_segment(u0, v0, u1, v1, xmax, ymax):
    """Cohen-Sutherland clipping to [0, xmax] x [0, ymax]; None when fully outside."""
    u0, v0, u1, v1 = float(u0), float(v0), float(u1), float(v1)
    code0 = _outcode(u0, v0, xmax, ymax)
    code1 = _outcode(u1, v1, xmax, ymax)
    while True:
        if not (code0 | code1):
            return u0, v0, u1, v1
        if code0 & code1:
            return None
        code = code0 or code1
        if code & _TOP:
            u = u0 + (u1 - u0) * (ymax - v0) / (v1 - v0)
            v = ymax
        elif code & _BOTTOM:
            u = u0 + (u1 - u0) * (0.0 - v0) / (v1 - v0)
            v = 0.0
        elif code & _RIGHT:
            v = v0 + (v1 - v0) * (xmax - u0) / (u1 - u0)
            u = xmax
        else:
            v = v0 + (v1 - v0) * (0.0 - u0) / (u1 - u0)
            u = 0.0
        if code == code0:
            u0, v0 = u, v
            code0 = _outcode(u0, v0, xmax, ymax)
        else:
            u1, v1 = u, v
            code1 = _outcode(u1, v1, xmax, ymax)
