"""
Geometry Logic

Rigid-body transform algebra, quaternion utilities and the pinhole camera
model used by grid anchoring, visibility tests and overlay rendering.

Camera convention: +Z along the optical axis, +X right and +Y down in the
image. A Pose orientation maps camera-frame vectors into the base frame.
"""

from __future__ import annotations

import logging
from typing import Iterable, Union

import numpy as np
from scipy.spatial.transform import Rotation

from src.models.geometry_model import (
    BehindCamera,
    CameraIntrinsics,
    HomogeneousTransform,
    PixelCoord,
    Pose,
    UnitQuaternion,
    Vec3,
)

logger = logging.getLogger(__name__)

MIN_DEPTH = 1e-6
RENORMALIZE_EVERY = 16

# 180 degrees about base x: optical axis along base -z, image +x along base +x
_TOP_DOWN = Rotation.from_quat([1.0, 0.0, 0.0, 0.0])


class GeometryLogic:
    """Pure functions over the immutable geometry types."""

    @staticmethod
    def compose(a: HomogeneousTransform, b: HomogeneousTransform) -> HomogeneousTransform:
        """Compose two transforms; the result applies b first, then a.

        Args:
            a (HomogeneousTransform): Outer transform
            b (HomogeneousTransform): Inner transform

        Returns:
            HomogeneousTransform: a o b
        """
        rotation = a.rotation @ b.rotation
        translation = a.rotation @ b.translation.as_array() + a.translation.as_array()
        return HomogeneousTransform(rotation, Vec3.from_array(translation))

    @staticmethod
    def compose_chain(transforms: Iterable[HomogeneousTransform]) -> HomogeneousTransform:
        """Compose a chain left to right, re-orthonormalizing every 16 steps.

        Args:
            transforms: Transforms [T1, T2, ...]; the result is T1 o T2 o ...

        Returns:
            HomogeneousTransform: The composed transform
        """
        result = HomogeneousTransform.identity()
        for step, transform in enumerate(transforms, start=1):
            result = GeometryLogic.compose(result, transform)
            if step % RENORMALIZE_EVERY == 0:
                rotation = Rotation.from_matrix(result.rotation).as_matrix()
                result = HomogeneousTransform(rotation, result.translation)
        return result

    @staticmethod
    def invert(t: HomogeneousTransform) -> HomogeneousTransform:
        """Invert a rigid transform.

        Args:
            t (HomogeneousTransform): Transform to invert

        Returns:
            HomogeneousTransform: t^-1 with compose(t, t^-1) = identity
        """
        rotation = t.rotation.T
        translation = -rotation @ t.translation.as_array()
        return HomogeneousTransform(rotation, Vec3.from_array(translation))

    @staticmethod
    def transform_point(t: HomogeneousTransform, p: Vec3) -> Vec3:
        return Vec3.from_array(t.rotation @ p.as_array() + t.translation.as_array())

    @staticmethod
    def marker_vertex_to_base(t_cam_to_base: HomogeneousTransform,
                              t_marker_to_cam: HomogeneousTransform,
                              v_marker: Vec3) -> Vec3:
        """Map a vertex from the marker frame into the base frame.

        V_B = T_C^B T_M^C V_M

        Args:
            t_cam_to_base (HomogeneousTransform): Camera pose in the base frame
            t_marker_to_cam (HomogeneousTransform): Detected marker pose in the camera frame
            v_marker (Vec3): Vertex in the marker frame

        Returns:
            Vec3: Vertex in the base frame
        """
        chain = GeometryLogic.compose_chain((t_cam_to_base, t_marker_to_cam))
        return GeometryLogic.transform_point(chain, v_marker)

    @staticmethod
    def pose_to_transform(pose: Pose) -> HomogeneousTransform:
        rotation = pose.orientation.as_rotation().as_matrix()
        return HomogeneousTransform(rotation, pose.position)

    @staticmethod
    def transform_to_pose(t: HomogeneousTransform) -> Pose:
        orientation = UnitQuaternion.from_rotation(Rotation.from_matrix(t.rotation))
        return Pose(t.translation, orientation)

    @staticmethod
    def to_camera_frame(camera_pose: Pose, points) -> np.ndarray:
        """Express base-frame points in the camera frame.

        Args:
            camera_pose (Pose): Camera pose
            points: (N, 3) array of base-frame points

        Returns:
            np.ndarray: (N, 3) camera-frame points
        """
        rotation = camera_pose.orientation.as_rotation().as_matrix()
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        return (pts - camera_pose.position.as_array()) @ rotation

    @staticmethod
    def project(k: CameraIntrinsics, camera_pose: Pose,
                world_point: Vec3) -> Union[PixelCoord, BehindCamera]:
        """Project a base-frame point with the pinhole model.

        The returned pixel may lie outside the image; callers clip.

        Args:
            k (CameraIntrinsics): Camera intrinsics
            camera_pose (Pose): Camera pose in the base frame
            world_point (Vec3): Point in the base frame

        Returns:
            PixelCoord or BehindCamera: BehindCamera when Zc <= 1e-6
        """
        xc, yc, zc = GeometryLogic.to_camera_frame(camera_pose, [world_point.to_list()])[0]
        if zc <= MIN_DEPTH:
            return BehindCamera(float(zc))
        return PixelCoord(k.fx * xc / zc + k.cx, k.fy * yc / zc + k.cy, float(zc))

    @staticmethod
    def project_many(k: CameraIntrinsics, camera_pose: Pose, points):
        """Vectorised projection.

        Args:
            k (CameraIntrinsics): Camera intrinsics
            camera_pose (Pose): Camera pose
            points: (N, 3) base-frame points

        Returns:
            tuple: (uv: (N, 2) array, depth: (N,) array, in_front: (N,) bool array);
            uv rows for points behind the camera are NaN
        """
        cam = GeometryLogic.to_camera_frame(camera_pose, points)
        depth = cam[:, 2]
        in_front = depth > MIN_DEPTH
        uv = np.full((cam.shape[0], 2), np.nan)
        safe = depth[in_front]
        uv[in_front, 0] = k.fx * cam[in_front, 0] / safe + k.cx
        uv[in_front, 1] = k.fy * cam[in_front, 1] / safe + k.cy
        return uv, depth, in_front

    @staticmethod
    def unproject(k: CameraIntrinsics, camera_pose: Pose, u: float, v: float, depth: float) -> Vec3:
        """Back-project a pixel at a camera-frame depth into the base frame."""
        cam = np.array([(u - k.cx) * depth / k.fx, (v - k.cy) * depth / k.fy, depth])
        rotation = camera_pose.orientation.as_rotation().as_matrix()
        return Vec3.from_array(rotation @ cam + camera_pose.position.as_array())

    @staticmethod
    def quat_angle_deg(a: UnitQuaternion, b: UnitQuaternion) -> float:
        """Geodesic angle between two orientations in degrees, in [0, 180].

        Uses |a.b| so that q and -q compare equal.
        """
        dot = abs(float(np.dot(a.as_array(), b.as_array())))
        return float(np.degrees(2.0 * np.arccos(min(1.0, dot))))

    @staticmethod
    def top_down_orientation() -> UnitQuaternion:
        return UnitQuaternion(0.0, 1.0, 0.0, 0.0)

    @staticmethod
    def rotation_about_base(rot_x_deg: float = 0.0, rot_y_deg: float = 0.0) -> UnitQuaternion:
        """Top-down orientation rotated about base x, then about base y.

        Rotations are absolute with respect to the top-down reference.

        Args:
            rot_x_deg (float): Rotation about base x in degrees
            rot_y_deg (float): Rotation about base y in degrees

        Returns:
            UnitQuaternion: The camera orientation
        """
        if rot_x_deg == 0 and rot_y_deg == 0:
            return GeometryLogic.top_down_orientation()
        rot = (Rotation.from_euler('y', rot_y_deg, degrees=True)
               * Rotation.from_euler('x', rot_x_deg, degrees=True)
               * _TOP_DOWN)
        return UnitQuaternion.from_rotation(rot)

    @staticmethod
    def look_at(eye: Vec3, target: Vec3) -> UnitQuaternion:
        """Orientation of a camera at eye looking at target with image +Y pointing down.

        Args:
            eye (Vec3): Camera position
            target (Vec3): Point to look at

        Returns:
            UnitQuaternion: The camera orientation
        """
        forward = target.as_array() - eye.as_array()
        norm = np.linalg.norm(forward)
        if norm < 1e-12:
            raise ValueError("look_at needs distinct eye and target")
        forward = forward / norm
        up = np.array([0.0, 0.0, 1.0])
        if abs(float(np.dot(forward, up))) > 1.0 - 1e-9:
            up = np.array([0.0, 1.0, 0.0])
        right = np.cross(forward, up)
        right /= np.linalg.norm(right)
        down = np.cross(forward, right)
        rotation = np.column_stack([right, down, forward])
        return UnitQuaternion.from_rotation(Rotation.from_matrix(rotation))

    @staticmethod
    def optical_axis(pose: Pose) -> np.ndarray:
        return pose.orientation.as_rotation().as_matrix()[:, 2]

    @staticmethod
    def angle_between_deg(a, b) -> float:
        """Angle between two non-zero vectors in degrees."""
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        cos = float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))
        return float(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))
