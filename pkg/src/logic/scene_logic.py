"""
Scene Logic

Deterministic tabletop world model: scene loading and validation, the
ground-truth visibility oracle, simulated marker detection and a flat-shaded
renderer for the images handed to the vision-language model.
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
import math
from pathlib import Path
from typing import List, Optional, Tuple
from xml.sax.saxutils import escape

import numpy as np
from PIL import Image, ImageDraw
from scipy.spatial import ConvexHull
from scipy.spatial.transform import Rotation

try:
    from scipy.spatial import QhullError
except ImportError:  # scipy < 1.8
    from scipy.spatial.qhull import QhullError

import config
from src.logic.geometry_logic import GeometryLogic
from src.logic.grid_logic import GridLogic
from src.models.geometry_model import CameraIntrinsics, HomogeneousTransform, PixelCoord, Pose, UnitQuaternion, Vec3
from src.models.grid_model import GridSpec, OverlayPrimitiveSet
from src.models.scene_model import (
    BoxShape,
    CylinderShape,
    HiddenAttribute,
    Marker,
    ObjectSpec,
    ObservationFacts,
    SceneSpec,
    TableBounds,
)
from src.utils.errors import SceneError
from src.utils.helpers import normalize_text

logger = logging.getLogger(__name__)

RAY_EPSILON = 1e-9
NEAR_PLANE = 1e-3
CYLINDER_SAMPLES = 32

BACKGROUND_COLOR = (235, 235, 235)
TABLE_COLOR = (196, 170, 130)
GRID_COLOR = (0, 150, 255)
LABEL_COLOR = (220, 30, 30)


class SceneLogic:
    """Business logic for scenes, visibility and rendering."""

    # ------------------------------------------------------------------ loading

    @staticmethod
    def default_intrinsics() -> CameraIntrinsics:
        return CameraIntrinsics(config.FX, config.FY, config.CX, config.CY,
                                config.IMAGE_WIDTH, config.IMAGE_HEIGHT)

    @staticmethod
    def default_table_bounds() -> TableBounds:
        return TableBounds(-0.4, 0.4, -0.05, 0.85)

    @staticmethod
    def default_home_pose() -> Pose:
        return Pose(Vec3(*config.HOME_POSITION), GeometryLogic.top_down_orientation())

    @staticmethod
    def default_markers() -> Tuple[Marker, ...]:
        """3 x 3 marker layout on the table plane, faces pointing up."""
        markers = []
        for j, y in enumerate((0.0, 0.4, 0.8)):
            for i, x in enumerate((-0.35, 0.0, 0.35)):
                markers.append(Marker(j * 3 + i, Pose(Vec3(x, y, 0.0), UnitQuaternion.identity())))
        return tuple(markers)

    @staticmethod
    def load_scene(path):
        """Load and validate a scene configuration file.

        Args:
            path (str | Path): JSON scene file

        Returns:
            tuple: (success: bool, scene: SceneSpec | None, error: str | None)
        """
        try:
            with open(path, 'r', encoding='utf-8') as handle:
                data = json.load(handle)
        except OSError as exc:
            return False, None, f"Cannot read scene file {path}: {exc}"
        except json.JSONDecodeError as exc:
            return False, None, f"Scene file {path} is not valid JSON: {exc}"

        try:
            scene = SceneLogic.scene_from_dict(data, default_id=Path(path).stem)
        except SceneError as exc:
            return False, None, f"Scene file {path}: {exc}"

        logger.debug("Loaded scene %s from %s", scene.scene_id, path)
        return True, scene, None

    @staticmethod
    def scene_from_dict(data, default_id: str = 'scene') -> SceneSpec:
        """Build a SceneSpec from its JSON form and validate it.

        Args:
            data (dict): Parsed scene document
            default_id (str): Scene id used when the document has none

        Returns:
            SceneSpec: The validated scene

        Raises:
            SceneError: On any schema or validation failure
        """
        if not isinstance(data, dict):
            raise SceneError("Scene document must be a JSON object")
        try:
            scene = _build_scene(data, default_id)
        except SceneError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise SceneError(f"Invalid scene definition: {exc!r}") from exc

        SceneLogic.validate_scene(scene)
        return scene

    @staticmethod
    def validate_scene(scene: SceneSpec) -> None:
        """Check cross-field scene invariants.

        Raises:
            SceneError: If any invariant fails
        """
        ids = [o.id for o in scene.objects]
        if len(set(ids)) != len(ids):
            raise SceneError("Object ids must be unique")
        if scene.object_by_id(scene.hidden.owner_id) is None:
            raise SceneError(f"Hidden attribute owner '{scene.hidden.owner_id}' is not a scene object")
        if not scene.markers:
            raise SceneError("Scene needs at least one marker")
        marker_ids = [m.id for m in scene.markers]
        if len(set(marker_ids)) != len(marker_ids):
            raise SceneError("Marker ids must be unique")
        ok, error = GridLogic.validate_spec(scene.grid)
        if not ok:
            raise SceneError(f"Invalid grid: {error}")
        if not scene.query.strip() or not scene.truth_answer.strip():
            raise SceneError("Scene needs a query and a truth answer")
        if normalize_text(scene.truth_answer) not in normalize_text(scene.hidden.fact):
            raise SceneError("The hidden fact must contain the truth answer")

        facts = SceneLogic.observe(scene, scene.goal_pose, scene.intrinsics)
        if not facts.hidden_fact_visible:
            raise SceneError("Hidden fact is not visible from goal_pose")

    # --------------------------------------------------------------- ray tests

    @staticmethod
    def ray_hits_box(origin, direction, center, rotation, half_dims) -> Optional[Tuple[float, float]]:
        """Slab test of the line origin + t * direction against an oriented box.

        Args:
            origin, direction: Line origin and direction, base frame
            center: Box center
            rotation: 3x3 box-to-base rotation
            half_dims: Half extents along the box axes

        Returns:
            tuple | None: (t_enter, t_exit) of the overlap interval, or None
        """
        rot = np.asarray(rotation, dtype=np.float64)
        o = rot.T @ (np.asarray(origin, dtype=np.float64) - np.asarray(center, dtype=np.float64))
        d = rot.T @ np.asarray(direction, dtype=np.float64)
        h = np.asarray(half_dims, dtype=np.float64)
        return _slab_intersection(o, d, h, axes=(0, 1, 2))

    @staticmethod
    def ray_hits_cylinder(origin, direction, center, rotation, radius, height) -> Optional[Tuple[float, float]]:
        """Intersect the line origin + t * direction with a closed cylinder.

        The cylinder axis is the local z axis of rotation, centered at center.

        Returns:
            tuple | None: (t_enter, t_exit) of the overlap interval, or None
        """
        rot = np.asarray(rotation, dtype=np.float64)
        o = rot.T @ (np.asarray(origin, dtype=np.float64) - np.asarray(center, dtype=np.float64))
        d = rot.T @ np.asarray(direction, dtype=np.float64)

        a = d[0] ** 2 + d[1] ** 2
        b = 2.0 * (o[0] * d[0] + o[1] * d[1])
        c = o[0] ** 2 + o[1] ** 2 - radius ** 2
        if a < 1e-18:
            if c > 0:
                return None
            t0, t1 = -math.inf, math.inf
        else:
            disc = b * b - 4.0 * a * c
            if disc < 0:
                return None
            root = math.sqrt(disc)
            t0, t1 = (-b - root) / (2.0 * a), (-b + root) / (2.0 * a)

        caps = _slab_intersection(o, d, np.array([0.0, 0.0, height / 2.0]), axes=(2,))
        if caps is None:
            return None
        lo, hi = max(t0, caps[0]), min(t1, caps[1])
        return (lo, hi) if lo <= hi else None

    @staticmethod
    def object_interval(obj: ObjectSpec, origin, direction) -> Optional[Tuple[float, float]]:
        rotation = obj.pose.orientation.as_rotation().as_matrix()
        center = obj.pose.position.as_array()
        if isinstance(obj.shape, BoxShape):
            return SceneLogic.ray_hits_box(origin, direction, center, rotation, obj.shape.dims.as_array() / 2.0)
        return SceneLogic.ray_hits_cylinder(origin, direction, center, rotation,
                                            obj.shape.radius, obj.shape.height)

    @staticmethod
    def segment_blocked(scene: SceneSpec, start: Vec3, end: Vec3, exclude: str) -> bool:
        """True when any object other than exclude intersects the open segment start-end."""
        origin = start.as_array()
        direction = end.as_array() - origin
        for obj in scene.objects:
            if obj.id == exclude:
                continue
            interval = SceneLogic.object_interval(obj, origin, direction)
            if interval is not None and interval[0] < 1.0 - RAY_EPSILON and interval[1] > RAY_EPSILON:
                return True
        return False

    # ------------------------------------------------------------- observation

    @staticmethod
    def object_visible(scene: SceneSpec, obj: ObjectSpec, camera_pose: Pose, k: CameraIntrinsics) -> bool:
        pixel = GeometryLogic.project(k, camera_pose, obj.pose.position)
        if not isinstance(pixel, PixelCoord) or not k.contains(pixel.u, pixel.v):
            return False
        return not SceneLogic.segment_blocked(scene, camera_pose.position, obj.pose.position, exclude=obj.id)

    @staticmethod
    def hidden_fact_visible(scene: SceneSpec, camera_pose: Pose, visible_ids) -> bool:
        """Cone, distance band and occlusion test for the hidden attribute.

        Args:
            scene (SceneSpec): The scene
            camera_pose (Pose): Camera pose
            visible_ids: Ids of objects currently visible

        Returns:
            bool: Whether the hidden fact can be observed
        """
        hidden = scene.hidden
        if hidden.owner_id not in visible_ids:
            return False
        offset = camera_pose.position.as_array() - hidden.opening_center.as_array()
        distance = float(np.linalg.norm(offset))
        if distance < 1e-12:
            return False
        if GeometryLogic.angle_between_deg(hidden.opening_normal.as_array(), offset) > hidden.cone_half_angle:
            return False
        if not hidden.min_distance <= distance <= hidden.max_distance:
            return False
        return not SceneLogic.segment_blocked(scene, camera_pose.position, hidden.opening_center,
                                              exclude=hidden.owner_id)

    @staticmethod
    def observe(scene: SceneSpec, camera_pose: Pose, k: CameraIntrinsics,
                rng: Optional[np.random.Generator] = None, noise_std: float = 0.0) -> ObservationFacts:
        """Ground-truth observation of the scene from a camera pose.

        Args:
            scene (SceneSpec): The scene
            camera_pose (Pose): Camera pose
            k (CameraIntrinsics): Camera intrinsics
            rng (Generator): Episode generator, needed when noise_std > 0
            noise_std (float): Marker translation noise in meters

        Returns:
            ObservationFacts: What the camera can see
        """
        visible = [o for o in scene.objects if SceneLogic.object_visible(scene, o, camera_pose, k)]
        visible_ids = tuple(o.id for o in visible)
        surface_facts = tuple((o.id, fact) for o in visible for fact in o.surface_attributes)
        return ObservationFacts(
            camera_pose=camera_pose,
            visible_object_ids=visible_ids,
            visible_surface_facts=surface_facts,
            hidden_fact_visible=SceneLogic.hidden_fact_visible(scene, camera_pose, visible_ids),
            detected_markers=tuple(SceneLogic.detect_markers(scene, camera_pose, k, noise_std, rng)),
        )

    @staticmethod
    def detect_markers(scene: SceneSpec, camera_pose: Pose, k: CameraIntrinsics,
                       noise_std: float = 0.0,
                       rng: Optional[np.random.Generator] = None) -> List[Tuple[int, HomogeneousTransform]]:
        """Simulated fiducial detection.

        A marker is detected when its center projects inside the image and its
        face points toward the camera.

        Args:
            scene (SceneSpec): The scene
            camera_pose (Pose): Camera pose
            k (CameraIntrinsics): Camera intrinsics
            noise_std (float): Std of the Gaussian translation noise, meters
            rng (Generator): Seeded generator, required when noise_std > 0

        Returns:
            list: (marker id, marker-to-camera transform) pairs in marker order
        """
        if noise_std < 0:
            raise ValueError("noise_std must be non-negative")
        if noise_std > 0 and rng is None:
            raise ValueError("A seeded generator is required for noisy detection")

        t_base_to_cam = GeometryLogic.invert(GeometryLogic.pose_to_transform(camera_pose))
        detections = []
        for marker in scene.markers:
            pixel = GeometryLogic.project(k, camera_pose, marker.pose.position)
            if not isinstance(pixel, PixelCoord) or not k.contains(pixel.u, pixel.v):
                continue
            normal = marker.pose.orientation.as_rotation().as_matrix()[:, 2]
            view = marker.pose.position.as_array() - camera_pose.position.as_array()
            if float(np.dot(normal, view)) >= 0:
                continue
            t_marker_to_cam = GeometryLogic.compose(t_base_to_cam, GeometryLogic.pose_to_transform(marker.pose))
            if noise_std > 0:
                noisy = t_marker_to_cam.translation.as_array() + rng.normal(0.0, noise_std, 3)
                t_marker_to_cam = HomogeneousTransform(t_marker_to_cam.rotation, Vec3.from_array(noisy))
            detections.append((marker.id, t_marker_to_cam))

        if not detections:
            logger.warning("No markers detected from camera at %s", camera_pose.position.to_list())
        return detections

    # --------------------------------------------------------------- rendering

    @staticmethod
    def object_color(object_id: str):
        digest = hashlib.sha256(object_id.encode('utf-8')).digest()
        return tuple(40 + b % 160 for b in digest[:3])

    @staticmethod
    def render(scene: Optional[SceneSpec], camera_pose: Pose, k: CameraIntrinsics,
               overlay: Optional[OverlayPrimitiveSet] = None,
               objects: Optional[Tuple[ObjectSpec, ...]] = None) -> Image.Image:
        """Rasterize the scene with the painter's algorithm and draw the overlay on top.

        Args:
            scene (SceneSpec | None): Scene to draw; None draws background and overlay only
            camera_pose (Pose): Camera pose
            k (CameraIntrinsics): Camera intrinsics
            overlay (OverlayPrimitiveSet): Projected grid, drawn last
            objects (tuple): Objects to draw instead of scene.objects

        Returns:
            Image.Image: RGB image of size k.width x k.height
        """
        image = Image.new('RGB', (k.width, k.height), BACKGROUND_COLOR)
        draw = ImageDraw.Draw(image)

        if scene is not None:
            table = _clip_near(GeometryLogic.to_camera_frame(
                camera_pose, [c.to_list() for c in scene.table_bounds.corners()]))
            if len(table) >= 3:
                draw.polygon(_to_pixels(k, table), fill=TABLE_COLOR)
            objects = scene.objects if objects is None else objects

        polygons = []
        for obj in objects or ():
            depth = GeometryLogic.to_camera_frame(camera_pose, [obj.pose.position.to_list()])[0, 2]
            if depth <= NEAR_PLANE:
                continue
            outline = _silhouette(k, camera_pose, obj)
            if outline:
                polygons.append((depth, obj.id, outline))

        # far to near; ties broken by id for stable output
        for _, object_id, outline in sorted(polygons, key=lambda p: (-p[0], p[1])):
            color = SceneLogic.object_color(object_id)
            draw.polygon(outline, fill=color, outline=tuple(c // 2 for c in color))

        if overlay is not None:
            SceneLogic.draw_overlay(draw, overlay)
        return image

    @staticmethod
    def draw_overlay(draw: ImageDraw.ImageDraw, overlay: OverlayPrimitiveSet) -> None:
        for seg in sorted(overlay.segments, key=lambda s: -s.depth):
            draw.line([(seg.u0, seg.v0), (seg.u1, seg.v1)], fill=GRID_COLOR, width=1)
        for label in sorted(overlay.labels, key=lambda lb: -lb.depth):
            draw.ellipse([label.u - 2, label.v - 2, label.u + 2, label.v + 2], fill=LABEL_COLOR)
            draw.text((label.u + 3, label.v + 2), label.text, fill=LABEL_COLOR)

    @staticmethod
    def export_overlay_svg(overlay: OverlayPrimitiveSet, width: int, height: int) -> str:
        """Serialize the overlay alone as an SVG document."""
        lines = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">'
        ]
        stroke = '#%02x%02x%02x' % GRID_COLOR
        fill = '#%02x%02x%02x' % LABEL_COLOR
        for seg in sorted(overlay.segments, key=lambda s: -s.depth):
            lines.append(f'  <line x1="{seg.u0:.2f}" y1="{seg.v0:.2f}" x2="{seg.u1:.2f}" '
                         f'y2="{seg.v1:.2f}" stroke="{stroke}" stroke-width="1"/>')
        for label in sorted(overlay.labels, key=lambda lb: -lb.depth):
            lines.append(f'  <text x="{label.u + 3:.2f}" y="{label.v + 12:.2f}" fill="{fill}" '
                         f'font-size="10">{escape(label.text)}</text>')
        lines.append('</svg>')
        return '\n'.join(lines) + '\n'

    @staticmethod
    def png_bytes(image: Image.Image) -> bytes:
        buffer = io.BytesIO()
        image.save(buffer, format='PNG')
        return buffer.getvalue()

    @staticmethod
    def save_png(image: Image.Image, path) -> Path:
        """Write an image as PNG, creating parent folders.

        Returns:
            Path: The written file
        """
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        image.save(target, format='PNG')
        logger.info("Wrote image %s", target)
        return target


# ---------------------------------------------------------------------- helpers

def _slab_intersection(o, d, h, axes):
    t0, t1 = -math.inf, math.inf
    for axis in axes:
        if abs(d[axis]) < 1e-12:
            if abs(o[axis]) > h[axis]:
                return None
            continue
        ta = (-h[axis] - o[axis]) / d[axis]
        tb = (h[axis] - o[axis]) / d[axis]
        t0 = max(t0, min(ta, tb))
        t1 = min(t1, max(ta, tb))
        if t0 > t1:
            return None
    return t0, t1


def _clip_near(points: np.ndarray) -> np.ndarray:
    """Clip a camera-frame polygon against the near plane z = NEAR_PLANE."""
    clipped = []
    count = len(points)
    for n in range(count):
        cur, nxt = points[n], points[(n + 1) % count]
        cur_in, nxt_in = cur[2] >= NEAR_PLANE, nxt[2] >= NEAR_PLANE
        if cur_in:
            clipped.append(cur)
        if cur_in != nxt_in:
            t = (NEAR_PLANE - cur[2]) / (nxt[2] - cur[2])
            clipped.append(cur + t * (nxt - cur))
    return np.array(clipped).reshape(-1, 3)


def _to_pixels(k: CameraIntrinsics, cam_points: np.ndarray):
    u = k.fx * cam_points[:, 0] / cam_points[:, 2] + k.cx
    v = k.fy * cam_points[:, 1] / cam_points[:, 2] + k.cy
    limit = 1e5
    return [(float(np.clip(a, -limit, limit)), float(np.clip(b, -limit, limit))) for a, b in zip(u, v)]


def _surface_points(obj: ObjectSpec) -> np.ndarray:
    rotation = obj.pose.orientation.as_rotation().as_matrix()
    if isinstance(obj.shape, BoxShape):
        half = obj.shape.dims.as_array() / 2.0
        signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=np.float64)
        local = signs * half
    else:
        angles = np.linspace(0.0, 2.0 * np.pi, CYLINDER_SAMPLES, endpoint=False)
        ring = np.column_stack([obj.shape.radius * np.cos(angles), obj.shape.radius * np.sin(angles)])
        half_h = obj.shape.height / 2.0
        local = np.vstack([
            np.column_stack([ring, np.full(CYLINDER_SAMPLES, -half_h)]),
            np.column_stack([ring, np.full(CYLINDER_SAMPLES, half_h)]),
        ])
    return local @ rotation.T + obj.pose.position.as_array()


def _silhouette(k: CameraIntrinsics, camera_pose: Pose, obj: ObjectSpec):
    cam = GeometryLogic.to_camera_frame(camera_pose, _surface_points(obj))
    cam = cam[cam[:, 2] > NEAR_PLANE]
    if len(cam) < 3:
        return None
    pixels = np.array(_to_pixels(k, cam))
    try:
        hull = ConvexHull(pixels)
    except (QhullError, ValueError):
        return None
    return [tuple(pixels[n]) for n in hull.vertices]


def _pose_from_dict(data, camera: bool) -> Pose:
    """Parse a pose given as a quaternion, as axis rotations or (cameras) as a look-at target.

    Camera rotations are relative to the top-down orientation; object rotations
    are relative to the upright frame.
    """
    position = Vec3.from_array(data['position'])
    if 'orientation' in data:
        return Pose(position, UnitQuaternion.normalized(*data['orientation']))
    if camera and 'look_at' in data:
        return Pose(position, GeometryLogic.look_at(position, Vec3.from_array(data['look_at'])))
    rot_x = float(data.get('rot_x_deg', 0.0))
    rot_y = float(data.get('rot_y_deg', 0.0))
    if camera:
        return Pose(position, GeometryLogic.rotation_about_base(rot_x, rot_y))
    if rot_x == 0 and rot_y == 0:
        return Pose(position, UnitQuaternion.identity())
    rotation = Rotation.from_euler('y', rot_y, degrees=True) * Rotation.from_euler('x', rot_x, degrees=True)
    return Pose(position, UnitQuaternion.from_rotation(rotation))


def _shape_from_dict(data):
    kind = data.get('type')
    if kind == 'box':
        return BoxShape(Vec3.from_array(data['dims']))
    if kind == 'cylinder':
        return CylinderShape(float(data['radius']), float(data['height']))
    raise SceneError(f"Unknown shape type '{kind}'")


def _build_scene(data, default_id: str) -> SceneSpec:
    objects = tuple(
        ObjectSpec(
            id=str(item['id']),
            shape=_shape_from_dict(item['shape']),
            pose=_pose_from_dict(item['pose'], camera=False),
            surface_attributes=tuple(str(f) for f in item.get('surface_attributes', [])),
        )
        for item in data['objects']
    )

    hidden_data = data['hidden']
    if isinstance(hidden_data, list):
        if len(hidden_data) != 1:
            raise SceneError("Scene must define exactly one hidden attribute")
        hidden_data = hidden_data[0]
    normal = np.asarray(hidden_data['opening_normal'], dtype=np.float64)
    norm = float(np.linalg.norm(normal))
    if norm < 1e-12:
        raise SceneError("Opening normal must be non-zero")
    hidden = HiddenAttribute(
        owner_id=str(hidden_data['owner_id']),
        fact=str(hidden_data['fact']),
        opening_center=Vec3.from_array(hidden_data['opening_center']),
        opening_normal=Vec3.from_array(normal / norm),
        cone_half_angle=float(hidden_data['cone_half_angle']),
        min_distance=float(hidden_data['min_distance']),
        max_distance=float(hidden_data['max_distance']),
    )

    if 'markers' in data:
        markers = tuple(Marker(int(m['id']), _pose_from_dict(m, camera=False)) for m in data['markers'])
    else:
        markers = SceneLogic.default_markers()

    grid = GridSpec.from_dict(data['grid']) if 'grid' in data else GridLogic.default_spec()
    bounds = TableBounds(**{key: float(v) for key, v in data['table_bounds'].items()}) \
        if 'table_bounds' in data else SceneLogic.default_table_bounds()
    intrinsics = CameraIntrinsics.from_dict(data['camera']) if 'camera' in data \
        else SceneLogic.default_intrinsics()
    home = _pose_from_dict(data['home_pose'], camera=True) if 'home_pose' in data \
        else SceneLogic.default_home_pose()

    return SceneSpec(
        scene_id=str(data.get('scene_id', default_id)),
        table_bounds=bounds,
        objects=objects,
        hidden=hidden,
        markers=markers,
        grid=grid,
        home_pose=home,
        goal_pose=_pose_from_dict(data['goal_pose'], camera=True),
        query=str(data['query']),
        truth_answer=str(data['truth_answer']),
        intrinsics=intrinsics,
        description=str(data.get('description', '')),
    )
