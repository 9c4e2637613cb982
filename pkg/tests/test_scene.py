"""Scene loading, visibility and rendering."""

import dataclasses
import json

import numpy as np
import pytest

from conftest import SCENES_DIR
from src.logic.geometry_logic import GeometryLogic
from src.logic.grid_logic import GridLogic
from src.logic.scene_logic import SceneLogic
from src.models.geometry_model import Pose, UnitQuaternion, Vec3
from src.models.scene_model import BoxShape, CylinderShape, ObjectSpec
from src.utils.errors import SceneError


def scene_data(name):
    return json.loads((SCENES_DIR / f"{name}.json").read_text(encoding='utf-8'))


@pytest.mark.parametrize('name', ['scene1_upright_tin', 'scene2_inclined_mug', 'comparison_strawberry_cup'])
def test_bundled_scenes_hide_the_fact_from_home(name):
    ok, scene, error = SceneLogic.load_scene(SCENES_DIR / f"{name}.json")
    assert ok, error
    assert scene.scene_id == name
    home = SceneLogic.observe(scene, scene.home_pose, scene.intrinsics)
    assert not home.hidden_fact_visible
    assert scene.hidden.owner_id in home.visible_object_ids
    goal = SceneLogic.observe(scene, scene.goal_pose, scene.intrinsics)
    assert goal.hidden_fact_visible


def test_inclined_mug_needs_the_pitched_camera(mug_scene):
    level = Pose(mug_scene.goal_pose.position, GeometryLogic.top_down_orientation())
    facts = SceneLogic.observe(mug_scene, level, mug_scene.intrinsics)
    assert 'mug' not in facts.visible_object_ids
    assert not facts.hidden_fact_visible


def test_opening_normal_is_normalized_on_load():
    data = scene_data('scene1_upright_tin')
    data['hidden']['opening_normal'] = [0.0, 0.0, 5.0]
    scene = SceneLogic.scene_from_dict(data)
    assert scene.hidden.opening_normal.to_list() == pytest.approx([0.0, 0.0, 1.0])


def test_missing_scene_file(tmp_path):
    ok, scene, error = SceneLogic.load_scene(tmp_path / 'nope.json')
    assert not ok and scene is None
    assert 'Cannot read' in error


@pytest.mark.parametrize('mutate, message', [
    (lambda d: d['objects'].append(dict(d['objects'][0])), 'unique'),
    (lambda d: d['hidden'].update(owner_id='vase'), 'owner'),
    (lambda d: d.update(truth_answer='tennis ball'), 'contain'),
    (lambda d: d.update(goal_pose={'position': [0.1, 0.5, 0.4]}), 'not visible'),
    (lambda d: d.update(markers=[]), 'marker'),
    (lambda d: d['objects'][0]['shape'].update(type='cone'), 'shape'),
    (lambda d: d['hidden'].update(cone_half_angle=95), 'Invalid scene'),
])
def test_invalid_scenes_raise(mutate, message):
    data = scene_data('scene1_upright_tin')
    mutate(data)
    with pytest.raises(SceneError, match=message):
        SceneLogic.scene_from_dict(data)


def test_occluder_blocks_the_opening():
    data = scene_data('scene1_upright_tin')
    data['objects'].append({
        'id': 'lid',
        'shape': {'type': 'box', 'dims': [0.1, 0.1, 0.005]},
        'pose': {'position': [0.1, 0.5, 0.08]},
    })
    with pytest.raises(SceneError, match='not visible'):
        SceneLogic.scene_from_dict(data)


def test_ray_hits_box_and_cylinder():
    eye = np.eye(3)
    assert SceneLogic.ray_hits_box([0, 0, 1], [0, 0, -1], [0, 0, 0], eye, [0.1, 0.1, 0.1]) == \
        pytest.approx((0.9, 1.1))
    assert SceneLogic.ray_hits_box([0.5, 0, 1], [0, 0, -1], [0, 0, 0], eye, [0.1, 0.1, 0.1]) is None
    assert SceneLogic.ray_hits_cylinder([1, 0, 0], [-1, 0, 0], [0, 0, 0], eye, 0.1, 0.2) == \
        pytest.approx((0.9, 1.1))
    assert SceneLogic.ray_hits_cylinder([0, 0, 1], [0, 0, -1], [0, 0, 0], eye, 0.1, 0.2) == \
        pytest.approx((0.9, 1.1))
    assert SceneLogic.ray_hits_cylinder([1, 0.5, 0], [-1, 0, 0], [0, 0, 0], eye, 0.1, 0.2) is None


def test_segment_blocked_ignores_excluded_owner(tin_scene):
    above = Vec3(0.1, 0.5, 0.2)
    inside = Vec3(0.1, 0.5, 0.03)
    assert not SceneLogic.segment_blocked(tin_scene, above, inside, exclude='tin')
    assert SceneLogic.segment_blocked(tin_scene, above, inside, exclude='cereal_box')


def test_noisy_detection_needs_a_generator(tin_scene):
    with pytest.raises(ValueError):
        SceneLogic.detect_markers(tin_scene, tin_scene.home_pose, tin_scene.intrinsics, noise_std=0.01)


def test_render_is_deterministic(tin_scene):
    k = tin_scene.intrinsics
    pose = tin_scene.home_pose
    overlay = GridLogic.project_grid(tin_scene.grid, k, pose)
    first = SceneLogic.png_bytes(SceneLogic.render(tin_scene, pose, k, overlay))
    second = SceneLogic.png_bytes(SceneLogic.render(tin_scene, pose, k, overlay))
    assert first == second
    image = SceneLogic.render(tin_scene, pose, k, overlay)
    assert image.size == (640, 480)
    assert image.getpixel((0, 0)) != image.getpixel((320, 240)) or overlay.segments


def test_overlay_svg(tin_scene):
    k = tin_scene.intrinsics
    overlay = GridLogic.project_grid(tin_scene.grid, k, tin_scene.home_pose)
    svg = SceneLogic.export_overlay_svg(overlay, k.width, k.height)
    assert svg.startswith('<svg')
    assert svg.count('<line') == len(overlay.segments)
    assert '(0.1; 0.5)' in svg


def test_save_png(tmp_path, tin_scene):
    image = SceneLogic.render(None, tin_scene.home_pose, tin_scene.intrinsics)
    path = SceneLogic.save_png(image, tmp_path / 'out' / 'view.png')
    assert path.read_bytes()[:8] == b'\x89PNG\r\n\x1a\n'


def test_wider_cone_never_hides_the_fact(tin_scene, rng):
    hidden = tin_scene.hidden
    center = hidden.opening_center.as_array()
    for _ in range(300):
        eye = Vec3.from_array(center + rng.uniform([-0.3, -0.3, -0.05], [0.3, 0.3, 0.4]))
        pose = Pose(eye, GeometryLogic.top_down_orientation())
        narrow, wide = sorted(rng.uniform(1.0, 89.0, 2))
        seen = []
        for angle in (narrow, wide):
            scene = dataclasses.replace(tin_scene, hidden=dataclasses.replace(hidden, cone_half_angle=angle))
            seen.append(SceneLogic.hidden_fact_visible(scene, pose, (hidden.owner_id,)))
        assert seen[1] or not seen[0]


def test_nearer_object_is_painted_over_farther_one(intrinsics):
    identity = UnitQuaternion.identity()
    box = ObjectSpec('box', BoxShape(Vec3(0.1, 0.1, 0.1)), Pose(Vec3(0.0, 0.4, 0.25), identity))
    can = ObjectSpec('can', CylinderShape(0.08, 0.1), Pose(Vec3(0.0, 0.4, 0.05), identity))
    camera = Pose(Vec3(0.0, 0.4, 1.0), GeometryLogic.top_down_orientation())
    for objects in ((box, can), (can, box)):
        image = SceneLogic.render(None, camera, intrinsics, objects=objects)
        assert image.getpixel((320, 240)) == SceneLogic.object_color('box')
        # the can's rim still shows around the smaller box
        assert image.getpixel((320, 240 + 24)) == SceneLogic.object_color('can')
