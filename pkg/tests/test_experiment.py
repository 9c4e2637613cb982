"""Experiment sweeps, output files and the fixed-views comparison."""

import dataclasses
import json

import pytest

from conftest import EXPERIMENTS_DIR, SCENES_DIR
from src.logic.experiment_logic import ExperimentLogic
from src.utils.errors import ConfigError, SceneError


@pytest.fixture(scope='module')
def table_outcome():
    ok, cfg, error = ExperimentLogic.load_experiment(EXPERIMENTS_DIR / 'action_space_table.json')
    assert ok, error
    return ExperimentLogic.run_experiment(cfg)


def row(outcome, scene_id, space):
    for cell in outcome.cells:
        if (cell.scene_id, cell.action_space) == (scene_id, space):
            return cell.row
    raise KeyError((scene_id, space))


def test_table_has_every_cell(table_outcome):
    assert len(table_outcome.trials) == 160
    assert len(table_outcome.cells) == 16
    assert [c.action_space for c in table_outcome.cells[:8]] == \
        ['NAP', '2DNA', '2DA', '3DD', '3DC', '3Dx', '3DxN', '3Dxy']
    assert {c.scene_id for c in table_outcome.cells[:8]} == {'scene1_upright_tin'}


@pytest.mark.parametrize('scene_id', ['scene1_upright_tin', 'scene2_inclined_mug'])
def test_nap_never_moves(table_outcome, scene_id):
    nap = row(table_outcome, scene_id, 'NAP')
    assert nap.sr == 0.0
    assert nap.tlp == 0.0
    assert nap.oe is None


@pytest.mark.parametrize('scene_id', ['scene1_upright_tin', 'scene2_inclined_mug'])
def test_rotation_space_succeeds(table_outcome, scene_id):
    active = row(table_outcome, scene_id, '3Dx')
    assert active.sr == 1.0
    assert active.pe == pytest.approx(0.0, abs=1e-9)
    assert active.oe == pytest.approx(0.0, abs=1e-6)
    assert active.osr == 1.0
    assert active.tlps == pytest.approx(active.tlp)


@pytest.mark.parametrize('space', ['2DNA', '2DA', '3DD', '3DC'])
def test_mug_defeats_level_cameras(table_outcome, space):
    assert row(table_outcome, 'scene2_inclined_mug', space).sr == 0.0
    assert row(table_outcome, 'scene1_upright_tin', space).sr == 1.0


def test_outputs_written(tmp_path, table_outcome):
    paths = ExperimentLogic.write_outputs(table_outcome, tmp_path)
    assert sorted(p.name for p in paths) == ['metrics.json', 'report.csv', 'report.md']
    data = json.loads((tmp_path / 'metrics.json').read_text(encoding='utf-8'))
    assert data['experiment']['name'] == 'action_space_table'
    assert len(data['cells']) == 16
    ok, cells, error = ExperimentLogic.read_metrics(tmp_path / 'metrics.json')
    assert ok, error
    assert cells == list(table_outcome.cells)
    report = (tmp_path / 'report.md').read_text(encoding='utf-8')
    assert 'scripted baseline' in report


def small_config(**overrides):
    data = {
        'scenes': ['scene1_upright_tin.json', 'comparison_strawberry_cup.json'],
        'action_spaces': ['NAP', '3Dx'],
        'trials': 2,
        'policy': 'random',
    }
    data.update(overrides)
    return ExperimentLogic.experiment_from_dict(data, SCENES_DIR)


def test_episode_logs_are_written(tmp_path):
    cfg = small_config()
    ExperimentLogic.run_experiment(cfg, tmp_path)
    names = sorted(p.name for p in (tmp_path / 'episodes').iterdir())
    assert len(names) == 8
    assert 'scene1_upright_tin__3Dx__t01.jsonl' in names


def test_workers_do_not_change_results():
    sequential = ExperimentLogic.run_experiment(small_config())
    threaded = ExperimentLogic.run_experiment(small_config(workers=3))
    assert sequential.cells == threaded.cells


def test_missing_scene_fails_before_output(tmp_path):
    cfg = small_config(scenes=['scene1_upright_tin.json', 'nowhere.json'])
    out = tmp_path / 'out'
    with pytest.raises(SceneError):
        ExperimentLogic.run_experiment(cfg, out)
    assert not out.exists()


def test_duplicate_scene_ids():
    cfg = small_config(scenes=['scene1_upright_tin.json', 'scene1_upright_tin.json'])
    with pytest.raises(SceneError, match='Duplicate'):
        ExperimentLogic.load_scenes(cfg)


@pytest.mark.parametrize('overrides, message', [
    ({'action_spaces': ['3Dz']}, 'Unknown action space'),
    ({'policy': 'teleport'}, 'Unknown policy'),
    ({'analyzer': 'vlm'}, 'endpoint'),
    ({'trials': 0}, 'trials'),
    ({'confidence_threshold': 1.5}, 'confidence_threshold'),
    ({'scenes': []}, 'scenes'),
])
def test_invalid_experiments(overrides, message):
    with pytest.raises(ConfigError, match=message):
        small_config(**overrides)


def test_load_experiment_reports_bad_files(tmp_path):
    broken = tmp_path / 'broken.json'
    broken.write_text('{', encoding='utf-8')
    ok, cfg, error = ExperimentLogic.load_experiment(broken)
    assert not ok and cfg is None
    assert 'not valid JSON' in error
    ok, _, error = ExperimentLogic.load_experiment(tmp_path / 'absent.json')
    assert not ok and 'Cannot read' in error


def test_fixed_views_lose_to_active_search(tmp_path):
    ok, cfg, error = ExperimentLogic.load_experiment(EXPERIMENTS_DIR / 'comparison.json')
    assert ok, error
    rows = ExperimentLogic.run_comparison(dataclasses.replace(cfg, trials=2), tmp_path)
    assert [(r.scene_id, r.fixed_successes, r.active_successes, r.trials) for r in rows] == [
        ('scene1_upright_tin', 0, 2, 2),
        ('comparison_strawberry_cup', 0, 2, 2),
    ]
    names = {p.name for p in (tmp_path / 'episodes').iterdir()}
    assert 'comparison_strawberry_cup__fixed-views__t00.jsonl' in names
