"""Command-line commands and their exit codes."""

import json

import pytest

from conftest import EXPERIMENTS_DIR, SCENES_DIR
from src.controllers.cli_controller import (
    EXIT_CONFIG,
    EXIT_CORRUPT_LOG,
    EXIT_SCENE,
    EXIT_UNAVAILABLE,
    cli,
)
from src.logic.vlm_logic import parse_analysis_reply, record_transcript
from src.models.vlm_model import EndpointConfig, Exchange

TIN = str(SCENES_DIR / 'scene1_upright_tin.json')


def write_config(tmp_path, **overrides):
    data = {'scenes': [TIN], 'action_spaces': ['NAP', '3Dx'], 'trials': 1, 'policy': 'greedy'}
    data.update(overrides)
    path = tmp_path / 'experiment.json'
    path.write_text(json.dumps(data), encoding='utf-8')
    return str(path)


@pytest.fixture
def finished_run(tmp_path, runner):
    out = tmp_path / 'out'
    result = runner.invoke(cli, ['run', '--config', write_config(tmp_path), '--out', str(out)])
    assert result.exit_code == 0, result.output
    return out, result


def test_run_writes_everything(finished_run):
    out, result = finished_run
    assert (out / 'metrics.json').exists()
    assert (out / 'report.md').exists()
    assert (out / 'report.csv').exists()
    assert (out / 'episodes' / 'scene1_upright_tin__3Dx__t00.jsonl').exists()
    assert '| Action space |' in result.output
    assert '2 episodes written' in result.output


def test_run_with_a_missing_scene(tmp_path, runner):
    config_path = write_config(tmp_path, scenes=[str(tmp_path / 'nowhere.json')])
    result = runner.invoke(cli, ['run', '--config', config_path, '--out', str(tmp_path / 'out')])
    assert result.exit_code == EXIT_SCENE
    assert not (tmp_path / 'out').exists()


def test_run_with_a_bad_config(tmp_path, runner):
    config_path = write_config(tmp_path, action_spaces=['3Dz'])
    result = runner.invoke(cli, ['run', '--config', config_path, '--out', str(tmp_path / 'out')])
    assert result.exit_code == EXIT_CONFIG


def test_run_with_an_unavailable_endpoint(tmp_path, runner, mock_endpoint, monkeypatch):
    monkeypatch.setenv('OPENAI_API_KEY', 'test-key')
    mock_endpoint.script.push(500, 500, 500)
    config_path = write_config(tmp_path, action_spaces=['3Dx'], analyzer='vlm', policy='vlm',
                               endpoint={'base_url': mock_endpoint.base_url, 'backoff': 0, 'timeout': 10})
    result = runner.invoke(cli, ['run', '--config', config_path, '--out', str(tmp_path / 'out')])
    assert result.exit_code == EXIT_UNAVAILABLE


def test_render_writes_png_and_svg(tmp_path, runner):
    out = tmp_path / 'view.png'
    result = runner.invoke(cli, ['render', '--scene', TIN, '--pose', '-0.1,0.3,0.8,0,0', '--out', str(out)])
    assert result.exit_code == 0, result.output
    assert out.read_bytes()[:4] == b'\x89PNG'
    assert out.with_suffix('.svg').read_text(encoding='utf-8').startswith('<svg')
    assert '48 grid vertices in view' in result.output


def test_render_rejects_bad_input(tmp_path, runner):
    out = str(tmp_path / 'view.png')
    result = runner.invoke(cli, ['render', '--scene', TIN, '--pose', '0.1,0.2', '--out', out])
    assert result.exit_code == EXIT_CONFIG
    result = runner.invoke(cli, ['render', '--scene', str(tmp_path / 'no.json'), '--pose', '0,0,1,0,0',
                                 '--out', out])
    assert result.exit_code == EXIT_SCENE


def test_replay_prints_the_narrative(finished_run, runner):
    out, _ = finished_run
    log = out / 'episodes' / 'scene1_upright_tin__3Dx__t00.jsonl'
    result = runner.invoke(cli, ['replay', str(log)])
    assert result.exit_code == 0, result.output
    assert 'terminated_by=ConclusiveAnswer' in result.output


def test_replay_reports_corruption(finished_run, runner):
    out, _ = finished_run
    log = out / 'episodes' / 'scene1_upright_tin__3Dx__t00.jsonl'
    lines = [json.loads(line) for line in log.read_text(encoding='utf-8').splitlines()]
    lines[1]['segment_length'] = 42.0
    log.write_text(''.join(json.dumps(line) + '\n' for line in lines), encoding='utf-8')
    result = runner.invoke(cli, ['replay', str(log)])
    assert result.exit_code == EXIT_CORRUPT_LOG
    assert 'segment-length' in result.output


def test_report_from_metrics(finished_run, runner):
    out, _ = finished_run
    result = runner.invoke(cli, ['report', '--results', str(out / 'metrics.json'), '--format', 'csv'])
    assert result.exit_code == 0
    assert result.output.splitlines()[0].startswith('scene,action_space')
    missing = runner.invoke(cli, ['report', '--results', str(out / 'absent.json')])
    assert missing.exit_code == EXIT_CONFIG


def test_replay_transcript(tmp_path, runner):
    reply = "ANSWERABLE: yes\nANSWER: a golf ball\nCONFIDENCE: 0.9"
    good = Exchange('analysis', 0, 'hash', (), reply, parse_analysis_reply(reply).to_dict())
    path = record_transcript(tmp_path / 'good.jsonl', EndpointConfig(), 'ep', [good])
    result = runner.invoke(cli, ['replay-transcript', str(path)])
    assert result.exit_code == 0
    assert '1 exchanges replayed, 0 mismatches' in result.output

    stale = Exchange('analysis', 0, 'hash', (), reply, {'answer': None, 'proposal': None, 'error': 'old'})
    path = record_transcript(tmp_path / 'stale.jsonl', EndpointConfig(), 'ep', [stale])
    result = runner.invoke(cli, ['replay-transcript', str(path)])
    assert result.exit_code == EXIT_CORRUPT_LOG


def test_compare(tmp_path, runner):
    result = runner.invoke(cli, ['compare', '--config', str(EXPERIMENTS_DIR / 'comparison.json'),
                                 '--out', str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert '| scene1_upright_tin | 0/5 | 5/5 |' in result.output
    assert '| comparison_strawberry_cup | 0/5 | 5/5 |' in result.output
    assert (tmp_path / 'comparison.md').exists()
