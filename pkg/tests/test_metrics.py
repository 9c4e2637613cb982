"""Adjudication, metric aggregation and report emission."""

import math

import numpy as np
import pytest

from src.logic.metrics_logic import ABSENT, CSV_HEADER, MetricsLogic
from src.models.agent_model import Answer
from src.models.episode_model import EpisodeResult, TerminationReason
from src.models.geometry_model import Pose, UnitQuaternion, Vec3
from src.models.metrics_model import CellMetrics, ComparisonRow, MetricsRow, TrialOutcome

GOAL = Pose(Vec3(0.1, 0.5, 0.1), UnitQuaternion(0.0, 1.0, 0.0, 0.0))


def episode(trajectory, answer=None, space='3Dx', orientation=None,
            terminated=TerminationReason.ITERATION_CAP):
    answer = answer or Answer.inconclusive()
    final = Pose(trajectory[-1], orientation or GOAL.orientation)
    return EpisodeResult('scene', space, (), terminated, answer, final, tuple(trajectory))


def random_trial(rng):
    points = [Vec3.from_array(rng.uniform(-0.5, 0.8, 3)) for _ in range(int(rng.integers(1, 6)))]
    conclusive = bool(rng.integers(2))
    answer = Answer(True, 'a golf ball', 1.0) if conclusive else Answer.inconclusive()
    terminated = TerminationReason.CONCLUSIVE_ANSWER if conclusive else TerminationReason.ITERATION_CAP
    space = ['NAP', '3DC', '3Dx', '3Dxy'][int(rng.integers(4))]
    result = episode(points, answer, space, UnitQuaternion.normalized(*rng.normal(size=4)), terminated)
    return TrialOutcome(result, conclusive, GOAL)


def brute_force(trials, margin):
    def dist(a, b):
        return math.sqrt(sum((p - q) ** 2 for p, q in zip(a.to_list(), b.to_list())))

    def length(t):
        path = t.episode.trajectory
        return sum(dist(path[n], path[n + 1]) for n in range(len(path) - 1))

    def angle(a, b):
        dot = abs(a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z)
        return math.degrees(2 * math.acos(min(1.0, dot)))

    n = len(trials)
    wins = [t for t in trials if t.correct]
    rotating = [t for t in trials if t.episode.action_space in ('3Dx', '3DxN', '3Dxy')]
    return {
        'sr': len(wins) / n,
        'tlp': sum(length(t) for t in trials) / n,
        'tlps': sum(length(t) for t in wins) / len(wins) if wins else 0.0,
        'pe': sum(dist(t.episode.final_pose.position, t.goal_pose.position) for t in trials) / n,
        'oe': (sum(angle(t.episode.final_pose.orientation, t.goal_pose.orientation) for t in rotating)
               / len(rotating)) if rotating else None,
        'osr': sum(min(dist(p, t.goal_pose.position) for p in t.episode.trajectory) <= margin
                   for t in trials) / n,
    }


def test_metrics_match_brute_force():
    rng = np.random.default_rng(5)
    for _ in range(50):
        trials = [random_trial(rng) for _ in range(int(rng.integers(1, 12)))]
        row = MetricsLogic.compute_metrics(trials, 0.1)
        expected = brute_force(trials, 0.1)
        assert row.trials == len(trials)
        for key in ('sr', 'tlp', 'tlps', 'pe', 'osr'):
            assert getattr(row, key) == pytest.approx(expected[key], abs=1e-9), key
        if expected['oe'] is None:
            assert row.oe is None
        else:
            assert row.oe == pytest.approx(expected['oe'], abs=1e-6)


def test_metrics_ignore_trial_order():
    rng = np.random.default_rng(11)
    for _ in range(30):
        trials = [random_trial(rng) for _ in range(int(rng.integers(2, 12)))]
        row = MetricsLogic.compute_metrics(trials, 0.1)
        shuffled = [trials[n] for n in rng.permutation(len(trials))]
        again = MetricsLogic.compute_metrics(shuffled, 0.1)
        assert again.trials == row.trials
        for key in ('sr', 'tlp', 'tlps', 'pe', 'osr'):
            assert getattr(again, key) == pytest.approx(getattr(row, key), abs=1e-9), key
        if row.oe is None:
            assert again.oe is None
        else:
            assert again.oe == pytest.approx(row.oe, abs=1e-9)


def test_rotation_flag_follows_the_action_space():
    flags = {space: TrialOutcome(episode([Vec3(0.0, 0.0, 0.0)], space=space), False, GOAL).has_rotation
             for space in ('NAP', '3DC', '3Dx', '3DxN', '3Dxy', 'fixed-views')}
    assert flags == {'NAP': False, '3DC': False, '3Dx': True, '3DxN': True, '3Dxy': True,
                     'fixed-views': False}


def test_osr_margin_is_inclusive():
    at_margin = TrialOutcome(episode([Vec3(0.1, 0.5, 0.2)]), False, GOAL)
    beyond = TrialOutcome(episode([Vec3(0.1, 0.5, 0.2001)]), False, GOAL)
    assert MetricsLogic.compute_metrics([at_margin], 0.1).osr == 1.0
    assert MetricsLogic.compute_metrics([beyond], 0.1).osr == 0.0


def test_oe_is_absent_without_rotation_spaces():
    trial = TrialOutcome(episode([Vec3(0.0, 0.0, 0.0)], space='3DC'), False, GOAL)
    assert MetricsLogic.compute_metrics([trial]).oe is None


def test_compute_metrics_rejects_bad_input():
    with pytest.raises(ValueError):
        MetricsLogic.compute_metrics([])
    trial = TrialOutcome(episode([Vec3(0.0, 0.0, 0.0)]), False, GOAL)
    with pytest.raises(ValueError):
        MetricsLogic.compute_metrics([trial], 0.0)


def test_correctness_is_normalized_containment():
    assert MetricsLogic.correctness(Answer(True, 'It is a Golf-Ball.', 0.9), 'golf ball')
    assert not MetricsLogic.correctness(Answer(True, 'a tennis ball', 0.9), 'golf ball')
    assert not MetricsLogic.correctness(Answer.inconclusive(), 'golf ball')


def test_inconclusive_trials_cannot_be_correct():
    with pytest.raises(ValueError):
        TrialOutcome(episode([Vec3(0.0, 0.0, 0.0)]), True, GOAL)


def test_trial_outcome_requires_a_conclusive_stop(tin_scene):
    answer = Answer(True, 'a golf ball', 0.5)
    capped = episode([Vec3(0.0, 0.0, 0.0)], answer)
    assert not MetricsLogic.trial_outcome(capped, tin_scene).correct
    stopped = episode([Vec3(0.0, 0.0, 0.0)], Answer(True, 'a golf ball', 1.0),
                      terminated=TerminationReason.CONCLUSIVE_ANSWER)
    assert MetricsLogic.trial_outcome(stopped, tin_scene).correct


def cells():
    return [
        CellMetrics('mug', '3Dx', MetricsRow(1.0, 0.9, 0.9, 0.0, 0.0, 1.0, 10)),
        CellMetrics('tin', '3DC', MetricsRow(1.0, 0.75, 0.75, 0.0, None, 1.0, 10)),
        CellMetrics('tin', 'NAP', MetricsRow(0.0, 0.0, 0.0, 0.7, None, 0.0, 10)),
    ]


def test_csv_report():
    lines = MetricsLogic.emit_report(cells(), 'csv').splitlines()
    assert lines[0].split(',') == CSV_HEADER
    assert lines[1].startswith('mug,3Dx,10,1.0000')
    assert lines[2].split(',')[:2] == ['tin', 'NAP']
    assert lines[3].split(',')[7] == ABSENT


def test_markdown_report_groups_scenes():
    text = MetricsLogic.emit_report(cells(), 'markdown', notes=['note'])
    lines = text.splitlines()
    assert lines[0].startswith('| Action space | mug SR')
    assert 'tin OSR' in lines[0]
    rows = [line for line in lines[2:] if line.startswith('|')]
    assert [row.split('|')[1].strip() for row in rows] == ['NAP', '3DC', '3Dx']
    assert '| -- |' in rows[0]
    assert lines[-1] == '1. note'
    with pytest.raises(ValueError):
        MetricsLogic.emit_report(cells(), 'html')


def test_comparison_counts():
    text = MetricsLogic.emit_comparison([ComparisonRow('cup', 0, 5, 5)])
    assert '| cup | 0/5 | 5/5 |' in text


def test_metrics_row_dict_keeps_absent_oe():
    row = MetricsRow(0.5, 0.1, 0.2, 0.3, None, 0.5, 4)
    assert MetricsRow.from_dict(row.to_dict()) == row
