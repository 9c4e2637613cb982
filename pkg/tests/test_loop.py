"""Episode loop: termination, rejections and randomized invariants."""

import math

import numpy as np
import pytest

from src.logic.actionspace_logic import ActionSpaceLogic
from src.logic.agent_logic import Analyzer, GreedyPolicy, OracleAnalyzer, Policy, RandomPolicy
from src.logic.geometry_logic import GeometryLogic
from src.logic.grid_logic import GridLogic
from src.logic.loop_logic import LoopLogic
from src.logic.scene_logic import SceneLogic
from src.models.action_model import Action, ActionSpaceKind, ContinuousPoint, VertexTarget
from src.models.agent_model import Answer
from src.models.episode_model import EpisodeConfig, TerminationReason
from src.models.geometry_model import Vec3
from src.utils.errors import EndpointUnavailable, PolicyExhausted, ProposalRejected, SceneError

CONTINUOUS_KINDS = [ActionSpaceKind.THREE_D_C, ActionSpaceKind.THREE_D_X,
                    ActionSpaceKind.THREE_D_X_N, ActionSpaceKind.THREE_D_XY]


def upright_tin(x, y, cone=30.0, band=(0.03, 0.3), with_box=False):
    """Scene document for an upright tin whose goal looks straight down the opening."""
    lift = 0.06 + 0.5 * (band[0] + band[1])
    objects = [{'id': 'tin', 'shape': {'type': 'cylinder', 'radius': 0.04, 'height': 0.06},
                'pose': {'position': [x, y, 0.03]}}]
    if with_box:
        objects.append({'id': 'cereal_box', 'shape': {'type': 'box', 'dims': [0.06, 0.16, 0.1]},
                        'pose': {'position': [-x, 0.8 - y, 0.05]}})
    return {
        'scene_id': f"tin_{x:+.3f}_{y:+.3f}",
        'objects': objects,
        'hidden': {'owner_id': 'tin', 'fact': 'a golf ball', 'opening_center': [x, y, 0.06],
                   'opening_normal': [0.0, 0.0, 1.0], 'cone_half_angle': cone,
                   'min_distance': band[0], 'max_distance': band[1]},
        'goal_pose': {'position': [x, y, lift]},
        'query': 'What is inside the tin?',
        'truth_answer': 'golf ball',
    }


def random_scenes(rng, count, boxes=True):
    scenes = []
    while len(scenes) < count:
        x = float(rng.uniform(-0.28, 0.28))
        y = float(rng.uniform(0.12, 0.68))
        cone = float(rng.uniform(15.0, 30.0))
        near = float(rng.uniform(0.03, 0.08))
        band = (near, float(rng.uniform(near + 0.1, 0.3)))
        try:
            document = upright_tin(x, y, cone, band, with_box=boxes and bool(rng.integers(2)))
            scenes.append(SceneLogic.scene_from_dict(document))
        except SceneError:
            continue
    return scenes


class FixedPolicy(Policy):
    name = 'fixed'

    def __init__(self, action=None, error=None):
        self.action = action
        self.error = error
        self.calls = 0

    def propose_action(self, x_t, obs, knowledge, home_obs, rules):
        self.calls += 1
        if self.error is not None:
            raise self.error
        return self.action, knowledge


class ScriptedPolicy(Policy):
    name = 'scripted'

    def __init__(self, actions):
        self.actions = list(actions)

    def propose_action(self, x_t, obs, knowledge, home_obs, rules):
        return self.actions.pop(0), knowledge


class DownAnalyzer(Analyzer):
    name = 'down'

    def analyze(self, query, obs):
        raise EndpointUnavailable("connection refused")


class LowConfidenceAnalyzer(Analyzer):
    name = 'unsure'

    def analyze(self, query, obs):
        return Answer(True, 'a golf ball', 0.5)


def run(scene, kind, analyzer=None, policy=None, **cfg):
    rules = ActionSpaceLogic.rules_for(kind, scene.grid)
    return LoopLogic.run_episode(scene, rules, analyzer or OracleAnalyzer(scene), policy, EpisodeConfig(**cfg))


def test_nap_answers_from_home_only(tin_scene):
    result = run(tin_scene, ActionSpaceKind.NAP)
    assert len(result.steps) == 1
    assert result.terminated_by is TerminationReason.ITERATION_CAP
    assert result.trajectory == (tin_scene.home_pose.position,)
    assert result.agent == 'oracle+none'


def test_moving_space_needs_a_policy(tin_scene):
    with pytest.raises(ValueError):
        run(tin_scene, ActionSpaceKind.THREE_D_X)


def test_greedy_finds_the_golf_ball(tin_scene):
    result = run(tin_scene, ActionSpaceKind.THREE_D_X, policy=GreedyPolicy(tin_scene))
    assert result.terminated_by is TerminationReason.CONCLUSIVE_ANSWER
    assert 'golf ball' in result.final_answer.text
    assert len(result.steps) == 2
    assert result.final_pose.position.to_list() == pytest.approx([0.1, 0.5, 0.1])
    assert result.trajectory_length == pytest.approx(math.sqrt(0.57))
    assert result.steps[0].segment_length == pytest.approx(result.trajectory_length)


def test_mug_needs_rotation(mug_scene):
    rotated = run(mug_scene, ActionSpaceKind.THREE_D_X, policy=GreedyPolicy(mug_scene))
    assert rotated.terminated_by is TerminationReason.CONCLUSIVE_ANSWER
    assert 'marble' in rotated.final_answer.text
    level = run(mug_scene, ActionSpaceKind.THREE_D_C, policy=GreedyPolicy(mug_scene))
    assert level.terminated_by is TerminationReason.ITERATION_CAP
    assert len(level.steps) == 10


def test_low_confidence_does_not_stop(tin_scene):
    result = run(tin_scene, ActionSpaceKind.NAP, analyzer=LowConfidenceAnalyzer())
    assert result.terminated_by is TerminationReason.ITERATION_CAP
    result = run(tin_scene, ActionSpaceKind.NAP, analyzer=LowConfidenceAnalyzer(), confidence_threshold=0.5)
    assert result.terminated_by is TerminationReason.CONCLUSIVE_ANSWER


def test_rejected_action_consumes_the_iteration(tin_scene):
    # continuous points are the wrong target type in 3DD
    policy = FixedPolicy(Action(ContinuousPoint(Vec3(0.1, 0.5, 0.1))))
    result = run(tin_scene, ActionSpaceKind.THREE_D_D, policy=policy, max_iterations=4)
    assert result.terminated_by is TerminationReason.ITERATION_CAP
    assert len(result.steps) == 4
    assert [s.rejection for s in result.steps] == ['WrongTargetType'] * 3 + [None]
    assert policy.calls == 3
    assert result.trajectory_length == 0.0


def test_policy_rejection_after_reprompts(tin_scene):
    policy = FixedPolicy(error=ProposalRejected("no valid proposal", ['OutOfBounds', 'Revisit']))
    result = run(tin_scene, ActionSpaceKind.THREE_D_X, policy=policy, max_iterations=2)
    assert result.steps[0].rejection == 'Revisit'
    assert len(result.steps) == 2


def test_exhausted_policy(tin_scene):
    result = run(tin_scene, ActionSpaceKind.THREE_D_X, policy=FixedPolicy(error=PolicyExhausted('done')))
    assert result.terminated_by is TerminationReason.EXHAUSTED
    assert len(result.steps) == 1
    assert result.notes == ('done',)


def test_unavailable_agents(tin_scene):
    result = run(tin_scene, ActionSpaceKind.THREE_D_X, analyzer=DownAnalyzer(), policy=GreedyPolicy(tin_scene))
    assert result.terminated_by is TerminationReason.AGENT_UNAVAILABLE
    assert result.steps == ()
    result = run(tin_scene, ActionSpaceKind.THREE_D_X,
                 policy=FixedPolicy(error=EndpointUnavailable('timeout')))
    assert result.terminated_by is TerminationReason.AGENT_UNAVAILABLE
    assert len(result.steps) == 1


def test_on_step_sees_every_step(tin_scene):
    seen = []
    rules = ActionSpaceLogic.rules_for(ActionSpaceKind.THREE_D_X, tin_scene.grid)
    result = LoopLogic.run_episode(tin_scene, rules, OracleAnalyzer(tin_scene), GreedyPolicy(tin_scene),
                                   EpisodeConfig(), on_step=seen.append)
    assert tuple(seen) == result.steps


def test_rotation_ignores_the_previous_pose(tin_scene):
    final = Action(ContinuousPoint(Vec3(0.1, 0.3, 0.2)), rot_x_deg=20.0, rot_y_deg=-10.0)
    expected = GeometryLogic.rotation_about_base(20.0, -10.0)
    for prior_x, prior_y in ((0.0, 0.0), (30.0, 0.0), (-25.0, 15.0)):
        prior = Action(ContinuousPoint(Vec3(-0.1, 0.5, 0.2)), rot_x_deg=prior_x, rot_y_deg=prior_y)
        policy = ScriptedPolicy([prior, final])
        result = run(tin_scene, ActionSpaceKind.THREE_D_XY, analyzer=LowConfidenceAnalyzer(), policy=policy,
                     max_iterations=3)
        assert len(result.steps) == 3
        assert GeometryLogic.quat_angle_deg(result.final_pose.orientation, expected) == pytest.approx(0.0, abs=1e-6)


def test_greedy_leaves_the_lattice_for_an_opening_under_a_cell_center():
    scene = SceneLogic.scene_from_dict(upright_tin(-0.2, 0.2))
    assert GridLogic.contains(scene.grid, scene.goal_pose.position)
    for kind in CONTINUOUS_KINDS:
        result = run(scene, kind, policy=GreedyPolicy(scene))
        assert result.terminated_by is TerminationReason.CONCLUSIVE_ANSWER, kind
        assert len(result.steps) == 2
        assert result.final_pose.position.to_list() == pytest.approx([-0.2, 0.2, 0.225])


def test_greedy_stays_on_the_lattice_in_discrete_spaces():
    scene = SceneLogic.scene_from_dict(upright_tin(-0.2, 0.2))
    result = run(scene, ActionSpaceKind.THREE_D_D, policy=GreedyPolicy(scene))
    assert result.terminated_by is TerminationReason.ITERATION_CAP
    assert all(s.action is None or isinstance(s.action.target, VertexTarget) for s in result.steps)


def test_greedy_solves_random_placements():
    rng = np.random.default_rng(7)
    for scene in random_scenes(rng, 40, boxes=False):
        assert GridLogic.contains(scene.grid, scene.goal_pose.position)
        kind = CONTINUOUS_KINDS[int(rng.integers(len(CONTINUOUS_KINDS)))]
        result = run(scene, kind, policy=GreedyPolicy(scene))
        assert result.terminated_by is TerminationReason.CONCLUSIVE_ANSWER, (scene.scene_id, kind)
        assert len(result.steps) <= 10


def check_random_episodes(scenes, count, seed):
    rng = np.random.default_rng(seed)
    kinds = list(ActionSpaceKind)
    scenes = list(scenes) + random_scenes(rng, 12)
    for _ in range(count):
        scene = scenes[int(rng.integers(len(scenes)))]
        kind = kinds[int(rng.integers(len(kinds)))]
        episode_seed = int(rng.integers(1 << 31))
        max_iterations = int(rng.integers(1, 11))
        rules = ActionSpaceLogic.rules_for(kind, scene.grid)
        cfg = EpisodeConfig(max_iterations=max_iterations, random_seed=episode_seed)

        result = LoopLogic.run_episode(scene, rules, OracleAnalyzer(scene), RandomPolicy(seed=episode_seed), cfg)

        assert 1 <= len(result.steps) <= max_iterations
        vertices = [s.vertex for s in result.steps if s.vertex is not None]
        assert len(vertices) == len(set(vertices))
        assert len(result.trajectory) == len(vertices) + 1
        assert result.trajectory[0] == scene.home_pose.position
        assert result.trajectory_length == pytest.approx(sum(s.segment_length for s in result.steps), abs=1e-9)
        if result.terminated_by is TerminationReason.CONCLUSIVE_ANSWER:
            assert result.final_answer.confidence >= cfg.confidence_threshold

        again = LoopLogic.run_episode(scene, rules, OracleAnalyzer(scene), RandomPolicy(seed=episode_seed), cfg)
        assert again == result


def test_random_episode_invariants(tin_scene, mug_scene, cup_scene):
    check_random_episodes([tin_scene, mug_scene, cup_scene], 200, seed=99)


@pytest.mark.slow
def test_random_episode_invariants_extended(tin_scene, mug_scene, cup_scene):
    check_random_episodes([tin_scene, mug_scene, cup_scene], 10000, seed=2024)
