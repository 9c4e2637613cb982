"""
Agent Logic

Perception Analyzer and Active Perception Policy contracts, knowledge
bookkeeping and the built-in agents: ground-truth oracle, seeded random,
greedy scripted and the fixed-views baseline.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from typing import FrozenSet, List, Optional, Tuple

import numpy as np

import config
from src.logic.actionspace_logic import ActionSpaceLogic
from src.logic.geometry_logic import GeometryLogic
from src.logic.grid_logic import GridLogic
from src.models.action_model import (
    ALLOWED_ROTATIONS,
    Action,
    ActionSpaceKind,
    ActionSpaceRules,
    ContinuousPoint,
    VertexTarget,
)
from src.models.agent_model import Answer, EnhancedObservation, Eta, Knowledge, Query, StepFact
from src.models.episode_model import EpisodeConfig, EpisodeResult, StepRecord, TerminationReason
from src.models.geometry_model import CameraIntrinsics, Pose, Vec3
from src.models.grid_model import GridVertex, VertexIndex
from src.models.scene_model import SceneSpec
from src.utils.errors import ConfigError, EndpointUnavailable, PolicyExhausted
from src.utils.helpers import normalize_text

logger = logging.getLogger(__name__)

FIXED_VIEW_HEIGHT = 0.15
ANALYZER_NAMES = ('oracle', 'vlm')
POLICY_NAMES = ('random', 'greedy', 'fixed-views', 'vlm')


class Analyzer(ABC):
    """Decides whether an observation suffices to answer the query."""

    name = 'analyzer'

    @abstractmethod
    def analyze(self, query: Query, obs: EnhancedObservation) -> Answer:
        """Analyze one observation.

        Raises:
            EndpointUnavailable: Remote analyzers only
        """


class Policy(ABC):
    """Proposes the next viewpoint."""

    name = 'policy'

    @abstractmethod
    def propose_action(self, x_t: Pose, obs: EnhancedObservation, knowledge: Knowledge,
                       home_obs: Optional[EnhancedObservation],
                       rules: ActionSpaceRules) -> Tuple[Action, Knowledge]:
        """Propose an action and the knowledge extended by one StepFact.

        Raises:
            PolicyExhausted: When no valid unvisited action remains
        """


class KnowledgeLogic:
    """Bookkeeping for zeta = {eta, kappa}."""

    @staticmethod
    def initial(scene: SceneSpec, rules: ActionSpaceRules) -> Knowledge:
        grid = rules.grid
        return Knowledge(Eta(
            action_space=rules.kind.value,
            rules_text=rules.describe(),
            workspace_min=grid.anchor,
            workspace_max=Vec3.from_array(grid.anchor.as_array() + grid.extent.as_array()),
            goal=scene.query,
        ))

    @staticmethod
    def visited(knowledge: Knowledge) -> FrozenSet[VertexIndex]:
        return frozenset(f.vertex for f in knowledge.kappa if f.vertex is not None)

    @staticmethod
    def record_action(knowledge: Knowledge, rules: ActionSpaceRules, action: Action, summary: str = '') -> Knowledge:
        """Append the StepFact for an action about to be executed.

        Args:
            knowledge (Knowledge): Current knowledge
            rules (ActionSpaceRules): Active rules
            action (Action): The proposed action
            summary (str): Short analyzer or policy note

        Returns:
            Knowledge: Knowledge with one more StepFact
        """
        pose = ActionSpaceLogic.action_to_pose(rules, action)
        vertex = GridLogic.nearest_vertex(rules.grid, pose.position).index
        return knowledge.with_fact(StepFact(len(knowledge.kappa) + 1, pose, vertex, summary))

    @staticmethod
    def unvisited_vertices(knowledge: Knowledge, rules: ActionSpaceRules) -> List[GridVertex]:
        visited = KnowledgeLogic.visited(knowledge)
        return [v for v in GridLogic.generate_vertices(rules.grid) if v.index not in visited]


class OracleAnalyzer(Analyzer):
    """Answers from ground truth: the hidden fact when it is in view, else matching surface facts."""

    name = 'oracle'

    def __init__(self, scene: SceneSpec):
        self.scene = scene

    def analyze(self, query: Query, obs: EnhancedObservation) -> Answer:
        facts = obs.facts
        text = normalize_text(query.text)
        if facts.hidden_fact_visible and text == normalize_text(self.scene.query):
            return Answer(True, self.scene.hidden.fact, 1.0)

        for object_id, fact in facts.visible_surface_facts:
            key, sep, _ = fact.partition(':')
            obj = self.scene.object_by_id(object_id)
            if not sep or obj is None:
                continue
            if normalize_text(obj.name) in text and normalize_text(key) in text:
                return Answer(True, fact, 1.0)
        return Answer.inconclusive()


class RandomPolicy(Policy):
    """Uniformly random unvisited targets from a seeded generator."""

    name = 'random'

    def __init__(self, seed: int = 0, rng: Optional[np.random.Generator] = None):
        self.rng = rng if rng is not None else np.random.default_rng(seed)

    def propose_action(self, x_t, obs, knowledge, home_obs, rules):
        candidates = KnowledgeLogic.unvisited_vertices(knowledge, rules)
        if not candidates:
            raise PolicyExhausted("All grid vertices have been visited")
        vertex = candidates[int(self.rng.integers(len(candidates)))]

        if rules.allows_continuous:
            target = ContinuousPoint(self._point_near(vertex, rules))
        else:
            target = VertexTarget(vertex.index)
        rot_x = float(self.rng.choice(ALLOWED_ROTATIONS)) if rules.allows_rot_x else 0.0
        rot_y = float(self.rng.choice(ALLOWED_ROTATIONS)) if rules.allows_rot_y else 0.0
        action = Action(target, rot_x, rot_y)
        return action, KnowledgeLogic.record_action(knowledge, rules, action, 'random proposal')

    def _point_near(self, vertex: GridVertex, rules: ActionSpaceRules) -> Vec3:
        # Offsets below half a spacing keep the point snapping to the chosen vertex
        grid = rules.grid
        half = 0.4 * np.array([grid.spacing_xy, grid.spacing_xy, grid.spacing_z])
        point = vertex.position.as_array() + self.rng.uniform(-half, half)
        lo = grid.anchor.as_array()
        return Vec3.from_array(np.clip(point, lo, lo + grid.extent.as_array()))


class GreedyPolicy(Policy):
    """Scripted baseline that knows the hidden attribute.

    Picks the unvisited vertex with the smallest angle to the opening cone
    axis, then the smallest distance to the distance band, then the lowest
    (k, j, i) index; the rotation is the allowed one pointing the camera
    closest to the opening.

    In continuous spaces, once no unvisited vertex lies inside the cone and
    band, off-lattice viewpoints join the candidates: the cone axis at the
    middle of the band and the goal position, both clipped into the cube.
    A candidate whose snapped vertex was visited is skipped.
    """

    name = 'greedy'

    def __init__(self, scene: SceneSpec):
        self.scene = scene

    def score(self, position: Vec3) -> Tuple[float, float]:
        hidden = self.scene.hidden
        offset = position.as_array() - hidden.opening_center.as_array()
        distance = float(np.linalg.norm(offset))
        if distance < 1e-12:
            return 180.0, hidden.min_distance
        angle = GeometryLogic.angle_between_deg(hidden.opening_normal.as_array(), offset)
        band = max(0.0, hidden.min_distance - distance, distance - hidden.max_distance)
        return round(angle, 9), round(band, 12)

    def best_rotation(self, position: Vec3, rules: ActionSpaceRules) -> Tuple[float, float]:
        to_opening = self.scene.hidden.opening_center.as_array() - position.as_array()
        if float(np.linalg.norm(to_opening)) < 1e-12:
            return 0.0, 0.0
        xs = ALLOWED_ROTATIONS if rules.allows_rot_x else (0.0,)
        ys = ALLOWED_ROTATIONS if rules.allows_rot_y else (0.0,)
        # Smaller rotations first so they win ties
        combos = sorted(((rx, ry) for rx in xs for ry in ys), key=lambda c: (abs(c[0]) + abs(c[1]), c))
        best, best_angle = (0.0, 0.0), None
        for rx, ry in combos:
            axis = GeometryLogic.optical_axis(Pose(position, GeometryLogic.rotation_about_base(rx, ry)))
            angle = GeometryLogic.angle_between_deg(axis, to_opening)
            if best_angle is None or angle < best_angle - 1e-9:
                best, best_angle = (rx, ry), angle
        return best

    def inside_cone(self, score: Tuple[float, float]) -> bool:
        angle, band = score
        return angle <= self.scene.hidden.cone_half_angle and band == 0.0

    def continuous_candidates(self, rules: ActionSpaceRules, visited) -> List[Vec3]:
        hidden = self.scene.hidden
        normal = hidden.opening_normal.as_array()
        normal = normal / np.linalg.norm(normal)
        mid_band = 0.5 * (hidden.min_distance + hidden.max_distance)
        lo = rules.grid.anchor.as_array()
        hi = lo + rules.grid.extent.as_array()
        points: List[Vec3] = []
        for raw in (hidden.opening_center.as_array() + mid_band * normal, self.scene.goal_pose.position.as_array()):
            point = Vec3.from_array(np.clip(raw, lo, hi))
            if GridLogic.nearest_vertex(rules.grid, point).index in visited:
                continue
            if any(point.distance_to(p) < 1e-9 for p in points):
                continue
            points.append(point)
        return points

    def propose_action(self, x_t, obs, knowledge, home_obs, rules):
        # (score, off-lattice flag, index key, position, vertex or None)
        ranked = [(self.score(v.position), 0, v.index.sort_key(), v.position, v)
                  for v in KnowledgeLogic.unvisited_vertices(knowledge, rules)]
        if rules.allows_continuous and not any(self.inside_cone(c[0]) for c in ranked):
            visited = KnowledgeLogic.visited(knowledge)
            ranked += [(self.score(p), 1, (), p, None) for p in self.continuous_candidates(rules, visited)]
        if not ranked:
            raise PolicyExhausted("All grid vertices have been visited")
        (angle, band), _, _, position, vertex = min(ranked, key=lambda c: c[:3])

        if rules.allows_continuous:
            target = ContinuousPoint(position)
        else:
            target = VertexTarget(vertex.index)
        rot_x, rot_y = self.best_rotation(position, rules)
        action = Action(target, rot_x, rot_y)
        summary = f"greedy: cone angle {angle:.1f} deg, band gap {band:.3f} m"
        where = (vertex.label or tuple(vertex.index)) if vertex is not None else position.to_list()
        logger.debug("Greedy proposal %s rot=(%s, %s) %s", where, rot_x, rot_y, summary)
        return action, KnowledgeLogic.record_action(knowledge, rules, action, summary)


class FixedViewsLogic:
    """Passive baseline over five predetermined camera poses."""

    @staticmethod
    def view_poses(scene: SceneSpec) -> List[Tuple[str, Pose]]:
        """Four side views at 0.15 m facing the table center, then the top view.

        Returns:
            list: (view name, pose) pairs
        """
        bounds = scene.table_bounds
        center = bounds.center
        eyes = [
            ('front', Vec3(center.x, bounds.y_min, FIXED_VIEW_HEIGHT)),
            ('back', Vec3(center.x, bounds.y_max, FIXED_VIEW_HEIGHT)),
            ('left', Vec3(bounds.x_min, center.y, FIXED_VIEW_HEIGHT)),
            ('right', Vec3(bounds.x_max, center.y, FIXED_VIEW_HEIGHT)),
        ]
        views = [(name, Pose(eye, GeometryLogic.look_at(eye, center))) for name, eye in eyes]
        views.append(('top', Pose(Vec3(*config.HOME_POSITION), GeometryLogic.top_down_orientation())))
        return views

    @staticmethod
    def fixed_views_episode(scene: SceneSpec, analyzer: Analyzer, k: CameraIntrinsics,
                            confidence_threshold: float = config.CONFIDENCE_THRESHOLD) -> Answer:
        """Answer from the five fixed views, else inconclusive.

        A view only counts when its answer is conclusive with confidence at or
        above confidence_threshold; a conclusive answer below it is skipped and
        the next view is tried.
        """
        result = FixedViewsLogic.run_fixed_views(
            scene, analyzer, k, EpisodeConfig(confidence_threshold=confidence_threshold))
        if result.terminated_by is not TerminationReason.CONCLUSIVE_ANSWER:
            return Answer.inconclusive()
        return result.final_answer

    @staticmethod
    def run_fixed_views(scene: SceneSpec, analyzer: Analyzer, k: CameraIntrinsics,
                        cfg: EpisodeConfig, trial: int = 0) -> EpisodeResult:
        """Fixed-views baseline as an EpisodeResult so it is scored like any episode.

        The cameras are static, so every step has zero travel and the
        trajectory holds only the home position.

        Args:
            scene (SceneSpec): The scene
            analyzer (Analyzer): Analyzer to consult
            k (CameraIntrinsics): Camera intrinsics
            cfg (EpisodeConfig): Threshold and seed
            trial (int): Trial index for bookkeeping

        Returns:
            EpisodeResult: One step per analyzed view
        """
        from src.logic.loop_logic import LoopLogic  # lazy import: loop depends on agents

        rules = ActionSpaceLogic.rules_for(ActionSpaceKind.NAP, scene.grid)
        rng = np.random.default_rng(cfg.random_seed)
        query = Query(scene.query)
        steps = []
        answer = Answer.inconclusive()
        terminated = TerminationReason.ITERATION_CAP
        for index, (name, pose) in enumerate(FixedViewsLogic.view_poses(scene)):
            obs = LoopLogic.build_observation(scene, rules, pose, rng, cfg, k)
            try:
                answer = analyzer.analyze(query, obs)
            except EndpointUnavailable as exc:
                logger.warning("Analyzer unavailable at fixed view %s: %s", name, exc)
                terminated = TerminationReason.AGENT_UNAVAILABLE
                break
            steps.append(StepRecord(index, pose, pose, None, answer, 0.0))
            logger.debug("Fixed view %s: conclusive=%s", name, answer.conclusive)
            if answer.conclusive and answer.confidence >= cfg.confidence_threshold:
                terminated = TerminationReason.CONCLUSIVE_ANSWER
                break
        return EpisodeResult(
            scene_id=scene.scene_id,
            action_space='fixed-views',
            steps=tuple(steps),
            terminated_by=terminated,
            final_answer=answer,
            final_pose=steps[-1].pose_after if steps else scene.home_pose,
            trajectory=(scene.home_pose.position,),
            seed=cfg.random_seed,
            trial=trial,
            agent=f"{analyzer.name}+fixed-views",
        )


def build_analyzer(name: str, scene: SceneSpec, client=None, annotated: bool = True) -> Analyzer:
    """Analyzer factory for the names used in experiment files.

    Args:
        name (str): "oracle" or "vlm"
        scene (SceneSpec): Scene the analyzer works on
        client (VlmClient): Remote client, required for "vlm"
        annotated (bool): Whether the remote analyzer sees a labeled overlay

    Raises:
        ConfigError: For unknown names or a missing client
    """
    if name == 'oracle':
        return OracleAnalyzer(scene)
    if name == 'vlm':
        if client is None:
            raise ConfigError("The vlm analyzer needs an endpoint configuration")
        from src.logic.vlm_logic import VlmAnalyzer
        return VlmAnalyzer(client, annotated)
    raise ConfigError(f"Unknown analyzer '{name}' (expected one of: {', '.join(ANALYZER_NAMES)})")


def build_policy(name: str, scene: SceneSpec, seed: int = 0, client=None) -> Optional[Policy]:
    """Policy factory for the names used in experiment files.

    "fixed-views" has no policy object: the harness runs FixedViewsLogic instead.

    Raises:
        ConfigError: For unknown names or a missing client
    """
    if name == 'random':
        return RandomPolicy(seed=seed)
    if name == 'greedy':
        return GreedyPolicy(scene)
    if name == 'fixed-views':
        return None
    if name == 'vlm':
        if client is None:
            raise ConfigError("The vlm policy needs an endpoint configuration")
        from src.logic.vlm_logic import VlmPolicy
        return VlmPolicy(client)
    raise ConfigError(f"Unknown policy '{name}' (expected one of: {', '.join(POLICY_NAMES)})")
