"""
Loop Logic

The iterative exploration process: capture, analyze, then either stop or
ask the policy for the next viewpoint, with revisit prevention and the
iteration cap.
"""

from __future__ import annotations

import logging
from typing import Callable, Optional

import numpy as np

from src.logic.actionspace_logic import ActionSpaceLogic
from src.logic.agent_logic import Analyzer, KnowledgeLogic, Policy
from src.logic.grid_logic import GridLogic
from src.logic.scene_logic import SceneLogic
from src.models.action_model import ActionSpaceRules, Rejection
from src.models.agent_model import Answer, EnhancedObservation, Query
from src.models.episode_model import EpisodeConfig, EpisodeResult, StepRecord, TerminationReason
from src.models.geometry_model import CameraIntrinsics, Pose
from src.models.scene_model import SceneSpec
from src.utils.errors import EndpointUnavailable, PolicyExhausted, ProposalRejected

logger = logging.getLogger(__name__)

StepCallback = Callable[[StepRecord], None]


class LoopLogic:
    """Runs single episodes."""

    @staticmethod
    def build_observation(scene: SceneSpec, rules: ActionSpaceRules, pose: Pose,
                          rng: np.random.Generator, cfg: EpisodeConfig,
                          k: Optional[CameraIntrinsics] = None) -> EnhancedObservation:
        """Observe the scene and prepare the overlay and image for lazy construction.

        The grid overlay is re-anchored through the detected markers, so marker
        noise shows up as overlay drift.

        Args:
            scene (SceneSpec): The scene
            rules (ActionSpaceRules): Active rules; their grid is drawn
            pose (Pose): Camera pose
            rng (Generator): Episode generator
            cfg (EpisodeConfig): Episode configuration
            k (CameraIntrinsics): Intrinsics, default the scene camera

        Returns:
            EnhancedObservation: Facts now, overlay and image on first access
        """
        k = k or scene.intrinsics
        facts = SceneLogic.observe(scene, pose, k, rng=rng, noise_std=cfg.marker_noise_std)

        def overlay():
            grid = GridLogic.grid_from_markers(rules.grid, scene.marker_poses, facts.detected_markers, pose)
            return GridLogic.project_grid(grid, k, pose)

        def image(primitives):
            return SceneLogic.render(scene, pose, k, primitives)

        return EnhancedObservation(facts, overlay, image)

    @staticmethod
    def run_episode(scene: SceneSpec, rules: ActionSpaceRules, analyzer: Analyzer,
                    policy: Optional[Policy], cfg: EpisodeConfig,
                    on_step: Optional[StepCallback] = None, trial: int = 0) -> EpisodeResult:
        """Run one episode from the home pose.

        Every iteration is one analysis. A confident conclusive answer ends
        the episode; otherwise the policy proposes an action, which is
        validated and executed by teleporting the camera. A rejected proposal
        consumes the iteration without moving.

        Args:
            scene (SceneSpec): The scene
            rules (ActionSpaceRules): Active action space
            analyzer (Analyzer): Perception analyzer
            policy (Policy | None): Active perception policy, None for NAP
            cfg (EpisodeConfig): Iteration cap, threshold, seed and marker noise
            on_step (callable): Called with each StepRecord as soon as it exists
            trial (int): Trial index for bookkeeping

        Returns:
            EpisodeResult: The episode outcome
        """
        if rules.allows_movement and policy is None:
            raise ValueError(f"Action space {rules.kind.value} needs a policy")

        rng = np.random.default_rng(cfg.random_seed)
        query = Query(scene.query)
        pose = scene.home_pose
        trajectory = [pose.position]
        steps = []
        knowledge = KnowledgeLogic.initial(scene, rules)
        notes = []

        home_obs = LoopLogic.build_observation(scene, rules, pose, rng, cfg)
        obs = home_obs
        answer = Answer.inconclusive()
        terminated = None

        logger.info("Episode start: scene=%s space=%s seed=%s", scene.scene_id, rules.kind.value, cfg.random_seed)

        def record(step: StepRecord):
            steps.append(step)
            if on_step is not None:
                on_step(step)

        for index in range(cfg.max_iterations):
            try:
                answer = analyzer.analyze(query, obs)
            except EndpointUnavailable as exc:
                logger.warning("Analyzer unavailable at step %d: %s", index, exc)
                notes.append(f"analyzer unavailable: {exc}")
                terminated = TerminationReason.AGENT_UNAVAILABLE
                break
            logger.debug("Step %d at %s: conclusive=%s confidence=%.2f", index,
                         pose.position.to_list(), answer.conclusive, answer.confidence)

            if answer.conclusive and answer.confidence >= cfg.confidence_threshold:
                record(StepRecord(index, pose, pose, None, answer, 0.0))
                terminated = TerminationReason.CONCLUSIVE_ANSWER
                break
            if not rules.allows_movement or index == cfg.max_iterations - 1:
                record(StepRecord(index, pose, pose, None, answer, 0.0))
                terminated = TerminationReason.ITERATION_CAP
                break

            home = home_obs if rules.include_home_obs else None
            try:
                action, proposed = policy.propose_action(pose, obs, knowledge, home, rules)
            except PolicyExhausted as exc:
                record(StepRecord(index, pose, pose, None, answer, 0.0))
                notes.append(str(exc))
                terminated = TerminationReason.EXHAUSTED
                break
            except ProposalRejected as exc:
                reason = exc.reasons[-1] if exc.reasons else str(exc)
                record(StepRecord(index, pose, pose, None, answer, 0.0, rejection=str(reason)))
                continue
            except EndpointUnavailable as exc:
                record(StepRecord(index, pose, pose, None, answer, 0.0))
                notes.append(f"policy unavailable: {exc}")
                terminated = TerminationReason.AGENT_UNAVAILABLE
                break

            verdict = ActionSpaceLogic.validate(rules, action, KnowledgeLogic.visited(knowledge))
            if isinstance(verdict, Rejection):
                logger.debug("Step %d: action rejected (%s)", index, verdict.reason.value)
                record(StepRecord(index, pose, pose, None, answer, 0.0, rejection=verdict.reason.value))
                continue

            new_pose = ActionSpaceLogic.action_to_pose(rules, action)
            segment = pose.position.distance_to(new_pose.position)
            record(StepRecord(index, pose, new_pose, action, answer, segment, vertex=verdict.vertex))
            knowledge = proposed
            pose = new_pose
            trajectory.append(pose.position)
            obs = LoopLogic.build_observation(scene, rules, pose, rng, cfg)

        if terminated is None:
            terminated = TerminationReason.ITERATION_CAP

        logger.info("Episode stop: scene=%s space=%s seed=%s terminated_by=%s steps=%d",
                    scene.scene_id, rules.kind.value, cfg.random_seed, terminated.value, len(steps))
        return EpisodeResult(
            scene_id=scene.scene_id,
            action_space=rules.kind.value,
            steps=tuple(steps),
            terminated_by=terminated,
            final_answer=answer,
            final_pose=pose,
            trajectory=tuple(trajectory),
            seed=cfg.random_seed,
            trial=trial,
            agent=f"{analyzer.name}+{policy.name if policy is not None else 'none'}",
            notes=tuple(notes),
        )
