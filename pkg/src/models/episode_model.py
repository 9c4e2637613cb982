"""
Episode Model

Episode configuration, per-step records and the episode result.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Tuple

import config
from src.models.action_model import Action
from src.models.agent_model import Answer
from src.models.geometry_model import Pose, Vec3
from src.models.grid_model import VertexIndex


@dataclass(frozen=True)
class EpisodeConfig:
    max_iterations: int = config.MAX_ITERATIONS
    confidence_threshold: float = config.CONFIDENCE_THRESHOLD
    random_seed: int = 0
    marker_noise_std: float = config.MARKER_NOISE_STD

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ValueError("confidence_threshold must lie in [0, 1]")
        if self.marker_noise_std < 0:
            raise ValueError("marker_noise_std must be non-negative")

    def to_dict(self):
        return {
            'max_iterations': self.max_iterations,
            'confidence_threshold': self.confidence_threshold,
            'random_seed': self.random_seed,
            'marker_noise_std': self.marker_noise_std,
        }

    @classmethod
    def from_dict(cls, data) -> EpisodeConfig:
        return cls(
            max_iterations=int(data.get('max_iterations', config.MAX_ITERATIONS)),
            confidence_threshold=float(data.get('confidence_threshold', config.CONFIDENCE_THRESHOLD)),
            random_seed=int(data.get('random_seed', 0)),
            marker_noise_std=float(data.get('marker_noise_std', config.MARKER_NOISE_STD)),
        )


class TerminationReason(str, Enum):
    CONCLUSIVE_ANSWER = 'ConclusiveAnswer'
    ITERATION_CAP = 'IterationCap'
    EXHAUSTED = 'Exhausted'
    AGENT_UNAVAILABLE = 'AgentUnavailable'


@dataclass(frozen=True)
class StepRecord:
    """One analysis, plus the move it triggered when an action was executed.

    segment_length is the straight-line distance from pose_before to pose_after.
    """

    index: int
    pose_before: Pose
    pose_after: Pose
    action: Optional[Action]
    answer: Answer
    segment_length: float
    vertex: Optional[VertexIndex] = None
    rejection: Optional[str] = None

    def to_dict(self):
        """Convert step record to dictionary.

        Returns:
            dict: Step data
        """
        return {
            'index': self.index,
            'pose_before': self.pose_before.to_dict(),
            'pose_after': self.pose_after.to_dict(),
            'action': self.action.to_dict() if self.action is not None else None,
            'answer': self.answer.to_dict(),
            'segment_length': self.segment_length,
            'vertex': list(self.vertex) if self.vertex is not None else None,
            'rejection': self.rejection,
        }

    @classmethod
    def from_dict(cls, data) -> StepRecord:
        vertex = data.get('vertex')
        return cls(
            index=int(data['index']),
            pose_before=Pose.from_dict(data['pose_before']),
            pose_after=Pose.from_dict(data['pose_after']),
            action=Action.from_dict(data.get('action')),
            answer=Answer.from_dict(data['answer']),
            segment_length=float(data['segment_length']),
            vertex=VertexIndex(*vertex) if vertex is not None else None,
            rejection=data.get('rejection'),
        )


@dataclass(frozen=True)
class EpisodeResult:
    """Outcome of one episode; trajectory[0] is the home position."""

    scene_id: str
    action_space: str
    steps: Tuple[StepRecord, ...]
    terminated_by: TerminationReason
    final_answer: Answer
    final_pose: Pose
    trajectory: Tuple[Vec3, ...]
    seed: int = 0
    trial: int = 0
    agent: str = ''
    notes: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def trajectory_length(self) -> float:
        return sum(a.distance_to(b) for a, b in zip(self.trajectory, self.trajectory[1:]))

    def result_dict(self):
        """Summary fields written as the last line of an episode log."""
        return {
            'terminated_by': self.terminated_by.value,
            'final_answer': self.final_answer.to_dict(),
            'final_pose': self.final_pose.to_dict(),
            'trajectory': [p.to_list() for p in self.trajectory],
            'notes': list(self.notes),
        }

    def to_dict(self):
        data = {
            'scene_id': self.scene_id,
            'action_space': self.action_space,
            'seed': self.seed,
            'trial': self.trial,
            'agent': self.agent,
            'steps': [s.to_dict() for s in self.steps],
        }
        data.update(self.result_dict())
        return data


@dataclass(frozen=True)
class EpisodeLog:
    """Parsed episode log; result is None when the run was interrupted."""

    header: dict
    steps: Tuple[StepRecord, ...]
    result: Optional[dict] = None

    @property
    def truncated(self) -> bool:
        return self.result is None

    def to_result(self) -> Optional[EpisodeResult]:
        if self.result is None:
            return None
        return EpisodeResult(
            scene_id=self.header['scene_id'],
            action_space=self.header['action_space'],
            steps=self.steps,
            terminated_by=TerminationReason(self.result['terminated_by']),
            final_answer=Answer.from_dict(self.result['final_answer']),
            final_pose=Pose.from_dict(self.result['final_pose']),
            trajectory=tuple(Vec3.from_array(p) for p in self.result['trajectory']),
            seed=int(self.header.get('seed', 0)),
            trial=int(self.header.get('trial', 0)),
            agent=self.header.get('agent', ''),
            notes=tuple(self.result.get('notes', ())),
        )
