"""
Agent Model

Queries, answers, the knowledge record and the enhanced observation handed
to analyzers and policies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Tuple

from src.models.geometry_model import Pose, Vec3
from src.models.grid_model import OverlayPrimitiveSet, VertexIndex
from src.models.scene_model import ObservationFacts

MALFORMED_REPLY = 'MalformedReply'


@dataclass(frozen=True)
class Query:
    text: str

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise ValueError("Query text must not be empty")


@dataclass(frozen=True)
class Answer:
    """Analyzer verdict: conclusive flag, answer text and confidence in [0, 1]."""

    conclusive: bool
    text: str = ''
    confidence: float = 0.0
    flags: Tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("Confidence must lie in [0, 1]")
        if self.conclusive and not self.text.strip():
            raise ValueError("A conclusive answer needs text")

    @classmethod
    def inconclusive(cls, *flags: str) -> Answer:
        return cls(False, '', 0.0, tuple(flags))

    def to_dict(self):
        return {
            'conclusive': self.conclusive,
            'text': self.text,
            'confidence': self.confidence,
            'flags': list(self.flags),
        }

    @classmethod
    def from_dict(cls, data) -> Answer:
        return cls(bool(data['conclusive']), str(data.get('text', '')),
                   float(data.get('confidence', 0.0)), tuple(data.get('flags', ())))


@dataclass(frozen=True)
class StepFact:
    """One executed action as remembered by the agent."""

    step: int
    pose: Pose
    vertex: Optional[VertexIndex]
    summary: str = ''

    def to_dict(self):
        return {
            'step': self.step,
            'pose': self.pose.to_dict(),
            'vertex': list(self.vertex) if self.vertex is not None else None,
            'summary': self.summary,
        }


@dataclass(frozen=True)
class Eta:
    """Initial context fixed at episode start."""

    action_space: str
    rules_text: str
    workspace_min: Vec3
    workspace_max: Vec3
    goal: str

    def to_dict(self):
        return {
            'action_space': self.action_space,
            'rules_text': self.rules_text,
            'workspace_min': self.workspace_min.to_list(),
            'workspace_max': self.workspace_max.to_list(),
            'goal': self.goal,
        }


@dataclass(frozen=True)
class Knowledge:
    """zeta = {eta, kappa}; a new Knowledge is produced for every executed action."""

    eta: Eta
    kappa: Tuple[StepFact, ...] = field(default_factory=tuple)

    def with_fact(self, fact: StepFact) -> Knowledge:
        return Knowledge(self.eta, self.kappa + (fact,))

    def to_dict(self):
        return {'eta': self.eta.to_dict(), 'kappa': [f.to_dict() for f in self.kappa]}


class EnhancedObservation:
    """Observation facts plus the grid overlay and rendered image, built on first access.

    Args:
        facts (ObservationFacts): Ground truth seen from the camera pose
        overlay_factory (callable): Builds the OverlayPrimitiveSet
        image_factory (callable): Renders the image given the overlay
    """

    def __init__(self, facts: ObservationFacts,
                 overlay_factory: Callable[[], OverlayPrimitiveSet],
                 image_factory: Callable[[OverlayPrimitiveSet], object]):
        self.facts = facts
        self._overlay_factory = overlay_factory
        self._image_factory = image_factory

    @property
    def camera_pose(self) -> Pose:
        return self.facts.camera_pose

    @cached_property
    def overlay(self) -> OverlayPrimitiveSet:
        return self._overlay_factory()

    @cached_property
    def image(self):
        return self._image_factory(self.overlay)
