"""
Metrics Model

Trial outcomes, per-cell metric rows and the experiment configuration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import config
from src.models.action_model import ActionSpaceKind
from src.models.episode_model import EpisodeConfig, EpisodeResult
from src.models.geometry_model import Pose

@dataclass(frozen=True)
class TrialOutcome:
    episode: EpisodeResult
    correct: bool
    goal_pose: Pose

    def __post_init__(self):
        if self.correct and not self.episode.final_answer.conclusive:
            raise ValueError("An inconclusive answer cannot be correct")

    @property
    def action_space(self) -> str:
        return self.episode.action_space

    @property
    def has_rotation(self) -> bool:
        return any(k.has_rotation and k.value == self.episode.action_space for k in ActionSpaceKind)


@dataclass(frozen=True)
class MetricsRow:
    """SR and OSR are fractions; TLP, TLPS and PE meters; OE degrees or None when absent."""

    sr: float
    tlp: float
    tlps: float
    pe: float
    oe: Optional[float]
    osr: float
    trials: int = 0

    def to_dict(self):
        return {
            'sr': self.sr, 'tlp': self.tlp, 'tlps': self.tlps, 'pe': self.pe,
            'oe': self.oe, 'osr': self.osr, 'trials': self.trials,
        }

    @classmethod
    def from_dict(cls, data) -> MetricsRow:
        oe = data.get('oe')
        return cls(float(data['sr']), float(data['tlp']), float(data['tlps']), float(data['pe']),
                   float(oe) if oe is not None else None, float(data['osr']), int(data.get('trials', 0)))


class CellMetrics(NamedTuple):
    scene_id: str
    action_space: str
    row: MetricsRow

    def to_dict(self):
        return {'scene_id': self.scene_id, 'action_space': self.action_space, **self.row.to_dict()}


class ComparisonRow(NamedTuple):
    """Fixed-views versus active success counts for one scene."""

    scene_id: str
    fixed_successes: int
    active_successes: int
    trials: int

    def to_dict(self):
        return self._asdict()


@dataclass(frozen=True)
class ExperimentConfig:
    """A sweep over scenes x action spaces x trials.

    Scene paths are resolved relative to the experiment file.
    """

    scenes: Tuple[str, ...]
    action_spaces: Tuple[str, ...] = ('NAP', '2DNA', '2DA', '3DD', '3DC', '3Dx', '3DxN', '3Dxy')
    trials: int = config.TRIALS_PER_CELL
    seed: int = 0
    analyzer: str = 'oracle'
    policy: str = 'greedy'
    osr_margin: float = config.OSR_MARGIN
    max_iterations: int = config.MAX_ITERATIONS
    confidence_threshold: float = config.CONFIDENCE_THRESHOLD
    marker_noise_std: float = config.MARKER_NOISE_STD
    workers: int = config.WORKERS
    endpoint: Optional[dict] = None
    name: str = 'experiment'

    def episode_config(self, trial: int) -> EpisodeConfig:
        """Episode settings for one trial; seeds are base seed plus trial index."""
        return EpisodeConfig(
            max_iterations=self.max_iterations,
            confidence_threshold=self.confidence_threshold,
            random_seed=self.seed + trial,
            marker_noise_std=self.marker_noise_std,
        )

    def to_dict(self):
        return {
            'name': self.name,
            'scenes': list(self.scenes),
            'action_spaces': list(self.action_spaces),
            'trials': self.trials,
            'seed': self.seed,
            'analyzer': self.analyzer,
            'policy': self.policy,
            'osr_margin': self.osr_margin,
            'max_iterations': self.max_iterations,
            'confidence_threshold': self.confidence_threshold,
            'marker_noise_std': self.marker_noise_std,
            'workers': self.workers,
            'endpoint': self.endpoint,
        }


@dataclass(frozen=True)
class ExperimentOutcome:
    """Everything a sweep produced: scored trials per cell and the aggregated rows."""

    config: ExperimentConfig
    cells: Tuple[CellMetrics, ...]
    trials: Tuple[TrialOutcome, ...]

    def to_dict(self):
        return {
            'experiment': self.config.to_dict(),
            'cells': [cell.to_dict() for cell in self.cells],
        }
