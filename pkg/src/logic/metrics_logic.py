"""
Metrics Logic

Answer adjudication, the six evaluation metrics and report emission.
"""

from __future__ import annotations

import csv
import io
import logging
from typing import Dict, List, Optional, Sequence

import numpy as np

import config
from src.logic.geometry_logic import GeometryLogic
from src.models.action_model import ALL_KINDS
from src.models.agent_model import Answer
from src.models.episode_model import EpisodeResult, TerminationReason
from src.models.metrics_model import CellMetrics, ComparisonRow, MetricsRow, TrialOutcome
from src.models.scene_model import SceneSpec
from src.utils.helpers import normalize_text

logger = logging.getLogger(__name__)

CSV_HEADER = ['scene', 'action_space', 'trials', 'sr', 'tlp', 'tlps', 'pe', 'oe', 'osr']
METRIC_COLUMNS = ('SR', 'TLP', 'TLPS', 'PE', 'OE', 'OSR')
ABSENT = '--'
SPACE_ORDER = [k.value for k in ALL_KINDS] + ['fixed-views']

REPORT_NOTES = (
    "OSR is reported as a fraction of trials in [0, 1].",
    "NAP never moves, so its TLP is 0 by construction.",
    "OE is shown as -- for action spaces without rotations.",
)
GREEDY_NOTE = "The greedy policy is a scripted baseline that knows the hidden attribute, not a learned agent."


class MetricsLogic:
    """Business logic for evaluation metrics."""

    @staticmethod
    def correctness(answer: Answer, truth: str) -> bool:
        """True when the answer is conclusive and contains the normalized truth.

        Args:
            answer (Answer): Analyzer answer
            truth (str): Expected answer text

        Returns:
            bool: Whether the answer counts as correct
        """
        if not answer.conclusive:
            return False
        expected = normalize_text(truth)
        return bool(expected) and expected in normalize_text(answer.text)

    @staticmethod
    def trial_outcome(result: EpisodeResult, scene: SceneSpec) -> TrialOutcome:
        """Score an episode; only a confident conclusive stop can be correct."""
        stopped = result.terminated_by == TerminationReason.CONCLUSIVE_ANSWER
        correct = stopped and MetricsLogic.correctness(result.final_answer, scene.truth_answer)
        return TrialOutcome(result, correct, scene.goal_pose)

    @staticmethod
    def compute_metrics(trials: Sequence[TrialOutcome], osr_margin: float = config.OSR_MARGIN) -> MetricsRow:
        """Aggregate SR, TLP, TLPS, PE, OE and OSR over trials.

        Args:
            trials (list): TrialOutcome objects
            osr_margin (float): Oracle success margin in meters, inclusive

        Returns:
            MetricsRow: The aggregated metrics

        Raises:
            ValueError: For an empty trial list or a non-positive margin
        """
        if not trials:
            raise ValueError("compute_metrics needs at least one trial")
        if osr_margin <= 0:
            raise ValueError("osr_margin must be positive")

        lengths = np.array([t.episode.trajectory_length for t in trials])
        correct = np.array([t.correct for t in trials], dtype=bool)
        position_errors = [t.episode.final_pose.position.distance_to(t.goal_pose.position) for t in trials]
        rotation_trials = [t for t in trials if t.has_rotation]
        oe = None
        if rotation_trials:
            oe = float(np.mean([GeometryLogic.quat_angle_deg(t.episode.final_pose.orientation,
                                                              t.goal_pose.orientation)
                                for t in rotation_trials]))

        def closest(t: TrialOutcome) -> float:
            goal = t.goal_pose.position
            return min(p.distance_to(goal) for p in t.episode.trajectory)

        oracle_hits = [closest(t) <= osr_margin + 1e-12 for t in trials]
        return MetricsRow(
            sr=float(correct.mean()),
            tlp=float(lengths.mean()),
            tlps=float(lengths[correct].mean()) if correct.any() else 0.0,
            pe=float(np.mean(position_errors)),
            oe=oe,
            osr=float(np.mean(oracle_hits)),
            trials=len(trials),
        )

    @staticmethod
    def sort_cells(rows: Sequence[CellMetrics], scene_order: Optional[Sequence[str]] = None) -> List[CellMetrics]:
        scenes = list(scene_order) if scene_order else sorted({r.scene_id for r in rows})

        def key(r: CellMetrics):
            space = SPACE_ORDER.index(r.action_space) if r.action_space in SPACE_ORDER else len(SPACE_ORDER)
            scene = scenes.index(r.scene_id) if r.scene_id in scenes else len(scenes)
            return scene, space, r.action_space

        return sorted(rows, key=key)

    @staticmethod
    def emit_report(rows: Sequence[CellMetrics], fmt: str = 'markdown',
                    notes: Sequence[str] = REPORT_NOTES) -> str:
        """Render metric rows as CSV or as a grouped markdown table.

        The markdown table has one row per action space and one block of
        metric columns per scene; CSV has one line per (scene, space) cell.

        Args:
            rows (list): CellMetrics in any order
            fmt (str): "csv" or "markdown"
            notes (list): Footnotes appended to the markdown table

        Returns:
            str: The report text
        """
        scene_order = list(dict.fromkeys(r.scene_id for r in rows))
        ordered = MetricsLogic.sort_cells(rows, scene_order)
        if fmt == 'csv':
            return _csv_report(ordered)
        if fmt != 'markdown':
            raise ValueError(f"Unknown report format '{fmt}'")
        return _markdown_report(ordered, scene_order, notes)

    @staticmethod
    def emit_comparison(rows: Sequence[ComparisonRow]) -> str:
        """Markdown table of fixed-views versus active success counts, "k/N"."""
        lines = ["| Scene | Fixed views | Active (3Dx) |", "|---|---|---|"]
        for row in rows:
            lines.append(f"| {row.scene_id} | {row.fixed_successes}/{row.trials} | "
                         f"{row.active_successes}/{row.trials} |")
        return '\n'.join(lines) + '\n'


def format_value(value: Optional[float]) -> str:
    return ABSENT if value is None else f"{value:.2f}"


def _csv_report(rows: Sequence[CellMetrics]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(CSV_HEADER)
    for cell in rows:
        r = cell.row
        writer.writerow([cell.scene_id, cell.action_space, r.trials, f"{r.sr:.4f}", f"{r.tlp:.4f}",
                         f"{r.tlps:.4f}", f"{r.pe:.4f}", ABSENT if r.oe is None else f"{r.oe:.4f}",
                         f"{r.osr:.4f}"])
    return buffer.getvalue()


def _markdown_report(rows: Sequence[CellMetrics], scene_order: Sequence[str], notes: Sequence[str]) -> str:
    by_cell: Dict[tuple, MetricsRow] = {(c.scene_id, c.action_space): c.row for c in rows}
    spaces = sorted({c.action_space for c in rows},
                    key=lambda s: (SPACE_ORDER.index(s) if s in SPACE_ORDER else len(SPACE_ORDER), s))

    header = ['Action space']
    for scene_id in scene_order:
        header.extend(f"{scene_id} {m}" for m in METRIC_COLUMNS)
    lines = ['| ' + ' | '.join(header) + ' |', '|' + '---|' * len(header)]
    for space in spaces:
        cells = [space]
        for scene_id in scene_order:
            row = by_cell.get((scene_id, space))
            if row is None:
                cells.extend([ABSENT] * len(METRIC_COLUMNS))
                continue
            cells.extend([format_value(row.sr), format_value(row.tlp), format_value(row.tlps),
                          format_value(row.pe), format_value(row.oe), format_value(row.osr)])
        lines.append('| ' + ' | '.join(cells) + ' |')

    if rows and notes:
        lines.append('')
        lines.extend(f"{n}. {text}" for n, text in enumerate(notes, start=1))
    return '\n'.join(lines) + '\n'
