"""
Experiment Logic

Seeded sweeps over scenes x action spaces x trials, incremental episode
logs, metric aggregation, report files and the fixed-views comparison.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional

from src.logic.actionspace_logic import ActionSpaceLogic
from src.logic.agent_logic import ANALYZER_NAMES, POLICY_NAMES, FixedViewsLogic, build_analyzer, build_policy
from src.logic.episode_log_logic import EpisodeLogLogic, EpisodeLogWriter
from src.logic.loop_logic import LoopLogic
from src.logic.metrics_logic import GREEDY_NOTE, REPORT_NOTES, MetricsLogic
from src.logic.scene_logic import SceneLogic
from src.models.action_model import ActionSpaceKind
from src.models.episode_model import EpisodeResult, TerminationReason
from src.models.metrics_model import (
    CellMetrics,
    ComparisonRow,
    ExperimentConfig,
    ExperimentOutcome,
    MetricsRow,
    TrialOutcome,
)
from src.models.scene_model import SceneSpec
from src.models.vlm_model import EndpointConfig
from src.utils.errors import ConfigError, EndpointUnavailable, SceneError

logger = logging.getLogger(__name__)

FIXED_VIEWS = 'fixed-views'
COMPARISON_SPACE = ActionSpaceKind.THREE_D_X.value


class TrialJob(NamedTuple):
    scene_id: str
    space: str
    trial: int
    policy: str


class ExperimentLogic:
    """Business logic for experiment sweeps."""

    @staticmethod
    def load_experiment(path):
        """Load and validate an experiment file.

        Args:
            path (str | Path): JSON experiment file

        Returns:
            tuple: (success: bool, config: ExperimentConfig | None, error: str | None)
        """
        try:
            with open(path, 'r', encoding='utf-8') as handle:
                data = json.load(handle)
        except OSError as exc:
            return False, None, f"Cannot read experiment file {path}: {exc}"
        except json.JSONDecodeError as exc:
            return False, None, f"Experiment file {path} is not valid JSON: {exc}"

        try:
            cfg = ExperimentLogic.experiment_from_dict(data, Path(path).resolve().parent)
        except ConfigError as exc:
            return False, None, str(exc)
        return True, cfg, None

    @staticmethod
    def experiment_from_dict(data, base_dir: Optional[Path] = None) -> ExperimentConfig:
        """Build an ExperimentConfig; scene paths are resolved against base_dir.

        Raises:
            ConfigError: On unknown names or out-of-range values
        """
        if not isinstance(data, dict):
            raise ConfigError("Experiment document must be a JSON object")
        scenes = data.get('scenes')
        if not isinstance(scenes, list) or not scenes:
            raise ConfigError("'scenes' must be a non-empty list of scene files")
        base = Path(base_dir) if base_dir is not None else Path.cwd()
        resolved = tuple(str(Path(s) if Path(s).is_absolute() else base / s) for s in scenes)

        defaults = ExperimentConfig(scenes=resolved)
        try:
            spaces = tuple(data.get('action_spaces', defaults.action_spaces))
            for space in spaces:
                ActionSpaceLogic.parse_kind(space)
            cfg = ExperimentConfig(
                scenes=resolved,
                action_spaces=spaces,
                trials=int(data.get('trials', defaults.trials)),
                seed=int(data.get('seed', defaults.seed)),
                analyzer=str(data.get('analyzer', defaults.analyzer)),
                policy=str(data.get('policy', defaults.policy)),
                osr_margin=float(data.get('osr_margin', defaults.osr_margin)),
                max_iterations=int(data.get('max_iterations', defaults.max_iterations)),
                confidence_threshold=float(data.get('confidence_threshold', defaults.confidence_threshold)),
                marker_noise_std=float(data.get('marker_noise_std', defaults.marker_noise_std)),
                workers=int(data.get('workers', defaults.workers)),
                endpoint=data.get('endpoint'),
                name=str(data.get('name', defaults.name)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"Invalid experiment value: {exc}") from exc

        ExperimentLogic.validate_experiment(cfg)
        return cfg

    @staticmethod
    def validate_experiment(cfg: ExperimentConfig) -> None:
        if cfg.analyzer not in ANALYZER_NAMES:
            raise ConfigError(f"Unknown analyzer '{cfg.analyzer}'")
        if cfg.policy not in POLICY_NAMES:
            raise ConfigError(f"Unknown policy '{cfg.policy}'")
        if not cfg.action_spaces and cfg.policy != FIXED_VIEWS:
            raise ConfigError("'action_spaces' must not be empty")
        if cfg.trials < 1:
            raise ConfigError("'trials' must be at least 1")
        if cfg.workers < 1:
            raise ConfigError("'workers' must be at least 1")
        if cfg.osr_margin <= 0:
            raise ConfigError("'osr_margin' must be positive")
        try:
            cfg.episode_config(0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if 'vlm' in (cfg.analyzer, cfg.policy):
            if not isinstance(cfg.endpoint, dict):
                raise ConfigError("The vlm agent needs an 'endpoint' section")
            try:
                EndpointConfig.from_dict(cfg.endpoint)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"Invalid endpoint section: {exc}") from exc

    @staticmethod
    def load_scenes(cfg: ExperimentConfig) -> Dict[str, SceneSpec]:
        """Load every scene up front so a bad file fails before any output exists.

        Raises:
            SceneError: For the first scene that does not load
        """
        scenes: Dict[str, SceneSpec] = {}
        for path in cfg.scenes:
            success, scene, error = SceneLogic.load_scene(path)
            if not success:
                raise SceneError(error)
            if scene.scene_id in scenes:
                raise SceneError(f"Duplicate scene id '{scene.scene_id}' in {path}")
            scenes[scene.scene_id] = scene
        return scenes

    @staticmethod
    def jobs(cfg: ExperimentConfig, scenes: Dict[str, SceneSpec]) -> List[TrialJob]:
        """Trial jobs in report order; the fixed-views policy has one cell per scene."""
        spaces = [FIXED_VIEWS] if cfg.policy == FIXED_VIEWS else list(cfg.action_spaces)
        return [TrialJob(scene_id, space, trial, cfg.policy)
                for scene_id in scenes for space in spaces for trial in range(cfg.trials)]

    @staticmethod
    def run_trial(job: TrialJob, scene: SceneSpec, cfg: ExperimentConfig,
                  out_dir: Optional[Path] = None) -> EpisodeResult:
        """Run one seeded episode, writing its log as it goes when out_dir is set."""
        episode_cfg = cfg.episode_config(job.trial)
        name = f"{job.scene_id}__{job.space}__t{job.trial:02d}"
        client = None
        if 'vlm' in (cfg.analyzer, job.policy):
            from src.logic.vlm_logic import VlmClient
            transcript = out_dir / 'transcripts' / f"{name}.jsonl" if out_dir is not None else None
            client = VlmClient(EndpointConfig.from_dict(cfg.endpoint), transcript, episode_id=name)

        if job.space == FIXED_VIEWS:
            analyzer = build_analyzer(cfg.analyzer, scene, client)
            result = FixedViewsLogic.run_fixed_views(scene, analyzer, scene.intrinsics, episode_cfg, job.trial)
            if out_dir is not None:
                header = EpisodeLogLogic.header_for(scene, FIXED_VIEWS, episode_cfg, result.agent, job.trial)
                EpisodeLogLogic.write_episode(out_dir / 'episodes' / f"{name}.jsonl", header, result)
            return result

        rules = ActionSpaceLogic.rules_for(ActionSpaceLogic.parse_kind(job.space), scene.grid)
        analyzer = build_analyzer(cfg.analyzer, scene, client, annotated=rules.annotated)
        policy = build_policy(job.policy, scene, seed=episode_cfg.random_seed, client=client) \
            if rules.allows_movement else None
        if out_dir is None:
            return LoopLogic.run_episode(scene, rules, analyzer, policy, episode_cfg, trial=job.trial)

        agent = f"{analyzer.name}+{policy.name if policy is not None else 'none'}"
        header = EpisodeLogLogic.header_for(scene, job.space, episode_cfg, agent, job.trial)
        with EpisodeLogWriter(out_dir / 'episodes' / f"{name}.jsonl", header) as writer:
            result = LoopLogic.run_episode(scene, rules, analyzer, policy, episode_cfg,
                                           on_step=writer.write_step, trial=job.trial)
            writer.write_result(result)
        return result

    @staticmethod
    def run_experiment(cfg: ExperimentConfig, out_dir=None) -> ExperimentOutcome:
        """Run the whole sweep and aggregate one metrics row per cell.

        Args:
            cfg (ExperimentConfig): The sweep
            out_dir (str | Path): Output directory for episode logs, None to skip

        Returns:
            ExperimentOutcome: Cells in report order plus every scored trial

        Raises:
            SceneError: When a scene fails to load (before any output is written)
            EndpointUnavailable: When a remote agent stays unreachable
        """
        scenes = ExperimentLogic.load_scenes(cfg)
        jobs = ExperimentLogic.jobs(cfg, scenes)
        out = Path(out_dir) if out_dir is not None else None
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
        logger.info("Experiment %s: %d episodes over %d scenes with %d workers",
                    cfg.name, len(jobs), len(scenes), cfg.workers)

        def work(job: TrialJob) -> EpisodeResult:
            return ExperimentLogic.run_trial(job, scenes[job.scene_id], cfg, out)

        if cfg.workers == 1:
            results = []
            for job in jobs:
                result = work(job)
                _fail_fast(result)
                results.append(result)
        else:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                futures = [pool.submit(work, job) for job in jobs]
                results = []
                try:
                    for future in futures:
                        result = future.result()
                        _fail_fast(result)
                        results.append(result)
                except BaseException:
                    for future in futures:
                        future.cancel()
                    raise

        grouped: Dict[tuple, List[TrialOutcome]] = defaultdict(list)
        outcomes = []
        for job, result in zip(jobs, results):
            outcome = MetricsLogic.trial_outcome(result, scenes[job.scene_id])
            grouped[(job.scene_id, job.space)].append(outcome)
            outcomes.append(outcome)

        cells = []
        for (scene_id, space), trials in grouped.items():
            row = MetricsLogic.compute_metrics(trials, cfg.osr_margin)
            cells.append(CellMetrics(scene_id, space, row))
            logger.info("Cell %s/%s done: SR=%.2f TLP=%.3f", scene_id, space, row.sr, row.tlp)
        ordered = MetricsLogic.sort_cells(cells, list(scenes))
        return ExperimentOutcome(cfg, tuple(ordered), tuple(outcomes))

    @staticmethod
    def report_notes(cfg: ExperimentConfig) -> List[str]:
        notes = list(REPORT_NOTES)
        if cfg.policy == 'greedy':
            notes.append(GREEDY_NOTE)
        return notes

    @staticmethod
    def write_outputs(outcome: ExperimentOutcome, out_dir) -> List[Path]:
        """Write metrics.json, report.md and report.csv.

        Returns:
            list: The written paths
        """
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        notes = ExperimentLogic.report_notes(outcome.config)
        files = {
            'metrics.json': json.dumps(outcome.to_dict(), indent=2, sort_keys=True) + '\n',
            'report.md': MetricsLogic.emit_report(outcome.cells, 'markdown', notes),
            'report.csv': MetricsLogic.emit_report(outcome.cells, 'csv'),
        }
        written = []
        for name, text in files.items():
            path = out / name
            path.write_text(text, encoding='utf-8')
            written.append(path)
            logger.info("Wrote %s", path)
        return written

    @staticmethod
    def read_metrics(path):
        """Read the cells back from a metrics.json file.

        Returns:
            tuple: (success: bool, cells: list | None, error: str | None)
        """
        try:
            with open(path, 'r', encoding='utf-8') as handle:
                data = json.load(handle)
            cells = [CellMetrics(c['scene_id'], c['action_space'], MetricsRow.from_dict(c))
                     for c in data['cells']]
        except OSError as exc:
            return False, None, f"Cannot read results file {path}: {exc}"
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            return False, None, f"Results file {path} is malformed: {exc!r}"
        return True, cells, None

    @staticmethod
    def run_comparison(cfg: ExperimentConfig, out_dir=None) -> List[ComparisonRow]:
        """Fixed views against the active 3Dx agent, cfg.trials trials of each per scene.

        The active side uses cfg.policy, or the greedy policy when the
        experiment names the fixed-views baseline.

        Returns:
            list: One ComparisonRow per scene, in file order
        """
        policy = cfg.policy if cfg.policy != FIXED_VIEWS else 'greedy'
        fixed = ExperimentLogic.run_experiment(dataclasses.replace(cfg, policy=FIXED_VIEWS), out_dir)
        active = ExperimentLogic.run_experiment(
            dataclasses.replace(cfg, policy=policy, action_spaces=(COMPARISON_SPACE,)), out_dir)

        def successes(outcome: ExperimentOutcome) -> Dict[str, int]:
            counts: Dict[str, int] = defaultdict(int)
            for trial in outcome.trials:
                counts[trial.episode.scene_id] += int(trial.correct)
            return counts

        fixed_counts, active_counts = successes(fixed), successes(active)
        scene_order = list(dict.fromkeys(c.scene_id for c in fixed.cells))
        return [ComparisonRow(s, fixed_counts[s], active_counts[s], cfg.trials) for s in scene_order]


def _fail_fast(result: EpisodeResult) -> None:
    if result.terminated_by == TerminationReason.AGENT_UNAVAILABLE:
        detail = '; '.join(result.notes) or 'agent unavailable'
        raise EndpointUnavailable(f"{result.scene_id}/{result.action_space} trial {result.trial}: {detail}")
