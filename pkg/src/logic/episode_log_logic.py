"""
Episode Log Logic

JSON-lines episode logs: a header line, one line per step written as the
step happens, and a closing result line. A log without its result line
comes from an interrupted run.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from src.models.episode_model import EpisodeConfig, EpisodeLog, EpisodeResult, StepRecord, TerminationReason
from src.models.geometry_model import Vec3
from src.utils.errors import LogCorrupt

logger = logging.getLogger(__name__)

LOG_VERSION = 1
TOLERANCE = 1e-9


class EpisodeLogWriter:
    """Incremental writer; each line is flushed as soon as it is written.

    Args:
        path (str | Path): Target .jsonl file
        header (dict): Header fields (scene_id, action_space, seed, ...)
    """

    def __init__(self, path, header: dict):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._handle = open(self.path, 'w', encoding='utf-8')
        self._write({'type': 'header', 'version': LOG_VERSION, **header})

    def _write(self, payload: dict):
        self._handle.write(json.dumps(payload, sort_keys=True) + '\n')
        self._handle.flush()

    def write_step(self, step: StepRecord):
        self._write({'type': 'step', **step.to_dict()})

    def write_result(self, result: EpisodeResult):
        self._write({'type': 'result', **result.result_dict()})

    def close(self):
        if not self._handle.closed:
            self._handle.close()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()
        return False


class EpisodeLogLogic:
    """Reading and checking episode logs."""

    @staticmethod
    def header_for(scene, rules_kind: str, cfg: EpisodeConfig, agent: str, trial: int) -> dict:
        return {
            'scene_id': scene.scene_id,
            'action_space': rules_kind,
            'agent': agent,
            'trial': trial,
            'seed': cfg.random_seed,
            'config': cfg.to_dict(),
            'home_position': scene.home_pose.position.to_list(),
        }

    @staticmethod
    def write_episode(path, header: dict, result: EpisodeResult) -> Path:
        """Write a finished episode in one go."""
        with EpisodeLogWriter(path, header) as writer:
            for step in result.steps:
                writer.write_step(step)
            writer.write_result(result)
        return Path(path)

    @staticmethod
    def read_log(path) -> EpisodeLog:
        """Parse an episode log.

        Args:
            path (str | Path): The .jsonl file

        Returns:
            EpisodeLog: Parsed log, result None when truncated

        Raises:
            LogCorrupt: When the file is unreadable or structurally invalid
        """
        try:
            text = Path(path).read_text(encoding='utf-8')
        except OSError as exc:
            raise LogCorrupt('readable', f"cannot read {path}: {exc}") from exc

        lines = text.splitlines()
        records = []
        for number, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                # A partial final line is what an interrupted write leaves behind
                if number == len(lines) and not text.endswith('\n'):
                    logger.warning("Ignoring partial last line of %s", path)
                    break
                raise LogCorrupt('json', f"line {number} is not valid JSON: {exc}") from exc

        if not records or records[0].get('type') != 'header':
            raise LogCorrupt('header', "first line must be the header")
        header = records[0]
        steps = []
        result = None
        for record in records[1:]:
            kind = record.get('type')
            if result is not None:
                raise LogCorrupt('result-last', "lines found after the result line")
            try:
                if kind == 'step':
                    steps.append(StepRecord.from_dict(record))
                elif kind == 'result':
                    TerminationReason(record['terminated_by'])
                    result = record
                else:
                    raise LogCorrupt('line-type', f"unknown line type '{kind}'")
            except (KeyError, TypeError, ValueError) as exc:
                raise LogCorrupt('schema', f"malformed {kind} line: {exc!r}") from exc

        log = EpisodeLog(header, tuple(steps), result)
        if log.truncated:
            logger.warning("Episode log %s has no result line; the run was interrupted", path)
        return log

    @staticmethod
    def verify_log(path) -> EpisodeLog:
        """Read a log and check its invariants.

        Checked: consecutive step indices, segment lengths against the step
        poses, pose continuity from home, no revisited vertex, the iteration
        cap, trajectory length against the summed segments and the confidence
        threshold of a conclusive stop.

        Returns:
            EpisodeLog: The verified log

        Raises:
            LogCorrupt: Naming the first failing invariant
        """
        log = EpisodeLogLogic.read_log(path)
        header = log.header
        cfg = EpisodeConfig.from_dict(header.get('config', {}))
        moving = header.get('action_space') != 'fixed-views'
        home = Vec3.from_array(header['home_position']) if 'home_position' in header else None

        if len(log.steps) > cfg.max_iterations:
            raise LogCorrupt('iteration-cap', f"{len(log.steps)} steps exceed max_iterations={cfg.max_iterations}")

        seen = set()
        previous = None
        for expected, step in enumerate(log.steps):
            if step.index != expected:
                raise LogCorrupt('step-order', f"expected step {expected}, found {step.index}")
            distance = step.pose_before.position.distance_to(step.pose_after.position)
            if abs(distance - step.segment_length) > TOLERANCE:
                raise LogCorrupt('segment-length',
                                 f"step {step.index} records {step.segment_length}, poses are {distance} apart")
            if moving:
                start = previous.pose_after.position if previous is not None else home
                if start is not None and start.distance_to(step.pose_before.position) > TOLERANCE:
                    raise LogCorrupt('continuity', f"step {step.index} does not start where the last one ended")
            if step.vertex is not None:
                if step.vertex in seen:
                    raise LogCorrupt('revisit', f"vertex {tuple(step.vertex)} visited twice")
                seen.add(step.vertex)
            previous = step

        if log.result is not None:
            trajectory = [np.asarray(p, dtype=np.float64) for p in log.result['trajectory']]
            if home is not None and np.linalg.norm(trajectory[0] - home.as_array()) > TOLERANCE:
                raise LogCorrupt('trajectory-home', "trajectory does not start at the home position")
            polyline = sum(float(np.linalg.norm(b - a)) for a, b in zip(trajectory, trajectory[1:]))
            segments = sum(s.segment_length for s in log.steps) if moving else 0.0
            if abs(polyline - segments) > TOLERANCE:
                raise LogCorrupt('trajectory-length', f"polyline {polyline} != summed segments {segments}")
            if log.result['terminated_by'] == TerminationReason.CONCLUSIVE_ANSWER.value:
                confidence = float(log.result['final_answer'].get('confidence', 0.0))
                if confidence < cfg.confidence_threshold:
                    raise LogCorrupt('conclusive-threshold',
                                     f"confidence {confidence} below threshold {cfg.confidence_threshold}")
        return log

    @staticmethod
    def describe(log: EpisodeLog) -> str:
        """Human-readable replay of a log."""
        lines = [f"scene={log.header.get('scene_id')} space={log.header.get('action_space')} "
                 f"agent={log.header.get('agent', '')} seed={log.header.get('seed')}"]
        for step in log.steps:
            where = step.pose_before.position.to_list()
            move = ''
            if step.action is not None:
                move = f" -> {[round(c, 3) for c in step.pose_after.position.to_list()]}" \
                       f" rot=({step.action.rot_x_deg:+.0f}, {step.action.rot_y_deg:+.0f})"
            elif step.rejection:
                move = f" rejected: {step.rejection}"
            verdict = step.answer.text if step.answer.conclusive else 'inconclusive'
            lines.append(f"  [{step.index}] at {[round(c, 3) for c in where]}: {verdict}{move}")
        if log.result is None:
            lines.append("  (interrupted: no result line)")
        else:
            lines.append(f"  terminated_by={log.result['terminated_by']}")
        return '\n'.join(lines)

