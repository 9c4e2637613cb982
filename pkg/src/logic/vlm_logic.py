"""
VLM Logic

Remote perception agent over a chat-completions compatible endpoint: prompt
rendering, strict reply parsing, bounded re-prompting, transcripts and
the analyzer / policy adapters used by the episode loop.
"""

from __future__ import annotations

import json
import logging
import os
import re
import time
from pathlib import Path
from typing import List, Optional

import openai
from jinja2 import Environment, FileSystemLoader, StrictUndefined

import config
from src.logic.actionspace_logic import ActionSpaceLogic
from src.logic.agent_logic import Analyzer, KnowledgeLogic, Policy
from src.logic.grid_logic import GridLogic
from src.logic.scene_logic import SceneLogic
from src.models.action_model import (
    ALLOWED_ROTATIONS,
    Action,
    ActionSpaceRules,
    ContinuousPoint,
    Rejection,
    RejectionReason,
    VertexTarget,
)
from src.models.agent_model import MALFORMED_REPLY, Answer, EnhancedObservation, Knowledge, Query
from src.models.geometry_model import Vec3
from src.models.grid_model import GridDimensionality
from src.models.vlm_model import ActionProposal, EndpointConfig, Exchange, ParsedReply, PromptBundle, PromptImage
from src.utils.errors import EndpointUnavailable, ProposalRejected
from src.utils.helpers import sha256_hex, validate_fraction

logger = logging.getLogger(__name__)

TEMPLATE_NAMES = (
    'analysis_system.j2', 'analysis_user.j2', 'action_system.j2',
    'action_user.j2', 'format_reminder.j2', 'rejection.j2',
)

_NUMBER = r'[-+]?(?:\d+\.?\d*|\.\d+)'
_SEP = r'\s*[;,]\s*'
_ANSWERABLE = re.compile(r'^\s*\**ANSWERABLE\**\s*:\s*\**\s*(yes|no)\b', re.IGNORECASE | re.MULTILINE)
_ANSWER = re.compile(r'^\s*\**ANSWER\**\s*:[ \t]*(.*)$', re.IGNORECASE | re.MULTILINE)
_CONFIDENCE = re.compile(r'^\s*\**CONFIDENCE\**\s*:\s*\**\s*(' + _NUMBER + r')', re.IGNORECASE | re.MULTILINE)
_TARGET = re.compile(r'TARGET\s*:\s*\(\s*(' + _NUMBER + ')' + _SEP + '(' + _NUMBER + ')' + _SEP
                     + '(' + _NUMBER + r')\s*\)', re.IGNORECASE)
_VERTEX = re.compile(r'VERTEX\s*:\s*\(\s*(' + _NUMBER + ')' + _SEP + '(' + _NUMBER + ')(?:' + _SEP
                     + '(' + _NUMBER + r'))?\s*\)', re.IGNORECASE)
_ROT_X = re.compile(r'ROT_X\s*:\s*(' + _NUMBER + ')', re.IGNORECASE)
_ROT_Y = re.compile(r'ROT_Y\s*:\s*(' + _NUMBER + ')', re.IGNORECASE)

_environment = Environment(
    loader=FileSystemLoader(config.PROMPT_FOLDER),
    undefined=StrictUndefined,
    keep_trailing_newline=True,
    autoescape=False,
)


def template_hash() -> str:
    """Hash over every prompt template, recorded in transcript headers."""
    sources = []
    for name in TEMPLATE_NAMES:
        source, _, _ = _environment.loader.get_source(_environment, name)
        sources.append(f"{name}\n{source}")
    return sha256_hex('\n'.join(sources))


def render_template(name: str, **context) -> str:
    return _environment.get_template(name).render(**context).strip()


# ------------------------------------------------------------------- parsing

def parse_analysis_reply(text: str) -> ParsedReply:
    """Parse an ANSWERABLE / ANSWER / CONFIDENCE block.

    Args:
        text (str): Raw model reply

    Returns:
        ParsedReply: answer set on success, error set otherwise
    """
    raw = text if isinstance(text, str) else ''
    answerable = _ANSWERABLE.search(raw)
    confidence = _CONFIDENCE.search(raw)
    if answerable is None:
        return ParsedReply(raw, error='missing ANSWERABLE line')
    if confidence is None:
        return ParsedReply(raw, error='missing CONFIDENCE line')

    value = validate_fraction(confidence.group(1))
    if value is None:
        return ParsedReply(raw, error=f"CONFIDENCE {confidence.group(1)} outside [0, 1]")

    answer_match = _ANSWER.search(raw)
    answer_text = answer_match.group(1).strip().strip('*').strip() if answer_match else ''
    if answerable.group(1).lower() == 'yes':
        if not answer_text:
            return ParsedReply(raw, error='ANSWERABLE is yes but ANSWER is empty')
        return ParsedReply(raw, answer=Answer(True, answer_text, value))
    return ParsedReply(raw, answer=Answer(False, answer_text, value))


def parse_action_reply(text: str) -> ParsedReply:
    """Parse a TARGET or VERTEX line plus optional ROT_X / ROT_Y lines.

    Coordinates may be separated by ";" or "," with any whitespace.

    Args:
        text (str): Raw model reply

    Returns:
        ParsedReply: proposal set on success, error set otherwise
    """
    raw = text if isinstance(text, str) else ''
    target = _TARGET.search(raw)
    vertex = _VERTEX.search(raw)
    if target is not None:
        proposal_kind, coords = 'target', tuple(float(g) for g in target.groups())
    elif vertex is not None:
        proposal_kind, coords = 'vertex', tuple(float(g) for g in vertex.groups() if g is not None)
    else:
        return ParsedReply(raw, error='missing TARGET or VERTEX line')

    rotations = []
    for pattern, axis in ((_ROT_X, 'ROT_X'), (_ROT_Y, 'ROT_Y')):
        match = pattern.search(raw)
        value = float(match.group(1)) if match else 0.0
        if value not in ALLOWED_ROTATIONS:
            return ParsedReply(raw, error=f'{axis} must be one of -35, 0 or 35, got {value:g}')
        rotations.append(value)
    return ParsedReply(raw, proposal=ActionProposal(proposal_kind, coords, rotations[0], rotations[1]))


def proposal_to_action(proposal: ActionProposal, rules: ActionSpaceRules):
    """Map a parsed proposal onto the active rules.

    Returns:
        Action | Rejection: Rejection(OutOfBounds) when a label names no vertex
    """
    coords = proposal.coords
    rotations = (proposal.rot_x_deg, proposal.rot_y_deg)
    if rules.allows_continuous:
        if len(coords) != 3:
            return Rejection(RejectionReason.WRONG_TARGET_TYPE, "Give the target as (x; y; z)")
        return Action(ContinuousPoint(Vec3(*coords)), *rotations)

    z = coords[2] if len(coords) == 3 else None
    if rules.grid.dimensionality == GridDimensionality.THREE_D and z is None:
        return Rejection(RejectionReason.WRONG_TARGET_TYPE, "Give the vertex as (x; y; z)")
    vertex = GridLogic.vertex_from_label(rules.grid, coords[0], coords[1], z)
    if vertex is None:
        return Rejection(RejectionReason.OUT_OF_BOUNDS, f"No grid vertex at {coords}")
    return Action(VertexTarget(vertex.index), *rotations)


# ---------------------------------------------------------------- transcripts

class TranscriptWriter:
    """Append-only JSON-lines transcript; the header is written on open."""

    def __init__(self, path, endpoint: EndpointConfig, episode_id: str = ''):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        header = {
            'type': 'header',
            'episode_id': episode_id,
            'template_hash': template_hash(),
            'model_name': endpoint.model_name,
            'base_url': endpoint.base_url,
            'temperature': endpoint.temperature,
        }
        with open(self.path, 'w', encoding='utf-8') as handle:
            handle.write(json.dumps(header, sort_keys=True) + '\n')

    def append(self, exchange: Exchange):
        with open(self.path, 'a', encoding='utf-8') as handle:
            handle.write(json.dumps(exchange.to_dict(), sort_keys=True) + '\n')


def record_transcript(path, endpoint: EndpointConfig, episode_id: str, exchanges) -> Path:
    """Write a complete transcript for a list of exchanges."""
    writer = TranscriptWriter(path, endpoint, episode_id)
    for exchange in exchanges:
        writer.append(exchange)
    return writer.path


def replay_transcript(path) -> List[dict]:
    """Re-parse every recorded raw reply.

    Args:
        path (str | Path): Transcript file

    Returns:
        list: One dict per exchange with keys 'recorded', 'replayed' and 'match'
    """
    results = []
    with open(path, 'r', encoding='utf-8') as handle:
        for line in handle:
            if not line.strip():
                continue
            record = json.loads(line)
            if record.get('type') != 'exchange':
                continue
            parser = parse_analysis_reply if record['role'] == 'analysis' else parse_action_reply
            replayed = parser(record['raw_reply']).to_dict()
            recorded = record['parsed']
            results.append({
                'recorded': recorded,
                'replayed': replayed,
                'match': json.dumps(recorded, sort_keys=True) == json.dumps(replayed, sort_keys=True),
            })
    return results


# --------------------------------------------------------------------- client

def _request_hash(messages) -> str:
    """Hash of a request with image payloads replaced by their content hashes."""
    def strip(part):
        if isinstance(part, dict) and part.get('type') == 'image_url':
            return {'type': 'image_url', 'image_sha256': sha256_hex(part['image_url']['url'])}
        return part

    normalized = []
    for message in messages:
        content = message['content']
        if isinstance(content, list):
            content = [strip(p) for p in content]
        normalized.append({'role': message['role'], 'content': content})
    return sha256_hex(json.dumps(normalized, sort_keys=True))


class VlmClient:
    """Chat-completions client implementing the analyzer and policy requests.

    Args:
        endpoint (EndpointConfig): Endpoint settings
        transcript_path (str | Path): Optional transcript file
        episode_id (str): Recorded in the transcript header
        client (openai.OpenAI): Injected SDK client, built from endpoint when omitted
    """

    def __init__(self, endpoint: EndpointConfig, transcript_path=None, episode_id: str = '', client=None):
        self.endpoint = endpoint
        api_key = os.environ.get(endpoint.api_key_env_var, '')
        if not api_key:
            logger.warning("Environment variable %s is not set; sending requests without a key",
                           endpoint.api_key_env_var)
        # Retries are handled here so every attempt is logged and counted
        self._client = client or openai.OpenAI(
            api_key=api_key or 'unset',
            base_url=endpoint.base_url,
            timeout=endpoint.timeout,
            max_retries=0,
        )
        self.transcript = TranscriptWriter(transcript_path, endpoint, episode_id) if transcript_path else None
        self.exchanges: List[Exchange] = []

    def complete(self, messages) -> str:
        """Send one chat completion with transport retries.

        Raises:
            EndpointUnavailable: After 1 + max_retries failed attempts
        """
        last_error = None
        for attempt in range(self.endpoint.attempts):
            try:
                response = self._client.chat.completions.create(
                    model=self.endpoint.model_name,
                    messages=messages,
                    temperature=self.endpoint.temperature,
                )
                choices = getattr(response, 'choices', None)
                if not choices:
                    raise EndpointUnavailable("Endpoint returned no choices")
                return choices[0].message.content or ''
            except openai.APIError as exc:
                last_error = exc
                logger.warning("Chat completion attempt %d/%d failed: %s",
                               attempt + 1, self.endpoint.attempts, exc)
                if attempt + 1 < self.endpoint.attempts and self.endpoint.backoff:
                    time.sleep(self.endpoint.backoff * (attempt + 1))
        raise EndpointUnavailable(
            f"{self.endpoint.base_url} unavailable after {self.endpoint.attempts} attempts: {last_error}")

    def _record(self, role, attempt, messages, bundle, raw, parsed: ParsedReply, rejection=None):
        exchange = Exchange(role, attempt, _request_hash(messages), tuple(bundle.image_hashes),
                            raw, parsed.to_dict(), rejection)
        self.exchanges.append(exchange)
        if self.transcript is not None:
            self.transcript.append(exchange)

    def request_analysis(self, bundle: PromptBundle) -> Answer:
        """Ask whether the observation answers the query.

        Malformed replies are re-prompted with a format reminder; when the
        budget runs out the answer is inconclusive and flagged MalformedReply.

        Raises:
            EndpointUnavailable: On transport failure
        """
        messages = bundle.to_messages()
        for attempt in range(self.endpoint.attempts):
            raw = self.complete(messages)
            parsed = parse_analysis_reply(raw)
            self._record('analysis', attempt, messages, bundle, raw, parsed)
            if parsed.ok:
                return parsed.answer
            logger.debug("Malformed analysis reply (%s), re-prompting", parsed.error)
            messages = messages + [
                {'role': 'assistant', 'content': raw},
                {'role': 'user', 'content': render_template('format_reminder.j2', error=parsed.error)},
            ]
        logger.warning("Analysis reply stayed malformed after %d attempts", self.endpoint.attempts)
        return Answer.inconclusive(MALFORMED_REPLY)

    def request_action(self, bundle: PromptBundle, rules: ActionSpaceRules, visited) -> Action:
        """Ask for the next action, re-prompting on malformed or invalid proposals.

        Args:
            bundle (PromptBundle): Rendered policy prompt
            rules (ActionSpaceRules): Active rules
            visited (set): Visited vertices

        Returns:
            Action: An action that passes validate

        Raises:
            EndpointUnavailable: On transport failure
            ProposalRejected: When every attempt was malformed or invalid
        """
        if not rules.allows_movement:
            raise ValueError(f"{rules.kind.value} does not allow actions")
        messages = bundle.to_messages()
        reasons = []
        for attempt in range(self.endpoint.attempts):
            raw = self.complete(messages)
            parsed = parse_action_reply(raw)
            if not parsed.ok:
                self._record('action', attempt, messages, bundle, raw, parsed)
                reasons.append(MALFORMED_REPLY)
                follow_up = render_template('format_reminder.j2', error=parsed.error)
            else:
                action = proposal_to_action(parsed.proposal, rules)
                verdict = action if isinstance(action, Rejection) else ActionSpaceLogic.validate(rules, action, visited)
                if not isinstance(verdict, Rejection):
                    self._record('action', attempt, messages, bundle, raw, parsed)
                    return action
                self._record('action', attempt, messages, bundle, raw, parsed, verdict.reason.value)
                reasons.append(verdict.reason.value)
                logger.debug("Proposal rejected (%s), re-prompting", verdict.reason.value)
                follow_up = render_template('rejection.j2', reason=verdict.reason.value, detail=verdict.detail)
            messages = messages + [
                {'role': 'assistant', 'content': raw},
                {'role': 'user', 'content': follow_up},
            ]
        raise ProposalRejected(f"No valid proposal after {self.endpoint.attempts} attempts", reasons)


# ----------------------------------------------------------------- prompts

def _grid_heights(rules: ActionSpaceRules) -> str:
    nx, ny, k_first, k_last = GridLogic.shape(rules.grid)
    heights = [rules.grid.anchor.z + k * rules.grid.spacing_z for k in range(k_first, k_last + 1)]
    return ', '.join(f"{h:.1f}" for h in heights)


def build_analysis_bundle(query: Query, obs: EnhancedObservation, annotated: bool = True) -> PromptBundle:
    system = render_template('analysis_system.j2', annotated=annotated)
    user = render_template('analysis_user.j2', query=query.text, position=obs.camera_pose.position.to_list())
    image = PromptImage('current view', SceneLogic.png_bytes(obs.image))
    return PromptBundle('analysis', system, user, (image,))


def build_action_bundle(query: Query, obs: EnhancedObservation, knowledge: Knowledge,
                        home_obs: Optional[EnhancedObservation], rules: ActionSpaceRules) -> PromptBundle:
    """Render the policy prompt from eta (system text) and kappa (visited list)."""
    eta = knowledge.eta
    visited = []
    for fact in knowledge.kappa:
        if fact.vertex is None:
            continue
        p = GridLogic.vertex_position(rules.grid, fact.vertex)
        visited.append(f"({p.x:.1f}; {p.y:.1f}; {p.z:.1f})")

    system = render_template(
        'action_system.j2',
        workspace_min=eta.workspace_min.to_list(),
        workspace_max=eta.workspace_max.to_list(),
        annotated=rules.annotated,
        heights=_grid_heights(rules),
        spacing_xy=rules.grid.spacing_xy,
        rules_text=eta.rules_text,
        continuous=rules.allows_continuous,
        three_d=rules.grid.dimensionality == GridDimensionality.THREE_D,
        rot_x=rules.allows_rot_x,
        rot_y=rules.allows_rot_y,
    )
    user = render_template('action_user.j2', query=query.text, position=obs.camera_pose.position.to_list(),
                           visited=visited, include_home=home_obs is not None)
    images = []
    if home_obs is not None:
        images.append(PromptImage('home view', SceneLogic.png_bytes(home_obs.image)))
    images.append(PromptImage('current view', SceneLogic.png_bytes(obs.image)))
    return PromptBundle('action', system, user, tuple(images), tuple(visited))


class VlmAnalyzer(Analyzer):
    name = 'vlm'

    def __init__(self, client: VlmClient, annotated: bool = True):
        self.client = client
        self.annotated = annotated

    def analyze(self, query: Query, obs: EnhancedObservation) -> Answer:
        return self.client.request_analysis(build_analysis_bundle(query, obs, self.annotated))


class VlmPolicy(Policy):
    name = 'vlm'

    def __init__(self, client: VlmClient):
        self.client = client

    def propose_action(self, x_t, obs, knowledge, home_obs, rules):
        query = Query(knowledge.eta.goal)
        bundle = build_action_bundle(query, obs, knowledge, home_obs, rules)
        action = self.client.request_action(bundle, rules, KnowledgeLogic.visited(knowledge))
        return action, KnowledgeLogic.record_action(knowledge, rules, action, 'vlm proposal')
