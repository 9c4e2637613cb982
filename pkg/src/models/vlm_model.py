"""
VLM Model

Endpoint configuration, prompt bundles, parsed replies and transcript
exchanges for the remote vision-language agent.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field
from typing import Optional, Tuple

import config
from src.models.agent_model import Answer
from src.utils.helpers import sha256_hex


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str = config.VLM_BASE_URL
    model_name: str = config.VLM_MODEL
    api_key_env_var: str = config.VLM_API_KEY_ENV
    timeout: float = config.VLM_TIMEOUT
    max_retries: int = config.VLM_MAX_RETRIES
    temperature: float = config.VLM_TEMPERATURE
    backoff: float = 1.0

    def __post_init__(self):
        if not self.base_url or not self.base_url.strip():
            raise ValueError("base_url must not be empty")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be non-negative")
        if self.backoff < 0:
            raise ValueError("backoff must be non-negative")

    @property
    def attempts(self) -> int:
        return 1 + self.max_retries

    def to_dict(self):
        return {
            'base_url': self.base_url,
            'model_name': self.model_name,
            'api_key_env_var': self.api_key_env_var,
            'timeout': self.timeout,
            'max_retries': self.max_retries,
            'temperature': self.temperature,
            'backoff': self.backoff,
        }

    @classmethod
    def from_dict(cls, data) -> EndpointConfig:
        defaults = cls()
        return cls(
            base_url=str(data.get('base_url', defaults.base_url)),
            model_name=str(data.get('model_name', defaults.model_name)),
            api_key_env_var=str(data.get('api_key_env_var', defaults.api_key_env_var)),
            timeout=float(data.get('timeout', defaults.timeout)),
            max_retries=int(data.get('max_retries', defaults.max_retries)),
            temperature=float(data.get('temperature', defaults.temperature)),
            backoff=float(data.get('backoff', defaults.backoff)),
        )


@dataclass(frozen=True)
class PromptImage:
    name: str
    png: bytes

    @property
    def digest(self) -> str:
        return sha256_hex(self.png)

    def data_url(self) -> str:
        return 'data:image/png;base64,' + base64.b64encode(self.png).decode('ascii')


@dataclass(frozen=True)
class PromptBundle:
    """Rendered prompt for one request: system text, user text and attached images."""

    role: str
    system_text: str
    user_text: str
    images: Tuple[PromptImage, ...] = field(default_factory=tuple)
    visited_labels: Tuple[str, ...] = field(default_factory=tuple)

    def to_messages(self):
        """Chat-completions messages with image-content parts."""
        content = [{'type': 'text', 'text': self.user_text}]
        for image in self.images:
            content.append({'type': 'text', 'text': f"Image: {image.name}"})
            content.append({'type': 'image_url', 'image_url': {'url': image.data_url()}})
        return [
            {'role': 'system', 'content': self.system_text},
            {'role': 'user', 'content': content},
        ]

    @property
    def image_hashes(self):
        return [image.digest for image in self.images]


@dataclass(frozen=True)
class ActionProposal:
    """Raw policy reply: a TARGET point or a VERTEX label plus rotations."""

    kind: str
    coords: Tuple[float, ...]
    rot_x_deg: float = 0.0
    rot_y_deg: float = 0.0

    def to_dict(self):
        return {
            'kind': self.kind,
            'coords': list(self.coords),
            'rot_x_deg': self.rot_x_deg,
            'rot_y_deg': self.rot_y_deg,
        }


@dataclass(frozen=True)
class ParsedReply:
    """Parser output; error is set when the reply does not follow the format."""

    raw_text: str
    answer: Optional[Answer] = None
    proposal: Optional[ActionProposal] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self):
        return {
            'answer': self.answer.to_dict() if self.answer is not None else None,
            'proposal': self.proposal.to_dict() if self.proposal is not None else None,
            'error': self.error,
        }


@dataclass(frozen=True)
class Exchange:
    """One request/response pair as stored in a transcript."""

    role: str
    attempt: int
    request_hash: str
    image_hashes: Tuple[str, ...]
    raw_reply: str
    parsed: dict
    rejection: Optional[str] = None

    def to_dict(self):
        return {
            'type': 'exchange',
            'role': self.role,
            'attempt': self.attempt,
            'request_hash': self.request_hash,
            'image_hashes': list(self.image_hashes),
            'raw_reply': self.raw_reply,
            'parsed': self.parsed,
            'rejection': self.rejection,
        }
