"""
Mock Endpoint Logic

Scripted replies for the local chat-completions endpoint used in tests and
offline development.
"""

from __future__ import annotations

import threading
import time
from collections import deque
from typing import List, Optional, Union

from src.utils.helpers import sha256_hex

DEFAULT_REPLY = "ANSWERABLE: no\nANSWER:\nCONFIDENCE: 0.0"

Reply = Union[str, int]


class MockScript:
    """Queue of canned replies; an int entry forces that HTTP status.

    Args:
        replies (list): Replies served in order
        default (str): Reply served once the queue is empty
    """

    def __init__(self, replies=None, default: str = DEFAULT_REPLY):
        self._replies = deque(replies or [])
        self.default = default
        self.requests: List[dict] = []
        self._lock = threading.Lock()

    def push(self, *replies: Reply):
        with self._lock:
            self._replies.extend(replies)

    def next_reply(self, request_body: dict) -> Reply:
        with self._lock:
            self.requests.append(request_body)
            return self._replies.popleft() if self._replies else self.default

    @property
    def pending(self) -> int:
        return len(self._replies)


class MockEndpointLogic:
    """Builds chat-completions response bodies."""

    @staticmethod
    def validate_request(body) -> Optional[str]:
        """Return an error message for a malformed request body, else None."""
        if not isinstance(body, dict):
            return "request body must be a JSON object"
        if not body.get('model'):
            return "'model' is required"
        messages = body.get('messages')
        if not isinstance(messages, list) or not messages:
            return "'messages' must be a non-empty list"
        for message in messages:
            if not isinstance(message, dict) or 'role' not in message or 'content' not in message:
                return "every message needs 'role' and 'content'"
        return None

    @staticmethod
    def completion_payload(model: str, text: str) -> dict:
        return {
            'id': 'chatcmpl-' + sha256_hex(text)[:24],
            'object': 'chat.completion',
            'created': int(time.time()),
            'model': model,
            'choices': [{
                'index': 0,
                'message': {'role': 'assistant', 'content': text},
                'finish_reason': 'stop',
            }],
            'usage': {'prompt_tokens': 0, 'completion_tokens': 0, 'total_tokens': 0},
        }

    @staticmethod
    def error_payload(status: int, message: str) -> dict:
        return {'error': {'message': message, 'type': 'mock_error', 'code': status}}

    @staticmethod
    def count_images(body: dict) -> int:
        count = 0
        for message in body.get('messages', []):
            content = message.get('content')
            if isinstance(content, list):
                count += sum(1 for part in content if isinstance(part, dict) and part.get('type') == 'image_url')
        return count
