"""
Utilities Module

Common utility functions used across the application.
"""

import hashlib
import math
import re
import string
from typing import Optional, Tuple

_PUNCTUATION = re.compile(f"[{re.escape(string.punctuation)}]")
_WHITESPACE = re.compile(r"\s+")


def sanitize_input(input_str: Optional[str]) -> str:
    """Sanitize and clean input string.

    Args:
        input_str (str or None): Input string to sanitize

    Returns:
        str: Cleaned string
    """
    if not input_str:
        return ''
    return input_str.strip()


def normalize_text(text: Optional[str]) -> str:
    """Lowercase, strip punctuation and collapse whitespace.

    Punctuation is replaced by a space so that "golf-ball" and "golf ball"
    normalize to the same text.

    Args:
        text (str or None): Free text

    Returns:
        str: Normalized text
    """
    cleaned = _PUNCTUATION.sub(' ', sanitize_input(text).lower())
    return _WHITESPACE.sub(' ', cleaned).strip()


def validate_fraction(value) -> Optional[float]:
    """Validate and convert a value to a fraction in [0, 1].

    Args:
        value: Number or numeric string

    Returns:
        float or None: The fraction, None if invalid
    """
    try:
        number = float(value)
    except (ValueError, TypeError):
        return None
    if math.isfinite(number) and 0.0 <= number <= 1.0:
        return number
    return None


def sha256_hex(data) -> str:
    """Hex SHA-256 digest of bytes or text."""
    if isinstance(data, str):
        data = data.encode('utf-8')
    return hashlib.sha256(data).hexdigest()


def parse_pose_flag(pose_str: Optional[str]) -> Tuple[bool, Optional[tuple], Optional[str]]:
    """Parse the CLI pose flag "x,y,z,rx,ry" (meters, degrees).

    Args:
        pose_str (str): Comma separated pose

    Returns:
        tuple: (success: bool, values: tuple|None, error: str|None)
    """
    parts = [p for p in sanitize_input(pose_str).split(',')]
    if len(parts) != 5:
        return False, None, "Pose must have five comma separated values: x,y,z,rx,ry"
    try:
        values = tuple(float(p) for p in parts)
    except ValueError:
        return False, None, f"Pose values must be numbers, got {pose_str!r}"
    if not all(math.isfinite(v) for v in values):
        return False, None, "Pose values must be finite"
    return True, values, None
