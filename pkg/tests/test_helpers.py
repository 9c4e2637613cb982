"""Text and flag helpers."""

import pytest

from src.utils.helpers import normalize_text, parse_pose_flag, sha256_hex, validate_fraction


def test_normalize_text():
    assert normalize_text('  A Golf-Ball!  ') == 'a golf ball'
    assert normalize_text(None) == ''


@pytest.mark.parametrize('value, expected', [
    ('0.9', 0.9), (1, 1.0), ('0', 0.0), ('1.2', None), ('-0.1', None), ('high', None), (None, None),
])
def test_validate_fraction(value, expected):
    assert validate_fraction(value) == expected


def test_parse_pose_flag():
    assert parse_pose_flag('0.1, 0.1, 0.3, 35, 0') == (True, (0.1, 0.1, 0.3, 35.0, 0.0), None)
    ok, _, error = parse_pose_flag('0.1,0.1,0.3')
    assert not ok and 'five' in error
    ok, _, error = parse_pose_flag('a,b,c,d,e')
    assert not ok and 'numbers' in error
    ok, _, _ = parse_pose_flag('nan,0,0,0,0')
    assert not ok


def test_sha256_hex_accepts_text_and_bytes():
    assert sha256_hex('abc') == sha256_hex(b'abc')
    assert len(sha256_hex('abc')) == 64
