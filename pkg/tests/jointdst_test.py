"""Tests for jointdst, the top-level import."""

import jointdst


def test_version() -> None:
    assert isinstance(jointdst.__version__, str)
