"""Tests for IOB tagging and slot value dropout."""

from __future__ import annotations

import numpy as np
import pytest

from jointdst.dialogue import EOS, OOV, SOS, SlotSpan
from jointdst.exceptions import SpanError
from jointdst.tagging import (
    apply_slot_value_dropout,
    decode_iob,
    derive_iob_tags,
    dropout_probability,
    iob_to_spans,
)

TOKENS = [SOS, "table", "for", "2", "at", "7", "pm", EOS]


def test_derive_iob_tags() -> None:
    spans = [SlotSpan("people", 3, 4), SlotSpan("time", 5, 7)]
    assert derive_iob_tags(TOKENS, spans) == [
        "O",
        "O",
        "O",
        "B-people",
        "O",
        "B-time",
        "I-time",
        "O",
    ]


def test_no_spans_all_outside() -> None:
    assert derive_iob_tags(TOKENS, []) == ["O"] * len(TOKENS)


@pytest.mark.parametrize(
    "spans",
    [
        [SlotSpan("time", 0, 2)],
        [SlotSpan("time", 6, 8)],
        [SlotSpan("time", 3, 3)],
        [SlotSpan("time", 2, 5), SlotSpan("people", 4, 6)],
    ],
)
def test_invalid_spans(spans: list[SlotSpan]) -> None:
    with pytest.raises(SpanError):
        derive_iob_tags(TOKENS, spans)


def test_decode_iob() -> None:
    tags = ["O", "O", "O", "B-people", "O", "B-time", "I-time", "O"]
    assert decode_iob(tags, TOKENS) == [("people", "2"), ("time", "7 pm")]


def test_decode_is_lenient() -> None:
    tags = ["O", "I-time", "I-time", "B-people", "I-time", "O", "O", "O"]
    assert iob_to_spans(tags) == [
        SlotSpan("time", 1, 3),
        SlotSpan("people", 3, 4),
        SlotSpan("time", 4, 5),
    ]


def test_decode_length_mismatch() -> None:
    with pytest.raises(ValueError, match="tags"):
        decode_iob(["O"], TOKENS)


def test_iob_round_trip() -> None:
    rng = np.random.default_rng(42)
    slots = ["time", "people", "restaurant_name"]
    for _ in range(10000):
        length = int(rng.integers(2, 15))
        spans = []
        position = 1
        while position < length - 1:
            position += int(rng.integers(0, 3))
            width = int(rng.integers(1, 4))
            if position + width > length - 1:
                break
            slot = str(rng.choice(slots))
            spans.append(SlotSpan(slot, position, position + width))
            position += width
        tags = derive_iob_tags(["w"] * length, spans)
        assert iob_to_spans(tags) == spans


def test_dropout_schedule() -> None:
    assert dropout_probability(0, 1000) == 0.0
    assert dropout_probability(500, 1000, 0.4) == pytest.approx(0.2)
    assert dropout_probability(1000, 1000, 0.4) == pytest.approx(0.4)
    assert dropout_probability(5000, 1000, 0.4) == pytest.approx(0.4)


def test_dropout_only_touches_spans() -> None:
    spans = [SlotSpan("time", 5, 7)]
    rng = np.random.default_rng(0)
    dropped = apply_slot_value_dropout(TOKENS, spans, 1.0, rng)
    assert dropped == [*TOKENS[:5], OOV, OOV, EOS]
    assert apply_slot_value_dropout(TOKENS, spans, 0.0, rng) == TOKENS


def test_dropout_rate() -> None:
    rng = np.random.default_rng(1)
    spans = [SlotSpan("time", 1, 7)]
    dropped = sum(
        apply_slot_value_dropout(TOKENS, spans, 0.3, rng).count(OOV)
        for _ in range(2000)
    )
    assert dropped / (2000 * 6) == pytest.approx(0.3, abs=0.02)


def test_dropout_rejects_bad_probability() -> None:
    with pytest.raises(ValueError, match="probability"):
        apply_slot_value_dropout(TOKENS, [], 1.5, np.random.default_rng(0))
