"""IOB slot tags and slot-value dropout."""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np

from .dialogue import OOV, SlotSpan, check_spans

__all__ = [
    "OUTSIDE",
    "apply_slot_value_dropout",
    "decode_iob",
    "derive_iob_tags",
    "dropout_probability",
    "iob_to_spans",
]

OUTSIDE = "O"


def derive_iob_tags(
    user_tokens: Sequence[str], spans: Sequence[SlotSpan]
) -> list[str]:
    """Label every token ``B-slot``, ``I-slot`` or ``O``.

    Raises
    ------
    SpanError
        If spans overlap or cover the SOS/EOS positions.
    """
    check_spans(list(spans), len(user_tokens))
    tags = [OUTSIDE] * len(user_tokens)
    for span in spans:
        tags[span.start] = f"B-{span.slot}"
        for index in range(span.start + 1, span.end):
            tags[index] = f"I-{span.slot}"
    return tags


def iob_to_spans(tags: Sequence[str]) -> list[SlotSpan]:
    """Recover maximal ``B-s (I-s)*`` runs from a tag sequence.

    Decoding is lenient: an ``I-s`` that does not continue a run of the
    same slot starts a new run.
    """
    spans: list[SlotSpan] = []
    slot: str | None = None
    start = 0
    for index, tag in enumerate(tags):
        prefix, _, tag_slot = tag.partition("-")
        continues = prefix == "I" and tag_slot == slot
        if slot is not None and not continues:
            spans.append(SlotSpan(slot, start, index))
            slot = None
        if prefix in ("B", "I") and not continues:
            slot = tag_slot
            start = index
    if slot is not None:
        spans.append(SlotSpan(slot, start, len(tags)))
    return spans


def decode_iob(
    tags: Sequence[str], user_tokens: Sequence[str]
) -> list[tuple[str, str]]:
    """Extract (slot, value) pairs, joining the surface tokens of a run."""
    if len(tags) != len(user_tokens):
        raise ValueError(
            f"{len(tags)} tags for {len(user_tokens)} tokens"
        )
    return [
        (span.slot, " ".join(user_tokens[span.start : span.end]))
        for span in iob_to_spans(tags)
    ]


def dropout_probability(
    step: int, max_steps: int, max_probability: float = 0.4
) -> float:
    """Slot-value dropout rate, rising linearly from 0 to the maximum."""
    if max_steps <= 0:
        return max_probability
    return max_probability * min(max(step, 0), max_steps) / max_steps


def apply_slot_value_dropout(
    user_tokens: Sequence[str],
    spans: Sequence[SlotSpan],
    probability: float,
    rng: np.random.Generator,
) -> list[str]:
    """Replace tokens inside slot spans by the OOV token.

    Each in-span token is dropped independently.  Tokens outside spans,
    the sequence length and the tags are unchanged.
    """
    if not 0.0 <= probability <= 1.0:
        raise ValueError(f"Dropout probability out of range: {probability}")
    tokens = list(user_tokens)
    for span in spans:
        draws = rng.random(span.end - span.start)
        for offset, draw in enumerate(draws):
            if draw < probability:
                tokens[span.start + offset] = OOV
    return tokens
