"""Per-slot candidate value sets."""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import numpy.typing as npt

__all__ = [
    "DEFAULT_CAPACITY",
    "CandidateSet",
    "is_token_subsequence",
    "update_candidate_sets",
]

DEFAULT_CAPACITY = 7


@dataclass
class CandidateSet:
    """Values of one slot mentioned so far, in insertion order.

    The set holds at most ``capacity`` values; `padded` fills the remaining
    positions with `None` so every slot exposes exactly ``capacity``
    entries to the scorer.
    """

    slot: str
    capacity: int
    values: list[str] = field(default_factory=list)
    recent: list[bool] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ValueError(
                f"Candidate capacity must be >= 1: {self.capacity}"
            )
        if len(set(self.values)) != len(self.values):
            raise ValueError(f"Duplicate candidates for {self.slot}")
        if not self.recent:
            self.recent = [False] * len(self.values)

    def __contains__(self, value: object) -> bool:
        return value in self.values

    def __len__(self) -> int:
        return len(self.values)

    def index(self, value: str) -> int:
        return self.values.index(value)

    def padded(self) -> list[str | None]:
        return [*self.values, *[None] * (self.capacity - len(self.values))]

    def validity(self) -> npt.NDArray[np.floating[Any]]:
        """Return the ``m_v`` indicator for every padded position."""
        mask = np.zeros(self.capacity)
        mask[: len(self.values)] = 1.0
        return mask

    def recency(self) -> npt.NDArray[np.floating[Any]]:
        """Return the ``m_u`` indicator for every padded position."""
        mask = np.zeros(self.capacity)
        mask[: len(self.recent)] = self.recent
        return mask

    def copy(self) -> CandidateSet:
        return CandidateSet(
            self.slot, self.capacity, list(self.values), list(self.recent)
        )


def is_token_subsequence(value: str, tokens: Sequence[str]) -> bool:
    """Whether the tokens of ``value`` occur contiguously in ``tokens``.

    Comparison is case-insensitive.
    """
    needle = value.lower().split()
    haystack = [t.lower() for t in tokens]
    if not needle:
        return False
    width = len(needle)
    return any(
        haystack[i : i + width] == needle
        for i in range(len(haystack) - width + 1)
    )


def _mentions_by_slot(
    mentions: Iterable[tuple[str, str]],
) -> dict[str, list[str]]:
    grouped: dict[str, list[str]] = {}
    for slot, value in mentions:
        values = grouped.setdefault(slot, [])
        if value in values:
            values.remove(value)
        values.append(value)
    return grouped


def update_candidate_sets(
    previous: Mapping[str, CandidateSet],
    user_values: Iterable[tuple[str, str]],
    system_values: Iterable[tuple[str, str]],
    user_tokens: Sequence[str],
    previous_scores: Mapping[str, Mapping[str, float]],
    *,
    capacity: int = DEFAULT_CAPACITY,
) -> dict[str, CandidateSet]:
    """Add this turn's mentions to the candidate sets.

    System values are taken before user values.  New values are appended.
    When a set is full, the value with the lowest previous-turn score is
    evicted, ties going to the oldest value; values mentioned in the current
    turn are never evicted.  If a slot receives more than ``capacity``
    mentions in one turn, only the last ``capacity`` are kept.

    Parameters
    ----------
    previous
        Sets after the previous turn.  They are not modified.
    user_values
        (slot, value) pairs decoded from the user utterance.
    system_values
        (slot, value) pairs carried by the system acts.
    user_tokens
        Surface tokens of the user utterance, for the recency indicator.
    previous_scores
        Previous-turn probability of each candidate, per slot.  Missing
        entries count as 0.
    capacity
        Capacity used for slots that have no set yet.

    Returns
    -------
    dict of str to CandidateSet
        Sets for the current turn.  Slots keep their first-mention order and
        newly mentioned slots are appended.
    """
    sets = {slot: cands.copy() for slot, cands in previous.items()}
    mentions = _mentions_by_slot([*system_values, *user_values])
    for slot, values in mentions.items():
        cands = sets.get(slot)
        if cands is None:
            cands = sets[slot] = CandidateSet(slot, capacity)
        protected = values[-cands.capacity :]
        scores = previous_scores.get(slot, {})
        for value in protected:
            if value in cands:
                continue
            if len(cands) == cands.capacity:
                evictable = [
                    (scores.get(v, 0.0), i)
                    for i, v in enumerate(cands.values)
                    if v not in protected
                ]
                _, victim = min(evictable)
                del cands.values[victim]
            cands.values.append(value)
    for cands in sets.values():
        cands.recent = [
            is_token_subsequence(v, user_tokens) for v in cands.values
        ]
    return sets
