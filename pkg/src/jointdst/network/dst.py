"""Candidate scoring and dialogue state readout.

For every slot in scope the scorer produces a distribution over the slot's
candidate values plus two special values: null (the slot is not specified
yet) and dontcare (the user accepts any value).  Distributions are laid out
as ``[null, dontcare, c_1, ..., c_K]`` where ``c_i`` are the padded
candidates of the slot.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import numpy.typing as npt

from ..autodiff import Tensor
from ..autodiff import ops
from ..candidates import CandidateSet
from ..dialogue import DONTCARE
from .encoders import SystemActFeatures
from .layers import FeedForward, Module

__all__ = [
    "DONTCARE_INDEX",
    "FEATURE_LAYOUT",
    "MASK_VALUE",
    "NULL_INDEX",
    "NULL_LABEL",
    "CandidateScorer",
    "ScorerFeatures",
    "SlotDistribution",
    "SlotScores",
    "build_scorer_features",
    "gold_label",
    "gold_scores",
    "read_state",
]

NULL_INDEX = 0
DONTCARE_INDEX = 1
NULL_LABEL = "<null>"
MASK_VALUE = -1e9
"""Logit added to padded candidates."""

FEATURE_LAYOUT = {
    "utterance": ["dialogue_context", "act_utterance"],
    "slot": ["act_slot", "previous_dontcare", "previous_null"],
    "candidate": [
        "act_candidate",
        "previous_score",
        "valid",
        "in_user_utterance",
    ],
    "logits": ["null", "dontcare", "candidates"],
}
"""Order of the concatenated scorer features, recorded in checkpoints."""


@dataclass
class SlotScores:
    """Probabilities a slot assigned to its values at the previous turn.

    A slot entering scope for the first time is entirely null.
    """

    null: float = 1.0
    dontcare: float = 0.0
    values: dict[str, float] = field(default_factory=dict)

    def get(self, value: str) -> float:
        return self.values.get(value, 0.0)


@dataclass
class ScorerFeatures:
    """Scorer inputs for one slot.

    ``utterance`` depends on the turn only, ``slot`` on the slot and
    ``candidates`` has one row per padded candidate.
    """

    utterance: Tensor
    slot: npt.NDArray[np.floating[Any]]
    candidates: npt.NDArray[np.floating[Any]]


def build_scorer_features(
    context: Tensor,
    features: SystemActFeatures,
    previous: SlotScores,
    candidates: CandidateSet,
) -> ScorerFeatures:
    """Assemble the utterance, slot and candidate feature vectors.

    Padded candidates get all-zero rows, so their validity indicator is 0.
    """
    dtype = context.dtype
    utterance = ops.concat([context, Tensor(features.utterance)])
    slot = np.concatenate(
        [
            features.slot_vector(candidates.slot),
            [previous.dontcare, previous.null],
        ]
    ).astype(dtype)
    validity = candidates.validity()
    recency = candidates.recency()
    width = features.utterance.shape[0] + 3
    rows = np.zeros((candidates.capacity, width), dtype=dtype)
    for i, value in enumerate(candidates.values):
        rows[i] = np.concatenate(
            [
                features.candidate_vector(candidates.slot, value),
                [previous.get(value), validity[i], recency[i]],
            ]
        )
    return ScorerFeatures(utterance=utterance, slot=slot, candidates=rows)


class CandidateScorer(Module):
    """Score null, dontcare and every candidate of a slot.

    Dontcare and candidate logits come from two feed-forward networks; the
    null logit is a single trainable value shared by all slots.
    """

    def __init__(
        self,
        name: str,
        rng: np.random.Generator,
        dtype: np.dtype[Any],
        *,
        context_size: int,
        n_system_acts: int,
    ) -> None:
        super().__init__(name, rng, dtype)
        base = context_size + n_system_acts + n_system_acts + 2
        self.dontcare = self.child(
            FeedForward(self._qualify("dontcare"), rng, dtype, base)
        )
        self.candidate = self.child(
            FeedForward(
                self._qualify("candidate"),
                rng,
                dtype,
                base + n_system_acts + 3,
            )
        )
        self.null_logit = self.zeros("null_logit", 1)

    def __call__(
        self, features: ScorerFeatures, candidates: CandidateSet
    ) -> Tensor:
        """Return the masked logits ``[null, dontcare, c_1, ..., c_K]``."""
        base = ops.concat([features.utterance, Tensor(features.slot)])
        dontcare = self.dontcare(base)
        size = candidates.capacity
        rows = ops.concat(
            [ops.stack([base] * size), Tensor(features.candidates)]
        )
        scores = ops.reshape(self.candidate(rows), size)
        logits = ops.concat([self.null_logit, dontcare, scores])
        mask = np.zeros(size + 2, dtype=logits.dtype)
        mask[2:] = np.where(candidates.validity() > 0, 0.0, MASK_VALUE)
        return ops.add(logits, Tensor(mask))


@dataclass
class SlotDistribution:
    """Probability of every value of one slot at one turn."""

    slot: str
    candidates: list[str | None]
    probabilities: npt.NDArray[np.floating[Any]]

    @classmethod
    def from_logits(
        cls, slot: str, candidates: CandidateSet, logits: Tensor
    ) -> SlotDistribution:
        probabilities = ops.softmax(ops.detach(logits)).data
        return cls(slot, candidates.padded(), probabilities)

    @property
    def labels(self) -> list[str | None]:
        return [NULL_LABEL, DONTCARE, *self.candidates]

    def best_index(self) -> int:
        """Index of the most probable value.

        Ties go to null, then dontcare, then the earliest candidate.
        """
        return int(np.argmax(self.probabilities))

    def best(self) -> str | None:
        """Most probable value, `None` meaning null."""
        index = self.best_index()
        if index == NULL_INDEX:
            return None
        return self.labels[index]

    def to_scores(self) -> SlotScores:
        p = self.probabilities
        values = {
            value: float(p[i + 2])
            for i, value in enumerate(self.candidates)
            if value is not None
        }
        return SlotScores(
            float(p[NULL_INDEX]), float(p[DONTCARE_INDEX]), values
        )

    def scored_values(self) -> list[tuple[str, float]]:
        """Return (value, probability) pairs, most probable first."""
        pairs = [
            (label, float(p))
            for label, p in zip(self.labels, self.probabilities, strict=True)
            if label is not None
        ]
        return sorted(pairs, key=lambda pair: -pair[1])


def read_state(
    distributions: Mapping[str, SlotDistribution],
) -> dict[str, str]:
    """Map each slot to its most probable value, leaving out null slots."""
    state = {}
    for slot, distribution in distributions.items():
        value = distribution.best()
        if value is not None:
            state[slot] = value
    return state


def gold_label(
    candidates: CandidateSet, gold_value: str | None
) -> tuple[int, bool]:
    """Return the index of the gold value and whether it is reachable.

    A gold value missing from the candidates is labelled null and reported
    as unreachable.
    """
    if gold_value is None:
        return NULL_INDEX, True
    if gold_value == DONTCARE:
        return DONTCARE_INDEX, True
    if gold_value in candidates:
        return candidates.index(gold_value) + 2, True
    return NULL_INDEX, False


def gold_scores(
    candidates: CandidateSet, gold_value: str | None
) -> SlotScores:
    """One-hot scores putting all the mass on the gold label."""
    index, _ = gold_label(candidates, gold_value)
    scores = SlotScores(
        null=float(index == NULL_INDEX),
        dontcare=float(index == DONTCARE_INDEX),
    )
    scores.values = {
        value: float(i + 2 == index)
        for i, value in enumerate(candidates.values)
    }
    return scores
