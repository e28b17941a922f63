"""Vocabularies for tokens and label sets."""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from collections.abc import Iterable
from dataclasses import dataclass, field
from typing import Any

from .dialogue import EOS, OOV, PAD, SOS, Dialogue

__all__ = ["RESERVED_TOKENS", "Vocab", "build_vocab"]

RESERVED_TOKENS = (PAD, OOV, SOS, EOS)


@dataclass
class Vocab:
    """Token vocabulary plus the intent, act and slot label sets.

    Token indices are dense from 0 and start with the reserved entries.
    The IOB tag set is derived from the slots: index 0 is ``O``, then
    ``B-slot`` and ``I-slot`` for each slot in order.
    """

    tokens: list[str]
    intents: list[str]
    user_acts: list[str]
    system_acts: list[str]
    slots: list[str]
    _token_index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if tuple(self.tokens[: len(RESERVED_TOKENS)]) != RESERVED_TOKENS:
            self.tokens = list(RESERVED_TOKENS) + [
                t for t in self.tokens if t not in RESERVED_TOKENS
            ]
        self._token_index = {t: i for i, t in enumerate(self.tokens)}

    @property
    def oov_index(self) -> int:
        return self._token_index[OOV]

    @property
    def tags(self) -> list[str]:
        labels = ["O"]
        for slot in self.slots:
            labels.extend((f"B-{slot}", f"I-{slot}"))
        return labels

    def token_id(self, token: str) -> int:
        return self._token_index.get(token, self.oov_index)

    def token_ids(self, tokens: Iterable[str]) -> list[int]:
        return [self.token_id(t) for t in tokens]

    def has_token(self, token: str) -> bool:
        return token in self._token_index

    def to_dict(self) -> dict[str, Any]:
        return {
            "tokens": self.tokens,
            "intents": self.intents,
            "user_acts": self.user_acts,
            "system_acts": self.system_acts,
            "slots": self.slots,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Vocab:
        return cls(
            tokens=list(data["tokens"]),
            intents=list(data["intents"]),
            user_acts=list(data["user_acts"]),
            system_acts=list(data["system_acts"]),
            slots=list(data["slots"]),
        )

    def fingerprint(self) -> str:
        """Return a SHA-256 hash identifying this vocabulary."""
        encoded = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(encoded).hexdigest()


def build_vocab(
    dialogues: Iterable[Dialogue], min_token_freq: int = 1
) -> Vocab:
    """Collect the vocabularies of a training split.

    Tokens seen fewer than ``min_token_freq`` times are left out and will
    map to the OOV entry.  Label vocabularies are sorted so that the same
    corpus always yields the same indices.
    """
    counts: Counter[str] = Counter()
    intents: set[str] = set()
    user_acts: set[str] = set()
    system_acts: set[str] = set()
    slots: set[str] = set()
    for dialogue in dialogues:
        for turn in dialogue.turns:
            counts.update(turn.inner_tokens)
            if turn.gold_intent is not None:
                intents.add(turn.gold_intent)
            user_acts.update(turn.gold_user_acts)
            for act in turn.system_acts:
                system_acts.add(act.act_type)
                if act.slot is not None:
                    slots.add(act.slot)
            slots.update(span.slot for span in turn.gold_slot_spans)
            slots.update(turn.gold_state)
    tokens = sorted(
        (
            t
            for t, n in counts.items()
            if n >= min_token_freq and t not in RESERVED_TOKENS
        ),
        key=lambda t: (-counts[t], t),
    )
    return Vocab(
        tokens=list(RESERVED_TOKENS) + tokens,
        intents=sorted(intents),
        user_acts=sorted(user_acts),
        system_acts=sorted(system_acts),
        slots=sorted(slots),
    )
