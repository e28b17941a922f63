"""System act, utterance and dialogue state encoders.

Together they form the hierarchical dialogue encoder: the utterance encoder
summarizes one user turn, the state encoder runs one step per turn over the
system act vector and that summary.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import numpy.typing as npt

from ..autodiff import Tensor
from ..autodiff import ops
from ..dialogue import SystemAct
from ..exceptions import SystemActError
from ..vocab import Vocab
from .layers import BiGRU, Dense, GRUCell, Module

__all__ = [
    "DialogueContext",
    "DialogueEncoder",
    "StateEncoder",
    "SystemActEncoder",
    "SystemActEncoding",
    "SystemActFeatures",
    "UtteranceEncoder",
]

Binary = npt.NDArray[np.floating[Any]]


@dataclass
class SystemActFeatures:
    """Binary indicators for the system acts of one turn.

    Each vector is indexed by system act type.  Acts without parameters go
    to ``utterance``, acts with only a slot to ``slot[s]`` and acts with a
    slot and a value to ``candidate[(s, value)]``.
    """

    utterance: Binary
    slot: dict[str, Binary] = field(default_factory=dict)
    candidate: dict[tuple[str, str], Binary] = field(default_factory=dict)

    @property
    def mentioned_slots(self) -> list[str]:
        """Slots named by any act, in first-mention order."""
        slots = dict.fromkeys(self.slot)
        slots.update(dict.fromkeys(s for s, _ in self.candidate))
        return list(slots)

    @property
    def values(self) -> list[tuple[str, str]]:
        """(slot, value) pairs offered by the system this turn."""
        return list(self.candidate)

    def slot_vector(self, slot: str) -> Binary:
        return self.slot.get(slot, np.zeros_like(self.utterance))

    def candidate_vector(self, slot: str, value: str) -> Binary:
        return self.candidate.get((slot, value), np.zeros_like(self.utterance))

    def candidate_sum(self, slot: str) -> Binary:
        total = np.zeros_like(self.utterance)
        for (s, _), vector in self.candidate.items():
            if s == slot:
                total = total + vector
        return total


@dataclass
class SystemActEncoding:
    """Binary act features plus the dense system act vector ``a_t``.

    ``slot_summary`` is the mean of the per-slot layer outputs over
    ``slots_in_scope``.
    """

    features: SystemActFeatures
    vector: Tensor
    slots_in_scope: list[str]
    slot_summary: Tensor


@dataclass
class DialogueContext:
    """State encoder output for one turn.

    For a GRU the context vector and the recurrent state are the same
    values; both names are kept for readability at the call sites.
    """

    output: Tensor

    @property
    def hidden(self) -> Tensor:
        return self.output


class SystemActEncoder(Module):
    """Combine the system acts of a turn into a dense vector."""

    def __init__(
        self,
        name: str,
        rng: np.random.Generator,
        dtype: np.dtype[Any],
        vocab: Vocab,
        embedding_dim: int,
        act_dim: int,
    ) -> None:
        super().__init__(name, rng, dtype)
        self.act_types = {act: i for i, act in enumerate(vocab.system_acts)}
        self.slot_ids = {slot: i for i, slot in enumerate(vocab.slots)}
        self.act_dim = act_dim
        n_acts = len(vocab.system_acts)
        self.slot_embeddings = self.weight(
            "slot_embeddings", max(1, len(vocab.slots)), embedding_dim
        )
        self.slot_layer = self.child(
            Dense(
                self._qualify("slot_layer"),
                rng,
                dtype,
                2 * n_acts + embedding_dim,
                act_dim,
                activation="relu",
            )
        )
        self.output_layer = self.child(
            Dense(
                self._qualify("output_layer"),
                rng,
                dtype,
                act_dim + n_acts,
                act_dim,
                activation="relu",
            )
        )

    def featurize(self, acts: Sequence[SystemAct]) -> SystemActFeatures:
        """Build the binary indicators for a turn's system acts.

        Raises
        ------
        SystemActError
            If an act type is not in the vocabulary, an act has a value but
            no slot, or names an unknown slot.
        """
        size = len(self.act_types)
        features = SystemActFeatures(
            utterance=np.zeros(size, dtype=self._dtype)
        )
        for act in acts:
            if act.act_type not in self.act_types:
                raise SystemActError(f"Unknown system act type {act.act_type}")
            index = self.act_types[act.act_type]
            if act.slot is None:
                if act.value is not None:
                    raise SystemActError(f"Act {act} has a value but no slot")
                features.utterance[index] = 1.0
                continue
            if act.slot not in self.slot_ids:
                raise SystemActError(f"Unknown slot {act.slot} in act {act}")
            if act.value is None:
                vector = features.slot.setdefault(
                    act.slot, np.zeros(size, dtype=self._dtype)
                )
            else:
                vector = features.candidate.setdefault(
                    (act.slot, act.value), np.zeros(size, dtype=self._dtype)
                )
            vector[index] = 1.0
        return features

    def encode(
        self, features: SystemActFeatures, slots_in_scope: Sequence[str]
    ) -> SystemActEncoding:
        """Compute ``a_t`` from the indicators and the slots in scope.

        The per-slot representations are averaged over ``slots_in_scope``;
        with no slot in scope the average is a zero vector.
        """
        per_slot = []
        for slot in slots_in_scope:
            embedding = ops.row(self.slot_embeddings, self.slot_ids[slot])
            combined = ops.concat(
                [
                    Tensor(features.slot_vector(slot)),
                    embedding,
                    Tensor(features.candidate_sum(slot)),
                ]
            )
            per_slot.append(self.slot_layer(combined))
        if per_slot:
            slot_summary = ops.mean(per_slot)
        else:
            slot_summary = Tensor(np.zeros(self.act_dim, dtype=self._dtype))
        combined = ops.concat([slot_summary, Tensor(features.utterance)])
        return SystemActEncoding(
            features=features,
            vector=self.output_layer(combined),
            slots_in_scope=list(slots_in_scope),
            slot_summary=slot_summary,
        )

    def __call__(
        self, acts: Sequence[SystemAct], slots_in_scope: Sequence[str]
    ) -> SystemActEncoding:
        features = self.featurize(acts)
        scope = list(
            dict.fromkeys([*slots_in_scope, *features.mentioned_slots])
        )
        return self.encode(features, scope)


class UtteranceEncoder(Module):
    """Token embeddings followed by a bidirectional GRU."""

    def __init__(
        self,
        name: str,
        rng: np.random.Generator,
        dtype: np.dtype[Any],
        vocab_size: int,
        embedding_dim: int,
        hidden_size: int,
    ) -> None:
        super().__init__(name, rng, dtype)
        self.hidden_size = hidden_size
        self.embeddings = self.weight("embeddings", vocab_size, embedding_dim)
        self.rnn = self.child(
            BiGRU(
                self._qualify("rnn"), rng, dtype, embedding_dim, hidden_size
            )
        )

    @property
    def output_size(self) -> int:
        return 2 * self.hidden_size

    def __call__(
        self, token_ids: Sequence[int]
    ) -> tuple[Tensor, list[Tensor]]:
        """Return the utterance vector and one vector per token."""
        if not token_ids:
            raise ValueError("Cannot encode an empty utterance")
        embedded = ops.embedding(self.embeddings, token_ids)
        inputs = [ops.row(embedded, m) for m in range(len(token_ids))]
        return self.rnn(inputs)


class StateEncoder(Module):
    """Unidirectional GRU with one step per dialogue turn."""

    def __init__(
        self,
        name: str,
        rng: np.random.Generator,
        dtype: np.dtype[Any],
        in_size: int,
        hidden_size: int,
    ) -> None:
        super().__init__(name, rng, dtype)
        self.hidden_size = hidden_size
        self.cell = self.child(
            GRUCell(self._qualify("cell"), rng, dtype, in_size, hidden_size)
        )

    def initial(self) -> DialogueContext:
        return DialogueContext(self.cell.initial_state())

    def __call__(
        self,
        act_vector: Tensor,
        utterance_vector: Tensor,
        previous: DialogueContext,
    ) -> DialogueContext:
        inputs = ops.concat([act_vector, utterance_vector])
        return DialogueContext(self.cell(inputs, previous.hidden))


class DialogueEncoder(Module):
    """An utterance encoder and the state encoder stacked on it."""

    def __init__(
        self,
        name: str,
        rng: np.random.Generator,
        dtype: np.dtype[Any],
        vocab_size: int,
        embedding_dim: int,
        act_dim: int,
    ) -> None:
        super().__init__(name, rng, dtype)
        self.utterance = self.child(
            UtteranceEncoder(
                self._qualify("utterance"),
                rng,
                dtype,
                vocab_size,
                embedding_dim,
                embedding_dim,
            )
        )
        self.state = self.child(
            StateEncoder(
                self._qualify("state"),
                rng,
                dtype,
                act_dim + self.utterance.output_size,
                max(1, embedding_dim // 2),
            )
        )

    @property
    def context_size(self) -> int:
        return self.state.hidden_size

    @property
    def token_size(self) -> int:
        return self.utterance.output_size
