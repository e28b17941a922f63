"""Language understanding heads: intent, user acts and slot tags."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np

from ..autodiff import Tensor
from ..autodiff import ops
from ..tagging import OUTSIDE
from ..vocab import Vocab
from .layers import BiLSTM, Dense, Module

__all__ = [
    "LuHeads",
    "LuPrediction",
    "select_acts",
]


def select_acts(
    probabilities: Sequence[float], labels: Sequence[str], threshold: float
) -> frozenset[str]:
    """Return the labels whose probability is strictly above ``threshold``."""
    return frozenset(
        label
        for label, p in zip(labels, probabilities, strict=True)
        if p > threshold
    )


@dataclass
class LuPrediction:
    """Decoded output of the LU heads for one turn."""

    intent: str | None
    intent_probabilities: np.ndarray
    acts: frozenset[str]
    act_probabilities: np.ndarray
    tags: list[str]
    tag_probabilities: np.ndarray


class LuHeads(Module):
    """Intent and act classifiers on the dialogue context, plus the tagger.

    The tagger is a bidirectional LSTM over the utterance token vectors,
    each extended with the system act vector.  Both directions start from an
    affine projection of the previous turn's dialogue context.
    """

    def __init__(
        self,
        name: str,
        rng: np.random.Generator,
        dtype: np.dtype[Any],
        vocab: Vocab,
        *,
        context_size: int,
        token_size: int,
        act_dim: int,
        hidden_size: int,
    ) -> None:
        super().__init__(name, rng, dtype)
        self.vocab = vocab
        self.tag_labels = vocab.tags
        self.intent = self.child(
            Dense(
                self._qualify("intent"),
                rng,
                dtype,
                context_size,
                max(1, len(vocab.intents)),
            )
        )
        self.acts = self.child(
            Dense(
                self._qualify("acts"),
                rng,
                dtype,
                context_size,
                max(1, len(vocab.user_acts)),
            )
        )
        self.forward_init = self.child(
            Dense(
                self._qualify("forward_init"),
                rng,
                dtype,
                context_size,
                hidden_size,
            )
        )
        self.backward_init = self.child(
            Dense(
                self._qualify("backward_init"),
                rng,
                dtype,
                context_size,
                hidden_size,
            )
        )
        self.tagger = self.child(
            BiLSTM(
                self._qualify("tagger"),
                rng,
                dtype,
                token_size + act_dim,
                hidden_size,
            )
        )
        self.tags = self.child(
            Dense(
                self._qualify("tags"),
                rng,
                dtype,
                2 * hidden_size,
                len(self.tag_labels),
            )
        )

    def intent_logits(self, context: Tensor) -> Tensor:
        return self.intent(context)

    def act_logits(self, context: Tensor) -> Tensor:
        return self.acts(context)

    def tag_logits(
        self,
        token_vectors: Sequence[Tensor],
        act_vector: Tensor,
        previous_context: Tensor,
    ) -> Tensor:
        """Return one row of tag logits per token."""
        inputs = [ops.concat([u, act_vector]) for u in token_vectors]
        outputs = self.tagger(
            inputs,
            self.forward_init(previous_context),
            self.backward_init(previous_context),
        )
        return self.tags(ops.stack(outputs))

    def classify_intent(self, logits: Tensor) -> tuple[str | None, np.ndarray]:
        """Return the most likely intent and the intent distribution."""
        probabilities = ops.softmax(ops.detach(logits)).data
        if not self.vocab.intents:
            return None, probabilities
        return self.vocab.intents[int(np.argmax(probabilities))], probabilities

    def classify_user_acts(
        self, logits: Tensor, threshold: float
    ) -> tuple[frozenset[str], np.ndarray]:
        """Return the acts with probability above ``threshold``."""
        probabilities = ops.sigmoid(ops.detach(logits)).data
        if not self.vocab.user_acts:
            return frozenset(), probabilities
        acts = select_acts(probabilities, self.vocab.user_acts, threshold)
        return acts, probabilities

    def decode_tags(self, logits: Tensor) -> tuple[list[str], np.ndarray]:
        """Pick the best tag per token.

        The first and last positions hold the SOS and EOS markers and are
        always tagged ``O``.
        """
        probabilities = ops.softmax(ops.detach(logits)).data
        tags = [self.tag_labels[int(i)] for i in probabilities.argmax(axis=1)]
        tags[0] = tags[-1] = OUTSIDE
        return tags, probabilities

    def predict(
        self,
        intent_logits: Tensor,
        act_logits: Tensor,
        tag_logits: Tensor,
        threshold: float,
    ) -> LuPrediction:
        intent, intent_probabilities = self.classify_intent(intent_logits)
        acts, act_probabilities = self.classify_user_acts(
            act_logits, threshold
        )
        tags, tag_probabilities = self.decode_tags(tag_logits)
        return LuPrediction(
            intent=intent,
            intent_probabilities=intent_probabilities,
            acts=acts,
            act_probabilities=act_probabilities,
            tags=tags,
            tag_probabilities=tag_probabilities,
        )
