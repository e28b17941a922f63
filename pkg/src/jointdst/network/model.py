"""The joint LU and DST network."""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from ..autodiff import ParameterSet, Tensor
from ..candidates import CandidateSet, update_candidate_sets
from ..config import ModelSettings
from ..dialogue import SystemAct, Turn
from ..tagging import decode_iob
from ..vocab import Vocab
from .dst import (
    CandidateScorer,
    SlotDistribution,
    SlotScores,
    build_scorer_features,
    gold_scores,
)
from .encoders import (
    DialogueContext,
    DialogueEncoder,
    SystemActEncoder,
    SystemActEncoding,
)
from .layers import Module
from .lu import LuHeads, LuPrediction

__all__ = [
    "DialogueHistory",
    "JointModel",
    "TurnOutput",
    "TurnReading",
]


@dataclass
class DialogueHistory:
    """Everything a dialogue carries from one turn to the next.

    ``predicted_scores`` are the model's own distributions and
    ``gold_scores`` their one-hot gold counterparts; scheduled sampling
    picks one of them as the previous-state input of the next turn.
    """

    lu_context: DialogueContext
    dst_context: DialogueContext | None
    candidates: dict[str, CandidateSet] = field(default_factory=dict)
    predicted_scores: dict[str, SlotScores] = field(default_factory=dict)
    gold_scores: dict[str, SlotScores] = field(default_factory=dict)
    turn_index: int = 0

    @property
    def slots(self) -> list[str]:
        """Slots mentioned so far, in first-mention order."""
        return list(self.candidates)


@dataclass
class TurnReading:
    """Encoder and LU head outputs for one turn."""

    user_tokens: list[str]
    token_ids: list[int]
    acts: SystemActEncoding
    lu_context: DialogueContext
    intent_logits: Tensor
    act_logits: Tensor
    tag_logits: Tensor
    lu: LuPrediction


@dataclass
class TurnOutput:
    """Scorer logits, decoded predictions and next history for one turn."""

    reading: TurnReading
    slot_logits: dict[str, Tensor]
    values: list[tuple[str, str]]
    distributions: dict[str, SlotDistribution]
    history: DialogueHistory

    @property
    def candidates(self) -> dict[str, CandidateSet]:
        return self.history.candidates


class JointModel(Module):
    """System act encoder, dialogue encoders, LU heads and the scorer.

    In the joint configuration the LU heads and the scorer read the same
    utterance and state encoders.  With ``separate_encoders`` the scorer
    gets its own copy of both, including token embeddings; the system act
    encoder is always shared.
    """

    def __init__(
        self,
        settings: ModelSettings,
        vocab: Vocab,
        *,
        seed: int = 0,
    ) -> None:
        dtype = np.dtype(settings.dtype)
        rng = np.random.default_rng(seed)
        super().__init__("", rng, dtype)
        self.settings = settings
        self.vocab = vocab
        size = settings.embedding_dim
        self.act_encoder = self.child(
            SystemActEncoder(
                "act_encoder", rng, dtype, vocab, size, settings.act_dim
            )
        )
        self.lu_encoder = self.child(
            DialogueEncoder(
                "encoder" if not settings.separate_encoders else "lu_encoder",
                rng,
                dtype,
                len(vocab.tokens),
                size,
                settings.act_dim,
            )
        )
        self.dst_encoder: DialogueEncoder | None = None
        if settings.separate_encoders:
            self.dst_encoder = self.child(
                DialogueEncoder(
                    "dst_encoder",
                    rng,
                    dtype,
                    len(vocab.tokens),
                    size,
                    settings.act_dim,
                )
            )
        self.lu = self.child(
            LuHeads(
                "lu",
                rng,
                dtype,
                vocab,
                context_size=self.lu_encoder.context_size,
                token_size=self.lu_encoder.token_size,
                act_dim=settings.act_dim,
                hidden_size=size,
            )
        )
        self.scorer = self.child(
            CandidateScorer(
                "scorer",
                rng,
                dtype,
                context_size=self.lu_encoder.context_size,
                n_system_acts=len(vocab.system_acts),
            )
        )
        self._parameters_cache = self.parameters()

    @property
    def parameter_set(self) -> ParameterSet:
        return self._parameters_cache

    @property
    def dtype(self) -> np.dtype:
        return self._dtype

    def start(self) -> DialogueHistory:
        """Return the history before the first turn."""
        return DialogueHistory(
            lu_context=self.lu_encoder.state.initial(),
            dst_context=(
                None
                if self.dst_encoder is None
                else self.dst_encoder.state.initial()
            ),
        )

    def read_turn(
        self,
        history: DialogueHistory,
        system_acts: Sequence[SystemAct],
        user_tokens: Sequence[str],
        *,
        input_tokens: Sequence[str] | None = None,
        act_threshold: float | None = None,
    ) -> TurnReading:
        """Encode a turn and run the LU heads.

        Parameters
        ----------
        history
            History after the previous turn.
        system_acts
            System acts preceding the user utterance.
        user_tokens
            Surface tokens including the SOS and EOS markers.
        input_tokens
            Tokens fed to the encoders, if different from ``user_tokens``
            (slot value dropout).
        act_threshold
            Overrides the act threshold of the model settings.
        """
        tokens = list(user_tokens if input_tokens is None else input_tokens)
        threshold = act_threshold or self.settings.act_threshold
        features = self.act_encoder.featurize(system_acts)
        scope = list(
            dict.fromkeys([*history.slots, *features.mentioned_slots])
        )
        acts = self.act_encoder.encode(features, scope)

        token_ids = self.vocab.token_ids(tokens)
        utterance, token_vectors = self.lu_encoder.utterance(token_ids)
        lu_context = self.lu_encoder.state(
            acts.vector, utterance, history.lu_context
        )
        intent_logits = self.lu.intent_logits(lu_context.output)
        act_logits = self.lu.act_logits(lu_context.output)
        tag_logits = self.lu.tag_logits(
            token_vectors, acts.vector, history.lu_context.output
        )
        return TurnReading(
            user_tokens=list(user_tokens),
            token_ids=token_ids,
            acts=acts,
            lu_context=lu_context,
            intent_logits=intent_logits,
            act_logits=act_logits,
            tag_logits=tag_logits,
            lu=self.lu.predict(
                intent_logits, act_logits, tag_logits, threshold
            ),
        )

    def update_state(
        self,
        history: DialogueHistory,
        reading: TurnReading,
        tags: Sequence[str],
        previous: Mapping[str, SlotScores],
        *,
        gold: Turn | None = None,
    ) -> TurnOutput:
        """Update the candidate sets and score every slot in scope.

        Parameters
        ----------
        history
            History after the previous turn.
        reading
            Output of `read_turn` for this turn.
        tags
            Slot tags whose values enter the candidate sets.
        previous
            Previous-turn scores fed to the scorer, per slot.
        gold
            Gold annotations, used to build the gold previous state of the
            next turn.
        """
        features = reading.acts.features
        values = decode_iob(tags, reading.user_tokens)
        candidates = update_candidate_sets(
            history.candidates,
            values,
            features.values,
            reading.user_tokens,
            {slot: scores.values for slot, scores in previous.items()},
            capacity=self.settings.candidate_capacity,
        )

        dst_context = None
        if self.dst_encoder is not None and history.dst_context is not None:
            dst_utterance, _ = self.dst_encoder.utterance(reading.token_ids)
            dst_context = self.dst_encoder.state(
                reading.acts.vector, dst_utterance, history.dst_context
            )
            context = dst_context.output
        else:
            context = reading.lu_context.output

        slot_logits = {}
        distributions = {}
        for slot, cands in candidates.items():
            scorer_features = build_scorer_features(
                context, features, previous.get(slot, SlotScores()), cands
            )
            logits = self.scorer(scorer_features, cands)
            slot_logits[slot] = logits
            distributions[slot] = SlotDistribution.from_logits(
                slot, cands, logits
            )

        next_gold = {}
        if gold is not None:
            next_gold = {
                slot: gold_scores(cands, gold.gold_state.get(slot))
                for slot, cands in candidates.items()
            }
        next_history = DialogueHistory(
            lu_context=reading.lu_context,
            dst_context=dst_context,
            candidates=candidates,
            predicted_scores={
                slot: d.to_scores() for slot, d in distributions.items()
            },
            gold_scores=next_gold,
            turn_index=history.turn_index + 1,
        )
        return TurnOutput(
            reading=reading,
            slot_logits=slot_logits,
            values=values,
            distributions=distributions,
            history=next_history,
        )

    def run_turn(
        self,
        history: DialogueHistory,
        system_acts: Sequence[SystemAct],
        user_tokens: Sequence[str],
        *,
        act_threshold: float | None = None,
    ) -> TurnOutput:
        """Process one turn from the model's own predictions."""
        reading = self.read_turn(
            history, system_acts, user_tokens, act_threshold=act_threshold
        )
        return self.update_state(
            history, reading, reading.lu.tags, history.predicted_scores
        )
