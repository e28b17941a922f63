"""Turn-by-turn inference.

`DialogueTracker` is the only inference path: batch evaluation and the
interactive session both feed it one turn at a time.
"""

from __future__ import annotations

import re
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import structlog
from structlog.stdlib import BoundLogger

from ..dialogue import EOS, SOS, Dialogue, SystemAct
from ..exceptions import SystemActError
from ..network.dst import SlotDistribution, read_state
from ..network.model import DialogueHistory, JointModel

__all__ = [
    "DialogueTracker",
    "ReplSession",
    "TurnPrediction",
    "format_prediction",
    "parse_system_acts",
    "tokenize",
]

_TOKEN = re.compile(r"\w+(?:'\w+)?|[^\w\s]")
_ACT = re.compile(r"([\w-]+)(?:\(([^()=]+)(?:=([^()]*))?\))?")


def tokenize(text: str) -> list[str]:
    """Lowercase and split a raw utterance, adding SOS and EOS."""
    return [SOS, *_TOKEN.findall(text.lower()), EOS]


def parse_system_acts(text: str) -> list[SystemAct]:
    """Parse ``act``, ``act(slot)`` and ``act(slot=value)`` items.

    Raises
    ------
    SystemActError
        If the text is not a sequence of such items.
    """
    acts = []
    position = 0
    text = text.strip()
    while position < len(text):
        match = _ACT.match(text, position)
        if match is None or match.end() == position:
            raise SystemActError(
                f"Cannot parse system acts at: {text[position:]}"
            )
        act_type, slot, value = match.groups()
        acts.append(
            SystemAct(
                act_type=act_type.lower(),
                slot=slot.strip().lower() if slot else None,
                value=value.strip().lower() if value else None,
            )
        )
        position = match.end()
        while position < len(text) and text[position] in " ,":
            position += 1
    return acts


@dataclass
class TurnPrediction:
    """Everything the tracker predicts for one turn."""

    intent: str | None
    acts: frozenset[str]
    act_probabilities: np.ndarray
    tags: list[str]
    values: list[tuple[str, str]]
    distributions: dict[str, SlotDistribution]
    state: dict[str, str] = field(default_factory=dict)

    def dump(self, dialogue_id: str, turn_index: int) -> dict[str, Any]:
        """Return the scored values of every slot as a JSON-ready record."""
        return {
            "dialogue_id": dialogue_id,
            "turn": turn_index,
            "slots": {
                slot: [
                    {"value": value, "probability": p}
                    for value, p in distribution.scored_values()
                ]
                for slot, distribution in self.distributions.items()
            },
        }


class DialogueTracker:
    """Run a trained model on one dialogue, turn by turn.

    Parameters
    ----------
    model
        Trained model.
    act_threshold
        Overrides the act threshold stored with the model.
    logger
        Logger to use.
    """

    def __init__(
        self,
        model: JointModel,
        *,
        act_threshold: float | None = None,
        logger: BoundLogger | None = None,
    ) -> None:
        self.model = model
        self.act_threshold = act_threshold
        self._logger = logger or structlog.get_logger(__name__)
        self.history: DialogueHistory = model.start()

    @property
    def turn_index(self) -> int:
        return self.history.turn_index

    def reset(self) -> None:
        """Return to the state before the first turn."""
        self.history = self.model.start()

    def track(
        self, system_acts: Sequence[SystemAct], user_tokens: Sequence[str]
    ) -> TurnPrediction:
        """Process one turn, always using the model's own predictions."""
        output = self.model.run_turn(
            self.history,
            system_acts,
            user_tokens,
            act_threshold=self.act_threshold,
        )
        self.history = output.history
        return TurnPrediction(
            intent=output.reading.lu.intent,
            acts=output.reading.lu.acts,
            act_probabilities=output.reading.lu.act_probabilities,
            tags=output.reading.lu.tags,
            values=output.values,
            distributions=output.distributions,
            state=read_state(output.distributions),
        )

    def predict_dialogue(self, dialogue: Dialogue) -> list[TurnPrediction]:
        """Track a whole dialogue from a fresh start."""
        self.reset()
        return [
            self.track(turn.system_acts, turn.user_tokens)
            for turn in dialogue.turns
        ]


def format_prediction(prediction: TurnPrediction, tokens: list[str]) -> str:
    """Render a prediction for the interactive session."""
    lines = [
        f"intent: {prediction.intent or '-'}",
        f"acts:   {', '.join(sorted(prediction.acts)) or '-'}",
        "tags:   "
        + " ".join(
            f"{token}/{tag}"
            for token, tag in zip(
                tokens[1:-1], prediction.tags[1:-1], strict=True
            )
        ),
        "values: "
        + (", ".join(f"{s}={v}" for s, v in prediction.values) or "-"),
        "state:",
    ]
    if not prediction.distributions:
        lines.append("  (empty)")
    for slot, distribution in prediction.distributions.items():
        scored = ", ".join(
            f"{value} {p:.3f}" for value, p in distribution.scored_values()
        )
        lines.append(f"  {slot}: {scored}")
    return "\n".join(lines)


class ReplSession:
    """Interactive session state.

    Lines starting with ``sys`` set the system acts of the next turn,
    ``reset`` starts a new dialogue and any other non-empty line is a user
    utterance.
    """

    usage = (
        "commands: sys act[(slot[=value])] ... | reset | quit |"
        " <user utterance>"
    )

    def __init__(self, tracker: DialogueTracker) -> None:
        self.tracker = tracker
        self.pending_acts: list[SystemAct] = []
        self.transcript: list[str] = []

    def reset(self) -> None:
        self.tracker.reset()
        self.pending_acts = []
        self.transcript = []

    def handle(self, line: str) -> str | None:
        """Process one input line and return the text to print.

        Returns `None` when the session should end.
        """
        line = line.strip()
        if not line:
            return ""
        command, _, rest = line.partition(" ")
        if command == "quit":
            return None
        if command == "reset":
            self.reset()
            return "state:\n  (empty)"
        if command == "sys":
            try:
                acts = parse_system_acts(rest)
                self.tracker.model.act_encoder.featurize(acts)
            except SystemActError as exc:
                return f"{exc}\n{self.usage}"
            self.pending_acts = acts
            self.transcript.append(f"SYS: {rest}")
            return f"system acts: {', '.join(str(a) for a in acts) or '-'}"
        tokens = tokenize(line)
        prediction = self.tracker.track(self.pending_acts, tokens)
        self.pending_acts = []
        self.transcript.append(f"USER: {line}")
        return format_prediction(prediction, tokens)
