"""Corpus files.

The canonical corpus format is one JSON file per split holding a list of
dialogue records::

    [
      {
        "dialogue_id": "...",
        "turns": [
          {
            "system_acts": [{"type": "offer", "slot": "time",
                             "value": "6 pm"}],
            "user_utterance": {
              "tokens": ["how", "about", "7", "pm"],
              "spans": [{"slot": "time", "start": 2, "exclusive_end": 4}]
            },
            "intent": "reserve_restaurant",
            "user_acts": ["negate", "inform"],
            "dialogue_state": [{"slot": "time", "value": "7 pm"}]
          }
        ]
      }
    ]

Span offsets index ``tokens`` as stored, without the SOS and EOS markers
that are added at load time.  ``intent`` may be null.  Text and slot
names are lowercased on load.

The published Simulated Dialogues files use a slightly different layout;
`adapt_simulated_dialogues` maps them onto the canonical one.
"""

from __future__ import annotations

import json
from collections.abc import Iterable
from pathlib import Path
from typing import Any

import structlog
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from structlog.stdlib import BoundLogger

from ..dialogue import (
    EOS,
    SOS,
    Dialogue,
    SlotSpan,
    SystemAct,
    Turn,
)
from ..exceptions import CorpusFormatError, SpanError, SystemActError

__all__ = [
    "SPLITS",
    "DialogueRecord",
    "adapt_simulated_dialogues",
    "corpus_split_path",
    "load_corpus",
    "load_corpus_splits",
    "normalize_text",
    "write_corpus",
]

SPLITS = ("train", "dev", "test")


class _Record(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SystemActRecord(_Record):
    type: str = Field(..., min_length=1)
    slot: str | None = None
    value: str | None = None


class SpanRecord(_Record):
    slot: str = Field(..., min_length=1)
    start: int = Field(..., ge=0)
    exclusive_end: int = Field(..., ge=1)


class UtteranceRecord(_Record):
    tokens: list[str]
    spans: list[SpanRecord] = Field(default_factory=list)


class StateRecord(_Record):
    slot: str = Field(..., min_length=1)
    value: str = Field(..., min_length=1)


class TurnRecord(_Record):
    system_acts: list[SystemActRecord] = Field(default_factory=list)
    user_utterance: UtteranceRecord
    intent: str | None = None
    user_acts: list[str] = Field(default_factory=list)
    dialogue_state: list[StateRecord] = Field(default_factory=list)


class DialogueRecord(_Record):
    dialogue_id: str
    turns: list[TurnRecord] = Field(..., min_length=1)


def normalize_text(text: str) -> str:
    """Lowercase and collapse whitespace."""
    return " ".join(text.lower().split())


def corpus_split_path(corpus: Path, split: str) -> Path:
    """Return the file holding ``split`` of a corpus directory."""
    if corpus.is_file():
        return corpus
    return corpus / f"{split}.json"


def load_corpus(
    path: Path, *, logger: BoundLogger | None = None
) -> list[Dialogue]:
    """Load and validate one canonical corpus file.

    Raises
    ------
    CorpusFormatError
        A record breaks the schema or a domain invariant; the message names
        the dialogue, the turn and the field.
    """
    logger = logger or structlog.get_logger(__name__)
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        logger.warning(f"Corpus file {path} is empty")
        return []
    raw = json.loads(text)
    if not isinstance(raw, list):
        raise CorpusFormatError(str(path), None, "<root>", "expected a list")
    dialogues = [
        _to_dialogue(record, position) for position, record in enumerate(raw)
    ]
    if not dialogues:
        logger.warning(f"Corpus file {path} holds no dialogues")
    turns = sum(len(d) for d in dialogues)
    slots = {
        span.slot
        for d in dialogues
        for t in d.turns
        for span in t.gold_slot_spans
    }
    logger.info(
        f"Loaded {len(dialogues)} dialogues ({turns} turns, {len(slots)}"
        f" tagged slots) from {path}"
    )
    return dialogues


def load_corpus_splits(
    corpora: Iterable[Path],
    split: str,
    *,
    logger: BoundLogger | None = None,
) -> list[Dialogue]:
    """Load the same split of several corpora and concatenate them."""
    dialogues: list[Dialogue] = []
    for corpus in corpora:
        dialogues.extend(
            load_corpus(corpus_split_path(corpus, split), logger=logger)
        )
    return dialogues


def _to_dialogue(raw: Any, position: int) -> Dialogue:
    dialogue_id = str(
        raw.get("dialogue_id", f"#{position}")
        if isinstance(raw, dict)
        else f"#{position}"
    )
    try:
        record = DialogueRecord.model_validate(raw)
    except ValidationError as exc:
        error = exc.errors()[0]
        location = list(error["loc"])
        turn_index = None
        if len(location) >= 2 and location[0] == "turns":
            turn_index = int(location[1])
            location = location[2:]
        field = ".".join(str(part) for part in location) or "<record>"
        raise CorpusFormatError(
            dialogue_id, turn_index, field, error["msg"]
        ) from exc

    turns = []
    for index, turn in enumerate(record.turns):
        try:
            turns.append(_to_turn(turn))
        except SystemActError as exc:
            raise CorpusFormatError(
                dialogue_id, index, "system_acts", str(exc)
            ) from exc
        except SpanError as exc:
            raise CorpusFormatError(
                dialogue_id, index, "user_utterance.spans", str(exc)
            ) from exc
    return Dialogue(dialogue_id=record.dialogue_id, turns=turns)


def _to_turn(record: TurnRecord) -> Turn:
    tokens = [SOS] + [normalize_text(t) for t in record.user_utterance.tokens]
    tokens.append(EOS)
    acts = [
        SystemAct(
            act_type=normalize_text(act.type),
            slot=None if act.slot is None else normalize_text(act.slot),
            value=None if act.value is None else normalize_text(act.value),
        )
        for act in record.system_acts
    ]
    spans = [
        SlotSpan(
            normalize_text(span.slot), span.start + 1, span.exclusive_end + 1
        )
        for span in record.user_utterance.spans
    ]
    return Turn(
        system_acts=acts,
        user_tokens=tokens,
        gold_intent=record.intent,
        gold_user_acts=frozenset(normalize_text(a) for a in record.user_acts),
        gold_slot_spans=spans,
        gold_state={
            normalize_text(state.slot): normalize_text(state.value)
            for state in record.dialogue_state
        },
    )


def write_corpus(path: Path, records: list[DialogueRecord]) -> None:
    """Write canonical records as a corpus file."""
    path.parent.mkdir(parents=True, exist_ok=True)
    data = [record.model_dump(exclude_none=True) for record in records]
    path.write_text(json.dumps(data, indent=1) + "\n", encoding="utf-8")


def adapt_simulated_dialogues(
    raw: list[dict[str, Any]],
) -> list[DialogueRecord]:
    """Map published Simulated Dialogues records onto the canonical schema.

    The published files list ``user_intents`` only on the turn where the
    intent is stated; it is carried forward to the following turns.  User
    acts keep only their act type.
    """
    records = []
    for dialogue in raw:
        intent: str | None = None
        turns = []
        for turn in dialogue["turns"]:
            if turn.get("user_intents"):
                intent = turn["user_intents"][0]
            utterance = turn["user_utterance"]
            user_acts = [
                act["type"].lower() for act in turn.get("user_acts", [])
            ]
            turns.append(
                TurnRecord(
                    system_acts=[
                        SystemActRecord(
                            type=act["type"].lower(),
                            slot=act.get("slot"),
                            value=act.get("value"),
                        )
                        for act in turn.get("system_acts", [])
                    ],
                    user_utterance=UtteranceRecord(
                        tokens=utterance["tokens"],
                        spans=[
                            SpanRecord(
                                slot=span["slot"],
                                start=span["start"],
                                exclusive_end=span["exclusive_end"],
                            )
                            for span in utterance.get("slots", [])
                        ],
                    ),
                    intent=intent,
                    user_acts=list(dict.fromkeys(user_acts)),
                    dialogue_state=[
                        StateRecord(slot=s["slot"], value=s["value"])
                        for s in turn.get("dialogue_state", [])
                    ],
                )
            )
        records.append(
            DialogueRecord(dialogue_id=dialogue["dialogue_id"], turns=turns)
        )
    return records
