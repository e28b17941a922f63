"""Utilities for jointdst tests: synthetic dialogues and reference models."""

from __future__ import annotations

import json
from collections.abc import Iterable, Mapping, Sequence
from pathlib import Path
from typing import Any

import numpy as np

from jointdst.config import ModelSettings
from jointdst.dialogue import (
    DONTCARE,
    EOS,
    SOS,
    Dialogue,
    SlotSpan,
    SystemAct,
    Turn,
)
from jointdst.network.model import JointModel
from jointdst.vocab import Vocab, build_vocab

TIMES = ["6 pm", "7 pm", "8 pm", "noon", "7 30 pm"]
PEOPLE = ["2", "3", "4", "five"]
RESTAURANTS = ["cascal", "sakura", "oren 's", "the fish market"]

INTENT = "reserve_restaurant"


def find(tokens: Sequence[str], value: str) -> int:
    """Return the first index where the tokens of ``value`` start."""
    needle = value.split()
    for i in range(len(tokens) - len(needle) + 1):
        if list(tokens[i : i + len(needle)]) == needle:
            return i
    raise ValueError(f"{value!r} not in {tokens}")


def make_turn(
    words: str,
    *,
    acts: Sequence[SystemAct] = (),
    spans: Sequence[tuple[str, str]] = (),
    state: Mapping[str, str] | None = None,
    intent: str | None = INTENT,
    user_acts: Iterable[str] = ("inform",),
) -> Turn:
    """Build a turn, locating each (slot, value) span in the utterance."""
    tokens = [SOS, *words.split(), EOS]
    slot_spans = []
    for slot, value in spans:
        start = find(tokens, value)
        slot_spans.append(SlotSpan(slot, start, start + len(value.split())))
    return Turn(
        system_acts=list(acts),
        user_tokens=tokens,
        gold_intent=intent,
        gold_user_acts=frozenset(user_acts),
        gold_slot_spans=slot_spans,
        gold_state=dict(state or {}),
    )


def restaurant_dialogue(
    dialogue_id: str,
    rng: np.random.Generator,
    *,
    times: Sequence[str] = TIMES,
    people_values: Sequence[str] = PEOPLE,
    restaurants: Sequence[str] = RESTAURANTS,
) -> Dialogue:
    """Build a three-turn table reservation dialogue with random values."""
    time, other_time = rng.choice(times, size=2, replace=False)
    people = str(rng.choice(people_values))
    name = str(rng.choice(restaurants))
    state = {"people": people, "time": str(time)}
    first = make_turn(
        f"book a table for {people} people at {time}",
        acts=[SystemAct("greeting")],
        spans=[("people", people), ("time", str(time))],
        state=state,
    )
    state = {**state, "time": str(other_time), "restaurant_name": name}
    second = make_turn(
        f"{time} is not good for us . how about {other_time} ?",
        acts=[
            SystemAct("offer", "restaurant_name", name),
            SystemAct("offer", "time", str(time)),
        ],
        spans=[("time", str(other_time))],
        state=state,
        user_acts=("negate", "inform"),
    )
    if rng.random() < 0.5:
        third = make_turn(
            "yes please",
            acts=[SystemAct("confirm", "time", str(other_time))],
            state=state,
            user_acts=("affirm",),
        )
    else:
        state = {**state, "time": DONTCARE}
        third = make_turn(
            "any time is fine",
            acts=[SystemAct("request", "time")],
            state=state,
            user_acts=("inform",),
        )
    return Dialogue(dialogue_id, [first, second, third])


def restaurant_dialogues(
    count: int, seed: int = 0, **values: Sequence[str]
) -> list[Dialogue]:
    rng = np.random.default_rng(seed)
    return [
        restaurant_dialogue(f"d{i}", rng, **values) for i in range(count)
    ]


def small_model(
    dialogues: Sequence[Dialogue],
    *,
    embedding_dim: int = 8,
    capacity: int = 3,
    separate_encoders: bool = False,
    seed: int = 0,
) -> JointModel:
    vocab = build_vocab(dialogues)
    settings = ModelSettings(
        embedding_dim=embedding_dim,
        act_dim=embedding_dim,
        candidate_capacity=capacity,
        separate_encoders=separate_encoders,
    )
    return JointModel(settings, vocab, seed=seed)


def dialogue_record(dialogue: Dialogue) -> dict[str, Any]:
    """Convert a dialogue back to a canonical corpus record."""
    return {
        "dialogue_id": dialogue.dialogue_id,
        "turns": [
            {
                "system_acts": [
                    {
                        k: v
                        for k, v in (
                            ("type", act.act_type),
                            ("slot", act.slot),
                            ("value", act.value),
                        )
                        if v is not None
                    }
                    for act in turn.system_acts
                ],
                "user_utterance": {
                    "tokens": turn.inner_tokens,
                    "spans": [
                        {
                            "slot": span.slot,
                            "start": span.start - 1,
                            "exclusive_end": span.end - 1,
                        }
                        for span in turn.gold_slot_spans
                    ],
                },
                "intent": turn.gold_intent,
                "user_acts": sorted(turn.gold_user_acts),
                "dialogue_state": [
                    {"slot": slot, "value": value}
                    for slot, value in turn.gold_state.items()
                ],
            }
            for turn in dialogue.turns
        ],
    }


def write_corpus_dir(
    directory: Path, splits: Mapping[str, Sequence[Dialogue]]
) -> Path:
    """Write dialogues as a canonical corpus directory."""
    directory.mkdir(parents=True, exist_ok=True)
    for split, dialogues in splits.items():
        records = [dialogue_record(d) for d in dialogues]
        (directory / f"{split}.json").write_text(json.dumps(records))
    return directory


def naive_candidates(
    previous: Mapping[str, list[str]],
    mentions: Sequence[tuple[str, str]],
    scores: Mapping[str, Mapping[str, float]],
    capacity: int,
) -> dict[str, list[str]]:
    """Straightforward reference for the candidate set update.

    Each mention is inserted in order.  A mention repeated later in the
    same turn is moved to its last position first.  When a set overflows,
    the oldest of the lowest-scored values not mentioned this turn goes.
    """
    result = {slot: list(values) for slot, values in previous.items()}
    last: dict[str, list[str]] = {}
    for slot, value in mentions:
        order = last.setdefault(slot, [])
        if value in order:
            order.remove(value)
        order.append(value)
    for slot, order in last.items():
        values = result.setdefault(slot, [])
        slot_scores = scores.get(slot, {})
        keep = order[-capacity:]
        for value in keep:
            if value in values:
                continue
            if len(values) == capacity:
                lowest = min(
                    slot_scores.get(v, 0.0)
                    for v in values
                    if v not in keep
                )
                for v in values:
                    if v not in keep and slot_scores.get(v, 0.0) == lowest:
                        values.remove(v)
                        break
            values.append(value)
    return result


def label_vocab(slots: Sequence[str] = ("time", "people")) -> Vocab:
    return Vocab(
        tokens=["a", "b"],
        intents=[INTENT],
        user_acts=["affirm", "inform"],
        system_acts=["greeting", "offer", "request"],
        slots=list(slots),
    )
