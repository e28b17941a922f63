"""Dialogue domain types."""

from __future__ import annotations

from dataclasses import dataclass, field

from .exceptions import SpanError, SystemActError

__all__ = [
    "DONTCARE",
    "EOS",
    "OOV",
    "PAD",
    "SOS",
    "Dialogue",
    "SlotSpan",
    "SystemAct",
    "Turn",
]

PAD = "<pad>"
OOV = "<unk>"
SOS = "<sos>"
EOS = "<eos>"

DONTCARE = "dontcare"
"""State value meaning the user accepts any value for the slot."""


@dataclass(frozen=True, slots=True)
class SystemAct:
    """A system dialogue act with optional slot and value parameters."""

    act_type: str
    slot: str | None = None
    value: str | None = None

    def __post_init__(self) -> None:
        if self.value is not None and self.slot is None:
            raise SystemActError(
                f"System act {self.act_type} has value {self.value!r}"
                " but no slot"
            )

    def __str__(self) -> str:
        if self.slot is None:
            return self.act_type
        if self.value is None:
            return f"{self.act_type}({self.slot})"
        return f"{self.act_type}({self.slot}={self.value})"


@dataclass(frozen=True, slots=True)
class SlotSpan:
    """A slot value occupying tokens ``[start, end)`` of an utterance."""

    slot: str
    start: int
    end: int


@dataclass(slots=True)
class Turn:
    """One dialogue turn.

    ``user_tokens`` include the SOS and EOS markers, and span offsets are
    relative to that token list, so a span never covers index 0 or the
    last index.
    """

    system_acts: list[SystemAct]
    user_tokens: list[str]
    gold_intent: str | None = None
    gold_user_acts: frozenset[str] = frozenset()
    gold_slot_spans: list[SlotSpan] = field(default_factory=list)
    gold_state: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        check_spans(self.gold_slot_spans, len(self.user_tokens))

    @property
    def inner_tokens(self) -> list[str]:
        """Tokens without the SOS and EOS markers."""
        return self.user_tokens[1:-1]

    def span_values(self) -> list[tuple[str, str]]:
        """Return the (slot, value) pairs marked by the gold spans."""
        return [
            (span.slot, " ".join(self.user_tokens[span.start : span.end]))
            for span in self.gold_slot_spans
        ]


@dataclass(slots=True)
class Dialogue:
    """An ordered sequence of turns."""

    dialogue_id: str
    turns: list[Turn]

    def __post_init__(self) -> None:
        if not self.turns:
            raise ValueError(f"Dialogue {self.dialogue_id} has no turns")

    def __len__(self) -> int:
        return len(self.turns)


def check_spans(spans: list[SlotSpan], length: int) -> None:
    """Reject spans that overlap or touch the SOS/EOS positions.

    Raises
    ------
    SpanError
        If a span is empty, out of ``[1, length - 1)`` or overlaps another.
    """
    covered: set[int] = set()
    for span in spans:
        if not 1 <= span.start < span.end <= length - 1:
            raise SpanError(
                f"Span {span.slot}[{span.start}:{span.end}) outside"
                f" [1, {length - 1})"
            )
        positions = set(range(span.start, span.end))
        if positions & covered:
            raise SpanError(
                f"Span {span.slot}[{span.start}:{span.end}) overlaps"
                " another span"
            )
        covered |= positions
