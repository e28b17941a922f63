"""Evaluation metrics and significance testing.

Evaluation always runs the model on its own predictions: the candidate sets
are filled from predicted tags and the scorer reads the predicted previous
state.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from typing import Any

import numpy as np
import structlog
from pydantic import BaseModel, Field
from statsmodels.stats.contingency_tables import mcnemar
from structlog.stdlib import BoundLogger

from ..dialogue import DONTCARE, Dialogue
from ..exceptions import MetricsError
from ..network.lu import select_acts
from ..tagging import derive_iob_tags
from .tracker import DialogueTracker, TurnPrediction

__all__ = [
    "THRESHOLD_GRID",
    "Evaluator",
    "MetricsReport",
    "compute_metrics",
    "format_table",
    "mcnemar_test",
    "tune_act_threshold",
]

THRESHOLD_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))


class MetricsReport(BaseModel):
    """Metrics of one evaluation run, plus per-turn correctness."""

    name: str = Field("", title="Corpus label")
    dialogues: int = Field(0, title="Dialogues evaluated")
    turns: int = Field(0, title="Turns evaluated")
    intent_accuracy: float = Field(
        0.0, title="Intent accuracy over turns with a gold intent"
    )
    act_f1: float = Field(0.0, title="Micro-averaged user act F1")
    slot_frame_accuracy: float = Field(
        0.0, title="Fraction of turns with every slot tag correct"
    )
    joint_goal_accuracy: float = Field(
        0.0, title="Fraction of turns whose whole state is correct"
    )
    dst_slot_f1: float = Field(
        0.0, title="Micro F1 over (turn, slot, value) triples"
    )
    unreachable_gold: int = Field(
        0, title="Gold values missing from the candidate sets"
    )
    frame_correct: list[bool] = Field(default_factory=list)
    joint_goal_correct: list[bool] = Field(default_factory=list)
    intent_correct: list[bool | None] = Field(default_factory=list)
    act_correct: list[bool] = Field(default_factory=list)

    def summary(self) -> dict[str, Any]:
        """Return the report without the per-turn bitmaps."""
        return self.model_dump(
            exclude={
                "frame_correct",
                "joint_goal_correct",
                "intent_correct",
                "act_correct",
            }
        )


def _ratio(numerator: int, denominator: int) -> float:
    return numerator / denominator if denominator else 0.0


def _f1(true_positive: int, false_positive: int, false_negative: int) -> float:
    denominator = 2 * true_positive + false_positive + false_negative
    return 2 * true_positive / denominator if denominator else 1.0


def _align(
    predictions: Sequence[Sequence[TurnPrediction]],
    dialogues: Sequence[Dialogue],
) -> None:
    if len(predictions) != len(dialogues):
        raise MetricsError(
            f"{len(predictions)} predicted dialogues for {len(dialogues)}"
            " gold dialogues"
        )
    for predicted, dialogue in zip(predictions, dialogues, strict=True):
        if len(predicted) != len(dialogue.turns):
            raise MetricsError(
                f"Dialogue {dialogue.dialogue_id}: {len(predicted)} predicted"
                f" turns for {len(dialogue.turns)} gold turns"
            )


def compute_metrics(
    predictions: Sequence[Sequence[TurnPrediction]],
    dialogues: Sequence[Dialogue],
    *,
    name: str = "",
) -> MetricsReport:
    """Compute the LU and DST metrics of aligned predictions.

    Frame accuracy ignores the SOS and EOS positions.  Dontcare is compared
    like any other value and null slots are absent on both sides.

    Raises
    ------
    MetricsError
        If the predictions do not line up with the gold dialogues.
    """
    _align(predictions, dialogues)
    report = MetricsReport(name=name, dialogues=len(dialogues))
    acts = [0, 0, 0]
    slots = [0, 0, 0]
    intent_hits = intent_total = 0
    for predicted, dialogue in zip(predictions, dialogues, strict=True):
        for prediction, turn in zip(predicted, dialogue.turns, strict=True):
            report.turns += 1
            if turn.gold_intent is None:
                report.intent_correct.append(None)
            else:
                hit = prediction.intent == turn.gold_intent
                intent_total += 1
                intent_hits += hit
                report.intent_correct.append(hit)

            acts[0] += len(prediction.acts & turn.gold_user_acts)
            acts[1] += len(prediction.acts - turn.gold_user_acts)
            acts[2] += len(turn.gold_user_acts - prediction.acts)
            report.act_correct.append(prediction.acts == turn.gold_user_acts)

            gold_tags = derive_iob_tags(turn.user_tokens, turn.gold_slot_spans)
            report.frame_correct.append(
                prediction.tags[1:-1] == gold_tags[1:-1]
            )

            predicted_pairs = set(prediction.state.items())
            gold_pairs = set(turn.gold_state.items())
            slots[0] += len(predicted_pairs & gold_pairs)
            slots[1] += len(predicted_pairs - gold_pairs)
            slots[2] += len(gold_pairs - predicted_pairs)
            report.joint_goal_correct.append(predicted_pairs == gold_pairs)
            for slot, value in turn.gold_state.items():
                distribution = prediction.distributions.get(slot)
                if value == DONTCARE:
                    continue
                if (
                    distribution is None
                    or value not in distribution.candidates
                ):
                    report.unreachable_gold += 1

    report.intent_accuracy = _ratio(intent_hits, intent_total)
    report.act_f1 = _f1(*acts)
    report.slot_frame_accuracy = _ratio(
        sum(report.frame_correct), report.turns
    )
    report.joint_goal_accuracy = _ratio(
        sum(report.joint_goal_correct), report.turns
    )
    report.dst_slot_f1 = _f1(*slots)
    return report


def mcnemar_test(
    correct_a: Sequence[bool], correct_b: Sequence[bool]
) -> float:
    """Exact two-sided McNemar test on paired per-turn correctness.

    Returns 1.0 when the two systems never disagree.

    Raises
    ------
    MetricsError
        If the bitmaps have different lengths.
    """
    if len(correct_a) != len(correct_b):
        raise MetricsError(
            f"Cannot pair {len(correct_a)} and {len(correct_b)} outcomes"
        )
    a = np.asarray(correct_a, dtype=bool)
    b = np.asarray(correct_b, dtype=bool)
    only_a = int(np.sum(a & ~b))
    only_b = int(np.sum(~a & b))
    if only_a + only_b == 0:
        return 1.0
    table = [[int(np.sum(a & b)), only_a], [only_b, int(np.sum(~a & ~b))]]
    return float(mcnemar(table, exact=True).pvalue)


def tune_act_threshold(
    predictions: Sequence[Sequence[TurnPrediction]],
    dialogues: Sequence[Dialogue],
    labels: Sequence[str],
    grid: Iterable[float] = THRESHOLD_GRID,
) -> tuple[float, float]:
    """Pick the act threshold with the best micro act F1.

    Ties go to the threshold closest to 0.5, then to the lower one.

    Returns
    -------
    tuple of float
        Best threshold and its act F1.
    """
    _align(predictions, dialogues)
    best: tuple[float, float, float] | None = None
    for threshold in grid:
        counts = [0, 0, 0]
        for predicted, dialogue in zip(predictions, dialogues, strict=True):
            turns = zip(predicted, dialogue.turns, strict=True)
            for prediction, turn in turns:
                acts = select_acts(
                    prediction.act_probabilities[: len(labels)],
                    labels,
                    threshold,
                )
                counts[0] += len(acts & turn.gold_user_acts)
                counts[1] += len(acts - turn.gold_user_acts)
                counts[2] += len(turn.gold_user_acts - acts)
        f1 = _f1(*counts)
        key = (-f1, abs(threshold - 0.5), threshold)
        if best is None or key < best:
            best = key
    if best is None:
        raise ValueError("Empty threshold grid")
    return best[2], -best[0]


_COLUMNS = (
    ("Corpus", "name"),
    ("Intent Acc", "intent_accuracy"),
    ("Act F1", "act_f1"),
    ("Frame Acc", "slot_frame_accuracy"),
    ("Joint Goal", "joint_goal_accuracy"),
    ("DST Slot F1", "dst_slot_f1"),
)


def format_table(reports: Iterable[MetricsReport]) -> str:
    """Render reports as a plain-text table, one row per report."""
    rows = [[title for title, _ in _COLUMNS]]
    for report in reports:
        values = report.model_dump()
        rows.append(
            [values["name"]]
            + [f"{values[key]:.3f}" for _, key in _COLUMNS[1:]]
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(_COLUMNS))]
    lines = [
        " | ".join(cell.ljust(width) for cell, width in zip(row, widths))
        for row in rows
    ]
    lines.insert(1, "-+-".join("-" * width for width in widths))
    return "\n".join(lines)


class Evaluator:
    """Run the tracker over corpora and score the predictions.

    Parameters
    ----------
    tracker
        Tracker wrapping the model under evaluation.
    logger
        Logger to use.
    """

    def __init__(
        self,
        tracker: DialogueTracker,
        *,
        logger: BoundLogger | None = None,
    ) -> None:
        self.tracker = tracker
        self._logger = logger or structlog.get_logger(__name__)

    def predict(
        self, dialogues: Sequence[Dialogue]
    ) -> list[list[TurnPrediction]]:
        return [self.tracker.predict_dialogue(d) for d in dialogues]

    def evaluate(
        self, dialogues: Sequence[Dialogue], *, name: str = ""
    ) -> tuple[MetricsReport, list[list[TurnPrediction]]]:
        predictions = self.predict(dialogues)
        report = compute_metrics(predictions, dialogues, name=name)
        self._logger.info(
            f"Evaluated {report.turns} turns of {name or 'corpus'}",
            **report.summary(),
        )
        return report, predictions

    def evaluate_corpora(
        self, corpora: Mapping[str, Sequence[Dialogue]]
    ) -> tuple[list[MetricsReport], dict[str, list[list[TurnPrediction]]]]:
        """Evaluate each corpus, then their union if there are several.

        The union row reuses the per-corpus predictions.
        """
        reports = []
        predictions = {}
        for name, dialogues in corpora.items():
            report, predictions[name] = self.evaluate(dialogues, name=name)
            reports.append(report)
        if len(corpora) > 1:
            union_name = " + ".join(corpora)
            reports.append(
                compute_metrics(
                    [p for name in corpora for p in predictions[name]],
                    [d for dialogues in corpora.values() for d in dialogues],
                    name=union_name,
                )
            )
        return reports, predictions
