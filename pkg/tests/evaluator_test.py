"""Tests for the evaluation metrics."""

from __future__ import annotations

from collections.abc import Mapping

import numpy as np
import pytest

from jointdst.dialogue import DONTCARE, Dialogue, Turn
from jointdst.exceptions import MetricsError
from jointdst.network.dst import SlotDistribution
from jointdst.service.evaluator import (
    Evaluator,
    MetricsReport,
    compute_metrics,
    format_table,
    mcnemar_test,
    tune_act_threshold,
)
from jointdst.service.tracker import DialogueTracker, TurnPrediction
from jointdst.tagging import derive_iob_tags
from tests.util import make_turn, restaurant_dialogues, small_model


def _predict(
    turn: Turn,
    *,
    state: Mapping[str, str] | None = None,
    acts: frozenset[str] | None = None,
    intent: str | None = None,
    tags: list[str] | None = None,
    act_probabilities: list[float] | None = None,
) -> TurnPrediction:
    """Build a prediction matching the gold turn unless told otherwise."""
    state = dict(turn.gold_state if state is None else state)
    return TurnPrediction(
        intent=turn.gold_intent if intent is None else intent,
        acts=turn.gold_user_acts if acts is None else acts,
        act_probabilities=np.array(act_probabilities or []),
        tags=tags or derive_iob_tags(turn.user_tokens, turn.gold_slot_spans),
        values=[],
        distributions={
            slot: SlotDistribution(slot, [value], np.array([0.0, 0.0, 1.0]))
            for slot, value in state.items()
        },
        state=state,
    )


def _dialogue() -> Dialogue:
    return Dialogue(
        "d",
        [
            make_turn(
                "table for 2",
                spans=[("people", "2")],
                state={"people": "2"},
            ),
            make_turn(
                "at 7 pm",
                spans=[("time", "7 pm")],
                state={"people": "2", "time": "7 pm"},
                intent=None,
                user_acts=("inform", "affirm"),
            ),
        ],
    )


def test_perfect_predictions() -> None:
    dialogue = _dialogue()
    predictions = [[_predict(turn) for turn in dialogue.turns]]
    report = compute_metrics(predictions, [dialogue], name="sim")
    assert report.turns == 2
    assert report.intent_accuracy == 1.0
    assert report.act_f1 == 1.0
    assert report.slot_frame_accuracy == 1.0
    assert report.joint_goal_accuracy == 1.0
    assert report.dst_slot_f1 == 1.0
    assert report.intent_correct == [True, None]


def test_partial_predictions() -> None:
    dialogue = _dialogue()
    first, second = dialogue.turns
    predictions = [
        [
            _predict(first, intent="find_movie", acts=frozenset()),
            _predict(
                second,
                state={"people": "2", "time": "8 pm"},
                tags=["O"] * len(second.user_tokens),
            ),
        ]
    ]
    report = compute_metrics(predictions, [dialogue])
    assert report.intent_accuracy == 0.0
    assert report.act_f1 == pytest.approx(2 * 2 / (2 * 2 + 1))
    assert report.frame_correct == [True, False]
    assert report.joint_goal_correct == [True, False]
    assert report.joint_goal_accuracy == 0.5
    assert report.dst_slot_f1 == pytest.approx(2 * 2 / (2 * 2 + 1 + 1))
    assert report.unreachable_gold == 1


def test_dontcare_is_a_value() -> None:
    turn = make_turn("any time", state={"time": DONTCARE})
    dialogue = Dialogue("d", [turn])
    good = compute_metrics([[_predict(turn)]], [dialogue])
    bad = compute_metrics([[_predict(turn, state={})]], [dialogue])
    assert good.joint_goal_accuracy == 1.0
    assert bad.joint_goal_accuracy == 0.0
    assert good.unreachable_gold == 0


def test_misaligned_predictions() -> None:
    dialogue = _dialogue()
    with pytest.raises(MetricsError):
        compute_metrics([], [dialogue])
    with pytest.raises(MetricsError):
        compute_metrics([[_predict(dialogue.turns[0])]], [dialogue])


def test_mcnemar() -> None:
    a = [True] * 10 + [False] * 2 + [True] * 5
    b = [False] * 10 + [True] * 2 + [True] * 5
    assert mcnemar_test(a, b) == pytest.approx(0.0386, abs=1e-4)
    assert mcnemar_test([True, False], [True, False]) == 1.0
    with pytest.raises(MetricsError):
        mcnemar_test([True], [True, False])


def test_tune_act_threshold() -> None:
    turn = make_turn("yes", user_acts=("affirm",))
    dialogue = Dialogue("d", [turn])
    labels = ["affirm", "inform"]
    predictions = [[_predict(turn, act_probabilities=[0.65, 0.25])]]
    threshold, f1 = tune_act_threshold(predictions, [dialogue], labels)
    assert f1 == 1.0
    assert threshold == 0.5

    predictions = [[_predict(turn, act_probabilities=[0.35, 0.05])]]
    threshold, _ = tune_act_threshold(predictions, [dialogue], labels)
    assert threshold == 0.3

    predictions = [[_predict(turn, act_probabilities=[0.95, 0.85])]]
    threshold, _ = tune_act_threshold(predictions, [dialogue], labels)
    assert threshold == 0.9


def test_tune_act_threshold_tie_goes_low() -> None:
    turn = make_turn("yes", user_acts=())
    dialogue = Dialogue("d", [turn])
    predictions = [[_predict(turn, act_probabilities=[0.45])]]
    threshold, f1 = tune_act_threshold(
        predictions, [dialogue], ["affirm"], grid=[0.4, 0.5, 0.6]
    )
    assert (threshold, f1) == (0.5, 1.0)
    predictions = [[_predict(turn, act_probabilities=[0.3])]]
    threshold, _ = tune_act_threshold(
        predictions, [dialogue], ["affirm"], grid=[0.6, 0.4]
    )
    assert threshold == 0.4


def test_format_table() -> None:
    table = format_table(
        [
            MetricsReport(name="sim-M", joint_goal_accuracy=0.5),
            MetricsReport(name="sim-R", act_f1=1.0),
        ]
    )
    lines = table.splitlines()
    assert len(lines) == 4
    assert lines[0].startswith("Corpus")
    assert "Joint Goal" in lines[0]
    assert set(lines[1]) <= {"-", "+"}
    assert lines[2].startswith("sim-M")
    assert "0.500" in lines[2]
    assert "1.000" in lines[3]


def test_summary_drops_bitmaps() -> None:
    summary = MetricsReport(joint_goal_correct=[True]).summary()
    assert "joint_goal_correct" not in summary
    assert "joint_goal_accuracy" in summary


def test_evaluate_corpora_adds_union() -> None:
    first = restaurant_dialogues(2)
    second = restaurant_dialogues(3, seed=1)
    model = small_model([*first, *second])
    evaluator = Evaluator(DialogueTracker(model))
    reports, predictions = evaluator.evaluate_corpora(
        {"sim-M": first, "sim-R": second}
    )
    assert [r.name for r in reports] == ["sim-M", "sim-R", "sim-M + sim-R"]
    assert reports[2].turns == reports[0].turns + reports[1].turns
    assert reports[2].joint_goal_correct == (
        reports[0].joint_goal_correct + reports[1].joint_goal_correct
    )
    assert len(predictions["sim-R"]) == 3


def test_single_corpus_has_no_union() -> None:
    dialogues = restaurant_dialogues(2)
    evaluator = Evaluator(DialogueTracker(small_model(dialogues)))
    reports, _ = evaluator.evaluate_corpora({"sim-M": dialogues})
    assert len(reports) == 1
