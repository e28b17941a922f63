"""Joint training with scheduled sampling."""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any, TypeVar

import numpy as np
import structlog
from structlog.stdlib import BoundLogger

from ..autodiff import Adam, AdamState, Tape, Tensor, backward
from ..autodiff import ops
from ..config import TrainConfig
from ..dialogue import Dialogue, Turn
from ..exceptions import TrainingDivergedError
from ..network.dst import SlotScores, gold_label
from ..network.model import JointModel, TurnOutput
from ..storage.checkpoint import save_checkpoint
from ..storage.records import TrainingLog
from ..tagging import (
    apply_slot_value_dropout,
    derive_iob_tags,
    dropout_probability,
)
from .evaluator import Evaluator, MetricsReport, tune_act_threshold
from .tracker import DialogueTracker

__all__ = [
    "SamplingSchedule",
    "TaskLosses",
    "Trainer",
    "TrainingResult",
    "keep_probability",
    "sample_state",
    "sample_tags",
    "total_loss",
    "turn_loss",
]

T = TypeVar("T")


@dataclass(frozen=True)
class SamplingSchedule:
    """Probability of keeping a gold input as training progresses.

    The probability stays at 1 for the first ``pretrain_steps`` steps, then
    decreases linearly to ``min_probability`` at ``max_steps``.
    """

    pretrain_steps: int
    max_steps: int
    min_probability: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 < self.min_probability <= 1.0:
            raise ValueError(
                f"Minimum keep probability must be in (0, 1]:"
                f" {self.min_probability}"
            )
        if not 0 <= self.pretrain_steps <= self.max_steps:
            raise ValueError(
                f"Need 0 <= pretrain steps ({self.pretrain_steps}) <= max"
                f" steps ({self.max_steps})"
            )

    @classmethod
    def constant(cls, max_steps: int) -> SamplingSchedule:
        """A schedule that always keeps the gold input."""
        return cls(max_steps, max_steps, 1.0)


def keep_probability(step: int, schedule: SamplingSchedule) -> float:
    """Return the keep probability at ``step``.

    Steps past the end of the schedule get the final probability.
    """
    k = max(step, 0)
    if k <= schedule.pretrain_steps:
        return 1.0
    if k >= schedule.max_steps:
        return schedule.min_probability
    span = schedule.max_steps - schedule.pretrain_steps
    progress = (k - schedule.pretrain_steps) / span
    return 1.0 - (1.0 - schedule.min_probability) * progress


def _choose(
    gold: T, predicted: T, probability: float, rng: np.random.Generator
) -> T:
    # One draw whatever the probability, so the random stream is the same
    # for every sampling setup.
    keep = rng.random() < probability
    return gold if keep else predicted


def sample_tags(
    gold_tags: Sequence[str],
    predicted_tags: Sequence[str],
    probability: float,
    rng: np.random.Generator,
) -> Sequence[str]:
    """Pick the gold tags with ``probability``, else the predicted ones."""
    if len(gold_tags) != len(predicted_tags):
        raise ValueError(
            f"{len(gold_tags)} gold tags and {len(predicted_tags)} predicted"
        )
    return _choose(gold_tags, predicted_tags, probability, rng)


def sample_state(
    gold_state: Mapping[str, SlotScores],
    predicted_state: Mapping[str, SlotScores],
    probability: float,
    rng: np.random.Generator,
) -> Mapping[str, SlotScores]:
    """Pick the gold previous state with ``probability``.

    Both states hold plain probabilities, so no gradient flows back through
    whichever one is picked.
    """
    return _choose(gold_state, predicted_state, probability, rng)


@dataclass
class TaskLosses:
    """Loss of each task, summed over the turns seen so far."""

    intent: Tensor
    acts: Tensor
    tags: Tensor
    state: Tensor
    unreachable: int = 0

    @classmethod
    def zeros(cls, dtype: np.dtype) -> TaskLosses:
        return cls(*(Tensor(np.zeros((), dtype=dtype)) for _ in range(4)))

    def __iadd__(self, other: TaskLosses) -> TaskLosses:
        self.intent = ops.add(self.intent, other.intent)
        self.acts = ops.add(self.acts, other.acts)
        self.tags = ops.add(self.tags, other.tags)
        self.state = ops.add(self.state, other.state)
        self.unreachable += other.unreachable
        return self

    def total(self) -> Tensor:
        return ops.add(
            ops.add(self.intent, self.acts), ops.add(self.tags, self.state)
        )

    def breakdown(self) -> dict[str, float]:
        return {
            "intent": self.intent.item(),
            "acts": self.acts.item(),
            "tags": self.tags.item(),
            "state": self.state.item(),
        }


def turn_loss(
    output: TurnOutput, turn: Turn, model: JointModel
) -> TaskLosses:
    """Sum the task losses of one turn.

    Intent is softmax cross entropy, only when the turn has a known gold
    intent.  Acts use sigmoid cross entropy.  Tags use softmax cross entropy
    at every position but SOS and EOS.  Each slot in scope adds the cross
    entropy of its gold label.  Gold values that the candidate sets missed
    are counted as unreachable.
    """
    vocab = model.vocab
    reading = output.reading
    losses = TaskLosses.zeros(model.dtype)
    if turn.gold_intent is not None and turn.gold_intent in vocab.intents:
        losses.intent = ops.cross_entropy(
            reading.intent_logits, vocab.intents.index(turn.gold_intent)
        )
    if vocab.user_acts:
        targets = [float(a in turn.gold_user_acts) for a in vocab.user_acts]
        losses.acts = ops.bce_with_logits(reading.act_logits, targets)

    tag_index = {tag: i for i, tag in enumerate(vocab.tags)}
    gold_tags = derive_iob_tags(turn.user_tokens, turn.gold_slot_spans)
    weights = np.ones(len(gold_tags))
    weights[0] = weights[-1] = 0.0
    losses.tags = ops.cross_entropy(
        reading.tag_logits, [tag_index.get(t, 0) for t in gold_tags], weights
    )

    for slot, logits in output.slot_logits.items():
        label, reachable = gold_label(
            output.candidates[slot], turn.gold_state.get(slot)
        )
        losses.unreachable += not reachable
        losses.state = ops.add(losses.state, ops.cross_entropy(logits, label))
    missing = set(turn.gold_state) - set(output.slot_logits)
    losses.unreachable += len(missing)
    return losses


def total_loss(
    outputs: Sequence[TurnOutput], turns: Sequence[Turn], model: JointModel
) -> Tensor:
    """Sum every task loss over aligned turn outputs."""
    losses = TaskLosses.zeros(model.dtype)
    for output, turn in zip(outputs, turns, strict=True):
        losses += turn_loss(output, turn, model)
    return losses.total()


@dataclass
class TrainingResult:
    """Outcome of a training run."""

    steps: int
    final_loss: float
    last_checkpoint: Path
    best_checkpoint: Path | None = None
    best_step: int | None = None
    best_report: MetricsReport | None = None
    act_threshold: float | None = None


class Trainer:
    """Train a model on full dialogues with ADAM.

    Each step processes ``batch_size`` dialogues, back-propagating through
    all of their turns.  Slot value dropout and scheduled sampling follow
    their linear schedules.

    Parameters
    ----------
    model
        Model to train in place.
    config
        Training configuration.
    train_dialogues
        Training split.
    dev_dialogues
        Development split used for periodic evaluation, checkpoint
        selection and act threshold tuning.  May be empty.
    logger
        Logger to use.
    """

    def __init__(
        self,
        model: JointModel,
        config: TrainConfig,
        train_dialogues: Sequence[Dialogue],
        dev_dialogues: Sequence[Dialogue] = (),
        *,
        logger: BoundLogger | None = None,
    ) -> None:
        if not train_dialogues:
            raise ValueError("Cannot train on an empty corpus")
        self.model = model
        self.config = config
        self.train_dialogues = list(train_dialogues)
        self.dev_dialogues = list(dev_dialogues)
        if config.max_dev_dialogues:
            self.dev_dialogues = self.dev_dialogues[: config.max_dev_dialogues]
        self._logger = logger or structlog.get_logger(__name__)
        self._rng = np.random.default_rng(config.seed)
        self.optimizer = Adam(
            model.parameter_set, AdamState(learning_rate=config.learning_rate)
        )
        steps = config.max_steps
        sampled = SamplingSchedule(
            config.pretrain_steps, steps, config.min_keep_probability
        )
        pinned = SamplingSchedule.constant(steps)
        setup = config.sampling
        self.tag_schedule = sampled if setup.samples_tags else pinned
        self.state_schedule = sampled if setup.samples_state else pinned
        self._order: list[int] = []

    def _next_batch(self) -> list[Dialogue]:
        size = min(self.config.batch_size, len(self.train_dialogues))
        batch = []
        while len(batch) < size:
            if not self._order:
                permutation = self._rng.permutation(len(self.train_dialogues))
                self._order = [int(i) for i in permutation]
            batch.append(self.train_dialogues[self._order.pop(0)])
        return batch

    def dialogue_loss(
        self,
        dialogue: Dialogue,
        *,
        tag_probability: float = 1.0,
        state_probability: float = 1.0,
        dropout: float = 0.0,
    ) -> TaskLosses:
        """Run one dialogue with sampled inputs and return its losses."""
        model = self.model
        rng = self._rng
        history = model.start()
        losses = TaskLosses.zeros(model.dtype)
        for turn in dialogue.turns:
            tokens = apply_slot_value_dropout(
                turn.user_tokens, turn.gold_slot_spans, dropout, rng
            )
            reading = model.read_turn(
                history,
                turn.system_acts,
                turn.user_tokens,
                input_tokens=tokens,
            )
            gold_tags = derive_iob_tags(turn.user_tokens, turn.gold_slot_spans)
            tags = sample_tags(
                gold_tags, reading.lu.tags, tag_probability, rng
            )
            previous = sample_state(
                history.gold_scores,
                history.predicted_scores,
                state_probability,
                rng,
            )
            output = model.update_state(
                history, reading, tags, previous, gold=turn
            )
            losses += turn_loss(output, turn, model)
            history = output.history
        return losses

    def step(self, step: int) -> dict[str, Any]:
        """Run one optimization step and return its log record.

        Parameters
        ----------
        step
            Zero-based index of the step.

        Raises
        ------
        TrainingDivergedError
            If the loss is not finite.
        """
        config = self.config
        # Schedules see the 1-based step so the last step reaches their end.
        k = step + 1
        p_tags = keep_probability(k, self.tag_schedule)
        p_state = keep_probability(k, self.state_schedule)
        dropout = dropout_probability(k, config.max_steps, config.max_dropout)
        batch = self._next_batch()
        with Tape() as tape:
            losses = TaskLosses.zeros(self.model.dtype)
            for dialogue in batch:
                losses += self.dialogue_loss(
                    dialogue,
                    tag_probability=p_tags,
                    state_probability=p_state,
                    dropout=dropout,
                )
            loss = losses.total()
        value = loss.item()
        if not math.isfinite(value):
            raise TrainingDivergedError(step + 1, value)
        backward(tape, loss, self.model.parameter_set)
        self.optimizer.step()
        return {
            "step": step + 1,
            "loss": value,
            "losses": losses.breakdown(),
            "p_c": p_tags,
            "p_D": p_state,
            "dropout_p": dropout,
            "unreachable_gold": losses.unreachable,
        }

    def evaluate_dev(self) -> MetricsReport | None:
        """Evaluate on dev and tune the act threshold on the same run.

        Act probabilities do not depend on the threshold, so one pass over
        dev serves both.
        """
        if not self.dev_dialogues:
            return None
        evaluator = Evaluator(DialogueTracker(self.model), logger=self._logger)
        report, predictions = evaluator.evaluate(
            self.dev_dialogues, name="dev"
        )
        threshold, f1 = tune_act_threshold(
            predictions, self.dev_dialogues, self.model.vocab.user_acts
        )
        self.model.settings = self.model.settings.model_copy(
            update={"act_threshold": threshold}
        )
        self._logger.debug(
            f"Act threshold tuned to {threshold} (dev act F1 {f1:.3f})"
        )
        return report

    def train(self) -> TrainingResult:
        """Run the configured number of steps and write checkpoints.

        ``last.json`` holds the final model and ``best.json`` the model with
        the best dev joint goal accuracy seen at an evaluation step.  The
        log ``train.jsonl`` gets one record per logged step.
        """
        config = self.config
        output = config.output_dir
        best_path = output / "best.json"
        last_path = output / "last.json"
        result = TrainingResult(
            steps=config.max_steps,
            final_loss=math.nan,
            last_checkpoint=last_path,
        )
        self._logger.info(
            f"Training {self.model.parameter_set.count()} weights on"
            f" {len(self.train_dialogues)} dialogues for {config.max_steps}"
            f" steps (sampling: {config.sampling.value})"
        )
        with TrainingLog(output / "train.jsonl") as log:
            for step in range(config.max_steps):
                record = self.step(step)
                result.final_loss = record["loss"]
                done = record["step"]
                last = done == config.max_steps
                evaluate = config.eval_every > 0 and (
                    done % config.eval_every == 0 or last
                )
                if evaluate:
                    report = self.evaluate_dev()
                    if report is not None:
                        record["dev"] = report.summary()
                        best = result.best_report
                        if (
                            best is None
                            or report.joint_goal_accuracy
                            > best.joint_goal_accuracy
                        ):
                            result.best_report = report
                            result.best_step = done
                            result.best_checkpoint = best_path
                            save_checkpoint(
                                best_path,
                                self.model,
                                done,
                                logger=self._logger,
                            )
                if done == 1 or done % config.log_every == 0 or evaluate:
                    log.write(record)
                    self._logger.info(
                        f"Step {done}: loss {record['loss']:.4f}",
                        p_c=record["p_c"],
                        p_D=record["p_D"],
                        dropout_p=record["dropout_p"],
                        unreachable_gold=record["unreachable_gold"],
                    )

        if config.eval_every == 0 and self.dev_dialogues:
            self.evaluate_dev()
        if self.dev_dialogues:
            result.act_threshold = self.model.settings.act_threshold
        save_checkpoint(
            last_path, self.model, config.max_steps, logger=self._logger
        )
        self._logger.info(
            f"Finished training with loss {result.final_loss:.4f}",
            best_step=result.best_step,
            act_threshold=result.act_threshold,
        )
        return result
