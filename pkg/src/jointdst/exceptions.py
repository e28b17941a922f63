"""Exceptions for jointdst."""

__all__ = [
    "CheckpointError",
    "ConfigError",
    "CorpusFormatError",
    "GradientCheckError",
    "JointDstError",
    "MetricsError",
    "ShapeError",
    "SpanError",
    "SystemActError",
    "TrainingDivergedError",
    "VocabMismatchError",
]


class JointDstError(Exception):
    """Base class for all errors raised by jointdst."""


class ShapeError(JointDstError):
    """A differentiable operation received incompatible shapes."""

    def __init__(
        self, op: str, first: tuple[int, ...], second: tuple[int, ...]
    ) -> None:
        super().__init__(
            f"Shape mismatch in {op}: {first} is incompatible with {second}"
        )
        self.op = op
        self.shapes = (first, second)


class CorpusFormatError(JointDstError):
    """A corpus record does not follow the canonical schema."""

    def __init__(
        self,
        dialogue_id: str,
        turn_index: int | None,
        field: str,
        reason: str,
    ) -> None:
        where = f"dialogue {dialogue_id}"
        if turn_index is not None:
            where += f", turn {turn_index}"
        super().__init__(
            f"Malformed record ({where}, field {field}): {reason}"
        )
        self.dialogue_id = dialogue_id
        self.turn_index = turn_index
        self.field = field


class SpanError(JointDstError):
    """Slot spans overlap or fall outside the utterance."""


class SystemActError(JointDstError):
    """A system act is unknown or has a value without a slot."""


class ConfigError(JointDstError):
    """Configuration file or flag is invalid."""


class CheckpointError(JointDstError):
    """A checkpoint file cannot be read or does not fit the model."""


class VocabMismatchError(CheckpointError):
    """Checkpoint vocabulary does not match the expected vocabulary."""

    def __init__(self, expected: str, found: str) -> None:
        super().__init__(
            f"Vocabulary mismatch: expected {expected} but the checkpoint"
            f" vocabulary hashes to {found}"
        )
        self.expected = expected
        self.found = found


class TrainingDivergedError(JointDstError):
    """The training loss became NaN or infinite."""

    def __init__(self, step: int, loss: float) -> None:
        super().__init__(f"Training diverged at step {step} (loss={loss})")
        self.step = step
        self.loss = loss


class MetricsError(JointDstError):
    """Predictions and gold annotations cannot be aligned."""


class GradientCheckError(JointDstError):
    """Gradient check was requested with a degenerate step size."""
