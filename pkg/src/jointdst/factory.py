"""Create jointdst components."""

from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path
from typing import Self

import structlog
from safir.logging import configure_logging
from structlog.stdlib import BoundLogger

from .config import Configuration, ModelSettings, TrainConfig
from .dialogue import Dialogue
from .network.model import JointModel
from .service.evaluator import Evaluator, MetricsReport
from .service.tracker import DialogueTracker
from .service.trainer import Trainer, TrainingResult
from .storage.checkpoint import load_model
from .storage.corpus import load_corpus_splits
from .vocab import Vocab, build_vocab

__all__ = ["Factory", "ProcessContext"]


class ProcessContext:
    """Per-process application context.

    Holds the process configuration and the root logger.  Logging is
    configured here, once per process, unless a logger is passed in.

    Parameters
    ----------
    config
        Process configuration.
    logger
        Logger object.  If not set, it will be initialized from the
        configuration.
    """

    def __init__(
        self, config: Configuration, *, logger: BoundLogger | None = None
    ) -> None:
        if logger is None:
            configure_logging(
                profile=config.profile,
                log_level=config.log_level,
                name=config.logger_name,
            )
            logger = structlog.get_logger(config.logger_name)
        self.config = config
        self.logger = logger


class Factory:
    """Build jointdst components.

    Parameters
    ----------
    context
        Shared process context.
    logger
        Logger handed to every component.
    """

    @classmethod
    def create(
        cls, config: Configuration, *, logger: BoundLogger | None = None
    ) -> Self:
        """Create a factory and its process context from configuration."""
        context = ProcessContext(config, logger=logger)
        return cls(context, context.logger)

    def __init__(self, context: ProcessContext, logger: BoundLogger) -> None:
        self._context = context
        self._logger = logger

    @property
    def config(self) -> Configuration:
        return self._context.config

    def resolve_corpora(self, corpora: Sequence[Path]) -> list[Path]:
        """Resolve corpus paths against the data directory.

        Raises
        ------
        FileNotFoundError
            If a corpus path does not exist.
        """
        paths = [self.config.resolve(corpus) for corpus in corpora]
        for path in paths:
            if not path.exists():
                raise FileNotFoundError(f"Corpus {path} does not exist")
        return paths

    def load_dialogues(
        self, corpora: Sequence[Path], split: str
    ) -> list[Dialogue]:
        """Load one split of several corpora."""
        return load_corpus_splits(
            self.resolve_corpora(corpora), split, logger=self._logger
        )

    def create_vocab(
        self, dialogues: Sequence[Dialogue], min_token_freq: int = 1
    ) -> Vocab:
        vocab = build_vocab(dialogues, min_token_freq)
        self._logger.info(
            f"Vocabulary has {len(vocab.tokens)} tokens and"
            f" {len(vocab.slots)} slots",
            intents=len(vocab.intents),
            user_acts=len(vocab.user_acts),
            system_acts=len(vocab.system_acts),
        )
        return vocab

    def create_model(
        self, settings: ModelSettings, vocab: Vocab, *, seed: int = 0
    ) -> JointModel:
        model = JointModel(settings, vocab, seed=seed)
        self._logger.debug(
            f"Created model with {model.parameter_set.count()} weights",
            separate_encoders=settings.separate_encoders,
        )
        return model

    def create_trainer(
        self,
        model: JointModel,
        config: TrainConfig,
        train_dialogues: Sequence[Dialogue],
        dev_dialogues: Sequence[Dialogue] = (),
    ) -> Trainer:
        return Trainer(
            model, config, train_dialogues, dev_dialogues, logger=self._logger
        )

    def create_tracker(
        self, model: JointModel, *, act_threshold: float | None = None
    ) -> DialogueTracker:
        return DialogueTracker(
            model, act_threshold=act_threshold, logger=self._logger
        )

    def create_evaluator(self, model: JointModel) -> Evaluator:
        return Evaluator(self.create_tracker(model), logger=self._logger)

    def load_model(
        self,
        checkpoint: Path,
        *,
        train_corpora: Sequence[Path] = (),
        min_token_freq: int = 1,
    ) -> JointModel:
        """Rebuild a trained model from a checkpoint file.

        Parameters
        ----------
        checkpoint
            Checkpoint file.
        train_corpora
            If given, the checkpoint vocabulary must equal the one built
            from the training split of these corpora.
        min_token_freq
            Token frequency cut used to build that vocabulary.

        Raises
        ------
        VocabMismatchError
            If the vocabularies differ.
        """
        expected = None
        if train_corpora:
            train = self.load_dialogues(train_corpora, "train")
            expected = build_vocab(train, min_token_freq).fingerprint()
        model, step = load_model(checkpoint, expected_vocab_hash=expected)
        self._logger.info(f"Loaded checkpoint {checkpoint} from step {step}")
        return model

    def train(self, config: TrainConfig) -> tuple[JointModel, TrainingResult]:
        """Load the corpora, build the model and run a training job.

        Raises
        ------
        ValueError
            If no training corpus is configured.
        """
        if not config.train_corpora:
            raise ValueError("No training corpus configured")
        train = self.load_dialogues(config.train_corpora, "train")
        try:
            dev = self.load_dialogues(config.train_corpora, config.dev_split)
        except FileNotFoundError as exc:
            self._logger.warning(f"Training without dev evaluation: {exc}")
            dev = []
        vocab = self.create_vocab(train, config.min_token_freq)
        model = self.create_model(
            config.model_settings(), vocab, seed=config.seed
        )
        trainer = self.create_trainer(model, config, train, dev)
        return model, trainer.train()

    def train_and_score(self, config: TrainConfig) -> MetricsReport:
        """Train one configuration and return its best dev report."""
        model, result = self.train(config)
        if result.best_report is not None:
            return result.best_report
        # No periodic evaluation ran, so score the final model.
        dev = self.load_dialogues(config.train_corpora, config.dev_split)
        report, _ = self.create_evaluator(model).evaluate(dev, name="dev")
        return report
