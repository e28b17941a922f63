"""Configuration definition."""

from __future__ import annotations

import os
from enum import Enum
from pathlib import Path
from typing import Any, Literal

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
)
from safir.logging import LogLevel, Profile
from safir.pydantic import CamelCaseModel

from .candidates import DEFAULT_CAPACITY
from .exceptions import ConfigError

__all__ = [
    "Configuration",
    "ModelSettings",
    "SamplingSetup",
    "TrainConfig",
    "apply_overrides",
    "load_config_file",
]


class Configuration(CamelCaseModel):
    """Process configuration for jointdst."""

    name: str = Field(
        os.getenv("SAFIR_NAME", "jointdst"),
        title="Program name",
        description=(
            "Name reported in log messages.  Read from ``SAFIR_NAME``."
        ),
    )

    profile: Profile = Field(
        Profile(os.getenv("SAFIR_PROFILE", "development")),
        title="Logging profile",
        description=(
            "``development`` prints readable console lines while training"
            " and evaluating; ``production`` writes one JSON object per"
            " log message, for runs collected by a batch system.  Read"
            " from ``SAFIR_PROFILE``."
        ),
    )

    logger_name: str = Field(
        os.getenv("SAFIR_LOGGER", "jointdst"),
        title="Logger name",
        description=(
            "Root logger of the commands and of every service component."
            "  Read from ``SAFIR_LOGGER``."
        ),
    )

    log_level: LogLevel = Field(
        LogLevel(os.getenv("SAFIR_LOG_LEVEL", "INFO")),
        title="Log level",
        description=(
            "``DEBUG`` adds per-dialogue evaluation and threshold tuning"
            " messages to the per-step training records.  Read from"
            " ``SAFIR_LOG_LEVEL``."
        ),
    )

    data_dir: Path = Field(
        Path(os.getenv("JOINTDST_DATA_DIR", ".")),
        title="Base directory for corpora",
        description=(
            "Relative corpus paths are resolved against this directory."
            "  Set with the ``JOINTDST_DATA_DIR`` environment variable."
        ),
    )

    def resolve(self, path: Path) -> Path:
        """Resolve a corpus path against the data directory."""
        return path if path.is_absolute() else self.data_dir / path


class SamplingSetup(str, Enum):
    """Which inputs scheduled sampling replaces with predictions."""

    none = "none"
    tags = "tags"
    state = "state"
    both = "both"

    @property
    def samples_tags(self) -> bool:
        return self in (SamplingSetup.tags, SamplingSetup.both)

    @property
    def samples_state(self) -> bool:
        return self in (SamplingSetup.state, SamplingSetup.both)


class ModelSettings(BaseModel):
    """Architecture settings, stored in every checkpoint."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    embedding_dim: int = Field(
        64,
        ge=2,
        title="Token embedding dimension",
        description=(
            "Token and slot embedding width.  The utterance encoder and the"
            " tagger use this state size; the state encoder half of it."
        ),
    )

    act_dim: int = Field(
        64,
        ge=1,
        title="System act vector width",
        description="Width of the dense system act representation.",
    )

    candidate_capacity: int = Field(
        DEFAULT_CAPACITY,
        ge=1,
        title="Candidate set capacity",
        description="Maximum number of candidate values kept per slot.",
    )

    separate_encoders: bool = Field(
        False,
        title="Use separate LU and DST encoders",
        description=(
            "If true the utterance and state encoders are duplicated so"
            " that the LU heads and the scorer do not share them."
        ),
    )

    act_threshold: float = Field(
        0.5,
        gt=0.0,
        lt=1.0,
        title="User act probability threshold",
        description="Acts with probability above this value are predicted.",
    )

    dtype: Literal["float64", "float32"] = Field(
        "float64",
        title="Floating point type",
        description="Precision of parameters and activations.",
    )


class TrainConfig(BaseModel):
    """Training run configuration.

    Field names are the keys accepted in configuration files.
    """

    model_config = ConfigDict(extra="forbid")

    train_corpora: list[Path] = Field(
        default_factory=list,
        title="Training corpora",
        description=(
            "Corpus directories holding ``train.json`` and ``dev.json``."
            "  Comma-separated in configuration files."
        ),
    )

    dev_split: str = Field(
        "dev",
        title="Development split",
        description="Split used for periodic evaluation and tuning.",
    )

    output_dir: Path = Field(
        Path("run"),
        title="Output directory",
        description="Checkpoints and the training log are written here.",
    )

    learning_rate: float = Field(
        0.001, gt=0.0, title="ADAM learning rate", description="Step size."
    )

    embedding_dim: int = Field(
        64, ge=2, title="Token embedding dimension", description="See model."
    )

    act_dim: int | None = Field(
        None,
        ge=1,
        title="System act vector width",
        description="Defaults to the embedding dimension.",
    )

    batch_size: int = Field(
        10, ge=1, title="Batch size", description="Dialogues per step."
    )

    max_steps: int = Field(
        20000, ge=1, title="Training steps", description="Total steps."
    )

    sampling: SamplingSetup = Field(
        SamplingSetup.both,
        title="Scheduled sampling setup",
        description="One of none, tags, state or both.",
    )

    separate_encoders: bool = Field(
        False,
        title="Separate encoders",
        description="Train the separate LU and DST baseline.",
    )

    min_keep_probability: float = Field(
        0.5,
        gt=0.0,
        le=1.0,
        title="Final keep probability",
        description="Keep probability reached at the last step.",
    )

    pretrain_fraction: float = Field(
        0.3,
        ge=0.0,
        le=1.0,
        title="Teacher forcing fraction",
        description=(
            "Fraction of the steps trained on gold inputs before scheduled"
            " sampling starts."
        ),
    )

    max_dropout: float = Field(
        0.4,
        ge=0.0,
        le=1.0,
        title="Final slot value dropout",
        description="Slot value dropout rate reached at the last step.",
    )

    min_token_freq: int = Field(
        1, ge=1, title="Minimum token frequency", description="Vocab cut."
    )

    act_threshold: float = Field(
        0.5,
        gt=0.0,
        lt=1.0,
        title="User act threshold",
        description="Initial act threshold, tuned on dev after training.",
    )

    candidate_capacity: int = Field(
        DEFAULT_CAPACITY,
        ge=1,
        title="Candidate set capacity",
        description="Maximum candidates per slot.",
    )

    dtype: Literal["float64", "float32"] = Field(
        "float64", title="Floating point type", description="Precision."
    )

    seed: int = Field(
        0, title="Random seed", description="Seeds every random draw."
    )

    log_every: int = Field(
        100, ge=1, title="Log interval", description="Steps between records."
    )

    eval_every: int = Field(
        1000,
        ge=0,
        title="Evaluation interval",
        description="Steps between dev evaluations; 0 disables them.",
    )

    max_dev_dialogues: int = Field(
        0,
        ge=0,
        title="Dev subsample",
        description="Dialogues used by periodic dev evaluation; 0 is all.",
    )

    @field_validator("train_corpora", mode="before")
    @classmethod
    def _split_corpora(cls, value: Any) -> Any:
        if isinstance(value, str):
            return [part.strip() for part in value.split(",") if part.strip()]
        return value

    @property
    def pretrain_steps(self) -> int:
        return int(self.pretrain_fraction * self.max_steps)

    def model_settings(self) -> ModelSettings:
        return ModelSettings(
            embedding_dim=self.embedding_dim,
            act_dim=self.act_dim or self.embedding_dim,
            candidate_capacity=self.candidate_capacity,
            separate_encoders=self.separate_encoders,
            act_threshold=self.act_threshold,
            dtype=self.dtype,
        )


def _validate(values: dict[str, Any]) -> TrainConfig:
    unknown = sorted(set(values) - set(TrainConfig.model_fields))
    if unknown:
        valid = ", ".join(sorted(TrainConfig.model_fields))
        raise ConfigError(
            f"Unknown configuration key {', '.join(unknown)}"
            f" (valid keys: {valid})"
        )
    try:
        return TrainConfig.model_validate(values)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def load_config_file(path: Path) -> TrainConfig:
    """Read a ``key = value`` configuration file.

    Blank lines and lines starting with ``#`` are ignored.

    Raises
    ------
    ConfigError
        A line is malformed, a key is unknown or a value is invalid.
    """
    values: dict[str, Any] = {}
    text = path.read_text(encoding="utf-8")
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{path}:{number}: expected key = value")
        values[key.strip()] = value.strip()
    return _validate(values)


def apply_overrides(config: TrainConfig, **flags: Any) -> TrainConfig:
    """Return ``config`` with every non-`None` flag value applied."""
    values = config.model_dump()
    values.update({k: v for k, v in flags.items() if v is not None})
    return _validate(values)
