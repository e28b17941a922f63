"""Checkpoint files.

A checkpoint is a single JSON document with sorted keys::

    {
      "format_version": 1,
      "metadata": {
        "feature_layout": {...},
        "model_settings": {...},
        "step": 1200,
        "vocab": {...},
        "vocab_hash": "<sha256>"
      },
      "parameters": {
        "<parameter id>": {"data": [...], "shape": [rows, cols]}
      }
    }

``data`` holds the parameter values flattened in row-major order.  Saving a
loaded checkpoint reproduces the file byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, ValidationError
from structlog.stdlib import BoundLogger

from ..config import ModelSettings
from ..exceptions import CheckpointError, VocabMismatchError
from ..network.dst import FEATURE_LAYOUT
from ..network.model import JointModel
from ..vocab import Vocab

__all__ = [
    "FORMAT_VERSION",
    "Checkpoint",
    "load_checkpoint",
    "load_model",
    "restore_parameters",
    "save_checkpoint",
]

FORMAT_VERSION = 1


class _ParameterRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    shape: list[int]
    data: list[float]


class _Metadata(BaseModel):
    model_config = ConfigDict(extra="forbid")

    model_settings: ModelSettings
    vocab: dict[str, list[str]]
    vocab_hash: str
    feature_layout: dict[str, list[str]]
    step: int


class _Document(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format_version: int
    metadata: _Metadata
    parameters: dict[str, _ParameterRecord]


@dataclass
class Checkpoint:
    """Contents of a checkpoint file."""

    settings: ModelSettings
    vocab: Vocab
    step: int
    parameters: dict[str, np.ndarray]


def _encode(model: JointModel, step: int) -> str:
    document = {
        "format_version": FORMAT_VERSION,
        "metadata": {
            "feature_layout": FEATURE_LAYOUT,
            "model_settings": model.settings.model_dump(),
            "step": step,
            "vocab": model.vocab.to_dict(),
            "vocab_hash": model.vocab.fingerprint(),
        },
        "parameters": {
            p.name: {"data": p.data.reshape(-1).tolist(), "shape": p.shape}
            for p in model.parameter_set
        },
    }
    return json.dumps(document, sort_keys=True) + "\n"


def save_checkpoint(
    path: Path,
    model: JointModel,
    step: int,
    *,
    logger: BoundLogger | None = None,
) -> None:
    """Write the model parameters and metadata to ``path``."""
    logger = logger or structlog.get_logger(__name__)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_encode(model, step), encoding="utf-8")
    logger.debug(f"Saved checkpoint for step {step} to {path}")


def load_checkpoint(
    path: Path, *, expected_vocab_hash: str | None = None
) -> Checkpoint:
    """Read and validate a checkpoint file.

    Parameters
    ----------
    path
        Checkpoint file.
    expected_vocab_hash
        If given, the vocabulary hash the caller requires.

    Raises
    ------
    CheckpointError
        The file cannot be parsed or has an unsupported version.
    VocabMismatchError
        The stored vocabulary hash does not match the stored vocabulary or
        ``expected_vocab_hash``.
    """
    try:
        raw: Any = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"Cannot read checkpoint {path}: {exc}") from exc
    version = raw.get("format_version") if isinstance(raw, dict) else None
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"Unsupported checkpoint format version {version} in {path}"
            f" (expected {FORMAT_VERSION})"
        )
    try:
        document = _Document.model_validate(raw)
    except ValidationError as exc:
        raise CheckpointError(f"Malformed checkpoint {path}: {exc}") from exc

    metadata = document.metadata
    vocab = Vocab.from_dict(metadata.vocab)
    found = vocab.fingerprint()
    if found != metadata.vocab_hash:
        raise VocabMismatchError(metadata.vocab_hash, found)
    if expected_vocab_hash is not None and expected_vocab_hash != found:
        raise VocabMismatchError(expected_vocab_hash, found)

    dtype = np.dtype(metadata.model_settings.dtype)
    parameters = {}
    for name, record in document.parameters.items():
        data = np.asarray(record.data, dtype=dtype)
        if data.size != int(np.prod(record.shape)):
            raise CheckpointError(
                f"Parameter {name} has {data.size} values for shape"
                f" {record.shape}"
            )
        parameters[name] = data.reshape(record.shape)
    return Checkpoint(
        settings=metadata.model_settings,
        vocab=vocab,
        step=metadata.step,
        parameters=parameters,
    )


def restore_parameters(model: JointModel, checkpoint: Checkpoint) -> None:
    """Copy checkpoint values into ``model``.

    Raises
    ------
    CheckpointError
        A parameter is missing, unexpected or has the wrong shape.
    """
    expected = set(model.parameter_set.names())
    stored = set(checkpoint.parameters)
    if expected != stored:
        missing = sorted(expected - stored)
        extra = sorted(stored - expected)
        raise CheckpointError(
            f"Checkpoint parameters do not fit the model (missing: {missing},"
            f" unexpected: {extra})"
        )
    for parameter in model.parameter_set:
        values = checkpoint.parameters[parameter.name]
        if values.shape != parameter.shape:
            raise CheckpointError(
                f"Parameter {parameter.name} has shape {values.shape},"
                f" expected {parameter.shape}"
            )
        parameter.data[...] = values


def load_model(
    path: Path, *, expected_vocab_hash: str | None = None
) -> tuple[JointModel, int]:
    """Rebuild a model from a checkpoint and return it with its step."""
    checkpoint = load_checkpoint(path, expected_vocab_hash=expected_vocab_hash)
    model = JointModel(checkpoint.settings, checkpoint.vocab)
    restore_parameters(model, checkpoint)
    return model, checkpoint.step
