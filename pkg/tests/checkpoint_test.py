"""Tests for checkpoint files."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from jointdst.exceptions import CheckpointError, VocabMismatchError
from jointdst.storage.checkpoint import (
    FORMAT_VERSION,
    load_checkpoint,
    load_model,
    restore_parameters,
    save_checkpoint,
)
from tests.util import restaurant_dialogues, small_model


def test_round_trip_is_byte_identical(tmp_path: Path) -> None:
    model = small_model(restaurant_dialogues(3))
    first = tmp_path / "first.json"
    second = tmp_path / "second.json"
    save_checkpoint(first, model, 12)
    loaded, step = load_model(first)
    assert step == 12
    save_checkpoint(second, loaded, step)
    assert first.read_bytes() == second.read_bytes()


def test_loaded_model_predicts_the_same(tmp_path: Path) -> None:
    dialogues = restaurant_dialogues(3)
    model = small_model(dialogues, seed=5)
    path = tmp_path / "model.json"
    save_checkpoint(path, model, 1)
    loaded, _ = load_model(path)
    turn = dialogues[0].turns[0]
    expected = model.run_turn(
        model.start(), turn.system_acts, turn.user_tokens
    )
    actual = loaded.run_turn(
        loaded.start(), turn.system_acts, turn.user_tokens
    )
    np.testing.assert_array_equal(
        expected.reading.tag_logits.data, actual.reading.tag_logits.data
    )
    assert loaded.settings == model.settings


def test_metadata(tmp_path: Path) -> None:
    model = small_model(restaurant_dialogues(2))
    path = tmp_path / "model.json"
    save_checkpoint(path, model, 3)
    document = json.loads(path.read_text())
    assert document["format_version"] == FORMAT_VERSION
    metadata = document["metadata"]
    assert metadata["vocab_hash"] == model.vocab.fingerprint()
    assert metadata["feature_layout"]["logits"][0] == "null"
    assert metadata["model_settings"]["candidate_capacity"] == 3


def test_unsupported_version(tmp_path: Path) -> None:
    model = small_model(restaurant_dialogues(2))
    path = tmp_path / "model.json"
    save_checkpoint(path, model, 0)
    document = json.loads(path.read_text())
    document["format_version"] = FORMAT_VERSION + 1
    path.write_text(json.dumps(document))
    with pytest.raises(CheckpointError, match="format version"):
        load_checkpoint(path)


def test_unreadable_checkpoint(tmp_path: Path) -> None:
    path = tmp_path / "broken.json"
    path.write_text("{")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "missing.json")


def test_vocab_mismatch(tmp_path: Path) -> None:
    model = small_model(restaurant_dialogues(2))
    path = tmp_path / "model.json"
    save_checkpoint(path, model, 0)
    with pytest.raises(VocabMismatchError):
        load_checkpoint(path, expected_vocab_hash="0" * 64)

    document = json.loads(path.read_text())
    document["metadata"]["vocab"]["slots"].append("cuisine")
    path.write_text(json.dumps(document))
    with pytest.raises(VocabMismatchError):
        load_checkpoint(path)


def test_restore_into_a_different_model(tmp_path: Path) -> None:
    dialogues = restaurant_dialogues(2)
    path = tmp_path / "model.json"
    save_checkpoint(path, small_model(dialogues), 0)
    checkpoint = load_checkpoint(path)
    with pytest.raises(CheckpointError, match="missing"):
        restore_parameters(
            small_model(dialogues, separate_encoders=True), checkpoint
        )
    with pytest.raises(CheckpointError, match="shape"):
        restore_parameters(
            small_model(dialogues, embedding_dim=6), checkpoint
        )
