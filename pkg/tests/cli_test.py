"""Tests for the command-line interface."""

from __future__ import annotations

import json
from pathlib import Path

from click.testing import CliRunner

from jointdst.cli import main
from jointdst.service.evaluator import MetricsReport
from jointdst.storage.corpus import load_corpus
from jointdst.storage.records import read_records, write_report
from tests.util import restaurant_dialogues, write_corpus_dir

SMALL_CONFIG = """\
# tiny model for tests
embedding_dim = 4
batch_size = 2
max_steps = 2
log_every = 1
eval_every = 2
candidate_capacity = 3
"""


def _corpus(tmp_path: Path) -> Path:
    dialogues = restaurant_dialogues(4)
    return write_corpus_dir(
        tmp_path / "sim-R",
        {"train": dialogues, "dev": dialogues, "test": dialogues},
    )


def _config(tmp_path: Path, extra: str = "") -> Path:
    path = tmp_path / "train.conf"
    path.write_text(SMALL_CONFIG + extra)
    return path


def _train(tmp_path: Path) -> Path:
    runner = CliRunner()
    output = tmp_path / "run"
    result = runner.invoke(
        main,
        [
            "train",
            "--config",
            str(_config(tmp_path)),
            "--corpus",
            str(_corpus(tmp_path)),
            "--output-dir",
            str(output),
            "--seed",
            "3",
        ],
    )
    assert result.exit_code == 0, result.output
    return output


def test_help() -> None:
    runner = CliRunner()
    result = runner.invoke(main, ["help"])
    assert result.exit_code == 0
    assert "Commands:" in result.output
    result = runner.invoke(main, ["help", "train"])
    assert result.exit_code == 0
    assert "--ss" in result.output


def test_train(tmp_path: Path) -> None:
    output = _train(tmp_path)
    assert (output / "last.json").exists()
    assert (output / "best.json").exists()
    records = read_records(output / "train.jsonl")
    assert [r["step"] for r in records] == [1, 2]


def test_train_missing_corpus(tmp_path: Path) -> None:
    runner = CliRunner()
    result = runner.invoke(
        main,
        [
            "train",
            "--config",
            str(_config(tmp_path)),
            "--corpus",
            str(tmp_path / "nowhere"),
        ],
    )
    assert result.exit_code == 2
    assert "does not exist" in result.output


def test_train_bad_config_key(tmp_path: Path) -> None:
    runner = CliRunner()
    result = runner.invoke(
        main,
        [
            "train",
            "--config",
            str(_config(tmp_path, "hidden_size = 3\n")),
            "--corpus",
            str(_corpus(tmp_path)),
        ],
    )
    assert result.exit_code == 2
    assert "hidden_size" in result.output


def test_train_needs_corpus(tmp_path: Path) -> None:
    runner = CliRunner()
    result = runner.invoke(
        main, ["train", "--config", str(_config(tmp_path))]
    )
    assert result.exit_code == 2


def test_eval(tmp_path: Path) -> None:
    output = _train(tmp_path)
    dump = tmp_path / "states.jsonl"
    report = tmp_path / "report.jsonl"
    runner = CliRunner()
    result = runner.invoke(
        main,
        [
            "eval",
            "--checkpoint",
            str(output / "last.json"),
            "--corpus",
            str(tmp_path / "sim-R"),
            "--dump-states",
            str(dump),
            "--report",
            str(report),
        ],
    )
    assert result.exit_code == 0, result.output
    assert "Joint Goal" in result.output
    assert "sim-R" in result.output
    states = read_records(dump)
    assert len(states) == 12
    assert states[0]["corpus"] == "sim-R"
    assert states[0]["turn"] == 0
    reports = read_records(report)
    assert len(reports[0]["joint_goal_correct"]) == 12


def test_eval_checks_training_vocabulary(tmp_path: Path) -> None:
    output = _train(tmp_path)
    corpus = str(tmp_path / "sim-R")
    arguments = [
        "eval",
        "--checkpoint",
        str(output / "last.json"),
        "--corpus",
        corpus,
        "--train-corpus",
        corpus,
    ]
    runner = CliRunner()
    result = runner.invoke(main, arguments)
    assert result.exit_code == 0, result.output

    result = runner.invoke(main, [*arguments, "--min-token-freq", "1000"])
    assert result.exit_code == 1
    assert "Vocabulary mismatch" in result.output


def test_eval_bad_checkpoint(tmp_path: Path) -> None:
    checkpoint = tmp_path / "bad.json"
    checkpoint.write_text("{}")
    runner = CliRunner()
    result = runner.invoke(
        main,
        [
            "eval",
            "--checkpoint",
            str(checkpoint),
            "--corpus",
            str(_corpus(tmp_path)),
        ],
    )
    assert result.exit_code == 1
    assert "format version" in result.output


def test_inspect_checkpoint(tmp_path: Path) -> None:
    output = _train(tmp_path)
    runner = CliRunner()
    result = runner.invoke(
        main, ["inspect-checkpoint", str(output / "last.json")]
    )
    assert result.exit_code == 0, result.output
    assert "step: 2" in result.output
    assert "vocab hash: " in result.output
    assert "embedding_dim: 4" in result.output


def test_repl(tmp_path: Path) -> None:
    output = _train(tmp_path)
    runner = CliRunner()
    result = runner.invoke(
        main,
        ["repl", "--checkpoint", str(output / "last.json")],
        input="sys greeting\ntable for 2 at 7 pm\nreset\nquit\n",
    )
    assert result.exit_code == 0, result.output
    assert "system acts: greeting" in result.output
    assert "intent: " in result.output
    assert "(empty)" in result.output


def test_import_sim(tmp_path: Path) -> None:
    raw = [
        {
            "dialogue_id": "sim1",
            "turns": [
                {
                    "system_acts": [{"type": "GREETING"}],
                    "user_utterance": {
                        "text": "table for 2",
                        "tokens": ["table", "for", "2"],
                        "slots": [
                            {
                                "slot": "num_people",
                                "start": 2,
                                "exclusive_end": 3,
                            }
                        ],
                    },
                    "user_intents": ["RESERVE_RESTAURANT"],
                    "user_acts": [{"type": "INFORM"}],
                    "dialogue_state": [{"slot": "num_people", "value": "2"}],
                }
            ],
        }
    ]
    source = tmp_path / "source"
    source.mkdir()
    (source / "train.json").write_text(json.dumps(raw))
    (source / "dev.json").write_text(json.dumps(raw))
    destination = tmp_path / "converted"
    runner = CliRunner()
    result = runner.invoke(main, ["import-sim", str(source), str(destination)])
    assert result.exit_code == 0, result.output
    assert "Wrote 1 dialogues" in result.output
    assert not (destination / "test.json").exists()
    dialogues = load_corpus(destination / "dev.json")
    assert dialogues[0].turns[0].gold_state == {"num_people": "2"}


def test_import_sim_empty_directory(tmp_path: Path) -> None:
    runner = CliRunner()
    result = runner.invoke(
        main, ["import-sim", str(tmp_path), str(tmp_path / "out")]
    )
    assert result.exit_code == 2


def test_compare(tmp_path: Path) -> None:
    first = tmp_path / "a.jsonl"
    second = tmp_path / "b.jsonl"
    same = [True] * 5
    write_report(
        first,
        [
            MetricsReport(
                name="sim-M",
                joint_goal_accuracy=15 / 17,
                joint_goal_correct=[True] * 10 + [False] * 2 + same,
            )
        ],
    )
    write_report(
        second,
        [
            MetricsReport(
                name="sim-M",
                joint_goal_accuracy=7 / 17,
                joint_goal_correct=[False] * 10 + [True] * 2 + same,
            )
        ],
    )
    runner = CliRunner()
    result = runner.invoke(main, ["compare", str(first), str(second)])
    assert result.exit_code == 0, result.output
    assert "McNemar p = 0.03857 (significant at 0.05)" in result.output

    result = runner.invoke(
        main, ["compare", str(first), str(second), "--name", "sim-R"]
    )
    assert result.exit_code == 2
