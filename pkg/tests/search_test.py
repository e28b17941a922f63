"""Tests for the hyperparameter grid search."""

from __future__ import annotations

import pytest

from jointdst.config import TrainConfig
from jointdst.service.evaluator import MetricsReport
from jointdst.service.search import expand_grid, grid_search, parse_grid


def test_parse_grid() -> None:
    grid = parse_grid("learning_rate=0.001, 0.0003;embedding_dim=32;")
    assert grid == {
        "learning_rate": ["0.001", "0.0003"],
        "embedding_dim": ["32"],
    }


@pytest.mark.parametrize("text", ["learning_rate", "seed=", "=1"])
def test_parse_grid_errors(text: str) -> None:
    with pytest.raises(ValueError, match="Bad grid item"):
        parse_grid(text)


def test_expand_grid() -> None:
    configs = expand_grid(
        TrainConfig(seed=3),
        {"learning_rate": ["0.1", "0.2"], "embedding_dim": ["4", "8"]},
    )
    assert [(c.learning_rate, c.embedding_dim) for c in configs] == [
        (0.1, 4),
        (0.1, 8),
        (0.2, 4),
        (0.2, 8),
    ]
    assert all(c.seed == 3 for c in configs)


def test_singleton_grid_runs_base() -> None:
    seen = []

    def run(config: TrainConfig) -> MetricsReport:
        seen.append(config)
        return MetricsReport(joint_goal_accuracy=0.4)

    best, points = grid_search(TrainConfig(seed=2), {}, run)
    assert len(points) == 1
    assert seen == [TrainConfig(seed=2)]
    assert best.config == TrainConfig(seed=2)


def test_best_point_and_tie_break() -> None:
    scores = {(0.1, 4): 0.5, (0.1, 8): 0.7, (0.2, 4): 0.7, (0.2, 8): 0.6}

    def run(config: TrainConfig) -> MetricsReport:
        key = (config.learning_rate, config.embedding_dim)
        return MetricsReport(joint_goal_accuracy=scores[key])

    best, points = grid_search(
        TrainConfig(),
        {"learning_rate": [0.2, 0.1], "embedding_dim": [8, 4]},
        run,
    )
    assert len(points) == 4
    assert (best.config.learning_rate, best.config.embedding_dim) == (0.1, 8)

    scores[(0.1, 8)] = 0.5
    scores[(0.2, 8)] = 0.7
    best, _ = grid_search(
        TrainConfig(),
        {"learning_rate": [0.2], "embedding_dim": [8, 4]},
        run,
    )
    assert best.config.embedding_dim == 4
