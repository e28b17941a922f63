"""Hyperparameter grid search."""

from __future__ import annotations

import itertools
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass
from typing import Any

import structlog
from structlog.stdlib import BoundLogger

from ..config import TrainConfig, apply_overrides
from .evaluator import MetricsReport

__all__ = ["GridPoint", "expand_grid", "grid_search", "parse_grid"]


@dataclass
class GridPoint:
    """One trained grid point and its dev report."""

    config: TrainConfig
    report: MetricsReport

    def key(self) -> tuple[float, float, int]:
        # Highest joint goal first, then lower learning rate, then the
        # smaller embedding.
        return (
            -self.report.joint_goal_accuracy,
            self.config.learning_rate,
            self.config.embedding_dim,
        )


def parse_grid(text: str) -> dict[str, list[str]]:
    """Parse ``key=v1,v2;key=v1`` into a grid.

    Raises
    ------
    ValueError
        If an item has no ``=`` or no values.
    """
    grid: dict[str, list[str]] = {}
    for item in text.split(";"):
        if not item.strip():
            continue
        key, sep, values = item.partition("=")
        parts = [v.strip() for v in values.split(",") if v.strip()]
        if not sep or not key.strip() or not parts:
            raise ValueError(f"Bad grid item: {item.strip()}")
        grid[key.strip()] = parts
    return grid


def expand_grid(
    base: TrainConfig, grid: Mapping[str, Sequence[Any]]
) -> list[TrainConfig]:
    """Return one configuration per point of the Cartesian product."""
    keys = list(grid)
    return [
        apply_overrides(base, **dict(zip(keys, values, strict=True)))
        for values in itertools.product(*(grid[k] for k in keys))
    ]


def grid_search(
    base: TrainConfig,
    grid: Mapping[str, Sequence[Any]],
    run: Callable[[TrainConfig], MetricsReport],
    *,
    logger: BoundLogger | None = None,
) -> tuple[GridPoint, list[GridPoint]]:
    """Train every grid point and select by dev joint goal accuracy.

    Parameters
    ----------
    base
        Configuration the grid values are applied to.
    grid
        Values to try per configuration key.
    run
        Trains one configuration and returns its dev report.
    logger
        Logger to use.

    Returns
    -------
    tuple
        The best point and every point in grid order.
    """
    logger = logger or structlog.get_logger(__name__)
    points = []
    configs = expand_grid(base, grid)
    for index, config in enumerate(configs, start=1):
        logger.info(
            f"Grid point {index}/{len(configs)}",
            learning_rate=config.learning_rate,
            embedding_dim=config.embedding_dim,
            min_keep_probability=config.min_keep_probability,
        )
        point = GridPoint(config, run(config))
        logger.info(
            f"Grid point {index} dev joint goal"
            f" {point.report.joint_goal_accuracy:.3f}"
        )
        points.append(point)
    best = min(points, key=GridPoint.key)
    return best, points
