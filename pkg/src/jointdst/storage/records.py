"""Line-delimited JSON records: training logs, reports and state dumps."""

from __future__ import annotations

import json
from collections.abc import Iterable, Mapping
from pathlib import Path
from types import TracebackType
from typing import IO, Any, Self

from pydantic import BaseModel

__all__ = [
    "TrainingLog",
    "read_records",
    "write_records",
    "write_report",
    "write_state_dump",
]


def _line(record: Mapping[str, Any]) -> str:
    return json.dumps(record, sort_keys=True) + "\n"


def write_records(path: Path, records: Iterable[Mapping[str, Any]]) -> None:
    """Write one JSON object per line, replacing ``path``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as stream:
        for record in records:
            stream.write(_line(record))


def read_records(path: Path) -> list[dict[str, Any]]:
    """Read a file written by `write_records` or `TrainingLog`."""
    with path.open(encoding="utf-8") as stream:
        return [json.loads(line) for line in stream if line.strip()]


class TrainingLog:
    """Append-only training log.

    Records carry no timestamps, so two runs with the same seed write the
    same bytes.  Use as a context manager; the file is truncated on entry.
    """

    def __init__(self, path: Path) -> None:
        self.path = path
        self._stream: IO[str] | None = None

    def __enter__(self) -> Self:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._stream = self.path.open("w", encoding="utf-8")
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc: BaseException | None,
        tb: TracebackType | None,
    ) -> None:
        if self._stream is not None:
            self._stream.close()
            self._stream = None

    def write(self, record: Mapping[str, Any]) -> None:
        if self._stream is None:
            raise RuntimeError("Training log is not open")
        self._stream.write(_line(record))
        self._stream.flush()


def write_state_dump(path: Path, dumps: Iterable[Mapping[str, Any]]) -> None:
    """Write the per-turn scored states of an evaluation run."""
    write_records(path, dumps)


def write_report(path: Path, reports: Iterable[BaseModel]) -> None:
    """Write metrics reports, bitmaps included, one per line.

    The bitmaps let two saved reports be compared turn by turn later.
    """
    write_records(path, (report.model_dump() for report in reports))
