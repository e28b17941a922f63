"""Command-line interface for training, evaluating and running models."""

from __future__ import annotations

import itertools
import json
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path

import click
from safir.click import display_help

from .config import (
    Configuration,
    SamplingSetup,
    TrainConfig,
    apply_overrides,
    load_config_file,
)
from .exceptions import ConfigError, JointDstError
from .factory import Factory
from .service.evaluator import MetricsReport, format_table, mcnemar_test
from .service.search import grid_search, parse_grid
from .service.tracker import ReplSession
from .storage.checkpoint import load_checkpoint
from .storage.corpus import SPLITS, adapt_simulated_dialogues, write_corpus
from .storage.records import read_records, write_report, write_state_dump

__all__ = [
    "compare",
    "eval",
    "gridsearch",
    "help",
    "import_sim",
    "inspect_checkpoint",
    "main",
    "repl",
    "train",
]

SIGNIFICANCE_LEVEL = 0.05

_config_option = click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Training configuration file (key = value lines).",
)
_corpus_option = click.option(
    "--corpus",
    "corpora",
    type=click.Path(path_type=Path),
    multiple=True,
    help="Corpus directory or file.  May be repeated.",
)
_checkpoint_option = click.option(
    "--checkpoint",
    type=click.Path(path_type=Path),
    required=True,
    help="Checkpoint file.",
)
_vocab_corpus_option = click.option(
    "--train-corpus",
    "train_corpora",
    type=click.Path(path_type=Path),
    multiple=True,
    help=(
        "Check the checkpoint vocabulary against the training split of"
        " this corpus.  May be repeated."
    ),
)
_min_token_freq_option = click.option(
    "--min-token-freq",
    type=click.IntRange(min=1),
    default=1,
    show_default=True,
    help="Token frequency cut the checked vocabulary was built with.",
)


@contextmanager
def _errors() -> Iterator[None]:
    """Turn library errors into click errors.

    Configuration and missing-file problems exit with status 2, anything
    else raised by the library with status 1.
    """
    try:
        yield
    except (ConfigError, FileNotFoundError) as exc:
        raise click.UsageError(str(exc)) from exc
    except JointDstError as exc:
        raise click.ClickException(str(exc)) from exc


def _train_config(
    config_path: Path | None,
    *,
    corpora: tuple[Path, ...],
    sampling: str | None,
    separate_encoders: bool | None,
    seed: int | None,
    output_dir: Path | None,
    max_steps: int | None,
) -> TrainConfig:
    # Flags override the file, which overrides the defaults.
    config = (
        load_config_file(config_path) if config_path else TrainConfig()
    )
    return apply_overrides(
        config,
        train_corpora=list(corpora) or None,
        sampling=sampling,
        separate_encoders=separate_encoders,
        seed=seed,
        output_dir=output_dir,
        max_steps=max_steps,
    )


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(message="%(version)s")
def main() -> None:
    """Joint language understanding and dialogue state tracking."""


@main.command()
@click.argument("topic", default=None, required=False, nargs=1)
@click.argument("subtopic", default=None, required=False, nargs=1)
@click.pass_context
def help(ctx: click.Context, topic: str | None, subtopic: str | None) -> None:
    """Show help for any command."""
    display_help(main, ctx, topic, subtopic)


@main.command()
@_config_option
@_corpus_option
@click.option(
    "--ss",
    "sampling",
    type=click.Choice([s.value for s in SamplingSetup]),
    default=None,
    help="Inputs replaced by predictions during training.",
)
@click.option(
    "--separate-encoders/--joint-encoders",
    default=None,
    help="Train separate LU and DST encoders instead of shared ones.",
)
@click.option("--seed", type=int, default=None, help="Random seed.")
@click.option(
    "--output-dir",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help="Directory for checkpoints and the training log.",
)
@click.option(
    "--steps", "max_steps", type=int, default=None, help="Training steps."
)
def train(
    *,
    config_path: Path | None,
    corpora: tuple[Path, ...],
    sampling: str | None,
    separate_encoders: bool | None,
    seed: int | None,
    output_dir: Path | None,
    max_steps: int | None,
) -> None:
    """Train a model and write its checkpoints."""
    with _errors():
        config = _train_config(
            config_path,
            corpora=corpora,
            sampling=sampling,
            separate_encoders=separate_encoders,
            seed=seed,
            output_dir=output_dir,
            max_steps=max_steps,
        )
        if not config.train_corpora:
            raise click.UsageError("No training corpus given")
        factory = Factory.create(Configuration())
        _, result = factory.train(config)
    click.echo(f"Wrote {result.last_checkpoint}")
    if result.best_checkpoint is not None:
        click.echo(
            f"Wrote {result.best_checkpoint} (step {result.best_step})"
        )


@main.command()
@_checkpoint_option
@_corpus_option
@_vocab_corpus_option
@_min_token_freq_option
@click.option(
    "--split",
    type=click.Choice(SPLITS),
    default="test",
    show_default=True,
    help="Corpus split to evaluate.",
)
@click.option(
    "--dump-states",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="Write the scored state of every turn to this file.",
)
@click.option(
    "--report",
    "report_path",
    type=click.Path(dir_okay=False, path_type=Path),
    default=None,
    help="Write the metrics reports, with per-turn results, to this file.",
)
def eval(
    *,
    checkpoint: Path,
    corpora: tuple[Path, ...],
    split: str,
    dump_states: Path | None,
    report_path: Path | None,
    train_corpora: tuple[Path, ...],
    min_token_freq: int,
) -> None:
    """Evaluate a checkpoint on one or more corpora."""
    if not corpora:
        raise click.UsageError("No corpus given")
    with _errors():
        factory = Factory.create(Configuration())
        model = factory.load_model(
            checkpoint,
            train_corpora=train_corpora,
            min_token_freq=min_token_freq,
        )
        dialogues = {
            corpus.name: factory.load_dialogues([corpus], split)
            for corpus in corpora
        }
        evaluator = factory.create_evaluator(model)
        reports, predictions = evaluator.evaluate_corpora(dialogues)
    click.echo(format_table(reports))
    if report_path is not None:
        write_report(report_path, reports)
    if dump_states is not None:
        write_state_dump(
            dump_states,
            (
                {"corpus": name, **prediction.dump(dialogue.dialogue_id, t)}
                for name, corpus_dialogues in dialogues.items()
                for dialogue, predicted in zip(
                    corpus_dialogues, predictions[name], strict=True
                )
                for t, prediction in enumerate(predicted)
            ),
        )


@main.command()
@_checkpoint_option
@_vocab_corpus_option
@_min_token_freq_option
def repl(
    *,
    checkpoint: Path,
    train_corpora: tuple[Path, ...],
    min_token_freq: int,
) -> None:
    """Track a dialogue typed on standard input."""
    with _errors():
        factory = Factory.create(Configuration())
        model = factory.load_model(
            checkpoint,
            train_corpora=train_corpora,
            min_token_freq=min_token_freq,
        )
        session = ReplSession(factory.create_tracker(model))
    click.echo(ReplSession.usage)
    stdin = click.get_text_stream("stdin")
    while True:
        click.echo("> ", nl=False)
        line = stdin.readline()
        if not line:
            break
        response = session.handle(line)
        if response is None:
            break
        if response:
            click.echo(response)


@main.command()
@_config_option
@_corpus_option
@click.option(
    "--grid",
    "grid_text",
    required=True,
    help="Grid such as 'learning_rate=0.001,0.005;embedding_dim=50,100'.",
)
@click.option("--seed", type=int, default=None, help="Random seed.")
@click.option(
    "--output-dir",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help="Each grid point trains in a numbered subdirectory of this one.",
)
def gridsearch(
    *,
    config_path: Path | None,
    corpora: tuple[Path, ...],
    grid_text: str,
    seed: int | None,
    output_dir: Path | None,
) -> None:
    """Select hyperparameters by dev joint goal accuracy."""
    with _errors():
        base = _train_config(
            config_path,
            corpora=corpora,
            sampling=None,
            separate_encoders=None,
            seed=seed,
            output_dir=output_dir,
            max_steps=None,
        )
        if not base.train_corpora:
            raise click.UsageError("No training corpus given")
        try:
            grid = parse_grid(grid_text)
        except ValueError as exc:
            raise click.UsageError(str(exc)) from exc
        factory = Factory.create(Configuration())
        counter = itertools.count(1)

        def run(config: TrainConfig) -> MetricsReport:
            point_dir = base.output_dir / f"point-{next(counter)}"
            point = config.model_copy(update={"output_dir": point_dir})
            return factory.train_and_score(point)

        best, points = grid_search(base, grid, run)
    for point in points:
        click.echo(
            f"lr={point.config.learning_rate}"
            f" embedding_dim={point.config.embedding_dim}"
            f" min_keep_probability={point.config.min_keep_probability}"
            f" joint_goal={point.report.joint_goal_accuracy:.4f}"
        )
    click.echo(
        "best: "
        + json.dumps(
            best.config.model_dump(
                mode="json",
                include={
                    "learning_rate",
                    "embedding_dim",
                    "min_keep_probability",
                },
            ),
            sort_keys=True,
        )
    )


@main.command("inspect-checkpoint")
@click.argument("path", type=click.Path(path_type=Path))
def inspect_checkpoint(*, path: Path) -> None:
    """Print the metadata of a checkpoint."""
    with _errors():
        checkpoint = load_checkpoint(path)
    vocab = checkpoint.vocab
    weights = sum(int(p.size) for p in checkpoint.parameters.values())
    click.echo(f"step: {checkpoint.step}")
    click.echo(f"vocab hash: {vocab.fingerprint()}")
    click.echo(
        f"vocab: {len(vocab.tokens)} tokens, {len(vocab.slots)} slots,"
        f" {len(vocab.intents)} intents, {len(vocab.user_acts)} user acts,"
        f" {len(vocab.system_acts)} system acts"
    )
    click.echo(f"parameters: {len(checkpoint.parameters)} ({weights} weights)")
    for key, value in checkpoint.settings.model_dump().items():
        click.echo(f"{key}: {value}")


@main.command("import-sim")
@click.argument("source", type=click.Path(exists=True, path_type=Path))
@click.argument("destination", type=click.Path(path_type=Path))
def import_sim(*, source: Path, destination: Path) -> None:
    """Convert published Simulated Dialogues files to corpus files.

    SOURCE is either one file, written to DESTINATION, or a directory whose
    split files are written under the DESTINATION directory.
    """
    if source.is_file():
        pairs = [(source, destination)]
    else:
        pairs = [
            (source / f"{split}.json", destination / f"{split}.json")
            for split in SPLITS
            if (source / f"{split}.json").exists()
        ]
        if not pairs:
            raise click.UsageError(f"No split files found in {source}")
    for input_path, output_path in pairs:
        try:
            raw = json.loads(input_path.read_text(encoding="utf-8"))
            records = adapt_simulated_dialogues(raw)
        except (ValueError, KeyError, TypeError) as exc:
            raise click.ClickException(
                f"Cannot convert {input_path}: {exc}"
            ) from exc
        write_corpus(output_path, records)
        click.echo(f"Wrote {len(records)} dialogues to {output_path}")


@main.command()
@click.argument("report_a", type=click.Path(exists=True, path_type=Path))
@click.argument("report_b", type=click.Path(exists=True, path_type=Path))
@click.option(
    "--name",
    default=None,
    help="Corpus row to compare.  Defaults to the first row of each file.",
)
def compare(*, report_a: Path, report_b: Path, name: str | None) -> None:
    """Test whether two systems differ in joint goal accuracy."""
    with _errors():
        a = _read_report(report_a, name)
        b = _read_report(report_b, name)
        p = mcnemar_test(a.joint_goal_correct, b.joint_goal_correct)
    click.echo(
        f"joint goal: {a.joint_goal_accuracy:.4f} vs"
        f" {b.joint_goal_accuracy:.4f}"
    )
    verdict = "significant" if p < SIGNIFICANCE_LEVEL else "not significant"
    click.echo(f"McNemar p = {p:.4g} ({verdict} at {SIGNIFICANCE_LEVEL})")


def _read_report(path: Path, name: str | None) -> MetricsReport:
    reports = [MetricsReport.model_validate(r) for r in read_records(path)]
    if name is not None:
        reports = [r for r in reports if r.name == name]
    if not reports:
        raise click.UsageError(f"No report {name or ''} in {path}")
    return reports[0]
