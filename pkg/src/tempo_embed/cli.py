# -*- coding: utf-8 -*-

"""Command line interface for :mod:`tempo_embed`.

Run ``tempo-embed --help`` for the list of subcommands. A flat JSON document given
with ``--config`` supplies defaults for every subcommand flag of the same name;
flags given on the command line take precedence.
"""

import json
import logging
import os
import sys
import typing as ty

import click
import numpy as np
import pandas as pd
from more_click import verbose_option
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import ArgumentError, NumericError, TempoEmbedError
from .evaluation import (
    DEFAULT_TRAIN_FRACTION,
    ExperimentResult,
    run_type1_sweep,
    run_type2_batch_ratio,
    run_type2_convergence,
    run_type3_accuracy,
    run_type4_comparison,
    sequential_evaluate,
)
from .graphdata import (
    DATA_DIR_ENV,
    InteractionLog,
    chronological_split,
    load_csv,
    save_csv,
    summary_stats,
)
from .losses import TRAINING_LOSSES, LossKind
from .model import load_checkpoint
from .synthgen import Type2Spec, Type4Spec, generate, parse_synth_spec
from .tbatcher import batch_size_distribution, build_batches
from .trainer import TrainConfig, model_gradient_check, save_report, train
from .version import get_version

__all__ = [
    "RunConfig",
    "dispatch",
    "main",
    "resolve_data_path",
    "run",
]

LOSS_CHOICES = [kind.value for kind in TRAINING_LOSSES]
GRADIENT_TOLERANCE = 1e-4


def resolve_data_path(path: str) -> str:
    """Resolve an input path, falling back on ``$TEMPO_EMBED_DATA_DIR``.

    :param path: The path as given.
    :type path: str
    :return: The path itself when it exists, else the path under the data directory.
    :rtype: str
    """
    if os.path.exists(path) or os.path.isabs(path):
        return path

    data_dir = os.environ.get(DATA_DIR_ENV)
    if data_dir and os.path.exists(os.path.join(data_dir, path)):
        return os.path.join(data_dir, path)

    return path


class RunConfig(BaseModel):
    """Resolved invocation of a subcommand, embedded in the files it writes."""

    model_config = ConfigDict(frozen=True)

    command: str
    seed: int = Field(0, ge=0)
    inputs: ty.Dict[str, str] = Field(default_factory=dict)
    outputs: ty.Dict[str, str] = Field(default_factory=dict)
    options: ty.Dict[str, ty.Any] = Field(default_factory=dict)

    @field_validator("inputs")
    @classmethod
    def _check_inputs(cls, value: ty.Dict[str, str]) -> ty.Dict[str, str]:
        """Require every input file to exist."""
        for name, path in value.items():
            if not os.path.isfile(path):
                raise ValueError(f"{name} file {path!r} does not exist.")
        return value

    @field_validator("outputs")
    @classmethod
    def _check_outputs(cls, value: ty.Dict[str, str]) -> ty.Dict[str, str]:
        """Require the directory of every output file to exist."""
        for name, path in value.items():
            directory = os.path.dirname(os.path.abspath(path))
            if not os.path.isdir(directory):
                raise ValueError(f"Directory of {name} file {path!r} does not exist.")
        return value

    def to_dict(self) -> ty.Dict[str, ty.Any]:
        """Return the JSON-ready config.

        :return: Field name to value.
        :rtype: ty.Dict[str, ty.Any]
        """
        return self.model_dump(mode="json")


def _run_config(
    command: str,
    seed: int = 0,
    inputs: ty.Optional[ty.Mapping[str, ty.Optional[str]]] = None,
    outputs: ty.Optional[ty.Mapping[str, ty.Optional[str]]] = None,
    **options: ty.Any,
) -> RunConfig:
    """Validate the paths of an invocation before any work starts."""
    logger = logging.getLogger(__name__)

    run_cfg = RunConfig(
        command=command,
        seed=seed,
        inputs={k: resolve_data_path(v) for k, v in (inputs or {}).items() if v is not None},
        outputs={k: v for k, v in (outputs or {}).items() if v is not None},
        options=options,
    )
    logger.debug(f"Resolved {command} invocation: {run_cfg.to_dict()}")
    return run_cfg


def _parse_grid(value: str, cast: ty.Callable[[str], ty.Any], flag: str) -> ty.List[ty.Any]:
    """Parse a comma-separated list of numbers."""
    logger = logging.getLogger(__name__)

    try:
        grid = [cast(part) for part in value.split(",") if part.strip()]
    except ValueError as exc:
        msg = f"{flag} expects comma-separated numbers, got {value!r}."
        logger.error(msg)
        raise ArgumentError(msg) from exc

    if not grid:
        msg = f"{flag} must not be empty."
        logger.error(msg)
        raise ArgumentError(msg)

    return grid


def _write_json(document: ty.Any, path: ty.Optional[str]) -> None:
    """Write JSON to a file, or to stdout without a path."""
    text = json.dumps(document, indent=2)
    if path is None:
        click.echo(text)
        return
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text + "\n")


def _config_defaults(command: click.Command, flat: ty.Mapping[str, ty.Any]) -> ty.Dict[str, ty.Any]:
    """Project a flat config document onto the parameters of a command tree."""
    defaults: ty.Dict[str, ty.Any] = {
        param.name: flat[param.name]
        for param in command.params
        if param.name is not None and param.name in flat
    }
    if isinstance(command, click.Group):
        for name, sub in command.commands.items():
            defaults[name] = _config_defaults(sub, flat)
    return defaults


def _load_config(ctx: click.Context, _param: click.Parameter, path: ty.Optional[str]) -> None:
    """Install a config file as the default map of every subcommand."""
    logger = logging.getLogger(__name__)

    if path is None:
        return

    with open(path, "r", encoding="utf-8") as handle:
        document = json.load(handle)

    if not isinstance(document, dict):
        msg = f"Config file {path} must hold a JSON object."
        logger.error(msg)
        raise ArgumentError(msg)

    flat = {str(key).replace("-", "_"): value for key, value in document.items()}
    ctx.default_map = _config_defaults(ctx.command, flat)


@click.group()
@click.version_option(get_version(with_git_hash=False))
@click.option(
    "--config",
    type=click.Path(exists=True, dir_okay=False),
    callback=_load_config,
    is_eager=True,
    expose_value=False,
    help="JSON file with defaults for subcommand flags.",
)
def main() -> None:
    """Train interaction-network embeddings with t-batching and compare batch losses."""


@main.command(name="generate")
@click.option(
    "--type", "network_type", type=click.IntRange(1, 4), required=True, help="Network type."
)
@click.option("--k", type=int, default=None, help="Type 1: number of edges.  [default: 4000]")
@click.option(
    "--p", type=float, default=None, help="Type 1: probability of item 4.  [default: 0.5]"
)
@click.option("--n-pairs", type=int, default=None, help="Type 2: users and items.  [default: 5]")
@click.option("--repetitions", type=int, default=None, help="Type 2: repetitions.  [default: 200]")
@click.option(
    "--n-users", type=int, default=None, help="Types 3 and 4: users.  [default: 1000 or 100]"
)
@click.option("--n-items", type=int, default=None, help="Type 4: items.  [default: 100]")
@click.option("--k-out", type=int, default=None, help="Type 4: out-degree.  [default: 10]")
@click.option(
    "--p-jump", type=float, default=None, help="Type 4: jump probability.  [default: 0.25]"
)
@click.option(
    "--arrival-rate", type=float, default=None, help="Type 4: arrival rate.  [default: 1.0]"
)
@click.option(
    "--n-interactions", type=int, default=None, help="Type 4: interactions.  [default: 8500]"
)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Output CSV.")
@verbose_option
def generate_command(network_type: int, seed: int, out: str, **flags: ty.Any) -> None:
    """Generate a synthetic interaction network as CSV."""
    run_cfg = _run_config("generate", seed=seed, outputs={"out": out}, type=network_type, **flags)
    spec = parse_synth_spec(
        {
            "variant": f"type{network_type}",
            "seed": seed,
            **{
                name: value
                for name, value in run_cfg.options.items()
                if value is not None and name != "type"
            },
        }
    )
    save_csv(generate(spec), out)


@main.command(name="stats")
@click.option("--data", required=True, help="Interaction CSV.")
@click.option(
    "--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True
)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Output file.")
@verbose_option
def stats_command(data: str, fmt: str, out: ty.Optional[str]) -> None:
    """Report per-user diversity statistics of an interaction log."""
    run_cfg = _run_config("stats", inputs={"data": data}, outputs={"out": out}, format=fmt)
    stats = summary_stats(load_csv(run_cfg.inputs["data"]))

    if fmt == "json":
        _write_json(stats.to_dict(), out)
        return

    table = stats.per_user.reset_index()
    if out is None:
        click.echo(table.to_csv(index=False), nl=False)
    else:
        table.to_csv(out, index=False)


@main.command(name="batch-stats")
@click.option("--data", required=True, help="Interaction CSV.")
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Histogram CSV.")
@click.option("--summary", type=click.Path(dir_okay=False), default=None, help="Summary JSON.")
@verbose_option
def batch_stats_command(data: str, out: str, summary: ty.Optional[str]) -> None:
    """Report the t-batch size distribution of an interaction log."""
    run_cfg = _run_config(
        "batch-stats", inputs={"data": data}, outputs={"out": out, "summary": summary}
    )
    distribution = batch_size_distribution(build_batches(load_csv(run_cfg.inputs["data"])))

    pd.DataFrame(
        {"size": list(distribution.histogram), "count": list(distribution.histogram.values())}
    ).to_csv(out, index=False)
    _write_json(distribution.to_dict(), summary)


def _train_options(command: ty.Callable[..., None]) -> ty.Callable[..., None]:
    """Attach the hyperparameter flags shared by ``train`` and ``experiment``."""
    defaults = TrainConfig()
    options = [
        click.option(
            "--epochs", type=int, default=defaults.epochs, show_default=True, help="Epochs."
        ),
        click.option("--dim", type=int, default=defaults.dim, show_default=True),
        click.option("--lr", type=float, default=defaults.learning_rate, show_default=True),
        click.option(
            "--weight-decay", type=float, default=defaults.weight_decay, show_default=True
        ),
        click.option(
            "--span-size",
            type=int,
            default=defaults.span_size,
            show_default=True,
            help="T-batches per optimizer step.",
        ),
        click.option("--lambda-u", type=float, default=defaults.lambda_u, show_default=True),
        click.option("--lambda-i", type=float, default=defaults.lambda_i, show_default=True),
        click.option("--clip-norm", type=float, default=defaults.clip_norm, show_default=True),
        click.option("--seed", type=int, default=defaults.seed, show_default=True),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def _train_config(loss: str, seed: int, **flags: ty.Any) -> TrainConfig:
    """Build a train config from the shared flags."""
    return TrainConfig(
        loss_kind=loss,
        epochs=flags["epochs"],
        learning_rate=flags["lr"],
        weight_decay=flags["weight_decay"],
        span_size=flags["span_size"],
        seed=seed,
        dim=flags["dim"],
        lambda_u=flags["lambda_u"],
        lambda_i=flags["lambda_i"],
        clip_norm=flags["clip_norm"],
    )


@main.command(name="train")
@click.option("--data", required=True, help="Interaction CSV.")
@click.option(
    "--loss", type=click.Choice(LOSS_CHOICES), default=LossKind.TBATCH.value, show_default=True
)
@_train_options
@click.option(
    "--train-fraction",
    type=float,
    default=None,
    help="Train on this prefix and validate on the rest after every epoch.",
)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Checkpoint JSON.")
@click.option("--report", type=click.Path(dir_okay=False), default=None, help="Report JSON.")
@click.option("--progress/--no-progress", default=False, show_default=True)
@verbose_option
def train_command(
    data: str,
    loss: str,
    train_fraction: ty.Optional[float],
    out: ty.Optional[str],
    report: ty.Optional[str],
    progress: bool,
    seed: int,
    **flags: ty.Any,
) -> None:
    """Train the embedding model on an interaction log."""
    run_cfg = _run_config(
        "train",
        seed=seed,
        inputs={"data": data},
        outputs={"out": out, "report": report},
        loss=loss,
        train_fraction=train_fraction,
        **flags,
    )
    cfg = _train_config(loss, seed, **flags)

    log = load_csv(run_cfg.inputs["data"])
    validation: ty.Optional[InteractionLog] = None
    if train_fraction is not None:
        log, validation = chronological_split(log, train_fraction)

    result = train(log, cfg, validation=validation, checkpoint_path=out, show_progress=progress)

    if report is None:
        click.echo(f"final loss: {result.losses[-1]:.6f}")
    else:
        save_report(result, report, extra={"run": run_cfg.to_dict()})


@main.command(name="evaluate")
@click.option("--checkpoint", required=True, help="Checkpoint JSON written by train.")
@click.option("--data", required=True, help="Interaction CSV whose prefix the checkpoint saw.")
@click.option(
    "--train-fraction", type=float, default=DEFAULT_TRAIN_FRACTION, show_default=True
)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Metrics JSON.")
@verbose_option
def evaluate_command(
    checkpoint: str, data: str, train_fraction: float, out: ty.Optional[str]
) -> None:
    """Evaluate a checkpoint on the test suffix of an interaction log."""
    run_cfg = _run_config(
        "evaluate",
        inputs={"checkpoint": checkpoint, "data": data},
        outputs={"out": out},
        train_fraction=train_fraction,
    )
    _, test = chronological_split(load_csv(run_cfg.inputs["data"]), train_fraction)
    metrics = sequential_evaluate(load_checkpoint(run_cfg.inputs["checkpoint"]), test)

    document = metrics.to_dict()
    document["run"] = run_cfg.to_dict()
    _write_json(document, out)


@main.group(name="experiment")
def experiment_group() -> None:
    """Reproduce the loss comparisons on synthetic networks."""


def _experiment_options(command: ty.Callable[..., None]) -> ty.Callable[..., None]:
    """Attach the flags shared by every experiment."""
    options = [
        click.option(
            "--losses",
            default=",".join(kind.value for kind in TRAINING_LOSSES),
            show_default=True,
            help="Comma-separated losses to compare.",
        ),
        click.option(
            "--jobs",
            type=click.IntRange(min=1),
            default=1,
            show_default=True,
            help="Worker processes.",
        ),
        click.option(
            "--out-csv", type=click.Path(dir_okay=False), default=None, help="Tidy records CSV."
        ),
        click.option(
            "--out-json", type=click.Path(dir_okay=False), default=None, help="Summary JSON."
        ),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def _finish_experiment(
    result: ExperimentResult,
    run_cfg: RunConfig,
    out_csv: ty.Optional[str],
    out_json: ty.Optional[str],
) -> None:
    """Write the experiment outputs, or print the summary without a JSON path."""
    result.settings["run"] = run_cfg.to_dict()
    result.save(csv_path=out_csv, json_path=out_json)
    if out_json is None:
        click.echo(result.summary.to_string(index=False))


def _loss_kinds(value: str) -> ty.List[LossKind]:
    """Parse a comma-separated list of training loss names."""
    logger = logging.getLogger(__name__)

    kinds = [LossKind.from_name(name) for name in _parse_grid(value, str.strip, "--losses")]
    for kind in kinds:
        if kind not in TRAINING_LOSSES:
            msg = f"--losses accepts {', '.join(LOSS_CHOICES)}, got {kind.value!r}."
            logger.error(msg)
            raise ArgumentError(msg)
    return kinds


@experiment_group.command(name="type1")
@click.option("--p-grid", default="0.3,0.55,0.6,0.8", show_default=True, help="Values of p.")
@click.option("--k", type=int, default=4000, show_default=True, help="Edges per network.")
@click.option("--seeds", type=int, default=5, show_default=True, help="Networks per value of p.")
@click.option(
    "--train-fraction", type=float, default=DEFAULT_TRAIN_FRACTION, show_default=True
)
@_train_options
@_experiment_options
@verbose_option
def type1_command(
    p_grid: str,
    k: int,
    seeds: int,
    train_fraction: float,
    losses: str,
    jobs: int,
    out_csv: ty.Optional[str],
    out_json: ty.Optional[str],
    seed: int,
    **flags: ty.Any,
) -> None:
    """Sweep p on type-1 networks and compare user 3's accuracy per loss."""
    run_cfg = _run_config(
        "experiment type1",
        seed=seed,
        outputs={"out_csv": out_csv, "out_json": out_json},
        p_grid=p_grid,
        k=k,
        seeds=seeds,
        train_fraction=train_fraction,
        losses=losses,
        **flags,
    )
    result = run_type1_sweep(
        _parse_grid(p_grid, float, "--p-grid"),
        _train_config(LossKind.TBATCH.value, seed, **flags),
        n_seeds=seeds,
        k=k,
        train_fraction=train_fraction,
        losses=_loss_kinds(losses),
        jobs=jobs,
    )
    _finish_experiment(result, run_cfg, out_csv, out_json)


@experiment_group.command(name="type2")
@click.option("--n-pairs", type=int, default=5, show_default=True)
@click.option("--repetitions", type=int, default=200, show_default=True)
@click.option("--test-repetitions", type=int, default=10, show_default=True)
@click.option("--seeds", type=int, default=5, show_default=True)
@_train_options
@_experiment_options
@verbose_option
def type2_command(
    n_pairs: int,
    repetitions: int,
    test_repetitions: int,
    seeds: int,
    losses: str,
    jobs: int,
    out_csv: ty.Optional[str],
    out_json: ty.Optional[str],
    seed: int,
    **flags: ty.Any,
) -> None:
    """Count the epochs each loss needs to learn user 1's second edge."""
    run_cfg = _run_config(
        "experiment type2",
        seed=seed,
        outputs={"out_csv": out_csv, "out_json": out_json},
        n_pairs=n_pairs,
        repetitions=repetitions,
        test_repetitions=test_repetitions,
        seeds=seeds,
        losses=losses,
        **flags,
    )
    result = run_type2_convergence(
        Type2Spec(n_pairs=n_pairs, repetitions=repetitions, seed=seed),
        _train_config(LossKind.TBATCH.value, seed, **flags),
        n_seeds=seeds,
        test_repetitions=test_repetitions,
        losses=_loss_kinds(losses),
        jobs=jobs,
    )
    _finish_experiment(result, run_cfg, out_csv, out_json)


@experiment_group.command(name="type3")
@click.option("--n-users", type=int, default=1000, show_default=True)
@click.option("--seeds", type=int, default=5, show_default=True)
@click.option(
    "--train-fraction", type=float, default=DEFAULT_TRAIN_FRACTION, show_default=True
)
@_train_options
@_experiment_options
@verbose_option
def type3_command(
    n_users: int,
    seeds: int,
    train_fraction: float,
    losses: str,
    jobs: int,
    out_csv: ty.Optional[str],
    out_json: ty.Optional[str],
    seed: int,
    **flags: ty.Any,
) -> None:
    """Track per-epoch test accuracy of each loss on type-3 networks."""
    run_cfg = _run_config(
        "experiment type3",
        seed=seed,
        outputs={"out_csv": out_csv, "out_json": out_json},
        n_users=n_users,
        seeds=seeds,
        train_fraction=train_fraction,
        losses=losses,
        **flags,
    )
    result = run_type3_accuracy(
        n_users,
        _train_config(LossKind.TBATCH.value, seed, **flags),
        n_seeds=seeds,
        train_fraction=train_fraction,
        losses=_loss_kinds(losses),
        jobs=jobs,
    )
    _finish_experiment(result, run_cfg, out_csv, out_json)


@experiment_group.command(name="type4")
@click.option("--train-sizes", default="8000", show_default=True, help="Training set sizes.")
@click.option("--samples", type=int, default=10, show_default=True, help="Networks per size.")
@click.option("--n-users", type=int, default=100, show_default=True)
@click.option("--n-items", type=int, default=100, show_default=True)
@click.option("--k-out", type=int, default=10, show_default=True)
@click.option("--p-jump", type=float, default=0.25, show_default=True)
@click.option("--arrival-rate", type=float, default=1.0, show_default=True)
@_train_options
@_experiment_options
@verbose_option
def type4_command(
    train_sizes: str,
    samples: int,
    n_users: int,
    n_items: int,
    k_out: int,
    p_jump: float,
    arrival_rate: float,
    losses: str,
    jobs: int,
    out_csv: ty.Optional[str],
    out_json: ty.Optional[str],
    seed: int,
    **flags: ty.Any,
) -> None:
    """Compare MRR and R@10 of the losses on type-4 networks."""
    run_cfg = _run_config(
        "experiment type4",
        seed=seed,
        outputs={"out_csv": out_csv, "out_json": out_json},
        train_sizes=train_sizes,
        samples=samples,
        n_users=n_users,
        n_items=n_items,
        k_out=k_out,
        p_jump=p_jump,
        arrival_rate=arrival_rate,
        losses=losses,
        **flags,
    )
    spec = Type4Spec(
        n_users=n_users,
        n_items=n_items,
        k_out=k_out,
        p_jump=p_jump,
        arrival_rate=arrival_rate,
        seed=seed,
    )
    result = run_type4_comparison(
        spec,
        _parse_grid(train_sizes, int, "--train-sizes"),
        n_samples=samples,
        cfg=_train_config(LossKind.TBATCH.value, seed, **flags),
        losses=_loss_kinds(losses),
        jobs=jobs,
    )
    _finish_experiment(result, run_cfg, out_csv, out_json)


@experiment_group.command(name="type2-ratio")
@click.option("--n-pairs", type=int, default=5, show_default=True)
@click.option("--repetitions-grid", default="10,50,100,200,500", show_default=True)
@click.option("--out-csv", type=click.Path(dir_okay=False), default=None, help="Tidy records CSV.")
@click.option("--out-json", type=click.Path(dir_okay=False), default=None, help="Summary JSON.")
@verbose_option
def type2_ratio_command(
    n_pairs: int, repetitions_grid: str, out_csv: ty.Optional[str], out_json: ty.Optional[str]
) -> None:
    """Tabulate the batch-size ratio of user 1's edges on type-2 networks."""
    run_cfg = _run_config(
        "experiment type2-ratio",
        outputs={"out_csv": out_csv, "out_json": out_json},
        n_pairs=n_pairs,
        repetitions_grid=repetitions_grid,
    )
    grid = _parse_grid(repetitions_grid, int, "--repetitions-grid")
    result = run_type2_batch_ratio(n_pairs, grid)
    _finish_experiment(result, run_cfg, out_csv, out_json)


@main.command(name="gradient-check")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--dim", type=int, default=4, show_default=True)
@click.option("--eps", type=float, default=1e-5, show_default=True, help="Finite-difference step.")
@click.option("--tolerance", type=float, default=GRADIENT_TOLERANCE, show_default=True)
@click.option(
    "--loss", type=click.Choice(LOSS_CHOICES), default=None, help="Check one loss; all by default."
)
@verbose_option
def gradient_check_command(
    seed: int, dim: int, eps: float, tolerance: float, loss: ty.Optional[str]
) -> None:
    """Compare analytic and finite-difference gradients of the full model."""
    logger = logging.getLogger(__name__)

    kinds = list(TRAINING_LOSSES) if loss is None else [LossKind.from_name(loss)]
    errors = {
        kind.value: model_gradient_check(seed=seed, dim=dim, loss_kind=kind, eps=eps)
        for kind in kinds
    }
    worst = float(np.max(list(errors.values())))

    for name, error in errors.items():
        click.echo(f"{name}: max relative error {error:.3e}")
    click.echo(f"max relative error: {worst:.3e}")

    if not worst < tolerance:
        msg = f"Max relative error {worst:.3e} exceeds tolerance {tolerance:.1e}."
        logger.error(msg)
        raise NumericError(msg)


def _one_line(exc: Exception) -> str:
    """Render an error as a single line."""
    if isinstance(exc, ValidationError):
        return "; ".join(
            f"{'.'.join(str(part) for part in error['loc']) or 'value'}: {error['msg']}"
            for error in exc.errors()
        )
    return " ".join(str(exc).split())


def dispatch(argv: ty.Optional[ty.Sequence[str]] = None) -> int:
    """Run the command line and map the outcome to an exit code.

    :param argv: Arguments without the program name, defaults to ``sys.argv[1:]``.
    :type argv: ty.Optional[ty.Sequence[str]]
    :return: 0 on success, 1 on domain errors, 2 on usage errors.
    :rtype: int
    """
    args = list(sys.argv[1:] if argv is None else argv)
    try:
        outcome = main.main(args=args, prog_name="tempo-embed", standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        return 2
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.Abort:
        click.echo("error: aborted", err=True)
        return 1
    except (TempoEmbedError, ValidationError, OSError, json.JSONDecodeError) as exc:
        click.echo(f"error: {_one_line(exc)}", err=True)
        return 1

    return outcome if isinstance(outcome, int) else 0


def run() -> None:
    """Entry point of the ``tempo-embed`` console script."""
    sys.exit(dispatch())


if __name__ == "__main__":
    run()
