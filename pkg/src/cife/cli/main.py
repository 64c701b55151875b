"""Command-line interface for category-invariant domain adaptation experiments."""
import json
import logging
import sys
from functools import wraps
from pathlib import Path
from typing import List, Optional, Sequence

import click
import pandas as pd
from rich.console import Console
from rich.markup import escape
from rich.panel import Panel
from rich.table import Table

from cife import __version__
from cife.core.config import ExperimentConfig, load_config
from cife.core.errors import CifeError, ConfigError
from cife.core.logging import configure_logging
from cife.core.types import LAMBDA_C_GRID, EpochMetrics, ProbeKind, Variant
from cife.data.io import save_dataset
from cife.engine import ExperimentEngine
from cife.models.checkpoint import load_checkpoint, save_checkpoint
from cife.probes.sweep import write_sweep_csv
from cife.training.trainer import final_eval_seed, final_target_accuracy, split_accuracy

console = Console()

EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _fail(e: Exception):
    console.print(f"[red]Error: {escape(str(e))}[/red]")
    sys.exit(EXIT_USAGE if isinstance(e, ConfigError) else EXIT_RUNTIME)


def handle_errors(command):
    """Turn library errors into an exit code: 2 for configuration problems, 1 otherwise."""
    @wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except (CifeError, OSError, ValueError, KeyError, RuntimeError) as e:
            _fail(e)
    return wrapper


def config_options(command):
    """--config and repeatable --set options shared by every command."""
    command = click.option("--set", "overrides", multiple=True, metavar="SECTION.KEY=VALUE",
                           help="Override a config key (repeatable)")(command)
    command = click.option("--config", "-c", "config_path", type=click.Path(exists=True, dir_okay=False),
                           help="Experiment config file")(command)
    return command


def build_config(config_path: Optional[str], overrides: Sequence[str], **flags) -> ExperimentConfig:
    """File, then --set overrides, then typed flags that were given."""
    config = load_config(config_path) if config_path else ExperimentConfig()
    config = config.with_overrides(overrides)
    return config.with_overrides(f"{key}={value}" for key, value in flags.items() if value is not None)


def _write_json(path: Path, record: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(record, sort_keys=True, indent=2) + "\n")


def _parse_floats(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise ConfigError(f"invalid grid '{text}': {e}") from e


def _parse_variants(text: str) -> List[Variant]:
    try:
        return [Variant(part.strip()) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise ConfigError(f"invalid variant list '{text}': {e}") from e


@click.group()
@click.version_option(version=__version__)
@click.option("--verbose", "-v", is_flag=True, help="Debug logging")
def cli(verbose):
    """
    Category-invariant feature enhancement for adversarial domain adaptation.

    Generate synthetic domain-shift tasks, train source-only, DANN, CDAN and
    CIFE models, and probe the learned representations.
    """
    configure_logging(logging.DEBUG if verbose else logging.WARNING)


@cli.command()
@click.option("--out", "-o", "out_path", required=True, type=click.Path(dir_okay=False),
              help="Dataset file to write")
@click.option("--kind", type=click.Choice(["factorized", "moons"]), help="Generator")
@click.option("--seed", type=int, help="Dataset seed")
@config_options
@handle_errors
def generate(out_path, kind, seed, config_path, overrides):
    """
    Generate a synthetic dataset and its manifest.

    Examples:

        cife generate -o data/task.cds

        cife generate -o data/moons.cds --kind moons --set dataset.angle=45
    """
    config = build_config(config_path, overrides, **{"dataset.kind": kind, "dataset.seed": seed})
    engine = ExperimentEngine(config)
    dataset, spec = engine.generate()
    out = save_dataset(out_path, dataset)
    manifest_path = out.with_name(out.name + ".manifest.json")
    _write_json(manifest_path, {
        "config_hash": engine.config_hash,
        "seed": spec.seed,
        "spec": spec.to_record(),
        "dataset_file": out.name,
        "dataset_checksum": dataset.checksum(),
    })
    console.print(f"[green]✓ Wrote {len(dataset.source)} source / {len(dataset.target_train)} target rows "
                  f"to {out}[/green]")
    console.print(f"[cyan]Manifest: {manifest_path}[/cyan]")


@cli.command()
@click.option("--dataset", "-d", "dataset_path", type=click.Path(exists=True, dir_okay=False),
              help="Dataset file or manifest (generated from config if omitted)")
@click.option("--out-dir", "-o", type=click.Path(file_okay=False), help="Output directory")
@click.option("--variant", type=click.Choice([v.value for v in Variant]), help="Training variant")
@click.option("--epochs", type=int, help="Training epochs")
@click.option("--seed", type=int, help="Training seed")
@click.option("--lambda-c", type=float, help="Category-alignment weight λ_c")
@config_options
@handle_errors
def train(dataset_path, out_dir, variant, epochs, seed, lambda_c, config_path, overrides):
    """
    Train a model; writes checkpoint.json and metrics.jsonl.

    Examples:

        cife train -d data/task.cds --variant cife-dann -o runs/cife

        cife train -c experiment.cfg --set train.lambda_c=0.01
    """
    config = build_config(config_path, overrides, **{
        "model.variant": variant, "train.epochs": epochs, "train.seed": seed,
        "train.lambda_c": lambda_c, "output.dir": out_dir,
    })
    engine = ExperimentEngine(config)
    cfg = config.train_config()
    dataset = engine.dataset(dataset_path)

    out = Path(config.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics_path = out / "metrics.jsonl"
    stamp = {"config_hash": engine.config_hash, "seed": cfg.seed}

    with metrics_path.open("w") as stream:
        def on_epoch(metrics: EpochMetrics):
            stream.write(json.dumps({"event": "epoch", **metrics.to_record(), **stamp}, sort_keys=True) + "\n")
            stream.flush()

        console.print(f"[cyan]Training {cfg.variant.value} for {cfg.epochs} epochs...[/cyan]")
        model, _ = engine.train(dataset, on_epoch)
        source_acc = split_accuracy(model, dataset.source.features, dataset.source,
                                    cfg.prediction_draws, final_eval_seed(cfg))
        target_acc = final_target_accuracy(model, dataset, cfg)
        stream.write(json.dumps({
            "event": "final", "source_accuracy": source_acc, "target_accuracy": target_acc, **stamp,
        }, sort_keys=True) + "\n")

    checkpoint_path = save_checkpoint(out / "checkpoint.json", model, cfg, engine.config_hash)
    _display_accuracies(cfg.variant, source_acc, target_acc)
    console.print(f"[green]✓ Checkpoint: {checkpoint_path}[/green]")
    console.print(f"[green]✓ Metrics: {metrics_path}[/green]")


@cli.command()
@click.option("--checkpoint", "-k", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--dataset", "-d", "dataset_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "-o", "out_path", required=True, type=click.Path(dir_okay=False),
              help="Predictions CSV to write")
@click.option("--seed", type=int, help="Prediction seed (defaults to the checkpoint's training seed)")
@click.option("--k-pred", type=int, help="Source draws per target row")
@config_options
@handle_errors
def predict(checkpoint, dataset_path, out_path, seed, k_pred, config_path, overrides):
    """
    Predict target-test labels with a trained model.

    Writes a CSV of index,label,prediction and prints the accuracy.

    Example:

        cife predict -k runs/cife/checkpoint.json -d data/task.cds -o runs/cife/pred.csv
    """
    model, meta = load_checkpoint(checkpoint)
    trained = meta["train_config"]
    inherited = {}
    if trained is not None:
        seed = trained.seed if seed is None else seed
        k_pred = trained.prediction_draws if k_pred is None else k_pred
        inherited = {
            "train.epochs": trained.epochs,
            "train.lambda_c": trained.lambda_c,
            "train.allow_off_grid": trained.allow_off_grid,
        }
    config = build_config(config_path, overrides, **{
        **inherited, "train.seed": seed, "train.prediction_draws": k_pred,
    })
    engine = ExperimentEngine(config)
    dataset = engine.dataset(dataset_path)
    labels, accuracy = engine.predict(model, dataset)

    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame({
        "index": range(len(labels)),
        "label": dataset.target_test.labels,
        "prediction": labels,
    }).to_csv(out, index=False)
    _write_json(out.with_name(out.name + ".manifest.json"), engine.manifest(
        checkpoint=str(checkpoint), accuracy=accuracy, checkpoint_config_hash=meta["config_hash"],
    ))
    console.print(f"[bold]Target accuracy:[/bold] [green]{accuracy:.4f}[/green]")


@cli.command()
@click.option("--checkpoint", "-k", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--dataset", "-d", "dataset_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--kind", type=click.Choice([k.value for k in ProbeKind]),
              help="Probe to run [default: probes.kinds from config]")
@click.option("--out", "-o", "out_path", required=True, type=click.Path(dir_okay=False),
              help="Report JSON to write")
@config_options
@handle_errors
def probe(checkpoint, dataset_path, kind, out_path, config_path, overrides):
    """
    Probe a trained model's frozen features.

    Examples:

        cife probe -k runs/dann/checkpoint.json -d data/task.cds --kind a-distance -o runs/dann/a.json

        cife probe -k runs/cife/checkpoint.json -d data/task.cds --kind all -o runs/cife/probes.json
    """
    config = build_config(config_path, overrides)
    engine = ExperimentEngine(config)
    kinds = [ProbeKind(kind)] if kind else config.probe_kinds()
    report = engine.probe(checkpoint, dataset_path, kinds)
    kind_names = ",".join(k.value for k in kinds)
    record = {**engine.manifest(checkpoint=str(checkpoint), kind=kind_names), "report": report.to_record()}
    _write_json(Path(out_path), record)

    if report.epsilon is not None:
        console.print(f"ε = {report.epsilon:.4f}   d_A = {report.d_a:.4f}")
    _display_report(report.to_record())
    stats = engine.cache_stats()
    logging.getLogger(__name__).debug("feature cache: %d hits, %d misses", stats["hits"], stats["misses"])


@cli.command()
@click.option("--dataset", "-d", "dataset_path", type=click.Path(exists=True, dir_okay=False),
              help="Dataset file or manifest (generated from config if omitted)")
@click.option("--grid", default=",".join(str(v) for v in LAMBDA_C_GRID), show_default=True,
              help="Comma-separated λ_c values")
@click.option("--runs", type=int, help="Replicates per grid value")
@click.option("--workers", type=int, help="Parallel replicate processes")
@click.option("--out", "-o", "out_path", required=True, type=click.Path(dir_okay=False), help="CSV to write")
@config_options
@handle_errors
def sweep(dataset_path, grid, runs, workers, out_path, config_path, overrides):
    """
    λ_c sensitivity sweep; writes lambda_c,mean_acc,std_acc CSV.

    Example:

        cife sweep -d data/task.cds --runs 3 -o runs/sweep.csv
    """
    config = build_config(config_path, overrides, **{"train.n_runs": runs, "train.workers": workers})
    values = _parse_floats(grid)
    off_grid = [v for v in values if v not in LAMBDA_C_GRID]
    if off_grid and not config.train.allow_off_grid:
        raise ConfigError(f"λ_c values {off_grid} are off the default grid; set train.allow_off_grid=true")
    engine = ExperimentEngine(config)
    dataset = engine.dataset(dataset_path)
    report = engine.sweep(dataset, values)
    rows = report.lambda_c_table

    out = write_sweep_csv(rows, out_path)
    _write_json(out.with_name(out.name + ".manifest.json"), engine.manifest(
        dataset_checksum=dataset.checksum(), report=report.to_record(),
    ))

    table = Table(title="λ_c sensitivity", show_header=True, header_style="bold cyan")
    table.add_column("λ_c", justify="right")
    table.add_column("Target accuracy (%)", justify="right")
    for row in rows:
        table.add_row(f"{row.lambda_c:g}", f"{row.mean_acc * 100:.1f}±{row.std_acc * 100:.1f}")
    console.print(table)
    console.print(f"[green]✓ Sweep table: {out}[/green]")


@cli.command()
@click.option("--dataset", "-d", "dataset_path", type=click.Path(exists=True, dir_okay=False),
              help="Dataset file or manifest (generated from config if omitted)")
@click.option("--variants", default="source-only,dann,cife-dann", show_default=True,
              help="Comma-separated variants")
@click.option("--runs", type=int, help="Replicates per variant")
@click.option("--workers", type=int, help="Parallel replicate processes")
@click.option("--out", "-o", "out_path", required=True, type=click.Path(dir_okay=False),
              help="Summary JSON to write")
@config_options
@handle_errors
def compare(dataset_path, variants, runs, workers, out_path, config_path, overrides):
    """
    Compare variants on one dataset; mean±std target accuracy per variant.

    Example:

        cife compare -d data/task.cds --variants source-only,dann,cdan,cife-dann,cife-cdan -o runs/compare.json
    """
    config = build_config(config_path, overrides, **{"train.n_runs": runs, "train.workers": workers})
    requested = _parse_variants(variants)
    engine = ExperimentEngine(config)
    dataset = engine.dataset(dataset_path)
    checksum = dataset.checksum()
    results = engine.compare(dataset, requested)

    _write_json(Path(out_path), engine.manifest(rows=[
        {
            "variant": variant.value,
            "mean": summary.mean,
            "std": summary.std,
            "accuracies": list(summary.accuracies),
            "seeds": list(summary.seeds),
            "dataset_checksum": checksum,
        }
        for variant, summary in results.items()
    ], dataset_checksum=checksum))

    console.print(Panel.fit("[bold cyan]Target accuracy (%)[/bold cyan]", border_style="cyan"))
    table = Table(show_header=True, header_style="bold cyan")
    table.add_column("Variant", style="cyan")
    table.add_column("Mean±Std", justify="right", style="green")
    table.add_column("Runs", justify="right")
    for variant, summary in results.items():
        table.add_row(variant.value, summary.summary(), str(len(summary.accuracies)))
    console.print(table)


# Helper functions

def _display_accuracies(variant: Variant, source_acc: float, target_acc: float):
    table = Table(show_header=False, box=None)
    table.add_column("Metric", style="cyan", width=20)
    table.add_column("Value", style="green")
    table.add_row("Variant", variant.value)
    table.add_row("Source accuracy", f"{source_acc:.4f}")
    table.add_row("Target accuracy", f"{target_acc:.4f}")
    console.print(table)


def _display_report(record: dict):
    table = Table(title="Probe report", show_header=True, header_style="bold cyan")
    table.add_column("Quantity", style="cyan")
    table.add_column("Value", justify="right", style="green")
    for name, value in record.items():
        if isinstance(value, float):
            table.add_row(name, f"{value:.4f}")
    console.print(table)


if __name__ == "__main__":
    cli()
