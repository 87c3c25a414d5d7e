"""Command-line interface for aen_td3."""

import traceback
from contextlib import contextmanager
from dataclasses import replace
from importlib.metadata import PackageNotFoundError, version as package_version
from pathlib import Path
from typing import Iterator, List, Optional

import typer
from rich.console import Console
from rich.markup import escape
from rich.panel import Panel

from .core.config import load_experiment
from .core.deploy import read_actions, run_pipeline, write_command_stream
from .core.formatter import SummaryFormatter
from .errors import AenTd3Error, PreconditionError
from .harness import export_summary, resume_finetune, run_eval, run_training, write_metrics, write_summary

app = typer.Typer(
    name="aen-td3",
    help="Decentralized two-arm lifting with action estimation networks and TD3",
    add_completion=False,
)
console = Console()


@contextmanager
def handle_errors(quiet: bool) -> Iterator[None]:
    """Map library errors to a categorized message and exit code."""
    try:
        yield
    except typer.Exit:
        raise
    except AenTd3Error as e:
        console.print(escape(f"Error [{e.category}]: {e}"), style="red")
        raise typer.Exit(e.exit_code)
    except Exception as e:
        console.print(escape(f"Error: {e}"), style="red")
        if not quiet:
            console.print(traceback.format_exc())
        raise typer.Exit(1)


@app.command()
def train(
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="Experiment YAML (merged over defaults)"),
    seed: Optional[int] = typer.Option(None, "--seed", "-s", help="Train one seed instead of all configured seeds"),
    mode: Optional[str] = typer.Option(None, "--mode", "-m", help="Override the configured mode"),
    quiet: bool = typer.Option(False, "--quiet", "-q", help="Suppress progress output"),
):
    """Train agents and write per-seed metrics and checkpoints."""
    with handle_errors(quiet):
        experiment = load_experiment(config, {"mode": mode} if mode else None)
        seeds = None if seed is None else [seed]
        runs = run_training(experiment, seeds=seeds, quiet=quiet)
        if not quiet:
            for run in runs:
                console.print(f"seed {run.seed}: metrics {run.metrics_path}, checkpoint {run.checkpoint_path}")


@app.command("eval")
def evaluate(
    checkpoint: Path = typer.Option(..., "--checkpoint", help="Checkpoint written by train or finetune"),
    episodes: int = typer.Option(10, "--episodes", "-n", help="Number of deterministic episodes"),
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="Config to check the checkpoint against"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Write evaluation metrics CSV here"),
    trace: Optional[Path] = typer.Option(None, "--trace", help="Write the first episode's trace CSV here"),
    quiet: bool = typer.Option(False, "--quiet", "-q", help="Suppress progress output"),
):
    """Evaluate a checkpoint without exploration or reset noise."""
    with handle_errors(quiet):
        experiment = load_experiment(config) if config else None
        records = run_eval(checkpoint, experiment, episodes=episodes, trace_path=trace, quiet=True)
        if output:
            from .checkpoint import load_checkpoint
            write_metrics(output, records, experiment or load_checkpoint(checkpoint).config)
            if not quiet:
                console.print(f"Results written to: {output}")
        if not quiet:
            console.print(SummaryFormatter().format_records(records))


@app.command()
def finetune(
    checkpoint: Path = typer.Option(..., "--checkpoint", help="Checkpoint to continue from"),
    delta: float = typer.Option(..., "--delta", help="New, tighter safety threshold"),
    steps: int = typer.Option(..., "--steps", help="Extra environment steps"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Checkpoint to write"),
    metrics: Optional[Path] = typer.Option(None, "--metrics", help="Metrics CSV to write"),
    quiet: bool = typer.Option(False, "--quiet", "-q", help="Suppress progress output"),
):
    """Continue training under a tightened safety threshold."""
    with handle_errors(quiet):
        run = resume_finetune(checkpoint, delta, steps, output_path=output, metrics_path=metrics, quiet=quiet)
        if not quiet:
            console.print(f"Checkpoint written to: {run.checkpoint_path}")
            console.print(f"Metrics written to: {run.metrics_path}")


@app.command("deploy-sim")
def deploy_sim(
    input: Path = typer.Option(..., "--input", "-i", help="Policy-action CSV, one action per row"),
    output: Path = typer.Option(..., "--output", "-o", help="Command stream CSV to write"),
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="Experiment YAML with a deploy section"),
    policy_rate: Optional[float] = typer.Option(None, "--policy-rate", help="Policy rate in Hz"),
    control_rate: Optional[float] = typer.Option(None, "--control-rate", help="Actuator rate in Hz"),
    max_delta: Optional[float] = typer.Option(None, "--max-delta", help="Per-cycle command change limit"),
    quiet: bool = typer.Option(False, "--quiet", "-q", help="Suppress warnings and progress output"),
):
    """Upsample policy actions to actuator commands and apply the rate limiter."""
    with handle_errors(quiet):
        settings = load_experiment(config).deploy
        if policy_rate is not None:
            settings = replace(settings, policy_rate_hz=policy_rate)
        if control_rate is not None:
            settings = replace(settings, control_rate_hz=control_rate)
        if max_delta is not None:
            settings = replace(settings, max_step_delta=max_delta)
        actions = read_actions(input)
        if not actions:
            raise PreconditionError(f"{input} contains no actions")
        stream = run_pipeline(actions, settings, quiet=quiet)
        write_command_stream(output, stream)
        if not quiet:
            console.print(f"{len(stream)} command(s) evaluated, {stream.rejected_count} rejected; "
                          f"written to {output}")


@app.command()
def summarize(
    files: List[Path] = typer.Argument(..., help="Metrics or summary CSV files"),
    threshold: Optional[float] = typer.Option(None, "--threshold", "-t", help="Success threshold on final median return"),
    window: Optional[int] = typer.Option(None, "--window", "-w", help="Final-episode window"),
    output: Optional[Path] = typer.Option(None, "--output", "-o", help="Summary CSV to write"),
    no_curves: bool = typer.Option(False, "--no-curves", help="Omit return curves from the printed summary"),
    quiet: bool = typer.Option(False, "--quiet", "-q", help="Suppress printed summary"),
):
    """Success rates and return curves across seeds."""
    with handle_errors(quiet):
        report = export_summary(files, threshold=threshold, window=window)
        if output:
            write_summary(output, report)
        if not quiet:
            console.print(SummaryFormatter(show_curves=not no_curves).format_report(report))
            if output:
                console.print(f"Summary written to: {output}")


@app.command()
def modes():
    """List the registered controller modes."""
    from .controllers import list_modes

    console.print(Panel("aen-td3 - Controller Modes", style="bold blue"))
    for mode in list_modes():
        console.print(f"  {mode}")


@app.command()
def version():
    """Show version information."""
    try:
        __version__ = package_version("aen-td3")
    except PackageNotFoundError:
        from . import __version__
    console.print(f"aen-td3 version {__version__}")


if __name__ == "__main__":
    app()
