"""Experiment orchestration: training, evaluation, fine-tuning and summaries.

Every seed derives four independent random streams through
``numpy.random.SeedSequence(seed).spawn(4)``: network initialization,
environment resets, action noise and minibatch sampling. The sampling stream
is split again into one generator per learner. A run is therefore fully
determined by its config and seed.
"""

from __future__ import annotations

import csv
import time
from collections import defaultdict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from rich.console import Console
from rich.markup import escape

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .controllers import Controller, create_controller
from .controllers.scripted import ScriptedPartnerController
from .core.config import echo_lines, parse_echo
from .core.env import LiftEnv, write_trace
from .errors import ConfigError, ModeError, PreconditionError
from .schema import (
    METRICS_COLUMNS,
    SUMMARY_COLUMNS,
    CurvePoint,
    DoneReason,
    EnvState,
    ExperimentConfig,
    Mode,
    MetricsRecord,
    SeedOutcome,
    SummaryReport,
)

console = Console()

DEFAULT_SUCCESS_FRACTION = 0.85
DEFAULT_CURVE_POINTS = 50


@dataclass
class SeedStreams:
    init: np.random.Generator
    env: np.random.Generator
    noise: np.random.Generator
    train: np.random.SeedSequence

    @classmethod
    def from_seed(cls, seed: int, *extra: int) -> "SeedStreams":
        entropy = [int(seed), *(int(e) for e in extra)] if extra else int(seed)
        init, env, noise, train = np.random.SeedSequence(entropy).spawn(4)
        return cls(*(np.random.default_rng(child) for child in (init, env, noise)), train=train)

    def learner_streams(self, names: Sequence[str]) -> Dict[str, np.random.Generator]:
        """One minibatch-sampling generator per learner, spawned in ``names`` order.

        Repeated calls return generators in the same initial state.
        """
        root = np.random.SeedSequence(self.train.entropy, spawn_key=self.train.spawn_key)
        return {name: np.random.default_rng(child) for name, child in zip(names, root.spawn(len(names)))}


@dataclass
class TrainingRun:
    seed: int
    config: ExperimentConfig
    controller: Controller
    records: List[MetricsRecord] = field(default_factory=list)
    metrics_path: Optional[Path] = None
    checkpoint_path: Optional[Path] = None


@dataclass
class MetricsFile:
    config: Optional[ExperimentConfig]
    records: List[MetricsRecord]


# ----------------------------------------------------------------------
# Metrics files
# ----------------------------------------------------------------------

def write_metrics(path: Union[str, Path], records: Iterable[MetricsRecord],
                  config: ExperimentConfig) -> Path:
    """CSV with a ``# ``-prefixed YAML config echo above the header row."""
    path = Path(path)
    with_wall_time = config.record_wall_time
    columns = METRICS_COLUMNS + (["wall_time_s"] if with_wall_time else [])
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as f:
            for line in echo_lines(config):
                f.write(line + "\n")
            writer = csv.writer(f)
            writer.writerow(columns)
            for record in records:
                writer.writerow(record.to_row(with_wall_time))
    except OSError as e:
        raise ConfigError(f"Could not write metrics file {path}: {e}") from e
    return path


def _split_csv(path: Path) -> Tuple[List[str], List[Dict[str, str]]]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            lines = f.read().splitlines()
    except FileNotFoundError:
        raise PreconditionError(f"File not found: {path}")
    comments = [line for line in lines if line.startswith("#")]
    body = [line for line in lines if not line.startswith("#")]
    return comments, list(csv.DictReader(body))


def read_metrics(path: Union[str, Path]) -> MetricsFile:
    comments, rows = _split_csv(Path(path))
    try:
        records = [MetricsRecord.from_row(row) for row in rows]
    except (KeyError, ValueError) as e:
        raise PreconditionError(f"{path} is not a metrics file: {e}") from e
    return MetricsFile(config=parse_echo(comments), records=records)


# ----------------------------------------------------------------------
# Episodes
# ----------------------------------------------------------------------

def _warm_up(controller: Controller, env: LiftEnv, steps: int, rng: np.random.Generator) -> None:
    """Fill the replay buffers with uniform-random experience; no updates."""
    state = env.reset() if steps > 0 else None
    for _ in range(steps):
        actions = controller.random_act(state, rng)
        result = env.step(actions)
        controller.record(state, actions, result)
        state = env.reset() if result.done else result.next_state


def measure_aen_mse(controller: Controller, states: Sequence[EnvState]) -> float:
    """Mean squared error between agent 1's AEN estimate and the scripted partner's action."""
    if not isinstance(controller, ScriptedPartnerController):
        raise ModeError("AEN error needs the scripted-partner controller, where the true partner action is known")
    if not states:
        raise PreconditionError("AEN error needs at least one state")
    errors = [
        np.mean((controller.partner_estimates(s)[1] - controller.partner_action(s)) ** 2)
        for s in states
    ]
    return float(np.mean(errors))


def deterministic_states(controller: Controller, config: ExperimentConfig, count: int) -> List[EnvState]:
    """The first ``count`` states visited by noise-free episodes of ``controller``."""
    if count < 1:
        raise PreconditionError(f"count must be positive, got {count}")
    env = LiftEnv(replace(config.env, reset_noise=0.0))
    noise = np.random.default_rng(0)
    states: List[EnvState] = []
    state = env.reset()
    while len(states) < count:
        states.append(state)
        result = env.step(controller.act(state, 0.0, noise))
        state = env.reset() if result.done else result.next_state
    return states


def _progress(quiet: bool, label: str, record: MetricsRecord, total: int) -> None:
    if quiet:
        return
    every = max(1, total // 20)
    if record.episode % every == 0 or record.episode == total:
        console.print(escape(
            f"{label} episode {record.episode}/{total} (step {record.total_steps}): "
            f"return {record.episode_return:.3f}, length {record.episode_length}, "
            f"{record.done_reason.value}"
        ))


def train_seed(config: ExperimentConfig, seed: int, quiet: bool = False) -> TrainingRun:
    """Warm-up, then ``episodes_M`` episodes with one update per environment step."""
    hyper = config.hyperparams
    streams = SeedStreams.from_seed(seed)
    controller = create_controller(config, streams.init)
    learner_rngs = streams.learner_streams(controller.learner_names())
    env = LiftEnv(config.env, streams.env)
    _warm_up(controller, env, config.learning_starts, streams.noise)

    run = TrainingRun(seed=seed, config=config, controller=controller)
    total_steps = 0
    for episode in range(1, hyper.episodes_M + 1):
        started = time.perf_counter() if config.record_wall_time else None
        state = env.reset()
        episode_return = 0.0
        while True:
            actions = controller.act(state, hyper.explore_sigma, streams.noise)
            result = env.step(actions)
            controller.record(state, actions, result)
            controller.update(controller.train_steps + 1, learner_rngs)
            total_steps += 1
            episode_return += result.reward
            state = result.next_state
            if result.done:
                break
        record = MetricsRecord(
            seed=seed,
            episode=episode,
            episode_return=episode_return,
            episode_length=state.step_count,
            done_reason=result.done_reason,
            final_height=state.beam_height,
            wall_time_s=None if started is None else time.perf_counter() - started,
            total_steps=total_steps,
        )
        run.records.append(record)
        _progress(quiet, f"[seed {seed}]", record, hyper.episodes_M)
    return run


def run_training(config: ExperimentConfig, seeds: Optional[Sequence[int]] = None,
                 quiet: bool = False, write: bool = True) -> List[TrainingRun]:
    """Train every seed; write one metrics file and one checkpoint per seed."""
    runs = []
    for seed in (config.seeds if seeds is None else seeds):
        if not quiet:
            console.print(f"Training {config.mode.value} with seed {seed}")
        run = train_seed(config, int(seed), quiet=quiet)
        if write:
            run.metrics_path = write_metrics(config.metrics_file(seed), run.records, config)
            run.checkpoint_path = save_checkpoint(
                config.checkpoint_file(seed),
                Checkpoint(config=config, seed=int(seed), controller=run.controller,
                           episodes_completed=config.hyperparams.episodes_M),
            )
        runs.append(run)
    return runs


def evaluate_controller(controller: Controller, config: ExperimentConfig, episodes: int,
                        seed: int = 0, trace_path: Optional[Union[str, Path]] = None) -> List[MetricsRecord]:
    """Deterministic episodes: no exploration noise, no reset noise."""
    if episodes < 1:
        raise PreconditionError(f"Evaluation needs at least one episode, got {episodes}")
    env = LiftEnv(replace(config.env, reset_noise=0.0), record_trace=trace_path is not None)
    scripted = isinstance(controller, ScriptedPartnerController)
    # sigma 0 draws nothing from this generator
    noise = np.random.default_rng(0)
    records = []
    for episode in range(1, episodes + 1):
        state = env.reset()
        visited: List[EnvState] = []
        episode_return = 0.0
        while True:
            if scripted and len(visited) < config.aen_eval_states:
                visited.append(state)
            result = env.step(controller.act(state, 0.0, noise))
            episode_return += result.reward
            state = result.next_state
            if result.done:
                break
        records.append(MetricsRecord(
            seed=seed,
            episode=episode,
            episode_return=episode_return,
            episode_length=state.step_count,
            done_reason=result.done_reason,
            final_height=state.beam_height,
            aen_mse=measure_aen_mse(controller, visited) if scripted else None,
        ))
        if episode == 1 and trace_path is not None:
            write_trace(trace_path, env.trace)
    return records


def run_eval(checkpoint: Union[str, Path, Checkpoint], config: Optional[ExperimentConfig] = None,
             episodes: int = 10, trace_path: Optional[Union[str, Path]] = None,
             quiet: bool = False) -> List[MetricsRecord]:
    ckpt = checkpoint if isinstance(checkpoint, Checkpoint) else load_checkpoint(checkpoint, config)
    records = evaluate_controller(ckpt.controller, ckpt.config, episodes, seed=ckpt.seed,
                                  trace_path=trace_path)
    if not quiet:
        safety = sum(1 for r in records if r.done_reason is DoneReason.SAFETY_TERMINATION)
        mean_return = float(np.mean([r.episode_return for r in records]))
        console.print(f"Evaluated {episodes} episode(s): mean return {mean_return:.3f}, "
                      f"{safety} safety termination(s)")
    return records


# ----------------------------------------------------------------------
# Fine-tuning
# ----------------------------------------------------------------------

@dataclass
class FinetuneRun:
    checkpoint: Checkpoint
    records: List[MetricsRecord]
    checkpoint_path: Optional[Path] = None
    metrics_path: Optional[Path] = None


def _delta_tag(delta: float) -> str:
    return f"delta{delta:g}".replace(".", "p")


def resume_finetune(checkpoint: Union[str, Path, Checkpoint], new_delta: float, extra_steps: int,
                    output_path: Optional[Union[str, Path]] = None,
                    metrics_path: Optional[Union[str, Path]] = None,
                    quiet: bool = False, write: bool = True) -> FinetuneRun:
    """Continue training under a tighter safety threshold.

    The replay buffers start empty; the first ``batch_n`` of the
    ``extra_steps`` environment steps only collect experience. The update
    counters carry over, so the delayed-update schedule continues. An episode
    still running when the budget is spent is recorded as ``running``.

    With ``extra_steps == 0`` nothing is trained and the written checkpoint
    equals the input, its config (and delta) included.
    """
    source = checkpoint if isinstance(checkpoint, Checkpoint) else load_checkpoint(checkpoint)
    old_delta = source.config.env.delta
    if not new_delta < old_delta:
        raise ConfigError(f"Fine-tuning must tighten delta: {new_delta} is not below {old_delta}")
    if extra_steps < 0:
        raise PreconditionError(f"extra_steps must be non-negative, got {extra_steps}")

    if extra_steps == 0:
        if not quiet:
            console.print("WARNING: extra_steps is 0, the checkpoint is kept unchanged")
        return _write_finetune(FinetuneRun(checkpoint=source, records=[]), source.config,
                               source.seed, new_delta, output_path, metrics_path, write)

    config = source.config.with_delta(new_delta)
    controller = source.controller
    controller.config = config
    controller.reset_buffers()
    hyper = config.hyperparams
    streams = SeedStreams.from_seed(source.seed, controller.train_steps, 1)
    learner_rngs = streams.learner_streams(controller.learner_names())
    env = LiftEnv(config.env, streams.env)
    collect_only = min(hyper.batch_n, extra_steps)

    records: List[MetricsRecord] = []
    episode = source.episodes_completed
    state: Optional[EnvState] = None
    episode_return = 0.0
    for step_number in range(1, extra_steps + 1):
        if state is None:
            state = env.reset()
            episode += 1
            episode_return = 0.0
        actions = controller.act(state, hyper.explore_sigma, streams.noise)
        result = env.step(actions)
        controller.record(state, actions, result)
        if step_number > collect_only:
            controller.update(controller.train_steps + 1, learner_rngs)
        episode_return += result.reward
        state = result.next_state
        if result.done or step_number == extra_steps:
            reason = result.done_reason if result.done else DoneReason.RUNNING
            record = MetricsRecord(seed=source.seed, episode=episode, episode_return=episode_return,
                                   episode_length=state.step_count, done_reason=reason,
                                   final_height=state.beam_height, total_steps=step_number)
            records.append(record)
            if not quiet:
                console.print(escape(f"[finetune delta={new_delta:g}] step {step_number}/{extra_steps}: "
                              f"episode {episode} return {episode_return:.3f}, {reason.value}"))
            state = None

    result_ckpt = Checkpoint(config=config, seed=source.seed, controller=controller,
                             episodes_completed=episode)
    return _write_finetune(FinetuneRun(checkpoint=result_ckpt, records=records), config,
                           source.seed, new_delta, output_path, metrics_path, write)


def _write_finetune(run: FinetuneRun, config: ExperimentConfig, seed: int, new_delta: float,
                    output_path: Optional[Union[str, Path]], metrics_path: Optional[Union[str, Path]],
                    write: bool) -> FinetuneRun:
    if not write:
        return run
    if output_path is None:
        output_path = config.checkpoint_file(seed).replace(".json", f"_{_delta_tag(new_delta)}.json")
    if metrics_path is None:
        metrics_path = str(output_path).replace(".json", "_metrics.csv")
    run.checkpoint_path = save_checkpoint(output_path, run.checkpoint)
    run.metrics_path = write_metrics(metrics_path, run.records, config)
    return run


# ----------------------------------------------------------------------
# Summaries
# ----------------------------------------------------------------------

def _curve(returns_by_seed: List[List[float]], points: int) -> List[CurvePoint]:
    length = min(len(r) for r in returns_by_seed)
    if length == 0:
        return []
    matrix = np.array([r[:length] for r in returns_by_seed])
    indices = np.unique(np.linspace(0, length - 1, min(points, length)).round().astype(int))
    q25, q50, q75 = np.percentile(matrix[:, indices], [25, 50, 75], axis=0)
    return [CurvePoint(episode=int(i) + 1, median=float(m), q25=float(a), q75=float(b))
            for i, m, a, b in zip(indices, q50, q25, q75)]


def export_summary(paths: Sequence[Union[str, Path]], threshold: Optional[float] = None,
                   window: Optional[int] = None, points: int = DEFAULT_CURVE_POINTS) -> SummaryReport:
    """Per-mode success rates and return quartile curves from metrics or summary files.

    A seed succeeds when the median return over its last ``window`` episodes
    reaches the threshold. The threshold is the first of: the argument, a
    configured ``success_threshold``, the threshold stored in an input
    summary, or 0.85 times the best centralized final-window median.
    """
    if not paths:
        raise PreconditionError("export_summary needs at least one metrics or summary file")

    returns: Dict[Tuple[str, int], List[Tuple[int, float]]] = defaultdict(list)
    outcomes: Dict[Tuple[str, int], SeedOutcome] = {}
    prior_curves: Dict[str, List[CurvePoint]] = {}
    prior_threshold: Optional[float] = None
    config_threshold: Optional[float] = None
    config_window: Optional[int] = None

    for path in paths:
        comments, rows = _split_csv(Path(path))
        if rows and "row_type" in rows[0]:
            for row in rows:
                if row["threshold"] and prior_threshold is None:
                    prior_threshold = float(row["threshold"])
                if row["window"] and config_window is None:
                    config_window = int(row["window"])
                if row["row_type"] == "seed":
                    key = (row["mode"], int(row["seed"]))
                    outcomes[key] = SeedOutcome(row["mode"], int(row["seed"]), float(row["final_median"]))
                elif row["row_type"] == "curve":
                    prior_curves.setdefault(row["mode"], []).append(CurvePoint(
                        int(row["episode"]), float(row["median"]), float(row["q25"]), float(row["q75"])))
            continue
        metrics = read_metrics(path)
        mode = metrics.config.mode.value if metrics.config else "unknown"
        if metrics.config is not None:
            if config_threshold is None:
                config_threshold = metrics.config.success_threshold
            if config_window is None:
                config_window = metrics.config.success_window
        for record in metrics.records:
            returns[(mode, record.seed)].append((record.episode, record.episode_return))

    window = int(window or config_window or 100)
    for key, series in returns.items():
        ordered = [ret for _, ret in sorted(series)]
        outcomes[key] = SeedOutcome(key[0], key[1], float(np.median(ordered[-window:])))
    if not outcomes:
        raise PreconditionError("No episodes found in the given files")

    if threshold is None:
        threshold = config_threshold if config_threshold is not None else prior_threshold
    if threshold is None:
        centralized = [o.final_median for o in outcomes.values() if o.mode == Mode.CENTRALIZED_TD3.value]
        if not centralized:
            raise ConfigError("No success threshold: pass one explicitly or include centralized runs")
        threshold = DEFAULT_SUCCESS_FRACTION * max(centralized)

    report = SummaryReport(threshold=float(threshold), window=window)
    for key in sorted(outcomes):
        outcome = outcomes[key]
        outcome.success = outcome.final_median >= report.threshold
        report.outcomes.append(outcome)

    by_mode: Dict[str, List[List[float]]] = defaultdict(list)
    for key in sorted(returns):
        by_mode[key[0]].append([ret for _, ret in sorted(returns[key])])
    for mode, series in by_mode.items():
        report.curves[mode] = _curve(series, points)
    for mode, curve in prior_curves.items():
        report.curves.setdefault(mode, curve)
    return report


def write_summary(path: Union[str, Path], report: SummaryReport) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blank = {name: "" for name in SUMMARY_COLUMNS}
    common = {"threshold": repr(report.threshold), "window": str(report.window)}
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        for mode in report.modes():
            writer.writerow({**blank, **common, "row_type": "mode", "mode": mode,
                             "success_rate": repr(report.success_rate(mode))})
        for o in report.outcomes:
            writer.writerow({**blank, **common, "row_type": "seed", "mode": o.mode, "seed": str(o.seed),
                             "final_median": repr(o.final_median), "success": str(o.success).lower()})
        for mode, curve in sorted(report.curves.items()):
            for p in curve:
                writer.writerow({**blank, **common, "row_type": "curve", "mode": mode,
                                 "episode": str(p.episode), "median": repr(p.median),
                                 "q25": repr(p.q25), "q75": repr(p.q75)})
    return path
