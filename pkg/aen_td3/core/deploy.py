"""Policy-to-actuator command pipeline.

Policy actions arrive at ``policy_rate_hz``; the actuator runs at
``control_rate_hz``. Each policy period is filled with ``k`` linearly
interpolated commands ``prev + (j/k)(next - prev)`` for ``j = 1..k``, and
every command passes a max-norm rate limiter before it is emitted.

The limiter compares a candidate against the last *emitted* command. A
rejected candidate is skipped and the actuator holds its last accepted
command (skip-and-hold), so emitted commands never step by more than
``max_step_delta``, but after a rejection run the actuator lags the policy
ramp. The pipeline warns whenever a rejection run ends and when the stream
ends mid-run.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
from rich.console import Console

from ..errors import PreconditionError, ShapeError
from ..schema import CommandRecord, CommandStream, InterpolationConfig

console = Console()


def _vector(a: Union[Sequence[float], np.ndarray]) -> np.ndarray:
    return np.atleast_1d(np.asarray(a, dtype=np.float64))


def interpolate(prev_action: np.ndarray, next_action: np.ndarray,
                config: InterpolationConfig) -> List[np.ndarray]:
    """``k`` commands ramping from ``prev_action`` (excluded) to ``next_action`` (included)."""
    prev, nxt = _vector(prev_action), _vector(next_action)
    if prev.shape != nxt.shape:
        raise ShapeError(f"Cannot interpolate between shapes {prev.shape} and {nxt.shape}")
    k = config.substeps
    diff = nxt - prev
    commands = [prev + (j / k) * diff for j in range(1, k)]
    commands.append(nxt.copy())
    return commands


def safety_filter(prev_emitted: np.ndarray, candidate: np.ndarray, config: InterpolationConfig) -> bool:
    """Accept iff max|candidate - prev_emitted| <= max_step_delta."""
    prev, cand = _vector(prev_emitted), _vector(candidate)
    if prev.shape != cand.shape:
        raise ShapeError(f"Cannot compare commands of shapes {prev.shape} and {cand.shape}")
    if cand.size == 0:
        raise ShapeError("Cannot compare empty commands")
    return bool(np.max(np.abs(cand - prev)) <= config.max_step_delta)


class CommandInterpolator:
    """Streaming form of the pipeline: feed one policy action at a time.

    The first action fed only sets the baseline (it is taken as the command
    the actuator already holds); every later action yields ``k`` evaluated
    commands.
    """

    def __init__(self, config: InterpolationConfig, quiet: bool = False):
        self.config = config
        self.k = config.substeps
        self.quiet = quiet
        self.prev_action: Optional[np.ndarray] = None
        self.prev_emitted: Optional[np.ndarray] = None
        self.ticks = 0
        self.stream = CommandStream()
        self._rejecting_since: Optional[int] = None

    def feed(self, action: np.ndarray) -> List[CommandRecord]:
        action = _vector(action)
        if action.size == 0:
            raise ShapeError("Policy actions need at least one component")
        if self.prev_action is None:
            self.prev_action = action.copy()
            self.prev_emitted = action.copy()
            return []
        if action.shape != self.prev_action.shape:
            raise ShapeError(f"Action shape {action.shape} differs from {self.prev_action.shape}")

        records = []
        for command in interpolate(self.prev_action, action, self.config):
            self.ticks += 1
            accepted = safety_filter(self.prev_emitted, command, self.config)
            record = CommandRecord(timestamp=self.ticks / self.config.control_rate_hz,
                                   command=command, accepted=accepted)
            if accepted:
                if self._rejecting_since is not None:
                    self._warn_run_ended(record)
                self.prev_emitted = command
            elif self._rejecting_since is None:
                self._rejecting_since = len(self.stream)
            self.stream.records.append(record)
            records.append(record)
        self.prev_action = action
        return records

    def _warn_run_ended(self, record: CommandRecord) -> None:
        rejected = len(self.stream) - self._rejecting_since
        jump = float(np.max(np.abs(record.command - self.prev_emitted)))
        if not self.quiet:
            console.print(
                f"WARNING: {rejected} command(s) rejected before t={record.timestamp:.3f}s; "
                f"resuming with a step of {jump:.6g} from the held command",
                style="yellow",
            )
        self._rejecting_since = None

    def finish(self) -> CommandStream:
        if self._rejecting_since is not None and not self.quiet:
            rejected = len(self.stream) - self._rejecting_since
            console.print(
                f"WARNING: stream ended while rejecting; last {rejected} command(s) were held",
                style="yellow",
            )
        return self.stream


def run_pipeline(policy_actions: Sequence[np.ndarray], config: InterpolationConfig,
                 quiet: bool = False) -> CommandStream:
    """Interpolate and filter a whole action sequence; ``k * (len - 1)`` records."""
    if len(policy_actions) == 0:
        raise PreconditionError("run_pipeline needs at least one policy action")
    interpolator = CommandInterpolator(config, quiet=quiet)
    for action in policy_actions:
        interpolator.feed(action)
    return interpolator.finish()


def read_actions(path: Union[str, Path]) -> List[np.ndarray]:
    """One action per CSV row; a non-numeric first non-blank row is treated as a header."""
    path = Path(path)
    if not path.exists():
        raise PreconditionError(f"Action file not found: {path}")
    actions = []
    first = True
    with open(path, newline="", encoding="utf-8") as f:
        for i, row in enumerate(csv.reader(f)):
            cells = [c.strip() for c in row if c.strip()]
            if not cells:
                continue
            header_allowed, first = first, False
            try:
                actions.append(np.array([float(c) for c in cells]))
            except ValueError:
                if header_allowed:
                    continue
                raise ShapeError(f"{path}:{i + 1}: non-numeric action row {row!r}")
    if actions and any(a.shape != actions[0].shape for a in actions):
        raise ShapeError(f"{path}: action rows have differing lengths")
    return actions


def write_command_stream(path: Union[str, Path], stream: CommandStream) -> Path:
    """CSV columns: ``timestamp,c0..c{n-1},accepted``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    width = len(stream.records[0].command) if stream.records else 0
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["timestamp"] + [f"c{i}" for i in range(width)] + ["accepted"])
        for record in stream.records:
            writer.writerow([repr(record.timestamp)] + [repr(float(c)) for c in record.command]
                            + [str(record.accepted).lower()])
    return path
