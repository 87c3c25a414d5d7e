"""Kinematic two-effector beam lifting environment.

A commanded displacement (dx, dz) moves an effector by (lateral_gain * dx, dz)
and the result is clipped to its half of the workspace. Lateral motion is
geared down: exploration noise drifts the separation slowly, a sustained
lateral push still breaks the safety rule. The beam is rigidly attached to
both effectors, so its height and tilt follow from the two positions alone.

Reward: ``beam_height - reward_angle_weight * |beam_tilt|`` with
``beam_tilt = atan((z1 - z2) / (x2 - x1))``.

Safety rule: the episode ends early once the horizontal separation deviates
from its value at reset by more than ``delta``. When the safety rule and the
horizon coincide on one step, the safety reason wins.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import ConfigError, EnvStateError, ShapeError
from ..schema import DoneReason, EnvConfig, EnvState, StatePartition, StepResult
from .nn import RngLike, as_rng

AGENT_STATE_DIM = 2
AGENT_ACTION_DIM = 2
TRACE_COLUMNS = ["step", "x1", "z1", "x2", "z2", "height", "tilt", "reward", "done_reason"]


def _lateral_range(config: EnvConfig, agent_index: int) -> Tuple[float, float]:
    lo, hi = config.lateral_limits
    return (-hi, -lo) if agent_index == 1 else (lo, hi)


def reset(config: EnvConfig, rng: Optional[RngLike] = None) -> EnvState:
    """Level beam at ``start_height`` with the effectors ``initial_separation`` apart.

    With ``reset_noise > 0`` every coordinate gets an independent
    U(-reset_noise, reset_noise) offset; with zero noise nothing is drawn.
    """
    if not isinstance(config, EnvConfig):
        raise ConfigError(f"reset needs an EnvConfig, got {type(config).__name__}")
    half = config.initial_separation / 2.0
    positions = np.array([[-half, config.start_height], [half, config.start_height]])
    if config.reset_noise > 0.0:
        if rng is None:
            raise ConfigError("reset_noise > 0 needs a random generator")
        positions = positions + as_rng(rng).uniform(-config.reset_noise, config.reset_noise, size=(2, 2))
        positions = _clip_to_workspace(positions, config)
    return EnvState(
        effector_positions=positions,
        step_count=0,
        terminated_early=False,
        initial_separation=float(positions[1, 0] - positions[0, 0]),
    )


def _clip_to_workspace(positions: np.ndarray, config: EnvConfig) -> np.ndarray:
    clipped = positions.copy()
    lo_z, hi_z = config.height_limits
    for row, agent_index in ((0, 1), (1, 2)):
        lo_x, hi_x = _lateral_range(config, agent_index)
        clipped[row, 0] = min(max(clipped[row, 0], lo_x), hi_x)
        clipped[row, 1] = min(max(clipped[row, 1], lo_z), hi_z)
    return clipped


def reward_fn(state: EnvState, config: EnvConfig) -> float:
    return state.beam_height - config.reward_angle_weight * abs(state.beam_tilt)


def safety_violated(state: EnvState, config: EnvConfig) -> bool:
    """True iff |d_t - d_0| > delta, with d_0 measured at reset."""
    return abs(state.separation - state.initial_separation) > config.delta


def is_done(state: EnvState) -> bool:
    return state.terminated_early


def step(state: EnvState, actions: Sequence[np.ndarray], config: EnvConfig) -> StepResult:
    """Apply one displacement per effector and score the result."""
    if state.terminated_early:
        raise EnvStateError("Cannot step an episode that ended with a safety termination")
    if state.step_count >= config.horizon_T:
        raise EnvStateError(f"Cannot step past the horizon of {config.horizon_T} steps")
    if len(actions) != 2:
        raise ShapeError(f"step needs one action per effector, got {len(actions)}")
    flat = [np.asarray(a, dtype=np.float64).ravel() for a in actions]
    for agent_index, move in enumerate(flat, start=1):
        if move.shape != (AGENT_ACTION_DIM,):
            raise ShapeError(f"Action of agent {agent_index} must be (dx, dz), got shape {move.shape}")
    moves = np.stack(flat)
    moves[:, 0] *= config.lateral_gain

    positions = _clip_to_workspace(state.effector_positions + moves, config)
    next_state = EnvState(
        effector_positions=positions,
        step_count=state.step_count + 1,
        terminated_early=False,
        initial_separation=state.initial_separation,
    )
    reward = reward_fn(next_state, config)

    if safety_violated(next_state, config):
        next_state.terminated_early = True
        reason = DoneReason.SAFETY_TERMINATION
    elif next_state.step_count >= config.horizon_T:
        reason = DoneReason.HORIZON_REACHED
    else:
        reason = DoneReason.RUNNING
    return StepResult(next_state=next_state, reward=reward,
                      done=reason is not DoneReason.RUNNING, done_reason=reason)


def scripted_partner(state: EnvState, config: EnvConfig, agent_index: int = 2) -> np.ndarray:
    """Pure vertical lift at the action bound until the target height is reached."""
    if agent_index not in (1, 2):
        raise ShapeError(f"agent_index must be 1 or 2, got {agent_index}")
    z = state.effector_positions[agent_index - 1, 1]
    if z < config.target_height:
        return np.array([0.0, config.action_bounds.high])
    return np.zeros(AGENT_ACTION_DIM)


def state_partition(state: EnvState, agent_index: int) -> StatePartition:
    """(own (x, z), partner (x, z)) for agent 1 or 2."""
    if agent_index == 1:
        own, partner = state.effector_positions[0], state.effector_positions[1]
    elif agent_index == 2:
        own, partner = state.effector_positions[1], state.effector_positions[0]
    else:
        raise ShapeError(f"agent_index must be 1 or 2, got {agent_index}")
    return StatePartition(own_state=own.copy(), partner_state=partner.copy())


@dataclass
class TraceRow:
    step: int
    positions: np.ndarray
    height: float
    tilt: float
    reward: float
    done_reason: DoneReason

    def to_row(self) -> List[str]:
        x1, z1, x2, z2 = (repr(float(v)) for v in np.ravel(self.positions))
        return [str(self.step), x1, z1, x2, z2, repr(self.height), repr(self.tilt),
                repr(float(self.reward)), self.done_reason.value]


class LiftEnv:
    """Stateful wrapper over ``reset``/``step`` that can record an episode trace."""

    def __init__(self, config: EnvConfig, rng: Optional[RngLike] = None, record_trace: bool = False):
        self.config = config
        self.rng = None if rng is None else as_rng(rng)
        self.record_trace = record_trace
        self.state: Optional[EnvState] = None
        self.done = True
        self.trace: List[TraceRow] = []

    def reset(self) -> EnvState:
        self.state = reset(self.config, self.rng)
        self.done = False
        self.trace = []
        if self.record_trace:
            self._record(self.state, reward_fn(self.state, self.config), DoneReason.RUNNING)
        return self.state

    def step(self, actions: Sequence[np.ndarray]) -> StepResult:
        if self.state is None or self.done:
            raise EnvStateError("Call reset() before stepping a finished or fresh environment")
        result = step(self.state, actions, self.config)
        self.state = result.next_state
        self.done = result.done
        if self.record_trace:
            self._record(self.state, result.reward, result.done_reason)
        return result

    def partition(self, agent_index: int) -> StatePartition:
        if self.state is None:
            raise EnvStateError("Environment has not been reset")
        return state_partition(self.state, agent_index)

    def _record(self, state: EnvState, reward: float, reason: DoneReason) -> None:
        self.trace.append(TraceRow(
            step=state.step_count,
            positions=state.as_vector(),
            height=state.beam_height,
            tilt=state.beam_tilt,
            reward=reward,
            done_reason=reason,
        ))


def write_trace(path: Union[str, Path], rows: Iterable[TraceRow]) -> Path:
    """Write trace rows as CSV with a ``step,x1,z1,x2,z2,...`` header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(TRACE_COLUMNS)
        for row in rows:
            writer.writerow(row.to_row())
    return path
