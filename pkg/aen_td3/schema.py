"""Data models shared by the environment, the agents and the harness."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .errors import ConfigError


class Mode(Enum):
    """How the two arms are controlled during an experiment."""
    CENTRALIZED_TD3 = "centralized_td3"
    DECENTRALIZED_AEN_TD3 = "decentralized_aen_td3"
    SCRIPTED_PARTNER = "scripted_partner"  # agent 1 learns, agent 2 is scripted


class DoneReason(Enum):
    RUNNING = "running"
    HORIZON_REACHED = "horizon_reached"
    SAFETY_TERMINATION = "safety_termination"


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


@dataclass(frozen=True)
class ActionBounds:
    """Componentwise action range [low, high]."""
    low: float
    high: float

    def __post_init__(self) -> None:
        _require(float(self.low) < float(self.high),
                 f"Action bounds need low < high, got [{self.low}, {self.high}]")

    @classmethod
    def symmetric(cls, bound: float) -> "ActionBounds":
        return cls(-float(bound), float(bound))

    def to_dict(self) -> Dict[str, float]:
        return {"low": float(self.low), "high": float(self.high)}

    @classmethod
    def from_dict(cls, data: Any) -> "ActionBounds":
        if isinstance(data, (int, float)):
            return cls.symmetric(data)
        try:
            return cls(float(data["low"]), float(data["high"]))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"Invalid action bounds {data!r}: {e}") from e


@dataclass
class Transition:
    """One stored experience tuple (s, a_i, a_o, r, s_next, terminated).

    ``state`` and ``next_state`` are the full state in the owning agent's
    order: own block first, partner block second.
    """
    state: np.ndarray
    own_action: np.ndarray
    estimated_partner_action: np.ndarray
    reward: float
    next_state: np.ndarray
    terminated: bool = False

    def __post_init__(self) -> None:
        self.state = np.asarray(self.state, dtype=np.float64).ravel()
        self.own_action = np.asarray(self.own_action, dtype=np.float64).ravel()
        self.estimated_partner_action = np.asarray(self.estimated_partner_action, dtype=np.float64).ravel()
        self.next_state = np.asarray(self.next_state, dtype=np.float64).ravel()
        self.reward = float(self.reward)
        self.terminated = bool(self.terminated)


@dataclass
class StatePartition:
    """Agent-centric view of the full state: (own block, partner block)."""
    own_state: np.ndarray
    partner_state: np.ndarray

    def full(self) -> np.ndarray:
        return np.concatenate([self.own_state, self.partner_state])


@dataclass(frozen=True)
class Hyperparams:
    """Learning constants of one AEN-TD3 / TD3 agent."""
    gamma: float = 0.99
    tau: float = 0.005
    explore_sigma: float = 0.01
    target_sigma: float = 0.01
    clip_c: float = 0.02
    delay_d: int = 2
    batch_n: int = 256
    episodes_M: int = 2000
    horizon_T: int = 200
    action_bounds: ActionBounds = field(default_factory=lambda: ActionBounds.symmetric(0.04))
    critic_lr: float = 1e-3
    actor_lr: float = 1e-4
    aen_lr: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    buffer_capacity: int = 1_000_000
    recompute_partner_estimate: bool = False

    def __post_init__(self) -> None:
        _require(0.0 < self.gamma < 1.0, f"gamma must lie in (0, 1), got {self.gamma}")
        # tau = 1 is a hard copy; accepted so tests can use the boundary
        _require(0.0 < self.tau <= 1.0, f"tau must lie in (0, 1], got {self.tau}")
        _require(self.explore_sigma >= 0.0, "explore_sigma must be non-negative")
        _require(self.target_sigma >= 0.0, "target_sigma must be non-negative")
        _require(self.clip_c > 0.0, "clip_c must be positive")
        _require(int(self.delay_d) >= 1, f"delay_d must be at least 1, got {self.delay_d}")
        _require(int(self.batch_n) >= 1, "batch_n must be positive")
        _require(int(self.episodes_M) >= 1, "episodes_M must be positive")
        _require(int(self.horizon_T) >= 1, "horizon_T must be positive")
        _require(int(self.buffer_capacity) >= 1, "buffer_capacity must be positive")
        for name in ("critic_lr", "actor_lr", "aen_lr"):
            _require(getattr(self, name) > 0.0, f"{name} must be positive")
        _require(0.0 <= self.adam_beta1 < 1.0 and 0.0 <= self.adam_beta2 < 1.0,
                 "Adam betas must lie in [0, 1)")
        _require(self.adam_eps > 0.0, "adam_eps must be positive")

    def to_dict(self) -> Dict[str, Any]:
        data = {name: getattr(self, name) for name in self.__dataclass_fields__}
        data["action_bounds"] = self.action_bounds.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Hyperparams":
        values = dict(data)
        unknown = set(values) - set(cls.__dataclass_fields__)
        _require(not unknown, f"Unknown hyperparameters: {sorted(unknown)}")
        if "action_bounds" in values:
            values["action_bounds"] = ActionBounds.from_dict(values["action_bounds"])
        for name in ("delay_d", "batch_n", "episodes_M", "horizon_T", "buffer_capacity"):
            if name in values:
                values[name] = int(values[name])
        return cls(**values)


@dataclass(frozen=True)
class EnvConfig:
    """Geometry and rules of the two-effector beam lifting task.

    A lateral command moves an effector by ``lateral_gain`` times its value;
    vertical commands move it one to one.

    Agent 1 (left) keeps x in [-lateral_limits[1], -lateral_limits[0]],
    agent 2 (right) keeps x in [lateral_limits[0], lateral_limits[1]], so the
    right effector always lies strictly right of the left one.
    """
    horizon_T: int = 200
    delta: float = 0.02
    initial_separation: float = 0.4
    start_height: float = 0.5
    target_height: float = 1.4
    action_bounds: ActionBounds = field(default_factory=lambda: ActionBounds.symmetric(0.04))
    lateral_limits: Tuple[float, float] = (0.05, 0.6)
    height_limits: Tuple[float, float] = (0.0, 1.5)
    reward_angle_weight: float = 1.0
    reset_noise: float = 0.0
    lateral_gain: float = 0.05

    def __post_init__(self) -> None:
        object.__setattr__(self, "lateral_limits", tuple(float(v) for v in self.lateral_limits))
        object.__setattr__(self, "height_limits", tuple(float(v) for v in self.height_limits))
        lo_x, hi_x = self.lateral_limits
        lo_z, hi_z = self.height_limits
        _require(int(self.horizon_T) >= 1, "horizon_T must be positive")
        _require(self.delta > 0.0, "delta must be positive")
        _require(self.initial_separation > 0.0, "initial_separation must be positive")
        _require(self.delta < self.initial_separation,
                 f"delta ({self.delta}) must be smaller than the initial separation "
                 f"({self.initial_separation})")
        _require(0.0 < lo_x < hi_x, f"lateral_limits must satisfy 0 < low < high, got {self.lateral_limits}")
        _require(lo_z < hi_z, f"height_limits must satisfy low < high, got {self.height_limits}")
        half = self.initial_separation / 2.0
        _require(lo_x <= half <= hi_x, "initial_separation/2 must lie inside lateral_limits")
        _require(lo_z <= self.start_height <= hi_z, "start_height must lie inside height_limits")
        _require(lo_z <= self.target_height <= hi_z, "target_height must lie inside height_limits")
        _require(self.reward_angle_weight > 0.0, "reward_angle_weight must be positive")
        _require(self.reset_noise >= 0.0, "reset_noise must be non-negative")
        _require(0.0 < self.lateral_gain <= 1.0, f"lateral_gain must lie in (0, 1], got {self.lateral_gain}")

    def to_dict(self) -> Dict[str, Any]:
        data = {name: getattr(self, name) for name in self.__dataclass_fields__}
        data["action_bounds"] = self.action_bounds.to_dict()
        data["lateral_limits"] = list(self.lateral_limits)
        data["height_limits"] = list(self.height_limits)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EnvConfig":
        values = dict(data)
        unknown = set(values) - set(cls.__dataclass_fields__)
        _require(not unknown, f"Unknown env settings: {sorted(unknown)}")
        if "action_bounds" in values:
            values["action_bounds"] = ActionBounds.from_dict(values["action_bounds"])
        if "horizon_T" in values:
            values["horizon_T"] = int(values["horizon_T"])
        return cls(**values)


@dataclass
class EnvState:
    """Positions of both effectors plus episode bookkeeping.

    ``effector_positions`` is a 2x2 array: row 0 is agent 1's (x, z), row 1
    is agent 2's. Beam quantities are derived from it.
    """
    effector_positions: np.ndarray
    step_count: int = 0
    terminated_early: bool = False
    initial_separation: float = 0.4

    def __post_init__(self) -> None:
        self.effector_positions = np.asarray(self.effector_positions, dtype=np.float64).reshape(2, 2)

    @property
    def separation(self) -> float:
        return float(self.effector_positions[1, 0] - self.effector_positions[0, 0])

    @property
    def beam_height(self) -> float:
        return float((self.effector_positions[0, 1] + self.effector_positions[1, 1]) / 2.0)

    @property
    def beam_tilt(self) -> float:
        (x1, z1), (x2, z2) = self.effector_positions
        return float(math.atan((z1 - z2) / (x2 - x1)))

    def as_vector(self) -> np.ndarray:
        """Full state in agent-1 order: (x1, z1, x2, z2)."""
        return self.effector_positions.ravel().copy()

    def copy(self) -> "EnvState":
        return replace(self, effector_positions=self.effector_positions.copy())


@dataclass
class StepResult:
    next_state: EnvState
    reward: float
    done: bool
    done_reason: DoneReason

    @property
    def terminated(self) -> bool:
        """True only for safety terminations; the horizon is a time limit."""
        return self.done_reason is DoneReason.SAFETY_TERMINATION


@dataclass(frozen=True)
class InterpolationConfig:
    """Policy-to-actuator rate conversion and the per-cycle safety limit."""
    policy_rate_hz: float = 4.0
    control_rate_hz: float = 20.0
    max_step_delta: float = 0.01

    def __post_init__(self) -> None:
        _require(self.policy_rate_hz > 0.0, "policy_rate_hz must be positive")
        _require(self.control_rate_hz > 0.0, "control_rate_hz must be positive")
        _require(self.max_step_delta > 0.0, "max_step_delta must be positive")

    @property
    def substeps(self) -> int:
        """Control cycles per policy action (5 for 4 Hz -> 20 Hz)."""
        ratio = self.control_rate_hz / self.policy_rate_hz
        k = int(round(ratio))
        if k < 1 or abs(ratio - k) > 1e-9:
            raise ConfigError(
                f"control_rate_hz ({self.control_rate_hz}) must be an integer multiple of "
                f"policy_rate_hz ({self.policy_rate_hz})"
            )
        return k

    def to_dict(self) -> Dict[str, float]:
        return {
            "policy_rate_hz": self.policy_rate_hz,
            "control_rate_hz": self.control_rate_hz,
            "max_step_delta": self.max_step_delta,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "InterpolationConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        _require(not unknown, f"Unknown deploy settings: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})


@dataclass
class CommandRecord:
    timestamp: float
    command: np.ndarray
    accepted: bool


@dataclass
class CommandStream:
    """Every evaluated actuator command, accepted or not, in time order."""
    records: List[CommandRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def emitted(self) -> List[CommandRecord]:
        return [r for r in self.records if r.accepted]

    @property
    def rejected_count(self) -> int:
        return sum(1 for r in self.records if not r.accepted)

    def rejection_runs(self) -> List[Tuple[int, int]]:
        """(start index, length) of each maximal run of rejected commands."""
        runs = []
        start = None
        for i, record in enumerate(self.records):
            if not record.accepted and start is None:
                start = i
            elif record.accepted and start is not None:
                runs.append((start, i - start))
                start = None
        if start is not None:
            runs.append((start, len(self.records) - start))
        return runs


METRICS_COLUMNS = ["seed", "episode", "return", "episode_length", "total_steps", "done_reason",
                   "final_height", "aen_mse"]


@dataclass
class MetricsRecord:
    """Outcome of one training, fine-tuning or evaluation episode.

    ``total_steps`` counts environment steps since training or fine-tuning
    started, up to the end of this episode; evaluation leaves it empty.
    """
    seed: int
    episode: int
    episode_return: float
    episode_length: int
    done_reason: DoneReason
    final_height: float
    aen_mse: Optional[float] = None
    wall_time_s: Optional[float] = None
    total_steps: Optional[int] = None

    def to_row(self, with_wall_time: bool = False) -> List[str]:
        row = [
            str(self.seed),
            str(self.episode),
            repr(float(self.episode_return)),
            str(self.episode_length),
            "" if self.total_steps is None else str(self.total_steps),
            self.done_reason.value,
            repr(float(self.final_height)),
            "" if self.aen_mse is None else repr(float(self.aen_mse)),
        ]
        if with_wall_time:
            row.append("" if self.wall_time_s is None else f"{self.wall_time_s:.3f}")
        return row

    @classmethod
    def from_row(cls, row: Dict[str, str]) -> "MetricsRecord":
        wall = row.get("wall_time_s")
        steps = row.get("total_steps")
        return cls(
            seed=int(row["seed"]),
            episode=int(row["episode"]),
            episode_return=float(row["return"]),
            episode_length=int(row["episode_length"]),
            done_reason=DoneReason(row["done_reason"]),
            final_height=float(row["final_height"]),
            aen_mse=float(row["aen_mse"]) if row.get("aen_mse") else None,
            wall_time_s=float(wall) if wall else None,
            total_steps=int(steps) if steps else None,
        )


EXPERIMENT_KEYS = {
    "mode", "hyperparams", "env", "deploy", "network_widths", "seeds", "learning_starts",
    "metrics_path", "checkpoint_path", "record_wall_time", "success_threshold",
    "success_window", "aen_eval_states",
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one training or evaluation run depends on."""
    mode: Mode = Mode.DECENTRALIZED_AEN_TD3
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    env: EnvConfig = field(default_factory=EnvConfig)
    deploy: InterpolationConfig = field(default_factory=InterpolationConfig)
    network_widths: Dict[str, int] = field(default_factory=lambda: {
        Mode.CENTRALIZED_TD3.value: 256,
        Mode.DECENTRALIZED_AEN_TD3.value: 128,
        Mode.SCRIPTED_PARTNER.value: 128,
    })
    seeds: Tuple[int, ...] = tuple(range(10))
    learning_starts: int = 1000
    metrics_path: str = "runs/{mode}/metrics_seed{seed}.csv"
    checkpoint_path: str = "runs/{mode}/checkpoint_seed{seed}.json"
    record_wall_time: bool = False
    success_threshold: Optional[float] = None
    success_window: int = 100
    aen_eval_states: int = 100

    def __post_init__(self) -> None:
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        _require(len(self.seeds) > 0, "At least one seed is required")
        _require(self.mode.value in self.network_widths,
                 f"No network width configured for mode {self.mode.value}")
        for name, width in self.network_widths.items():
            _require(int(width) > 0, f"Network width for {name} must be positive")
        _require(int(self.learning_starts) >= 0, "learning_starts must be non-negative")
        _require(int(self.success_window) >= 1, "success_window must be positive")
        _require(int(self.aen_eval_states) >= 1, "aen_eval_states must be positive")
        _require(self.env.horizon_T == self.hyperparams.horizon_T,
                 "env.horizon_T must equal hyperparams.horizon_T")
        _require(self.env.action_bounds == self.hyperparams.action_bounds,
                 "env.action_bounds must equal hyperparams.action_bounds")

    @property
    def width(self) -> int:
        return int(self.network_widths[self.mode.value])

    def metrics_file(self, seed: int) -> str:
        return self.metrics_path.format(mode=self.mode.value, seed=seed)

    def checkpoint_file(self, seed: int) -> str:
        return self.checkpoint_path.format(mode=self.mode.value, seed=seed)

    def with_delta(self, delta: float) -> "ExperimentConfig":
        return replace(self, env=replace(self.env, delta=float(delta)))

    def to_dict(self) -> Dict[str, Any]:
        env = self.env.to_dict()
        # carried by hyperparams
        env.pop("horizon_T")
        env.pop("action_bounds")
        return {
            "mode": self.mode.value,
            "hyperparams": self.hyperparams.to_dict(),
            "env": env,
            "deploy": self.deploy.to_dict(),
            "network_widths": {k: int(v) for k, v in self.network_widths.items()},
            "seeds": list(self.seeds),
            "learning_starts": int(self.learning_starts),
            "metrics_path": self.metrics_path,
            "checkpoint_path": self.checkpoint_path,
            "record_wall_time": bool(self.record_wall_time),
            "success_threshold": self.success_threshold,
            "success_window": int(self.success_window),
            "aen_eval_states": int(self.aen_eval_states),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        unknown = set(data) - EXPERIMENT_KEYS
        _require(not unknown, f"Unknown configuration keys: {sorted(unknown)}")
        try:
            mode = Mode(data.get("mode", Mode.DECENTRALIZED_AEN_TD3.value))
        except ValueError:
            raise ConfigError(
                f"Unknown mode {data.get('mode')!r}; expected one of {[m.value for m in Mode]}"
            )
        hyper = Hyperparams.from_dict(data.get("hyperparams", {}) or {})

        env_data = dict(data.get("env", {}) or {})
        if "horizon_T" in env_data and int(env_data["horizon_T"]) != hyper.horizon_T:
            raise ConfigError("env.horizon_T must equal hyperparams.horizon_T")
        if "action_bounds" in env_data and ActionBounds.from_dict(env_data["action_bounds"]) != hyper.action_bounds:
            raise ConfigError("env.action_bounds must equal hyperparams.action_bounds")
        env_data["horizon_T"] = hyper.horizon_T
        env_data["action_bounds"] = hyper.action_bounds.to_dict()
        env = EnvConfig.from_dict(env_data)

        deploy = InterpolationConfig.from_dict(data.get("deploy", {}) or {})
        defaults = cls()
        widths = dict(defaults.network_widths)
        widths.update({str(k): int(v) for k, v in (data.get("network_widths") or {}).items()})
        threshold = data.get("success_threshold")
        seeds = data.get("seeds", defaults.seeds)
        if isinstance(seeds, (str, bytes)) or not isinstance(seeds, (list, tuple)):
            raise ConfigError(f"seeds must be a list of integers, got {seeds!r}")
        try:
            seeds = tuple(int(s) for s in seeds)
        except (TypeError, ValueError):
            raise ConfigError(f"seeds must be a list of integers, got {seeds!r}")
        return cls(
            mode=mode,
            hyperparams=hyper,
            env=env,
            deploy=deploy,
            network_widths=widths,
            seeds=seeds,
            learning_starts=int(data.get("learning_starts", defaults.learning_starts)),
            metrics_path=str(data.get("metrics_path", defaults.metrics_path)),
            checkpoint_path=str(data.get("checkpoint_path", defaults.checkpoint_path)),
            record_wall_time=bool(data.get("record_wall_time", defaults.record_wall_time)),
            success_threshold=None if threshold is None else float(threshold),
            success_window=int(data.get("success_window", defaults.success_window)),
            aen_eval_states=int(data.get("aen_eval_states", defaults.aen_eval_states)),
        )


SUMMARY_COLUMNS = ["row_type", "mode", "seed", "final_median", "success", "episode",
                   "median", "q25", "q75", "success_rate", "threshold", "window"]


@dataclass
class SeedOutcome:
    """Final-window median return of one training run."""
    mode: str
    seed: int
    final_median: float
    success: bool = False


@dataclass
class CurvePoint:
    """Return quartiles across seeds at one episode."""
    episode: int
    median: float
    q25: float
    q75: float


@dataclass
class SummaryReport:
    threshold: float
    window: int
    outcomes: List[SeedOutcome] = field(default_factory=list)
    curves: Dict[str, List[CurvePoint]] = field(default_factory=dict)

    def modes(self) -> List[str]:
        seen = {o.mode for o in self.outcomes} | set(self.curves)
        return sorted(seen)

    def success_rate(self, mode: str) -> float:
        outcomes = [o for o in self.outcomes if o.mode == mode]
        if not outcomes:
            return 0.0
        return sum(1 for o in outcomes if o.success) / len(outcomes)

    def final_median(self, mode: str) -> Optional[float]:
        values = [o.final_median for o in self.outcomes if o.mode == mode]
        return float(np.median(values)) if values else None
