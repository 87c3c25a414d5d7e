"""Base classes for the controller registry pattern.

A controller couples learning agents to the two-effector environment: it
chooses both effectors' actions, stores what each learner observed in that
learner's replay buffer, and runs their updates.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Any, Dict, List, Mapping, Tuple, Type, Union

import numpy as np

from ..core.agent import AenTd3Agent
from ..core.env import AGENT_ACTION_DIM, AGENT_STATE_DIM, state_partition
from ..core.nn import RngLike, as_rng
from ..core.rl import ReplayBuffer, uniform_action
from ..errors import CheckpointError, ModeError, PreconditionError
from ..schema import EnvState, ExperimentConfig, Mode, StepResult, Transition

ActionPair = Tuple[np.ndarray, np.ndarray]


class Controller(ABC):
    """Abstract base class for the ways the two effectors can be driven."""

    mode: Mode

    def __init__(self, config: ExperimentConfig, agents: Dict[str, AenTd3Agent]):
        self.config = config
        self.agents = agents
        self.buffers: Dict[str, ReplayBuffer] = {}
        self.reset_buffers()

    @classmethod
    @abstractmethod
    def create(cls, config: ExperimentConfig, rng: RngLike) -> "Controller":
        """Randomly initialized learners for ``config``."""
        pass

    @abstractmethod
    def act(self, state: EnvState, sigma: float, rng: RngLike) -> ActionPair:
        """Actions of agent 1 and agent 2 with exploration noise ``sigma``."""
        pass

    @abstractmethod
    def transitions(self, state: EnvState, actions: ActionPair,
                    result: StepResult) -> Dict[str, Transition]:
        """One transition per learner, keyed like ``agents``."""
        pass

    def random_act(self, state: EnvState, rng: RngLike) -> ActionPair:
        """Uniform-random actions for the warm-up phase."""
        gen = as_rng(rng)
        bounds = self.config.hyperparams.action_bounds
        return (uniform_action(AGENT_ACTION_DIM, bounds, gen),
                uniform_action(AGENT_ACTION_DIM, bounds, gen))

    def partner_estimates(self, state: EnvState) -> Dict[int, np.ndarray]:
        """Each AEN learner's current estimate of its partner's action, by agent index."""
        return {}

    def record(self, state: EnvState, actions: ActionPair, result: StepResult) -> None:
        for name, transition in self.transitions(state, actions, result).items():
            self.buffers[name].push(transition)

    def update(self, step_index: int, rng: Union[RngLike, Mapping[str, RngLike]]) -> None:
        """One train_step per learner, sharing the global 1-based step index.

        ``rng`` maps each learner name to its own minibatch generator; a single
        generator is shared by all learners.
        """
        hyper = self.config.hyperparams
        shared = None if isinstance(rng, Mapping) else as_rng(rng)
        if shared is None and sorted(rng) != sorted(self.agents):
            raise PreconditionError(f"Need one generator per learner {sorted(self.agents)}, got {sorted(rng)}")
        for name, agent in self.agents.items():
            gen = shared if shared is not None else as_rng(rng[name])
            agent.train_step(self.buffers[name], hyper, step_index, gen)

    def reset_buffers(self) -> None:
        capacity = self.config.hyperparams.buffer_capacity
        self.buffers = {
            name: ReplayBuffer(capacity, agent.state_dim, agent.own_action_dim, agent.partner_action_dim)
            for name, agent in self.agents.items()
        }

    @property
    def train_steps(self) -> int:
        return max((agent.train_steps for agent in self.agents.values()), default=0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mode": self.mode.value,
            "agents": {name: agent.to_dict() for name, agent in self.agents.items()},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], config: ExperimentConfig) -> "Controller":
        if data.get("mode") != cls.mode.value:
            raise CheckpointError(
                f"Checkpoint holds a {data.get('mode')!r} controller, config expects {cls.mode.value!r}"
            )
        try:
            agents = {name: AenTd3Agent.from_dict(d, config.hyperparams)
                      for name, d in data["agents"].items()}
        except KeyError as e:
            raise CheckpointError(f"Controller checkpoint is missing {e}") from e
        expected = cls.learner_names()
        if sorted(agents) != sorted(expected):
            raise CheckpointError(f"Checkpoint learners {sorted(agents)} do not match {sorted(expected)}")
        for name, agent in agents.items():
            width = agent.networks.critic1.layers[0].output_dim
            if width != config.width:
                raise CheckpointError(
                    f"{name} has hidden width {width}, config expects {config.width} for {cls.mode.value}"
                )
        return cls(config, {name: agents[name] for name in expected})

    @classmethod
    @abstractmethod
    def learner_names(cls) -> List[str]:
        pass


def agent_transition(agent_index: int, state: EnvState, own_action: np.ndarray,
                     partner_estimate: np.ndarray, result: StepResult) -> Transition:
    """Transition in agent ``agent_index``'s own state order."""
    return Transition(
        state=state_partition(state, agent_index).full(),
        own_action=own_action,
        estimated_partner_action=partner_estimate,
        reward=result.reward,
        next_state=state_partition(result.next_state, agent_index).full(),
        terminated=result.terminated,
    )


def create_aen_agent(config: ExperimentConfig, rng: RngLike) -> AenTd3Agent:
    return AenTd3Agent.create(AGENT_STATE_DIM, AGENT_STATE_DIM, AGENT_ACTION_DIM, AGENT_ACTION_DIM,
                              config.width, config.hyperparams, rng)


# Registry for controllers
CONTROLLERS: Dict[str, Type[Controller]] = {}


def register_controller(mode: Union[Mode, str], controller_class: Type[Controller]) -> None:
    """Register a controller class for a mode."""
    CONTROLLERS[Mode(mode).value] = controller_class


def get_controller_class(mode: Union[Mode, str]) -> Type[Controller]:
    """Get the controller class for a mode."""
    key = mode.value if isinstance(mode, Mode) else str(mode)
    if key not in CONTROLLERS:
        raise ModeError(f"No controller registered for mode {key!r}; known: {list_modes()}")
    return CONTROLLERS[key]


def list_modes() -> List[str]:
    """Get list of modes with registered controllers."""
    return list(CONTROLLERS.keys())


def create_controller(config: ExperimentConfig, rng: RngLike) -> Controller:
    return get_controller_class(config.mode).create(config, rng)
