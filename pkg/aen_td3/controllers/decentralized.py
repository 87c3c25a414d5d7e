"""Two independent AEN-TD3 learners, one per effector."""

from typing import Dict, List

import numpy as np

from ..core.agent import AenTd3Agent
from ..core.env import state_partition
from ..core.nn import RngLike, as_rng
from ..schema import EnvState, ExperimentConfig, Mode, StepResult, Transition
from .base import ActionPair, Controller, agent_transition, create_aen_agent


class DecentralizedController(Controller):
    """Each learner sees the whole state but only its own action.

    Agent ``i`` reads ``state_partition(state, i)`` and never the partner's
    executed action; its stored partner action is its own AEN estimate.
    """

    mode = Mode.DECENTRALIZED_AEN_TD3

    @classmethod
    def learner_names(cls) -> List[str]:
        return ["agent1", "agent2"]

    @classmethod
    def create(cls, config: ExperimentConfig, rng: RngLike) -> "DecentralizedController":
        gen = as_rng(rng)
        agent1 = create_aen_agent(config, gen)
        agent2 = create_aen_agent(config, gen)
        return cls(config, {"agent1": agent1, "agent2": agent2})

    def _learner(self, agent_index: int) -> AenTd3Agent:
        return self.agents[f"agent{agent_index}"]

    def act(self, state: EnvState, sigma: float, rng: RngLike) -> ActionPair:
        gen = as_rng(rng)
        actions = []
        for agent_index in (1, 2):
            own = state_partition(state, agent_index).own_state
            actions.append(self._learner(agent_index).select_action(own, sigma, gen))
        return actions[0], actions[1]

    def partner_estimates(self, state: EnvState) -> Dict[int, np.ndarray]:
        return {
            agent_index: self._learner(agent_index).estimate_partner_action(
                state_partition(state, agent_index).partner_state)
            for agent_index in (1, 2)
        }

    def transitions(self, state: EnvState, actions: ActionPair,
                    result: StepResult) -> Dict[str, Transition]:
        estimates = self.partner_estimates(state)
        return {
            f"agent{i}": agent_transition(i, state, actions[i - 1], estimates[i], result)
            for i in (1, 2)
        }
