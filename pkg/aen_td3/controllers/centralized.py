"""Centralized TD3 baseline: one learner drives both effectors."""

from typing import Dict, List

import numpy as np

from ..core.agent import AenTd3Agent
from ..core.env import AGENT_ACTION_DIM, AGENT_STATE_DIM
from ..core.nn import RngLike
from ..schema import EnvState, ExperimentConfig, Mode, StepResult, Transition
from .base import ActionPair, Controller


class CentralizedController(Controller):
    """Full state (x1, z1, x2, z2) in, joint action (dx1, dz1, dx2, dz2) out."""

    mode = Mode.CENTRALIZED_TD3

    @classmethod
    def learner_names(cls) -> List[str]:
        return ["joint"]

    @classmethod
    def create(cls, config: ExperimentConfig, rng: RngLike) -> "CentralizedController":
        agent = AenTd3Agent.centralized(2 * AGENT_STATE_DIM, 2 * AGENT_ACTION_DIM,
                                        config.width, config.hyperparams, rng)
        return cls(config, {"joint": agent})

    @property
    def agent(self) -> AenTd3Agent:
        return self.agents["joint"]

    def act(self, state: EnvState, sigma: float, rng: RngLike) -> ActionPair:
        joint = self.agent.select_action(state.as_vector(), sigma, rng)
        return joint[:AGENT_ACTION_DIM], joint[AGENT_ACTION_DIM:]

    def transitions(self, state: EnvState, actions: ActionPair,
                    result: StepResult) -> Dict[str, Transition]:
        return {
            "joint": Transition(
                state=state.as_vector(),
                own_action=np.concatenate(actions),
                estimated_partner_action=np.zeros(0),
                reward=result.reward,
                next_state=result.next_state.as_vector(),
                terminated=result.terminated,
            )
        }
