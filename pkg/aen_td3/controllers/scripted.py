"""Agent 1 learns with AEN-TD3 next to a scripted agent 2.

While training, the scripted partner explores like a learner would: its
executed action is the scripted one plus clipped N(0, sigma^2) noise. Agent 1
stores that executed action in the partner slot of its transitions, so its
critic is fitted on how the partner's real actions move the beam. Its AEN
is still trained only by ascending that critic.
"""

from typing import Dict, List, Optional

import numpy as np

from ..core.env import AGENT_ACTION_DIM, scripted_partner, state_partition
from ..core.nn import RngLike, as_rng
from ..core.rl import clip_action, gaussian_noise, uniform_action
from ..errors import PreconditionError
from ..schema import EnvState, ExperimentConfig, Mode, StepResult, Transition
from .base import ActionPair, Controller, agent_transition, create_aen_agent


class ScriptedPartnerController(Controller):
    """The partner's true action is known here, which makes AEN error measurable."""

    mode = Mode.SCRIPTED_PARTNER

    @classmethod
    def learner_names(cls) -> List[str]:
        return ["agent1"]

    @classmethod
    def create(cls, config: ExperimentConfig, rng: RngLike) -> "ScriptedPartnerController":
        return cls(config, {"agent1": create_aen_agent(config, rng)})

    def partner_action(self, state: EnvState, sigma: float = 0.0,
                       rng: Optional[RngLike] = None) -> np.ndarray:
        """Scripted action of agent 2; ``sigma > 0`` adds exploration noise."""
        action = scripted_partner(state, self.config.env, agent_index=2)
        if sigma == 0.0:
            return action
        if rng is None:
            raise PreconditionError("Partner exploration noise needs a random generator")
        noise = gaussian_noise(AGENT_ACTION_DIM, sigma, rng)
        return clip_action(action + noise, self.config.hyperparams.action_bounds)

    def act(self, state: EnvState, sigma: float, rng: RngLike) -> ActionPair:
        gen = as_rng(rng)
        own = state_partition(state, 1).own_state
        return (self.agents["agent1"].select_action(own, sigma, gen),
                self.partner_action(state, sigma, gen))

    def random_act(self, state: EnvState, rng: RngLike) -> ActionPair:
        gen = as_rng(rng)
        hyper = self.config.hyperparams
        return (uniform_action(AGENT_ACTION_DIM, hyper.action_bounds, gen),
                self.partner_action(state, hyper.explore_sigma, gen))

    def partner_estimates(self, state: EnvState) -> Dict[int, np.ndarray]:
        partner = state_partition(state, 1).partner_state
        return {1: self.agents["agent1"].estimate_partner_action(partner)}

    def transitions(self, state: EnvState, actions: ActionPair,
                    result: StepResult) -> Dict[str, Transition]:
        return {"agent1": agent_transition(1, state, actions[0], actions[1], result)}
