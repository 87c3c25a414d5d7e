"""AEN-TD3 agent and the centralized TD3 baseline on one update engine.

An agent owns two critics, an actor and (in decentralized mode) an action
estimation network (AEN) that maps the partner's observed state to an
estimate of the partner's action, plus target copies of all of them.

Critic inputs are the concatenation ``(s, a_own, a_partner)`` where
``s = (s_own, s_partner)`` is the full state in the agent's own order. With
partner dimensions of zero there is no AEN and the update rules reduce to
plain TD3 with the actor reading the full state and emitting the joint
action; that is the centralized baseline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Iterator, Optional, Tuple

import numpy as np

from ..errors import CheckpointError, ConfigError, ModeError, PreconditionError, ShapeError
from ..schema import Hyperparams
from .nn import (
    Activation,
    AdamState,
    Direction,
    Gradients,
    MlpNetwork,
    RngLike,
    adam_from_dict,
    adam_step,
    adam_to_dict,
    as_rng,
    backward,
    forward,
    init_adam,
    init_network,
    mlp_spec,
    network_from_dict,
    network_to_dict,
)
from .rl import ReplayBuffer, TransitionBatch, clip_action, clipped_gaussian_noise, gaussian_noise, soft_update

ONLINE_NAMES = ("critic1", "critic2", "actor", "aen")


@dataclass
class AgentNetworks:
    """Online networks, their targets and one Adam state per online network."""
    critic1: MlpNetwork
    critic2: MlpNetwork
    actor: MlpNetwork
    aen: Optional[MlpNetwork]
    critic1_target: MlpNetwork
    critic2_target: MlpNetwork
    actor_target: MlpNetwork
    aen_target: Optional[MlpNetwork]
    optimizers: Dict[str, AdamState]

    def names(self) -> Iterator[str]:
        """Names of the online networks present in this bundle."""
        for name in ONLINE_NAMES:
            if getattr(self, name) is not None:
                yield name

    def online(self, name: str) -> MlpNetwork:
        return getattr(self, name)

    def target(self, name: str) -> MlpNetwork:
        return getattr(self, f"{name}_target")


def _action_scale(hyper: Hyperparams) -> float:
    bounds = hyper.action_bounds
    return max(abs(bounds.low), abs(bounds.high))


class AenTd3Agent:
    """One learner: TD3 with an optional partner-action estimator."""

    def __init__(
        self,
        networks: AgentNetworks,
        own_state_dim: int,
        partner_state_dim: int,
        own_action_dim: int,
        partner_action_dim: int,
        hyper: Hyperparams,
    ):
        self.networks = networks
        self.own_state_dim = int(own_state_dim)
        self.partner_state_dim = int(partner_state_dim)
        self.own_action_dim = int(own_action_dim)
        self.partner_action_dim = int(partner_action_dim)
        self.hyper = hyper
        self.train_steps = 0
        self.critic_updates = 0
        self.actor_updates = 0
        self.aen_updates = 0
        self._check_layout()

    # ------------------------------------------------------------------
    # Construction
    # ------------------------------------------------------------------

    @classmethod
    def create(
        cls,
        own_state_dim: int,
        partner_state_dim: int,
        own_action_dim: int,
        partner_action_dim: int,
        width: int,
        hyper: Hyperparams,
        rng: RngLike,
    ) -> "AenTd3Agent":
        """Randomly initialized agent; targets start as exact copies.

        Networks are drawn in the order critic1, critic2, actor, aen from one
        generator.
        """
        if partner_action_dim > 0 and partner_state_dim <= 0:
            raise ConfigError("An action estimator needs a non-empty partner state")
        gen = as_rng(rng)
        scale = _action_scale(hyper)
        state_dim = own_state_dim + partner_state_dim
        critic_in = state_dim + own_action_dim + partner_action_dim
        critic_spec = mlp_spec(critic_in, width, 1, Activation.IDENTITY)

        critic1 = init_network(critic_spec, 1.0, gen)
        critic2 = init_network(critic_spec, 1.0, gen)
        actor = init_network(mlp_spec(own_state_dim, width, own_action_dim, Activation.TANH), scale, gen)
        aen = None
        if partner_action_dim > 0:
            aen = init_network(
                mlp_spec(partner_state_dim, width, partner_action_dim, Activation.TANH), scale, gen
            )

        def adam(net: MlpNetwork, lr: float) -> AdamState:
            return init_adam(net, lr, hyper.adam_beta1, hyper.adam_beta2, hyper.adam_eps)

        optimizers = {
            "critic1": adam(critic1, hyper.critic_lr),
            "critic2": adam(critic2, hyper.critic_lr),
            "actor": adam(actor, hyper.actor_lr),
        }
        if aen is not None:
            optimizers["aen"] = adam(aen, hyper.aen_lr)

        networks = AgentNetworks(
            critic1=critic1,
            critic2=critic2,
            actor=actor,
            aen=aen,
            critic1_target=critic1.copy(),
            critic2_target=critic2.copy(),
            actor_target=actor.copy(),
            aen_target=None if aen is None else aen.copy(),
            optimizers=optimizers,
        )
        return cls(networks, own_state_dim, partner_state_dim, own_action_dim, partner_action_dim, hyper)

    @classmethod
    def centralized(cls, state_dim: int, action_dim: int, width: int,
                    hyper: Hyperparams, rng: RngLike) -> "AenTd3Agent":
        """TD3 baseline: the actor reads the full state and emits the joint action."""
        return cls.create(state_dim, 0, action_dim, 0, width, hyper, rng)

    def _check_layout(self) -> None:
        nets = self.networks
        if nets.critic1.input_dim != self.critic_input_dim or nets.critic1.output_dim != 1:
            raise ShapeError(f"Critic must map {self.critic_input_dim} inputs to one value")
        if nets.actor.input_dim != self.own_state_dim or nets.actor.output_dim != self.own_action_dim:
            raise ShapeError("Actor dims do not match the agent's own state and action")
        if (nets.aen is None) != (self.partner_action_dim == 0):
            raise ShapeError("An action estimator is required exactly when partner actions exist")
        if nets.aen is not None and (nets.aen.input_dim != self.partner_state_dim
                                     or nets.aen.output_dim != self.partner_action_dim):
            raise ShapeError("Action estimator dims do not match the partner state and action")
        for name in nets.names():
            if nets.online(name).layers != nets.target(name).layers:
                raise ShapeError(f"Target of {name} has a different layout")
            if name not in nets.optimizers:
                raise ShapeError(f"Missing optimizer state for {name}")

    # ------------------------------------------------------------------
    # Layout helpers
    # ------------------------------------------------------------------

    @property
    def state_dim(self) -> int:
        return self.own_state_dim + self.partner_state_dim

    @property
    def critic_input_dim(self) -> int:
        return self.state_dim + self.own_action_dim + self.partner_action_dim

    @property
    def is_decentralized(self) -> bool:
        return self.networks.aen is not None

    @property
    def own_action_slot(self) -> slice:
        return slice(self.state_dim, self.state_dim + self.own_action_dim)

    @property
    def partner_action_slot(self) -> slice:
        start = self.state_dim + self.own_action_dim
        return slice(start, start + self.partner_action_dim)

    def split_state(self, states: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return states[..., :self.own_state_dim], states[..., self.own_state_dim:]

    def critic_input(self, states: np.ndarray, own_actions: np.ndarray,
                     partner_actions: np.ndarray) -> np.ndarray:
        return np.concatenate([states, own_actions, partner_actions], axis=-1)

    def _require_aen(self, operation: str) -> MlpNetwork:
        if self.networks.aen is None:
            raise ModeError(f"{operation} needs an action estimator; this agent is centralized")
        return self.networks.aen

    def _partner_actions_for_update(self, batch: TransitionBatch) -> np.ndarray:
        if self.hyper.recompute_partner_estimate and self.is_decentralized:
            _, partner_states = self.split_state(batch.states)
            return forward(self.networks.aen, partner_states)
        return batch.partner_actions

    # ------------------------------------------------------------------
    # Acting
    # ------------------------------------------------------------------

    def select_action(self, own_state: np.ndarray, sigma: float, rng: RngLike) -> np.ndarray:
        """pi(s_own) plus N(0, sigma^2) noise, clipped to the action bounds."""
        s = np.asarray(own_state, dtype=np.float64)
        if s.shape != (self.own_state_dim,):
            raise ShapeError(f"Own state must have {self.own_state_dim} entries, got shape {s.shape}")
        action = forward(self.networks.actor, s)
        action = action + gaussian_noise(action.shape, sigma, rng)
        return clip_action(action, self.hyper.action_bounds)

    def estimate_partner_action(self, partner_state: np.ndarray) -> np.ndarray:
        aen = self._require_aen("estimate_partner_action")
        s = np.asarray(partner_state, dtype=np.float64)
        if s.shape[-1:] != (self.partner_state_dim,):
            raise ShapeError(
                f"Partner state must have {self.partner_state_dim} entries, got shape {s.shape}"
            )
        return forward(aen, s)

    # ------------------------------------------------------------------
    # TD target
    # ------------------------------------------------------------------

    def target_actions(self, batch: TransitionBatch, hyper: Hyperparams,
                       rng: RngLike) -> Tuple[np.ndarray, np.ndarray]:
        """Clipped target-policy actions with smoothing noise, and clipped target estimates."""
        if len(batch) == 0:
            raise PreconditionError("TD target needs a non-empty batch")
        own_next, partner_next = self.split_state(batch.next_states)
        nets = self.networks
        own = forward(nets.actor_target, own_next)
        own = own + clipped_gaussian_noise(own.shape, hyper.target_sigma, hyper.clip_c, rng)
        own = clip_action(own, hyper.action_bounds)
        if nets.aen_target is not None:
            partner = clip_action(forward(nets.aen_target, partner_next), hyper.action_bounds)
        else:
            partner = np.zeros((len(batch), 0))
        return own, partner

    def target_q_values(self, batch: TransitionBatch, hyper: Hyperparams,
                        rng: RngLike) -> Tuple[np.ndarray, np.ndarray]:
        own, partner = self.target_actions(batch, hyper, rng)
        x = self.critic_input(batch.next_states, own, partner)
        q1 = forward(self.networks.critic1_target, x)[:, 0]
        q2 = forward(self.networks.critic2_target, x)[:, 0]
        return q1, q2

    def compute_td_target(self, batch: TransitionBatch, hyper: Hyperparams, rng: RngLike) -> np.ndarray:
        """y = r + [not terminated] * gamma * min(Q'1, Q'2), target networks only."""
        q1, q2 = self.target_q_values(batch, hyper, rng)
        bootstrap = np.where(batch.terminated, 0.0, hyper.gamma * np.minimum(q1, q2))
        return batch.rewards + bootstrap

    # ------------------------------------------------------------------
    # Gradients
    # ------------------------------------------------------------------

    def critic_loss_gradients(self, critic: MlpNetwork, batch: TransitionBatch,
                              y: np.ndarray) -> Tuple[float, Gradients]:
        """Mean squared TD error of ``critic`` and its parameter gradient."""
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (len(batch),):
            raise ShapeError(f"Expected {len(batch)} targets, got shape {y.shape}")
        x = self.critic_input(batch.states, batch.own_actions, self._partner_actions_for_update(batch))
        diff = forward(critic, x)[:, 0] - y
        loss = float(np.mean(diff * diff))
        grads, _ = backward(critic, x, (2.0 / len(batch) * diff)[:, None])
        return loss, grads

    def _critic1_slot_gradient(self, x: np.ndarray, slot: slice) -> Tuple[float, np.ndarray]:
        n = x.shape[0]
        critic = self.networks.critic1
        objective = float(np.mean(forward(critic, x)[:, 0]))
        _, input_grad = backward(critic, x, np.full((n, 1), 1.0 / n))
        return objective, input_grad[:, slot]

    def actor_objective_gradients(self, batch: TransitionBatch) -> Tuple[float, Gradients]:
        """mean Q1(s, pi(s_own), a_o) and its gradient with respect to the actor."""
        if len(batch) == 0:
            raise PreconditionError("Actor update needs a non-empty batch")
        own_states, _ = self.split_state(batch.states)
        actions = forward(self.networks.actor, own_states)
        x = self.critic_input(batch.states, actions, self._partner_actions_for_update(batch))
        objective, action_grad = self._critic1_slot_gradient(x, self.own_action_slot)
        grads, _ = backward(self.networks.actor, own_states, action_grad)
        return objective, grads

    def aen_objective_gradients(self, batch: TransitionBatch) -> Tuple[float, Gradients]:
        """mean Q1(s, a_own, e(s_partner)) and its gradient with respect to the AEN."""
        aen = self._require_aen("aen_update")
        if len(batch) == 0:
            raise PreconditionError("AEN update needs a non-empty batch")
        _, partner_states = self.split_state(batch.states)
        estimates = forward(aen, partner_states)
        x = self.critic_input(batch.states, batch.own_actions, estimates)
        objective, estimate_grad = self._critic1_slot_gradient(x, self.partner_action_slot)
        grads, _ = backward(aen, partner_states, estimate_grad)
        return objective, grads

    # ------------------------------------------------------------------
    # Updates
    # ------------------------------------------------------------------

    def _apply(self, name: str, grads: Gradients, direction: Direction) -> None:
        nets = self.networks
        net, state = adam_step(nets.online(name), grads, nets.optimizers[name], direction)
        setattr(nets, name, net)
        nets.optimizers[name] = state

    def critic_update(self, batch: TransitionBatch, y: np.ndarray) -> Tuple[float, float]:
        """One Adam step per critic on its own loss; returns both losses."""
        nets = self.networks
        loss1, grads1 = self.critic_loss_gradients(nets.critic1, batch, y)
        loss2, grads2 = self.critic_loss_gradients(nets.critic2, batch, y)
        self._apply("critic1", grads1, Direction.MINIMIZE)
        self._apply("critic2", grads2, Direction.MINIMIZE)
        self.critic_updates += 1
        return loss1, loss2

    def actor_update(self, batch: TransitionBatch) -> float:
        objective, grads = self.actor_objective_gradients(batch)
        self._apply("actor", grads, Direction.MAXIMIZE)
        self.actor_updates += 1
        return objective

    def aen_update(self, batch: TransitionBatch) -> float:
        objective, grads = self.aen_objective_gradients(batch)
        self._apply("aen", grads, Direction.MAXIMIZE)
        self.aen_updates += 1
        return objective

    def soft_update_targets(self, tau: float) -> None:
        nets = self.networks
        for name in list(nets.names()):
            setattr(nets, f"{name}_target", soft_update(nets.target(name), nets.online(name), tau))

    def train_step(self, buffer: ReplayBuffer, hyper: Hyperparams, step_index: int, rng: RngLike) -> None:
        """Critics every call; actor, AEN and all targets when step_index % d == 0."""
        if len(buffer) == 0:
            raise PreconditionError("train_step needs a non-empty replay buffer")
        gen = as_rng(rng)
        batch = buffer.sample(hyper.batch_n, gen)
        y = self.compute_td_target(batch, hyper, gen)
        self.critic_update(batch, y)
        if step_index % hyper.delay_d == 0:
            self.actor_update(batch)
            if self.is_decentralized:
                self.aen_update(batch)
            self.soft_update_targets(hyper.tau)
        self.train_steps += 1

    # ------------------------------------------------------------------
    # Persistence
    # ------------------------------------------------------------------

    def to_dict(self) -> Dict[str, Any]:
        nets = self.networks
        return {
            "dims": {
                "own_state": self.own_state_dim,
                "partner_state": self.partner_state_dim,
                "own_action": self.own_action_dim,
                "partner_action": self.partner_action_dim,
            },
            "networks": {name: network_to_dict(nets.online(name)) for name in nets.names()},
            "targets": {name: network_to_dict(nets.target(name)) for name in nets.names()},
            "optimizers": {name: adam_to_dict(nets.optimizers[name]) for name in nets.names()},
            "counters": {
                "train_steps": self.train_steps,
                "critic_updates": self.critic_updates,
                "actor_updates": self.actor_updates,
                "aen_updates": self.aen_updates,
            },
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], hyper: Hyperparams) -> "AenTd3Agent":
        try:
            dims = data["dims"]
            online = {name: network_from_dict(d) for name, d in data["networks"].items()}
            targets = {name: network_from_dict(d) for name, d in data["targets"].items()}
            optimizers = {name: adam_from_dict(d, online[name]) for name, d in data["optimizers"].items()}
            networks = AgentNetworks(
                critic1=online["critic1"],
                critic2=online["critic2"],
                actor=online["actor"],
                aen=online.get("aen"),
                critic1_target=targets["critic1"],
                critic2_target=targets["critic2"],
                actor_target=targets["actor"],
                aen_target=targets.get("aen"),
                optimizers=optimizers,
            )
            agent = cls(networks, dims["own_state"], dims["partner_state"],
                        dims["own_action"], dims["partner_action"], hyper)
        except KeyError as e:
            raise CheckpointError(f"Agent checkpoint is missing {e}") from e
        except ShapeError as e:
            raise CheckpointError(f"Agent checkpoint layout is inconsistent: {e}") from e
        counters = data.get("counters", {})
        agent.train_steps = int(counters.get("train_steps", 0))
        agent.critic_updates = int(counters.get("critic_updates", 0))
        agent.actor_updates = int(counters.get("actor_updates", 0))
        agent.aen_updates = int(counters.get("aen_updates", 0))
        return agent


# Convenience functions
def select_action(agent: AenTd3Agent, own_state: np.ndarray, sigma: float, rng: RngLike) -> np.ndarray:
    return agent.select_action(own_state, sigma, rng)


def estimate_partner_action(agent: AenTd3Agent, partner_state: np.ndarray) -> np.ndarray:
    return agent.estimate_partner_action(partner_state)


def compute_td_target(agent: AenTd3Agent, batch: TransitionBatch, hyper: Hyperparams,
                      rng: RngLike) -> np.ndarray:
    return agent.compute_td_target(batch, hyper, rng)


def train_step(agent: AenTd3Agent, buffer: ReplayBuffer, hyper: Hyperparams,
               step_index: int, rng: RngLike) -> AenTd3Agent:
    agent.train_step(buffer, hyper, step_index, rng)
    return agent


def centralized_td3_step(agent: AenTd3Agent, buffer: ReplayBuffer, hyper: Hyperparams,
                         step_index: int, rng: RngLike) -> AenTd3Agent:
    """TD3 baseline step; refuses agents that carry an action estimator."""
    if agent.is_decentralized:
        raise ModeError("centralized_td3_step needs an agent without an action estimator")
    agent.train_step(buffer, hyper, step_index, rng)
    return agent
