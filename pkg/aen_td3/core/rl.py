"""Off-policy plumbing: replay buffer, exploration noise, clipping, soft updates.

Gaussian draws come from ``numpy.random.Generator.standard_normal`` (PCG64
bit generator, ziggurat sampler) scaled by sigma. Reimplementations in other
languages can match the distributions, not the exact bits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np

from ..errors import PreconditionError, ShapeError
from ..schema import ActionBounds, Transition
from .nn import MlpNetwork, RngLike, as_rng, same_layout

Shape = Union[int, Tuple[int, ...]]


@dataclass
class TransitionBatch:
    """A minibatch stored column-wise; row ``i`` is one transition."""
    states: np.ndarray
    own_actions: np.ndarray
    partner_actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    terminated: np.ndarray

    def __len__(self) -> int:
        return int(self.rewards.shape[0])

    @classmethod
    def from_transitions(cls, transitions: Sequence[Transition]) -> "TransitionBatch":
        if not transitions:
            raise PreconditionError("Cannot build a batch from zero transitions")
        return cls(
            states=np.stack([t.state for t in transitions]),
            own_actions=np.stack([t.own_action for t in transitions]),
            partner_actions=np.stack([t.estimated_partner_action for t in transitions]),
            rewards=np.array([t.reward for t in transitions], dtype=np.float64),
            next_states=np.stack([t.next_state for t in transitions]),
            terminated=np.array([t.terminated for t in transitions], dtype=bool),
        )

    def to_transitions(self) -> List[Transition]:
        return [
            Transition(
                state=self.states[i],
                own_action=self.own_actions[i],
                estimated_partner_action=self.partner_actions[i],
                reward=self.rewards[i],
                next_state=self.next_states[i],
                terminated=self.terminated[i],
            )
            for i in range(len(self))
        ]


class ReplayBuffer:
    """Fixed-capacity ring of transitions; the oldest entry is overwritten first."""

    def __init__(self, capacity: int, state_dim: int, own_action_dim: int, partner_action_dim: int = 0):
        if capacity < 1:
            raise ShapeError(f"Replay buffer capacity must be positive, got {capacity}")
        self.capacity = int(capacity)
        self.state_dim = int(state_dim)
        self.own_action_dim = int(own_action_dim)
        self.partner_action_dim = int(partner_action_dim)
        # grown on demand so a 10^6-entry default does not allocate up front
        self._states = np.zeros((0, self.state_dim))
        self._own_actions = np.zeros((0, self.own_action_dim))
        self._partner_actions = np.zeros((0, self.partner_action_dim))
        self._rewards = np.zeros(0)
        self._next_states = np.zeros((0, self.state_dim))
        self._terminated = np.zeros(0, dtype=bool)
        self._next = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def _grow(self) -> None:
        new_len = min(self.capacity, max(1024, 2 * self._rewards.shape[0]))
        extra = new_len - self._rewards.shape[0]
        self._states = np.concatenate([self._states, np.zeros((extra, self.state_dim))])
        self._own_actions = np.concatenate([self._own_actions, np.zeros((extra, self.own_action_dim))])
        self._partner_actions = np.concatenate(
            [self._partner_actions, np.zeros((extra, self.partner_action_dim))])
        self._rewards = np.concatenate([self._rewards, np.zeros(extra)])
        self._next_states = np.concatenate([self._next_states, np.zeros((extra, self.state_dim))])
        self._terminated = np.concatenate([self._terminated, np.zeros(extra, dtype=bool)])

    def push(self, transition: Transition) -> None:
        t = transition
        if (t.state.shape != (self.state_dim,) or t.next_state.shape != (self.state_dim,)
                or t.own_action.shape != (self.own_action_dim,)
                or t.estimated_partner_action.shape != (self.partner_action_dim,)):
            raise ShapeError(
                f"Transition dims (state {t.state.shape}, own action {t.own_action.shape}, "
                f"partner action {t.estimated_partner_action.shape}) do not match the buffer "
                f"({self.state_dim}, {self.own_action_dim}, {self.partner_action_dim})"
            )
        if self._next >= self._rewards.shape[0]:
            self._grow()
        i = self._next
        self._states[i] = t.state
        self._own_actions[i] = t.own_action
        self._partner_actions[i] = t.estimated_partner_action
        self._rewards[i] = t.reward
        self._next_states[i] = t.next_state
        self._terminated[i] = t.terminated
        self._next = (self._next + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def _take(self, indices: np.ndarray) -> TransitionBatch:
        return TransitionBatch(
            states=self._states[indices],
            own_actions=self._own_actions[indices],
            partner_actions=self._partner_actions[indices],
            rewards=self._rewards[indices],
            next_states=self._next_states[indices],
            terminated=self._terminated[indices],
        )

    def sample(self, n: int, rng: RngLike) -> TransitionBatch:
        """``n`` transitions drawn uniformly with replacement."""
        if self.size == 0:
            raise PreconditionError("Cannot sample from an empty replay buffer")
        if n < 1:
            raise PreconditionError(f"Sample size must be positive, got {n}")
        indices = as_rng(rng).integers(0, self.size, size=n)
        return self._take(indices)

    def contents(self) -> List[Transition]:
        """Stored transitions, oldest first."""
        if self.size < self.capacity:
            order = np.arange(self.size)
        else:
            order = (np.arange(self.capacity) + self._next) % self.capacity
        return self._take(order).to_transitions() if self.size else []


def buffer_push(buffer: ReplayBuffer, transition: Transition) -> ReplayBuffer:
    buffer.push(transition)
    return buffer


def buffer_sample(buffer: ReplayBuffer, n: int, rng: RngLike) -> List[Transition]:
    return buffer.sample(n, rng).to_transitions()


def gaussian_noise(shape: Shape, sigma: float, rng: RngLike) -> np.ndarray:
    """N(0, sigma^2) per component; sigma 0 draws nothing and returns zeros."""
    if sigma == 0.0:
        return np.zeros(shape)
    return sigma * as_rng(rng).standard_normal(shape)


def clipped_gaussian_noise(shape: Shape, sigma: float, clip_bound: float, rng: RngLike) -> np.ndarray:
    return np.clip(gaussian_noise(shape, sigma, rng), -clip_bound, clip_bound)


def clip_action(a: np.ndarray, bounds: ActionBounds) -> np.ndarray:
    return np.clip(np.asarray(a, dtype=np.float64), bounds.low, bounds.high)


def uniform_action(shape: Shape, bounds: ActionBounds, rng: RngLike) -> np.ndarray:
    return as_rng(rng).uniform(bounds.low, bounds.high, size=shape)


def soft_update(target: MlpNetwork, online: MlpNetwork, tau: float) -> MlpNetwork:
    """tau * online + (1 - tau) * target, parameter by parameter."""
    if not same_layout(target, online):
        raise ShapeError("Soft update needs target and online networks with identical layouts")
    keep = 1.0 - tau
    return MlpNetwork(
        layers=target.layers,
        weights=[tau * w + keep * tw for w, tw in zip(online.weights, target.weights)],
        biases=[tau * b + keep * tb for b, tb in zip(online.biases, target.biases)],
        output_scale=target.output_scale,
    )
