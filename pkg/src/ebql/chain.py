"""Meta-chain MDP: a uniform mixture of short chains A -> B -> D.

From A the agent either moves toward C (episode ends, reward 0) or toward B
(reward 0).  Every action at B ends the episode with a Gaussian reward whose
mean depends on the chain.  Action 0 at A is toward-C, action 1 toward-B.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from .exceptions import InvalidActionError, InvalidParameterError
from .stats import RngState

DEFAULT_MEANS = (-0.6, -0.4, -0.2, 0.2, 0.4, 0.6)
DEFAULT_SIGMA = 1.0
DEFAULT_B_ACTIONS = 10

TOWARD_C = 0
TOWARD_B = 1


class Node(enum.IntEnum):
    A = 0
    B = 1
    TERMINAL = 2


@dataclass(frozen=True)
class ChainConfig:
    mean: float
    sigma: float = DEFAULT_SIGMA
    n_b_actions: int = DEFAULT_B_ACTIONS

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidParameterError(f"sigma must be positive, got {self.sigma}")
        if self.n_b_actions < 1:
            raise InvalidParameterError("n_b_actions must be at least 1")


@dataclass(frozen=True)
class MetaChainConfig:
    chains: tuple

    def __post_init__(self):
        chains = tuple(self.chains)
        if not chains:
            raise InvalidParameterError("a meta-chain needs at least one chain")
        object.__setattr__(self, "chains", chains)

    @classmethod
    def from_means(cls, means=DEFAULT_MEANS, sigma=DEFAULT_SIGMA, n_b_actions=DEFAULT_B_ACTIONS):
        return cls(tuple(ChainConfig(float(m), sigma, n_b_actions) for m in means))

    @property
    def n_states(self) -> int:
        """Decision states A and B of every chain; terminal states are not stored."""
        return 2 * len(self.chains)

    @property
    def max_actions(self) -> int:
        return max(2, max(c.n_b_actions for c in self.chains))

    def action_counts(self) -> list[int]:
        counts = []
        for c in self.chains:
            counts += [2, c.n_b_actions]
        return counts


@dataclass(frozen=True)
class ChainState:
    chain_index: int
    node: Node = Node.A

    @property
    def index(self) -> Optional[int]:
        """Row of this state in a tabular value function (None when terminal)."""
        if self.node is Node.TERMINAL:
            return None
        return 2 * self.chain_index + int(self.node)


@dataclass(frozen=True)
class Transition:
    state: ChainState
    action: int
    reward: float
    next_state: ChainState
    done: bool


def reset(config: MetaChainConfig, rng: RngState) -> ChainState:
    n = len(config.chains)
    return ChainState(rng.randbelow(n) if n > 1 else 0, Node.A)


def step(state: ChainState, action: int, config: MetaChainConfig, rng: RngState) -> Transition:
    chain = config.chains[state.chain_index]
    if state.node is Node.A:
        if action == TOWARD_C:
            return Transition(state, action, 0.0, ChainState(state.chain_index, Node.TERMINAL), True)
        if action == TOWARD_B:
            return Transition(state, action, 0.0, ChainState(state.chain_index, Node.B), False)
        raise InvalidActionError(f"action {action} is not available at A")
    if state.node is Node.B:
        if not 0 <= action < chain.n_b_actions:
            raise InvalidActionError(f"action {action} is not available at B")
        reward = chain.mean + chain.sigma * rng.normal()
        return Transition(state, action, reward, ChainState(state.chain_index, Node.TERMINAL), True)
    raise InvalidActionError("episode has terminated")


@dataclass(frozen=True)
class OptimalValues:
    at_a: tuple
    at_b: tuple

    @property
    def best_action_at_a(self) -> Optional[int]:
        """Optimal action at A, or None when both actions are worth the same."""
        c, b = self.at_a
        if b == c:
            return None
        return TOWARD_B if b > c else TOWARD_C

    def is_correct(self, action: int) -> bool:
        best = self.best_action_at_a
        return best is None or action == best


def true_q(config: ChainConfig, gamma: float) -> OptimalValues:
    if not 0 <= gamma <= 1:
        raise InvalidParameterError(f"gamma must lie in [0, 1], got {gamma}")
    return OptimalValues((0.0, gamma * config.mean), (config.mean,) * config.n_b_actions)
