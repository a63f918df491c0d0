"""Tabular Q-learning, Double Q-learning and Ensemble Bootstrapped Q-learning.

Tables start at zero.  Each update first increments the visit count of the
updated entry and then uses the polynomial step size ``1 / n ** lr_exponent``
(so the first write to an entry fully overwrites it).  Terminal next states
bootstrap to 0.  Tables are plain nested lists: the inner loops are scalar and
list indexing is several times faster than numpy item access.
"""
from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .chain import ChainConfig, Node, true_q
from .exceptions import InvalidParameterError
from .stats import RngState

EXPLORATION_SCHEDULES = ("inverse-sqrt", "constant")


class QTable:
    """Action values plus per-entry update counts.

    ``action_counts[s]`` actions are legal in state ``s``; entries beyond it
    exist only to keep the table rectangular and are never read.
    """

    def __init__(self, n_states: int, n_actions: int, action_counts: Optional[Sequence[int]] = None):
        self.n_states = n_states
        self.n_actions = n_actions
        self.action_counts = list(action_counts) if action_counts is not None else [n_actions] * n_states
        if len(self.action_counts) != n_states or any(not 1 <= c <= n_actions for c in self.action_counts):
            raise InvalidParameterError("action_counts must give 1..n_actions legal actions per state")
        self.values = [[0.0] * n_actions for _ in range(n_states)]
        self.counts = [[0] * n_actions for _ in range(n_states)]

    def greedy(self, s: int) -> int:
        row = self.values[s]
        best, best_value = 0, row[0]
        for a in range(1, self.action_counts[s]):
            if row[a] > best_value:
                best, best_value = a, row[a]
        return best

    def max_value(self, s: int) -> float:
        return max(self.values[s][: self.action_counts[s]])

    def as_array(self) -> np.ndarray:
        return np.array(self.values)

    def counts_array(self) -> np.ndarray:
        return np.array(self.counts)

    def copy(self) -> "QTable":
        new = QTable(self.n_states, self.n_actions, self.action_counts)
        new.values = [list(r) for r in self.values]
        new.counts = [list(r) for r in self.counts]
        return new

    def __eq__(self, other):
        if not isinstance(other, QTable):
            return NotImplemented
        return self.values == other.values and self.counts == other.counts


class EnsembleQ:
    def __init__(self, members: Sequence[QTable]):
        members = list(members)
        if len(members) < 2:
            raise InvalidParameterError("an ensemble needs K >= 2 members")
        shape = (members[0].n_states, members[0].n_actions)
        if any((m.n_states, m.n_actions) != shape for m in members):
            raise InvalidParameterError("ensemble members must share one shape")
        self.members = members

    @classmethod
    def zeros(cls, K: int, n_states: int, n_actions: int, action_counts=None) -> "EnsembleQ":
        if K < 2:
            raise InvalidParameterError(f"K must be at least 2, got {K}")
        return cls([QTable(n_states, n_actions, action_counts) for _ in range(K)])

    @property
    def K(self) -> int:
        return len(self.members)


def learning_rate(q: QTable, s: int, a: int, exponent: float = 0.8) -> float:
    n = q.counts[s][a]
    if n < 1:
        raise InvalidParameterError("learning rate needs an update count of at least 1")
    return 1.0 / n ** exponent


def _write(q: QTable, s: int, a: int, target: float, alpha, exponent: float):
    q.counts[s][a] += 1
    if alpha is None:
        alpha = learning_rate(q, s, a, exponent)
    q.values[s][a] = (1.0 - alpha) * q.values[s][a] + alpha * target


def ql_update(q: QTable, t, gamma: float, alpha: Optional[float] = None, lr_exponent: float = 0.8) -> QTable:
    """One Bellman-optimality step on entry ``(t.state, t.action)``, in place.

    With ``alpha=None`` the polynomial schedule is used.
    """
    s, s_next = t.state.index, t.next_state.index
    boot = 0.0 if t.done else q.max_value(s_next)
    _write(q, s, t.action, t.reward + gamma * boot, alpha, lr_exponent)
    return q


def dql_update(qa: QTable, qb: QTable, t, gamma: float, coin: int,
               alpha: Optional[float] = None, lr_exponent: float = 0.8):
    """Update table A (``coin == 0``) or B (``coin == 1``).

    The updated table's greedy next action is valued by the other table.
    """
    if coin not in (0, 1):
        raise InvalidParameterError("coin must be 0 (update A) or 1 (update B)")
    own, other = (qa, qb) if coin == 0 else (qb, qa)
    s, s_next = t.state.index, t.next_state.index
    boot = 0.0 if t.done else other.values[s_next][own.greedy(s_next)]
    _write(own, s, t.action, t.reward + gamma * boot, alpha, lr_exponent)
    return qa, qb


def ebql_update(ens: EnsembleQ, k: int, t, gamma: float,
                alpha: Optional[float] = None, lr_exponent: float = 0.8) -> EnsembleQ:
    """Update member ``k``; its greedy next action is valued by the mean of the others."""
    if not 0 <= k < ens.K:
        raise InvalidParameterError(f"member index must lie in [0, {ens.K}), got {k}")
    own = ens.members[k]
    s, s_next = t.state.index, t.next_state.index
    if t.done:
        boot = 0.0
    else:
        a_star = own.greedy(s_next)
        total = 0.0
        for j, m in enumerate(ens.members):
            if j != k:
                total += m.values[s_next][a_star]
        boot = total / (ens.K - 1)
    _write(own, s, t.action, t.reward + gamma * boot, alpha, lr_exponent)
    return ens


def select_action(tables: Sequence[QTable], s: int, epsilon: float, rng: RngState) -> int:
    """Epsilon-greedy on the sum of ``tables``; one uniform is consumed per call."""
    if not 0 <= epsilon <= 1:
        raise InvalidParameterError(f"epsilon must lie in [0, 1], got {epsilon}")
    n = tables[0].action_counts[s]
    if rng.uniform() < epsilon:
        return rng.randbelow(n)
    return greedy_on_sum(tables, s)


def greedy_on_sum(tables: Sequence[QTable], s: int) -> int:
    n = tables[0].action_counts[s]
    best, best_value = 0, None
    for a in range(n):
        v = 0.0
        for q in tables:
            v += q.values[s][a]
        if best_value is None or v > best_value:
            best, best_value = a, v
    return best


def ebql_member_choice(rng: RngState, K: int) -> int:
    if K < 2:
        raise InvalidParameterError("K must be at least 2")
    return rng.randbelow(K)


class _TabularAgent(BaseEstimator):

    def __init__(self, gamma=1.0, lr_exponent=0.8, exploration="inverse-sqrt", epsilon=0.1):
        self.gamma = gamma
        self.lr_exponent = lr_exponent
        self.exploration = exploration
        self.epsilon = epsilon

    def _check_params(self):
        if not 0 <= self.gamma <= 1:
            raise InvalidParameterError("gamma must lie in [0, 1]")
        if self.exploration not in EXPLORATION_SCHEDULES:
            raise InvalidParameterError(f"exploration must be one of {EXPLORATION_SCHEDULES}")
        if not 0 <= self.epsilon <= 1:
            raise InvalidParameterError("epsilon must lie in [0, 1]")

    def initialize(self, n_states: int, n_actions: int, action_counts=None):
        """Allocate zero tables; must be called before acting or updating."""
        self._check_params()
        self.visits_ = [0] * n_states
        self.n_updates_ = 0
        self._make_tables(n_states, n_actions, action_counts)
        return self

    def tables(self) -> list[QTable]:
        raise NotImplementedError

    def exploration_rate(self, s: int) -> float:
        if self.exploration == "constant":
            return self.epsilon
        return 1.0 / math.sqrt(self.visits_[s])

    def act(self, s: int, rng: RngState) -> int:
        """Exploratory action; counts a visit to ``s`` first."""
        self.visits_[s] += 1
        return select_action(self.tables(), s, self.exploration_rate(s), rng)

    def greedy_action(self, s: int) -> int:
        return greedy_on_sum(self.tables(), s)

    def q_estimate(self, s: int) -> list[float]:
        """Mean of the tables' values in state ``s`` (the learned Q estimate)."""
        tables = self.tables()
        n = tables[0].action_counts[s]
        out = []
        for a in range(n):
            v = 0.0
            for q in tables:
                v += q.values[s][a]
            out.append(v / len(tables))
        return out

    def update(self, t, rng: RngState):
        self.n_updates_ += 1
        self._update(t, rng)


class QLearning(_TabularAgent):
    name = "QL"

    def _make_tables(self, n_states, n_actions, action_counts):
        self.q_ = QTable(n_states, n_actions, action_counts)

    def tables(self):
        return [self.q_]

    def _update(self, t, rng):
        ql_update(self.q_, t, self.gamma, lr_exponent=self.lr_exponent)


class DoubleQLearning(_TabularAgent):
    """``coin='parity'`` updates B on odd and A on even update steps (counting
    from 1); ``coin='fair'`` draws the table with :func:`ebql_member_choice`.
    """

    name = "DQL"

    def __init__(self, gamma=1.0, lr_exponent=0.8, exploration="inverse-sqrt", epsilon=0.1, coin="parity"):
        super().__init__(gamma, lr_exponent, exploration, epsilon)
        self.coin = coin

    def _make_tables(self, n_states, n_actions, action_counts):
        if self.coin not in ("parity", "fair"):
            raise InvalidParameterError("coin must be 'parity' or 'fair'")
        self.qa_ = QTable(n_states, n_actions, action_counts)
        self.qb_ = QTable(n_states, n_actions, action_counts)

    def tables(self):
        return [self.qa_, self.qb_]

    def _update(self, t, rng):
        if self.coin == "parity":
            coin = 0 if self.n_updates_ % 2 == 0 else 1
        else:
            coin = ebql_member_choice(rng, 2)
        dql_update(self.qa_, self.qb_, t, self.gamma, coin, lr_exponent=self.lr_exponent)


class EnsembleBootstrappedQLearning(_TabularAgent):
    name = "EBQL"

    def __init__(self, n_members=10, gamma=1.0, lr_exponent=0.8, exploration="inverse-sqrt", epsilon=0.1):
        super().__init__(gamma, lr_exponent, exploration, epsilon)
        self.n_members = n_members

    def _make_tables(self, n_states, n_actions, action_counts):
        self.ensemble_ = EnsembleQ.zeros(int(self.n_members), n_states, n_actions, action_counts)

    def tables(self):
        return self.ensemble_.members

    def _update(self, t, rng):
        k = ebql_member_choice(rng, self.ensemble_.K)
        ebql_update(self.ensemble_, k, t, self.gamma, lr_exponent=self.lr_exponent)


def bias_probe(agent: _TabularAgent, chain_index: int, chain: ChainConfig, gamma: float) -> float:
    """Learned minus true value of the optimal action at A of one chain.

    When both actions at A are optimal the toward-C action is probed.
    """
    truth = true_q(chain, gamma)
    a_opt = truth.best_action_at_a
    if a_opt is None:
        a_opt = 0
    s = 2 * chain_index + int(Node.A)
    return agent.q_estimate(s)[a_opt] - truth.at_a[a_opt]
