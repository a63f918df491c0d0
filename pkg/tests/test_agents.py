import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ebql.agents import (
    DoubleQLearning,
    EnsembleBootstrappedQLearning,
    EnsembleQ,
    QLearning,
    QTable,
    bias_probe,
    dql_update,
    ebql_member_choice,
    ebql_update,
    learning_rate,
    ql_update,
    select_action,
)
from ebql.chain import ChainState, MetaChainConfig, Node, Transition, reset, step
from ebql.exceptions import InvalidParameterError
from ebql.stats import RngState

# 1/100^0.8 = exp(-0.8 ln 100), evaluated independently
LR_100 = math.exp(-0.8 * math.log(100))

A, B = ChainState(0, Node.A), ChainState(0, Node.B)
END = ChainState(0, Node.TERMINAL)


def _table(n_actions=2):
    return QTable(2, n_actions)


def _move(reward=0.0):
    return Transition(A, 1, reward, B, False)


def _end(reward):
    return Transition(A, 1, reward, END, True)


def test_learning_rate():
    q = _table()
    q.counts[0][0] = 1
    assert learning_rate(q, 0, 0) == 1.0
    q.counts[0][0] = 32
    assert learning_rate(q, 0, 0) == pytest.approx(0.0625, rel=1e-15)
    q.counts[0][0] = 100
    assert learning_rate(q, 0, 0) == pytest.approx(LR_100, rel=1e-14)
    assert LR_100 == pytest.approx(0.02512, abs=5e-6)
    q.counts[0][0] = 0
    with pytest.raises(InvalidParameterError):
        learning_rate(q, 0, 0)


def test_ql_update_examples():
    q = _table()
    ql_update(q, _end(5.0), 1.0, alpha=1.0)
    assert q.values[0][1] == 5.0 and q.counts[0][1] == 1
    q = _table()
    q.values[1] = [2.0, 0.5]
    ql_update(q, _move(1.0), 1.0, alpha=0.5)
    assert q.values[0][1] == 1.5
    q.values[0][1] = 3.0
    ql_update(q, _move(1.0), 1.0, alpha=0.0)
    assert q.values[0][1] == 3.0


def test_first_update_overwrites():
    q = _table()
    ql_update(q, _end(-0.7), 1.0)
    assert q.values[0][1] == -0.7


def test_dql_cross_evaluation():
    qa, qb = _table(), _table()
    qa.values[1] = [1.0, 0.0]
    qb.values[1] = [0.0, 10.0]
    dql_update(qa, qb, _move(0.0), 1.0, coin=0, alpha=1.0)
    assert qa.values[0][1] == 0.0
    assert qb.values[0] == [0.0, 0.0] and qb.counts[0] == [0, 0]


def test_dql_identical_tables_reduce_to_ql():
    q, qa, qb = _table(), _table(), _table()
    for t in (q, qa, qb):
        t.values[1] = [0.3, 0.9]
    ql_update(q, _move(0.2), 0.9, alpha=0.4)
    dql_update(qa, qb, _move(0.2), 0.9, coin=0, alpha=0.4)
    assert qa.values == q.values


def test_dql_terminal():
    qa, qb = _table(), _table()
    qb.values[0] = [100.0, 100.0]
    dql_update(qa, qb, _end(-1.0), 1.0, coin=1, alpha=1.0)
    assert qb.values[0][1] == -1.0
    with pytest.raises(InvalidParameterError):
        dql_update(qa, qb, _end(-1.0), 1.0, coin=2)


def test_ebql_k3_hand_trace():
    ens = EnsembleQ.zeros(3, 2, 2)
    ens.members[0].values[1] = [2.0, 0.0]
    ens.members[1].values[1] = [4.0, -1.0]
    ens.members[2].values[1] = [6.0, 9.0]
    ebql_update(ens, 0, _move(0.0), 1.0, alpha=1.0)
    assert ens.members[0].values[0][1] == 5.0
    assert ens.members[1].counts[0] == [0, 0] and ens.members[2].values[0] == [0.0, 0.0]


def test_ebql_identical_members_reduce_to_ql():
    q = _table()
    q.values[1] = [0.1, 0.4]
    ens = EnsembleQ([q.copy() for _ in range(4)])
    ql_update(q, _move(0.3), 1.0, alpha=0.25)
    ebql_update(ens, 2, _move(0.3), 1.0, alpha=0.25)
    # the K-1 average of equal floats can differ from them in the last bit
    assert np.allclose(ens.members[2].values, q.values, rtol=1e-15, atol=0)


def test_ebql_k2_matches_dql_step():
    qa, qb = _table(), _table()
    qa.values[1], qb.values[1] = [1.0, 3.0], [2.0, -4.0]
    ens = EnsembleQ([qa.copy(), qb.copy()])
    for k in (0, 1, 1, 0):
        dql_update(qa, qb, _move(0.5), 1.0, coin=k)
        ebql_update(ens, k, _move(0.5), 1.0)
    assert ens.members[0] == qa and ens.members[1] == qb


def test_ebql_validation():
    with pytest.raises(InvalidParameterError):
        EnsembleQ.zeros(1, 2, 2)
    with pytest.raises(InvalidParameterError):
        ebql_update(EnsembleQ.zeros(2, 2, 2), 2, _move(), 1.0)


def test_select_action_greedy():
    q = QTable(1, 3)
    q.values[0] = [0.0, 1.0, 1.0]
    rng = RngState(0)
    assert all(select_action([q], 0, 0.0, rng) == 1 for _ in range(100))


def test_select_action_uniform():
    q = QTable(1, 10)
    rng = RngState(1)
    n = 100_000
    c = Counter(select_action([q], 0, 1.0, rng) for _ in range(n))
    se = math.sqrt(0.09 / n)
    assert all(abs(c[a] / n - 0.1) <= 3 * se for a in range(10))


def test_select_action_sums_tables():
    q1, q2 = QTable(1, 2), QTable(1, 2)
    q1.values[0], q2.values[0] = [1.0, 2.0], [2.0, 0.0]
    assert select_action([q1, q2], 0, 0.0, RngState(0)) == 0


@pytest.mark.parametrize("K", [2, 5])
def test_member_choice_uniform(K):
    rng = RngState(K)
    n = 100_000
    c = Counter(ebql_member_choice(rng, K) for _ in range(n))
    se = math.sqrt((1 / K) * (1 - 1 / K) / n)
    assert all(abs(c[k] / n - 1 / K) <= 3 * se for k in range(K))


def test_member_choice_reproducible():
    a, b = RngState(4), RngState(4)
    assert [ebql_member_choice(a, 7) for _ in range(100)] == [ebql_member_choice(b, 7) for _ in range(100)]
    with pytest.raises(InvalidParameterError):
        ebql_member_choice(a, 1)


def _fresh(agent, env):
    return agent.initialize(env.n_states, env.max_actions, env.action_counts())


def test_bias_probe_zero_tables():
    env = MetaChainConfig.from_means((0.4, -0.4))
    for agent in (QLearning(), DoubleQLearning(), EnsembleBootstrappedQLearning(n_members=3)):
        _fresh(agent, env)
        assert bias_probe(agent, 0, env.chains[0], 0.5) == -0.2
        assert bias_probe(agent, 1, env.chains[1], 1.0) == 0.0


def test_bias_probe_uses_table_mean():
    env = MetaChainConfig.from_means((0.4,))
    agent = _fresh(DoubleQLearning(), env)
    agent.qa_.values[0][1], agent.qb_.values[0][1] = 1.0, 0.0
    assert bias_probe(agent, 0, env.chains[0], 1.0) == pytest.approx(0.1)


def _train(agent, env, seed, episodes):
    root = RngState(seed)
    r_reset, r_reward, r_agent = root.child(0), root.child(1), root.child(2)
    updates = 0
    for _ in range(episodes):
        state = reset(env, r_reset)
        while state.node is not Node.TERMINAL:
            before = [t.copy() for t in agent.tables()]
            t = step(state, agent.act(state.index, r_agent), env, r_reward)
            agent.update(t, r_agent)
            updates += 1
            changed = [
                (i, s, a)
                for i, (old, new) in enumerate(zip(before, agent.tables()))
                for s in range(env.n_states)
                for a in range(env.max_actions)
                if old.values[s][a] != new.values[s][a] or old.counts[s][a] != new.counts[s][a]
            ]
            assert len({(i) for i, _, _ in changed}) == 1
            assert all((s, a) == (t.state.index, t.action) for _, s, a in changed)
            state = t.next_state
    return updates


@pytest.mark.parametrize("agent", [QLearning(), DoubleQLearning(), DoubleQLearning(coin="fair"),
                                   EnsembleBootstrappedQLearning(n_members=4)])
def test_single_entry_updates_and_counts(agent):
    env = MetaChainConfig.from_means((-0.2, 0.2), n_b_actions=3)
    _fresh(agent, env)
    updates = _train(agent, env, 0, 40)
    assert sum(sum(sum(r) for r in t.counts) for t in agent.tables()) == updates == agent.n_updates_


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_ebql_k2_equals_dql_streams(seed):
    env = MetaChainConfig.from_means()
    dql = _fresh(DoubleQLearning(coin="fair"), env)
    ebql = _fresh(EnsembleBootstrappedQLearning(n_members=2), env)
    for agent in (dql, ebql):
        root = RngState(seed)
        r_reset, r_reward, r_agent = root.child(0), root.child(1), root.child(2)
        for _ in range(100):
            state = reset(env, r_reset)
            while state.node is not Node.TERMINAL:
                t = step(state, agent.act(state.index, r_agent), env, r_reward)
                agent.update(t, r_agent)
                state = t.next_state
    assert ebql.ensemble_.members == [dql.qa_, dql.qb_]


def test_dql_parity_coin():
    env = MetaChainConfig.from_means((0.2,))
    agent = _fresh(DoubleQLearning(), env)
    rng = RngState(0)
    agent.update(_end(1.0), rng)
    assert agent.qb_.values[0][1] == 1.0 and agent.qa_.values[0][1] == 0.0
    agent.update(_end(2.0), rng)
    assert agent.qa_.values[0][1] == 2.0


def test_agent_params():
    a = EnsembleBootstrappedQLearning(n_members=7, epsilon=0.2, exploration="constant")
    assert a.get_params()["n_members"] == 7
    with pytest.raises(InvalidParameterError):
        QLearning(exploration="softmax").initialize(2, 2)
    with pytest.raises(InvalidParameterError):
        DoubleQLearning(coin="dice").initialize(2, 2)
    with pytest.raises(InvalidParameterError):
        EnsembleBootstrappedQLearning(n_members=1).initialize(2, 2)


def test_exploration_schedule():
    agent = QLearning().initialize(2, 2)
    rng = RngState(0)
    for _ in range(4):
        agent.act(0, rng)
    assert agent.exploration_rate(0) == 0.5
    const = QLearning(exploration="constant", epsilon=0.1).initialize(2, 2)
    assert const.exploration_rate(0) == 0.1

