import numpy as np
import pytest
from scipy import stats

from mmnoma.agent import (
    S0,
    S1,
    ActionSpace,
    ActionVector,
    AgentConfig,
    GnbAgent,
    compute_reward,
    observe_state,
    power_cap_mask,
    priority_list,
    q_update,
    select_action,
    ue_associate,
)
from mmnoma.errors import ConfigError


def test_reference_action_space():
    sp = ActionSpace(2, 2, 5)
    assert sp.size == 100
    assert sp.encode(ActionVector((0, 0), (0, 0))) == 0
    seen = set()
    for i in range(sp.size):
        a = sp.decode(i)
        assert sp.encode(a) == i
        seen.add((a.delta, a.powers))
    assert len(seen) == 100
    with pytest.raises(IndexError):
        sp.decode(100)


def test_states_and_rewards():
    assert observe_state(25.0, 20.0) == S0
    assert observe_state(19.99, 20.0) == S1
    assert observe_state(20.0, 20.0) == S0
    assert compute_reward(25.0, 20.0) == 1
    assert compute_reward(10.0, 20.0) == -1
    assert compute_reward(20.0, 20.0) == 1


def test_q_update_hand_values():
    q = np.zeros((2, 100))
    q_update(q, 0, 3, 1.0, 1, 0.5, 0.9)
    assert q[0, 3] == 0.5
    q = np.zeros((2, 4))
    q[0, 1] = 1.0
    q[1, 2] = 1.0
    q_update(q, 0, 1, 1.0, 1, 0.5, 0.9)
    assert q[0, 1] == pytest.approx(1.45)
    before = q.copy()
    q_update(q, 1, 0, -1.0, 0, 0.0, 0.9)
    np.testing.assert_array_equal(q, before)


def test_q_update_oracle_random_tuples():
    rng = np.random.default_rng(8)
    for _ in range(1000):
        q = rng.uniform(-10, 10, (2, 100))
        s, s2 = rng.integers(2, size=2)
        a = int(rng.integers(100))
        r = float(rng.choice([-1.0, 1.0]))
        alpha, gamma = rng.uniform(0, 1), rng.uniform(0, 0.99)
        old = q.copy()
        expect = old[s, a] + alpha * (r + gamma * max(old[s2].tolist()) - old[s, a])
        q_update(q, s, a, r, s2, alpha, gamma)
        assert abs(q[s, a] - expect) <= 1e-12 * max(1.0, abs(expect))
        mask = np.ones_like(q, dtype=bool)
        mask[s, a] = False
        np.testing.assert_array_equal(q[mask], old[mask])


def test_q_values_bounded_under_random_rewards():
    rng = np.random.default_rng(9)
    q = np.zeros((2, 100))
    for _ in range(50_000):
        s, s2 = rng.integers(2, size=2)
        q_update(q, s, int(rng.integers(100)), float(rng.choice([-1, 1])), s2, 0.5, 0.9)
    assert np.abs(q).max() <= 10.0


def test_uniform_exploration_chi_square():
    cfg = AgentConfig(exploration=1.0)
    rng = np.random.default_rng(10)
    q = np.zeros((2, 100))
    q[0, 7] = 5.0
    draws = [select_action(q, 0, 1, cfg, rng) for _ in range(10_000)]
    counts = np.bincount(draws, minlength=100)
    assert stats.chisquare(counts).pvalue > 0.001


def test_greedy_cases():
    rng = np.random.default_rng(11)
    q = np.zeros((2, 10))
    q[1, 4] = 1.0
    cfg0 = AgentConfig(exploration=0.0)
    assert all(select_action(q, 1, 5, cfg0, rng) == 4 for _ in range(100))
    cfg1 = AgentConfig(exploration=1.0, exploration_horizon=2000)
    assert all(select_action(q, 1, 2001, cfg1, rng) == 4 for _ in range(100))
    # ties are random among maximizers
    q[1, 6] = 1.0
    picks = {select_action(q, 1, 3000, cfg1, rng) for _ in range(200)}
    assert picks == {4, 6}


def test_agent_identical_snapshots_identical_actions():
    cfg = AgentConfig(exploration=0.0)
    ag = GnbAgent(0, (3, 5), 2, cfg, np.random.default_rng(0))
    ag.q[S0, 42] = 1.0
    a1 = ag.step(1000.0, 10)
    a2 = ag.step(1000.0, 11)
    assert a1.action == a2.action == 42
    assert set(a1.powers_dbm) <= {0.0, 2.0, 4.0, 6.0, 8.0}
    assert a1.delta == {3: 0, 5: 1}


def test_agent_reward_trace_matches_threshold_rule():
    ag = GnbAgent(0, (1, 2), 2, AgentConfig(), np.random.default_rng(1))
    rng = np.random.default_rng(2)
    log = []
    for t in range(1, 500):
        x = float(10 ** rng.uniform(0, 4))
        log.append((x, ag.step(x, t)))
    for x, step in log[1:]:
        assert step.reward == (1 if 10 * np.log10(x) >= 20.0 else -1)
    assert log[0][1].reward is None


def test_power_override_changes_cardinality():
    cfg = AgentConfig(power_levels_dbm=(0.0, 4.0, 8.0))
    ag = GnbAgent(0, (1, 2), 2, cfg, np.random.default_rng(0))
    assert ag.space.size == 36 and ag.q.size == 72


def test_power_cap_mask():
    assert power_cap_mask(ActionSpace(2, 2, 5), AgentConfig()) is None
    mask = power_cap_mask(ActionSpace(0, 2, 2), AgentConfig(power_levels_dbm=(0.0, 27.0), max_tx_power_dbm=28.0))
    assert mask.tolist() == [True, True, True, False]


def test_association_rules():
    assert ue_associate([1, 0], {0: 1, 1: 1}) == 1
    assert ue_associate([1, 0], {0: 1, 1: 0}) == 0
    assert ue_associate([1, 0], {0: 0, 1: 0}) == 1
    assert priority_list([3.0, 3.0]) == [0, 1]
    assert priority_list([1.0, 5.0]) == [1, 0]


def test_config_validation_names_key():
    with pytest.raises(ConfigError, match="exploration"):
        AgentConfig(exploration=1.5)
