"""Solver tests: config validation, update math, replay, training runs."""

from __future__ import annotations

import dataclasses

import numpy as np
import pytest

from conftest import make_mdp
from cybermdp.mdp import build_cvss_mdp, value_iteration
from cybermdp.netgen import TopologyParams, generate
from cybermdp.solver import (
    ALGORITHMS,
    DqnQ,
    ReplayBuffer,
    TabularQ,
    TrainConfig,
    Transition,
    epsilon_greedy,
    q_update,
    train,
)


def config_with(**overrides) -> TrainConfig:
    base = dict(episodes=100, seed=0)
    base.update(overrides)
    return TrainConfig(**base)


class TestTrainConfig:
    @pytest.mark.parametrize(
        "overrides",
        [
            {"episodes": 0},
            {"algorithm": "sarsa"},
            {"max_steps_per_episode": 0},
            {"eval_interval": 0},
            {"gamma": 0.0},
            {"gamma": 1.5},
            {"learning_rate": 0.0},
            {"learning_rate": -0.1},
            {"learning_rate_decay": -0.5},
            {"epsilon_start": 1.2},
            {"epsilon_end": -0.1},
            {"epsilon_start": 0.1, "epsilon_end": 0.5},
            {"epsilon_decay_episodes": 0},
            {"replay_capacity": 0},
            {"batch_size": 0},
            {"replay_capacity": 8, "batch_size": 9},
            {"target_sync_interval": 0},
            {"hidden_layers": (0,)},
        ],
    )
    def test_rejects_invalid(self, overrides):
        with pytest.raises(ValueError):
            config_with(**overrides)

    def test_algorithms_tuple(self):
        assert ALGORITHMS == ("tabular", "dqn")

    def test_epsilon_schedule_boundaries(self):
        cfg = config_with(
            episodes=100, epsilon_start=1.0, epsilon_end=0.1,
            epsilon_decay_episodes=50,
        )
        assert cfg.epsilon_at(0) == 1.0
        assert cfg.epsilon_at(25) == pytest.approx(0.55)
        assert cfg.epsilon_at(50) == pytest.approx(0.1)
        assert cfg.epsilon_at(99) == pytest.approx(0.1)

    def test_epsilon_default_span_is_eighty_percent(self):
        cfg = config_with(episodes=100, epsilon_start=1.0, epsilon_end=0.0)
        assert cfg.epsilon_at(80) == pytest.approx(0.0)
        assert cfg.epsilon_at(40) == pytest.approx(0.5)

    def test_gamma_resolution(self):
        mdp = make_mdp(states=("a", "t"), actions=[[(1, 0.9, 1.0)], []], gamma=0.9)
        assert config_with(gamma=None).resolve_gamma(mdp) == 0.9
        assert config_with(gamma=0.5).resolve_gamma(mdp) == 0.5


class TestQUpdate:
    def test_worked_example(self):
        got = q_update(q_value=10.0, reward=1.0, max_next=20.0, alpha=0.5,
                       gamma=0.9, done=False)
        assert got == pytest.approx(14.5, abs=1e-12)

    def test_full_step_on_terminal(self):
        assert q_update(3.0, 100.0, 55.0, alpha=1.0, gamma=0.9, done=True) == 100.0

    def test_zero_alpha_freezes(self):
        assert q_update(10.0, 1.0, 20.0, alpha=0.0, gamma=0.9, done=False) == 10.0

    def test_done_drops_bootstrap(self):
        with_boot = q_update(0.0, 1.0, 50.0, 0.5, 0.9, done=False)
        without = q_update(0.0, 1.0, 50.0, 0.5, 0.9, done=True)
        assert with_boot == pytest.approx(0.5 * (1.0 + 45.0))
        assert without == pytest.approx(0.5)

    @pytest.mark.parametrize("alpha", [-0.1, 1.1])
    def test_alpha_bounds(self, alpha):
        with pytest.raises(ValueError, match="alpha"):
            q_update(0.0, 1.0, 0.0, alpha, 0.9, False)


class TestEpsilonGreedy:
    def test_zero_epsilon_is_argmax(self):
        rng = np.random.default_rng(0)
        q = np.array([1.0, 5.0, 3.0])
        assert all(epsilon_greedy(q, 0.0, rng) == 1 for _ in range(20))

    def test_ties_break_low(self):
        rng = np.random.default_rng(0)
        assert epsilon_greedy(np.array([5.0, 5.0]), 0.0, rng) == 0

    def test_full_epsilon_is_uniform(self):
        rng = np.random.default_rng(123)
        q = np.array([100.0, 0.0, 0.0, 0.0])
        draws = 10_000
        counts = np.bincount(
            [epsilon_greedy(q, 1.0, rng) for _ in range(draws)], minlength=4
        )
        expected = draws / 4
        sigma = np.sqrt(draws * 0.25 * 0.75)
        assert np.all(np.abs(counts - expected) < 3 * sigma)

    def test_empty_row_rejected(self):
        with pytest.raises(ValueError, match="admissible"):
            epsilon_greedy(np.array([]), 0.5, np.random.default_rng(0))

    @pytest.mark.parametrize("eps", [-0.1, 1.1])
    def test_epsilon_bounds(self, eps):
        with pytest.raises(ValueError, match="epsilon"):
            epsilon_greedy(np.array([1.0]), eps, np.random.default_rng(0))


class TestValueContainers:
    def test_tabular_q_slices_per_state(self):
        offsets = np.array([0, 2, 3, 3], dtype=np.int64)
        values = np.array([1.0, 2.0, 3.0])
        q = TabularQ(action_offsets=offsets, values=values)
        np.testing.assert_array_equal(q.action_values(0), [1.0, 2.0])
        np.testing.assert_array_equal(q.action_values(1), [3.0])
        assert q.action_values(2).size == 0

    def test_dqn_q_trims_to_slot_count(self):
        from cybermdp.network import QNetwork

        net = QNetwork(3, 4, rng=np.random.Generator(np.random.PCG64(0)))
        q = DqnQ(net=net, action_counts=np.array([2, 4, 0]))
        assert q.action_values(0).shape == (2,)
        assert q.action_values(1).shape == (4,)
        assert q.action_values(2).size == 0
        np.testing.assert_array_equal(q.action_values(0), net.q_row(0)[:2])


class TestReplayBuffer:
    def test_capacity_validation(self):
        with pytest.raises(ValueError):
            ReplayBuffer(0)

    def test_size_never_exceeds_capacity(self):
        buf = ReplayBuffer(3)
        for i in range(7):
            buf.push(Transition(i, 0, float(i), i, False))
            assert len(buf) <= 3
        assert len(buf) == 3

    def test_eviction_is_oldest_first(self):
        buf = ReplayBuffer(3)
        for i in range(5):
            buf.push(Transition(i, 0, float(i), i, False))
        rng = np.random.default_rng(0)
        states, *_ = buf.sample(200, rng)
        assert set(states.tolist()) == {2, 3, 4}

    def test_sample_with_replacement(self):
        buf = ReplayBuffer(4)
        buf.push(Transition(1, 0, 1.0, 1, False))
        states, actions, rewards, next_states, done = buf.sample(
            10, np.random.default_rng(0)
        )
        assert states.shape == (10,)
        assert np.all(states == 1)
        assert rewards.dtype == np.float64 and done.dtype == bool

    def test_empty_sample_rejected(self):
        with pytest.raises(ValueError, match="empty"):
            ReplayBuffer(2).sample(1, np.random.default_rng(0))

    def test_round_trips_fields(self):
        buf = ReplayBuffer(2)
        buf.push(Transition(3, 1, -1.5, 4, True))
        s, a, r, s2, d = buf.sample(1, np.random.default_rng(0))
        assert (int(s[0]), int(a[0]), float(r[0]), int(s2[0]), bool(d[0])) == (
            3, 1, -1.5, 4, True,
        )


@pytest.fixture(scope="module")
def training_mdp():
    g = generate(TopologyParams(2, 5, 0.2, 2, 0.5, seed=5))
    return build_cvss_mdp(g)


class TestTraining:
    def test_same_seed_reproduces_exactly(self, training_mdp):
        cfg = config_with(episodes=40, learning_rate=0.3)
        a = train(training_mdp, cfg)
        b = train(training_mdp, cfg)
        assert a.curve == b.curve
        np.testing.assert_array_equal(a.q.values, b.q.values)

    def test_different_seeds_differ(self, training_mdp):
        a = train(training_mdp, config_with(episodes=40, seed=0))
        b = train(training_mdp, config_with(episodes=40, seed=1))
        assert not np.array_equal(a.q.values, b.q.values)

    def test_curve_follows_eval_interval(self, training_mdp):
        cfg = config_with(episodes=21, eval_interval=4)
        result = train(training_mdp, cfg)
        assert [ep for ep, _ in result.curve] == [4, 8, 12, 16, 20]

    def test_tabular_greedy_matches_value_iteration(self):
        # Small process, generous training: the learned greedy action must
        # agree with the exact solver wherever the gap is decisive.
        g = generate(TopologyParams(2, 4, 0.2, 1, 0.5, seed=2))
        mdp = build_cvss_mdp(g)
        res = value_iteration(mdp, tol=1e-10)
        cfg = config_with(
            episodes=3000, learning_rate=0.5, learning_rate_decay=0.7,
            epsilon_end=0.2, seed=3,
        )
        learned = train(mdp, cfg).q
        from cybermdp.mdp import action_values

        for s in range(mdp.num_states):
            if s == mdp.terminal_state or mdp.num_actions(s) == 0:
                continue
            q_exact = action_values(mdp, res.values, s)
            best = np.max(q_exact)
            runner_up = np.max(q_exact[q_exact < best]) if np.any(q_exact < best) else best
            if best - runner_up <= 0.01:
                continue
            assert int(np.argmax(learned.action_values(s))) == int(np.argmax(q_exact))

    def test_dqn_runs_and_reproduces(self, training_mdp):
        cfg = config_with(
            episodes=12, algorithm="dqn", hidden_layers=(16,),
            batch_size=16, replay_capacity=500, max_steps_per_episode=60,
        )
        a = train(training_mdp, cfg)
        b = train(training_mdp, cfg)
        assert a.curve == b.curve
        assert len(a.curve) == 12 // cfg.eval_interval
        for pa, pb in zip(a.q.net.parameters(), b.q.net.parameters()):
            np.testing.assert_array_equal(pa, pb)

    def test_step_cap_bounds_episode_length(self):
        # Two states, the only action loops back to the start with p = 1,
        # so only the cap can end an episode and training must still finish.
        mdp = make_mdp(
            states=("a", "b", "t"),
            actions=[[(1, 1.0, 0.0)], [(0, 1.0, 0.0), (2, 0.0, 100.0)], []],
            gamma=0.9,
        )
        cfg = config_with(episodes=3, max_steps_per_episode=50, eval_interval=1,
                          epsilon_start=0.0, epsilon_end=0.0)
        result = train(mdp, cfg)
        assert result.curve[-1][1] == 0.0

    def test_gamma_override_changes_learning(self, training_mdp):
        low = train(training_mdp, config_with(episodes=60, gamma=0.2))
        high = train(training_mdp, config_with(episodes=60, gamma=0.99))
        assert not np.array_equal(low.q.values, high.q.values)

    def test_learned_values_are_frozen(self, training_mdp):
        result = train(training_mdp, config_with(episodes=8))
        with pytest.raises(ValueError):
            result.q.values[0] = 1.0
