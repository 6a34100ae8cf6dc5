"""Environment dynamics, tabular oracles, and policy evaluation."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from o2orl.envs import (
    ChainEnv,
    ConstantPolicy,
    PendulumController,
    PendulumEnv,
    PointNavEnv,
    RandomPolicy,
    TabularMdp,
    ZeroPolicy,
    bellman_residual,
    chain_mdp,
    evaluate_policy,
    exact_policy_eval,
    make_env,
    value_iteration,
)


class TestPendulum:
    def test_reset_deterministic_per_seed(self):
        env = PendulumEnv()
        np.testing.assert_array_equal(env.reset(7), env.reset(7))

    def test_zero_cost_at_upright_rest(self):
        env = PendulumEnv()
        _, r, _ = env.step(np.array([0.0, 0.0]), np.array([0.0]))
        assert r == 0.0

    def test_cost_at_hanging_position(self):
        env = PendulumEnv()
        _, r, _ = env.step(np.array([np.pi, 0.0]), np.array([0.0]))
        np.testing.assert_allclose(r, -np.pi**2, atol=1e-12)

    def test_step_is_pure(self):
        env = PendulumEnv()
        s = np.array([0.3, -0.5])
        a = np.array([0.2])
        s1, r1, d1 = env.step(s, a)
        s2, r2, d2 = env.step(s, a)
        assert np.array_equal(s1, s2) and r1 == r2 and d1 == d2

    @given(st.floats(-np.pi, np.pi), st.floats(-8, 8), st.floats(-1, 1))
    @settings(max_examples=200, deadline=None)
    def test_reward_never_positive(self, theta, theta_dot, action):
        env = PendulumEnv()
        _, r, _ = env.step(np.array([theta, theta_dot]), np.array([action]))
        assert r <= 0.0

    def test_out_of_bounds_action_clamped(self):
        env = PendulumEnv()
        s = np.array([1.0, 0.0])
        s_big, r_big, _ = env.step(s, np.array([5.0]))
        s_one, r_one, _ = env.step(s, np.array([1.0]))
        assert np.array_equal(s_big, s_one) and r_big == r_one


class TestPointNav:
    def test_start_inside_start_region(self):
        env = PointNavEnv()
        for seed in range(20):
            s = env.reset(seed)
            assert np.all(s[:2] >= env.start_low) and np.all(s[:2] <= env.start_high)
            assert np.all(s[2:] == 0.0)

    def test_goal_gives_reward_and_done(self):
        env = PointNavEnv()
        s = np.array([0.68, 0.68, 0.1, 0.1])  # one step from inside the goal disc
        nxt, r, done = env.step(s, np.array([0.0, 0.0]))
        assert env.at_goal(nxt) and r == 1.0 and done

    @given(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1))
    @settings(max_examples=100, deadline=None)
    def test_reward_is_binary(self, x, y, ax, ay):
        env = PointNavEnv()
        _, r, _ = env.step(np.array([x, y, 0.0, 0.0]), np.array([ax, ay]))
        assert r in (0.0, 1.0)


class TestTabular:
    def test_chain_reset_is_state_zero(self):
        env = ChainEnv(8)
        s = env.reset(3)
        assert env.state_index(s) == 0

    def test_zero_discount_returns_reward_table(self):
        mdp = chain_mdp(6, gamma=0.0)
        policy = np.full((6, 2), 0.5)
        np.testing.assert_allclose(exact_policy_eval(mdp, policy), mdp.rewards, atol=1e-12)

    def test_two_state_chain_hand_solve(self):
        # state 1 absorbing with zero reward; Q(0) = 1 + 0.5 * 0 = 1
        p = np.zeros((2, 1, 2))
        p[0, 0, 1] = 1.0
        p[1, 0, 1] = 1.0
        mdp = TabularMdp(p, np.array([[1.0], [0.0]]), 0.5)
        q = exact_policy_eval(mdp, np.ones((2, 1)))
        np.testing.assert_allclose(q, [[1.0], [0.0]], atol=1e-12)

    def test_symmetric_mdp_gives_symmetric_q(self):
        # two-state symmetric MDP: swapping states relabels Q exactly
        p = np.zeros((2, 2, 2))
        for s in range(2):
            p[s, 0, s] = 1.0       # stay
            p[s, 1, 1 - s] = 1.0   # switch
        r = np.array([[0.2, -0.1], [0.2, -0.1]])
        mdp = TabularMdp(p, r, 0.9)
        q = exact_policy_eval(mdp, np.full((2, 2), 0.5))
        np.testing.assert_allclose(q[0], q[1], atol=1e-12)

    def test_oracle_residual(self):
        rng = np.random.default_rng(0)
        for n in (4, 9, 16):
            p = rng.dirichlet(np.ones(n), size=(n, 3))
            r = rng.uniform(-1, 1, size=(n, 3))
            mdp = TabularMdp(p, r, 0.97)
            policy = rng.dirichlet(np.ones(3), size=n)
            q = exact_policy_eval(mdp, policy)
            assert bellman_residual(mdp, policy, q) < 1e-10

    def test_gamma_one_rejected(self):
        p = np.ones((1, 1, 1))
        with pytest.raises(ValueError):
            TabularMdp(p, np.zeros((1, 1)), 1.0)

    def test_value_iteration_chain_optimum_is_right(self):
        mdp = chain_mdp(8)
        qstar = value_iteration(mdp)
        assert list(qstar.argmax(axis=1))[:-1] == [1] * 7

    def test_chain_env_step_matches_mdp(self):
        env = ChainEnv(5)
        s = env.reset(0)
        nxt, r, done = env.step(s, np.array([0.7]))
        assert env.state_index(nxt) == 1 and r == 0.0 and not done
        nxt2, r2, _ = env.step(s, np.array([-0.7]))
        assert env.state_index(nxt2) == 0 and r2 == env.mdp.rewards[0, 0]


class TestEvaluatePolicy:
    def test_single_episode_equals_rollout(self):
        env = PendulumEnv()
        mean, returns = evaluate_policy(env, ZeroPolicy(1), episodes=1, seed=5)
        assert returns.shape == (1,) and mean == returns[0]

    def test_same_seed_identical_vectors(self):
        env = PendulumEnv()
        _, a = evaluate_policy(env, ZeroPolicy(1), episodes=5, seed=9)
        _, b = evaluate_policy(env, ZeroPolicy(1), episodes=5, seed=9)
        np.testing.assert_array_equal(a, b)

    def test_zero_torque_beats_constant_max_torque(self):
        env = PendulumEnv()
        zero, _ = evaluate_policy(env, ZeroPolicy(1), episodes=20, seed=1)
        slam, _ = evaluate_policy(env, ConstantPolicy([1.0]), episodes=20, seed=1)
        assert zero > slam

    def test_controller_quality_ordering(self):
        env = PendulumEnv()
        expert, _ = evaluate_policy(env, PendulumController(1.0), episodes=10, seed=2)
        weak, _ = evaluate_policy(env, PendulumController(0.5), episodes=10, seed=2)
        rand, _ = evaluate_policy(env, RandomPolicy(1), episodes=10, seed=2)
        assert rand < weak < expert

    def test_episodes_must_be_positive(self):
        with pytest.raises(ValueError):
            evaluate_policy(PendulumEnv(), ZeroPolicy(1), episodes=0, seed=0)


def test_make_env_ids():
    assert isinstance(make_env("pendulum"), PendulumEnv)
    assert isinstance(make_env("pointnav"), PointNavEnv)
    assert make_env("chain-12").n_states == 12
    with pytest.raises(ValueError):
        make_env("mujoco")
