"""Environment registry and policy evaluation."""

from __future__ import annotations

import numpy as np

from .continuous import (
    ConstantPolicy,
    PendulumController,
    PendulumEnv,
    PointNavController,
    PointNavEnv,
    RandomPolicy,
    ZeroPolicy,
    wrap_angle,
)
from .tabular import (
    ChainEnv,
    TabularMdp,
    bellman_residual,
    chain_mdp,
    exact_policy_eval,
    value_iteration,
)


def make_env(env_id: str):
    """Instantiate an environment from its string id: pendulum, pointnav, chain-N."""
    if env_id == "pendulum":
        return PendulumEnv()
    if env_id == "pointnav":
        return PointNavEnv()
    if env_id.startswith("chain-"):
        n = int(env_id.split("-", 1)[1])
        return ChainEnv(n_states=n)
    raise ValueError(f"unknown environment id {env_id!r}")


def rollout_return(env, policy, rng, deterministic=True):
    """Single-episode undiscounted return."""
    state = env.reset(rng)
    total = 0.0
    for _ in range(env.horizon):
        action = policy.act(state, rng=rng, deterministic=deterministic)
        state, reward, done = env.step(state, action)
        total += reward
        if done:
            break
    return total


def evaluate_policy(env, policy, episodes=10, seed=0):
    """Mean undiscounted return plus per-episode returns, deterministic per seed.

    The policy is queried in deterministic mode (mean action, no exploration
    noise); each episode gets its own seed stream derived from ``seed``.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    returns = np.array([
        rollout_return(env, policy, np.random.default_rng([int(seed), i]))
        for i in range(episodes)
    ])
    return float(returns.mean()), returns


__all__ = [
    "make_env", "evaluate_policy", "rollout_return", "wrap_angle",
    "PendulumEnv", "PointNavEnv", "ChainEnv",
    "PendulumController", "PointNavController",
    "RandomPolicy", "ZeroPolicy", "ConstantPolicy",
    "TabularMdp", "chain_mdp", "exact_policy_eval", "bellman_residual", "value_iteration",
]
