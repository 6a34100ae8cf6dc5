"""Small tabular MDPs and exact evaluation oracles.

These exist to give the neural estimators something to be checked against:
``exact_policy_eval`` solves the policy-evaluation fixed point as a linear
system, and ``value_iteration`` produces the optimal Q table.  ``ChainEnv``
wraps a chain MDP behind the continuous-environment interface (one-hot
states, a scalar action whose sign picks the move) so the full pipeline can
run on a problem where the ground truth is computable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .continuous import _as_rng

MAX_TABULAR_SIZE = 64


@dataclass
class TabularMdp:
    """Finite MDP: transition tensor P[s, a, s'], reward table R[s, a], discount."""

    transitions: np.ndarray
    rewards: np.ndarray
    gamma: float

    def __post_init__(self):
        self.transitions = np.asarray(self.transitions, dtype=np.float64)
        self.rewards = np.asarray(self.rewards, dtype=np.float64)
        s, a, s2 = self.transitions.shape
        if s != s2 or self.rewards.shape != (s, a):
            raise ValueError("transition/reward shapes inconsistent")
        if s > MAX_TABULAR_SIZE or a > MAX_TABULAR_SIZE:
            raise ValueError(f"tabular MDPs are capped at {MAX_TABULAR_SIZE} states/actions")
        row_sums = self.transitions.sum(axis=2)
        if not np.allclose(row_sums, 1.0, atol=1e-9):
            raise ValueError("transition rows must sum to 1 within 1e-9")
        if np.any(np.abs(self.rewards) > 1.0):
            raise ValueError("rewards must lie in [-1, 1]")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0, 1); gamma = 1 makes evaluation singular")

    @property
    def n_states(self) -> int:
        return self.transitions.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transitions.shape[1]


def exact_policy_eval(mdp: TabularMdp, policy: np.ndarray) -> np.ndarray:
    """Exact Q table for a stochastic policy: solves Q = R + gamma * P Pi Q.

    ``policy`` is (n_states, n_actions) with rows summing to 1.  The solve is
    a dense linear system over state-action pairs; the residual of the
    returned table is below 1e-10 by construction.
    """
    policy = np.asarray(policy, dtype=np.float64)
    s, a = mdp.n_states, mdp.n_actions
    if policy.shape != (s, a) or not np.allclose(policy.sum(axis=1), 1.0, atol=1e-9):
        raise ValueError("policy must be (n_states, n_actions) with rows summing to 1")
    # M[(s,a),(s',a')] = P[s,a,s'] * pi(a'|s')
    m = np.einsum("ijk,kl->ijkl", mdp.transitions, policy).reshape(s * a, s * a)
    q = np.linalg.solve(np.eye(s * a) - mdp.gamma * m, mdp.rewards.reshape(-1))
    return q.reshape(s, a)


def bellman_residual(mdp: TabularMdp, policy: np.ndarray, q: np.ndarray) -> float:
    """Sup-norm of Q - (R + gamma * P Pi Q)."""
    v = (policy * q).sum(axis=1)
    backup = mdp.rewards + mdp.gamma * mdp.transitions @ v
    return float(np.max(np.abs(q - backup)))


def value_iteration(mdp: TabularMdp, tol=1e-12, max_iter=100_000) -> np.ndarray:
    """Optimal Q table by value iteration to sup-norm tolerance ``tol``."""
    q = np.zeros((mdp.n_states, mdp.n_actions))
    for _ in range(max_iter):
        nxt = mdp.rewards + mdp.gamma * mdp.transitions @ q.max(axis=1)
        if np.max(np.abs(nxt - q)) < tol:
            return nxt
        q = nxt
    return q


def chain_mdp(n_states: int, gamma: float = 0.95, distractor: float = 0.01) -> TabularMdp:
    """Deterministic chain: move left/right, goal absorbs at the right end.

    Reaching the last state pays 1; a small self-loop reward ``distractor``
    on (state 0, left) gives greedy learners something to get wrong.  The
    default discount is 0.95 (not the global 0.99) so action values along the
    chain are well separated at desk scale.
    """
    p = np.zeros((n_states, 2, n_states))
    r = np.zeros((n_states, 2))
    goal = n_states - 1
    for s in range(n_states):
        if s == goal:
            p[s, :, s] = 1.0
            continue
        p[s, 0, max(s - 1, 0)] = 1.0
        p[s, 1, s + 1] = 1.0
    r[goal - 1, 1] = 1.0
    r[0, 0] = distractor
    return TabularMdp(p, r, gamma)


class ChainEnv:
    """Chain MDP behind the continuous interface: one-hot states, scalar action.

    Actions from [-1, 1] map to {left, right} by sign; episodes start at
    state 0 and end at the absorbing goal state.
    """

    act_dim = 1

    def __init__(self, n_states=8, gamma=0.95, distractor=0.01):
        self.mdp = chain_mdp(n_states, gamma, distractor)
        self.n_states = n_states
        self.env_id = f"chain-{n_states}"
        self.obs_dim = n_states
        self.horizon = 4 * n_states
        self.gamma = gamma

    def one_hot(self, s: int) -> np.ndarray:
        v = np.zeros(self.n_states)
        v[s] = 1.0
        return v

    @staticmethod
    def state_index(obs) -> int:
        return int(np.argmax(obs))

    @staticmethod
    def discrete_action(action) -> int:
        return 1 if float(np.asarray(action).reshape(-1)[0]) >= 0.0 else 0

    def encode_action(self, a_idx: int) -> np.ndarray:
        return np.array([0.5 if a_idx == 1 else -0.5])

    def reset(self, seed_or_rng=0):
        _as_rng(seed_or_rng)  # accepted for interface symmetry; the start is fixed
        return self.one_hot(0)

    def step(self, state, action):
        s = self.state_index(state)
        a = self.discrete_action(action)
        nxt = int(np.argmax(self.mdp.transitions[s, a]))
        reward = float(self.mdp.rewards[s, a])
        done = nxt == self.n_states - 1
        return self.one_hot(nxt), reward, done
