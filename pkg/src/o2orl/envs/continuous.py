"""Analytic continuous-control environments.

Two desk-scale tasks stand in for the usual physics benchmarks:

* ``PendulumEnv`` -- torque-limited swing-up with a dense quadratic cost
  (state: angle in radians wrapped to [-pi, pi), angular velocity in rad/s).
* ``PointNavEnv`` -- double-integrator navigation to a goal disc with a
  sparse 0/1 reward (state: x, y position and x, y velocity).

Environments are value types: ``step`` is a pure function of (state, action)
and all randomness lives in ``reset``.  Episode length is enforced by the
rollout loops via the ``horizon`` attribute; ``step`` only reports goal
termination.
"""

from __future__ import annotations

import logging

import numpy as np

logger = logging.getLogger(__name__)


def _as_rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def wrap_angle(theta):
    """Wrap to [-pi, pi)."""
    return (theta + np.pi) % (2.0 * np.pi) - np.pi


class PendulumEnv:
    """Swing-up pendulum.

    Dynamics (g=10, m=1, l=1, dt=0.05):

        theta_dd = (3 g / (2 l)) sin(theta) + (3 / (m l^2)) u

    with torque u = 2 * action for action in [-1, 1].  Reward is
    ``-(wrapped_theta^2 + 0.1 * theta_dot^2 + 0.001 * u^2)``, always <= 0.
    theta = 0 is upright (the unstable equilibrium).
    """

    env_id = "pendulum"
    obs_dim = 2
    act_dim = 1
    horizon = 200
    gamma = 0.99

    g = 10.0
    m = 1.0
    length = 1.0
    dt = 0.05
    max_torque = 2.0
    max_speed = 8.0

    def __init__(self):
        self._warned_bounds = False

    def reset(self, seed_or_rng=0):
        rng = _as_rng(seed_or_rng)
        theta = rng.uniform(-np.pi, np.pi)
        theta_dot = rng.uniform(-1.0, 1.0)
        return np.array([theta, theta_dot], dtype=np.float64)

    def _clip_action(self, action):
        a = float(np.asarray(action).reshape(-1)[0])
        if not -1.0 <= a <= 1.0:
            if not self._warned_bounds:
                logger.warning("pendulum action %s out of [-1, 1]; clamping", a)
                self._warned_bounds = True
            a = float(np.clip(a, -1.0, 1.0))
        return a

    def step(self, state, action):
        theta, theta_dot = float(state[0]), float(state[1])
        u = self.max_torque * self._clip_action(action)

        th_wrapped = wrap_angle(theta)
        reward = -(th_wrapped**2 + 0.1 * theta_dot**2 + 0.001 * u**2)

        theta_dd = (3.0 * self.g / (2.0 * self.length)) * np.sin(theta) \
            + (3.0 / (self.m * self.length**2)) * u
        new_dot = np.clip(theta_dot + theta_dd * self.dt, -self.max_speed, self.max_speed)
        new_theta = wrap_angle(theta + new_dot * self.dt)
        return np.array([new_theta, new_dot], dtype=np.float64), float(reward), False


class PointNavEnv:
    """Sparse-reward point navigation on the unit square.

    The agent accelerates a point mass from the start corner to a goal disc;
    reward is 1 exactly when the step ends inside the goal (which also ends
    the episode) and 0 otherwise.
    """

    env_id = "pointnav"
    obs_dim = 4
    act_dim = 2
    horizon = 100
    gamma = 0.99

    dt = 0.1
    accel = 2.0
    max_speed = 1.0
    start_low = np.array([-0.9, -0.9])
    start_high = np.array([-0.7, -0.7])
    goal = np.array([0.7, 0.7])
    goal_radius = 0.15

    def __init__(self):
        self._warned_bounds = False

    def reset(self, seed_or_rng=0):
        rng = _as_rng(seed_or_rng)
        pos = rng.uniform(self.start_low, self.start_high)
        return np.array([pos[0], pos[1], 0.0, 0.0], dtype=np.float64)

    def at_goal(self, state) -> bool:
        return bool(np.linalg.norm(np.asarray(state[:2]) - self.goal) <= self.goal_radius)

    def step(self, state, action):
        a = np.asarray(action, dtype=np.float64).reshape(-1)
        if a.shape[0] != 2:
            raise ValueError(f"pointnav expects 2-dim action, got shape {a.shape}")
        if np.any(np.abs(a) > 1.0):
            if not self._warned_bounds:
                logger.warning("pointnav action %s out of [-1, 1]; clamping", a)
                self._warned_bounds = True
            a = np.clip(a, -1.0, 1.0)
        pos, vel = np.asarray(state[:2], dtype=np.float64), np.asarray(state[2:], dtype=np.float64)
        vel = np.clip(vel + self.accel * a * self.dt, -self.max_speed, self.max_speed)
        pos = np.clip(pos + vel * self.dt, -1.0, 1.0)
        nxt = np.concatenate([pos, vel])
        done = self.at_goal(nxt)
        return nxt, (1.0 if done else 0.0), done


class PendulumController:
    """Scripted energy-shaping swing-up controller used as a behavior policy.

    ``strength`` in [0, 1] scales the commanded torque; 1.0 is a competent
    expert, values around 0.5 give a mediocre controller whose rollouts fill
    the role of a medium-quality dataset.
    """

    def __init__(self, strength=1.0):
        self.strength = float(strength)

    # commanded torque tops out below the env limit so recorded actions stay
    # strictly inside (-1, 1); saturated data makes poor cloning targets
    max_cmd = 0.95

    def act(self, obs, rng=None, deterministic=True):
        theta = wrap_angle(float(obs[0]))
        theta_dot = float(obs[1])
        # Energy relative to the upright (theta = 0): J = m l^2 / 3, U = m g (l/2) cos(theta)
        energy = 0.5 * (1.0 / 3.0) * theta_dot**2 + 5.0 * np.cos(theta)
        if np.cos(theta) > 0.85 and abs(theta_dot) < 2.5:
            u = -8.0 * theta - 2.0 * theta_dot
        else:
            gap = 5.0 - energy
            direction = theta_dot if abs(theta_dot) > 1e-3 else 1.0
            u = 4.0 * np.tanh(4.0 * gap * np.sign(direction))
        a = self.max_cmd * np.tanh(self.strength * u / 2.0)
        return np.array([a], dtype=np.float64)


class PointNavController:
    """Scripted PD navigation toward the goal disc."""

    def __init__(self, strength=1.0, kp=4.0, kd=2.0):
        self.strength = float(strength)
        self.kp = kp
        self.kd = kd

    def act(self, obs, rng=None, deterministic=True):
        pos, vel = np.asarray(obs[:2]), np.asarray(obs[2:])
        a = self.kp * (PointNavEnv.goal - pos) - self.kd * vel
        return np.clip(self.strength * a, -1.0, 1.0)


class RandomPolicy:
    """Uniform random actions; ignores the deterministic flag by design."""

    def __init__(self, act_dim):
        self.act_dim = int(act_dim)

    def act(self, obs, rng=None, deterministic=False):
        if rng is None:
            raise ValueError("RandomPolicy.act requires an rng")
        return rng.uniform(-1.0, 1.0, size=self.act_dim)


class ZeroPolicy:
    """Always outputs the zero action."""

    def __init__(self, act_dim):
        self.act_dim = int(act_dim)

    def act(self, obs, rng=None, deterministic=True):
        return np.zeros(self.act_dim)


class ConstantPolicy:
    """Always outputs a fixed action vector."""

    def __init__(self, action):
        self.action = np.asarray(action, dtype=np.float64)

    def act(self, obs, rng=None, deterministic=True):
        return self.action.copy()
