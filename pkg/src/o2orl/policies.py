"""Actors and critics built on the minimal network core.

Four parameterizations cover every algorithm in the toolkit:

* ``GaussianPolicy`` -- squashed diagonal Gaussian actor (SAC/PPO paths and
  behavior cloning).
* ``DeterministicPolicy`` -- tanh deterministic actor (TD3 paths).
* ``TwinCritic`` -- two independent Q networks over (state, action).
* ``ValueCritic`` -- state-value network (PPO path).

Critics default to layer normalization on hidden layers, actors do not; the
normalized critics are what keep re-evaluation from diverging, while actors
stay plain so their checkpoints match common practice.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .nn.core import Mlp
from .nn.gaussian import (
    GaussianHead,
    LOG_STD_MAX,
    LOG_STD_MIN,
    log_prob,
    log_prob_pre_squash,
    mean_action,
)
from .nn import checkpoint as ckpt

DEFAULT_HIDDEN = (256, 256)


def _widths(in_dim, hidden, out_dim):
    return [int(in_dim), *[int(h) for h in hidden], int(out_dim)]


class GaussianPolicy:
    """Squashed-Gaussian actor: one MLP emitting per-dimension mean and log-std."""

    kind = "gaussian_policy"

    def __init__(self, obs_dim, act_dim, hidden=DEFAULT_HIDDEN, activation="relu",
                 layer_norm=False, rng=None, dtype=np.float64):
        self.obs_dim = int(obs_dim)
        self.act_dim = int(act_dim)
        self.net = Mlp(_widths(obs_dim, hidden, 2 * act_dim), activation, layer_norm, rng,
                       dtype=dtype)

    def head(self, obs) -> GaussianHead:
        out = self.net.forward(obs)
        mean, raw = out[..., : self.act_dim], out[..., self.act_dim :]
        return GaussianHead(mean, raw)

    def head_with_cache(self, obs):
        """Head plus the backprop cache and the clamp mask for the log-std outputs."""
        out, cache = self.net.forward(obs, return_cache=True)
        mean, raw = out[..., : self.act_dim], out[..., self.act_dim :]
        mask = (raw > LOG_STD_MIN) & (raw < LOG_STD_MAX)
        return GaussianHead(mean, raw), cache, mask

    def backward(self, cache, mask, d_mean, d_log_std):
        """Gradients w.r.t. net parameters from head-level gradients.

        ``d_log_std`` is zeroed where the raw output was clamped.
        """
        d_out = np.concatenate([d_mean, d_log_std * mask], axis=-1)
        grads, _ = self.net.backward(cache, d_out)
        return grads

    def act(self, obs, rng=None, deterministic=False):
        head = self.head(obs)
        if deterministic:
            return mean_action(head)
        if rng is None:
            raise ValueError("stochastic action requires an rng")
        u = head.mean + head.std * rng.standard_normal(head.mean.shape)
        return np.tanh(u)

    def log_prob(self, obs, actions):
        return log_prob(self.head(obs), actions)

    def log_prob_of_mean(self, obs):
        """Log-likelihood of the policy's own deterministic action."""
        head = self.head(obs)
        return log_prob_pre_squash(head, head.mean)

    def copy(self) -> "GaussianPolicy":
        other = GaussianPolicy.__new__(GaussianPolicy)
        other.obs_dim, other.act_dim = self.obs_dim, self.act_dim
        other.net = self.net.copy()
        return other

    def save(self, path, seed=None, extra=None):
        meta = {"obs_dim": self.obs_dim, "act_dim": self.act_dim}
        meta.update(extra or {})
        ckpt.save_nets(path, self.kind, [self.net], extra=meta, seed=seed)

    @classmethod
    def load(cls, path) -> "GaussianPolicy":
        header, nets = ckpt.load_nets(path)
        if header["kind"] != cls.kind:
            raise ckpt.CheckpointError(f"{path}: expected {cls.kind}, got {header['kind']}")
        obj = cls.__new__(cls)
        obj.obs_dim = header["extra"]["obs_dim"]
        obj.act_dim = header["extra"]["act_dim"]
        obj.net = nets[0]
        return obj


class DeterministicPolicy:
    """Tanh deterministic actor: action = tanh(mlp(obs))."""

    kind = "deterministic_policy"

    def __init__(self, obs_dim, act_dim, hidden=DEFAULT_HIDDEN, activation="relu",
                 layer_norm=False, rng=None, dtype=np.float64):
        self.obs_dim = int(obs_dim)
        self.act_dim = int(act_dim)
        self.net = Mlp(_widths(obs_dim, hidden, act_dim), activation, layer_norm, rng,
                       dtype=dtype)

    def act(self, obs, rng=None, deterministic=True):
        return np.tanh(self.net.forward(obs))

    def act_with_cache(self, obs):
        out, cache = self.net.forward(obs, return_cache=True)
        return np.tanh(out), cache

    def backward(self, cache, actions, d_actions):
        """Chain d loss/d action through the output tanh into the net."""
        grads, _ = self.net.backward(cache, d_actions * (1.0 - actions * actions))
        return grads

    def copy(self) -> "DeterministicPolicy":
        other = DeterministicPolicy.__new__(DeterministicPolicy)
        other.obs_dim, other.act_dim = self.obs_dim, self.act_dim
        other.net = self.net.copy()
        return other

    def save(self, path, seed=None, extra=None):
        meta = {"obs_dim": self.obs_dim, "act_dim": self.act_dim}
        meta.update(extra or {})
        ckpt.save_nets(path, self.kind, [self.net], extra=meta, seed=seed)

    @classmethod
    def load(cls, path) -> "DeterministicPolicy":
        header, nets = ckpt.load_nets(path)
        if header["kind"] != cls.kind:
            raise ckpt.CheckpointError(f"{path}: expected {cls.kind}, got {header['kind']}")
        obj = cls.__new__(cls)
        obj.obs_dim = header["extra"]["obs_dim"]
        obj.act_dim = header["extra"]["act_dim"]
        obj.net = nets[0]
        return obj


class TwinCritic:
    """Double Q-network over concatenated (state, action)."""

    kind = "twin_critic"

    def __init__(self, obs_dim, act_dim, hidden=DEFAULT_HIDDEN, activation="relu",
                 layer_norm=True, rng=None, dtype=np.float64):
        self.obs_dim = int(obs_dim)
        self.act_dim = int(act_dim)
        if rng is None:
            rng = np.random.default_rng(0)
        widths = _widths(obs_dim + act_dim, hidden, 1)
        self.q1 = Mlp(widths, activation, layer_norm, rng, dtype=dtype)
        self.q2 = Mlp(widths, activation, layer_norm, rng, dtype=dtype)

    @property
    def nets(self):
        return (self.q1, self.q2)

    @staticmethod
    def _join(obs, act):
        obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
        act = np.atleast_2d(np.asarray(act, dtype=np.float64))
        return np.concatenate([obs, act], axis=-1)

    def q_pair(self, obs, act):
        x = self._join(obs, act)
        return self.q1.forward(x)[:, 0], self.q2.forward(x)[:, 0]

    def q_min(self, obs, act):
        a, b = self.q_pair(obs, act)
        return np.minimum(a, b)

    def forward_cached(self, obs, act):
        """Both Q values with caches, for regression updates."""
        x = self._join(obs, act)
        v1, c1 = self.q1.forward(x, return_cache=True)
        v2, c2 = self.q2.forward(x, return_cache=True)
        return (v1[:, 0], c1), (v2[:, 0], c2)

    def action_grad_min(self, obs, act):
        """d min(q1, q2) / d action, routing each row through its argmin net."""
        x = self._join(obs, act)
        v1, c1 = self.q1.forward(x, return_cache=True)
        v2, c2 = self.q2.forward(x, return_cache=True)
        pick1 = (v1[:, 0] <= v2[:, 0]).astype(np.float64)
        _, dx1 = self.q1.backward(c1, pick1[:, None])
        _, dx2 = self.q2.backward(c2, (1.0 - pick1)[:, None])
        dact = (dx1 + dx2)[:, self.obs_dim :]
        return np.minimum(v1[:, 0], v2[:, 0]), dact

    def action_grad_q1(self, obs, act):
        """d q1 / d action (TD3-style actor updates use the first twin)."""
        x = self._join(obs, act)
        v1, c1 = self.q1.forward(x, return_cache=True)
        _, dx = self.q1.backward(c1, np.ones((x.shape[0], 1)))
        return v1[:, 0], dx[:, self.obs_dim :]

    def copy(self) -> "TwinCritic":
        other = TwinCritic.__new__(TwinCritic)
        other.obs_dim, other.act_dim = self.obs_dim, self.act_dim
        other.q1, other.q2 = self.q1.copy(), self.q2.copy()
        return other

    def save(self, path, seed=None, extra=None):
        meta = {"obs_dim": self.obs_dim, "act_dim": self.act_dim}
        meta.update(extra or {})
        ckpt.save_nets(path, self.kind, [self.q1, self.q2], extra=meta, seed=seed)

    @classmethod
    def load(cls, path) -> "TwinCritic":
        header, nets = ckpt.load_nets(path)
        if header["kind"] != cls.kind:
            raise ckpt.CheckpointError(f"{path}: expected {cls.kind}, got {header['kind']}")
        obj = cls.__new__(cls)
        obj.obs_dim = header["extra"]["obs_dim"]
        obj.act_dim = header["extra"]["act_dim"]
        obj.q1, obj.q2 = nets
        return obj


class ValueCritic:
    """State-value network V(s)."""

    kind = "value_critic"

    def __init__(self, obs_dim, hidden=DEFAULT_HIDDEN, activation="relu",
                 layer_norm=True, rng=None, dtype=np.float64):
        self.obs_dim = int(obs_dim)
        self.net = Mlp(_widths(obs_dim, hidden, 1), activation, layer_norm, rng, dtype=dtype)

    def value(self, obs):
        return np.atleast_2d(self.net.forward(np.atleast_2d(np.asarray(obs, dtype=np.float64))))[:, 0]

    def copy(self) -> "ValueCritic":
        other = ValueCritic.__new__(ValueCritic)
        other.obs_dim = self.obs_dim
        other.net = self.net.copy()
        return other

    def save(self, path, seed=None, extra=None):
        meta = {"obs_dim": self.obs_dim}
        meta.update(extra or {})
        ckpt.save_nets(path, self.kind, [self.net], extra=meta, seed=seed)

    @classmethod
    def load(cls, path) -> "ValueCritic":
        header, nets = ckpt.load_nets(path)
        if header["kind"] != cls.kind:
            raise ckpt.CheckpointError(f"{path}: expected {cls.kind}, got {header['kind']}")
        obj = cls.__new__(cls)
        obj.obs_dim = header["extra"]["obs_dim"]
        obj.net = nets[0]
        return obj


def param_checksum(obj) -> str:
    """Stable digest of all parameters; used to assert nets were not mutated."""
    nets = getattr(obj, "nets", None)
    if nets is None:
        nets = [obj.net]
    h = hashlib.sha256()
    for net in nets:
        h.update(net.get_flat().tobytes())
    return h.hexdigest()


def load_actor(path):
    """Load either actor kind from a checkpoint by inspecting its header."""
    header, _ = ckpt.load_nets(path)
    if header["kind"] == GaussianPolicy.kind:
        return GaussianPolicy.load(path)
    if header["kind"] == DeterministicPolicy.kind:
        return DeterministicPolicy.load(path)
    raise ckpt.CheckpointError(f"{path}: not an actor checkpoint ({header['kind']})")
