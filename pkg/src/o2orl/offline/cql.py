"""Conservative Q-learning, reduced to its load-bearing part.

The critic minimizes Bellman error plus a pessimism penalty,
``alpha_cql * (logsumexp_a Q(s, a) - Q(s, a_data))`` with the logsumexp taken
over uniformly sampled actions, which pushes Q down everywhere except on
dataset actions.  The actor is a squashed Gaussian updated the SAC way with a
fixed temperature.  Setting ``alpha_cql = 0`` turns the penalty off and
leaves plain SAC-style offline training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..datasets import OfflineDataset
from ..nn import Adam
from ..nn.core import polyak_update
from ..nn.gaussian import log_prob_pre_squash
from ..policies import GaussianPolicy, TwinCritic
from ..updates import TrainingDiverged, sac_actor_step, sample_policy
from .artifact import OfflineArtifact, config_digest


@dataclass
class CqlConfig:
    steps: int = 15_000
    batch_size: int = 256
    lr: float = 3e-4
    gamma: float = 0.99
    polyak: float = 0.005
    alpha_cql: float = 1.0
    n_penalty_actions: int = 10
    sac_alpha: float = 0.2
    hidden: tuple = (256, 256)
    holdout_frac: float = 0.1
    dtype: str = "float64"
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.gamma < 1 or self.alpha_cql < 0 or self.n_penalty_actions < 1:
            raise ValueError("invalid CQL config")


def _conservative_critic_step(critic, opts, batch, targets, alpha_cql, n_actions, rng):
    """Bellman regression plus the logsumexp pessimism penalty, per twin.

    Returns (bellman mse, mean penalty value).  Sampled actions are shared
    across twins so their penalties see the same support.
    """
    n, a_dim = batch.act.shape
    sampled = rng.uniform(-1.0, 1.0, size=(n, n_actions, a_dim))
    tiled_obs = np.repeat(batch.obs, n_actions, axis=0)
    flat_act = sampled.reshape(n * n_actions, a_dim)

    mse_total = penalty_total = 0.0
    for net, opt in zip(critic.nets, opts):
        x_data = critic._join(batch.obs, batch.act)
        q_data, c_data = net.forward(x_data, return_cache=True)
        q_data = q_data[:, 0]
        err = q_data - targets
        mse_total += float(np.mean(err * err))

        x_s = critic._join(tiled_obs, flat_act)
        q_s, c_s = net.forward(x_s, return_cache=True)
        qm = q_s[:, 0].reshape(n, n_actions)
        m = qm.max(axis=1, keepdims=True)
        lse = (m[:, 0] + np.log(np.exp(qm - m).sum(axis=1)))
        softmax = np.exp(qm - lse[:, None])
        penalty_total += float(np.mean(lse - q_data))

        # d/dtheta [mean(2|err|^2)/... + alpha*(lse - q_data)] assembled from
        # three backward passes sharing the two forward caches.
        g_bell_pen, _ = net.backward(c_data, ((2.0 * err - alpha_cql) / n)[:, None])
        g_lse, _ = net.backward(c_s, (alpha_cql * softmax / n).reshape(-1, 1))
        grads = [a + b for a, b in zip(g_bell_pen, g_lse)]
        opt.step(net.parameters(), grads)
    return mse_total / 2.0, penalty_total / 2.0


def train_cql_lite(ds: OfflineDataset, cfg: CqlConfig) -> OfflineArtifact:
    if len(ds) == 0:
        raise ValueError("dataset is empty")
    rng = np.random.default_rng(cfg.seed)
    actor = GaussianPolicy(ds.obs_dim, ds.act_dim, cfg.hidden, rng=rng, dtype=cfg.dtype)
    critic = TwinCritic(ds.obs_dim, ds.act_dim, cfg.hidden, rng=rng, dtype=cfg.dtype)
    critic_target = critic.copy()
    actor_opt = Adam(actor.net.parameters(), lr=cfg.lr)
    critic_opts = [Adam(n.parameters(), lr=cfg.lr) for n in critic.nets]

    perm = rng.permutation(len(ds))
    n_hold = int(len(ds) * cfg.holdout_frac)
    hold_idx, train_idx = perm[:n_hold], perm[n_hold:]
    if train_idx.size == 0:
        train_idx = perm

    def targets(batch):
        head = actor.head(batch.next_obs)
        u = head.mean + head.std * rng.standard_normal(head.mean.shape)
        a2 = np.tanh(u)
        lp = log_prob_pre_squash(head, u)
        q_next = critic_target.q_min(batch.next_obs, a2)
        return batch.rew + (1.0 - batch.done) * cfg.gamma * (q_next - cfg.sac_alpha * lp)

    mse = penalty = 0.0
    for step in range(cfg.steps):
        idx = train_idx[rng.integers(0, train_idx.size, size=min(cfg.batch_size, train_idx.size))]
        batch = ds.batch(idx)
        mse, penalty = _conservative_critic_step(
            critic, critic_opts, batch, targets(batch),
            cfg.alpha_cql, cfg.n_penalty_actions, rng)
        if not (np.isfinite(mse) and np.isfinite(penalty)):
            raise TrainingDiverged(f"cql critic diverged at step {step}")
        sac_actor_step(actor, actor_opt, critic, batch.obs, cfg.sac_alpha, rng)
        for t, s in zip(critic_target.nets, critic.nets):
            polyak_update(t, s, cfg.polyak)

    info = {"train_bellman_mse": float(mse), "mean_penalty": float(penalty),
            "holdout_bellman_mse": None, "sac_alpha": cfg.sac_alpha}
    if hold_idx.size:
        hb = ds.batch(hold_idx)
        y = targets(hb)
        q1, q2 = critic.q_pair(hb.obs, hb.act)
        info["holdout_bellman_mse"] = float(np.mean((q1 - y) ** 2 + (q2 - y) ** 2) / 2.0)
    return OfflineArtifact("cql", actor, critic, config_digest(cfg), info)
