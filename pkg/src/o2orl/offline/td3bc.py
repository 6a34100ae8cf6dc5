"""TD3+BC offline training: online-style critic, behavior-constrained actor.

The critic follows the standard clipped double-Q target with target-policy
smoothing; the actor maximizes Q while being pulled toward dataset actions,
with the Q term normalized by the batch mean |Q| as in the original recipe.
Rewards are shifted by ``reward_shift`` (default -1) at training time so the
learned Q surface is strictly negative, which is what the later TD3
alignment's sign rule expects.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..datasets import OfflineDataset
from ..nn import Adam
from ..nn.core import polyak_update
from ..policies import DeterministicPolicy, TwinCritic
from ..updates import TrainingDiverged, critic_step, perturbed_target_action
from .artifact import OfflineArtifact, config_digest


@dataclass
class Td3BcConfig:
    steps: int = 15_000
    batch_size: int = 256
    lr: float = 3e-4
    gamma: float = 0.99
    polyak: float = 0.005
    policy_noise: float = 0.2
    noise_clip: float = 0.5
    policy_delay: int = 2
    bc_alpha: float = 2.5
    reward_shift: float = -1.0
    hidden: tuple = (256, 256)
    holdout_frac: float = 0.1
    dtype: str = "float64"
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.gamma < 1 or not 0 < self.polyak <= 1:
            raise ValueError("invalid TD3+BC config")


def train_td3_bc(ds: OfflineDataset, cfg: Td3BcConfig) -> OfflineArtifact:
    if len(ds) == 0:
        raise ValueError("dataset is empty")
    rng = np.random.default_rng(cfg.seed)
    actor = DeterministicPolicy(ds.obs_dim, ds.act_dim, cfg.hidden, rng=rng, dtype=cfg.dtype)
    critic = TwinCritic(ds.obs_dim, ds.act_dim, cfg.hidden, rng=rng, dtype=cfg.dtype)
    actor_target = actor.copy()
    critic_target = critic.copy()
    actor_opt = Adam(actor.net.parameters(), lr=cfg.lr)
    critic_opts = [Adam(n.parameters(), lr=cfg.lr) for n in critic.nets]

    perm = rng.permutation(len(ds))
    n_hold = int(len(ds) * cfg.holdout_frac)
    hold_idx, train_idx = perm[:n_hold], perm[n_hold:]
    if train_idx.size == 0:
        train_idx = perm

    def targets(batch):
        a2 = perturbed_target_action(actor_target, batch.next_obs, rng,
                                     cfg.policy_noise, cfg.noise_clip)
        q_next = critic_target.q_min(batch.next_obs, a2)
        return (batch.rew + cfg.reward_shift) + (1.0 - batch.done) * cfg.gamma * q_next

    train_mse = 0.0
    for step in range(cfg.steps):
        idx = train_idx[rng.integers(0, train_idx.size, size=min(cfg.batch_size, train_idx.size))]
        batch = ds.batch(idx)
        train_mse = critic_step(critic, critic_opts, batch.obs, batch.act, targets(batch))
        if not np.isfinite(train_mse):
            raise TrainingDiverged(f"td3bc critic diverged at step {step}")

        if step % cfg.policy_delay == 0:
            act, cache = actor.act_with_cache(batch.obs)
            q1, g_qa = critic.action_grad_q1(batch.obs, act)
            lam = cfg.bc_alpha / (float(np.mean(np.abs(q1))) + 1e-8)
            n, a_dim = act.shape
            d_act = (-lam * g_qa + 2.0 * (act - batch.act) / a_dim) / n
            grads = actor.backward(cache, act, d_act)
            actor_opt.step(actor.net.parameters(), grads)
            polyak_update(actor_target.net, actor.net, cfg.polyak)

        for t, s in zip(critic_target.nets, critic.nets):
            polyak_update(t, s, cfg.polyak)

    info = {"train_bellman_mse": float(train_mse), "holdout_bellman_mse": None,
            "reward_shift": cfg.reward_shift}
    if hold_idx.size:
        hb = ds.batch(hold_idx)
        y = targets(hb)
        q1, q2 = critic.q_pair(hb.obs, hb.act)
        info["holdout_bellman_mse"] = float(np.mean((q1 - y) ** 2 + (q2 - y) ** 2) / 2.0)
    return OfflineArtifact("td3bc", actor, critic, config_digest(cfg), info)
