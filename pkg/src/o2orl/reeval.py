"""Policy re-evaluation: rebuild an optimistic critic for a frozen offline actor.

Value-regularized offline training leaves a pessimistic critic behind; before
online fine-tuning we discard it and regress a *fresh* critic onto online-style
Bellman targets for the fixed offline policy (fitted Q-evaluation).  For the
stochastic path the target is the soft backup with temperature ``alpha``; for
the deterministic path it is the clipped double-Q target with smoothing noise.
The on-policy path instead fits a state-value network to trajectory
returns-to-go, which approximates the behavior value function rather than the
actor's own (the auxiliary advantage in the alignment module compensates).

The actor is never mutated here; training stops early once the Bellman
residual on a fixed probe batch stops improving.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import OfflineDataset, compute_returns
from .nn import Adam
from .nn.core import polyak_update
from .nn.gaussian import log_prob_pre_squash
from .policies import DeterministicPolicy, GaussianPolicy, TwinCritic, ValueCritic
from .updates import TrainingDiverged, critic_step, perturbed_target_action


@dataclass
class ReevalConfig:
    steps: int = 50_000
    polyak: float = 0.005
    batch_size: int = 256
    alpha: float = 0.0
    gamma: float = 0.99
    lr: float = 3e-4
    hidden: tuple = (256, 256)
    dtype: str = "float64"
    reward_shift: float = 0.0
    policy_noise: float = 0.2
    noise_clip: float = 0.5
    check_every: int = 1000
    plateau_patience: int = 5
    plateau_tol: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("iteration count must be >= 1")
        if not 0.0 < self.polyak <= 1.0:
            raise ValueError("polyak rate must be in (0, 1]")
        if not 0.0 <= self.gamma < 1.0 or self.alpha < 0:
            raise ValueError("invalid ReevalConfig")


def _fqe(ds, make_targets, cfg) -> tuple[TwinCritic, dict]:
    """Shared FQE loop: fresh twin critic regressed onto caller-built targets."""
    rng = np.random.default_rng(cfg.seed)
    critic = TwinCritic(ds.obs_dim, ds.act_dim, cfg.hidden, rng=rng, dtype=cfg.dtype)
    target = critic.copy()
    opts = [Adam(n.parameters(), lr=cfg.lr) for n in critic.nets]

    probe = ds.batch(rng.choice(len(ds), size=min(1024, len(ds)), replace=False))
    best = np.inf
    stale = 0
    history = []
    steps_run = 0
    for step in range(cfg.steps):
        idx = rng.integers(0, len(ds), size=min(cfg.batch_size, len(ds)))
        batch = ds.batch(idx)
        mse = critic_step(critic, opts, batch.obs, batch.act,
                          make_targets(batch, target, rng))
        if not np.isfinite(mse):
            raise TrainingDiverged(f"FQE diverged at step {step}")
        for t, s in zip(target.nets, critic.nets):
            polyak_update(t, s, cfg.polyak)
        steps_run = step + 1
        if (step + 1) % cfg.check_every == 0:
            y = make_targets(probe, target, np.random.default_rng(cfg.seed + 1))
            q1, q2 = critic.q_pair(probe.obs, probe.act)
            residual = float(np.mean((q1 - y) ** 2 + (q2 - y) ** 2) / 2.0)
            history.append(residual)
            if residual < best * (1.0 - cfg.plateau_tol):
                best = residual
                stale = 0
            else:
                stale += 1
                if stale >= cfg.plateau_patience:
                    break
    return critic, {"steps_run": steps_run, "residuals": history}


def fqe_sac(ds: OfflineDataset, actor: GaussianPolicy, alpha: float,
            cfg: ReevalConfig) -> TwinCritic:
    """Soft fitted Q-evaluation of a frozen stochastic actor.

    Target: r + gamma * (min_i Q_target_i(s', a') - alpha * log pi(a'|s'))
    with a' drawn from the frozen actor.  With ``alpha = 0`` this is plain
    FQE, which is what the tabular-oracle equivalence checks use.
    """
    def make_targets(batch, target, rng):
        head = actor.head(batch.next_obs)
        u = head.mean + head.std * rng.standard_normal(head.mean.shape)
        lp = log_prob_pre_squash(head, u)
        q_next = target.q_min(batch.next_obs, np.tanh(u))
        return (batch.rew + cfg.reward_shift) \
            + (1.0 - batch.done) * cfg.gamma * (q_next - alpha * lp)

    critic, info = _fqe(ds, make_targets, cfg)
    critic.reeval_info = info
    return critic


def fqe_td3(ds: OfflineDataset, actor: DeterministicPolicy,
            cfg: ReevalConfig) -> TwinCritic:
    """Fitted Q-evaluation of a frozen deterministic actor with smoothing noise.

    Target: r + gamma * min_i Q_target_i(s', pi(s') + eps), with eps clipped
    Gaussian noise (std ``policy_noise``, clip ``noise_clip``).
    """
    def make_targets(batch, target, rng):
        if cfg.policy_noise > 0:
            a2 = perturbed_target_action(actor, batch.next_obs, rng,
                                         cfg.policy_noise, cfg.noise_clip)
        else:
            a2 = actor.act(batch.next_obs)
        q_next = target.q_min(batch.next_obs, a2)
        return (batch.rew + cfg.reward_shift) + (1.0 - batch.done) * cfg.gamma * q_next

    critic, info = _fqe(ds, make_targets, cfg)
    critic.reeval_info = info
    return critic


def fit_returns(ds: OfflineDataset, cfg: ReevalConfig) -> ValueCritic:
    """Regress V(s) onto discounted returns-to-go of the offline trajectories.

    The result approximates the behavior policy's value function, not the
    actor's; callers must treat it accordingly.
    """
    rng = np.random.default_rng(cfg.seed)
    returns = compute_returns(ds, cfg.gamma)
    critic = ValueCritic(ds.obs_dim, cfg.hidden, rng=rng, dtype=cfg.dtype)
    opt = Adam(critic.net.parameters(), lr=cfg.lr)

    n_hold = max(1, len(ds) // 10)
    perm = rng.permutation(len(ds))
    hold_idx, train_idx = perm[:n_hold], perm[n_hold:]
    if train_idx.size == 0:
        train_idx = perm
    obs = ds.observations.astype(np.float64)

    for step in range(cfg.steps):
        idx = train_idx[rng.integers(0, train_idx.size, size=min(cfg.batch_size, train_idx.size))]
        x = obs[idx]
        y = returns[idx]
        v, cache = critic.net.forward(x, return_cache=True)
        err = v[:, 0] - y
        mse = float(np.mean(err * err))
        if not np.isfinite(mse):
            raise TrainingDiverged(f"return fitting diverged at step {step}")
        grads, _ = critic.net.backward(cache, (2.0 * err / err.size)[:, None])
        opt.step(critic.net.parameters(), grads)

    train_mse = float(np.mean((critic.value(obs[train_idx[:2048]])
                               - returns[train_idx[:2048]]) ** 2))
    hold_mse = float(np.mean((critic.value(obs[hold_idx]) - returns[hold_idx]) ** 2))
    critic.reeval_info = {"train_mse": train_mse, "holdout_mse": hold_mse}
    return critic
