"""Behavior cloning of a squashed-Gaussian actor.

Maximizes dataset log-likelihood with a small entropy bonus so the cloned
distribution does not collapse to a needle; a collapsed actor would make the
later alignment phase numerically fragile.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..datasets import OfflineDataset
from ..nn import Adam
from ..nn.gaussian import log_prob
from ..policies import GaussianPolicy
from ..updates import TrainingDiverged, atanh_actions, bc_gradient
from .artifact import OfflineArtifact, config_digest


@dataclass
class BcConfig:
    steps: int = 5_000
    batch_size: int = 256
    lr: float = 3e-4
    entropy_weight: float = 1e-3
    hidden: tuple = (256, 256)
    holdout_frac: float = 0.1
    dtype: str = "float64"
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1 or self.batch_size < 1 or self.lr <= 0:
            raise ValueError("invalid BC config")


def train_bc(ds: OfflineDataset, cfg: BcConfig) -> OfflineArtifact:
    if len(ds) == 0:
        raise ValueError("dataset is empty")
    rng = np.random.default_rng(cfg.seed)
    actor = GaussianPolicy(ds.obs_dim, ds.act_dim, cfg.hidden, rng=rng, dtype=cfg.dtype)
    opt = Adam(actor.net.parameters(), lr=cfg.lr)

    perm = rng.permutation(len(ds))
    n_hold = int(len(ds) * cfg.holdout_frac)
    hold_idx, train_idx = perm[:n_hold], perm[n_hold:]
    if train_idx.size == 0:
        train_idx = perm

    for step in range(cfg.steps):
        idx = train_idx[rng.integers(0, train_idx.size, size=min(cfg.batch_size, train_idx.size))]
        batch = ds.batch(idx)
        grads, loss, _ = bc_gradient(actor, batch.obs, atanh_actions(batch.act),
                                     cfg.entropy_weight)
        if not np.isfinite(loss):
            raise TrainingDiverged(f"bc loss diverged at step {step}")
        opt.step(actor.net.parameters(), grads)

    info = {"holdout_log_likelihood": None, "entropy": None}
    head = actor.head(ds.observations.astype(np.float64))
    info["entropy"] = float(np.mean(head.entropy()))
    if hold_idx.size:
        hb = ds.batch(hold_idx)
        info["holdout_log_likelihood"] = float(np.mean(actor.log_prob(hb.obs, hb.act)))
    return OfflineArtifact("bc", actor, None, config_digest(cfg), info)
