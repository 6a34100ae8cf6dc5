"""Shared configuration and plumbing for the online fine-tuning loops."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..envs import evaluate_policy
from ..metrics import MetricsRow, MetricsWriter
from ..updates import TrainingDiverged


class NumericalAbort(TrainingDiverged):
    """Training hit non-finite values; carries the last good checkpoint."""

    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint


@dataclass
class FinetuneConfig:
    steps: int = 20_000
    batch_size: int = 256
    gamma: float = 0.99
    lr: float = 3e-4
    polyak: float = 0.005
    utd: int = 1
    eval_every: int = 1_000
    eval_episodes: int = 10
    buffer_capacity: int = 100_000
    tau_kind: object = "sac-medium"
    tau_horizon: int | None = None
    lam_init: float = 2.0
    lam_lr: float = 3e-4
    ref_mode: str = "best"
    ref_interval: int = 1000
    alpha_init: float = 0.2
    alpha_lr: float = 3e-4
    target_entropy: float | None = None
    exploration_noise: float = 0.1
    policy_delay: int = 2
    reward_shift: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1 or self.utd < 1:
            raise ValueError("steps and utd must be >= 1")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must be in (0, 1)")

    @property
    def horizon(self) -> int:
        return self.tau_horizon if self.tau_horizon is not None else self.steps


class EvalHook:
    """Periodic deterministic evaluation plus metrics row assembly."""

    def __init__(self, env, cfg: FinetuneConfig, probe):
        self.env = env
        self.cfg = cfg
        self.probe = probe
        self.writer = MetricsWriter()
        self.eval_seed = cfg.seed * 7919 + 17

    def run(self, step, actor, critic_q_mean=None, lam=None, tau=None,
            penalty_mean=None, alpha=None, beta=None):
        mean, returns = evaluate_policy(self.env, actor, self.cfg.eval_episodes,
                                        seed=self.eval_seed)
        self.writer.add(MetricsRow(
            step=step,
            eval_return_mean=mean,
            eval_return_std=float(np.std(returns)),
            lam=lam, tau=tau, penalty_mean=penalty_mean,
            q_mean_dataset=critic_q_mean, alpha=alpha, beta=beta,
        ))
        return mean
