"""Alignment training loops: calibrate a critic to its offline actor.

Both loops alternate a standard policy-improvement step (which surfaces the
actions the critic currently overestimates) with a critic step that regresses
those actions onto the closed-form calibration target while pinning the
anchor action's value (the retain term).  Training stops early once a rank
audit says the critic prefers the actor's actions nearly everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..datasets import OfflineDataset
from ..nn import Adam
from ..nn.core import polyak_update
from ..nn.gaussian import log_prob_pre_squash
from ..policies import DeterministicPolicy, GaussianPolicy, TwinCritic
from ..updates import (
    sac_actor_step,
    td3_actor_step,
    twin_regression_with_anchor,
)
from .targets import o2sac_target, o2td3_distance, o2td3_target


@dataclass
class SacAlignConfig:
    alpha: float = 0.2
    steps: int = 20_000
    batch_size: int = 256
    lr: float = 3e-4
    # the actor starts at the offline policy, which is exactly the sampler the
    # calibration wants; moving it much slower than the critic keeps the
    # suppression targets dense around the anchors while the structure forms
    actor_lr: float = 3e-5
    polyak: float = 0.005
    audit_every: int = 500
    audit_pass_rate: float = 0.95
    audit_states: int = 512
    seed: int = 0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")


@dataclass
class Td3AlignConfig:
    k: float = 1.0
    sigma: float = 0.2
    noise_clip: float = 0.5
    d_cap: float | None = None
    sign_mode: str = "auto"
    steps: int = 20_000
    batch_size: int = 256
    lr: float = 3e-4
    actor_lr: float = 3e-5
    polyak: float = 0.005
    audit_every: int = 500
    audit_pass_rate: float = 0.95
    audit_states: int = 512
    seed: int = 0

    def __post_init__(self):
        if self.k <= 0 or self.sigma <= 0:
            raise ValueError("k and sigma must be positive")


def sac_rank_audit(critic, actor, actor_off, obs, alpha, rng, tol=1e-3):
    """Fraction of sampled actions whose calibrated ordering holds:

        Q(s, a_anchor) >= Q(s, a) - alpha * (log pi(a_anchor|s) - log pi(a|s))
    """
    head = actor.head(obs)
    u = head.mean + head.std * rng.standard_normal(head.mean.shape)
    a = np.tanh(u)
    anchor = np.tanh(actor_off.head(obs).mean)
    lp_a = log_prob_pre_squash(head, u)
    lp_anchor = log_prob_pre_squash(head, np.arctanh(np.clip(anchor, -1 + 1e-9, 1 - 1e-9)))
    q_anchor = critic.q_min(obs, anchor)
    q_a = critic.q_min(obs, a)
    slack = tol * (1.0 + np.abs(q_anchor))
    ok = q_anchor >= q_a - alpha * (lp_anchor - lp_a) - slack
    return float(np.mean(ok))


def td3_rank_audit(critic, actor_off, obs, sigma, noise_clip, rng, tol=1e-3):
    """Fraction of perturbations for which the anchor action stays the local argmax."""
    anchor = actor_off.act(obs)
    delta = np.clip(sigma * rng.standard_normal(anchor.shape), -noise_clip, noise_clip)
    perturbed = np.clip(anchor + delta, -1.0, 1.0)
    q_anchor = critic.q_min(obs, anchor)
    q_pert = critic.q_min(obs, perturbed)
    slack = tol * (1.0 + np.abs(q_anchor))
    return float(np.mean(q_anchor >= q_pert - slack))


def o2sac_align(critic: TwinCritic, actor_off: GaussianPolicy, ds: OfflineDataset,
                cfg: SacAlignConfig):
    """Calibrate a re-evaluated critic to a stochastic offline actor.

    Returns (actor_on, critic_on, info).  The inputs are not mutated; the
    actor starts as a copy of the offline actor and is updated the usual SAC
    way so it keeps probing for overestimated actions.
    """
    rng = np.random.default_rng(cfg.seed)
    actor_on = actor_off.copy()
    critic_on = critic.copy()
    target = critic_on.copy()
    a_opt = Adam(actor_on.net.parameters(), lr=cfg.actor_lr)
    c_opts = [Adam(n.parameters(), lr=cfg.lr) for n in critic_on.nets]

    probe_idx = rng.choice(len(ds), size=min(cfg.audit_states, len(ds)), replace=False)
    probe_obs = ds.observations[probe_idx].astype(np.float64)
    anchor_probe = np.tanh(actor_off.head(probe_obs).mean)
    anchor_q_before = critic.q_min(probe_obs, anchor_probe)

    audits = []
    steps_run = 0
    for step in range(cfg.steps):
        idx = rng.integers(0, len(ds), size=min(cfg.batch_size, len(ds)))
        obs = ds.observations[idx].astype(np.float64)

        ps, _, _ = sac_actor_step(actor_on, a_opt, critic_on, obs, cfg.alpha, rng)

        head_off = actor_off.head(obs)
        anchor = np.tanh(head_off.mean)
        logp_anchor = log_prob_pre_squash(head_off, head_off.mean)
        logp_a = log_prob_pre_squash(head_off, ps.u)
        # anchors come from the frozen re-evaluation critic so they stay
        # genuinely unaltered; referencing the polyak target here lets the
        # anchor values random-walk downward (the min keeps picking low noise)
        # and the whole calibration drifts with them
        q_anchor = critic.q_min(obs, anchor)
        q_at_a = target.q_min(obs, ps.action)
        calibrated = o2sac_target(q_anchor, logp_anchor, logp_a, q_at_a, cfg.alpha)
        twin_regression_with_anchor(critic_on, c_opts, obs, ps.action, calibrated,
                                    obs, anchor, q_anchor)
        for t, s in zip(target.nets, critic_on.nets):
            polyak_update(t, s, cfg.polyak)
        steps_run = step + 1
        if (step + 1) % cfg.audit_every == 0:
            rate = sac_rank_audit(critic_on, actor_on, actor_off, probe_obs,
                                  cfg.alpha, np.random.default_rng(cfg.seed + 7))
            audits.append(rate)
            if rate >= cfg.audit_pass_rate:
                break

    anchor_q_after = critic_on.q_min(probe_obs, anchor_probe)
    info = {
        "steps_run": steps_run,
        "audit_history": audits,
        "final_audit": audits[-1] if audits else None,
        "anchor_drift": float(np.mean(np.abs(anchor_q_after - anchor_q_before))),
        "anchor_scale": float(np.mean(np.abs(anchor_q_before))),
    }
    return actor_on, critic_on, info


def o2td3_align(critic: TwinCritic, actor_off: DeterministicPolicy, ds: OfflineDataset,
                cfg: Td3AlignConfig):
    """Calibrate a critic to a deterministic offline actor (Gaussian value model)."""
    rng = np.random.default_rng(cfg.seed)
    actor_on = actor_off.copy()
    critic_on = critic.copy()
    target = critic_on.copy()
    a_opt = Adam(actor_on.net.parameters(), lr=cfg.actor_lr)
    c_opts = [Adam(n.parameters(), lr=cfg.lr) for n in critic_on.nets]

    probe_idx = rng.choice(len(ds), size=min(cfg.audit_states, len(ds)), replace=False)
    probe_obs = ds.observations[probe_idx].astype(np.float64)
    anchor_probe = actor_off.act(probe_obs)
    anchor_q_before = critic.q_min(probe_obs, anchor_probe)

    audits = []
    steps_run = 0
    for step in range(cfg.steps):
        idx = rng.integers(0, len(ds), size=min(cfg.batch_size, len(ds)))
        obs = ds.observations[idx].astype(np.float64)

        td3_actor_step(actor_on, a_opt, critic_on, obs)

        anchor = actor_off.act(obs)
        delta = np.clip(cfg.sigma * rng.standard_normal(anchor.shape),
                        -cfg.noise_clip, cfg.noise_clip)
        perturbed = np.clip(actor_on.act(obs) + delta, -1.0, 1.0)
        d = o2td3_distance(perturbed, anchor)
        # frozen anchor source, same reasoning as the stochastic path
        q_anchor = critic.q_min(obs, anchor)
        q_at = target.q_min(obs, perturbed)
        calibrated = o2td3_target(q_anchor, d, cfg.k, cfg.sigma, q_at,
                                  cfg.sign_mode, cfg.d_cap)
        twin_regression_with_anchor(critic_on, c_opts, obs, perturbed, calibrated,
                                    obs, anchor, q_anchor)
        for t, s in zip(target.nets, critic_on.nets):
            polyak_update(t, s, cfg.polyak)
        steps_run = step + 1
        if (step + 1) % cfg.audit_every == 0:
            rate = td3_rank_audit(critic_on, actor_off, probe_obs, cfg.sigma,
                                  cfg.noise_clip, np.random.default_rng(cfg.seed + 7))
            audits.append(rate)
            if rate >= cfg.audit_pass_rate:
                break

    anchor_q_after = critic_on.q_min(probe_obs, anchor_probe)
    info = {
        "steps_run": steps_run,
        "audit_history": audits,
        "final_audit": audits[-1] if audits else None,
        "anchor_drift": float(np.mean(np.abs(anchor_q_after - anchor_q_before))),
        "anchor_scale": float(np.mean(np.abs(anchor_q_before))),
    }
    return actor_on, critic_on, info
