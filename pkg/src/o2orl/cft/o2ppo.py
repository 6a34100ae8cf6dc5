"""Constrained PPO fine-tuning.

On-policy loop with the auxiliary advantage acting as the constraint: every
rollout's GAE advantages are mixed with the reference policy's
log-likelihood advantage (clipped per dimension, reweighted to the batch's
scale), and the mixing weight anneals from 1 to 0.  The value network keeps
being fit to rollout returns, gradually replacing the offline
return-fitting estimate; the reference policy is promoted exactly as in the
off-policy loops.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..align.targets import aux_advantage, mixed_advantage
from ..nn import Adam
from ..nn.gaussian import LOG_PROB_FLOOR, fixed_action_log_prob_grads, log_prob_pre_squash
from ..updates import TrainingDiverged, check_finite
from .common import EvalHook, FinetuneConfig, NumericalAbort
from .reference import ReferencePolicy


@dataclass
class PpoConfig:
    steps: int = 20_000
    rollout_steps: int = 2_000
    ppo_epochs: int = 10
    minibatch_size: int = 256
    clip_eps: float = 0.2
    gae_lambda: float = 0.95
    gamma: float = 0.99
    lr: float = 3e-4
    value_lr: float = 1e-3
    aux_alpha: float = 1.0
    aux_clip_offset: float = 4.0
    beta_horizon: int | None = None
    eval_every: int = 2_000
    eval_episodes: int = 10
    ref_mode: str = "best"
    ref_interval: int = 2_000
    seed: int = 0

    def __post_init__(self):
        if self.rollout_steps < 2 or self.steps < self.rollout_steps:
            raise ValueError("invalid PPO step configuration")
        if not 0 <= self.gae_lambda <= 1 or not 0 < self.gamma <= 1:
            raise ValueError("invalid GAE parameters")


def gae_advantages(rewards, values, next_values, terminals, boundaries,
                   gamma, lam):
    """Generalized advantage estimation over a flat rollout segment.

    ``terminals`` marks true environment termination (no bootstrap);
    ``boundaries`` marks any episode end including horizon truncation, where
    the recursion must not leak into the next episode but the value bootstrap
    still applies.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    n = rewards.shape[0]
    adv = np.zeros(n)
    acc = 0.0
    for t in range(n - 1, -1, -1):
        delta = rewards[t] + gamma * next_values[t] * (1.0 - terminals[t]) - values[t]
        acc = delta + gamma * lam * (1.0 - boundaries[t]) * acc
        adv[t] = acc
    return adv


def ppo_policy_gradient(actor, obs, u, logp_old, advantages, clip_eps):
    """Clipped-surrogate gradients w.r.t. the actor parameters.

    Gradients flow only through samples whose unclipped branch is active (the
    usual subgradient of the min) and whose log-likelihood is above the floor.
    """
    head, cache, mask = actor.head_with_cache(obs)
    logp = log_prob_pre_squash(head, u)
    ratio = np.exp(logp - logp_old)
    s1 = ratio * advantages
    s2 = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    inside = (ratio > 1.0 - clip_eps) & (ratio < 1.0 + clip_eps)
    active = ((s1 <= s2) | inside) & (logp > LOG_PROB_FLOOR)
    n = obs.shape[0]
    coef = np.where(active, -advantages * ratio, 0.0) / n
    d_mu, d_ls = fixed_action_log_prob_grads(head, u)
    grads = actor.backward(cache, mask, coef[:, None] * d_mu, coef[:, None] * d_ls)
    loss = float(np.mean(-np.minimum(s1, s2)))
    return grads, {"loss": loss, "clip_fraction": float(np.mean(~inside))}


def finetune_o2ppo(env, actor, vcritic, cfg: PpoConfig):
    """Run the on-policy constrained loop; returns (actor, vcritic, writer, info)."""
    rng = np.random.default_rng(cfg.seed)
    actor = actor.copy()
    vcritic = vcritic.copy()
    ref = ReferencePolicy(actor, cfg.ref_mode, cfg.ref_interval)
    a_opt = Adam(actor.net.parameters(), lr=cfg.lr)
    v_opt = Adam(vcritic.net.parameters(), lr=cfg.value_lr)
    beta_horizon = cfg.beta_horizon if cfg.beta_horizon is not None else cfg.steps

    hook = EvalHook(env, FinetuneConfig(steps=cfg.steps, eval_every=cfg.eval_every,
                                        eval_episodes=cfg.eval_episodes, seed=cfg.seed),
                    probe=None)
    start_return = hook.run(0, actor, beta=1.0, penalty_mean=0.0)
    ref.maybe_update(actor, score=start_return, step=0)
    snapshot = (actor.copy(), vcritic.copy())

    state = env.reset(rng)
    t_ep = 0
    total = 0
    next_eval = cfg.eval_every
    beta_now = 1.0
    try:
        while total < cfg.steps:
            seg = min(cfg.rollout_steps, cfg.steps - total)
            obs_l = np.zeros((seg, env.obs_dim))
            u_l = np.zeros((seg, env.act_dim))
            lp_l = np.zeros(seg)
            rew_l = np.zeros(seg)
            term_l = np.zeros(seg)
            bound_l = np.zeros(seg)
            nxt_l = np.zeros((seg, env.obs_dim))
            for i in range(seg):
                head = actor.head(state)
                u = head.mean + head.std * rng.standard_normal(head.mean.shape)
                action = np.tanh(u)
                nxt, reward, done = env.step(state, action)
                obs_l[i] = state
                u_l[i] = u
                lp_l[i] = log_prob_pre_squash(head, u)
                rew_l[i] = reward
                nxt_l[i] = nxt
                term_l[i] = float(done)
                t_ep += 1
                truncated = t_ep >= env.horizon
                bound_l[i] = float(done or truncated)
                if done or truncated:
                    state = env.reset(rng)
                    t_ep = 0
                else:
                    state = nxt

            values = vcritic.value(obs_l)
            next_values = vcritic.value(nxt_l)
            adv = gae_advantages(rew_l, values, next_values, term_l, bound_l,
                                 cfg.gamma, cfg.gae_lambda)
            returns_target = adv + values

            beta_now = max(0.0, 1.0 - total / float(beta_horizon))
            head_ref = ref.policy.head(obs_l)
            aux = aux_advantage(head_ref, u_l, cfg.aux_alpha, cfg.aux_clip_offset,
                                scale=2.0 * float(np.std(adv)))
            mixed = mixed_advantage(adv, aux, beta_now)
            check_finite("ppo advantages", mixed)
            a_norm = (mixed - mixed.mean()) / (mixed.std() + 1e-8)

            idx_all = np.arange(seg)
            for _ in range(cfg.ppo_epochs):
                rng.shuffle(idx_all)
                for lo in range(0, seg, cfg.minibatch_size):
                    mb = idx_all[lo : lo + cfg.minibatch_size]
                    grads, stats = ppo_policy_gradient(
                        actor, obs_l[mb], u_l[mb], lp_l[mb], a_norm[mb], cfg.clip_eps)
                    check_finite("ppo actor loss", np.array([stats["loss"]]))
                    a_opt.step(actor.net.parameters(), grads)

                    v, cache = vcritic.net.forward(obs_l[mb], return_cache=True)
                    err = v[:, 0] - returns_target[mb]
                    vg, _ = vcritic.net.backward(cache, (2.0 * err / err.size)[:, None])
                    v_opt.step(vcritic.net.parameters(), vg)

            total += seg
            if total >= next_eval:
                score = hook.run(total, actor, beta=beta_now,
                                 penalty_mean=float(np.mean(aux)))
                ref.maybe_update(actor, score=score, step=total)
                snapshot = (actor.copy(), vcritic.copy())
                next_eval += cfg.eval_every
    except TrainingDiverged as exc:
        raise NumericalAbort(str(exc), checkpoint=snapshot) from exc

    info = {
        "start_return": start_return,
        "final_beta": beta_now,
        "reference_updates": ref.updates,
        "best_score": ref.best_score,
    }
    return actor, vcritic, hook.writer, info
