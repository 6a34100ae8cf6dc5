"""Constrained SAC fine-tuning.

The aligned actor-critic pair trains online with three coupled updates per
interaction: the entropy temperature tracks its target, the Lagrange
multiplier tracks the KL budget against the reference policy, and both the
critic target and the actor objective carry the ``lam * log(pi/pi_ref)``
penalty.  The reference policy starts as the incoming (aligned) actor, so the
penalty is identically zero at step 0 and the alignment cannot be destroyed
by the first updates.
"""

from __future__ import annotations

import numpy as np

from ..datasets import ReplayBuffer
from ..nn import Adam
from ..nn.core import polyak_update
from ..nn.gaussian import LOG_PROB_FLOOR, log_prob_pre_squash
from ..updates import TrainingDiverged, critic_step, sac_actor_step, sample_policy
from .common import EvalHook, FinetuneConfig, NumericalAbort
from .constraint import ConstraintState, kl_penalty, tau_schedule
from .reference import ReferencePolicy


def finetune_o2sac(env, actor, critic, ds, cfg: FinetuneConfig):
    """Run the constrained online loop; returns (actor, critic, writer, info)."""
    rng = np.random.default_rng(cfg.seed)
    actor = actor.copy()
    critic = critic.copy()
    target = critic.copy()
    ref = ReferencePolicy(actor, cfg.ref_mode, cfg.ref_interval)
    constraint = ConstraintState(cfg.lam_init, cfg.lam_lr, "kl")

    a_opt = Adam(actor.net.parameters(), lr=cfg.lr)
    c_opts = [Adam(n.parameters(), lr=cfg.lr) for n in critic.nets]
    log_alpha = np.array([np.log(cfg.alpha_init)])
    alpha_opt = Adam([log_alpha], lr=cfg.alpha_lr)
    target_entropy = (-float(actor.act_dim) if cfg.target_entropy is None
                      else cfg.target_entropy)

    buffer = ReplayBuffer(ds, cfg.buffer_capacity, seed=cfg.seed + 1)
    probe = ds.batch(rng.choice(len(ds), size=min(1024, len(ds)), replace=False))

    hook = EvalHook(env, cfg, probe)
    lam_trace = []

    def q_probe():
        return float(np.mean(critic.q_min(probe.obs, probe.act)))

    def step_zero_penalty():
        ps = sample_policy(actor, probe.obs, rng)
        return float(np.mean(kl_penalty(actor, ref.policy, probe.obs, ps.u)))

    start_return = hook.run(0, actor, q_probe(), constraint.lam,
                            tau_schedule(cfg.tau_kind, 0, cfg.horizon),
                            step_zero_penalty(), alpha=float(np.exp(log_alpha[0])))
    ref.maybe_update(actor, score=start_return, step=0)
    snapshot = (actor.copy(), critic.copy())

    state = env.reset(rng)
    t_ep = 0
    penalty_mean = 0.0
    try:
        for step in range(1, cfg.steps + 1):
            action = actor.act(state, rng=rng)
            nxt, reward, done = env.step(state, action)
            buffer.add(state, action, reward + cfg.reward_shift, nxt, done)
            t_ep += 1
            if done or t_ep >= env.horizon:
                state = env.reset(rng)
                t_ep = 0
            else:
                state = nxt

            tau = tau_schedule(cfg.tau_kind, step, cfg.horizon)
            for _ in range(cfg.utd):
                batch = buffer.sample_symmetric(cfg.batch_size)
                alpha = float(np.exp(log_alpha[0]))

                # temperature and multiplier updates share one policy sample
                ps = sample_policy(actor, batch.obs, rng)
                g_alpha = -alpha * float(np.mean(ps.log_prob - target_entropy))
                alpha_opt.step([log_alpha], [np.array([g_alpha])])
                alpha = float(np.exp(log_alpha[0]))

                penalties = kl_penalty(actor, ref.policy, batch.obs, ps.u)
                penalty_mean = float(np.mean(penalties))
                constraint.update(penalties, tau)

                head2 = actor.head(batch.next_obs)
                u2 = head2.mean + head2.std * rng.standard_normal(head2.mean.shape)
                lp2 = log_prob_pre_squash(head2, u2)
                lp2_ref = np.maximum(
                    log_prob_pre_squash(ref.policy.head(batch.next_obs), u2),
                    LOG_PROB_FLOOR)
                y = batch.rew + (1.0 - batch.done) * cfg.gamma * (
                    target.q_min(batch.next_obs, np.tanh(u2))
                    - alpha * lp2
                    - constraint.lam * (lp2 - lp2_ref))
                critic_step(critic, c_opts, batch.obs, batch.act, y)

                sac_actor_step(actor, a_opt, critic, batch.obs, alpha, rng,
                               ref=ref.policy, lam=constraint.lam)
                for t, s in zip(target.nets, critic.nets):
                    polyak_update(t, s, cfg.polyak)

            if step % cfg.eval_every == 0:
                score = hook.run(step, actor, q_probe(), constraint.lam, tau,
                                 penalty_mean, alpha=float(np.exp(log_alpha[0])))
                ref.maybe_update(actor, score=score, step=step)
                lam_trace.append(constraint.lam)
                snapshot = (actor.copy(), critic.copy())
    except TrainingDiverged as exc:
        raise NumericalAbort(str(exc), checkpoint=snapshot) from exc

    info = {
        "start_return": start_return,
        "final_lambda": constraint.lam,
        "lambda_trace": lam_trace,
        "reference_updates": ref.updates,
        "best_score": ref.best_score,
        "final_alpha": float(np.exp(log_alpha[0])),
    }
    return actor, critic, hook.writer, info
