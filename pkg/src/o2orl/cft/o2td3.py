"""Constrained TD3 fine-tuning.

Deterministic-policy analog of the SAC loop: the divergence penalty is the
per-dimension squared gap between current and reference actions, applied to
both the critic target and the (delayed) actor update.  Exploration adds
Gaussian noise to the policy action; target-policy smoothing follows the
usual clipped-noise scheme.  The ``lam_zero`` switch (used by the ablation
study) freezes the multiplier at zero, leaving plain TD3 fine-tuning.
"""

from __future__ import annotations

import numpy as np

from ..datasets import ReplayBuffer
from ..nn import Adam
from ..nn.core import polyak_update
from ..updates import (
    TrainingDiverged,
    critic_step,
    perturbed_target_action,
    td3_actor_step,
)
from .common import EvalHook, FinetuneConfig, NumericalAbort
from .constraint import ConstraintState, mse_penalty, tau_schedule
from .reference import ReferencePolicy


def finetune_o2td3(env, actor, critic, ds, cfg: FinetuneConfig,
                   policy_noise=0.2, noise_clip=0.5, lam_zero=False):
    """Run the constrained TD3 loop; returns (actor, critic, writer, info)."""
    rng = np.random.default_rng(cfg.seed)
    actor = actor.copy()
    critic = critic.copy()
    actor_target = actor.copy()
    target = critic.copy()
    ref = ReferencePolicy(actor, cfg.ref_mode, cfg.ref_interval)
    constraint = ConstraintState(0.0 if lam_zero else cfg.lam_init, cfg.lam_lr, "mse")

    a_opt = Adam(actor.net.parameters(), lr=cfg.lr)
    c_opts = [Adam(n.parameters(), lr=cfg.lr) for n in critic.nets]

    buffer = ReplayBuffer(ds, cfg.buffer_capacity, seed=cfg.seed + 1)
    probe = ds.batch(rng.choice(len(ds), size=min(1024, len(ds)), replace=False))
    hook = EvalHook(env, cfg, probe)
    lam_trace = []

    def q_probe():
        return float(np.mean(critic.q_min(probe.obs, probe.act)))

    start_return = hook.run(0, actor, q_probe(), constraint.lam,
                            tau_schedule(cfg.tau_kind, 0, cfg.horizon),
                            float(np.mean(mse_penalty(actor, ref.policy, probe.obs))))
    ref.maybe_update(actor, score=start_return, step=0)
    snapshot = (actor.copy(), critic.copy())

    state = env.reset(rng)
    t_ep = 0
    penalty_mean = 0.0
    try:
        for step in range(1, cfg.steps + 1):
            action = np.clip(
                actor.act(state) + cfg.exploration_noise * rng.standard_normal(actor.act_dim),
                -1.0, 1.0)
            nxt, reward, done = env.step(state, action)
            buffer.add(state, action, reward + cfg.reward_shift, nxt, done)
            t_ep += 1
            if done or t_ep >= env.horizon:
                state = env.reset(rng)
                t_ep = 0
            else:
                state = nxt

            tau = tau_schedule(cfg.tau_kind, step, cfg.horizon)
            for u in range(cfg.utd):
                batch = buffer.sample_symmetric(cfg.batch_size)

                penalties = mse_penalty(actor, ref.policy, batch.obs)
                penalty_mean = float(np.mean(penalties))
                if not lam_zero:
                    constraint.update(penalties, tau)

                a2 = perturbed_target_action(actor_target, batch.next_obs, rng,
                                             policy_noise, noise_clip)
                pen_next = mse_penalty(actor, ref.policy, batch.next_obs)
                y = batch.rew + (1.0 - batch.done) * cfg.gamma * (
                    target.q_min(batch.next_obs, a2) - constraint.lam * pen_next)
                critic_step(critic, c_opts, batch.obs, batch.act, y)

                if (step * cfg.utd + u) % cfg.policy_delay == 0:
                    td3_actor_step(actor, a_opt, critic, batch.obs,
                                   ref=ref.policy, lam=constraint.lam)
                    polyak_update(actor_target.net, actor.net, cfg.polyak)
                for t, s in zip(target.nets, critic.nets):
                    polyak_update(t, s, cfg.polyak)

            if step % cfg.eval_every == 0:
                score = hook.run(step, actor, q_probe(), constraint.lam, tau,
                                 penalty_mean)
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
    }
    return actor, critic, hook.writer, info
