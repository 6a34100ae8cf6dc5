"""Shared gradient-step helpers used by the offline, re-evaluation, alignment,
and fine-tuning loops.

Each helper assembles the hand-derived gradients for one optimization step.
Log-likelihood floors are respected: samples whose total log-likelihood sits
at the floor contribute zero gradient through that term.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn.gaussian import (
    GaussianHead,
    LOG_PROB_FLOOR,
    cross_log_prob_grad_wrt_u,
    log_prob_pre_squash,
    reparam_log_prob_grads,
)


class TrainingDiverged(RuntimeError):
    """Raised when a training loop hits non-finite losses or parameters."""


def check_finite(name, *arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise TrainingDiverged(f"non-finite values in {name}")


@dataclass
class PolicySample:
    """A reparameterized actor sample with everything backward passes need."""

    head: GaussianHead
    cache: dict
    clip_mask: np.ndarray
    eps: np.ndarray
    u: np.ndarray
    action: np.ndarray
    log_prob: np.ndarray

    @property
    def floor_mask(self):
        return (self.log_prob > LOG_PROB_FLOOR).astype(np.float64)[:, None]


def sample_policy(policy, obs, rng) -> PolicySample:
    head, cache, mask = policy.head_with_cache(obs)
    eps = rng.standard_normal(head.mean.shape)
    u = head.mean + head.std * eps
    return PolicySample(head, cache, mask, eps, u, np.tanh(u),
                        log_prob_pre_squash(head, u))


def critic_step(critic, opts, obs, act, targets) -> float:
    """One squared-error regression step for both twins toward shared targets."""
    targets = np.asarray(targets, dtype=np.float64)
    check_finite("critic targets", targets)
    n = targets.shape[0]
    mse = 0.0
    x = critic._join(obs, act)
    for net, opt in zip(critic.nets, opts):
        q, cache = net.forward(x, return_cache=True)
        err = q[:, 0] - targets
        mse += float(np.mean(err * err))
        grads, _ = net.backward(cache, (2.0 * err / n)[:, None])
        opt.step(net.parameters(), grads)
    return mse / 2.0


def twin_regression_with_anchor(critic, opts, obs, act, targets,
                                anchor_obs, anchor_act, anchor_targets):
    """Alignment-style critic step: suppression term plus anchor retain term.

    Minimizes ``(Q(s, a) - target)^2 + (Q(s, a_anchor) - anchor_target)^2``
    for each twin.  Returns (suppression mse, retain mse).
    """
    targets = np.asarray(targets, dtype=np.float64)
    anchor_targets = np.asarray(anchor_targets, dtype=np.float64)
    check_finite("alignment targets", targets, anchor_targets)
    n = targets.shape[0]
    m = anchor_targets.shape[0]
    align_mse = retain_mse = 0.0
    xa = critic._join(obs, act)
    xb = critic._join(anchor_obs, anchor_act)
    for net, opt in zip(critic.nets, opts):
        qa, ca = net.forward(xa, return_cache=True)
        erra = qa[:, 0] - targets
        g1, _ = net.backward(ca, (2.0 * erra / n)[:, None])

        qb, cb = net.forward(xb, return_cache=True)
        errb = qb[:, 0] - anchor_targets
        g2, _ = net.backward(cb, (2.0 * errb / m)[:, None])

        grads = [a + b for a, b in zip(g1, g2)]
        opt.step(net.parameters(), grads)
        align_mse += float(np.mean(erra * erra))
        retain_mse += float(np.mean(errb * errb))
    return align_mse / 2.0, retain_mse / 2.0


def sac_actor_step(actor, opt, critic, obs, alpha, rng, ref=None, lam=0.0):
    """Gradient step on E[alpha*log pi + lam*(log pi - log pi_ref) - min Q].

    Returns the sample bundle so callers can reuse the drawn actions.
    """
    ps = sample_policy(actor, obs, rng)
    n = obs.shape[0]
    q_min, g_qa = critic.action_grad_min(obs, ps.action)

    d_mu_lp, d_ls_lp = reparam_log_prob_grads(ps.head, ps.u, ps.eps)
    fm = ps.floor_mask
    sig_eps = ps.head.std * ps.eps
    da_dmu = 1.0 - ps.action * ps.action

    coef = alpha + lam
    d_mean = coef * fm * d_mu_lp - g_qa * da_dmu
    d_log_std = coef * fm * d_ls_lp - g_qa * da_dmu * sig_eps

    if ref is not None and lam != 0.0:
        ref_head = ref.head(obs)
        ref_lp = log_prob_pre_squash(ref_head, ps.u)
        ref_mask = (ref_lp > LOG_PROB_FLOOR).astype(np.float64)[:, None]
        d_ref_du = cross_log_prob_grad_wrt_u(ref_head, ps.u) * ref_mask
        d_mean -= lam * d_ref_du
        d_log_std -= lam * d_ref_du * sig_eps

    grads = actor.backward(ps.cache, ps.clip_mask, d_mean / n, d_log_std / n)
    opt.step(actor.net.parameters(), grads)
    loss = float(np.mean(alpha * ps.log_prob - q_min))
    check_finite("sac actor loss", np.array([loss]))
    return ps, q_min, loss


def td3_actor_step(actor, opt, critic, obs, ref=None, lam=0.0):
    """Gradient step on E[-Q1(s, pi(s)) + lam * per-dim mse(pi(s), pi_ref(s))]."""
    n = obs.shape[0]
    act, cache = actor.act_with_cache(obs)
    q1, g_qa = critic.action_grad_q1(obs, act)
    d_act = -g_qa
    if ref is not None and lam != 0.0:
        gap = act - ref.act(obs)
        d_act = d_act + lam * 2.0 * gap / act.shape[1]
    grads = actor.backward(cache, act, d_act / n)
    opt.step(actor.net.parameters(), grads)
    loss = float(np.mean(-q1))
    check_finite("td3 actor loss", np.array([loss]))
    return float(np.mean(q1))


def bc_gradient(actor, obs, u_data, entropy_weight):
    """Gradients and loss for max-likelihood cloning with an entropy bonus.

    Loss: mean(-log pi(a|s)) - entropy_weight * mean(H_gauss).
    """
    from .nn.gaussian import fixed_action_log_prob_grads

    head, cache, mask = actor.head_with_cache(obs)
    log_p = log_prob_pre_squash(head, u_data)
    fm = (log_p > LOG_PROB_FLOOR).astype(np.float64)[:, None]
    d_mu, d_ls = fixed_action_log_prob_grads(head, u_data)
    n = obs.shape[0]
    d_mean = -fm * d_mu / n
    d_log_std = (-fm * d_ls - entropy_weight) / n
    grads = actor.backward(cache, mask, d_mean, d_log_std)
    loss = float(np.mean(-log_p) - entropy_weight * np.mean(head.entropy()))
    return grads, loss, log_p


def atanh_actions(actions):
    """Pre-squash values for stored actions, clipped just inside (-1, 1)."""
    a = np.clip(np.asarray(actions, dtype=np.float64), -1.0 + 1e-6, 1.0 - 1e-6)
    return np.arctanh(a)


def perturbed_target_action(actor_target, next_obs, rng, noise_std, noise_clip):
    """TD3 target-policy smoothing: clip(pi_target(s') + clipped noise, [-1, 1])."""
    base = actor_target.act(next_obs)
    eps = np.clip(noise_std * rng.standard_normal(base.shape), -noise_clip, noise_clip)
    return np.clip(base + eps, -1.0, 1.0)
