"""Mismatch diagnostics: quantify how far an offline actor-critic pair is
from what online updates expect.

Two numbers summarize the two failure modes:

* ``q_jump_mean`` -- mean one-step optimistic TD target minus the critic's
  current value on dataset pairs.  Large positive values mean the critic was
  trained pessimistically and will jump as soon as online evaluation starts.
* ``rank_disagreement_rate`` -- how often the critic's preference between two
  actions contradicts the actor's, i.e. the probability-vs-value misalignment
  that derails early policy updates.
"""

from __future__ import annotations

import numpy as np

from .nn.gaussian import log_prob_pre_squash
from .policies import DeterministicPolicy, GaussianPolicy


def q_jump_mean(critic, actor, batch, gamma, alpha=0.0, rng=None) -> float:
    """Mean (optimistic TD target - current Q) over a batch of dataset pairs."""
    if rng is None:
        rng = np.random.default_rng(0)
    if isinstance(actor, GaussianPolicy):
        head = actor.head(batch.next_obs)
        u = head.mean + head.std * rng.standard_normal(head.mean.shape)
        a2 = np.tanh(u)
        bonus = -alpha * log_prob_pre_squash(head, u)
    else:
        a2 = actor.act(batch.next_obs)
        bonus = 0.0
    y = batch.rew + (1.0 - batch.done) * gamma * (critic.q_min(batch.next_obs, a2) + bonus)
    return float(np.mean(y - critic.q_min(batch.obs, batch.act)))


def rank_disagreement_rate(q_fn, actor, obs, rng, perturb_std=0.2) -> float:
    """Fraction of states where action preference under q_fn contradicts the actor.

    For stochastic actors, two sampled actions are compared by log-likelihood
    versus Q value; for deterministic actors, the policy action is compared
    against a perturbation (the actor implicitly prefers its own output).
    ``q_fn(obs, act)`` must return a value per row.
    """
    obs = np.atleast_2d(obs)
    if isinstance(actor, GaussianPolicy):
        head = actor.head(obs)
        u1 = head.mean + head.std * rng.standard_normal(head.mean.shape)
        u2 = head.mean + head.std * rng.standard_normal(head.mean.shape)
        a1, a2 = np.tanh(u1), np.tanh(u2)
        lp_gap = log_prob_pre_squash(head, u1) - log_prob_pre_squash(head, u2)
        q_gap = q_fn(obs, a1) - q_fn(obs, a2)
        valid = np.abs(lp_gap) > 1e-9
        disagree = (np.sign(lp_gap) != np.sign(q_gap)) & valid
        return float(disagree.sum() / max(valid.sum(), 1))
    if isinstance(actor, DeterministicPolicy):
        a1 = actor.act(obs)
        delta = np.clip(perturb_std * rng.standard_normal(a1.shape), -0.5, 0.5)
        a2 = np.clip(a1 + delta, -1.0, 1.0)
        return float(np.mean(q_fn(obs, a2) > q_fn(obs, a1)))
    raise TypeError(f"unsupported actor type {type(actor)!r}")


def diagnose_mismatch(actor, critic, ds, gamma=0.99, alpha=0.2, n_states=512, seed=0) -> dict:
    """The diagnostic report: evaluation-mismatch jump plus improvement mismatch."""
    if ds.obs_dim != actor.obs_dim or ds.act_dim != actor.act_dim:
        raise ValueError("dataset dimensions do not match the actor checkpoint")
    if critic.obs_dim != actor.obs_dim:
        raise ValueError("critic and actor dimensions do not match")
    rng = np.random.default_rng(seed)
    n = min(n_states, len(ds))
    idx = rng.choice(len(ds), size=n, replace=False)
    batch = ds.batch(idx)
    return {
        "q_jump_mean": q_jump_mean(critic, actor, batch, gamma, alpha, rng),
        "rank_disagreement_rate": rank_disagreement_rate(
            critic.q_min, actor, batch.obs, rng),
        "n_states": int(n),
    }
