"""Constraint machinery for fine-tuning: divergence penalties, the adaptive
Lagrange multiplier, and the threshold schedules.

The multiplier solves ``min_{lam >= 0} -lam * E[w * (f - tau)]`` by projected
gradient descent, where the per-sample weight w is 0.7 for violations
(f > tau) and 0.3 otherwise.  Weighting violations harder keeps the
multiplier from collapsing the moment the batch average dips under the
threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..nn.gaussian import LOG_PROB_FLOOR
from ..policies import DeterministicPolicy, GaussianPolicy

PENALTY_KINDS = ("kl", "mse", "aux")

VIOLATION_WEIGHT = 0.7
SATISFIED_WEIGHT = 0.3

# Named linear threshold schedules (start, end), from the per-path tuning:
# the KL thresholds allow the policy mean to move between sigma/2 and
# 2*sigma (medium) or sigma/10 and sigma/2 (expert); the squared-distance
# thresholds mirror that via the exploration noise.
TAU_PRESETS = {
    "sac-medium": (0.125, 2.0),
    "sac-expert": (0.005, 0.125),
    "td3-medium": (0.0025, 0.01),
    "td3-expert": (0.000025, 0.000625),
}


def tau_schedule(kind, step, horizon) -> float:
    """Linear interpolation from lo to hi over ``horizon`` steps, clamped at hi.

    ``kind`` is a preset name or an explicit (lo, hi) pair.  Endpoints are
    exact: step 0 gives lo, step >= horizon gives hi.
    """
    lo, hi = TAU_PRESETS[kind] if isinstance(kind, str) else kind
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if step < 0:
        raise ValueError("step must be >= 0")
    frac = min(float(step) / float(horizon), 1.0)
    return lo + (hi - lo) * frac


@dataclass
class ConstraintState:
    """Lagrange multiplier with projected SGD updates."""

    lam: float = 2.0
    lam_lr: float = 3e-4
    kind: str = "kl"
    history: list = field(default_factory=list)

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must start non-negative")
        if self.kind not in PENALTY_KINDS:
            raise ValueError(f"divergence kind must be one of {PENALTY_KINDS}")

    def update(self, penalties, tau: float) -> float:
        """One projected gradient step from a batch of per-sample penalties."""
        p = np.asarray(penalties, dtype=np.float64)
        w = np.where(p > tau, VIOLATION_WEIGHT, SATISFIED_WEIGHT)
        self.lam = max(0.0, self.lam + self.lam_lr * float(np.mean(w * (p - tau))))
        return self.lam


def penalty_weights(penalties, tau):
    """The per-sample weights used by the multiplier update (exposed for audits)."""
    p = np.asarray(penalties, dtype=np.float64)
    return np.where(p > tau, VIOLATION_WEIGHT, SATISFIED_WEIGHT)


def kl_penalty(actor: GaussianPolicy, ref: GaussianPolicy, obs, u) -> np.ndarray:
    """Per-sample log-ratio log pi(a|s) - log pi_ref(a|s) at pre-squash actions u.

    Actions are expected to come from the current actor; both log-likelihoods
    are floored before the subtraction.  Identical policies give exactly zero.
    """
    from ..nn.gaussian import log_prob_pre_squash

    lp = np.maximum(log_prob_pre_squash(actor.head(obs), u), LOG_PROB_FLOOR)
    lp_ref = np.maximum(log_prob_pre_squash(ref.head(obs), u), LOG_PROB_FLOOR)
    return lp - lp_ref


def mse_penalty(actor: DeterministicPolicy, ref: DeterministicPolicy, obs) -> np.ndarray:
    """Per-sample squared gap of deterministic actions, averaged per dimension."""
    gap = actor.act(obs) - ref.act(obs)
    return np.mean(gap * gap, axis=-1)
