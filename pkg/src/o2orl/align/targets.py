"""Closed-form calibration targets and the auxiliary advantage.

These are the pure formulas of value alignment: given the anchor action's
Q-value (the offline policy's most likely action, whose estimate is trusted),
produce the calibrated value any other action should be suppressed to.  The
``min`` with the re-evaluated Q keeps actions that were never overestimated
untouched.
"""

from __future__ import annotations

import numpy as np

from ..nn.gaussian import GaussianHead, softplus

SIGN_MODES = ("auto", "positive", "negative")


def o2sac_target(q_anchor, logp_anchor, logp_action, q_reeval, alpha):
    """Stochastic-path calibration:

        Q'(s, a) = min(Q(s, a_anchor) - alpha * (log pi(a_anchor|s) - log pi(a|s)),
                       Q(s, a))

    Log-likelihoods are expected already floored.  Q' <= q_reeval pointwise.
    """
    shifted = np.asarray(q_anchor) - alpha * (np.asarray(logp_anchor) - np.asarray(logp_action))
    return np.minimum(shifted, q_reeval)


def o2td3_distance(a, a_anchor):
    """Per-sample action distance: euclidean norm over dims / sqrt(action dim)."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(a_anchor, dtype=np.float64))
    diff = a - b
    return np.sqrt((diff * diff).sum(axis=-1)) / np.sqrt(a.shape[-1])


def o2td3_target(q_anchor, d, k, sigma, q_reeval, sign_mode="auto", d_cap=None):
    """Deterministic-path calibration via the Gaussian value model:

        positive anchors: Q' = min(Q(s, a), Q(s, a_anchor) / (1 + k * max(d^2, sigma^2)))
        negative anchors: the division becomes multiplication, deepening the value.

    ``d`` is capped at ``d_cap`` (defaulting to the smoothing scale ``sigma``
    itself) before entering the formula so far-away actions are not crushed.
    ``sign_mode`` selects the branch: "auto" uses the anchor's sign per sample.
    """
    if sign_mode not in SIGN_MODES:
        raise ValueError(f"sign_mode must be one of {SIGN_MODES}")
    if k <= 0 or sigma <= 0:
        raise ValueError("k and sigma must be positive")
    q_anchor = np.asarray(q_anchor, dtype=np.float64)
    cap = sigma if d_cap is None else d_cap
    d_eff = np.minimum(np.asarray(d, dtype=np.float64), cap)
    scale = 1.0 + k * np.maximum(d_eff * d_eff, sigma * sigma)
    if sign_mode == "positive":
        negative = np.zeros(np.shape(q_anchor), dtype=bool)
    elif sign_mode == "negative":
        negative = np.ones(np.shape(q_anchor), dtype=bool)
    else:
        negative = q_anchor < 0.0
    suppressed = np.where(negative, q_anchor * scale, q_anchor / scale)
    return np.minimum(suppressed, q_reeval)


def aux_advantage_raw(head: GaussianHead, u, alpha):
    """Per-dimension raw auxiliary advantage of a Gaussian head at pre-squash u.

    A_i = alpha * (log f_i(u_i) + H_i) = alpha * (1 - z_i^2) / 2 with
    z = (u - mean) / std: maximal (alpha/2) at the mean, zero one standard
    deviation out, zero expectation under the head's own distribution.
    """
    z = (np.asarray(u, dtype=np.float64) - head.mean) / head.std
    return alpha * 0.5 * (1.0 - z * z)


def softplus_clip(values, offset=4.0):
    """SoftPlus(x + offset) - offset: smooth floor at about -offset."""
    return softplus(np.asarray(values, dtype=np.float64) + offset) - offset


def aux_advantage(head: GaussianHead, u, alpha, clip_offset=4.0, scale=1.0):
    """Clipped (per dimension) and weighted auxiliary advantage, summed over dims.

    ``scale`` is the batch reweighting factor, conventionally twice the
    standard deviation of the main advantage batch so both terms share an
    order of magnitude.
    """
    per_dim = softplus_clip(aux_advantage_raw(head, u, alpha), clip_offset)
    return scale * per_dim.sum(axis=-1)


def mixed_advantage(a_main, a_aux, beta):
    """Linear mix A' = A + beta * A_aux; beta anneals 1 -> 0 over fine-tuning."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must be in [0, 1], got {beta}")
    return np.asarray(a_main) + beta * np.asarray(a_aux)
