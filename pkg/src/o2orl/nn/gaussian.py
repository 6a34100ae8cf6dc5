"""Tanh-squashed diagonal Gaussian heads.

The stochastic actors emit a mean and a clamped log standard deviation per
action dimension; actions are ``tanh`` of a Gaussian sample.  Log-likelihoods
include the tanh change-of-variables correction and are floored at
``LOG_PROB_FLOOR`` so that near-saturated actions cannot produce numerically
absurd values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
LOG_PROB_FLOOR = -50.0

_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)
_ATANH_CLIP = 1.0 - 1e-9


@dataclass
class GaussianHead:
    """Diagonal Gaussian over pre-squash actions: mean and clamped log-std.

    Arrays have shape (..., act_dim); batch dimensions broadcast through all
    the helpers below.
    """

    mean: np.ndarray
    log_std: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.log_std = np.clip(np.asarray(self.log_std, dtype=np.float64),
                               LOG_STD_MIN, LOG_STD_MAX)

    @property
    def std(self) -> np.ndarray:
        return np.exp(self.log_std)

    def entropy(self) -> np.ndarray:
        """Closed-form differential entropy of the pre-squash Gaussian, summed over dims."""
        return np.sum(self.log_std + 0.5 * np.log(2.0 * np.pi * np.e), axis=-1)


def softplus(x):
    return np.logaddexp(0.0, x)


def _tanh_correction(u):
    # log(1 - tanh(u)^2) in a form stable for large |u|.
    return 2.0 * (np.log(2.0) - u - softplus(-2.0 * u))


def log_prob_pre_squash(head: GaussianHead, u) -> np.ndarray:
    """Log-likelihood of squashed action tanh(u), given the pre-squash value u.

    Includes the tanh correction and applies the floor.  Summed over action
    dimensions; returns shape (...,).
    """
    u = np.asarray(u, dtype=np.float64)
    z = (u - head.mean) / head.std
    per_dim = -0.5 * z * z - head.log_std - _HALF_LOG_2PI - _tanh_correction(u)
    return np.maximum(per_dim.sum(axis=-1), LOG_PROB_FLOOR)


def log_prob(head: GaussianHead, action) -> np.ndarray:
    """Log-likelihood of a squashed action in (-1, 1).

    Components at or beyond +-1 are pulled just inside the interval before
    atanh; the resulting extreme raw values are then floored at
    ``LOG_PROB_FLOOR``.
    """
    a = np.clip(np.asarray(action, dtype=np.float64), -_ATANH_CLIP, _ATANH_CLIP)
    return log_prob_pre_squash(head, np.arctanh(a))


def sample(head: GaussianHead, rng: np.random.Generator):
    """Reparameterized sample: returns (action, pre_squash, noise, log_prob)."""
    eps = rng.standard_normal(head.mean.shape)
    u = head.mean + head.std * eps
    a = np.tanh(u)
    return a, u, eps, log_prob_pre_squash(head, u)


def mean_action(head: GaussianHead) -> np.ndarray:
    """Deterministic (most likely) squashed action."""
    return np.tanh(head.mean)


def reparam_log_prob_grads(head: GaussianHead, u, eps):
    """Gradients of log pi(a|s) w.r.t. (mean, log_std) for a = tanh(mean + std*eps).

    Differentiates through the reparameterized action as well as the density
    parameters.  The Gaussian quadratic term is constant in the parameters
    under reparameterization (z == eps), so only the tanh correction and the
    -log_std term contribute:

        d log pi / d mean    = 2 * tanh(u)
        d log pi / d log_std = -1 + 2 * tanh(u) * std * eps
    """
    t = np.tanh(u)
    d_mean = 2.0 * t
    d_log_std = -1.0 + 2.0 * t * head.std * eps
    return d_mean, d_log_std


def fixed_action_log_prob_grads(head: GaussianHead, u):
    """Gradients of log pi(a|s) w.r.t. (mean, log_std) for a *fixed* action.

    Used for likelihood objectives (behavior cloning, PPO ratios) where the
    action comes from data: the tanh correction does not depend on the
    parameters, leaving the pure Gaussian terms.
    """
    z = (u - head.mean) / head.std
    d_mean = z / head.std
    d_log_std = z * z - 1.0
    return d_mean, d_log_std


def cross_log_prob_grad_wrt_u(head: GaussianHead, u):
    """d log pi_head(tanh(u)) / d u for a head that did not generate u.

    Needed when a sampled action from one policy is scored under another
    (e.g. the reference-policy term of the KL penalty): the gradient flows
    through u alone.
    """
    z = (u - head.mean) / head.std
    return -z / head.std + 2.0 * np.tanh(u)
