from .core import Mlp, polyak_update, add_grads
from .adam import Adam
from .gaussian import (
    GaussianHead,
    LOG_PROB_FLOOR,
    LOG_STD_MAX,
    LOG_STD_MIN,
    log_prob,
    log_prob_pre_squash,
    mean_action,
    sample,
    softplus,
)
from .checkpoint import CheckpointError, load_nets, save_nets

__all__ = [
    "Mlp", "Adam", "polyak_update", "add_grads",
    "GaussianHead", "LOG_PROB_FLOOR", "LOG_STD_MAX", "LOG_STD_MIN",
    "log_prob", "log_prob_pre_squash", "mean_action", "sample", "softplus",
    "CheckpointError", "load_nets", "save_nets",
]
