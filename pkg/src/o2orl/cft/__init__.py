from .common import FinetuneConfig, NumericalAbort
from .constraint import (
    ConstraintState,
    TAU_PRESETS,
    kl_penalty,
    mse_penalty,
    penalty_weights,
    tau_schedule,
)
from .o2ppo import PpoConfig, finetune_o2ppo, gae_advantages, ppo_policy_gradient
from .o2sac import finetune_o2sac
from .o2td3 import finetune_o2td3
from .reference import ReferencePolicy

__all__ = [
    "FinetuneConfig", "NumericalAbort",
    "ConstraintState", "TAU_PRESETS", "tau_schedule",
    "kl_penalty", "mse_penalty", "penalty_weights",
    "ReferencePolicy",
    "finetune_o2sac", "finetune_o2td3", "finetune_o2ppo",
    "PpoConfig", "gae_advantages", "ppo_policy_gradient",
]
