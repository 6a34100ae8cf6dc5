from .loops import (
    SacAlignConfig,
    Td3AlignConfig,
    o2sac_align,
    o2td3_align,
    sac_rank_audit,
    td3_rank_audit,
)
from .targets import (
    aux_advantage,
    aux_advantage_raw,
    mixed_advantage,
    o2sac_target,
    o2td3_distance,
    o2td3_target,
    softplus_clip,
)

__all__ = [
    "SacAlignConfig", "Td3AlignConfig", "o2sac_align", "o2td3_align",
    "sac_rank_audit", "td3_rank_audit",
    "o2sac_target", "o2td3_distance", "o2td3_target",
    "aux_advantage", "aux_advantage_raw", "mixed_advantage", "softplus_clip",
]
