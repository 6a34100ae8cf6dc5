from .artifact import ALGOS, PIPELINE_STAGES, OfflineArtifact, config_digest
from .bc import BcConfig, train_bc
from .cql import CqlConfig, train_cql_lite
from .td3bc import Td3BcConfig, train_td3_bc

__all__ = [
    "ALGOS", "PIPELINE_STAGES", "OfflineArtifact", "config_digest",
    "BcConfig", "train_bc",
    "CqlConfig", "train_cql_lite",
    "Td3BcConfig", "train_td3_bc",
]
