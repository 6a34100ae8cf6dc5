"""Offline training artifacts and the per-algorithm pipeline-stage table."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from ..nn import checkpoint as ckpt
from ..policies import DeterministicPolicy, GaussianPolicy, TwinCritic

ALGOS = ("bc", "td3bc", "cql")

# Which reconstruction stages each offline algorithm requires before
# constrained fine-tuning.  Policy-constraint training (td3bc) already
# evaluates its critic the online way, so re-evaluation is skipped and the
# offline critic goes straight to alignment; value-regularized training (cql)
# needs the full path; the PPO route folds alignment into fine-tuning.
PIPELINE_STAGES = {
    ("cql", "o2sac"): ("reevaluate", "align", "finetune"),
    ("bc", "o2sac"): ("reevaluate", "align", "finetune"),
    ("td3bc", "o2td3"): ("align", "finetune"),
    ("bc", "o2ppo"): ("reevaluate", "finetune"),
    ("cql", "o2ppo"): ("reevaluate", "finetune"),
}


def config_digest(cfg) -> str:
    payload = json.dumps(cfg.__dict__ if hasattr(cfg, "__dict__") else cfg,
                         sort_keys=True, default=str)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass
class OfflineArtifact:
    algo: str
    actor: GaussianPolicy | DeterministicPolicy
    critic: TwinCritic | None
    config_digest: str
    info: dict

    def __post_init__(self):
        if self.algo not in ALGOS:
            raise ValueError(f"algo must be one of {ALGOS}, got {self.algo!r}")

    def save(self, path) -> None:
        nets = [self.actor.net] if hasattr(self.actor, "net") else list(self.actor.nets)
        layout = {"actor_kind": self.actor.kind, "critic": self.critic is not None}
        if self.critic is not None:
            nets = nets + [self.critic.q1, self.critic.q2]
        extra = {
            "algo": self.algo,
            "obs_dim": self.actor.obs_dim,
            "act_dim": self.actor.act_dim,
            "config_digest": self.config_digest,
            "info": self.info,
            **layout,
        }
        ckpt.save_nets(path, "offline_artifact", nets, extra=extra)

    @classmethod
    def load(cls, path) -> "OfflineArtifact":
        header, nets = ckpt.load_nets(path)
        if header["kind"] != "offline_artifact":
            raise ckpt.CheckpointError(f"{path}: not an offline artifact")
        extra = header["extra"]
        if extra["actor_kind"] == GaussianPolicy.kind:
            actor = GaussianPolicy.__new__(GaussianPolicy)
        else:
            actor = DeterministicPolicy.__new__(DeterministicPolicy)
        actor.obs_dim, actor.act_dim = extra["obs_dim"], extra["act_dim"]
        actor.net = nets[0]
        critic = None
        if extra["critic"]:
            critic = TwinCritic.__new__(TwinCritic)
            critic.obs_dim, critic.act_dim = extra["obs_dim"], extra["act_dim"]
            critic.q1, critic.q2 = nets[1], nets[2]
        return cls(extra["algo"], actor, critic, extra["config_digest"], extra["info"])
