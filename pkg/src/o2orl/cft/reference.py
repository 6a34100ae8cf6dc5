"""Reference-policy management for constrained fine-tuning.

The default keeps the best policy seen across online evaluations; the
evaluation-free fallback snapshots the current policy at a fixed interaction
interval instead.
"""

from __future__ import annotations

import numpy as np


class ReferencePolicy:
    """Snapshot of a policy used as the constraint anchor.

    ``mode`` is "best" (replace when an evaluation strictly beats the stored
    score) or "interval" (replace every ``interval`` steps regardless of
    score).
    """

    MODES = ("best", "interval")

    def __init__(self, policy, mode="best", interval=1000):
        if mode not in self.MODES:
            raise ValueError(f"mode must be one of {self.MODES}")
        if mode == "interval" and interval < 1:
            raise ValueError("interval must be >= 1")
        self.policy = policy.copy()
        self.mode = mode
        self.interval = int(interval)
        self.best_score = -np.inf
        self.updates = 0

    def maybe_update(self, candidate, score=None, step=None) -> bool:
        """Consider replacing the snapshot; returns True when replaced."""
        if self.mode == "best":
            if score is None:
                raise ValueError("best-so-far mode needs an evaluation score")
            if score > self.best_score:
                self.policy = candidate.copy()
                self.best_score = float(score)
                self.updates += 1
                return True
            return False
        if step is None:
            raise ValueError("interval mode needs the current step")
        if step > 0 and step % self.interval == 0:
            self.policy = candidate.copy()
            if score is not None:
                self.best_score = max(self.best_score, float(score))
            self.updates += 1
            return True
        return False
