"""Metrics rows and the CSV contract for fine-tuning runs.

Columns are fixed: step, eval_return_mean, eval_return_std, lambda, tau,
penalty_mean, q_mean_dataset, alpha, beta.  Fields that do not apply to a
given algorithm (alpha outside SAC, beta outside PPO) are written as empty
strings; NaN is never written.  Floats are serialized with ``repr`` so the
file reparses to the exact same values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

COLUMNS = ("step", "eval_return_mean", "eval_return_std", "lambda", "tau",
           "penalty_mean", "q_mean_dataset", "alpha", "beta")


@dataclass
class MetricsRow:
    step: int
    eval_return_mean: float
    eval_return_std: float
    lam: float | None = None
    tau: float | None = None
    penalty_mean: float | None = None
    q_mean_dataset: float | None = None
    alpha: float | None = None
    beta: float | None = None

    def values(self):
        return (self.step, self.eval_return_mean, self.eval_return_std, self.lam,
                self.tau, self.penalty_mean, self.q_mean_dataset, self.alpha, self.beta)


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    v = float(v)
    if math.isnan(v) or math.isinf(v):
        raise ValueError("refusing to write non-finite metric value")
    return repr(v)


class MetricsWriter:
    """Collects rows, enforces the step-monotonic/no-NaN invariants, writes CSV."""

    def __init__(self):
        self.rows: list[MetricsRow] = []

    def add(self, row: MetricsRow) -> None:
        if self.rows and row.step <= self.rows[-1].step:
            raise ValueError(
                f"metric steps must strictly increase ({row.step} after {self.rows[-1].step})")
        for v in row.values():
            if v is not None and (math.isnan(float(v)) or math.isinf(float(v))):
                raise ValueError("refusing to record non-finite metric value")
        self.rows.append(row)

    def to_csv(self, path) -> None:
        lines = [",".join(COLUMNS)]
        lines += [",".join(_cell(v) for v in row.values()) for row in self.rows]
        Path(path).write_text("\n".join(lines) + "\n")

    def column(self, name: str):
        i = COLUMNS.index(name)
        return [row.values()[i] for row in self.rows]
