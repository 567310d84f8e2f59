"""Solve result containers and the per-iteration log record."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ipm import TerminationReport
from .model import MpccMultipliers

STATUS_SUCCESS = "success"
STATUS_MAX_ITER = "max_iter"
STATUS_RESTORATION_FAILED = "restoration_failed"
STATUS_DIVERGED = "diverged"
STATUS_PENALTY_SATURATED = "penalty_saturated"
STATUS_STALLED = "stalled"
STATUS_FAILURE = "failure"

ALL_STATUSES = (
    STATUS_SUCCESS, STATUS_MAX_ITER, STATUS_RESTORATION_FAILED,
    STATUS_DIVERGED, STATUS_PENALTY_SATURATED, STATUS_STALLED, STATUS_FAILURE,
)

LOG_FIELDS = (
    "iteration", "mu", "tau", "rho", "f", "theta", "l_inf", "comp_upper",
    "alpha_pr", "alpha_du", "fact_count", "delta_w", "delta_c",
    "n_pos", "n_neg", "n_zero", "reg_action",
)


@dataclass
class IterationRecord:
    iteration: int
    mu: float
    tau: float
    rho: float
    f: float
    theta: float
    l_inf: float
    comp_upper: float
    alpha_pr: float
    alpha_du: float
    fact_count: int
    delta_w: float
    delta_c: float
    n_pos: int
    n_neg: int
    n_zero: int
    reg_action: str

    def as_row(self):
        return [getattr(self, name) for name in LOG_FIELDS]


@dataclass
class SolveResult:
    status: str
    x: np.ndarray                  # solution in original coordinates
    objective: float
    report: TerminationReport      # unscaled residual components
    comp_inf: float                # ||X1 x2||_inf at the solution
    iterations: int
    factorizations: int
    records: list = field(default_factory=list)
    stationarity: str = "none"
    multipliers: MpccMultipliers | None = None
    x_std: np.ndarray | None = None
    iterate: object = None
    algorithm: str = ""
    problem_name: str = ""
    message: str = ""

    @property
    def success(self):
        return self.status == STATUS_SUCCESS

    def summary_lines(self):
        """Machine-parseable key=value lines (floats via repr: bit-stable)."""
        rep = self.report
        lines = [
            f"status={self.status}",
            f"algorithm={self.algorithm}",
            f"problem={self.problem_name}",
            f"objective={self.objective!r}",
            f"stationarity={rep.stationarity!r}",
            f"constraint_violation={rep.constraint_violation!r}",
            f"comp_lower={rep.comp_lower!r}",
            f"comp_slack={rep.comp_slack!r}",
            f"comp_upper={rep.comp_upper!r}",
            f"residual_inf={rep.overall!r}",
            f"stationarity_label={self.stationarity}",
            f"iterations={self.iterations}",
            f"factorizations={self.factorizations}",
        ]
        if self.x.size <= 64:
            lines.append("x=" + ",".join(repr(float(v)) for v in self.x))
        if self.message and "\n" not in self.message:
            lines.append(f"message={self.message}")
        return lines
