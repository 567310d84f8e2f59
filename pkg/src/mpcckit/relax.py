"""Relaxation-based interior-point algorithm: joint mu/tau homotopy with the
endgame bound relaxation.

The heavy lifting lives in the shared engine (`core.BarrierEngine`); this
module provides the public solver class, the ten-block perturbed KKT residual,
and re-exports the update rules and endgame pieces.
"""

from __future__ import annotations

import numpy as np

from .core import BarrierEngine
from .linalg import FactorizationCounter
from .model import MpccProblem, to_standard_form
from .options import resolve
from .result import SolveResult
from .updates import (HomotopyState, UpdateRuleConfig, centered_init_values,
                      endgame_step, psi_endgame, update_mu_loqo,
                      update_mu_monotone, update_tau_loqo,
                      update_tau_proportional, update_tau_rolloff)

__all__ = [
    "RelaxationSolver", "solve_relaxation", "relaxed_kkt_residual",
    "HomotopyState", "UpdateRuleConfig", "centered_init_values",
    "endgame_step", "psi_endgame", "update_mu_monotone", "update_mu_loqo",
    "update_tau_proportional", "update_tau_rolloff", "update_tau_loqo",
]


def relaxed_kkt_residual(iterate, mu, tau_v):
    """The ten residual blocks of the perturbed relaxed-KKT system.

    Returns (r1..r10) with r1..r3 the stationarity rows split by partition
    (including the bound-multiplier terms), r4 = y_s - z_s, r5 = c(x),
    r6 = X1 x2 + s - tau_v, and r7..r10 the mu-perturbed complementarity rows.
    """
    std = iterate.problem
    n0, ncc = std.n0, std.n_cc
    tau_v = np.full(ncc, tau_v) if np.isscalar(tau_v) else np.asarray(tau_v, float)
    rows = iterate.grad.copy()
    if std.m:
        rows += iterate.jac.T @ iterate.y_c
    rows[n0:n0 + ncc] += iterate.x2 * iterate.y_s
    rows[n0 + ncc:] += iterate.x1 * iterate.y_s
    act = ~std.free_mask[:n0]
    r1 = rows[:n0].copy()
    r1[act] -= iterate.z0[act]
    r2 = rows[n0:n0 + ncc] - iterate.z1
    r3 = rows[n0 + ncc:] - iterate.z2
    r4 = iterate.y_s - iterate.z_s
    r5 = iterate.c.copy()
    r6 = iterate.comp_products + iterate.s - tau_v
    r7 = iterate.x0[act] * iterate.z0[act] - mu
    r8 = iterate.shifted1 * iterate.z1 - mu
    r9 = iterate.shifted2 * iterate.z2 - mu
    r10 = iterate.s * iterate.z_s - mu
    return r1, r2, r3, r4, r5, r6, r7, r8, r9, r10


class RelaxationSolver:
    """Scholtes-relaxation interior-point solver.

    Construct with option overrides (validated against the relaxation
    registry), then call solve(problem).  get_params/set_params follow the
    estimator convention so sweeps can clone and reconfigure solvers.
    """

    algorithm = "relaxation"

    def __init__(self, **options):
        self._overrides = dict(options)
        self.options = resolve("relaxation", self._overrides)

    def get_params(self, deep=True):
        return dict(self.options)

    def set_params(self, **params):
        self._overrides.update(params)
        self.options = resolve("relaxation", self._overrides)
        return self

    def solve(self, problem: MpccProblem) -> SolveResult:
        std = to_standard_form(problem)
        counter = FactorizationCounter()
        engine = BarrierEngine(std, self.options, "relaxation",
                               problem_name=problem.name, counter=counter)
        result = engine.solve()
        return result


def solve_relaxation(problem: MpccProblem, options: dict | None = None) -> SolveResult:
    return RelaxationSolver(**(options or {})).solve(problem)
