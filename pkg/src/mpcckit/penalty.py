"""Interior-penalty algorithm: f + rho * x1'x2 with static/dynamic rho updates.

Reuses the shared engine; with n_cc = 0 its iterates coincide bitwise with
the relaxation engine on the same NLP (the penalty term vanishes and no
Scholtes rows exist in either).
"""

from __future__ import annotations

import numpy as np

from .core import BarrierEngine
from .linalg import FactorizationCounter, q_regularize_critical, q_regularize_eig
from .model import MpccProblem, to_standard_form
from .options import resolve
from .result import SolveResult
from .updates import PenaltyState, update_rho_dynamic, update_rho_static

__all__ = [
    "PenaltySolver", "solve_penalty", "penalty_kkt_residual", "PenaltyState",
    "update_rho_static", "update_rho_dynamic", "q_regularize_penalty",
]


def penalty_kkt_residual(iterate, mu, rho):
    """The seven residual rows of the penalized barrier KKT system.

    r1..r3 are the stationarity rows (the penalty enters as rho*x2 and
    rho*x1), r4 = c(x), and r5..r7 the mu-perturbed bound complementarity.
    """
    std = iterate.problem
    n0, ncc = std.n0, std.n_cc
    rows = iterate.grad.copy()
    if std.m:
        rows += iterate.jac.T @ iterate.y_c
    rows[n0:n0 + ncc] += rho * iterate.x2
    rows[n0 + ncc:] += rho * iterate.x1
    act = ~std.free_mask[:n0]
    r1 = rows[:n0].copy()
    r1[act] -= iterate.z0[act]
    r2 = rows[n0:n0 + ncc] - iterate.z1
    r3 = rows[n0 + ncc:] - iterate.z2
    r4 = iterate.c.copy()
    r5 = iterate.x0[act] * iterate.z0[act] - mu
    r6 = iterate.shifted1 * iterate.z1 - mu
    r7 = iterate.shifted2 * iterate.z2 - mu
    return r1, r2, r3, r4, r5, r6, r7


def q_regularize_penalty(kkt, scheme, alpha_b=0.99, lam_min=1e-8):
    """Apply the configured Q regularization to a penalty-shaped system."""
    if scheme == "critical":
        return q_regularize_critical(kkt, alpha_b)
    if scheme == "eigenclip":
        return q_regularize_eig(kkt, lam_min)
    return kkt


class PenaltySolver:
    """Interior-penalty solver with the same surface as RelaxationSolver."""

    algorithm = "penalty"

    def __init__(self, **options):
        self._overrides = dict(options)
        self.options = resolve("penalty", self._overrides)

    def get_params(self, deep=True):
        return dict(self.options)

    def set_params(self, **params):
        self._overrides.update(params)
        self.options = resolve("penalty", self._overrides)
        return self

    def solve(self, problem: MpccProblem) -> SolveResult:
        std = to_standard_form(problem)
        counter = FactorizationCounter()
        engine = BarrierEngine(std, self.options, "penalty",
                               problem_name=problem.name, counter=counter)
        return engine.solve()


def solve_penalty(problem: MpccProblem, options: dict | None = None) -> SolveResult:
    return PenaltySolver(**(options or {})).solve(problem)
