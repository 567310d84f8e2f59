"""Filter line-search interior-point building blocks.

Holds the iterate container with its cached evaluations, the
fraction-to-boundary rule, the (theta, phi) filter with the usual
switching/Armijo acceptance logic, termination bookkeeping, and the
construction of the l1 feasibility-restoration problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .model import MpccProblem, StandardProblem

# filter line-search constants (standard filter-IPM values)
GAMMA_THETA = 1e-5
GAMMA_PHI = 1e-5
S_THETA = 1.1
S_PHI = 2.3
ETA_PHI = 1e-8
DELTA_SWITCH = 1.0
GAMMA_ALPHA = 0.05
KAPPA_SIGMA = 1e10
S_MAX = 100.0


@dataclass
class Iterate:
    """One consistent snapshot of primal/dual state with cached evaluations.

    x is the standard-form primal vector; s the Scholtes slacks (empty for
    the penalty algorithm); y = (y_c, y_s) the equality multipliers; z the
    bound multipliers per block.  delta1/delta2 are the endgame bound
    relaxations in effect when the snapshot was taken.  All caches (f, grad,
    c, jac, w) correspond to the stored point; w is the Hessian of
    f + y_c @ c at (x, y_c).
    """

    problem: StandardProblem
    x: np.ndarray
    s: np.ndarray
    y_c: np.ndarray
    y_s: np.ndarray
    z0: np.ndarray
    z1: np.ndarray
    z2: np.ndarray
    z_s: np.ndarray
    delta1: np.ndarray
    delta2: np.ndarray
    f: float = 0.0
    grad: np.ndarray = None
    c: np.ndarray = None
    jac: np.ndarray = None
    w: np.ndarray = None

    def __post_init__(self):
        if self.grad is None:
            self.refresh()

    def refresh(self):
        p = self.problem
        self.f = p.objective(self.x)
        self.grad = p.gradient(self.x)
        self.c = p.constraints(self.x) if p.m else np.zeros(0)
        self.jac = p.jacobian_dense(self.x) if p.m else np.zeros((0, p.n))
        self.w = p.hessian_dense(self.x, self.y_c)

    # --- partition helpers -------------------------------------------------
    @property
    def x0(self):
        return self.x[:self.problem.n0]

    @property
    def x1(self):
        n0 = self.problem.n0
        return self.x[n0:n0 + self.problem.n_cc]

    @property
    def x2(self):
        return self.x[self.problem.n0 + self.problem.n_cc:]

    @property
    def shifted1(self):
        return self.x1 + self.delta1

    @property
    def shifted2(self):
        return self.x2 + self.delta2

    @property
    def z_all(self):
        return np.concatenate([self.z0, self.z1, self.z2, self.z_s])

    @property
    def comp_products(self):
        return self.x1 * self.x2

    def scholtes_residual(self, tau_v):
        """X1 x2 + s - tau_v (empty when the problem has no pairs)."""
        if self.problem.n_cc == 0:
            return np.zeros(0)
        return self.comp_products + self.s - tau_v

    def with_deltas(self, delta1, delta2):
        return replace(self, delta1=delta1.copy(), delta2=delta2.copy())

    def take_step(self, alpha_pr, alpha_du, dx, ds, dy_c, dy_s,
                  dz0, dz1, dz2, dzs):
        return Iterate(
            problem=self.problem,
            x=self.x + alpha_pr * dx,
            s=self.s + alpha_pr * ds,
            y_c=self.y_c + alpha_du * dy_c,
            y_s=self.y_s + alpha_du * dy_s,
            z0=self.z0 + alpha_du * dz0,
            z1=self.z1 + alpha_du * dz1,
            z2=self.z2 + alpha_du * dz2,
            z_s=self.z_s + alpha_du * dzs,
            delta1=self.delta1.copy(),
            delta2=self.delta2.copy(),
        )

    def safeguard_multipliers(self, mu):
        """Project bound multipliers into the kappa_sigma box around mu/v."""
        p = self.problem
        act = ~p.free_mask[:p.n0]
        if np.any(act):
            v = self.x0[act]
            self.z0[act] = np.clip(self.z0[act], mu / (KAPPA_SIGMA * v),
                                   KAPPA_SIGMA * mu / v)
        if p.n_cc:
            self.z1 = np.clip(self.z1, mu / (KAPPA_SIGMA * self.shifted1),
                              KAPPA_SIGMA * mu / self.shifted1)
            self.z2 = np.clip(self.z2, mu / (KAPPA_SIGMA * self.shifted2),
                              KAPPA_SIGMA * mu / self.shifted2)
        if self.s.size:
            self.z_s = np.clip(self.z_s, mu / (KAPPA_SIGMA * self.s),
                               KAPPA_SIGMA * mu / self.s)


def fraction_to_boundary(v, dv, eta_b):
    """Largest alpha in [0, 1] with v + alpha*dv >= (1 - eta_b)*v, for v > 0."""
    v = np.asarray(v, dtype=float)
    dv = np.asarray(dv, dtype=float)
    if v.size == 0:
        return 1.0
    neg = dv < 0.0
    if not np.any(neg):
        return 1.0
    ratios = eta_b * v[neg] / (-dv[neg])
    return float(min(1.0, np.min(ratios)))


@dataclass
class TerminationReport:
    """Componentwise residuals entering the termination test."""

    stationarity: float
    constraint_violation: float
    comp_lower: float      # ||X z_x||_inf over the bounded primal blocks
    comp_slack: float      # ||S z_s||_inf
    comp_upper: float      # ||X1 x2||_inf
    scaled: bool = False

    @property
    def overall(self):
        return max(self.stationarity, self.constraint_violation,
                   self.comp_lower, self.comp_slack, self.comp_upper)


def check_termination(report: TerminationReport, eps_tol: float) -> bool:
    return report.overall <= eps_tol


class Filter:
    """Non-dominated set of (theta, phi) pairs with the theta_max guard."""

    def __init__(self, theta_max=math.inf):
        self.theta_max = theta_max
        self.entries = [(theta_max, -math.inf)]

    def reset(self):
        self.entries = [(self.theta_max, -math.inf)]

    def acceptable(self, theta, phi):
        return all(theta < t or phi < f for t, f in self.entries)

    def add(self, theta, phi):
        # a pair dominated by an existing entry is redundant; otherwise drop
        # entries the new pair dominates, keeping the set antichain
        if any(t <= theta and f <= phi for t, f in self.entries):
            return
        self.entries = [(t, f) for t, f in self.entries if not (t >= theta and f >= phi)]
        self.entries.append((theta, phi))

    def __len__(self):
        return len(self.entries)


@dataclass
class LineSearchModel:
    """Everything filter_line_search needs to probe trial points.

    theta0/phi0 are the measures at the current iterate, dphi the directional
    derivative of the barrier objective, and trial(alpha) evaluates a tentative
    step, returning (theta, phi) or None when an evaluator fails or produces
    non-finite values.
    """

    theta0: float
    phi0: float
    dphi: float
    trial: callable


def _alpha_min(theta0, dphi, theta_min):
    if dphi < 0.0 and theta0 <= theta_min:
        return GAMMA_ALPHA * min(
            GAMMA_THETA,
            GAMMA_PHI * theta0 / (-dphi) if theta0 > 0 else GAMMA_THETA,
            DELTA_SWITCH * theta0 ** S_THETA / (-dphi) ** S_PHI if theta0 > 0 else GAMMA_THETA,
        )
    if dphi < 0.0 and theta0 > 0.0:
        return GAMMA_ALPHA * min(GAMMA_THETA, GAMMA_PHI * theta0 / (-dphi))
    return GAMMA_ALPHA * GAMMA_THETA


def filter_line_search(model: LineSearchModel, filt: Filter, alpha_max,
                       theta_min=1e-4, max_backtracks=40):
    """Backtracking filter search: returns (alpha, accepted).

    Trials start from alpha_max and halve.  A trial must be acceptable to the
    filter; f-type steps (switching condition at low theta) additionally need
    Armijo decrease, all other steps sufficient progress versus the current
    point, in which case the filter is augmented with the margined pair.
    """
    alpha = float(alpha_max)
    amin = _alpha_min(model.theta0, model.dphi, theta_min)
    for _ in range(max_backtracks):
        if alpha < amin:
            return 0.0, False
        out = model.trial(alpha)
        if out is not None:
            theta_t, phi_t = out
            if math.isfinite(theta_t) and math.isfinite(phi_t) \
                    and filt.acceptable(theta_t, phi_t):
                switching = (model.dphi < 0.0 and
                             alpha * (-model.dphi) ** S_PHI
                             > DELTA_SWITCH * model.theta0 ** S_THETA)
                if switching and model.theta0 <= theta_min:
                    if phi_t <= model.phi0 + ETA_PHI * alpha * model.dphi:
                        return alpha, True
                else:
                    # at theta0 = 0 the theta branch is void: progress must
                    # come from phi
                    if ((model.theta0 > 0.0
                         and theta_t <= (1.0 - GAMMA_THETA) * model.theta0)
                            or phi_t <= model.phi0 - GAMMA_PHI * model.theta0):
                        filt.add((1.0 - GAMMA_THETA) * model.theta0,
                                 model.phi0 - GAMMA_PHI * model.theta0)
                        return alpha, True
        alpha *= 0.5
    return 0.0, False


# ---------------------------------------------------------------------------
# restoration problem construction
# ---------------------------------------------------------------------------

def build_restoration_problem(std: StandardProblem, x_ref, mu) -> MpccProblem:
    """l1 feasibility problem around x_ref.

    Variables (x, p, q) with c(x) - p + q = 0 and p, q >= 0; the objective is
    sum(p + q) plus a proximity term (zeta/2)(x - x_ref)' D (x - x_ref) with
    D = diag(min(1, 1/|x_ref|)) and zeta = sqrt(mu).  Free variables of the
    standard problem stay free.
    """
    n, m = std.n, std.m
    x_ref = np.asarray(x_ref, dtype=float).copy()
    d_r = np.minimum(1.0, 1.0 / np.maximum(np.abs(x_ref), 1e-8))
    zeta = math.sqrt(max(mu, 1e-12))

    def objective(v):
        x = v[:n]
        return float(np.sum(v[n:]) + 0.5 * zeta * np.sum(d_r * (x - x_ref) ** 2))

    def gradient(v):
        g = np.ones(n + 2 * m)
        g[:n] = zeta * d_r * (v[:n] - x_ref)
        return g

    def constraints(v):
        x = v[:n]
        return std.constraints(x) - v[n:n + m] + v[n + m:]

    def jacobian(v):
        import scipy.sparse as sp
        jx = std.jacobian(v[:n])
        eye = sp.identity(m, format="coo")
        return sp.hstack([jx, -eye, eye], format="coo")

    def hessian(v, y, obj_weight=1.0):
        import scipy.sparse as sp
        hx = std.hessian(v[:n], y, obj_weight=0.0)
        prox = sp.diags(obj_weight * zeta * d_r)
        top = (hx + prox).tocoo()
        full = sp.block_diag([top, sp.coo_matrix((2 * m, 2 * m))], format="coo")
        return full

    lx0 = np.zeros(n + 2 * m)
    lx0[:n][std.free_mask] = -math.inf
    start = np.empty(n + 2 * m)
    start[:n] = x_ref
    cval = std.constraints(x_ref)
    start[n:n + m] = np.maximum(cval, 0.0)
    start[n + m:] = np.maximum(-cval, 0.0)
    return MpccProblem(
        n0=n + 2 * m, n_cc=0, m=m,
        objective=objective, gradient=gradient, hessian=hessian,
        constraints=constraints, jacobian=jacobian,
        lg=np.zeros(m), ug=np.zeros(m),
        lx0=lx0, x_init=start, name="restoration",
    )
