"""Homotopy parameter update rules and the endgame bound relaxation.

Pure functions over scalars/arrays so they can be unit-tested against
high-precision evaluation; the iteration engine calls them each iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class HomotopyState:
    """Joint barrier/relaxation state of the relaxation algorithm.

    tau_v is the per-pair relaxation vector entering the Scholtes rows; it is
    refreshed uniformly to the scalar tau each iteration.  delta1/delta2 are
    the endgame lower-bound relaxations (persistent, never decreased).
    """

    mu: float
    tau: float
    tau_v: np.ndarray
    delta1: np.ndarray
    delta2: np.ndarray
    mu_rule: str = "monotone"
    tau_rule: str = "rolloff"

    @staticmethod
    def fresh(mu0, tau0, n_cc, mu_rule="monotone", tau_rule="rolloff"):
        return HomotopyState(
            mu=mu0, tau=tau0, tau_v=np.full(n_cc, tau0),
            delta1=np.zeros(n_cc), delta2=np.zeros(n_cc),
            mu_rule=mu_rule, tau_rule=tau_rule,
        )

    def set_tau(self, tau):
        self.tau = tau
        self.tau_v[:] = tau


@dataclass(frozen=True)
class UpdateRuleConfig:
    """Active mu/tau update rules with their parameters and floors."""

    mu_rule: str = "monotone"
    tau_rule: str = "rolloff"
    alpha_mu: float = 0.2
    beta_mu: float = 1.5
    alpha_tau: float = 1.0
    beta_tau: float = 1.0
    rolloff_a: float = 2.0
    rolloff_b: float = 1e-6
    rolloff_c: float = 1.0
    gamma: float = 2.0
    r: float = 1e-8
    sigma_min: float = 1e-8
    mu_min: float = 1e-9

    @staticmethod
    def from_options(opts) -> "UpdateRuleConfig":
        # `gamma` doubles as the penalty algorithm's trigger exponent; the
        # barrier rule's factor only comes from the relaxation table
        is_relax = "relaxation_update" in opts
        return UpdateRuleConfig(
            mu_rule=opts["barrier"],
            tau_rule=opts.get("relaxation_update", "rolloff"),
            alpha_mu=opts["alpha_mu"], beta_mu=opts["beta_mu"],
            alpha_tau=opts.get("sigma_mu_ratio", 1.0),
            beta_tau=opts.get("sigma_mu_exp", 1.0),
            rolloff_a=opts.get("rolloff_slope", 2.0),
            rolloff_b=opts.get("rolloff_point", 1e-6),
            rolloff_c=opts.get("rolloff_max", 1.0),
            gamma=opts["gamma"] if is_relax else 2.0,
            r=opts.get("r", 1e-8),
            sigma_min=opts.get("sigma_min", 1e-8), mu_min=opts["mu_min"],
        )

    def tau_of_mu(self, mu, x1=None, x2=None):
        """Apply the active tau rule (the LOQO rule needs the iterate)."""
        if self.tau_rule == "proportional":
            return update_tau_proportional(mu, self.alpha_tau, self.beta_tau,
                                           self.sigma_min)
        if self.tau_rule == "rolloff":
            return update_tau_rolloff(mu, self.rolloff_a, self.rolloff_b,
                                      self.rolloff_c, self.sigma_min)
        if x1 is None:
            return max(self.sigma_min, mu)
        return update_tau_loqo(x1, x2, self.gamma, self.r, self.sigma_min)


@dataclass
class PenaltyState:
    """Penalty weight plus the complementarity history ring buffer."""

    rho: float
    rho_max: float
    history: list = field(default_factory=list)
    history_cap: int = 10
    mu: float = 0.1

    def push_history(self, comp_value):
        self.history.append(float(comp_value))
        if len(self.history) > self.history_cap:
            self.history.pop(0)


# ---------------------------------------------------------------------------
# barrier parameter rules
# ---------------------------------------------------------------------------

def update_mu_monotone(mu, barrier_solved, alpha_mu=0.2, beta_mu=1.5, mu_min=1e-9):
    """Fiacco-McCormick accelerating profile, applied once the barrier
    subproblem is solved: mu' = max(mu_min, min(alpha_mu*mu, mu**beta_mu))."""
    if not barrier_solved:
        return mu
    return max(mu_min, min(alpha_mu * mu, mu ** beta_mu))


def loqo_sigma(products, count, gamma, r):
    """Centrality-based sigma: gamma * min((1-r)(1-xi)/xi, 2)^3 with
    xi = count * min(products) / sum(products)."""
    products = np.maximum(np.asarray(products, dtype=float), 0.0)
    total = float(np.sum(products))
    if products.size == 0 or total <= 0.0:
        return 0.0
    xi = count * float(np.min(products)) / total
    xi = min(max(xi, 1e-12), 1.0)
    if xi >= 1.0:
        return 0.0
    return gamma * min((1.0 - r) * (1.0 - xi) / xi, 2.0) ** 3


def update_mu_loqo(lower_products, upper_products, n, n_cc, gamma, r,
                   mu_min=1e-9, classic=False):
    """Adaptive barrier value from the joint centrality measure.

    The joint mode concatenates the lower-level products X z with the
    upper-level products X1 x2 and averages over n + n_cc; the classic mode
    uses the lower-level products alone.
    """
    if classic:
        prods = np.asarray(lower_products, dtype=float)
    else:
        prods = np.concatenate([np.asarray(lower_products, dtype=float),
                                np.asarray(upper_products, dtype=float)])
    count = n + n_cc
    sigma = loqo_sigma(prods, count, gamma, r)
    avg = float(np.sum(np.maximum(prods, 0.0))) / count if count else 0.0
    return max(mu_min, sigma * avg)


# ---------------------------------------------------------------------------
# relaxation parameter rules
# ---------------------------------------------------------------------------

def update_tau_proportional(mu, alpha_tau=1.0, beta_tau=1.0, sigma_min=1e-8):
    return max(sigma_min, alpha_tau * mu ** beta_tau)


def update_tau_rolloff(mu, a=2.0, b=1e-6, c=1.0, sigma_min=1e-8):
    """tau = c * mu^a / (mu^a + b): plateaus at c for large mu, slope a below
    the knee set by b."""
    mua = mu ** a
    return max(sigma_min, c * mua / (mua + b))


def update_tau_loqo(x1, x2, gamma_tau=2.0, r_tau=1e-8, sigma_min=1e-8):
    """Nonmonotone tau from the centrality of the upper-level products."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    n_cc = x1.size
    if n_cc == 0:
        return sigma_min
    prods = x1 * x2
    sigma_tau = loqo_sigma(prods, n_cc, gamma_tau, r_tau)
    avg = float(np.sum(np.maximum(prods, 0.0))) / n_cc
    return max(sigma_min, sigma_tau * avg)


# ---------------------------------------------------------------------------
# endgame bound relaxation
# ---------------------------------------------------------------------------

def psi_endgame(zeta, x_other, tau, mu, delta_max=1e-4):
    """Bound relaxation putting the linear barrier model's minimum at zero.

    Psi = tau*mu / (mu*x_other + tau*zeta) when zeta >= 0 and the denominator
    is positive; otherwise any relaxation works and delta_max is returned.
    """
    den = mu * x_other + tau * zeta
    if zeta >= 0.0 and den > 0.0:
        return tau * mu / den
    return delta_max


def endgame_multiplier_estimates(z1, z2, z_s, x1, x2):
    """zeta_hat estimates from the bound and Scholtes multipliers."""
    return z1 - z_s * x2, z2 - z_s * x1


def endgame_step(iterate, residual_norm, state: HomotopyState, options) -> tuple:
    """Relax lower bounds on pairs whose estimated multipliers are negative.

    Triggered by the caller once the KKT residual is below the endgame
    threshold.  Per pair, at most one of delta1/delta2 is adjusted per call
    (if/elif), deltas persist and never decrease.
    """
    xi_exp = options["tau"]
    delta_max = options["delta_max"]
    threshold = residual_norm ** xi_exp
    zeta1, zeta2 = endgame_multiplier_estimates(
        iterate.z1, iterate.z2, iterate.z_s, iterate.x1, iterate.x2)
    delta1 = state.delta1
    delta2 = state.delta2
    for i in range(delta1.size):
        if zeta1[i] <= -threshold:
            psi = psi_endgame(zeta1[i], iterate.x2[i], state.tau_v[i],
                              state.mu, delta_max)
            delta1[i] = max(delta1[i], min(psi, delta_max))
        elif zeta2[i] <= -threshold:
            psi = psi_endgame(zeta2[i], iterate.x1[i], state.tau_v[i],
                              state.mu, delta_max)
            delta2[i] = max(delta2[i], min(psi, delta_max))
    return delta1, delta2


# ---------------------------------------------------------------------------
# centered initialization
# ---------------------------------------------------------------------------

def centered_init_values(tau0, k_cen=0.5, slack_mode="feasible"):
    """Complementarity variable and slack levels for the centered start.

    x1 = x2 = sqrt(k_cen*tau0) puts every pair on the centered curve; the
    feasible slack (1-k_cen)*tau0 zeroes the relaxed constraint exactly.
    """
    k = min(k_cen, 1.0 - 1e-4)
    xv = float(np.sqrt(k * tau0))
    if slack_mode == "sqrt":
        sv = float(np.sqrt(max(2.0 * (1.0 - k * tau0), 1e-16)))
    else:
        sv = (1.0 - k) * tau0
    return xv, sv


# ---------------------------------------------------------------------------
# penalty parameter rules
# ---------------------------------------------------------------------------

def update_rho_static(state: PenaltyState, barrier_solved, growth=10.0):
    if barrier_solved:
        return min(state.rho_max, growth * state.rho)
    return state.rho


def update_rho_dynamic(state: PenaltyState, comp_value, mu,
                       gamma=0.4, eta_pen=0.99, history_len=10, growth=10.0):
    """Increase rho when the complementarity residual stagnates.

    Both trigger conditions must hold: the residual is large relative to the
    barrier (comp >= mu^gamma) and has not decreased enough against the mean
    of the last history_len values.  With fewer than history_len completed
    iterations the mean is undefined and the rule holds.
    """
    if len(state.history) < history_len:
        return state.rho
    mean = sum(state.history[-history_len:]) / history_len
    if comp_value >= mu ** gamma and comp_value >= eta_pen * mean:
        return min(state.rho_max, growth * state.rho)
    return state.rho
