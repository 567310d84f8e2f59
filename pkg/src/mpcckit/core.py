"""Shared filter line-search interior-point engine.

One iteration loop drives both the relaxation algorithm (Scholtes rows,
slacks, joint mu/tau homotopy, endgame) and the interior-penalty algorithm
(penalized objective, Q_rho blocks, rho updates).  With n_cc = 0 the two
modes execute identical arithmetic, which the tests pin down bitwise.
"""

from __future__ import annotations

import math
import time

import numpy as np

from . import ipm, linalg, updates
from .ipm import (Filter, Iterate, LineSearchModel, TerminationReport,
                  check_termination, filter_line_search, fraction_to_boundary)
from .linalg import FactorizationCounter, UnrecoverableKkt
from .model import MpccMultipliers, StandardProblem, classify_stationarity, index_sets, to_standard_form
from .result import (STATUS_DIVERGED, STATUS_FAILURE, STATUS_MAX_ITER,
                     STATUS_PENALTY_SATURATED, STATUS_RESTORATION_FAILED,
                     STATUS_SUCCESS, IterationRecord, SolveResult)

_STATUS_STOPPED = "_stopped"  # internal: stop_callback fired (restoration exit)


class BarrierEngine:
    """Interior-point iteration over a standard-form problem.

    mode selects the relaxation or penalty formulation.  `stop_callback`
    (internal) ends the loop early once a predicate on the iterate holds;
    `in_restoration` marks a nested feasibility solve and disables further
    nesting.
    """

    def __init__(self, std: StandardProblem, options: dict, mode: str,
                 problem_name: str = "", counter: FactorizationCounter | None = None,
                 stop_callback=None, in_restoration: bool = False):
        self.std = std
        self.opts = options
        self.mode = mode
        self.problem_name = problem_name
        self.counter = counter if counter is not None else FactorizationCounter()
        self.stop_callback = stop_callback
        self.in_restoration = in_restoration
        self.has_slacks = mode == "relaxation"
        self.mu = float(options["barrier.mu_init"])
        self.rule_config = updates.UpdateRuleConfig.from_options(options)
        ncc = std.n_cc
        if mode == "relaxation":
            tau0 = self.tau_rule_value(self.mu, None)
            self.state = updates.HomotopyState.fresh(
                self.mu, tau0, ncc, options["barrier"], options["relaxation_update"])
            self.pstate = None
        else:
            self.state = updates.HomotopyState.fresh(self.mu, 0.0, ncc)
            self.state.tau_v[:] = 0.0
            self.pstate = updates.PenaltyState(
                rho=float(options["rho_0"]), rho_max=float(options["rho_max"]),
                history_cap=int(options["comp_history_length"]), mu=self.mu)
        # adaptive-rule globalization bookkeeping
        self.ref_res = math.inf
        self.stall = 0
        self.records: list[IterationRecord] = []

    # ------------------------------------------------------------------
    # parameter rules
    # ------------------------------------------------------------------
    def tau_rule_value(self, mu, iterate):
        cfg = self.rule_config
        if iterate is None:
            return cfg.tau_of_mu(mu)
        return cfg.tau_of_mu(mu, iterate.x1, iterate.x2)

    # ------------------------------------------------------------------
    # residual machinery
    # ------------------------------------------------------------------
    def _bounded_mask(self):
        return ~self.std.free_mask[:self.std.n0]

    def pair_gradient_terms(self, it):
        """Gradient contribution of the Scholtes multipliers (or the penalty)."""
        ncc = self.std.n_cc
        if ncc == 0:
            return np.zeros(0), np.zeros(0)
        if self.mode == "relaxation":
            return it.x2 * it.y_s, it.x1 * it.y_s
        rho = self.pstate.rho
        return rho * it.x2, rho * it.x1

    def stationarity_rows(self, it):
        """Dual-feasibility rows (with bound multipliers), mu-independent."""
        std = self.std
        n0, ncc = std.n0, std.n_cc
        rows = it.grad.copy()
        if std.m:
            rows += it.jac.T @ it.y_c
        t1, t2 = self.pair_gradient_terms(it)
        rows[n0:n0 + ncc] += t1
        rows[n0 + ncc:] += t2
        act = self._bounded_mask()
        rows[:n0][act] -= it.z0[act]
        rows[n0:n0 + ncc] -= it.z1
        rows[n0 + ncc:] -= it.z2
        if self.has_slacks and ncc:
            return np.concatenate([rows, it.y_s - it.z_s])
        return rows

    def theta_vector(self, it):
        if self.has_slacks and self.std.n_cc:
            return np.concatenate([it.c, it.scholtes_residual(self.state.tau_v)])
        return it.c

    def theta(self, it):
        v = self.theta_vector(it)
        return float(np.linalg.norm(v, np.inf)) if v.size else 0.0

    def _scalings(self, it):
        n_bound = int(np.sum(self._bounded_mask())) + 2 * self.std.n_cc + it.s.size
        n_mult = it.y_c.size + it.y_s.size + n_bound
        z_sum = float(np.sum(np.abs(it.z_all)))
        y_sum = float(np.sum(np.abs(it.y_c)) + np.sum(np.abs(it.y_s)))
        sd = max(ipm.S_MAX, (y_sum + z_sum) / max(1, n_mult)) / ipm.S_MAX
        sc = max(ipm.S_MAX, z_sum / max(1, n_bound)) / ipm.S_MAX
        return sd, sc

    def _comp_blocks(self, it):
        act = self._bounded_mask()
        lower = [it.x0[act] * it.z0[act]]
        if self.std.n_cc:
            lower.append(it.shifted1 * it.z1)
            lower.append(it.shifted2 * it.z2)
        return np.concatenate(lower) if lower else np.zeros(0)

    def termination_reports(self, it):
        stat = self.stationarity_rows(it)
        stat_norm = float(np.linalg.norm(stat, np.inf)) if stat.size else 0.0
        cons = float(np.linalg.norm(it.c, np.inf)) if it.c.size else 0.0
        lower = self._comp_blocks(it)
        comp_lower = float(np.linalg.norm(lower, np.inf)) if lower.size else 0.0
        comp_slack = float(np.linalg.norm(it.s * it.z_s, np.inf)) if it.s.size else 0.0
        comp_upper = (float(np.linalg.norm(it.comp_products, np.inf))
                      if self.std.n_cc else 0.0)
        unscaled = TerminationReport(stat_norm, cons, comp_lower, comp_slack,
                                     comp_upper, scaled=False)
        sd, sc = self._scalings(it)
        scaled = TerminationReport(stat_norm / sd, cons, comp_lower / sc,
                                   comp_slack / sc, comp_upper, scaled=True)
        return unscaled, scaled

    def subproblem_error(self, it):
        """Scaled optimality error of the current (mu, tau) barrier problem."""
        mu = self.mu
        stat = self.stationarity_rows(it)
        sd, sc = self._scalings(it)
        stat_norm = (float(np.linalg.norm(stat, np.inf)) if stat.size else 0.0) / sd
        theta = self.theta(it)
        parts = [stat_norm, theta]
        lower = self._comp_blocks(it)
        if lower.size:
            parts.append(float(np.linalg.norm(lower - mu, np.inf)) / sc)
        if it.s.size:
            parts.append(float(np.linalg.norm(it.s * it.z_s - mu, np.inf)) / sc)
        return max(parts)

    def reduced_rhs(self, it, mu, tau_v=None):
        """Right-hand side of the augmented system at barrier value mu.

        tau_v overrides the Scholtes relaxation entering the r6 rows (the
        quality rule's affine direction needs mu = tau = 0).
        """
        std = self.std
        n0, ncc = std.n0, std.n_cc
        if tau_v is None:
            tau_v = self.state.tau_v
        rhs_x = it.grad.copy()
        if std.m:
            rhs_x += it.jac.T @ it.y_c
        t1, t2 = self.pair_gradient_terms(it)
        rhs_x[n0:n0 + ncc] += t1
        rhs_x[n0 + ncc:] += t2
        act = self._bounded_mask()
        rhs_x[:n0][act] -= mu / it.x0[act]
        if ncc:
            rhs_x[n0:n0 + ncc] -= mu / it.shifted1
            rhs_x[n0 + ncc:] -= mu / it.shifted2
        pieces = [rhs_x]
        if self.has_slacks and ncc:
            pieces.append(it.y_s - mu / it.s)
            pieces.append(np.concatenate([it.c, it.scholtes_residual(tau_v)]))
        else:
            pieces.append(it.c)
        return np.concatenate(pieces)

    def centering_unit(self, it):
        """d rhs/d mu (negated): barrier-direction vector for the quality probes."""
        std = self.std
        n0, ncc = std.n0, std.n_cc
        u_x = np.zeros(std.n)
        act = self._bounded_mask()
        u_x[:n0][act] = 1.0 / it.x0[act]
        if ncc:
            u_x[n0:n0 + ncc] = 1.0 / it.shifted1
            u_x[n0 + ncc:] = 1.0 / it.shifted2
        pieces = [u_x]
        if self.has_slacks and ncc:
            pieces.append(1.0 / it.s)
            pieces.append(np.concatenate([np.zeros(std.m), np.ones(ncc)]))
        else:
            pieces.append(np.zeros(std.m))
        return np.concatenate(pieces)

    def average_complementarity(self, it):
        lower = self._comp_blocks(it)
        upper = np.maximum(it.comp_products, 0.0)
        total = float(np.sum(lower)) + float(np.sum(upper))
        return total / (self.std.n + self.std.n_cc)

    # ------------------------------------------------------------------
    # barrier function
    # ------------------------------------------------------------------
    def _penalized_objective(self, x, f_val):
        if self.mode == "penalty" and self.std.n_cc:
            n0, ncc = self.std.n0, self.std.n_cc
            return f_val + self.pstate.rho * float(
                np.dot(x[n0:n0 + ncc], x[n0 + ncc:]))
        return f_val

    def phi_at(self, x, s, f_val, mu):
        std = self.std
        n0, ncc = std.n0, std.n_cc
        act = self._bounded_mask()
        val = self._penalized_objective(x, f_val)
        terms = 0.0
        x0 = x[:n0][act]
        if x0.size:
            terms += float(np.sum(np.log(x0)))
        if ncc:
            terms += float(np.sum(np.log(x[n0:n0 + ncc] + self.state.delta1)))
            terms += float(np.sum(np.log(x[n0 + ncc:] + self.state.delta2)))
        if s.size:
            terms += float(np.sum(np.log(s)))
        return val - mu * terms

    def phi_gradient_dot(self, it, dx, ds, mu):
        std = self.std
        n0, ncc = std.n0, std.n_cc
        g = it.grad.copy()
        if self.mode == "penalty" and ncc:
            rho = self.pstate.rho
            g[n0:n0 + ncc] += rho * it.x2
            g[n0 + ncc:] += rho * it.x1
        act = self._bounded_mask()
        g[:n0][act] -= mu / it.x0[act]
        if ncc:
            g[n0:n0 + ncc] -= mu / it.shifted1
            g[n0 + ncc:] -= mu / it.shifted2
        val = float(np.dot(g, dx))
        if ds.size:
            val += float(np.dot(-mu / it.s, ds))
        return val

    # ------------------------------------------------------------------
    # assembly and steps
    # ------------------------------------------------------------------
    def assemble(self, it):
        if self.mode == "relaxation":
            return linalg.assemble_relaxation_kkt(
                it, self.std, delta_c_fixed=self.opts["delta_c_fixed"])
        return linalg.assemble_penalty_kkt(
            it, self.std, self.pstate.rho, delta_c_fixed=self.opts["delta_c_fixed"])

    def split_direction(self, d):
        std = self.std
        n, ncc, m = std.n, std.n_cc, std.m
        dx = d[:n]
        if self.has_slacks and ncc:
            ds = d[n:n + ncc]
            dy = d[n + ncc:]
            dy_c, dy_s = dy[:m], dy[m:]
        else:
            ds = np.zeros(0)
            dy_c = d[n:]
            dy_s = np.zeros(0)
        return dx, ds, dy_c, dy_s

    # ------------------------------------------------------------------
    # parameter updates
    # ------------------------------------------------------------------
    def _progress_ok(self, overall):
        if overall < 0.99 * self.ref_res:
            self.ref_res = overall
            self.stall = 0
            return True
        self.stall += 1
        return self.stall < 5

    def update_parameters(self, it, fact, rep_unscaled):
        """New (mu, tau) [or (mu, rho)] per the active rules.

        Adaptive rules fall back to the monotone rule whenever the residual
        has stopped making progress (or no factorization is available).
        Returns (mu, tau, quality debug record or None).
        """
        opts = self.opts
        cfg = self.rule_config
        rule = cfg.mu_rule
        mu_min = cfg.mu_min
        barrier_solved = self.subproblem_error(it) <= opts["kappa_epsilon"] * self.mu
        debug = None
        adaptive_ok = rule != "monotone" and self._progress_ok(rep_unscaled.overall)

        if rule == "monotone" or not adaptive_ok:
            mu_new = updates.update_mu_monotone(
                self.mu, barrier_solved, cfg.alpha_mu, cfg.beta_mu, mu_min)
        elif rule == "loqo":
            lower = self._comp_blocks(it)
            if it.s.size:
                lower_classic = np.concatenate([lower, it.s * it.z_s])
            else:
                lower_classic = lower
            if opts["loqo_classic"]:
                mu_new = updates.update_mu_loqo(
                    lower_classic, np.zeros(0), self.std.n, self.std.n_cc,
                    cfg.gamma, cfg.r, mu_min, classic=True)
            else:
                mu_new = updates.update_mu_loqo(
                    lower, it.comp_products, self.std.n, self.std.n_cc,
                    cfg.gamma, cfg.r, mu_min, classic=False)
        else:  # quality
            if fact is None or not fact.success:
                mu_new = updates.update_mu_monotone(
                    self.mu, barrier_solved, cfg.alpha_mu, cfg.beta_mu, mu_min)
            else:
                mu_new, debug = self.quality_update(it, fact)

        if self.mode == "relaxation":
            tau_new = self.tau_rule_value(mu_new, it)
            return mu_new, tau_new, debug
        self.pstate.mu = mu_new
        # exact penalty: once complementarity is within tolerance the current
        # rho already suffices, and growing it further only amplifies
        # floating-point noise in the stationarity rows
        if opts["rho_update"] == "static" and \
                rep_unscaled.comp_upper > opts["tol"]:
            self.pstate.rho = updates.update_rho_static(
                self.pstate, barrier_solved, opts["rho_growth_rate"])
        return mu_new, 0.0, debug

    def quality_update(self, it, fact):
        """Two back-solves on one factorization, sigma by golden section.

        The affine direction solves the system at (mu, tau) = 0; the blended
        direction d(sigma) = d_aff + sigma*d_cen models the joint update
        mu = tau = sigma * (average complementarity).  q_L is the linearized
        KKT error at the fraction-to-boundary-capped trial point.
        """
        opts = self.opts
        a_avg = self.average_complementarity(it)
        rhs_aff = self.reduced_rhs(it, 0.0, tau_v=np.zeros(self.std.n_cc))
        unit = self.centering_unit(it)
        d_aff = linalg.solve_step(fact, rhs_aff).d
        d_cen = linalg.solve_step(fact, -a_avg * unit).d

        stat_sq = float(np.sum(self.stationarity_rows(it) ** 2))
        theta_vec = self.theta_vector(it)
        cons_sq = float(np.sum(theta_vec ** 2))
        act = self._bounded_mask()
        eta_b = max(0.99, 1.0 - self.mu)

        def q_of(sigma):
            d = d_aff + sigma * d_cen
            dx, ds, _, _ = self.split_direction(d)
            dz0, dz1, dz2, dzs = linalg.recover_bound_multiplier_steps(
                it, dx, ds, sigma * a_avg)
            prim_v = [it.x0[act], it.shifted1, it.shifted2, it.s]
            prim_d = [dx[:self.std.n0][act],
                      dx[self.std.n0:self.std.n0 + self.std.n_cc],
                      dx[self.std.n0 + self.std.n_cc:], ds]
            dual_v = [it.z0[act], it.z1, it.z2, it.z_s]
            dual_d = [dz0[act], dz1, dz2, dzs]
            a_pr = min(fraction_to_boundary(v, dv, eta_b)
                       for v, dv in zip(prim_v, prim_d))
            a_du = min(fraction_to_boundary(v, dv, eta_b)
                       for v, dv in zip(dual_v, dual_d))
            q = (1.0 - a_du) ** 2 * stat_sq + (1.0 - a_pr) ** 2 * cons_sq
            for v, dv, z, dz in zip(prim_v, prim_d, dual_v, dual_d):
                prod = (z + a_du * dz) * (v + a_pr * dv)
                q += float(np.sum(prod ** 2))
            ncc = self.std.n_cc
            if ncc:
                x1n = it.x1 + a_pr * dx[self.std.n0:self.std.n0 + ncc]
                x2n = it.x2 + a_pr * dx[self.std.n0 + ncc:]
                q += float(np.sum((x1n * x2n) ** 2))
            return q

        lo = math.log(opts["quality_sigma_lo"])
        hi = math.log(opts["quality_sigma_hi"])
        invphi = (math.sqrt(5.0) - 1.0) / 2.0
        aa, bb = lo, hi
        c1 = bb - invphi * (bb - aa)
        c2 = aa + invphi * (bb - aa)
        f1, f2 = q_of(math.exp(c1)), q_of(math.exp(c2))
        for _ in range(40):
            if f1 <= f2:
                bb, c2, f2 = c2, c1, f1
                c1 = bb - invphi * (bb - aa)
                f1 = q_of(math.exp(c1))
            else:
                aa, c1, f1 = c1, c2, f2
                c2 = aa + invphi * (bb - aa)
                f2 = q_of(math.exp(c2))
        sigma_star = math.exp((aa + bb) / 2.0)
        mu_new = max(opts["mu_min"], sigma_star * a_avg)
        debug = {"sigma": sigma_star, "avg": a_avg, "d_aff": d_aff,
                 "d_cen": d_cen, "fact": fact, "q_of": q_of}
        return mu_new, debug

    # ------------------------------------------------------------------
    # initialization
    # ------------------------------------------------------------------
    def initial_iterate(self):
        std, opts = self.std, self.opts
        n0, ncc = std.n0, std.n_cc
        mu0 = self.mu
        push = opts["bound_push"]
        x = std.initial_point().astype(float)
        act = ~std.free_mask
        x[act] = np.maximum(x[act], push)
        s = np.zeros(0)
        if self.mode == "relaxation" and ncc:
            tau0 = self.state.tau
            if opts["center_complementarities"]:
                xv, sv = updates.centered_init_values(
                    tau0, opts["centering_factor"], opts["centering_slack_mode"])
                x[n0:n0 + ncc] = xv
                x[n0 + ncc:] = xv
                s = np.full(ncc, max(sv, 1e-12))
            else:
                s = np.maximum(tau0 - x[n0:n0 + ncc] * x[n0 + ncc:], push)
        z0 = np.zeros(n0)
        a0 = self._bounded_mask()
        z0[a0] = mu0 / x[:n0][a0]
        z1 = mu0 / x[n0:n0 + ncc] if ncc else np.zeros(0)
        z2 = mu0 / x[n0 + ncc:] if ncc else np.zeros(0)
        z_s = mu0 / s if s.size else np.zeros(0)
        return Iterate(
            problem=std, x=x, s=s,
            y_c=np.zeros(std.m), y_s=z_s.copy(),
            z0=z0, z1=z1, z2=z2, z_s=z_s,
            delta1=self.state.delta1.copy(), delta2=self.state.delta2.copy(),
        )

    # ------------------------------------------------------------------
    # restoration
    # ------------------------------------------------------------------
    def _restoration_nlp(self, it):
        """l1 feasibility problem over (x, s, p, q) for this formulation."""
        import scipy.sparse as sp

        std = self.std
        n, ncc = std.n, std.n_cc
        ns = it.s.size
        tau_v = self.state.tau_v.copy()
        m_rows = std.m + (ncc if self.has_slacks and ncc else 0)
        x_ref = np.concatenate([it.x, it.s])
        nv = n + ns
        d_r = np.minimum(1.0, 1.0 / np.maximum(np.abs(x_ref), 1e-8))
        zeta = math.sqrt(max(self.mu, 1e-12))

        def split(v):
            return v[:n], v[n:n + ns], v[n + ns:n + ns + m_rows], v[n + ns + m_rows:]

        def cons_val(x, s):
            vals = [std.constraints(x)] if std.m else []
            if self.has_slacks and ncc:
                vals.append(x[std.n0:std.n0 + ncc] * x[std.n0 + ncc:] + s - tau_v)
            return np.concatenate(vals) if vals else np.zeros(0)

        def objective(v):
            x, s, p, q = split(v)
            xs = np.concatenate([x, s])
            return float(np.sum(p) + np.sum(q)
                         + 0.5 * zeta * np.sum(d_r * (xs - x_ref) ** 2))

        def gradient(v):
            x, s, p, q = split(v)
            g = np.ones(nv + 2 * m_rows)
            xs = np.concatenate([x, s])
            g[:nv] = zeta * d_r * (xs - x_ref)
            return g

        def constraints(v):
            x, s, p, q = split(v)
            return cons_val(x, s) - p + q

        def jacobian(v):
            x, s, _, _ = split(v)
            blocks = []
            if std.m:
                jx = sp.coo_matrix(std.jacobian(x))
                blocks.append(sp.hstack([jx, sp.coo_matrix((std.m, ns))]))
            if self.has_slacks and ncc:
                schol = sp.lil_matrix((ncc, nv))
                for i in range(ncc):
                    schol[i, std.n0 + i] = x[std.n0 + ncc + i]
                    schol[i, std.n0 + ncc + i] = x[std.n0 + i]
                    schol[i, n + i] = 1.0
                blocks.append(schol.tocoo())
            jc = sp.vstack(blocks) if blocks else sp.coo_matrix((0, nv))
            eye = sp.identity(m_rows, format="coo")
            return sp.hstack([jc, -eye, eye], format="coo")

        def hessian(v, y, obj_weight=1.0):
            x, s, _, _ = split(v)
            h = sp.lil_matrix((nv + 2 * m_rows, nv + 2 * m_rows))
            if std.m:
                hx = sp.coo_matrix(std.hessian(x, y[:std.m], obj_weight=0.0))
                for rr, cc, vv in zip(hx.row, hx.col, hx.data):
                    h[rr, cc] += vv
            if self.has_slacks and ncc:
                for i in range(ncc):
                    w = y[std.m + i]
                    h[std.n0 + i, std.n0 + ncc + i] += w
                    h[std.n0 + ncc + i, std.n0 + i] += w
            for i in range(nv):
                h[i, i] += obj_weight * zeta * d_r[i]
            return h.tocoo()

        lx0 = np.zeros(nv + 2 * m_rows)
        lx0[:n][std.free_mask] = -math.inf
        start = np.empty(nv + 2 * m_rows)
        start[:nv] = x_ref
        cval = cons_val(it.x, it.s)
        start[nv:nv + m_rows] = np.maximum(cval, 0.0)
        start[nv + m_rows:] = np.maximum(-cval, 0.0)
        from .model import MpccProblem
        return MpccProblem(
            n0=nv + 2 * m_rows, n_cc=0, m=m_rows,
            objective=objective, gradient=gradient, hessian=hessian,
            constraints=constraints, jacobian=jacobian,
            lg=np.zeros(m_rows), ug=np.zeros(m_rows),
            lx0=lx0, x_init=start, name="restoration",
        ), nv

    def run_restoration(self, it, filt):
        """Nested l1 feasibility solve; returns (new iterate, succeeded)."""
        if self.in_restoration:
            return it, False
        theta_enter = self.theta(it)
        if theta_enter <= 1e-14:
            return it, False
        nlp, nv = self._restoration_nlp(it)
        std_rest = to_standard_form(nlp)
        target = (1.0 - ipm.GAMMA_THETA) * theta_enter
        std, ncc = self.std, self.std.n_cc

        def theta_of(v):
            x = v[:std.n]
            s = v[std.n:nv]
            vals = [std.constraints(x)] if std.m else []
            if self.has_slacks and ncc:
                vals.append(x[std.n0:std.n0 + ncc] * x[std.n0 + ncc:]
                            + s - self.state.tau_v)
            vec = np.concatenate(vals) if vals else np.zeros(0)
            return float(np.linalg.norm(vec, np.inf)) if vec.size else 0.0

        def stop(inner_it, inner_rep):
            th = theta_of(inner_it.x)
            if th > target:
                return False
            x = inner_it.x[:std.n]
            s = inner_it.x[std.n:nv]
            f_val = std.objective(x)
            phi = self.phi_at(x, s, f_val, self.mu)
            return filt.acceptable(th, phi)

        from .options import resolve
        rest_opts = resolve("relaxation", {
            "tol": max(self.opts["tol"], 1e-9),
            "max_iter": self.opts["restoration_max_iter"],
            "barrier.mu_init": max(min(0.1, theta_enter), 1e-4),
            "barrier": "monotone",
            "center_complementarities": False,
        })
        inner = BarrierEngine(std_rest, rest_opts, "relaxation",
                              problem_name="restoration", counter=self.counter,
                              stop_callback=stop, in_restoration=True)
        res = inner.solve()
        if res.status not in (_STATUS_STOPPED, STATUS_SUCCESS):
            return it, False
        v = res.x_std
        x_new = v[:std.n].copy()
        s_new = v[std.n:nv].copy() if self.has_slacks and ncc else np.zeros(0)
        if theta_of(v) >= theta_enter:
            return it, False
        act = ~std.free_mask
        x_new[act] = np.maximum(x_new[act], 1e-12)
        if s_new.size:
            s_new = np.maximum(s_new, 1e-12)
        new_it = Iterate(
            problem=std, x=x_new, s=s_new, y_c=it.y_c.copy(), y_s=it.y_s.copy(),
            z0=it.z0.copy(), z1=it.z1.copy(), z2=it.z2.copy(), z_s=it.z_s.copy(),
            delta1=it.delta1.copy(), delta2=it.delta2.copy(),
        )
        new_it.safeguard_multipliers(self.mu)
        return new_it, True

    # ------------------------------------------------------------------
    # main loop
    # ------------------------------------------------------------------
    def solve(self) -> SolveResult:
        opts = self.opts
        std = self.std
        ncc = std.n_cc
        it = self.initial_iterate()
        theta0 = self.theta(it)
        filt = Filter(theta_max=1e4 * max(1.0, theta0))
        theta_min = 1e-4 * max(1.0, theta0)
        status = STATUS_MAX_ITER
        message = ""
        rest_streak = 0
        saturated_streak = 0
        iteration = 0
        t_start = time.monotonic()

        while iteration < opts["max_iter"]:
            rep_unscaled, rep_scaled = self.termination_reports(it)
            rep = rep_scaled if opts["scaled_termination"] else rep_unscaled
            if check_termination(rep, opts["tol"]):
                status = STATUS_SUCCESS
                break
            if self.stop_callback is not None and self.stop_callback(it, rep_unscaled):
                status = _STATUS_STOPPED
                break
            xnorm = float(np.linalg.norm(it.x, np.inf)) if it.x.size else 0.0
            if not np.isfinite(xnorm) or xnorm > opts["diverge_threshold"]:
                status = STATUS_DIVERGED
                message = "primal iterates unbounded"
                break
            if opts["time_limit"] is not None and \
                    time.monotonic() - t_start > opts["time_limit"]:
                status = STATUS_FAILURE
                message = "time limit reached"
                break

            # endgame bound relaxation (relaxation algorithm only)
            if (self.mode == "relaxation" and ncc
                    and opts["endgame_strategy"] == "relax_lb"
                    and rep.overall <= opts["endgame_threshold"]):
                d1_old = self.state.delta1.copy()
                d2_old = self.state.delta2.copy()
                updates.endgame_step(it, rep.overall, self.state, opts)
                if (not np.array_equal(d1_old, self.state.delta1)
                        or not np.array_equal(d2_old, self.state.delta2)):
                    it = it.with_deltas(self.state.delta1, self.state.delta2)
                    filt.reset()

            # assemble and correct the KKT system
            kkt = self.assemble(it)
            try:
                delta_w, delta_c, fact, action = linalg.inertia_correct(
                    kkt, opts, self.mu, self.counter)
            except UnrecoverableKkt as exc:
                no_dual_reg = (not opts["inertia_correction"]) or \
                    (opts["delta_c_fixed"] is not None and opts["delta_c_fixed"] == 0.0)
                if exc.singular and no_dual_reg:
                    status = STATUS_DIVERGED
                    message = "singular KKT system without dual regularization: " \
                              "dual step unbounded"
                    break
                it, ok = self.run_restoration(it, filt)
                if not ok:
                    status = STATUS_RESTORATION_FAILED
                    message = str(exc)
                    break
                filt.reset()
                iteration += 1
                continue
            cb = opts["debug_kkt_callback"]
            if cb is not None:
                cb(fact.matrix, fact.inertia, delta_w, delta_c)

            # homotopy parameter updates
            mu_new, tau_new, qdebug = self.update_parameters(it, fact, rep_unscaled)
            params_changed = mu_new != self.mu or \
                (self.mode == "relaxation" and tau_new != self.state.tau)
            self.mu = mu_new
            self.state.mu = mu_new
            if self.mode == "relaxation":
                self.state.set_tau(tau_new)
            if params_changed:
                filt.reset()
            qcb = opts["debug_quality_callback"]
            if qcb is not None and qdebug is not None:
                qcb(self, it, qdebug)

            # step computation with a regularization-escalation retry: when
            # the line search fails at an (almost) feasible point restoration
            # cannot help, but a harder-regularized, better-conditioned step
            # usually can
            accepted = False
            bad_direction = False
            for attempt in range(16):
                rhs = self.reduced_rhs(it, self.mu)
                step = linalg.solve_step(fact, rhs)
                dx, ds, dy_c, dy_s = self.split_direction(step.d)
                if not np.all(np.isfinite(step.d)):
                    bad_direction = True
                    break
                dz0, dz1, dz2, dzs = linalg.recover_bound_multiplier_steps(
                    it, dx, ds, self.mu)

                eta_b = max(0.99, 1.0 - self.mu)
                act = self._bounded_mask()
                n0 = std.n0
                a_pr_max = min(
                    fraction_to_boundary(it.x0[act], dx[:n0][act], eta_b),
                    fraction_to_boundary(it.shifted1, dx[n0:n0 + ncc], eta_b),
                    fraction_to_boundary(it.shifted2, dx[n0 + ncc:], eta_b),
                    fraction_to_boundary(it.s, ds, eta_b),
                )
                a_du = min(
                    fraction_to_boundary(it.z0[act], dz0[act], eta_b),
                    fraction_to_boundary(it.z1, dz1, eta_b),
                    fraction_to_boundary(it.z2, dz2, eta_b),
                    fraction_to_boundary(it.z_s, dzs, eta_b),
                )

                model = self._line_search_model(it, dx, ds)
                alpha, accepted = filter_line_search(model, filt, a_pr_max,
                                                     theta_min=theta_min)
                if accepted:
                    break
                if model.theta0 > theta_min or not opts["inertia_correction"]:
                    break
                delta_w = max(8.0 * delta_w, linalg.DELTA_W0)
                if delta_w > linalg.DELTA_W_MAX:
                    break
                kkt.delta_w = delta_w
                fact = linalg.factorize(kkt, self.counter)
                if not fact.success:
                    break
                action = action + "+delta_w_retry" if "retry" not in action \
                    else action
            if bad_direction:
                it, ok = self.run_restoration(it, filt)
                if not ok:
                    status = STATUS_RESTORATION_FAILED
                    message = "non-finite search direction"
                    break
                iteration += 1
                continue
            if not accepted:
                rest_streak += 1
                if rest_streak > 3:
                    status = STATUS_RESTORATION_FAILED
                    message = "repeated restoration without progress"
                    break
                it, ok = self.run_restoration(it, filt)
                if not ok:
                    status = STATUS_RESTORATION_FAILED
                    message = "line search failed and restoration unavailable"
                    break
                filt.reset()
                iteration += 1
                continue
            rest_streak = 0

            it = it.take_step(alpha, a_du, dx, ds, dy_c, dy_s, dz0, dz1, dz2, dzs)
            it.safeguard_multipliers(self.mu)

            # penalty bookkeeping evaluated on the accepted iterate
            if self.mode == "penalty":
                comp_val = float(np.dot(it.x1, it.x2)) if ncc else 0.0
                if opts["rho_update"] == "dynamic" and \
                        float(np.max(np.abs(it.comp_products))) > opts["tol"]:
                    rho_new = updates.update_rho_dynamic(
                        self.pstate, comp_val, self.mu,
                        opts["gamma"], opts["eta_dynamic_update"],
                        opts["comp_history_length"], opts["rho_growth_rate"])
                    wanted = rho_new > self.pstate.rho
                    if wanted:
                        filt.reset()
                    self.pstate.rho = rho_new
                if ncc and self.pstate.rho >= self.pstate.rho_max and \
                        float(np.max(np.abs(it.comp_products))) > opts["tol"]:
                    saturated_streak += 1
                    if saturated_streak > 50:
                        status = STATUS_PENALTY_SATURATED
                        message = "penalty at rho_max without complementarity"
                        break
                else:
                    saturated_streak = 0
                self.pstate.push_history(comp_val)

            self.records.append(IterationRecord(
                iteration=iteration, mu=self.mu,
                tau=self.state.tau if self.mode == "relaxation" else 0.0,
                rho=self.pstate.rho if self.mode == "penalty" else 0.0,
                f=it.f, theta=self.theta(it), l_inf=rep_unscaled.overall,
                comp_upper=rep_unscaled.comp_upper,
                alpha_pr=alpha, alpha_du=a_du, fact_count=self.counter.count,
                delta_w=delta_w, delta_c=delta_c,
                n_pos=fact.inertia.n_pos, n_neg=fact.inertia.n_neg,
                n_zero=fact.inertia.n_zero, reg_action=action,
            ))
            iteration += 1

        return self._build_result(it, status, message, iteration)

    def _line_search_model(self, it, dx, ds):
        std = self.std
        ncc = std.n_cc
        act = ~std.free_mask
        theta0 = self.theta(it)
        phi0 = self.phi_at(it.x, it.s, it.f, self.mu)
        dphi = self.phi_gradient_dot(it, dx, ds, self.mu)
        tau_v = self.state.tau_v

        def trial(alpha):
            x_t = it.x + alpha * dx
            s_t = it.s + alpha * ds
            shifted = x_t.copy()
            n0 = std.n0
            shifted[n0:n0 + ncc] += self.state.delta1
            shifted[n0 + ncc:] += self.state.delta2
            if np.any(shifted[act] <= 0.0) or (s_t.size and np.any(s_t <= 0.0)):
                return None
            try:
                f_t = std.objective(x_t)
                c_t = std.constraints(x_t) if std.m else np.zeros(0)
            except Exception:
                return None
            if self.has_slacks and ncc:
                schol = x_t[n0:n0 + ncc] * x_t[n0 + ncc:] + s_t - tau_v
                vec = np.concatenate([c_t, schol])
            else:
                vec = c_t
            theta_t = float(np.linalg.norm(vec, np.inf)) if vec.size else 0.0
            phi_t = self.phi_at(x_t, s_t, f_t, self.mu)
            return theta_t, phi_t

        return LineSearchModel(theta0=theta0, phi0=phi0, dphi=dphi, trial=trial)

    # ------------------------------------------------------------------
    # result construction
    # ------------------------------------------------------------------
    def estimate_mpcc_multipliers(self, it):
        """MPCC multiplier estimates at a standard-form iterate."""
        ncc = self.std.n_cc
        if self.mode == "relaxation" and ncc:
            zeta1, zeta2 = updates.endgame_multiplier_estimates(
                it.z1, it.z2, it.z_s, it.x1, it.x2)
        elif ncc:
            rho = self.pstate.rho
            zeta1 = it.z1 - rho * it.x2
            zeta2 = it.z2 - rho * it.x1
        else:
            zeta1 = np.zeros(0)
            zeta2 = np.zeros(0)
        return MpccMultipliers(y=it.y_c.copy(), z0=it.z0.copy(),
                               zeta1=zeta1, zeta2=zeta2)

    def _classify(self, it, rep_unscaled):
        ncc = self.std.n_cc
        if ncc == 0:
            return "S", self.estimate_mpcc_multipliers(it)
        mult = self.estimate_mpcc_multipliers(it)
        comp_inf = rep_unscaled.comp_upper
        tol = max(1e-6, 1.1 * math.sqrt(max(comp_inf, 0.0)))
        try:
            sets = index_sets(it.x1, it.x2, tol)
        except Exception:
            return "none", mult
        z1 = mult.zeta1[sets.i_00]
        z2 = mult.zeta2[sets.i_00]
        ctol = 1e-6
        if rep_unscaled.overall > math.sqrt(ctol):
            return "none", mult
        if z1.size == 0 or (np.all(z1 >= -ctol) and np.all(z2 >= -ctol)):
            return "S", mult
        if np.all(((z1 > ctol) & (z2 > ctol)) | (np.abs(z1 * z2) <= ctol)):
            return "M", mult
        if np.all(z1 * z2 >= -ctol):
            return "C", mult
        if np.all((z1 >= -ctol) | (z2 >= -ctol)):
            return "A", mult
        return "W", mult

    def _build_result(self, it, status, message, iterations) -> SolveResult:
        rep_unscaled, _ = self.termination_reports(it)
        label = "none"
        mult = None
        if status == STATUS_SUCCESS:
            label, mult = self._classify(it, rep_unscaled)
        x_orig = self.std.to_original(it.x)
        return SolveResult(
            status=status, x=x_orig, objective=it.f, report=rep_unscaled,
            comp_inf=rep_unscaled.comp_upper, iterations=iterations,
            factorizations=self.counter.count, records=self.records,
            stationarity=label, multipliers=mult, x_std=it.x.copy(),
            iterate=it, algorithm=self.mode, problem_name=self.problem_name,
            message=message,
        )
