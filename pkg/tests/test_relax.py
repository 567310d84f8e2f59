"""Update rules, endgame relaxation, centered start, quality-rule machinery."""

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpcckit.bench import builtin
from mpcckit.core import BarrierEngine
from mpcckit.linalg import factorize, inertia_correct, solve_step
from mpcckit.model import to_standard_form
from mpcckit.options import resolve
from mpcckit.relax import relaxed_kkt_residual, solve_relaxation
from mpcckit.updates import (HomotopyState, centered_init_values, endgame_step,
                             psi_endgame, update_mu_loqo, update_mu_monotone,
                             update_tau_loqo, update_tau_proportional,
                             update_tau_rolloff)

from conftest import fd_gradient, make_iterate, nonlinear_mpcc


class TestMonotoneRule:
    def test_solved_takes_min_branch(self):
        # mu = 0.1: min(0.2*0.1, 0.1^1.5) = min(0.02, 0.0316...) = 0.02
        got = update_mu_monotone(0.1, True, 0.2, 1.5, 1e-9)
        assert got == 0.2 * 0.1
        assert abs(got - 0.02) < 1e-16

    def test_hold_when_not_solved(self):
        assert update_mu_monotone(0.1, False, 0.2, 1.5, 1e-9) == 0.1

    def test_floor(self):
        assert update_mu_monotone(1e-9, True, 0.2, 1.5, 1e-9) == 1e-9


class TestTauProportional:
    def test_identity_coupling(self):
        assert update_tau_proportional(0.01, 1.0, 1.0, 1e-8) == 0.01

    def test_scaled(self):
        assert update_tau_proportional(0.01, 0.1, 1.0, 1e-8) == \
            pytest.approx(0.001, rel=1e-15)

    def test_sqrt_variant(self):
        assert update_tau_proportional(1e-4, 1.0, 0.5, 1e-8) == \
            pytest.approx(1e-2, rel=1e-12)

    def test_floor(self):
        assert update_tau_proportional(1e-12, 1.0, 1.0, 1e-8) == 1e-8


class TestTauRolloff:
    def test_plateau_at_c(self):
        assert update_tau_rolloff(1e8, 1.0, 1.0, 1.0, 1e-8) == \
            pytest.approx(1.0, rel=1e-7)

    def test_value_at_mu_1e_1(self):
        got = update_tau_rolloff(0.1, 2.0, 1e-6, 1.0, 1e-8)
        expect = 1e-2 / (1e-2 + 1e-6)
        assert got == expect
        assert got == pytest.approx(0.99990, abs=1e-5)

    def test_value_at_mu_1e_6(self):
        got = update_tau_rolloff(1e-6, 2.0, 1e-6, 1.0, 1e-8)
        assert got == pytest.approx(1e-12 / (1e-12 + 1e-6), rel=1e-15)

    def test_high_precision_oracle(self):
        # acceptance-criterion value pinned against 50-digit evaluation
        with mpmath.workdps(50):
            mu = mpmath.mpf("1e-6")
            expect = float(mu ** 2 / (mu ** 2 + mpmath.mpf("1e-6")))
        got = update_tau_rolloff(1e-6, 2.0, 1e-6, 1.0, 1e-8)
        assert abs(got - expect) <= 1e-14 * abs(expect)

    @given(st.floats(1e-10, 1e3), st.floats(1e-10, 1e3))
    @settings(max_examples=200, deadline=None)
    def test_monotone_increasing_bounded(self, mu1, mu2):
        lo, hi = sorted((mu1, mu2))
        t_lo = update_tau_rolloff(lo, 2.0, 1e-6, 1.0, 0.0)
        t_hi = update_tau_rolloff(hi, 2.0, 1e-6, 1.0, 0.0)
        assert t_lo <= t_hi <= 1.0


class TestTauLoqo:
    def test_centered_products_floor(self):
        # equal products: xi = 1, sigma = 0, tau clamps to sigma_min
        got = update_tau_loqo(np.array([1.0, 1.0]), np.array([2.0, 2.0]),
                              2.0, 0.05, 1e-8)
        assert got == 1e-8

    def test_two_pair_example(self):
        # products (1, 3), gamma=2, r=0.05: xi = 2*1/4, direct evaluation
        x1 = np.array([1.0, 1.0])
        x2 = np.array([1.0, 3.0])
        xi = 2 * 1.0 / 4.0
        sigma = 2.0 * min((1 - 0.05) * (1 - xi) / xi, 2.0) ** 3
        expect = sigma * 4.0 / 2.0
        got = update_tau_loqo(x1, x2, 2.0, 0.05, 1e-8)
        assert got == pytest.approx(expect, rel=1e-15)
        assert got == pytest.approx(3.4295, abs=1e-4)

    def test_floor_for_tiny_products(self):
        got = update_tau_loqo(np.array([1e-9]), np.array([1e-9]), 2.0, 0.05, 1e-8)
        assert got == 1e-8


class TestMuLoqo:
    def test_equal_products_floor(self):
        got = update_mu_loqo(np.array([2.0, 2.0]), np.array([2.0, 2.0]),
                             2, 2, 2.0, 1e-8, mu_min=1e-9)
        assert got == 1e-9

    def test_two_pair_toy_direct_evaluation(self):
        # lower products (1, 1), upper products (1, 3): n=2, n_cc=2
        lower = np.array([1.0, 1.0])
        upper = np.array([1.0, 3.0])
        count = 4
        xi = count * 1.0 / 6.0
        sigma = 2.0 * min((1 - 1e-8) * (1 - xi) / xi, 2.0) ** 3
        expect = max(1e-9, sigma * 6.0 / count)
        got = update_mu_loqo(lower, upper, 2, 2, 2.0, 1e-8, mu_min=1e-9)
        assert got == pytest.approx(expect, rel=1e-14)

    def test_classic_mode_uses_lower_level_only(self):
        lower = np.array([1.0, 2.0, 3.0])
        upper = np.array([50.0])
        a = update_mu_loqo(lower, upper, 3, 0, 2.0, 1e-8, classic=True)
        b = update_mu_loqo(lower, np.zeros(0), 3, 0, 2.0, 1e-8, classic=True)
        assert a == b


class TestPsiEndgame:
    def test_direct_value(self):
        # zeta=1, x2=1, tau=mu=1e-6: tau*mu/(mu*x2 + tau*zeta) = 5e-7
        assert psi_endgame(1.0, 1.0, 1e-6, 1e-6) == \
            pytest.approx(5e-7, rel=1e-15)

    def test_guard_failure_returns_delta_max(self):
        assert psi_endgame(-2.0, 1.0, 1e-6, 1e-6, delta_max=1e-4) == 1e-4

    def test_stationarity_identity(self, rng):
        # the returned delta zeroes the linear barrier model's derivative at
        # the origin: zeta - mu/delta + mu*x2/tau = 0
        for _ in range(100):
            zeta = float(rng.random() * 5)
            x2 = float(rng.random() * 3 + 0.01)
            tau = float(10.0 ** rng.uniform(-8, -2))
            mu = float(10.0 ** rng.uniform(-8, -2))
            delta = psi_endgame(zeta, x2, tau, mu)
            resid = zeta - mu / delta + mu * x2 / tau
            assert abs(resid) <= 1e-10 * max(1.0, abs(mu / delta))


class TestEndgameStep:
    def _setup(self, rng, z1, z2, z_s, x1, x2):
        from conftest import random_qpcc
        from mpcckit.bench import qpcc_to_problem
        data = random_qpcc(rng, n0=0, n_cc=2, m=0)
        p = qpcc_to_problem(data)
        std, it = make_iterate(p, x=np.concatenate([x1, x2]), s=[0.5, 0.5],
                               z1=z1, z2=z2, z_s=z_s)
        state = HomotopyState.fresh(1e-6, 1e-6, 2)
        return it, state

    def test_nonnegative_estimates_leave_deltas(self, rng):
        it, state = self._setup(rng, [1.0, 1.0], [1.0, 1.0], [0.1, 0.1],
                                [0.5, 0.5], [0.5, 0.5])
        opts = resolve("relaxation", {})
        d1, d2 = endgame_step(it, 1e-7, state, opts)
        assert np.all(d1 == 0) and np.all(d2 == 0)

    def test_negative_estimate_relaxes_one_side_only(self, rng):
        # both estimates far below -Xi on pair 0: the if/elif structure
        # relaxes delta1 only
        it, state = self._setup(rng, [1e-8, 1.0], [1e-8, 1.0], [2.0, 0.1],
                                [1.0, 0.5], [1.0, 0.5])
        opts = resolve("relaxation", {})
        d1, d2 = endgame_step(it, 1e-8, state, opts)
        assert d1[0] > 0.0 and d2[0] == 0.0
        assert d1[1] == 0.0 and d2[1] == 0.0

    def test_deltas_never_decrease(self, rng):
        it, state = self._setup(rng, [1e-8, 1.0], [1e-8, 1.0], [2.0, 0.1],
                                [1.0, 0.5], [1.0, 0.5])
        opts = resolve("relaxation", {})
        d1_first, _ = endgame_step(it, 1e-8, state, opts)
        first = d1_first[0]
        it.z_s[0] = 0.5  # milder estimate on a later call
        d1_second, _ = endgame_step(it, 1e-8, state, opts)
        assert d1_second[0] >= first


class TestCenteredInit:
    def test_values_and_residual(self):
        xv, sv = centered_init_values(0.1, 0.5)
        assert xv == pytest.approx(math.sqrt(0.05), rel=1e-15)
        assert sv == pytest.approx(0.05, rel=1e-15)
        r6 = xv * xv + sv - 0.1
        assert abs(r6) < 1e-16

    def test_k_cen_capped(self):
        xv, sv = centered_init_values(0.1, 1.0)
        assert sv > 0.0
        assert xv == pytest.approx(math.sqrt((1 - 1e-4) * 0.1), rel=1e-12)

    def test_sqrt_text_mode(self):
        xv, sv = centered_init_values(0.1, 0.5, slack_mode="sqrt")
        assert sv == pytest.approx(math.sqrt(2 * (1 - 0.05)), rel=1e-15)

    def test_engine_centered_r6_zero(self):
        p = builtin("two-circle")
        std = to_standard_form(p)
        opts = resolve("relaxation", {})
        eng = BarrierEngine(std, opts, "relaxation")
        it = eng.initial_iterate()
        r6 = it.scholtes_residual(eng.state.tau_v)
        assert np.max(np.abs(r6)) < 1e-15

    def test_center_off_uses_bound_push(self):
        p = builtin("two-circle")
        std = to_standard_form(p)
        opts = resolve("relaxation", {"center_complementarities": False})
        eng = BarrierEngine(std, opts, "relaxation")
        it = eng.initial_iterate()
        # x_init (0.8, 0.3) survives (not overwritten by the centered curve)
        np.testing.assert_allclose(it.x, [0.8, 0.3], atol=0)


class TestRelaxedResidual:
    def test_zero_at_consistent_kkt_point(self, rng):
        # min x1 + x2 at the analytic corner with consistent multipliers and
        # mu = tau = 0: all ten blocks vanish except interiority bookkeeping
        p = builtin("trivial-corner")
        std, it = make_iterate(p, x=[1e-12, 1e-12], s=[1e-12],
                               z1=[1.0], z2=[1.0], z_s=[0.0], y_s=[0.0])
        r = relaxed_kkt_residual(it, 0.0, 0.0)
        for block in (r[0], r[1], r[2], r[3], r[4]):
            assert np.max(np.abs(block)) <= 1e-12 if block.size else True

    def test_r6_zero_at_centered_init(self):
        p = builtin("two-circle")
        std = to_standard_form(p)
        eng = BarrierEngine(std, resolve("relaxation", {}), "relaxation")
        it = eng.initial_iterate()
        r = relaxed_kkt_residual(it, eng.mu, eng.state.tau_v)
        assert np.max(np.abs(r[5])) < 1e-15

    def test_r123_match_finite_differences(self, rng):
        p = nonlinear_mpcc()
        std = to_standard_form(p)
        x = np.abs(rng.standard_normal(std.n)) + 0.4
        std, it = make_iterate(std, x=x, s=np.abs(rng.standard_normal(1)) + 0.3,
                               y_c=rng.standard_normal(std.m),
                               y_s=rng.standard_normal(1),
                               z0=np.abs(rng.standard_normal(std.n0)) + 0.1,
                               z1=[0.4], z2=[0.6], z_s=[0.2])
        mu, tau = 0.01, 0.02
        r = relaxed_kkt_residual(it, mu, tau)
        n0, ncc = std.n0, std.n_cc

        def lagrangian(v):
            x1 = v[n0:n0 + ncc]
            x2 = v[n0 + ncc:]
            schol = x1 * x2 + it.s - tau
            z_x = np.concatenate([it.z0, it.z1, it.z2])
            z_x[:n0][std.free_mask[:n0]] = 0.0  # free vars carry no multiplier
            return (std.objective(v) + std.constraints(v) @ it.y_c
                    + schol @ it.y_s - z_x @ v - it.z_s @ it.s)

        g_fd = fd_gradient(lagrangian, it.x)
        got = np.concatenate([r[0], r[1], r[2]])
        denom = 1.0 + np.max(np.abs(g_fd))
        assert np.max(np.abs(got - g_fd)) / denom < 1e-6


class TestQualityRule:
    def _engine_fact(self, name="two-circle"):
        p = builtin(name)
        std = to_standard_form(p)
        opts = resolve("relaxation", {"barrier": "quality"})
        eng = BarrierEngine(std, opts, "relaxation")
        it = eng.initial_iterate()
        kkt = eng.assemble(it)
        dw, dc, fact, action = inertia_correct(kkt, opts, eng.mu, eng.counter)
        return eng, it, fact

    def test_superposition_identity(self):
        eng, it, fact = self._engine_fact()
        mu_new, debug = eng.quality_update(it, fact)
        a = debug["avg"]
        for sigma in (0.1, 0.5, 1.0):
            blended = debug["d_aff"] + sigma * debug["d_cen"]
            # direct solve at the sigma-blended right-hand side (mu = tau =
            # sigma * average complementarity)
            eng.state.set_tau(sigma * a)
            rhs = eng.reduced_rhs(it, sigma * a)
            direct = solve_step(fact, rhs).d
            scale = 1.0 + np.max(np.abs(direct))
            assert np.max(np.abs(blended - direct)) / scale < 1e-8

    def test_local_optimality_of_sigma(self):
        eng, it, fact = self._engine_fact()
        mu_new, debug = eng.quality_update(it, fact)
        q = debug["q_of"]
        s = debug["sigma"]
        lo = resolve("relaxation", {})["quality_sigma_lo"]
        hi = resolve("relaxation", {})["quality_sigma_hi"]
        span = 0.01 * (hi - lo)
        qs = q(s)
        for probe in (max(lo, s - span), min(hi, s + span)):
            assert qs <= q(probe) + 1e-9 * max(1.0, abs(qs))

    def test_tiny_residual_pushes_sigma_to_floor(self, rng):
        # near an exact KKT point the affine terms vanish and q_L grows with
        # sigma, so the search lands at the lower end of the interval
        p = builtin("trivial-corner")
        std, it = make_iterate(p, x=[1e-10, 1e-10], s=[1e-6],
                               z1=[1.0], z2=[1.0], z_s=[1e-10], y_s=[1e-10])
        opts = resolve("relaxation", {"barrier": "quality"})
        eng = BarrierEngine(std, opts, "relaxation")
        eng.state.set_tau(1e-6)
        kkt = eng.assemble(it)
        fact = factorize(kkt)
        mu_new, debug = eng.quality_update(it, fact)
        assert debug["sigma"] <= 2.0 * opts["quality_sigma_lo"] / \
            (1 - 1e-3) or debug["sigma"] < 1e-3


class TestSolveExamples:
    def test_two_circle(self):
        res = solve_relaxation(builtin("two-circle"))
        assert res.success
        assert abs(res.objective - 1.0) <= 1e-6
        assert res.comp_inf <= 1e-8
        # converged to one of the two wings, classified at least weakly
        x = res.x
        assert min(x) <= 1e-6 and abs(max(x) - 1.0) <= 1e-4
        assert res.stationarity in ("S", "M", "C", "A", "W")

    def test_bilinear_lpcc(self):
        res = solve_relaxation(builtin("bilinear-lpcc"))
        assert res.success and abs(res.objective + 1.0) <= 1e-6

    def test_trivial_corner(self):
        res = solve_relaxation(builtin("trivial-corner"))
        assert res.success and abs(res.objective) <= 1e-6
        assert np.max(res.x) <= 1e-4

    def test_loqo_classic_mode_selectable(self):
        for classic in (False, True):
            res = solve_relaxation(builtin("two-circle"),
                                   {"barrier": "loqo", "loqo_classic": classic,
                                    "max_iter": 400})
            assert res.success and abs(res.objective - 1.0) <= 1e-6

    def test_endgame_off_still_solves(self):
        res = solve_relaxation(builtin("two-circle"),
                               {"endgame_strategy": "off", "max_iter": 800})
        assert res.success and abs(res.objective - 1.0) <= 1e-6

    def test_fixed_dual_regularization_remedies_degeneracy(self):
        # duplicated equality rows solve with a small fixed delta_c even when
        # the staged correction is disabled
        res = solve_relaxation(builtin("degenerate-jacobian"),
                               {"delta_c_fixed": 1e-8,
                                "inertia_correction": False})
        assert res.success and abs(res.objective - 0.5) <= 1e-6

    def test_diverged_status_on_unbounded(self):
        import scipy.sparse as sp
        from mpcckit.model import MpccProblem
        # min -x0 with no constraints: iterates run away
        p = MpccProblem(
            n0=1, n_cc=0, m=0,
            objective=lambda x: float(-x[0]),
            gradient=lambda x: np.array([-1.0]),
            hessian=lambda x, y, obj_weight=1.0: sp.coo_matrix((1, 1)),
            lx0=np.zeros(1), name="unbounded")
        res = solve_relaxation(p, {"max_iter": 500})
        assert res.status == "diverged"


class TestHomotopyInvariants:
    def _records(self, **overrides):
        res = solve_relaxation(builtin("two-circle"), overrides)
        assert res.records
        return res.records

    @pytest.mark.parametrize("rule", ["proportional", "rolloff", "loqo"])
    @pytest.mark.parametrize("barrier", ["monotone", "loqo", "quality"])
    def test_floors_hold_for_every_rule(self, rule, barrier):
        recs = self._records(relaxation_update=rule, barrier=barrier,
                             max_iter=150)
        opts = resolve("relaxation", {})
        for r in recs:
            assert r.mu >= opts["mu_min"]
            assert r.tau >= opts["sigma_min"]

    def test_proportional_identity_is_bitwise(self):
        # alpha = beta = 1 with matching floors: tau == mu at every iteration
        recs = self._records(relaxation_update="proportional",
                             sigma_mu_ratio=1.0, sigma_mu_exp=1.0,
                             sigma_min=1e-9)
        for r in recs:
            assert r.tau == r.mu

    def test_scholtes_residual_controlled(self):
        res = solve_relaxation(builtin("two-circle"))
        theta0 = max(r.theta for r in res.records)
        assert res.records[-1].theta <= max(1e-8, theta0)
