"""Standard-form transformation, index sets, stationarity classification."""

import numpy as np
import pytest
import scipy.sparse as sp

from mpcckit.bench import builtin, builtin_names
from mpcckit.errors import BoundsError, ComplementarityInfeasible
from mpcckit.model import (MpccMultipliers, MpccProblem, classify_stationarity,
                           index_sets, mpcc_kkt_residual, to_standard_form)

from conftest import fd_gradient, nonlinear_mpcc

INF = float("inf")


def simple_pair_problem(lx1=0.0):
    def objective(x):
        return float(x[0] + x[1])

    def gradient(x):
        return np.ones(2)

    def hessian(x, y, obj_weight=1.0):
        return sp.coo_matrix((2, 2))

    return MpccProblem(n0=0, n_cc=1, m=0, objective=objective,
                       gradient=gradient, hessian=hessian,
                       lx1=np.array([lx1]), lx2=np.array([0.0]))


class TestToStandardForm:
    def test_identity_when_already_standard(self):
        p = simple_pair_problem()
        std = to_standard_form(p)
        assert std.m == 0
        assert std.n0 == 0
        assert std.slack_index.size == 0
        assert np.all(std.offset == 0.0)
        assert np.all(std.sign == 1.0)

    def test_range_row_becomes_two_slack_rows(self, rng):
        # one row 1 <= g(x) <= 3 with g(x) = x0^2 + x1
        def g(x):
            return np.array([x[0] ** 2 + x[1]])

        p = MpccProblem(
            n0=2, n_cc=0, m=1,
            objective=lambda x: float(x[0] + x[1]),
            gradient=lambda x: np.ones(2),
            hessian=lambda x, y, obj_weight=1.0: sp.coo_matrix((2, 2)),
            constraints=g,
            jacobian=lambda x: sp.coo_matrix(np.array([[2 * x[0], 1.0]])),
            lg=np.array([1.0]), ug=np.array([3.0]),
            lx0=np.zeros(2))
        std = to_standard_form(p)
        assert std.m == 2
        assert std.slack_index.size == 2
        # feasibility round trip at 5 random strictly feasible points
        for _ in range(5):
            x = rng.uniform(0.2, 1.0, size=2)
            if not (1.0 <= g(x)[0] <= 3.0):
                x = np.array([1.0, rng.uniform(0.1, 1.5)])
            xs = std.from_original(x)
            assert np.max(np.abs(std.constraints(xs))) < 1e-12
            back = std.to_original(xs)
            np.testing.assert_allclose(back, x, rtol=0, atol=1e-14)
            # objective identical bitwise (evaluator composes through back-map)
            assert std.objective(xs) == p.objective(back)

    def test_complementarity_shift(self, rng):
        p = simple_pair_problem(lx1=2.0)
        std = to_standard_form(p)
        for _ in range(5):
            x1 = rng.uniform(2.0, 4.0)
            x = np.array([x1, 0.0])
            xs = std.from_original(x)
            assert xs[0] == pytest.approx(x1 - 2.0, abs=0)
            assert std.objective(xs) == p.objective(std.to_original(xs))

    def test_inconsistent_bounds_rejected(self):
        p = simple_pair_problem()
        p.ux1 = np.array([-1.0])
        with pytest.raises(BoundsError) as err:
            to_standard_form(p)
        assert err.value.index == 0

    def test_free_and_mirrored_variables(self):
        p = MpccProblem(
            n0=2, n_cc=0, m=0,
            objective=lambda x: float(x[0] ** 2 + x[1] ** 2),
            gradient=lambda x: 2 * x,
            hessian=lambda x, y, obj_weight=1.0: sp.coo_matrix(
                obj_weight * 2 * np.eye(2)),
            lx0=np.array([-INF, -INF]), ux0=np.array([INF, 5.0]))
        std = to_standard_form(p)
        assert std.free_mask[0] and not std.free_mask[1]
        x = np.array([-3.0, 2.0])
        xs = std.from_original(x)
        assert xs[1] == 3.0  # mirrored: 5 - 2
        np.testing.assert_allclose(std.to_original(xs), x, atol=0)
        np.testing.assert_allclose(std.gradient(xs),
                                   np.array([2 * -3.0, -(2 * 2.0)]), atol=1e-15)

    def test_roundtrip_on_builtins(self, rng):
        for name in builtin_names():
            p = builtin(name)
            std = to_standard_form(p)
            for _ in range(100):
                # random complementarity-feasible point of the original problem
                x = np.empty(p.n)
                for k in range(p.n0):
                    lo = p.lx0[k] if np.isfinite(p.lx0[k]) else -2.0
                    hi = p.ux0[k] if np.isfinite(p.ux0[k]) else lo + 4.0
                    x[k] = rng.uniform(lo, hi)
                for i in range(p.n_cc):
                    side = rng.integers(2)
                    hi1 = p.ux1[i] if np.isfinite(p.ux1[i]) else p.lx1[i] + 3.0
                    hi2 = p.ux2[i] if np.isfinite(p.ux2[i]) else p.lx2[i] + 3.0
                    if side == 0:
                        x[p.n0 + i] = rng.uniform(p.lx1[i], hi1)
                        x[p.n0 + p.n_cc + i] = p.lx2[i]
                    else:
                        x[p.n0 + i] = p.lx1[i]
                        x[p.n0 + p.n_cc + i] = rng.uniform(p.lx2[i], hi2)
                back = std.to_original(std.from_original(x))
                np.testing.assert_allclose(back, x, rtol=0, atol=1e-12)

    def test_gradient_jacobian_consistency_nonlinear(self, rng):
        p = nonlinear_mpcc()
        std = to_standard_form(p)
        xs = np.abs(rng.standard_normal(std.n)) + 0.3
        g_fd = fd_gradient(std.objective, xs)
        np.testing.assert_allclose(std.gradient(xs), g_fd, atol=1e-6)
        jac = std.jacobian_dense(xs)
        for r in range(std.m):
            row_fd = fd_gradient(lambda v, r=r: std.constraints(v)[r], xs)
            np.testing.assert_allclose(jac[r], row_fd, atol=1e-5)
        # Hessian vs finite differences of the weighted Lagrangian gradient
        y = rng.standard_normal(std.m)
        h = std.hessian_dense(xs, y)

        def lag_grad(v):
            return std.gradient(v) + std.jacobian_dense(v).T @ y

        for k in range(std.n):
            col_fd = fd_gradient(lambda v, k=k: lag_grad(v)[k], xs)
            np.testing.assert_allclose(h[k], col_fd, atol=1e-5)


class TestIndexSets:
    def test_plus0_and_biactive(self):
        sets = index_sets(np.array([1.0, 0.0]), np.array([0.0, 0.0]), tol=1e-9)
        assert list(sets.i_plus0) == [0]
        assert list(sets.i_00) == [1]
        assert list(sets.i_0plus) == []

    def test_0plus(self):
        sets = index_sets(np.array([0.0]), np.array([3.0]), tol=1e-9)
        assert list(sets.i_0plus) == [0]

    def test_infeasible_pair_raises_with_residual(self):
        with pytest.raises(ComplementarityInfeasible) as err:
            index_sets(np.array([0.5]), np.array([0.5]), tol=1e-9)
        assert err.value.residual == pytest.approx(0.25, abs=0)

    def test_partition_property(self, rng):
        for _ in range(50):
            n = int(rng.integers(1, 8))
            x1 = np.where(rng.random(n) < 0.5, 0.0, rng.random(n))
            x2 = np.where(x1 > 0, 0.0, np.where(rng.random(n) < 0.5, 0.0,
                                                rng.random(n)))
            sets = index_sets(x1, x2, tol=1e-9)
            merged = np.concatenate(sets.as_tuple())
            assert np.array_equal(np.sort(merged), np.arange(n))


class TestClassification:
    def _wstat_problem(self):
        # min x1 + x2 over one pair: W-stationary at the origin with
        # (zeta1, zeta2) = (1, 1)
        return simple_pair_problem()

    def test_empty_biactive_reduces_to_s(self):
        p = builtin("two-circle")
        mult = MpccMultipliers(np.zeros(0), np.zeros(0),
                               np.array([0.0]), np.array([-2.0]))
        assert classify_stationarity(p, np.array([1.0, 0.0]), mult) == "S"

    def test_c_but_not_s(self):
        p = self._wstat_problem()
        mult = MpccMultipliers(np.zeros(0), np.zeros(0),
                               np.array([1.0]), np.array([1.0]))
        # both biactive multipliers negative: C (product positive), not M/A/S
        q = builtin("w-not-s")
        mult_neg = MpccMultipliers(np.zeros(0), np.zeros(0),
                                   np.array([-1.0]), np.array([-1.0]))
        assert classify_stationarity(q, np.zeros(2), mult_neg) == "C"
        assert classify_stationarity(p, np.zeros(2), mult) == "S"

    def test_m_collapses_to_s_when_signs_allow(self):
        # single biactive pair, zeta = (1, 0): M holds via the vanishing
        # product, S holds via the signs, so S is returned
        def objective(x):
            return float(x[0])

        p = MpccProblem(n0=0, n_cc=1, m=0, objective=objective,
                        gradient=lambda x: np.array([1.0, 0.0]),
                        hessian=lambda x, y, obj_weight=1.0: sp.coo_matrix((2, 2)))
        mult = MpccMultipliers(np.zeros(0), np.zeros(0),
                               np.array([1.0]), np.array([0.0]))
        assert classify_stationarity(p, np.zeros(2), mult) == "S"

    def test_label_implication_chain(self, rng):
        # whenever the returned label is X, all weaker predicates hold; the
        # objective gradient is set to the sampled zeta so the origin is
        # W-stationary by construction
        tol = 1e-6
        for _ in range(200):
            zeta = rng.standard_normal(2) * rng.choice([0.0, 1.0], size=2)
            p = MpccProblem(
                n0=0, n_cc=1, m=0,
                objective=lambda x, zeta=zeta: float(zeta @ x),
                gradient=lambda x, zeta=zeta: zeta.copy(),
                hessian=lambda x, y, obj_weight=1.0: sp.coo_matrix((2, 2)))
            mult = MpccMultipliers(np.zeros(0), np.zeros(0),
                                   np.array([zeta[0]]), np.array([zeta[1]]))
            label = classify_stationarity(p, np.zeros(2), mult)
            z1, z2 = mult.zeta1[0], mult.zeta2[0]
            s_ok = z1 >= -tol and z2 >= -tol
            m_ok = (z1 > tol and z2 > tol) or abs(z1 * z2) <= tol
            c_ok = z1 * z2 >= -tol
            a_ok = z1 >= -tol or z2 >= -tol
            if label == "S":
                assert s_ok and m_ok and c_ok and a_ok
            elif label == "M":
                assert m_ok and c_ok
            elif label == "C":
                assert c_ok
            elif label == "A":
                assert a_ok
            assert label in ("S", "M", "C", "A", "W")


class TestKktResidual:
    def test_zero_problem(self):
        def objective(x):
            return 0.0

        p = MpccProblem(n0=1, n_cc=0, m=0, objective=objective,
                        gradient=lambda x: np.zeros(1),
                        hessian=lambda x, y, obj_weight=1.0: sp.coo_matrix((1, 1)))
        res = mpcc_kkt_residual(p, np.zeros(1), MpccMultipliers.zeros(p))
        assert res.grad_norm == 0.0
        assert res.cons.size == 0

    def test_hand_gradient_at_corner(self):
        p = simple_pair_problem()
        mult = MpccMultipliers(np.zeros(0), np.zeros(0),
                               np.array([1.0]), np.array([1.0]))
        res = mpcc_kkt_residual(p, np.zeros(2), mult)
        assert res.grad_norm == 0.0

    def test_matches_finite_differences(self, rng):
        p = nonlinear_mpcc()
        x = np.abs(rng.standard_normal(p.n)) + 0.3
        mult = MpccMultipliers(
            y=rng.standard_normal(p.m),
            z0=rng.standard_normal(p.n0),
            zeta1=rng.standard_normal(p.n_cc),
            zeta2=rng.standard_normal(p.n_cc))

        def lagrangian(v):
            g = p.eval_constraints(v)
            return (p.objective(v) + mult.y @ g - mult.z0 @ v[:p.n0]
                    - mult.zeta1 @ v[p.n0:p.n0 + p.n_cc]
                    - mult.zeta2 @ v[p.n0 + p.n_cc:])

        res = mpcc_kkt_residual(p, x, mult)
        g_fd = fd_gradient(lagrangian, x)
        denom = 1.0 + np.max(np.abs(g_fd))
        assert np.max(np.abs(res.grad - g_fd)) / denom < 1e-6
