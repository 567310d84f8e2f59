"""Shared helpers: finite-difference oracles, random problem generators,
and iterate construction for the linear-algebra tests."""

import numpy as np
import pytest
import scipy.sparse as sp

from mpcckit.bench import QpccData, qpcc_to_problem
from mpcckit.ipm import Iterate
from mpcckit.model import MpccProblem, to_standard_form

INF = float("inf")


def fd_gradient(func, x, h=1e-6):
    """Central finite differences, the independent oracle for gradients."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (func(x + e) - func(x - e)) / (2.0 * h)
    return g


def eig_inertia(K, tol=1e-10):
    """Dense eigendecomposition inertia oracle."""
    w = np.linalg.eigvalsh(np.asarray(K, dtype=float))
    scale = max(1.0, float(np.max(np.abs(w))) if w.size else 1.0)
    n_zero = int(np.sum(np.abs(w) <= tol * scale))
    n_pos = int(np.sum(w > tol * scale))
    n_neg = int(np.sum(w < -tol * scale))
    return n_pos, n_neg, n_zero


def nonlinear_mpcc():
    """Small smooth MPCC with hand-coded derivatives (n0=2, n_cc=1, m=2)."""
    n0, ncc = 2, 1

    def split(x):
        return x[0], x[1], x[2], x[3]

    def objective(x):
        a, b, u, v = split(x)
        return float(np.sin(a) + b * b + (u - 1.0) ** 2 + 0.5 * v * v + a * v)

    def gradient(x):
        a, b, u, v = split(x)
        return np.array([np.cos(a) + v, 2 * b, 2 * (u - 1.0), v + a])

    def constraints(x):
        a, b, u, v = split(x)
        return np.array([a * a + b + u - 2.0, a + np.exp(b) + v - 3.0])

    def jacobian(x):
        a, b, u, v = split(x)
        return sp.coo_matrix(np.array([
            [2 * a, 1.0, 1.0, 0.0],
            [1.0, np.exp(b), 0.0, 1.0],
        ]))

    def hessian(x, y, obj_weight=1.0):
        a, b, u, v = split(x)
        h = obj_weight * np.array([
            [-np.sin(a), 0.0, 0.0, 1.0],
            [0.0, 2.0, 0.0, 0.0],
            [0.0, 0.0, 2.0, 0.0],
            [1.0, 0.0, 0.0, 1.0],
        ])
        h[0, 0] += 2.0 * y[0]
        h[1, 1] += np.exp(b) * y[1]
        return sp.coo_matrix(h)

    return MpccProblem(
        n0=n0, n_cc=ncc, m=2,
        objective=objective, gradient=gradient, hessian=hessian,
        constraints=constraints, jacobian=jacobian,
        lg=np.array([-INF, 0.0]), ug=np.array([1.0, 3.0]),
        lx0=np.array([0.0, -INF]), ux0=np.array([4.0, INF]),
        lx1=np.array([0.0]), lx2=np.array([0.0]),
        name="nonlinear-toy")


def random_qpcc(rng, n0=2, n_cc=1, m=1, convex=True, box=None, name="random"):
    """Random QPCC with a strictly feasible region.

    box=None leaves variables unbounded above (the standard form then has no
    extra slack rows); a float adds that upper bound on every variable.
    """
    n = n0 + 2 * n_cc
    B = rng.standard_normal((n, n))
    Q = B + B.T
    if convex:
        w = np.abs(np.linalg.eigvalsh(Q)).max()
        Q = Q + (w + 0.5) * np.eye(n)
    q = rng.standard_normal(n)
    A = rng.standard_normal((m, n)) if m else np.zeros((0, n))
    x_ref = np.abs(rng.standard_normal(n)) + 0.1
    b = A @ x_ref if m else np.zeros(0)
    lx = np.zeros(n)
    ux = np.full(n, INF if box is None else box)
    pairs = [(n0 + i, n0 + n_cc + i) for i in range(n_cc)]
    return QpccData(n=n, Q=Q, q=q, c0=0.0, A=A, lg=b, ug=b,
                    lx=lx, ux=ux, pairs=pairs,
                    x_init=x_ref, name=name)


def make_iterate(problem_or_std, x, s=None, y_c=None, y_s=None,
                 z0=None, z1=None, z2=None, z_s=None,
                 delta1=None, delta2=None):
    """Construct a (not necessarily feasible) iterate for assembly tests."""
    std = (problem_or_std if hasattr(problem_or_std, "free_mask")
           else to_standard_form(problem_or_std))
    ncc = std.n_cc
    n0 = std.n0

    def arr(v, size, fill=1.0):
        if v is None:
            return np.full(size, fill)
        return np.asarray(v, dtype=float)

    return std, Iterate(
        problem=std,
        x=np.asarray(x, dtype=float),
        s=arr(s, ncc),
        y_c=arr(y_c, std.m, 0.0),
        y_s=arr(y_s, ncc, 0.0),
        z0=arr(z0, n0),
        z1=arr(z1, ncc),
        z2=arr(z2, ncc),
        z_s=arr(z_s, ncc),
        delta1=arr(delta1, ncc, 0.0),
        delta2=arr(delta2, ncc, 0.0),
    )


def random_lpec_instance(rng, n0, ncc, m, delta=0.5):
    """Random feasible trust-region LPEC instance (feasible by construction:
    a feasible step d0 is sampled and the linearization residual set from it)."""
    from mpcckit.crossover import LpecInstance
    from mpcckit.model import index_sets

    data = random_qpcc(rng, n0=n0, n_cc=ncc, m=m)
    std = to_standard_form(qpcc_to_problem(data))
    x = np.zeros(std.n)
    x[:std.n0] = np.abs(rng.standard_normal(std.n0)) + 0.2
    for i in range(ncc):
        r = rng.random()
        if r < 0.4:
            x[std.n0 + i] = rng.random() + 0.05
        elif r < 0.8:
            x[std.n0 + ncc + i] = rng.random() + 0.05
    jac = std.jacobian_dense(x)
    # feasible reference step: zero sides of each pair stay at zero, the
    # live sides move a little (well inside the trust radius)
    d0 = rng.uniform(-0.1, 0.1, size=std.n)
    d0 = np.where(x + d0 < 0, -x, d0)
    for i in range(ncc):
        p1, p2 = std.n0 + i, std.n0 + ncc + i
        if x[p1] == 0.0 and x[p2] == 0.0:
            d0[p2] = 0.0
            d0[p1] = abs(d0[p1])
        elif x[p1] == 0.0:
            d0[p1] = 0.0
        else:
            d0[p2] = 0.0
    cons = -jac @ d0 if std.m else np.zeros(0)
    sets = index_sets(x[std.n0:std.n0 + ncc], x[std.n0 + ncc:], 1e-9)
    return LpecInstance(std=std, x=x, grad=rng.standard_normal(std.n),
                        cons=cons, jac=jac, sets=sets, delta=delta)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
