"""Problem representation and MPCC-specific optimality tooling.

The problem form accepted here is

    min f(x)   s.t.  lg <= g(x) <= ug,
                     lx0 <= x0 <= ux0,
                     lx1 <= x1  (perp)  x2 >= lx2,
                     x1 <= ux1, x2 <= ux2,

with the variable partition x = (x0, x1, x2).  Finite lower bounds on the
complementarity variables are required; everything else may be infinite.
`to_standard_form` rewrites any such problem into the equality-constrained,
nonnegative form the interior-point engines consume.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import BoundsError, ComplementarityInfeasible

INF = float("inf")


def as_dense(mat, shape):
    """Normalize an evaluator result (sparse, dense, or None) to a 2-d array."""
    if mat is None:
        return np.zeros(shape)
    if sp.issparse(mat):
        out = np.asarray(mat.todense(), dtype=float)
    else:
        out = np.asarray(mat, dtype=float)
    if out.shape != shape:
        out = out.reshape(shape)
    return out


@dataclass
class MpccProblem:
    """Callback-defined MPCC with the (x0, x1, x2) variable partition.

    Evaluator contract: ``gradient`` is dense of length n; ``jacobian`` and
    ``hessian`` may return anything `scipy.sparse.coo_matrix` accepts
    (coordinate sparse preferred, dense allowed).  ``hessian(x, y, obj_weight)``
    is the Hessian of ``obj_weight*f(x) + y @ g(x)`` and must be symmetric.
    Evaluators are called from the single thread that owns the solve; distinct
    instances may be solved concurrently.
    """

    n0: int
    n_cc: int
    m: int
    objective: Callable
    gradient: Callable
    hessian: Callable
    constraints: Callable | None = None
    jacobian: Callable | None = None
    lg: np.ndarray | None = None
    ug: np.ndarray | None = None
    lx0: np.ndarray | None = None
    ux0: np.ndarray | None = None
    lx1: np.ndarray | None = None
    lx2: np.ndarray | None = None
    ux1: np.ndarray | None = None
    ux2: np.ndarray | None = None
    x_init: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        n0, ncc, m = self.n0, self.n_cc, self.m
        self.lg = self._arr(self.lg, m, -INF)
        self.ug = self._arr(self.ug, m, INF)
        self.lx0 = self._arr(self.lx0, n0, 0.0)
        self.ux0 = self._arr(self.ux0, n0, INF)
        self.lx1 = self._arr(self.lx1, ncc, 0.0)
        self.lx2 = self._arr(self.lx2, ncc, 0.0)
        self.ux1 = self._arr(self.ux1, ncc, INF)
        self.ux2 = self._arr(self.ux2, ncc, INF)
        if self.x_init is not None:
            self.x_init = np.asarray(self.x_init, dtype=float).copy()

    @staticmethod
    def _arr(v, n, fill):
        if v is None:
            return np.full(n, fill, dtype=float)
        return np.asarray(v, dtype=float).copy()

    @property
    def n(self) -> int:
        return self.n0 + 2 * self.n_cc

    def validate(self):
        for i in range(self.n_cc):
            if not np.isfinite(self.lx1[i]):
                raise BoundsError("x1", i, self.lx1[i], self.ux1[i])
            if not np.isfinite(self.lx2[i]):
                raise BoundsError("x2", i, self.lx2[i], self.ux2[i])
            if self.ux1[i] < self.lx1[i]:
                raise BoundsError("x1", i, self.lx1[i], self.ux1[i])
            if self.ux2[i] < self.lx2[i]:
                raise BoundsError("x2", i, self.lx2[i], self.ux2[i])
        for i in range(self.n0):
            if self.lx0[i] > self.ux0[i]:
                raise BoundsError("x0", i, self.lx0[i], self.ux0[i])
        for j in range(self.m):
            if self.lg[j] > self.ug[j]:
                raise BoundsError("constraint", j, self.lg[j], self.ug[j])

    def eval_constraints(self, x):
        if self.m == 0 or self.constraints is None:
            return np.zeros(0)
        return np.asarray(self.constraints(x), dtype=float).reshape(self.m)

    def eval_jacobian_dense(self, x):
        if self.m == 0 or self.jacobian is None:
            return np.zeros((0, self.n))
        return as_dense(self.jacobian(x), (self.m, self.n))

    def eval_hessian_dense(self, x, y, obj_weight=1.0):
        return as_dense(self.hessian(x, y, obj_weight), (self.n, self.n))


@dataclass
class IndexSets:
    """Partition of pair indices at a complementarity-feasible point."""

    i_plus0: np.ndarray
    i_0plus: np.ndarray
    i_00: np.ndarray

    def as_tuple(self):
        return (self.i_plus0, self.i_0plus, self.i_00)


def index_sets(x1, x2, tol=1e-6) -> IndexSets:
    """Classify each pair as (+0), (0+), or biactive (00) at tolerance tol.

    Components are measured relative to the pair's lower bound, which callers
    are expected to have shifted to zero.  A pair with both components above
    tol violates complementarity and raises.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    big1 = x1 > tol
    big2 = x2 > tol
    both = big1 & big2
    if np.any(both):
        i = int(np.argmax(both))
        raise ComplementarityInfeasible(i, float(x1[i] * x2[i]))
    idx = np.arange(x1.size)
    return IndexSets(
        i_plus0=idx[big1 & ~big2],
        i_0plus=idx[~big1 & big2],
        i_00=idx[~big1 & ~big2],
    )


@dataclass
class MpccMultipliers:
    """Multipliers of the MPCC Lagrangian f + y@g - z0@x0 - zeta1@x1 - zeta2@x2."""

    y: np.ndarray
    z0: np.ndarray
    zeta1: np.ndarray
    zeta2: np.ndarray

    @staticmethod
    def zeros(problem: MpccProblem) -> "MpccMultipliers":
        return MpccMultipliers(
            y=np.zeros(problem.m),
            z0=np.zeros(problem.n0),
            zeta1=np.zeros(problem.n_cc),
            zeta2=np.zeros(problem.n_cc),
        )


@dataclass
class MpccKktResidual:
    grad: np.ndarray          # gradient of the MPCC Lagrangian
    cons: np.ndarray          # componentwise violation of lg <= g(x) <= ug
    comp: np.ndarray          # (x1 - lx1) * (x2 - lx2) products

    @property
    def grad_norm(self):
        return float(np.linalg.norm(self.grad, np.inf)) if self.grad.size else 0.0


def mpcc_kkt_residual(problem: MpccProblem, x, mult: MpccMultipliers) -> MpccKktResidual:
    """Stationarity, feasibility, and complementarity residuals of the MPCC."""
    x = np.asarray(x, dtype=float)
    n0, ncc = problem.n0, problem.n_cc
    grad = np.asarray(problem.gradient(x), dtype=float).copy()
    if problem.m > 0:
        jac = problem.eval_jacobian_dense(x)
        grad += jac.T @ mult.y
    grad[:n0] -= mult.z0
    grad[n0:n0 + ncc] -= mult.zeta1
    grad[n0 + ncc:] -= mult.zeta2
    g = problem.eval_constraints(x)
    cons = np.maximum(problem.lg - g, 0.0) + np.maximum(g - problem.ug, 0.0)
    x1 = x[n0:n0 + ncc] - problem.lx1
    x2 = x[n0 + ncc:] - problem.lx2
    return MpccKktResidual(grad=grad, cons=cons, comp=x1 * x2)


_LABEL_ORDER = ("S", "M", "C", "A", "W")


def classify_stationarity(problem: MpccProblem, x, mult: MpccMultipliers,
                          sets: IndexSets | None = None, tol=1e-6) -> str:
    """Strongest stationarity label satisfied at (x, mult), or "none".

    Checks weak stationarity first (Lagrangian gradient within tol, vanishing
    multipliers on the inactive sides, z0 sign), then refines on the biactive
    multipliers: S needs both zeta components >= -tol, M needs both > tol or a
    vanishing product, C a nonnegative product, A at least one component
    >= -tol.  The returned label respects S => M => C => W and S => A => W.
    """
    x = np.asarray(x, dtype=float)
    n0, ncc = problem.n0, problem.n_cc
    x1 = x[n0:n0 + ncc] - problem.lx1
    x2 = x[n0 + ncc:] - problem.lx2
    if sets is None:
        sets = index_sets(x1, x2, tol)

    res = mpcc_kkt_residual(problem, x, mult)
    if res.grad_norm > tol:
        return "none"
    # z0 sign and complementarity with the nearest x0 bound
    gap = np.minimum(x[:n0] - problem.lx0, problem.ux0 - x[:n0]) if n0 else np.zeros(0)
    if n0 and (np.any(mult.z0 < -tol) or np.any(np.abs(mult.z0) * np.maximum(gap, 0.0) > tol)):
        return "none"
    if np.any(np.abs(mult.zeta1[sets.i_plus0]) > tol):
        return "none"
    if np.any(np.abs(mult.zeta2[sets.i_0plus]) > tol):
        return "none"

    z1 = mult.zeta1[sets.i_00]
    z2 = mult.zeta2[sets.i_00]
    if z1.size == 0:
        return "S"
    if np.all(z1 >= -tol) and np.all(z2 >= -tol):
        return "S"
    if np.all(((z1 > tol) & (z2 > tol)) | (np.abs(z1 * z2) <= tol)):
        return "M"
    if np.all(z1 * z2 >= -tol):
        return "C"
    if np.all((z1 >= -tol) | (z2 >= -tol)):
        return "A"
    return "W"


# ---------------------------------------------------------------------------
# standard-form transformation
# ---------------------------------------------------------------------------

@dataclass
class _Row:
    """One equality row of the standard form.

    kind is 'g+' (g - lg - s), 'g-' (ug - g - s), 'g=' (g - lg), or
    'ub' (x_std[var] + s - rng).  src is the original row / variable index,
    slack the standard index of the attached slack (or -1).
    """

    kind: str
    src: int
    shift: float
    slack: int = -1
    var: int = -1


@dataclass
class StandardProblem:
    """Equality-plus-nonnegativity form min f, c(x)=0, x >= 0, x = (x0, x1, x2).

    Slack variables live at the end of the x0 block (`slack_index`); original
    variables map through x_orig = offset + sign * x_std[core].  `free_mask`
    marks genuinely free original variables (no bound, no barrier term).
    """

    problem: MpccProblem
    n0: int
    n_cc: int
    m: int
    rows: list = field(default_factory=list)
    offset: np.ndarray = None
    sign: np.ndarray = None
    free_mask: np.ndarray = None
    slack_index: np.ndarray = None

    @property
    def n(self):
        return self.n0 + 2 * self.n_cc

    # --- index bookkeeping ---------------------------------------------
    @property
    def n_orig(self):
        return self.problem.n

    def _core_pos(self, k):
        """Standard index of original variable k."""
        p = self.problem
        if k < p.n0:
            return k
        return k + (self.n0 - p.n0)

    def to_original(self, x_std):
        p = self.problem
        x_std = np.asarray(x_std, dtype=float)
        xo = np.empty(p.n)
        for k in range(p.n):
            xo[k] = self.offset[k] + self.sign[k] * x_std[self._core_pos(k)]
        return xo

    def from_original(self, x_orig):
        """Embed an original point, computing slack values that zero the rows."""
        p = self.problem
        x_orig = np.asarray(x_orig, dtype=float)
        xs = np.zeros(self.n)
        for k in range(p.n):
            xs[self._core_pos(k)] = self.sign[k] * (x_orig[k] - self.offset[k])
        g = p.eval_constraints(x_orig)
        for r_idx, row in enumerate(self.rows):
            if row.slack < 0:
                continue
            if row.kind == "g+":
                xs[row.slack] = g[row.src] - row.shift
            elif row.kind == "g-":
                xs[row.slack] = row.shift - g[row.src]
            elif row.kind == "ub":
                xs[row.slack] = row.shift - xs[row.var]
        return xs

    # --- evaluator surface ----------------------------------------------
    def objective(self, x_std):
        return float(self.problem.objective(self.to_original(x_std)))

    def gradient(self, x_std):
        p = self.problem
        go = np.asarray(p.gradient(self.to_original(x_std)), dtype=float)
        out = np.zeros(self.n)
        for k in range(p.n):
            out[self._core_pos(k)] = self.sign[k] * go[k]
        return out

    def constraints(self, x_std):
        p = self.problem
        xo = self.to_original(x_std)
        g = p.eval_constraints(xo)
        x_std = np.asarray(x_std, dtype=float)
        out = np.empty(self.m)
        for i, row in enumerate(self.rows):
            if row.kind == "g=":
                out[i] = g[row.src] - row.shift
            elif row.kind == "g+":
                out[i] = g[row.src] - row.shift - x_std[row.slack]
            elif row.kind == "g-":
                out[i] = row.shift - g[row.src] - x_std[row.slack]
            else:  # 'ub'
                out[i] = x_std[row.var] + x_std[row.slack] - row.shift
        return out

    def jacobian(self, x_std):
        p = self.problem
        xo = self.to_original(x_std)
        jo = p.eval_jacobian_dense(xo)
        rows, cols, vals = [], [], []
        for i, row in enumerate(self.rows):
            if row.kind in ("g=", "g+", "g-"):
                sgn = -1.0 if row.kind == "g-" else 1.0
                for k in range(p.n):
                    v = jo[row.src, k] * self.sign[k] * sgn
                    if v != 0.0:
                        rows.append(i)
                        cols.append(self._core_pos(k))
                        vals.append(v)
                if row.slack >= 0:
                    rows.append(i)
                    cols.append(row.slack)
                    vals.append(-1.0)
            else:  # 'ub'
                rows.extend([i, i])
                cols.extend([row.var, row.slack])
                vals.extend([1.0, 1.0])
        return sp.coo_matrix((vals, (rows, cols)), shape=(self.m, self.n))

    def hessian(self, x_std, y, obj_weight=1.0):
        p = self.problem
        xo = self.to_original(x_std)
        y = np.asarray(y, dtype=float)
        yo = np.zeros(p.m)
        for i, row in enumerate(self.rows):
            if row.kind in ("g=", "g+"):
                yo[row.src] += y[i]
            elif row.kind == "g-":
                yo[row.src] -= y[i]
        ho = p.eval_hessian_dense(xo, yo, obj_weight)
        rows, cols, vals = [], [], []
        for a in range(p.n):
            pa = self._core_pos(a)
            for b in range(p.n):
                v = ho[a, b] * self.sign[a] * self.sign[b]
                if v != 0.0:
                    rows.append(pa)
                    cols.append(self._core_pos(b))
                    vals.append(v)
        return sp.coo_matrix((vals, (rows, cols)), shape=(self.n, self.n))

    def hessian_dense(self, x_std, y, obj_weight=1.0):
        return as_dense(self.hessian(x_std, y, obj_weight), (self.n, self.n))

    def jacobian_dense(self, x_std):
        return as_dense(self.jacobian(x_std), (self.m, self.n))

    def initial_point(self):
        p = self.problem
        if p.x_init is not None:
            x0 = p.x_init
        else:
            x0 = np.zeros(p.n)
        return self.from_original(x0)


def to_standard_form(problem: MpccProblem) -> StandardProblem:
    """Rewrite a general MPCC into min f, c(x)=0, x >= 0 with pairs at zero.

    Inequality rows of g gain one slack each (double-bounded rows become two
    one-sided rows), complementarity variables are shifted so their lower
    bounds sit at zero, and finite upper bounds turn into extra equality rows
    with slacks appended to the x0 block.  Genuinely free x0 variables are
    kept unbounded and flagged in `free_mask`.
    """
    problem.validate()
    p = problem
    offset = np.zeros(p.n)
    sign = np.ones(p.n)
    free_orig = np.zeros(p.n, dtype=bool)

    # upper-bound rows to create: (original var index, range)
    ub_rows = []
    for k in range(p.n0):
        lo, hi = p.lx0[k], p.ux0[k]
        if np.isfinite(lo):
            offset[k] = lo
            if np.isfinite(hi):
                ub_rows.append((k, hi - lo))
        elif np.isfinite(hi):
            # mirror one-sided upper bound: x = hi - x_std, x_std >= 0
            offset[k] = hi
            sign[k] = -1.0
        else:
            free_orig[k] = True
    for i in range(p.n_cc):
        k1 = p.n0 + i
        k2 = p.n0 + p.n_cc + i
        offset[k1] = p.lx1[i]
        offset[k2] = p.lx2[i]
        if np.isfinite(p.ux1[i]):
            ub_rows.append((k1, p.ux1[i] - p.lx1[i]))
        if np.isfinite(p.ux2[i]):
            ub_rows.append((k2, p.ux2[i] - p.lx2[i]))

    rows = []
    n_slack = 0

    def new_slack():
        nonlocal n_slack
        n_slack += 1
        return n_slack - 1

    for j in range(p.m):
        lo, hi = p.lg[j], p.ug[j]
        if not np.isfinite(lo) and not np.isfinite(hi):
            continue  # vacuous row
        if np.isfinite(lo) and np.isfinite(hi) and lo == hi:
            rows.append(_Row("g=", j, lo))
            continue
        if np.isfinite(lo):
            rows.append(_Row("g+", j, lo, slack=new_slack()))
        if np.isfinite(hi):
            rows.append(_Row("g-", j, hi, slack=new_slack()))
    for k, rng in ub_rows:
        rows.append(_Row("ub", k, rng, slack=new_slack(), var=k))

    n0_std = p.n0 + n_slack
    std = StandardProblem(
        problem=p,
        n0=n0_std,
        n_cc=p.n_cc,
        m=len(rows),
        rows=rows,
        offset=offset,
        sign=sign,
    )
    # finalize slack positions (slacks sit after the original x0 variables)
    slack_base = p.n0
    for row in std.rows:
        if row.slack >= 0:
            row.slack = slack_base + row.slack
        if row.kind == "ub":
            row.var = std._core_pos(row.var)
    free = np.zeros(std.n, dtype=bool)
    for k in range(p.n):
        if free_orig[k]:
            free[std._core_pos(k)] = True
    std.free_mask = free
    std.slack_index = np.arange(slack_base, n0_std)
    return std
