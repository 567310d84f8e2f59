"""Complementarity active-set method and the LPEC crossover driver.

Works in the standard-form space (x >= 0, equalities).  Branch LPs and branch
NLPs are solved by the interior-point core; the trust-region LPEC is solved
either by exhaustive branch enumeration (the desk-scale oracle) or by the
relaxation algorithm plus naive branch identification.  Crossed-over
solutions satisfy complementarity exactly: fixed variables are eliminated,
not constrained, so they are zero to the last bit.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .bench import QpccData, _permutation, qpcc_to_problem
from .core import BarrierEngine
from .errors import EnumerationCapExceeded
from .ipm import TerminationReport
from .linalg import FactorizationCounter
from .model import IndexSets, MpccProblem, StandardProblem, index_sets, to_standard_form
from .options import resolve
from .result import (STATUS_FAILURE, STATUS_STALLED, STATUS_SUCCESS,
                     SolveResult)

INF = float("inf")

# trust-region and crossover constants
TR_GROW = 2.0
TR_SHRINK = 0.25
TR_MAX = 1e3
D_TOL = 1e-10               # predicted-decrease threshold certifying d = 0
ALPHA_DELTA_CROSS = 10.0    # initial projection radius factor
ALPHA_CROSS = 10.0          # projection radius growth
DELTA_MP = 1e2              # projection radius ceiling
N_CB = 5                    # BNLP attempts in the driver
ALPHA_GAMMA = 0.1           # feasibility budget shrink
MINOR_CAP = 30
MAJOR_CAP = 100


@dataclass
class Branch:
    """Partition of pair indices: x2 = 0 on i1, x1 = 0 on i2."""

    i1: np.ndarray
    i2: np.ndarray

    def __post_init__(self):
        self.i1 = np.asarray(self.i1, dtype=int)
        self.i2 = np.asarray(self.i2, dtype=int)

    def validate(self, n_cc):
        merged = np.concatenate([self.i1, self.i2])
        assert merged.size == n_cc and np.array_equal(
            np.sort(merged), np.arange(n_cc)), "branch must partition the pairs"

    def key(self, n_cc):
        side = np.zeros(n_cc, dtype=int)
        side[self.i2] = 1
        return tuple(side.tolist())


def branch_from_point(x1, x2, tol=0.0) -> Branch:
    """Naive identification: pair goes to i1 when x1 >= x2 (ties to i1)."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    idx = np.arange(x1.size)
    to_i1 = x1 >= x2
    return Branch(i1=idx[to_i1], i2=idx[~to_i1])


@dataclass
class LpecInstance:
    """Linearization data of the trust-region LPEC at a point.

    The instance lives in standard-form coordinates: grad and jac are the
    objective gradient and constraint Jacobian at x, sets the index-set
    partition of the pairs, delta the infinity-norm trust radius.
    """

    std: StandardProblem
    x: np.ndarray
    grad: np.ndarray
    cons: np.ndarray
    jac: np.ndarray
    sets: IndexSets
    delta: float

    @staticmethod
    def at(std: StandardProblem, x, delta, tol=1e-6) -> "LpecInstance":
        x = np.asarray(x, dtype=float)
        n0, ncc = std.n0, std.n_cc
        sets = index_sets(np.maximum(x[n0:n0 + ncc], 0.0),
                          np.maximum(x[n0 + ncc:], 0.0), tol)
        return LpecInstance(
            std=std, x=x.copy(),
            grad=std.gradient(x), cons=std.constraints(x),
            jac=std.jacobian_dense(x), sets=sets, delta=float(delta))


def _pair_positions(std, i):
    return std.n0 + i, std.n0 + std.n_cc + i


def _nlp_options(tol=1e-8):
    return resolve("relaxation", {
        "tol": tol,
        "center_complementarities": False,
        "max_iter": 500,
    })


def _solve_branch_lp(lpec: LpecInstance, fixed: np.ndarray, counter=None,
                     pairs=None):
    """Solve the LP (or LPCC) in w = x + d over the non-fixed coordinates.

    fixed marks coordinates pinned to zero (eliminated).  When `pairs` lists
    biactive pairs kept complementary, the subproblem is itself an MPCC and
    goes through the relaxation solver.  Returns (d, objective) or None when
    infeasible.
    """
    std, x, delta = lpec.std, lpec.x, lpec.delta
    n = std.n
    if np.any(np.abs(x[fixed]) > delta + 1e-12):
        return None  # fixing d = -x would exceed the trust region
    keep = np.flatnonzero(~fixed)
    nk = keep.size
    pos = {int(k): i for i, k in enumerate(keep)}
    free = std.free_mask

    lo = np.empty(nk)
    hi = np.empty(nk)
    extra_rows = []
    pair_cols = set()
    pairs = pairs or []
    for (i, j) in pairs:
        pair_cols.update((int(i), int(j)))
    for i, k in enumerate(keep):
        hi[i] = x[k] + delta
        if free[k]:
            lo[i] = x[k] - delta
        else:
            lo[i] = max(0.0, x[k] - delta)
    # pair columns must keep their lower bound at zero for the pair
    # structure; a positive trust-region lower side becomes a general row
    for i, k in enumerate(keep):
        if k in pair_cols and lo[i] > 0.0:
            extra_rows.append((i, lo[i]))
            lo[i] = 0.0

    m = std.m
    A = np.zeros((m + len(extra_rows), nk))
    lg = np.empty(m + len(extra_rows))
    ug = np.empty(m + len(extra_rows))
    if m:
        A[:m, :] = lpec.jac[:, keep]
        rhs = lpec.jac @ x - lpec.cons
        lg[:m] = rhs
        ug[:m] = rhs
    for r, (i, lower) in enumerate(extra_rows):
        A[m + r, i] = 1.0
        lg[m + r] = lower
        ug[m + r] = INF

    qpcc = QpccData(
        n=nk, Q=np.zeros((nk, nk)), q=lpec.grad[keep].copy(), c0=0.0,
        A=A, lg=lg, ug=ug, lx=lo, ux=hi,
        pairs=[(pos[int(i)], pos[int(j)]) for (i, j) in pairs],
        x_init=np.clip(x[keep], lo, hi), name="lpec-branch")
    problem = qpcc_to_problem(qpcc)
    engine = BarrierEngine(to_standard_form(problem), _nlp_options(), "relaxation",
                           problem_name="lpec", counter=counter)
    res = engine.solve()
    if res.status != STATUS_SUCCESS:
        return None
    # res.x follows the MpccProblem's partition order; undo the pair
    # permutation applied by the QPCC construction
    perm = _permutation(qpcc)
    w_keep = np.empty(nk)
    w_keep[perm] = res.x
    w = np.zeros(n)
    w[keep] = w_keep
    d = w - x
    if m and float(np.max(np.abs(lpec.cons + lpec.jac @ d))) > 1e-6:
        return None
    obj = float(lpec.grad @ d)
    return d, obj


def solve_lpec_enumerate(lpec: LpecInstance, cap=16, counter=None):
    """Exhaustive branch enumeration of the trust-region LPEC.

    Every assignment of the biactive pairs yields a box-and-equality LP
    solved by the interior-point core; the minimizing feasible (d, branch) is
    returned (ties broken lexicographically), or None when no branch admits a
    feasible point.  Raises when the biactive set exceeds the cap.
    """
    sets = lpec.sets
    if sets.i_00.size > cap:
        raise EnumerationCapExceeded(int(sets.i_00.size), cap)
    std = lpec.std
    best = None
    for assign in itertools.product((0, 1), repeat=sets.i_00.size):
        fixed = np.zeros(std.n, dtype=bool)
        i1 = list(sets.i_plus0)
        i2 = list(sets.i_0plus)
        for i in sets.i_plus0:
            fixed[_pair_positions(std, i)[1]] = True
        for i in sets.i_0plus:
            fixed[_pair_positions(std, i)[0]] = True
        for side, i in zip(assign, sets.i_00):
            p1, p2 = _pair_positions(std, i)
            if side == 0:
                fixed[p2] = True
                i1.append(i)
            else:
                fixed[p1] = True
                i2.append(i)
        out = _solve_branch_lp(lpec, fixed, counter=counter)
        if out is None:
            continue
        d, obj = out
        if best is None or obj < best[1]:
            best = (d, obj, Branch(np.array(sorted(i1), dtype=int),
                                   np.array(sorted(i2), dtype=int)))
    if best is None:
        return None
    return best[0], best[2], best[1]


def solve_lpec_relaxed(lpec: LpecInstance, counter=None):
    """Solve the LPEC as an MPCC via the relaxation algorithm.

    The branch is then identified by the naive magnitude rule at x + d and
    polished by an exact LP solve on that branch (restoring exact
    complementarity of the returned step).
    """
    sets = lpec.sets
    std = lpec.std
    fixed = np.zeros(std.n, dtype=bool)
    for i in sets.i_plus0:
        fixed[_pair_positions(std, i)[1]] = True
    for i in sets.i_0plus:
        fixed[_pair_positions(std, i)[0]] = True
    pairs = [_pair_positions(std, i) for i in sets.i_00]
    out = _solve_branch_lp(lpec, fixed, counter=counter, pairs=pairs)
    if out is None:
        return None
    d, _ = out
    w = lpec.x + d
    n0, ncc = std.n0, std.n_cc
    branch = branch_from_point(w[n0:n0 + ncc], w[n0 + ncc:])
    refined = _solve_branch_lp(lpec, _branch_fixed_mask(std, branch),
                               counter=counter)
    if refined is None:
        return d, branch, float(lpec.grad @ d)
    d2, obj2 = refined
    return d2, branch, obj2


def _branch_fixed_mask(std, branch: Branch):
    fixed = np.zeros(std.n, dtype=bool)
    for i in branch.i1:
        fixed[_pair_positions(std, i)[1]] = True
    for i in branch.i2:
        fixed[_pair_positions(std, i)[0]] = True
    return fixed


def proj_lpec(x, delta, std: StandardProblem, cap=16, counter=None):
    """Feasibility projection PROJ-LPEC: exact complementarity at x + d.

    All pairs branch freely; the first feasible branch wins (only a feasible
    point is needed to identify a branch).  Returns d or None for this radius.
    """
    x = np.asarray(x, dtype=float)
    n0, ncc = std.n0, std.n_cc
    if ncc > cap:
        raise EnumerationCapExceeded(ncc, cap)
    lpec = LpecInstance(
        std=std, x=x.copy(), grad=std.gradient(x), cons=std.constraints(x),
        jac=std.jacobian_dense(x),
        sets=IndexSets(np.array([], int), np.array([], int), np.arange(ncc)),
        delta=float(delta))
    for assign in itertools.product((0, 1), repeat=ncc):
        fixed = np.zeros(std.n, dtype=bool)
        for i, side in enumerate(assign):
            p1, p2 = _pair_positions(std, i)
            fixed[p2 if side == 0 else p1] = True
        out = _solve_branch_lp(lpec, fixed, counter=counter)
        if out is not None:
            return out[0]
    return None


# ---------------------------------------------------------------------------
# branch NLP
# ---------------------------------------------------------------------------

def _reduced_nlp(std: StandardProblem, branch: Branch, x_start):
    """Eliminate the branch-fixed variables from the standard problem."""
    fixed = _branch_fixed_mask(std, branch)
    keep = np.flatnonzero(~fixed)
    n_red = keep.size

    def embed(v):
        x = np.zeros(std.n)
        x[keep] = v
        return x

    def objective(v):
        return std.objective(embed(v))

    def gradient(v):
        return std.gradient(embed(v))[keep]

    def constraints(v):
        return std.constraints(embed(v))

    def jacobian(v):
        import scipy.sparse as sp
        return sp.coo_matrix(std.jacobian_dense(embed(v))[:, keep])

    def hessian(v, y, obj_weight=1.0):
        import scipy.sparse as sp
        h = std.hessian_dense(embed(v), y, obj_weight)
        return sp.coo_matrix(h[np.ix_(keep, keep)])

    lx0 = np.zeros(n_red)
    lx0[std.free_mask[keep]] = -INF
    start = np.asarray(x_start, dtype=float)[keep]
    start = np.where(std.free_mask[keep], start, np.maximum(start, 0.0))
    nlp = MpccProblem(
        n0=n_red, n_cc=0, m=std.m,
        objective=objective, gradient=gradient, hessian=hessian,
        constraints=constraints if std.m else None,
        jacobian=jacobian if std.m else None,
        lg=np.zeros(std.m), ug=np.zeros(std.m),
        lx0=lx0, x_init=start, name="bnlp")
    return nlp, keep, embed


def solve_bnlp(branch: Branch, x_start, std: StandardProblem, tol=1e-8,
               counter=None):
    """Solve the branch NLP by variable elimination; returns (x_full, result)
    or (None, result) when the branch is infeasible."""
    branch.validate(std.n_cc)
    nlp, keep, embed = _reduced_nlp(std, branch, x_start)
    engine = BarrierEngine(to_standard_form(nlp), _nlp_options(tol), "relaxation",
                           problem_name="bnlp", counter=counter)
    res = engine.solve()
    if res.status != STATUS_SUCCESS:
        return None, res
    return embed(res.x), res


# ---------------------------------------------------------------------------
# active-set method (major/minor trust-region loop)
# ---------------------------------------------------------------------------

@dataclass
class CrossoverLog:
    rows: list = field(default_factory=list)
    n_lpec: int = 0
    n_bnlp: int = 0

    def add(self, iteration, biactive, delta, step_norm, dfval, description):
        self.rows.append({
            "iter": iteration, "n_lpec": self.n_lpec, "n_bnlp": self.n_bnlp,
            "biactive": biactive, "delta": delta, "step": step_norm,
            "df": dfval, "description": description,
        })

    def table(self):
        header = f"{'Iter':>4} {'#LPCC':>6} {'#BNLP':>6} {'|I00|':>6} " \
                 f"{'Delta':>10} {'Step':>10} {'Df':>11}  Description"
        lines = [header]
        for r in self.rows:
            step = f"{r['step']:.3e}" if r["step"] is not None else "--"
            df = f"{r['df']:.3e}" if r["df"] is not None else "--"
            lines.append(
                f"{r['iter']:>4} {r['n_lpec']:>6} {r['n_bnlp']:>6} "
                f"{r['biactive']:>6} {r['delta']:>10.3e} {step:>10} {df:>11}"
                f"  {r['description']}")
        return "\n".join(lines)


def _result_at(std, x, status, log, counter, algorithm="active-set"):
    f = std.objective(x)
    n0, ncc = std.n0, std.n_cc
    comp = float(np.max(np.abs(x[n0:n0 + ncc] * x[n0 + ncc:]))) if ncc else 0.0
    cons = std.constraints(x)
    cons_norm = float(np.max(np.abs(cons))) if cons.size else 0.0
    report = TerminationReport(
        stationarity=0.0, constraint_violation=cons_norm,
        comp_lower=0.0, comp_slack=0.0, comp_upper=comp)
    return SolveResult(
        status=status, x=std.to_original(x), objective=f, report=report,
        comp_inf=comp, iterations=len(log.rows),
        factorizations=counter.count, records=[],
        stationarity="none", multipliers=None, x_std=x.copy(), iterate=None,
        algorithm=algorithm, problem_name=std.problem.name,
        message=f"LPEC solves: {log.n_lpec}, BNLP solves: {log.n_bnlp}")


def active_set_method(x0, branch0: Branch, delta0, std: StandardProblem,
                      set_tol=1e-6, cap=16, log: CrossoverLog | None = None,
                      counter: FactorizationCounter | None = None) -> SolveResult:
    """Trust-region LPEC / branch-NLP loop certifying B-stationarity.

    Each major iteration solves the LPEC at the current point; a predicted
    decrease below D_TOL certifies d = 0 (B-stationarity).  Otherwise the
    branch identified at x + d is solved as an NLP and accepted on strict
    objective decrease (trust radius doubles), else the radius shrinks.
    """
    counter = counter or FactorizationCounter()
    log = log if log is not None else CrossoverLog()
    branch0.validate(std.n_cc)
    x = np.asarray(x0, dtype=float).copy()
    delta = float(delta0)
    f_cur = std.objective(x)
    for major in range(MAJOR_CAP):
        accepted = False
        for minor in range(MINOR_CAP):
            lpec = LpecInstance.at(std, x, delta, tol=set_tol)
            out = solve_lpec_enumerate(lpec, cap=cap, counter=counter)
            log.n_lpec += 1
            if out is None:
                delta *= TR_GROW  # infeasible linearization: widen
                continue
            d, branch, obj = out
            if -obj <= D_TOL:
                log.add(major, int(lpec.sets.i_00.size), delta, None, None,
                        "B-stat. verified")
                return _result_at(std, x, STATUS_SUCCESS, log, counter)
            x_new, bres = solve_bnlp(branch, x + d, std, counter=counter)
            log.n_bnlp += 1
            if x_new is not None:
                f_new = std.objective(x_new)
                if f_new < f_cur:
                    step = float(np.max(np.abs(x_new - x)))
                    log.add(major, int(lpec.sets.i_00.size), delta, step,
                            f_new - f_cur, "BNLP step")
                    x = x_new
                    f_cur = f_new
                    delta = min(TR_GROW * delta, TR_MAX)
                    accepted = True
                    break
                log.add(major, int(lpec.sets.i_00.size), delta, None,
                        f_new - f_cur, "BNLP step rejected")
            else:
                log.add(major, int(lpec.sets.i_00.size), delta, None, None,
                        "BNLP infeasible")
            delta *= TR_SHRINK
        if not accepted:
            return _result_at(std, x, STATUS_STALLED, log, counter)
    return _result_at(std, x, STATUS_STALLED, log, counter)


def crossover_driver(x_hat, std: StandardProblem, set_tol=1e-6, cap=16,
                     delta_as=1e-4, counter=None) -> SolveResult:
    """Project an approximate solution to an exactly-complementary point and
    certify B-stationarity via the active-set method.

    Follows the radius-growth projection loop, then BNLP attempts with a
    shrinking feasibility budget, then the active-set method.  Any exit
    without a feasible projection or branch NLP reports FAILURE.
    """
    counter = counter or FactorizationCounter()
    log = CrossoverLog()
    x_hat = np.asarray(x_hat, dtype=float).copy()
    n0, ncc = std.n0, std.n_cc
    cons = std.constraints(x_hat)
    cons_norm = float(np.max(np.abs(cons))) if cons.size else 0.0
    comp_norm = float(np.max(np.abs(x_hat[n0:n0 + ncc] * x_hat[n0 + ncc:]))) \
        if ncc else 0.0
    delta = ALPHA_DELTA_CROSS * max(cons_norm, comp_norm)
    if delta == 0.0:
        delta = 1e-12
    d = None
    while delta <= DELTA_MP:
        d = proj_lpec(x_hat, delta, std, cap=cap, counter=counter)
        log.n_lpec += 1
        if d is not None:
            break
        delta = ALPHA_CROSS * delta
    if d is None:
        log.add(0, ncc, delta, None, None, "projection failed")
        res = _result_at(std, x_hat, STATUS_FAILURE, log, counter, "crossover")
        res.message = "no feasible projection within the radius ceiling"
        return res
    w = x_hat + d
    branch = branch_from_point(w[n0:n0 + ncc], w[n0 + ncc:])
    log.add(0, ncc, delta, float(np.max(np.abs(d))) if d.size else 0.0, None,
            "Projection.")

    gamma = delta
    for attempt in range(N_CB):
        start = w.copy()
        if attempt > 0:
            # tighter feasibility budget: pull the start toward the branch
            # feasible set with a short restoration-style clip
            start = np.where(std.free_mask, start, np.maximum(start, 0.0))
        x_b, bres = solve_bnlp(branch, start, std, counter=counter)
        log.n_bnlp += 1
        if x_b is not None:
            cres = std.constraints(x_b)
            cnorm = float(np.max(np.abs(cres))) if cres.size else 0.0
            if cnorm <= max(gamma, 1e-8):
                result = active_set_method(x_b, branch, delta_as, std,
                                           set_tol=set_tol, cap=cap, log=log,
                                           counter=counter)
                result.algorithm = "crossover"
                result.message = log.table()
                return result
        gamma *= ALPHA_GAMMA
    res = _result_at(std, x_hat, STATUS_FAILURE, log, counter, "crossover")
    res.message = "no feasible branch NLP within the attempt budget"
    return res


def crossover_from_result(result: SolveResult, problem: MpccProblem,
                          **kwargs) -> SolveResult:
    """Chain a relaxation/penalty result into the crossover driver."""
    std = to_standard_form(problem)
    x_hat = result.x_std if result.x_std is not None else std.from_original(result.x)
    return crossover_driver(x_hat, std, **kwargs)
