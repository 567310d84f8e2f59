"""Problem files, builtin analytic problems, benchmark harness, profiles.

QPCC data (quadratic objective, linear constraints, variable pairs) is the
on-disk problem class; builtins are QPCCs too, so the loader and the solvers
exercise one construction path.  Every builtin's registered optimum is
verified at load time by a brute-force oracle (branch enumeration plus dense
active-set KKT solves), so the registry never asserts an unverified number.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from jsonschema import Draft202012Validator

from .errors import ParseError
from .model import IndexSets, MpccMultipliers, MpccProblem, classify_stationarity
from .result import ALL_STATUSES

INF = float("inf")


@dataclass
class QpccData:
    """min 0.5 x'Qx + q'x + c0  s.t.  lg <= Ax <= ug, lx <= x <= ux,
    x_i perp x_j for (i, j) in pairs (componentwise at the lower bounds)."""

    n: int
    Q: np.ndarray
    q: np.ndarray
    c0: float
    A: np.ndarray
    lg: np.ndarray
    ug: np.ndarray
    lx: np.ndarray
    ux: np.ndarray
    pairs: list
    x_init: np.ndarray | None = None
    name: str = ""

    def validate(self):
        if self.Q.shape != (self.n, self.n):
            raise ParseError(f"Q must be {self.n}x{self.n}", "objective.Q")
        if not np.allclose(self.Q, self.Q.T, rtol=0, atol=0):
            raise ParseError("Q must be symmetric", "objective.Q")
        seen = set()
        for k, (i, j) in enumerate(self.pairs):
            if not (0 <= i < self.n and 0 <= j < self.n) or i == j:
                raise ParseError(f"invalid pair ({i}, {j})", f"pairs[{k}]")
            if i in seen or j in seen:
                raise ParseError(f"variable reused across pairs ({i}, {j})",
                                 f"pairs[{k}]")
            seen.update((i, j))
            if not (np.isfinite(self.lx[i]) and np.isfinite(self.lx[j])):
                raise ParseError(
                    f"pair ({i}, {j}) requires finite lower bounds", f"pairs[{k}]")

    @property
    def m(self):
        return self.A.shape[0]


def _permutation(data: QpccData):
    """Original index -> (x0..., x1..., x2...) order of the MpccProblem."""
    first = [i for i, _ in data.pairs]
    second = [j for _, j in data.pairs]
    in_pair = set(first) | set(second)
    ordinary = [k for k in range(data.n) if k not in in_pair]
    return np.array(ordinary + first + second, dtype=int)


def qpcc_to_problem(data: QpccData) -> MpccProblem:
    """Exact-derivative evaluators over the partition-permuted data."""
    data.validate()
    perm = _permutation(data)
    n_cc = len(data.pairs)
    n0 = data.n - 2 * n_cc
    Qp = data.Q[np.ix_(perm, perm)]
    qp = data.q[perm]
    Ap = data.A[:, perm] if data.m else np.zeros((0, data.n))
    lxp = data.lx[perm]
    uxp = data.ux[perm]
    c0 = data.c0

    def objective(x):
        return float(0.5 * x @ Qp @ x + qp @ x + c0)

    def gradient(x):
        return Qp @ x + qp

    def constraints(x):
        return Ap @ x

    def jacobian(x):
        import scipy.sparse as sp
        return sp.coo_matrix(Ap)

    def hessian(x, y, obj_weight=1.0):
        import scipy.sparse as sp
        return sp.coo_matrix(obj_weight * Qp)

    return MpccProblem(
        n0=n0, n_cc=n_cc, m=data.m,
        objective=objective, gradient=gradient, hessian=hessian,
        constraints=constraints if data.m else None,
        jacobian=jacobian if data.m else None,
        lg=data.lg, ug=data.ug,
        lx0=lxp[:n0], ux0=uxp[:n0],
        lx1=lxp[n0:n0 + n_cc], lx2=lxp[n0 + n_cc:],
        ux1=uxp[n0:n0 + n_cc], ux2=uxp[n0 + n_cc:],
        x_init=data.x_init[perm] if data.x_init is not None else None,
        name=data.name,
    )


# ---------------------------------------------------------------------------
# problem file format (JSON)
# ---------------------------------------------------------------------------

_MATRIX_SCHEMA = {
    "oneOf": [
        {
            "type": "object",
            "properties": {
                "format": {"const": "dense"},
                "data": {"type": "array", "items": {"type": "array",
                                                    "items": {"type": "number"}}},
            },
            "required": ["format", "data"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "format": {"const": "coo"},
                "shape": {"type": "array", "items": {"type": "integer"},
                          "minItems": 2, "maxItems": 2},
                "rows": {"type": "array", "items": {"type": "integer"}},
                "cols": {"type": "array", "items": {"type": "integer"}},
                "vals": {"type": "array", "items": {"type": "number"}},
            },
            "required": ["format", "shape", "rows", "cols", "vals"],
            "additionalProperties": False,
        },
    ]
}

_NUMBER_OR_INF = {"type": ["number", "string"]}

PROBLEM_SCHEMA = {
    "type": "object",
    "properties": {
        "version": {"const": 1},
        "name": {"type": "string"},
        "n": {"type": "integer", "minimum": 1},
        "objective": {
            "type": "object",
            "properties": {
                "Q": _MATRIX_SCHEMA,
                "q": {"type": "array", "items": {"type": "number"}},
                "const": {"type": "number"},
            },
            "required": ["q"],
            "additionalProperties": False,
        },
        "constraints": {
            "type": "object",
            "properties": {
                "A": _MATRIX_SCHEMA,
                "lg": {"type": "array", "items": _NUMBER_OR_INF},
                "ug": {"type": "array", "items": _NUMBER_OR_INF},
            },
            "required": ["A", "lg", "ug"],
            "additionalProperties": False,
        },
        "bounds": {
            "type": "object",
            "properties": {
                "lx": {"type": "array", "items": _NUMBER_OR_INF},
                "ux": {"type": "array", "items": _NUMBER_OR_INF},
            },
            "additionalProperties": False,
        },
        "pairs": {"type": "array",
                  "items": {"type": "array", "items": {"type": "integer"},
                            "minItems": 2, "maxItems": 2}},
        "x_init": {"type": "array", "items": {"type": "number"}},
    },
    "required": ["version", "n", "objective", "pairs"],
    "additionalProperties": False,
}

_VALIDATOR = Draft202012Validator(PROBLEM_SCHEMA)


def _bound_value(v):
    if isinstance(v, str):
        s = v.strip().lower()
        if s in ("inf", "+inf", "infinity"):
            return INF
        if s in ("-inf", "-infinity"):
            return -INF
        raise ParseError(f"not a bound value: {v!r}")
    return float(v)


def _matrix_value(spec, shape, location):
    if spec is None:
        return np.zeros(shape)
    if spec["format"] == "dense":
        mat = np.asarray(spec["data"], dtype=float)
        if mat.shape != shape:
            raise ParseError(f"expected shape {shape}, got {mat.shape}", location)
        return mat
    rows = np.asarray(spec["rows"], dtype=int)
    cols = np.asarray(spec["cols"], dtype=int)
    vals = np.asarray(spec["vals"], dtype=float)
    if tuple(spec["shape"]) != shape:
        raise ParseError(f"expected shape {shape}, got {tuple(spec['shape'])}",
                         location)
    if not (len(rows) == len(cols) == len(vals)):
        raise ParseError("rows/cols/vals length mismatch", location)
    if len(rows) and (rows.min() < 0 or rows.max() >= shape[0]
                      or cols.min() < 0 or cols.max() >= shape[1]):
        raise ParseError("coordinate index out of range", location)
    mat = np.zeros(shape)
    np.add.at(mat, (rows, cols), vals)
    return mat


def parse_qpcc(doc: dict, name="") -> QpccData:
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ParseError(e.message, "/".join(str(p) for p in e.absolute_path))
    n = doc["n"]
    obj = doc["objective"]
    q = np.asarray(obj["q"], dtype=float)
    if q.size != n:
        raise ParseError(f"q must have length {n}", "objective.q")
    Q = _matrix_value(obj.get("Q"), (n, n), "objective.Q")
    cons = doc.get("constraints")
    if cons is not None:
        lg = np.array([_bound_value(v) for v in cons["lg"]])
        ug = np.array([_bound_value(v) for v in cons["ug"]])
        A = _matrix_value(cons["A"], (lg.size, n), "constraints.A")
        if lg.size != ug.size:
            raise ParseError("lg/ug length mismatch", "constraints")
    else:
        A = np.zeros((0, n))
        lg = np.zeros(0)
        ug = np.zeros(0)
    bounds = doc.get("bounds", {})
    lx = (np.array([_bound_value(v) for v in bounds["lx"]])
          if "lx" in bounds else np.zeros(n))
    ux = (np.array([_bound_value(v) for v in bounds["ux"]])
          if "ux" in bounds else np.full(n, INF))
    if lx.size != n or ux.size != n:
        raise ParseError("bounds must have length n", "bounds")
    pairs = [(int(i), int(j)) for i, j in doc["pairs"]]
    x_init = (np.asarray(doc["x_init"], dtype=float)
              if "x_init" in doc else None)
    if x_init is not None and x_init.size != n:
        raise ParseError("x_init must have length n", "x_init")
    data = QpccData(n=n, Q=Q, q=q, c0=float(obj.get("const", 0.0)),
                    A=A, lg=lg, ug=ug, lx=lx, ux=ux, pairs=pairs,
                    x_init=x_init, name=doc.get("name", name))
    data.validate()
    return data


def serialize_qpcc(data: QpccData) -> dict:
    def bound_list(arr):
        return [v if math.isfinite(v) else ("inf" if v > 0 else "-inf")
                for v in arr.tolist()]

    doc = {
        "version": 1,
        "name": data.name,
        "n": data.n,
        "objective": {
            "Q": {"format": "dense", "data": data.Q.tolist()},
            "q": data.q.tolist(),
            "const": data.c0,
        },
        "pairs": [[int(i), int(j)] for i, j in data.pairs],
        "bounds": {"lx": bound_list(data.lx), "ux": bound_list(data.ux)},
    }
    if data.m:
        doc["constraints"] = {
            "A": {"format": "dense", "data": data.A.tolist()},
            "lg": bound_list(data.lg),
            "ug": bound_list(data.ug),
        }
    if data.x_init is not None:
        doc["x_init"] = data.x_init.tolist()
    return doc


def load_problem(path) -> MpccProblem:
    """Load a QPCC problem file; schema violations carry their location."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}", str(path)) from exc
    data = parse_qpcc(doc, name=str(path))
    return qpcc_to_problem(data)


def load_qpcc(path) -> QpccData:
    with open(path) as fh:
        doc = json.load(fh)
    return parse_qpcc(doc, name=str(path))


def save_problem(data: QpccData, path):
    with open(path, "w") as fh:
        json.dump(serialize_qpcc(data), fh, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# brute-force oracle: branch enumeration + dense active-set KKT solves
# ---------------------------------------------------------------------------

def _one_sided_rows(data: QpccData):
    """All constraints as rows r'x >= b (bounds included), plus equalities."""
    ineq, eq = [], []
    for j in range(data.m):
        row = data.A[j]
        if np.isfinite(data.lg[j]) and data.lg[j] == data.ug[j]:
            eq.append((row, data.lg[j]))
            continue
        if np.isfinite(data.lg[j]):
            ineq.append((row, data.lg[j]))
        if np.isfinite(data.ug[j]):
            ineq.append((-row, -data.ug[j]))
    for k in range(data.n):
        e = np.zeros(data.n)
        e[k] = 1.0
        if np.isfinite(data.lx[k]) and data.lx[k] == data.ux[k]:
            eq.append((e.copy(), data.lx[k]))
            continue
        if np.isfinite(data.lx[k]):
            ineq.append((e.copy(), data.lx[k]))
        if np.isfinite(data.ux[k]):
            ineq.append((-e, -data.ux[k]))
    return ineq, eq


def brute_force_qpcc(data: QpccData, feas_tol=1e-9):
    """Global minimum over all branches by active-set enumeration.

    For each complementarity branch, every subset of the inequality rows is
    pinned active and the equality-constrained QP KKT system solved densely;
    feasible solutions are collected and the best objective returned.  Only
    viable for desk-scale problems (the builtins).
    """
    data.validate()
    ineq, eq0 = _one_sided_rows(data)
    best_f = INF
    best_x = None
    points = []
    for branch in itertools.product((0, 1), repeat=len(data.pairs)):
        eq = list(eq0)
        for (i, j), side in zip(data.pairs, branch):
            fixed = j if side == 0 else i
            e = np.zeros(data.n)
            e[fixed] = 1.0
            eq.append((e, data.lx[fixed]))
        for active in itertools.chain.from_iterable(
                itertools.combinations(range(len(ineq)), r)
                for r in range(len(ineq) + 1)):
            rows = [ineq[a] for a in active]
            Aeq = np.array([r for r, _ in eq + rows]).reshape(len(eq) + len(rows),
                                                              data.n)
            beq = np.array([b for _, b in eq + rows])
            k = Aeq.shape[0]
            kkt = np.zeros((data.n + k, data.n + k))
            kkt[:data.n, :data.n] = data.Q
            kkt[:data.n, data.n:] = Aeq.T
            kkt[data.n:, :data.n] = Aeq
            rhs = np.concatenate([-data.q, beq])
            # least squares: tolerates duplicated (rank-deficient) rows;
            # inconsistent systems are skipped via the residual check
            sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
            if np.linalg.norm(kkt @ sol - rhs) > 1e-8 * (1.0 + np.linalg.norm(rhs)):
                continue
            x = sol[:data.n]
            ok = all(r @ x >= b - feas_tol for r, b in ineq)
            ok = ok and all(abs(r @ x - b) <= feas_tol for r, b in eq)
            ok = ok and all(
                abs((x[i] - data.lx[i]) * (x[j] - data.lx[j])) <= 1e-8
                for i, j in data.pairs)
            if not ok:
                continue
            f = float(0.5 * x @ data.Q @ x + data.q @ x + data.c0)
            points.append((f, x.copy()))
            if f < best_f - 1e-12:
                best_f = f
                best_x = x.copy()
    return best_f, best_x, points


# ---------------------------------------------------------------------------
# builtin problems
# ---------------------------------------------------------------------------

@dataclass
class LabeledPoint:
    """A registry point with its stationarity label and MPCC multipliers
    (in the problem's partitioned coordinates)."""

    x: np.ndarray
    label: str
    multipliers: MpccMultipliers
    sets: IndexSets


@dataclass
class BuiltinEntry:
    data: QpccData
    f_opt: float
    convex: bool
    mpcc_licq: bool
    labeled_points: list = field(default_factory=list)

    def problem(self) -> MpccProblem:
        return qpcc_to_problem(self.data)


def _dense(n, entries):
    M = np.zeros((n, n))
    for i, j, v in entries:
        M[i, j] = v
        M[j, i] = v
    return M


def _builtin_table():
    table = {}

    # min x1 + x2, one pair: optimum 0 at the origin (S-stationary).
    table["trivial-corner"] = BuiltinEntry(
        data=QpccData(n=2, Q=np.zeros((2, 2)), q=np.array([1.0, 1.0]), c0=0.0,
                      A=np.zeros((0, 2)), lg=np.zeros(0), ug=np.zeros(0),
                      lx=np.zeros(2), ux=np.full(2, INF), pairs=[(0, 1)],
                      x_init=np.array([0.4, 0.3]), name="trivial-corner"),
        f_opt=0.0, convex=True, mpcc_licq=True,
        labeled_points=[
            LabeledPoint(np.array([0.0, 0.0]), "S",
                         MpccMultipliers(np.zeros(0), np.zeros(0),
                                         np.array([1.0]), np.array([1.0])),
                         IndexSets(np.array([], int), np.array([], int),
                                   np.array([0]))),
        ])

    # min (x1-1)^2 + (x2-1)^2: two S-stationary minima (1,0), (0,1), f*=1.
    table["two-circle"] = BuiltinEntry(
        data=QpccData(n=2, Q=2.0 * np.eye(2), q=np.array([-2.0, -2.0]), c0=2.0,
                      A=np.zeros((0, 2)), lg=np.zeros(0), ug=np.zeros(0),
                      lx=np.zeros(2), ux=np.full(2, INF), pairs=[(0, 1)],
                      x_init=np.array([0.8, 0.3]), name="two-circle"),
        f_opt=1.0, convex=True, mpcc_licq=True,
        labeled_points=[
            LabeledPoint(np.array([1.0, 0.0]), "S",
                         MpccMultipliers(np.zeros(0), np.zeros(0),
                                         np.array([0.0]), np.array([-2.0])),
                         IndexSets(np.array([0]), np.array([], int),
                                   np.array([], int))),
            LabeledPoint(np.array([0.0, 1.0]), "S",
                         MpccMultipliers(np.zeros(0), np.zeros(0),
                                         np.array([-2.0]), np.array([0.0])),
                         IndexSets(np.array([], int), np.array([0]),
                                   np.array([], int))),
        ])

    # min -x1 - x2, boxes x <= 1: optimum -1 at (1,0)/(0,1).
    table["bilinear-lpcc"] = BuiltinEntry(
        data=QpccData(n=2, Q=np.zeros((2, 2)), q=np.array([-1.0, -1.0]), c0=0.0,
                      A=np.zeros((0, 2)), lg=np.zeros(0), ug=np.zeros(0),
                      lx=np.zeros(2), ux=np.array([1.0, 1.0]), pairs=[(0, 1)],
                      x_init=np.array([0.7, 0.2]), name="bilinear-lpcc"),
        f_opt=-1.0, convex=True, mpcc_licq=True)

    # min x1^2 + x2^2: S-stationary at the biactive origin.
    table["biactive-origin"] = BuiltinEntry(
        data=QpccData(n=2, Q=2.0 * np.eye(2), q=np.zeros(2), c0=0.0,
                      A=np.zeros((0, 2)), lg=np.zeros(0), ug=np.zeros(0),
                      lx=np.zeros(2), ux=np.full(2, INF), pairs=[(0, 1)],
                      x_init=np.array([0.5, 0.4]), name="biactive-origin"),
        f_opt=0.0, convex=True, mpcc_licq=True,
        labeled_points=[
            LabeledPoint(np.array([0.0, 0.0]), "S",
                         MpccMultipliers(np.zeros(0), np.zeros(0),
                                         np.array([0.0]), np.array([0.0])),
                         IndexSets(np.array([], int), np.array([], int),
                                   np.array([0]))),
        ])

    # min (x1-1)(x2-1) on [0,3]^2: the origin is C- but not S-stationary
    # (zeta = (-1,-1)); the optima sit at (3,0)/(0,3) with f = -2.
    table["w-not-s"] = BuiltinEntry(
        data=QpccData(n=2, Q=_dense(2, [(0, 1, 1.0)]), q=np.array([-1.0, -1.0]),
                      c0=1.0, A=np.zeros((0, 2)), lg=np.zeros(0), ug=np.zeros(0),
                      lx=np.zeros(2), ux=np.array([3.0, 3.0]), pairs=[(0, 1)],
                      x_init=np.array([0.6, 0.2]), name="w-not-s"),
        f_opt=-2.0, convex=False, mpcc_licq=True,
        labeled_points=[
            LabeledPoint(np.array([0.0, 0.0]), "C",
                         MpccMultipliers(np.zeros(0), np.zeros(0),
                                         np.array([-1.0]), np.array([-1.0])),
                         IndexSets(np.array([], int), np.array([], int),
                                   np.array([0]))),
        ])

    # min (x1-2)^2 + (x2-1)^2: global optimum (2,0) f=1; local (0,1) f=4.
    # Branch switching exercised from the biactive origin.
    table["tilted-switch"] = BuiltinEntry(
        data=QpccData(n=2, Q=2.0 * np.eye(2), q=np.array([-4.0, -2.0]), c0=5.0,
                      A=np.zeros((0, 2)), lg=np.zeros(0), ug=np.zeros(0),
                      lx=np.zeros(2), ux=np.full(2, INF), pairs=[(0, 1)],
                      x_init=np.array([0.9, 0.2]), name="tilted-switch"),
        f_opt=1.0, convex=True, mpcc_licq=True)

    # Duplicated equality rows: the constraint Jacobian is structurally
    # rank-deficient, exercising the dual regularization delta_c.
    table["degenerate-jacobian"] = BuiltinEntry(
        data=QpccData(n=3, Q=2.0 * np.eye(3),
                      q=np.array([-2.0, -4.0, 0.0]), c0=5.0,
                      A=np.array([[1.0, 1.0, 1.0], [1.0, 1.0, 1.0]]),
                      lg=np.array([2.0, 2.0]), ug=np.array([2.0, 2.0]),
                      lx=np.array([-INF, 0.0, 0.0]), ux=np.full(3, INF),
                      pairs=[(1, 2)],
                      x_init=np.array([0.4, 1.2, 0.3]),
                      name="degenerate-jacobian"),
        f_opt=0.5, convex=True, mpcc_licq=False)

    # min -x1 x2 + x1 + x2 on [0,10]^2: nonconvex penalty stress test,
    # optimum 0 at the origin.
    table["nonconvex-penalty"] = BuiltinEntry(
        data=QpccData(n=2, Q=_dense(2, [(0, 1, -1.0)]), q=np.array([1.0, 1.0]),
                      c0=0.0, A=np.zeros((0, 2)), lg=np.zeros(0), ug=np.zeros(0),
                      lx=np.zeros(2), ux=np.array([10.0, 10.0]), pairs=[(0, 1)],
                      x_init=np.array([0.5, 0.3]), name="nonconvex-penalty"),
        f_opt=0.0, convex=False, mpcc_licq=True)

    return table


_BUILTINS = None
_VERIFIED = False


def builtin_table():
    global _BUILTINS, _VERIFIED
    if _BUILTINS is None:
        _BUILTINS = _builtin_table()
    if not _VERIFIED:
        for name, entry in _BUILTINS.items():
            f_star, _, _ = brute_force_qpcc(entry.data)
            if abs(f_star - entry.f_opt) > 1e-9:
                raise AssertionError(
                    f"builtin {name}: registered optimum {entry.f_opt} "
                    f"disagrees with brute force {f_star}")
            problem = entry.problem()
            for pt in entry.labeled_points:
                perm = _permutation(entry.data)
                x_part = pt.x[perm]
                got = classify_stationarity(problem, x_part, pt.multipliers,
                                            pt.sets)
                if got != pt.label:
                    raise AssertionError(
                        f"builtin {name}: point labeled {pt.label} "
                        f"classifies as {got}")
        _VERIFIED = True
    return _BUILTINS


def builtin_names():
    return sorted(builtin_table().keys())


def builtin(name: str) -> MpccProblem:
    table = builtin_table()
    if name not in table:
        raise KeyError(f"unknown builtin problem {name!r}; "
                       f"known: {', '.join(sorted(table))}")
    return table[name].problem()


def builtin_entry(name: str) -> BuiltinEntry:
    table = builtin_table()
    if name not in table:
        raise KeyError(f"unknown builtin problem {name!r}")
    return table[name]


# ---------------------------------------------------------------------------
# benchmark harness
# ---------------------------------------------------------------------------

@dataclass
class BenchRecord:
    solver: str
    problem: str
    status: str
    objective: float
    wall_time: float
    iterations: int
    factorizations: int
    residual: float
    comp_residual: float

    def __post_init__(self):
        assert self.status in ALL_STATUSES, self.status


def _run_cell(spec):
    import time

    from .penalty import PenaltySolver
    from .relax import RelaxationSolver

    solver_name, algorithm, options, problem_name, path = spec
    if path is not None:
        problem = load_problem(path)
    else:
        problem = builtin(problem_name)
    cls = RelaxationSolver if algorithm == "relaxation" else PenaltySolver
    solver = cls(**options)
    t0 = time.perf_counter()
    try:
        res = solver.solve(problem)
        wall = time.perf_counter() - t0
        return BenchRecord(
            solver=solver_name, problem=problem_name, status=res.status,
            objective=res.objective, wall_time=wall, iterations=res.iterations,
            factorizations=res.factorizations, residual=res.report.overall,
            comp_residual=res.comp_inf)
    except Exception:
        wall = time.perf_counter() - t0
        return BenchRecord(
            solver=solver_name, problem=problem_name, status="failure",
            objective=math.nan, wall_time=wall, iterations=0,
            factorizations=0, residual=math.nan, comp_residual=math.nan)


def run_bench(solvers, problems, timeout=None, workers=1):
    """Run every (solver, problem) cell; per-cell failures never abort.

    solvers: list of (name, algorithm, option overrides).  problems: list of
    builtin names or (name, path) tuples.  Records come back canonically
    ordered by (solver, problem).
    """
    cells = []
    for solver_name, algorithm, options in solvers:
        opts = dict(options)
        if timeout is not None:
            opts["time_limit"] = timeout
        for prob in problems:
            if isinstance(prob, tuple):
                problem_name, path = prob
            else:
                problem_name, path = prob, None
            cells.append((solver_name, algorithm, opts, problem_name, path))
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_cell, cells))
    else:
        records = [_run_cell(c) for c in cells]
    records.sort(key=lambda r: (r.solver, r.problem))
    return records


def performance_profile(records, metric="iterations"):
    """Dolan-More profile points: {solver: [(theta, fraction), ...]}.

    Failures get an infinite ratio; problems every solver fails are excluded
    (returned in the notes list).
    """
    solvers = sorted({r.solver for r in records})
    problems = sorted({r.problem for r in records})
    value = {}
    for r in records:
        v = getattr(r, "wall_time" if metric == "time" else "iterations")
        value[(r.solver, r.problem)] = v if r.status == "success" else math.inf
    notes = []
    ratios = {s: [] for s in solvers}
    kept = 0
    for p in problems:
        best = min(value.get((s, p), math.inf) for s in solvers)
        if not math.isfinite(best):
            notes.append(f"problem {p}: all solvers failed; excluded")
            continue
        kept += 1
        best = max(best, 1e-16)
        for s in solvers:
            v = value.get((s, p), math.inf)
            ratios[s].append(v / best if math.isfinite(v) else math.inf)
    curves = {}
    thetas = sorted({r for rs in ratios.values() for r in rs
                     if math.isfinite(r)} | {1.0})
    for s in solvers:
        pts = []
        for th in thetas:
            frac = sum(1 for r in ratios[s] if r <= th) / max(kept, 1)
            pts.append((th, frac))
        curves[s] = pts
    return curves, notes
