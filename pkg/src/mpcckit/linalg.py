"""Augmented KKT assembly, symmetric indefinite factorization, and the
complementarity-aware regularization schemes.

The factorization backend is LAPACK's Bunch-Kaufman LDL^T (dsytrf/dsytrs),
whose block-diagonal factor reveals the inertia.  Dense storage is used
throughout; desk-scale systems stay well below the point where a sparse
backend would pay off, and the `Factorization` seam isolates the choice.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lapack

from .errors import AssemblyError, MpccError

# inertia-correction constants (interior-point lineage defaults)
DELTA_W0 = 1e-4
DELTA_W_MIN = 1e-20
DELTA_W_MAX = 1e40
KAPPA_W_PLUS = 8.0
KAPPA_W_PLUS_BAR = 100.0
DELTA_C_COEFF = 1e-8
DELTA_C_EXP = 0.25


class UnrecoverableKkt(MpccError):
    """Inertia correction exhausted (or disabled) without reaching the target."""

    def __init__(self, message, singular=False):
        self.singular = singular
        super().__init__(message)


@dataclass
class Inertia:
    n_pos: int
    n_neg: int
    n_zero: int

    def as_tuple(self):
        return (self.n_pos, self.n_neg, self.n_zero)

    def __eq__(self, other):
        return self.as_tuple() == other.as_tuple()


class FactorizationCounter:
    """Per-solver factorization counter consumed by acceptance tests."""

    def __init__(self):
        self.count = 0

    def bump(self):
        self.count += 1


@dataclass
class AugmentedKkt:
    """Symmetric saddle matrix of either interior-point algorithm.

    Block order: primal Hessian block ``h`` (= W + Q, order n, with the
    barrier diagonals folded in), the Scholtes-slack diagonal ``sigma_s``
    (relaxation shape only), then the constraint rows ``b`` (and ``c_block``
    mapping the slack columns into the Scholtes rows).  ``sigma1/sigma2`` and
    ``offdiag`` retain the per-pair Q-block data the regularizers operate on.
    """

    kind: str                 # "relaxation" or "penalty"
    n: int
    n_cc: int
    m: int                    # rows of b (incl. Scholtes rows for relaxation)
    h: np.ndarray
    b: np.ndarray
    sigma_s: np.ndarray
    c_block: np.ndarray
    pair_rows1: np.ndarray    # standard indices of x1 variables
    pair_rows2: np.ndarray    # standard indices of x2 variables
    sigma1: np.ndarray
    sigma2: np.ndarray
    offdiag: np.ndarray       # current off-diagonal per pair (y_s or rho)
    delta_w: float = 0.0
    delta_c: float = 0.0
    reg_action: str = "none"

    @property
    def ns(self) -> int:
        return self.sigma_s.size

    @property
    def order(self) -> int:
        return self.n + self.ns + self.m

    def dense(self) -> np.ndarray:
        n, ns, m = self.n, self.ns, self.m
        K = np.zeros((self.order, self.order))
        K[:n, :n] = self.h
        if self.delta_w:
            K[:n, :n] += self.delta_w * np.eye(n)
        if ns:
            K[n:n + ns, n:n + ns] = np.diag(self.sigma_s + self.delta_w)
        K[n + ns:, :n] = self.b
        K[:n, n + ns:] = self.b.T
        if ns:
            K[n + ns:, n:n + ns] = self.c_block
            K[n:n + ns, n + ns:] = self.c_block.T
        if self.delta_c:
            K[n + ns:, n + ns:] = -self.delta_c * np.eye(m)
        return K

    def target_inertia(self) -> Inertia:
        return Inertia(self.n + self.ns, self.m, 0)

    def set_offdiag(self, i, value):
        self.offdiag[i] = value
        r1, r2 = self.pair_rows1[i], self.pair_rows2[i]
        self.h[r1, r2] = value
        self.h[r2, r1] = value


def _interior_or_raise(name, v):
    if v.size and np.min(v) <= 0.0:
        i = int(np.argmin(v))
        raise AssemblyError(name, i, float(v[i]))


def _hessian_block(iterate, problem, offdiag):
    """W + Q with the bound-barrier diagonals and pair off-diagonals."""
    n = problem.n
    n0, ncc = problem.n0, problem.n_cc
    h = iterate.w.copy()
    sigma = np.zeros(n)
    x0 = iterate.x[:n0]
    sigma0 = np.where(problem.free_mask[:n0], 0.0,
                      iterate.z0 / np.where(problem.free_mask[:n0], 1.0, x0))
    sigma1 = iterate.z1 / iterate.shifted1 if ncc else np.zeros(0)
    sigma2 = iterate.z2 / iterate.shifted2 if ncc else np.zeros(0)
    sigma[:n0] = sigma0
    sigma[n0:n0 + ncc] = sigma1
    sigma[n0 + ncc:] = sigma2
    h[np.diag_indices(n)] += sigma
    p1 = np.arange(n0, n0 + ncc)
    p2 = np.arange(n0 + ncc, n)
    for i in range(ncc):
        h[p1[i], p2[i]] += offdiag[i]
        h[p2[i], p1[i]] += offdiag[i]
    return h, sigma1, sigma2, p1, p2


def assemble_relaxation_kkt(iterate, problem, tau=None, delta1=None, delta2=None,
                            delta_c_fixed=None) -> AugmentedKkt:
    """Six-block augmented system of the relaxation algorithm.

    Requires a strictly interior iterate (shifted x, s, z all positive).  The
    Scholtes rows [0, X2, X1 | I] are appended below the constraint Jacobian;
    the off-diagonal Q contribution is the Scholtes multiplier y_s.
    """
    ncc = problem.n_cc
    n0 = problem.n0
    x0 = iterate.x[:n0]
    _interior_or_raise("x0", x0[~problem.free_mask[:n0]])
    _interior_or_raise("x1", iterate.shifted1)
    _interior_or_raise("x2", iterate.shifted2)
    _interior_or_raise("s", iterate.s)
    for name, z in (("z0", iterate.z0[~problem.free_mask[:n0]]),
                    ("z1", iterate.z1), ("z2", iterate.z2), ("z_s", iterate.z_s)):
        _interior_or_raise(name, z)

    h, sigma1, sigma2, p1, p2 = _hessian_block(iterate, problem, iterate.y_s)
    m = problem.m
    b = np.zeros((m + ncc, problem.n))
    b[:m, :] = iterate.jac
    for i in range(ncc):
        b[m + i, p1[i]] = iterate.x2[i]
        b[m + i, p2[i]] = iterate.x1[i]
    c_block = np.zeros((m + ncc, ncc))
    c_block[m:, :] = np.eye(ncc)
    sigma_s = iterate.z_s / iterate.s if ncc else np.zeros(0)
    return AugmentedKkt(
        kind="relaxation", n=problem.n, n_cc=ncc, m=m + ncc, h=h, b=b,
        sigma_s=sigma_s, c_block=c_block, pair_rows1=p1, pair_rows2=p2,
        sigma1=sigma1, sigma2=sigma2, offdiag=iterate.y_s.astype(float).copy(),
        delta_c=0.0 if delta_c_fixed is None else float(delta_c_fixed),
    )


def assemble_penalty_kkt(iterate, problem, rho, delta_c_fixed=None) -> AugmentedKkt:
    """Augmented system of the penalty algorithm: Q_rho off-diagonals, no slacks."""
    ncc = problem.n_cc
    n0 = problem.n0
    x0 = iterate.x[:n0]
    _interior_or_raise("x0", x0[~problem.free_mask[:n0]])
    _interior_or_raise("x1", iterate.shifted1)
    _interior_or_raise("x2", iterate.shifted2)
    for name, z in (("z0", iterate.z0[~problem.free_mask[:n0]]),
                    ("z1", iterate.z1), ("z2", iterate.z2)):
        _interior_or_raise(name, z)
    offdiag = np.full(ncc, float(rho))
    h, sigma1, sigma2, p1, p2 = _hessian_block(iterate, problem, offdiag)
    return AugmentedKkt(
        kind="penalty", n=problem.n, n_cc=ncc, m=problem.m, h=h,
        b=iterate.jac.copy(), sigma_s=np.zeros(0),
        c_block=np.zeros((problem.m, 0)), pair_rows1=p1, pair_rows2=p2,
        sigma1=sigma1, sigma2=sigma2, offdiag=offdiag,
        delta_c=0.0 if delta_c_fixed is None else float(delta_c_fixed),
    )


@dataclass
class Factorization:
    """Bunch-Kaufman LDL^T handle with inertia extracted from the D blocks."""

    matrix: np.ndarray
    lu: np.ndarray
    ipiv: np.ndarray
    inertia: Inertia
    success: bool

    def solve_raw(self, rhs):
        x, info = lapack.dsytrs(self.lu, self.ipiv, rhs, lower=1)
        if info < 0:
            raise MpccError(f"dsytrs failed with info={info}")
        return x


def _inertia_from_factors(lu, ipiv, scale):
    # Exact zero pivots only: the LBL factor's block signs are the inertia,
    # and magnitude-based zero tests misclassify the tiny negative pivots a
    # large delta_w legitimately produces in the constraint block.
    tol = np.finfo(float).tiny
    n_pos = n_neg = n_zero = 0
    n = lu.shape[0]
    k = 0
    while k < n:
        if ipiv[k] > 0:
            d = lu[k, k]
            if abs(d) <= tol:
                n_zero += 1
            elif d > 0:
                n_pos += 1
            else:
                n_neg += 1
            k += 1
        else:
            a, bb, c = lu[k, k], lu[k + 1, k], lu[k + 1, k + 1]
            tr = a + c
            disc = np.hypot((a - c) / 2.0, bb)
            for lam in (tr / 2.0 + disc, tr / 2.0 - disc):
                if abs(lam) <= tol:
                    n_zero += 1
                elif lam > 0:
                    n_pos += 1
                else:
                    n_neg += 1
            k += 2
    return Inertia(n_pos, n_neg, n_zero)


def factorize(kkt, counter: FactorizationCounter | None = None) -> Factorization:
    """Factor the assembled matrix, reporting inertia from the LDL^T blocks."""
    K = kkt.dense() if isinstance(kkt, AugmentedKkt) else np.asarray(kkt, dtype=float)
    if counter is not None:
        counter.bump()
    lu, ipiv, info = lapack.dsytrf(K, lower=1)
    if info < 0:
        raise MpccError(f"dsytrf failed with info={info}")
    scale = float(np.max(np.abs(K))) if K.size else 1.0
    inertia = _inertia_from_factors(lu, ipiv, scale)
    if info > 0 and inertia.n_zero == 0:
        inertia = Inertia(inertia.n_pos, inertia.n_neg, 1)
    success = inertia.n_zero == 0 and info == 0
    return Factorization(matrix=K, lu=lu, ipiv=ipiv, inertia=inertia, success=success)


@dataclass
class StepResult:
    d: np.ndarray
    residual: float
    degraded: bool


def solve_step(fact: Factorization, rhs, tol_factor=1e-8) -> StepResult:
    """Solve K d = -rhs with iterative refinement.

    One refinement round always runs; a second only if the first misses the
    target relative residual 1e-8 * (1 + ||rhs||).  A direction that still
    misses is returned with the degraded flag set.
    """
    rhs = np.asarray(rhs, dtype=float)
    if rhs.size == 0:
        return StepResult(np.zeros(0), 0.0, False)
    target = tol_factor * (1.0 + float(np.linalg.norm(rhs)))
    d = fact.solve_raw(-rhs)
    d = d - fact.solve_raw(fact.matrix @ d + rhs)
    res_norm = float(np.linalg.norm(fact.matrix @ d + rhs))
    if res_norm > target:
        d = d - fact.solve_raw(fact.matrix @ d + rhs)
        res_norm = float(np.linalg.norm(fact.matrix @ d + rhs))
    return StepResult(d, res_norm, res_norm > target)


def recover_bound_multiplier_steps(iterate, dx, ds, mu):
    """Back-substitute the eliminated bound-multiplier rows.

    dz = -V^{-1}(r + Z dv) per block, with V the (shifted) primal diagonal and
    r the perturbed complementarity residual Vz - mu.  Free variables carry no
    multiplier and get a zero step.
    """
    p = iterate.problem
    n0, ncc = p.n0, p.n_cc
    x0 = iterate.x[:n0]
    free = p.free_mask[:n0]
    dz0 = np.zeros(n0)
    act = ~free
    if np.any(act):
        r7 = x0[act] * iterate.z0[act] - mu
        dz0[act] = -(r7 + iterate.z0[act] * dx[:n0][act]) / x0[act]
    if ncc:
        r8 = iterate.shifted1 * iterate.z1 - mu
        r9 = iterate.shifted2 * iterate.z2 - mu
        dz1 = -(r8 + iterate.z1 * dx[n0:n0 + ncc]) / iterate.shifted1
        dz2 = -(r9 + iterate.z2 * dx[n0 + ncc:]) / iterate.shifted2
    else:
        dz1 = np.zeros(0)
        dz2 = np.zeros(0)
    if iterate.s.size:
        r10 = iterate.s * iterate.z_s - mu
        dzs = -(r10 + iterate.z_s * ds) / iterate.s
    else:
        dzs = np.zeros(0)
    return dz0, dz1, dz2, dzs


# ---------------------------------------------------------------------------
# Q-block regularization
# ---------------------------------------------------------------------------

def critical_bound(sigma1, sigma2):
    """Largest off-diagonal magnitude keeping [[s1, q], [q, s2]] positive definite."""
    return np.sqrt(sigma1 * sigma2)


def q_regularize_critical(kkt: AugmentedKkt, alpha_b: float) -> AugmentedKkt:
    """Clamp pair off-diagonals to alpha_b times the critical multiplier.

    Sign is preserved; blocks already within the bound are untouched.  With
    alpha_b < 1 every modified block is positive definite afterwards.
    """
    changed = False
    for i in range(kkt.n_cc):
        bound = alpha_b * critical_bound(kkt.sigma1[i], kkt.sigma2[i])
        q = kkt.offdiag[i]
        if abs(q) > bound:
            kkt.set_offdiag(i, float(np.copysign(bound, q)))
            changed = True
    if changed:
        kkt.reg_action = "q_critical"
    return kkt


def eigclip_2x2(a, b, d, lam_min):
    """Clip the eigenvalues of [[a, b], [b, d]] below at lam_min; closed form."""
    tr = a + d
    disc = np.hypot((a - d) / 2.0, b)
    lam1 = tr / 2.0 + disc
    lam2 = tr / 2.0 - disc
    if lam1 >= lam_min and lam2 >= lam_min:
        return a, b, d
    c1 = max(lam1, lam_min)
    c2 = max(lam2, lam_min)
    if disc == 0.0:
        return c1, 0.0, c1
    # eigenvector for lam1: (b, lam1 - a) unless b == 0
    if b == 0.0:
        if a >= d:
            return c1, 0.0, c2
        return c2, 0.0, c1
    v = np.array([b, lam1 - a])
    v /= np.linalg.norm(v)
    w = np.array([-v[1], v[0]])
    aa = c1 * v[0] * v[0] + c2 * w[0] * w[0]
    bb = c1 * v[0] * v[1] + c2 * w[0] * w[1]
    dd = c1 * v[1] * v[1] + c2 * w[1] * w[1]
    return aa, bb, dd


def q_regularize_eig(kkt: AugmentedKkt, lam_min: float) -> AugmentedKkt:
    """Eigenvalue-clip each 2x2 Q block at lam_min and reassemble."""
    changed = False
    for i in range(kkt.n_cc):
        a, b, d = kkt.sigma1[i], kkt.offdiag[i], kkt.sigma2[i]
        aa, bb, dd = eigclip_2x2(a, b, d, lam_min)
        if (aa, bb, dd) != (a, b, d):
            r1, r2 = kkt.pair_rows1[i], kkt.pair_rows2[i]
            kkt.h[r1, r1] += aa - a
            kkt.h[r2, r2] += dd - d
            kkt.sigma1[i] = aa
            kkt.sigma2[i] = dd
            kkt.set_offdiag(i, bb)
            changed = True
    if changed:
        kkt.reg_action = "q_eigclip"
    return kkt


def apply_q_regularization(kkt: AugmentedKkt, scheme: str, alpha_b: float,
                           lam_min: float) -> None:
    if scheme == "critical":
        q_regularize_critical(kkt, alpha_b)
    elif scheme == "eigenclip":
        q_regularize_eig(kkt, lam_min)


def inertia_correct(kkt: AugmentedKkt, options: dict, mu: float,
                    counter: FactorizationCounter | None = None):
    """Staged correction: factor as-is, then Q-regularize, then grow delta_w.

    delta_c turns positive (1e-8 * mu^0.25) only when zero pivots were seen,
    unless a fixed dual regularization overrides it.  Raises UnrecoverableKkt
    when delta_w exceeds its ceiling or every stage is disabled/exhausted.
    Returns (delta_w, delta_c, factorization, actions string).
    """
    target = kkt.target_inertia()
    actions = []
    fact = factorize(kkt, counter)
    if fact.inertia == target:
        return 0.0, kkt.delta_c, fact, "none"

    scheme = options.get("q_regularization", "critical")
    if scheme != "off" and kkt.n_cc > 0:
        apply_q_regularization(kkt, scheme, options.get("critical_rho_factor", 0.999),
                               options.get("min_eig_value", 1e-8))
        if kkt.reg_action != "none":
            actions.append(kkt.reg_action)
            fact = factorize(kkt, counter)
            if fact.inertia == target:
                return 0.0, kkt.delta_c, fact, "+".join(actions)

    if not options.get("inertia_correction", True):
        raise UnrecoverableKkt(
            "wrong inertia with inertia correction disabled",
            singular=fact.inertia.n_zero > 0,
        )

    fixed_dc = options.get("delta_c_fixed", None)
    delta_c = kkt.delta_c
    delta_w = DELTA_W0
    trials = 0
    while delta_w <= DELTA_W_MAX:
        if fixed_dc is None and fact.inertia.n_zero > 0 and delta_c == 0.0:
            delta_c = DELTA_C_COEFF * mu ** DELTA_C_EXP
        kkt.delta_w = delta_w
        kkt.delta_c = delta_c
        fact = factorize(kkt, counter)
        trials += 1
        if fact.inertia == target:
            actions.append("delta_w" + ("+delta_c" if delta_c > 0 else ""))
            return delta_w, delta_c, fact, "+".join(actions)
        growth = KAPPA_W_PLUS if trials < 5 else KAPPA_W_PLUS_BAR
        delta_w = max(DELTA_W_MIN, growth * delta_w)
    raise UnrecoverableKkt("delta_w exceeded its maximum during inertia correction")
