"""Log-barrier solver for the small smooth convex subproblems produced by each SCA step.

Problems are *maximizations* of a concave objective

    f(x) = constant + c.x - sum_j (rho_j / 2) ||x[idx_j] - center_j||^2

subject to constraint rows ``g_i(x) <= 0`` built only from convex pieces
(affine parts, isotropic quadratics, norm balls, weighted Euclidean norms and
exponentials of single variables), plus equality pins that are eliminated by
substitution. Rows are relaxed to ``g_i(x) <= feas_tol`` so that starting
points sitting exactly on a constraint boundary (the usual situation for an
SCA anchor) are strictly interior.

Each barrier stage runs damped Newton steps on
``-t f(x) - sum_i log(feas_tol - g_i(x))`` until the Newton decrement is
small; ``t`` starts at ``m / max(1, |f(x0)|)`` and grows tenfold per stage
until the gap bound ``m / t`` is a tenth of ``opt_tol`` (relative to ``|f|``
when ``|f| > 1``). The reported stationarity is the KKT residual at the
multiplier estimate implied by one further Newton step. Rows that only touch
pinned coordinates are constant and are checked once. Newton systems are
factored densely, or as a sparse quasi-definite augmented system when all but
a few rows are sparse. The best iterate is tracked so the returned objective
never falls below that of the starting point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

ARMIJO = 1e-4
MU = 10.0
CENTRED = 1e-2  # Newton decrement below which a barrier stage counts as centred
POLISH_STEPS = 8
OPTIMAL = "optimal"
MAX_ITER = "max_iter"
INFEASIBLE_START = "infeasible_start"


@dataclass(frozen=True)
class SolveOptions:
    feas_tol: float = 1e-8
    opt_tol: float = 1e-6
    max_iter: int = 5000


def _as_idx(idx, width=None) -> np.ndarray:
    a = np.asarray(idx, dtype=np.int64)
    if a.ndim == 1:
        a = a[:, None] if width is None else a.reshape(-1, width)
    return a


def _as_csr(A, m: int, dim: int) -> sp.csr_matrix:
    if A is None:
        return sp.csr_matrix((m, dim))
    if sp.issparse(A):
        out = sp.csr_matrix(A, dtype=float)
    else:
        out = sp.csr_matrix(np.atleast_2d(np.asarray(A, dtype=float)))
    if out.shape != (m, dim):
        raise ValueError(f"affine part has shape {out.shape}, expected {(m, dim)}")
    return out


class Objective:
    """Concave objective: constant + linear . x - sum_j (rho_j/2) ||x[idx_j] - center_j||^2."""

    def __init__(self, dim: int, linear=None, constant: float = 0.0,
                 quad_idx=None, quad_center=None, quad_rho=None):
        self.dim = int(dim)
        self.linear = np.zeros(dim) if linear is None else np.asarray(linear, float).copy()
        self.constant = float(constant)
        if quad_idx is None:
            self.quad_idx = np.zeros((0, 1), dtype=np.int64)
            self.quad_center = np.zeros((0, 1))
            self.quad_rho = np.zeros(0)
        else:
            self.quad_idx = _as_idx(quad_idx)
            self.quad_center = np.asarray(quad_center, float).reshape(self.quad_idx.shape)
            self.quad_rho = np.broadcast_to(np.asarray(quad_rho, float), (len(self.quad_idx),)).copy()
        if np.any(self.quad_rho < 0):
            raise ValueError("objective curvature weights must be non-negative (concavity)")
        self.hess_diag = np.bincount(
            self.quad_idx.ravel(),
            weights=np.repeat(self.quad_rho, self.quad_idx.shape[1]),
            minlength=self.dim).astype(float)

    def value(self, x: np.ndarray) -> float:
        u = x[self.quad_idx] - self.quad_center
        return float(self.constant + self.linear @ x - 0.5 * np.sum(self.quad_rho * np.sum(u * u, axis=1)))

    def gradient(self, x: np.ndarray) -> np.ndarray:
        g = self.linear.copy()
        u = x[self.quad_idx] - self.quad_center
        np.add.at(g, self.quad_idx.ravel(), -(self.quad_rho[:, None] * u).ravel())
        return g


class ConstraintBlock:
    """A family of convex rows ``g_i(x) <= 0``.

    Every row is ``A_i x - b_i`` plus any number of the terms below, each tied
    to a row index:

    * quadratic: ``(rho/2) ||x[idx] - x[idx_neg] - center||^2`` (``idx_neg`` optional)
    * exponential: ``exp(x[j])``
    * norm: ``weight * ||x[idx] - center||``

    Use the named constructors (:func:`affine`, :func:`norm_ball`, ...) rather
    than this class directly; only non-negative weights are admitted.
    """

    def __init__(self, dim: int, m: int, A=None, b=None, *, quad=None, exp=None, norm=None, kind="custom"):
        self.dim = int(dim)
        self.m = int(m)
        self.kind = kind
        self.A = _as_csr(A, self.m, self.dim)
        self.b = np.zeros(self.m) if b is None else np.broadcast_to(np.asarray(b, float), (self.m,)).copy()
        self.quad = None
        if quad is not None:
            rows, idx, idx_neg, center, rho = quad
            idx = _as_idx(idx)
            rows = np.asarray(rows, np.int64)
            rho = np.broadcast_to(np.asarray(rho, float), (len(rows),)).copy()
            if np.any(rho < 0):
                raise ValueError("quadratic constraint terms must have rho >= 0")
            neg = None if idx_neg is None else _as_idx(idx_neg).reshape(idx.shape)
            center = np.zeros(idx.shape) if center is None else np.asarray(center, float).reshape(idx.shape)
            self.quad = (rows, idx, neg, center, rho)
        self.exp = None
        if exp is not None:
            rows, idx = exp
            self.exp = (np.asarray(rows, np.int64), np.asarray(idx, np.int64))
        self.norm = None
        if norm is not None:
            rows, idx, center, weight = norm
            idx = _as_idx(idx)
            weight = np.broadcast_to(np.asarray(weight, float), (len(idx),)).copy()
            if np.any(weight < 0):
                raise ValueError("norm terms must have non-negative weights")
            self.norm = (np.asarray(rows, np.int64), idx, np.asarray(center, float).reshape(idx.shape), weight)

    # -- evaluation -----------------------------------------------------
    def values(self, x: np.ndarray) -> np.ndarray:
        v = self.A @ x - self.b
        if self.quad is not None:
            rows, idx, neg, center, rho = self.quad
            u = x[idx] - center
            if neg is not None:
                u -= x[neg]
            v += np.bincount(rows, 0.5 * rho * np.einsum("ij,ij->i", u, u), minlength=self.m)
        if self.exp is not None:
            rows, idx = self.exp
            v += np.bincount(rows, np.exp(x[idx]), minlength=self.m)
        if self.norm is not None:
            rows, idx, center, weight = self.norm
            u = x[idx] - center
            v += np.bincount(rows, weight * np.sqrt(np.einsum("ij,ij->i", u, u)), minlength=self.m)
        return v

    def jacobian(self, x: np.ndarray) -> sp.csr_matrix:
        r_parts, c_parts, d_parts = [], [], []
        if self.quad is not None:
            rows, idx, neg, center, rho = self.quad
            u = x[idx] - center
            if neg is not None:
                u -= x[neg]
            w = idx.shape[1]
            rr = np.repeat(rows, w)
            gu = (rho[:, None] * u).ravel()
            r_parts.append(rr); c_parts.append(idx.ravel()); d_parts.append(gu)
            if neg is not None:
                r_parts.append(rr); c_parts.append(neg.ravel()); d_parts.append(-gu)
        if self.exp is not None:
            rows, idx = self.exp
            r_parts.append(rows); c_parts.append(idx); d_parts.append(np.exp(x[idx]))
        if self.norm is not None:
            rows, idx, center, weight = self.norm
            u = x[idx] - center
            nrm = np.sqrt(np.einsum("ij,ij->i", u, u))
            r_parts.append(np.repeat(rows, idx.shape[1]))
            c_parts.append(idx.ravel())
            d_parts.append((weight[:, None] * u / nrm[:, None]).ravel())
        if not r_parts:
            return self.A
        extra = sp.csr_matrix((np.concatenate(d_parts), (np.concatenate(r_parts), np.concatenate(c_parts))),
                              shape=(self.m, self.dim))
        return self.A + extra

    def support(self) -> sp.csr_matrix:
        """Structural (row, variable) incidence, independent of the point."""
        r_parts, c_parts = [self.A.tocoo().row], [self.A.tocoo().col]
        if self.quad is not None:
            rows, idx, neg, _, _ = self.quad
            r_parts.append(np.repeat(rows, idx.shape[1])); c_parts.append(idx.ravel())
            if neg is not None:
                r_parts.append(np.repeat(rows, idx.shape[1])); c_parts.append(neg.ravel())
        if self.exp is not None:
            r_parts.append(self.exp[0]); c_parts.append(self.exp[1])
        if self.norm is not None:
            rows, idx, _, _ = self.norm
            r_parts.append(np.repeat(rows, idx.shape[1])); c_parts.append(idx.ravel())
        r, c = np.concatenate(r_parts), np.concatenate(c_parts)
        return sp.csr_matrix((np.ones(len(r)), (r, c)), shape=(self.m, self.dim))

    def hessian_terms(self, x: np.ndarray, lam: np.ndarray):
        """Triplets (row, col, value) of sum_i lam_i * Hessian(g_i)(x)."""
        r_parts, c_parts, d_parts = [], [], []
        if self.quad is not None:
            rows, idx, neg, center, rho = self.quad
            coef = np.repeat(lam[rows] * rho, idx.shape[1])
            r_parts.append(idx.ravel()); c_parts.append(idx.ravel()); d_parts.append(coef)
            if neg is not None:
                r_parts += [neg.ravel(), idx.ravel(), neg.ravel()]
                c_parts += [neg.ravel(), neg.ravel(), idx.ravel()]
                d_parts += [coef, -coef, -coef]
        if self.exp is not None:
            rows, idx = self.exp
            r_parts.append(idx); c_parts.append(idx); d_parts.append(lam[rows] * np.exp(x[idx]))
        if self.norm is not None:
            rows, idx, center, weight = self.norm
            u = x[idx] - center
            nrm = np.sqrt(np.einsum("ij,ij->i", u, u))
            uh = u / nrm[:, None]
            w = idx.shape[1]
            block = (np.eye(w)[None] - uh[:, :, None] * uh[:, None, :]) * (lam[rows] * weight / nrm)[:, None, None]
            r_parts.append(np.repeat(idx, w, axis=1).ravel())
            c_parts.append(np.tile(idx, (1, w)).ravel())
            d_parts.append(block.ravel())
        return r_parts, c_parts, d_parts


# -- named constructors ------------------------------------------------------

def affine(dim: int, A, b) -> ConstraintBlock:
    """Rows ``A x <= b``."""
    b = np.atleast_1d(np.asarray(b, float))
    return ConstraintBlock(dim, len(b), A, b, kind="affine")


def half_space(dim: int, index: Sequence[int], bound: Sequence[float], sense: str = ">=") -> ConstraintBlock:
    """Single-variable bounds ``x[index] >= bound`` (or ``<=``)."""
    index = np.atleast_1d(np.asarray(index, np.int64))
    bound = np.broadcast_to(np.asarray(bound, float), index.shape)
    sign = -1.0 if sense == ">=" else 1.0
    A = sp.csr_matrix((np.full(len(index), sign), (np.arange(len(index)), index)), shape=(len(index), dim))
    return ConstraintBlock(dim, len(index), A, sign * bound, kind="half_space")


def norm_ball(dim: int, idx_a, idx_b=None, offset=None, radius=1.0) -> ConstraintBlock:
    """Rows ``||x[idx_a] - x[idx_b] - offset|| <= radius`` (stored squared)."""
    idx_a = _as_idx(idx_a)
    m = len(idx_a)
    radius = np.broadcast_to(np.asarray(radius, float), (m,))
    return ConstraintBlock(dim, m, None, radius ** 2,
                           quad=(np.arange(m), idx_a, idx_b, offset, 2.0), kind="norm_ball")


def convex_quadratic(dim: int, A, b, idx, center, rho) -> ConstraintBlock:
    """Rows ``A_i x + (rho_i/2) ||x[idx_i] - center_i||^2 <= b_i``."""
    idx = _as_idx(idx)
    m = len(idx)
    return ConstraintBlock(dim, m, A, b, quad=(np.arange(m), idx, None, center, rho), kind="quadratic")


def exponential(dim: int, exp_idx, A, b, idx=None, center=None, rho=None) -> ConstraintBlock:
    """Rows ``exp(x[j_i]) + A_i x + (rho_i/2) ||x[idx_i] - center_i||^2 <= b_i``."""
    exp_idx = np.atleast_1d(np.asarray(exp_idx, np.int64))
    m = len(exp_idx)
    quad = None if idx is None else (np.arange(m), _as_idx(idx), None, center, rho)
    return ConstraintBlock(dim, m, A, b, quad=quad, exp=(np.arange(m), exp_idx), kind="exponential")


def norm_sum(dim: int, A, b, term_row, term_idx, term_center, term_weight) -> ConstraintBlock:
    """Rows ``A_i x + sum_{t in row i} w_t ||x[idx_t] - center_t|| <= b_i``."""
    b = np.atleast_1d(np.asarray(b, float))
    return ConstraintBlock(dim, len(b), A, b, norm=(term_row, term_idx, term_center, term_weight),
                           kind="norm_sum")


@dataclass
class ConvexSubproblem:
    """Maximize ``objective`` over x subject to every block and the equality pins."""

    dim: int
    objective: Objective
    constraints: list
    x0: np.ndarray
    fixed_idx: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))
    fixed_val: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, float).copy()
        self.fixed_idx = np.asarray(self.fixed_idx, np.int64)
        self.fixed_val = np.asarray(self.fixed_val, float)
        if self.x0.shape != (self.dim,):
            raise ValueError("x0 has the wrong dimension")
        self.x0[self.fixed_idx] = self.fixed_val

    @property
    def m(self) -> int:
        return sum(c.m for c in self.constraints)

    def constraint_values(self, x: np.ndarray) -> np.ndarray:
        if not self.constraints:
            return np.zeros(0)
        return np.concatenate([c.values(x) for c in self.constraints])

    def max_violation(self, x: np.ndarray) -> float:
        v = self.constraint_values(x)
        return float(max(0.0, v.max())) if v.size else 0.0


@dataclass
class SolveReport:
    x: np.ndarray
    value: float
    violation: float
    stationarity: float
    iterations: int
    status: str
    history: list = field(default_factory=list)


def line_search_feasible(problem: ConvexSubproblem, x: np.ndarray, direction: np.ndarray,
                         max_halvings: int = 60) -> float:
    """Largest step 2^-j along ``direction`` that stays feasible and passes Armijo.

    Feasible means no row gets worse than ``max(0, g_i(x))``. Returns 0 when
    the direction is not an ascent direction or every trial step is blocked.
    """
    x = np.asarray(x, float)
    d = np.asarray(direction, float).copy()
    d[problem.fixed_idx] = 0.0
    obj = problem.objective
    slope = float(obj.gradient(x) @ d)
    if not slope > 0:
        return 0.0
    f0 = obj.value(x)
    limit = np.maximum(problem.constraint_values(x), 0.0)
    step = 1.0
    for _ in range(max_halvings):
        trial = x + step * d
        ft = obj.value(trial)
        if ft > f0 and ft >= f0 + ARMIJO * step * slope and np.all(problem.constraint_values(trial) <= limit):
            return step
        step *= 0.5
    return 0.0


class _Kkt:
    """Derivative assembly over the free (unpinned) coordinates.

    Rows that only involve pinned coordinates are constant; they are checked
    once at the start and otherwise left out of the barrier.
    """

    def __init__(self, problem: ConvexSubproblem, relax: float):
        self.p = problem
        self.relax = relax
        self.free = np.setdiff1d(np.arange(problem.dim), problem.fixed_idx)
        if problem.constraints:
            support = sp.vstack([blk.support() for blk in problem.constraints], format="csc")
            self.live = np.asarray(support[:, self.free].sum(axis=1)).ravel() > 0
        else:
            self.live = np.zeros(0, bool)
        self.split = self._plan()

    def all_slacks(self, x):
        return self.relax - self.p.constraint_values(x)

    def slacks(self, x):
        return self.all_slacks(x)[self.live]

    def jacobian(self, x) -> sp.csr_matrix:
        return sp.vstack([blk.jacobian(x) for blk in self.p.constraints], format="csr")[self.live]

    def dual_residual(self, x, lam, J=None):
        """Gradient of the Lagrangian of min -f, restricted to free coordinates."""
        J = self.jacobian(x) if J is None else J
        return (-self.p.objective.gradient(x) + J.T @ lam)[self.free]

    def reduced_hessian(self, x, lam, s, J, obj_weight=1.0):
        """Newton matrix H_L + J^T diag(lam/s) J on the free coordinates.

        Returned dense, or as a sparse :class:`_Split` when the problem is
        sparse apart from a few dense rows.
        """
        p = self.p
        d = p.dim
        lam_all = np.zeros(len(self.live))
        lam_all[self.live] = lam
        rows = [np.arange(d)]
        cols = [np.arange(d)]
        vals = [obj_weight * p.objective.hess_diag.astype(float)]
        offset = 0
        for blk in p.constraints:
            r, c, v = blk.hessian_terms(x, lam_all[offset:offset + blk.m])
            rows += r; cols += c; vals += v
            offset += blk.m
        H = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(d, d))
        f = self.free
        H = H[f][:, f]
        Jf = J[:, f]
        w = lam / s
        if self.split is None:
            Js = sp.diags(np.sqrt(w)) @ Jf
            return (H + Js.T @ Js).toarray()
        sparse_rows, dense_rows = self.split
        Js = sp.diags(np.sqrt(w[sparse_rows])) @ Jf[sparse_rows]
        return _Split((H + Js.T @ Js).tocsc(), Jf[dense_rows].T.tocsc(), 1.0 / w[dense_rows])

    def _plan(self):
        """Choose the sparse path when few rows are dense and the rest fill little."""
        n = len(self.free)
        if not self.p.constraints or n < 400:
            return None
        support = sp.vstack([blk.support() for blk in self.p.constraints], format="csc")[:, self.free]
        support = support.tocsr()[self.live]
        nnz = np.diff(support.indptr)
        dense = nnz > max(32, n // 20)
        if dense.sum() > 0.02 * n:
            return None
        sparse_part = support[~dense]
        if (sparse_part.T @ sparse_part).nnz > 0.02 * n * n:
            return None
        return np.flatnonzero(~dense), np.flatnonzero(dense)


@dataclass
class _Split:
    """S + U diag(1/dinv) U^T with S sparse and U holding a few dense columns."""

    S: sp.csc_matrix
    U: sp.csc_matrix
    dinv: np.ndarray

    def diagonal(self):
        return self.S.diagonal() + self.U.multiply(self.U) @ (1.0 / self.dinv)


def _solve_spd(H, g):
    """Solve H x = g for symmetric positive (semi)definite H (dense array or :class:`_Split`)."""
    if isinstance(H, _Split):
        return _solve_split(H, g)
    n = len(H)
    if n == 0:
        return np.zeros(0)
    scale = max(float(np.mean(np.abs(np.diag(H)))), 1e-300)
    reg = 0.0
    for _ in range(12):
        try:
            c = scipy.linalg.cho_factor(H + reg * np.eye(n), check_finite=False)
            return scipy.linalg.cho_solve(c, g, check_finite=False)
        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            reg = scale * 1e-14 if reg == 0.0 else reg * 100.0
    return np.linalg.lstsq(H, g, rcond=None)[0]


def _solve_split(H: _Split, g):
    # quasi-definite augmented system [S U; U^T -D^-1] [x; y] = [g; 0]
    n, k = H.U.shape
    scale = max(float(np.mean(np.abs(H.diagonal()))), 1e-300)
    reg = 0.0
    rhs = np.concatenate([g, np.zeros(k)])
    for _ in range(12):
        K = sp.bmat([[H.S + reg * sp.eye(n), H.U], [H.U.T, -sp.diags(H.dinv)]], format="csc")
        try:
            out = spla.splu(K, permc_spec="MMD_AT_PLUS_A").solve(rhs)[:n]
            if np.all(np.isfinite(out)):
                return out
        except RuntimeError:
            pass
        reg = scale * 1e-14 if reg == 0.0 else reg * 100.0
    dense = H.S.toarray() + (H.U @ sp.diags(1.0 / H.dinv) @ H.U.T).toarray()
    return np.linalg.lstsq(dense, g, rcond=None)[0]


def solve(problem: ConvexSubproblem, opts: Optional[SolveOptions] = None) -> SolveReport:
    """Maximize a :class:`ConvexSubproblem` from its (strictly feasible) start point."""
    opts = opts or SolveOptions()
    obj = problem.objective
    x = problem.x0.copy()
    f0 = obj.value(x)
    kkt = _Kkt(problem, opts.feas_tol)
    if not np.all(kkt.all_slacks(x) > 0):
        return SolveReport(x=x, value=f0, violation=problem.max_violation(x), stationarity=math.inf,
                           iterations=0, status=INFEASIBLE_START, history=[f0])
    s = kkt.slacks(x)
    m = s.size
    if m == 0:
        return _solve_unconstrained(problem, opts, kkt)

    floor = 1e-3 * opts.feas_tol
    # a first stage with gap bound ~|f0| is cheap and tolerates boundary starts
    t = m / max(1.0, abs(f0))
    best = _Incumbent(x, f0)
    iters = 0
    status = MAX_ITER
    stat = math.inf
    while iters < opts.max_iter:
        x, s, steps, centred = _center(kkt, x, s, t, floor, opts.max_iter - iters, best)
        iters += steps
        fx = obj.value(x)
        stat = _stationarity(kkt, x, s, t)
        # a tenth of the tolerance on the gap bound leaves room for the residual
        if centred and m / t <= 0.1 * opts.opt_tol * max(1.0, abs(fx)):
            if stat > opts.opt_tol:
                x, s, stat, steps = _polish(kkt, x, s, t, floor, stat, opts, best)
                iters += steps
            if stat <= opts.opt_tol:
                status = OPTIMAL
            break
        if not centred and steps == 0:
            break
        t *= MU

    violation = problem.max_violation(best.x)
    if status == OPTIMAL and violation > opts.feas_tol:
        status = MAX_ITER
    return SolveReport(x=best.x, value=best.f, violation=violation, stationarity=stat,
                       iterations=iters, status=status, history=best.history)


class _Incumbent:
    """Best iterate so far; ``history`` holds its value after every iteration."""

    def __init__(self, x, f):
        self.x, self.f = x.copy(), f
        self.history = [f]

    def offer(self, x, f):
        if f > self.f:
            self.x, self.f = x.copy(), f
        self.history.append(self.f)


def _stationarity(kkt: _Kkt, x, s, t) -> float:
    """Relative KKT residual at the multiplier estimate from one more Newton step.

    With dx the barrier Newton step, lam = (1 + J dx / s) / (t s) (clipped at
    zero) satisfies the Lagrangian stationarity condition up to the curvature
    times dx, which is how the certificate stays meaningful for rows whose
    slack is tiny.
    """
    obj = kkt.p.objective
    free = kkt.free
    J = kkt.jacobian(x)
    inv_s = 1.0 / s
    g = (-t * obj.gradient(x) + J.T @ inv_s)[free]
    dx = np.zeros(kkt.p.dim)
    dx[free] = -_solve_spd(kkt.reduced_hessian(x, inv_s, s, J, obj_weight=t), g)
    lam = np.maximum(inv_s * (1.0 + (J @ dx) * inv_s) / t, 0.0)
    r = kkt.dual_residual(x, lam, J)
    g_scale = max(1.0, float(np.max(np.abs(obj.gradient(x)[free]), initial=0.0)))
    gap = float(s @ lam) / max(1.0, abs(obj.value(x)))
    return max(gap, float(np.max(np.abs(r), initial=0.0)) / g_scale)


def _polish(kkt: _Kkt, x, s, t, floor, stat, opts, best: _Incumbent):
    """Pure Newton steps on the last barrier stage.

    At large t the merit function is dominated by rounding, so Armijo
    backtracking stalls; near the centre full steps converge quadratically
    and only need to stay strictly feasible. Stops once the residual meets
    ``opt_tol`` or stops improving.
    """
    obj = kkt.p.objective
    free = kkt.free
    steps = 0
    while steps < POLISH_STEPS and stat > opts.opt_tol:
        J = kkt.jacobian(x)
        inv_s = 1.0 / s
        g = (-t * obj.gradient(x) + J.T @ inv_s)[free]
        dx = np.zeros(kkt.p.dim)
        dx[free] = -_solve_spd(kkt.reduced_hessian(x, inv_s, s, J, obj_weight=t), g)
        alpha = 1.0
        for _ in range(30):
            xt = x + alpha * dx
            st = kkt.slacks(xt)
            if np.all(st > 0) and np.all((st >= floor) | (st >= s)):
                break
            alpha *= 0.5
        else:
            break
        new_stat = _stationarity(kkt, xt, st, t)
        if not new_stat < stat:
            break
        x, s, stat = xt, st, new_stat
        steps += 1
        best.offer(x, obj.value(x))
    return x, s, stat, steps


def _center(kkt: _Kkt, x, s, t, floor, max_steps, best: _Incumbent, tol: float = CENTRED):
    """Damped Newton on -t f(x) - sum log s(x); returns (x, s, steps, centred).

    Every accepted iterate is offered to ``best``.
    Slacks may shrink only while they stay above ``floor``, so rows that
    start at the relaxed boundary cannot drift further out.
    """
    obj = kkt.p.objective
    free = kkt.free

    def merit(x_, s_):
        return -t * obj.value(x_) - float(np.sum(np.log(s_)))

    steps = 0
    while steps < max_steps:
        J = kkt.jacobian(x)
        inv_s = 1.0 / s
        g = (-t * obj.gradient(x) + J.T @ inv_s)[free]
        H = kkt.reduced_hessian(x, inv_s, s, J, obj_weight=t)
        dx = np.zeros(kkt.p.dim)
        dx[free] = -_solve_spd(H, g)
        dec = float(-(g @ dx[free]))
        if not dec > tol:
            return x, s, steps, True
        psi = merit(x, s)
        alpha = 1.0
        for _ in range(60):
            xt = x + alpha * dx
            st = kkt.slacks(xt)
            if np.all(st > 0) and np.all((st >= floor) | (st >= s)) and \
                    merit(xt, st) <= psi - ARMIJO * alpha * dec:
                break
            alpha *= 0.5
        else:
            # no progress possible at working precision
            return x, s, steps, dec <= 1e3 * tol
        x, s = xt, st
        steps += 1
        best.offer(x, obj.value(x))
    return x, s, steps, False


def _solve_unconstrained(problem, opts, kkt) -> SolveReport:
    obj = problem.objective
    x = problem.x0.copy()
    f0 = obj.value(x)
    free = kkt.free
    H = np.diag(obj.hess_diag)[np.ix_(free, free)]
    x[free] += _solve_spd(H, obj.gradient(x)[free])
    fx = obj.value(x)
    if not fx >= f0:
        x, fx = problem.x0.copy(), f0
    g = obj.gradient(x)[free]
    stat = float(np.max(np.abs(g), initial=0.0)) / max(1.0, abs(fx))
    status = OPTIMAL if stat <= opts.opt_tol else MAX_ITER
    return SolveReport(x=x, value=fx, violation=0.0, stationarity=stat, iterations=1,
                       status=status, history=[f0, max(f0, fx)])
