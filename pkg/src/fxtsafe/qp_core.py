"""Dense solvers for small, strictly convex quadratic programs.

Problems have the form

    minimize    1/2 z^T diag(h) z + f^T z
    subject to  A z <= b

with strictly positive diagonal cost weights h.  Two independent solution
routes are provided: a primal active-set method (`solve_qp`) used online, and
an exhaustive active-set enumeration (`active_set_oracle`) used as a test
oracle.  Both are deterministic.
"""

import itertools
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import linprog

DEFAULT_TOL_FEAS = 1e-9
DEFAULT_TOL_STAT = 1e-8
DEFAULT_MAX_ITER = 200

# Enumeration beyond this many rows is intractable (2^k subsets).
ORACLE_MAX_ROWS = 14

# Singular values below this (relative to the largest) mark a constraint
# subset as linearly dependent; such subsets are skipped by the oracle.
RANK_TOL = 1e-10


class QpStatus(Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    MAX_ITERATIONS = "max_iterations"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass
class QpProblem:
    """One dense QP instance.

    h_diag : positive cost weights, length n_z
    f_lin  : linear cost vector, length n_z
    a_mat  : constraint matrix, shape (k, n_z)
    b_vec  : constraint bounds, length k
    """

    h_diag: np.ndarray
    f_lin: np.ndarray
    a_mat: np.ndarray
    b_vec: np.ndarray

    def __post_init__(self):
        self.h_diag = np.atleast_1d(np.asarray(self.h_diag, dtype=float))
        self.f_lin = np.atleast_1d(np.asarray(self.f_lin, dtype=float))
        self.a_mat = np.asarray(self.a_mat, dtype=float)
        if self.a_mat.ndim != 2:
            self.a_mat = self.a_mat.reshape(-1, self.h_diag.size)
        self.b_vec = np.atleast_1d(np.asarray(self.b_vec, dtype=float))
        n = self.h_diag.size
        if self.f_lin.size != n:
            raise ValueError("f_lin length does not match h_diag")
        if self.a_mat.shape[1] != n:
            raise ValueError("a_mat column count does not match h_diag")
        if self.a_mat.shape[0] != self.b_vec.size:
            raise ValueError("a_mat row count does not match b_vec")
        if not np.all(np.isfinite(self.h_diag)) or np.any(self.h_diag <= 0.0):
            raise ValueError("h_diag entries must be finite and strictly positive")
        if not (np.all(np.isfinite(self.f_lin))
                and np.all(np.isfinite(self.a_mat))
                and np.all(np.isfinite(self.b_vec))):
            raise ValueError("problem data must be finite")

    @property
    def n_z(self):
        return self.h_diag.size

    @property
    def n_rows(self):
        return self.b_vec.size

    def objective(self, z):
        z = np.asarray(z, dtype=float)
        return float(0.5 * np.dot(self.h_diag * z, z) + np.dot(self.f_lin, z))


@dataclass
class QpSolution:
    z_star: np.ndarray
    status: QpStatus
    objective: float
    max_violation: float
    stationarity_residual: float
    # Minimal achievable max-violation (phase-1 witness); > 0 only when the
    # constraint set is empty.
    infeasibility: float = 0.0
    multipliers: np.ndarray = field(default=None, repr=False)
    message: str = ""


def check_point(problem, z):
    """Return (max_violation, objective) of a point against a problem.

    max_violation is max_i (A_i z - b_i) clamped below at zero.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.size != problem.n_z:
        raise ValueError(
            f"point has length {z.size}, expected {problem.n_z}")
    if problem.n_rows == 0:
        viol = 0.0
    else:
        viol = float(max(0.0, np.max(problem.a_mat @ z - problem.b_vec)))
    return viol, problem.objective(z)


def format_problem(problem):
    """Plain-text dump of a problem: dimensions, costs, then A|b row-major."""
    lines = [f"{problem.n_z} {problem.n_rows}"]
    lines.append(" ".join(f"{v:.17g}" for v in problem.h_diag))
    lines.append(" ".join(f"{v:.17g}" for v in problem.f_lin))
    for row, bound in zip(problem.a_mat, problem.b_vec):
        lines.append(" ".join(f"{v:.17g}" for v in row) + f" {bound:.17g}")
    return "\n".join(lines) + "\n"


def _max_violation(a_mat, b_vec, z):
    if a_mat.shape[0] == 0:
        return 0.0
    return float(max(0.0, np.max(a_mat @ z - b_vec)))


def _phase1(a_mat, b_vec):
    """Find the point minimizing the maximum constraint violation.

    Solves  min s  s.t.  A z - 1 s <= b, s >= -1  as a linear program.  The
    artificial lower bound on s keeps the LP bounded when the feasible set
    has nonempty interior in every direction.  Returns (z, witness) where
    witness > 0 is the least achievable max-violation of an empty set.
    """
    k, n = a_mat.shape
    cost = np.zeros(n + 1)
    cost[-1] = 1.0
    a_ub = np.hstack([a_mat, -np.ones((k, 1))])
    bounds = [(None, None)] * n + [(-1.0, None)]
    res = linprog(cost, A_ub=a_ub, b_ub=b_vec, bounds=bounds, method="highs")
    if not res.success:
        raise ArithmeticError(f"phase-1 feasibility LP failed: {res.message}")
    z = np.asarray(res.x[:n], dtype=float)
    return z, _max_violation(a_mat, b_vec, z)


def _finish(problem, z, work, lam_work, status, infeasibility=0.0, message=""):
    """Assemble a QpSolution, downgrading status if tolerances are not met."""
    lam = np.zeros(problem.n_rows)
    if len(work) > 0:
        lam[list(work)] = lam_work
    viol = _max_violation(problem.a_mat, problem.b_vec, z)
    grad = problem.h_diag * z + problem.f_lin
    if problem.n_rows > 0:
        grad = grad + problem.a_mat.T @ lam
    stat = float(np.max(np.abs(grad))) if grad.size else 0.0
    return QpSolution(
        z_star=z,
        status=status,
        objective=problem.objective(z),
        max_violation=viol,
        stationarity_residual=stat,
        infeasibility=infeasibility,
        multipliers=lam,
        message=message,
    )


def solve_qp(problem, tol_feas=DEFAULT_TOL_FEAS, tol_stat=DEFAULT_TOL_STAT,
             max_iter=DEFAULT_MAX_ITER, warm_start=None):
    """Solve a strictly convex inequality-constrained QP.

    A primal active-set method:  a feasible start comes from the warm-start
    point when one is supplied and feasible, otherwise from a phase-1 LP that
    minimizes the maximum violation (which doubles as the infeasibility
    witness).  Each iteration solves the equality-constrained subproblem on
    the current working set and either takes a blocked step or drops the
    constraint with the most negative multiplier.

    Deterministic: identical inputs give bit-identical outputs.
    """
    if tol_feas <= 0.0 or tol_stat <= 0.0:
        raise ValueError("tolerances must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    h = problem.h_diag
    f = problem.f_lin
    a_mat = problem.a_mat
    b_vec = problem.b_vec
    n = problem.n_z

    # The unconstrained minimizer settles most instances immediately.
    z_unc = -f / h
    if _max_violation(a_mat, b_vec, z_unc) <= tol_feas:
        return _finish(problem, z_unc, [], np.zeros(0), QpStatus.OPTIMAL)

    z = None
    if warm_start is not None:
        warm = np.asarray(warm_start, dtype=float)
        if warm.size == n and np.all(np.isfinite(warm)) \
                and _max_violation(a_mat, b_vec, warm) <= tol_feas:
            z = warm.copy()
    if z is None:
        z0, witness = _phase1(a_mat, b_vec)
        if witness > tol_feas:
            sol = _finish(problem, z0, [], np.zeros(0), QpStatus.INFEASIBLE,
                          infeasibility=witness,
                          message="empty constraint set; witness is the "
                                  "least achievable max violation")
            sol.stationarity_residual = np.inf
            return sol
        z = z0

    work = []  # indices of the working set, kept sorted
    lam_work = np.zeros(0)
    for _ in range(max_iter):
        grad = h * z + f
        m_w = len(work)
        if m_w == 0:
            p = -grad / h
            lam_work = np.zeros(0)
        else:
            a_w = a_mat[work]
            kkt = np.zeros((n + m_w, n + m_w))
            kkt[:n, :n] = np.diag(h)
            kkt[:n, n:] = a_w.T
            kkt[n:, :n] = a_w
            rhs = np.concatenate([-grad, np.zeros(m_w)])
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                return _finish(problem, z, work, np.zeros(m_w),
                               QpStatus.NUMERICAL_FAILURE,
                               message="singular working-set KKT system")
            p = sol[:n]
            lam_work = sol[n:]

        step_scale = max(1.0, float(np.max(np.abs(z))))
        if float(np.max(np.abs(p))) <= 1e-12 * step_scale:
            if m_w == 0 or float(np.min(lam_work)) >= -tol_stat:
                out = _finish(problem, z, work, lam_work, QpStatus.OPTIMAL)
                if out.max_violation > tol_feas or \
                        out.stationarity_residual > tol_stat:
                    out.status = QpStatus.NUMERICAL_FAILURE
                    out.message = "tolerances not met at candidate optimum"
                return out
            # Drop the most negative multiplier (first index on ties).
            drop = int(np.argmin(lam_work))
            work.pop(drop)
            continue

        a_p = a_mat @ p if problem.n_rows else np.zeros(0)
        thresh = 1e-13 * max(1.0, float(np.max(np.abs(a_p))) if a_p.size else 1.0)
        alpha = 1.0
        blocker = -1
        in_work = np.zeros(problem.n_rows, dtype=bool)
        if work:
            in_work[work] = True
        for i in range(problem.n_rows):
            if in_work[i] or a_p[i] <= thresh:
                continue
            gap = b_vec[i] - float(a_mat[i] @ z)
            step = max(0.0, gap) / a_p[i]
            if step < alpha:
                alpha = step
                blocker = i
        z = z + alpha * p
        if blocker >= 0 and alpha < 1.0:
            work.append(blocker)
            work.sort()

    return _finish(problem, z, work, lam_work, QpStatus.MAX_ITERATIONS,
                   message="iteration limit reached")


# Cached index combinations keyed by (k, size); k <= 14 keeps this tiny.
_COMBO_CACHE = {}


def _combinations(k, size):
    key = (k, size)
    if key not in _COMBO_CACHE:
        _COMBO_CACHE[key] = np.array(
            list(itertools.combinations(range(k), size)), dtype=int)
    return _COMBO_CACHE[key]


def active_set_oracle(problem, tol_feas=DEFAULT_TOL_FEAS, tol_dual=1e-9):
    """Exact reference solver by exhaustive active-set enumeration.

    For every linearly independent subset of constraint rows the
    equality-constrained KKT system is solved; the best candidate that is
    both primal and dual feasible is the exact minimizer.  When no subset
    yields a primal-feasible point, a feasibility LP sweep confirms that the
    constraint set is empty.

    Rejects problems with more than 14 rows.
    """
    k = problem.n_rows
    n = problem.n_z
    if k > ORACLE_MAX_ROWS:
        raise ValueError(
            f"oracle enumeration limited to {ORACLE_MAX_ROWS} rows, got {k}")
    h = problem.h_diag
    f = problem.f_lin
    a_mat = problem.a_mat
    b_vec = problem.b_vec

    best = None
    best_obj = np.inf
    any_primal = False

    z_unc = -f / h
    if _max_violation(a_mat, b_vec, z_unc) <= tol_feas:
        any_primal = True
        best = (z_unc, [], np.zeros(0))
        best_obj = problem.objective(z_unc)

    for size in range(1, min(k, n) + 1):
        combos = _combinations(k, size)
        a_sub = a_mat[combos]                      # (N, size, n)
        svals = np.linalg.svd(a_sub, compute_uv=False)
        ok = svals[:, -1] > RANK_TOL * np.maximum(1.0, svals[:, 0])
        if not np.any(ok):
            continue
        combos_ok = combos[ok]
        a_ok = a_sub[ok]
        n_sys = combos_ok.shape[0]
        dim = n + size
        kkt = np.zeros((n_sys, dim, dim))
        kkt[:, np.arange(n), np.arange(n)] = h
        kkt[:, :n, n:] = np.transpose(a_ok, (0, 2, 1))
        kkt[:, n:, :n] = a_ok
        rhs = np.empty((n_sys, dim))
        rhs[:, :n] = -f
        rhs[:, n:] = b_vec[combos_ok]
        try:
            sols = np.linalg.solve(kkt, rhs[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            sols = np.full((n_sys, dim), np.nan)
            for idx in range(n_sys):
                try:
                    sols[idx] = np.linalg.solve(kkt[idx], rhs[idx])
                except np.linalg.LinAlgError:
                    pass
        z_cand = sols[:, :n]
        lam_cand = sols[:, n:]
        finite = np.all(np.isfinite(z_cand), axis=1)
        viol = np.max(z_cand @ a_mat.T - b_vec, axis=1)
        primal_ok = finite & (viol <= tol_feas)
        if np.any(primal_ok):
            any_primal = True
        dual_ok = primal_ok & (np.min(lam_cand, axis=1) >= -tol_dual)
        if not np.any(dual_ok):
            continue
        objs = 0.5 * np.sum(z_cand * z_cand * h, axis=1) + z_cand @ f
        objs = np.where(dual_ok, objs, np.inf)
        idx = int(np.argmin(objs))
        if objs[idx] < best_obj:
            best_obj = float(objs[idx])
            best = (z_cand[idx], list(combos_ok[idx]), lam_cand[idx])

    if best is not None:
        z, work, lam = best
        return _finish(problem, z, work, lam, QpStatus.OPTIMAL)

    if not any_primal:
        z0, witness = _phase1(a_mat, b_vec)
        if witness > tol_feas:
            sol = _finish(problem, z0, [], np.zeros(0), QpStatus.INFEASIBLE,
                          infeasibility=witness,
                          message="enumeration found no feasible subset; "
                                  "feasibility sweep confirms emptiness")
            sol.stationarity_residual = np.inf
            return sol
        return _finish(problem, z0, [], np.zeros(0),
                       QpStatus.NUMERICAL_FAILURE,
                       message="feasible set nonempty but every optimal "
                               "active set was rank-deficient")

    return _finish(problem, z_unc, [], np.zeros(0),
                   QpStatus.NUMERICAL_FAILURE,
                   message="primal-feasible candidates exist but none was "
                           "dual feasible")
