"""Per-step control synthesis as a small quadratic program.

At each step the controller stacks, over the decision vector
z = [v, delta1, delta2, delta3]:

  * 2m input box rows          v <= u_max, -v <= -u_min
  * one goal (convergence) row Lf hG + Lg hG v - delta1 hG <= -rate(hG) - lG*gamma
  * one static safety row      Lf hS + Lg hS v + delta2 hS <= -lS*gamma
  * one time-varying safety row Lf hT + Lg hT v + delta3 hT <= -dhT/dt - lT*gamma

with cost 1/2 z^T diag(w_u, w1, w2, w3) z + q * delta1.  The slacks keep the
program feasible everywhere in the interior of the shifted safe sets; a
nonpositive delta1 along a whole run certifies goal arrival within the
configured time budget.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .certificates import Certificate, Plant, lie_derivatives
from .fxt_clf import FxtParams, fxt_rhs
from .qp_core import QpProblem, QpStatus, check_point, solve_qp

BOUNDARY_TOL = 1e-9


@dataclass
class QpWeights:
    """Positive cost weights: w_u per input channel, w1..w3 on the slacks,
    and the linear bias q pushing delta1 negative."""

    w_u: np.ndarray
    w1: float = 1.0
    w2: float = 1.0
    w3: float = 1.0
    q: float = 10.0

    def __post_init__(self):
        self.w_u = np.atleast_1d(np.asarray(self.w_u, dtype=float))
        if np.any(self.w_u <= 0.0) or min(self.w1, self.w2, self.w3) <= 0.0:
            raise ValueError("all quadratic weights must be positive")
        if self.q <= 0.0:
            raise ValueError("the delta1 bias q must be positive")


@dataclass
class ControllerSpec:
    """Everything one agent's controller needs at a step.

    clf is the goal certificate, already shifted for estimation error;
    cbf_static and cbf_tv are the shifted static and time-varying safety
    certificates.  gamma and eps are the disturbance and estimation bounds.
    """

    plant: Plant
    clf: Certificate
    cbf_static: Certificate
    cbf_tv: Certificate
    fxt: FxtParams
    gamma: float
    eps: float
    u_min: np.ndarray
    u_max: np.ndarray
    weights: QpWeights
    tol_feas: float = 1e-9
    tol_stat: float = 1e-8
    max_iter: int = 200

    def __post_init__(self):
        self.u_min = np.atleast_1d(np.asarray(self.u_min, dtype=float))
        self.u_max = np.atleast_1d(np.asarray(self.u_max, dtype=float))
        m = self.plant.m
        if self.u_min.size != m or self.u_max.size != m:
            raise ValueError("input bounds must have one entry per channel")
        if not np.all(self.u_min < self.u_max):
            raise ValueError("need u_min < u_max componentwise")
        if self.weights.w_u.size != m:
            raise ValueError("need one input weight per channel")
        if self.gamma < 0.0 or self.eps < 0.0:
            raise ValueError("uncertainty bounds must be nonnegative")
        for name, cert in (("clf", self.clf), ("cbf_static", self.cbf_static),
                           ("cbf_tv", self.cbf_tv)):
            if not np.isfinite(cert.lipschitz):
                raise ValueError(f"{name} certificate lacks a finite "
                                 "Lipschitz bound")


@dataclass
class ControlResult:
    u: Optional[np.ndarray]
    slacks: Optional[tuple]
    status: QpStatus
    margins: Optional[np.ndarray]
    objective: Optional[float]
    cert_values: tuple = (np.nan, np.nan, np.nan)
    problem: QpProblem = field(default=None, repr=False)

    @property
    def z_star(self):
        if self.u is None:
            return None
        return np.concatenate([self.u, np.asarray(self.slacks)])


def _lie_all(spec, t, x_hat):
    return (
        lie_derivatives(spec.plant, spec.clf, t, x_hat),
        lie_derivatives(spec.plant, spec.cbf_static, t, x_hat),
        lie_derivatives(spec.plant, spec.cbf_tv, t, x_hat),
    )


def _assemble(spec, lie_g, lie_s, lie_t):
    m = spec.plant.m
    n_z = m + 3
    k = 2 * m + 3
    a_mat = np.zeros((k, n_z))
    b_vec = np.zeros(k)

    a_mat[:m, :m] = np.eye(m)
    b_vec[:m] = spec.u_max
    a_mat[m:2 * m, :m] = -np.eye(m)
    b_vec[m:2 * m] = -spec.u_min

    row = 2 * m
    a_mat[row, :m] = lie_g.lg_h
    a_mat[row, m] = -lie_g.h_val
    b_vec[row] = -lie_g.lf_h + fxt_rhs(
        spec.fxt, lie_g.h_val, 0.0, spec.clf.lipschitz * spec.gamma)

    row = 2 * m + 1
    a_mat[row, :m] = lie_s.lg_h
    a_mat[row, m + 1] = lie_s.h_val
    b_vec[row] = -lie_s.lf_h - spec.cbf_static.lipschitz * spec.gamma

    row = 2 * m + 2
    a_mat[row, :m] = lie_t.lg_h
    a_mat[row, m + 2] = lie_t.h_val
    b_vec[row] = -lie_t.lf_h - lie_t.dh_dt - spec.cbf_tv.lipschitz * spec.gamma

    h_diag = np.concatenate([
        spec.weights.w_u,
        [spec.weights.w1, spec.weights.w2, spec.weights.w3],
    ])
    f_lin = np.zeros(n_z)
    f_lin[m] = spec.weights.q
    return QpProblem(h_diag=h_diag, f_lin=f_lin, a_mat=a_mat, b_vec=b_vec)


def assemble_qp(spec, t, x_hat):
    """Build the step QP at the state estimate x_hat."""
    lie_g, lie_s, lie_t = _lie_all(spec, t, x_hat)
    return _assemble(spec, lie_g, lie_s, lie_t)


def feasible_point(spec, t, x_hat, v_bar=None):
    """Constructive feasible point for the step QP.

    For any admissible v_bar, choosing each slack so its row holds with
    equality yields a feasible z whenever none of the certificate values is
    zero at x_hat.  Doubles as a solver warm start.
    """
    m = spec.plant.m
    if v_bar is None:
        v_bar = np.zeros(m)
    v_bar = np.atleast_1d(np.asarray(v_bar, dtype=float))
    if v_bar.size != m:
        raise ValueError("v_bar must have one entry per input channel")
    if np.any(v_bar < spec.u_min - BOUNDARY_TOL) or \
            np.any(v_bar > spec.u_max + BOUNDARY_TOL):
        raise ValueError("v_bar violates the input box")
    lie_g, lie_s, lie_t = _lie_all(spec, t, x_hat)
    for name, lie in (("goal", lie_g), ("static safety", lie_s),
                      ("time-varying safety", lie_t)):
        if abs(lie.h_val) < BOUNDARY_TOL:
            raise ValueError(
                f"state estimate sits on the {name} set boundary "
                f"(certificate value {lie.h_val:.3e}); the constructive "
                "slacks are undefined there")
    drive_g = lie_g.lf_h + float(lie_g.lg_h @ v_bar)
    rate = fxt_rhs(spec.fxt, lie_g.h_val, 0.0,
                   spec.clf.lipschitz * spec.gamma)
    delta1 = (drive_g - rate) / lie_g.h_val

    drive_s = lie_s.lf_h + float(lie_s.lg_h @ v_bar)
    delta2 = (-spec.cbf_static.lipschitz * spec.gamma - drive_s) / lie_s.h_val

    drive_t = lie_t.lf_h + float(lie_t.lg_h @ v_bar) + lie_t.dh_dt
    delta3 = (-spec.cbf_tv.lipschitz * spec.gamma - drive_t) / lie_t.h_val

    return np.concatenate([v_bar, [delta1, delta2, delta3]])


def compute_control(spec, t, x_hat, warm=None):
    """Solve the step QP at x_hat and return the input with diagnostics.

    The previous step's solution (warm) seeds the solver when it is still
    feasible; otherwise the constructive feasible point does.  A result with
    non-optimal status carries the assembled problem for diagnosis; the
    caller decides the fallback input.
    """
    x_hat = np.asarray(x_hat, dtype=float)
    if not np.all(np.isfinite(x_hat)):
        raise ValueError("state estimate must be finite")
    lie_g, lie_s, lie_t = _lie_all(spec, t, x_hat)
    problem = _assemble(spec, lie_g, lie_s, lie_t)
    cert_values = (lie_g.h_val, lie_s.h_val, lie_t.h_val)

    start = None
    if warm is not None:
        warm = np.asarray(warm, dtype=float)
        if warm.size == problem.n_z and np.all(np.isfinite(warm)):
            viol, _ = check_point(problem, warm)
            if viol <= spec.tol_feas:
                start = warm
    if start is None:
        try:
            v_bar = np.clip(warm[:spec.plant.m] if warm is not None
                            else np.zeros(spec.plant.m),
                            spec.u_min, spec.u_max)
            start = feasible_point(spec, t, x_hat, v_bar)
        except ValueError:
            start = None

    sol = solve_qp(problem, tol_feas=spec.tol_feas, tol_stat=spec.tol_stat,
                   max_iter=spec.max_iter, warm_start=start)
    if sol.status is not QpStatus.OPTIMAL:
        return ControlResult(u=None, slacks=None, status=sol.status,
                             margins=None, objective=None,
                             cert_values=cert_values, problem=problem)
    m = spec.plant.m
    u = sol.z_star[:m]
    slacks = tuple(float(s) for s in sol.z_star[m:])
    margins = problem.a_mat @ sol.z_star - problem.b_vec
    return ControlResult(u=u, slacks=slacks, status=sol.status,
                         margins=margins, objective=sol.objective,
                         cert_values=cert_values, problem=problem)


def delta1_monitor(results):
    """Worst delta1 over a run and whether the time-budget guarantee held.

    Non-optimal steps carry no slack and are skipped here; they are counted
    separately as safety events.
    """
    worst = None
    for res in results:
        if res.status is not QpStatus.OPTIMAL:
            continue
        d1 = res.slacks[0]
        worst = d1 if worst is None else max(worst, d1)
    if worst is None:
        raise ValueError("no optimal steps in the trace")
    return float(worst), worst <= 0.0
