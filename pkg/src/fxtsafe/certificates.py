"""Barrier and Lyapunov scalar fields over (time, state).

A Certificate bundles a scalar field h(t, x) with its spatial gradient, time
partial, and a Lipschitz bound on the gradient norm over the plant domain.
Operations here compute Lie derivatives along a control-affine plant, shift
certificates for bounded state-estimation error, tighten them for bounded
disturbances, reduce relative-degree-2 barriers to first order, and compose
members with a smooth maximum.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.stats import qmc

LIPSCHITZ_SAFETY_FACTOR = 0.2
RELATIVE_DEGREE_TOL = 1e-8


class DomainWarning(UserWarning):
    """Raised when a certificate is evaluated outside the plant domain."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned box, the domain used for sampling and Lipschitz bounds."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", np.atleast_1d(np.asarray(self.lo, dtype=float)))
        object.__setattr__(self, "hi", np.atleast_1d(np.asarray(self.hi, dtype=float)))
        if self.lo.shape != self.hi.shape:
            raise ValueError("box bounds must have matching shapes")
        if np.any(self.lo > self.hi):
            raise ValueError("box is empty (a lower bound exceeds its upper bound)")

    @property
    def dim(self):
        return self.lo.size

    def contains(self, x, slack=0.0):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lo - slack) and np.all(x <= self.hi + slack))

    def uniform(self, rng, count):
        return rng.uniform(self.lo, self.hi, size=(count, self.dim))

    def sobol(self, count):
        """Deterministic low-discrepancy samples covering the box."""
        m = max(1, math.ceil(math.log2(max(count, 2))))
        unit = qmc.Sobol(d=self.dim, scramble=False).random_base2(m)[:count]
        return self.lo + unit * (self.hi - self.lo)


@dataclass
class Plant:
    """Control-affine plant xdot = f(x) + g(x) u (+ disturbance).

    drift returns f(x) with shape (n,), input_map returns g(x) with shape
    (n, m).  domain is the compact box over which Lipschitz bounds are
    estimated and certificates are trusted.
    """

    n: int
    m: int
    drift: Callable
    input_map: Callable
    domain: Box

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("plant dimensions must be positive")
        if self.domain.dim != self.n:
            raise ValueError("domain dimension does not match state dimension")


@dataclass
class Certificate:
    """Scalar field h(t, x) with gradient, time partial, and gradient bound."""

    value: Callable
    gradient: Callable
    time_partial: Optional[Callable] = None
    lipschitz: float = 0.0

    def __post_init__(self):
        if self.time_partial is None:
            self.time_partial = _zero_time_partial
        if not (self.lipschitz >= 0.0 and math.isfinite(self.lipschitz)):
            raise ValueError("lipschitz bound must be finite and nonnegative")


def _zero_time_partial(t, x):
    return 0.0


@dataclass(frozen=True)
class LieData:
    """Directional derivative data of a certificate at one (t, x)."""

    lf_h: float
    lg_h: np.ndarray
    dh_dt: float
    h_val: float


def lie_derivatives(plant, cert, t, x):
    """Evaluate h, grad(h) . f, grad(h) . g, and dh/dt at (t, x).

    Points outside the plant domain only warn: the certificate is still
    evaluable there, but its Lipschitz bound may not cover the excursion.
    """
    x = np.asarray(x, dtype=float)
    if not plant.domain.contains(x):
        warnings.warn("state outside the certified plant domain; Lipschitz "
                      "bounds may not apply", DomainWarning, stacklevel=2)
    f = np.asarray(plant.drift(x), dtype=float)
    g = np.asarray(plant.input_map(x), dtype=float)
    grad = np.asarray(cert.gradient(t, x), dtype=float)
    h_val = float(cert.value(t, x))
    dh_dt = float(cert.time_partial(t, x))
    if not (np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
        raise ValueError(f"plant returned non-finite dynamics at t={t}")
    if not (np.all(np.isfinite(grad)) and math.isfinite(h_val)
            and math.isfinite(dh_dt)):
        raise ValueError(f"certificate returned non-finite data at t={t}")
    return LieData(
        lf_h=float(grad @ f),
        lg_h=grad @ g,
        dh_dt=dh_dt,
        h_val=h_val,
    )


def hat_lift(cert, eps):
    """Shift a certificate by lipschitz * eps.

    Enforcing the shifted certificate at a state estimate certifies the
    original one at any true state within eps of the estimate.
    """
    if eps < 0.0:
        raise ValueError(f"estimation bound must be nonnegative, got {eps}")
    shift = cert.lipschitz * eps
    base_value = cert.value
    return Certificate(
        value=lambda t, x: base_value(t, x) + shift,
        gradient=cert.gradient,
        time_partial=cert.time_partial,
        lipschitz=cert.lipschitz,
    )


def robust_margin(cert, gamma):
    """Constraint tightening absorbing any disturbance of norm up to gamma."""
    if gamma < 0.0:
        raise ValueError(f"disturbance bound must be nonnegative, got {gamma}")
    return cert.lipschitz * gamma


def finite_difference_gradient(value, t, x, step=1e-6, central=True):
    """Finite-difference spatial gradient of a value map, step scaled per axis."""
    x = np.asarray(x, dtype=float)
    grad = np.empty(x.size)
    for i in range(x.size):
        h_i = step * max(1.0, abs(x[i]))
        xp = x.copy()
        xp[i] += h_i
        if central:
            xm = x.copy()
            xm[i] -= h_i
            grad[i] = (value(t, xp) - value(t, xm)) / (2.0 * h_i)
        else:
            grad[i] = (value(t, xp) - value(t, x)) / h_i
    return grad


def finite_difference_time_partial(value, t, x, step=1e-6):
    h_t = step * max(1.0, abs(t))
    return (value(t + h_t, x) - value(t, x)) / h_t


def estimate_lipschitz(cert, domain, horizon=0.0, n_samples=4096,
                       safety_factor=LIPSCHITZ_SAFETY_FACTOR):
    """Sampled bound on the gradient norm over domain x [0, horizon].

    Uses a deterministic low-discrepancy sweep and inflates the observed
    maximum by the safety factor to cover sampling gaps.  The bound is only
    as good as the sweep: fields whose gradient blows up between samples
    need an explicit override instead.
    """
    if n_samples < 1000:
        raise ValueError("need at least 1000 samples for a usable bound")
    if horizon < 0.0:
        raise ValueError("horizon must be nonnegative")
    if horizon > 0.0:
        sweep = Box(np.append(domain.lo, 0.0), np.append(domain.hi, horizon))
        points = sweep.sobol(n_samples)
        states = points[:, :-1]
        times = points[:, -1]
    else:
        states = domain.sobol(n_samples)
        times = np.zeros(n_samples)
    worst = 0.0
    for t, x in zip(times, states):
        grad = np.asarray(cert.gradient(float(t), x), dtype=float)
        if not np.all(np.isfinite(grad)):
            raise ValueError("non-finite gradient encountered during "
                             "Lipschitz estimation")
        worst = max(worst, float(np.linalg.norm(grad)))
    return (1.0 + safety_factor) * worst


def hocbf_reduce(plant, cert, lam=1.0, gradient=None, time_partial=None,
                 lipschitz=None, horizon=0.0, n_check=64):
    """Reduce a relative-degree-2 barrier to an equivalent first-order one.

    The reduced field is the drift-direction derivative of h plus lam * h;
    keeping it nonpositive renders a subset of {h <= 0} forward invariant
    while giving the input authority at first order.  Requires grad(h) . g
    to vanish over the domain (checked by sampling).  The gradient and time
    partial of the reduced field default to forward finite differences of
    its value map; pass analytic callables to override.  The Lipschitz bound
    is re-estimated over the plant domain unless supplied.
    """
    if lam <= 0.0:
        raise ValueError(f"reduction coefficient must be positive, got {lam}")
    rng = np.random.default_rng(0)
    for x in plant.domain.uniform(rng, n_check):
        data = lie_derivatives(plant, cert, 0.0, x)
        if float(np.max(np.abs(data.lg_h))) > RELATIVE_DEGREE_TOL:
            raise ValueError(
                "certificate is not relative degree 2: the input appears in "
                f"its first derivative (|grad . g| = {np.max(np.abs(data.lg_h)):.2e})")

    base_value = cert.value
    base_grad = cert.gradient
    base_tp = cert.time_partial
    drift = plant.drift

    def reduced_value(t, x):
        x = np.asarray(x, dtype=float)
        grad = np.asarray(base_grad(t, x), dtype=float)
        return float(grad @ np.asarray(drift(x), dtype=float)) \
            + float(base_tp(t, x)) + lam * float(base_value(t, x))

    if gradient is None:
        gradient = lambda t, x: finite_difference_gradient(
            reduced_value, t, x, central=False)
    if time_partial is None:
        time_partial = lambda t, x: finite_difference_time_partial(
            reduced_value, t, x)

    reduced = Certificate(value=reduced_value, gradient=gradient,
                          time_partial=time_partial, lipschitz=0.0)
    if lipschitz is None:
        lipschitz = estimate_lipschitz(reduced, plant.domain, horizon=horizon,
                                       n_samples=1024)
    reduced.lipschitz = float(lipschitz)
    return reduced


def smooth_max(certs, kappa=1.0):
    """Smooth upper bound of several certificates via log-sum-exp.

    The composite sits within [max, max + log(N)/kappa], so driving it
    nonpositive drives every member nonpositive.  Gradients combine with
    softmax weights; since those weights are a convex combination, the
    largest member Lipschitz bound covers the composite.
    """
    if len(certs) == 0:
        raise ValueError("smooth_max needs at least one certificate")
    if kappa <= 0.0:
        raise ValueError(f"sharpness must be positive, got {kappa}")
    members = list(certs)

    def value(t, x):
        vals = [float(c.value(t, x)) for c in members]
        top = max(vals)
        acc = sum(math.exp(kappa * (v - top)) for v in vals)
        return top + math.log(acc) / kappa

    def softmax_weights(vals):
        top = max(vals)
        w = np.array([math.exp(kappa * (v - top)) for v in vals])
        return w / w.sum()

    def gradient(t, x):
        vals = [float(c.value(t, x)) for c in members]
        w = softmax_weights(vals)
        out = w[0] * np.asarray(members[0].gradient(t, x), dtype=float)
        for wi, c in zip(w[1:], members[1:]):
            out = out + wi * np.asarray(c.gradient(t, x), dtype=float)
        return out

    def time_partial(t, x):
        vals = [float(c.value(t, x)) for c in members]
        w = softmax_weights(vals)
        return float(sum(wi * float(c.time_partial(t, x))
                         for wi, c in zip(w, members)))

    return Certificate(
        value=value,
        gradient=gradient,
        time_partial=time_partial,
        lipschitz=max(c.lipschitz for c in members),
    )


def conservatism_offset(n_members, kappa=1.0):
    """Worst-case gap between the smooth maximum and the true maximum."""
    if n_members < 1:
        raise ValueError("need at least one member")
    return math.log(n_members) / kappa
