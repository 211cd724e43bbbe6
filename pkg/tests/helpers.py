"""Shared drivers for closed-loop controller tests on simple plants."""

import numpy as np

from fxtsafe.certificates import Box, Certificate, Plant
from fxtsafe.marine_sim import rk4_step
from fxtsafe.qp_controller import compute_control
from fxtsafe.qp_core import QpStatus


def integrator_plant(dim, bound=1e6):
    """Single integrator xdot = u with an identity input map."""
    eye = np.eye(dim)
    return Plant(
        n=dim,
        m=dim,
        drift=lambda x: np.zeros(dim),
        input_map=lambda x: eye,
        domain=Box(lo=[-bound] * dim, hi=[bound] * dim),
    )


def double_integrator_plant(bound=50.0):
    """Planar chain x1dot = x2, x2dot = u."""
    g = np.array([[0.0], [1.0]])
    return Plant(
        n=2,
        m=1,
        drift=lambda x: np.array([x[1], 0.0]),
        input_map=lambda x: g,
        domain=Box(lo=[-bound, -bound], hi=[bound, bound]),
    )


def quadratic_cert(center, offset, lipschitz):
    """h(x) = |x - center|^2 + offset with its exact gradient."""
    center = np.asarray(center, dtype=float)

    def value(t, x):
        d = np.asarray(x, dtype=float) - center
        return float(d @ d) + offset

    def gradient(t, x):
        return 2.0 * (np.asarray(x, dtype=float) - center)

    return Certificate(value=value, gradient=gradient, lipschitz=lipschitz)


def constant_cert(level):
    return Certificate(
        value=lambda t, x: float(level),
        gradient=lambda t, x: np.zeros(np.asarray(x).size),
        lipschitz=0.0,
    )


def run_closed_loop(spec, x0, duration, dt, disturbance=None, estimator=None,
                    record=None):
    """Integrate the true state under the QP controller.

    disturbance(t, x) adds directly to the state derivative; estimator(k, x)
    produces the state the controller sees.  Returns arrays of logged times,
    true states, inputs, slacks, and statuses, plus any caller-provided
    record callback results.
    """
    x = np.asarray(x0, dtype=float).copy()
    n_steps = int(round(duration / dt))
    times = np.zeros(n_steps + 1)
    states = np.zeros((n_steps + 1, x.size))
    inputs = np.zeros((n_steps, spec.plant.m))
    slacks = np.full((n_steps, 3), np.nan)
    statuses = []
    extras = []
    warm = None
    held = np.zeros(spec.plant.m)
    for k in range(n_steps + 1):
        t = k * dt
        times[k] = t
        states[k] = x
        if record is not None:
            extras.append(record(t, x))
        if k == n_steps:
            break
        x_hat = x if estimator is None else estimator(k, x)
        res = compute_control(spec, t, x_hat, warm=warm)
        statuses.append(res.status)
        if res.status is QpStatus.OPTIMAL:
            held = res.u
            warm = res.z_star
            slacks[k] = res.slacks
        u = held

        def deriv(y):
            out = np.asarray(spec.plant.drift(y), dtype=float) \
                + np.asarray(spec.plant.input_map(y), dtype=float) @ u
            if disturbance is not None:
                out = out + disturbance(t, y)
            return out

        x = rk4_step(deriv, x, dt)
        inputs[k] = u
    return {
        "t": times,
        "states": states,
        "inputs": inputs,
        "slacks": slacks,
        "statuses": statuses,
        "extras": extras,
    }
