"""Underactuated planar marine-vehicle simulation.

State per agent is (x, y, phi, u, v, r): world position, heading, and
body-frame surge, sway, and yaw rate.  Thrust enters surge and yaw only;
sway is unactuated.  A bounded water current disturbs the kinematics and a
bounded error corrupts the state estimate the controllers see.  Integration
is fixed-step classical Runge-Kutta with inputs and the current sample held
constant over each step.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from ._util import wrap_angle
from .certificates import Box, Plant
from .qp_controller import compute_control
from .qp_core import QpStatus

PHI_INDEX = 2


@dataclass
class AgentState:
    x: float = 0.0
    y: float = 0.0
    phi: float = 0.0
    u: float = 0.0
    v: float = 0.0
    r: float = 0.0

    def __post_init__(self):
        vals = (self.x, self.y, self.phi, self.u, self.v, self.r)
        if not all(math.isfinite(val) for val in vals):
            raise ValueError("agent state must be finite")
        self.phi = wrap_angle(self.phi)

    def as_vector(self):
        return np.array([self.x, self.y, self.phi, self.u, self.v, self.r])

    @classmethod
    def from_vector(cls, vec):
        vec = np.asarray(vec, dtype=float)
        return cls(*vec)


@dataclass
class VehicleParams:
    """Inertia and drag constants of the survey-vessel model.

    Defaults reproduce the identification used throughout the bundled
    scenarios; note the very large yaw inertia, which makes heading
    dynamics extremely slow relative to surge.
    """

    m11: float = 5.5404
    m22: float = 9.6572
    m33: float = 1536.0
    xu: float = -2.3015
    yv: float = -8.0149
    nr: float = -0.0048
    xuu: float = -8.2845
    yvv: float = -23.689
    nrr: float = -0.0089

    def __post_init__(self):
        if min(self.m11, self.m22, self.m33) <= 0.0:
            raise ValueError("inertia terms must be positive")
        drags = (self.xu, self.yv, self.nr, self.xuu, self.yvv, self.nrr)
        if any(d > 0.0 for d in drags):
            raise ValueError("drag coefficients must be nonpositive")


@dataclass
class CurrentSpec:
    """Water current: amplitude and direction fields with a hard norm cap.

    amplitude_fn(t, pos) and angle_fn(t, pos) give the current speed and
    direction; the speed is clamped to gamma at evaluation so the norm
    bound holds regardless of the supplied law.
    """

    gamma: float
    amplitude_fn: Optional[Callable] = None
    angle_fn: Optional[Callable] = None

    def __post_init__(self):
        if self.gamma < 0.0:
            raise ValueError("current bound must be nonnegative")
        if self.amplitude_fn is None:
            gamma = self.gamma
            self.amplitude_fn = lambda t, pos: gamma * math.sin(0.3 * t)
        if self.angle_fn is None:
            self.angle_fn = lambda t, pos: 0.7 * t


def constant_current(gamma, angle=0.0):
    """Steady current of full strength in a fixed direction."""
    return CurrentSpec(gamma=gamma,
                       amplitude_fn=lambda t, pos: gamma,
                       angle_fn=lambda t, pos: angle)


def current(spec, t, position):
    """Sample the planar current velocity (d_x, d_y), norm capped at gamma."""
    amp = float(spec.amplitude_fn(t, position))
    amp = max(-spec.gamma, min(spec.gamma, amp))
    ang = float(spec.angle_fn(t, position))
    return np.array([amp * math.cos(ang), amp * math.sin(ang)])


@dataclass
class EstimatorSpec:
    """Bounded state-estimation error model.

    UniformBall draws each error uniformly in the eps-ball.  FilteredNoise
    low-passes ball draws (pole 0.9 per step) and re-projects, giving a
    smoother error trajectory with the same hard bound.
    """

    eps: float
    law: str = "uniform_ball"
    seed: int = 0

    def __post_init__(self):
        if self.eps < 0.0:
            raise ValueError("estimation bound must be nonnegative")
        if self.law not in ("uniform_ball", "filtered_noise"):
            raise ValueError(f"unknown estimator law {self.law!r}")


class Estimator:
    """Stateful error generator; deterministic for a given seed."""

    FILTER_POLE = 0.9

    def __init__(self, spec, seed=None):
        self.spec = spec
        self._rng = np.random.default_rng(
            spec.seed if seed is None else seed)
        self._filtered = None

    def _ball_draw(self, dim):
        direction = self._rng.normal(size=dim)
        norm = np.linalg.norm(direction)
        if norm == 0.0:
            return np.zeros(dim)
        radius = self.spec.eps * self._rng.uniform() ** (1.0 / dim)
        return direction * (radius / norm)

    def estimate(self, state_vec):
        """Return the state estimate: the true state plus a bounded error."""
        state_vec = np.asarray(state_vec, dtype=float)
        err = self._ball_draw(state_vec.size)
        if self.spec.law == "filtered_noise":
            if self._filtered is None:
                self._filtered = err
            else:
                pole = self.FILTER_POLE
                self._filtered = pole * self._filtered + (1.0 - pole) * err
            err = self._filtered
        norm = np.linalg.norm(err)
        if norm > self.spec.eps > 0.0:
            err = err * (self.spec.eps / norm)
        elif self.spec.eps == 0.0:
            err = np.zeros_like(err)
        return state_vec + err


def estimate(spec, state_vec, rng):
    """One-shot estimate draw from an externally managed generator."""
    est = Estimator(spec)
    est._rng = rng
    return est.estimate(state_vec)


def vehicle_dynamics(params, state, tau, d=(0.0, 0.0)):
    """Time derivative of one vehicle state.

    tau = (tau_u, tau_r) is the surge/yaw thrust pair and d the planar
    current velocity.  The current enters the kinematics only, and no input
    reaches the sway channel.
    """
    if isinstance(state, AgentState):
        state = state.as_vector()
    x, y, phi, u, v, r = (float(s) for s in state)
    tau_u, tau_r = float(tau[0]), float(tau[1])
    d_x, d_y = float(d[0]), float(d[1])
    if not all(math.isfinite(val) for val in
               (x, y, phi, u, v, r, tau_u, tau_r, d_x, d_y)):
        raise ValueError("vehicle dynamics require finite inputs")
    cos_phi = math.cos(phi)
    sin_phi = math.sin(phi)
    p = params
    return np.array([
        u * cos_phi - v * sin_phi + d_x,
        u * sin_phi + v * cos_phi + d_y,
        r,
        (p.m22 * v * r + p.xu * u + p.xuu * abs(u) * u + tau_u) / p.m11,
        (-p.m11 * u * r + p.yv * v + p.yvv * abs(v) * v) / p.m22,
        ((p.m11 - p.m22) * u * v + p.nr * r + p.nrr * abs(r) * r + tau_r)
        / p.m33,
    ])


def plant_from_params(params, domain):
    """Control-affine plant view of the vehicle (zero current)."""
    g_mat = np.zeros((6, 2))
    g_mat[3, 0] = 1.0 / params.m11
    g_mat[5, 1] = 1.0 / params.m33
    return Plant(
        n=6,
        m=2,
        drift=lambda x: vehicle_dynamics(params, x, (0.0, 0.0)),
        input_map=lambda x: g_mat,
        domain=domain,
    )


def rk4_step(derivative_fn, state_vec, dt):
    """One classical fourth-order Runge-Kutta step of xdot = f(x)."""
    if dt <= 0.0:
        raise ValueError("step size must be positive")
    y = np.asarray(state_vec, dtype=float)
    k1 = np.asarray(derivative_fn(y), dtype=float)
    k2 = np.asarray(derivative_fn(y + 0.5 * dt * k1), dtype=float)
    k3 = np.asarray(derivative_fn(y + 0.5 * dt * k2), dtype=float)
    k4 = np.asarray(derivative_fn(y + dt * k3), dtype=float)
    for stage in (k1, k2, k3, k4):
        if not np.all(np.isfinite(stage)):
            raise ArithmeticError(
                "non-finite derivative stage; the integration diverged")
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_vehicle(params, state_vec, tau, d, dt):
    """Advance one vehicle by dt with held inputs; heading re-wrapped."""
    nxt = rk4_step(lambda y: vehicle_dynamics(params, y, tau, d),
                   state_vec, dt)
    nxt[PHI_INDEX] = wrap_angle(nxt[PHI_INDEX])
    return nxt


@dataclass
class World:
    """Scenario handle: shared physics plus per-run uncertainty models.

    pre_step, when set, is called once per step with (t, estimates) before
    any controller runs, so time-varying certificates can snapshot the other
    agents' estimated states.
    """

    params: VehicleParams
    current: CurrentSpec
    estimator: EstimatorSpec
    initial_states: List[AgentState]
    arena: Box
    pre_step: Optional[Callable] = None


@dataclass
class Trace:
    """Time-indexed log of a simulation run."""

    t: np.ndarray
    states: np.ndarray       # (steps, agents, 6)
    estimates: np.ndarray    # (steps, agents, 6)
    inputs: np.ndarray       # (steps, agents, 2)
    slacks: np.ndarray       # (steps, agents, 3)
    cert_values: np.ndarray  # (steps, agents, 3): goal/static/tv certificates
    status: np.ndarray       # (steps, agents) status strings
    events: List[dict] = field(default_factory=list)

    @property
    def n_steps(self):
        return self.t.size

    @property
    def n_agents(self):
        return self.states.shape[1]

    @property
    def infeasible_step_count(self):
        if self.status.size == 0:
            return 0
        return int(np.sum(self.status != QpStatus.OPTIMAL.value))


def simulate(world, controllers, duration, dt, seed=0):
    """Run the closed loop and log every step.

    Per step and per agent: draw the state estimate, compute the control
    from the estimate alone, then integrate the true state under the true
    current.  Agents are processed in index order; all controllers in one
    step see the same estimate snapshot.  A controller failure logs a
    safety event and holds the previous input.  The run aborts early only
    if a state leaves the arena box.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if duration < dt:
        raise ValueError("duration must cover at least one step")
    n_agents = len(controllers)
    if len(world.initial_states) != n_agents:
        raise ValueError("one initial state per controller is required")
    n_steps = math.ceil(duration / dt) + 1

    t_log = np.zeros(n_steps)
    states = np.zeros((n_steps, n_agents, 6))
    estimates = np.zeros((n_steps, n_agents, 6))
    inputs = np.zeros((n_steps, n_agents, 2))
    slacks = np.zeros((n_steps, n_agents, 3))
    cert_values = np.full((n_steps, n_agents, 3), np.nan)
    status = np.full((n_steps, n_agents), QpStatus.OPTIMAL.value,
                     dtype=object)
    events = []

    seed_seq = np.random.SeedSequence(seed)
    child_seeds = seed_seq.spawn(max(n_agents, 1))
    estimators = [Estimator(world.estimator, seed=child_seeds[i])
                  for i in range(n_agents)]

    current_states = [s.as_vector().copy() for s in world.initial_states]
    warm = [None] * n_agents
    held_input = [np.zeros(2) for _ in range(n_agents)]
    logged = 0

    for step in range(n_steps):
        t = step * dt
        t_log[step] = t
        est_snapshot = [estimators[i].estimate(current_states[i])
                        for i in range(n_agents)]
        if world.pre_step is not None and n_agents > 0:
            world.pre_step(t, est_snapshot)

        for i in range(n_agents):
            states[step, i] = current_states[i]
            estimates[step, i] = est_snapshot[i]
            res = compute_control(controllers[i], t, est_snapshot[i],
                                  warm=warm[i])
            cert_values[step, i] = res.cert_values
            status[step, i] = res.status.value
            if res.status is QpStatus.OPTIMAL:
                held_input[i] = res.u
                warm[i] = res.z_star
                slacks[step, i] = res.slacks
            else:
                slacks[step, i] = np.nan
                events.append({
                    "type": "controller_failure",
                    "t": t,
                    "agent": i,
                    "status": res.status.value,
                })
            inputs[step, i] = held_input[i]
        logged = step + 1

        if step == n_steps - 1:
            break
        aborted = False
        for i in range(n_agents):
            d = current(world.current, t, current_states[i][:2])
            current_states[i] = step_vehicle(
                world.params, current_states[i], inputs[step, i], d, dt)
            if not world.arena.contains(current_states[i]):
                events.append({
                    "type": "arena_exit",
                    "t": t + dt,
                    "agent": i,
                })
                aborted = True
        if aborted:
            break

    return Trace(
        t=t_log[:logged],
        states=states[:logged],
        estimates=estimates[:logged],
        inputs=inputs[:logged],
        slacks=slacks[:logged],
        cert_values=cert_values[:logged],
        status=status[:logged],
        events=events,
    )
