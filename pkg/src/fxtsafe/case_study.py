"""Certificates for the multi-vehicle goal/field-of-view/separation tasks.

Built-in scalar fields over the 6-state vehicle (x, y, phi, u, v, r):

  * pair separation   h = d_s^2 - |p_i - p_j|^2        (relative degree 2)
  * field-of-view     h_angle = wrap(bearing - phi)^2 - alpha^2
    (two parts)       h_range = |p - p_star|^2 - R^2   (both degree 2)
  * goal tracking     V = 1/2 |X - X_d(X)|^2, goal set {V <= level}

The degree-2 barriers are also provided in reduced first-order form with
hand-derived gradients (cheaper and exact, unlike the generic
finite-difference reduction).  Neighbor motion enters the pair barrier
through an ExternalSignal snapshot extrapolated linearly in time.
"""

import math

import numpy as np

from ._util import wrap_angle
from .certificates import Certificate, finite_difference_gradient

COINCIDENT_TOL = 1e-12


class ExternalSignal:
    """Snapshot of one neighbor's planar position and velocity.

    Certificates read the signal at evaluation time; the simulation loop
    refreshes it once per step from the estimate snapshot, so within a step
    every read is consistent.  Position extrapolates linearly from the
    snapshot instant.
    """

    __slots__ = ("t0", "pos", "vel")

    def __init__(self, pos, vel=(0.0, 0.0), t0=0.0):
        self.update(t0, pos, vel)

    def update(self, t0, pos, vel):
        self.t0 = float(t0)
        self.pos = (float(pos[0]), float(pos[1]))
        self.vel = (float(vel[0]), float(vel[1]))

    def pos_at(self, t):
        dt = t - self.t0
        return (self.pos[0] + dt * self.vel[0], self.pos[1] + dt * self.vel[1])


def planar_velocity(state_vec):
    """World-frame planar velocity of a vehicle state (or estimate)."""
    phi, u, v = float(state_vec[2]), float(state_vec[3]), float(state_vec[4])
    return (u * math.cos(phi) - v * math.sin(phi),
            u * math.sin(phi) + v * math.cos(phi))


# ---------------------------------------------------------------------------
# pair separation


def pair_separation_cbf(signal, safe_distance, lipschitz=0.0):
    """Raw relative-degree-2 separation barrier against one neighbor."""
    ds2 = safe_distance ** 2

    def value(t, x):
        px, py = signal.pos_at(t)
        return ds2 - (x[0] - px) ** 2 - (x[1] - py) ** 2

    def gradient(t, x):
        px, py = signal.pos_at(t)
        return np.array([-2.0 * (x[0] - px), -2.0 * (x[1] - py),
                         0.0, 0.0, 0.0, 0.0])

    def time_partial(t, x):
        px, py = signal.pos_at(t)
        vx, vy = signal.vel
        return 2.0 * ((x[0] - px) * vx + (x[1] - py) * vy)

    return Certificate(value=value, gradient=gradient,
                       time_partial=time_partial, lipschitz=lipschitz)


def pair_separation_reduced(signal, safe_distance, lam=1.0, lipschitz=0.0):
    """First-order reduction of the separation barrier, analytic gradient."""
    ds2 = safe_distance ** 2

    def value(t, x):
        px, py = signal.pos_at(t)
        dx, dy = x[0] - px, x[1] - py
        vx, vy = planar_velocity(x)
        rel_x, rel_y = vx - signal.vel[0], vy - signal.vel[1]
        return (-2.0 * (dx * rel_x + dy * rel_y)
                + lam * (ds2 - dx * dx - dy * dy))

    def gradient(t, x):
        px, py = signal.pos_at(t)
        dx, dy = x[0] - px, x[1] - py
        phi = float(x[2])
        cos_p, sin_p = math.cos(phi), math.sin(phi)
        vx, vy = planar_velocity(x)
        rel_x, rel_y = vx - signal.vel[0], vy - signal.vel[1]
        return np.array([
            -2.0 * rel_x - 2.0 * lam * dx,
            -2.0 * rel_y - 2.0 * lam * dy,
            2.0 * (dx * vy - dy * vx),
            -2.0 * (dx * cos_p + dy * sin_p),
            -2.0 * (-dx * sin_p + dy * cos_p),
            0.0,
        ])

    def time_partial(t, x):
        px, py = signal.pos_at(t)
        dx, dy = x[0] - px, x[1] - py
        vx, vy = planar_velocity(x)
        njx, njy = signal.vel
        rel_x, rel_y = vx - njx, vy - njy
        return (2.0 * (njx * rel_x + njy * rel_y)
                + 2.0 * lam * (dx * njx + dy * njy))

    return Certificate(value=value, gradient=gradient,
                       time_partial=time_partial, lipschitz=lipschitz)


# ---------------------------------------------------------------------------
# field of view


def fov_range_cbf(point, radius, lipschitz=0.0):
    """Raw range part of the field-of-view constraint."""
    px, py = float(point[0]), float(point[1])
    r2 = radius ** 2

    def value(t, x):
        return (x[0] - px) ** 2 + (x[1] - py) ** 2 - r2

    def gradient(t, x):
        return np.array([2.0 * (x[0] - px), 2.0 * (x[1] - py),
                         0.0, 0.0, 0.0, 0.0])

    return Certificate(value=value, gradient=gradient, lipschitz=lipschitz)


def fov_range_reduced(point, radius, lam=1.0, lipschitz=0.0):
    px, py = float(point[0]), float(point[1])
    r2 = radius ** 2

    def value(t, x):
        wx, wy = x[0] - px, x[1] - py
        vx, vy = planar_velocity(x)
        return 2.0 * (wx * vx + wy * vy) + lam * (wx * wx + wy * wy - r2)

    def gradient(t, x):
        wx, wy = x[0] - px, x[1] - py
        phi = float(x[2])
        cos_p, sin_p = math.cos(phi), math.sin(phi)
        vx, vy = planar_velocity(x)
        return np.array([
            2.0 * vx + 2.0 * lam * wx,
            2.0 * vy + 2.0 * lam * wy,
            2.0 * (wy * vx - wx * vy),
            2.0 * (wx * cos_p + wy * sin_p),
            2.0 * (-wx * sin_p + wy * cos_p),
            0.0,
        ])

    return Certificate(value=value, gradient=gradient, lipschitz=lipschitz)


def fov_angle_cbf(point, half_angle, lipschitz=0.0):
    """Raw bearing part of the field-of-view constraint."""
    px, py = float(point[0]), float(point[1])
    a2 = half_angle ** 2

    def _geometry(x):
        qx, qy = px - x[0], py - x[1]
        d_sq = qx * qx + qy * qy
        bearing = math.atan2(qy, qx)
        return qx, qy, d_sq, wrap_angle(bearing - x[2])

    def value(t, x):
        _, _, _, dtheta = _geometry(x)
        return dtheta * dtheta - a2

    def gradient(t, x):
        qx, qy, d_sq, dtheta = _geometry(x)
        return np.array([
            2.0 * dtheta * qy / d_sq,
            -2.0 * dtheta * qx / d_sq,
            -2.0 * dtheta,
            0.0, 0.0, 0.0,
        ])

    return Certificate(value=value, gradient=gradient, lipschitz=lipschitz)


def fov_angle_reduced(point, half_angle, lam=1.0, lipschitz=0.0):
    px, py = float(point[0]), float(point[1])
    a2 = half_angle ** 2

    def _geometry(x):
        qx, qy = px - x[0], py - x[1]
        d_sq = qx * qx + qy * qy
        dtheta = wrap_angle(math.atan2(qy, qx) - x[2])
        vx, vy = planar_velocity(x)
        bearing_rate = (qy * vx - qx * vy) / d_sq
        return qx, qy, d_sq, dtheta, vx, vy, bearing_rate

    def value(t, x):
        _, _, _, dtheta, _, _, bearing_rate = _geometry(x)
        slip = bearing_rate - float(x[5])
        return 2.0 * dtheta * slip + lam * (dtheta * dtheta - a2)

    def gradient(t, x):
        qx, qy, d_sq, dtheta, vx, vy, bearing_rate = _geometry(x)
        phi = float(x[2])
        cos_p, sin_p = math.cos(phi), math.sin(phi)
        slip = bearing_rate - float(x[5])
        num = qy * vx - qx * vy
        d_rate_dx = (vy * d_sq + 2.0 * qx * num) / (d_sq * d_sq)
        d_rate_dy = (-vx * d_sq + 2.0 * qy * num) / (d_sq * d_sq)
        d_rate_dphi = -(qx * vx + qy * vy) / d_sq
        d_rate_du = (qy * cos_p - qx * sin_p) / d_sq
        d_rate_dv = -(qy * sin_p + qx * cos_p) / d_sq
        d_theta_dx = qy / d_sq
        d_theta_dy = -qx / d_sq
        common = 2.0 * (slip + lam * dtheta)
        return np.array([
            common * d_theta_dx + 2.0 * dtheta * d_rate_dx,
            common * d_theta_dy + 2.0 * dtheta * d_rate_dy,
            common * -1.0 + 2.0 * dtheta * d_rate_dphi,
            2.0 * dtheta * d_rate_du,
            2.0 * dtheta * d_rate_dv,
            -2.0 * dtheta,
        ])

    return Certificate(value=value, gradient=gradient, lipschitz=lipschitz)


# ---------------------------------------------------------------------------
# goal tracking


def desired_state(goal, state, c1, c2):
    """Reference 6-vector the tracking error is measured against.

    Points the heading at the goal and scales the body-frame velocity
    references with the remaining distance.  When the vehicle sits exactly
    on the goal the bearing is undefined; by convention the current heading
    is kept and the velocity references drop to zero.
    """
    if hasattr(state, "as_vector"):
        state = state.as_vector()
    state = np.asarray(state, dtype=float)
    gx, gy = float(goal[0]), float(goal[1])
    dx, dy = gx - state[0], gy - state[1]
    dist = math.hypot(dx, dy)
    phi = float(state[2])
    if dist < COINCIDENT_TOL:
        return np.array([gx, gy, phi, 0.0, 0.0, 0.0])
    theta_g = math.atan2(dy, dx)
    dtheta = wrap_angle(theta_g - phi)
    return np.array([
        gx,
        gy,
        theta_g,
        c1 * dist * math.cos(dtheta),
        c1 * dist * math.sin(dtheta),
        c2 * dtheta,
    ])


def tracking_error_value(goal, state_vec, c1, c2):
    """Squared tracking error V with heading mismatch wrapped."""
    gx, gy = float(goal[0]), float(goal[1])
    ex, ey = float(state_vec[0]) - gx, float(state_vec[1]) - gy
    dist = math.hypot(ex, ey)
    phi = float(state_vec[2])
    if dist < COINCIDENT_TOL:
        e_phi = 0.0
        u_ref = v_ref = r_ref = 0.0
    else:
        dtheta = wrap_angle(math.atan2(-ey, -ex) - phi)
        e_phi = -dtheta
        u_ref = c1 * dist * math.cos(dtheta)
        v_ref = c1 * dist * math.sin(dtheta)
        r_ref = c2 * dtheta
    eu = float(state_vec[3]) - u_ref
    ev = float(state_vec[4]) - v_ref
    er = float(state_vec[5]) - r_ref
    return 0.5 * (ex * ex + ey * ey + e_phi * e_phi
                  + eu * eu + ev * ev + er * er)


def goal_clf(goal, c1, c2, goal_level, lipschitz=0.0):
    """Goal certificate: tracking error above the goal level.

    The gradient comes from central finite differences of the value map;
    the reference-state coupling makes the analytic form unwieldy and the
    controller never needs more accuracy than the differencing gives.
    """
    if goal_level <= 0.0:
        raise ValueError("goal level must be positive")

    def value(t, x):
        return tracking_error_value(goal, x, c1, c2) - goal_level

    def gradient(t, x):
        return finite_difference_gradient(value, t, x)

    return Certificate(value=value, gradient=gradient, lipschitz=lipschitz)


def constant_certificate(level):
    """Certificate pinned at a constant value, for absent constraint groups."""
    return Certificate(
        value=lambda t, x: float(level),
        gradient=lambda t, x: np.zeros(np.asarray(x).size),
        lipschitz=0.0,
    )
