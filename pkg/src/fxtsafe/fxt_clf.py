"""Fixed-time stability parameterization and convergence-rate evaluation.

The decrease condition enforced on a goal certificate v is

    vdot <= delta1 * v - alpha1 * max(0, v)^gamma1
                       - alpha2 * max(0, v)^gamma2 - margin

with exponents gamma1 = 1 + 1/mu, gamma2 = 1 - 1/mu and gains
alpha1 = alpha2 = mu * pi / (2 * t_bar).  With that choice, a run whose
delta1 stays nonpositive reaches {v <= 0} no later than t_bar, independent
of the initial condition.
"""

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class FxtParams:
    mu: float
    t_bar: float
    alpha1: float
    alpha2: float
    gamma1: float
    gamma2: float


@dataclass(frozen=True)
class NoGuarantee:
    """Returned when the observed delta1 excursion voids the time bound.

    ratio is delta1_max / (2 * sqrt(alpha1 * alpha2)), the normalized size
    of the excursion, kept for diagnostics.
    """

    delta1_max: float
    ratio: float


def fxt_params(mu, t_bar):
    """Build the fixed-time gain/exponent set for a user time budget t_bar."""
    if not mu > 1.0:
        raise ValueError(f"mu must exceed 1, got {mu}")
    if not t_bar > 0.0:
        raise ValueError(f"t_bar must be positive, got {t_bar}")
    alpha = mu * math.pi / (2.0 * t_bar)
    return FxtParams(
        mu=float(mu),
        t_bar=float(t_bar),
        alpha1=alpha,
        alpha2=alpha,
        gamma1=1.0 + 1.0 / mu,
        gamma2=1.0 - 1.0 / mu,
    )


def fxt_rhs(params, v_hat, delta1, margin):
    """Right side of the decrease condition at certificate value v_hat.

    The max(0, .) clamp keeps the fractional powers real for v_hat < 0; in
    that regime only the delta1 and margin terms remain.
    """
    if margin < 0.0:
        raise ValueError(f"margin must be nonnegative, got {margin}")
    if not (math.isfinite(v_hat) and math.isfinite(delta1)
            and math.isfinite(margin)):
        raise ValueError("fxt_rhs requires finite inputs")
    v_pos = max(0.0, v_hat)
    return (delta1 * v_hat
            - params.alpha1 * v_pos ** params.gamma1
            - params.alpha2 * v_pos ** params.gamma2
            - margin)


def settling_bound(params, delta1_max):
    """Settling-time bound implied by the worst observed delta1.

    delta1_max <= 0 keeps the decrease condition at full strength, and the
    bound mu * pi / (2 * sqrt(alpha1 * alpha2)) evaluates to t_bar by
    construction.  A positive delta1_max voids the guarantee; the normalized
    excursion is reported instead of importing sharper bounds.
    """
    if delta1_max <= 0.0:
        return params.mu * math.pi / (
            2.0 * math.sqrt(params.alpha1 * params.alpha2))
    return NoGuarantee(
        delta1_max=float(delta1_max),
        ratio=float(delta1_max) / (
            2.0 * math.sqrt(params.alpha1 * params.alpha2)),
    )
