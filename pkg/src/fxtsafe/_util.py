"""Small shared helpers."""

import math

TWO_PI = 2.0 * math.pi


def wrap_angle(angle):
    """Wrap an angle to the interval (-pi, pi].

    The closed upper endpoint keeps headings of exactly pi stable instead of
    flipping them to -pi.
    """
    return angle - TWO_PI * math.ceil((angle - math.pi) / TWO_PI)
