"""Small numeric helpers shared by the exact and floating layers."""

from __future__ import annotations

import math
from fractions import Fraction


def coerce(value, like):
    """Convert an exact coefficient to the numeric type of `like`.

    `like` is a float or an mpmath.mpf; Fractions are converted without an
    intermediate double rounding in the mpf case.
    """
    if isinstance(like, float):
        return float(value)
    if isinstance(value, Fraction):
        one = like * 0 + 1
        return (one * value.numerator) / (one * value.denominator)
    return like * 0 + value


def log_of(t):
    """Natural log matching the numeric type of t (float or mpf)."""
    if isinstance(t, (float, int, Fraction)):
        return math.log(t)
    import mpmath

    return mpmath.log(t)


def horner(coeffs, t):
    """Evaluate ascending-coefficient data at t, exact for rational t."""
    if isinstance(t, (int, Fraction)):
        acc = Fraction(0)
        for c in reversed(coeffs):
            acc = acc * t + c
        return acc
    acc = t * 0
    for c in reversed(coeffs):
        acc = acc * t + coerce(c, t)
    return acc
