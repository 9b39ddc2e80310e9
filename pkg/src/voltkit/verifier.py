"""Independent residual checks against the original and reduced equations.

This module is the ground-truth oracle for everything else: it evaluates
the first-kind equation (including the exact delta contribution a*K_1(t,0)),
the reduced second-kind form, and the differentiated collocation form,
using its own quadrature path (adaptive Simpson) so that solver bias cannot
hide.  The leftmost sector is integrated over a dyadic cascade toward 0
because regular parts may carry integrable ln^k s singularities there.

`prec` switches the differentiated-form evaluation to mpmath arithmetic
with the same Simpson algorithm; decay measurements at t ~ 1e-4 need it
because the true residual sits below double-precision cancellation noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

from ._num import coerce, log_of
from .errors import DomainError, SingularDiagonalError
from .model import ProblemSpec, driving_polynomial, kernel_time_derivative

DEFAULT_TOL = 1e-12


# ---------------------------------------------------------------------------
# adaptive Simpson quadrature (generic over float / mpf)


def _simpson_recurse(f, a, fa, m, fm, b, fb, whole, tol, depth):
    lm = (a + m) / 2
    rm = (m + b) / 2
    flm = f(lm)
    frm = f(rm)
    left = (m - a) / 6 * (fa + 4 * flm + fm)
    right = (b - m) / 6 * (fm + 4 * frm + fb)
    delta = left + right - whole
    if depth <= 0 or abs(delta) <= 15 * tol:
        return left + right + delta / 15
    return _simpson_recurse(
        f, a, fa, lm, flm, m, fm, left, tol / 2, depth - 1
    ) + _simpson_recurse(f, m, fm, rm, frm, b, fb, right, tol / 2, depth - 1)


def adaptive_simpson(f, a, b, tol: float = DEFAULT_TOL, max_depth: int = 48):
    """Classic adaptive Simpson with Richardson correction."""
    if a == b:
        return a * 0
    if a > b:
        raise DomainError(f"integration bounds reversed: [{a}, {b}]")
    fa, fb = f(a), f(b)
    m = (a + b) / 2
    fm = f(m)
    whole = (b - a) / 6 * (fa + 4 * fm + fb)
    return _simpson_recurse(f, a, fa, m, fm, b, fb, whole, tol, max_depth)


def _dyadic_left(f, b, tol, max_levels: int = 256):
    """integral_0^b f via dyadic panels [b/2^(m+1), b/2^m]; skips the
    singular endpoint and stops when the tail estimate is negligible."""
    total = b * 0
    hi = b
    for _ in range(max_levels):
        lo = hi / 2
        total = total + adaptive_simpson(f, lo, hi, tol=tol / 8)
        tail = abs(lo * 4 * max(abs(f(lo)), abs(f(lo / 4))))
        if tail < tol / 4:
            break
        hi = lo
    return total


def integrate(
    f,
    a,
    b,
    tol: float = DEFAULT_TOL,
    splits: Sequence = (),
    singular_left: bool = False,
):
    """Adaptive Simpson over [a, b] split at interior breakpoints; with
    `singular_left` and a == 0 the first stretch runs the dyadic cascade."""
    if b <= a:
        return (b - a) * 0 if b == a else _raise_reversed(a, b)
    points = [a, *sorted(s for s in splits if a < s < b), b]
    total = b * 0
    first = True
    for lo, hi in zip(points, points[1:]):
        if first and singular_left and lo == 0:
            total = total + _dyadic_left(f, hi, tol)
        else:
            total = total + adaptive_simpson(f, lo, hi, tol=tol)
        first = False
    return total


def _raise_reversed(a, b):
    raise DomainError(f"integration bounds reversed: [{a}, {b}]")


# ---------------------------------------------------------------------------
# operator evaluations (verifier-local, quadrature-independent of the solver)


def _functional_term(spec: ProblemSpec, x, t):
    total = t * 0
    for i in range(1, spec.n):
        boundary = spec.boundaries[i - 1]
        arg = boundary(t)
        total = total + boundary.derivative()(t) * spec.kernel_jump(i)(t, arg) * x(arg)
    return total


def _integral_term(spec: ProblemSpec, x, t, tol, singular_left: bool = True, splits=()):
    pieces = kernel_time_derivative(spec)
    cuts = [t * 0, *[b(t) for b in spec.boundaries], t]
    total = t * 0
    for i in range(spec.n):
        piece = pieces[i]
        if piece.is_zero:
            continue
        lo, hi = cuts[i], cuts[i + 1]
        if hi <= lo:
            continue
        total = total + integrate(
            lambda s: piece(t, s) * x(s),
            lo,
            hi,
            tol=tol,
            splits=splits,
            singular_left=singular_left and i == 0,
        )
    return total


def residual_first_kind(spec: ProblemSpec, sol, t, tol: float = DEFAULT_TOL):
    """Residual of the original equation at t > 0:

    a*K_1(t,0) + sum_i int K_i(t,s) x(s) ds - f(t),

    with x the regular part of the generalized solution `sol` (an object
    with fields a, t_split and a regular_value callable)."""
    if t <= 0 or t > float(spec.horizon) * (1 + 1e-12):
        raise DomainError(f"residual requested outside (0, T]: t = {t}")
    x = sol.regular_value
    total = float(sol.a) * spec.kernels[0].at_s_zero()(t)
    cuts = [0.0, *[float(b(t)) for b in spec.boundaries], t]
    splits = [
        s
        for s in (getattr(sol, "t_split", 0.0), *getattr(sol, "interior_joints", ()))
        if s
    ]
    for i in range(spec.n):
        lo, hi = cuts[i], cuts[i + 1]
        if hi <= lo:
            continue
        kernel = spec.kernels[i]
        total += integrate(
            lambda s: kernel(t, s) * x(s),
            lo,
            hi,
            tol=tol,
            splits=splits,
            singular_left=(i == 0),
        )
    return total - spec.rhs(t)


def residual_second_kind(spec: ProblemSpec, x, t, tol: float = DEFAULT_TOL):
    """Residual of the reduced form x + Ax + Kx - fbar at t > 0."""
    diag = spec.kernels[-1].diagonal()(t)
    if diag == 0:
        raise SingularDiagonalError(f"K_n(t,t) = 0 at t = {t}")
    value = (
        x(t) * diag
        + _functional_term(spec, x, t)
        + _integral_term(spec, x, t, tol)
        - driving_polynomial(spec)(t)
    )
    return value / diag


def residual_differentiated(
    spec: ProblemSpec, x, t, tol: float = DEFAULT_TOL, prec: int | None = None
):
    """Residual of the differentiated collocation form F(x) - g at t > 0.

    With `prec` set, all arithmetic runs under mpmath at that many decimal
    digits (the integrand callable receives mpf arguments); the result is
    returned as a float.
    """
    if prec is None:
        value = (
            spec.kernels[-1].diagonal()(t) * x(t)
            + _functional_term(spec, x, t)
            + _integral_term(spec, x, t, tol)
            - driving_polynomial(spec)(t)
        )
        return value
    import mpmath

    with mpmath.workdps(prec):
        tt = mpmath.mpf(t)
        mp_tol = coerce(Fraction(1, 10 ** (prec - 8)), tt)
        value = (
            spec.kernels[-1].diagonal()(tt) * x(tt)
            + _functional_term(spec, x, tt)
            + _integral_term(spec, x, tt, mp_tol)
            - driving_polynomial(spec)(tt)
        )
        return float(value)


def decay_order(values: Sequence[tuple]):
    """Least-squares slope of log|residual| against log t.

    Returns the string 'exact' when the residuals are identically zero (or
    too few nonzero points remain to fit a slope).
    """
    pairs = [(float(t), abs(float(r))) for t, r in values]
    nonzero = [(t, r) for t, r in pairs if r > 0]
    if len(nonzero) < 2:
        return "exact"
    xs = [math.log(t) for t, _ in nonzero]
    ys = [math.log(r) for _, r in nonzero]
    n = len(xs)
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    sxx = sum((v - mean_x) ** 2 for v in xs)
    sxy = sum((u - mean_x) * (v - mean_y) for u, v in zip(xs, ys))
    return sxy / sxx


# ---------------------------------------------------------------------------
# residual reports


@dataclass(frozen=True)
class ResidualReport:
    grid: tuple[float, ...]
    first_kind: tuple[float, ...]
    second_kind: tuple[float, ...]
    representation: tuple[str, ...]
    max_abs: float
    decay: float | str | None

    def to_json_dict(self) -> dict:
        return {
            "grid": list(self.grid),
            "first_kind": list(self.first_kind),
            "second_kind": list(self.second_kind),
            "representation": list(self.representation),
            "max_abs": self.max_abs,
            "decay": self.decay,
        }

    def to_csv_text(self) -> str:
        lines = ["t,first_kind,second_kind,representation"]
        for t, r3, r6, rep in zip(
            self.grid, self.first_kind, self.second_kind, self.representation
        ):
            lines.append(f"{t!r},{r3!r},{r6!r},{rep}")
        return "\n".join(lines) + "\n"


def make_residual_report(
    spec: ProblemSpec,
    sol,
    grid: Sequence[float] | None = None,
    count: int = 25,
    tol: float = DEFAULT_TOL,
) -> ResidualReport:
    """Evaluate both residual forms of a generalized solution on a grid."""
    horizon = getattr(sol, "horizon", float(spec.horizon))
    if grid is None:
        lo = max(0.01 * horizon, getattr(sol, "t_split", 0.0) * 2, 1e-9)
        ratio = (horizon / lo) ** (1.0 / (count - 1))
        grid = [lo * ratio**k for k in range(count - 1)] + [horizon]
    grid = tuple(float(t) for t in grid)
    t_split = getattr(sol, "t_split", 0.0)
    first, second, reps = [], [], []
    for t in grid:
        first.append(float(residual_first_kind(spec, sol, t, tol=tol)))
        second.append(float(residual_second_kind(spec, sol.regular_value, t, tol=tol)))
        reps.append("asymptotic" if t < t_split else "composite")
    max_abs = max(max(map(abs, first)), max(map(abs, second)))
    small = [(t, r) for t, r in zip(grid, first) if t < 0.1 * horizon]
    decay = decay_order(small) if len(small) >= 3 else None
    return ResidualReport(
        grid=grid,
        first_kind=tuple(first),
        second_kind=tuple(second),
        representation=tuple(reps),
        max_abs=max_abs,
        decay=decay,
    )
