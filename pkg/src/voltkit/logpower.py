"""Exact algebra of finite log-power polynomials sum c * t^j * (ln t)^k.

This representation carries the asymptotic expansion of the regular part
near t = 0.  Coefficients stay exact rationals wherever the inputs are
rational; the only irrational that ever enters is ln(alpha'(0)) from a
boundary substitution, and it arrives as a float multiplying log-bearing
terms only.  Coefficients may also be affine forms over free parameters
(see asymptotics.AffineValue); every operation here only ever adds
coefficients or multiplies them by scalars, so the affine structure
survives untouched.

Terms are keyed by (j, k) with j the t-power and k the log-power.  The
`order` attribute is the truncation order in t: operations drop any term
with j above it.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from ._num import coerce, log_of
from .errors import (
    DomainError,
    InvalidBoundaryError,
    NonPolynomialDerivativeError,
    SingularDiagonalError,
)
from .model import BoundaryFunction, Polynomial


def _is_zero(c) -> bool:
    return c == 0


class LogPowerPolynomial:
    """Immutable term map (j, k) -> coefficient with truncation order."""

    __slots__ = ("terms", "order")

    def __init__(self, terms: Mapping[tuple[int, int], object], order: int):
        if order < 0:
            raise ValueError("truncation order must be >= 0")
        clean = {}
        for (j, k), c in terms.items():
            if j < 0 or k < 0:
                raise ValueError(f"negative exponent in term ({j}, {k})")
            if j > order or _is_zero(c):
                continue
            clean[(j, k)] = c
        self.terms = clean
        self.order = order

    # -- constructors -----------------------------------------------------

    @classmethod
    def zero(cls, order: int) -> "LogPowerPolynomial":
        return cls({}, order)

    @classmethod
    def constant(cls, c, order: int) -> "LogPowerPolynomial":
        return cls({(0, 0): c}, order)

    @classmethod
    def from_polynomial(cls, poly: Polynomial, order: int) -> "LogPowerPolynomial":
        return cls({(j, 0): c for j, c in enumerate(poly.coeffs)}, order)

    # -- structure ---------------------------------------------------------

    def __eq__(self, other) -> bool:
        return isinstance(other, LogPowerPolynomial) and self.terms == other.terms

    def __hash__(self):
        raise TypeError("unhashable")

    def __repr__(self) -> str:
        return f"LogPowerPolynomial({format_terms(self)!r}, order={self.order})"

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def log_degree(self) -> int:
        return max((k for _, k in self.terms), default=0)

    @property
    def min_power(self) -> int:
        return min((j for j, _ in self.terms), default=0)

    def coefficient(self, j: int, k: int):
        return self.terms.get((j, k), Fraction(0))

    def z_slice(self, j: int) -> dict[int, object]:
        """Coefficients of t^j as a map log-power -> coefficient."""
        return {k: c for (jj, k), c in self.terms.items() if jj == j}


def format_terms(p: LogPowerPolynomial) -> str:
    """Stable debug form: sorted '(j,k): coeff' list."""
    parts = [f"({j},{k}): {p.terms[(j, k)]}" for j, k in sorted(p.terms)]
    return "; ".join(parts) if parts else "0"


def truncate(p: LogPowerPolynomial, order: int) -> LogPowerPolynomial:
    return LogPowerPolynomial(p.terms, order)


def add(p: LogPowerPolynomial, q: LogPowerPolynomial) -> LogPowerPolynomial:
    order = min(p.order, q.order)
    terms = {key: c for key, c in p.terms.items() if key[0] <= order}
    for key, c in q.terms.items():
        if key[0] > order:
            continue
        acc = terms.get(key)
        terms[key] = c if acc is None else acc + c
    return LogPowerPolynomial(terms, order)


def subtract(p: LogPowerPolynomial, q: LogPowerPolynomial) -> LogPowerPolynomial:
    return add(p, scale(q, Fraction(-1)))


def scale(p: LogPowerPolynomial, c) -> LogPowerPolynomial:
    if _is_zero(c):
        return LogPowerPolynomial.zero(p.order)
    return LogPowerPolynomial({key: c * v for key, v in p.terms.items()}, p.order)


def multiply(p: LogPowerPolynomial, q: LogPowerPolynomial) -> LogPowerPolynomial:
    order = min(p.order, q.order)
    terms: dict[tuple[int, int], object] = {}
    for (j1, k1), c1 in p.terms.items():
        if j1 > order:
            continue
        for (j2, k2), c2 in q.terms.items():
            j = j1 + j2
            if j > order:
                continue
            key = (j, k1 + k2)
            prod = c1 * c2
            acc = terms.get(key)
            terms[key] = prod if acc is None else acc + prod
    return LogPowerPolynomial(terms, order)


def shift_powers(p: LogPowerPolynomial, dj: int) -> LogPowerPolynomial:
    """Multiply by t^dj (dj may be negative if every term allows it)."""
    if dj < 0 and any(j + dj < 0 for j, _ in p.terms):
        raise DomainError("power shift would create a negative exponent")
    return LogPowerPolynomial(
        {(j + dj, k): c for (j, k), c in p.terms.items()}, max(p.order + dj, 0)
    )


def integrate_from_zero(p: LogPowerPolynomial) -> LogPowerPolynomial:
    """Term-wise antiderivative vanishing at 0+:

    int t^j ln^k t dt
        = t^{j+1} * sum_{s=0}^{k} (-1)^s [k(k-1)...(k-s+1) / (j+1)^{s+1}] ln^{k-s} t.
    """
    terms: dict[tuple[int, int], object] = {}
    for (j, k), c in p.terms.items():
        falling = 1
        for s in range(k + 1):
            if s > 0:
                falling *= k - (s - 1)
            factor = Fraction((-1) ** s * falling, (j + 1) ** (s + 1))
            key = (j + 1, k - s)
            add_c = c * factor
            acc = terms.get(key)
            terms[key] = add_c if acc is None else acc + add_c
    return LogPowerPolynomial(terms, p.order + 1)


def differentiate(p: LogPowerPolynomial) -> LogPowerPolynomial:
    """Term-wise d/dt; refuses pure log terms whose derivative has 1/t."""
    terms: dict[tuple[int, int], object] = {}
    for (j, k), c in p.terms.items():
        if j == 0:
            if k > 0:
                raise NonPolynomialDerivativeError(
                    f"d/dt of ln^{k} t leaves the log-power ring"
                )
            continue
        for key, factor in (((j - 1, k), j), ((j - 1, k - 1), k)):
            if factor == 0:
                continue
            add_c = c * Fraction(factor)
            acc = terms.get(key)
            terms[key] = add_c if acc is None else acc + add_c
    return LogPowerPolynomial(terms, max(p.order - 1, 0))


def substitute_boundary(
    p: LogPowerPolynomial, alpha: BoundaryFunction, order: int
) -> LogPowerPolynomial:
    """Replace t by alpha(t) and ln t by ln alpha(t), truncated at `order`.

    With b = alpha'(0) > 0 write alpha(t) = b*t*(1 + u(t)); then
    ln alpha(t) = ln t + ln b + L(t) where L = ln(1 + u) expands as the
    usual log series (finite here because u has zero constant term).  The
    shift ln b is the only inexact value and enters log-bearing terms only.
    """
    b = alpha.slope
    if b <= 0:
        raise InvalidBoundaryError(f"alpha'(0) = {b} must be positive")
    if alpha.poly.coeffs == (Fraction(0), Fraction(1)):
        return truncate(p, order)  # identity substitution, keep exactness

    # u(t) = alpha(t)/(b t) - 1, exact polynomial with zero constant term
    u = Polynomial.of([c / b for c in alpha.poly.coeffs[2:]])
    u = Polynomial(tuple([Fraction(0), *u.coeffs]))
    ell = Polynomial(())  # log series of ln(1+u) truncated at `order`
    if not u.is_zero:
        u_pow = Polynomial((Fraction(1),))
        for m in range(1, order + 1):
            u_pow = _poly_truncate(u_pow * u, order)
            ell = ell + u_pow * Fraction((-1) ** (m + 1), m)

    alpha_pow = Polynomial((Fraction(1),))  # alpha(t)^j, truncated
    log_b = math.log(b) if b != 1 else Fraction(0)
    out = LogPowerPolynomial.zero(order)
    by_power: dict[int, list] = {}
    for (j, k), c in p.terms.items():
        by_power.setdefault(j, []).append((k, c))
    # z + ln b + L(t) as a log-power value; powers built incrementally
    z_shift = add(
        LogPowerPolynomial({(0, 1): Fraction(1)}, order),
        add(
            LogPowerPolynomial.constant(log_b, order) if log_b != 0 else LogPowerPolynomial.zero(order),
            LogPowerPolynomial.from_polynomial(ell, order),
        ),
    )
    max_k = max((k for _, k in p.terms), default=0)
    z_powers = [LogPowerPolynomial.constant(Fraction(1), order)]
    for _ in range(max_k):
        z_powers.append(multiply(z_powers[-1], z_shift))

    current_j = 0
    for j in sorted(by_power):
        while current_j < j:
            alpha_pow = _poly_truncate(alpha_pow * alpha.poly, order)
            current_j += 1
        base = LogPowerPolynomial.from_polynomial(alpha_pow, order)
        for k, c in by_power[j]:
            out = add(out, scale(multiply(base, z_powers[k]), c))
    return out


def _poly_truncate(p: Polynomial, order: int) -> Polynomial:
    return Polynomial(tuple(p.coeffs[: order + 1]))


def evaluate(p: LogPowerPolynomial, t):
    """Numeric value at t > 0 (float or mpf, following the type of t)."""
    if t <= 0:
        raise DomainError(f"log-power form defined for t > 0, got {t}")
    if isinstance(t, (int, Fraction)):
        t = float(t)
    z = log_of(t)
    total = t * 0
    for (j, k), c in p.terms.items():
        if hasattr(c, "bind"):
            raise TypeError("bind free parameters before numeric evaluation")
        total = total + coerce(c, total) * t**j * z**k
    return total


def reciprocal_coeffs(coeffs: Sequence[Fraction], order: int) -> list[Fraction]:
    """Power-series reciprocal of a polynomial with nonzero constant term."""
    if not coeffs or coeffs[0] == 0:
        raise SingularDiagonalError("cannot invert a series with zero constant term")
    c0 = coeffs[0]
    out = [Fraction(1) / c0]
    for m in range(1, order + 1):
        acc = Fraction(0)
        for i in range(1, min(m, len(coeffs) - 1) + 1):
            acc += coeffs[i] * out[m - i]
        out.append(-acc / c0)
    return out
