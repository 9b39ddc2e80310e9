"""Problem model: piecewise polynomial kernel data and solvability constants.

A problem instance is the first-kind Volterra equation

    integral_0^t K(t,s) u(s) ds = f(t),    0 < t <= T,

whose kernel equals the polynomial piece K_i(t,s) in the sector between the
curves s = alpha_{i-1}(t) and s = alpha_i(t) (with alpha_0 = 0 and
alpha_n(t) = t).  Because f(0) != 0 the solution is generalized,
u = a*delta(t) + x(t), and the downstream modules need exact Taylor data;
all inputs are therefore restricted to polynomials with rational
coefficients, kept exact through parsing.

This module owns the input schema, hypothesis validation, kernel
evaluation, the functional weight

    A(t) = sum_i alpha_i'(t) * (K_i - K_{i+1})(t, alpha_i(t)) / K_n(t,t),

and the sampled contraction certificates (q, c, h, eps, attenuation data)
that the step solver and the correction solver consume.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from ._num import coerce, horner
from .errors import (
    DomainError,
    NoValidConstantsError,
    NotCoveredError,
    ProblemFormatError,
    SingularDiagonalError,
)

Number = Fraction | float | int


def _as_fraction(value, where: str) -> Fraction:
    """Exact coefficient parsing: ints, floats (exact binary value), 'p/q'."""
    if isinstance(value, bool):
        raise ProblemFormatError(f"{where}: boolean is not a coefficient")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ProblemFormatError(f"{where}: non-finite coefficient {value!r}")
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ProblemFormatError(
                f"{where}: cannot parse coefficient {value!r} as a fraction"
            ) from exc
    raise ProblemFormatError(f"{where}: unsupported coefficient {value!r}")


@dataclass(frozen=True)
class Polynomial:
    """Univariate polynomial, ascending rational coefficients, no trailing zeros."""

    coeffs: tuple[Fraction, ...]

    @classmethod
    def of(cls, values: Sequence, where: str = "polynomial") -> "Polynomial":
        coeffs = [_as_fraction(v, where) for v in values]
        while coeffs and coeffs[-1] == 0:
            coeffs.pop()
        return cls(tuple(coeffs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def constant(self) -> Fraction:
        return self.coeffs[0] if self.coeffs else Fraction(0)

    def __call__(self, t):
        return horner(self.coeffs, t)

    def derivative(self) -> "Polynomial":
        return Polynomial(tuple(j * c for j, c in enumerate(self.coeffs) if j >= 1))

    def __add__(self, other: "Polynomial") -> "Polynomial":
        n = max(len(self.coeffs), len(other.coeffs))
        out = [Fraction(0)] * n
        for j, c in enumerate(self.coeffs):
            out[j] += c
        for j, c in enumerate(other.coeffs):
            out[j] += c
        return Polynomial.of(out)

    def __neg__(self) -> "Polynomial":
        return Polynomial(tuple(-c for c in self.coeffs))

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __mul__(self, other) -> "Polynomial":
        if isinstance(other, (int, Fraction)):
            return Polynomial.of([c * other for c in self.coeffs])
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs))
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return Polynomial.of(out)

    __rmul__ = __mul__

    def pow(self, k: int) -> "Polynomial":
        out = Polynomial((Fraction(1),))
        for _ in range(k):
            out = out * self
        return out

    def compose(self, inner: "Polynomial") -> "Polynomial":
        """self(inner(t)), exact."""
        out = Polynomial(())
        for c in reversed(self.coeffs):
            out = out * inner + Polynomial.of([c])
        return out


@dataclass(frozen=True)
class BivariatePolynomial:
    """Polynomial in (t, s): sorted ((nu, mu), coeff) terms, no zeros stored."""

    terms: tuple[tuple[tuple[int, int], Fraction], ...]

    @classmethod
    def of(cls, entries, where: str = "kernel") -> "BivariatePolynomial":
        acc: dict[tuple[int, int], Fraction] = {}
        for entry in entries:
            try:
                nu, mu, value = entry
            except (TypeError, ValueError) as exc:
                raise ProblemFormatError(
                    f"{where}: term must be [nu, mu, coeff], got {entry!r}"
                ) from exc
            if not isinstance(nu, int) or not isinstance(mu, int) or nu < 0 or mu < 0:
                raise ProblemFormatError(
                    f"{where}: exponents must be non-negative integers, got {entry!r}"
                )
            acc[(nu, mu)] = acc.get((nu, mu), Fraction(0)) + _as_fraction(value, where)
        items = tuple(sorted((k, v) for k, v in acc.items() if v != 0))
        return cls(items)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def __call__(self, t, s):
        exact = isinstance(t, (int, Fraction)) and isinstance(s, (int, Fraction))
        total = Fraction(0) if exact else t * 0
        for (nu, mu), c in self.terms:
            total = total + (c if exact else coerce(c, total)) * t**nu * s**mu
        return total

    def dt(self) -> "BivariatePolynomial":
        return BivariatePolynomial(
            tuple(((nu - 1, mu), nu * c) for (nu, mu), c in self.terms if nu >= 1)
        )

    def at_origin(self) -> Fraction:
        for key, c in self.terms:
            if key == (0, 0):
                return c
        return Fraction(0)

    def diagonal(self) -> Polynomial:
        """K(t, t) as a univariate polynomial."""
        deg = max((nu + mu for (nu, mu), _ in self.terms), default=0)
        out = [Fraction(0)] * (deg + 1)
        for (nu, mu), c in self.terms:
            out[nu + mu] += c
        return Polynomial.of(out)

    def at_s(self, s_poly: Polynomial) -> Polynomial:
        """K(t, s_poly(t)) as a univariate polynomial, exact composition."""
        out = Polynomial(())
        for (nu, mu), c in self.terms:
            mono = Polynomial.of([Fraction(0)] * nu + [c])
            out = out + mono * s_poly.pow(mu)
        return out

    def at_s_zero(self) -> Polynomial:
        out = [Fraction(0)] * (max((nu for (nu, mu), _ in self.terms if mu == 0), default=0) + 1)
        for (nu, mu), c in self.terms:
            if mu == 0:
                out[nu] += c
        return Polynomial.of(out)

    def grouped_by_t(self) -> dict[int, Polynomial]:
        """nu -> polynomial in s collecting the t^nu terms."""
        groups: dict[int, list] = {}
        for (nu, mu), c in self.terms:
            groups.setdefault(nu, []).append((mu, c))
        out = {}
        for nu, items in groups.items():
            deg = max(mu for mu, _ in items)
            coeffs = [Fraction(0)] * (deg + 1)
            for mu, c in items:
                coeffs[mu] += c
            out[nu] = Polynomial.of(coeffs)
        return out


@dataclass(frozen=True)
class BoundaryFunction:
    """Sector boundary s = alpha(t): polynomial with alpha(0) = 0."""

    poly: Polynomial

    def __post_init__(self):
        if self.poly.is_zero or self.poly.constant != 0:
            raise ProblemFormatError(
                "boundary must be a nonzero polynomial with zero constant term"
            )

    @classmethod
    def of(cls, coeffs_without_constant: Sequence, where: str = "boundary") -> "BoundaryFunction":
        return cls(Polynomial.of([0, *coeffs_without_constant], where))

    @property
    def slope(self) -> Fraction:
        """alpha'(0)."""
        return self.poly.coeffs[1] if len(self.poly.coeffs) > 1 else Fraction(0)

    def __call__(self, t):
        return self.poly(t)

    def derivative(self) -> Polynomial:
        return self.poly.derivative()

    @property
    def is_linear(self) -> bool:
        return self.poly.degree <= 1


@dataclass(frozen=True)
class ProblemSpec:
    """Parsed problem instance: horizon, boundaries, kernel pieces, RHS."""

    horizon: Fraction
    boundaries: tuple[BoundaryFunction, ...]
    kernels: tuple[BivariatePolynomial, ...]
    rhs: Polynomial

    def __post_init__(self):
        if self.horizon <= 0:
            raise ProblemFormatError("T must be positive")
        if len(self.kernels) != len(self.boundaries) + 1:
            raise ProblemFormatError(
                "piece count mismatch: need kernels.count == boundaries.count + 1, "
                f"got {len(self.kernels)} kernels and {len(self.boundaries)} boundaries"
            )

    @property
    def n(self) -> int:
        return len(self.kernels)

    def kernel_jump(self, i: int) -> BivariatePolynomial:
        """K_i - K_{i+1} for boundary index i (1-based)."""
        a, b = self.kernels[i - 1], self.kernels[i]
        acc: dict[tuple[int, int], Fraction] = dict(a.terms)
        for key, c in b.terms:
            acc[key] = acc.get(key, Fraction(0)) - c
        return BivariatePolynomial(tuple(sorted((k, v) for k, v in acc.items() if v != 0)))

    def to_document(self) -> dict:
        return {
            "T": _frac_json(self.horizon),
            "boundaries": [
                [_frac_json(c) for c in b.poly.coeffs[1:]] for b in self.boundaries
            ],
            "kernels": [
                {"terms": [[nu, mu, _frac_json(c)] for (nu, mu), c in k.terms]}
                for k in self.kernels
            ],
            "f": [_frac_json(c) for c in self.rhs.coeffs],
        }


def _frac_json(value: Fraction):
    if value.denominator == 1:
        return int(value)
    return f"{value.numerator}/{value.denominator}"


def problem_from_document(doc: Mapping) -> ProblemSpec:
    """Build a ProblemSpec from a decoded problem document (see README schema)."""
    if not isinstance(doc, Mapping):
        raise ProblemFormatError("problem document must be a JSON object")
    unknown = set(doc) - {"T", "boundaries", "kernels", "f"}
    if unknown:
        raise ProblemFormatError(f"unknown fields in problem document: {sorted(unknown)}")
    for name in ("T", "boundaries", "kernels", "f"):
        if name not in doc:
            raise ProblemFormatError(f"missing field {name!r}")
    horizon = _as_fraction(doc["T"], "T")
    if not isinstance(doc["boundaries"], Sequence) or isinstance(doc["boundaries"], (str, bytes)):
        raise ProblemFormatError("boundaries: expected a list of coefficient lists")
    boundaries = []
    for idx, coeffs in enumerate(doc["boundaries"], start=1):
        if not isinstance(coeffs, Sequence) or isinstance(coeffs, (str, bytes)):
            raise ProblemFormatError(f"boundaries[{idx}]: expected a coefficient list")
        boundaries.append(BoundaryFunction.of(coeffs, where=f"boundaries[{idx}]"))
    if not isinstance(doc["kernels"], Sequence) or isinstance(doc["kernels"], (str, bytes)):
        raise ProblemFormatError("kernels: expected a list of kernel objects")
    kernels = []
    for idx, entry in enumerate(doc["kernels"], start=1):
        if not isinstance(entry, Mapping) or set(entry) != {"terms"}:
            raise ProblemFormatError(f"kernels[{idx}]: expected an object with a 'terms' list")
        kernels.append(BivariatePolynomial.of(entry["terms"], where=f"kernels[{idx}]"))
    rhs = Polynomial.of(doc["f"], where="f")
    return ProblemSpec(horizon, tuple(boundaries), tuple(kernels), rhs)


def parse_problem(text: str) -> ProblemSpec:
    """Parse a problem-spec JSON document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"invalid JSON: {exc}") from exc
    return problem_from_document(doc)


def canonical_document_bytes(doc: Mapping) -> bytes:
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class ValidationCheck:
    name: str
    passed: bool
    witness: float | None = None
    detail: str = ""

    def to_json_dict(self) -> dict:
        out = {"name": self.name, "passed": self.passed}
        if self.witness is not None:
            out["witness"] = self.witness
        if self.detail:
            out["detail"] = self.detail
        return out


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple[ValidationCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> tuple[ValidationCheck, ...]:
        return tuple(c for c in self.checks if not c.passed)

    def to_json_dict(self) -> dict:
        return {"passed": self.passed, "checks": [c.to_json_dict() for c in self.checks]}


def validate(spec: ProblemSpec, grid_points: int = 256) -> ValidationReport:
    """Check the model hypotheses; failures become report entries, not faults."""
    checks: list[ValidationCheck] = []
    checks.append(
        ValidationCheck(
            "piece counts",
            len(spec.kernels) == len(spec.boundaries) + 1,
            detail=f"{len(spec.kernels)} kernels / {len(spec.boundaries)} boundaries",
        )
    )

    slopes = [b.slope for b in spec.boundaries]
    ordered = all(s > 0 for s in slopes) and all(
        slopes[i] < slopes[i + 1] for i in range(len(slopes) - 1)
    )
    checks.append(
        ValidationCheck(
            "0 < alpha_1'(0) < ... < alpha_{n-1}'(0)",
            ordered,
            detail=" < ".join(str(s) for s in slopes) if slopes else "no boundaries",
        )
    )
    last_below_one = (not slopes) or slopes[-1] < 1
    checks.append(
        ValidationCheck(
            "alpha_{n-1}'(0) < 1",
            last_below_one,
            detail=f"largest slope {slopes[-1]}" if slopes else "no boundaries",
        )
    )

    T = float(spec.horizon)
    grid = [T * k / grid_points for k in range(1, grid_points + 1)]
    witness = None
    grid_ok = True
    for t in grid:
        values = [b(t) for b in spec.boundaries]
        chain = [0.0, *values, t]
        if any(not (chain[i] < chain[i + 1]) for i in range(len(chain) - 1)):
            grid_ok = False
            witness = t
            break
    checks.append(
        ValidationCheck(
            "0 < alpha_1(t) < ... < alpha_{n-1}(t) < t on (0, T]",
            grid_ok,
            witness=witness,
        )
    )

    checks.append(
        ValidationCheck("f(0) != 0", spec.rhs.constant != 0, detail=f"f(0) = {spec.rhs.constant}")
    )
    k1 = spec.kernels[0].at_origin()
    checks.append(ValidationCheck("K_1(0,0) != 0", k1 != 0, detail=f"K_1(0,0) = {k1}"))

    diag = spec.kernels[-1].diagonal()
    kn0 = diag.constant
    witness = None
    diag_ok = kn0 != 0
    if diag_ok:
        for t in grid:
            if diag(t) == 0:
                diag_ok = False
                witness = t
                break
    checks.append(
        ValidationCheck("K_n(t,t) != 0 on [0, T]", diag_ok, witness=witness, detail=f"K_n(0,0) = {kn0}")
    )
    return ValidationReport(tuple(checks))


# ---------------------------------------------------------------------------
# kernel evaluation


def kernel_value(spec: ProblemSpec, t, s):
    """K(t, s) with ties on a boundary curve resolved to the lower-indexed piece."""
    if t <= 0 or t > spec.horizon or s < 0 or s > t:
        raise DomainError(f"(t, s) = ({t}, {s}) outside the kernel region")
    for i, boundary in enumerate(spec.boundaries):
        if s <= boundary(t):
            return spec.kernels[i](t, s)
    return spec.kernels[-1](t, s)


def kernel_time_derivative(spec: ProblemSpec) -> tuple[BivariatePolynomial, ...]:
    """Exact piecewise d/dt of the kernel."""
    return tuple(k.dt() for k in spec.kernels)


def functional_weight(spec: ProblemSpec, t):
    """Signed weight of the functional part:

    sum_i alpha_i'(t) * (K_i - K_{i+1})(t, alpha_i(t)) / K_n(t,t).

    Condition (A) constrains its absolute value at t = 0.  Exact for
    rational t, float otherwise.
    """
    exact = isinstance(t, (int, Fraction))
    diag = spec.kernels[-1].diagonal()(t)
    if diag == 0:
        raise SingularDiagonalError(f"K_n(t,t) = 0 at t = {t}")
    total = Fraction(0) if exact else 0.0
    for i in range(1, spec.n):
        boundary = spec.boundaries[i - 1]
        a = boundary(t)
        jump = spec.kernel_jump(i)(t, a)
        total = total + boundary.derivative()(t) * jump
    return total / diag


def delta_amplitude(spec: ProblemSpec) -> Fraction:
    """Exact amplitude of the delta part: f(0) / K_1(0,0)."""
    k1 = spec.kernels[0].at_origin()
    if k1 == 0:
        raise NotCoveredError("K_1(0,0) = 0: the singular part is not determined")
    return spec.rhs.constant / k1


def driving_polynomial(spec: ProblemSpec) -> Polynomial:
    """Right side of the differentiated equation for the regular part:

    g(t) = f'(t) - (f(0)/K_1(0,0)) * dK_1(t,0)/dt,  exact.
    """
    a = delta_amplitude(spec)
    return spec.rhs.derivative() - a * spec.kernels[0].dt().at_s_zero()


# ---------------------------------------------------------------------------
# solver constants (conditions (A) and (D))


@dataclass(frozen=True)
class SolverConstants:
    """Sampled contraction certificates.

    The step-method fields (q, h1, h, eps) are None when the first-kind
    route is not certified at target_q; the attenuation fields (eps_bound,
    atten_order, atten_horizon, q_atten) are None when no horizon prefix
    admits the damped contraction.
    """

    target_q: float
    grid_points: int
    weight_at_zero: float
    c: float
    q: float | None
    h1: float | None
    h: float | None
    eps: float | None
    eps_bound: float | None
    atten_order: int | None
    atten_horizon: float | None
    q_atten: float | None

    @property
    def theorem1_ok(self) -> bool:
        return self.h is not None and self.eps is not None

    @property
    def attenuation_ok(self) -> bool:
        return self.atten_order is not None

    def to_json_dict(self) -> dict:
        return {
            "target_q": self.target_q,
            "grid_points": self.grid_points,
            "weight_at_zero": self.weight_at_zero,
            "c": self.c,
            "q": self.q,
            "h1": self.h1,
            "h": self.h,
            "eps": self.eps,
            "eps_bound": self.eps_bound,
            "Nstar": self.atten_order,
            "attenuation_horizon": self.atten_horizon,
            "q_atten": self.q_atten,
            "step_method_ok": self.theorem1_ok,
            "attenuation_ok": self.attenuation_ok,
        }


_CERT_SLACK = 1e-6  # relative inflation of sampled suprema
_ATTEN_ORDER_CAP = 200


def estimate_constants(
    spec: ProblemSpec, target_q: float = 0.5, grid_points: int = 2048
) -> SolverConstants:
    """Estimate (q, c, h, eps) and the attenuation data by grid sampling.

    Sampled suprema are inflated by a small relative slack so they remain
    valid certificates under modest grid refinement.  Raises
    NoValidConstantsError when neither route is certified.
    """
    if not 0 < target_q < 0.999:
        raise ValueError("target_q must lie in (0, 0.999)")
    T = float(spec.horizon)
    G = grid_points
    grid = [T * k / G for k in range(1, G + 1)]

    a0 = abs(float(functional_weight(spec, Fraction(0))))
    a_vals = [abs(functional_weight(spec, t)) for t in grid]
    sup_a_prefix = []
    running = a0
    for v in a_vals:
        running = max(running, v)
        sup_a_prefix.append(running)

    # c = sup |K_n(t,t)^-1 * dK/dt(t,s)| over the triangle, sampled
    derivs = kernel_time_derivative(spec)
    diag = spec.kernels[-1].diagonal()
    c_raw = 0.0
    if any(not d.is_zero for d in derivs):
        ct_points = min(G, 96)
        for k in range(1, ct_points + 1):
            t = T * k / ct_points
            kn = diag(t)
            cuts = [0.0, *[b(t) for b in spec.boundaries], t]
            for i in range(spec.n):
                piece = derivs[i]
                if piece.is_zero:
                    continue
                lo, hi = cuts[i], cuts[i + 1]
                for m in range(17):
                    s = lo + (hi - lo) * m / 16
                    c_raw = max(c_raw, abs(piece(t, s) / kn))
    c = c_raw * (1.0 + _CERT_SLACK) if c_raw else 0.0

    # step-method certificates
    q = h1 = h = eps = None
    if a0 <= target_q:
        idx = -1
        for k, sup in enumerate(sup_a_prefix):
            if sup <= target_q:
                idx = k
            else:
                break
        if idx >= 0:
            h1 = grid[idx]
            q = sup_a_prefix[idx] + _CERT_SLACK * (1.0 + sup_a_prefix[idx])
            cap = (1.0 - q) / c if c > 0 else math.inf
            h = 0.9 * min(h1, cap)
    if h1 is not None:
        slope_sup = 0.0
        for b in spec.boundaries:
            dp = b.derivative()
            slope_sup = max(slope_sup, abs(float(dp(Fraction(0)))))
            for t in grid[:: max(1, G // 256)]:
                slope_sup = max(slope_sup, abs(dp(t)))
        if spec.boundaries and slope_sup >= 1.0:
            eps = None
            h = None  # step extension not certified beyond the first interval
        elif not spec.boundaries:
            eps = 1.0
        else:
            eps = min(1.0, 0.95 * (1.0 / slope_sup - 1.0))

    # attenuation certificates: largest grid prefix with eps_bound < 1 and a
    # sane exponent
    eps_bound = atten_order = atten_horizon = q_atten = None
    slope0 = max((abs(float(b.slope)) for b in spec.boundaries), default=0.0)
    e_prefix = []
    running_e = slope0
    for t in grid:
        for b in spec.boundaries:
            running_e = max(running_e, abs(b(t) / t), abs(b.derivative()(t)))
        e_prefix.append(running_e)
    for k in range(G - 1, -1, -1):
        e = e_prefix[k]
        if e >= 1.0 - 1e-9:
            continue
        sup_a = sup_a_prefix[k]
        order = 0
        feasible = True
        while sup_a * e**order >= target_q:
            order += 1
            if order > _ATTEN_ORDER_CAP:
                feasible = False
                break
            if e == 0.0:
                break
        if not feasible:
            continue
        eps_bound = e
        atten_order = order
        atten_horizon = grid[k]
        raw = sup_a * e**order
        q_atten = raw + _CERT_SLACK * (1.0 + raw)
        break

    if h is None and atten_order is None:
        raise NoValidConstantsError(
            f"|A(0)| = {a0:.6g} and no horizon prefix admits attenuation: "
            "neither contraction route is certified"
        )
    return SolverConstants(
        target_q=target_q,
        grid_points=G,
        weight_at_zero=a0,
        c=c,
        q=q,
        h1=h1,
        h=h,
        eps=eps,
        eps_bound=eps_bound,
        atten_order=atten_order,
        atten_horizon=atten_horizon,
        q_atten=q_atten,
    )
