"""Log-power asymptotics of the regular part near t = 0.

The regular part of the generalized solution satisfies the differentiated
(collocation) form

    F(x)(t) = g(t),
    F(x) = K_n(t,t) x(t)
         + sum_i alpha_i'(t) (K_i - K_{i+1})(t, alpha_i(t)) x(alpha_i(t))
         + sum_i int_{alpha_{i-1}(t)}^{alpha_i(t)} dK_i/dt (t,s) x(s) ds,

with g the exact driving polynomial.  Substituting the ansatz
x ~ sum_j x_j(ln t) t^j and matching powers of t turns each order into a
linear difference equation

    W0 p(z) + sum_i w_i p(z + a_i) = rhs(z),
    W0 = K_n(0,0),  w_i = b_i^(1+j) dK_i,  a_i = ln b_i,

whose solvability is governed by the characteristic value B(j) and its
j-derivatives.  At a root of multiplicity m the particular solution gains
m polynomial degrees in z = ln t and exactly m fresh free constants; the
constants ride through all later orders as affine coefficients.

Everything here is exact rational arithmetic except the shifts a_i = ln b_i,
which are floats and only contaminate log-bearing terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from . import logpower as lp
from .characteristic import CharacteristicReport, find_integer_roots
from .errors import (
    InternalConsistencyError,
    MissingParameterError,
    MultiplicityMismatchError,
    ParameterMismatchError,
)
from .logpower import LogPowerPolynomial
from .model import (
    Polynomial,
    ProblemSpec,
    driving_polynomial,
    kernel_time_derivative,
)

_MULT_TOL = 1e-9


class AffineValue:
    """Scalar plus a linear combination of named free parameters."""

    __slots__ = ("const", "linear")

    def __init__(self, const=Fraction(0), linear: Mapping[str, object] | None = None):
        self.const = const
        items = tuple(sorted((n, c) for n, c in (linear or {}).items() if c != 0))
        self.linear = items

    @classmethod
    def of(cls, value) -> "AffineValue":
        return value if isinstance(value, AffineValue) else cls(value)

    @classmethod
    def parameter(cls, name: str) -> "AffineValue":
        return cls(Fraction(0), {name: Fraction(1)})

    @property
    def is_numeric(self) -> bool:
        return not self.linear

    def _linear_dict(self) -> dict:
        return dict(self.linear)

    def __eq__(self, other) -> bool:
        if isinstance(other, AffineValue):
            return self.const == other.const and self.linear == other.linear
        return not self.linear and self.const == other

    def __hash__(self):
        return hash((self.const, self.linear))

    def __repr__(self) -> str:
        if self.is_numeric:
            return f"AffineValue({self.const})"
        parts = " + ".join(f"{c}*{n}" for n, c in self.linear)
        return f"AffineValue({self.const} + {parts})"

    def __add__(self, other):
        other = AffineValue.of(other)
        lin = self._linear_dict()
        for n, c in other.linear:
            lin[n] = lin.get(n, Fraction(0)) + c
        return AffineValue(self.const + other.const, lin)

    __radd__ = __add__

    def __neg__(self):
        return AffineValue(-self.const, {n: -c for n, c in self.linear})

    def __sub__(self, other):
        return self + (-AffineValue.of(other))

    def __rsub__(self, other):
        return AffineValue.of(other) + (-self)

    def __mul__(self, other):
        if isinstance(other, AffineValue):
            if other.is_numeric:
                other = other.const
            elif self.is_numeric:
                return other * self.const
            else:
                raise TypeError("product of two parameter-bearing affine values")
        return AffineValue(self.const * other, {n: c * other for n, c in self.linear})

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        if isinstance(scalar, AffineValue):
            if not scalar.is_numeric:
                raise TypeError("division by a parameter-bearing affine value")
            scalar = scalar.const
        return AffineValue(self.const / scalar, {n: c / scalar for n, c in self.linear})

    def bind(self, params: Mapping[str, float]):
        missing = [n for n, _ in self.linear if n not in params]
        if missing:
            raise MissingParameterError(f"unbound free parameters: {missing}")
        total = self.const
        for n, c in self.linear:
            total = total + c * params[n]
        return total


class ZPolynomial:
    """Polynomial in z = ln t with AffineValue coefficients."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence):
        values = [AffineValue.of(c) for c in coeffs]
        while values and values[-1] == 0:
            values.pop()
        self.coeffs = tuple(values)

    @classmethod
    def zero(cls) -> "ZPolynomial":
        return cls(())

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    def coefficient(self, k: int) -> AffineValue:
        return self.coeffs[k] if k < len(self.coeffs) else AffineValue(Fraction(0))

    def __eq__(self, other) -> bool:
        return isinstance(other, ZPolynomial) and self.coeffs == other.coeffs

    def __repr__(self) -> str:
        return f"ZPolynomial({[repr(c) for c in self.coeffs]})"

    def __add__(self, other: "ZPolynomial") -> "ZPolynomial":
        n = max(len(self.coeffs), len(other.coeffs))
        return ZPolynomial(
            [self.coefficient(k) + other.coefficient(k) for k in range(n)]
        )

    def __neg__(self) -> "ZPolynomial":
        return ZPolynomial([-c for c in self.coeffs])

    def __sub__(self, other: "ZPolynomial") -> "ZPolynomial":
        return self + (-other)

    def scale(self, factor) -> "ZPolynomial":
        return ZPolynomial([c * factor for c in self.coeffs])

    def shift(self, a) -> "ZPolynomial":
        """p(z + a) by binomial expansion."""
        out = [AffineValue(Fraction(0)) for _ in self.coeffs]
        for r, c in enumerate(self.coeffs):
            power = 1  # a^(r-l), walking l downward from r
            for l in range(r, -1, -1):
                out[l] = out[l] + c * (math.comb(r, l) * power)
                power = power * a
        return ZPolynomial(out)

    def bind(self, params: Mapping[str, float]) -> list:
        return [c.bind(params) for c in self.coeffs]

    def max_abs(self) -> float:
        """Magnitude of the numeric content (consts and parameter weights)."""
        out = 0.0
        for c in self.coeffs:
            out = max(out, abs(float(c.const)), *(abs(float(w)) for _, w in c.linear), 0.0)
        return out


def apply_difference_operator(
    constant_weight, shift_weights: Sequence[tuple], p: ZPolynomial
) -> ZPolynomial:
    """L[p](z) = W0 p(z) + sum_i w_i p(z + a_i)."""
    out = p.scale(constant_weight)
    for w, a in shift_weights:
        out = out + p.shift(a).scale(w)
    return out


def _char_ladder(constant_weight, shift_weights, up_to: int) -> list:
    """[B, B', B'', ...] of the operator: B^(k) = sum_i w_i a_i^k (k>=1)."""
    ladder = [constant_weight + sum((w for w, _ in shift_weights), Fraction(0))]
    for k in range(1, up_to + 1):
        ladder.append(sum((w * a**k for w, a in shift_weights), 0.0))
    return ladder


def solve_difference_equation(
    constant_weight,
    shift_weights: Sequence[tuple],
    rhs: ZPolynomial,
    root_multiplicity: int,
    fresh_names: Sequence[str] = (),
) -> ZPolynomial:
    """Solve L[p] = rhs when the operator's characteristic value has a root
    of the given multiplicity m at this order.

    Writing L[z^r] = sum_l C(r,l) B^(r-l) z^l, the system is upper
    triangular: with B = ... = B^(m-1) = 0 and B^(m) != 0 the coefficients
    of z^m..z^(d+m) back-substitute from the top and the coefficients of
    z^0..z^(m-1) stay free -- they become the fresh parameters.
    """
    m = root_multiplicity
    if m < 0:
        raise ValueError("multiplicity must be >= 0")
    if len(fresh_names) not in (0, m):
        raise ValueError("need exactly one fresh parameter name per multiplicity")
    names = list(fresh_names) or [f"_free{i + 1}" for i in range(m)]
    d = rhs.degree
    ladder = _char_ladder(constant_weight, shift_weights, m + max(d, 0))
    scale = max(
        1.0, abs(float(constant_weight)), *(abs(float(w)) for w, _ in shift_weights), 0.0
    )
    for k in range(m):
        if abs(float(ladder[k])) > _MULT_TOL * scale:
            raise MultiplicityMismatchError(
                f"declared multiplicity {m} but B^({k}) = {float(ladder[k]):.3e} != 0"
            )
    if abs(float(ladder[m])) <= _MULT_TOL * scale:
        raise MultiplicityMismatchError(
            f"declared multiplicity {m} but B^({m}) = {float(ladder[m]):.3e} ~ 0"
        )

    degree = d + m
    coeffs: list = [AffineValue(Fraction(0))] * (degree + 1) if degree >= 0 else []
    for r in range(m):
        coeffs[r] = AffineValue.parameter(names[r])
    for l in range(d, -1, -1):
        acc = AffineValue.of(rhs.coefficient(l))
        for r in range(l + m + 1, degree + 1):
            acc = acc - coeffs[r] * (math.comb(r, l) * ladder[r - l])
        coeffs[l + m] = acc / (math.comb(l + m, l) * ladder[m])
    return ZPolynomial(coeffs)


# ---------------------------------------------------------------------------
# symbolic application of the collocation operator


def operator_series(
    spec: ProblemSpec, xhat: LogPowerPolynomial, order: int
) -> LogPowerPolynomial:
    """F(xhat) expanded in log-powers of t, exact through t^order.

    Boundary substitutions use the exact truncated log series; integral
    terms use the term-wise antiderivative identity and are evaluated
    between the sector boundaries (the lower limit 0 contributes nothing
    because every antiderivative term carries a positive power of s).
    """
    x = lp.truncate(xhat, order)
    diag = spec.kernels[-1].diagonal()
    out = lp.multiply(lp.LogPowerPolynomial.from_polynomial(diag, order), x)

    for i in range(1, spec.n):
        boundary = spec.boundaries[i - 1]
        weight = boundary.derivative() * spec.kernel_jump(i).at_s(boundary.poly)
        if weight.is_zero:
            continue
        shifted = lp.substitute_boundary(x, boundary, order)
        out = lp.add(
            out,
            lp.multiply(lp.LogPowerPolynomial.from_polynomial(weight, order), shifted),
        )

    derivs = kernel_time_derivative(spec)
    for i in range(1, spec.n + 1):
        piece = derivs[i - 1]
        if piece.is_zero:
            continue
        for nu, s_poly in piece.grouped_by_t().items():
            if nu > order:
                continue
            target = order - nu
            integrand = lp.multiply(
                lp.LogPowerPolynomial.from_polynomial(s_poly, target), lp.truncate(x, target)
            )
            anti = lp.integrate_from_zero(integrand)
            if i <= spec.n - 1:
                upper = lp.substitute_boundary(anti, spec.boundaries[i - 1], target)
            else:
                upper = lp.truncate(anti, target)  # alpha_n(t) = t
            seg = upper
            if i >= 2:
                lower = lp.substitute_boundary(anti, spec.boundaries[i - 2], target)
                seg = lp.subtract(upper, lower)
            out = lp.add(out, lp.truncate(lp.shift_powers(seg, nu), order))
    return out


def residual_series(
    spec: ProblemSpec, xhat: LogPowerPolynomial, order: int
) -> LogPowerPolynomial:
    """F(xhat) - g as a log-power series, exact through t^order."""
    g = lp.LogPowerPolynomial.from_polynomial(driving_polynomial(spec), order)
    return lp.subtract(operator_series(spec, xhat, order), g)


def order_zero_forcing(spec: ProblemSpec) -> Fraction:
    """g(0) = f'(0) - (f(0)/K_1(0,0)) dK_1(t,0)/dt at 0, exact."""
    return driving_polynomial(spec).constant


def partial_to_logpower(
    coefficients: Sequence[ZPolynomial], order: int
) -> LogPowerPolynomial:
    terms: dict[tuple[int, int], object] = {}
    for j, zp in enumerate(coefficients):
        for k, c in enumerate(zp.coeffs):
            if not c == 0:
                terms[(j, k)] = c
    return LogPowerPolynomial(terms, order)


def forcing_at_order(
    spec: ProblemSpec, partial: Sequence[ZPolynomial], j: int
) -> ZPolynomial:
    """Forcing P_j so that the order-j equation reads L_j[x_j] + P_j = 0.

    P_j is the t^j coefficient of F(partial sum) - g; contributions of the
    yet-unknown x_j enter exactly as L_j[x_j], everything older lands here.
    """
    if len(partial) < j:
        raise InternalConsistencyError("orders below j must be computed first")
    xhat = partial_to_logpower(partial[:j], order=j)
    res = residual_series(spec, xhat, j)
    slice_ = res.z_slice(j)
    if not slice_:
        return ZPolynomial.zero()
    coeffs = [slice_.get(k, Fraction(0)) for k in range(max(slice_) + 1)]
    return ZPolynomial(coeffs)


def shift_weights_at_order(spec: ProblemSpec, j: int) -> list[tuple]:
    """(w_i, a_i) pairs of the order-j difference operator."""
    out = []
    for i in range(1, spec.n):
        b = spec.boundaries[i - 1].slope
        dk = spec.kernel_jump(i).at_origin()
        if dk != 0:
            out.append((b ** (1 + j) * dk, math.log(b)))
    return out


@dataclass(frozen=True)
class AsymptoticSolution:
    """Coefficients x_0..x_N of the expansion plus the free parameters."""

    order: int
    coefficients: tuple[ZPolynomial, ...]
    free_parameters: tuple[str, ...]
    characteristic: CharacteristicReport

    def to_logpower(self, order: int | None = None) -> LogPowerPolynomial:
        return partial_to_logpower(self.coefficients, order if order is not None else self.order)

    def bind(self, params: Mapping[str, float]) -> LogPowerPolynomial:
        """Numeric log-power form; every declared parameter must be bound."""
        unknown = set(params) - set(self.free_parameters)
        if unknown:
            raise ParameterMismatchError(f"unknown parameters: {sorted(unknown)}")
        missing = set(self.free_parameters) - set(params)
        if missing:
            raise MissingParameterError(f"unbound free parameters: {sorted(missing)}")
        terms = {}
        for key, c in self.to_logpower().terms.items():
            value = AffineValue.of(c).bind(params)
            if value != 0:
                terms[key] = value
        return LogPowerPolynomial(terms, self.order)

    def to_json_dict(self) -> dict:
        return {
            "order": self.order,
            "free_parameters": list(self.free_parameters),
            "terms": [
                {
                    "t_power": j,
                    "log_power": k,
                    "value": float(AffineValue.of(c).const),
                    "exact": _exact_str(AffineValue.of(c).const),
                    "parameters": {
                        n: float(w) for n, w in AffineValue.of(c).linear
                    },
                }
                for (j, k), c in sorted(self.to_logpower().terms.items())
            ],
            "characteristic": self.characteristic.to_json_dict(),
        }


def _exact_str(value) -> str | None:
    return str(value) if isinstance(value, (int, Fraction)) else None


def compute_asymptotics(
    spec: ProblemSpec,
    order: int,
    report: CharacteristicReport | None = None,
) -> AsymptoticSolution:
    """Build the expansion order by order, solving each difference equation
    with the multiplicity read off the characteristic report (zero at
    regular points)."""
    if order < 0:
        raise ValueError("order must be >= 0")
    if report is None or report.scan_bound < order:
        report = find_integer_roots(spec, order)
    w0 = spec.kernels[-1].at_origin()
    coefficients: list[ZPolynomial] = []
    params: list[str] = []
    degree_budget = 0
    for j in range(order + 1):
        m = report.multiplicity(j)
        degree_budget += m
        forcing = forcing_at_order(spec, coefficients, j)
        fresh = [f"c{len(params) + r + 1}" for r in range(m)]
        xj = solve_difference_equation(
            w0, shift_weights_at_order(spec, j), -forcing, m, fresh
        )
        if xj.degree > degree_budget:
            raise InternalConsistencyError(
                f"order {j}: log-degree {xj.degree} exceeds the multiplicity "
                f"budget {degree_budget}"
            )
        coefficients.append(xj)
        params.extend(fresh)
    return AsymptoticSolution(
        order=order,
        coefficients=tuple(coefficients),
        free_parameters=tuple(params),
        characteristic=report,
    )


def eval_asymptotic(asym: AsymptoticSolution, params: Mapping[str, float], t) -> float:
    """Numeric value of the expansion at t > 0 with bound parameters."""
    return lp.evaluate(asym.bind(params), t)


# ---------------------------------------------------------------------------
# display


_DISPLAY_FLOOR = 1e-13


def pretty_expansion(asym: AsymptoticSolution) -> str:
    """Human-readable form, e.g. 'c1 - 1.4426950408889634*ln(t)'.

    Cancellation dust (relative magnitude below 1e-13) is suppressed for
    display only; serialized forms keep every stored term.
    """
    terms = asym.to_logpower().terms
    scale = max(
        (abs(float(AffineValue.of(c).const)) for c in terms.values()), default=0.0
    )
    scale = max(scale, 1.0)
    parts: list[str] = []
    for (j, k), c in sorted(terms.items()):
        av = AffineValue.of(c)
        basis = []
        if j:
            basis.append(f"t^{j}" if j > 1 else "t")
        if k:
            basis.append(f"ln(t)^{k}" if k > 1 else "ln(t)")
        base = "*".join(basis)
        if av.linear:
            coeff = _format_affine(av, base)
            if coeff:
                parts.append(coeff)
            continue
        if abs(float(av.const)) < _DISPLAY_FLOOR * scale:
            continue
        parts.append(_join_coeff(_format_scalar(av.const), base))
    if not parts:
        return "0"
    out = parts[0]
    for p in parts[1:]:
        out += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
    return out


def _format_scalar(c) -> str:
    if isinstance(c, Fraction):
        return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"
    return repr(float(c))


def _join_coeff(coeff: str, base: str) -> str:
    if not base:
        return coeff
    if coeff == "1":
        return base
    if coeff == "-1":
        return f"-{base}"
    return f"{coeff}*{base}"


def _format_affine(av: AffineValue, base: str) -> str:
    inner: list[str] = []
    if av.const != 0:
        inner.append(_format_scalar(av.const))
    for name, w in av.linear:
        piece = name if w == 1 else f"{_format_scalar(w)}*{name}"
        inner.append(piece if not inner else f"+ {piece}")
    joined = " ".join(inner).replace("+ -", "- ")
    if not base:
        return joined
    return f"({joined})*{base}" if len(inner) > 1 else _join_coeff(joined, base)
