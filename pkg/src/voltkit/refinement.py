"""Correction of a truncated expansion into a full regular part.

Given an expansion xhat whose collocation residual is o(t^N) with N at
least the attenuation order N*, the substitution x = xhat + t^N* v(t)
yields a linear equation for v,

    v + (M v) + (K v) = gamma(t),

where M and K are the functional and integral operators damped by
(alpha_i(t)/t)^N* and (s/t)^N*, and

    gamma(t) = (g(t) - F(xhat)(t)) / (t^N* K_n(t,t)).

Under the attenuation certificate the damped functional operator has norm
q < 1, and an exponential weight e^(-l t) tames the integral operator, so
plain successive approximations converge in the weighted sup norm.

gamma is delicate near 0: the numerator is o(t^N) and the denominator
carries t^N*, so float cancellation would be amplified without bound.
Below a switch point gamma is therefore evaluated from the exact log-power
residual series (terms at orders <= N must vanish and are checked, then
dropped as cancellation dust); above it the verifier-style quadrature path
takes over.  Both paths agree at the switch to quadrature accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Mapping, Sequence

from . import logpower as lp
from .asymptotics import AsymptoticSolution, residual_series
from .errors import (
    ContractionFailureError,
    DomainError,
    InternalConsistencyError,
    NoValidConstantsError,
    WeightExhaustedError,
)
from .logpower import LogPowerPolynomial
from .model import (
    ProblemSpec,
    SolverConstants,
    delta_amplitude,
    driving_polynomial,
)
from .stepsolver import Mesh, MeshFunction, gauss_quadrature
from .verifier import residual_differentiated

DEFAULT_V_NODES = 257
DEFAULT_T_MIN = 1e-6
MAX_ITERATIONS = 200
_WEIGHT_CAP = 2**20


def singular_coefficient(spec: ProblemSpec) -> Fraction:
    """Exact delta amplitude f(0)/K_1(0,0)."""
    return delta_amplitude(spec)


class CorrectionForcing:
    """gamma(t) for the damped correction equation (hybrid evaluation)."""

    def __init__(
        self,
        spec: ProblemSpec,
        xhat: LogPowerPolynomial,
        atten_order: int,
        valid_order: int | None = None,
        switch: float = 0.05,
        extra_order: int = 6,
        tol: float = 1e-12,
    ):
        if valid_order is None:
            valid_order = xhat.order
        if valid_order < atten_order:
            raise InternalConsistencyError(
                f"expansion order {valid_order} below attenuation order {atten_order}"
            )
        self.spec = spec
        self.xhat = xhat
        self.atten_order = atten_order
        self.valid_order = valid_order
        self.switch = switch
        self.tol = tol
        series_order = valid_order + extra_order
        res = residual_series(spec, lp.truncate(xhat, series_order), series_order)
        g = driving_polynomial(spec)
        scale = max(
            1.0,
            max((abs(float(c)) for c in g.coeffs), default=0.0),
            max((abs(float(c)) for c in xhat.terms.values()), default=0.0),
        )
        numer: dict[tuple[int, int], object] = {}
        for (j, k), c in res.terms.items():
            if j <= valid_order:
                if abs(float(c)) > 1e-9 * scale:
                    raise InternalConsistencyError(
                        f"expansion residual has a surviving t^{j} ln^{k} term "
                        f"({float(c):.3e}): not o(t^{valid_order})"
                    )
                continue  # cancellation dust below the valid order
            numer[(j - atten_order, k)] = -c
        recip = lp.LogPowerPolynomial(
            {
                (j, 0): c
                for j, c in enumerate(
                    lp.reciprocal_coeffs(
                        spec.kernels[-1].diagonal().coeffs, series_order
                    )
                )
            },
            series_order,
        )
        self.symbolic = lp.multiply(
            lp.LogPowerPolynomial(numer, series_order), recip
        )
        self._diag = spec.kernels[-1].diagonal()
        self._xhat_eval = lambda s: lp.evaluate(xhat, s)

    def _quadrature_value(self, t: float) -> float:
        res = residual_differentiated(self.spec, self._xhat_eval, t, tol=self.tol)
        return -res / (t**self.atten_order * self._diag(t))

    def __call__(self, t: float) -> float:
        if t < 0:
            raise DomainError("gamma defined for t >= 0")
        if t == 0:
            return self.limit_at_zero()
        if t <= self.switch:
            return lp.evaluate(self.symbolic, t)
        return self._quadrature_value(t)

    def limit_at_zero(self, t0: float = 1e-3) -> float:
        """Richardson extrapolation of gamma(0+) over {t0, t0/2, t0/4}."""
        r1, r2, r3 = self(t0), self(t0 / 2), self(t0 / 4)
        e1 = 2 * r2 - r1
        e2 = 2 * r3 - r2
        return (4 * e2 - e1) / 3


def correction_forcing(
    spec: ProblemSpec,
    asym: AsymptoticSolution,
    params: Mapping[str, float],
    atten_order: int,
    t: float,
) -> float:
    """One-shot gamma(t) from a parametric expansion with bound parameters."""
    return CorrectionForcing(spec, asym.bind(params), atten_order)(t)


# ---------------------------------------------------------------------------
# damped operators


def _attenuated_functional(spec: ProblemSpec, v, t: float, atten_order: int) -> float:
    diag = spec.kernels[-1].diagonal()(t)
    total = 0.0
    for i in range(1, spec.n):
        boundary = spec.boundaries[i - 1]
        arg = boundary(t)
        jump = spec.kernel_jump(i)(t, arg)
        if jump == 0:
            continue
        total += boundary.derivative()(t) * (arg / t) ** atten_order * jump * v(arg)
    return total / diag


def _attenuated_integral(
    spec: ProblemSpec, v, t: float, atten_order: int, quad_order: int = 8
) -> float:
    from .stepsolver import _derivative_pieces  # shared exact derivative cache

    pieces = _derivative_pieces(spec)
    if all(p.is_zero for p in pieces):
        return 0.0
    diag = spec.kernels[-1].diagonal()(t)
    cuts = [0.0, *[float(b(t)) for b in spec.boundaries], t]
    total = 0.0
    for i in range(spec.n):
        piece = pieces[i]
        if piece.is_zero:
            continue
        lo, hi = cuts[i], cuts[i + 1]
        if hi <= lo:
            continue

        def integrand(s, piece=piece):
            return piece(t, s) * (s / t) ** atten_order * v(s)

        if i == 0:
            # dyadic descent: v is bounded, so the tail below the cutoff is
            # negligible once lo_panel / t is tiny
            panel_hi = hi
            while panel_hi > 1e-12 * t:
                panel_lo = panel_hi / 2
                total += gauss_quadrature(integrand, panel_lo, panel_hi, order=quad_order, panels=1)
                panel_hi = panel_lo
        else:
            total += gauss_quadrature(integrand, lo, hi, order=quad_order, panels=4)
    return total / diag


@dataclass(frozen=True)
class ContractionReport:
    weight: float
    q: float
    q1: float
    iterations: int
    changes: tuple[float, ...]
    max_v: float

    @property
    def ratios(self) -> tuple[float, ...]:
        out = []
        for prev, cur in zip(self.changes, self.changes[1:]):
            if prev > 1e-300:
                out.append(cur / prev)
        return tuple(out)

    def to_json_dict(self) -> dict:
        return {
            "weight": self.weight,
            "q": self.q,
            "q1": self.q1,
            "iterations": self.iterations,
            "ratios": list(self.ratios),
            "max_v": self.max_v,
        }


def solve_correction(
    spec: ProblemSpec,
    gamma: Callable[[float], float],
    atten_order: int,
    consts: SolverConstants,
    tol: float = 1e-10,
    node_count: int = DEFAULT_V_NODES,
    t_min: float = DEFAULT_T_MIN,
    quad_order: int = 8,
) -> tuple[MeshFunction, ContractionReport]:
    """Fixed point of v = -(M+K)v + gamma on a log-uniform mesh, converged
    in the weighted norm max e^(-l t) |v(t)| with l doubled until the
    damped pair is certified contractive."""
    if not consts.attenuation_ok:
        raise NoValidConstantsError("attenuation constants are not certified")
    horizon = consts.atten_horizon
    q = consts.q_atten
    weight = 0.0
    while True:
        q1 = consts.c * (horizon if weight == 0 else min(horizon, 1.0 / weight))
        if q + q1 < 0.999:
            break
        weight = 1.0 if weight == 0 else 2.0 * weight
        if weight > _WEIGHT_CAP:
            raise WeightExhaustedError(
                f"no weight up to {_WEIGHT_CAP} certifies the damped pair: "
                f"q = {q:.6g}, c = {consts.c:.6g}, horizon = {horizon:.6g}"
            )
    mesh = Mesh.log_uniform(t_min, horizon, node_count)
    gamma_values = [float(gamma(t)) for t in mesh.nodes]
    damping = [math.exp(-weight * t) for t in mesh.nodes]
    values = list(gamma_values)
    changes: list[float] = []
    for iteration in range(1, MAX_ITERATIONS + 1):
        fn = MeshFunction(mesh, values, clamp_left=True)
        new_values = [
            gv
            - _attenuated_functional(spec, fn, t, atten_order)
            - _attenuated_integral(spec, fn, t, atten_order, quad_order)
            for t, gv in zip(mesh.nodes, gamma_values)
        ]
        change = max(
            d * abs(a - b) for d, a, b in zip(damping, new_values, values)
        )
        changes.append(change)
        values = new_values
        if change <= tol:
            break
        if len(changes) >= 3 and changes[-1] > 10 * tol:
            if changes[-1] > changes[-2] * (1 + 1e-9) and changes[-2] > changes[-3] * (1 + 1e-9):
                raise ContractionFailureError(
                    "damped iteration stopped contracting "
                    f"(ratio {changes[-1] / changes[-2]:.3f})",
                    ratio=changes[-1] / changes[-2],
                )
    else:
        raise ContractionFailureError(
            f"no convergence within {MAX_ITERATIONS} damped iterations"
        )
    report = ContractionReport(
        weight=weight,
        q=q,
        q1=q1,
        iterations=len(changes),
        changes=tuple(changes),
        max_v=max(abs(v) for v in values),
    )
    return MeshFunction(mesh, values, clamp_left=True), report


# ---------------------------------------------------------------------------
# assembled generalized solution


class GeneralizedSolution:
    """Delta amplitude plus a composite regular part.

    The regular part evaluates as xhat(t) + t^N* v(t) at and above t_split
    and as xhat(t) alone below it (there the correction carries an
    O(t^N*) error bar); a step-method solution is the special case
    xhat = None, N* = 0, t_split = 0 with v holding the full mesh.
    """

    def __init__(
        self,
        a: Fraction,
        atten_order: int,
        t_split: float,
        horizon: float,
        parameters: Mapping[str, float],
        v: MeshFunction,
        xhat: LogPowerPolynomial | None,
        asymptotic: AsymptoticSolution | None,
        path: str,
    ):
        self.a = a
        self.atten_order = atten_order
        self.t_split = t_split
        self.horizon = horizon
        self.parameters = dict(parameters)
        self.v = v
        self.xhat = xhat
        self.asymptotic = asymptotic
        self.path = path

    @property
    def interior_joints(self) -> tuple[float, ...]:
        return tuple(self.v.mesh.boundaries[1:-1])

    def regular_value(self, t: float) -> float:
        if self.xhat is None:
            return self.v(t)
        if t <= 0:
            raise DomainError("regular part defined for t > 0")
        base = lp.evaluate(self.xhat, t)
        if t < self.t_split:
            return base
        return base + t**self.atten_order * self.v(t)

    def samples(self, ts: Sequence[float] | None = None) -> list[tuple[float, float]]:
        if ts is None:
            ts = self.v.nodes
        return [(float(t), self.regular_value(t)) for t in ts]

    def to_document(self, problem_sha256: str | None = None) -> dict:
        doc = {
            "format": "voltkit-solution-v1",
            "problem_sha256": problem_sha256,
            "a": float(self.a),
            "a_exact": f"{self.a.numerator}/{self.a.denominator}"
            if self.a.denominator != 1
            else str(self.a.numerator),
            "path": self.path,
            "Nstar": self.atten_order,
            "t_split": self.t_split,
            "horizon": self.horizon,
            "parameters": {k: float(v) for k, v in sorted(self.parameters.items())},
            "asymptotic": None
            if self.xhat is None
            else {
                "order": self.xhat.order,
                "terms": [
                    [j, k, float(c), _exact_or_none(c)]
                    for (j, k), c in sorted(self.xhat.terms.items())
                ],
            },
            "mesh": {
                "boundaries": list(self.v.mesh.boundaries),
                "nodes": list(self.v.mesh.nodes),
                "segments": [list(seg) for seg in self.v.mesh.segments],
                "log_axis": self.v.mesh.log_axis,
                "clamp_left": self.v.clamp_left,
            },
            "values": list(self.v.values),
            "samples": [[t, x] for t, x in self.samples()],
        }
        return doc

    @classmethod
    def from_document(cls, doc: Mapping) -> "GeneralizedSolution":
        if doc.get("format") != "voltkit-solution-v1":
            raise DomainError("not a voltkit solution document")
        mesh_doc = doc["mesh"]
        mesh = Mesh(
            boundaries=tuple(mesh_doc["boundaries"]),
            nodes=tuple(mesh_doc["nodes"]),
            segments=tuple(tuple(seg) for seg in mesh_doc["segments"]),
            log_axis=mesh_doc["log_axis"],
        )
        v = MeshFunction(mesh, doc["values"], clamp_left=mesh_doc["clamp_left"])
        xhat = None
        if doc["asymptotic"] is not None:
            terms = {}
            for j, k, value, exact in doc["asymptotic"]["terms"]:
                terms[(int(j), int(k))] = Fraction(exact) if exact else value
            xhat = LogPowerPolynomial(terms, int(doc["asymptotic"]["order"]))
        return cls(
            a=Fraction(doc["a_exact"]),
            atten_order=int(doc["Nstar"]),
            t_split=float(doc["t_split"]),
            horizon=float(doc["horizon"]),
            parameters=dict(doc["parameters"]),
            v=v,
            xhat=xhat,
            asymptotic=None,
            path=doc["path"],
        )


def _exact_or_none(c) -> str | None:
    if isinstance(c, (int, Fraction)):
        f = Fraction(c)
        return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"
    return None


def assemble(
    spec: ProblemSpec,
    asym: AsymptoticSolution,
    params: Mapping[str, float],
    v: MeshFunction,
    atten_order: int,
    path: str = "theorem-2",
) -> GeneralizedSolution:
    """Bind the parametric expansion and attach the correction mesh."""
    xhat = asym.bind(params)  # raises on unknown/missing parameters
    return GeneralizedSolution(
        a=delta_amplitude(spec),
        atten_order=atten_order,
        t_split=v.nodes[0],
        horizon=v.nodes[-1],
        parameters=params,
        v=v,
        xhat=xhat,
        asymptotic=asym,
        path=path,
    )


def from_mesh(spec: ProblemSpec, mesh_solution: MeshFunction) -> GeneralizedSolution:
    """Wrap a step-method regular part as a generalized solution."""
    return GeneralizedSolution(
        a=delta_amplitude(spec),
        atten_order=0,
        t_split=0.0,
        horizon=mesh_solution.nodes[-1],
        parameters={},
        v=mesh_solution,
        xhat=None,
        asymptotic=None,
        path="theorem-1",
    )
