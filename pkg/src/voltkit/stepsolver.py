"""Step-method solver for the regular part on [0, T].

The regular part satisfies the second-kind integral-functional equation

    x(t) + (A x)(t) + (K x)(t) = fbar(t),

with the functional operator A evaluating x at the perturbed arguments
alpha_i(t) < t and the integral operator K built from the exact kernel
time-derivative.  Successive approximations contract on a short first
interval [0, h] certified by the solver constants; beyond it the interval
is advanced in steps [(1+(m-1)eps)h, (1+m eps)h] small enough that every
perturbed argument falls into already-solved history, so each step is an
ordinary second-kind Volterra solve against frozen history.

Discretization: Chebyshev-Lobatto nodes per subinterval, piecewise-cubic
interpolation for history lookups, composite Gauss-Legendre quadrature for
the integral operator.  The shared endpoint node between consecutive
subintervals makes the stitched solution continuous by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    ContractionFailureError,
    DomainError,
    HistoryMissingError,
    NoValidConstantsError,
    SingularDiagonalError,
)
from .model import (
    ProblemSpec,
    SolverConstants,
    driving_polynomial,
    kernel_time_derivative,
)

DEFAULT_NODES = 17
DEFAULT_TOL = 1e-10
MAX_ITERATIONS = 200


# ---------------------------------------------------------------------------
# meshes


def chebyshev_nodes(a: float, b: float, g: int) -> list[float]:
    """Chebyshev-Lobatto points on [a, b], endpoints exact."""
    if g < 4:
        raise ValueError("need at least 4 nodes per subinterval")
    out = [a + (b - a) * 0.5 * (1.0 - math.cos(math.pi * i / (g - 1))) for i in range(g)]
    out[0], out[-1] = a, b
    return out


@dataclass(frozen=True)
class Mesh:
    """Node set split into segments; splines never cross a segment joint."""

    boundaries: tuple[float, ...]
    nodes: tuple[float, ...]
    segments: tuple[tuple[int, int], ...]  # inclusive node-index ranges
    log_axis: bool = False

    @classmethod
    def chebyshev(cls, boundaries, g: int = DEFAULT_NODES) -> "Mesh":
        nodes: list[float] = []
        segments = []
        for k in range(len(boundaries) - 1):
            seg = chebyshev_nodes(boundaries[k], boundaries[k + 1], g)
            start = len(nodes) - (1 if nodes else 0)
            if nodes:
                seg = seg[1:]  # shared endpoint
            nodes.extend(seg)
            segments.append((start, len(nodes) - 1))
        return cls(tuple(boundaries), tuple(nodes), tuple(segments))

    @classmethod
    def log_uniform(cls, t_min: float, t_max: float, count: int) -> "Mesh":
        if not 0 < t_min < t_max:
            raise ValueError("need 0 < t_min < t_max")
        zs = np.linspace(math.log(t_min), math.log(t_max), count)
        nodes = [float(math.exp(z)) for z in zs]
        nodes[0], nodes[-1] = t_min, t_max
        return cls((t_min, t_max), tuple(nodes), ((0, count - 1),), log_axis=True)


class MeshFunction:
    """Sampled function with per-segment cubic interpolation.

    Raises HistoryMissingError for queries beyond the right end (the
    step-ordering signal); `clamp_left` extends with the first value below
    the left end, which the correction solver uses for perturbed arguments
    falling under its smallest node.
    """

    def __init__(self, mesh: Mesh, values, clamp_left: bool = False):
        values = tuple(float(v) for v in values)
        if len(values) != len(mesh.nodes):
            raise ValueError("value count must match node count")
        if any(not math.isfinite(v) for v in values):
            raise ValueError("non-finite mesh values")
        self.mesh = mesh
        self.values = values
        self.clamp_left = clamp_left
        self._splines: list | None = None

    @property
    def nodes(self) -> tuple[float, ...]:
        return self.mesh.nodes

    @property
    def domain(self) -> tuple[float, float]:
        return self.mesh.nodes[0], self.mesh.nodes[-1]

    def with_values(self, values) -> "MeshFunction":
        return MeshFunction(self.mesh, values, self.clamp_left)

    def _axis(self, t: float) -> float:
        return math.log(t) if self.mesh.log_axis else t

    def _build(self):
        splines = []
        for i0, i1 in self.mesh.segments:
            xs = [self._axis(t) for t in self.mesh.nodes[i0 : i1 + 1]]
            ys = self.values[i0 : i1 + 1]
            if len(xs) >= 4:
                splines.append(CubicSpline(xs, ys))
            else:
                splines.append(np.polynomial.Polynomial.fit(xs, ys, len(xs) - 1))
        self._splines = splines

    def __call__(self, t: float) -> float:
        lo, hi = self.domain
        slack = 1e-12 * (1.0 + abs(hi))
        if t > hi + slack:
            raise HistoryMissingError(
                f"evaluation at t = {t} beyond solved history [{lo}, {hi}]"
            )
        if t < lo - slack:
            if self.clamp_left:
                return self.values[0]
            raise HistoryMissingError(
                f"evaluation at t = {t} below mesh start {lo}"
            )
        t = min(max(t, lo), hi)
        if self._splines is None:
            self._build()
        for k, (i0, i1) in enumerate(self.mesh.segments):
            if t <= self.mesh.nodes[i1] or k == len(self.mesh.segments) - 1:
                return float(self._splines[k](self._axis(t)))
        raise AssertionError("unreachable")


# ---------------------------------------------------------------------------
# quadrature


@lru_cache(maxsize=32)
def _gauss_rule(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return tuple(x.tolist()), tuple(w.tolist())


def gauss_quadrature(f, a: float, b: float, order: int = 8, panels: int | None = None) -> float:
    """Composite Gauss-Legendre rule; exact for polynomials of degree < 2*order."""
    if a > b:
        raise DomainError(f"integration bounds reversed: [{a}, {b}]")
    if a == b:
        return 0.0
    if panels is None:
        panels = max(1, math.ceil((b - a) * 2.0))
    xs, ws = _gauss_rule(order)
    total = 0.0
    width = (b - a) / panels
    for p in range(panels):
        lo = a + p * width
        mid = lo + 0.5 * width
        half = 0.5 * width
        total += half * sum(w * f(mid + half * x) for x, w in zip(xs, ws))
    return total


# ---------------------------------------------------------------------------
# operators of the second-kind form


@lru_cache(maxsize=64)
def _derivative_pieces(spec: ProblemSpec):
    return kernel_time_derivative(spec)


@lru_cache(maxsize=64)
def _driving(spec: ProblemSpec):
    return driving_polynomial(spec)


@lru_cache(maxsize=64)
def _diag_poly(spec: ProblemSpec):
    return spec.kernels[-1].diagonal()


@lru_cache(maxsize=64)
def _jumps(spec: ProblemSpec):
    return tuple(spec.kernel_jump(i) for i in range(1, spec.n))


def _diag_value(spec: ProblemSpec, t: float) -> float:
    value = _diag_poly(spec)(t)
    if value == 0:
        raise SingularDiagonalError(f"K_n(t,t) = 0 at t = {t}")
    return value


def reduced_rhs(spec: ProblemSpec, t: float) -> float:
    """fbar(t) = g(t) / K_n(t,t) with g the exact driving polynomial."""
    return _driving(spec)(t) / _diag_value(spec, t)


def apply_functional(spec: ProblemSpec, x, t: float) -> float:
    """(A x)(t): perturbed-argument part of the second-kind operator."""
    if spec.n == 1:
        return 0.0
    diag = _diag_value(spec, t)
    total = 0.0
    for boundary, jump_poly in zip(spec.boundaries, _jumps(spec)):
        arg = boundary(t)
        jump = jump_poly(t, arg)
        if jump == 0:
            continue
        total += boundary.derivative()(t) * jump * x(arg)
    return total / diag


def apply_integral(
    spec: ProblemSpec,
    x,
    t: float,
    order: int = 8,
    split_points: tuple[float, ...] = (),
) -> float:
    """(K x)(t): integral part, sector by sector, split at the given interior
    breakpoints (history joints) for quadrature accuracy."""
    pieces = _derivative_pieces(spec)
    if all(p.is_zero for p in pieces):
        return 0.0
    diag = _diag_value(spec, t)
    cuts = [0.0, *[float(b(t)) for b in spec.boundaries], t]
    total = 0.0
    for i in range(spec.n):
        piece = pieces[i]
        if piece.is_zero:
            continue
        lo, hi = cuts[i], cuts[i + 1]
        if hi <= lo:
            continue
        breaks = [lo, *[s for s in split_points if lo < s < hi], hi]
        for a, b in zip(breaks, breaks[1:]):
            total += gauss_quadrature(lambda s: piece(t, s) * x(s), a, b, order=order)
    return total / diag


# alias matching the operator names used in reports
apply_A = apply_functional
apply_K = apply_integral


# ---------------------------------------------------------------------------
# successive approximations


@dataclass(frozen=True)
class IterationReport:
    interval: tuple[float, float]
    iterations: int
    changes: tuple[float, ...]

    @property
    def ratios(self) -> tuple[float, ...]:
        out = []
        for prev, cur in zip(self.changes, self.changes[1:]):
            if prev > 1e-300:
                out.append(cur / prev)
        return tuple(out)

    def to_json_dict(self) -> dict:
        return {
            "interval": list(self.interval),
            "iterations": self.iterations,
            "ratios": list(self.ratios),
        }


@dataclass(frozen=True)
class RunReport:
    h: float
    eps: float
    intervals: tuple[IterationReport, ...]
    max_residual: float

    def to_json_dict(self) -> dict:
        return {
            "h": self.h,
            "eps": self.eps,
            "intervals": [r.to_json_dict() for r in self.intervals],
            "max_residual": self.max_residual,
        }


def _check_contraction(changes: list[float], tol: float):
    if len(changes) >= 3 and changes[-1] > 10 * tol:
        if changes[-1] > changes[-2] * (1 + 1e-9) and changes[-2] > changes[-3] * (1 + 1e-9):
            raise ContractionFailureError(
                "successive changes stopped decreasing "
                f"(last ratio {changes[-1] / changes[-2]:.3f})",
                ratio=changes[-1] / changes[-2],
            )


def solve_first_interval(
    spec: ProblemSpec,
    consts: SolverConstants,
    g: int = DEFAULT_NODES,
    tol: float = DEFAULT_TOL,
    initial=None,
    quad_order: int = 8,
) -> tuple[MeshFunction, IterationReport]:
    """Fixed point of x = -Ax - Kx + fbar on [0, h] by plain iteration,
    started from fbar (or a caller-supplied guess)."""
    if not consts.theorem1_ok:
        raise NoValidConstantsError(
            "first-interval contraction is not certified "
            f"(|A(0)| = {consts.weight_at_zero:.6g})"
        )
    mesh = Mesh.chebyshev((0.0, consts.h), g)
    fbar = [reduced_rhs(spec, t) for t in mesh.nodes]
    values = fbar if initial is None else [float(initial(t)) for t in mesh.nodes]
    changes: list[float] = []
    for iteration in range(1, MAX_ITERATIONS + 1):
        current = MeshFunction(mesh, values)
        new_values = [
            fb
            - apply_functional(spec, current, t)
            - apply_integral(spec, current, t, order=quad_order)
            for t, fb in zip(mesh.nodes, fbar)
        ]
        change = max(abs(a - b) for a, b in zip(new_values, values))
        changes.append(change)
        values = new_values
        if change <= tol:
            break
        _check_contraction(changes, tol)
    else:
        raise ContractionFailureError(
            f"no convergence within {MAX_ITERATIONS} iterations on [0, h]"
        )
    report = IterationReport((0.0, consts.h), len(changes), tuple(changes))
    return MeshFunction(mesh, values), report


class _Stitched:
    """History plus the current subinterval iterate, continuous at the joint."""

    def __init__(self, history: MeshFunction, current: MeshFunction, joint: float):
        self.history = history
        self.current = current
        self.joint = joint

    def __call__(self, s: float) -> float:
        return self.history(s) if s <= self.joint else self.current(s)


def extend_step(
    spec: ProblemSpec,
    history: MeshFunction,
    interval: tuple[float, float],
    g: int = DEFAULT_NODES,
    tol: float = DEFAULT_TOL,
    quad_order: int = 8,
) -> tuple[MeshFunction, IterationReport]:
    """Solve the second-kind equation on one extension interval against
    frozen history; the left endpoint value is pinned to the history."""
    a, b = interval
    lo, hi = history.domain
    if abs(a - hi) > 1e-9 * (1.0 + abs(hi)):
        raise ValueError(f"interval start {a} must meet the history end {hi}")
    for boundary in spec.boundaries:
        worst = max(boundary(a + (b - a) * k / (4 * g)) for k in range(4 * g + 1))
        if worst > a + 1e-9 * (1.0 + a):
            raise HistoryMissingError(
                f"perturbed argument reaches {worst:.6g} > history end {a:.6g}; "
                "use a smaller step stretch"
            )
    mesh = Mesh.chebyshev((a, b), g)
    fbar = [reduced_rhs(spec, t) for t in mesh.nodes]
    anchor = history(a)
    values = [anchor, *fbar[1:]]
    splits = (a,)
    changes: list[float] = []
    for iteration in range(1, MAX_ITERATIONS + 1):
        stitched = _Stitched(history, MeshFunction(mesh, values), a)
        new_values = [anchor]
        for t, fb in zip(mesh.nodes[1:], fbar[1:]):
            new_values.append(
                fb
                - apply_functional(spec, stitched, t)
                - apply_integral(spec, stitched, t, order=quad_order, split_points=splits)
            )
        change = max(abs(u - v) for u, v in zip(new_values, values))
        changes.append(change)
        values = new_values
        if change <= tol:
            break
        _check_contraction(changes, tol)
    else:
        raise ContractionFailureError(
            f"no convergence within {MAX_ITERATIONS} iterations on [{a}, {b}]"
        )
    report = IterationReport((a, b), len(changes), tuple(changes))
    return MeshFunction(mesh, values), report


def _subinterval_bounds(h: float, eps: float, T: float) -> list[float]:
    bounds = [0.0, min(h, T)]
    while bounds[-1] < T * (1 - 1e-12):
        nxt = bounds[-1] + eps * h
        if nxt >= T - 1e-12 * T or T - nxt < 0.05 * eps * h:
            nxt = T
        bounds.append(nxt)
    return bounds


def solve_regular(
    spec: ProblemSpec,
    consts: SolverConstants,
    g: int = DEFAULT_NODES,
    tol: float = DEFAULT_TOL,
    initial=None,
    quad_order: int = 8,
) -> tuple[MeshFunction, RunReport]:
    """Stitched regular part over [0, T]: first interval by contraction,
    then step-method extension."""
    first, first_report = solve_first_interval(
        spec, consts, g=g, tol=tol, initial=initial, quad_order=quad_order
    )
    T = float(spec.horizon)
    bounds = _subinterval_bounds(consts.h, consts.eps, T)
    nodes = list(first.nodes)
    values = list(first.values)
    segments = list(first.mesh.segments)
    reports = [first_report]
    history = first
    for a, b in zip(bounds[1:], bounds[2:]):
        piece, report = extend_step(spec, history, (a, b), g=g, tol=tol, quad_order=quad_order)
        start = len(nodes) - 1
        nodes.extend(piece.nodes[1:])
        values.extend(piece.values[1:])
        segments.append((start, len(nodes) - 1))
        reports.append(report)
        mesh = Mesh(tuple(bounds[: len(segments) + 1]), tuple(nodes), tuple(segments))
        history = MeshFunction(mesh, values)
    residual = fixed_point_residual(spec, history, quad_order=quad_order)
    run = RunReport(consts.h, consts.eps, tuple(reports), residual)
    return history, run


def fixed_point_residual(
    spec: ProblemSpec, fn: MeshFunction, quad_order: int = 8
) -> float:
    """max over nodes of |x + Ax + Kx - fbar| using the solver's operators."""
    splits = tuple(fn.mesh.boundaries[1:-1])
    worst = 0.0
    for t in fn.nodes:
        value = (
            fn(t)
            + apply_functional(spec, fn, t)
            + apply_integral(spec, fn, t, order=quad_order, split_points=splits)
            - reduced_rhs(spec, t)
        )
        worst = max(worst, abs(value))
    return worst
