import math
from fractions import Fraction
from types import SimpleNamespace

import pytest

from voltkit import logpower as lp
from voltkit.errors import DomainError
from voltkit.logpower import LogPowerPolynomial
from voltkit.model import estimate_constants, kernel_value
from voltkit.refinement import from_mesh
from voltkit.stepsolver import Mesh, MeshFunction, solve_regular
from voltkit.verifier import (
    adaptive_simpson,
    decay_order,
    integrate,
    make_residual_report,
    residual_differentiated,
    residual_first_kind,
    residual_second_kind,
)

LN2 = math.log(2)


def constant_solution(spec, a, value, g=9):
    mesh = Mesh.chebyshev((0.0, float(spec.horizon)), g)
    return from_mesh(spec, MeshFunction(mesh, [value] * len(mesh.nodes)))


def analytic_log_solution(c=0.0, horizon=1.0):
    """delta + c - ln t / ln 2 as a generalized-solution stand-in."""
    xhat = LogPowerPolynomial({(0, 0): c, (0, 1): -1 / LN2}, 4)
    return SimpleNamespace(
        a=Fraction(1),
        t_split=float("inf"),  # always evaluate from the closed form
        horizon=horizon,
        interior_joints=(),
        regular_value=lambda t: lp.evaluate(xhat, t),
    )


# ---------------------------------------------------------------------------
# quadrature building blocks


def test_adaptive_simpson_smooth():
    assert adaptive_simpson(math.sin, 0.0, math.pi) == pytest.approx(2.0, abs=1e-12)


def test_integrate_with_log_singularity():
    value = integrate(lambda s: math.log(s), 0.0, 1.0, singular_left=True)
    assert value == pytest.approx(-1.0, abs=1e-11)


def test_integrate_respects_splits():
    f = lambda s: abs(s - 0.5)  # kink at 0.5
    exact = 0.25
    assert integrate(f, 0.0, 1.0, splits=(0.5,)) == pytest.approx(exact, abs=1e-13)


# ---------------------------------------------------------------------------
# first-kind residual


def test_first_kind_two_piece(two_piece):
    sol = constant_solution(two_piece, a=2, value=2 / 3)
    # a*K_1(t,0) + (2/3)(t/2) + 2(2/3)(t/2) - (2 + t) = 0
    for t in (0.3, 1.0, 2.0):
        assert abs(residual_first_kind(two_piece, sol, t)) < 1e-10


def test_first_kind_log_family(sign_flip):
    # closed form: int_0^(t/2) x - int_(t/2)^t x + 1 - (1 + t) = 0 with
    # x = c - ln s / ln 2, via int ln s ds = s ln s - s
    for c in (0.0, 2.0):
        sol = analytic_log_solution(c)
        for t in (0.2, 0.7, 1.0):
            assert abs(residual_first_kind(sign_flip, sol, t)) < 1e-9


def test_first_kind_zero_solution(sign_flip):
    sol = constant_solution(sign_flip, a=0, value=0.0)
    sol.a = Fraction(0)
    assert residual_first_kind(sign_flip, sol, 1.0) == pytest.approx(-2.0, abs=1e-12)


def test_first_kind_domain_error(two_piece):
    sol = constant_solution(two_piece, a=2, value=2 / 3)
    with pytest.raises(DomainError):
        residual_first_kind(two_piece, sol, 0.0)


# ---------------------------------------------------------------------------
# second-kind and differentiated residuals


def test_second_kind_examples(two_piece, sign_flip, single_piece):
    assert abs(residual_second_kind(two_piece, lambda s: 2 / 3, 1.0)) < 1e-12
    for c in (0.0, 7.0):
        x = lambda s: c - math.log(s) / LN2
        for t in (0.2, 0.9):
            assert abs(residual_second_kind(sign_flip, x, t)) < 1e-12
    assert abs(residual_second_kind(single_piece, lambda s: 1.0, 0.5)) < 1e-12


def test_differentiated_examples(two_piece, sign_flip):
    assert abs(residual_differentiated(two_piece, lambda s: 2 / 3, 0.8)) < 1e-12
    x = lambda s: -math.log(s) / LN2
    assert abs(residual_differentiated(sign_flip, x, 0.8)) < 1e-12


def test_operator_equality(two_piece, sign_flip, forced):
    # K_n(t,t) * (second-kind residual) equals the differentiated residual
    x = lambda s: 1.0 + s + 0.5 * s * s  # deliberately not a solution
    for spec in (two_piece, sign_flip, forced):
        for t in (0.25, 0.8):
            diag = spec.kernels[-1].diagonal()(t)
            lhs = diag * residual_second_kind(spec, x, t)
            rhs = residual_differentiated(spec, x, t)
            assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-11)


def test_differentiation_consistency(forced):
    # d/dt of the first-kind residual matches the differentiated residual
    x = lambda s: 1.0 + s
    sol = SimpleNamespace(
        a=Fraction(2),  # = f(0)/K_1(0,0) for the forced problem
        t_split=0.0,
        horizon=1.0,
        interior_joints=(),
        regular_value=x,
    )
    step = 1e-4
    for t in (0.3, 0.6):
        fd = (
            residual_first_kind(forced, sol, t + step)
            - residual_first_kind(forced, sol, t - step)
        ) / (2 * step)
        assert fd == pytest.approx(residual_differentiated(forced, x, t), abs=1e-5)


def test_high_precision_mode_agrees(forced):
    x = lambda s: 1.0 + s * 0  # constant callable valid under mpf input
    t = 0.3
    plain = residual_differentiated(forced, x, t)
    precise = residual_differentiated(forced, x, t, prec=40)
    assert plain == pytest.approx(precise, rel=1e-10)


def test_mollifier_matches_delta_contribution(two_piece):
    # int K(t,s) a eta_sigma(s) ds -> a K_1(t,0) with a triangular mollifier
    a = 2.0
    t = 1.0
    target = a * kernel_value(two_piece, t, 1e-12)
    errors = []
    for sigma in (1e-3, 1e-4):
        eta = lambda s: (2.0 / sigma) * (1.0 - s / sigma) if s < sigma else 0.0
        value = integrate(
            lambda s: kernel_value(two_piece, t, s) * a * eta(s),
            0.0,
            sigma,
            singular_left=True,
        )
        errors.append(abs(value - target))
    assert errors[1] <= errors[0]
    assert errors[1] < 1e-8


# ---------------------------------------------------------------------------
# decay order


def test_decay_order_synthetic():
    points = [(t, 3.0 * t**2) for t in (1e-1, 1e-2, 1e-3)]
    assert decay_order(points) == pytest.approx(2.0, abs=1e-6)


def test_decay_order_exact():
    assert decay_order([(1e-1, 0.0), (1e-2, 0.0)]) == "exact"


def test_decay_order_with_log_factor():
    # on the canonical decay grid the log factor shaves the measured slope
    points = [(t, abs(2.0 * t**2 * math.log(t))) for t in (1e-2, 1e-3, 1e-4)]
    slope = decay_order(points)
    assert 1.8 < slope < 2.0


# ---------------------------------------------------------------------------
# residual report


def test_residual_report(two_piece):
    consts = estimate_constants(two_piece)
    mesh_solution, _ = solve_regular(two_piece, consts)
    sol = from_mesh(two_piece, mesh_solution)
    report = make_residual_report(two_piece, sol, count=9)
    assert report.max_abs < 1e-8
    assert len(report.grid) == 9
    assert report.grid[-1] == pytest.approx(2.0)
    assert set(report.representation) == {"composite"}
    csv_text = report.to_csv_text()
    assert csv_text.splitlines()[0] == "t,first_kind,second_kind,representation"
    assert len(csv_text.splitlines()) == 10
