import math
from fractions import Fraction

import pytest

from voltkit.errors import HistoryMissingError, NoValidConstantsError
from voltkit.model import estimate_constants, problem_from_document
from voltkit.stepsolver import (
    Mesh,
    MeshFunction,
    apply_functional,
    apply_integral,
    extend_step,
    fixed_point_residual,
    gauss_quadrature,
    reduced_rhs,
    solve_first_interval,
    solve_regular,
)


@pytest.fixture(scope="module")
def two_piece_consts(two_piece):
    return estimate_constants(two_piece)


@pytest.fixture(scope="module")
def manufactured_consts(manufactured):
    return estimate_constants(manufactured)


@pytest.fixture(scope="module")
def forced_consts(forced):
    return estimate_constants(forced)


# ---------------------------------------------------------------------------
# quadrature


def test_quadrature_constant():
    assert gauss_quadrature(lambda s: 1.0, 0.0, 1.0) == pytest.approx(1.0, abs=1e-15)


def test_quadrature_polynomial_exactness():
    value = gauss_quadrature(lambda s: s**3, 0.0, 1.0, order=2)
    assert abs(value - 0.25) < 1e-15


def test_quadrature_log_integrand():
    value = gauss_quadrature(lambda s: math.log(1 + s), 0.0, 1.0)
    assert abs(value - (2 * math.log(2) - 1)) < 1e-12


def test_quadrature_rejects_reversed_bounds():
    from voltkit.errors import DomainError

    with pytest.raises(DomainError):
        gauss_quadrature(lambda s: 1.0, 1.0, 0.0)


# ---------------------------------------------------------------------------
# second-kind operators


def test_reduced_rhs_examples(two_piece, sign_flip, single_piece):
    assert reduced_rhs(two_piece, 0.7) == pytest.approx(0.5)
    assert reduced_rhs(sign_flip, 0.3) == pytest.approx(-1.0)
    assert reduced_rhs(single_piece, 0.5) == pytest.approx(1.0)  # f' / 1


def test_apply_operators_on_constant(two_piece, single_piece):
    x = lambda s: 2.0 / 3.0
    value = apply_functional(two_piece, x, 1.0)
    assert value == pytest.approx(-1.0 / 6.0)
    assert apply_integral(two_piece, x, 1.0) == 0.0  # constant kernels
    assert apply_functional(single_piece, x, 0.5) == 0.0
    # consistency: x + Ax + Kx = fbar for the exact solution
    assert 2.0 / 3.0 + value + 0.0 == pytest.approx(reduced_rhs(two_piece, 1.0))


# ---------------------------------------------------------------------------
# first interval


def test_first_interval_two_piece(two_piece, two_piece_consts):
    fn, report = solve_first_interval(two_piece, two_piece_consts)
    assert max(abs(v - 2.0 / 3.0) for v in fn.values) < 1e-9
    assert report.iterations <= 30
    # contraction at the measured rate |A| = 1/4 (c = 0)
    for ratio in report.ratios[:-1]:
        assert ratio <= two_piece_consts.q + 0.05


def test_first_interval_single_piece(single_piece):
    consts = estimate_constants(single_piece)
    fn, _ = solve_first_interval(single_piece, consts)
    assert max(abs(v - 1.0) for v in fn.values) < 1e-12


def test_first_interval_refuses_uncertified(sign_flip):
    consts = estimate_constants(sign_flip)
    with pytest.raises(NoValidConstantsError):
        solve_first_interval(sign_flip, consts)


def test_uniqueness_probe(two_piece, two_piece_consts, manufactured, manufactured_consts):
    tol = 1e-10
    for spec, consts in ((two_piece, two_piece_consts), (manufactured, manufactured_consts)):
        a, _ = solve_first_interval(spec, consts, tol=tol)
        b, _ = solve_first_interval(spec, consts, tol=tol, initial=lambda t: 0.0)
        assert max(abs(u - v) for u, v in zip(a.values, b.values)) <= 10 * tol


# ---------------------------------------------------------------------------
# extension steps


def test_extend_step_continues_constant(two_piece, two_piece_consts):
    first, _ = solve_first_interval(two_piece, two_piece_consts)
    h = two_piece_consts.h
    piece, report = extend_step(two_piece, first, (h, 2.0))
    assert max(abs(v - 2.0 / 3.0) for v in piece.values) < 1e-9
    assert piece.values[0] == first.values[-1]  # pinned joint, exact
    # K = 0 for constant kernels: the step settles immediately
    assert report.iterations <= 2


def test_extend_step_requires_history_coverage(two_piece, two_piece_consts):
    first, _ = solve_first_interval(two_piece, two_piece_consts)
    short_mesh = Mesh.chebyshev((0.0, 0.1), 9)
    short = MeshFunction(short_mesh, [first(t) for t in short_mesh.nodes])
    # interval so long that alpha(t) = t/2 escapes the solved history
    with pytest.raises(HistoryMissingError):
        extend_step(two_piece, short, (0.1, 0.5))


def test_history_missing_on_lookup(two_piece, two_piece_consts):
    first, _ = solve_first_interval(two_piece, two_piece_consts)
    with pytest.raises(HistoryMissingError):
        first(first.domain[1] + 0.5)


# ---------------------------------------------------------------------------
# full solves


def test_solve_regular_two_piece(two_piece, two_piece_consts):
    fn, run = solve_regular(two_piece, two_piece_consts)
    grid = [2.0 * k / 400 for k in range(401)]
    assert max(abs(fn(t) - 2.0 / 3.0) for t in grid) <= 1e-8
    assert run.max_residual <= 10 * 1e-10


def test_solve_regular_manufactured(manufactured, manufactured_consts):
    fn, run = solve_regular(manufactured, manufactured_consts)
    grid = [2.0 * k / 400 for k in range(401)]
    assert max(abs(fn(t) - 2.0 / 3.0) for t in grid) <= 1e-8
    assert run.max_residual <= 1e-9


def test_solve_regular_quadratic_rhs():
    spec = problem_from_document(
        {"T": 1, "boundaries": [], "kernels": [{"terms": [[0, 0, 1]]}], "f": [1, 1, 1]}
    )
    consts = estimate_constants(spec)
    fn, _ = solve_regular(spec, consts)
    grid = [k / 200 for k in range(201)]
    assert max(abs(fn(t) - (1.0 + 2.0 * t)) for t in grid) <= 1e-8


def test_solve_regular_forced(forced, forced_consts):
    fn, run = solve_regular(forced, forced_consts)
    assert run.max_residual <= 10 * 1e-10
    # first-interval geometric convergence at rate q + c*h
    bound = forced_consts.q + forced_consts.c * forced_consts.h + 0.05
    for ratio in run.intervals[0].ratios[:-1]:
        assert ratio <= bound
    # iteration count within the contraction estimate plus margin
    expected = math.log(1e-10) / math.log(forced_consts.q + forced_consts.c * forced_consts.h)
    assert run.intervals[0].iterations <= expected + 20


def test_continuity_at_joints(forced, forced_consts):
    fn, _ = solve_regular(forced, forced_consts)
    for joint in fn.mesh.boundaries[1:-1]:
        below = fn(joint - 1e-12)
        above = fn(joint + 1e-12)
        assert abs(below - above) < 1e-9
        assert fn(joint) == fn.values[fn.nodes.index(joint)]


def test_grid_refinement_order(forced, forced_consts):
    tol = 1e-12
    solutions = {}
    for g in (6, 12, 24):
        fn, _ = solve_regular(forced, forced_consts, g=g, tol=tol)
        solutions[g] = fn
    grid = [0.05 + 0.9 * k / 40 for k in range(41)]
    d1 = max(abs(solutions[6](t) - solutions[12](t)) for t in grid)
    d2 = max(abs(solutions[12](t) - solutions[24](t)) for t in grid)
    if d1 < 1e-12 and d2 < 1e-12:
        return  # effectively exact at every resolution
    order = math.log2(d1 / d2)
    assert order >= 3.0


def test_fixed_point_residual_bound(two_piece, two_piece_consts, manufactured, manufactured_consts):
    tol = 1e-10
    for spec, consts in ((two_piece, two_piece_consts), (manufactured, manufactured_consts)):
        fn, _ = solve_regular(spec, consts, tol=tol)
        assert fixed_point_residual(spec, fn) <= 10 * tol
