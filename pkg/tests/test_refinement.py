import json
import math
from fractions import Fraction

import pytest

from voltkit import logpower as lp
from voltkit.asymptotics import compute_asymptotics
from voltkit.errors import (
    InternalConsistencyError,
    MissingParameterError,
    NotCoveredError,
    ParameterMismatchError,
)
from voltkit.logpower import LogPowerPolynomial
from voltkit.model import (
    BivariatePolynomial,
    Polynomial,
    ProblemSpec,
    estimate_constants,
    problem_from_document,
)
from voltkit.refinement import (
    CorrectionForcing,
    GeneralizedSolution,
    assemble,
    correction_forcing,
    from_mesh,
    singular_coefficient,
    solve_correction,
)
from voltkit.stepsolver import solve_regular
from voltkit.verifier import residual_second_kind

LN2 = math.log(2)


@pytest.fixture(scope="module")
def sign_flip_consts(sign_flip):
    return estimate_constants(sign_flip)


@pytest.fixture(scope="module")
def sign_flip_xhat(sign_flip):
    return compute_asymptotics(sign_flip, 2).bind({"c1": 0.0})


def defective_xhat(sign_flip_xhat):
    """Exact expansion plus an injected t^(Nstar+1) defect."""
    return lp.add(
        lp.truncate(sign_flip_xhat, 6), LogPowerPolynomial({(3, 0): Fraction(1)}, 6)
    )


# ---------------------------------------------------------------------------
# singular coefficient


def test_singular_coefficient(two_piece, sign_flip):
    assert singular_coefficient(two_piece) == 2
    assert singular_coefficient(sign_flip) == 1


def test_singular_coefficient_zero_f0(two_piece):
    relaxed = ProblemSpec(
        two_piece.horizon, two_piece.boundaries, two_piece.kernels, Polynomial.of([0, 1])
    )
    assert singular_coefficient(relaxed) == 0


def test_singular_coefficient_not_covered(two_piece):
    broken = ProblemSpec(
        two_piece.horizon,
        two_piece.boundaries,
        (BivariatePolynomial.of([[1, 0, 1]]), two_piece.kernels[1]),  # K_1 = t
        two_piece.rhs,
    )
    with pytest.raises(NotCoveredError):
        singular_coefficient(broken)


# ---------------------------------------------------------------------------
# correction forcing


def test_gamma_vanishes_for_exact_expansion(two_piece, sign_flip, sign_flip_xhat):
    asym1 = compute_asymptotics(two_piece, 2)
    gamma1 = CorrectionForcing(two_piece, asym1.bind({}), atten_order=0)
    gamma2 = CorrectionForcing(sign_flip, sign_flip_xhat, atten_order=2)
    for t in (1e-6, 1e-3, 0.04, 0.06, 0.3, 1.0):
        assert abs(gamma1(t)) < 1e-10
        assert abs(gamma2(t)) < 1e-10
    assert abs(gamma2.limit_at_zero()) < 1e-10


def test_gamma_of_injected_defect(sign_flip, sign_flip_xhat):
    # F(t^3) = -t^3 + (1/2)*2*(t/2)^3 = -(7/8) t^3, so
    # gamma = (7/8) t^3 / (t^2 * K_2(t,t)) = -(7/8) t
    gamma = CorrectionForcing(
        sign_flip, defective_xhat(sign_flip_xhat), atten_order=2, valid_order=2
    )
    for t in (1e-4, 0.01, 0.04):  # symbolic branch
        assert gamma(t) == pytest.approx(-7 / 8 * t, rel=1e-12)
    for t in (0.06, 0.3, 1.0):  # quadrature branch
        assert gamma(t) == pytest.approx(-7 / 8 * t, rel=1e-9)


def test_gamma_one_shot_api(sign_flip, sign_flip_consts):
    asym = compute_asymptotics(sign_flip, 2)
    assert correction_forcing(sign_flip, asym, {"c1": 0.3}, 2, 0.02) == pytest.approx(
        0.0, abs=1e-10
    )


def test_gamma_rejects_insufficient_order(sign_flip, sign_flip_xhat):
    with pytest.raises(InternalConsistencyError):
        CorrectionForcing(sign_flip, sign_flip_xhat, atten_order=3)  # order 2 < 3


def test_gamma_rejects_surviving_low_order_residual(sign_flip, sign_flip_xhat):
    # a t^1 perturbation violates the o(t^N) hypothesis at N = 2
    bad = lp.add(
        lp.truncate(sign_flip_xhat, 6), LogPowerPolynomial({(1, 0): Fraction(1)}, 6)
    )
    with pytest.raises(InternalConsistencyError):
        CorrectionForcing(sign_flip, bad, atten_order=2)


# ---------------------------------------------------------------------------
# damped contraction


def test_correction_zero_forcing(sign_flip, sign_flip_consts):
    v, report = solve_correction(sign_flip, lambda t: 0.0, 2, sign_flip_consts)
    assert report.max_v == 0.0
    assert report.iterations == 1


def test_correction_exact_expansion(sign_flip, sign_flip_consts, sign_flip_xhat):
    gamma = CorrectionForcing(sign_flip, sign_flip_xhat, atten_order=2)
    v, report = solve_correction(sign_flip, gamma, 2, sign_flip_consts)
    assert report.max_v < 1e-10


def test_correction_recovers_injected_defect(sign_flip, sign_flip_consts, sign_flip_xhat):
    xhat_def = defective_xhat(sign_flip_xhat)
    gamma = CorrectionForcing(sign_flip, xhat_def, atten_order=2, valid_order=2)
    v, report = solve_correction(sign_flip, gamma, 2, sign_flip_consts)
    # hand fixed point: v(t) - (1/4) v(t/2) = -(7/8) t  =>  v(t) = -t
    for t in (0.01, 0.1, 0.5, 1.0):
        assert v(t) == pytest.approx(-t, abs=2e-7)
    # contraction certificate
    assert report.q + report.q1 < 1
    for ratio in report.ratios[:-1]:
        assert ratio <= report.q + report.q1 + 0.05
    # assembled solution: xhat_def + t^2 v solves the reduced equation
    sol = GeneralizedSolution(
        a=Fraction(1),
        atten_order=2,
        t_split=v.nodes[0],
        horizon=1.0,
        parameters={},
        v=v,
        xhat=xhat_def,
        asymptotic=None,
        path="theorem-2",
    )
    for t in (0.01, 0.05, 0.2, 0.6, 1.0):
        assert abs(residual_second_kind(sign_flip, sol.regular_value, t)) <= 1e-6


def test_attenuation_bound_on_mesh(sign_flip, sign_flip_consts):
    v, _ = solve_correction(sign_flip, lambda t: 0.0, 2, sign_flip_consts)
    n_star = sign_flip_consts.atten_order
    for t in v.nodes:
        for boundary in sign_flip.boundaries:
            assert (boundary(t) / t) ** n_star <= sign_flip_consts.eps_bound**n_star + 1e-12


# ---------------------------------------------------------------------------
# assembly


def test_assemble_two_piece(two_piece):
    consts = estimate_constants(two_piece)
    mesh_solution, _ = solve_regular(two_piece, consts)
    sol = from_mesh(two_piece, mesh_solution)
    assert sol.a == 2
    assert sol.path == "theorem-1"
    assert sol.atten_order == 0 and sol.t_split == 0.0
    for t in (0.0, 0.5, 1.7):
        assert sol.regular_value(t) == pytest.approx(2 / 3, abs=1e-9)


def test_assemble_sign_flip(sign_flip, sign_flip_consts):
    asym = compute_asymptotics(sign_flip, 2)
    gamma = CorrectionForcing(sign_flip, asym.bind({"c1": 0.0}), 2)
    v, _ = solve_correction(sign_flip, gamma, 2, sign_flip_consts)
    sol = assemble(sign_flip, asym, {"c1": 0.0}, v, 2)
    assert sol.a == 1
    for t in (0.01, 0.3, 1.0):
        assert sol.regular_value(t) == pytest.approx(-math.log(t) / LN2, abs=1e-9)
    shifted = assemble(sign_flip, asym, {"c1": 3.0}, v, 2)
    assert shifted.regular_value(1.0) == pytest.approx(3.0, abs=1e-9)


def test_assemble_parameter_mismatch(sign_flip, sign_flip_consts):
    asym = compute_asymptotics(sign_flip, 2)
    v, _ = solve_correction(sign_flip, lambda t: 0.0, 2, sign_flip_consts)
    with pytest.raises(ParameterMismatchError):
        assemble(sign_flip, asym, {"c1": 0.0, "zz": 1.0}, v, 2)
    with pytest.raises(MissingParameterError):
        assemble(sign_flip, asym, {}, v, 2)


def test_parameter_affinity_through_full_solve(sign_flip, sign_flip_consts):
    asym = compute_asymptotics(sign_flip, 2)
    t_probe = 0.37
    values = []
    for c in (0.0, 1.0, 3.0):
        gamma = CorrectionForcing(sign_flip, asym.bind({"c1": c}), 2)
        v, _ = solve_correction(sign_flip, gamma, 2, sign_flip_consts)
        sol = assemble(sign_flip, asym, {"c1": c}, v, 2)
        values.append(sol.regular_value(t_probe))
    # affine in c: second divided difference vanishes
    slope1 = values[1] - values[0]
    slope2 = (values[2] - values[1]) / 2
    assert slope1 == pytest.approx(slope2, abs=1e-8)
    assert slope1 == pytest.approx(1.0, abs=1e-8)


def test_asymptotic_estimate_near_zero(sign_flip, sign_flip_consts, sign_flip_xhat):
    xhat_def = defective_xhat(sign_flip_xhat)
    gamma = CorrectionForcing(sign_flip, xhat_def, atten_order=2, valid_order=2)
    v, report = solve_correction(sign_flip, gamma, 2, sign_flip_consts)
    sol = GeneralizedSolution(
        a=Fraction(1),
        atten_order=2,
        t_split=v.nodes[0],
        horizon=1.0,
        parameters={},
        v=v,
        xhat=xhat_def,
        asymptotic=None,
        path="theorem-2",
    )
    for t in (1e-1, 1e-2, 1e-3, 1e-4):
        gap = abs(sol.regular_value(t) - lp.evaluate(xhat_def, t)) / t**2
        assert gap <= 2 * report.max_v + 1e-12


def test_document_round_trip(sign_flip, sign_flip_consts, two_piece):
    asym = compute_asymptotics(sign_flip, 2)
    gamma = CorrectionForcing(sign_flip, asym.bind({"c1": 0.5}), 2)
    v, _ = solve_correction(sign_flip, gamma, 2, sign_flip_consts)
    sol = assemble(sign_flip, asym, {"c1": 0.5}, v, 2)
    doc = json.loads(json.dumps(sol.to_document("hash123")))
    back = GeneralizedSolution.from_document(doc)
    assert back.a == sol.a
    assert back.atten_order == 2
    for t in (0.01, 0.4, 1.0):
        assert back.regular_value(t) == pytest.approx(sol.regular_value(t), abs=1e-13)

    consts = estimate_constants(two_piece)
    mesh_solution, _ = solve_regular(two_piece, consts)
    sol1 = from_mesh(two_piece, mesh_solution)
    back1 = GeneralizedSolution.from_document(sol1.to_document())
    assert back1.a == 2
    for t in (0.0, 1.0, 2.0):
        assert back1.regular_value(t) == pytest.approx(sol1.regular_value(t), abs=1e-13)
