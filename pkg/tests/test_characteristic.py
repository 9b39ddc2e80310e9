import math
import random
from fractions import Fraction

import pytest

from voltkit.characteristic import char_derivative, char_value, find_integer_roots
from voltkit.model import problem_from_document


def random_spec(rng, n_pieces=2):
    slopes = sorted(rng.sample(range(1, 20), n_pieces - 1))
    boundaries = [[Fraction(s, 20)] for s in slopes]
    kernels = []
    for _ in range(n_pieces):
        value = 0
        while value == 0:
            value = rng.randrange(-5, 6)
        kernels.append({"terms": [[0, 0, value]]})
    return problem_from_document(
        {"T": 1, "boundaries": boundaries, "kernels": kernels, "f": [1, 1]}
    )


def test_char_value_examples(two_piece, sign_flip, single_piece):
    assert char_value(two_piece, 0) == Fraction(3, 2)
    assert char_value(sign_flip, 0) == 0
    for j in range(5):
        assert char_value(single_piece, j) == 1  # K_1(0,0), empty sum


def test_char_value_real_argument(two_piece):
    # B(j) = 2 - (1/2)^(1+j) for this problem
    assert char_value(two_piece, 0.5) == pytest.approx(2 - 0.5**1.5)


def test_char_derivative_examples(two_piece, sign_flip, single_piece):
    assert char_derivative(sign_flip, 0, 1) == pytest.approx(-math.log(2))
    assert char_derivative(two_piece, 0, 1) == pytest.approx(math.log(2) / 2)
    assert char_derivative(single_piece, 0, 1) == 0
    assert char_derivative(single_piece, 3, 4) == 0


def test_char_derivative_matches_finite_differences():
    rng = random.Random(5)
    step = 1e-5
    for _ in range(50):
        spec = random_spec(rng, n_pieces=rng.choice((2, 3)))
        j = rng.uniform(0.0, 3.0)
        fd = (char_value(spec, j + step) - char_value(spec, j - step)) / (2 * step)
        assert abs(fd - char_derivative(spec, j, 1)) < 1e-6


def test_roots_sign_flip(sign_flip):
    report = find_integer_roots(sign_flip, 4)
    assert report.roots == ((0, 1),)
    assert report.total_free_constants == 1


def test_roots_two_piece(two_piece):
    report = find_integer_roots(two_piece, 4)
    assert report.roots == ()
    assert report.total_free_constants == 0
    # B(j) = 2 - 2^(-1-j) > 0 for every j >= 0
    for j, value in enumerate(report.values):
        assert value == 2 - Fraction(1, 2 ** (1 + j))


def test_roots_engineered_double(double_root):
    report = find_integer_roots(double_root, 4)
    assert report.roots == ((0, 2),)
    assert report.total_free_constants == 2
    assert char_value(double_root, 0) == 0
    assert abs(char_derivative(double_root, 0, 1)) < 1e-12
    assert char_derivative(double_root, 0, 2) == pytest.approx(2 * math.log(2) ** 2)


def test_monotone_tail_excludes_large_roots():
    rng = random.Random(13)
    for _ in range(20):
        spec = random_spec(rng, n_pieces=3)
        kn = spec.kernels[-1].at_origin()
        # once sum b^(1+j)|dK| < |K_n(0,0)| no roots can appear at or past j
        j_star = 0
        while True:
            tail = sum(
                spec.boundaries[i - 1].slope ** (1 + j_star)
                * abs(spec.kernel_jump(i).at_origin())
                for i in range(1, spec.n)
            )
            if tail < abs(kn):
                break
            j_star += 1
            assert j_star < 64
        report = find_integer_roots(spec, j_star + 5)
        assert all(j < j_star for j, _ in report.roots)
        assert float(report.values[-1]) == pytest.approx(float(kn), abs=float(abs(kn)))


def test_report_consistency(double_root, sign_flip):
    for spec in (double_root, sign_flip):
        report = find_integer_roots(spec, 5)
        assert report.total_free_constants == sum(k for _, k in report.roots)
        for j, multiplicity in report.roots:
            assert char_value(spec, j) == 0
            for k in range(1, multiplicity):
                assert abs(char_derivative(spec, j, k)) <= 1e-12
            assert abs(char_derivative(spec, j, multiplicity)) > 1e-12


def test_report_json_shape(sign_flip):
    doc = find_integer_roots(sign_flip, 3).to_json_dict()
    assert doc["roots"] == [[0, 1]]
    assert doc["free_constants"] == 1
    assert len(doc["values"]) == 4


def test_conditioning_warning():
    spec = problem_from_document(
        {
            "T": 1,
            "boundaries": [["1/2"]],
            "kernels": [
                {"terms": [[0, 0, 2]]},
                {"terms": [[0, 0, ["1/1", "2/2"][0]]]},
            ],
            "f": [1, 1],
        }
    )
    # K = (2, 1): B(0) = 1 + (1/2)(2-1) = 3/2, no warning expected
    assert find_integer_roots(spec, 3).warnings == ()
    near = problem_from_document(
        {
            "T": 1,
            "boundaries": [["1/2"]],
            "kernels": [
                {"terms": [[0, 0, 1]]},
                {"terms": [[0, 0, "-1000000001/1000000000"]]},
            ],
            "f": [1, 1],
        }
    )
    # B(0) = -1000000001/1000000000 + (1/2)(1 + 1000000001/1000000000): tiny but nonzero
    report = find_integer_roots(near, 1)
    assert report.roots == ()
    assert any("near-irregular" in w for w in report.warnings)
