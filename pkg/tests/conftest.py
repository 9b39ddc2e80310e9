import json
from pathlib import Path

import pytest

from voltkit.model import problem_from_document

PROBLEM_DIR = Path(__file__).resolve().parent.parent / "problems"


def load_document(name: str) -> dict:
    return json.loads((PROBLEM_DIR / name).read_text())


@pytest.fixture(scope="session")
def two_piece_doc():
    """n=2, alpha = t/2, K = (1, 2), f = 2 + t, T = 2: solution 2*delta + 2/3."""
    return load_document("two_piece_constant.json")


@pytest.fixture(scope="session")
def sign_flip_doc():
    """n=2, alpha = t/2, K = (1, -1), f = 1 + t: family delta + c - ln t/ln 2."""
    return load_document("sign_flip_constant.json")


@pytest.fixture(scope="session")
def manufactured_doc():
    """n=2, K = (2, 1), f = 2 + t: posit constant x; 2a + (3/2)c t = f gives
    a = 1, c = 2/3."""
    return load_document("manufactured_constant.json")


@pytest.fixture(scope="session")
def forced_doc():
    """n=2, K_1 = 1 + t, K_2 = 2, f = 2 + t + t^2: regular case with
    non-trivial forcing at every order."""
    return load_document("linear_kernel_forced.json")


@pytest.fixture(scope="session")
def double_root_doc():
    """Two boundaries (slopes 1/4, 1/2), kernels (1, -3, 1): engineered so
    B(0) = B'(0) = 0, B''(0) = 2 ln^2 2 != 0 (solved 2x2 system in the
    kernel jumps)."""
    return load_document("double_root.json")


@pytest.fixture(scope="session")
def two_piece(two_piece_doc):
    return problem_from_document(two_piece_doc)


@pytest.fixture(scope="session")
def sign_flip(sign_flip_doc):
    return problem_from_document(sign_flip_doc)


@pytest.fixture(scope="session")
def manufactured(manufactured_doc):
    return problem_from_document(manufactured_doc)


@pytest.fixture(scope="session")
def forced(forced_doc):
    return problem_from_document(forced_doc)


@pytest.fixture(scope="session")
def double_root(double_root_doc):
    return problem_from_document(double_root_doc)


@pytest.fixture(scope="session")
def single_piece():
    """n=1 (no boundaries), K = 1, f = 1 + t: u = delta + 1."""
    return problem_from_document(
        {"T": 1, "boundaries": [], "kernels": [{"terms": [[0, 0, 1]]}], "f": [1, 1]}
    )


@pytest.fixture
def problem_file(tmp_path):
    def write(doc, name="problem.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc))
        return path

    return write
