"""Characteristic function of the reduced functional equation.

For slopes b_i = alpha_i'(0) and kernel jumps dK_i = K_i(0,0) - K_{i+1}(0,0)
the characteristic value at order j is

    B(j) = K_n(0,0) + sum_i b_i^(1+j) * dK_i,

with exact derivatives in j

    B^(k)(j) = sum_i b_i^(1+j) * (ln b_i)^k * dK_i,   k >= 1.

Integer points j in {0..N} where B vanishes are the irregular orders: each
contributes log powers and free constants to the expansion.  Because all
inputs are rational, B(j) at integer j is rational and root detection is
exact; multiplicity detection needs ln b_i and therefore runs in floats
against a tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import DegenerateCharacteristicError
from .model import ProblemSpec

_MULTIPLICITY_CAP = 16
_CONDITIONING_FLOOR = 1e-8


@dataclass(frozen=True)
class CharacteristicReport:
    scan_bound: int
    values: tuple
    roots: tuple[tuple[int, int], ...]
    total_free_constants: int
    warnings: tuple[str, ...] = ()

    def multiplicity(self, j: int) -> int:
        for root, k in self.roots:
            if root == j:
                return k
        return 0

    def to_json_dict(self) -> dict:
        return {
            "values": [float(v) for v in self.values],
            "roots": [[j, k] for j, k in self.roots],
            "free_constants": self.total_free_constants,
            "warnings": list(self.warnings),
        }


def _jump_data(spec: ProblemSpec) -> list[tuple[Fraction, Fraction]]:
    """(slope, kernel jump at the origin) per interior boundary."""
    out = []
    for i in range(1, spec.n):
        out.append((spec.boundaries[i - 1].slope, spec.kernel_jump(i).at_origin()))
    return out


def char_value(spec: ProblemSpec, j):
    """B(j); exact Fraction for integer j, float for real j."""
    kn = spec.kernels[-1].at_origin()
    if isinstance(j, int):
        total = kn
        for b, dk in _jump_data(spec):
            total += b ** (1 + j) * dk
        return total
    total = float(kn)
    for b, dk in _jump_data(spec):
        total += math.exp((1.0 + j) * math.log(b)) * float(dk)
    return total


def char_derivative(spec: ProblemSpec, j, k: int):
    """d^k B / dj^k at j (k >= 1); the constant K_n(0,0) term drops out."""
    if k < 1:
        raise ValueError("derivative order must be >= 1")
    total = 0.0
    for b, dk in _jump_data(spec):
        a = math.log(b)
        total += float(b) ** (1.0 + j) * a**k * float(dk)
    return total


def find_integer_roots(
    spec: ProblemSpec, scan_bound: int, tol: float = 1e-12
) -> CharacteristicReport:
    """Scan j in {0..N} for exact roots of B and their multiplicities."""
    values = []
    roots = []
    warnings = []
    for j in range(scan_bound + 1):
        value = char_value(spec, j)
        values.append(value)
        if value == 0:
            multiplicity = None
            for k in range(1, _MULTIPLICITY_CAP + 1):
                if abs(char_derivative(spec, j, k)) > tol:
                    multiplicity = k
                    break
            if multiplicity is None:
                raise DegenerateCharacteristicError(
                    f"all derivatives of the characteristic value at j={j} vanish "
                    f"up to order {_MULTIPLICITY_CAP}"
                )
            roots.append((j, multiplicity))
        elif abs(float(value)) < _CONDITIONING_FLOOR:
            warnings.append(
                f"characteristic value at j={j} is {float(value):.3e}: "
                "near-irregular point, coefficients may be ill-conditioned"
            )
    return CharacteristicReport(
        scan_bound=scan_bound,
        values=tuple(values),
        roots=tuple(roots),
        total_free_constants=sum(k for _, k in roots),
        warnings=tuple(warnings),
    )
