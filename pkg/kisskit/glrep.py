# Standard Library
from dataclasses import dataclass
from functools import lru_cache
from logging import getLogger
from math import comb
from typing import Any
from typing import List
from typing import Mapping
from typing import Sequence

# Local Library
from .exactmath import MultiPoly
from .exactmath import RatMatrix

logger = getLogger(__name__)

A_VARIABLES = ("A11", "A12", "A21", "A22")


class BasisIndexError(ValueError):
    """basis index k is outside 0..m"""


@dataclass(frozen=True, order=True)
class Signature:
    """Highest weight (lam1, lam2) of a polynomial GL(2) representation."""

    lam1: int
    lam2: int

    def __post_init__(self) -> None:
        if not (self.lam1 >= self.lam2 >= 0):
            raise ValueError(f"signature must satisfy lam1 >= lam2 >= 0, got ({self.lam1}, {self.lam2})")

    @property
    def m(self) -> int:
        return self.lam1 - self.lam2

    @property
    def degree(self) -> int:
        return self.lam1 + self.lam2

    @property
    def dim(self) -> int:
        return self.m + 1

    def reduced(self) -> "Signature":
        """Same representation without the determinant twist."""
        return Signature(self.m, 0)

    def __str__(self) -> str:
        return f"({self.lam1},{self.lam2})"


def _check_index(lam: Signature, k: int) -> None:
    if not 0 <= k <= lam.m:
        raise BasisIndexError(f"basis index {k} out of range 0..{lam.m} for {lam}")


def weight_c(lam: Signature, k: int, j: int) -> int:
    """Number of times e_j occurs in w_k = e1^(m-k) e2^k, determinant twist included."""
    _check_index(lam, k)
    if j == 1:
        return lam.lam2 + lam.m - k
    if j == 2:
        return lam.lam2 + k
    raise ValueError(f"j must be 1 or 2, got {j}")


def _binom(n: int, k: int) -> int:
    if n < 0 or k < 0 or k > n:
        return 0
    return comb(n, k)


@lru_cache(maxsize=None)
def _det_power(power: int) -> MultiPoly:
    a11, a12, a21, a22 = (MultiPoly.variable(v, A_VARIABLES) for v in A_VARIABLES)
    return (a11 * a22 - a12 * a21) ** power


@lru_cache(maxsize=None)
def rho_coeff(lam: Signature, k1: int, k2: int) -> MultiPoly:
    """Coefficient of w_k1 in rho(A) w_k2 as a polynomial in A11, A12, A21, A22."""
    _check_index(lam, k1)
    _check_index(lam, k2)
    m = lam.m
    terms = {}
    for l in range(0, m - k2 + 1):  # noqa: E741
        c = _binom(m - k2, l) * _binom(k2, k1 - l)
        if not c:
            continue
        exps = (m - k2 - l, k2 - k1 + l, l, k1 - l)
        terms[exps] = terms.get(exps, 0) + c
    poly = MultiPoly(A_VARIABLES, terms)
    if lam.lam2:
        poly = poly * _det_power(lam.lam2)
    return poly


def rho_matrix(lam: Signature, entries: Mapping[str, Any], coerce: Any = None) -> List[List[Any]]:
    """rho(A) as a (m+1)x(m+1) nested list, A given by its four named entries."""
    return [[rho_coeff(lam, k1, k2).evaluate(entries, coerce=coerce) for k2 in range(lam.dim)] for k1 in range(lam.dim)]


def matrix_entries(a: Sequence[Sequence[Any]]) -> dict:
    return {"A11": a[0][0], "A12": a[0][1], "A21": a[1][0], "A22": a[1][1]}


def drho_X(lam: Signature) -> RatMatrix:
    """Derivative at the identity along X = [[0, 1], [-1, 0]]."""
    m = lam.m
    rows: List[dict] = [{} for _ in range(m + 1)]
    for k2 in range(m + 1):
        if k2 + 1 <= m:
            rows[k2 + 1][k2] = -(m - k2)
        if k2 - 1 >= 0:
            rows[k2 - 1][k2] = k2
    return RatMatrix(m + 1, m + 1, rows)


def signatures_up_to(degree: int, lam2_zero_only: bool = False) -> List[Signature]:
    """Every signature with |lam| <= degree, by degree then lam1 descending."""
    out = []
    for d in range(degree + 1):
        for lam2 in range(0, d // 2 + 1):
            if lam2_zero_only and lam2:
                continue
            out.append(Signature(d - lam2, lam2))
    return out
