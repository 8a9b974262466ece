"""Circle-group relations between the J-integrals and the single base integral.

For a signature lam and a basis index k2 the integrals

    J[l1, l2, [alpha]] = int det(conj A)^lam2 conj(rho(A)[l1, k1]) rho(B)[l2, k2] prod_i B[alpha_i1, 1] B[alpha_i2, 2]

(rho = rho_(m,0), A = omega gamma eps, B = omega gamma S eps) satisfy a
homogeneous linear system whose solution space, restricted to the targeted
coordinates J[l, l, [sigma]], is spanned by one vector. Row reduction gives
the coefficients c[l1, [sigma]] with J[l1, l1, [sigma]] = c * J[0, 0, [e]].
The base integral itself is computed from the product of real parts.
"""
# Standard Library
from dataclasses import dataclass
from dataclasses import field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations_with_replacement
from logging import getLogger
from math import comb
from typing import Dict
from typing import Iterator
from typing import List
from typing import Sequence
from typing import Tuple
from typing import Union

# Local Library
from .exactmath import ComplexPoly
from .exactmath import MultiPoly
from .exactmath import RatMatrix
from .exactmath import rref
from .glrep import A_VARIABLES
from .glrep import Signature
from .glrep import drho_X
from .glrep import rho_coeff
from .haar import gamma_name
from .haar import integrate_product

logger = getLogger(__name__)

PAIRS: Tuple[Tuple[int, int], ...] = ((1, 1), (1, 2), (2, 1), (2, 2))
SIGMA_PAIRS: Tuple[Tuple[int, int], ...] = ((1, 2), (2, 1))
B_VARIABLES = ("B11", "B12", "B21", "B22")

S_VARIABLES = ("S11", "S21", "S31", "S12", "S22", "S32", "S42")
S1_VARIABLES = ("S11", "S12", "S21", "S22")
S2_VARIABLES = ("S31", "S32", "S42")


class RankError(ArithmeticError):
    """targeted coordinates of the circle-group system are not one-dimensional"""


@dataclass(frozen=True, order=True)
class AlphaOrbit:
    """Orbit of a tuple of index pairs under permutation, stored sorted."""

    pairs: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        if any(p not in PAIRS for p in self.pairs):
            raise ValueError(f"pairs must come from {PAIRS}, got {self.pairs}")
        if tuple(sorted(self.pairs)) != self.pairs:
            object.__setattr__(self, "pairs", tuple(sorted(self.pairs)))

    @property
    def size(self) -> int:
        return len(self.pairs)

    def d(self, j: int) -> int:
        return sum((a == j) + (b == j) for a, b in self.pairs)

    @property
    def is_sigma(self) -> bool:
        return all(p in SIGMA_PAIRS for p in self.pairs)

    @property
    def s(self) -> int:
        """Occurrences of the pair (2, 1)."""
        return sum(1 for p in self.pairs if p == (2, 1))

    def flips(self) -> Iterator[Tuple["AlphaOrbit", int]]:
        """Orbits reached by changing one slot, with the sign X[old, new] of X = [[0, 1], [-1, 0]]."""
        for i, pair in enumerate(self.pairs):
            for slot in (0, 1):
                old = pair[slot]
                new = 3 - old
                changed = (new, pair[1]) if slot == 0 else (pair[0], new)
                yield AlphaOrbit(self.pairs[:i] + (changed,) + self.pairs[i + 1 :]), (1 if old == 1 else -1)

    def monomial(self) -> MultiPoly:
        """prod_i B[alpha_i1, 1] * B[alpha_i2, 2]."""
        powers: Dict[str, int] = {}
        for a, b in self.pairs:
            for name in (f"B{a}1", f"B{b}2"):
                powers[name] = powers.get(name, 0) + 1
        return MultiPoly.monomial(powers) if powers else MultiPoly.constant(1)

    def __str__(self) -> str:
        return "[" + ",".join(f"{a}{b}" for a, b in self.pairs) + "]"


def enumerate_alpha(lam2: int) -> List[AlphaOrbit]:
    if lam2 < 0:
        raise ValueError(f"lam2 must be nonnegative, got {lam2}")
    return [AlphaOrbit(pairs) for pairs in combinations_with_replacement(PAIRS, lam2)]


def sigma_orbit(lam2: int, s: int) -> AlphaOrbit:
    """The orbit with s pairs (2, 1) and lam2 - s pairs (1, 2)."""
    return AlphaOrbit(((1, 2),) * (lam2 - s) + ((2, 1),) * s)


def base_orbit(lam2: int) -> AlphaOrbit:
    return sigma_orbit(lam2, 0)


@dataclass(frozen=True, order=True)
class JVariable:
    l1: int
    l2: int
    orbit: AlphaOrbit

    def __str__(self) -> str:
        return f"J({self.l1},{self.l2},{self.orbit})"


@dataclass(frozen=True, order=True)
class KVariable:
    l1: int
    mu: Tuple[int, int, int, int]

    def __str__(self) -> str:
        return f"K({self.l1},{self.mu})"


Variable = Union[JVariable, KVariable]


def _exponent_tuples(degree: int, width: int = 4) -> List[Tuple[int, ...]]:
    if width == 1:
        return [(degree,)]
    out = []
    for first in range(degree, -1, -1):
        out.extend((first,) + rest for rest in _exponent_tuples(degree - first, width - 1))
    return out


@dataclass
class LinearSystem:
    lam: Signature
    k2: int
    columns: List[Variable]
    rows: List[Dict[int, Fraction]]
    row_kinds: List[str]
    targeted: List[int] = field(default_factory=list)

    @property
    def index(self) -> Dict[Variable, int]:
        return {v: i for i, v in enumerate(self.columns)}

    def matrix(self) -> RatMatrix:
        return RatMatrix(len(self.rows), len(self.columns), self.rows)

    @property
    def n_j(self) -> int:
        return sum(1 for c in self.columns if isinstance(c, JVariable))

    @property
    def n_k(self) -> int:
        return sum(1 for c in self.columns if isinstance(c, KVariable))


def vanishing_reason(lam: Signature, var: JVariable) -> str:
    """Why J must vanish by the sign-flip or rotation symmetry, or "" if it need not."""
    d2 = var.orbit.d(2)
    if (lam.lam2 + var.l1 + var.l2 + d2) % 2:
        return "parity"
    if d2 != lam.lam2 + var.l1 - var.l2:
        return "weight"
    return ""


@lru_cache(maxsize=None)
def _expansion(lam: Signature, l2: int, k2: int, orbit: AlphaOrbit) -> Dict[Tuple[int, ...], Fraction]:
    """Coefficients a[mu] of rho(B)[l2, k2] * alpha-monomial over B11, B12, B21, B22."""
    rho = rho_coeff(lam.reduced(), l2, k2).rename(dict(zip(A_VARIABLES, B_VARIABLES)))
    poly = (rho * orbit.monomial()).with_variables(B_VARIABLES)
    return dict(poly.terms)


def build_system(lam: Signature, k2: int) -> LinearSystem:
    """Homogeneous system over the J and K variables for (lam, k2).

    Columns: K variables, then J variables that are not targeted, then the
    targeted J[l, l, [sigma]] with J[0, 0, [e]] as the very last column.
    """
    m = lam.m
    if not 0 <= k2 <= m:
        raise ValueError(f"k2={k2} out of range for {lam}")
    orbits = enumerate_alpha(lam.lam2)
    base = JVariable(0, 0, base_orbit(lam.lam2))
    j_vars = [JVariable(l1, l2, o) for l1 in range(m + 1) for l2 in range(m + 1) for o in orbits]
    targeted = [v for v in j_vars if v.l1 == v.l2 and v.orbit.is_sigma and v != base] + [base]
    targeted_set = set(targeted)
    others = [v for v in j_vars if v not in targeted_set]
    k_vars = [KVariable(l1, mu) for l1 in range(m + 1) for mu in _exponent_tuples(lam.degree)]  # type: ignore
    columns: List[Variable] = list(k_vars) + others + targeted
    index = {v: i for i, v in enumerate(columns)}

    drho = drho_X(lam)
    rows: List[Dict[int, Fraction]] = []
    kinds: List[str] = []

    def add(row: Dict[int, Fraction], kind: str) -> None:
        row = {c: v for c, v in row.items() if v}
        if row:
            rows.append(row)
            kinds.append(kind)

    for var in j_vars:
        row: Dict[int, Fraction] = {}
        for l3 in range(m + 1):
            coeff = drho[var.l1, l3]
            if coeff:
                col = index[JVariable(l3, var.l2, var.orbit)]
                row[col] = row.get(col, Fraction(0)) + coeff
        for l4 in range(m + 1):
            coeff = drho[var.l2, l4]
            if coeff:
                col = index[JVariable(var.l1, l4, var.orbit)]
                row[col] = row.get(col, Fraction(0)) + coeff
        for flipped, sign in var.orbit.flips():
            col = index[JVariable(var.l1, var.l2, flipped)]
            row[col] = row.get(col, Fraction(0)) + sign
        add(row, "dphi")

    for var in j_vars:
        reason = vanishing_reason(lam, var)
        if reason:
            add({index[var]: Fraction(1)}, f"vanish-{reason}")

    for var in j_vars:
        row = {index[var]: Fraction(1)}
        for mu, a in _expansion(lam, var.l2, k2, var.orbit).items():
            col = index[KVariable(var.l1, mu)]  # type: ignore
            row[col] = row.get(col, Fraction(0)) - a
        add(row, "expand")

    system = LinearSystem(lam=lam, k2=k2, columns=columns, rows=rows, row_kinds=kinds)
    system.targeted = [index[v] for v in targeted]
    logger.debug(f"build_system {lam=} {k2=} rows={len(rows)} J={len(j_vars)} K={len(k_vars)}")
    return system


@dataclass(frozen=True)
class CoefficientTable:
    """c[l1, [sigma]] with J[l1, l1, [sigma]] = c * J[0, 0, [e]], for one (lam, k2)."""

    lam: Signature
    k2: int
    coefficients: Dict[Tuple[int, AlphaOrbit], Fraction]

    def coefficient(self, l1: int, s: int) -> Fraction:
        return self.coefficients[(l1, sigma_orbit(self.lam.lam2, s))]

    @property
    def grouped_sum(self) -> Fraction:
        """sum over l1 and [sigma] of (-1)^s C(lam2, s) c[l1, [sigma]]."""
        total = Fraction(0)
        for (_, orbit), c in self.coefficients.items():
            s = orbit.s
            total += (-1) ** s * comb(self.lam.lam2, s) * c
        return total


@lru_cache(maxsize=None)
def coefficient_table(lam: Signature, k2: int) -> CoefficientTable:
    system = build_system(lam, k2)
    reduced, pivots = rref(system.matrix())
    pivot_row = {col: i for i, col in enumerate(pivots)}
    last = system.targeted[-1]
    free = [col for col in system.targeted if col not in pivot_row]
    if free != [last]:
        names = [str(system.columns[c]) for c in free]
        raise RankError(f"free targeted coordinates for {lam=} {k2=}: {names}")
    coefficients: Dict[Tuple[int, AlphaOrbit], Fraction] = {}
    for col in system.targeted:
        var = system.columns[col]
        assert isinstance(var, JVariable)
        if col == last:
            coefficients[(var.l1, var.orbit)] = Fraction(1)
            continue
        row = reduced.row(pivot_row[col])
        stray = [c for c in row if c not in (col, last)]
        if stray:
            raise RankError(f"pivot row of {var} involves non-targeted columns {stray}")
        coefficients[(var.l1, var.orbit)] = -row.get(last, Fraction(0))
    return CoefficientTable(lam=lam, k2=k2, coefficients=coefficients)


# Base integral


def s_name(r: int, c: int) -> str:
    return f"S{r}{c}"


def _ensure_variables(poly: MultiPoly, names: Sequence[str]) -> MultiPoly:
    missing = [v for v in names if v not in poly.variables]
    if not missing:
        return poly
    return poly.with_variables(poly.variables + tuple(missing))


def reduce_ideal(poly: MultiPoly) -> MultiPoly:
    """Remainder modulo the orthonormality relations of the first two columns of S."""
    s = {v: MultiPoly.variable(v, S_VARIABLES) for v in S_VARIABLES}
    poly = _ensure_variables(poly, S_VARIABLES)
    poly = poly.substitute_monomial({"S42": 2}, 1 - s["S12"] ** 2 - s["S22"] ** 2 - s["S32"] ** 2)
    poly = poly.substitute_monomial({"S31": 1, "S32": 1}, -s["S11"] * s["S12"] - s["S21"] * s["S22"])
    poly = poly.substitute_monomial({"S31": 2}, 1 - s["S11"] ** 2 - s["S21"] ** 2)
    return poly


def restrict_to_s1(poly: MultiPoly) -> MultiPoly:
    return poly.with_variables(S1_VARIABLES)


def transpose_s(poly: MultiPoly) -> MultiPoly:
    """p(S) -> p(S^T) on the top-left 2x2 block."""
    return poly.rename({"S12": "S21", "S21": "S12"}).with_variables(S1_VARIABLES)


@lru_cache(maxsize=None)
def _omega_gamma(r: int, l: int) -> ComplexPoly:  # noqa: E741
    """(omega gamma)[r, l] = gamma[r, l] + i gamma[r + 2, l]."""
    return ComplexPoly(MultiPoly.variable(gamma_name(r, l)), MultiPoly.variable(gamma_name(r + 2, l)))


def a_matrix() -> Dict[str, ComplexPoly]:
    return {f"A{r}{c}": _omega_gamma(r, c) for r in (1, 2) for c in (1, 2)}


def b_matrix() -> Dict[str, ComplexPoly]:
    """Entries of omega gamma S eps with S[l, c] = 0 for l > 2 + c."""
    out = {}
    for r in (1, 2):
        for c in (1, 2):
            total = ComplexPoly(0)
            for l in range(1, 3 + c):  # noqa: E741
                total = total + _omega_gamma(r, l) * MultiPoly.variable(s_name(l, c))
            out[f"A{r}{c}"] = total
    return out


def base_integral(lam: Signature, k1: int, k2: int, n: int) -> MultiPoly:
    """J[0, 0, [e]] as a polynomial in S11, S12, S21, S22."""
    if n < 4:
        raise ValueError(f"dimension must be at least 4, got {n=}")
    if lam.degree == 0:
        return MultiPoly.constant(1, S1_VARIABLES)
    left = rho_coeff(lam, 0, k1).evaluate(a_matrix()).re
    b = b_matrix()
    right_c = rho_coeff(lam.reduced(), 0, k2).evaluate(b)
    if lam.lam2:
        right_c = right_c * (b["A11"] * b["A22"]) ** lam.lam2
    right = reduce_ideal(right_c.re).drop_terms_with(S2_VARIABLES)
    logger.debug(f"base_integral {lam=} {k1=} {k2=} {n=} left={len(left)} right={len(right)}")
    total = integrate_product(left, right, n) * 2
    return restrict_to_s1(_ensure_variables(total, S1_VARIABLES))
