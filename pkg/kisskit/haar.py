"""Exact moments of Haar-random orthogonal matrices.

Columns of a Haar-random gamma in O(n) are built one at a time: column c is
uniform on the unit sphere of the orthogonal complement of the previous
columns, a subspace of dimension n - c with orthogonal projection
P_c = I - sum_{c' < c} x_c' x_c'^T. For such a column

    E[x^beta] = E_gauss[y^beta; cov P_c] / (d (d + 2) ... (d + |beta| - 2)),  d = n - c,

and the Gaussian moment follows from Stein's identity. Integrating the
columns from last to first leaves a polynomial in the earlier columns, so
the final value is an exact rational.
"""
# Standard Library
import re
import threading
from fractions import Fraction
from functools import lru_cache
from itertools import permutations
from logging import getLogger
from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple

# Third Party Library
import numpy as np

# Local Library
from .config import DEFAULT_DEGREE_CAP
from .exactmath import MultiPoly

logger = getLogger(__name__)

Exponents = Tuple[Tuple[int, ...], ...]

_GAMMA_NAME = re.compile(r"^g(\d)(\d)$")


class DegreeCapExceeded(ValueError):
    """monomial degree is above the configured cap"""


class DimensionTooSmall(ValueError):
    """monomial uses more rows or columns than the group dimension"""


def gamma_name(r: int, c: int) -> str:
    """Variable name of gamma_{r,c}, 1-based."""
    return f"g{r}{c}"


GAMMA_VARIABLES: Tuple[str, ...] = tuple(gamma_name(r, c) for r in range(1, 5) for c in range(1, 5))


def parse_gamma_name(name: str) -> Tuple[int, int]:
    match = _GAMMA_NAME.match(name)
    if match is None:
        raise ValueError(f"not a gamma variable: {name!r}")
    return int(match.group(1)) - 1, int(match.group(2)) - 1


def _as_matrix(a: Sequence[Sequence[int]]) -> Exponents:
    rows = tuple(tuple(int(v) for v in row) for row in a)
    if rows and any(len(r) != len(rows[0]) for r in rows):
        raise ValueError("exponent matrix must be rectangular")
    if any(v < 0 for r in rows for v in r):
        raise ValueError("exponents must be nonnegative")
    return rows


def canonicalize(a: Sequence[Sequence[int]]) -> Exponents:
    """Drop empty rows and columns; the normal form is the largest matrix in the orbit.

    The orbit is generated by row permutations, column permutations and
    transposition. For a fixed row order the best column order sorts the
    columns in decreasing order, so only row orders are enumerated.
    """
    rows = [r for r in _as_matrix(a) if any(r)]
    if not rows:
        return ()
    cols = [c for c in zip(*rows) if any(c)]
    m = tuple(zip(*cols))
    best: Exponents = ()
    for source in (m, tuple(zip(*m))):
        for order in permutations(source):
            candidate = tuple(zip(*sorted(zip(*order), reverse=True)))
            if candidate > best:
                best = candidate
    return best


def has_odd_line(a: Exponents) -> bool:
    if not a:
        return False
    return any(sum(r) % 2 for r in a) or any(sum(c) % 2 for c in zip(*a))


def _column_variable(c: int, r: int) -> str:
    return f"x{c}_{r}"


@lru_cache(maxsize=None)
def _projection_entry(c: int, r: int, s: int) -> MultiPoly:
    """(r, s) entry of I - sum_{c' < c} x_c' x_c'^T."""
    entry = MultiPoly.constant(1 if r == s else 0)
    for prev in range(c):
        entry = entry - MultiPoly.variable(_column_variable(prev, r)) * MultiPoly.variable(_column_variable(prev, s))
    return entry


@lru_cache(maxsize=None)
def _gaussian_moment(beta: Tuple[int, ...], c: int) -> MultiPoly:
    """E[y^beta] for y Gaussian with covariance P_c, restricted to the rows in beta."""
    total_degree = sum(beta)
    if total_degree == 0:
        return MultiPoly.constant(1)
    if total_degree % 2:
        return MultiPoly.zero()
    r = next(i for i, b in enumerate(beta) if b)
    rest = list(beta)
    rest[r] -= 1
    total = MultiPoly.zero()
    for s, e in enumerate(rest):
        if not e:
            continue
        lower = list(rest)
        lower[s] -= 1
        total = total + _projection_entry(c, r, s) * _gaussian_moment(tuple(lower), c) * e
    return total


def _sphere_norm(d: int, degree: int) -> int:
    out = 1
    for i in range(degree // 2):
        out *= d + 2 * i
    return out


def _integrate_canonical(n: int, a: Exponents) -> Fraction:
    nrows = len(a)
    ncols = len(a[0])
    columns = list(zip(*a))
    # polynomial in x_0 .. x_c after integrating columns > c
    current = MultiPoly.constant(1)
    for c in range(ncols - 1, -1, -1):
        names = [_column_variable(c, r) for r in range(nrows)]
        own = MultiPoly.monomial({name: e for name, e in zip(names, columns[c]) if e}) if any(columns[c]) else None
        if own is not None:
            current = current * own
        d = n - c
        next_poly = MultiPoly.zero()
        for beta, coeff in current.split(names).items():
            degree = sum(beta)
            if degree % 2:
                continue
            moment = _gaussian_moment(beta, c)
            if moment.is_zero():
                continue
            next_poly = next_poly + coeff * moment / _sphere_norm(d, degree)
        current = next_poly
        if current.is_zero():
            return Fraction(0)
    if not current.is_constant():
        raise AssertionError(f"integration left free variables {current.effective_variables()}")
    return current.constant_term()


_memo: Dict[Tuple[int, Exponents], Fraction] = {}
_memo_lock = threading.Lock()


def integrate_monomial(n: int, a: Sequence[Sequence[int]], degree_cap: int = DEFAULT_DEGREE_CAP) -> Fraction:
    """Exact value of the Haar integral of prod gamma_ij^a_ij over O(n)."""
    if n < 2:
        raise DimensionTooSmall(f"dimension must be at least 2, got {n=}")
    key = canonicalize(a)
    if not key:
        return Fraction(1)
    degree = sum(sum(r) for r in key)
    if degree > degree_cap:
        raise DegreeCapExceeded(f"monomial degree {degree} exceeds cap {degree_cap}")
    if len(key) > n or len(key[0]) > n:
        raise DimensionTooSmall(f"monomial of shape {len(key)}x{len(key[0])} does not fit O({n})")
    if has_odd_line(key):
        return Fraction(0)
    cached = _memo.get((n, key))
    if cached is not None:
        return cached
    value = _integrate_canonical(n, key)
    with _memo_lock:
        _memo.setdefault((n, key), value)
    return value


def exponent_matrix(powers: Dict[str, int], size: int = 4) -> List[List[int]]:
    """Exponent matrix of a monomial over the g{r}{c} variables."""
    a = [[0] * size for _ in range(size)]
    for name, e in powers.items():
        r, c = parse_gamma_name(name)
        a[r][c] += e
    return a


def integrate_polynomial(poly: MultiPoly, n: int, degree_cap: int = DEFAULT_DEGREE_CAP) -> MultiPoly:
    """Integrate out every gamma variable; other variables are kept as coefficients."""
    gammas = [v for v in poly.variables if _GAMMA_NAME.match(v)]
    total = MultiPoly.zero()
    for exps, rest in poly.split(gammas).items():
        value = integrate_monomial(n, exponent_matrix(dict(zip(gammas, exps))), degree_cap=degree_cap)
        if value:
            total = total + rest * value
    return total


def _parity_signature(a: List[List[int]]) -> Tuple[int, ...]:
    return tuple(sum(r) % 2 for r in a) + tuple(sum(c) % 2 for c in zip(*a))


def integrate_product(
    left: MultiPoly, right: MultiPoly, n: int, degree_cap: int = DEFAULT_DEGREE_CAP
) -> MultiPoly:
    """Integral of left * right over gamma.

    ``left`` is a polynomial in gamma only; ``right`` may carry other
    variables. Only pairs of terms whose combined row and column sums are all
    even are multiplied; every distinct combined monomial is integrated once.
    """
    left_gammas = [v for v in left.variables if _GAMMA_NAME.match(v)]
    if set(left.variables) - set(left_gammas):
        raise ValueError(f"left factor must only use gamma variables, got {left.variables}")
    right_gammas = [v for v in right.variables if _GAMMA_NAME.match(v)]

    def index(names: List[str], exps: Tuple[int, ...]) -> Tuple[Tuple[int, ...], List[List[int]]]:
        a = exponent_matrix(dict(zip(names, exps)))
        return tuple(v for row in a for v in row), a

    by_parity: Dict[Tuple[int, ...], List[Tuple[Tuple[int, ...], MultiPoly]]] = {}
    for exps, rest in right.split(right_gammas).items():
        flat, a = index(right_gammas, exps)
        by_parity.setdefault(_parity_signature(a), []).append((flat, rest))

    combined: Dict[Tuple[int, ...], MultiPoly] = {}
    pairs = 0
    for exps, coeff in left.terms.items():
        flat, a = index(left_gammas, exps)
        for other, rest in by_parity.get(_parity_signature(a), []):
            key = tuple(x + y for x, y in zip(flat, other))
            combined[key] = combined[key] + rest * coeff if key in combined else rest * coeff
            pairs += 1

    total = MultiPoly.zero()
    for key, rest in combined.items():
        a = [list(key[i * 4 : (i + 1) * 4]) for i in range(4)]
        value = integrate_monomial(n, a, degree_cap=degree_cap)
        if value:
            total = total + rest * value
    logger.debug(f"integrate_product {len(left)=} {len(right)=} {pairs=} monomials={len(combined)}")
    return total


def haar_samples(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` Haar-random orthogonal n x n matrices, shape (count, n, n)."""
    g = rng.standard_normal((count, n, n))
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diagonal(r, axis1=1, axis2=2))
    signs[signs == 0] = 1.0
    return q * signs[:, None, :]


def mc_estimate(
    n: int,
    a: Sequence[Sequence[int]],
    samples: int = 100_000,
    seed: Optional[int] = None,
    chunk: int = 10_000,
) -> Tuple[float, float]:
    """Monte Carlo mean and standard error of the monomial gamma^a."""
    if samples < 1000:
        raise ValueError(f"need at least 1000 samples, got {samples}")
    exps = np.array(_as_matrix(a), dtype=int) if len(a) else np.zeros((0, 0), dtype=int)
    if exps.shape[0] > n or (exps.ndim == 2 and exps.shape[1] > n):
        raise DimensionTooSmall(f"monomial of shape {exps.shape} does not fit O({n})")
    rng = np.random.default_rng(seed)
    values = []
    remaining = samples
    while remaining > 0:
        size = min(chunk, remaining)
        q = haar_samples(n, size, rng)
        prod = np.ones(size)
        for (i, j), e in np.ndenumerate(exps):
            if e:
                prod = prod * q[:, i, j] ** e
        values.append(prod)
        remaining -= size
    data = np.concatenate(values)
    mean = float(data.mean())
    stderr = float(data.std(ddof=1) / np.sqrt(samples))
    return mean, stderr
