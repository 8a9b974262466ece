# Standard Library
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from dataclasses import field
from functools import lru_cache
from logging import getLogger
from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple

# Third Party Library
import numpy as np

# Local Library
from .config import DEFAULT_BRUTE_FORCE_CAP
from .config import DEFAULT_MC_SAMPLES
from .exactmath import MultiPoly
from .glrep import Signature
from .glrep import rho_coeff
from .glrep import weight_c
from .haar import DegreeCapExceeded
from .haar import haar_samples
from .haar import integrate_product
from .symsys import S2_VARIABLES
from .symsys import a_matrix
from .symsys import b_matrix
from .symsys import base_integral
from .symsys import coefficient_table
from .symsys import reduce_ideal
from .symsys import restrict_to_s1
from .symsys import transpose_s

logger = getLogger(__name__)

GRAM_VARIABLES = ("a", "b", "t11", "t12", "t21", "t22")

# (i, k) of a j = 0 tuple
TupleKey = Tuple[int, int]


class NotAdmissible(ValueError):
    """(lam, i, j, k) is not an admissible tuple"""


class MissingZonalEntry(KeyError):
    """zonal block does not hold the requested entry"""


@dataclass(frozen=True, order=True)
class AdmissibleTuple:
    i: int
    j: int
    k: int
    lam: Signature = field(compare=False)

    def __post_init__(self) -> None:
        if not is_admissible(self.lam, self.i, self.j, self.k):
            raise NotAdmissible(f"({self.lam}, {self.i}, {self.j}, {self.k}) is not admissible")

    @property
    def key(self) -> TupleKey:
        return self.i, self.k

    @property
    def label(self) -> str:
        return f"({self.i},{self.j},{self.k})"


def is_admissible(lam: Signature, i: int, j: int, k: int) -> bool:
    if i == 0:
        return lam.degree == 0 and j == 0 and k == 0
    if i == 1:
        return lam.lam2 == 0 and j == 0 and k == 0
    if i == 2:
        return j >= 0 and 0 <= k <= lam.m and (lam.lam2 + k) % 2 == 0
    return False


def admissible_tuples(lam: Signature, d2: int, max_i: int = 2) -> List[AdmissibleTuple]:
    """Rows of the kernel block: admissible tuples with |lam| + 2j <= d2, ordered by i, j, k."""
    if d2 < lam.degree:
        raise ValueError(f"d2={d2} is below |lam|={lam.degree}")
    out = []
    if max_i >= 0 and is_admissible(lam, 0, 0, 0):
        out.append(AdmissibleTuple(0, 0, 0, lam))
    if max_i >= 1 and is_admissible(lam, 1, 0, 0):
        out.append(AdmissibleTuple(1, 0, 0, lam))
    if max_i >= 2:
        for j in range((d2 - lam.degree) // 2 + 1):
            for k in range(lam.m + 1):
                if is_admissible(lam, 2, j, k):
                    out.append(AdmissibleTuple(2, j, k, lam))
    return out


def base_keys(lam: Signature, max_i: int = 2) -> List[TupleKey]:
    return [t.key for t in admissible_tuples(lam, lam.degree, max_i) if t.j == 0]


@lru_cache(maxsize=None)
def compute_P(lam: Signature, k1: int, k2: int, n: int) -> MultiPoly:
    """Reduced p[k1, k2](S) over S11, S12, S21, S22."""
    table = coefficient_table(lam, k2)
    return base_integral(lam, k1, k2, n) * table.grouped_sum


def brute_force_P(lam: Signature, k1: int, k2: int, n: int, cap: int = DEFAULT_BRUTE_FORCE_CAP) -> MultiPoly:
    """Direct expansion of sum_l conj(rho(A)[l, k1]) rho(B)[l, k2] integrated over gamma."""
    if lam.degree > cap:
        raise DegreeCapExceeded(f"brute force is capped at |lam| <= {cap}, got {lam}")
    if n < 4:
        raise ValueError(f"dimension must be at least 4, got {n=}")
    a = a_matrix()
    b = b_matrix()
    real = MultiPoly.zero()
    imag = MultiPoly.zero()
    for l in range(lam.dim):  # noqa: E741
        x = rho_coeff(lam, l, k1).evaluate(a)
        y = rho_coeff(lam, l, k2).evaluate(b)
        real = real + integrate_product(x.re, y.re, n) + integrate_product(x.im, y.im, n)
        imag = imag + integrate_product(x.re, y.im, n) - integrate_product(x.im, y.re, n)
    if not reduce_ideal(imag).is_zero():
        raise ValueError(f"imaginary part of P does not vanish for {lam=} {k1=} {k2=}")
    reduced = reduce_ideal(real)
    leftover = [v for v in reduced.effective_variables() if v in S2_VARIABLES]
    if leftover:
        raise ValueError(f"reduction left {leftover} in P for {lam=} {k1=} {k2=}")
    return restrict_to_s1(reduced)


# Inner-product form


def _gram(p: str, q: str) -> MultiPoly:
    return MultiPoly.variable(f"t{p}{q}", GRAM_VARIABLES)


_SECTION_COLUMNS = {
    1: {1: {"1": 1}},
    2: {1: {"1": 1, "2": 1}, 2: {"1": 1, "2": -1}},
}


def _column_pairing(i1: int, l1: int, i2: int, l2: int) -> MultiPoly:
    """<u_l1(J1), u_l2(J2)> with u1 = x1 + x2, u2 = x1 - x2 (u1 = x for one point)."""
    total = MultiPoly.zero(GRAM_VARIABLES)
    for p, cp in _SECTION_COLUMNS[i1][l1].items():
        for q, cq in _SECTION_COLUMNS[i2][l2].items():
            total = total + _gram(p, q) * (cp * cq)
    return total


def _q_squared(side: str, l: int) -> MultiPoly:
    """q_l^2 = 2 + 2<x1, x2> (l = 1) or 2 - 2<x1, x2> (l = 2)."""
    inner = MultiPoly.variable(side, GRAM_VARIABLES)
    return 2 + inner * 2 if l == 1 else 2 - inner * 2


@lru_cache(maxsize=None)
def _entry_from_p(p: MultiPoly, lam: Signature, row: TupleKey, col: TupleKey) -> MultiPoly:
    (i1, k1), (i2, k2) = row, col
    if i1 == 0 or i2 == 0:
        if not p.is_constant():
            raise ValueError(f"non-constant p for an empty set: {p!r}")
        return MultiPoly.constant(p.constant_term(), GRAM_VARIABLES)
    pairing = {(l1, l2): _column_pairing(i1, l1, i2, l2) for l1 in range(1, i1 + 1) for l2 in range(1, i2 + 1)}
    total = MultiPoly.zero(GRAM_VARIABLES)
    for powers, coeff in p.monomials():
        term = MultiPoly.constant(coeff, GRAM_VARIABLES)
        row_count = {1: 0, 2: 0}
        col_count = {1: 0, 2: 0}
        for name, e in powers.items():
            l1, l2 = int(name[1]), int(name[2])
            if l1 > i1 or l2 > i2:
                raise ValueError(f"{name} does not fit a {i1}x{i2} block in {p!r}")
            term = term * pairing[(l1, l2)] ** e
            row_count[l1] += e
            col_count[l2] += e
        for side, i, k, counts in (("a", i1, k1, row_count), ("b", i2, k2, col_count)):
            if i != 2:
                continue
            for l in (1, 2):  # noqa: E741
                deficiency = weight_c(lam, k, l) - counts[l]
                if deficiency < 0 or deficiency % 2:
                    raise ValueError(f"column/row count {counts[l]} incompatible with weight in {p!r}")
                if deficiency:
                    term = term * _q_squared(side, l) ** (deficiency // 2)
        total = total + term
    return total.with_variables(GRAM_VARIABLES)


def zonal_entry(
    lam: Signature, row: AdmissibleTuple, col: AdmissibleTuple, n: int, p: Optional[MultiPoly] = None
) -> MultiPoly:
    """Z_lam(J1, J2)[row, col] as a polynomial in a, b, t11, t12, t21, t22."""
    for t in (row, col):
        if not is_admissible(lam, t.i, t.j, t.k):
            raise NotAdmissible(f"{t.label} is not admissible for {lam}")
    if p is None:
        p = compute_P(lam, row.k, col.k, n)
    entry = _entry_from_p(p, lam, row.key, col.key)
    return _with_j(entry, row.j, col.j)


def _with_j(entry: MultiPoly, j_row: int, j_col: int) -> MultiPoly:
    if j_row:
        entry = entry * MultiPoly.variable("a", GRAM_VARIABLES) ** j_row
    if j_col:
        entry = entry * MultiPoly.variable("b", GRAM_VARIABLES) ** j_col
    return entry


@dataclass
class ZonalBlock:
    """Zonal matrix of one signature; stores the j = 0 entries."""

    lam: Signature
    n: int
    max_i: int
    base: Dict[Tuple[TupleKey, TupleKey], MultiPoly]

    def entry(self, row: AdmissibleTuple, col: AdmissibleTuple) -> MultiPoly:
        try:
            base = self.base[(row.key, col.key)]
        except KeyError:
            raise MissingZonalEntry(f"no entry {row.label}x{col.label} for {self.lam} at n={self.n}")
        return _with_j(base, row.j, col.j)

    def rows(self, d2: int) -> List[AdmissibleTuple]:
        return admissible_tuples(self.lam, d2, self.max_i)

    def entries(self, d2: int) -> Dict[Tuple[AdmissibleTuple, AdmissibleTuple], MultiPoly]:
        rows = self.rows(d2)
        return {(r, c): self.entry(r, c) for r in rows for c in rows}

    def restrict(self, max_i: int) -> "ZonalBlock":
        if max_i > self.max_i:
            raise ValueError(f"block holds rows up to i={self.max_i}, asked for {max_i}")
        base = {k: v for k, v in self.base.items() if k[0][0] <= max_i and k[1][0] <= max_i}
        return ZonalBlock(lam=self.lam, n=self.n, max_i=max_i, base=base)


def _compute_P_task(args: Tuple[Signature, int, int, int]) -> Tuple[int, int, MultiPoly]:
    lam, k1, k2, n = args
    return k1, k2, compute_P(lam, k1, k2, n)


def generate_block(lam: Signature, n: int, max_i: int = 2, threads: int = 1) -> ZonalBlock:
    keys = base_keys(lam, max_i)
    ks = sorted({k for _, k in keys})
    tasks = [(lam, k1, k2, n) for k1 in ks for k2 in ks if k1 <= k2]
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_compute_P_task, tasks))
    else:
        results = [_compute_P_task(t) for t in tasks]
    p: Dict[Tuple[int, int], MultiPoly] = {}
    for k1, k2, poly in results:
        p[(k1, k2)] = poly
        if k1 != k2:
            p[(k2, k1)] = transpose_s(poly)
    base = {(r, c): _entry_from_p(p[(r[1], c[1])], lam, r, c) for r in keys for c in keys}
    logger.info(f"generated zonal block {lam} {n=} {max_i=} entries={len(base)}")
    return ZonalBlock(lam=lam, n=n, max_i=max_i, base=base)


# Monte Carlo oracle


def _orthogonal_unit(x: np.ndarray) -> np.ndarray:
    e = np.zeros_like(x)
    e[int(np.argmin(np.abs(x)))] = 1.0
    c = e - np.dot(e, x) * x
    return c / np.linalg.norm(c)


def _section(points: np.ndarray, i: int, lam: Signature, t: AdmissibleTuple) -> Tuple[float, Optional[np.ndarray]]:
    """(xi, M) with psi = xi * rho(omega gamma M) w_k; M is n x 2."""
    if len(points) != i:
        return 0.0, None
    if i == 0:
        return 1.0, None
    if i == 1:
        x = points[0]
        return 1.0, np.stack([x, _orthogonal_unit(x)], axis=1)
    x1, x2 = points
    a = float(np.dot(x1, x2))
    c1, c2 = weight_c(lam, t.k, 1), weight_c(lam, t.k, 2)
    q1 = np.sqrt(max(2 + 2 * a, 0.0))
    q2 = np.sqrt(max(2 - 2 * a, 0.0))
    if q1 < 1e-12:
        return (a**t.j) * (0.0**c1) * (2.0**c2), np.stack([_orthogonal_unit(x1), x1], axis=1)
    if q2 < 1e-12:
        return (a**t.j) * (2.0**c1) * (0.0**c2), np.stack([x1, _orthogonal_unit(x1)], axis=1)
    return (a**t.j) * q1**c1 * q2**c2, np.stack([(x1 + x2) / q1, (x1 - x2) / q2], axis=1)


def _psi(lam: Signature, t: AdmissibleTuple, points: np.ndarray, gammas: np.ndarray) -> Optional[List[np.ndarray]]:
    xi, m = _section(points, t.i, lam, t)
    count = gammas.shape[0]
    if xi == 0.0 and m is None and t.i != 0:
        return None
    if t.i == 0:
        return [np.ones(count, dtype=complex)]
    gm = gammas @ m
    entries = {
        "A11": gm[:, 0, 0] + 1j * gm[:, 2, 0],
        "A12": gm[:, 0, 1] + 1j * gm[:, 2, 1],
        "A21": gm[:, 1, 0] + 1j * gm[:, 3, 0],
        "A22": gm[:, 1, 1] + 1j * gm[:, 3, 1],
    }
    return [xi * rho_coeff(lam, l, t.k).evaluate(entries, coerce=complex) for l in range(lam.dim)]


def numeric_zonal_oracle(
    lam: Signature,
    row: AdmissibleTuple,
    col: AdmissibleTuple,
    j1: Sequence[Sequence[float]],
    j2: Sequence[Sequence[float]],
    n: int,
    samples: int = DEFAULT_MC_SAMPLES,
    seed: Optional[int] = None,
    chunk: int = 10_000,
) -> Tuple[float, float]:
    """Monte Carlo estimate (mean, stderr) of Z_lam(J1, J2)[row, col] from the defining integral."""
    pts1 = np.asarray(j1, dtype=float).reshape(-1, n) if len(j1) else np.zeros((0, n))
    pts2 = np.asarray(j2, dtype=float).reshape(-1, n) if len(j2) else np.zeros((0, n))
    if len(pts1) != row.i or len(pts2) != col.i:
        return 0.0, 0.0
    if lam.degree == 0:
        xi1, _ = _section(pts1, row.i, lam, row)
        xi2, _ = _section(pts2, col.i, lam, col)
        return float(xi1 * xi2), 0.0
    rng = np.random.default_rng(seed)
    values = []
    remaining = samples
    while remaining > 0:
        size = min(chunk, remaining)
        gammas = haar_samples(n, size, rng)
        psi1 = _psi(lam, row, pts1, gammas)
        psi2 = _psi(lam, col, pts2, gammas)
        if psi1 is None or psi2 is None:
            values.append(np.zeros(size))
        else:
            values.append(np.real(sum(np.conj(u) * v for u, v in zip(psi1, psi2))))
        remaining -= size
    data = np.concatenate(values)
    return float(data.mean()), float(data.std(ddof=1) / np.sqrt(len(data)))


def gram_point(
    j1: Sequence[Sequence[float]], j2: Sequence[Sequence[float]]
) -> Dict[str, float]:
    """Values of the Gram variables for concrete point sets (missing points give 0)."""

    def dot(u: Sequence[float], v: Sequence[float]) -> float:
        return float(np.dot(np.asarray(u, dtype=float), np.asarray(v, dtype=float)))

    point = {name: 0.0 for name in GRAM_VARIABLES}
    if len(j1) == 2:
        point["a"] = dot(j1[0], j1[1])
    if len(j2) == 2:
        point["b"] = dot(j2[0], j2[1])
    for p, x in enumerate(j1, start=1):
        for q, y in enumerate(j2, start=1):
            point[f"t{p}{q}"] = dot(x, y)
    return point


def evaluate_entry(entry: MultiPoly, point: Dict[str, float]) -> float:
    return float(entry.evaluate(point, coerce=float))
