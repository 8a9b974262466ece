"""Exact certification of numerical SDP solutions.

A certificate stores every block as B X B^T with rational B and X. It is
accepted when the affine constraints hold over the rationals and every X has
a Cholesky factorization whose pivots are strictly positive balls.
"""
# Standard Library
from dataclasses import dataclass
from dataclasses import field
from fractions import Fraction
from itertools import combinations
from itertools import product
from logging import getLogger
from pathlib import Path
from typing import Dict
from typing import List
from typing import Mapping
from typing import NamedTuple
from typing import Optional
from typing import Sequence
from typing import Set
from typing import Tuple

# Local Library
from .config import DEFAULT_DENOMINATOR_BOUND
from .config import DEFAULT_PRECISION_BITS
from .exactmath import Ball
from .exactmath import MultiPoly
from .exactmath import RatMatrix
from .exactmath import Scalar
from .exactmath import ZeroPolynomial
from .exactmath import format_rational
from .exactmath import mpf_to_fraction
from .exactmath import parse_rational
from .exactmath import solve_linear
from .model import ProblemSpec
from .sdp import EntryKey
from .sdp import LinearPolyForm
from .sdp import SDPProblem
from .sdp import edge_name
from .sdp import evaluate_forms
from .sdp import kernel_values
from .sdp import pair_entries
from .solver import PrimalDualSolution

logger = getLogger(__name__)

CERTIFICATE_HEADER = "# kisskit-certificate version=1"


class AffineViolation(ValueError):
    """an affine constraint does not hold exactly"""


class PSDUncertified(ValueError):
    """ball Cholesky could not certify positive definiteness"""


class MarginTooSmall(ValueError):
    """rounding destroyed positive definiteness"""


class NotIndependent(ValueError):
    """point set is not a spherical code for the angle"""


class ChainViolation(ValueError):
    """0 <= sum <= K(0, 0) - |C| does not hold"""


# Certificates


@dataclass
class CertificateBlock:
    name: str
    factor: RatMatrix
    gram: RatMatrix

    def matrix(self) -> List[List[Fraction]]:
        """B X B^T"""
        return (self.factor @ self.gram @ self.factor.transpose()).to_lists()


@dataclass
class ExactCertificate:
    spec: Optional[ProblemSpec]
    blocks: List[CertificateBlock]
    bound: Fraction

    def matrices(self) -> List[List[List[Fraction]]]:
        return [b.matrix() for b in self.blocks]


def write_certificate(cert: ExactCertificate, path: Path) -> None:
    lines = [CERTIFICATE_HEADER]
    lines.append(f"spec {cert.spec.to_text()}" if cert.spec is not None else "spec none")
    lines.append(f"bound {format_rational(cert.bound)}")
    for block in cert.blocks:
        rows, cols = block.factor.shape
        lines.append(f"block {block.name} B={rows}x{cols} X={cols}x{cols}")
        for row in block.factor.to_lists():
            lines.append("B " + " ".join(format_rational(v) for v in row))
        for row in block.gram.to_lists():
            lines.append("X " + " ".join(format_rational(v) for v in row))
    with open(file=str(path), mode="wt", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    logger.info(f"wrote certificate {path} bound={format_rational(cert.bound)}")


def read_certificate(path: Path) -> ExactCertificate:
    with open(file=str(path), mode="rt", encoding="utf-8") as f:
        lines = [line.strip() for line in f if line.strip()]
    if not lines or lines[0] != CERTIFICATE_HEADER:
        raise ValueError(f"{path}: missing header {CERTIFICATE_HEADER!r}")
    spec: Optional[ProblemSpec] = None
    bound: Optional[Fraction] = None
    blocks: List[CertificateBlock] = []
    pending: Optional[Tuple[str, int, int]] = None
    b_rows: List[List[Fraction]] = []
    x_rows: List[List[Fraction]] = []

    def flush() -> None:
        if pending is None:
            return
        name, rows, cols = pending
        if len(b_rows) != rows or len(x_rows) != cols:
            raise ValueError(f"{path}: block {name} has {len(b_rows)} B rows and {len(x_rows)} X rows")
        blocks.append(CertificateBlock(name=name, factor=RatMatrix.from_rows(b_rows), gram=RatMatrix.from_rows(x_rows)))

    for line in lines[1:]:
        kind, _, rest = line.partition(" ")
        if kind == "spec":
            spec = None if rest == "none" else ProblemSpec.from_text(rest)
        elif kind == "bound":
            bound = parse_rational(rest)
        elif kind == "block":
            flush()
            name, b_shape, _ = rest.split()
            rows, cols = (int(v) for v in b_shape[2:].split("x"))
            pending = (name, rows, cols)
            b_rows, x_rows = [], []
        elif kind == "B":
            b_rows.append([parse_rational(v) for v in rest.split()])
        elif kind == "X":
            x_rows.append([parse_rational(v) for v in rest.split()])
        else:
            raise ValueError(f"{path}: unknown record {kind!r}")
    flush()
    if bound is None:
        raise ValueError(f"{path}: no bound line")
    return ExactCertificate(spec=spec, blocks=blocks, bound=bound)


# Positive definiteness


def exact_cholesky_pivots(matrix: Sequence[Sequence[Scalar]]) -> List[Fraction]:
    """LDL^T pivots over the rationals; stops after the first nonpositive pivot."""
    n = len(matrix)
    a = [[Fraction(v) for v in row] for row in matrix]
    pivots: List[Fraction] = []
    for k in range(n):
        pivot = a[k][k]
        pivots.append(pivot)
        if pivot <= 0:
            break
        for i in range(k + 1, n):
            factor = a[i][k] / pivot
            if not factor:
                continue
            for j in range(k + 1, i + 1):
                a[i][j] -= factor * a[j][k]
            for j in range(k + 1, i + 1):
                a[j][i] = a[i][j]
    return pivots


def is_positive_definite_exact(matrix: Sequence[Sequence[Scalar]]) -> bool:
    pivots = exact_cholesky_pivots(matrix)
    return len(pivots) == len(matrix) and all(p > 0 for p in pivots)


def ball_cholesky(matrix: Sequence[Sequence[Scalar]], precision: int = DEFAULT_PRECISION_BITS) -> List[Ball]:
    """Diagonal of the Cholesky factor in ball arithmetic.

    Raises PSDUncertified as soon as a pivot ball is not strictly positive;
    that outcome is inconclusive, not a proof of indefiniteness.
    """
    n = len(matrix)
    low: List[List[Ball]] = [[Ball(0, precision=precision)] * n for _ in range(n)]
    diagonal: List[Ball] = []
    for j in range(n):
        pivot = Ball(Fraction(matrix[j][j]), precision=precision)
        for k in range(j):
            pivot = pivot - low[j][k] * low[j][k]
        if not pivot.is_positive():
            raise PSDUncertified(f"pivot {j} is {pivot!r}")
        root = pivot.sqrt()
        low[j][j] = root
        diagonal.append(root)
        for i in range(j + 1, n):
            value = Ball(Fraction(matrix[i][j]), precision=precision)
            for k in range(j):
                value = value - low[i][k] * low[j][k]
            low[i][j] = value / root
    return diagonal


# Rounding


def _coefficient(key: EntryKey, value: Fraction) -> Fraction:
    """Weight of the variable X[r, c] in <A, X>."""
    return value if key[1] == key[2] else 2 * value


def _apply(blocks: List[List[List[Fraction]]], key: EntryKey, delta: Fraction) -> None:
    b, r, c = key
    blocks[b][r][c] += delta
    if r != c:
        blocks[b][c][r] += delta


def _residuals(problem: SDPProblem, blocks: List[List[List[Fraction]]]) -> List[Fraction]:
    return [c.rhs - pair_entries(c.entries, blocks) for c in problem.constraints]


def _correction_system(
    problem: SDPProblem,
    users: Mapping[EntryKey, List[int]],
    private: Mapping[int, List[EntryKey]],
    seeds: Sequence[int],
) -> List[int]:
    """Constraints of the least-norm step: the seeds plus, transitively, every constraint
    without private entries that touches one of their entries."""
    members: Set[int] = set(seeds)
    frontier = list(seeds)
    while frontier:
        i = frontier.pop()
        for key, v in problem.constraints[i].entries.items():
            if not v:
                continue
            for j in users[key]:
                if j not in members and j not in private:
                    members.add(j)
                    frontier.append(j)
    return sorted(members)


def round_certificate(
    sol: PrimalDualSolution,
    problem: SDPProblem,
    denominator_bound: int = DEFAULT_DENOMINATOR_BOUND,
    precision: int = DEFAULT_PRECISION_BITS,
) -> ExactCertificate:
    """Rationalize ``sol`` and restore the affine constraints exactly.

    Entries are truncated continued fractions under ``denominator_bound``.
    Constraints whose entries are all shared with other constraints are
    corrected first by a least-norm step on those shared entries. The step
    also holds every other constraint without private entries that it
    touches at its current value. Every remaining residual is then removed
    on the entries private to its constraint. The result is checked with
    verify_certificate.
    """
    if len(sol.primal) != len(problem.blocks):
        raise ValueError(f"solution has {len(sol.primal)} blocks, problem {len(problem.blocks)}")
    blocks: List[List[List[Fraction]]] = []
    for block, source in zip(problem.blocks, sol.primal):
        n = block.size
        x = [[Fraction(0)] * n for _ in range(n)]
        for r in range(n):
            for c in range(r, n):
                if block.diagonal and r != c:
                    continue
                value = mpf_to_fraction(source[r][c]).limit_denominator(denominator_bound)
                x[r][c] = value
                x[c][r] = value
        blocks.append(x)

    users: Dict[EntryKey, List[int]] = {}
    for i, constraint in enumerate(problem.constraints):
        for key, v in constraint.entries.items():
            if v:
                users.setdefault(key, []).append(i)
    private: Dict[int, List[EntryKey]] = {}
    for key, indices in users.items():
        if len(indices) == 1:
            private.setdefault(indices[0], []).append(key)

    residuals = _residuals(problem, blocks)
    shared = _correction_system(problem, users, private, [i for i, r in enumerate(residuals) if r and i not in private])
    if shared:
        keys = sorted({key for i in shared for key, v in problem.constraints[i].entries.items() if v})
        column = {key: k for k, key in enumerate(keys)}
        rows = [
            {column[key]: _coefficient(key, v) for key, v in problem.constraints[i].entries.items() if v}
            for i in shared
        ]
        a = RatMatrix(len(shared), len(keys), rows)
        try:
            w = solve_linear(a @ a.transpose(), [residuals[i] for i in shared])
        except ValueError as e:
            raise AffineViolation(f"no exact correction for {len(shared)} constraints without private entries") from e
        for key, k in column.items():
            delta = sum((w[p] * rows[p].get(k, 0) for p in range(len(shared))), Fraction(0))
            if delta:
                _apply(blocks, key, delta)
        logger.debug(f"least-norm correction on {len(keys)} shared entries for {len(shared)} constraints")
        residuals = _residuals(problem, blocks)

    corrected = 0
    for i, residual in enumerate(residuals):
        if not residual:
            continue
        keys = private.get(i)
        if not keys:
            label = problem.constraints[i].label or str(i)
            raise AffineViolation(f"constraint {label} has residual {residual} and no private entries")
        weights = [_coefficient(key, problem.constraints[i].entries[key]) for key in keys]
        norm = sum((w * w for w in weights), Fraction(0))
        for key, w in zip(keys, weights):
            _apply(blocks, key, residual * w / norm)
        corrected += 1
    logger.debug(f"private correction on {corrected} constraints")

    cert = ExactCertificate(
        spec=problem.spec,
        blocks=[
            CertificateBlock(name=block.name, factor=RatMatrix.identity(block.size), gram=RatMatrix.from_rows(x))
            for block, x in zip(problem.blocks, blocks)
        ],
        bound=problem.objective_value(blocks),
    )
    try:
        verify_certificate(cert, problem, precision=precision)
    except PSDUncertified as e:
        raise MarginTooSmall(f"rounded solution is not certified positive definite: {e}") from e
    logger.info(f"rounded certificate with {denominator_bound=}: bound={format_rational(cert.bound)}")
    return cert


# Verification


def _check_shapes(cert: ExactCertificate, problem: SDPProblem) -> List[List[List[Fraction]]]:
    if len(cert.blocks) != len(problem.blocks):
        raise AffineViolation(f"certificate has {len(cert.blocks)} blocks, problem {len(problem.blocks)}")
    matrices = []
    for block, entry in zip(problem.blocks, cert.blocks):
        if block.name != entry.name:
            raise AffineViolation(f"block {entry.name} where {block.name} was expected")
        if entry.gram.nrows != entry.gram.ncols or not entry.gram.is_symmetric():
            raise AffineViolation(f"X of block {block.name} is not square symmetric")
        if entry.factor.shape != (block.size, entry.gram.nrows):
            raise AffineViolation(f"B of block {block.name} has shape {entry.factor.shape}")
        full = entry.matrix()
        if block.diagonal and any(full[r][c] for r in range(block.size) for c in range(block.size) if r != c):
            raise AffineViolation(f"diagonal block {block.name} has off-diagonal entries")
        matrices.append(full)
    return matrices


def check_affine(cert: ExactCertificate, problem: SDPProblem) -> Fraction:
    """All equalities over the rationals; returns the objective."""
    matrices = _check_shapes(cert, problem)
    for i, constraint in enumerate(problem.constraints):
        value = pair_entries(constraint.entries, matrices)
        if value != constraint.rhs:
            label = constraint.label or str(i)
            raise AffineViolation(f"constraint {label}: {value} != {constraint.rhs}")
    objective = problem.objective_value(matrices)
    if objective != cert.bound:
        raise AffineViolation(f"claimed bound {cert.bound} differs from the objective {objective}")
    return objective


def verify_certificate(
    cert: ExactCertificate, problem: SDPProblem, precision: int = DEFAULT_PRECISION_BITS
) -> Fraction:
    """The certified bound K(0, 0)."""
    bound = check_affine(cert, problem)
    for entry in cert.blocks:
        try:
            ball_cholesky(entry.gram.to_lists(), precision=precision)
        except PSDUncertified as e:
            raise PSDUncertified(f"block {entry.name}: {e}") from e
    logger.info(f"certificate verified: bound={format_rational(bound)} ({len(cert.blocks)} blocks)")
    return bound


def verification_report(
    cert: ExactCertificate, problem: SDPProblem, precision: int = DEFAULT_PRECISION_BITS
) -> Tuple[bool, List[str]]:
    """One PASS/FAIL line per check."""
    lines: List[str] = []
    ok = True
    try:
        bound = check_affine(cert, problem)
        lines.append(f"PASS affine constraints={problem.num_constraints} bound={format_rational(bound)}")
    except AffineViolation as e:
        ok = False
        lines.append(f"FAIL affine {e}")
    for entry in cert.blocks:
        try:
            pivots = ball_cholesky(entry.gram.to_lists(), precision=precision)
            smallest = min(pivots, key=lambda p: p.lower)
            lines.append(f"PASS psd block={entry.name} size={entry.gram.nrows} min_pivot={float(smallest.lower):.3e}")
        except PSDUncertified as e:
            ok = False
            lines.append(f"FAIL psd block={entry.name} {e}")
    lines.append(f"{'PASS' if ok else 'FAIL'} certificate")
    return ok, lines


def write_report(path: Path, lines: Sequence[str]) -> None:
    with open(file=str(path), mode="wt", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


# Sturm sequences

Coeffs = List[Fraction]


def _trim(p: Coeffs) -> Coeffs:
    p = list(p)
    while p and not p[-1]:
        p.pop()
    return p


def _primitive(p: Coeffs) -> Coeffs:
    """Positive multiple of p with coprime integer coefficients."""
    p = _trim(p)
    if not p:
        return p
    lcm = 1
    for c in p:
        lcm = lcm * c.denominator // _gcd(lcm, c.denominator)
    ints = [int(c * lcm) for c in p]
    g = 0
    for c in ints:
        g = _gcd(g, c)
    return [Fraction(c, g) for c in ints]


def _gcd(a: int, b: int) -> int:
    a, b = abs(a), abs(b)
    while b:
        a, b = b, a % b
    return a


def _divmod(p: Coeffs, d: Coeffs) -> Tuple[Coeffs, Coeffs]:
    p, d = _trim(p), _trim(d)
    if not d:
        raise ZeroDivisionError("division by the zero polynomial")
    quotient = [Fraction(0)] * max(len(p) - len(d) + 1, 1)
    rem = list(p)
    while len(rem) >= len(d) and rem:
        shift = len(rem) - len(d)
        factor = rem[-1] / d[-1]
        quotient[shift] = factor
        for k, c in enumerate(d):
            rem[shift + k] -= factor * c
        rem = _trim(rem)
    return _trim(quotient), rem


def _derivative(p: Coeffs) -> Coeffs:
    return [k * c for k, c in enumerate(p)][1:]


def _poly_gcd(p: Coeffs, q: Coeffs) -> Coeffs:
    p, q = _primitive(p), _primitive(q)
    while q:
        p, q = q, _primitive(_divmod(p, q)[1])
    return p


def _value(p: Coeffs, x: Fraction) -> Fraction:
    total = Fraction(0)
    for c in reversed(p):
        total = total * x + c
    return total


def _sign(x: Fraction) -> int:
    return (x > 0) - (x < 0)


def sturm_chain(p: Coeffs) -> List[Coeffs]:
    chain = [_primitive(p), _primitive(_derivative(p))]
    while chain[-1] and len(chain[-1]) > 1:
        rem = _divmod(chain[-2], chain[-1])[1]
        if not rem:
            break
        chain.append(_primitive([-c for c in rem]))
    return [c for c in chain if c]


def _variations(chain: Sequence[Coeffs], x: Fraction) -> int:
    signs = [s for s in (_sign(_value(p, x)) for p in chain) if s]
    return sum(1 for u, v in zip(signs, signs[1:]) if u != v)


@dataclass
class SturmReport:
    polynomial: MultiPoly
    lower: Fraction
    upper: Fraction
    closed: bool
    count: int
    intervals: List[Tuple[Fraction, Fraction]] = field(default_factory=list)
    roots: List[Optional[Fraction]] = field(default_factory=list)
    candidates_complete: Optional[bool] = None

    @property
    def rational_roots(self) -> List[Fraction]:
        return [r for r in self.roots if r is not None]


def _identify(p: Coeffs, lo: Fraction, hi: Fraction, max_denominator: int = 10**6) -> Optional[Fraction]:
    """Exact rational root of the square-free p in (lo, hi], if there is one with a small denominator."""
    if not _value(p, hi):
        return hi
    for _ in range(200):
        if hi - lo < Fraction(1, 2**80):
            break
        mid = (lo + hi) / 2
        value = _value(p, mid)
        if not value:
            return mid
        if _sign(value) == _sign(_value(p, hi)):
            hi = mid
        else:
            lo = mid
    guess = ((lo + hi) / 2).limit_denominator(max_denominator)
    if lo < guess <= hi and not _value(p, guess):
        return guess
    return None


def sturm_analyze(
    p: MultiPoly,
    a: Scalar,
    b: Scalar,
    closed: bool = False,
    candidates: Optional[Sequence[Scalar]] = None,
) -> SturmReport:
    """Distinct real roots of the univariate p in (a, b] ([a, b] with ``closed``).

    Roots are isolated by bisection of Sturm counts; rational roots are
    identified exactly. With ``candidates`` the report also says whether
    those values are roots accounting for every root in the interval.
    """
    if p.is_zero():
        raise ZeroPolynomial("Sturm analysis of the zero polynomial")
    a, b = Fraction(a), Fraction(b)
    if a >= b:
        raise ValueError(f"empty interval ({a}, {b}]")
    coeffs = _trim(p.univariate_coefficients())
    square_free = _primitive(_divmod(coeffs, _poly_gcd(coeffs, _derivative(coeffs)))[0]) if len(coeffs) > 1 else coeffs
    chain = sturm_chain(square_free) if len(square_free) > 1 else [square_free]

    def count(lo: Fraction, hi: Fraction) -> int:
        return _variations(chain, lo) - _variations(chain, hi)

    intervals: List[Tuple[Fraction, Fraction]] = []
    stack = [(a, b)]
    while stack:
        lo, hi = stack.pop()
        n = count(lo, hi)
        if n == 0:
            continue
        if n == 1:
            intervals.append((lo, hi))
            continue
        mid = (lo + hi) / 2
        stack.append((mid, hi))
        stack.append((lo, mid))
    intervals.sort()
    roots = [_identify(square_free, lo, hi) for lo, hi in intervals]
    if closed and not _value(square_free, a):
        intervals.insert(0, (a, a))
        roots.insert(0, a)
    report = SturmReport(
        polynomial=p,
        lower=a,
        upper=b,
        closed=closed,
        count=len(intervals),
        intervals=intervals,
        roots=roots,
    )
    if candidates is not None:
        report.candidates_complete = _candidates_complete(square_free, a, b, closed, candidates)
    logger.debug(f"sturm on {'[' if closed else '('}{a}, {b}]: {report.count} roots {report.rational_roots}")
    return report


def _candidates_complete(
    square_free: Coeffs, a: Fraction, b: Fraction, closed: bool, candidates: Sequence[Scalar]
) -> bool:
    rest = square_free
    for c in sorted({Fraction(c) for c in candidates}):
        inside = a <= c <= b if closed else a < c <= b
        if not inside or _value(rest, c):
            return False
        rest, remainder = _divmod(rest, [-c, Fraction(1)])
        if remainder:
            return False
    if len(_trim(rest)) <= 1:
        return True
    chain = sturm_chain(rest)
    if closed and not _value(rest, a):
        return False
    return _variations(chain, a) - _variations(chain, b) == 0


# Point configurations


class CodeReport(NamedTuple):
    count: int
    squared_norm: Optional[int]
    gram_values: Set[Fraction]
    max_inner: Optional[Fraction]
    passed: bool
    problems: List[str]


def d4_roots() -> List[Tuple[int, ...]]:
    """The 24 integer vectors of squared length 2 in dimension 4; unit vectors after scaling by 1/sqrt(2)."""
    roots = []
    for i, j in combinations(range(4), 2):
        for si, sj in product((1, -1), repeat=2):
            v = [0, 0, 0, 0]
            v[i], v[j] = si, sj
            roots.append(tuple(v))
    return roots


def code_gram(vectors: Sequence[Sequence[int]]) -> List[List[Fraction]]:
    """Gram matrix of the normalized vectors; all vectors must share a squared norm."""
    norms = {sum(x * x for x in v) for v in vectors}
    if len(norms) != 1:
        raise NotIndependent(f"vectors do not share a squared norm: {sorted(norms)}")
    norm = norms.pop()
    if norm == 0:
        raise NotIndependent("zero vector")
    return [[Fraction(sum(x * y for x, y in zip(u, v)), norm) for v in vectors] for u in vectors]


def check_code(vectors: Sequence[Sequence[int]], cos_theta: Scalar) -> CodeReport:
    """Is this set a spherical code for the angle with cosine ``cos_theta``?"""
    cos_theta = Fraction(cos_theta)
    problems: List[str] = []
    if not vectors:
        return CodeReport(0, None, set(), None, False, ["no vectors"])
    dims = {len(v) for v in vectors}
    if len(dims) != 1:
        return CodeReport(len(vectors), None, set(), None, False, [f"mixed dimensions {sorted(dims)}"])
    try:
        gram = code_gram(vectors)
    except NotIndependent as e:
        return CodeReport(len(vectors), None, set(), None, False, [str(e)])
    squared_norm = sum(x * x for x in vectors[0])
    pairs = [(i, j) for i in range(len(vectors)) for j in range(i + 1, len(vectors))]
    values = {gram[i][j] for i, j in pairs}
    max_inner = max(values) if values else None
    if max_inner is not None and max_inner > cos_theta:
        i, j = next((i, j) for i, j in pairs if gram[i][j] == max_inner)
        problems.append(f"vectors {i} and {j} have inner product {max_inner} > {cos_theta}")
    report = CodeReport(len(vectors), squared_norm, values, max_inner, not problems, problems)
    logger.debug(f"code check: {report.count} vectors, gram values {sorted(values)}, passed={report.passed}")
    return report


def d4_report(cos_theta: Scalar = Fraction(1, 2)) -> CodeReport:
    return check_code(d4_roots(), cos_theta)


# Bound chain


class ChainValues(NamedTuple):
    lower: Fraction
    middle: Fraction
    upper: Fraction


def code_slack_chain(
    cert: ExactCertificate,
    problem: SDPProblem,
    forms: Mapping[int, LinearPolyForm],
    gram: Sequence[Sequence[Scalar]],
    cos_theta: Scalar,
) -> ChainValues:
    """0 <= sum over Q in C, |Q| <= max q, of A K(Q) <= K(0, 0) - |C| for the certified kernel."""
    cos_theta = Fraction(cos_theta)
    size = len(gram)
    g = [[Fraction(v) for v in row] for row in gram]
    for i in range(size):
        if g[i][i] != 1:
            raise NotIndependent(f"point {i} is not a unit vector (Gram {g[i][i]})")
        for j in range(i + 1, size):
            if g[i][j] != g[j][i]:
                raise NotIndependent(f"Gram matrix is not symmetric at ({i}, {j})")
            if g[i][j] > cos_theta:
                raise NotIndependent(f"points {i} and {j} have inner product {g[i][j]} > {cos_theta}")

    matrices = cert.matrices()
    polys = evaluate_forms(forms, kernel_values(problem, matrices))
    empty = problem.objective_value(matrices)
    middle = empty
    for q in sorted(polys):
        poly = polys[q]
        memo: Dict[Tuple[Fraction, ...], Fraction] = {}
        for subset in combinations(range(size), q):
            pairs = list(combinations(range(q), 2))
            point = tuple(g[subset[x]][subset[y]] for x, y in pairs)
            if point not in memo:
                memo[point] = Fraction(poly.evaluate({edge_name(q, x, y): v for (x, y), v in zip(pairs, point)}))
            middle += memo[point]
        logger.debug(f"q={q}: {len(memo)} distinct Gram patterns")
    chain = ChainValues(lower=Fraction(0), middle=middle, upper=empty - size)
    if not chain.lower <= chain.middle <= chain.upper:
        raise ChainViolation(f"chain fails: {chain}")
    logger.info(f"bound chain for |C|={size}: 0 <= {format_rational(middle)} <= {format_rational(chain.upper)}")
    return chain


def p2_root_report(
    cert: ExactCertificate, problem: SDPProblem, forms: Mapping[int, LinearPolyForm], cos_theta: Scalar
) -> SturmReport:
    """Roots of the certified two-point polynomial on [-1, cos_theta]."""
    values = kernel_values(problem, cert.matrices())
    p2 = forms[2].evaluate(values)
    return sturm_analyze(p2, -1, Fraction(cos_theta), closed=True)
