"""Block-diagonal SDP for the level-1 and level-2 truncations.

Problems are kept in primal standard form

    minimize <C, X>  subject to  <A_i, X> = b_i,  X = diag(X_1, ..., X_r) PSD,

with sparse rational data. An entry key ``(block, r, c)`` always has r <= c;
``<A, X>`` counts an off-diagonal key twice, so a linear form whose
coefficient on the variable X[r, c] is ``v`` is stored as ``A[r, c] = v / 2``.
"""
# Standard Library
from dataclasses import dataclass
from dataclasses import field
from fractions import Fraction
from itertools import combinations
from itertools import permutations
from logging import getLogger
from typing import Dict
from typing import List
from typing import Mapping
from typing import Optional
from typing import Sequence
from typing import Tuple

# Third Party Library
import numpy as np
from scipy.optimize import linprog
from scipy.special import eval_gegenbauer

# Local Library
from .exactmath import MultiPoly
from .exactmath import Scalar
from .glrep import Signature
from .glrep import signatures_up_to
from .model import ProblemSpec
from .zonal import GRAM_VARIABLES
from .zonal import AdmissibleTuple
from .zonal import MissingZonalEntry
from .zonal import ZonalBlock
from .zonal import admissible_tuples

logger = getLogger(__name__)

KERNEL = "kernel"
SOS = "sos"
SLACK = "slack"
BLOCK_KINDS = (KERNEL, SOS, SLACK)

EntryKey = Tuple[int, int, int]
Exponent = Tuple[int, ...]


class DegreeInfeasible(ValueError):
    """polynomial degree is above the SOS degree"""


@dataclass
class Block:
    name: str
    size: int
    kind: str
    labels: List[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.kind not in BLOCK_KINDS:
            raise ValueError(f"unknown block kind {self.kind!r}")
        if self.size < 1:
            raise ValueError(f"block {self.name} must have a positive size, got {self.size}")

    @property
    def diagonal(self) -> bool:
        return self.kind == SLACK


@dataclass
class LinearConstraint:
    """<A, X> = rhs with A given by its upper-triangle entries."""

    entries: Dict[EntryKey, Fraction]
    rhs: Fraction
    label: str = ""

    def value(self, blocks: Sequence[Sequence[Sequence[Scalar]]]) -> Fraction:
        return pair_entries(self.entries, blocks)


def pair_entries(entries: Mapping[EntryKey, Fraction], blocks: Sequence[Sequence[Sequence[Scalar]]]) -> Fraction:
    """<A, X> for exact block matrices X."""
    total = Fraction(0)
    for (b, r, c), v in entries.items():
        x = Fraction(blocks[b][r][c])
        total += v * x if r == c else 2 * v * x
    return total


@dataclass
class SDPProblem:
    blocks: List[Block]
    objective: Dict[EntryKey, Fraction]
    constraints: List[LinearConstraint]
    spec: Optional[ProblemSpec] = None

    @property
    def sizes(self) -> List[int]:
        return [b.size for b in self.blocks]

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    def rhs(self) -> List[Fraction]:
        return [c.rhs for c in self.constraints]

    def objective_value(self, blocks: Sequence[Sequence[Sequence[Scalar]]]) -> Fraction:
        return pair_entries(self.objective, blocks)

    def check(self) -> None:
        """Every entry key must point inside its block; diagonal blocks only use diagonal keys."""
        for entries in [self.objective] + [c.entries for c in self.constraints]:
            for b, r, c in entries:
                if not 0 <= b < len(self.blocks):
                    raise ValueError(f"block index {b} out of range")
                block = self.blocks[b]
                if not 0 <= r <= c < block.size:
                    raise ValueError(f"entry ({r}, {c}) outside block {block.name} of size {block.size}")
                if block.diagonal and r != c:
                    raise ValueError(f"off-diagonal entry ({r}, {c}) in diagonal block {block.name}")

    def summary(self) -> str:
        kinds = {k: sum(1 for b in self.blocks if b.kind == k) for k in BLOCK_KINDS}
        largest = max(self.sizes, default=0)
        return (
            f"constraints={self.num_constraints} blocks={len(self.blocks)} kernel={kinds[KERNEL]} "
            f"sos={kinds[SOS]} slack={kinds[SLACK]} largest={largest}"
        )


# Edge variables


def edge_pairs(q: int) -> List[Tuple[int, int]]:
    return list(combinations(range(q), 2))


def edge_variables(q: int) -> Tuple[str, ...]:
    """u for two points, u1.. in the order 12, 13, .., (q-1)q otherwise."""
    pairs = edge_pairs(q)
    if len(pairs) == 1:
        return ("u",)
    return tuple(f"u{i}" for i in range(1, len(pairs) + 1))


def edge_name(q: int, i: int, j: int) -> str:
    a, b = min(i, j), max(i, j)
    return edge_variables(q)[edge_pairs(q).index((a, b))]


def edge_permutation(q: int, perm: Sequence[int]) -> Dict[str, str]:
    """Renaming of the edge variables induced by relabelling point i as perm[i]."""
    return {edge_name(q, i, j): edge_name(q, perm[i], perm[j]) for i, j in edge_pairs(q)}


def inner_product(q: int, i: int, j: int) -> MultiPoly:
    names = edge_variables(q)
    if i == j:
        return MultiPoly.constant(1, names)
    return MultiPoly.variable(edge_name(q, i, j), names)


def gram_matrix(q: int) -> List[List[MultiPoly]]:
    return [[inner_product(q, i, j) for j in range(q)] for i in range(q)]


def union_pair_patterns(q: int, max_size: int = 2) -> List[Tuple[Tuple[int, ...], Tuple[int, ...]]]:
    """Ordered pairs (J1, J2) of subsets of {0..q-1}, each of size <= max_size, with J1 | J2 everything."""
    if not 1 <= q <= 4:
        raise ValueError(f"q must be in 1..4, got {q}")
    everything = set(range(q))
    subsets = [s for size in range(max_size + 1) for s in combinations(range(q), size)]
    return [(a, b) for a in subsets for b in subsets if set(a) | set(b) == everything]


# Linear polynomial forms


@dataclass
class LinearPolyForm:
    """sum_key X[key] * terms[key] + constant, polynomials over ``variables``."""

    variables: Tuple[str, ...]
    terms: Dict[EntryKey, MultiPoly] = field(default_factory=dict)
    constant: MultiPoly = field(default_factory=MultiPoly.zero)

    def add(self, key: EntryKey, poly: MultiPoly) -> None:
        if poly.is_zero():
            return
        current = self.terms.get(key)
        total = poly if current is None else current + poly
        if total.is_zero():
            self.terms.pop(key, None)
        else:
            self.terms[key] = total

    def total_degree(self) -> int:
        degrees = [p.total_degree() for p in self.terms.values()] + [self.constant.total_degree()]
        return max(degrees)

    def evaluate(self, values: Mapping[EntryKey, Scalar]) -> MultiPoly:
        """The polynomial for concrete entries; missing keys count as zero."""
        total = self.constant.with_variables(self.variables)
        for key, poly in self.terms.items():
            x = values.get(key, 0)
            if x:
                total = total + poly * Fraction(x)
        return total.with_variables(self.variables)


@dataclass
class KernelBlock:
    lam: Signature
    rows: List[AdmissibleTuple]

    @property
    def name(self) -> str:
        return kernel_block_name(self.lam)


def kernel_block_name(lam: Signature) -> str:
    return f"K_{lam.lam1}_{lam.lam2}"


def kernel_blocks(spec: ProblemSpec) -> List[KernelBlock]:
    """Kernel blocks by signature; level 1 only keeps (k, 0) and rows with i <= 1."""
    max_i = 1 if spec.level == 1 else 2
    out = []
    for lam in signatures_up_to(spec.d1, lam2_zero_only=spec.level == 1):
        rows = admissible_tuples(lam, spec.d2, max_i)
        if rows:
            out.append(KernelBlock(lam=lam, rows=rows))
    return out


def required_signatures(spec: ProblemSpec) -> List[Signature]:
    return [kb.lam for kb in kernel_blocks(spec)]


def _gram_substitution(q: int, j1: Sequence[int], j2: Sequence[int]) -> Dict[str, MultiPoly]:
    names = edge_variables(q)
    zero = MultiPoly.zero(names)
    point = {name: zero for name in GRAM_VARIABLES}
    if len(j1) == 2:
        point["a"] = inner_product(q, j1[0], j1[1])
    if len(j2) == 2:
        point["b"] = inner_product(q, j2[0], j2[1])
    for p, x in enumerate(j1, start=1):
        for r, y in enumerate(j2, start=1):
            point[f"t{p}{r}"] = inner_product(q, x, y)
    return point


def _substitute(entry: MultiPoly, point: Mapping[str, MultiPoly], names: Tuple[str, ...]) -> MultiPoly:
    value = entry.evaluate(point)
    return MultiPoly.lift(value).with_variables(names)


def assemble_constraint_polys(
    spec: ProblemSpec, zonal: Mapping[Signature, ZonalBlock]
) -> Tuple[List[KernelBlock], Dict[int, LinearPolyForm]]:
    """p_q = A K(Q) for |Q| = q as forms linear in the kernel entries.

    Block indices in the returned forms follow the order of the kernel blocks.
    """
    kernels = kernel_blocks(spec)
    max_i = 1 if spec.level == 1 else 2
    qs = range(1, 3) if spec.level == 1 else range(1, 5)
    for kb in kernels:
        if kb.lam not in zonal:
            raise MissingZonalEntry(f"no zonal block for {kb.lam} at n={spec.n}")
        if zonal[kb.lam].n != spec.n:
            raise MissingZonalEntry(f"zonal block for {kb.lam} was built for n={zonal[kb.lam].n}, need {spec.n}")
    forms: Dict[int, LinearPolyForm] = {}
    for q in qs:
        names = edge_variables(q)
        form = LinearPolyForm(variables=names, constant=MultiPoly.zero(names))
        for j1, j2 in union_pair_patterns(q, max_size=max_i):
            point = _gram_substitution(q, j1, j2)
            a_power = MultiPoly.lift(point["a"]).with_variables(names)
            b_power = MultiPoly.lift(point["b"]).with_variables(names)
            for b, kb in enumerate(kernels):
                block = zonal[kb.lam]
                base_cache: Dict[Tuple, MultiPoly] = {}
                for r, row in enumerate(kb.rows):
                    if row.i != len(j1):
                        continue
                    for c, col in enumerate(kb.rows):
                        if col.i != len(j2):
                            continue
                        base_key = (row.key, col.key)
                        if base_key not in base_cache:
                            if base_key not in block.base:
                                raise MissingZonalEntry(f"no entry {row.label}x{col.label} for {kb.lam} at n={spec.n}")
                            base_cache[base_key] = _substitute(block.base[base_key], point, names)
                        value = base_cache[base_key]
                        if value.is_zero():
                            continue
                        if row.j:
                            value = value * a_power**row.j
                        if col.j:
                            value = value * b_power**col.j
                        form.add((b, min(r, c), max(r, c)), value)
        logger.debug(f"p{q}: {len(form.terms)} kernel entries, degree {form.total_degree()}")
        forms[q] = form
    return kernels, forms


# Semialgebraic sets


@dataclass
class SemialgebraicSet:
    """{u : g >= 0 for every generator}; g0 = 1 is implicit."""

    i: int
    variables: Tuple[str, ...]
    orbits: List[List[MultiPoly]]

    @property
    def generators(self) -> List[MultiPoly]:
        return [g for orbit in self.orbits for g in orbit]

    def contains(self, point: Mapping[str, Scalar]) -> bool:
        return all(Fraction(g.evaluate(point)) >= 0 for g in self.generators)


def _determinant(matrix: List[List[MultiPoly]]) -> MultiPoly:
    size = len(matrix)
    total = MultiPoly.zero(matrix[0][0].variables)
    for perm in permutations(range(size)):
        inversions = sum(1 for x, y in combinations(perm, 2) if x > y)
        term = MultiPoly.constant(-1 if inversions % 2 else 1, total.variables)
        for r, c in enumerate(perm):
            term = term * matrix[r][c]
        total = total + term
    return total


def delta_generators(i: int, cos_theta: Scalar) -> SemialgebraicSet:
    """Edge constraints (u + 1)(cos_theta - u) and the principal minors of size >= 3 of the Gram matrix."""
    if i not in (2, 3, 4):
        raise ValueError(f"i must be 2, 3 or 4, got {i}")
    names = edge_variables(i)
    cos_theta = Fraction(cos_theta)
    edges = []
    for name in names:
        u = MultiPoly.variable(name, names)
        edges.append((u + 1) * (cos_theta - u))
    orbits = [edges]
    if i >= 3:
        gram = gram_matrix(i)
        minors = []
        if i == 4:
            for rows in combinations(range(4), 3):
                minors.append(_determinant([[gram[r][c] for c in rows] for r in rows]))
            orbits.append(minors)
        orbits.append([_determinant(gram)])
    return SemialgebraicSet(i=i, variables=names, orbits=orbits)


def symmetrize_generators(orbit: Sequence[MultiPoly]) -> List[MultiPoly]:
    """Elementary symmetric combinations e_1 .. e_l of an orbit of generators."""
    if not orbit:
        return []
    names = orbit[0].variables
    elementary = [MultiPoly.constant(1, names)] + [MultiPoly.zero(names) for _ in orbit]
    for count, q in enumerate(orbit, start=1):
        for b in range(count, 0, -1):
            elementary[b] = elementary[b] + elementary[b - 1] * q
    return elementary[1:]


def symmetrized_set(base: SemialgebraicSet) -> SemialgebraicSet:
    return SemialgebraicSet(i=base.i, variables=base.variables, orbits=[symmetrize_generators(o) for o in base.orbits])


# Sums of squares


def monomial_basis(nvars: int, degree: int) -> List[Exponent]:
    """Exponent tuples of total degree <= degree, by degree then lexicographically descending."""
    out: List[Exponent] = []
    for d in range(degree + 1):
        layer: List[Exponent] = []

        def fill(prefix: Tuple[int, ...], left: int) -> None:
            if len(prefix) == nvars - 1:
                layer.append(prefix + (left,))
                return
            for e in range(left, -1, -1):
                fill(prefix + (e,), left - e)

        if nvars == 0:
            if d == 0:
                out.append(())
            continue
        fill((), d)
        out.extend(layer)
    return out


def _monomial_text(names: Sequence[str], exps: Exponent) -> str:
    parts = [f"{v}^{e}" if e > 1 else v for v, e in zip(names, exps) if e]
    return "*".join(parts) or "1"


@dataclass
class SOSRelaxation:
    blocks: List[Block]
    constraints: List[LinearConstraint]
    generators: List[MultiPoly]
    bases: List[List[Exponent]]


def sos_relax(
    form: LinearPolyForm,
    semialgebraic: SemialgebraicSet,
    delta: int,
    invariance: Optional[str] = None,
    first_block: Optional[int] = None,
    symmetry_adapted: bool = False,
    label: str = "p",
) -> SOSRelaxation:
    """Coefficient matching for p + sum_k r_k g_k == 0 with SOS multipliers r_k.

    r_k = m^T M_k m over the monomials of degree <= (delta - deg g_k) // 2;
    generators of degree above delta are left out. With ``invariance`` set the
    orbits are replaced by their elementary symmetric combinations.
    """
    if delta % 2:
        raise DegreeInfeasible(f"SOS degree must be even, got {delta}")
    degree = form.total_degree()
    if degree > delta:
        raise DegreeInfeasible(f"{label} has degree {degree} above the SOS degree {delta}")
    if symmetry_adapted:
        logger.warning(f"symmetry-adapted blocks are not available for {label}; using full blocks")
    names = semialgebraic.variables
    if tuple(form.variables) != tuple(names):
        raise ValueError(f"form variables {form.variables} do not match the set {names}")
    source = symmetrized_set(semialgebraic) if invariance else semialgebraic
    if first_block is None:
        first_block = 1 + max((key[0] for key in form.terms), default=-1)

    generators = [MultiPoly.constant(1, names)]
    for g in source.generators:
        if g.total_degree() > delta:
            logger.debug(f"{label}: skipping a generator of degree {g.total_degree()} > {delta}")
            continue
        generators.append(g.with_variables(names))

    rows: Dict[Exponent, Dict[EntryKey, Fraction]] = {}

    def bump(mu: Exponent, key: EntryKey, value: Fraction) -> None:
        row = rows.setdefault(mu, {})
        total = row.get(key, Fraction(0)) + value
        if total:
            row[key] = total
        else:
            row.pop(key, None)

    for key, poly in form.terms.items():
        for exps, coeff in poly.with_variables(names).terms.items():
            bump(exps, key, coeff)

    blocks: List[Block] = []
    bases: List[List[Exponent]] = []
    for k, g in enumerate(generators):
        half = (delta - g.total_degree()) // 2
        basis = monomial_basis(len(names), half)
        index = first_block + len(blocks)
        blocks.append(
            Block(
                name=f"{label}_sos{k}",
                size=len(basis),
                kind=SOS,
                labels=[_monomial_text(names, e) for e in basis],
            )
        )
        bases.append(basis)
        g_terms = list(g.terms.items())
        for a in range(len(basis)):
            for b in range(a, len(basis)):
                weight = 1 if a == b else 2
                pair = tuple(x + y for x, y in zip(basis[a], basis[b]))
                for e_g, c_g in g_terms:
                    mu = tuple(x + y for x, y in zip(pair, e_g))
                    bump(mu, (index, a, b), c_g * weight)

    constant = form.constant.with_variables(names)
    constraints = []
    for mu in monomial_basis(len(names), delta):
        row = rows.get(mu, {})
        rhs = -constant.terms.get(mu, Fraction(0))
        if not row and not rhs:
            continue
        entries = {key: (v if key[1] == key[2] else v / 2) for key, v in row.items()}
        constraints.append(LinearConstraint(entries=entries, rhs=rhs, label=f"{label}:{_monomial_text(names, mu)}"))
    logger.debug(f"{label}: {len(blocks)} SOS blocks sizes={[b.size for b in blocks]} constraints={len(constraints)}")
    return SOSRelaxation(blocks=blocks, constraints=constraints, generators=generators, bases=bases)


def assemble(
    spec: ProblemSpec,
    zonal: Mapping[Signature, ZonalBlock],
    symmetry_adapted: bool = False,
) -> Tuple[SDPProblem, Dict[int, LinearPolyForm]]:
    """The SDP of the truncated hierarchy together with the forms p_q it constrains."""
    kernels, forms = assemble_constraint_polys(spec, zonal)
    blocks = [Block(name=kb.name, size=len(kb.rows), kind=KERNEL, labels=[r.label for r in kb.rows]) for kb in kernels]
    empty = kernel_block_name(Signature(0, 0))
    objective = {(next(i for i, b in enumerate(blocks) if b.name == empty), 0, 0): Fraction(1)}
    constraints: List[LinearConstraint] = []

    # p1 + s = -1, s >= 0
    p1 = forms[1]
    slack_index = len(blocks)
    blocks.append(Block(name="p1_slack", size=1, kind=SLACK, labels=["s"]))
    entries: Dict[EntryKey, Fraction] = {}
    for key, poly in p1.terms.items():
        coeff = poly.constant_term()
        if coeff:
            entries[key] = coeff if key[1] == key[2] else coeff / 2
    entries[(slack_index, 0, 0)] = Fraction(1)
    constraints.append(LinearConstraint(entries=entries, rhs=-1 - p1.constant.constant_term(), label="p1"))

    for q in sorted(forms):
        if q == 1:
            continue
        invariance = f"S{q}" if q >= 3 else None
        relaxation = sos_relax(
            forms[q],
            delta_generators(q, spec.cos_theta),
            spec.delta,
            invariance=invariance,
            first_block=len(blocks),
            symmetry_adapted=symmetry_adapted and invariance is not None,
            label=f"p{q}",
        )
        blocks.extend(relaxation.blocks)
        constraints.extend(relaxation.constraints)

    problem = SDPProblem(blocks=blocks, objective=objective, constraints=constraints, spec=spec)
    problem.check()
    logger.info(f"assembled level {spec.level} n={spec.n}: {problem.summary()}")
    return problem, forms


def kernel_values(problem: SDPProblem, blocks: Sequence[Sequence[Sequence[Scalar]]]) -> Dict[EntryKey, Fraction]:
    """Upper-triangle entries of the kernel blocks as a form argument."""
    out: Dict[EntryKey, Fraction] = {}
    for b, block in enumerate(problem.blocks):
        if block.kind != KERNEL:
            continue
        for r in range(block.size):
            for c in range(r, block.size):
                value = Fraction(blocks[b][r][c])
                if value:
                    out[(b, r, c)] = value
    return out


# Independent LP oracle


def normalized_gegenbauer(n: int, k: int, t: np.ndarray) -> np.ndarray:
    """C_k^{(n-2)/2}(t) / C_k^{(n-2)/2}(1)."""
    alpha = (n - 2) / 2
    return eval_gegenbauer(k, alpha, t) / eval_gegenbauer(k, alpha, 1.0)


def delsarte_lp_bound(n: int, cos_theta: Scalar, d: int, grid: int = 4000) -> float:
    """Delsarte LP bound: min f(1) over f = 1 + sum_k f_k G_k, f_k >= 0, f <= 0 on [-1, cos_theta].

    The inequality is imposed on a uniform grid plus the endpoints, so the
    value is a slight under-estimate of the continuous optimum.
    """
    if n < 3:
        raise ValueError(f"dimension must be at least 3, got {n=}")
    s = float(Fraction(cos_theta))
    points = np.unique(np.concatenate([np.linspace(-1.0, s, grid), [-1.0, -0.5, 0.0, 0.5, s]]))
    points = points[points <= s]
    ks = range(1, d + 1)
    a_ub = np.stack([normalized_gegenbauer(n, k, points) for k in ks], axis=1)
    b_ub = -np.ones(len(points))
    result = linprog(c=np.ones(d), A_ub=a_ub, b_ub=b_ub, bounds=[(0, None)] * d, method="highs")
    if not result.success:
        raise ValueError(f"Delsarte LP failed: {result.message}")
    bound = 1.0 + float(result.fun)
    logger.debug(f"delsarte {n=} {s=} {d=} {grid=} {bound=}")
    return bound


def evaluate_forms(forms: Mapping[int, LinearPolyForm], values: Mapping[EntryKey, Scalar]) -> Dict[int, MultiPoly]:
    return {q: form.evaluate(values) for q, form in forms.items()}
