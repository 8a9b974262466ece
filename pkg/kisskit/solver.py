"""Primal-dual interior-point method for block-diagonal SDPs.

    (P) minimize <C, X>  s.t. <A_i, X> = b_i, X PSD
    (D) maximize b^T y   s.t. sum_i y_i A_i + Z = C, Z PSD

Infeasible start from X = Z = omega I, HKM search direction with a Mehrotra
predictor-corrector and sigma = (mu_aff / mu)^3, step 0.9 of the distance to
the boundary of the cone. A step whose iterate does not factorize is halved
until it does. Two array backends share the iteration: mpmath matrices at a
configurable precision and numpy float64.

In feasibility mode the objective is zero, so every point of the central
path is the analytic center of the feasible set. Once the primal residual is
below tolerance the method switches to pure centering steps (sigma = 1) and
stops when X Z is close to mu I.
"""
# Standard Library
from dataclasses import dataclass
from dataclasses import field
from enum import Enum
from fractions import Fraction
from logging import getLogger
from pathlib import Path
from typing import Any
from typing import Dict
from typing import List
from typing import Optional
from typing import Tuple

# Third Party Library
import mpmath
import numpy as np

# Local Library
from .exactmath import to_mpf
from .model import SolveConfig
from .sdp import EntryKey
from .sdp import LinearConstraint
from .sdp import SDPProblem

logger = getLogger(__name__)

STEP_FRACTION = 0.9
SIGMA_EXPONENT = 3
STALL_STEP = 1e-10
STALL_LIMIT = 3
DIVERGENCE = 1e25
BACKTRACK_LIMIT = 60
CENTERING_STEPS = 50
CENTRALITY = 1e-2
RECHECK_SLACK = 10
REFINE_TOLERANCE = 1e-30
REFINE_ITERATIONS = 40

SOLUTION_HEADER = "# kisskit-solution version=1"


class SolverError(RuntimeError):
    """problem cannot be handed to the solver"""


class SolveStatus(str, Enum):
    optimal = "optimal"
    infeasible = "infeasible"
    stalled = "stalled"


@dataclass
class PrimalDualSolution:
    status: SolveStatus
    primal: List[List[List[Any]]]
    dual_vector: List[Any]
    dual: List[List[List[Any]]]
    primal_objective: Any
    dual_objective: Any
    gap: Any
    primal_residual: Any
    dual_residual: Any
    iterations: int
    backend: str
    precision: int
    weak_duality_violations: int = 0
    min_eigenvalues: List[Any] = field(default_factory=list)

    @property
    def strictly_feasible(self) -> bool:
        return bool(self.min_eigenvalues) and all(v > 0 for v in self.min_eigenvalues)

    @property
    def margin(self) -> Any:
        return min(self.min_eigenvalues) if self.min_eigenvalues else None


# Array backends


def _expand(entries: Dict[EntryKey, Fraction]) -> Dict[int, List[Tuple[int, int, Fraction]]]:
    """Per block: the full list of (i, j, value) of a symmetric constraint matrix."""
    out: Dict[int, List[Tuple[int, int, Fraction]]] = {}
    for (b, r, c), v in entries.items():
        if not v:
            continue
        items = out.setdefault(b, [])
        items.append((r, c, v))
        if r != c:
            items.append((c, r, v))
    return out


class _Backend:
    name = ""
    factor_errors: Tuple[type, ...] = ()

    def __init__(self, problem: SDPProblem) -> None:
        self.sizes = problem.sizes
        self.m = problem.num_constraints
        self.constraints = [_expand(c.entries) for c in problem.constraints]
        self.objective = _expand(problem.objective)

    # scalar helpers
    def scalar(self, value: Fraction) -> Any:
        raise NotImplementedError

    def sqrt(self, value: Any) -> Any:
        raise NotImplementedError

    def to_mpf(self, value: Any) -> mpmath.mpf:
        return mpmath.mpf(value)

    # matrices
    def eye(self, n: int, scale: Any) -> Any:
        raise NotImplementedError

    def zeros(self, n: int) -> Any:
        raise NotImplementedError

    def mm(self, a: Any, b: Any) -> Any:
        raise NotImplementedError

    def inv(self, a: Any) -> Any:
        raise NotImplementedError

    def chol(self, a: Any) -> Any:
        raise NotImplementedError

    def min_eig(self, a: Any) -> Any:
        raise NotImplementedError

    def inner(self, a: Any, b: Any) -> Any:
        raise NotImplementedError

    def max_abs(self, a: Any) -> Any:
        raise NotImplementedError

    def to_lists(self, a: Any) -> List[List[mpmath.mpf]]:
        raise NotImplementedError

    def from_lists(self, rows: List[List[Any]]) -> Any:
        raise NotImplementedError

    # vectors
    def vector(self, values: List[Any]) -> Any:
        raise NotImplementedError

    def vmax_abs(self, v: Any) -> Any:
        raise NotImplementedError

    def dot(self, u: Any, v: Any) -> Any:
        raise NotImplementedError

    def solve(self, m: Any, rhs: Any) -> Any:
        raise NotImplementedError

    def vlist(self, v: Any) -> List[Any]:
        raise NotImplementedError

    # constraint operators
    def amap(self, blocks: List[Any]) -> Any:
        raise NotImplementedError

    def aadj(self, y: Any) -> List[Any]:
        raise NotImplementedError

    def schur(self, x: List[Any], zinv: List[Any]) -> Any:
        raise NotImplementedError

    def matrix_from(self, expanded: Dict[int, List[Tuple[int, int, Fraction]]]) -> List[Any]:
        out = [self.zeros(n) for n in self.sizes]
        for b, items in expanded.items():
            for i, j, v in items:
                out[b][i, j] += self.scalar(v)
        return out

    def sym(self, a: Any) -> Any:
        return (a + a.T) * self.scalar(Fraction(1, 2))

    def factorizes(self, a: Any) -> bool:
        try:
            self.chol(a)
        except self.factor_errors:
            return False
        return True

    def step_length(self, x: Any, dx: Any) -> Any:
        """Largest alpha with x + alpha dx PSD (None when dx keeps x inside, 0 when x has no Cholesky factor)."""
        try:
            linv = self.inv(self.chol(x))
        except self.factor_errors:
            return self.scalar(Fraction(0))
        s = self.sym(self.mm(self.mm(linv, dx), linv.T))
        lam = self.min_eig(s)
        if lam >= 0:
            return None
        return -1 / lam


class _NumpyBackend(_Backend):
    name = "numpy"
    factor_errors = (np.linalg.LinAlgError,)

    def __init__(self, problem: SDPProblem) -> None:
        super().__init__(problem)
        touching: Dict[int, List[int]] = {}
        for k, expanded in enumerate(self.constraints):
            for b in expanded:
                touching.setdefault(b, []).append(k)
        self.index: Dict[int, np.ndarray] = {}
        self.dense: Dict[int, np.ndarray] = {}
        for b, ks in touching.items():
            n = self.sizes[b]
            arr = np.zeros((len(ks), n, n))
            for pos, k in enumerate(ks):
                for i, j, v in self.constraints[k][b]:
                    arr[pos, i, j] += float(v)
            self.index[b] = np.array(ks, dtype=int)
            self.dense[b] = arr
        logger.debug(f"numpy backend: {self.m} constraints, dense block data {[a.shape for a in self.dense.values()]}")

    def scalar(self, value: Fraction) -> Any:
        return float(value)

    def sqrt(self, value: Any) -> Any:
        return float(np.sqrt(value))

    def to_mpf(self, value: Any) -> mpmath.mpf:
        return mpmath.mpf(float(value))

    def eye(self, n: int, scale: Any) -> Any:
        return np.eye(n) * float(scale)

    def zeros(self, n: int) -> Any:
        return np.zeros((n, n))

    def mm(self, a: Any, b: Any) -> Any:
        return a @ b

    def inv(self, a: Any) -> Any:
        return np.linalg.inv(a)

    def chol(self, a: Any) -> Any:
        return np.linalg.cholesky(a)

    def min_eig(self, a: Any) -> Any:
        return float(np.linalg.eigvalsh(a)[0])

    def inner(self, a: Any, b: Any) -> Any:
        return float(np.sum(a * b.T))

    def max_abs(self, a: Any) -> Any:
        return float(np.abs(a).max()) if a.size else 0.0

    def to_lists(self, a: Any) -> List[List[mpmath.mpf]]:
        return [[mpmath.mpf(float(v)) for v in row] for row in a]

    def from_lists(self, rows: List[List[Any]]) -> Any:
        return np.array([[float(v) for v in row] for row in rows], dtype=float).reshape(len(rows), len(rows))

    def vector(self, values: List[Any]) -> Any:
        return np.array([float(v) for v in values])

    def vmax_abs(self, v: Any) -> Any:
        return float(np.abs(v).max()) if v.size else 0.0

    def dot(self, u: Any, v: Any) -> Any:
        return float(u @ v)

    def solve(self, m: Any, rhs: Any) -> Any:
        try:
            factor = np.linalg.cholesky(m)
            return np.linalg.solve(factor.T, np.linalg.solve(factor, rhs))
        except np.linalg.LinAlgError:
            return np.linalg.lstsq(m, rhs, rcond=None)[0]

    def vlist(self, v: Any) -> List[Any]:
        return [mpmath.mpf(float(x)) for x in v]

    def amap(self, blocks: List[Any]) -> Any:
        out = np.zeros(self.m)
        for b, arr in self.dense.items():
            out[self.index[b]] += np.einsum("kij,ij->k", arr, blocks[b])
        return out

    def aadj(self, y: Any) -> List[Any]:
        out = [np.zeros((n, n)) for n in self.sizes]
        for b, arr in self.dense.items():
            out[b] = np.tensordot(y[self.index[b]], arr, axes=1)
        return out

    def schur(self, x: List[Any], zinv: List[Any]) -> Any:
        m = np.zeros((self.m, self.m))
        for b, arr in self.dense.items():
            t = np.einsum("ij,kjl,lm->kim", x[b], arr, zinv[b], optimize=True)
            mb = arr.reshape(len(arr), -1) @ t.transpose(0, 2, 1).reshape(len(arr), -1).T
            idx = self.index[b]
            m[np.ix_(idx, idx)] += mb
        return m


class _MpmathBackend(_Backend):
    name = "mpmath"
    factor_errors = (ValueError, ZeroDivisionError)

    def __init__(self, problem: SDPProblem) -> None:
        super().__init__(problem)
        self.per_block: Dict[int, List[Tuple[int, List[Tuple[int, int, Any]]]]] = {}
        for k, expanded in enumerate(self.constraints):
            for b, items in expanded.items():
                converted = [(i, j, to_mpf(v)) for i, j, v in items]
                self.per_block.setdefault(b, []).append((k, converted))

    def scalar(self, value: Fraction) -> Any:
        return to_mpf(value)

    def sqrt(self, value: Any) -> Any:
        return mpmath.sqrt(value)

    def eye(self, n: int, scale: Any) -> Any:
        return mpmath.eye(n) * scale

    def zeros(self, n: int) -> Any:
        return mpmath.zeros(n, n)

    def mm(self, a: Any, b: Any) -> Any:
        return a * b

    def inv(self, a: Any) -> Any:
        return mpmath.inverse(a)

    def chol(self, a: Any) -> Any:
        return mpmath.cholesky(a)

    def min_eig(self, a: Any) -> Any:
        values = mpmath.eigsy(a, eigvals_only=True)
        return min(values[i] for i in range(a.rows))

    def inner(self, a: Any, b: Any) -> Any:
        return mpmath.fsum(a[i, j] * b[j, i] for i in range(a.rows) for j in range(a.cols))

    def max_abs(self, a: Any) -> Any:
        return max((abs(a[i, j]) for i in range(a.rows) for j in range(a.cols)), default=mpmath.mpf(0))

    def to_lists(self, a: Any) -> List[List[mpmath.mpf]]:
        return [[a[i, j] for j in range(a.cols)] for i in range(a.rows)]

    def from_lists(self, rows: List[List[Any]]) -> Any:
        out = mpmath.zeros(len(rows), len(rows))
        for i, row in enumerate(rows):
            for j, v in enumerate(row):
                out[i, j] = mpmath.mpf(v)
        return out

    def vector(self, values: List[Any]) -> Any:
        return mpmath.matrix([self.scalar(v) if isinstance(v, (int, Fraction)) else v for v in values])

    def vmax_abs(self, v: Any) -> Any:
        return max((abs(v[i]) for i in range(v.rows)), default=mpmath.mpf(0))

    def dot(self, u: Any, v: Any) -> Any:
        return mpmath.fsum(u[i] * v[i] for i in range(u.rows))

    def solve(self, m: Any, rhs: Any) -> Any:
        try:
            return mpmath.cholesky_solve(m, rhs)
        except (ValueError, ZeroDivisionError):
            return mpmath.lu_solve(m, rhs)

    def vlist(self, v: Any) -> List[Any]:
        return [v[i] for i in range(v.rows)]

    def amap(self, blocks: List[Any]) -> Any:
        out = [mpmath.mpf(0)] * self.m
        for b, constraints in self.per_block.items():
            w = blocks[b]
            for k, items in constraints:
                out[k] += mpmath.fsum(v * w[i, j] for i, j, v in items)
        return mpmath.matrix(out)

    def aadj(self, y: Any) -> List[Any]:
        out = [self.zeros(n) for n in self.sizes]
        for b, constraints in self.per_block.items():
            acc = out[b]
            for k, items in constraints:
                yk = y[k]
                if not yk:
                    continue
                for i, j, v in items:
                    acc[i, j] += yk * v
        return out

    def schur(self, x: List[Any], zinv: List[Any]) -> Any:
        m = mpmath.zeros(self.m, self.m)
        for b, constraints in self.per_block.items():
            xb, zb = x[b], zinv[b]
            for pos, (k, items_k) in enumerate(constraints):
                for l, items_l in constraints[pos:]:  # noqa: E741
                    value = mpmath.fsum(
                        vk * vl * xb[j, p] * zb[q, i] for i, j, vk in items_k for p, q, vl in items_l
                    )
                    m[k, l] += value
                    if k != l:
                        m[l, k] += value
        return m


def _make_backend(problem: SDPProblem, cfg: SolveConfig) -> _Backend:
    if cfg.backend == "numpy":
        return _NumpyBackend(problem)
    return _MpmathBackend(problem)


# Iteration


def _blocks_inner(be: _Backend, a: List[Any], b: List[Any]) -> Any:
    total = be.scalar(Fraction(0))
    for x, y in zip(a, b):
        total += be.inner(x, y)
    return total


def _blocks_max(be: _Backend, blocks: List[Any]) -> Any:
    return max((be.max_abs(x) for x in blocks), default=be.scalar(Fraction(0)))


def _step(be: _Backend, blocks: List[Any], deltas: List[Any]) -> Any:
    """Largest step keeping every block PSD, capped at 1 / STEP_FRACTION."""
    best = None
    for x, dx in zip(blocks, deltas):
        alpha = be.step_length(x, dx)
        if alpha is not None and (best is None or alpha < best):
            best = alpha
    cap = be.scalar(Fraction(10, 9))
    return cap if best is None or best > cap else best


def _advance(be: _Backend, blocks: List[Any], deltas: List[Any], alpha: Any) -> Tuple[List[Any], Any]:
    """blocks + alpha deltas, halving alpha until every block has a Cholesky factor."""
    for _ in range(BACKTRACK_LIMIT):
        if not alpha > 0:
            break
        trial = [xb + dxb * alpha for xb, dxb in zip(blocks, deltas)]
        if all(be.factorizes(t) for t in trial):
            return trial, alpha
        alpha = alpha / 2
    return blocks, be.scalar(Fraction(0))


def _centrality(be: _Backend, x: List[Any], z: List[Any], mu: Any) -> Any:
    """max |X Z - mu I| / mu over all blocks."""
    worst = be.scalar(Fraction(0))
    for n, xb, zb in zip(be.sizes, x, z):
        worst = max(worst, be.max_abs(be.mm(xb, zb) - be.eye(n, mu)))
    return worst / mu


def _direction(
    be: _Backend,
    x: List[Any],
    zinv: List[Any],
    schur: Any,
    rp: Any,
    rd: List[Any],
    rc: List[Any],
) -> Tuple[Any, List[Any], List[Any]]:
    """HKM direction for complementarity target rc (dX Z + X dZ = rc)."""
    w = [be.mm(rc_b - be.mm(xb, rd_b), zi) for xb, zi, rd_b, rc_b in zip(x, zinv, rd, rc)]
    rhs = rp - be.amap(w)
    dy = be.solve(schur, rhs)
    aty = be.aadj(dy)
    dz = [rd_b - a_b for rd_b, a_b in zip(rd, aty)]
    dx = [be.sym(be.mm(rc_b - be.mm(xb, dz_b), zi)) for xb, zi, dz_b, rc_b in zip(x, zinv, dz, rc)]
    return dy, dx, dz


def _run(
    problem: SDPProblem,
    cfg: SolveConfig,
    feasibility: bool = False,
    start: Optional[PrimalDualSolution] = None,
) -> PrimalDualSolution:
    if problem.num_constraints == 0:
        raise SolverError("problem has no constraints")
    if not problem.blocks:
        raise SolverError("problem has no blocks")
    be = _make_backend(problem, cfg)
    tol = cfg.effective_tolerance
    b = be.vector(problem.rhs())
    c = be.matrix_from(be.objective)
    dim = sum(problem.sizes)

    b_norm = max((abs(v) for v in problem.rhs()), default=Fraction(0))
    c_norm = max((abs(v) for v in problem.objective.values()), default=Fraction(0))
    omega = be.scalar(10 * max(Fraction(1), b_norm, c_norm))
    b_scale = 1 + be.scalar(b_norm)
    c_scale = 1 + be.scalar(c_norm)
    if start is None:
        x = [be.eye(n, omega) for n in problem.sizes]
        z = [be.eye(n, omega) for n in problem.sizes]
        y = be.vector([0] * problem.num_constraints)
    else:
        x = [be.from_lists(block) for block in start.primal]
        z = [be.from_lists(block) for block in start.dual]
        y = be.vector(list(start.dual_vector))
        if not all(be.factorizes(m) for m in x + z):
            raise SolverError("starting point is not positive definite")

    status = SolveStatus.stalled
    violations = 0
    stalls = 0
    # a warm start is already near the central path
    centering = 1 if feasibility and start is not None else 0
    iteration = 0
    pobj = dobj = gap = pinf = dinf = be.scalar(Fraction(0))
    for iteration in range(1, cfg.max_iterations + 1):
        rp = b - be.amap(x)
        aty = be.aadj(y)
        rd = [cb - zb - ab for cb, zb, ab in zip(c, z, aty)]
        pobj = _blocks_inner(be, c, x)
        dobj = be.dot(b, y)
        pinf = be.vmax_abs(rp) / b_scale
        dinf = _blocks_max(be, rd) / c_scale
        gap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
        mu = _blocks_inner(be, x, z) / dim
        logger.debug(
            f"iter {iteration:3d} pobj={mpmath.nstr(be.to_mpf(pobj), 12)} dobj={mpmath.nstr(be.to_mpf(dobj), 12)} "
            f"pinf={mpmath.nstr(be.to_mpf(pinf), 3)} dinf={mpmath.nstr(be.to_mpf(dinf), 3)} "
            f"gap={mpmath.nstr(be.to_mpf(gap), 3)} mu={mpmath.nstr(be.to_mpf(mu), 3)}"
        )
        if not feasibility and pinf <= tol and dinf <= tol and pobj - dobj < -tol * (1 + abs(pobj) + abs(dobj)):
            violations += 1
            logger.warning(f"weak duality violated at iteration {iteration}: {pobj=} < {dobj=}")
        if feasibility and pinf <= tol:
            status = SolveStatus.optimal
            if centering >= CENTERING_STEPS or _centrality(be, x, z, mu) <= CENTRALITY:
                break
            centering += 1
        if not feasibility and pinf <= tol and dinf <= tol and gap <= tol:
            status = SolveStatus.optimal
            break
        if max(_blocks_max(be, x), _blocks_max(be, z), be.vmax_abs(y)) > DIVERGENCE * omega:
            if centering:
                logger.warning(f"iterates grow while centering at iteration {iteration}; keeping the current point")
                break
            status = SolveStatus.infeasible
            logger.info(f"iterates diverge at iteration {iteration}; reporting infeasible")
            break

        zinv = [be.inv(zb) for zb in z]
        schur = be.schur(x, zinv)

        if centering:
            rc = [be.eye(n, mu) - be.mm(xb, zb) for n, xb, zb in zip(problem.sizes, x, z)]
        else:
            # predictor
            rc = [-be.mm(xb, zb) for xb, zb in zip(x, z)]
            dy, dx, dz = _direction(be, x, zinv, schur, rp, rd, rc)
            ap = min(_step(be, x, dx), be.scalar(Fraction(1)))
            ad = min(_step(be, z, dz), be.scalar(Fraction(1)))
            x_aff = [xb + dxb * ap for xb, dxb in zip(x, dx)]
            z_aff = [zb + dzb * ad for zb, dzb in zip(z, dz)]
            mu_aff = _blocks_inner(be, x_aff, z_aff) / dim
            sigma = (mu_aff / mu) ** SIGMA_EXPONENT if mu > 0 else be.scalar(Fraction(0))
            sigma = min(max(sigma, be.scalar(Fraction(0))), be.scalar(Fraction(1)))

            # corrector
            rc = [
                be.eye(n, sigma * mu) - be.mm(xb, zb) - be.mm(dxb, dzb)
                for n, xb, zb, dxb, dzb in zip(problem.sizes, x, z, dx, dz)
            ]
        dy, dx, dz = _direction(be, x, zinv, schur, rp, rd, rc)
        fraction = be.scalar(Fraction(9, 10))
        ap = min(fraction * _step(be, x, dx), be.scalar(Fraction(1)))
        ad = min(fraction * _step(be, z, dz), be.scalar(Fraction(1)))
        x, ap = _advance(be, x, dx, ap)
        z, ad = _advance(be, z, dz, ad)
        y = y + dy * ad
        if max(ap, ad) < STALL_STEP:
            stalls += 1
            if stalls >= STALL_LIMIT:
                logger.warning(f"step length collapsed at iteration {iteration}")
                break
        else:
            stalls = 0
    else:
        if status != SolveStatus.optimal:
            logger.warning(f"no convergence within {cfg.max_iterations} iterations")

    if status == SolveStatus.stalled and pinf > be.sqrt(max(tol, 1e-8)):
        status = SolveStatus.infeasible
    solution = PrimalDualSolution(
        status=status,
        primal=[be.to_lists(xb) for xb in x],
        dual_vector=be.vlist(y),
        dual=[be.to_lists(zb) for zb in z],
        primal_objective=be.to_mpf(pobj),
        dual_objective=be.to_mpf(dobj),
        gap=be.to_mpf(gap),
        primal_residual=be.to_mpf(pinf),
        dual_residual=be.to_mpf(dinf),
        iterations=iteration,
        backend=be.name,
        precision=cfg.precision if be.name == "mpmath" else 53,
        weak_duality_violations=violations,
    )
    return solution


def confirm_status(solution: PrimalDualSolution, tolerance: float, feasibility: bool = False) -> None:
    """Downgrade an optimal status that the rechecked residuals do not support."""
    if solution.status != SolveStatus.optimal:
        return
    limit = RECHECK_SLACK * tolerance
    problems = []
    if solution.primal_residual > limit:
        problems.append(f"primal residual {mpmath.nstr(solution.primal_residual, 3)}")
    if not feasibility:
        if solution.dual_residual > limit:
            problems.append(f"dual residual {mpmath.nstr(solution.dual_residual, 3)}")
        if solution.gap > limit:
            problems.append(f"gap {mpmath.nstr(solution.gap, 3)}")
        scale = 1 + abs(solution.primal_objective) + abs(solution.dual_objective)
        if solution.primal_objective - solution.dual_objective < -limit * scale:
            solution.weak_duality_violations += 1
            problems.append("primal objective below dual objective")
    if problems:
        logger.warning(f"recheck does not confirm status optimal: {', '.join(problems)}")
        solution.status = SolveStatus.stalled


def solve(problem: SDPProblem, cfg: Optional[SolveConfig] = None) -> PrimalDualSolution:
    """Minimize <C, X>; residuals and eigenvalue margins of the result are recomputed from the problem data."""
    cfg = cfg or SolveConfig()
    with mpmath.mp.workprec(cfg.precision):
        solution = _run(problem, cfg)
        recheck(problem, solution)
    confirm_status(solution, cfg.effective_tolerance)
    logger.info(
        f"solve finished: status={solution.status.value} iterations={solution.iterations} "
        f"pobj={mpmath.nstr(solution.primal_objective, 20)} dobj={mpmath.nstr(solution.dual_objective, 20)}"
    )
    return solution


def pin_problem(problem: SDPProblem, pinned: Fraction) -> SDPProblem:
    """Problem with the extra constraint <C, X> = pinned."""
    pin = LinearConstraint(entries=dict(problem.objective), rhs=Fraction(pinned), label="pin")
    return SDPProblem(
        blocks=problem.blocks,
        objective=dict(problem.objective),
        constraints=list(problem.constraints) + [pin],
        spec=problem.spec,
    )


def _refine(
    problem: SDPProblem, cfg: SolveConfig, start: PrimalDualSolution
) -> Tuple[PrimalDualSolution, SolveConfig]:
    """Centering steps in mpmath from a numpy point of a feasibility problem."""
    tolerance = min(cfg.tolerance, max(REFINE_TOLERANCE, 2.0 ** (-(cfg.precision // 2))))
    refine_cfg = cfg.copy(update={"backend": "mpmath", "tolerance": tolerance, "max_iterations": REFINE_ITERATIONS})
    try:
        refined = _run(problem, refine_cfg, feasibility=True, start=start)
    except SolverError as e:
        logger.warning(f"mpmath refinement skipped: {e}")
        return start, cfg
    if refined.status != SolveStatus.optimal:
        logger.warning(f"mpmath refinement ended {refined.status.value}; keeping the numpy point")
        return start, cfg
    logger.info(f"refined the numpy point at {cfg.precision} bits in {refined.iterations} iterations")
    return refined, refine_cfg


def solve_feasibility_margin(
    problem: SDPProblem, pinned: Fraction, cfg: Optional[SolveConfig] = None
) -> PrimalDualSolution:
    """Strictly feasible point of the problem with the objective pinned; the objective itself is dropped.

    The point is centered toward the analytic center of the pinned feasible
    set. With the numpy backend it is refined in mpmath at ``cfg.precision``.
    """
    cfg = cfg or SolveConfig()
    pinned_problem = pin_problem(problem, pinned)
    feasibility = SDPProblem(
        blocks=pinned_problem.blocks, objective={}, constraints=pinned_problem.constraints, spec=problem.spec
    )
    used = cfg
    with mpmath.mp.workprec(cfg.precision):
        solution = _run(feasibility, cfg, feasibility=True)
        if solution.backend == "numpy" and solution.status == SolveStatus.optimal:
            solution, used = _refine(feasibility, cfg, solution)
        recheck(pinned_problem, solution)
    confirm_status(solution, used.effective_tolerance, feasibility=True)
    if solution.status != SolveStatus.optimal or not solution.strictly_feasible:
        logger.info(f"pinned objective {pinned} is not strictly feasible (status {solution.status.value})")
        solution.status = SolveStatus.infeasible
    else:
        logger.info(f"pinned objective {pinned}: strictly feasible, margin {mpmath.nstr(solution.margin, 6)}")
    return solution


# Independent checks


def recheck(problem: SDPProblem, solution: PrimalDualSolution) -> None:
    """Recompute residuals, objectives and block eigenvalues from the returned matrices."""
    x = [mpmath.matrix(block) for block in solution.primal]
    z = [mpmath.matrix(block) for block in solution.dual]
    y = solution.dual_vector
    b = [to_mpf(v) for v in problem.rhs()]
    b_scale = 1 + max((abs(v) for v in b), default=mpmath.mpf(0))
    worst_primal = mpmath.mpf(0)
    aty = [mpmath.zeros(n, n) for n in problem.sizes]
    for k, constraint in enumerate(problem.constraints):
        value = mpmath.mpf(0)
        for (blk, r, c), v in constraint.entries.items():
            weight = 1 if r == c else 2
            value += weight * to_mpf(v) * x[blk][r, c]
            aty[blk][r, c] += y[k] * to_mpf(v)
            if r != c:
                aty[blk][c, r] += y[k] * to_mpf(v)
        worst_primal = max(worst_primal, abs(b[k] - value))
    pobj = mpmath.mpf(0)
    cmat = [mpmath.zeros(n, n) for n in problem.sizes]
    for (blk, r, c), v in problem.objective.items():
        pobj += (1 if r == c else 2) * to_mpf(v) * x[blk][r, c]
        cmat[blk][r, c] += to_mpf(v)
        if r != c:
            cmat[blk][c, r] += to_mpf(v)
    c_scale = 1 + max((abs(to_mpf(v)) for v in problem.objective.values()), default=mpmath.mpf(0))
    worst_dual = mpmath.mpf(0)
    for blk, n in enumerate(problem.sizes):
        for i in range(n):
            for j in range(n):
                worst_dual = max(worst_dual, abs(cmat[blk][i, j] - z[blk][i, j] - aty[blk][i, j]))
    dobj = mpmath.fsum(bk * yk for bk, yk in zip(b, y))
    solution.primal_residual = worst_primal / b_scale
    solution.dual_residual = worst_dual / c_scale
    solution.primal_objective = pobj
    solution.dual_objective = dobj
    solution.gap = abs(pobj - dobj) / (1 + abs(pobj) + abs(dobj))
    eigenvalues = []
    for xb in x:
        xs = (xb + xb.T) / 2
        values = mpmath.eigsy(xs, eigvals_only=True)
        eigenvalues.append(min(values[i] for i in range(xs.rows)))
    solution.min_eigenvalues = eigenvalues


# Solution files


def save_solution(solution: PrimalDualSolution, path: Path) -> None:
    digits = max(17, int(solution.precision * 0.30103))
    fmt = lambda v: mpmath.nstr(mpmath.mpf(v), digits)  # noqa: E731
    lines = [
        SOLUTION_HEADER,
        f"# status={solution.status.value} backend={solution.backend} precision={solution.precision} "
        f"iterations={solution.iterations} weak_duality_violations={solution.weak_duality_violations}",
        f"# primal_objective={fmt(solution.primal_objective)} dual_objective={fmt(solution.dual_objective)} "
        f"gap={mpmath.nstr(solution.gap, 6)} primal_residual={mpmath.nstr(solution.primal_residual, 6)} "
        f"dual_residual={mpmath.nstr(solution.dual_residual, 6)}",
    ]
    for k, v in enumerate(solution.dual_vector):
        lines.append(f"y {k} {fmt(v)}")
    for tag, blocks in (("X", solution.primal), ("Z", solution.dual)):
        for b, block in enumerate(blocks):
            lines.append(f"{tag}size {b} {len(block)}")
            for r, row in enumerate(block):
                for c in range(r + 1):
                    lines.append(f"{tag} {b} {r} {c} {fmt(row[c])}")
    with open(file=str(path), mode="wt", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    logger.info(f"wrote solution {path}")


def load_solution(path: Path) -> PrimalDualSolution:
    meta: Dict[str, str] = {}
    y: Dict[int, mpmath.mpf] = {}
    sizes: Dict[str, Dict[int, int]] = {"X": {}, "Z": {}}
    values: Dict[str, Dict[Tuple[int, int, int], mpmath.mpf]] = {"X": {}, "Z": {}}
    with open(file=str(path), mode="rt", encoding="utf-8") as f:
        lines = [line.strip() for line in f if line.strip()]
    if not lines or lines[0] != SOLUTION_HEADER:
        raise ValueError(f"{path}: missing header {SOLUTION_HEADER!r}")
    precision = 256
    for line in lines[1:]:
        if line.startswith("#"):
            meta.update(dict(part.split("=", 1) for part in line[1:].split()))
            precision = int(meta.get("precision", precision))
            continue
    with mpmath.mp.workprec(max(precision, 53)):
        for line in lines[1:]:
            if line.startswith("#"):
                continue
            fields = line.split()
            if fields[0] == "y":
                y[int(fields[1])] = mpmath.mpf(fields[2])
            elif fields[0] in ("Xsize", "Zsize"):
                sizes[fields[0][0]][int(fields[1])] = int(fields[2])
            elif fields[0] in ("X", "Z"):
                b, r, c = (int(v) for v in fields[1:4])
                values[fields[0]][(b, r, c)] = mpmath.mpf(fields[4])
            else:
                raise ValueError(f"{path}: unknown record {fields[0]!r}")

        def blocks(tag: str) -> List[List[List[Any]]]:
            out = []
            for b in range(len(sizes[tag])):
                n = sizes[tag][b]
                block = [[mpmath.mpf(0)] * n for _ in range(n)]
                for r in range(n):
                    for c in range(r + 1):
                        v = values[tag].get((b, r, c), mpmath.mpf(0))
                        block[r][c] = v
                        block[c][r] = v
                out.append(block)
            return out

        return PrimalDualSolution(
            status=SolveStatus(meta["status"]),
            primal=blocks("X"),
            dual_vector=[y[k] for k in range(len(y))],
            dual=blocks("Z"),
            primal_objective=mpmath.mpf(meta["primal_objective"]),
            dual_objective=mpmath.mpf(meta["dual_objective"]),
            gap=mpmath.mpf(meta["gap"]),
            primal_residual=mpmath.mpf(meta["primal_residual"]),
            dual_residual=mpmath.mpf(meta["dual_residual"]),
            iterations=int(meta["iterations"]),
            backend=meta["backend"],
            precision=precision,
            weak_duality_violations=int(meta["weak_duality_violations"]),
        )
