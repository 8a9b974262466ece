# Standard Library
from fractions import Fraction
from pathlib import Path
from typing import List

# Third Party Library
import mpmath
import numpy as np
import pytest

# First Party Library
from kisskit.cache import ensure_cache
from kisskit.exactmath import MultiPoly
from kisskit.exactmath import RatMatrix
from kisskit.exactmath import ZeroPolynomial
from kisskit.model import ProblemSpec
from kisskit.model import SolveConfig
from kisskit.sdp import SOS
from kisskit.sdp import Block
from kisskit.sdp import LinearConstraint
from kisskit.sdp import SDPProblem
from kisskit.sdp import assemble
from kisskit.sdp import required_signatures
from kisskit.solver import PrimalDualSolution
from kisskit.solver import SolveStatus
from kisskit.solver import pin_problem
from kisskit.solver import solve
from kisskit.solver import solve_feasibility_margin
from kisskit.verify import CERTIFICATE_HEADER
from kisskit.verify import AffineViolation
from kisskit.verify import CertificateBlock
from kisskit.verify import ExactCertificate
from kisskit.verify import MarginTooSmall
from kisskit.verify import NotIndependent
from kisskit.verify import PSDUncertified
from kisskit.verify import ball_cholesky
from kisskit.verify import check_affine
from kisskit.verify import check_code
from kisskit.verify import code_gram
from kisskit.verify import code_slack_chain
from kisskit.verify import d4_report
from kisskit.verify import d4_roots
from kisskit.verify import exact_cholesky_pivots
from kisskit.verify import is_positive_definite_exact
from kisskit.verify import p2_root_report
from kisskit.verify import read_certificate
from kisskit.verify import round_certificate
from kisskit.verify import sturm_analyze
from kisskit.verify import verification_report
from kisskit.verify import verify_certificate
from kisskit.verify import write_certificate
from kisskit.verify import write_report

U = MultiPoly.variable("u")
FAST = SolveConfig(precision=128, tolerance=1e-20)
HALF = Fraction(1, 2)
PATH_OF_THREE = [[Fraction(1), HALF, Fraction(0)], [HALF, Fraction(1), HALF], [Fraction(0), HALF, Fraction(1)]]


def _toy_certificate(rows: List[List[Fraction]], bound: Fraction) -> ExactCertificate:
    return ExactCertificate(
        spec=None,
        blocks=[CertificateBlock(name="toy", factor=RatMatrix.identity(2), gram=RatMatrix.from_rows(rows))],
        bound=bound,
    )


def _hilbert(n: int) -> List[List[Fraction]]:
    return [[Fraction(1, i + j + 1) for j in range(n)] for i in range(n)]


def _numeric_solution(rows: List[List[str]]) -> PrimalDualSolution:
    size = len(rows)
    zero = mpmath.mpf(0)
    return PrimalDualSolution(
        status=SolveStatus.optimal,
        primal=[[[mpmath.mpf(v) for v in row] for row in rows]],
        dual_vector=[],
        dual=[[[zero] * size for _ in range(size)]],
        primal_objective=zero,
        dual_objective=zero,
        gap=zero,
        primal_residual=zero,
        dual_residual=zero,
        iterations=0,
        backend="mpmath",
        precision=256,
    )


class TestToyCertificate:
    def test_verified(self, toy_problem):
        cert = _toy_certificate([[Fraction(2), Fraction(1)], [Fraction(1), Fraction(2)]], Fraction(2))
        assert verify_certificate(cert, toy_problem) == 2

    def test_singular_block_is_not_certified(self, toy_problem):
        cert = _toy_certificate([[Fraction(1), Fraction(1)], [Fraction(1), Fraction(1)]], Fraction(1))
        assert check_affine(cert, toy_problem) == 1
        with pytest.raises(PSDUncertified):
            verify_certificate(cert, toy_problem)

    def test_perturbed_entry(self, toy_problem):
        off = Fraction(1) + Fraction(1, 10**40)
        cert = _toy_certificate([[Fraction(2), off], [off, Fraction(2)]], Fraction(2))
        with pytest.raises(AffineViolation):
            check_affine(cert, toy_problem)

    def test_wrong_bound(self, toy_problem):
        cert = _toy_certificate([[Fraction(2), Fraction(1)], [Fraction(1), Fraction(2)]], Fraction(3, 2))
        with pytest.raises(AffineViolation):
            verify_certificate(cert, toy_problem)

    def test_wrong_block_name(self, toy_problem):
        cert = _toy_certificate([[Fraction(2), Fraction(1)], [Fraction(1), Fraction(2)]], Fraction(2))
        cert.blocks[0].name = "other"
        with pytest.raises(AffineViolation):
            check_affine(cert, toy_problem)

    def test_factored_block(self):
        block = CertificateBlock(
            name="rank_one",
            factor=RatMatrix.from_rows([[Fraction(1)], [Fraction(2)]]),
            gram=RatMatrix.from_rows([[Fraction(3)]]),
        )
        assert block.matrix() == [[3, 6], [6, 12]]

    def test_report(self, toy_problem, tmp_path: Path):
        good = _toy_certificate([[Fraction(2), Fraction(1)], [Fraction(1), Fraction(2)]], Fraction(2))
        ok, lines = verification_report(good, toy_problem)
        assert ok
        assert lines[0].startswith("PASS affine")
        assert lines[-1] == "PASS certificate"

        bad = _toy_certificate([[Fraction(1), Fraction(1)], [Fraction(1), Fraction(2)]], Fraction(1))
        ok, lines = verification_report(bad, toy_problem)
        assert not ok
        assert lines[0].startswith("FAIL affine")
        assert lines[-1] == "FAIL certificate"

        path = tmp_path / "report.txt"
        write_report(path, lines)
        assert path.read_text().splitlines() == lines


class TestCertificateFile:
    def test_write_then_read(self, tmp_path: Path):
        spec = ProblemSpec(n=4, cos_theta="1/2", level=1, d1=2, d2=2, delta=2)
        cert = _toy_certificate([[Fraction(2), Fraction(1, 3)], [Fraction(1, 3), Fraction(7, 5)]], Fraction(2))
        cert.spec = spec
        path = tmp_path / "toy.cert"
        write_certificate(cert, path)
        assert path.read_text().splitlines()[0] == CERTIFICATE_HEADER
        restored = read_certificate(path)
        assert restored.spec == spec
        assert restored.bound == 2
        assert restored.matrices() == cert.matrices()
        assert [b.name for b in restored.blocks] == ["toy"]

    @pytest.mark.parametrize(
        "content",
        [
            pytest.param("spec none\nbound 1\n", id="header"),
            pytest.param(f"{CERTIFICATE_HEADER}\nspec none\n", id="no-bound"),
            pytest.param(f"{CERTIFICATE_HEADER}\nbound 1\nblock a B=2x2 X=2x2\nB 1 0\nX 1 0\n", id="short-block"),
            pytest.param(f"{CERTIFICATE_HEADER}\nbound 1\nwidget\n", id="record"),
        ],
    )
    def test_rejects(self, tmp_path: Path, content):
        path = tmp_path / "bad.cert"
        path.write_text(content)
        with pytest.raises(ValueError):
            read_certificate(path)


class TestPositiveDefinite:
    def test_hilbert_matrix(self):
        matrix = _hilbert(8)
        pivots = ball_cholesky(matrix, precision=256)
        assert len(pivots) == 8
        assert all(p.lower > 0 for p in pivots)
        assert is_positive_definite_exact(matrix)
        assert exact_cholesky_pivots(matrix)[-1] > 0

    def test_indefinite(self):
        matrix = [[Fraction(1), Fraction(2)], [Fraction(2), Fraction(1)]]
        assert exact_cholesky_pivots(matrix) == [1, -3]
        assert not is_positive_definite_exact(matrix)
        with pytest.raises(PSDUncertified):
            ball_cholesky(matrix)

    def test_ball_never_accepts_what_exact_rejects(self):
        rng = np.random.default_rng(20)
        shifts = [Fraction(-1, 10**30), Fraction(0), Fraction(1, 10**30), Fraction(1)]
        for case in range(100):
            n = int(rng.integers(2, 7))
            rank = int(rng.integers(1, n))
            g = [[Fraction(int(v)) for v in rng.integers(-3, 4, size=rank)] for _ in range(n)]
            shift = shifts[case % len(shifts)]
            diagonal = [shift if i == j else 0 for i in range(n) for j in range(n)]
            matrix = [
                [sum((g[i][t] * g[j][t] for t in range(rank)), diagonal[i * n + j]) for j in range(n)]
                for i in range(n)
            ]
            try:
                ball_cholesky(matrix)
            except PSDUncertified:
                certified = False
            else:
                certified = True
            if certified:
                assert is_positive_definite_exact(matrix), matrix
            if shift <= 0:
                assert not is_positive_definite_exact(matrix), matrix
            if shift == 1:
                assert certified, matrix


class TestRounding:
    def test_pinned_toy_rounds_exactly(self, toy_problem):
        solution = solve_feasibility_margin(toy_problem, Fraction(101, 100), FAST)
        cert = round_certificate(solution, toy_problem, denominator_bound=10**6)
        assert cert.bound == Fraction(101, 100)
        assert verify_certificate(cert, toy_problem) == Fraction(101, 100)

    def test_boundary_solution_loses_definiteness(self, toy_problem):
        solution = solve(toy_problem, FAST)
        with pytest.raises(MarginTooSmall):
            round_certificate(solution, toy_problem, denominator_bound=10**6)

    def test_centered_pinned_point_rounds_at_default_bound(self, slab_problem):
        pinned = pin_problem(slab_problem, Fraction(-1, 2))
        solution = solve_feasibility_margin(slab_problem, Fraction(-1, 2), FAST)
        cert = round_certificate(solution, pinned)
        assert verify_certificate(cert, pinned) == Fraction(-1, 2)

    def test_correction_keeps_satisfied_shared_constraints(self):
        problem = SDPProblem(
            blocks=[Block(name="pair", size=2, kind=SOS, labels=["1", "u"])],
            objective={(0, 0, 0): Fraction(1)},
            constraints=[
                LinearConstraint(
                    entries={(0, 0, 0): Fraction(1), (0, 1, 1): Fraction(1)}, rhs=Fraction(2), label="sum"
                ),
                LinearConstraint(
                    entries={(0, 0, 0): Fraction(1), (0, 1, 1): Fraction(-2)}, rhs=Fraction(-1), label="difference"
                ),
            ],
        )
        # rounds to 501/500 and 1001/1000: "sum" is off, "difference" holds
        solution = _numeric_solution([["1.002", "0"], ["0", "1.001"]])
        cert = round_certificate(solution, problem, denominator_bound=1000)
        assert cert.blocks[0].gram.to_lists() == [[1, 0], [0, 1]]
        assert verify_certificate(cert, problem) == 1


class TestSturm:
    def test_two_roots(self):
        report = sturm_analyze(U**2 - Fraction(1, 4), -1, Fraction(1, 2))
        assert report.count == 2
        assert report.rational_roots == [Fraction(-1, 2), Fraction(1, 2)]

    def test_closed_interval_counts_left_endpoint(self):
        p = (U + 1) * U * (U - Fraction(1, 2)) * (U + Fraction(1, 2))
        expected = [Fraction(-1), Fraction(-1, 2), Fraction(0), Fraction(1, 2)]
        report = sturm_analyze(p, -1, Fraction(1, 2), closed=True, candidates=expected)
        assert report.count == 4
        assert report.rational_roots == expected
        assert report.candidates_complete
        assert sturm_analyze(p, -1, Fraction(1, 2)).count == 3
        assert not sturm_analyze(p, -1, Fraction(1, 2), closed=True, candidates=[0]).candidates_complete

    def test_repeated_root_counts_once(self):
        report = sturm_analyze((U - Fraction(1, 4)) ** 2, -1, 1)
        assert report.count == 1
        assert report.rational_roots == [Fraction(1, 4)]

    def test_irrational_root(self):
        report = sturm_analyze(U**2 - Fraction(1, 2), 0, 1)
        assert report.count == 1
        assert report.roots == [None]
        assert report.intervals[0][0] ** 2 < Fraction(1, 2) <= report.intervals[0][1] ** 2

    def test_no_real_roots(self):
        assert sturm_analyze(U**2 + 1, -1, 1).count == 0

    def test_factored_polynomials(self):
        rng = np.random.default_rng(21)
        lower, upper = Fraction(-1), Fraction(1, 2)
        for case in range(100):
            roots = sorted({Fraction(int(v), 6) for v in rng.integers(-12, 7, size=int(rng.integers(1, 5)))})
            p = MultiPoly.constant(Fraction(int(rng.integers(1, 5)), int(rng.integers(1, 4))))
            for r in roots:
                p = p * (U - r) ** int(rng.integers(1, 3))
            if case % 3 == 0:
                p = p * (U**2 + 1)
            closed = case % 2 == 0
            inside = [r for r in roots if lower < r <= upper or (closed and r == lower)]
            report = sturm_analyze(p, lower, upper, closed=closed)
            assert report.count == len(inside), (roots, closed)
            assert report.rational_roots == inside

    def test_errors(self):
        with pytest.raises(ZeroPolynomial):
            sturm_analyze(MultiPoly.zero(("u",)), -1, 1)
        with pytest.raises(ValueError):
            sturm_analyze(U, 1, -1)


class TestCodes:
    def test_d4_root_system(self):
        assert len(d4_roots()) == 24
        report = d4_report()
        assert report.passed
        assert report.count == 24
        assert report.squared_norm == 2
        assert report.gram_values == {Fraction(-1), Fraction(-1, 2), Fraction(0), Fraction(1, 2)}
        assert report.max_inner == Fraction(1, 2)

    def test_smaller_angle_fails(self):
        report = d4_report(Fraction(1, 3))
        assert not report.passed
        assert report.problems

    @pytest.mark.parametrize(
        "vectors",
        [
            pytest.param([(1, 1, 0, 0), (1, 1, 0, 0)], id="duplicate"),
            pytest.param([(1, 1, 0, 0), (1, 1, 1, 1)], id="mixed-norms"),
            pytest.param([(1, 1, 0, 0), (1, 1, 0)], id="mixed-dimensions"),
            pytest.param([], id="empty"),
        ],
    )
    def test_rejected_sets(self, vectors):
        assert not check_code(vectors, Fraction(1, 2)).passed

    def test_code_gram(self):
        gram = code_gram([(1, 1, 0, 0), (0, 1, 1, 0)])
        assert gram == [[1, Fraction(1, 2)], [Fraction(1, 2), 1]]
        with pytest.raises(NotIndependent):
            code_gram([(1, 0), (1, 1)])


@pytest.mark.parametrize(
    "gram",
    [
        pytest.param([[Fraction(2)]], id="not-unit"),
        pytest.param([[Fraction(1), Fraction(3, 4)], [Fraction(3, 4), Fraction(1)]], id="too-close"),
        pytest.param([[Fraction(1), Fraction(0)], [Fraction(1, 4), Fraction(1)]], id="asymmetric"),
    ],
)
def test_chain_rejects_point_sets(toy_problem, gram):
    cert = _toy_certificate([[Fraction(2), Fraction(1)], [Fraction(1), Fraction(2)]], Fraction(2))
    with pytest.raises(NotIndependent):
        code_slack_chain(cert, toy_problem, {}, gram, Fraction(1, 2))


@pytest.fixture(scope="module")
def dim_four_certificate(zonal_dir: Path):
    spec = ProblemSpec(n=4, cos_theta="1/2", level=1, d1=10, d2=10, delta=10)
    zonal, _ = ensure_cache(zonal_dir, 4, required_signatures(spec), max_i=1)
    problem, forms = assemble(spec, zonal)
    solution = solve_feasibility_margin(problem, Fraction(26), FAST)
    return round_certificate(solution, problem, denominator_bound=10**12), problem, forms


@pytest.mark.slow
class TestCertifiedKernel:
    def test_bound(self, dim_four_certificate):
        cert, problem, _ = dim_four_certificate
        assert verify_certificate(cert, problem) == 26

    @pytest.mark.parametrize(
        "gram",
        [
            pytest.param([[Fraction(1)]], id="one-point"),
            pytest.param([[Fraction(1), Fraction(-1)], [Fraction(-1), Fraction(1)]], id="antipodal"),
            pytest.param(PATH_OF_THREE, id="three-points"),
        ],
    )
    def test_chain(self, dim_four_certificate, gram):
        cert, problem, forms = dim_four_certificate
        chain = code_slack_chain(cert, problem, forms, gram, Fraction(1, 2))
        assert chain.lower == 0
        assert chain.upper == cert.bound - len(gram)
        assert chain.lower <= chain.middle <= chain.upper

    def test_two_point_polynomial_is_nonpositive(self, dim_four_certificate):
        cert, problem, forms = dim_four_certificate
        report = p2_root_report(cert, problem, forms, Fraction(1, 2))
        assert report.closed
        assert report.count == len(report.roots)
        for u in (Fraction(-1), Fraction(-1, 2), Fraction(0), Fraction(1, 2)):
            assert report.polynomial.evaluate({"u": u}) <= 0
