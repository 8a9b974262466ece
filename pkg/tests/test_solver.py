# Standard Library
from fractions import Fraction
from logging import getLogger
from pathlib import Path

# Third Party Library
import mpmath
import pytest

# First Party Library
from kisskit.cache import ensure_cache
from kisskit.exactmath import MultiPoly
from kisskit.model import ProblemSpec
from kisskit.model import SolveConfig
from kisskit.sdp import LinearPolyForm
from kisskit.sdp import SDPProblem
from kisskit.sdp import assemble
from kisskit.sdp import delsarte_lp_bound
from kisskit.sdp import delta_generators
from kisskit.sdp import required_signatures
from kisskit.sdp import sos_relax
from kisskit.solver import SolverError
from kisskit.solver import SolveStatus
from kisskit.solver import confirm_status
from kisskit.solver import load_solution
from kisskit.solver import pin_problem
from kisskit.solver import recheck
from kisskit.solver import save_solution
from kisskit.solver import solve
from kisskit.solver import solve_feasibility_margin

logger = getLogger(__name__)

FAST = SolveConfig(precision=128, tolerance=1e-20)


def _kissing_problem(zonal_dir: Path, n: int, d: int) -> SDPProblem:
    spec = ProblemSpec(n=n, cos_theta="1/2", level=1, d1=d, d2=d, delta=d)
    zonal, _ = ensure_cache(zonal_dir, n, required_signatures(spec), max_i=1)
    problem, _ = assemble(spec, zonal)
    return problem


class TestToyProblem:
    @pytest.mark.parametrize(
        "cfg",
        [
            pytest.param(FAST, id="mpmath"),
            pytest.param(SolveConfig(), id="defaults"),
            pytest.param(SolveConfig(backend="numpy", tolerance=1e-9), id="numpy"),
        ],
    )
    def test_solve(self, toy_problem, cfg):
        solution = solve(toy_problem, cfg)
        assert solution.status == SolveStatus.optimal
        tolerance = 1e-15 if cfg.backend == "mpmath" else 1e-6
        assert abs(solution.primal_objective - 1) < tolerance
        assert abs(solution.dual_objective - 1) < tolerance
        assert solution.primal_residual < tolerance
        assert solution.weak_duality_violations == 0
        assert solution.backend == cfg.backend

    def test_pinned_above_optimum(self, toy_problem):
        solution = solve_feasibility_margin(toy_problem, Fraction(101, 100), FAST)
        assert solution.status == SolveStatus.optimal
        assert solution.strictly_feasible
        assert abs(solution.margin - mpmath.mpf("0.01")) < 1e-10

    def test_pinned_below_optimum(self, toy_problem):
        cfg = SolveConfig(precision=64, max_iterations=60)
        solution = solve_feasibility_margin(toy_problem, Fraction(99, 100), cfg)
        assert solution.status == SolveStatus.infeasible

    def test_pin_problem(self, toy_problem):
        pinned = pin_problem(toy_problem, Fraction(3))
        assert pinned.num_constraints == toy_problem.num_constraints + 1
        assert pinned.constraints[-1].entries == toy_problem.objective
        assert pinned.constraints[-1].rhs == 3
        assert toy_problem.num_constraints == 2

    def test_save_then_load(self, toy_problem, tmp_path: Path):
        solution = solve(toy_problem, FAST)
        path = tmp_path / "toy.solution"
        save_solution(solution, path)
        restored = load_solution(path)
        assert restored.status == solution.status
        assert restored.iterations == solution.iterations
        assert len(restored.dual_vector) == 2
        with mpmath.mp.workprec(128):
            assert abs(restored.primal[0][0][1] - solution.primal[0][0][1]) < 1e-30
            assert abs(restored.primal_objective - solution.primal_objective) < 1e-30

    def test_load_rejects_foreign_file(self, tmp_path: Path):
        path = tmp_path / "x.solution"
        path.write_text("hello\n")
        with pytest.raises(ValueError):
            load_solution(path)

    def test_recheck_confirms_status(self, toy_problem):
        solution = solve(toy_problem, FAST)
        confirm_status(solution, FAST.tolerance)
        assert solution.status == SolveStatus.optimal

        solution.primal[0][0][1] += mpmath.mpf("1e-3")
        solution.primal[0][1][0] += mpmath.mpf("1e-3")
        recheck(toy_problem, solution)
        confirm_status(solution, FAST.tolerance)
        assert solution.status == SolveStatus.stalled


class TestPinnedCentering:
    def test_analytic_center(self, slab_problem):
        solution = solve_feasibility_margin(slab_problem, Fraction(-1, 2), FAST)
        assert solution.status == SolveStatus.optimal
        x = solution.primal[0]
        assert abs(x[0][1] + mpmath.mpf(1) / 2) < 1e-15
        assert abs(x[1][1] - mpmath.mpf(3) / 4) < 0.05
        assert abs(solution.margin - mpmath.mpf(1) / 2) < 0.05

    def test_numpy_point_is_refined(self, slab_problem):
        solution = solve_feasibility_margin(slab_problem, Fraction(-1, 2), SolveConfig(backend="numpy", tolerance=1e-9))
        assert solution.status == SolveStatus.optimal
        assert solution.backend == "mpmath"
        assert solution.primal_residual < 1e-25
        assert solution.margin > 0.4


def test_positive_constant_is_not_a_certificate():
    form = LinearPolyForm(variables=("u",), constant=MultiPoly.constant(1, ("u",)))
    relaxation = sos_relax(form, delta_generators(2, Fraction(1, 2)), 2)
    problem = SDPProblem(blocks=relaxation.blocks, objective={}, constraints=relaxation.constraints)
    solution = solve(problem, SolveConfig(backend="numpy", max_iterations=100))
    assert solution.status == SolveStatus.infeasible


def test_empty_problem():
    with pytest.raises(SolverError):
        solve(SDPProblem(blocks=[], objective={}, constraints=[]))


@pytest.mark.slow
class TestKissingLevelOne:
    def test_dimension_eight(self, zonal_dir: Path):
        solution = solve(_kissing_problem(zonal_dir, 8, 6), FAST)
        logger.info(f"level 1 n=8: {solution.primal_objective}")
        assert solution.status == SolveStatus.optimal
        assert abs(solution.primal_objective - 240) < 1e-6

    def test_dimension_four(self, zonal_dir: Path):
        problem = _kissing_problem(zonal_dir, 4, 10)
        solution = solve(problem, FAST)
        assert solution.status == SolveStatus.optimal
        assert 25 <= solution.primal_objective < 26
        assert abs(float(solution.primal_objective) - delsarte_lp_bound(4, Fraction(1, 2), 10)) < 1e-2

        pinned = solve_feasibility_margin(problem, Fraction(26), FAST)
        assert pinned.status == SolveStatus.optimal
        assert pinned.margin > 0

    def test_dimension_four_at_default_settings(self, zonal_dir: Path):
        problem = _kissing_problem(zonal_dir, 4, 10)
        solution = solve(problem)
        assert solution.status == SolveStatus.optimal
        assert 25 <= solution.primal_objective < 26

        pinned = solve_feasibility_margin(problem, Fraction(26))
        assert pinned.status == SolveStatus.optimal
        assert pinned.margin > 0


@pytest.mark.slow
class TestKissingLevelTwo:
    def _level_two(self, zonal_dir: Path, d1: int, d2: int) -> SDPProblem:
        spec = ProblemSpec(n=4, cos_theta="1/2", level=2, d1=d1, d2=d2, delta=d2)
        zonal, _ = ensure_cache(zonal_dir, 4, required_signatures(spec), max_i=2)
        problem, _ = assemble(spec, zonal)
        return problem

    def test_not_above_level_one_at_equal_degree(self, zonal_dir: Path):
        level_one = solve(_kissing_problem(zonal_dir, 4, 6), FAST)
        level_two = solve(self._level_two(zonal_dir, 6, 6), SolveConfig(backend="numpy", tolerance=1e-7))
        logger.info(f"n=4 degree 6: level 1 {level_one.primal_objective}, level 2 {level_two.primal_objective}")
        assert level_one.status == SolveStatus.optimal
        assert level_two.status == SolveStatus.optimal
        assert 24 - 1e-4 <= level_two.primal_objective <= level_one.primal_objective + 1e-4

    def test_kernel_degree_four_gives_the_degree_four_delsarte_value(self, zonal_dir: Path):
        solution = solve(self._level_two(zonal_dir, 4, 6), SolveConfig(backend="numpy", tolerance=1e-7))
        assert solution.status == SolveStatus.optimal
        assert abs(float(solution.primal_objective) - delsarte_lp_bound(4, Fraction(1, 2), 4)) < 1e-3
