# Standard Library
import argparse
import math
import sys
from enum import IntEnum
from fractions import Fraction
from logging import getLogger
from logging.config import dictConfig
from pathlib import Path
from typing import Any
from typing import Dict
from typing import List
from typing import Optional
from typing import Sequence
from typing import Tuple

# Third Party Library
import numpy as np
import yaml
from pydantic import BaseModel
from pydantic import ValidationError
from pydantic import root_validator
from pydantic import validator

# if __name__ == "__main__":
if True:
    filepath = Path(__file__).parents[1] / "conf" / "logging.yml"
    with open(file=str(filepath), mode="rt") as f:
        config_dict = yaml.safe_load(f)
    dictConfig(config=config_dict)
    del filepath, config_dict


# Local Library
from .cache import CacheFormatError
from .cache import ensure_cache
from .config import DEFAULT_BRUTE_FORCE_CAP
from .config import DEFAULT_CACHE_DIR
from .config import DEFAULT_DENOMINATOR_BOUND
from .config import DEFAULT_MAX_ITERATIONS
from .config import DEFAULT_MC_SAMPLES
from .config import DEFAULT_OUTPUT_DIR
from .config import DEFAULT_PIN_MARGIN
from .config import DEFAULT_PRECISION_BITS
from .config import DEFAULT_SEED
from .config import DEFAULT_THREADS
from .config import DEFAULT_TOLERANCE
from .config import ConfigFileError
from .config import read_config_file
from .config import threads_from_env
from .exactmath import format_rational
from .exactmath import mpf_to_fraction
from .glrep import signatures_up_to
from .haar import DegreeCapExceeded
from .haar import DimensionTooSmall
from .haar import integrate_monomial
from .haar import mc_estimate
from .model import ProblemSpec
from .model import SolveConfig
from .model import as_rational
from .sdp import DegreeInfeasible
from .sdp import LinearPolyForm
from .sdp import SDPProblem
from .sdp import assemble
from .sdp import delsarte_lp_bound
from .sdp import required_signatures
from .sdpa import ProblemFormatError
from .sdpa import emit_sdpa
from .sdpa import load_problem
from .sdpa import write_problem
from .solver import SolverError
from .solver import SolveStatus
from .solver import load_solution
from .solver import pin_problem
from .solver import save_solution
from .solver import solve
from .solver import solve_feasibility_margin
from .symsys import RankError
from .verify import AffineViolation
from .verify import ChainViolation
from .verify import ExactCertificate
from .verify import MarginTooSmall
from .verify import NotIndependent
from .verify import PSDUncertified
from .verify import check_code
from .verify import code_gram
from .verify import code_slack_chain
from .verify import d4_roots
from .verify import p2_root_report
from .verify import read_certificate
from .verify import round_certificate
from .verify import verification_report
from .verify import verify_certificate
from .verify import write_certificate
from .verify import write_report
from .zonal import MissingZonalEntry
from .zonal import NotAdmissible
from .zonal import brute_force_P
from .zonal import compute_P

logger = getLogger(__name__)


class ExitCode(IntEnum):
    OK = 0
    CONFIG = 1
    ZONAL = 2
    SOLVER = 3
    VERIFY = 4
    CHECK = 5


class CommandFailed(Exception):
    """サブコマンドが失敗したときに終了コードと結果を持って投げる"""

    def __init__(self, code: ExitCode, message: str, result: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message)
        self.code = code
        self.result = result or {}


class RunConfig(BaseModel):
    """Everything a command needs; flags > KISSKIT_THREADS > --config file > defaults."""

    n: int = 4
    cos_theta: Fraction = Fraction(1, 2)
    level: int = 2
    d1: int = 4
    d2: Optional[int] = None
    delta: Optional[int] = None
    precision: int = DEFAULT_PRECISION_BITS
    tolerance: float = DEFAULT_TOLERANCE
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    backend: str = "mpmath"
    threads: int = DEFAULT_THREADS
    cache_dir: Path = Path(DEFAULT_CACHE_DIR)
    output_dir: Path = Path(DEFAULT_OUTPUT_DIR)
    pin: Optional[Fraction] = None
    pin_margin: Fraction = as_rational(DEFAULT_PIN_MARGIN)
    denominator_bound: int = DEFAULT_DENOMINATOR_BOUND
    symmetry_adapted: bool = False
    samples: int = DEFAULT_MC_SAMPLES
    seed: int = DEFAULT_SEED

    class Config:
        arbitrary_types_allowed = True
        extra = "forbid"

    @validator("cos_theta", "pin_margin", pre=True)
    def _parse_rational(cls, value: Any) -> Fraction:
        return as_rational(value)

    @validator("pin", pre=True)
    def _parse_pin(cls, value: Any) -> Optional[Fraction]:
        return None if value is None else as_rational(value)

    @validator("threads", "samples", "denominator_bound")
    def _check_positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError(f"must be positive, got {value}")
        return value

    @root_validator(skip_on_failure=True)
    def _fill_degrees(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        if values["d2"] is None:
            values["d2"] = values["d1"]
        if values["delta"] is None:
            d2 = values["d2"]
            values["delta"] = d2 + d2 % 2
        if values["pin_margin"] <= 0:
            raise ValueError(f"pin_margin must be positive, got {values['pin_margin']}")
        ProblemSpec(**{k: values[k] for k in ("n", "cos_theta", "level", "d1", "d2", "delta")})
        SolveConfig(
            precision=values["precision"],
            tolerance=values["tolerance"],
            max_iterations=values["max_iterations"],
            backend=values["backend"],
        )
        return values

    @property
    def spec(self) -> ProblemSpec:
        return ProblemSpec(
            n=self.n, cos_theta=self.cos_theta, level=self.level, d1=self.d1, d2=self.d2, delta=self.delta
        )

    @property
    def max_i(self) -> int:
        return 1 if self.level == 1 else 2

    @property
    def stem(self) -> str:
        cos = format_rational(self.cos_theta).replace("/", "over").replace("-", "m")
        return f"n{self.n}_c{cos}_l{self.level}_d{self.d1}_{self.d2}_{self.delta}"

    def path(self, suffix: str) -> Path:
        return self.output_dir / f"{self.stem}{suffix}"

    def solve_config(self, pinned: Optional[Fraction] = None) -> SolveConfig:
        return SolveConfig(
            precision=self.precision,
            tolerance=self.tolerance,
            max_iterations=self.max_iterations,
            backend=self.backend,
            pinned_objective=pinned,
        )


CONFIG_FLAGS = (
    "n",
    "cos_theta",
    "level",
    "d1",
    "d2",
    "delta",
    "precision",
    "tolerance",
    "max_iterations",
    "backend",
    "threads",
    "cache_dir",
    "output_dir",
    "pin",
    "pin_margin",
    "denominator_bound",
    "samples",
    "seed",
)


def build_config(args: argparse.Namespace, environ: Optional[Dict[str, str]] = None) -> RunConfig:
    values: Dict[str, Any] = {}
    if getattr(args, "config", None):
        values.update(read_config_file(Path(args.config)))
    threads = threads_from_env(environ)
    if threads is not None:
        values["threads"] = threads
    for name in CONFIG_FLAGS:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    if getattr(args, "symmetry_adapted", False):
        values["symmetry_adapted"] = True
    config = RunConfig(**values)
    logger.debug(f"{config=}")
    return config


def _result(command: str, fields: Dict[str, Any]) -> str:
    parts = [f"command={command}"] + [f"{k}={v}" for k, v in fields.items()]
    return "RESULT " + " ".join(parts)


def _format_set(values: Sequence[Fraction]) -> str:
    return "{" + ",".join(format_rational(v) for v in sorted(values)) + "}"


def pin_value(optimum: Fraction, margin: Fraction) -> Fraction:
    """optimum * (1 + margin) rounded up to three decimals."""
    target = optimum * (1 + margin)
    return Fraction(math.ceil(target * 1000), 1000)


# Commands


def _load_zonal(config: RunConfig, spec: ProblemSpec) -> Dict:
    try:
        blocks, _ = ensure_cache(
            config.cache_dir, spec.n, required_signatures(spec), max_i=config.max_i, threads=config.threads
        )
    except (CacheFormatError, NotAdmissible, RankError, DegreeCapExceeded, DimensionTooSmall, OSError) as e:
        raise CommandFailed(ExitCode.ZONAL, f"zonal generation failed: {e}") from e
    return blocks


def _assemble(config: RunConfig) -> Tuple[SDPProblem, Dict[int, LinearPolyForm]]:
    spec = config.spec
    zonal = _load_zonal(config, spec)
    try:
        return assemble(spec, zonal, symmetry_adapted=config.symmetry_adapted)
    except MissingZonalEntry as e:
        raise CommandFailed(ExitCode.ZONAL, f"zonal data incomplete: {e}") from e


def cmd_zonal(config: RunConfig, args: argparse.Namespace) -> Dict[str, Any]:
    signatures = signatures_up_to(config.d1, lam2_zero_only=config.level == 1)
    try:
        blocks, regenerated = ensure_cache(
            config.cache_dir, config.n, signatures, max_i=config.max_i, threads=config.threads
        )
    except (CacheFormatError, NotAdmissible, RankError, DegreeCapExceeded, DimensionTooSmall, OSError) as e:
        raise CommandFailed(ExitCode.ZONAL, f"zonal generation failed: {e}") from e
    return {"n": config.n, "signatures": len(blocks), "regenerated": regenerated, "cache": config.cache_dir}


def cmd_assemble(config: RunConfig, args: argparse.Namespace) -> Dict[str, Any]:
    problem, _ = _assemble(config)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    path = Path(args.output) if args.output else config.path(".kproblem")
    write_problem(problem, path)
    fields: Dict[str, Any] = {
        "constraints": problem.num_constraints,
        "blocks": len(problem.blocks),
        "problem": path,
    }
    if args.sdpa:
        sdpa_path = path.with_suffix(".dat-s")
        emit_sdpa(problem, sdpa_path)
        fields["sdpa"] = sdpa_path
    return fields


def _problem_for(config: RunConfig, args: argparse.Namespace) -> SDPProblem:
    if getattr(args, "problem", None):
        try:
            return load_problem(Path(args.problem))
        except (OSError, ProblemFormatError) as e:
            raise CommandFailed(ExitCode.CONFIG, f"cannot read problem: {e}") from e
    problem, _ = _assemble(config)
    return problem


def cmd_solve(config: RunConfig, args: argparse.Namespace) -> Dict[str, Any]:
    problem = _problem_for(config, args)
    try:
        if config.pin is not None:
            solution = solve_feasibility_margin(problem, config.pin, config.solve_config(config.pin))
        else:
            solution = solve(problem, config.solve_config())
    except SolverError as e:
        raise CommandFailed(ExitCode.SOLVER, str(e)) from e
    config.output_dir.mkdir(parents=True, exist_ok=True)
    path = Path(args.output) if args.output else config.path(".solution")
    save_solution(solution, path)
    fields = {
        "status": solution.status.value,
        "primal": f"{float(solution.primal_objective):.12g}",
        "dual": f"{float(solution.dual_objective):.12g}",
        "gap": f"{float(solution.gap):.3e}",
        "iterations": solution.iterations,
        "solution": path,
    }
    if solution.status != SolveStatus.optimal:
        raise CommandFailed(ExitCode.SOLVER, f"solver status {solution.status.value}", fields)
    return fields


def cmd_round(config: RunConfig, args: argparse.Namespace) -> Dict[str, Any]:
    problem = _problem_for(config, args)
    try:
        solution = load_solution(Path(args.solution))
    except (OSError, ValueError, KeyError) as e:
        raise CommandFailed(ExitCode.CONFIG, f"cannot read solution: {e}") from e
    pinned = pin_problem(problem, config.pin) if config.pin is not None else problem
    try:
        cert = round_certificate(solution, pinned, config.denominator_bound, precision=config.precision)
    except (AffineViolation, MarginTooSmall, PSDUncertified) as e:
        raise CommandFailed(ExitCode.VERIFY, f"rounding failed: {e}") from e
    config.output_dir.mkdir(parents=True, exist_ok=True)
    path = Path(args.output) if args.output else config.path(".cert")
    write_certificate(cert, path)
    return {"bound": format_rational(cert.bound), "floor": math.floor(cert.bound), "certificate": path}


def _d4_chain(
    config: RunConfig, cert: ExactCertificate, problem: SDPProblem, forms: Dict[int, LinearPolyForm]
) -> Dict[str, Any]:
    try:
        chain = code_slack_chain(cert, problem, forms, code_gram(d4_roots()), config.cos_theta)
    except (NotIndependent, ChainViolation) as e:
        raise CommandFailed(ExitCode.VERIFY, f"bound chain failed: {e}") from e
    return {"chain_middle": format_rational(chain.middle), "chain_upper": format_rational(chain.upper)}


def cmd_verify(config: RunConfig, args: argparse.Namespace) -> Dict[str, Any]:
    problem = _problem_for(config, args)
    try:
        cert = read_certificate(Path(args.certificate))
    except (OSError, ValueError) as e:
        raise CommandFailed(ExitCode.CONFIG, f"cannot read certificate: {e}") from e
    ok, lines = verification_report(cert, problem, precision=config.precision)
    for line in lines:
        logger.info(line)
    report = Path(args.report) if args.report else Path(args.certificate).with_suffix(".report")
    write_report(report, lines)
    fields: Dict[str, Any] = {"passed": str(ok).lower(), "report": report}
    if not ok:
        raise CommandFailed(ExitCode.VERIFY, "certificate rejected", fields)
    fields["bound"] = format_rational(cert.bound)
    fields["floor"] = math.floor(cert.bound)
    if args.d4_chain:
        _, forms = _assemble(config)
        fields.update(_d4_chain(config, cert, problem, forms))
    return fields


def cmd_bound(config: RunConfig, args: argparse.Namespace) -> Dict[str, Any]:
    problem, forms = _assemble(config)
    config.output_dir.mkdir(parents=True, exist_ok=True)
    write_problem(problem, config.path(".kproblem"))
    try:
        numeric = solve(problem, config.solve_config())
        if numeric.status != SolveStatus.optimal:
            raise CommandFailed(ExitCode.SOLVER, f"numeric solve ended {numeric.status.value}")
        optimum = mpf_to_fraction(numeric.primal_objective)
        pin = config.pin if config.pin is not None else pin_value(optimum, config.pin_margin)
        logger.info(f"numeric optimum {float(optimum):.12g}; pinning the objective at {format_rational(pin)}")
        interior = solve_feasibility_margin(problem, pin, config.solve_config(pin))
    except SolverError as e:
        raise CommandFailed(ExitCode.SOLVER, str(e)) from e
    if interior.status != SolveStatus.optimal:
        raise CommandFailed(ExitCode.SOLVER, f"pinned objective {format_rational(pin)} is not strictly feasible")
    save_solution(interior, config.path(".solution"))
    try:
        cert = round_certificate(interior, pin_problem(problem, pin), config.denominator_bound, config.precision)
        bound = verify_certificate(cert, problem, precision=config.precision)
    except (AffineViolation, MarginTooSmall, PSDUncertified) as e:
        raise CommandFailed(ExitCode.VERIFY, f"certification failed: {e}") from e
    write_certificate(cert, config.path(".cert"))
    fields: Dict[str, Any] = {
        "bound": format_rational(bound),
        "floor": math.floor(bound),
        "numeric": f"{float(optimum):.12g}",
        "certificate": config.path(".cert"),
    }
    if config.level == 2:
        report = p2_root_report(cert, problem, forms, config.cos_theta)
        logger.info(f"p2 has {report.count} roots on [-1, {config.cos_theta}]: {report.rational_roots}")
        if args.d4_chain:
            fields.update(_d4_chain(config, cert, problem, forms))
    return fields


def read_vectors(path: Path) -> List[Tuple[int, ...]]:
    vectors = []
    with open(file=str(path), mode="rt", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                vectors.append(tuple(int(x) for x in line.replace(",", " ").split()))
            except ValueError as e:
                raise ConfigFileError(f"{path}:{lineno}: expected integers, got {raw.rstrip()!r}") from e
    return vectors


def cmd_d4check(config: RunConfig, args: argparse.Namespace) -> Dict[str, Any]:
    vectors = read_vectors(Path(args.vectors)) if args.vectors else d4_roots()
    report = check_code(vectors, config.cos_theta)
    fields = {
        "passed": str(report.passed).lower(),
        "count": report.count,
        "gram": _format_set(list(report.gram_values)),
        "max_inner": format_rational(report.max_inner) if report.max_inner is not None else "none",
    }
    for problem in report.problems:
        logger.warning(problem)
    if not report.passed:
        raise CommandFailed(ExitCode.CHECK, "; ".join(report.problems), fields)
    return fields


def _random_monomial(rng: np.random.Generator, max_degree: int = 8) -> List[List[int]]:
    a = [[0] * 4 for _ in range(4)]
    for _ in range(int(rng.integers(1, max_degree + 1))):
        a[int(rng.integers(0, 4))][int(rng.integers(0, 4))] += 1
    return a


def cmd_oracle(config: RunConfig, args: argparse.Namespace) -> Dict[str, Any]:
    """Brute-force zonal polynomials, Monte Carlo Haar moments and the Delsarte LP against the fast paths."""
    cap = min(config.d1, DEFAULT_BRUTE_FORCE_CAP)
    zonal_checked = zonal_mismatches = 0
    for lam in signatures_up_to(cap):
        for k1 in range(lam.dim):
            for k2 in range(lam.dim):
                zonal_checked += 1
                if compute_P(lam, k1, k2, config.n) != brute_force_P(lam, k1, k2, config.n, cap=cap):
                    zonal_mismatches += 1
                    logger.warning(f"compute_P and brute_force_P disagree for {lam} {k1=} {k2=} n={config.n}")

    rng = np.random.default_rng(config.seed)
    haar_failures = 0
    for k in range(args.monomials):
        a = _random_monomial(rng)
        exact = float(integrate_monomial(config.n, a))
        mean, stderr = mc_estimate(config.n, a, samples=config.samples, seed=config.seed + k)
        if abs(mean - exact) > 5 * stderr + 1e-12:
            haar_failures += 1
            logger.warning(f"Haar moment {a} at n={config.n}: exact {exact}, Monte Carlo {mean} +- {stderr}")

    delsarte = delsarte_lp_bound(config.n, config.cos_theta, config.d1)
    fields = {
        "zonal_checked": zonal_checked,
        "zonal_mismatches": zonal_mismatches,
        "haar_checked": args.monomials,
        "haar_failures": haar_failures,
        "delsarte": f"{delsarte:.9g}",
    }
    if zonal_mismatches or haar_failures:
        raise CommandFailed(ExitCode.CHECK, "oracle disagreement", fields)
    return fields


COMMANDS = {
    "zonal": cmd_zonal,
    "assemble": cmd_assemble,
    "solve": cmd_solve,
    "round": cmd_round,
    "verify": cmd_verify,
    "bound": cmd_bound,
    "d4check": cmd_d4check,
    "oracle": cmd_oracle,
}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value file with run settings")
    parser.add_argument("--n", type=int)
    parser.add_argument("--cos-theta", dest="cos_theta", help="rational cosine of the angle, e.g. 1/2")
    parser.add_argument("--level", type=int, choices=(1, 2))
    parser.add_argument("--d1", type=int)
    parser.add_argument("--d2", type=int)
    parser.add_argument("--delta", type=int)
    parser.add_argument("--precision", type=int, help="working precision in bits")
    parser.add_argument("--tolerance", type=float)
    parser.add_argument("--max-iterations", dest="max_iterations", type=int)
    parser.add_argument("--backend", choices=("mpmath", "numpy"))
    parser.add_argument("--threads", type=int)
    parser.add_argument("--cache-dir", dest="cache_dir")
    parser.add_argument("--output-dir", dest="output_dir")
    parser.add_argument("--pin", help="pinned objective value (rational)")
    parser.add_argument("--pin-margin", dest="pin_margin")
    parser.add_argument("--denominator-bound", dest="denominator_bound", type=int)
    parser.add_argument("--samples", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--symmetry-adapted", dest="symmetry_adapted", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kisskit", description="SDP upper bounds for kissing numbers")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        _add_config_flags(p)
        if name in ("assemble", "solve", "round"):
            p.add_argument("--output")
        if name in ("solve", "round", "verify"):
            p.add_argument("--problem", help=".kproblem or .dat-s file; assembled from the cache when omitted")
        if name == "assemble":
            p.add_argument("--sdpa", action="store_true", help="also write an SDPA sparse file")
        if name == "round":
            p.add_argument("--solution", required=True)
        if name == "verify":
            p.add_argument("--certificate", required=True)
            p.add_argument("--report")
        if name in ("verify", "bound"):
            p.add_argument("--d4-chain", dest="d4_chain", action="store_true", help="evaluate the bound chain on D4")
        if name == "d4check":
            p.add_argument("--vectors", help="integer vectors, one per line")
        if name == "oracle":
            p.add_argument("--monomials", type=int, default=50)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = build_config(args)
    except (ValidationError, ConfigFileError, OSError) as e:
        logger.error(f"invalid configuration: {e}")
        print(_result(args.command, {"error": "config"}))
        return ExitCode.CONFIG
    try:
        fields = COMMANDS[args.command](config, args)
    except CommandFailed as e:
        logger.error(f"{args.command} failed: {e}")
        print(_result(args.command, dict(e.result, exit=int(e.code))))
        return e.code
    except (ConfigFileError, DegreeInfeasible) as e:
        logger.error(f"{args.command}: {e}")
        print(_result(args.command, {"error": "config"}))
        return ExitCode.CONFIG
    except Exception as e:
        logger.error(f"unexpected failure in {args.command}: {e=}", exc_info=True)
        raise
    print(_result(args.command, fields))
    return ExitCode.OK


if __name__ == "__main__":
    sys.exit(main())
