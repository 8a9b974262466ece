# Standard Library
import re
from fractions import Fraction
from logging import getLogger
from pathlib import Path
from typing import Dict
from typing import List
from typing import Optional

# Third Party Library
import mpmath

# Local Library
from .exactmath import format_rational
from .exactmath import parse_rational
from .exactmath import to_mpf
from .model import ProblemSpec
from .sdp import SLACK
from .sdp import SOS
from .sdp import Block
from .sdp import EntryKey
from .sdp import LinearConstraint
from .sdp import SDPProblem

logger = getLogger(__name__)

PROBLEM_HEADER = "# kisskit-problem version=1"
DEFAULT_DIGITS = 40

_SEPARATORS = re.compile(r"[{}(),;]")


class ProblemFormatError(ValueError):
    """problem file could not be parsed"""


def _format_value(value: Fraction, digits: int) -> str:
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    with mpmath.mp.workprec(int(digits * 3.33) + 16):
        return mpmath.nstr(to_mpf(value), digits, strip_zeros=True)


def emit_sdpa(problem: SDPProblem, path: Path, digits: int = DEFAULT_DIGITS) -> None:
    """Write ``problem`` in SDPA sparse format (F0 = -C, F_i = A_i, c = b)."""
    lines = []
    if problem.blocks:
        names = " ".join(f"{b.name}:{b.kind}" for b in problem.blocks)
        lines.append(f"* blocks {names}")
    lines.append(str(problem.num_constraints))
    lines.append(str(len(problem.blocks)))
    lines.append(" ".join(str(-b.size if b.diagonal else b.size) for b in problem.blocks))
    lines.append(" ".join(_format_value(c.rhs, digits) for c in problem.constraints))
    for (b, r, c), v in sorted(problem.objective.items()):
        if v:
            lines.append(f"0 {b + 1} {r + 1} {c + 1} {_format_value(-v, digits)}")
    for i, constraint in enumerate(problem.constraints, start=1):
        for (b, r, c), v in sorted(constraint.entries.items()):
            if v:
                lines.append(f"{i} {b + 1} {r + 1} {c + 1} {_format_value(v, digits)}")
    with open(file=str(path), mode="wt", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    logger.info(f"wrote SDPA file {path} ({problem.summary()})")


def parse_sdpa(path: Path) -> SDPProblem:
    names: List[str] = []
    kinds: List[str] = []
    tokens: List[str] = []
    with open(file=str(path), mode="rt", encoding="utf-8") as f:
        for raw in f:
            line = raw.strip()
            if line.startswith("* blocks "):
                for item in line[len("* blocks ") :].split():
                    name, _, kind = item.rpartition(":")
                    names.append(name)
                    kinds.append(kind)
                continue
            if line.startswith("*") or line.startswith('"'):
                continue
            tokens.extend(_SEPARATORS.sub(" ", line).split())
    try:
        pos = 0
        m = int(tokens[pos])
        nblocks = int(tokens[pos + 1])
        pos += 2
        raw_sizes = [int(t) for t in tokens[pos : pos + nblocks]]
        pos += nblocks
        rhs = [parse_rational(t) for t in tokens[pos : pos + m]]
        pos += m
    except (IndexError, ValueError) as e:
        raise ProblemFormatError(f"{path}: bad SDPA header: {e}") from e
    if len(raw_sizes) != nblocks or len(rhs) != m:
        raise ProblemFormatError(f"{path}: truncated SDPA header")
    if names and len(names) != nblocks:
        raise ProblemFormatError(f"{path}: block comment lists {len(names)} blocks, header {nblocks}")
    blocks = []
    for i, size in enumerate(raw_sizes):
        kind = kinds[i] if names else (SLACK if size < 0 else SOS)
        if size < 0 and kind != SLACK:
            kind = SLACK
        blocks.append(Block(name=names[i] if names else f"B{i + 1}", size=abs(size), kind=kind))
    objective: Dict[EntryKey, Fraction] = {}
    entries: List[Dict[EntryKey, Fraction]] = [{} for _ in range(m)]
    rest = tokens[pos:]
    if len(rest) % 5:
        raise ProblemFormatError(f"{path}: entry lines must have 5 fields")
    for k in range(0, len(rest), 5):
        matno, blk, i, j = (int(t) for t in rest[k : k + 4])
        value = parse_rational(rest[k + 4])
        r, c = min(i, j) - 1, max(i, j) - 1
        if not 0 <= matno <= m or not 1 <= blk <= nblocks:
            raise ProblemFormatError(f"{path}: entry {rest[k:k + 5]} out of range")
        if matno == 0:
            objective[(blk - 1, r, c)] = -value
        else:
            entries[matno - 1][(blk - 1, r, c)] = value
    constraints = [LinearConstraint(entries=e, rhs=b) for e, b in zip(entries, rhs)]
    problem = SDPProblem(blocks=blocks, objective=objective, constraints=constraints)
    problem.check()
    return problem


def write_problem(problem: SDPProblem, path: Path) -> None:
    """Exact text serialization with the rational conventions of the zonal cache."""
    lines = [PROBLEM_HEADER]
    lines.append(f"spec {problem.spec.to_text()}" if problem.spec is not None else "spec none")
    for b in problem.blocks:
        labels = "|".join(b.labels) if b.labels else "-"
        lines.append(f"block {b.name} {b.size} {b.kind} {labels}")
    for (b, r, c), v in sorted(problem.objective.items()):
        lines.append(f"objective {b} {r} {c} {format_rational(v)}")
    for i, constraint in enumerate(problem.constraints):
        label = constraint.label or "-"
        lines.append(f"constraint {i} rhs={format_rational(constraint.rhs)} label={label}")
        for (b, r, c), v in sorted(constraint.entries.items()):
            lines.append(f"entry {i} {b} {r} {c} {format_rational(v)}")
    with open(file=str(path), mode="wt", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    logger.info(f"wrote problem {path} ({problem.summary()})")


def read_problem(path: Path) -> SDPProblem:
    with open(file=str(path), mode="rt", encoding="utf-8") as f:
        lines = [line.rstrip("\n") for line in f if line.strip()]
    if not lines or lines[0] != PROBLEM_HEADER:
        raise ProblemFormatError(f"{path}: missing header {PROBLEM_HEADER!r}")
    spec: Optional[ProblemSpec] = None
    blocks: List[Block] = []
    objective: Dict[EntryKey, Fraction] = {}
    constraints: List[LinearConstraint] = []
    for lineno, line in enumerate(lines[1:], start=2):
        kind, _, rest = line.partition(" ")
        fields = rest.split()
        try:
            if kind == "spec":
                spec = None if rest.strip() == "none" else ProblemSpec.from_text(rest)
            elif kind == "block":
                labels = [] if fields[3] == "-" else fields[3].split("|")
                blocks.append(Block(name=fields[0], size=int(fields[1]), kind=fields[2], labels=labels))
            elif kind == "objective":
                b, r, c = (int(x) for x in fields[:3])
                objective[(b, r, c)] = parse_rational(fields[3])
            elif kind == "constraint":
                index = int(fields[0])
                if index != len(constraints):
                    raise ProblemFormatError(f"{path}:{lineno}: constraint {index} out of order")
                values = dict(item.split("=", 1) for item in fields[1:])
                label = values.get("label", "-")
                constraints.append(
                    LinearConstraint(entries={}, rhs=parse_rational(values["rhs"]), label="" if label == "-" else label)
                )
            elif kind == "entry":
                index, b, r, c = (int(x) for x in fields[:4])
                constraints[index].entries[(b, r, c)] = parse_rational(fields[4])
            else:
                raise ProblemFormatError(f"{path}:{lineno}: unknown record {kind!r}")
        except ProblemFormatError:
            raise
        except (IndexError, KeyError, ValueError) as e:
            raise ProblemFormatError(f"{path}:{lineno}: {e}") from e
    problem = SDPProblem(blocks=blocks, objective=objective, constraints=constraints, spec=spec)
    problem.check()
    return problem


def load_problem(path: Path) -> SDPProblem:
    """Read either format, chosen by the file suffix."""
    if Path(path).suffix in (".dat-s", ".sdpa"):
        return parse_sdpa(path)
    return read_problem(path)

