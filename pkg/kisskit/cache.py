# Standard Library
import os
import re
from logging import getLogger
from pathlib import Path
from typing import Dict
from typing import Iterable
from typing import List
from typing import Tuple

# Local Library
from .exactmath import MultiPoly
from .exactmath import format_rational
from .exactmath import parse_rational
from .glrep import Signature
from .symsys import CoefficientTable
from .symsys import coefficient_table
from .symsys import sigma_orbit
from .zonal import GRAM_VARIABLES
from .zonal import ZonalBlock
from .zonal import base_keys
from .zonal import generate_block

logger = getLogger(__name__)

FORMAT_VERSION = 1

_HEADER = re.compile(r"^# kisskit-zonal version=(\d+) n=(\d+) lambda=\((\d+),(\d+)\) max_i=(\d+) entries=(\d+)$")
_RECORD = re.compile(
    r"^lambda=\((\d+),(\d+)\) n=(\d+) row=\((\d+),(\d+),(\d+)\) col=\((\d+),(\d+),(\d+)\) poly=(.+)$"
)


class CacheFormatError(ValueError):
    """zonal cache file is malformed or does not match the request"""


def block_path(cache_dir: Path, n: int, lam: Signature) -> Path:
    return Path(cache_dir) / f"zonal_n{n}_l{lam.lam1}_{lam.lam2}.txt"


def table_path(cache_dir: Path, lam: Signature) -> Path:
    return Path(cache_dir) / f"symsys_l{lam.lam1}_{lam.lam2}.txt"


def _atomic_write(path: Path, lines: Iterable[str]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    with open(file=str(tmp), mode="wt", encoding="utf-8") as f:
        for line in lines:
            f.write(line + "\n")
    os.replace(tmp, path)


def write_block(path: Path, block: ZonalBlock) -> None:
    lam = block.lam
    entries = sorted(block.base.items())
    lines = [
        f"# kisskit-zonal version={FORMAT_VERSION} n={block.n} lambda=({lam.lam1},{lam.lam2}) "
        f"max_i={block.max_i} entries={len(entries)}"
    ]
    for ((i1, k1), (i2, k2)), poly in entries:
        lines.append(
            f"lambda=({lam.lam1},{lam.lam2}) n={block.n} row=({i1},0,{k1}) col=({i2},0,{k2}) poly={poly.to_text()}"
        )
    _atomic_write(Path(path), lines)
    logger.debug(f"wrote {len(entries)} entries to {path}")


def read_block(path: Path) -> ZonalBlock:
    try:
        with open(file=str(path), mode="rt", encoding="utf-8") as f:
            lines = [line.rstrip("\n") for line in f if line.strip()]
    except OSError as e:
        raise CacheFormatError(f"cannot read {path}: {e}") from e
    if not lines:
        raise CacheFormatError(f"{path} is empty")
    header = _HEADER.match(lines[0])
    if header is None:
        raise CacheFormatError(f"{path}: bad header {lines[0]!r}")
    version, n, lam1, lam2, max_i, count = (int(g) for g in header.groups())
    if version != FORMAT_VERSION:
        raise CacheFormatError(f"{path}: unsupported version {version}")
    lam = Signature(lam1, lam2)
    base: Dict[Tuple[Tuple[int, int], Tuple[int, int]], MultiPoly] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        record = _RECORD.match(line)
        if record is None:
            raise CacheFormatError(f"{path}:{lineno}: malformed record")
        values = [int(g) for g in record.groups()[:9]]
        if (values[0], values[1]) != (lam1, lam2) or values[2] != n:
            raise CacheFormatError(f"{path}:{lineno}: record does not match the header")
        if values[4] or values[7]:
            raise CacheFormatError(f"{path}:{lineno}: only j=0 entries are stored")
        try:
            poly = MultiPoly.from_text(record.group(10), GRAM_VARIABLES)
        except ValueError as e:
            raise CacheFormatError(f"{path}:{lineno}: {e}") from e
        base[((values[3], values[5]), (values[6], values[8]))] = poly
    if len(base) != count:
        raise CacheFormatError(f"{path}: header announces {count} entries, found {len(base)}")
    expected = base_keys(lam, max_i)
    missing = [(r, c) for r in expected for c in expected if (r, c) not in base]
    if missing:
        raise CacheFormatError(f"{path}: missing entries {missing[:3]}")
    return ZonalBlock(lam=lam, n=n, max_i=max_i, base=base)


def write_tables(path: Path, tables: List[CoefficientTable]) -> None:
    lines = ["# kisskit-symsys version=1"]
    for table in tables:
        for (l1, orbit), c in sorted(table.coefficients.items()):
            lines.append(f"k2={table.k2} l1={l1} s={orbit.s} c={format_rational(c)}")
    _atomic_write(Path(path), lines)


def read_tables(path: Path, lam: Signature) -> Dict[int, CoefficientTable]:
    tables: Dict[int, Dict] = {}
    with open(file=str(path), mode="rt", encoding="utf-8") as f:
        for line in f:
            if line.startswith("#") or not line.strip():
                continue
            fields = dict(part.split("=", 1) for part in line.split())
            k2, l1, s = int(fields["k2"]), int(fields["l1"]), int(fields["s"])
            tables.setdefault(k2, {})[(l1, sigma_orbit(lam.lam2, s))] = parse_rational(fields["c"])
    return {k2: CoefficientTable(lam=lam, k2=k2, coefficients=c) for k2, c in tables.items()}


def load_or_generate(
    cache_dir: Path, n: int, lam: Signature, max_i: int = 2, threads: int = 1
) -> Tuple[ZonalBlock, bool]:
    """The cached block for (n, lam), regenerating it when absent, corrupt or too small."""
    path = block_path(cache_dir, n, lam)
    if path.exists():
        try:
            block = read_block(path)
            if block.n == n and block.lam == lam and block.max_i >= max_i:
                return block.restrict(max_i), False
            logger.info(f"{path} holds max_i={block.max_i}, need {max_i}; regenerating")
        except CacheFormatError as e:
            logger.warning(f"corrupt zonal cache file, regenerating: {e}")
    block = generate_block(lam, n, max_i=max_i, threads=threads)
    write_block(path, block)
    ks = sorted({k for _, k in base_keys(lam, max_i)})
    write_tables(table_path(cache_dir, lam), [coefficient_table(lam, k) for k in ks])
    return block, True


def ensure_cache(
    cache_dir: Path, n: int, signatures: Iterable[Signature], max_i: int = 2, threads: int = 1
) -> Tuple[Dict[Signature, ZonalBlock], int]:
    """Blocks for every signature and the number of files that had to be (re)generated."""
    blocks: Dict[Signature, ZonalBlock] = {}
    regenerated = 0
    for lam in signatures:
        block, fresh = load_or_generate(Path(cache_dir), n, lam, max_i=max_i, threads=threads)
        blocks[lam] = block
        regenerated += int(fresh)
    logger.info(f"zonal cache {cache_dir} n={n}: {len(blocks)} blocks, {regenerated} regenerated")
    return blocks, regenerated
