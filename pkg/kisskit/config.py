# Standard Library
import os
from logging import getLogger
from pathlib import Path
from typing import Dict
from typing import Mapping
from typing import Optional

logger = getLogger(__name__)

PROJECT_ROOT: Path = Path(__file__).parents[1]
PRESET_DIR: Path = PROJECT_ROOT / "conf" / "presets"

DEFAULT_PRECISION_BITS: int = 256
MIN_PRECISION_BITS: int = 64
DEFAULT_DEGREE_CAP: int = 32  # total degree of a Haar monomial
DEFAULT_BRUTE_FORCE_CAP: int = 4  # |lambda| for the brute-force oracle
DEFAULT_THREADS: int = 1
DEFAULT_CACHE_DIR: str = ".kisskit_cache"
DEFAULT_OUTPUT_DIR: str = "kisskit_out"
DEFAULT_TOLERANCE: float = 1e-30
FLOAT_TOLERANCE_FLOOR: float = 1e-7
DEFAULT_MAX_ITERATIONS: int = 200
DEFAULT_PIN_MARGIN: str = "1/1000"
DEFAULT_DENOMINATOR_BOUND: int = 10**20
DEFAULT_MC_SAMPLES: int = 100_000
DEFAULT_SEED: int = 20240

THREADS_ENV_VAR: str = "KISSKIT_THREADS"


class ConfigFileError(ValueError):
    """key=value 設定ファイルの書式が不正なときに投げる"""


def read_config_file(path: Path) -> Dict[str, str]:
    """Read a plain ``key=value`` file; ``#`` starts a comment."""
    values: Dict[str, str] = {}
    with open(file=str(path), mode="rt", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep or not key.strip():
                raise ConfigFileError(f"{path}:{lineno}: expected key=value, got {raw.rstrip()!r}")
            values[key.strip().replace("-", "_")] = value.strip()
    logger.debug(f"read {len(values)} settings from {path=}")
    return values


def threads_from_env(environ: Optional[Mapping[str, str]] = None) -> Optional[int]:
    env = os.environ if environ is None else environ
    raw = env.get(THREADS_ENV_VAR)
    if raw is None or not raw.strip():
        return None
    try:
        threads = int(raw)
    except ValueError:
        raise ConfigFileError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}")
    if threads < 1:
        raise ConfigFileError(f"{THREADS_ENV_VAR} must be positive, got {threads}")
    return threads
