# Standard Library
from fractions import Fraction
from logging import getLogger
from logging.config import dictConfig
from pathlib import Path
from typing import Dict

# Third Party Library
import pytest
import yaml

# First Party Library
from kisskit.cache import ensure_cache
from kisskit.glrep import Signature
from kisskit.glrep import signatures_up_to
from kisskit.sdp import SOS
from kisskit.sdp import Block
from kisskit.sdp import LinearConstraint
from kisskit.sdp import SDPProblem
from kisskit.zonal import ZonalBlock

filepath = Path(__file__).parents[1] / "conf" / "logging.yml"
with open(file=str(filepath), mode="rt") as f:
    config_dict = yaml.safe_load(f)
dictConfig(config=config_dict)
del filepath, config_dict


logger = getLogger(__name__)


def make_toy_problem() -> SDPProblem:
    """minimize x s.t. [[x, 1], [1, x]] PSD; optimum 1."""
    return SDPProblem(
        blocks=[Block(name="toy", size=2, kind=SOS, labels=["1", "u"])],
        objective={(0, 0, 0): Fraction(1)},
        constraints=[
            LinearConstraint(entries={(0, 0, 1): Fraction(1, 2)}, rhs=Fraction(1), label="offdiag"),
            LinearConstraint(entries={(0, 0, 0): Fraction(1), (0, 1, 1): Fraction(-1)}, rhs=Fraction(0), label="diag"),
        ],
    )


@pytest.fixture
def toy_problem() -> SDPProblem:
    return make_toy_problem()


def make_slab_problem() -> SDPProblem:
    """minimize X01 s.t. X00 + 2 X11 = 3; at X01 = -1/2 the analytic center is X00 = 3/2, X11 = 3/4."""
    return SDPProblem(
        blocks=[Block(name="slab", size=2, kind=SOS, labels=["1", "u"])],
        objective={(0, 0, 1): Fraction(1, 2)},
        constraints=[
            LinearConstraint(entries={(0, 0, 0): Fraction(1), (0, 1, 1): Fraction(2)}, rhs=Fraction(3), label="trace"),
        ],
    )


@pytest.fixture
def slab_problem() -> SDPProblem:
    return make_slab_problem()


@pytest.fixture(scope="session")
def zonal_dir(tmp_path_factory: pytest.TempPathFactory) -> Path:
    return tmp_path_factory.mktemp("zonal")


@pytest.fixture(scope="session")
def zonal_n4_d2(zonal_dir: Path) -> Dict[Signature, ZonalBlock]:
    """Zonal blocks for every signature of degree <= 2 at n = 4."""
    blocks, _ = ensure_cache(zonal_dir, 4, signatures_up_to(2), max_i=2)
    return blocks
