# Standard Library
from fractions import Fraction
from logging import getLogger
from typing import Any
from typing import Dict
from typing import Optional

# Third Party Library
from pydantic import BaseModel
from pydantic import root_validator
from pydantic import validator

# Local Library
from .config import DEFAULT_MAX_ITERATIONS
from .config import DEFAULT_PRECISION_BITS
from .config import DEFAULT_TOLERANCE
from .config import FLOAT_TOLERANCE_FLOOR
from .config import MIN_PRECISION_BITS
from .exactmath import format_rational
from .exactmath import parse_rational

logger = getLogger(__name__)

BACKENDS = ("mpmath", "numpy")


def as_rational(value: Any) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int) and not isinstance(value, bool):
        return Fraction(value)
    if isinstance(value, str):
        return parse_rational(value)
    raise ValueError(f"expected a rational such as '1/2', got {value!r}")


class ProblemSpec(BaseModel):
    """問題のパラメータ (n, cosθ, level, d1, d2, δ)"""

    n: int
    cos_theta: Fraction
    level: int
    d1: int
    d2: int
    delta: int

    class Config:
        arbitrary_types_allowed = True
        allow_mutation = False
        json_encoders = {Fraction: format_rational}

    @validator("cos_theta", pre=True)
    def _parse_cos_theta(cls, value: Any) -> Fraction:
        cos_theta = as_rational(value)
        if not -1 < cos_theta < 1:
            raise ValueError(f"cos_theta must lie in (-1, 1), got {cos_theta}")
        return cos_theta

    @validator("n")
    def _check_dimension(cls, value: int) -> int:
        if value < 4:
            raise ValueError(f"dimension must be at least 4, got {value}")
        return value

    @validator("level")
    def _check_level(cls, value: int) -> int:
        if value not in (1, 2):
            raise ValueError(f"level must be 1 or 2, got {value}")
        return value

    @root_validator(skip_on_failure=True)
    def _check_degrees(cls, values: Dict[str, Any]) -> Dict[str, Any]:
        d1, d2, delta = values["d1"], values["d2"], values["delta"]
        if not 0 <= d1 <= d2 <= delta:
            raise ValueError(f"need 0 <= d1 <= d2 <= delta, got {d1=} {d2=} {delta=}")
        if delta % 2:
            raise ValueError(f"delta must be even, got {delta}")
        return values

    def to_fields(self) -> Dict[str, str]:
        return {
            "n": str(self.n),
            "cos_theta": format_rational(self.cos_theta),
            "level": str(self.level),
            "d1": str(self.d1),
            "d2": str(self.d2),
            "delta": str(self.delta),
        }

    def to_text(self) -> str:
        return " ".join(f"{k}={v}" for k, v in self.to_fields().items())

    @classmethod
    def from_text(cls, text: str) -> "ProblemSpec":
        fields = dict(part.split("=", 1) for part in text.split())
        return cls(**fields)


class SolveConfig(BaseModel):
    precision: int = DEFAULT_PRECISION_BITS
    tolerance: float = DEFAULT_TOLERANCE
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    backend: str = "mpmath"
    pinned_objective: Optional[Fraction] = None

    class Config:
        arbitrary_types_allowed = True

    @validator("precision")
    def _check_precision(cls, value: int) -> int:
        if value < MIN_PRECISION_BITS:
            raise ValueError(f"precision must be at least {MIN_PRECISION_BITS} bits, got {value}")
        return value

    @validator("tolerance")
    def _check_tolerance(cls, value: float) -> float:
        if not value > 0:
            raise ValueError(f"tolerance must be positive, got {value}")
        return value

    @validator("max_iterations")
    def _check_iterations(cls, value: int) -> int:
        if value < 1:
            raise ValueError(f"max_iterations must be positive, got {value}")
        return value

    @validator("backend")
    def _check_backend(cls, value: str) -> str:
        if value not in BACKENDS:
            raise ValueError(f"backend must be one of {BACKENDS}, got {value!r}")
        return value

    @validator("pinned_objective", pre=True)
    def _parse_pin(cls, value: Any) -> Optional[Fraction]:
        return None if value is None else as_rational(value)

    @property
    def effective_tolerance(self) -> float:
        """Tolerance the backend can actually reach."""
        if self.backend == "numpy":
            return max(self.tolerance, FLOAT_TOLERANCE_FLOOR)
        return self.tolerance
