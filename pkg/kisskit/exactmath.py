# Standard Library
import math
import threading
from contextlib import contextmanager
from fractions import Fraction
from logging import getLogger
from typing import Any
from typing import Callable
from typing import Dict
from typing import Iterator
from typing import List
from typing import Mapping
from typing import Optional
from typing import Sequence
from typing import Tuple
from typing import Union

# Third Party Library
import mpmath
from mpmath import iv
from mpmath import libmp

# Local Library
from .config import DEFAULT_PRECISION_BITS

logger = getLogger(__name__)

Rational = Fraction
Scalar = Union[int, Fraction]
Exponent = Tuple[int, ...]


class ZeroPolynomial(ValueError):
    """operation undefined for the zero polynomial"""


class VariableError(ValueError):
    """unknown or unassigned polynomial variable"""


class ShapeError(ValueError):
    """matrix dimensions are not compatible"""


def format_rational(value: Scalar) -> str:
    """``-3/4`` style text, integers without a denominator."""
    return str(Fraction(value))


def parse_rational(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as e:
        raise ValueError(f"not a rational number: {text!r}") from e


def to_mpf(value: Scalar) -> mpmath.mpf:
    value = Fraction(value)
    return mpmath.mpf(value.numerator) / value.denominator


def mpf_to_fraction(value: Any) -> Fraction:
    """Exact rational value of a binary float (mpmath or python float)."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value)
    p, q = libmp.to_rational(mpmath.mpf(value)._mpf_)
    return Fraction(p, q)


# Polynomials


def _is_scalar(value: Any) -> bool:
    return isinstance(value, (int, Fraction))


class MultiPoly:
    """Exact multivariate polynomial over named variables.

    Exponent tuples are dense in the declared variable order and zero
    coefficients are never stored. Binary operations union the namespaces,
    keeping the left operand's order first.
    """

    __slots__ = ("variables", "terms")

    def __init__(self, variables: Sequence[str] = (), terms: Optional[Mapping[Sequence[int], Scalar]] = None) -> None:
        self.variables: Tuple[str, ...] = tuple(variables)
        if len(set(self.variables)) != len(self.variables):
            raise VariableError(f"duplicate variable names in {self.variables}")
        nvars = len(self.variables)
        cleaned: Dict[Exponent, Fraction] = {}
        for exps, coeff in (terms or {}).items():
            key = tuple(int(e) for e in exps)
            if len(key) != nvars:
                raise VariableError(f"exponent {key} does not match variables {self.variables}")
            if any(e < 0 for e in key):
                raise VariableError(f"negative exponent {key}")
            value = cleaned.get(key, Fraction(0)) + Fraction(coeff)
            if value:
                cleaned[key] = value
            else:
                cleaned.pop(key, None)
        self.terms: Dict[Exponent, Fraction] = cleaned

    @classmethod
    def _make(cls, variables: Tuple[str, ...], terms: Dict[Exponent, Fraction]) -> "MultiPoly":
        obj = cls.__new__(cls)
        obj.variables = variables
        obj.terms = terms
        return obj

    @classmethod
    def constant(cls, value: Scalar, variables: Sequence[str] = ()) -> "MultiPoly":
        variables = tuple(variables)
        if not value:
            return cls._make(variables, {})
        return cls._make(variables, {(0,) * len(variables): Fraction(value)})

    @classmethod
    def zero(cls, variables: Sequence[str] = ()) -> "MultiPoly":
        return cls._make(tuple(variables), {})

    @classmethod
    def variable(cls, name: str, variables: Optional[Sequence[str]] = None) -> "MultiPoly":
        names = (name,) if variables is None else tuple(variables)
        if name not in names:
            raise VariableError(f"{name} is not in {names}")
        exps = tuple(1 if v == name else 0 for v in names)
        return cls._make(names, {exps: Fraction(1)})

    @classmethod
    def monomial(cls, powers: Mapping[str, int], coeff: Scalar = 1) -> "MultiPoly":
        names = tuple(powers)
        return cls(names, {tuple(powers[v] for v in names): coeff})

    @staticmethod
    def lift(value: Any) -> "MultiPoly":
        if isinstance(value, MultiPoly):
            return value
        if _is_scalar(value):
            return MultiPoly.constant(value)
        raise TypeError(f"cannot treat {type(value).__name__} as a polynomial")

    # namespace handling

    def _reindex(self, names: Tuple[str, ...]) -> Dict[Exponent, Fraction]:
        if names == self.variables:
            return self.terms
        position = {v: i for i, v in enumerate(names)}
        slots = [position[v] for v in self.variables]
        out: Dict[Exponent, Fraction] = {}
        width = len(names)
        for exps, coeff in self.terms.items():
            new = [0] * width
            for slot, e in zip(slots, exps):
                new[slot] = e
            out[tuple(new)] = coeff
        return out

    def _union(self, other: "MultiPoly") -> Tuple[Tuple[str, ...], Dict[Exponent, Fraction], Dict[Exponent, Fraction]]:
        if self.variables == other.variables:
            return self.variables, self.terms, other.terms
        names = list(self.variables)
        seen = set(names)
        for v in other.variables:
            if v not in seen:
                names.append(v)
                seen.add(v)
        key = tuple(names)
        return key, self._reindex(key), other._reindex(key)

    def effective_variables(self) -> Tuple[str, ...]:
        used = [False] * len(self.variables)
        for exps in self.terms:
            for i, e in enumerate(exps):
                if e:
                    used[i] = True
        return tuple(v for v, u in zip(self.variables, used) if u)

    def with_variables(self, names: Sequence[str]) -> "MultiPoly":
        """Re-express over ``names``; every variable that occurs must be kept."""
        names = tuple(names)
        if len(set(names)) != len(names):
            raise VariableError(f"duplicate variable names in {names}")
        missing = [v for v in self.effective_variables() if v not in names]
        if missing:
            raise VariableError(f"cannot drop occurring variables {missing}")
        position = {v: i for i, v in enumerate(names)}
        out: Dict[Exponent, Fraction] = {}
        for exps, coeff in self.terms.items():
            new = [0] * len(names)
            for v, e in zip(self.variables, exps):
                if e:
                    new[position[v]] = e
            out[tuple(new)] = coeff
        return MultiPoly._make(names, out)

    def rename(self, mapping: Mapping[str, str]) -> "MultiPoly":
        """Rename variables; names mapped onto the same target are merged."""
        targets = [mapping.get(v, v) for v in self.variables]
        names: List[str] = []
        for t in targets:
            if t not in names:
                names.append(t)
        position = {v: i for i, v in enumerate(names)}
        slots = [position[t] for t in targets]
        out: Dict[Exponent, Fraction] = {}
        for exps, coeff in self.terms.items():
            new = [0] * len(names)
            for slot, e in zip(slots, exps):
                new[slot] += e
            key = tuple(new)
            value = out.get(key, Fraction(0)) + coeff
            if value:
                out[key] = value
            else:
                out.pop(key, None)
        return MultiPoly._make(tuple(names), out)

    # inspection

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(not any(exps) for exps in self.terms)

    def constant_term(self) -> Fraction:
        return self.terms.get((0,) * len(self.variables), Fraction(0))

    def total_degree(self) -> int:
        return max((sum(exps) for exps in self.terms), default=0)

    def degree_in(self, name: str) -> int:
        if name not in self.variables:
            return 0
        i = self.variables.index(name)
        return max((exps[i] for exps in self.terms), default=0)

    def monomials(self) -> Iterator[Tuple[Dict[str, int], Fraction]]:
        """(powers, coefficient) pairs in a deterministic order."""
        for key, coeff in sorted(self._canonical().items()):
            yield dict(key), coeff

    def _canonical(self) -> Dict[Tuple[Tuple[str, int], ...], Fraction]:
        out = {}
        for exps, coeff in self.terms.items():
            key = tuple(sorted((v, e) for v, e in zip(self.variables, exps) if e))
            out[key] = coeff
        return out

    def coefficient(self, powers: Mapping[str, int]) -> Fraction:
        if any(e and v not in self.variables for v, e in powers.items()):
            return Fraction(0)
        exps = tuple(powers.get(v, 0) for v in self.variables)
        return self.terms.get(exps, Fraction(0))

    def __len__(self) -> int:
        return len(self.terms)

    def __eq__(self, other: object) -> bool:
        if _is_scalar(other):
            other = MultiPoly.constant(other)  # type: ignore
        if not isinstance(other, MultiPoly):
            return NotImplemented
        return self._canonical() == other._canonical()

    def __hash__(self) -> int:
        return hash(frozenset(self._canonical().items()))

    def __repr__(self) -> str:
        return f"MultiPoly({self.to_text()!r})"

    # arithmetic

    def __neg__(self) -> "MultiPoly":
        return MultiPoly._make(self.variables, {e: -c for e, c in self.terms.items()})

    def __add__(self, other: Any) -> "MultiPoly":
        if _is_scalar(other):
            if not other:
                return self
            other = MultiPoly.constant(other, self.variables)
        if not isinstance(other, MultiPoly):
            return NotImplemented
        names, left, right = self._union(other)
        out = dict(left)
        for exps, coeff in right.items():
            value = out.get(exps, 0) + coeff
            if value:
                out[exps] = value
            else:
                out.pop(exps, None)
        return MultiPoly._make(names, out)

    __radd__ = __add__

    def __sub__(self, other: Any) -> "MultiPoly":
        if _is_scalar(other):
            return self + (-other)
        if not isinstance(other, MultiPoly):
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other: Any) -> "MultiPoly":
        return (-self) + other

    def _scale(self, factor: Scalar) -> "MultiPoly":
        if not factor:
            return MultiPoly.zero(self.variables)
        factor = Fraction(factor)
        return MultiPoly._make(self.variables, {e: c * factor for e, c in self.terms.items()})

    def __mul__(self, other: Any) -> "MultiPoly":
        if _is_scalar(other):
            return self._scale(other)
        if not isinstance(other, MultiPoly):
            return NotImplemented
        names, left, right = self._union(other)
        out: Dict[Exponent, Fraction] = {}
        for e1, c1 in left.items():
            for e2, c2 in right.items():
                key = tuple(a + b for a, b in zip(e1, e2))
                value = out.get(key, 0) + c1 * c2
                if value:
                    out[key] = value
                else:
                    out.pop(key, None)
        return MultiPoly._make(names, out)

    __rmul__ = __mul__

    def __truediv__(self, other: Any) -> "MultiPoly":
        if not _is_scalar(other):
            return NotImplemented
        return self._scale(Fraction(1) / Fraction(other))

    def __pow__(self, power: int) -> "MultiPoly":
        if not isinstance(power, int) or power < 0:
            raise ValueError(f"power must be a nonnegative integer, got {power!r}")
        result = MultiPoly.constant(1, self.variables)
        base = self
        while power:
            if power & 1:
                result = result * base
            power >>= 1
            if power:
                base = base * base
        return result

    # substitution and evaluation

    def substitute(self, name: str, value: Any) -> "MultiPoly":
        """Replace every occurrence of ``name`` by ``value`` and expand."""
        if name not in self.variables:
            raise VariableError(f"{name} is not in {self.variables}")
        q = MultiPoly.lift(value)
        i = self.variables.index(name)
        rest = self.variables[:i] + self.variables[i + 1 :]
        groups: Dict[int, Dict[Exponent, Fraction]] = {}
        for exps, coeff in self.terms.items():
            groups.setdefault(exps[i], {})[exps[:i] + exps[i + 1 :]] = coeff
        total = MultiPoly.zero(rest)
        powers = _PowerCache(q)
        for e, group in sorted(groups.items()):
            part = MultiPoly._make(rest, group)
            total = total + (part if e == 0 else part * powers[e])
        return total

    def substitute_monomial(self, pattern: Mapping[str, int], value: Any) -> "MultiPoly":
        """Power substitution: each maximal power ``pattern^t`` in a term becomes ``value^t``.

        ``u^3`` with pattern ``u^2`` and value ``1 - w`` gives ``u * (1 - w)``.
        """
        if not pattern or any(p <= 0 for p in pattern.values()):
            raise ValueError(f"invalid monomial pattern {dict(pattern)}")
        unknown = [v for v in pattern if v not in self.variables]
        if unknown:
            raise VariableError(f"{unknown} not in {self.variables}")
        q = MultiPoly.lift(value)
        slots = [(self.variables.index(v), p) for v, p in pattern.items()]
        groups: Dict[int, Dict[Exponent, Fraction]] = {}
        for exps, coeff in self.terms.items():
            t = min(exps[i] // p for i, p in slots)
            if t:
                new = list(exps)
                for i, p in slots:
                    new[i] -= t * p
                key = tuple(new)
            else:
                key = exps
            group = groups.setdefault(t, {})
            value_ = group.get(key, 0) + coeff
            if value_:
                group[key] = value_
            else:
                group.pop(key, None)
        total = MultiPoly.zero(self.variables)
        powers = _PowerCache(q)
        for t, group in sorted(groups.items()):
            part = MultiPoly._make(self.variables, group)
            total = total + (part if t == 0 else part * powers[t])
        return total

    def drop_terms_with(self, names: Sequence[str]) -> "MultiPoly":
        idx = [i for i, v in enumerate(self.variables) if v in set(names)]
        if not idx:
            return self
        kept = {e: c for e, c in self.terms.items() if not any(e[i] for i in idx)}
        return MultiPoly._make(self.variables, kept)

    def split(self, names: Sequence[str]) -> Dict[Exponent, "MultiPoly"]:
        """Group by the exponents of ``names``; values are polynomials in the other variables."""
        names = tuple(names)
        picked = [self.variables.index(v) if v in self.variables else None for v in names]
        rest_idx = [i for i, v in enumerate(self.variables) if v not in names]
        rest = tuple(self.variables[i] for i in rest_idx)
        groups: Dict[Exponent, Dict[Exponent, Fraction]] = {}
        for exps, coeff in self.terms.items():
            key = tuple(0 if i is None else exps[i] for i in picked)
            groups.setdefault(key, {})[tuple(exps[i] for i in rest_idx)] = coeff
        return {key: MultiPoly._make(rest, group) for key, group in groups.items()}

    def evaluate(self, point: Mapping[str, Any], coerce: Optional[Callable[[Fraction], Any]] = None) -> Any:
        """Evaluate at ``point``.

        Values may live in any commutative ring that accepts rational scalars
        (Fraction, MultiPoly, ComplexPoly, Ball). For float, complex or numpy
        values pass ``coerce`` so coefficients are converted first.
        """
        occurring = self.effective_variables()
        missing = [v for v in occurring if v not in point]
        if missing:
            raise VariableError(f"no value for {missing}")
        caches = {v: _PowerCache(point[v]) for v in occurring}
        total: Any = None
        for exps, coeff in self.terms.items():
            term: Any = coerce(coeff) if coerce is not None else coeff
            for v, e in zip(self.variables, exps):
                if e:
                    term = term * caches[v][e]
            total = term if total is None else total + term
        if total is None:
            return coerce(Fraction(0)) if coerce is not None else Fraction(0)
        return total

    def derivative(self, name: str) -> "MultiPoly":
        if name not in self.variables:
            return MultiPoly.zero(self.variables)
        i = self.variables.index(name)
        out: Dict[Exponent, Fraction] = {}
        for exps, coeff in self.terms.items():
            if exps[i]:
                new = list(exps)
                new[i] -= 1
                out[tuple(new)] = coeff * exps[i]
        return MultiPoly._make(self.variables, out)

    def univariate_coefficients(self, name: Optional[str] = None) -> List[Fraction]:
        """Coefficients from the constant term upwards."""
        occurring = self.effective_variables()
        if name is None:
            if len(occurring) > 1:
                raise VariableError(f"not univariate: {occurring}")
            name = occurring[0] if occurring else None
        elif any(v != name for v in occurring):
            raise VariableError(f"not univariate in {name}: {occurring}")
        if name is None:
            return [self.constant_term()]
        degree = self.degree_in(name)
        coeffs = [Fraction(0)] * (degree + 1)
        i = self.variables.index(name) if name in self.variables else None
        for exps, coeff in self.terms.items():
            coeffs[0 if i is None else exps[i]] = coeff
        return coeffs

    @classmethod
    def from_univariate(cls, name: str, coeffs: Sequence[Scalar]) -> "MultiPoly":
        return cls((name,), {(e,): c for e, c in enumerate(coeffs) if c})

    # text form

    def to_text(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for key, coeff in sorted(self._canonical().items(), key=lambda kv: (sum(e for _, e in kv[0]), kv[0])):
            factors = [format_rational(coeff)] + [f"{v}^{e}" for v, e in key]
            parts.append("*".join(factors))
        return " + ".join(parts)

    @classmethod
    def from_text(cls, text: str, variables: Optional[Sequence[str]] = None) -> "MultiPoly":
        text = text.strip()
        names: List[str] = list(variables) if variables is not None else []
        parsed: List[Tuple[Fraction, Dict[str, int]]] = []
        if text != "0":
            for raw in text.split(" + "):
                pieces = raw.strip().split("*")
                coeff = parse_rational(pieces[0])
                powers: Dict[str, int] = {}
                for piece in pieces[1:]:
                    name, _, exp = piece.partition("^")
                    name = name.strip()
                    if not name:
                        raise ValueError(f"malformed term {raw!r}")
                    powers[name] = powers.get(name, 0) + (int(exp) if exp else 1)
                    if name not in names:
                        if variables is not None:
                            raise VariableError(f"{name} is not in {tuple(variables)}")
                        names.append(name)
                parsed.append((coeff, powers))
        terms: Dict[Exponent, Fraction] = {}
        for coeff, powers in parsed:
            key = tuple(powers.get(v, 0) for v in names)
            terms[key] = terms.get(key, Fraction(0)) + coeff
        return cls(names, terms)


class _PowerCache:
    """Memoized integer powers of one ring element."""

    __slots__ = ("_base", "_powers")

    def __init__(self, base: Any) -> None:
        self._base = base
        self._powers: Dict[int, Any] = {1: base}

    def __getitem__(self, e: int) -> Any:
        if e in self._powers:
            return self._powers[e]
        if e == 0:
            raise KeyError(0)
        half = self[e // 2]
        value = half * half
        if e % 2:
            value = value * self._base
        self._powers[e] = value
        return value


class ComplexPoly:
    """``re + i*im`` with MultiPoly parts."""

    __slots__ = ("re", "im")

    def __init__(self, re: Any, im: Any = 0) -> None:
        self.re: MultiPoly = MultiPoly.lift(re)
        self.im: MultiPoly = MultiPoly.lift(im)

    @staticmethod
    def _lift(value: Any) -> "ComplexPoly":
        if isinstance(value, ComplexPoly):
            return value
        return ComplexPoly(value)

    def __add__(self, other: Any) -> "ComplexPoly":
        if not isinstance(other, (ComplexPoly, MultiPoly, int, Fraction)):
            return NotImplemented
        other = ComplexPoly._lift(other)
        return ComplexPoly(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __neg__(self) -> "ComplexPoly":
        return ComplexPoly(-self.re, -self.im)

    def __sub__(self, other: Any) -> "ComplexPoly":
        return self + (-ComplexPoly._lift(other))

    def __rsub__(self, other: Any) -> "ComplexPoly":
        return ComplexPoly._lift(other) + (-self)

    def __mul__(self, other: Any) -> "ComplexPoly":
        if isinstance(other, (int, Fraction, MultiPoly)):
            return ComplexPoly(self.re * other, self.im * other)
        if not isinstance(other, ComplexPoly):
            return NotImplemented
        return ComplexPoly(self.re * other.re - self.im * other.im, self.re * other.im + self.im * other.re)

    __rmul__ = __mul__

    def __pow__(self, power: int) -> "ComplexPoly":
        if power < 0:
            raise ValueError(f"power must be nonnegative, got {power}")
        result = ComplexPoly(1)
        base = self
        while power:
            if power & 1:
                result = result * base
            power >>= 1
            if power:
                base = base * base
        return result

    def __repr__(self) -> str:
        return f"ComplexPoly(re={self.re.to_text()!r}, im={self.im.to_text()!r})"


# Matrices


class RatMatrix:
    """Rectangular rational matrix, stored as sparse rows."""

    __slots__ = ("nrows", "ncols", "_rows")

    def __init__(self, nrows: int, ncols: int, rows: Optional[Sequence[Mapping[int, Scalar]]] = None) -> None:
        if nrows <= 0 or ncols <= 0:
            raise ShapeError(f"matrix dimensions must be positive, got {nrows}x{ncols}")
        self.nrows = nrows
        self.ncols = ncols
        self._rows: List[Dict[int, Fraction]] = []
        source = rows if rows is not None else [{}] * nrows
        if len(source) != nrows:
            raise ShapeError(f"expected {nrows} rows, got {len(source)}")
        for row in source:
            clean = {}
            for c, v in row.items():
                if not 0 <= c < ncols:
                    raise ShapeError(f"column {c} out of range for {ncols} columns")
                if v:
                    clean[c] = Fraction(v)
            self._rows.append(clean)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[Scalar]]) -> "RatMatrix":
        if not rows:
            raise ShapeError("no rows")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise ShapeError("ragged rows")
        return cls(len(rows), width, [{c: v for c, v in enumerate(r) if v} for r in rows])

    @classmethod
    def identity(cls, n: int) -> "RatMatrix":
        return cls(n, n, [{i: 1} for i in range(n)])

    @classmethod
    def zeros(cls, nrows: int, ncols: int) -> "RatMatrix":
        return cls(nrows, ncols)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.nrows, self.ncols

    def __getitem__(self, index: Tuple[int, int]) -> Fraction:
        i, j = index
        if not (0 <= i < self.nrows and 0 <= j < self.ncols):
            raise IndexError(f"{index} out of range for {self.shape}")
        return self._rows[i].get(j, Fraction(0))

    def row(self, i: int) -> Dict[int, Fraction]:
        return dict(self._rows[i])

    def to_lists(self) -> List[List[Fraction]]:
        return [[row.get(j, Fraction(0)) for j in range(self.ncols)] for row in self._rows]

    def transpose(self) -> "RatMatrix":
        cols: List[Dict[int, Fraction]] = [{} for _ in range(self.ncols)]
        for i, row in enumerate(self._rows):
            for j, v in row.items():
                cols[j][i] = v
        return RatMatrix(self.ncols, self.nrows, cols)

    def __matmul__(self, other: "RatMatrix") -> "RatMatrix":
        if self.ncols != other.nrows:
            raise ShapeError(f"cannot multiply {self.shape} by {other.shape}")
        out = []
        for row in self._rows:
            acc: Dict[int, Fraction] = {}
            for k, v in row.items():
                for j, w in other._rows[k].items():
                    acc[j] = acc.get(j, 0) + v * w
            out.append(acc)
        return RatMatrix(self.nrows, other.ncols, out)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RatMatrix):
            return NotImplemented
        return self.shape == other.shape and self._rows == other._rows

    def is_symmetric(self) -> bool:
        if self.nrows != self.ncols:
            return False
        return all(self._rows[j].get(i, 0) == v for i, row in enumerate(self._rows) for j, v in row.items())

    def __repr__(self) -> str:
        body = "; ".join(" ".join(format_rational(v) for v in row) for row in self.to_lists())
        return f"RatMatrix[{body}]"


def _primitive(row: Dict[int, int]) -> Dict[int, int]:
    g = 0
    for v in row.values():
        g = math.gcd(g, v)
        if g == 1:
            return row
    if g > 1:
        return {c: v // g for c, v in row.items()}
    return row


def _integer_row(row: Mapping[int, Fraction]) -> Dict[int, int]:
    if not row:
        return {}
    lcm = 1
    for v in row.values():
        lcm = lcm * v.denominator // math.gcd(lcm, v.denominator)
    return _primitive({c: int(v * lcm) for c, v in row.items()})


def _eliminate(row: Dict[int, int], pivot_row: Dict[int, int], col: int) -> Dict[int, int]:
    p = pivot_row[col]
    e = row[col]
    g = math.gcd(p, e)
    p, e = p // g, e // g
    out = {c: v * p for c, v in row.items()}
    for c, v in pivot_row.items():
        value = out.get(c, 0) - e * v
        if value:
            out[c] = value
        else:
            out.pop(c, None)
    return _primitive(out)


def rref(matrix: RatMatrix) -> Tuple[RatMatrix, List[int]]:
    """Reduced row echelon form over the rationals.

    Elimination runs on integer rows (fraction-free, content removed after
    every update); rows are normalized to rationals only at the end.
    """
    rows = [_integer_row(matrix._rows[i]) for i in range(matrix.nrows)]
    pivots: List[int] = []
    rank = 0
    for col in range(matrix.ncols):
        if rank == matrix.nrows:
            break
        candidates = [i for i in range(rank, matrix.nrows) if col in rows[i]]
        if not candidates:
            continue
        best = min(candidates, key=lambda i: (len(rows[i]), abs(rows[i][col])))
        rows[rank], rows[best] = rows[best], rows[rank]
        pivot_row = rows[rank]
        for i in range(matrix.nrows):
            if i != rank and col in rows[i]:
                rows[i] = _eliminate(rows[i], pivot_row, col)
        pivots.append(col)
        rank += 1
    reduced: List[Dict[int, Fraction]] = []
    for i, row in enumerate(rows):
        if i < rank:
            p = row[pivots[i]]
            reduced.append({c: Fraction(v, p) for c, v in row.items()})
        else:
            reduced.append({})
    logger.debug(f"rref {matrix.shape=} {rank=}")
    return RatMatrix(matrix.nrows, matrix.ncols, reduced), pivots


def solve_linear(matrix: RatMatrix, rhs: Sequence[Scalar]) -> List[Fraction]:
    """One exact solution of ``matrix @ x = rhs`` (free variables set to zero)."""
    if len(rhs) != matrix.nrows:
        raise ShapeError(f"rhs has {len(rhs)} entries for {matrix.nrows} rows")
    augmented = RatMatrix(
        matrix.nrows,
        matrix.ncols + 1,
        [dict(matrix.row(i), **{matrix.ncols: Fraction(rhs[i])}) for i in range(matrix.nrows)],
    )
    reduced, pivots = rref(augmented)
    if pivots and pivots[-1] == matrix.ncols:
        raise ValueError("inconsistent linear system")
    x = [Fraction(0)] * matrix.ncols
    for i, col in enumerate(pivots):
        x[col] = reduced[i, matrix.ncols]
    return x


# Ball arithmetic

_precision_lock = threading.RLock()


@contextmanager
def interval_precision(bits: int) -> Iterator[None]:
    """Set ``mpmath.iv`` working precision for the duration of the block."""
    with _precision_lock:
        saved = iv.prec
        iv.prec = bits
        try:
            yield
        finally:
            iv.prec = saved


def _mpf_tuple_to_fraction(value: Any) -> Fraction:
    p, q = libmp.to_rational(value)
    return Fraction(p, q)


class Ball:
    """Rigorous enclosure of a real number.

    Backed by an outward-rounded ``mpmath.iv`` interval; the midpoint/radius
    view is derived from the exact interval endpoints.
    """

    __slots__ = ("_iv", "precision")

    def __init__(self, value: Any = 0, radius: Scalar = 0, precision: int = DEFAULT_PRECISION_BITS) -> None:
        self.precision = precision
        with interval_precision(precision):
            center = Ball._to_interval(value)
            if radius:
                if radius < 0:
                    raise ValueError(f"negative radius {radius}")
                center = center + iv.mpf([-1, 1]) * Ball._to_interval(Fraction(radius))
            self._iv = center

    @staticmethod
    def _to_interval(value: Any) -> Any:
        if isinstance(value, Ball):
            return value._iv
        if isinstance(value, bool):
            value = int(value)
        if isinstance(value, int):
            return iv.mpf(value)
        if isinstance(value, Fraction):
            return iv.mpf(value.numerator) / iv.mpf(value.denominator)
        if isinstance(value, str):
            return Ball._to_interval(parse_rational(value))
        if hasattr(value, "_mpi_"):
            return value
        if hasattr(value, "_mpf_"):
            return iv.mpf(value)
        raise TypeError(f"cannot convert {type(value).__name__} to a ball")

    @classmethod
    def _wrap(cls, interval: Any, precision: int) -> "Ball":
        obj = cls.__new__(cls)
        obj._iv = interval
        obj.precision = precision
        return obj

    @property
    def lower(self) -> Fraction:
        return _mpf_tuple_to_fraction(self._iv._mpi_[0])

    @property
    def upper(self) -> Fraction:
        return _mpf_tuple_to_fraction(self._iv._mpi_[1])

    @property
    def midpoint(self) -> mpmath.mpf:
        with mpmath.mp.workprec(self.precision):
            return to_mpf((self.lower + self.upper) / 2)

    @property
    def radius(self) -> mpmath.mpf:
        with mpmath.mp.workprec(self.precision):
            return to_mpf((self.upper - self.lower) / 2)

    def contains(self, value: Scalar) -> bool:
        value = Fraction(value)
        return self.lower <= value <= self.upper

    def contains_zero(self) -> bool:
        return self.contains(0)

    def is_positive(self) -> bool:
        return self.lower > 0

    def _binary(self, other: Any, op: Callable[[Any, Any], Any]) -> "Ball":
        if isinstance(other, Ball):
            bits = max(self.precision, other.precision)
        elif isinstance(other, (int, Fraction)):
            bits = self.precision
        else:
            return NotImplemented
        with interval_precision(bits):
            return Ball._wrap(op(self._iv, Ball._to_interval(other)), bits)

    def __add__(self, other: Any) -> "Ball":
        return self._binary(other, lambda a, b: a + b)

    def __radd__(self, other: Any) -> "Ball":
        return self._binary(other, lambda a, b: b + a)

    def __sub__(self, other: Any) -> "Ball":
        return self._binary(other, lambda a, b: a - b)

    def __rsub__(self, other: Any) -> "Ball":
        return self._binary(other, lambda a, b: b - a)

    def __mul__(self, other: Any) -> "Ball":
        return self._binary(other, lambda a, b: a * b)

    def __rmul__(self, other: Any) -> "Ball":
        return self._binary(other, lambda a, b: b * a)

    def __truediv__(self, other: Any) -> "Ball":
        divisor = other if isinstance(other, Ball) else Ball(other, precision=self.precision)
        if divisor.contains_zero():
            raise ZeroDivisionError(f"divisor ball {divisor!r} contains zero")
        return self._binary(divisor, lambda a, b: a / b)

    def __rtruediv__(self, other: Any) -> "Ball":
        return Ball(other, precision=self.precision) / self

    def __neg__(self) -> "Ball":
        with interval_precision(self.precision):
            return Ball._wrap(-self._iv, self.precision)

    def __pow__(self, power: int) -> "Ball":
        if not isinstance(power, int) or power < 0:
            raise ValueError(f"power must be a nonnegative integer, got {power!r}")
        result = Ball(1, precision=self.precision)
        for _ in range(power):
            result = result * self
        return result

    def sqrt(self) -> "Ball":
        if self.lower < 0:
            raise ValueError(f"square root of a ball reaching below zero: {self!r}")
        with interval_precision(self.precision):
            return Ball._wrap(iv.sqrt(self._iv), self.precision)

    def __repr__(self) -> str:
        return f"Ball([{float(self.lower):.6g}, {float(self.upper):.6g}], prec={self.precision})"
