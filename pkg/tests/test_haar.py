# Standard Library
from fractions import Fraction
from itertools import permutations
from typing import List

# Third Party Library
import numpy as np
import pytest

# First Party Library
from kisskit.exactmath import MultiPoly
from kisskit.haar import DegreeCapExceeded
from kisskit.haar import DimensionTooSmall
from kisskit.haar import canonicalize
from kisskit.haar import gamma_name
from kisskit.haar import haar_samples
from kisskit.haar import has_odd_line
from kisskit.haar import integrate_monomial
from kisskit.haar import integrate_polynomial
from kisskit.haar import integrate_product
from kisskit.haar import mc_estimate


@pytest.mark.parametrize(
    "case",
    [
        pytest.param(dict(n=4, a=[], expected=Fraction(1)), id="empty"),
        pytest.param(dict(n=4, a=[[1, 1], [0, 0]], expected=Fraction(0)), id="odd-column"),
        pytest.param(dict(n=5, a=[[3]], expected=Fraction(0)), id="odd-power"),
        pytest.param(dict(n=2, a=[[4]], expected=Fraction(3, 8)), id="cos4"),
        pytest.param(dict(n=4, a=[[4]], expected=Fraction(1, 8)), id="fourth-moment"),
        pytest.param(dict(n=4, a=[[2, 0], [0, 2]], expected=Fraction(5, 72)), id="diagonal-pair"),
        pytest.param(dict(n=4, a=[[1, 1], [1, 1]], expected=Fraction(-1, 72)), id="cross"),
        pytest.param(dict(n=6, a=[[0, 0], [2, 2]], expected=Fraction(1, 48)), id="row-pair"),
    ],
)
def test_integrate_monomial(case):
    assert integrate_monomial(case["n"], case["a"]) == case["expected"]


@pytest.mark.parametrize("n", [2, 3, 4, 7, 10])
def test_second_moment(n):
    assert integrate_monomial(n, [[2]]) == Fraction(1, n)
    assert integrate_monomial(n, [[0, 0], [0, 2]]) == Fraction(1, n)


def test_permutation_and_transpose_invariance():
    a = [[2, 1, 0], [0, 1, 2], [2, 0, 0]]
    permuted = [a[2], a[0], a[1]]
    permuted = [[row[1], row[2], row[0]] for row in permuted]
    transposed = [list(col) for col in zip(*a)]
    value = integrate_monomial(5, a)
    assert integrate_monomial(5, permuted) == value
    assert integrate_monomial(5, transposed) == value


def test_errors():
    with pytest.raises(DegreeCapExceeded):
        integrate_monomial(4, [[8, 8]], degree_cap=8)
    with pytest.raises(DimensionTooSmall):
        integrate_monomial(2, [[2, 2, 2]])
    with pytest.raises(DimensionTooSmall):
        integrate_monomial(1, [[2]])


def test_rows_are_unit_vectors():
    n = 4
    row = sum((MultiPoly.variable(gamma_name(1, c)) ** 2 for c in range(1, n + 1)), MultiPoly.zero())
    assert integrate_polynomial(row * row, n) == MultiPoly.constant(1)


def test_integrate_product_keeps_other_variables():
    s = MultiPoly.variable("s")
    g11 = MultiPoly.variable(gamma_name(1, 1))
    g12 = MultiPoly.variable(gamma_name(1, 2))
    left = g11 * g11 + g11 * g12
    right = s * g12 * g12 + 3 * g11 * g12
    expected = s * integrate_monomial(4, [[2, 2]]) + 3 * integrate_monomial(4, [[2, 2]])
    assert integrate_product(left, right, 4) == expected


def test_haar_samples_are_orthogonal():
    q = haar_samples(5, 20, np.random.default_rng(0))
    eye = np.broadcast_to(np.eye(5), q.shape)
    assert np.allclose(q @ np.transpose(q, (0, 2, 1)), eye)


class TestMonteCarlo:
    def test_empty_monomial(self):
        mean, stderr = mc_estimate(4, [], samples=1000, seed=1)
        assert mean == 1.0
        assert stderr == 0.0

    def test_odd_monomial(self):
        mean, stderr = mc_estimate(4, [[1, 2], [0, 0]], samples=10_000, seed=2)
        assert abs(mean) <= 5 * stderr

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            mc_estimate(4, [[2]], samples=10)

    @pytest.mark.slow
    @pytest.mark.parametrize(
        "case",
        [
            pytest.param(dict(n=4, a=[[2]])),
            pytest.param(dict(n=4, a=[[2, 0], [0, 2]])),
            pytest.param(dict(n=5, a=[[2, 2], [0, 2]])),
            pytest.param(dict(n=6, a=[[1, 1], [1, 1]])),
        ],
    )
    def test_matches_exact_value(self, case):
        exact = float(integrate_monomial(case["n"], case["a"]))
        mean, stderr = mc_estimate(case["n"], case["a"], samples=100_000, seed=3)
        assert abs(mean - exact) <= 5 * stderr + 1e-12


@pytest.mark.parametrize(
    "a",
    [
        pytest.param([[2, 1, 0], [0, 1, 2], [1, 0, 1]], id="three-by-three"),
        pytest.param([[1, 0, 2, 0], [0, 3, 0, 1], [2, 0, 0, 2]], id="three-by-four"),
        pytest.param([[1, 1], [1, 1]], id="ties"),
    ],
)
def test_canonical_form_is_shared_by_the_orbit(a):
    forms = set()
    for rows in permutations(a):
        for cols in permutations(range(len(a[0]))):
            b = [[row[c] for c in cols] for row in rows]
            forms.add(canonicalize(b))
            forms.add(canonicalize([list(col) for col in zip(*b)]))
    assert len(forms) == 1


def test_canonical_form_drops_empty_lines():
    assert canonicalize([[0, 0, 0], [0, 2, 1], [0, 0, 0]]) == canonicalize([[2], [1]])
    assert canonicalize([[0, 0], [0, 0]]) == ()


def _random_monomial(rng: np.random.Generator, max_degree: int = 8) -> List[List[int]]:
    a = [[0] * 4 for _ in range(4)]
    for _ in range(int(rng.integers(1, max_degree + 1))):
        a[int(rng.integers(0, 4))][int(rng.integers(0, 4))] += 1
    return a


@pytest.mark.slow
@pytest.mark.parametrize("n", [4, 5])
def test_random_monomials_match_monte_carlo(n):
    rng = np.random.default_rng(100 + n)
    for k in range(25):
        a = _random_monomial(rng)
        exact = integrate_monomial(n, a)
        if has_odd_line(canonicalize(a)):
            assert exact == 0
        mean, stderr = mc_estimate(n, a, samples=100_000, seed=1000 * n + k)
        assert abs(mean - float(exact)) <= 5 * stderr + 1e-12, f"{a=} {exact=} {mean=} {stderr=}"
