# Standard Library
from fractions import Fraction

# Third Party Library
import pytest

# First Party Library
from kisskit.exactmath import MultiPoly
from kisskit.glrep import Signature
from kisskit.glrep import signatures_up_to
from kisskit.symsys import S1_VARIABLES
from kisskit.symsys import AlphaOrbit
from kisskit.symsys import JVariable
from kisskit.symsys import base_integral
from kisskit.symsys import build_system
from kisskit.symsys import coefficient_table
from kisskit.symsys import enumerate_alpha
from kisskit.symsys import reduce_ideal
from kisskit.symsys import sigma_orbit
from kisskit.symsys import transpose_s

S11, S12, S21, S22 = (MultiPoly.variable(v, S1_VARIABLES) for v in ("S11", "S12", "S21", "S22"))


@pytest.mark.parametrize(
    "case",
    [
        pytest.param(dict(lam2=0, count=1)),
        pytest.param(dict(lam2=1, count=4)),
        pytest.param(dict(lam2=2, count=10)),
    ],
)
def test_enumerate_alpha(case):
    orbits = enumerate_alpha(case["lam2"])
    assert len(orbits) == case["count"]
    assert len(set(orbits)) == case["count"]
    assert all(o.size == case["lam2"] for o in orbits)


def test_alpha_orbit_is_sorted():
    assert AlphaOrbit(((2, 1), (1, 2))) == AlphaOrbit(((1, 2), (2, 1)))
    assert sigma_orbit(3, 2).s == 2
    assert sigma_orbit(3, 2).is_sigma
    with pytest.raises(ValueError):
        AlphaOrbit(((3, 1),))


@pytest.mark.parametrize(
    "case",
    [
        pytest.param(dict(lam=Signature(2, 0), k2=0, n_j=9, n_k=30)),
        pytest.param(dict(lam=Signature(1, 1), k2=0, n_j=4, n_k=10)),
        pytest.param(dict(lam=Signature(0, 0), k2=0, n_j=1, n_k=1)),
    ],
)
def test_build_system_counts(case):
    system = build_system(case["lam"], case["k2"])
    assert system.n_j == case["n_j"]
    assert system.n_k == case["n_k"]
    assert system.targeted[-1] == len(system.columns) - 1
    last = system.columns[-1]
    assert isinstance(last, JVariable)
    assert (last.l1, last.l2, last.orbit.s) == (0, 0, 0)


def test_build_system_index_range():
    with pytest.raises(ValueError):
        build_system(Signature(1, 0), 2)


class TestCoefficientTable:
    def test_tautological(self):
        table = coefficient_table(Signature(1, 0), 0)
        assert set(table.coefficients) == {(0, AlphaOrbit()), (1, AlphaOrbit())}
        assert table.coefficient(0, 0) == 1

    def test_sigma_orbits(self):
        table = coefficient_table(Signature(2, 2), 0)
        assert {orbit.s for _, orbit in table.coefficients} == {0, 1, 2}
        assert all(orbit.size == 2 for _, orbit in table.coefficients)

    @pytest.mark.parametrize("lam", signatures_up_to(4))
    def test_rank_one_for_small_signatures(self, lam):
        for k2 in range(lam.dim):
            table = coefficient_table(lam, k2)
            base = (0, sigma_orbit(lam.lam2, 0))
            assert table.coefficients[base] == 1


@pytest.mark.parametrize(
    "case",
    [
        pytest.param(dict(lam=Signature(0, 0), k1=0, k2=0, expected=MultiPoly.constant(1))),
        pytest.param(dict(lam=Signature(1, 0), k1=0, k2=0, expected=S11 / 2)),
        pytest.param(dict(lam=Signature(1, 0), k1=0, k2=1, expected=S12 / 2)),
    ],
)
def test_base_integral(case):
    assert base_integral(case["lam"], case["k1"], case["k2"], 4) == case["expected"]


def test_base_integral_dimension():
    with pytest.raises(ValueError):
        base_integral(Signature(1, 0), 0, 0, 3)


def test_reduce_ideal_uses_column_norms():
    s31 = MultiPoly.variable("S31")
    reduced = reduce_ideal(s31**2 + S11**2)
    assert reduced.with_variables(S1_VARIABLES) == 1 - S21**2


def test_transpose_s():
    assert transpose_s(S12 * S22 + Fraction(1, 3) * S21) == S21 * S22 + Fraction(1, 3) * S12
