import random
from fractions import Fraction

from hypothesis import given, settings
from hypothesis import strategies as st

from kimtools.linalg import Echelon, nullspace, rank, rref, solve

from oracles import sympy_rank


def test_rref_small_example():
    rows, pivots = rref([[2, 4], [1, 3]])
    assert pivots == [0, 1]
    assert rows == [[1, 0], [0, 1]]


def test_nullspace_of_rank_one_matrix():
    basis = nullspace([[1, 2, 3]], 3)
    assert len(basis) == 2
    for v in basis:
        assert sum(a * b for a, b in zip([1, 2, 3], v)) == 0


def test_solve_inconsistent_returns_none():
    assert solve([[1, 1], [1, 1]], [1, 2]) is None
    assert solve([[1, 1], [1, -1]], [2, 0]) == [1, 1]


def test_echelon_membership():
    ech = Echelon(key=lambda c: c)
    assert ech.add({0: Fraction(1), 1: Fraction(1)})
    assert not ech.add({0: Fraction(2), 1: Fraction(2)})
    assert ech.contains({0: Fraction(-3), 1: Fraction(-3)})
    assert not ech.contains({1: Fraction(1)})


matrices = st.integers(1, 5).flatmap(lambda c: st.lists(
    st.lists(st.integers(-3, 3), min_size=c, max_size=c), min_size=1, max_size=5))


@settings(max_examples=60, deadline=None)
@given(matrices)
def test_rank_matches_sympy(m):
    assert rank([[Fraction(x) for x in r] for r in m]) == sympy_rank(m)


@settings(max_examples=60, deadline=None)
@given(matrices)
def test_rank_nullity(m):
    ncols = len(m[0])
    basis = nullspace([[Fraction(x) for x in r] for r in m], ncols)
    assert len(basis) + rank(m) == ncols
    for v in basis:
        for row in m:
            assert sum(a * b for a, b in zip(row, v)) == 0


def test_solve_round_trip_random():
    rng = random.Random(7)
    for _ in range(30):
        a = [[Fraction(rng.randint(-4, 4)) for _ in range(3)] for _ in range(3)]
        x = [Fraction(rng.randint(-4, 4), rng.randint(1, 3)) for _ in range(3)]
        b = [sum(r[i] * x[i] for i in range(3)) for r in a]
        y = solve(a, b)
        assert y is not None
        assert [sum(r[i] * y[i] for i in range(3)) for r in a] == b
