import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kimtools.connection import (
    Connection,
    GaugeTransform,
    PuncturedLine,
    apply_gauge,
    build_S_chain,
    build_universal,
    certify,
    chart_from_json,
    connection_from_json,
    flatness_check,
    is_flat,
    reduce_to_reduced_form,
)
from kimtools.errors import NotClosedUnderD, NotFlat, UnsupportedChart
from kimtools.exactalg import Form, FormSpace, Poly, RationalFunction

from builders import polynomial_form_space, random_unipotent

XY = ("z1", "z2")


def constant_form(coeff, k, coords=XY):
    return Form(coords, 1, {(k,): RationalFunction.coerce(coeff, coords)})


def test_s_chain_on_curve_is_s1():
    space = polynomial_form_space(("z",))
    s1 = [{"dlog z": 1}, {"dlog (z-1)": 1}]
    chain = build_S_chain(space, s1, 3)
    assert all(chain[i] == s1 for i in (1, 2, 3))


def test_s_chain_empty():
    space = polynomial_form_space(("z",))
    chain = build_S_chain(space, [], 3)
    assert chain.depth() == 3 and all(chain[i] == [] for i in (1, 2, 3))


def test_s_chain_picks_up_declared_primitive():
    z1, _ = Poly.gens(XY)
    ones = {"dz1": constant_form(1, 0), "dz2": constant_form(1, 1),
            "z1 dz2": Form(XY, 1, {(1,): RationalFunction.coerce(z1, XY)})}
    twos = {"dz1^dz2": Form(XY, 2, {(0, 1): RationalFunction.coerce(1, XY)})}
    space = FormSpace(XY, {}, ones, twos)
    chain = build_S_chain(space, [{"dz1": 1}, {"dz2": 1}], 2, require_primitives=True)
    assert chain.contains(2, space.atom("z1 dz2"))
    assert not chain.contains(1, space.atom("z1 dz2"))


def test_s_chain_without_primitive_raises():
    ones = {"dz1": constant_form(1, 0), "dz2": constant_form(1, 1)}
    twos = {"dz1^dz2": Form(XY, 2, {(0, 1): RationalFunction.coerce(1, XY)})}
    space = FormSpace(XY, {}, ones, twos)
    with pytest.raises(NotClosedUnderD):
        build_S_chain(space, [{"dz1": 1}, {"dz2": 1}], 2, require_primitives=True)


def _commuting_pair_connection(same_entry: bool) -> Connection:
    space = polynomial_form_space(XY)
    a, b = space.atom("dlog z1"), space.atom("dlog z2")
    zero = Form(XY, 1, {}, space)
    m = [[zero] * 3 for _ in range(3)]
    if same_entry:
        m[1] = [a + b, zero, zero]
    else:
        m[1] = [a, zero, zero]
        m[2] = [zero, b, zero]
    return Connection(space, [1, 1, 1], m)


def test_flatness_commuting_and_noncommuting():
    assert is_flat(_commuting_pair_connection(True))
    curvature = flatness_check(_commuting_pair_connection(False))
    assert not curvature[2][0].is_zero()
    assert is_flat(Connection(polynomial_form_space(("z",)), [1, 1], [[0, 0], [polynomial_form_space(("z",)).atom("dlog z"), 0]]))


def test_reduce_removes_exact_part():
    space = polynomial_form_space(("z",))
    entry = space.atom("dlog z") + space.atom("z^0 dz")
    conn = Connection(space, [1, 1], [[0, 0], [entry, 0]])
    chain = build_S_chain(space, [{"dlog z": 1}, {"dlog (z-1)": 1}], 1)
    report, gauge = reduce_to_reduced_form(conn, chain)
    assert report.certified
    assert gauge.M[1][0] == RationalFunction.coerce(-Poly.var("z", ("z",)))
    assert report.connection.entry(1, 0) == space.atom("dlog z")


def test_reduce_already_reduced_gives_identity():
    space = polynomial_form_space(("z",))
    conn = Connection(space, [1, 1], [[0, 0], [space.atom("dlog (z-1)"), 0]])
    chain = build_S_chain(space, [{"dlog z": 1}, {"dlog (z-1)": 1}], 1)
    report, gauge = reduce_to_reduced_form(conn, chain)
    assert gauge.is_identity() and report.connection == conn


def test_reduce_rejects_curvature():
    conn = _commuting_pair_connection(False)
    chain = build_S_chain(conn.space, [{"dlog z1": 1}, {"dlog z2": 1}], 2)
    with pytest.raises(NotFlat):
        reduce_to_reduced_form(conn, chain)


def test_universal_p1_depth_two():
    u = build_universal(chart_from_json("p1-three"), 2)
    assert [str(f) for f in u.omega_forms()] == ["(1/z) dz", "(-1/(z - 1)) dz"]
    assert u.connection.blocks == [1, 2, 4]
    assert is_flat(u.connection)
    assert certify(u.connection, u.chain).certified


def test_universal_product_depth_one():
    u = build_universal(chart_from_json("p1-three-squared"), 1)
    assert len(u.omega_forms()) == 4 and u.algebra.dim == 4


def test_universal_product_depth_two_is_flat_and_reduced():
    u = build_universal(chart_from_json("p1-three-squared"), 2)
    assert is_flat(u.connection)
    assert certify(u.connection, u.chain).certified


def test_universal_rejects_two_punctures():
    with pytest.raises(UnsupportedChart):
        build_universal(PuncturedLine(("0", "inf")), 2)


def test_universal_truncation_property():
    deep = build_universal(chart_from_json("p1-three"), 3)
    shallow = build_universal(chart_from_json("p1-three"), 2)
    assert deep.connection.truncate(2) == shallow.connection


def test_connection_json_round_trip():
    u = build_universal(chart_from_json("p1-three"), 2)
    back = connection_from_json(u.space, u.connection.to_json())
    assert back == u.connection


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10 ** 6), st.sampled_from([[1, 1, 1], [1, 2, 1], [2, 1, 1]]))
def test_gauge_preserves_flatness_and_inverts(seed, blocks):
    rng = random.Random(seed)
    reduced, scrambled, chain = random_unipotent(rng, XY, blocks)
    assert is_flat(reduced) and is_flat(scrambled)
    report, gauge = reduce_to_reduced_form(scrambled, chain)
    assert report.certified and is_flat(report.connection)
    assert apply_gauge(scrambled, gauge) == report.connection


def test_gauge_inverse_matrix():
    chart = ("z",)
    z = Poly.var("z", chart)
    g = GaugeTransform(chart, [1, 1, 1], [[0, 0, 0], [z, 0, 0], [Fraction(2), z * z, 0]])
    inv = g.inverse_matrix()
    prod = [[sum((g.matrix()[r][k] * inv[k][c] for k in range(3)), RationalFunction.coerce(0, chart))
             for c in range(3)] for r in range(3)]
    assert all(prod[r][c] == (1 if r == c else 0) for r in range(3) for c in range(3))
