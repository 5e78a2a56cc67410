import json
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kimtools.criteria import (
    CurveData,
    ModelRecord,
    depth1_check,
    fixture_path,
    growth_deficit,
    imag_quadratic_check,
    load_curve,
    more_inequality_eval,
    qc_bound,
    qc_depth2_check,
    run_criterion,
    siksek_question_audit,
)
from kimtools.errors import InvalidData, LengthMismatch, MissingFlag, WrongField
from oracles import free_metabelian_dim


def rational_curve(**kw) -> CurveData:
    return CurveData(degree=1, r1=1, r2=0, **kw)


def test_depth1_finite_over_quadratic_field():
    c = CurveData(genus=2, degree=2, r1=2, r2=0, rank=2, hom_vanishing=True)
    rep = depth1_check(c)
    assert (rep.bound, rep.verdict) == (2, "finite")


def test_depth1_classical_case():
    rep = depth1_check(rational_curve(genus=3, rank=1))
    assert rep.verdict == "finite"


def test_depth1_without_hom_vanishing_is_inconclusive():
    c = CurveData(genus=2, degree=2, r1=2, r2=0, rank=1, hom_vanishing=False)
    assert depth1_check(c).verdict == "inconclusive"


def test_depth1_needs_genus_two_and_rank():
    with pytest.raises(InvalidData):
        depth1_check(rational_curve(genus=1, rank=0))
    with pytest.raises(InvalidData):
        depth1_check(rational_curve(genus=2))


def test_fixture_depth1_is_obstructed():
    curve, raw = load_curve(fixture_path())
    rep = depth1_check(curve)
    assert rep.verdict == "obstructed"
    assert rep.witness.label == "X -> X0 base-change Prym"
    assert rep.to_json()["verdict"] == "obstructed: base-change Prym"


def test_fixture_keeps_unresolved_tokens_verbatim():
    raw = json.loads(fixture_path().read_text())
    tokens = [t["token"] for t in raw["unresolved_tokens"]]
    assert "t^2" in tokens
    assert "(x^4-\\frac{11}{27})(x^2-\\frac{27}{11})" in raw["equations"]["X0"]


def test_fixture_siksek_audit():
    curve, _ = load_curve(fixture_path())
    audit = siksek_question_audit(curve)
    assert audit.condition_satisfied
    assert audit.obstruction is not None
    assert audit.summary == ("Siksek condition satisfied; yet the depth-one locus is infinite "
                             "(base-change Prym obstruction)")


def test_siksek_audit_without_covers():
    audit = siksek_question_audit(CurveData(genus=2, degree=2, r1=2, r2=0, rank=2))
    assert audit.condition_satisfied and audit.obstruction is None
    assert audit.summary == "Siksek condition satisfied"


def test_siksek_audit_names_failing_model():
    c = CurveData(genus=2, degree=2, r1=2, r2=0, rank=1,
                  models=[ModelRecord("Y/Q", 1, 3, 2), ModelRecord("Y/K", 2, 2, 2)])
    audit = siksek_question_audit(c)
    assert not audit.condition_satisfied
    assert audit.summary == "Siksek condition fails (Y/Q)"


def test_qc_bound_examples():
    imquad = CurveData(genus=2, degree=2, r1=0, r2=1, rho=2, h1f=4, hom_vanishing=True)
    assert qc_bound(imquad) == 4
    assert qc_depth2_check(imquad).verdict == "finite"
    rat = rational_curve(genus=2, rho=1, h1f=2)
    assert qc_bound(rat) == 1
    assert qc_depth2_check(rat).verdict == "inconclusive"
    cubic = CurveData(genus=2, degree=3, r1=3, r2=0, rho=3, h1f=5, hom_vanishing=True)
    assert qc_bound(cubic) == 5
    assert qc_depth2_check(cubic).verdict == "finite"


def test_qc_modified_variant_uses_rank():
    c = CurveData(genus=2, degree=2, r1=0, r2=1, rho=2, rank=6, hom_vanishing=True)
    rep = qc_depth2_check(c, modified=True)
    assert rep.bound == 6 and rep.verdict == "finite"


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 10), st.integers(1, 20))
def test_qc_bound_over_rationals_is_classical(g, rho):
    assert qc_bound(rational_curve(genus=g, rho=rho)) == (g - 1) + rho - 1


def test_imaginary_quadratic_check():
    c = CurveData(genus=2, degree=2, r1=0, r2=1, h1f=4, rho=2, density=True)
    assert imag_quadratic_check(c).verdict == "finite"
    c = CurveData(genus=2, degree=2, r1=0, r2=1, h1f=4, rho=1, density=True)
    assert imag_quadratic_check(c).verdict == "inconclusive"
    with pytest.raises(WrongField):
        imag_quadratic_check(CurveData(genus=2, degree=2, r1=2, r2=0, h1f=4, rho=2))


def test_inconsistent_signature_rejected():
    with pytest.raises(InvalidData):
        CurveData(genus=2, degree=3, r1=1, r2=0)


def test_margin_examples():
    rep = more_inequality_eval([2, 1, 2, 3], [1, 0, 1, 0], [0, 0, 0], 1)
    assert (rep.margin, rep.verdict) == (5, "finite")
    rep = more_inequality_eval([0, 0], [0, 0], [0, 0], 1)
    assert (rep.margin, rep.verdict) == (-1, "inconclusive")
    with pytest.raises(LengthMismatch):
        more_inequality_eval([1, 2], [1], [0], 1)


def parity_h1(i: int, dim: int) -> int:
    """h^1 of a Tate twist of a trivial Artin piece: all of it in odd degree > 1, none in even degree."""
    return dim if i % 2 else 0


def test_margin_with_metabelian_dims_turns_positive():
    margins = []
    for n in range(1, 9):
        dims = [free_metabelian_dim(2, i) for i in range(1, n + 1)]
        h1 = [1] + [parity_h1(i, dims[i - 1]) for i in range(2, n + 1)]
        margins.append(more_inequality_eval(dims, h1, [0] * (n - 1), 2).margin)
    assert margins == [-1, 0, 0, 3, 3, 8, 8, 15]
    assert next(n for n, m in enumerate(margins, 1) if m > 0) == 4


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6), st.integers(0, 6)), min_size=1, max_size=5),
       st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6), st.integers(0, 6)), min_size=1, max_size=5),
       st.integers(0, 3))
def test_margin_is_additive_over_concatenation(first, second, dim_Z):
    def margin(rows, z):
        dims, h1, ker = (list(col) for col in zip(*rows))
        return more_inequality_eval(dims, h1, ker, z).margin

    assert margin(first + second, dim_Z) == margin(first, dim_Z) + margin(second, 0)


def case_one_params(**extra) -> dict:
    params = {"dims": [free_metabelian_dim(2, i) for i in range(1, 9)], "soule": True, "iwasawa": True,
              "s": 0, "dim_Z": 1}
    params.update(extra)
    return params


def test_growth_case_one_metabelian():
    rep = growth_deficit(1, case_one_params(), 8)
    assert rep.deficits == [1, 2, 2, 5, 5, 10, 10, 17]
    assert rep.nondecreasing
    assert rep.first_positive == 1
    rep = growth_deficit(1, case_one_params(s=2), 8)
    assert rep.first_positive == 4


def test_growth_case_one_matches_independent_sum():
    dims = [free_metabelian_dim(2, i) for i in range(1, 9)]
    expected, total = [], Fraction(-1)
    for i, d in enumerate(dims, 1):
        total += d - (1 if i == 1 else parity_h1(i, d))
        expected.append(total)
    assert growth_deficit(1, case_one_params(s=1), 8).deficits == expected


def test_growth_requires_external_inputs():
    with pytest.raises(MissingFlag):
        growth_deficit(1, case_one_params(soule=False), 4)
    with pytest.raises(MissingFlag):
        growth_deficit(3, {}, 4)
    with pytest.raises(MissingFlag):
        growth_deficit(4, {"g": 2, "dims": [1], "minus": [0]}, 1)
    with pytest.raises(LengthMismatch):
        growth_deficit(1, case_one_params(), 9)


def test_growth_case_three_is_linear():
    params = {"iwasawa": True, "abelian": [1, 1], "exceptional_h1": {"4": 1}, "dim_Z": 1}
    rep = growth_deficit(3, params, 7)
    assert rep.deficits == [0, 1, 2, 2, 3, 4, 5]
    assert growth_deficit(3, params, 1).deficits == [0]


def test_growth_case_four_polynomial_bound():
    params = {"B": Fraction(1, 4), "g": 1, "dims": [2, 2, 2, 2], "minus": [1, 0, 1, 0]}
    rep = growth_deficit(4, params, 4)
    # running sums 1, 3, 4, 6 minus n/2
    assert rep.deficits == [Fraction(1, 2), 2, Fraction(5, 2), 4]


def test_run_criterion_on_fixture():
    curve, raw = load_curve(fixture_path())
    out = run_criterion("siksek", curve, raw)
    assert out["condition_satisfied"] is True
    with pytest.raises(MissingFlag):
        run_criterion("growth", curve, raw)
