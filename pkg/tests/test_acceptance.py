"""Acceptance suite: one test per primary criterion, each printing a single PASS/FAIL line.

Under pytest the lines appear in an "acceptance criteria" section of the
terminal summary; executing this file directly prints them as they run.
"""
from __future__ import annotations

import itertools
import random
import sys
import time
from fractions import Fraction

from kimtools.cohomdim import RepDescriptor, SubspaceData, artin_tate_h1, euler_h1, intersection_codim
from kimtools.connection import (apply_gauge, build_universal, certify, chart_from_json, is_flat,
                                 reduce_to_reduced_form)
from kimtools.criteria import (CurveData, depth1_check, fixture_path, growth_deficit, imag_quadratic_check,
                               load_curve, more_inequality_eval, qc_bound, qc_depth2_check,
                               siksek_question_audit)
from kimtools.exactalg import TruncSeries
from kimtools.errors import SingularCurve
from kimtools.formalgroup import WeierstrassCurve, formal_exp, formal_log, functional_equation_residual
from kimtools.intersect import colinearity_equation, colinearity_locus, p1_cross_forms
from kimtools.liecore import (LieAlgebraSpec, ad_injectivity_check, graded_dims, ihara_module_check,
                              twisted_injectivity_check)
from kimtools.transport import (compute_theta, horizontality_residual, nonzero_coefficients, pullback_theta,
                                solve_J, verify_grouplike, verify_theta_identity)

from builders import random_unipotent
from oracles import free_metabelian_dim, hall_counts, log_one_plus, minus_log_one_minus, sympy_rank

HALF = Fraction(1, 2)


# filled as the criteria run; the conftest hook prints these after the test session
RESULT_LINES: list[str] = []


def _emit(line: str) -> None:
    RESULT_LINES.append(line)
    if __name__ == "__main__":
        print(line)


def check(number: int, title: str, body, limit: float | None = None) -> None:
    """Run ``body``, print one PASS/FAIL line with the elapsed time and re-raise any failure."""
    start = time.perf_counter()
    error = None
    try:
        body()
    except AssertionError as exc:
        error = exc
    elapsed = time.perf_counter() - start
    if error is None and limit is not None and elapsed >= limit:
        error = AssertionError(f"took {elapsed:.2f} s, limit {limit} s")
    status = "PASS" if error is None else "FAIL"
    _emit(f"criterion {number:>2}: {status}  {title}  ({elapsed:.2f} s)")
    if error is not None:
        raise error


# ---------------------------------------------------------------------------


def _intro_example():
    alpha, beta = p1_cross_forms()
    locus = colinearity_locus([(alpha, beta)])
    assert locus.kind == "proper"
    assert locus.texts() == ["z1 - z2"]
    assert colinearity_equation(alpha, beta) == "z1*(z2 - 1) = z2*(z1 - 1)"


def test_criterion_01_intro_example_locus():
    check(1, "colinearity locus of the cross example", _intro_example, limit=1.0)


def _transport_fidelity():
    p1 = lambda depth: build_universal(chart_from_json("p1-three"), depth)  # noqa: E731
    hlog = solve_J(p1(1), HALF, 12)
    assert hlog.coordinate(0).coefficients() == log_one_plus(Fraction(2), 12)
    assert hlog.coordinate(1).coefficients() == minus_log_one_minus(Fraction(2), 12)
    for depth in (1, 2, 3, 4):
        u = p1(depth)
        hlog = solve_J(u, HALF, 6)
        assert verify_grouplike(hlog) == 0
        assert horizontality_residual(hlog) == 0
        assert nonzero_coefficients(verify_theta_identity(compute_theta(u))) == 0


def test_criterion_02_transport_fidelity():
    check(2, "horizontal sections match closed forms and satisfy the identities", _transport_fidelity, limit=10.0)


def _pullback_vanishing():
    cases = [("p1-three", d, HALF) for d in (1, 2, 3)]
    cases += [("p1-three-squared", d, [HALF, Fraction(1, 3)]) for d in (1, 2, 3)]
    for chart, depth, base in cases:
        u = build_universal(chart_from_json(chart), depth)
        hlog = solve_J(u, base, 5)
        assert nonzero_coefficients(pullback_theta(compute_theta(u), hlog)) == 0, (chart, depth)


def test_criterion_03_theta_pullback_vanishes():
    check(3, "theta pullback along the graph vanishes", _pullback_vanishing)


def _lie_oracles():
    for m in (1, 2, 3):
        assert graded_dims(LieAlgebraSpec(m, 8)) == hall_counts(m, 8)
    rows = ihara_module_check(LieAlgebraSpec(2, 8, "metabelian"))
    assert [r.degree for r in rows] == list(range(2, 9))
    assert all(r.match and r.lie_dim == r.degree - 1 for r in rows)
    assert graded_dims(LieAlgebraSpec(4, 2, "surface", genus=2))[1] == 5


def test_criterion_04_lie_core_oracles():
    check(4, "graded dimensions against Hall trees and syzygies", _lie_oracles, limit=30.0)


CROSS = ("[x1,x3]", "[x1,x4]", "[x2,x3]", "[x2,x4]")


def _injectivity():
    rng = random.Random(2024)
    specs = [(LieAlgebraSpec(2, 5, "metabelian"), 2), (LieAlgebraSpec(3, 5, "metabelian"), 3),
             (LieAlgebraSpec(4, 5, "surface", genus=2, metabelian=True), 4)]
    tried = 0
    while tried < 100:
        spec, m = specs[tried % 3]
        v = [Fraction(rng.randint(-5, 5), rng.randint(1, 4)) for _ in range(m)]
        if not any(v):
            continue
        assert ad_injectivity_check(spec, v, range(2, 5)).all_injective, (spec, v)
        tried += 1
    full = [[int(i == j) for j in range(4)] for i in range(4)]
    for involution in ((3, 4, 1, 2), (-3, -4, -1, -2)):
        spec = LieAlgebraSpec(4, 5, "ideal", ideal=CROSS, metabelian=True, involution=involution)
        for v in ([1, 0, 0, 0], [0, 1, 0, 0], [2, -1, 0, 0]):
            assert all(twisted_injectivity_check(spec, i, full, v) for i in range(2, 5))


def test_criterion_05_injectivity():
    check(5, "adjoint injectivity on random vectors and the swap family", _injectivity)


def _reduced_form():
    rng = random.Random(77)
    shapes = [(("z",), [1, 1, 1]), (("z",), [1, 2, 1]), (("z1", "z2"), [1, 1, 1]), (("z1", "z2"), [2, 1, 1]),
              (("z",), [1, 1, 1, 1]), (("z1", "z2"), [1, 1, 1, 1])]
    for k in range(20):
        coords, blocks = shapes[k % len(shapes)]
        reduced, scrambled, chain = random_unipotent(rng, coords, blocks)
        assert is_flat(scrambled)
        report, gauge = reduce_to_reduced_form(scrambled, chain)
        assert report.certified and certify(report.connection, chain).certified
        assert is_flat(report.connection)
        assert apply_gauge(scrambled, gauge) == report.connection
        again, gauge2 = reduce_to_reduced_form(report.connection, chain)
        assert again.connection == report.connection
        assert gauge2.is_identity()


def test_criterion_06_reduced_form():
    check(6, "reduction to reduced form on 20 random connections", _reduced_form)


def _criteria_arithmetic():
    imquad = CurveData(genus=2, degree=2, r1=0, r2=1, rho=2, h1f=4, density=True, hom_vanishing=True)
    assert qc_bound(imquad) == 4 and qc_depth2_check(imquad).verdict == "finite"
    assert imag_quadratic_check(imquad).verdict == "finite"
    for g in range(2, 7):
        for rho in range(1, 6):
            assert qc_bound(CurveData(genus=g, degree=1, r1=1, r2=0, rho=rho)) == (g - 1) + rho - 1
    assert depth1_check(CurveData(genus=2, degree=2, r1=2, r2=0, rank=2, hom_vanishing=True)).verdict == "finite"
    curve, _ = load_curve(fixture_path())
    audit = siksek_question_audit(curve)
    assert audit.condition_satisfied and audit.obstruction is not None
    assert depth1_check(curve).verdict == "obstructed"


def test_criterion_07_criteria_arithmetic():
    check(7, "finiteness bounds and the counterexample fixture", _criteria_arithmetic)


def _cohomology_ledgers():
    for dim in range(5):
        for signs in itertools.product((1, -1), repeat=dim):
            plus = signs.count(1)
            rep = RepDescriptor(dim, ((plus, dim - plus),))
            for n in range(2, 8):
                expected = sum(1 for e in signs if e * (-1) ** n == -1)
                assert artin_tate_h1(rep, n) == expected
    rng = random.Random(8)
    for _ in range(50):
        a, b = (_random_rep(rng) for _ in range(2))
        assert euler_h1(a.direct_sum(b)) == euler_h1(a) + euler_h1(b)
    for _ in range(200):
        ambient = rng.randint(1, 6)
        first = _independent(rng, rng.randint(0, ambient), ambient)
        second = _independent(rng, rng.randint(0, ambient), ambient)
        rep = intersection_codim(SubspaceData(ambient, first, second))
        assert rep.dim_intersection == len(first) + len(second) - sympy_rank(first + second)


def _random_rep(rng) -> RepDescriptor:
    d = rng.randint(0, 4)
    plus = rng.randint(0, d)
    return RepDescriptor(d, ((plus, d - plus),), h0=rng.randint(0, 2), h2=rng.randint(0, 2))


def _independent(rng, count, ambient):
    while True:
        rows = [[Fraction(rng.randint(-2, 2)) for _ in range(ambient)] for _ in range(count)]
        if sympy_rank(rows) == count:
            return rows


def test_criterion_08_cohomology_ledgers():
    check(8, "parity table and dimension identities", _cohomology_ledgers)


def _growth():
    dims = graded_dims(LieAlgebraSpec(2, 8, "metabelian"))
    assert dims == [free_metabelian_dim(2, i) for i in range(1, 9)]
    rep = growth_deficit(1, {"dims": dims, "soule": True, "iwasawa": True, "s": 2, "dim_Z": 1}, 8)
    assert rep.nondecreasing
    assert rep.first_positive is not None and rep.first_positive <= 8
    assert all(x > 0 for x in rep.deficits[rep.first_positive - 1:])
    datasets = [
        (([2, 1, 2, 3], [1, 0, 1, 0], [0, 0, 0], 1), 5),
        (([0, 0, 0], [0, 0, 0], [0, 0, 0], 1), -1),
        (([2, 1, 2, 3, 4, 5], [2, 0, 2, 0, 4, 0], [0, 0, 0, 0, 0], 1), 8),
    ]
    for args, margin in datasets:
        assert more_inequality_eval(*args).margin == margin


def test_criterion_09_growth_bookkeeping():
    check(9, "deficit growth and margin arithmetic", _growth)


def _formal_group():
    rng = random.Random(10)
    curves = []
    while len(curves) < 10:
        a = [Fraction(rng.randint(-5, 5), rng.randint(1, 3)) for _ in range(5)]
        try:
            curves.append(WeierstrassCurve(*a))
        except SingularCurve:
            continue
    t = TruncSeries.var("t", ("t",), 20)
    for c in curves:
        log = formal_log(c, 20)
        assert log.compose({"t": formal_exp(log)}) == t
        assert formal_exp(log).compose({"t": log}) == t
    for c in curves[:3]:
        assert functional_equation_residual(c, 10).is_zero()


def test_criterion_10_formal_group():
    check(10, "formal exponential and logarithm, functional equation", _formal_group)


if __name__ == "__main__":
    failures = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failures += 1
    sys.exit(1 if failures else 0)
