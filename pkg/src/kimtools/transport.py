"""Horizontal sections of the universal connection at a base point.

The logarithm ``J`` of the horizontal section is found from the linear
equation ``d exp(J) = ω · exp(J)`` in the truncated enveloping algebra: the
word-length ``k`` part of ``G = exp(J)`` is the integral of ``ω`` times the
length ``k - 1`` part.  The Lie-side equation ``dJ = (ad_J/(e^{ad_J} - 1)) ω``
is solved separately by fixed-point iteration and serves as a cross-check.

The forms ``θ̃ = ((e^{ad_t} - 1)/ad_t)(dt) - ω`` live on the product of the
Lie algebra (coordinates ``t1 .. tr``) with the chart.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Mapping, Sequence

from .connection import UniversalConnection
from .errors import NotGroupLike
from .exactalg import (Form, Poly, RationalFunction, TruncSeries, exterior_d, jet_expand, shifted_names,
                       wedge_forms)
from .liecore import (LieAlgebra, LieElement, UEAElement, ad_series, bracket, exp, grouplike_residual, log)


def radial_integral(form: Form) -> TruncSeries:
    """Primitive vanishing at the origin of a closed 1-form with series coefficients.

    A monomial ``c t^e dt_j`` contributes ``c t^e t_j / (|e| + 1)``.
    """
    names = form.coords
    order = None
    terms: dict[tuple[int, ...], Fraction] = {}
    for (j,), coef in form.comps.items():
        coef = coef if isinstance(coef, TruncSeries) else TruncSeries.const(coef, names, 1)
        order = coef.order if order is None else min(order, coef.order)
        for e, c in coef.terms.items():
            ne = e[:j] + (e[j] + 1,) + e[j + 1:]
            v = terms.get(ne, 0) + c / (sum(e) + 1)
            if v:
                terms[ne] = v
            else:
                terms.pop(ne, None)
    if order is None:
        return TruncSeries(names, 1 << 30)
    return TruncSeries(names, order + 1, terms)


def _zero_series(names: Sequence[str], order: int) -> TruncSeries:
    return TruncSeries(names, order)


@dataclass
class HorizontalLog:
    """The logarithm ``J`` of the horizontal section, with series coefficients."""

    universal: UniversalConnection
    J: LieElement
    G: UEAElement
    base: dict[str, Fraction]
    depth: int
    order: int
    names: tuple[str, ...]

    @property
    def algebra(self) -> LieAlgebra:
        return self.J.algebra

    def coordinate(self, i: int) -> TruncSeries:
        return self.J.coords.get(i, _zero_series(self.names, self.order))

    def to_json(self) -> dict:
        return {str(i): self.coordinate(i).to_text() for i in range(self.algebra.dim)}


def _base_dict(universal: UniversalConnection, base: Mapping[str, Any] | Sequence[Any] | Any) -> dict[str, Fraction]:
    chart = universal.space.chart
    if isinstance(base, Mapping):
        return {v: Fraction(base[v]) for v in chart}
    if isinstance(base, (list, tuple)):
        return {v: Fraction(b) for v, b in zip(chart, base)}
    return {chart[0]: Fraction(base)}


def omega_series(universal: UniversalConnection, base: Mapping[str, Fraction], order: int,
                 names: Sequence[str]) -> list[Form]:
    return [jet_expand(f, base, order, names) for f in universal.omega_forms()]


def solve_J(universal: UniversalConnection, base: Any, order: int = 10,
            names: Sequence[str] | None = None) -> HorizontalLog:
    """Solve ``d exp(J) = ω exp(J)`` with ``J(base) = 0`` to total degree below ``order``."""
    if order < 2:
        raise ValueError("order must be at least 2")
    base = _base_dict(universal, base)
    names = tuple(names) if names else shifted_names(universal.space.chart)
    env = universal.env
    omegas = omega_series(universal, base, order - 1, names)
    gens = [g for g, _ in universal.omega]
    one = TruncSeries.const(1, names, order)
    G: dict[tuple[int, ...], TruncSeries] = {(): one}
    layer = {(): one}
    for k in range(1, universal.depth + 1):
        per_coord: dict[int, dict] = {}
        for w, c in layer.items():
            for g, om in zip(gens, omegas):
                for (j,), a in om.comps.items():
                    vec = per_coord.setdefault(j, {})
                    key = (g,) + w
                    t = a * c
                    vec[key] = vec[key] + t if key in vec else t
        integrand: dict[tuple[int, ...], dict[int, TruncSeries]] = {}
        for j, vec in per_coord.items():
            for w, a in env.normal_form(vec).items():
                integrand.setdefault(w, {})[j] = a
        layer = {}
        for w, comps in integrand.items():
            prim = radial_integral(Form(names, 1, {(j,): a for j, a in comps.items()}))
            if not prim.is_zero():
                layer[w] = prim
        G.update(layer)
    Gel = UEAElement(env, G)
    J = log(Gel)
    return HorizontalLog(universal, J, Gel, base, universal.depth, order, names)


def horizontality_residual(hlog: HorizontalLog) -> int:
    """Number of nonzero coefficients of ``dG - ω G`` below the reliable order."""
    universal = hlog.universal
    env = universal.env
    names = hlog.names
    omegas = omega_series(universal, hlog.base, hlog.order - 1, names)
    gens = [g for g, _ in universal.omega]
    count = 0
    for j, v in enumerate(names):
        lhs = {w: c.diff(v) for w, c in hlog.G.terms.items()}
        rhs: dict = {}
        for w, c in hlog.G.terms.items():
            for g, om in zip(gens, omegas):
                a = om.comps.get((j,))
                if a is None or len(w) + 1 > universal.depth:
                    continue
                key = (g,) + w
                rhs[key] = rhs[key] + a * c if key in rhs else a * c
        rhs = env.normal_form(rhs)
        for w in set(lhs) | set(rhs):
            diff = lhs.get(w, 0) - rhs.get(w, 0)
            if isinstance(diff, TruncSeries):
                count += sum(1 for e in diff.truncate(hlog.order - 1).terms)
            elif diff != 0:
                count += 1
    return count


def solve_J_lie(universal: UniversalConnection, base: Any, order: int = 10,
                names: Sequence[str] | None = None) -> LieElement:
    """Fixed-point solution of ``dJ = (ad_J/(e^{ad_J} - 1)) ω`` (independent of :func:`solve_J`)."""
    base = _base_dict(universal, base)
    names = tuple(names) if names else shifted_names(universal.space.chart)
    alg = universal.algebra
    omegas = omega_series(universal, base, order - 1, names)
    omega = LieElement(alg, {alg.index[(g,)]: om for (g, _), om in zip(universal.omega, omegas)})
    J = LieElement(alg, {})
    for _ in range(universal.depth):
        rhs = ad_series("t/(e^t-1)", J)(omega)
        J = LieElement(alg, {i: radial_integral(f) for i, f in rhs.coords.items()})
    return J


# ---------------------------------------------------------------------------
# group-likeness and the local Albanese map


def _as_uea(x: Any) -> UEAElement:
    if isinstance(x, HorizontalLog):
        return exp(x.J)
    if isinstance(x, LieElement):
        return exp(x)
    if isinstance(x, UEAElement):
        return x
    raise TypeError("expected a horizontal log or an algebra element")


def verify_grouplike(x: Any) -> int:
    """Number of nonzero coefficients in ``Δ exp(J) - exp(J) ⊗ exp(J)`` (0 means group-like)."""
    residual = grouplike_residual(_as_uea(x))
    count = 0
    for c in residual.values():
        count += len(c.terms) if isinstance(c, TruncSeries) else 1
    return count


def albanese_local(hlog: HorizontalLog, F: UEAElement | None = None) -> UEAElement:
    """The local map ``exp(J) · F⁻¹`` for a group-like section ``F`` with ``F(base) = 1``."""
    G = exp(hlog.J)
    if F is None:
        return G
    if verify_grouplike(F) != 0:
        raise NotGroupLike("F is not group-like")
    for w, c in F.terms.items():
        value = c.constant() if isinstance(c, TruncSeries) else c
        if value != (1 if w == () else 0):
            raise NotGroupLike("F does not equal 1 at the base point")
    return G * F.inverse()


# ---------------------------------------------------------------------------
# θ̃ forms


def lie_coordinate_names(alg: LieAlgebra) -> tuple[str, ...]:
    return tuple(f"t{i + 1}" for i in range(alg.dim))


@dataclass
class ThetaSystem:
    algebra: LieAlgebra
    coords: tuple[str, ...]
    lie_names: tuple[str, ...]
    chart: tuple[str, ...]
    theta: list[Form]
    omega: list[Form]


def _extend_form(f: Form, coords: tuple[str, ...]) -> Form:
    comps = {}
    for k, c in f.comps.items():
        key = tuple(coords.index(f.coords[i]) for i in k)
        comps[key] = RationalFunction.coerce(c, f.coords).over(coords)
    return Form(coords, f.degree, comps)


def compute_theta(universal: UniversalConnection) -> ThetaSystem:
    """``θ̃ = ((e^{ad_t} - 1)/ad_t)(dt) - ω`` with polynomial dependence on ``t``."""
    alg = universal.algebra
    lie_names = lie_coordinate_names(alg)
    chart = universal.space.chart
    coords = lie_names + chart
    t = LieElement(alg, {i: RationalFunction.coerce(Poly.var(lie_names[i], coords)) for i in range(alg.dim)})
    dt = LieElement(alg, {i: Form(coords, 1, {(i,): RationalFunction.coerce(1, coords)}) for i in range(alg.dim)})
    series = ad_series("(e^t-1)/t", t)(dt)
    zero = Form(coords, 1, {})
    omega = [zero] * alg.dim
    for i, f in universal.omega_element().items():
        omega[i] = _extend_form(f, coords)
    theta = [series.coords.get(i, zero) - omega[i] for i in range(alg.dim)]
    return ThetaSystem(alg, coords, lie_names, chart, theta, omega)


def verify_theta_identity(system: ThetaSystem) -> list[Form]:
    """Residuals ``dθ̃_k - Σ b_ijk θ̃_i ∧ (θ̃_j / 2 + ω_j)``; all zero when the identity holds."""
    alg = system.algebra
    half = Fraction(1, 2)
    out = []
    for k in range(alg.dim):
        acc = exterior_d(system.theta[k])
        for i in range(alg.dim):
            for j in range(alg.dim):
                c = alg.bracket_basis(i, j).get(k)
                if not c:
                    continue
                right = system.theta[j].scale(half) + system.omega[j]
                acc = acc - wedge_forms(system.theta[i], right).scale(c)
        out.append(acc)
    return out


def rename_series(s: TruncSeries, names: Sequence[str]) -> TruncSeries:
    return TruncSeries(tuple(names), s.order, s.terms)


def pullback_theta(system: ThetaSystem, hlog: HorizontalLog, names: Sequence[str] | None = None) -> list[Form]:
    """Pull each ``θ̃_k`` back along the graph ``t = J(z)`` into the jet variables.

    The jet variables default to ``s`` (or ``s1, s2, ...``) to keep them apart
    from the Lie coordinates.
    """
    chart = system.chart
    if names is None:
        names = ("s",) if len(chart) == 1 else tuple(f"s{i + 1}" for i in range(len(chart)))
    names = tuple(names)
    order = hlog.order
    point: dict[str, TruncSeries] = {}
    Jser = {}
    for i, v in enumerate(system.lie_names):
        Jser[v] = rename_series(hlog.coordinate(i), names)
        point[v] = Jser[v]
    for b, v in enumerate(chart):
        point[v] = TruncSeries(names, order, {tuple(int(j == b) for j in range(len(names))): 1,
                                              (0,) * len(names): hlog.base[v]})
    out = []
    for form in system.theta:
        comps: dict[tuple[int, ...], TruncSeries] = {}
        for (a,), coef in form.comps.items():
            value = coef.evaluate(point)
            if not isinstance(value, TruncSeries):
                value = TruncSeries.const(value, names, order)
            v = system.coords[a]
            for b, sname in enumerate(names):
                if v in Jser:
                    factor = Jser[v].diff(sname)
                elif chart.index(v) == b:
                    factor = TruncSeries.const(1, names, order)
                else:
                    continue
                term = value * factor
                comps[(b,)] = comps[(b,)] + term if (b,) in comps else term
        out.append(Form(names, 1, comps))
    return out


def nonzero_coefficients(forms: Sequence[Form]) -> int:
    count = 0
    for f in forms:
        for c in f.comps.values():
            if isinstance(c, TruncSeries):
                count += len(c.terms)
            elif isinstance(c, RationalFunction):
                count += len(c.num.terms)
            elif c != 0:
                count += 1
    return count
