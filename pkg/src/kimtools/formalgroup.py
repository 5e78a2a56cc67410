"""Formal group of a Weierstrass elliptic curve.

The formal parameter is ``t = -x/y`` and ``w = -1/y``.  Writing
``w = t^3 u`` turns the Weierstrass equation into the fixed-point equation

    u = 1 + a1 t u + a2 t^2 u + a3 t^3 u^2 + a4 t^4 u^2 + a6 t^6 u^3,

from which every series in this module follows by exact truncated
power-series arithmetic.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Sequence

from .errors import BadLeadingTerm, SingularCurve
from .exactalg import TruncSeries

DEFAULT_ORDER = 20


@dataclass(frozen=True)
class WeierstrassCurve:
    a1: Fraction
    a2: Fraction
    a3: Fraction
    a4: Fraction
    a6: Fraction

    def __post_init__(self) -> None:
        for name in ("a1", "a2", "a3", "a4", "a6"):
            object.__setattr__(self, name, Fraction(getattr(self, name)))
        if self.discriminant == 0:
            raise SingularCurve("discriminant of " + ",".join(str(c) for c in self.coefficients) + " vanishes")

    @classmethod
    def from_string(cls, text: str) -> "WeierstrassCurve":
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 5:
            raise ValueError("expected five coefficients a1,a2,a3,a4,a6")
        return cls(*(Fraction(p) for p in parts))

    @property
    def coefficients(self) -> tuple[Fraction, ...]:
        return (self.a1, self.a2, self.a3, self.a4, self.a6)

    @property
    def discriminant(self) -> Fraction:
        a1, a2, a3, a4, a6 = self.a1, self.a2, self.a3, self.a4, self.a6
        b2 = a1 * a1 + 4 * a2
        b4 = 2 * a4 + a1 * a3
        b6 = a3 * a3 + 4 * a6
        b8 = a1 * a1 * a6 + 4 * a2 * a6 - a1 * a3 * a4 + a2 * a3 * a3 - a4 * a4
        return -b2 * b2 * b8 - 8 * b4 ** 3 - 27 * b6 * b6 + 9 * b2 * b4 * b6


def _t(order: int, name: str = "t") -> TruncSeries:
    return TruncSeries.var(name, (name,), order)


def u_series(curve: WeierstrassCurve, order: int, name: str = "t") -> TruncSeries:
    """``u = w / t^3`` to the given order."""
    t = _t(order, name)
    t2, t3 = t * t, t * t * t
    t4, t6 = t3 * t, t3 * t3
    u = TruncSeries.const(1, (name,), order)
    for _ in range(order):
        nxt = (1 + curve.a1 * t * u + curve.a2 * t2 * u + curve.a3 * t3 * u * u
               + curve.a4 * t4 * u * u + curve.a6 * t6 * u * u * u)
        if nxt == u:
            break
        u = nxt
    return u


def w_series(curve: WeierstrassCurve, order: int, name: str = "t") -> TruncSeries:
    """``w = -1/y`` as a series in ``t``."""
    t = _t(order, name)
    return t * t * t * u_series(curve, order, name)


def invariant_differential(curve: WeierstrassCurve, order: int) -> TruncSeries:
    """``ω/dt`` for ``ω = dx / (2y + a1 x + a3)``, normalized to ``1 + O(t)``."""
    n = order + 1
    t = _t(n)
    u = u_series(curve, n + 1)
    du = u.diff("t")
    num = 2 + t * du / u
    den = 2 - curve.a1 * t - curve.a3 * t * t * t * u.truncate(n)
    return (num / den).truncate(order)


def formal_log(curve: WeierstrassCurve, order: int = DEFAULT_ORDER) -> TruncSeries:
    """Termwise integral of the invariant differential, ``t + O(t^2)``, truncated at ``t^order``."""
    if order < 2:
        raise ValueError("order must be at least 2")
    return invariant_differential(curve, order - 1).integrate("t").truncate(order)


def formal_exp(log: TruncSeries) -> TruncSeries:
    """Compositional inverse of a series ``t + O(t^2)`` at the same truncation."""
    if len(log.vars) != 1:
        raise BadLeadingTerm("series must be univariate")
    name = log.vars[0]
    if log.coefficient((0,)) != 0 or log.coefficient((1,)) != 1:
        raise BadLeadingTerm("series must be t + O(t^2)")
    t = _t(log.order, name)
    e = t
    # each pass fixes one more coefficient
    for _ in range(log.order):
        nxt = t - (log.compose({name: e}) - e)
        if nxt == e:
            break
        e = nxt
    return e


def inverse_series(curve: WeierstrassCurve, order: int, name: str = "t") -> TruncSeries:
    """Formal inverse ``i(t) = t / (-1 + a1 t + a3 w(t))``."""
    t = _t(order, name)
    return t / (-1 + curve.a1 * t + curve.a3 * w_series(curve, order, name))


def group_law(curve: WeierstrassCurve, order: int, names: Sequence[str] = ("t1", "t2")) -> TruncSeries:
    """``F(t1, t2)``: the third intersection of the chord, reflected by the formal inverse."""
    n1, n2 = names
    vars_ = (n1, n2)
    z1 = TruncSeries.var(n1, vars_, order)
    z2 = TruncSeries.var(n2, vars_, order)
    w = w_series(curve, order + 2, "z")
    w1 = w.compose({"z": TruncSeries.var(n1, vars_, order)})
    # slope (w2 - w1)/(z2 - z1) from divided differences of monomials
    lam = TruncSeries(vars_, order)
    for (k,), c in w.terms.items():
        terms = {(j, k - 1 - j): c for j in range(k)}
        lam = lam + TruncSeries(vars_, order, terms)
    nu = w1 - lam * z1
    a1, a2, a3, a4, a6 = curve.coefficients
    lam2 = lam * lam
    # the chord meets the curve where A z^3 + B z^2 + ... = 0, so z1 + z2 + z3 = -B/A
    num = a1 * lam + a2 * nu + a3 * lam2 + 2 * a4 * lam * nu + 3 * a6 * lam2 * nu
    den = 1 + a2 * lam + a4 * lam2 + a6 * lam2 * lam
    z3 = -z1 - z2 - num / den
    inv = inverse_series(curve, order, "z")
    return inv.compose({"z": z3})


@dataclass
class FormalLogPair:
    log: TruncSeries
    exp: TruncSeries

    def check(self) -> tuple[bool, bool]:
        name = self.log.vars[0]
        t = _t(self.log.order, name)
        return self.log.compose({name: self.exp}) == t, self.exp.compose({name: self.log}) == t


def formal_log_pair(curve: WeierstrassCurve, order: int = DEFAULT_ORDER) -> FormalLogPair:
    log = formal_log(curve, order)
    return FormalLogPair(log, formal_exp(log))


def functional_equation_residual(curve: WeierstrassCurve, order: int) -> TruncSeries:
    """``log F(t1, t2) - log t1 - log t2``; zero at the truncation for a correct group law."""
    log = formal_log(curve, order)
    F = group_law(curve, order)
    vars_ = F.vars
    l1 = log.compose({"t": TruncSeries.var(vars_[0], vars_, order)})
    l2 = log.compose({"t": TruncSeries.var(vars_[1], vars_, order)})
    return log.compose({"t": F}) - l1 - l2


def series_coefficients_text(s: TruncSeries) -> list[str]:
    return [str(c) for c in s.coefficients()]
