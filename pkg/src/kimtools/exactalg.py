"""Exact arithmetic substrate.

Contents:

- sparse multivariate polynomials and rational functions over Q
- truncated multivariate power series
- differential forms and finitely presented spaces of them
- jet expansion at rational base points

All coefficients are :class:`fractions.Fraction`.  Monomials are exponent
tuples aligned with a declared variable order; the canonical monomial order
is graded lexicographic on that order.
"""
from __future__ import annotations

import re
from fractions import Fraction
from functools import reduce
from itertools import combinations
from typing import Any, Iterable, Mapping, Sequence

from .errors import OutOfSpace, PoleAtBase
from .linalg import Echelon

Exponent = tuple[int, ...]


def grlex_key(e: Exponent) -> tuple:
    return (sum(e), e)


def _frac(c: Any) -> Fraction:
    return c if isinstance(c, Fraction) else Fraction(c)


def _merge_vars(a: tuple[str, ...], b: tuple[str, ...]) -> tuple[str, ...]:
    if a == b:
        return a
    return a + tuple(v for v in b if v not in a)


def _reembed(terms: Mapping[Exponent, Any], old: tuple[str, ...], new: tuple[str, ...]) -> dict:
    if old == new:
        return dict(terms)
    pos = [new.index(v) for v in old]
    out = {}
    for e, c in terms.items():
        ne = [0] * len(new)
        for i, a in zip(pos, e):
            ne[i] = a
        out[tuple(ne)] = c
    return out


def _format_coef(c: Fraction) -> str:
    return str(c)


def _format_monomial(vars_: Sequence[str], e: Exponent) -> str:
    parts = []
    for v, a in zip(vars_, e):
        if a == 1:
            parts.append(v)
        elif a > 1:
            parts.append(f"{v}^{a}")
    return "*".join(parts)


def _canonical_terms(vars_: Sequence[str], items: Iterable[tuple[Exponent, Fraction]]) -> str:
    out = []
    for e, c in items:
        mono = _format_monomial(vars_, e)
        out.append(_format_coef(c) if not mono else f"{_format_coef(c)} * {mono}")
    return " + ".join(out) if out else "0"


def _pretty_terms(vars_: Sequence[str], items: Iterable[tuple[Exponent, Fraction]]) -> str:
    s = ""
    for e, c in items:
        mono = _format_monomial(vars_, e)
        sign = "-" if c < 0 else "+"
        a = abs(c)
        if mono:
            body = mono if a == 1 else f"{a}*{mono}"
        else:
            body = str(a)
        if not s:
            s = body if sign == "+" else f"-{body}"
        else:
            s += f" {sign} {body}"
    return s or "0"


class Poly:
    """Sparse polynomial with rational coefficients.

    >>> z1, z2 = Poly.gens(["z1", "z2"])
    >>> str(z1 * (z2 - 1) - z2 * (z1 - 1))
    'z2 - z1'
    """

    __slots__ = ("vars", "terms")

    def __init__(self, vars_: Sequence[str], terms: Mapping[Exponent, Any] | None = None):
        self.vars = tuple(vars_)
        self.terms: dict[Exponent, Fraction] = {}
        for e, c in (terms or {}).items():
            if c:
                self.terms[tuple(e)] = _frac(c)

    @classmethod
    def _raw(cls, vars_: tuple[str, ...], terms: dict) -> "Poly":
        p = cls.__new__(cls)
        p.vars = vars_
        p.terms = terms
        return p

    @classmethod
    def const(cls, c: Any, vars_: Sequence[str] = ()) -> "Poly":
        vars_ = tuple(vars_)
        return cls(vars_, {(0,) * len(vars_): c})

    @classmethod
    def var(cls, name: str, vars_: Sequence[str]) -> "Poly":
        vars_ = tuple(vars_)
        e = tuple(int(v == name) for v in vars_)
        if name not in vars_:
            raise ValueError(f"unknown variable {name}")
        return cls(vars_, {e: 1})

    @classmethod
    def gens(cls, vars_: Sequence[str]) -> list["Poly"]:
        return [cls.var(v, vars_) for v in vars_]

    # -- structure -------------------------------------------------------
    def over(self, vars_: Sequence[str]) -> "Poly":
        vars_ = tuple(vars_)
        extra = [v for v, a in zip(self.vars, zip(*self.terms)) if v not in vars_ and any(a)]
        if extra:
            raise ValueError(f"variables {extra} not in target")
        keep = [i for i, v in enumerate(self.vars) if v in vars_]
        old = tuple(self.vars[i] for i in keep)
        terms = {tuple(e[i] for i in keep): c for e, c in self.terms.items()}
        return Poly._raw(vars_, _reembed(terms, old, vars_))

    def _coerce(self, other: Any) -> "Poly":
        if isinstance(other, Poly):
            return other
        if isinstance(other, (int, Fraction)):
            return Poly.const(other, self.vars)
        return NotImplemented

    def _align(self, other: "Poly") -> tuple["Poly", "Poly"]:
        if self.vars == other.vars:
            return self, other
        vs = _merge_vars(self.vars, other.vars)
        return self.over(vs), other.over(vs)

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(not any(e) for e in self.terms)

    def constant_term(self) -> Fraction:
        return self.terms.get((0,) * len(self.vars), Fraction(0))

    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=-1)

    def leading(self) -> tuple[Exponent, Fraction]:
        e = max(self.terms, key=grlex_key)
        return e, self.terms[e]

    def used_vars(self) -> list[str]:
        used = set()
        for e in self.terms:
            for v, a in zip(self.vars, e):
                if a:
                    used.add(v)
        return [v for v in self.vars if v in used]

    # -- arithmetic ------------------------------------------------------
    def __add__(self, other: Any) -> "Poly":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        a, b = self._align(other)
        t = dict(a.terms)
        for e, c in b.terms.items():
            s = t.get(e, 0) + c
            if s:
                t[e] = s
            else:
                t.pop(e, None)
        return Poly._raw(a.vars, t)

    __radd__ = __add__

    def __neg__(self) -> "Poly":
        return Poly._raw(self.vars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other: Any) -> "Poly":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other: Any) -> "Poly":
        return (-self) + other

    def __mul__(self, other: Any) -> "Poly":
        if isinstance(other, (int, Fraction)):
            if not other:
                return Poly._raw(self.vars, {})
            return Poly._raw(self.vars, {e: c * other for e, c in self.terms.items()})
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        a, b = self._align(other)
        t: dict[Exponent, Fraction] = {}
        for e1, c1 in a.terms.items():
            for e2, c2 in b.terms.items():
                e = tuple(x + y for x, y in zip(e1, e2))
                s = t.get(e, 0) + c1 * c2
                if s:
                    t[e] = s
                else:
                    t.pop(e, None)
        return Poly._raw(a.vars, t)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Poly":
        result = Poly.const(1, self.vars)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __truediv__(self, other: Any) -> Any:
        if isinstance(other, (int, Fraction)):
            return self * (1 / _frac(other))
        return RationalFunction(self, other)

    def __rtruediv__(self, other: Any) -> "RationalFunction":
        return RationalFunction(Poly.const(other, self.vars), self)

    def __eq__(self, other: Any) -> bool:
        if isinstance(other, (int, Fraction)):
            other = Poly.const(other, self.vars)
        if isinstance(other, RationalFunction):
            return other == self
        if not isinstance(other, Poly):
            return NotImplemented
        a, b = self._align(other)
        return a.terms == b.terms

    def __hash__(self) -> int:
        return hash(self.to_text())

    def diff(self, name: str) -> "Poly":
        if name not in self.vars:
            return Poly._raw(self.vars, {})
        i = self.vars.index(name)
        t = {}
        for e, c in self.terms.items():
            if e[i]:
                ne = e[:i] + (e[i] - 1,) + e[i + 1:]
                t[ne] = c * e[i]
        return Poly._raw(self.vars, t)

    def evaluate(self, point: Mapping[str, Any]) -> Any:
        """Substitute numbers or other ring elements for variables."""
        result: Any = 0
        powers: dict[tuple[str, int], Any] = {}

        def pw(v: str, a: int) -> Any:
            key = (v, a)
            if key not in powers:
                powers[key] = point[v] if a == 1 else pw(v, a - 1) * point[v]
            return powers[key]

        for e, c in sorted(self.terms.items(), key=lambda kv: grlex_key(kv[0])):
            term: Any = c
            for v, a in zip(self.vars, e):
                if a:
                    term = term * pw(v, a) if v in point else None
                    if term is None:
                        raise KeyError(v)
            result = result + term
        return result

    def exact_div(self, other: "Poly") -> "Poly | None":
        """Quotient when ``other`` divides ``self`` exactly, else None."""
        a, b = self._align(other)
        if b.is_zero():
            raise ZeroDivisionError("division by zero polynomial")
        lb, cb = b.leading()
        r = a
        q: dict[Exponent, Fraction] = {}
        while r.terms:
            lr, cr = r.leading()
            if any(x < y for x, y in zip(lr, lb)):
                return None
            e = tuple(x - y for x, y in zip(lr, lb))
            c = cr / cb
            q[e] = q.get(e, 0) + c
            r = r - Poly._raw(a.vars, {e: c}) * b
        return Poly(a.vars, q)

    def content_normalized(self) -> tuple[Fraction, "Poly"]:
        """Return ``(c, p)`` with ``self = c * p``, p primitive over Z with positive leading coefficient."""
        if not self.terms:
            return Fraction(0), self
        from math import gcd

        den = reduce(lambda x, y: x * y // gcd(x, y), (c.denominator for c in self.terms.values()), 1)
        nums = [int(c * den) for c in self.terms.values()]
        g = reduce(gcd, nums, 0)
        _, lc = self.leading()
        sign = 1 if lc > 0 else -1
        scale = Fraction(sign * g, den)
        return scale, Poly._raw(self.vars, {e: c / scale for e, c in self.terms.items()})

    # -- text ------------------------------------------------------------
    def sorted_terms(self, descending: bool = True) -> list[tuple[Exponent, Fraction]]:
        return sorted(self.terms.items(), key=lambda kv: grlex_key(kv[0]), reverse=descending)

    def to_text(self) -> str:
        """Canonical serialization: ``coef * z1^a1*z2^a2`` terms in descending grlex order."""
        return _canonical_terms(self.vars, self.sorted_terms())

    @classmethod
    def parse(cls, text: str, vars_: Sequence[str]) -> "Poly":
        r = parse_expression(text, vars_)
        if not r.den.is_constant():
            raise ValueError(f"not a polynomial: {text}")
        return r.num * (1 / r.den.constant_term())

    def __str__(self) -> str:
        return _pretty_terms(self.vars, self.sorted_terms())

    def __repr__(self) -> str:
        return f"Poly({self.vars}, {self.to_text()!r})"


# ---------------------------------------------------------------------------
# gcd of polynomials


def _univariate_gcd(a: Poly, b: Poly, i: int) -> Poly:
    def coeffs(p: Poly) -> list[Fraction]:
        d = max(e[i] for e in p.terms)
        out = [Fraction(0)] * (d + 1)
        for e, c in p.terms.items():
            out[e[i]] = c
        return out

    def trim(x: list[Fraction]) -> list[Fraction]:
        while x and x[-1] == 0:
            x.pop()
        return x

    x, y = trim(coeffs(a)), trim(coeffs(b))
    while y:
        while len(x) >= len(y) and x:
            f = x[-1] / y[-1]
            shift = len(x) - len(y)
            for k in range(len(y)):
                x[shift + k] -= f * y[k]
            trim(x)
        x, y = y, x
    lead = x[-1]
    n = len(a.vars)
    terms = {}
    for k, c in enumerate(x):
        if c:
            e = [0] * n
            e[i] = k
            terms[tuple(e)] = c / lead
    return Poly._raw(a.vars, terms)


def poly_gcd(a: Poly, b: Poly) -> Poly:
    """Monic (grlex) greatest common divisor.

    Univariate inputs use the Euclidean algorithm; genuinely multivariate
    inputs are delegated to sympy.
    """
    a, b = a._align(b)
    one = Poly.const(1, a.vars)
    if a.is_zero():
        return b * (1 / b.leading()[1]) if not b.is_zero() else one
    if b.is_zero():
        return a * (1 / a.leading()[1])
    if a.is_constant() or b.is_constant():
        return one
    if b.exact_div(a) is not None:
        return a * (1 / a.leading()[1])
    if a.exact_div(b) is not None:
        return b * (1 / b.leading()[1])
    used = set(a.used_vars()) | set(b.used_vars())
    if len(used) == 1:
        return _univariate_gcd(a, b, a.vars.index(used.pop()))
    return _sympy_gcd(a, b)


def _sympy_gcd(a: Poly, b: Poly) -> Poly:
    import sympy

    syms = sympy.symbols(list(a.vars)) if len(a.vars) > 1 else [sympy.Symbol(a.vars[0])]
    pa = sympy.Poly.from_dict({e: sympy.Rational(c.numerator, c.denominator) for e, c in a.terms.items()}, *syms)
    pb = sympy.Poly.from_dict({e: sympy.Rational(c.numerator, c.denominator) for e, c in b.terms.items()}, *syms)
    g = sympy.gcd(pa, pb)
    terms = {tuple(int(x) for x in e): Fraction(int(c.p), int(c.q)) for e, c in g.as_dict().items()}
    p = Poly(a.vars, terms)
    return p * (1 / p.leading()[1])


# ---------------------------------------------------------------------------


class RationalFunction:
    """Quotient of polynomials kept in lowest terms with a grlex-monic denominator."""

    __slots__ = ("num", "den")

    def __init__(self, num: Poly | Any, den: Poly | Any = 1, _reduced: bool = False):
        if not isinstance(num, Poly):
            vars_ = den.vars if isinstance(den, Poly) else ()
            num = Poly.const(num, vars_)
        if not isinstance(den, Poly):
            den = Poly.const(den, num.vars)
        num, den = num._align(den)
        if den.is_zero():
            raise ZeroDivisionError("zero denominator")
        if not _reduced and not den.is_constant() and not num.is_zero():
            g = poly_gcd(num, den)
            if not g.is_constant():
                num = num.exact_div(g)
                den = den.exact_div(g)
        if num.is_zero():
            den = Poly.const(1, num.vars)
        lc = den.leading()[1]
        if lc != 1:
            num = num * (1 / lc)
            den = den * (1 / lc)
        self.num = num
        self.den = den

    @property
    def vars(self) -> tuple[str, ...]:
        return self.num.vars

    @classmethod
    def coerce(cls, x: Any, vars_: Sequence[str] = ()) -> "RationalFunction":
        if isinstance(x, RationalFunction):
            return x
        if isinstance(x, Poly):
            return cls(x, Poly.const(1, x.vars), _reduced=True)
        if not isinstance(x, (int, Fraction)):
            raise TypeError(f"cannot view {type(x).__name__} as a rational function")
        return cls(Poly.const(x, vars_), Poly.const(1, vars_), _reduced=True)

    def over(self, vars_: Sequence[str]) -> "RationalFunction":
        return RationalFunction(self.num.over(vars_), self.den.over(vars_), _reduced=True)

    def is_polynomial(self) -> bool:
        return self.den.is_constant()

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_constant(self) -> bool:
        return self.num.is_constant() and self.den.is_constant()

    def __add__(self, other: Any) -> "RationalFunction":
        if not isinstance(other, (int, Fraction, Poly, RationalFunction)):
            return NotImplemented
        o = RationalFunction.coerce(other, self.vars)
        a, b = self.num, self.den
        c, d = o.num, o.den
        if b == d:
            return RationalFunction(a + c, b)
        if b.is_constant() and d.is_constant():
            return RationalFunction(a * d + c * b, b * d, _reduced=True)
        g = poly_gcd(b, d)
        if g.is_constant():
            num = a * d + c * b
            return RationalFunction(num, b * d)
        bg, dg = b.exact_div(g), d.exact_div(g)
        return RationalFunction(a * dg + c * bg, b * dg)

    __radd__ = __add__

    def __neg__(self) -> "RationalFunction":
        return RationalFunction(-self.num, self.den, _reduced=True)

    def __sub__(self, other: Any) -> "RationalFunction":
        if not isinstance(other, (int, Fraction, Poly, RationalFunction)):
            return NotImplemented
        return self + (-RationalFunction.coerce(other, self.vars))

    def __rsub__(self, other: Any) -> "RationalFunction":
        return (-self) + other

    def __mul__(self, other: Any) -> Any:
        if isinstance(other, (int, Fraction)):
            return RationalFunction(self.num * other, self.den, _reduced=True)
        if not isinstance(other, (Poly, RationalFunction)):
            return NotImplemented
        o = RationalFunction.coerce(other, self.vars)
        if self.den.is_constant() and o.den.is_constant():
            return RationalFunction(self.num * o.num, self.den * o.den, _reduced=True)
        g1 = poly_gcd(self.num, o.den)
        g2 = poly_gcd(o.num, self.den)
        n1 = self.num.exact_div(g1) if not g1.is_constant() else self.num
        d2 = o.den.exact_div(g1) if not g1.is_constant() else o.den
        n2 = o.num.exact_div(g2) if not g2.is_constant() else o.num
        d1 = self.den.exact_div(g2) if not g2.is_constant() else self.den
        return RationalFunction(n1 * n2, d1 * d2, _reduced=True)

    __rmul__ = __mul__

    def inverse(self) -> "RationalFunction":
        if self.num.is_zero():
            raise ZeroDivisionError("inverse of zero")
        return RationalFunction(self.den, self.num, _reduced=True)

    def __truediv__(self, other: Any) -> "RationalFunction":
        if isinstance(other, (int, Fraction)):
            return self * (1 / _frac(other))
        return self * RationalFunction.coerce(other, self.vars).inverse()

    def __rtruediv__(self, other: Any) -> "RationalFunction":
        return RationalFunction.coerce(other, self.vars) * self.inverse()

    def __pow__(self, k: int) -> "RationalFunction":
        if k < 0:
            return self.inverse() ** (-k)
        return RationalFunction(self.num ** k, self.den ** k, _reduced=True)

    def __eq__(self, other: Any) -> bool:
        if isinstance(other, (int, Fraction, Poly)):
            other = RationalFunction.coerce(other, self.vars)
        if not isinstance(other, RationalFunction):
            return NotImplemented
        # cross-multiplied identity decides equality
        return (self.num * other.den) == (other.num * self.den)

    def __hash__(self) -> int:
        return hash(self.to_text())

    def diff(self, name: str) -> "RationalFunction":
        n, d = self.num, self.den
        return RationalFunction(n.diff(name) * d - n * d.diff(name), d * d)

    def evaluate(self, point: Mapping[str, Any]) -> Any:
        den = self.den.evaluate(point)
        if isinstance(den, (int, Fraction)):
            if den == 0:
                raise ZeroDivisionError("pole")
            return self.num.evaluate(point) * (1 / _frac(den))
        if isinstance(den, TruncSeries):
            return self.num.evaluate(point) * den.inverse()
        return self.num.evaluate(point) / den

    def to_text(self) -> str:
        if self.den.is_constant():
            return self.num.to_text()
        return f"({self.num.to_text()}) / ({self.den.to_text()})"

    def __str__(self) -> str:
        if self.den.is_constant():
            return str(self.num)
        n = str(self.num)
        if len(self.num.terms) > 1:
            n = f"({n})"
        d = str(self.den)
        if len(self.den.terms) > 1 or "*" in d:
            d = f"({d})"
        return f"{n}/{d}"

    def __repr__(self) -> str:
        return f"RationalFunction({self})"


# ---------------------------------------------------------------------------
# expression parser


_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z_0-9]*)|(\*\*|[-+*/^()]))")


def parse_expression(text: str, vars_: Sequence[str]) -> RationalFunction:
    """Parse ``+ - * / ^`` expressions with parentheses into a rational function."""
    vars_ = tuple(vars_)
    tokens: list[str] = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ValueError(f"cannot parse {text!r} at {pos}")
        tokens.append(m.group(1) or m.group(2) or ("^" if m.group(3) == "**" else m.group(3)))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    i = 0

    def peek() -> str | None:
        return tokens[i] if i < len(tokens) else None

    def take() -> str:
        nonlocal i
        t = tokens[i]
        i += 1
        return t

    def expr() -> RationalFunction:
        result = term()
        while peek() in ("+", "-"):
            op = take()
            rhs = term()
            result = result + rhs if op == "+" else result - rhs
        return result

    def term() -> RationalFunction:
        result = unary()
        while peek() in ("*", "/"):
            op = take()
            rhs = unary()
            result = result * rhs if op == "*" else result / rhs
        return result

    def unary() -> RationalFunction:
        if peek() == "-":
            take()
            return -unary()
        if peek() == "+":
            take()
            return unary()
        return power()

    def power() -> RationalFunction:
        base = atom()
        if peek() == "^":
            take()
            neg = False
            if peek() == "-":
                take()
                neg = True
            k = int(take())
            return base ** (-k if neg else k)
        return base

    def atom() -> RationalFunction:
        t = take()
        if t == "(":
            r = expr()
            if take() != ")":
                raise ValueError("unbalanced parentheses")
            return r
        if t.isdigit():
            return RationalFunction.coerce(Fraction(int(t)), vars_)
        if t in vars_:
            return RationalFunction.coerce(Poly.var(t, vars_))
        raise ValueError(f"unknown symbol {t!r}")

    if not tokens:
        raise ValueError("empty expression")
    r = expr()
    if i != len(tokens):
        raise ValueError(f"trailing input in {text!r}")
    return r


# ---------------------------------------------------------------------------


class TruncSeries:
    """Multivariate power series truncated at total degree ``order``.

    Terms of total degree ``>= order`` are never stored.  Binary operations
    close at the smaller of the two orders.

    >>> t = TruncSeries.var("t", ["t"], 4)
    >>> str((1 + 2 * t).inverse())
    '1 - 2*t + 4*t^2 - 8*t^3 + O(4)'
    """

    __slots__ = ("vars", "order", "terms")

    def __init__(self, vars_: Sequence[str], order: int, terms: Mapping[Exponent, Any] | None = None):
        self.vars = tuple(vars_)
        self.order = order
        self.terms: dict[Exponent, Fraction] = {}
        for e, c in (terms or {}).items():
            if c and sum(e) < order:
                self.terms[tuple(e)] = _frac(c)

    @classmethod
    def _raw(cls, vars_: tuple[str, ...], order: int, terms: dict) -> "TruncSeries":
        s = cls.__new__(cls)
        s.vars = vars_
        s.order = order
        s.terms = terms
        return s

    @classmethod
    def const(cls, c: Any, vars_: Sequence[str], order: int) -> "TruncSeries":
        vars_ = tuple(vars_)
        return cls(vars_, order, {(0,) * len(vars_): c})

    @classmethod
    def var(cls, name: str, vars_: Sequence[str], order: int) -> "TruncSeries":
        vars_ = tuple(vars_)
        return cls(vars_, order, {tuple(int(v == name) for v in vars_): 1})

    @classmethod
    def from_poly(cls, p: Poly, order: int) -> "TruncSeries":
        return cls(p.vars, order, p.terms)

    def _coerce(self, other: Any) -> "TruncSeries":
        if isinstance(other, TruncSeries):
            return other
        if isinstance(other, (int, Fraction)):
            return TruncSeries.const(other, self.vars, self.order)
        if isinstance(other, Poly):
            return TruncSeries(other.vars, self.order, other.terms)
        return NotImplemented

    def over(self, vars_: Sequence[str]) -> "TruncSeries":
        vars_ = tuple(vars_)
        for e in self.terms:
            for v, a in zip(self.vars, e):
                if a and v not in vars_:
                    raise ValueError(f"variable {v} not in target")
        keep = [i for i, v in enumerate(self.vars) if v in vars_]
        old = tuple(self.vars[i] for i in keep)
        terms = {tuple(e[i] for i in keep): c for e, c in self.terms.items()}
        return TruncSeries._raw(vars_, self.order, _reembed(terms, old, vars_))

    def _align(self, other: "TruncSeries") -> tuple["TruncSeries", "TruncSeries"]:
        if self.vars == other.vars:
            return self, other
        vs = _merge_vars(self.vars, other.vars)
        return self.over(vs), other.over(vs)

    def truncate(self, order: int) -> "TruncSeries":
        order = min(order, self.order)
        return TruncSeries._raw(self.vars, order, {e: c for e, c in self.terms.items() if sum(e) < order})

    def is_zero(self) -> bool:
        return not self.terms

    def constant(self) -> Fraction:
        return self.terms.get((0,) * len(self.vars), Fraction(0))

    def valuation(self) -> int:
        return min((sum(e) for e in self.terms), default=self.order)

    def __add__(self, other: Any) -> "TruncSeries":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        a, b = self._align(other)
        n = min(a.order, b.order)
        t = {e: c for e, c in a.terms.items() if sum(e) < n} if a.order > n else dict(a.terms)
        for e, c in b.terms.items():
            if sum(e) >= n:
                continue
            s = t.get(e, 0) + c
            if s:
                t[e] = s
            else:
                t.pop(e, None)
        return TruncSeries._raw(a.vars, n, t)

    __radd__ = __add__

    def __neg__(self) -> "TruncSeries":
        return TruncSeries._raw(self.vars, self.order, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other: Any) -> "TruncSeries":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other: Any) -> "TruncSeries":
        return (-self) + other

    def __mul__(self, other: Any) -> "TruncSeries":
        if isinstance(other, (int, Fraction)):
            if not other:
                return TruncSeries._raw(self.vars, self.order, {})
            return TruncSeries._raw(self.vars, self.order, {e: c * other for e, c in self.terms.items()})
        if isinstance(other, RationalFunction):
            other = other.evaluate({v: TruncSeries.var(v, self.vars, self.order) for v in other.vars})
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        a, b = self._align(other)
        n = min(a.order, b.order)
        t: dict[Exponent, Fraction] = {}
        bt = [(e, c, sum(e)) for e, c in b.terms.items()]
        for e1, c1 in a.terms.items():
            d1 = sum(e1)
            if d1 >= n:
                continue
            for e2, c2, d2 in bt:
                if d1 + d2 >= n:
                    continue
                e = tuple(x + y for x, y in zip(e1, e2))
                s = t.get(e, 0) + c1 * c2
                if s:
                    t[e] = s
                else:
                    t.pop(e, None)
        return TruncSeries._raw(a.vars, n, t)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "TruncSeries":
        if k < 0:
            return self.inverse() ** (-k)
        result = TruncSeries.const(1, self.vars, self.order)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def inverse(self) -> "TruncSeries":
        c0 = self.constant()
        if c0 == 0:
            raise ZeroDivisionError("series with zero constant term is not invertible")
        u = 1 - self * (1 / c0)
        result = TruncSeries.const(1, self.vars, self.order)
        power = result
        for _ in range(1, self.order):
            power = power * u
            if power.is_zero():
                break
            result = result + power
        return result * (1 / c0)

    def __truediv__(self, other: Any) -> "TruncSeries":
        if isinstance(other, (int, Fraction)):
            return self * (1 / _frac(other))
        other = self._coerce(other)
        return self * other.inverse()

    def __rtruediv__(self, other: Any) -> "TruncSeries":
        return self.inverse() * other

    def __eq__(self, other: Any) -> bool:
        if isinstance(other, (int, Fraction)):
            if other == 0:
                return not self.terms
            other = TruncSeries.const(other, self.vars, self.order)
        if isinstance(other, Poly):
            other = TruncSeries(other.vars, self.order, other.terms)
        if not isinstance(other, TruncSeries):
            return NotImplemented
        a, b = self._align(other)
        n = min(a.order, b.order)
        return a.truncate(n).terms == b.truncate(n).terms

    def __hash__(self) -> int:
        return hash(self.to_text())

    def diff(self, name: str) -> "TruncSeries":
        """Partial derivative; the result is exact only below ``order - 1``."""
        n = max(self.order - 1, 0)
        if name not in self.vars:
            return TruncSeries._raw(self.vars, n, {})
        i = self.vars.index(name)
        t = {}
        for e, c in self.terms.items():
            if e[i] and sum(e) - 1 < n:
                t[e[:i] + (e[i] - 1,) + e[i + 1:]] = c * e[i]
        return TruncSeries._raw(self.vars, n, t)

    def integrate(self, name: str) -> "TruncSeries":
        """Antiderivative in one variable vanishing on ``name = 0``."""
        i = self.vars.index(name)
        t = {}
        for e, c in self.terms.items():
            t[e[:i] + (e[i] + 1,) + e[i + 1:]] = c / (e[i] + 1)
        return TruncSeries._raw(self.vars, self.order + 1, t)

    def compose(self, subs: Mapping[str, "TruncSeries"]) -> "TruncSeries":
        """Substitute series with zero constant term for the variables."""
        for s in subs.values():
            if isinstance(s, TruncSeries) and s.constant() != 0:
                raise ValueError("substituted series must have zero constant term")
        poly = Poly._raw(self.vars, dict(self.terms))
        result = poly.evaluate(subs)
        if isinstance(result, (int, Fraction)):
            some = next(iter(subs.values()))
            result = TruncSeries.const(result, some.vars, some.order)
        return result.truncate(self.order) if result.order > self.order and len(self.vars) == 1 else result

    def coefficient(self, e: Sequence[int]) -> Fraction:
        return self.terms.get(tuple(e), Fraction(0))

    def coefficients(self) -> list[Fraction]:
        """Dense coefficient list for a univariate series."""
        if len(self.vars) != 1:
            raise ValueError("coefficients() needs a univariate series")
        return [self.terms.get((k,), Fraction(0)) for k in range(self.order)]

    def sorted_terms(self) -> list[tuple[Exponent, Fraction]]:
        return sorted(self.terms.items(), key=lambda kv: grlex_key(kv[0]))

    def to_text(self) -> str:
        """Canonical text: ascending grlex terms, then ``O(N)`` for the truncation."""
        body = _canonical_terms(self.vars, self.sorted_terms())
        return f"{body} + O({self.order})" if self.terms else f"O({self.order})"

    @classmethod
    def parse(cls, text: str, vars_: Sequence[str]) -> "TruncSeries":
        m = re.search(r"(?:\+\s*)?O\((\d+)\)\s*$", text)
        if not m:
            raise ValueError(f"series text must end with O(N): {text!r}")
        order = int(m.group(1))
        body = text[: m.start()].strip()
        if not body:
            return cls(vars_, order)
        p = Poly.parse(body, vars_)
        return cls(vars_, order, p.terms)

    def __str__(self) -> str:
        body = _pretty_terms(self.vars, self.sorted_terms())
        return f"{body} + O({self.order})" if self.terms else f"O({self.order})"

    def __repr__(self) -> str:
        return f"TruncSeries({self.vars}, {self.to_text()!r})"


# ---------------------------------------------------------------------------
# differential forms


def _diff_coef(c: Any, name: str) -> Any:
    if isinstance(c, (int, Fraction)):
        return 0
    return c.diff(name)


def _is_zero_coef(c: Any) -> bool:
    return c == 0


def _sorted_sign(idx: Sequence[int]) -> tuple[int, tuple[int, ...]] | None:
    """Sign of the permutation sorting ``idx``; None on repeated indices."""
    if len(set(idx)) != len(idx):
        return None
    lst = list(idx)
    sign = 1
    for i in range(len(lst)):
        for j in range(len(lst) - 1 - i):
            if lst[j] > lst[j + 1]:
                lst[j], lst[j + 1] = lst[j + 1], lst[j]
                sign = -sign
    return sign, tuple(lst)


class Form:
    """A differential form written in coordinates.

    ``comps`` maps a strictly increasing tuple of coordinate indices to its
    coefficient, so ``{(0,): 1/z}`` on coordinates ``("z",)`` is ``dz/z``.
    Coefficients may be any supported 0-form, truncated series included.
    """

    __slots__ = ("coords", "degree", "comps", "space")

    def __init__(self, coords: Sequence[str], degree: int, comps: Mapping[tuple[int, ...], Any] | None = None,
                 space: "FormSpace | None" = None):
        self.coords = tuple(coords)
        self.degree = degree
        self.comps = {}
        for k, c in (comps or {}).items():
            if not _is_zero_coef(c):
                self.comps[tuple(k)] = c
        self.space = space

    @classmethod
    def function(cls, f: Any, coords: Sequence[str], space: "FormSpace | None" = None) -> "Form":
        return cls(coords, 0, {(): f}, space)

    @classmethod
    def one_form(cls, coeffs: Mapping[str, Any], coords: Sequence[str], space: "FormSpace | None" = None) -> "Form":
        coords = tuple(coords)
        return cls(coords, 1, {(coords.index(v),): c for v, c in coeffs.items()}, space)

    def is_zero(self) -> bool:
        return not self.comps

    def coefficient(self, *names: str) -> Any:
        idx = tuple(self.coords.index(n) for n in names)
        return self.comps.get(idx, 0)

    def __add__(self, other: "Form") -> "Form":
        if isinstance(other, int) and other == 0:
            return self
        if other.degree != self.degree or other.coords != self.coords:
            raise ValueError("forms of different degree or chart")
        comps = dict(self.comps)
        for k, c in other.comps.items():
            comps[k] = comps[k] + c if k in comps else c
        return Form(self.coords, self.degree, comps, self.space or other.space)

    __radd__ = __add__

    def __neg__(self) -> "Form":
        return Form(self.coords, self.degree, {k: -c for k, c in self.comps.items()}, self.space)

    def __sub__(self, other: "Form") -> "Form":
        return self + (-other)

    def scale(self, f: Any) -> "Form":
        """Multiply by a 0-form coefficient."""
        return Form(self.coords, self.degree, {k: f * c for k, c in self.comps.items()}, self.space)

    def __mul__(self, f: Any) -> "Form":
        return self.scale(f)

    __rmul__ = __mul__

    def map_coefficients(self, fn) -> "Form":
        return Form(self.coords, self.degree, {k: fn(c) for k, c in self.comps.items()}, self.space)

    def __eq__(self, other: Any) -> bool:
        if isinstance(other, int) and other == 0:
            return self.is_zero()
        if not isinstance(other, Form):
            return NotImplemented
        return (self - other).is_zero()

    def __hash__(self) -> int:
        return hash(str(self))

    def __str__(self) -> str:
        if self.degree == 0:
            return str(self.comps.get((), 0))
        if not self.comps:
            return "0"
        parts = []
        for k in sorted(self.comps):
            diff = "^".join(f"d{self.coords[i]}" for i in k)
            parts.append(f"({self.comps[k]}) {diff}")
        return " + ".join(parts)

    __repr__ = __str__


def exterior_d(form: Form) -> Form:
    """Coordinate exterior derivative, without any span check."""
    comps: dict[tuple[int, ...], Any] = {}
    for k, c in form.comps.items():
        for i, v in enumerate(form.coords):
            dc = _diff_coef(c, v)
            if _is_zero_coef(dc):
                continue
            s = _sorted_sign((i,) + k)
            if s is None:
                continue
            sign, key = s
            term = dc if sign == 1 else -dc
            comps[key] = comps[key] + term if key in comps else term
    return Form(form.coords, form.degree + 1, comps, form.space)


def wedge_forms(a: Form, b: Form) -> Form:
    """Coordinate wedge product, without any span check."""
    if a.coords != b.coords:
        raise ValueError("forms live on different charts")
    comps: dict[tuple[int, ...], Any] = {}
    for ka, ca in a.comps.items():
        for kb, cb in b.comps.items():
            s = _sorted_sign(ka + kb)
            if s is None:
                continue
            sign, key = s
            term = ca * cb if sign == 1 else -(ca * cb)
            comps[key] = comps[key] + term if key in comps else term
    return Form(a.coords, a.degree + b.degree, comps, a.space or b.space)


def d(form: Form) -> Form:
    """Exterior derivative.

    When the form is attached to a :class:`FormSpace` the result must lie in
    the declared span of the next degree, otherwise ``OutOfSpace`` is raised.
    """
    if form.degree > 1 and form.space is not None:
        raise OutOfSpace("d is only declared on forms of degree at most one")
    out = exterior_d(form)
    if form.space is not None:
        form.space.coords(out)
    return out


def wedge(a: Form, b: Form) -> Form:
    """Wedge product of two 1-forms; checked against the declared span when present."""
    if a.degree != 1 or b.degree != 1:
        raise ValueError("wedge is declared on 1-forms")
    out = wedge_forms(a, b)
    space = a.space or b.space
    if space is not None:
        space.coords(out)
    return out


# ---------------------------------------------------------------------------


class FormSpace:
    """A finitely presented space of global forms on a chart.

    Atoms are named forms of degree at most two, each with an explicit
    coordinate expression.  The exterior derivative and wedge tables
    are computed on construction by exact linear algebra over Q; an entry is
    None when the result leaves the declared span.  Construction checks that
    the atoms of each degree are Q-linearly independent, that ``d∘d = 0`` and
    that the wedge table is alternating.
    """

    def __init__(self, coords: Sequence[str], functions: Mapping[str, Any] | None = None,
                 one_forms: Mapping[str, Form] | None = None, two_forms: Mapping[str, Form] | None = None):
        self.chart = tuple(coords)
        self.atoms: dict[int, dict[str, Form]] = {
            0: {n: Form.function(RationalFunction.coerce(f, self.chart), self.chart) for n, f in (functions or {}).items()},
            1: {n: Form(self.chart, 1, f.comps) for n, f in (one_forms or {}).items()},
            2: {n: Form(self.chart, 2, f.comps) for n, f in (two_forms or {}).items()},
        }
        self._bases = {k: self._build_basis(k) for k in (0, 1, 2)}
        self.function_d_table = {n: self._try_coords(exterior_d(f)) for n, f in self.atoms[0].items()}
        self.d_table = {n: self._try_coords(exterior_d(f)) for n, f in self.atoms[1].items()}
        names = list(self.atoms[1])
        self.wedge_table: dict[tuple[str, str], dict[str, Fraction] | None] = {}
        for a in names:
            for b in names:
                self.wedge_table[(a, b)] = self._try_coords(wedge_forms(self.atoms[1][a], self.atoms[1][b]))
        self._validate()

    # -- linear algebra plumbing -----------------------------------------
    def _denominator(self, k: int) -> Poly:
        den = Poly.const(1, self.chart)
        for f in self.atoms[k].values():
            for c in f.comps.values():
                c = RationalFunction.coerce(c, self.chart)
                g = poly_gcd(den, c.den)
                den = den * c.den.exact_div(g)
        return den

    def _vectorize(self, form: Form, den: Poly) -> dict | None:
        vec = {}
        for key, c in form.comps.items():
            c = RationalFunction.coerce(c, self.chart)
            p = (den * c.num).exact_div(c.den)
            if p is None:
                return None
            for e, x in p.over(self.chart).terms.items():
                vec[(1, key, e)] = x
        return vec

    def _build_basis(self, k: int):
        den = self._denominator(k)
        ech = Echelon(key=lambda c: c)
        for idx, (name, f) in enumerate(self.atoms[k].items()):
            vec = self._vectorize(f, den)
            vec[(0, idx, ())] = Fraction(1)
            ech.add(vec)
        # a dependence among the atoms shows up as a row pivoting on a tag column
        for piv in ech.rows:
            if piv[0] == 0:
                raise ValueError(f"degree-{k} atoms are linearly dependent")
        return den, ech

    def _try_coords(self, form: Form) -> dict[str, Fraction] | None:
        try:
            return self.coords(form)
        except OutOfSpace:
            return None

    def coords(self, form: Form) -> dict[str, Fraction]:
        """Q-coordinates of ``form`` on the declared atoms of its degree."""
        k = form.degree
        if form.coords != self.chart:
            raise OutOfSpace("form lives on a different chart")
        if k not in self.atoms:
            if form.is_zero():
                return {}
            raise OutOfSpace(f"no declared forms of degree {k}")
        if form.is_zero():
            return {}
        den, ech = self._bases[k]
        vec = self._vectorize(form, den)
        if vec is None:
            raise OutOfSpace("denominator not covered by the declared atoms")
        red = ech.reduce(vec)
        if any(c[0] == 1 for c in red):
            raise OutOfSpace("form is not in the declared span")
        names = list(self.atoms[k])
        return {names[c[1]]: -x for c, x in sorted(red.items())}

    def contains(self, form: Form) -> bool:
        try:
            self.coords(form)
            return True
        except OutOfSpace:
            return False

    def form(self, coords: Mapping[str, Any], degree: int = 1) -> Form:
        out = Form(self.chart, degree, {}, self)
        for n, c in coords.items():
            if c:
                out = out + self.atoms[degree][n].scale(c)
        out.space = self
        return out

    def atom(self, name: str) -> Form:
        for k in (0, 1, 2):
            if name in self.atoms[k]:
                f = self.atoms[k][name]
                return Form(f.coords, f.degree, f.comps, self)
        raise KeyError(name)

    def names(self, degree: int) -> list[str]:
        return list(self.atoms[degree])

    # -- validation --------------------------------------------------------
    def _validate(self) -> None:
        for k in (0, 1):
            for f in self.atoms[k].values():
                if not exterior_d(exterior_d(f)).is_zero():
                    raise ValueError("d∘d does not vanish on a declared atom")
        for (a, b), w in self.wedge_table.items():
            rev = self.wedge_table[(b, a)]
            if (w is None) != (rev is None):
                raise ValueError("wedge table is not alternating")
            if w is not None and {n: -c for n, c in w.items()} != rev:
                raise ValueError("wedge table is not alternating")
            if a == b and w:
                raise ValueError("wedge table is not alternating")

    # -- derived subspaces ---------------------------------------------------
    def vector(self, coords: Mapping[str, Fraction], degree: int = 1) -> list[Fraction]:
        return [Fraction(coords.get(n, 0)) for n in self.atoms[degree]]

    def exact_forms(self) -> list[dict[str, Fraction]]:
        """Coordinates of d(f) for the function atoms whose derivative is declared."""
        return [c for c in self.function_d_table.values() if c is not None]

    def closed_forms(self) -> list[dict[str, Fraction]]:
        """Basis of the closed 1-forms in the declared span (echelon order)."""
        from .linalg import nullspace

        names = self.names(1)
        two = self.names(2)
        if any(v is None for v in self.d_table.values()):
            # derivative leaves the span: restrict to atoms whose d is declared
            names = [n for n in names if self.d_table[n] is not None]
        if not two:
            return [{n: Fraction(int(n == m)) for n in self.names(1)} for m in names]
        matrix = [[self.d_table[n].get(t, Fraction(0)) for n in names] for t in two]
        out = []
        for v in nullspace(matrix, len(names)):
            out.append({n: x for n, x in zip(names, v) if x})
        return out

    def primitive(self, form: Form) -> RationalFunction | None:
        """A function in the declared span with ``d f = form``, or None."""
        target = self.coords(form)
        names = [n for n, c in self.function_d_table.items() if c is not None]
        ech = Echelon(key=lambda c: c)
        ones = self.names(1)
        for i, n in enumerate(names):
            vec = {(1, ones.index(a)): x for a, x in self.function_d_table[n].items()}
            vec[(0, i)] = Fraction(1)
            ech.add(vec)
        red = ech.reduce({(1, ones.index(a)): x for a, x in target.items()})
        if any(c[0] == 1 for c in red):
            return None
        f: Any = RationalFunction.coerce(0, self.chart)
        for c, x in red.items():
            f = f + self.atoms[0][names[c[1]]].comps.get((), 0) * (-x)
        return f


# ---------------------------------------------------------------------------


def shifted_names(coords: Sequence[str]) -> tuple[str, ...]:
    """Default names ``t`` or ``t1, t2, ...`` for the shifted jet variables."""
    coords = tuple(coords)
    if len(coords) == 1:
        return ("t",)
    return tuple(f"t{i + 1}" for i in range(len(coords)))


def jet_expand(f: Any, base: Mapping[str, Any] | Sequence[Any], order: int,
               names: Sequence[str] | None = None, coords: Sequence[str] | None = None) -> Any:
    """Taylor expansion at a rational base point in ``t_i = z_i - base_i``.

    ``f`` may be a function or a :class:`Form`; forms
    are expanded coefficientwise and returned on the shifted coordinates.

    >>> z = Poly.var("z", ["z"])
    >>> str(jet_expand(1 / z, [Fraction(1, 2)], 4))
    '2 - 4*t + 8*t^2 - 16*t^3 + O(4)'
    """
    if isinstance(f, Form):
        chart = f.coords
    elif coords is not None:
        chart = tuple(coords)
    else:
        chart = f.vars
    if not isinstance(base, Mapping):
        base = dict(zip(chart, base))
    base = {v: _frac(base[v]) for v in chart}
    names = tuple(names) if names else shifted_names(chart)
    point = {v: TruncSeries(names, order, {tuple(int(j == i) for j in range(len(names))): 1,
                                            (0,) * len(names): base[v]})
             for i, v in enumerate(chart)}

    def expand(c: Any) -> TruncSeries:
        if isinstance(c, (int, Fraction)):
            return TruncSeries.const(c, names, order)
        if isinstance(c, Poly):
            c = RationalFunction.coerce(c)
        den = c.den.evaluate(point) if c.den.vars else TruncSeries.const(c.den.constant_term(), names, order)
        if isinstance(den, (int, Fraction)):
            den = TruncSeries.const(den, names, order)
        if den.constant() == 0:
            raise PoleAtBase(f"denominator {c.den} vanishes at the base point")
        num = c.num.evaluate(point) if c.num.vars else c.num.constant_term()
        if isinstance(num, (int, Fraction)):
            num = TruncSeries.const(num, names, order)
        return num * den.inverse()

    if isinstance(f, Form):
        return Form(names, f.degree, {k: expand(c) for k, c in f.comps.items()})
    return expand(f)
