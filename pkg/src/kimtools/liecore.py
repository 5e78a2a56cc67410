"""Graded nilpotent Lie algebras together with their enveloping algebras.

A Lie algebra is presented by ``m`` generators and a nilpotency class,
cut down by a homogeneous ideal (a named quotient or a user-supplied one).  The free
algebra is realized inside the free associative algebra through Lyndon
words with their standard bracketing; the quotient keeps, in each degree,
the Lyndon words that are not pivots of the ideal's echelon basis.

The truncated universal enveloping algebra is the free associative algebra
on words of length at most the class, modulo the two-sided ideal generated
by the associative images of the relations.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any, Callable, Iterable, Mapping, Sequence

from .errors import DegenerateSpec, NotLieElement, NotUnipotent, SpecMismatch, UnsupportedQuotient
from .linalg import Echelon, nullspace, rank

Word = tuple[int, ...]


# ---------------------------------------------------------------------------
# words


def lyndon_words(m: int, n: int) -> list[Word]:
    """All Lyndon words of length at most ``n`` over ``0..m-1`` (Duval), sorted by length then lex."""
    out: list[Word] = []
    if m < 1 or n < 1:
        return out
    w = [-1]
    while w:
        w[-1] += 1
        out.append(tuple(w))
        k = len(w)
        while len(w) < n:
            w.append(w[len(w) - k])
        while w and w[-1] == m - 1:
            w.pop()
    return sorted(out, key=lambda x: (len(x), x))


def is_lyndon(w: Word) -> bool:
    return all(w < w[i:] + w[:i] for i in range(1, len(w))) if len(w) > 1 else len(w) == 1


def standard_factorization(w: Word) -> tuple[Word, Word]:
    """Split a Lyndon word ``w = uv`` with ``v`` its longest proper Lyndon suffix."""
    for i in range(1, len(w)):
        if is_lyndon(w[i:]):
            return w[:i], w[i:]
    raise ValueError("letters have no standard factorization")


def _assoc_add(target: dict, poly: Mapping[Word, Any], scale: Any = 1) -> None:
    for w, c in poly.items():
        v = target.get(w, 0) + scale * c
        if v == 0:
            target.pop(w, None)
        else:
            target[w] = v


def assoc_commutator(a: Mapping[Word, Any], b: Mapping[Word, Any], max_len: int | None = None) -> dict:
    out: dict[Word, Any] = {}
    for u, x in a.items():
        for v, y in b.items():
            if max_len is not None and len(u) + len(v) > max_len:
                continue
            for w, s in ((u + v, 1), (v + u, -1)):
                c = out.get(w, 0) + s * x * y
                if c == 0:
                    out.pop(w, None)
                else:
                    out[w] = c
    return out


# ---------------------------------------------------------------------------
# specifications


@dataclass(frozen=True)
class LieAlgebraSpec:
    """Presentation data of a graded Lie algebra, with an optional involution.

    ``involution`` is a signed permutation in one-based notation:
    ``(3, 4, 1, 2)`` swaps two generator pairs, ``(-1, -2)`` negates both
    generators.
    """

    generators: int
    nilpotency_class: int
    quotient: str = "free"
    genus: int | None = None
    ideal: tuple[str, ...] = ()
    metabelian: bool = False
    involution: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        if self.generators < 1 or self.nilpotency_class < 1:
            raise ValueError("need at least one generator and class at least one")
        if self.quotient not in ("free", "metabelian", "surface", "ideal"):
            raise ValueError(f"unknown quotient mode {self.quotient!r}")
        if self.quotient == "metabelian" and not self.metabelian:
            object.__setattr__(self, "metabelian", True)
        if self.quotient == "surface":
            if self.genus is None or 2 * self.genus != self.generators:
                raise ValueError("surface mode needs generators = 2 * genus")
        if self.involution is not None:
            perm = self.involution
            if len(perm) != self.generators or sorted(abs(p) for p in perm) != list(range(1, self.generators + 1)):
                raise ValueError("involution must be a signed permutation of the generators")
            for i, p in enumerate(perm):
                back = perm[abs(p) - 1]
                if abs(back) != i + 1 or (p > 0) != (back > 0):
                    raise ValueError("involution does not square to the identity")

    @classmethod
    def from_json(cls, data: Mapping[str, Any] | str) -> "LieAlgebraSpec":
        if isinstance(data, str):
            data = json.loads(data)
        q = data.get("quotient", "free")
        kwargs: dict[str, Any] = {
            "generators": int(data["generators"]),
            "nilpotency_class": int(data["class"]),
            "metabelian": bool(data.get("metabelian", False)),
        }
        if isinstance(q, str):
            kwargs["quotient"] = q
        elif "surface" in q:
            kwargs["quotient"] = "surface"
            kwargs["genus"] = int(q["surface"])
        elif "ideal" in q:
            kwargs["quotient"] = "ideal"
            kwargs["ideal"] = tuple(q["ideal"])
        else:
            raise ValueError(f"unknown quotient {q!r}")
        if data.get("involution") is not None:
            kwargs["involution"] = tuple(int(x) for x in data["involution"])
        return cls(**kwargs)

    def to_json(self) -> dict:
        if self.quotient == "surface":
            q: Any = {"surface": self.genus}
        elif self.quotient == "ideal":
            q = {"ideal": list(self.ideal)}
        else:
            q = self.quotient
        out = {"generators": self.generators, "class": self.nilpotency_class, "quotient": q}
        if self.metabelian and self.quotient != "metabelian":
            out["metabelian"] = True
        if self.involution is not None:
            out["involution"] = list(self.involution)
        return out

    def with_class(self, n: int) -> "LieAlgebraSpec":
        return LieAlgebraSpec(self.generators, n, self.quotient, self.genus, self.ideal, self.metabelian, self.involution)


# ---------------------------------------------------------------------------
# bracket expression parser (for user ideals)


_BR_TOKEN = re.compile(r"\s*(\d+/\d+|\d+|x\d+|[\[\],+\-*()])")


def parse_bracket_expression(text: str, m: int) -> dict[Word, Fraction]:
    """Parse e.g. ``"[x1,[x1,x2]] - 2*[x3,x4]"`` into a free associative polynomial."""
    tokens = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        mt = _BR_TOKEN.match(text, pos)
        if not mt:
            raise ValueError(f"cannot parse bracket expression {text!r}")
        tokens.append(mt.group(1))
        pos = mt.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    i = 0

    def peek():
        return tokens[i] if i < len(tokens) else None

    def take():
        nonlocal i
        i += 1
        return tokens[i - 1]

    def expr() -> dict:
        out: dict = {}
        sign = 1
        if peek() == "-":
            take()
            sign = -1
        _assoc_add(out, term(), sign)
        while peek() in ("+", "-"):
            s = 1 if take() == "+" else -1
            _assoc_add(out, term(), s)
        return out

    def term() -> dict:
        coef = Fraction(1)
        tok = peek()
        if tok is not None and tok[0].isdigit():
            coef = Fraction(take())
            if peek() == "*":
                take()
        return {w: coef * c for w, c in atom().items()}

    def atom() -> dict:
        tok = take()
        if tok == "(":
            r = expr()
            if take() != ")":
                raise ValueError("unbalanced parentheses")
            return r
        if tok == "[":
            a = expr()
            if take() != ",":
                raise ValueError("bracket needs two entries")
            b = expr()
            if take() != "]":
                raise ValueError("unbalanced bracket")
            return assoc_commutator(a, b)
        if tok.startswith("x"):
            k = int(tok[1:])
            if not 1 <= k <= m:
                raise ValueError(f"generator {tok} out of range")
            return {(k - 1,): Fraction(1)}
        raise ValueError(f"unexpected token {tok!r}")

    out = expr()
    if i != len(tokens):
        raise ValueError(f"trailing input in {text!r}")
    return out


# ---------------------------------------------------------------------------


@dataclass
class HallBasis:
    """Ordered basis of a graded Lie algebra by Lyndon (Hall) words."""

    words: list[Word]
    degrees: list[int]
    slices: dict[int, range]
    labels: list[str]

    def sizes(self) -> list[int]:
        return [len(self.slices[k]) for k in sorted(self.slices)]


def word_label(w: Word) -> str:
    if len(w) == 1:
        return f"x{w[0] + 1}"
    u, v = standard_factorization(w)
    return f"[{word_label(u)},{word_label(v)}]"


class LieAlgebra:
    """A graded nilpotent Lie algebra with a fixed Hall basis."""

    def __init__(self, spec: LieAlgebraSpec):
        self.spec = spec
        self.m = spec.generators
        self.n = spec.nilpotency_class
        self._assoc: dict[Word, dict[Word, int]] = {}
        self.free_words = {k: [] for k in range(1, self.n + 1)}
        for w in lyndon_words(self.m, self.n):
            self.free_words[len(w)].append(w)
        self.ideal_echelons: dict[int, Echelon] = {}
        self._build_ideal()
        words: list[Word] = []
        slices = {}
        for k in range(1, self.n + 1):
            start = len(words)
            pivots = self.ideal_echelons[k].rows
            words.extend(w for w in self.free_words[k] if w not in pivots)
            slices[k] = range(start, len(words))
        self.words = words
        self.index = {w: i for i, w in enumerate(words)}
        self.degrees = [len(w) for w in words]
        self.slices = slices
        self.dim = len(words)
        self._brackets: dict[tuple[int, int], dict[int, Fraction]] = {}
        self._involution_images: dict[int, dict[int, Fraction]] | None = None

    # -- free level ---------------------------------------------------------
    def assoc_image(self, w: Word) -> dict[Word, int]:
        """Standard bracketing of a Lyndon word as an associative polynomial."""
        if w not in self._assoc:
            if len(w) == 1:
                self._assoc[w] = {w: 1}
            else:
                u, v = standard_factorization(w)
                self._assoc[w] = assoc_commutator(self.assoc_image(u), self.assoc_image(v))
        return self._assoc[w]

    def decompose_free(self, poly: Mapping[Word, Any]) -> dict[Word, Any]:
        """Lyndon coordinates of a Lie polynomial given in the associative algebra.

        The standard bracketing of a Lyndon word ``w`` has ``w`` as its
        lexicographically smallest word, with coefficient one, so peeling off
        the smallest word repeatedly is triangular.
        """
        rest = {w: c for w, c in poly.items() if c != 0}
        out: dict[Word, Any] = {}
        while rest:
            w = min(rest)
            if not is_lyndon(w):
                raise NotLieElement("polynomial is not in the free Lie algebra")
            c = rest[w]
            out[w] = c
            _assoc_add(rest, self.assoc_image(w), -c)
        return out

    def _free_bracket_coords(self, a: Mapping[Word, Any], b: Mapping[Word, Any]) -> dict[Word, Any]:
        pa: dict[Word, Any] = {}
        for w, c in a.items():
            _assoc_add(pa, self.assoc_image(w), c)
        pb: dict[Word, Any] = {}
        for w, c in b.items():
            _assoc_add(pb, self.assoc_image(w), c)
        return self.decompose_free(assoc_commutator(pa, pb))

    def _build_ideal(self) -> None:
        spec = self.spec
        gens: dict[int, list[dict[Word, Any]]] = {k: [] for k in range(1, self.n + 1)}
        if spec.quotient == "surface":
            g = spec.genus
            rel: dict[Word, Any] = {}
            for i in range(g):
                _assoc_add(rel, assoc_commutator({(i,): 1}, {(g + i,): 1}))
            if self.n >= 2:
                gens[2].append(self.decompose_free(rel))
        elif spec.quotient == "ideal":
            for text in spec.ideal:
                poly = parse_bracket_expression(text, self.m)
                lengths = {len(w) for w in poly}
                if len(lengths) > 1:
                    raise UnsupportedQuotient(f"ideal generator {text!r} is not homogeneous")
                if not lengths:
                    continue
                k = lengths.pop()
                if k <= self.n:
                    gens[k].append(self.decompose_free(poly))
        key = lambda w: w
        for k in range(1, self.n + 1):
            ech = Echelon(key=key)
            for v in gens[k]:
                ech.add(v)
            if k >= 2:
                prev = self.ideal_echelons[k - 1]
                for row in list(prev.rows.values()):
                    for i in range(self.m):
                        ech.add(self._free_bracket_coords({(i,): 1}, row))
            if spec.metabelian:
                for j in range(2, k - 1):
                    for u in self.free_words[j]:
                        for v in self.free_words[k - j]:
                            if j <= k - j:
                                ech.add(self._free_bracket_coords({u: 1}, {v: 1}))
            self.ideal_echelons[k] = ech

    def project_free(self, coords: Mapping[Word, Any]) -> dict[int, Any]:
        """Image in the quotient of a free Lie element given by Lyndon coordinates."""
        by_degree: dict[int, dict] = {}
        for w, c in coords.items():
            if len(w) <= self.n:
                by_degree.setdefault(len(w), {})[w] = c
        out: dict[int, Any] = {}
        for k, vec in by_degree.items():
            for w, c in self.ideal_echelons[k].reduce(vec).items():
                out[self.index[w]] = c
        return out

    # -- structure ----------------------------------------------------------
    def hall_basis(self) -> HallBasis:
        return HallBasis(list(self.words), list(self.degrees), dict(self.slices),
                         [word_label(w) for w in self.words])

    def graded_dims(self) -> list[int]:
        return [len(self.slices[k]) for k in range(1, self.n + 1)]

    def bracket_basis(self, i: int, j: int) -> dict[int, Fraction]:
        """Structure constants ``[b_i, b_j] = sum_k c_k b_k``."""
        key = (i, j)
        if key not in self._brackets:
            if self.degrees[i] + self.degrees[j] > self.n or i == j:
                res: dict[int, Fraction] = {}
            elif (j, i) in self._brackets:
                res = {k: -c for k, c in self._brackets[(j, i)].items()}
            else:
                free = self._free_bracket_coords({self.words[i]: 1}, {self.words[j]: 1})
                res = {k: Fraction(c) for k, c in self.project_free(free).items()}
            self._brackets[key] = res
        return self._brackets[key]

    def structure_constants(self) -> dict[tuple[int, int, int], Fraction]:
        out = {}
        for i in range(self.dim):
            for j in range(self.dim):
                for k, c in self.bracket_basis(i, j).items():
                    out[(i, j, k)] = c
        return out

    def generator(self, i: int) -> "LieElement":
        return LieElement(self, {self.index[(i,)]: Fraction(1)})

    def basis_element(self, i: int) -> "LieElement":
        return LieElement(self, {i: Fraction(1)})

    def element(self, coords: Mapping[int, Any]) -> "LieElement":
        return LieElement(self, coords)

    def zero(self) -> "LieElement":
        return LieElement(self, {})

    # -- involution ---------------------------------------------------------
    def involution_image(self, i: int) -> dict[int, Fraction]:
        if self.spec.involution is None:
            raise ValueError("no involution declared")
        if self._involution_images is None:
            self._involution_images = {}
        if i not in self._involution_images:
            perm = self.spec.involution
            poly: dict[Word, Any] = {}
            for w, c in self.assoc_image(self.words[i]).items():
                sign = 1
                nw = []
                for a in w:
                    p = perm[a]
                    sign *= 1 if p > 0 else -1
                    nw.append(abs(p) - 1)
                _assoc_add(poly, {tuple(nw): c}, sign)
            self._involution_images[i] = {k: Fraction(c) for k, c in self.project_free(self.decompose_free(poly)).items()}
        return self._involution_images[i]

    def involution(self, x: "LieElement") -> "LieElement":
        out: dict[int, Any] = {}
        for i, c in x.coords.items():
            for k, a in self.involution_image(i).items():
                v = out.get(k, 0) + c * a
                if v == 0:
                    out.pop(k, None)
                else:
                    out[k] = v
        return LieElement(self, out)


@lru_cache(maxsize=64)
def lie_algebra(spec: LieAlgebraSpec) -> LieAlgebra:
    """Cached construction of the algebra presented by ``spec``."""
    return LieAlgebra(spec)


def hall_basis(spec: LieAlgebraSpec) -> HallBasis:
    return lie_algebra(spec).hall_basis()


def graded_dims(spec: LieAlgebraSpec) -> list[int]:
    return lie_algebra(spec).graded_dims()


# ---------------------------------------------------------------------------


class LieElement:
    """Element of a graded Lie algebra in Hall coordinates.

    Coefficients may come from any exact coefficient ring, truncated series included.
    """

    __slots__ = ("algebra", "coords")

    def __init__(self, algebra: LieAlgebra, coords: Mapping[int, Any] | None = None):
        self.algebra = algebra
        self.coords = {i: c for i, c in (coords or {}).items() if not c == 0}

    def _check(self, other: "LieElement") -> None:
        if not isinstance(other, LieElement):
            raise TypeError("expected a Lie element")
        if other.algebra is not self.algebra and other.algebra.spec != self.algebra.spec:
            raise SpecMismatch("elements belong to different Lie algebras")

    def __add__(self, other: "LieElement") -> "LieElement":
        self._check(other)
        out = dict(self.coords)
        for i, c in other.coords.items():
            out[i] = out[i] + c if i in out else c
        return LieElement(self.algebra, out)

    def __neg__(self) -> "LieElement":
        return LieElement(self.algebra, {i: -c for i, c in self.coords.items()})

    def __sub__(self, other: "LieElement") -> "LieElement":
        return self + (-other)

    def scale(self, c: Any) -> "LieElement":
        return LieElement(self.algebra, {i: c * x for i, x in self.coords.items()})

    def __mul__(self, c: Any) -> "LieElement":
        return self.scale(c)

    __rmul__ = __mul__

    def __eq__(self, other: Any) -> bool:
        if isinstance(other, int) and other == 0:
            return not self.coords
        if not isinstance(other, LieElement):
            return NotImplemented
        return not (self - other).coords

    def __hash__(self) -> int:
        return hash(str(self))

    def is_zero(self) -> bool:
        return not self.coords

    def degree_part(self, k: int) -> "LieElement":
        return LieElement(self.algebra, {i: c for i, c in self.coords.items() if self.algebra.degrees[i] == k})

    def truncate(self, k: int) -> "LieElement":
        return LieElement(self.algebra, {i: c for i, c in self.coords.items() if self.algebra.degrees[i] <= k})

    def vector(self, degree: int | None = None) -> list[Any]:
        idx = self.algebra.slices[degree] if degree else range(self.algebra.dim)
        return [self.coords.get(i, Fraction(0)) for i in idx]

    def map_coefficients(self, fn: Callable[[Any], Any]) -> "LieElement":
        return LieElement(self.algebra, {i: fn(c) for i, c in self.coords.items()})

    def __str__(self) -> str:
        if not self.coords:
            return "0"
        labels = [word_label(self.algebra.words[i]) for i in sorted(self.coords)]
        return " + ".join(f"({self.coords[i]})*{lab}" for i, lab in zip(sorted(self.coords), labels))

    __repr__ = __str__


def bracket(x: LieElement, y: LieElement) -> LieElement:
    """Lie bracket through the structure constants of the Hall basis."""
    x._check(y)
    alg = x.algebra
    out: dict[int, Any] = {}
    for i, a in x.coords.items():
        for j, b in y.coords.items():
            if alg.degrees[i] + alg.degrees[j] > alg.n:
                continue
            consts = alg.bracket_basis(i, j)
            if not consts:
                continue
            ab = a * b
            for k, c in consts.items():
                term = ab * c
                out[k] = out[k] + term if k in out else term
    return LieElement(alg, out)


# ---------------------------------------------------------------------------
# ad-series


def _factorials(n: int) -> list[int]:
    return [math.factorial(k) for k in range(n + 1)]


def bernoulli_numbers(n: int) -> list[Fraction]:
    """``B_0..B_n`` from inverting the series ``(e^t - 1)/t`` (so ``B_1 = -1/2``)."""
    a = [Fraction(1, math.factorial(k + 1)) for k in range(n + 1)]
    b = [Fraction(0)] * (n + 1)
    b[0] = Fraction(1)
    for k in range(1, n + 1):
        b[k] = -sum(a[j] * b[k - j] for j in range(1, k + 1))
    return [b[k] * math.factorial(k) for k in range(n + 1)]


NAMED_SERIES = ("(e^t-1)/t", "t/(e^t-1)", "e^t")


def series_coefficients(name: str, n: int) -> list[Fraction]:
    """Coefficients ``a_0..a_n`` of one of the named power series."""
    if name == "(e^t-1)/t":
        return [Fraction(1, math.factorial(k + 1)) for k in range(n + 1)]
    if name == "t/(e^t-1)":
        return [bk / math.factorial(k) for k, bk in enumerate(bernoulli_numbers(n))]
    if name == "e^t":
        return [Fraction(1, math.factorial(k)) for k in range(n + 1)]
    raise ValueError(f"unknown series {name!r}; expected one of {NAMED_SERIES}")


class AdSeriesOperator:
    """The operator ``y -> sum_k a_k ad_x^k (y)``, truncated by nilpotency."""

    def __init__(self, coefficients: Sequence[Any], x: LieElement):
        self.coefficients = list(coefficients)
        self.x = x

    def __call__(self, y: LieElement) -> LieElement:
        result = y.scale(self.coefficients[0]) if self.coefficients[0] != 1 else y
        term = y
        for a in self.coefficients[1:]:
            term = bracket(self.x, term)
            if term.is_zero():
                break
            if a != 0:
                result = result + term.scale(a)
        return result

    def compose(self, other: "AdSeriesOperator") -> Callable[[LieElement], LieElement]:
        return lambda y: self(other(y))


def ad_series(name_or_coeffs: str | Sequence[Any], x: LieElement) -> AdSeriesOperator:
    n = x.algebra.n
    coeffs = series_coefficients(name_or_coeffs, n) if isinstance(name_or_coeffs, str) else list(name_or_coeffs)
    return AdSeriesOperator(coeffs, x)


# ---------------------------------------------------------------------------
# universal enveloping algebra


class Enveloping:
    """Truncated enveloping algebra ``U(L)/I^(n+1)`` as normal-form words."""

    def __init__(self, algebra: LieAlgebra):
        self.algebra = algebra
        self.m = algebra.m
        self.n = algebra.n
        self.echelons: dict[int, Echelon] = {}
        self._build()
        self.basis: dict[int, list[Word]] = {}
        for k in range(self.n + 1):
            words = self._all_words(k)
            pivots = self.echelons[k].rows
            self.basis[k] = [w for w in words if w not in pivots]
        self._lie_images: dict[int, dict] = {}
        self._lie_solvers: dict[int, Echelon] = {}

    def _all_words(self, k: int) -> list[Word]:
        words: list[Word] = [()]
        for _ in range(k):
            words = [w + (a,) for w in words for a in range(self.m)]
        return words

    def _ideal_generators(self, k: int) -> list[dict[Word, Any]]:
        """Relations of degree ``k`` not already produced by bracketing lower ones."""
        alg = self.algebra
        ech = alg.ideal_echelons[k]
        if k == 1 or not ech.rows:
            return [self._assoc_of_free(r) for r in ech.rows.values()]
        lower = Echelon(key=lambda w: w)
        for row in alg.ideal_echelons[k - 1].rows.values():
            for i in range(self.m):
                lower.add(alg._free_bracket_coords({(i,): 1}, row))
        out = []
        for row in ech.rows.values():
            if lower.add(row):
                out.append(self._assoc_of_free(row))
        return out

    def _assoc_of_free(self, coords: Mapping[Word, Any]) -> dict[Word, Any]:
        poly: dict[Word, Any] = {}
        for w, c in coords.items():
            _assoc_add(poly, self.algebra.assoc_image(w), c)
        return poly

    def _build(self) -> None:
        gens = {k: self._ideal_generators(k) for k in range(1, self.n + 1)}
        for k in range(self.n + 1):
            ech = Echelon(key=lambda w: w)
            for j in range(1, k + 1):
                if not gens[j]:
                    continue
                rest = k - j
                for left in range(rest + 1):
                    for u in self._all_words(left):
                        for v in self._all_words(rest - left):
                            for r in gens[j]:
                                ech.add({u + w + v: c for w, c in r.items()})
            self.echelons[k] = ech

    def dims(self) -> list[int]:
        return [len(self.basis[k]) for k in range(self.n + 1)]

    def normal_form(self, terms: Mapping[Word, Any]) -> dict[Word, Any]:
        by_len: dict[int, dict] = {}
        for w, c in terms.items():
            if len(w) <= self.n and not c == 0:
                by_len.setdefault(len(w), {})[w] = c
        out: dict[Word, Any] = {}
        for k, vec in by_len.items():
            out.update(self.echelons[k].reduce(vec))
        return out

    def element(self, terms: Mapping[Word, Any]) -> "UEAElement":
        return UEAElement(self, self.normal_form(terms))

    def one(self, c: Any = Fraction(1)) -> "UEAElement":
        return UEAElement(self, {(): c})

    def lie_image(self, x: LieElement) -> "UEAElement":
        out: dict[Word, Any] = {}
        for i, c in x.coords.items():
            if i not in self._lie_images:
                self._lie_images[i] = self.normal_form(self.algebra.assoc_image(self.algebra.words[i]))
            for w, a in self._lie_images[i].items():
                v = out.get(w, 0) + c * a
                if v == 0:
                    out.pop(w, None)
                else:
                    out[w] = v
        return UEAElement(self, out)

    def _solver(self, k: int) -> Echelon:
        if k not in self._lie_solvers:
            ech = Echelon(key=lambda c: c)
            for i in self.algebra.slices[k]:
                img = self.lie_image(self.algebra.basis_element(i)).terms
                vec = {(1, w): c for w, c in img.items()}
                vec[(0, i)] = Fraction(1)
                ech.add(vec)
            self._lie_solvers[k] = ech
        return self._lie_solvers[k]

    def to_lie(self, u: "UEAElement") -> LieElement:
        """Inverse of :meth:`lie_image`; raises ``NotLieElement`` off the Lie span."""
        coords: dict[int, Any] = {}
        by_len: dict[int, dict] = {}
        for w, c in u.terms.items():
            by_len.setdefault(len(w), {})[(1, w)] = c
        for k, vec in by_len.items():
            if k == 0:
                raise NotLieElement("element has a constant term")
            red = self._solver(k).reduce(vec)
            for key, c in red.items():
                if key[0] == 1:
                    raise NotLieElement("element is not in the image of the Lie algebra")
                coords[key[1]] = -c
        return LieElement(self.algebra, coords)


@lru_cache(maxsize=64)
def enveloping(spec: LieAlgebraSpec) -> Enveloping:
    return Enveloping(lie_algebra(spec))


class UEAElement:
    """Element of the truncated enveloping algebra in normal form."""

    __slots__ = ("env", "terms")

    def __init__(self, env: Enveloping, terms: Mapping[Word, Any]):
        self.env = env
        self.terms = {w: c for w, c in terms.items() if not c == 0}

    def _check(self, other: "UEAElement") -> None:
        if other.env is not self.env and other.env.algebra.spec != self.env.algebra.spec:
            raise SpecMismatch("elements belong to different enveloping algebras")

    def __add__(self, other: Any) -> "UEAElement":
        if not isinstance(other, UEAElement):
            other = self.env.one(other)
        self._check(other)
        out = dict(self.terms)
        for w, c in other.terms.items():
            out[w] = out[w] + c if w in out else c
        return UEAElement(self.env, out)

    __radd__ = __add__

    def __neg__(self) -> "UEAElement":
        return UEAElement(self.env, {w: -c for w, c in self.terms.items()})

    def __sub__(self, other: Any) -> "UEAElement":
        if not isinstance(other, UEAElement):
            other = self.env.one(other)
        return self + (-other)

    def __rsub__(self, other: Any) -> "UEAElement":
        return (-self) + other

    def scale(self, c: Any) -> "UEAElement":
        return UEAElement(self.env, {w: c * x for w, x in self.terms.items()})

    def __mul__(self, other: Any) -> "UEAElement":
        if not isinstance(other, UEAElement):
            return self.scale(other)
        self._check(other)
        n = self.env.n
        raw: dict[Word, Any] = {}
        for u, a in self.terms.items():
            for v, b in other.terms.items():
                if len(u) + len(v) > n:
                    continue
                w = u + v
                t = a * b
                raw[w] = raw[w] + t if w in raw else t
        return UEAElement(self.env, self.env.normal_form(raw))

    def __rmul__(self, c: Any) -> "UEAElement":
        return self.scale(c)

    def __pow__(self, k: int) -> "UEAElement":
        result = self.env.one()
        for _ in range(k):
            result = result * self
        return result

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, UEAElement):
            other = self.env.one(other)
        return not (self - other).terms

    def __hash__(self) -> int:
        return hash(str(self))

    def constant(self) -> Any:
        return self.terms.get((), 0)

    def length_part(self, k: int) -> "UEAElement":
        return UEAElement(self.env, {w: c for w, c in self.terms.items() if len(w) == k})

    def map_coefficients(self, fn: Callable[[Any], Any]) -> "UEAElement":
        return UEAElement(self.env, {w: fn(c) for w, c in self.terms.items()})

    def inverse(self) -> "UEAElement":
        c0 = self.constant()
        if not c0 == 1:
            raise NotUnipotent("only elements with constant term 1 are inverted")
        y = self - 1
        result = self.env.one()
        power = self.env.one()
        for _ in range(self.env.n):
            power = power * (-y)
            result = result + power
        return result

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for w in sorted(self.terms, key=lambda w: (len(w), w)):
            name = "*".join(f"e{a + 1}" for a in w) or "1"
            parts.append(f"({self.terms[w]})*{name}")
        return " + ".join(parts)

    __repr__ = __str__


def coproduct(u: UEAElement) -> dict[tuple[Word, Word], Any]:
    """Shuffle coproduct of a normal-form element, with both factors in normal form."""
    raw: dict[tuple[Word, Word], Any] = {}
    for w, c in u.terms.items():
        k = len(w)
        for mask in range(1 << k):
            left = tuple(w[i] for i in range(k) if mask >> i & 1)
            right = tuple(w[i] for i in range(k) if not mask >> i & 1)
            key = (left, right)
            raw[key] = raw[key] + c if key in raw else c
    return _tensor_normal_form(u.env, raw)


def _tensor_normal_form(env: Enveloping, raw: Mapping[tuple[Word, Word], Any]) -> dict:
    by_right: dict[Word, dict] = {}
    for (a, b), c in raw.items():
        by_right.setdefault(b, {})[a] = c
    stage: dict[tuple[Word, Word], Any] = {}
    for b, vec in by_right.items():
        for a, c in env.normal_form(vec).items():
            stage[(a, b)] = c
    by_left: dict[Word, dict] = {}
    for (a, b), c in stage.items():
        by_left.setdefault(a, {})[b] = c
    out = {}
    for a, vec in by_left.items():
        for b, c in env.normal_form(vec).items():
            out[(a, b)] = c
    return out


def tensor_square(u: UEAElement) -> dict[tuple[Word, Word], Any]:
    n = u.env.n
    out: dict[tuple[Word, Word], Any] = {}
    for a, x in u.terms.items():
        for b, y in u.terms.items():
            if len(a) + len(b) <= n:
                out[(a, b)] = x * y
    return out


def grouplike_residual(u: UEAElement) -> dict[tuple[Word, Word], Any]:
    """Nonzero coefficients of ``Δu - u⊗u`` up to total length the class."""
    delta = coproduct(u)
    sq = tensor_square(u)
    out = dict(delta)
    for k, c in sq.items():
        v = out.get(k, 0) - c
        if v == 0:
            out.pop(k, None)
        else:
            out[k] = v
    return {k: c for k, c in out.items() if not c == 0}


def primitive_residual(u: UEAElement) -> dict[tuple[Word, Word], Any]:
    """Nonzero coefficients of ``Δu - u⊗1 - 1⊗u``."""
    out = dict(coproduct(u))
    for w, c in u.terms.items():
        for key in ((w, ()), ((), w)):
            v = out.get(key, 0) - c
            if v == 0:
                out.pop(key, None)
            else:
                out[key] = v
    return {k: c for k, c in out.items() if not c == 0}


def exp(x: LieElement | UEAElement, env: Enveloping | None = None) -> UEAElement:
    """Truncated exponential ``sum x^k/k!`` in the enveloping algebra."""
    if isinstance(x, LieElement):
        env = env or enveloping(x.algebra.spec)
        y = env.lie_image(x)
    else:
        y = x
        env = x.env
        if not y.constant() == 0:
            raise ValueError("exponential needs an element without constant term")
    result = env.one()
    power = env.one()
    for k in range(1, env.n + 1):
        power = power * y
        if not power.terms:
            break
        result = result + power.scale(Fraction(1, math.factorial(k)))
    return result


def log_uea(u: UEAElement) -> UEAElement:
    c0 = u.constant()
    if not c0 == 1:
        raise NotUnipotent("constant term must equal 1")
    y = u - 1
    result = UEAElement(u.env, {})
    power = u.env.one()
    for k in range(1, u.env.n + 1):
        power = power * y
        if not power.terms:
            break
        result = result + power.scale(Fraction((-1) ** (k + 1), k))
    return result


def log(u: UEAElement) -> LieElement:
    """Truncated logarithm, returned in Hall coordinates."""
    return u.env.to_lie(log_uea(u))


def bch(x: LieElement, y: LieElement) -> LieElement:
    """``log(exp(x) exp(y))`` at the truncation."""
    return log(exp(x) * exp(y))


# ---------------------------------------------------------------------------
# metabelian checks


def _monomials(m: int, k: int) -> list[tuple[int, ...]]:
    if k == 0:
        return [(0,) * m]
    out = []

    def rec(prefix: list[int], left: int, slots: int):
        if slots == 1:
            out.append(tuple(prefix + [left]))
            return
        for a in range(left, -1, -1):
            rec(prefix + [a], left - a, slots - 1)

    rec([], k, m)
    return sorted(out, reverse=True)


def syzygy_dimension(m: int, k: int) -> int:
    """Dimension of ``{(v_i) in Sym^k(Q^m)^m : sum v_i x_i = 0}`` by exact rank."""
    src = _monomials(m, k)
    tgt = {e: i for i, e in enumerate(_monomials(m, k + 1))}
    matrix = [[Fraction(0)] * (m * len(src)) for _ in tgt]
    for j in range(m):
        for a, e in enumerate(src):
            f = list(e)
            f[j] += 1
            matrix[tgt[tuple(f)]][j * len(src) + a] = Fraction(1)
    return m * len(src) - rank(matrix)


@dataclass
class IharaRow:
    degree: int
    syzygy_dim: int
    correction: int
    expected: int
    lie_dim: int

    @property
    def match(self) -> bool:
        return self.expected == self.lie_dim


def ihara_module_check(spec: LieAlgebraSpec) -> list[IharaRow]:
    """Compare ``dim gr_i [L,L]`` with the syzygy module (minus ``Sym·m`` for surfaces)."""
    if not spec.metabelian:
        raise DegenerateSpec("the syzygy comparison needs a metabelian quotient")
    if spec.quotient not in ("metabelian", "free", "surface"):
        raise DegenerateSpec("the syzygy comparison covers free and surface metabelian algebras")
    dims = graded_dims(spec)
    m = spec.generators
    rows = []
    for i in range(2, spec.nilpotency_class + 1):
        syz = syzygy_dimension(m, i - 1)
        corr = math.comb(m + i - 3, i - 2) if spec.quotient == "surface" else 0
        rows.append(IharaRow(i, syz, corr, syz - corr, dims[i - 1]))
    return rows


def _ad_matrix(alg: LieAlgebra, v: LieElement, i: int) -> list[list[Fraction]]:
    src = alg.slices[i]
    tgt = list(alg.slices[i + 1])
    cols = []
    for b in src:
        img = bracket(v, alg.basis_element(b))
        cols.append([img.coords.get(k, Fraction(0)) for k in tgt])
    return [list(r) for r in zip(*cols)] if cols and tgt else []


@dataclass
class InjectivityReport:
    degrees: list[int]
    ranks: list[int]
    source_dims: list[int]

    @property
    def injective(self) -> list[bool]:
        return [r == s for r, s in zip(self.ranks, self.source_dims)]

    @property
    def all_injective(self) -> bool:
        return all(self.injective)


def ad_injectivity_check(spec: LieAlgebraSpec, v: LieElement | Sequence[Any], degrees: Iterable[int]) -> InjectivityReport:
    """Rank of ``ad(v): gr_i -> gr_(i+1)`` for each requested degree."""
    if not spec.metabelian:
        raise DegenerateSpec("injectivity is claimed for metabelian quotients only")
    if spec.quotient == "surface":
        if spec.generators <= 2:
            raise DegenerateSpec("surface quotients need more than two generators")
    elif spec.quotient == "metabelian":
        if spec.generators <= 1:
            raise DegenerateSpec("free metabelian algebras need more than one generator")
    else:
        raise DegenerateSpec("unsupported quotient for the injectivity lemma")
    degrees = list(degrees)
    need = max(degrees) + 1 if degrees else 1
    alg = lie_algebra(spec if spec.nilpotency_class >= need else spec.with_class(need))
    if not isinstance(v, LieElement):
        v = LieElement(alg, {alg.index[(a,)]: Fraction(c) for a, c in enumerate(v)})
    elif v.algebra is not alg:
        v = LieElement(alg, v.coords)
    if v.is_zero() or any(alg.degrees[i] != 1 for i in v.coords):
        raise DegenerateSpec("v must be a nonzero degree-one element")
    ranks, dims = [], []
    for i in degrees:
        mat = _ad_matrix(alg, v, i)
        dims.append(len(alg.slices[i]))
        ranks.append(rank(mat) if mat else 0)
    return InjectivityReport(degrees, ranks, dims)


def _span_basis(vectors: Iterable[list[Fraction]]) -> list[list[Fraction]]:
    from .linalg import rref

    vecs = [v for v in vectors if any(x != 0 for x in v)]
    if not vecs:
        return []
    rows, _ = rref(vecs)
    return rows


def bracket_span(alg: LieAlgebra, w_basis: Sequence[LieElement], i: int) -> list[LieElement]:
    """Basis of ``W_i``: the span of left-normed brackets of ``i`` elements of ``W``."""
    level = list(w_basis)
    for _ in range(i - 1):
        level = [bracket(w, x) for w in w_basis for x in level]
        rows = _span_basis([x.vector(None) for x in level])
        level = [LieElement(alg, {k: c for k, c in enumerate(r) if c != 0}) for r in rows]
    rows = _span_basis([x.vector(None) for x in level])
    return [LieElement(alg, {k: c for k, c in enumerate(r) if c != 0}) for r in rows]


@dataclass
class EigenspaceDims:
    total: int
    plus: int
    minus: int


def _eigen_dim(alg: LieAlgebra, basis: Sequence[LieElement], sign: int) -> int:
    if not basis:
        return 0
    cols = [(alg.involution(b) - b.scale(sign)).vector(None) for b in basis]
    matrix = [list(r) for r in zip(*cols)]
    return len(nullspace(matrix, len(basis)))


def c_eigenspaces(spec: LieAlgebraSpec, degree: int, w_vectors: Sequence[Sequence[Any]]) -> EigenspaceDims:
    """Dimensions of ``W_i`` and of its ``c = +1`` and ``c = -1`` parts."""
    alg = lie_algebra(spec)
    w_basis = [LieElement(alg, {alg.index[(a,)]: Fraction(c) for a, c in enumerate(v)}) for v in w_vectors]
    basis = bracket_span(alg, w_basis, degree)
    return EigenspaceDims(len(basis), _eigen_dim(alg, basis, 1), _eigen_dim(alg, basis, -1))


def twisted_injectivity_check(spec: LieAlgebraSpec, degree: int, w_vectors: Sequence[Sequence[Any]],
                              v: Sequence[Any]) -> bool:
    """Whether ``ad(v)`` maps ``W_i^{c=-1}`` injectively into ``W_(i+1) / W_(i+1)^{c=-1}``."""
    alg = lie_algebra(spec)
    if degree + 1 > alg.n:
        raise ValueError("class too small for the requested degree")
    as_elt = lambda vec: LieElement(alg, {alg.index[(a,)]: Fraction(c) for a, c in enumerate(vec)})
    w_basis = [as_elt(vec) for vec in w_vectors]
    vv = as_elt(v)
    wi = bracket_span(alg, w_basis, degree)
    # basis of W_i^{c=-1}
    if not wi:
        return True
    cols = [(alg.involution(b) + b).vector(None) for b in wi]
    kernel = nullspace([list(r) for r in zip(*cols)], len(wi))
    minus = [sum((wi[k].scale(c) for k, c in enumerate(vec) if c), alg.zero()) for vec in kernel]
    if not minus:
        return True
    # quotient by the c = -1 part amounts to taking (1 + c)/2 of the image
    images = []
    for w in minus:
        y = bracket(vv, w)
        images.append((y + alg.involution(y)).vector(None))
    matrix = [list(r) for r in zip(*images)]
    return rank(matrix) == len(minus)


def random_lie_element(alg: LieAlgebra, rng, degrees: Iterable[int] | None = None, bound: int = 5) -> LieElement:
    degrees = set(degrees) if degrees is not None else set(range(1, alg.n + 1))
    coords = {}
    for i in range(alg.dim):
        if alg.degrees[i] in degrees:
            coords[i] = Fraction(rng.randint(-bound, bound), rng.randint(1, 3))
    return LieElement(alg, coords)
