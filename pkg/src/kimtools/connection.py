"""Unipotent flat connections as block-nilpotent matrices of 1-forms.

A connection ``d + Λ`` on a trivial bundle ``V_0 ⊕ ... ⊕ V_n`` is stored as
a square matrix of 1-forms that is strictly block-lower-triangular: the
entry in row block ``a`` and column block ``b < a`` belongs to the
``(a - b)``-nilpotent part.  A gauge ``g = 1 + M`` acts by

    Λ  ->  g⁻¹ Λ g + g⁻¹ dg,

which preserves flatness ``dΛ + Λ∧Λ = 0``.  Reduction moves every
``i``-nilpotent entry into a chosen subspace ``S_i`` of global 1-forms.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Mapping, Sequence

from .errors import NotClosedUnderD, NotFlat, NotReducible, OutOfSpace, UnsupportedChart
from .exactalg import (Form, FormSpace, Poly, RationalFunction, exterior_d, parse_expression, wedge_forms)
from .liecore import Enveloping, LieAlgebraSpec, enveloping, lie_algebra
from .linalg import Echelon, nullspace, rref

Vector = dict[str, Fraction]


# ---------------------------------------------------------------------------
# S-chains


def _vec_key(space: FormSpace, degree: int = 1):
    order = {n: i for i, n in enumerate(space.names(degree))}
    return lambda name: order[name]


def _span_echelon(space: FormSpace, vectors: Sequence[Vector]) -> Echelon:
    ech = Echelon(key=_vec_key(space))
    for v in vectors:
        ech.add(v)
    return ech


@dataclass
class SChain:
    """The subspaces ``S_1 .. S_n`` as coordinate vectors on 1-form atoms."""

    space: FormSpace
    levels: list[list[Vector]]
    exact: list[Vector]

    def __getitem__(self, i: int) -> list[Vector]:
        return self.levels[i - 1]

    def depth(self) -> int:
        return len(self.levels)

    def forms(self, i: int) -> list[Form]:
        return [self.space.form(v) for v in self[i]]

    def contains(self, i: int, form: Form) -> bool:
        try:
            coords = self.space.coords(form)
        except OutOfSpace:
            return False
        return _span_echelon(self.space, self[i]).contains(coords)

    def decompose(self, i: int, form: Form) -> tuple[Vector, RationalFunction] | None:
        """Write ``form = s + df`` with ``s`` in ``S_i`` and ``f`` in the function span."""
        try:
            target = self.space.coords(form)
        except OutOfSpace:
            return None
        names = [n for n, c in self.space.function_d_table.items() if c is not None]
        ech = Echelon(key=lambda c: c)
        atom_order = {n: k for k, n in enumerate(self.space.names(1))}
        for k, v in enumerate(self[i]):
            vec = {(1, atom_order[a]): x for a, x in v.items()}
            vec[(0, 0, k)] = Fraction(1)
            ech.add(vec)
        for k, n in enumerate(names):
            vec = {(1, atom_order[a]): x for a, x in self.space.function_d_table[n].items()}
            vec[(0, 1, k)] = Fraction(1)
            ech.add(vec)
        red = ech.reduce({(1, atom_order[a]): x for a, x in target.items()})
        if any(key[0] == 1 for key in red):
            return None
        s: Vector = {}
        f: Any = RationalFunction.coerce(0, self.space.chart)
        for key, c in red.items():
            if key[1] == 0:
                for a, x in self[i][key[2]].items():
                    s[a] = s.get(a, Fraction(0)) - c * x
            else:
                f = f + self.space.atoms[0][names[key[2]]].comps[()] * (-c)
        return {a: x for a, x in s.items() if x != 0}, f


def _d_matrix(space: FormSpace) -> tuple[list[str], list[list[Fraction]]]:
    names = [n for n in space.names(1) if space.d_table[n] is not None]
    two = space.names(2)
    matrix = [[space.d_table[n].get(t, Fraction(0)) for n in names] for t in two]
    return names, matrix


def _wedge_coords(space: FormSpace, a: Vector, b: Vector) -> Vector:
    out: Vector = {}
    for x, cx in a.items():
        for y, cy in b.items():
            w = space.wedge_table[(x, y)]
            if w is None:
                raise NotClosedUnderD(f"wedge of {x} and {y} leaves the declared 2-forms")
            for t, c in w.items():
                out[t] = out.get(t, Fraction(0)) + cx * cy * c
    return {t: c for t, c in out.items() if c != 0}


def _preimage(space: FormSpace, targets: Sequence[Vector]) -> list[Vector]:
    """Basis of ``{α in the 1-form span : dα in span(targets)}``."""
    names, dmat = _d_matrix(space)
    two = space.names(2)
    ncols = len(names) + len(targets)
    if not two:
        return [{n: Fraction(int(n == m)) for n in names if n == m} for m in names]
    matrix = []
    for r, t in enumerate(two):
        row = list(dmat[r]) + [-tv.get(t, Fraction(0)) for tv in targets]
        matrix.append(row)
    out = []
    for v in nullspace(matrix, ncols):
        vec = {n: x for n, x in zip(names, v[: len(names)]) if x != 0}
        if vec:
            out.append(vec)
    ech = Echelon(key=_vec_key(space))
    basis = []
    for v in out:
        if ech.add(v):
            basis.append(v)
    return basis


def build_S_chain(space: FormSpace, s1: Sequence[Vector | Form], depth: int,
                  require_primitives: bool = False) -> SChain:
    """Build ``S_1 .. S_depth`` from closed 1-forms ``S_1``.

    ``D_i`` is the space of 1-forms whose derivative lies in the span of the
    wedges ``S_j ∧ S_k`` with ``j + k = i``; it contains all closed forms.
    ``S_i`` is ``S_1`` extended by the echelon complement of ``S_1 + dF``
    inside ``D_i``, where ``dF`` are the exact forms of the declared
    functions.  With ``require_primitives`` every nonzero wedge must itself
    be exact in the declared span.
    """
    s1v = [space.coords(v) if isinstance(v, Form) else {k: Fraction(x) for k, x in v.items() if x} for v in s1]
    for v in s1v:
        for n, c in v.items():
            if space.d_table.get(n) is None:
                raise NotClosedUnderD(f"derivative of {n} is not declared")
        dv = _combine(space.d_table, v)
        if dv:
            raise ValueError("S_1 must consist of closed forms")
    exact = space.exact_forms()
    base = _span_echelon(space, exact)
    for v in s1v:
        if not base.add(v):
            raise ValueError("S_1 forms are not independent modulo exact forms")
    if not s1v:
        return SChain(space, [[] for _ in range(depth)], exact)
    levels: list[list[Vector]] = [list(s1v)]
    for i in range(2, depth + 1):
        wedges = []
        for j in range(1, i):
            for a in levels[j - 1]:
                for b in levels[i - j - 1]:
                    w = _wedge_coords(space, a, b)
                    if w:
                        wedges.append(w)
        if require_primitives:
            names, dmat = _d_matrix(space)
            for w in wedges:
                if not _solvable(space, names, dmat, w):
                    raise NotClosedUnderD("a wedge of S-forms has no primitive in the declared span")
        d_i = _preimage(space, wedges)
        ech = _span_echelon(space, exact)
        for v in s1v:
            ech.add(v)
        level = list(s1v)
        for v in d_i:
            if ech.add(v):
                level.append(v)
        levels.append(level)
    return SChain(space, levels, exact)


def _combine(table: Mapping[str, Vector | None], v: Vector) -> Vector:
    out: Vector = {}
    for n, c in v.items():
        for t, x in (table[n] or {}).items():
            out[t] = out.get(t, Fraction(0)) + c * x
    return {t: x for t, x in out.items() if x != 0}


def _solvable(space: FormSpace, names: list[str], dmat: list[list[Fraction]], target: Vector) -> bool:
    two = space.names(2)
    aug = [list(dmat[r]) + [target.get(t, Fraction(0))] for r, t in enumerate(two)]
    _, pivots = rref(aug)
    return len(names) not in pivots


# ---------------------------------------------------------------------------
# connections


class Connection:
    """A block-nilpotent matrix of 1-forms over a form space."""

    def __init__(self, space: FormSpace, blocks: Sequence[int], matrix: Sequence[Sequence[Form | int]]):
        self.space = space
        self.blocks = list(blocks)
        self.size = sum(self.blocks)
        self.block_of: list[int] = []
        for b, dim in enumerate(self.blocks):
            self.block_of.extend([b] * dim)
        zero = Form(space.chart, 1, {}, space)
        self.matrix: list[list[Form]] = []
        for r in range(self.size):
            row = []
            for c in range(self.size):
                e = matrix[r][c]
                if isinstance(e, int):
                    e = zero
                row.append(Form(space.chart, 1, e.comps, space))
            self.matrix.append(row)
        for r in range(self.size):
            for c in range(self.size):
                if self.block_of[r] <= self.block_of[c] and not self.matrix[r][c].is_zero():
                    raise ValueError("connection matrix must be strictly block-lower-triangular")

    def entry(self, r: int, c: int) -> Form:
        return self.matrix[r][c]

    def nilpotency(self, r: int, c: int) -> int:
        return self.block_of[r] - self.block_of[c]

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, Connection):
            return NotImplemented
        return self.blocks == other.blocks and all(
            self.matrix[r][c] == other.matrix[r][c] for r in range(self.size) for c in range(self.size))

    def truncate(self, k: int) -> "Connection":
        """Restrict to the first ``k + 1`` blocks."""
        blocks = self.blocks[: k + 1]
        size = sum(blocks)
        return Connection(self.space, blocks, [row[:size] for row in self.matrix[:size]])

    def to_json(self) -> dict:
        return {
            "blocks": self.blocks,
            "entries": [[_form_to_text(self.matrix[r][c]) for c in range(self.size)] for r in range(self.size)],
        }


def _form_to_text(f: Form) -> dict[str, str]:
    return {f.coords[k[0]]: RationalFunction.coerce(c, f.coords).to_text() for k, c in sorted(f.comps.items())}


def connection_from_json(space: FormSpace, data: Mapping[str, Any]) -> Connection:
    chart = space.chart
    matrix = []
    for row in data["entries"]:
        out = []
        for entry in row:
            comps = {(chart.index(v),): parse_expression(t, chart) for v, t in (entry or {}).items()}
            out.append(Form(chart, 1, comps, space))
        matrix.append(out)
    return Connection(space, data["blocks"], matrix)


def flatness_check(conn: Connection) -> list[list[Form]]:
    """The curvature matrix ``dΛ + Λ∧Λ`` with ``(Λ∧Λ)_ik = Σ_j Λ_ij ∧ Λ_jk``."""
    n = conn.size
    out = []
    for i in range(n):
        row = []
        for k in range(n):
            acc = exterior_d(conn.matrix[i][k])
            for j in range(n):
                a, b = conn.matrix[i][j], conn.matrix[j][k]
                if a.is_zero() or b.is_zero():
                    continue
                acc = acc + wedge_forms(a, b)
            row.append(acc)
        out.append(row)
    return out


def is_flat(conn: Connection) -> bool:
    return all(e.is_zero() for row in flatness_check(conn) for e in row)


# ---------------------------------------------------------------------------
# gauge transformations


class GaugeTransform:
    """``g = 1 + M`` with ``M`` strictly block-lower-triangular."""

    def __init__(self, chart: Sequence[str], blocks: Sequence[int], M: Sequence[Sequence[Any]] | None = None):
        self.chart = tuple(chart)
        self.blocks = list(blocks)
        self.size = sum(self.blocks)
        zero = RationalFunction.coerce(0, self.chart)
        if M is None:
            M = [[zero] * self.size for _ in range(self.size)]
        self.M = [[RationalFunction.coerce(x, self.chart) for x in row] for row in M]

    def is_identity(self) -> bool:
        return all(x.is_zero() for row in self.M for x in row)

    def matrix(self) -> list[list[RationalFunction]]:
        one = RationalFunction.coerce(1, self.chart)
        return [[self.M[r][c] + (one if r == c else 0) for c in range(self.size)] for r in range(self.size)]

    def inverse_matrix(self) -> list[list[RationalFunction]]:
        """``(1 + M)^{-1} = Σ (-M)^k``, finite by nilpotence."""
        n = self.size
        one = RationalFunction.coerce(1, self.chart)
        result = [[one if r == c else RationalFunction.coerce(0, self.chart) for c in range(n)] for r in range(n)]
        power = [row[:] for row in result]
        negM = [[-x for x in row] for row in self.M]
        for _ in range(len(self.blocks)):
            power = _matmul(power, negM)
            if all(x.is_zero() for row in power for x in row):
                break
            result = [[result[r][c] + power[r][c] for c in range(n)] for r in range(n)]
        return result

    def compose(self, other: "GaugeTransform") -> "GaugeTransform":
        """The gauge ``self · other`` (apply ``self`` first, then ``other``)."""
        prod = _matmul(self.matrix(), other.matrix())
        n = self.size
        return GaugeTransform(self.chart, self.blocks,
                              [[prod[r][c] - (1 if r == c else 0) for c in range(n)] for r in range(n)])

    def to_json(self) -> dict:
        return {"blocks": self.blocks, "M": [[x.to_text() for x in row] for row in self.M]}


def _matmul(a, b):
    n = len(a)
    m = len(b[0])
    out = []
    for r in range(n):
        row = []
        for c in range(m):
            acc = RationalFunction.coerce(0, a[r][c].vars if hasattr(a[r][c], "vars") else ())
            for k in range(len(b)):
                x, y = a[r][k], b[k][c]
                if x.is_zero() or y.is_zero():
                    continue
                acc = acc + x * y
            row.append(acc)
        out.append(row)
    return out


def apply_gauge(conn: Connection, gauge: GaugeTransform) -> Connection:
    """``Λ -> g⁻¹ Λ g + g⁻¹ dg``."""
    n = conn.size
    g = gauge.matrix()
    ginv = gauge.inverse_matrix()
    chart = conn.space.chart
    zero = Form(chart, 1, {}, conn.space)
    # Λ g
    lg = [[zero] * n for _ in range(n)]
    for r in range(n):
        for c in range(n):
            acc = zero
            for k in range(n):
                e = conn.matrix[r][k]
                if e.is_zero() or g[k][c].is_zero():
                    continue
                acc = acc + e.scale(g[k][c])
            lg[r][c] = acc
    dg = [[Form(chart, 1, exterior_d(Form.function(gauge.M[r][c], chart)).comps, conn.space)
           for c in range(n)] for r in range(n)]
    out = []
    for r in range(n):
        row = []
        for c in range(n):
            acc = zero
            for k in range(n):
                if ginv[r][k].is_zero():
                    continue
                for piece in (lg[k][c], dg[k][c]):
                    if not piece.is_zero():
                        acc = acc + piece.scale(ginv[r][k])
            row.append(acc)
        out.append(row)
    return Connection(conn.space, conn.blocks, out)


# ---------------------------------------------------------------------------
# reduction


@dataclass
class ReducedConnection:
    connection: Connection
    chain: SChain
    certified: bool
    membership: dict[tuple[int, int], bool] = field(default_factory=dict)


def certify(conn: Connection, chain: SChain) -> ReducedConnection:
    """Check that every ``i``-nilpotent entry lies in ``S_i``."""
    membership = {}
    for r in range(conn.size):
        for c in range(conn.size):
            i = conn.nilpotency(r, c)
            if i <= 0:
                continue
            e = conn.matrix[r][c]
            membership[(r, c)] = e.is_zero() or (i <= chain.depth() and chain.contains(i, e))
    return ReducedConnection(conn, chain, all(membership.values()), membership)


def reduce_to_reduced_form(conn: Connection, chain: SChain) -> tuple[ReducedConnection, GaugeTransform]:
    """Gauge a flat unipotent connection into reduced form.

    Rows are treated from the top block down; inside a row the entries are
    treated from the nearest block outwards, so each entry is visited once
    all entries it depends on are already reduced.  An entry ``s + df`` is
    fixed by the gauge with ``M = -f`` at that position.
    """
    if not is_flat(conn):
        raise NotFlat("connection has nonzero curvature")
    if chain.depth() < len(conn.blocks) - 1:
        raise NotReducible("S-chain is shorter than the nilpotency depth")
    chart = conn.space.chart
    total = GaugeTransform(chart, conn.blocks)
    current = conn
    order = sorted(
        ((r, c) for r in range(conn.size) for c in range(conn.size) if conn.nilpotency(r, c) > 0),
        key=lambda rc: (conn.block_of[rc[0]], rc[0], -conn.block_of[rc[1]], rc[1]),
    )
    for r, c in order:
        i = current.nilpotency(r, c)
        entry = current.matrix[r][c]
        if entry.is_zero():
            continue
        parts = chain.decompose(i, entry)
        if parts is None:
            raise NotReducible(f"entry ({r},{c}) is not in S_{i} plus exact forms")
        _, f = parts
        if f.is_zero():
            continue
        M = [[RationalFunction.coerce(0, chart)] * conn.size for _ in range(conn.size)]
        M[r] = list(M[r])
        M[r][c] = -f
        step = GaugeTransform(chart, conn.blocks, M)
        current = apply_gauge(current, step)
        total = total.compose(step)
    report = certify(current, chain)
    if not report.certified:
        raise NotReducible("reduction did not land in the S-chain")
    return report, total


# ---------------------------------------------------------------------------
# universal connections on punctured lines and their products


@dataclass(frozen=True)
class PuncturedLine:
    """``P^1`` minus finitely many rational points, one of which may be ``inf``."""

    punctures: tuple[str, ...] = ("0", "1", "inf")
    var: str = "z"

    def finite(self) -> list[Fraction]:
        return [Fraction(p) for p in self.punctures if p != "inf"]


@dataclass(frozen=True)
class ProductChart:
    factors: tuple[PuncturedLine, ...]


def chart_from_json(data: Any) -> PuncturedLine | ProductChart:
    if isinstance(data, str):
        if data in ("p1-three", "P1-{0,1,inf}"):
            return PuncturedLine()
        if data in ("p1-three-squared",):
            return ProductChart((PuncturedLine(var="z1"), PuncturedLine(var="z2")))
        raise ValueError(f"unknown chart name {data!r}")
    if "product" in data:
        factors = []
        for k, f in enumerate(data["product"]):
            pl = chart_from_json(f)
            if not isinstance(pl, PuncturedLine):
                raise UnsupportedChart("nested products are not supported")
            factors.append(PuncturedLine(pl.punctures, f.get("var", f"z{k + 1}") if isinstance(f, dict) else f"z{k + 1}"))
        return ProductChart(tuple(factors))
    return PuncturedLine(tuple(str(p) for p in data.get("punctures", ["0", "1", "inf"])), data.get("var", "z"))


def dlog_atoms(line: PuncturedLine, chart: Sequence[str]) -> dict[str, Form]:
    """Residue-one forms ``dz/z`` and ``dz/(a - z)`` for the finite punctures."""
    chart = tuple(chart)
    z = Poly.var(line.var, chart)
    idx = chart.index(line.var)
    out = {}
    finite = line.finite()
    if "inf" not in line.punctures:
        if len(finite) < 2:
            raise UnsupportedChart("need at least two punctures")
        a0 = finite[0]
        for a in finite[1:]:
            coef = (1 / (z - a0)) - (1 / (z - a))
            out[f"dlog({line.var}-{a0})-dlog({line.var}-{a})"] = Form(chart, 1, {(idx,): coef})
        return out
    for a in finite:
        if a == 0:
            out[f"d{line.var}/{line.var}"] = Form(chart, 1, {(idx,): 1 / z})
        else:
            out[f"d{line.var}/({a}-{line.var})"] = Form(chart, 1, {(idx,): 1 / (a - z)})
    return out


@dataclass
class UniversalConnection:
    chart: PuncturedLine | ProductChart
    depth: int
    spec: LieAlgebraSpec
    env: Enveloping
    space: FormSpace
    omega: list[tuple[int, str]]
    connection: Connection
    basis: list[tuple[int, ...]]
    chain: SChain

    @property
    def algebra(self):
        return lie_algebra(self.spec)

    def omega_forms(self) -> list[Form]:
        return [self.space.atom(name) for _, name in self.omega]

    def omega_element(self):
        """ω as a map from Hall index to 1-form (degree one only)."""
        alg = self.algebra
        return {alg.index[(g,)]: self.space.atom(name) for g, name in self.omega}


def _chart_vars(chart: PuncturedLine | ProductChart) -> tuple[str, ...]:
    if isinstance(chart, PuncturedLine):
        return (chart.var,)
    return tuple(f.var for f in chart.factors)


def universal_form_space(chart: PuncturedLine | ProductChart) -> tuple[FormSpace, list[list[str]]]:
    coords = _chart_vars(chart)
    lines = [chart] if isinstance(chart, PuncturedLine) else list(chart.factors)
    groups: list[list[str]] = []
    ones: dict[str, Form] = {}
    for line in lines:
        atoms = dlog_atoms(line, coords)
        groups.append(list(atoms))
        ones.update(atoms)
    twos: dict[str, Form] = {}
    for a in range(len(groups)):
        for b in range(a + 1, len(groups)):
            for x in groups[a]:
                for y in groups[b]:
                    twos[f"{x}^{y}"] = wedge_forms(ones[x], ones[y])
    return FormSpace(coords, {}, ones, twos), groups


def build_universal(chart: PuncturedLine | ProductChart, depth: int) -> UniversalConnection:
    """Universal ``depth``-unipotent connection: left multiplication by ω on the enveloping algebra."""
    if depth < 1:
        raise ValueError("depth must be at least one")
    lines = [chart] if isinstance(chart, PuncturedLine) else list(chart.factors)
    for line in lines:
        if len(line.punctures) < 3 and depth >= 2:
            raise UnsupportedChart("a line with fewer than three punctures is abelian; depth at least 2 is unsupported")
        if "inf" not in line.punctures and depth >= 2:
            raise UnsupportedChart("depth at least 2 needs the chart to puncture infinity")
    space, groups = universal_form_space(chart)
    m = sum(len(g) for g in groups)
    relations = []
    offsets = []
    pos = 0
    for g in groups:
        offsets.append(pos)
        pos += len(g)
    for a in range(len(groups)):
        for b in range(a + 1, len(groups)):
            for i in range(len(groups[a])):
                for j in range(len(groups[b])):
                    relations.append(f"[x{offsets[a] + i + 1},x{offsets[b] + j + 1}]")
    spec = LieAlgebraSpec(m, depth, "ideal", ideal=tuple(relations)) if relations else LieAlgebraSpec(m, depth)
    env = enveloping(spec)
    names = [n for g in groups for n in g]
    omega = list(enumerate(names))
    basis = [w for k in range(depth + 1) for w in env.basis[k]]
    index = {w: i for i, w in enumerate(basis)}
    blocks = env.dims()
    size = len(basis)
    zero = Form(space.chart, 1, {}, space)
    matrix = [[zero] * size for _ in range(size)]
    for col, w in enumerate(basis):
        if len(w) >= depth:
            continue
        for g, name in omega:
            img = env.normal_form({(g,) + w: Fraction(1)})
            for v, c in img.items():
                r = index[v]
                matrix[r] = list(matrix[r])
                matrix[r][col] = matrix[r][col] + space.atom(name).scale(c)
    conn = Connection(space, blocks, matrix)
    chain = build_S_chain(space, [{n: Fraction(1)} for n in names], depth)
    return UniversalConnection(chart, depth, spec, env, space, omega, conn, basis, chain)
