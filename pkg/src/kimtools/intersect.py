"""Jet-level analysis of forms restricted to parameterized subvarieties.

A subvariety ``V`` is given by a rational parameterization of some ambient
coordinates (chart coordinates ``z`` and Lie coordinates ``t``) together
with a smooth base point in parameter space.  Forms are pulled back exactly
by the chain rule; ranks are computed either on jets (a certified lower
bound) or over the function field of the parameters.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Mapping, Sequence

from .connection import UniversalConnection
from .errors import NotARelation, PoleOnV
from .exactalg import Form, Poly, RationalFunction, TruncSeries, jet_expand, parse_expression
from .linalg import nullspace, rank, rref, solve
from .transport import compute_theta, lie_coordinate_names


@dataclass
class FormalSubvariety:
    """``V`` given by ``ambient coordinate -> rational function of the parameters``."""

    params: tuple[str, ...]
    parameterization: dict[str, RationalFunction]
    base: dict[str, Fraction] = field(default_factory=dict)
    equations: list[Poly] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.params = tuple(self.params)
        self.parameterization = {k: RationalFunction.coerce(v, self.params).over(self.params)
                                 for k, v in self.parameterization.items()}
        self.base = {p: Fraction(self.base.get(p, 0)) for p in self.params}
        for eq in self.equations:
            value = eq.evaluate(self.parameterization)
            if not value == 0:
                raise ValueError(f"parameterization does not satisfy {eq}")

    @classmethod
    def from_strings(cls, params: Sequence[str], parameterization: Mapping[str, str],
                     base: Mapping[str, Any] | None = None, equations: Sequence[str] = (),
                     ambient: Sequence[str] | None = None) -> "FormalSubvariety":
        params = tuple(params)
        param = {k: parse_expression(str(v), params) for k, v in parameterization.items()}
        amb = tuple(ambient) if ambient else tuple(parameterization)
        eqs = [parse_expression(e, amb).num for e in equations]
        return cls(params, param, {k: Fraction(v) for k, v in (base or {}).items()}, eqs)

    @property
    def dimension_bound(self) -> int:
        return len(self.params)

    def point(self) -> dict[str, RationalFunction]:
        return self.parameterization


def restrict_function(f: Any, V: FormalSubvariety) -> RationalFunction:
    """Substitute the parameterization into a rational function of ambient coordinates."""
    if isinstance(f, (int, Fraction)):
        return RationalFunction.coerce(f, V.params)
    if isinstance(f, str):
        f = parse_expression(f, tuple(V.parameterization) + V.params)
    f = RationalFunction.coerce(f)
    point = {}
    for v in f.vars:
        if v in V.parameterization:
            point[v] = V.parameterization[v]
        elif v in V.params:
            point[v] = RationalFunction.coerce(Poly.var(v, V.params))
    try:
        value = f.evaluate(point)
    except ZeroDivisionError as exc:
        raise PoleOnV("function has a pole along V") from exc
    return RationalFunction.coerce(value, V.params).over(V.params)


def _pole_at_base(f: RationalFunction, V: FormalSubvariety) -> bool:
    den = f.den.evaluate(V.base) if f.den.vars else f.den.constant_term()
    return den == 0


def restrict_forms(forms: Sequence[Form], V: FormalSubvariety) -> list[Form]:
    """Exact pullback to parameter differentials; ``PoleOnV`` if a coefficient has a pole at the base."""
    out = []
    derivs: dict[tuple[str, str], RationalFunction] = {}
    for form in forms:
        comps: dict[tuple[int, ...], RationalFunction] = {}
        for (a,), coef in form.comps.items():
            v = form.coords[a]
            if v not in V.parameterization:
                raise ValueError(f"coordinate {v} is not parameterized")
            value = restrict_function(coef, V)
            if _pole_at_base(value, V):
                raise PoleOnV(f"coefficient of d{v} has a pole at the base point")
            for p_idx, p in enumerate(V.params):
                key = (v, p)
                if key not in derivs:
                    derivs[key] = V.parameterization[v].diff(p)
                dv = derivs[key]
                if _is_zero(dv):
                    continue
                term = value * dv
                comps[(p_idx,)] = comps[(p_idx,)] + term if (p_idx,) in comps else term
        out.append(Form(V.params, 1, comps))
    return out


def restricted_matrix(restricted: Sequence[Form], params: Sequence[str]) -> list[list[RationalFunction]]:
    """Rows are the forms, columns the parameter differentials."""
    zero = RationalFunction.coerce(0, tuple(params))
    return [[f.comps.get((p,), zero) for p in range(len(params))] for f in restricted]


def function_rank(restricted: Sequence[Form], params: Sequence[str]) -> int:
    """Exact rank over the function field of the parameters."""
    if not params or not restricted:
        return 0
    return rank(restricted_matrix(restricted, params))


def function_relations(restricted: Sequence[Form], params: Sequence[str]) -> list[list[RationalFunction]]:
    """Basis of relations ``Σ a_i θ_i = 0`` over the function field."""
    n = len(restricted)
    if not params:
        return [[RationalFunction.coerce(int(i == j), ()) for i in range(n)] for j in range(n)]
    mat = restricted_matrix(restricted, params)
    cols = [list(r) for r in zip(*mat)]
    return nullspace(cols, n)


@dataclass
class JetRank:
    rank: int
    relations: list[list[Fraction]]
    order: int


def jet_rank(restricted: Sequence[Form], V: FormalSubvariety, order: int = 8) -> JetRank:
    """Q-rank of the jets (total degree below ``order``) of the restricted forms."""
    if order < 2:
        raise ValueError("jet order must be at least 2")
    n = len(restricted)
    if not V.params:
        return JetRank(0, [[Fraction(int(i == j)) for i in range(n)] for j in range(n)], order)
    rows: dict[tuple, list[Fraction]] = {}
    for col, form in enumerate(restricted):
        jet = jet_expand(form, V.base, order, names=V.params)
        for (p,), s in jet.comps.items():
            for e, c in s.terms.items():
                rows.setdefault((p, e), [Fraction(0)] * n)[col] = c
    matrix = [rows[k] for k in sorted(rows)]
    if not matrix:
        return JetRank(0, [[Fraction(int(i == j)) for i in range(n)] for j in range(n)], order)
    return JetRank(rank(matrix), nullspace(matrix, n), order)


def relation_holds_at(relation: Sequence[Any], restricted: Sequence[Form], V: FormalSubvariety, order: int) -> bool:
    """Whether ``Σ a_i θ_i`` vanishes on jets of total degree below ``order``."""
    if not V.params:
        return True
    combo = Form(V.params, 1, {})
    for a, f in zip(relation, restricted):
        if not _is_zero(a):
            combo = combo + f.scale(a)
    jet = jet_expand(combo, V.base, order, names=V.params)
    return all(s.is_zero() for s in jet.comps.values())


def _is_zero(x: Any) -> bool:
    return x == 0


# ---------------------------------------------------------------------------
# depth-one descent


@dataclass
class DescentStep:
    relation: list[RationalFunction]
    derivation: list[RationalFunction]


@dataclass
class DependencyCertificate:
    kind: str
    coefficients: list[Any]
    kernel_class: Form | None = None
    primitive: RationalFunction | None = None
    witness: tuple[RationalFunction, RationalFunction] | None = None
    span_coefficients: list[RationalFunction] | None = None
    steps: list[DescentStep] = field(default_factory=list)

    def describe(self) -> dict:
        out: dict[str, Any] = {"kind": self.kind,
                               "coefficients": [str(c) for c in self.coefficients]}
        if self.kernel_class is not None:
            out["kernel_class"] = str(self.kernel_class)
        if self.primitive is not None:
            out["primitive"] = str(self.primitive)
        if self.witness is not None:
            out["witness"] = [str(w) for w in self.witness]
        if self.steps:
            out["derivations"] = [[str(x) for x in s.derivation] for s in self.steps]
        return out


def depth1_thetas(omegas: Sequence[Form], lie_names: Sequence[str]) -> list[Form]:
    """``θ_i = dt_i - ω_i`` on the product of Lie coordinates and chart."""
    chart = omegas[0].coords if omegas else ()
    coords = tuple(lie_names) + tuple(chart)
    out = []
    for i, om in enumerate(omegas):
        comps = {(i,): RationalFunction.coerce(1, coords)}
        for (a,), c in om.comps.items():
            key = (coords.index(om.coords[a]),)
            comps[key] = -RationalFunction.coerce(c, om.coords).over(coords)
        out.append(Form(coords, 1, comps))
    return out


def _d_function(f: RationalFunction, params: Sequence[str]) -> list[RationalFunction]:
    return [f.diff(p) for p in params]


def _combine_forms(coeffs: Sequence[RationalFunction], forms: Sequence[Form], coords) -> Form:
    acc = Form(coords, 1, {})
    for a, f in zip(coeffs, forms):
        if not _is_zero(a):
            acc = acc + f.scale(a)
    return acc


def descent_depth1(relation: Sequence[Any], V: FormalSubvariety, omegas: Sequence[Form],
                   lie_names: Sequence[str] | None = None) -> DependencyCertificate:
    """Classify a relation ``Σ a_i θ_i = 0`` on ``V`` with ``θ_i = dt_i - ω_i``.

    (a) constant coefficients: ``Σ a_i ω_i`` restricts to an exact form on
        ``V``; the certificate records the class and the primitive ``Σ a_i t_i``.
    (b) some ``d a_j`` lies in the span of the restricted ``θ_i``: the pair
        ``(1, a_j)`` witnesses non-density.
    (c) otherwise a derivation killing every ``θ_i`` but not every ``d a_j``
        turns the normalized relation into a shorter one.
    """
    lie_names = tuple(lie_names) if lie_names else tuple(f"t{i + 1}" for i in range(len(omegas)))
    thetas = depth1_thetas(omegas, lie_names)
    restricted = restrict_forms(thetas, V)
    params = V.params
    a = [restrict_function(c, V) for c in relation]
    if len(a) != len(thetas):
        raise NotARelation("relation length does not match the number of forms")
    if all(_is_zero(x) for x in a):
        raise NotARelation("relation is trivial")
    if not _combine_forms(a, restricted, params).is_zero():
        raise NotARelation("coefficients do not annihilate the restricted forms")
    mat = restricted_matrix(restricted, params)
    steps: list[DescentStep] = []
    while True:
        da = [_d_function(x, params) for x in a]
        if all(all(_is_zero(c) for c in row) for row in da):
            consts = [x.num.constant_term() for x in a]
            chart = omegas[0].coords
            klass = Form(chart, 1, {})
            for c, om in zip(consts, omegas):
                if c:
                    klass = klass + om.scale(c)
            prim = RationalFunction.coerce(0, params)
            for c, name in zip(consts, lie_names):
                if c and name in V.parameterization:
                    prim = prim + V.parameterization[name] * c
            return DependencyCertificate("constant-relation", consts, klass, prim, steps=steps)
        cols = [list(r) for r in zip(*mat)]
        for j, row in enumerate(da):
            if all(_is_zero(c) for c in row):
                continue
            sol = solve(cols, row)
            if sol is not None:
                return DependencyCertificate("function-relation", a, witness=(RationalFunction.coerce(1, params), a[j]),
                                             span_coefficients=sol, steps=steps)
        k = next(i for i, x in enumerate(a) if not _is_zero(x))
        a = [x / a[k] for x in a]
        da = [_d_function(x, params) for x in a]
        if all(all(_is_zero(c) for c in row) for row in da):
            continue
        kernel = nullspace(mat, len(params))
        chosen = None
        for D in kernel:
            lead = next(x for x in D if not _is_zero(x))
            D = [x / lead for x in D]
            if any(not sum((dx * Dx for dx, Dx in zip(row, D)), RationalFunction.coerce(0, params)).is_zero()
                   for row in da):
                chosen = D
                break
        if chosen is None:
            raise NotARelation("no derivation shortens the relation")
        new = [sum((dx * Dx for dx, Dx in zip(row, chosen)), RationalFunction.coerce(0, params)) for row in da]
        support_old = sum(1 for x in a if not _is_zero(x))
        support_new = sum(1 for x in new if not _is_zero(x))
        if support_new >= support_old or support_new == 0:
            raise NotARelation("descent failed to shorten the relation")
        steps.append(DescentStep(a, chosen))
        a = new


def verify_certificate(cert: DependencyCertificate, V: FormalSubvariety, omegas: Sequence[Form],
                       lie_names: Sequence[str] | None = None) -> bool:
    """Re-check a certificate by exact computation on ``V``."""
    lie_names = tuple(lie_names) if lie_names else tuple(f"t{i + 1}" for i in range(len(omegas)))
    thetas = depth1_thetas(omegas, lie_names)
    restricted = restrict_forms(thetas, V)
    params = V.params
    coeffs = [restrict_function(c, V) for c in cert.coefficients]
    if not _combine_forms(coeffs, restricted, params).is_zero():
        return False
    if cert.kind == "constant-relation":
        pulled = restrict_forms([cert.kernel_class], V)[0]
        dprim = Form(params, 1, {(p,): cert.primitive.diff(v) for p, v in enumerate(params)})
        return pulled == dprim and not cert.kernel_class.is_zero()
    if cert.kind == "function-relation":
        h1, h2 = cert.witness
        dh = [h1 * x for x in _d_function(h2, params)]
        if all(_is_zero(x) for x in dh):
            return False
        combo = _combine_forms(cert.span_coefficients, restricted, params)
        return combo == Form(params, 1, {(p,): x for p, x in enumerate(dh)})
    return cert.kind == "full-rank"


# ---------------------------------------------------------------------------


@dataclass
class UnlikelyReport:
    dim_Z: int
    r_n: int
    dim_V: int
    codim_V: int
    theta_rank: int
    jet_order: int
    codim_W_lower_bound: int
    unlikely_possible: bool
    degenerate: bool
    relations: list[list[Fraction]]
    certificate: DependencyCertificate | None
    reverified: bool = True
    lambda_feasible: list[bool] | None = None

    def to_json(self) -> dict:
        return {
            "dim_Z": self.dim_Z, "r_n": self.r_n, "dim_V": self.dim_V, "codim_V": self.codim_V,
            "theta_rank": self.theta_rank, "jet_order": self.jet_order,
            "codim_W_lower_bound": self.codim_W_lower_bound,
            "unlikely_possible": self.unlikely_possible, "degenerate": self.degenerate,
            "relations": [[str(x) for x in r] for r in self.relations],
            "reverified": self.reverified,
            "certificate": self.certificate.describe() if self.certificate else None,
            "lambda_feasible": self.lambda_feasible,
        }


def parameterization_rank(V: FormalSubvariety) -> int:
    if not V.params:
        return 0
    jac = [[f.diff(p) for p in V.params] for f in V.parameterization.values()]
    return rank(jac)


def unlikely_report(V: FormalSubvariety, universal: UniversalConnection, order: int = 8) -> UnlikelyReport:
    """Compare the θ-rank on ``V`` with the codimension count of an unlikely intersection."""
    system = compute_theta(universal)
    dim_Z = len(universal.space.chart)
    r_n = universal.algebra.dim
    dim_V = parameterization_rank(V)
    codim_V = r_n + dim_Z - dim_V
    if dim_V == 0:
        return UnlikelyReport(dim_Z, r_n, 0, codim_V, 0, order, dim_Z, False, True, [], None)
    restricted = restrict_forms(system.theta, V)
    jr = jet_rank(restricted, V, order)
    bound = dim_Z - dim_V + jr.rank
    deficient = jr.rank < r_n
    cert = None
    if deficient and universal.depth == 1:
        omegas = universal.omega_forms()
        for rel in jr.relations:
            try:
                cert = descent_depth1(rel, V, omegas, system.lie_names)
                break
            except NotARelation:
                continue
    elif not deficient:
        cert = DependencyCertificate("full-rank", [])
    lambdas = None
    if deficient and universal.depth >= 2:
        # no automated descent at higher depth: report the λ feasibility of each relation
        lambdas = []
        for rel in jr.relations:
            try:
                lambdas.append(lambda_feasibility(rel, V, universal).feasible)
            except NotARelation:
                lambdas.append(False)
    reverified = all(relation_holds_at(rel, restricted, V, 2 * order) for rel in jr.relations)
    return UnlikelyReport(dim_Z, r_n, dim_V, codim_V, jr.rank, order, bound, deficient, False, jr.relations, cert,
                          reverified, lambdas)


# ---------------------------------------------------------------------------
# higher-depth relations: the λ feasibility test


@dataclass
class LambdaReport:
    """Outcome of solving ``α_i = Σ_j λ_ij θ_j`` with ``λ_ij - λ_ji = Σ_k b_ijk a_k``."""

    feasible: bool
    lower_count: int
    alphas: list[Form]
    lambdas: list[list[RationalFunction]] | None

    def to_json(self) -> dict:
        return {"feasible": self.feasible, "lower_count": self.lower_count,
                "lambdas": [[str(x) for x in row] for row in self.lambdas] if self.lambdas else None}


def lambda_feasibility(relation: Sequence[Any], V: FormalSubvariety,
                       universal: UniversalConnection) -> LambdaReport:
    """Linear feasibility test for a relation ``Σ a_i θ_i = 0`` at the top depth.

    The coefficients on the top-degree Hall elements must be constants.  With
    ``r`` the number of basis elements below the top degree, the forms
    ``α_i = d a_i - Σ_{j,k} b_ijk a_k ω_j`` (``i <= r``) must lie in the span of
    the restricted ``θ_1 .. θ_r`` with a coefficient matrix whose
    antisymmetric part is ``Σ_k b_ijk a_k``.  The unknowns ``λ_ij`` enter
    linearly, so feasibility is one exact solve over the function field of ``V``.
    """
    system = compute_theta(universal)
    alg = system.algebra
    top = alg.n
    lower = [i for i in range(alg.dim) if alg.degrees[i] < top]
    r = len(lower)
    params = V.params
    a = [restrict_function(c, V) for c in relation]
    if len(a) != alg.dim:
        raise NotARelation("relation length does not match the number of θ forms")
    if all(_is_zero(x) for x in a):
        raise NotARelation("relation is trivial")
    for i in range(alg.dim):
        if alg.degrees[i] == top and not all(_is_zero(a[i].diff(p)) for p in params):
            raise NotARelation("top-degree coefficients must be constant")
    restricted = restrict_forms(system.theta, V)
    if not _combine_forms(a, restricted, params).is_zero():
        raise NotARelation("coefficients do not annihilate the restricted forms")
    omegas = restrict_forms(system.omega, V)
    zero = RationalFunction.coerce(0, params)
    alphas = []
    for i in lower:
        comps = {(p,): a[i].diff(v) for p, v in enumerate(params) if not _is_zero(a[i].diff(v))}
        alpha = Form(params, 1, comps)
        for j in range(alg.dim):
            for k, b in alg.bracket_basis(i, j).items():
                if b and not _is_zero(a[k]):
                    alpha = alpha - omegas[j].scale(a[k] * b)
        alphas.append(alpha)
    # unknown λ_ij sits in column i * r + j
    matrix: list[list[RationalFunction]] = []
    rhs: list[RationalFunction] = []
    for ii in range(r):
        for p in range(len(params)):
            row = [zero] * (r * r)
            for jj, j in enumerate(lower):
                row[ii * r + jj] = restricted[j].comps.get((p,), zero)
            matrix.append(row)
            rhs.append(alphas[ii].comps.get((p,), zero))
    for ii, i in enumerate(lower):
        for jj, j in enumerate(lower):
            if jj <= ii:
                continue
            row = [zero] * (r * r)
            row[ii * r + jj] = RationalFunction.coerce(1, params)
            row[jj * r + ii] = RationalFunction.coerce(-1, params)
            target = zero
            for k, b in alg.bracket_basis(i, j).items():
                if b and not _is_zero(a[k]):
                    target = target + a[k] * b
            matrix.append(row)
            rhs.append(target)
    sol = solve(matrix, rhs) if matrix else []
    if sol is None:
        return LambdaReport(False, r, alphas, None)
    lambdas = [[RationalFunction.coerce(sol[ii * r + jj], params) for jj in range(r)] for ii in range(r)]
    return LambdaReport(True, r, alphas, lambdas)


# ---------------------------------------------------------------------------
# colinearity loci


@dataclass
class Locus:
    kind: str
    polynomials: list[Poly]

    def texts(self) -> list[str]:
        return [str(p) for p in self.polynomials]


def _normalize_poly(p: Poly) -> Poly:
    _, q = p.content_normalized()
    return q


def colinearity_locus(pairs: Sequence[tuple[Form, Form]]) -> Locus:
    """Equations of the locus where each pair of 1-forms is pointwise colinear.

    Every 2×2 minor contributes its numerator, made primitive with positive
    leading coefficient.  All minors zero gives the zero ideal; a nonzero
    constant gives the unit ideal.
    """
    polys: list[Poly] = []
    seen = set()
    for alpha, beta in pairs:
        coords = alpha.coords
        n = len(coords)
        for i in range(n):
            for j in range(i + 1, n):
                a_i = RationalFunction.coerce(alpha.comps.get((i,), 0), coords)
                a_j = RationalFunction.coerce(alpha.comps.get((j,), 0), coords)
                b_i = RationalFunction.coerce(beta.comps.get((i,), 0), coords)
                b_j = RationalFunction.coerce(beta.comps.get((j,), 0), coords)
                minor = a_i * b_j - a_j * b_i
                if minor.is_zero():
                    continue
                p = _normalize_poly(minor.num)
                if p.is_constant():
                    return Locus("unit", [Poly.const(1, p.vars)])
                key = p.to_text()
                if key not in seen:
                    seen.add(key)
                    polys.append(p)
    if not polys:
        return Locus("zero", [])
    return Locus("proper", polys)


def _factor_string(p: Poly) -> tuple[Fraction, list[tuple[str, int]]]:
    import sympy

    syms = sympy.symbols(list(p.vars))
    if not isinstance(syms, (list, tuple)):
        syms = [syms]
    expr = sum(sympy.Rational(c.numerator, c.denominator) * sympy.Mul(*[s ** a for s, a in zip(syms, e)])
               for e, c in p.terms.items())
    const, factors = sympy.factor_list(expr, *syms)
    out = []
    scale = Fraction(int(sympy.fraction(const)[0]), int(sympy.fraction(const)[1]))
    for f, mult in factors:
        fp = sympy.Poly(f, *syms)
        terms = {tuple(int(x) for x in e): Fraction(int(c.p), int(c.q)) for e, c in fp.as_dict().items()}
        q = Poly(p.vars, terms)
        lead = q.leading()[1]
        q = q * (1 / lead)
        scale *= lead ** mult
        out.append((str(q), mult))
    return scale, out


def _format_product(scale: Fraction, factors: list[tuple[str, int]]) -> str:
    parts = []
    for text, mult in sorted(factors, key=lambda f: (" " in f[0], f[0])):
        body = text if (" " not in text) else f"({text})"
        parts.append(body if mult == 1 else f"{body}^{mult}")
    if scale != 1 or not parts:
        if scale == -1 and parts:
            return "-" + "*".join(parts)
        parts.insert(0, str(scale))
    return "*".join(parts)


def colinearity_equation(alpha: Form, beta: Form) -> str:
    """The colinearity condition ``α_1 β_2 = α_2 β_1`` with denominators cleared, as factored products."""
    coords = alpha.coords
    if len(coords) != 2:
        raise ValueError("the factored equation is produced on two-dimensional charts")
    a1 = RationalFunction.coerce(alpha.comps.get((0,), 0), coords)
    a2 = RationalFunction.coerce(alpha.comps.get((1,), 0), coords)
    b1 = RationalFunction.coerce(beta.comps.get((0,), 0), coords)
    b2 = RationalFunction.coerce(beta.comps.get((1,), 0), coords)
    left = a1 * b2
    right = a2 * b1
    lhs = left.num * right.den
    rhs = right.num * left.den
    sl, fl = _factor_string(lhs) if not lhs.is_zero() else (Fraction(0), [])
    sr, fr = _factor_string(rhs) if not rhs.is_zero() else (Fraction(0), [])
    if sl != 0:
        sr, sl = sr / sl, Fraction(1)
    sides = sorted([_format_product(sl, fl) if sl != 0 else "0", _format_product(sr, fr) if sr != 0 else "0"])
    return f"{sides[0]} = {sides[1]}"


def p1_cross_forms() -> tuple[Form, Form]:
    """The pair ``dz1/z1 - dz2/z2`` and ``dz1/(1-z1) - dz2/(1-z2)`` on the square of the thrice-punctured line."""
    chart = ("z1", "z2")
    z1, z2 = Poly.gens(chart)
    alpha = Form(chart, 1, {(0,): 1 / z1, (1,): -(1 / z2)})
    beta = Form(chart, 1, {(0,): 1 / (1 - z1), (1,): -(1 / (1 - z2))})
    return alpha, beta
