"""Finiteness criteria evaluated from arithmetic invariants of a curve.

Rank data and p-adic density claims are inputs.  Each check substitutes
them into an explicit inequality and returns a :class:`CriterionReport`.
The verdict is ``finite`` when the inequality and its side hypotheses
hold.  A base-change Prym witness turns a failure into ``obstructed``;
any other failure is ``inconclusive``, never "infinite", because the
criteria are sufficient conditions only.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping, Sequence

from .cohomdim import RepDescriptor, artin_tate_h1
from .errors import InvalidData, LengthMismatch, MissingFlag, WrongField

FINITE = "finite"
INCONCLUSIVE = "inconclusive"
OBSTRUCTED = "obstructed"


@dataclass
class CoverRecord:
    """A quotient ``X -> X0`` with ``X0`` defined over a subfield, plus its Prym."""

    label: str
    subfield_degree: int
    quotient_genus: int
    quotient_rank: int | None = None
    prym_rank: int | None = None
    quotient_dense: bool = False
    prym_dense: bool = False

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "CoverRecord":
        dens = data.get("density", {})
        return cls(
            label=str(data.get("label", "")),
            subfield_degree=int(data["subfield_degree"]),
            quotient_genus=int(data["quotient_genus"]),
            quotient_rank=data.get("quotient_rank"),
            prym_rank=data.get("prym_rank"),
            quotient_dense=bool(dens.get("quotient", data.get("quotient_dense", False))),
            prym_dense=bool(dens.get("prym", data.get("prym_dense", False))),
        )

    def to_json(self) -> dict:
        return {"label": self.label, "subfield_degree": self.subfield_degree,
                "quotient_genus": self.quotient_genus, "quotient_rank": self.quotient_rank,
                "prym_rank": self.prym_rank,
                "density": {"quotient": self.quotient_dense, "prym": self.prym_dense}}


@dataclass
class ModelRecord:
    """A model of the curve over an intermediate field of the given degree."""

    label: str
    field_degree: int
    rank: int
    genus: int | None = None


@dataclass
class CurveData:
    genus: int
    degree: int
    r1: int
    r2: int
    rank: int | None = None
    h1f: int | None = None
    rho: int | None = None
    hom_vanishing: bool | None = None
    density: bool = False
    sha_finite: bool = False
    covers: list[CoverRecord] = field(default_factory=list)
    models: list[ModelRecord] = field(default_factory=list)
    label: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.degree < 1 or self.r1 < 0 or self.r2 < 0 or self.r1 + 2 * self.r2 != self.degree:
            raise InvalidData(f"signature ({self.r1}, {self.r2}) is inconsistent with degree {self.degree}")
        for name in ("rank", "h1f", "rho"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise InvalidData(f"{name} must be nonnegative")

    @property
    def selmer_rank(self) -> int | None:
        if self.h1f is not None:
            return self.h1f
        return self.rank if self.sha_finite else None

    @property
    def effective_hom_vanishing(self) -> bool:
        # a single embedding leaves nothing to compare
        return True if self.degree == 1 else bool(self.hom_vanishing)

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "CurveData":
        def value(key: str) -> Any:
            v = data.get(key)
            return v["value"] if isinstance(v, Mapping) else v

        field_data = data.get("field", {})
        return cls(
            genus=int(value("genus")),
            degree=int(field_data.get("degree", value("degree") or 1)),
            r1=int(field_data.get("r1", value("r1") if value("r1") is not None else 1)),
            r2=int(field_data.get("r2", value("r2") or 0)),
            rank=value("mw_rank") if value("mw_rank") is not None else value("rank"),
            h1f=value("h1f"),
            rho=value("rho"),
            hom_vanishing=value("hom_vanishing"),
            density=bool(value("density") or False),
            sha_finite=bool(value("sha_finite") or False),
            covers=[CoverRecord.from_json(c) for c in data.get("covers", [])],
            models=[ModelRecord(str(m.get("label", "")), int(m["field_degree"]),
                                int(m["rank"]["value"] if isinstance(m["rank"], Mapping) else m["rank"]),
                                m.get("genus")) for m in data.get("models", [])],
            label=str(data.get("label", "")),
        )

    def to_json(self) -> dict:
        return {"label": self.label, "genus": self.genus,
                "field": {"degree": self.degree, "r1": self.r1, "r2": self.r2},
                "mw_rank": self.rank, "h1f": self.h1f, "rho": self.rho,
                "hom_vanishing": self.hom_vanishing, "density": self.density,
                "covers": [c.to_json() for c in self.covers]}


@dataclass
class CriterionReport:
    criterion: str
    inputs: dict
    bound: Any
    verdict: str
    witness: CoverRecord | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def verdict_text(self) -> str:
        if self.verdict == OBSTRUCTED:
            return "obstructed: base-change Prym"
        return self.verdict

    def to_json(self) -> dict:
        return {"criterion": self.criterion, "inputs": self.inputs,
                "bound": str(self.bound) if isinstance(self.bound, Fraction) else self.bound,
                "verdict": self.verdict_text,
                "witness": self.witness.to_json() if self.witness else None, "notes": self.notes}


def _require_genus(c: CurveData) -> None:
    if c.genus < 2:
        raise InvalidData("projective criteria need genus at least 2")


def prym_obstruction(c: CurveData) -> CoverRecord | None:
    """A cover to a curve over a proper subfield whose quotient and Prym both have dense Mordell–Weil image."""
    for cover in c.covers:
        if cover.subfield_degree < c.degree and c.degree % cover.subfield_degree == 0 \
                and cover.quotient_dense and cover.prym_dense:
            return cover
    return None


def depth1_check(c: CurveData) -> CriterionReport:
    """Depth-one test: ``r <= d(g-1)`` together with vanishing of Hom between conjugate Jacobians."""
    _require_genus(c)
    if c.rank is None:
        raise InvalidData("Mordell–Weil rank is required")
    bound = c.degree * (c.genus - 1)
    inputs = {"g": c.genus, "d": c.degree, "r": c.rank, "hom_vanishing": c.effective_hom_vanishing}
    if c.rank <= bound and c.effective_hom_vanishing:
        return CriterionReport("depth1", inputs, bound, FINITE)
    if not c.effective_hom_vanishing:
        witness = prym_obstruction(c)
        if witness is not None:
            return CriterionReport("depth1", inputs, bound, OBSTRUCTED, witness,
                                   ["the quotient descends to a proper subfield with dense points"])
    return CriterionReport("depth1", inputs, bound, INCONCLUSIVE)


def qc_bound(c: CurveData, modified: bool = False) -> int:
    """``d(g-1) + (d - r1 - r2 + 1)(ρ - 1)``, or ``dg + ...`` for the modified Selmer variant."""
    if c.rho is None:
        raise InvalidData("Néron–Severi rank is required")
    head = c.degree * c.genus if modified else c.degree * (c.genus - 1)
    return head + (c.degree - c.r1 - c.r2 + 1) * (c.rho - 1)


def qc_depth2_check(c: CurveData, modified: bool = False) -> CriterionReport:
    """Depth-two test on the Selmer rank (or Mordell–Weil rank with ``modified``)."""
    _require_genus(c)
    bound = qc_bound(c, modified)
    value = c.rank if modified else c.selmer_rank
    if value is None:
        raise InvalidData("Selmer rank (h1f) is required" if not modified else "Mordell–Weil rank is required")
    inputs = {"g": c.genus, "d": c.degree, "r1": c.r1, "r2": c.r2, "rho": c.rho,
              "rank" if modified else "h1f": value, "hom_vanishing": c.effective_hom_vanishing,
              "modified": modified}
    ok = value <= bound and c.effective_hom_vanishing
    notes = [] if c.effective_hom_vanishing else ["Hom vanishing between conjugate Jacobians not established"]
    return CriterionReport("qc2", inputs, bound, FINITE if ok else INCONCLUSIVE, notes=notes)


def imag_quadratic_check(c: CurveData) -> CriterionReport:
    """Depth two over an imaginary quadratic field: Selmer rank ``2g``, density and ``ρ > 1``."""
    if (c.r1, c.r2) != (0, 1):
        raise WrongField(f"signature ({c.r1}, {c.r2}) is not imaginary quadratic")
    h1f = c.selmer_rank
    if h1f is None or c.rho is None:
        raise InvalidData("h1f and rho are required")
    inputs = {"g": c.genus, "h1f": h1f, "rho": c.rho, "density": c.density}
    ok = h1f == 2 * c.genus and c.density and c.rho > 1
    return CriterionReport("imquad", inputs, 2 * c.genus, FINITE if ok else INCONCLUSIVE)


@dataclass
class SiksekAudit:
    models: list[tuple[ModelRecord, int, bool]]
    condition_satisfied: bool
    obstruction: CoverRecord | None

    @property
    def summary(self) -> str:
        head = "Siksek condition satisfied" if self.condition_satisfied else "Siksek condition fails"
        if not self.condition_satisfied:
            bad = ", ".join(m.label for m, _, ok in self.models if not ok)
            head += f" ({bad})"
        if self.obstruction is not None:
            head += "; yet the depth-one locus is infinite (base-change Prym obstruction)"
        return head

    def to_json(self) -> dict:
        return {"models": [{"label": m.label, "field_degree": m.field_degree, "rank": m.rank,
                            "bound": b, "holds": ok} for m, b, ok in self.models],
                "condition_satisfied": self.condition_satisfied,
                "obstruction": self.obstruction.to_json() if self.obstruction else None,
                "summary": self.summary}


def siksek_question_audit(c: CurveData) -> SiksekAudit:
    """Check ``rank <= (g-1)[L:Q]`` for every model over an intermediate field and look for a Prym witness."""
    models = list(c.models)
    if not models and c.rank is not None:
        models = [ModelRecord(c.label or "X", c.degree, c.rank, c.genus)]
    rows = []
    for m in models:
        g = m.genus if m.genus is not None else c.genus
        bound = (g - 1) * m.field_degree
        rows.append((m, bound, m.rank <= bound))
    return SiksekAudit(rows, all(ok for _, _, ok in rows), prym_obstruction(c))


# ---------------------------------------------------------------------------


@dataclass
class MarginReport:
    margin: int
    verdict: str
    terms: list[int]

    def to_json(self) -> dict:
        return {"margin": self.margin, "verdict": self.verdict, "terms": self.terms}


def more_inequality_eval(dims: Sequence[int], h1: Sequence[int], kernels: Sequence[int],
                         dim_Z: int) -> MarginReport:
    """Margin ``Σ dims - dim Z - Σ h1 - Σ kernels``; finite when nonnegative.

    ``kernels`` may be one shorter than ``dims``: the kernel term stops one
    degree early.
    """
    n = len(dims)
    if len(h1) != n or len(kernels) not in (n, n - 1):
        raise LengthMismatch(f"lengths {len(dims)}, {len(h1)}, {len(kernels)} are inconsistent")
    ker = list(kernels) + [0] * (n - len(kernels))
    terms = [int(a) - int(b) - int(k) for a, b, k in zip(dims, h1, ker)]
    margin = sum(terms) - dim_Z
    return MarginReport(margin, FINITE if margin >= 0 else INCONCLUSIVE, terms)


@dataclass
class DeficitReport:
    case: int
    deficits: list[Fraction]
    nondecreasing: bool
    first_positive: int | None

    def to_json(self) -> dict:
        return {"case": self.case, "deficits": [str(x) for x in self.deficits],
                "nondecreasing": self.nondecreasing, "first_positive": self.first_positive}


def _report(case: int, partial: list[Fraction]) -> DeficitReport:
    nondec = all(b >= a for a, b in zip(partial, partial[1:]))
    first = next((i + 1 for i, x in enumerate(partial) if x > 0), None)
    return DeficitReport(case, partial, nondec, first)


def growth_deficit(case: int, params: Mapping[str, Any], n: int) -> DeficitReport:
    """Partial sums of the dimension deficit driving the growth argument.

    case 1 (punctured line): ``params`` holds ``dims`` (graded dimensions,
    degree 1 first), optional ``eigen`` pairs ``(d+, d-)`` per degree
    (default: conjugation acts trivially), ``s`` (h^1 in degree one),
    ``dim_Z`` and optional ``kernels``; the flags ``soule`` and ``iwasawa``
    must be set.  From degree 2 on ``h^1`` follows the Artin–Tate parity rule.

    case 3 (CM elliptic curve minus the origin): ``abelian`` is the
    contribution of degrees 1 and 2, and every degree ``>= 3`` contributes
    one dimension.  ``exceptional_h1`` maps the finitely many degrees with
    nonzero ``h^1`` to their values; needs ``iwasawa``.

    case 4 (cover of a CM curve): ``dims`` and ``minus`` give ``dim W_i`` and
    ``dim W_i^{c=-1}``; the constant ``B`` and genus ``g`` bound the ``h^2``
    contribution by ``2 B n^(2g-1)``.
    """
    if n < 1:
        raise InvalidData("depth must be positive")
    if case == 1:
        for flag in ("soule", "iwasawa"):
            if not params.get(flag):
                raise MissingFlag(f"case 1 needs the '{flag}' input")
        dims = list(params["dims"])
        if len(dims) < n:
            raise LengthMismatch(f"need {n} graded dimensions, got {len(dims)}")
        eigen = params.get("eigen") or [(d, 0) for d in dims]
        kernels = list(params.get("kernels", [])) + [0] * n
        s = int(params.get("s", 0))
        dim_Z = int(params.get("dim_Z", 1))
        total = Fraction(-dim_Z)
        partial = []
        for i in range(1, n + 1):
            d = dims[i - 1]
            if i == 1:
                h1 = s
            else:
                plus, minus = eigen[i - 1]
                h1 = artin_tate_h1(RepDescriptor(d, ((plus, minus),)), i)
            total += d - h1 - kernels[i - 1]
            partial.append(total)
        return _report(case, partial)
    if case == 3:
        if not params.get("iwasawa"):
            raise MissingFlag("case 3 needs the 'iwasawa' input")
        abelian = list(params.get("abelian", [0, 0]))
        exceptional = {int(k): int(v) for k, v in dict(params.get("exceptional_h1", {})).items()}
        dim_Z = int(params.get("dim_Z", 0))
        total = Fraction(-dim_Z)
        partial = []
        for i in range(1, n + 1):
            contrib = abelian[i - 1] if i <= 2 and i - 1 < len(abelian) else (1 if i >= 3 else 0)
            total += contrib - exceptional.get(i, 0)
            partial.append(total)
        return _report(case, partial)
    if case == 4:
        if params.get("B") is None:
            raise MissingFlag("case 4 needs the constant 'B'")
        B = Fraction(params["B"])
        g = int(params["g"])
        dims, minus = list(params["dims"]), list(params["minus"])
        if len(dims) < n or len(minus) < n:
            raise LengthMismatch("dims and minus must cover the requested depth")
        partial = []
        running = Fraction(0)
        for i in range(1, n + 1):
            running += dims[i - 1] - minus[i - 1]
            partial.append(running - 2 * B * Fraction(i) ** (2 * g - 1))
        return _report(case, partial)
    raise InvalidData(f"unknown growth case {case}")


# ---------------------------------------------------------------------------


def fixture_path(name: str = "siksek_counterexample.json") -> Path:
    return Path(__file__).with_name("fixtures") / name


def load_curve(path: str | Path) -> tuple[CurveData, dict]:
    raw = json.loads(Path(path).read_text())
    return CurveData.from_json(raw), raw


CRITERIA = ("depth1", "qc2", "imquad", "siksek", "growth")


def run_criterion(name: str, c: CurveData, raw: Mapping[str, Any] | None = None) -> dict:
    if name == "depth1":
        return depth1_check(c).to_json()
    if name == "qc2":
        return qc_depth2_check(c, modified=bool((raw or {}).get("modified_selmer"))).to_json()
    if name == "imquad":
        return imag_quadratic_check(c).to_json()
    if name == "siksek":
        return siksek_question_audit(c).to_json()
    if name == "growth":
        g = dict((raw or {}).get("growth", {}))
        if not g:
            raise MissingFlag("no growth data in the input")
        return growth_deficit(int(g.pop("case")), g, int(g.pop("n"))).to_json()
    raise InvalidData(f"unknown criterion {name}")
