"""Dimension bookkeeping for global Galois cohomology.

Nothing here computes cohomology.  A representation is described by the
numbers the finiteness arguments consume, such as its dimension and the
eigenspace dimensions of complex conjugations.  The functions combine
them through the Euler characteristic formula and the Artin–Tate formula,
with Shapiro's lemma applied at the level of dimensions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Mapping, Sequence

from .errors import BadTwist, DimensionMismatch, InvalidData
from .linalg import rank


@dataclass(frozen=True)
class RepDescriptor:
    """A p-adic Galois representation as a bundle of dimensions.

    ``real_eigen`` lists ``(d_plus, d_minus)`` for each real place; its length
    is the number of real places.  When ``soule`` is set the representation
    is declared to be ``Q_p(n)`` with ``n > 1`` and ``h^2`` is forced to zero.
    """

    dimension: int
    real_eigen: tuple[tuple[int, int], ...] = ()
    complex_places: int = 0
    h0: int = 0
    h2: int = 0
    weight: int = 0
    label: str = ""
    soule: bool = False
    induced_degree: int | None = None

    def __post_init__(self) -> None:
        if self.dimension < 0 or self.h0 < 0 or self.h2 < 0 or self.complex_places < 0:
            raise InvalidData("dimensions and cohomology ranks must be nonnegative")
        for plus, minus in self.real_eigen:
            if plus < 0 or minus < 0 or plus + minus != self.dimension:
                raise InvalidData(f"eigenspace dimensions ({plus}, {minus}) do not add up to {self.dimension}")

    @property
    def real_places(self) -> int:
        return len(self.real_eigen)

    @property
    def degree(self) -> int:
        return self.real_places + 2 * self.complex_places

    def direct_sum(self, other: "RepDescriptor") -> "RepDescriptor":
        if self.real_places != other.real_places or self.complex_places != other.complex_places:
            raise DimensionMismatch("direct sums need the same number field")
        eig = tuple((a + c, b + d) for (a, b), (c, d) in zip(self.real_eigen, other.real_eigen))
        return RepDescriptor(self.dimension + other.dimension, eig, self.complex_places,
                             self.h0 + other.h0, self.effective_h2 + other.effective_h2,
                             label=f"{self.label}+{other.label}".strip("+"))

    @property
    def effective_h2(self) -> int:
        return 0 if self.soule else self.h2

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "RepDescriptor":
        eig = data.get("real_eigen")
        if eig is None:
            r1 = int(data.get("r1", 1 if "r2" not in data else 0))
            plus, minus = int(data.get("d_plus", 0)), int(data.get("d_minus", 0))
            eig = [(plus, minus)] * r1
        return cls(
            dimension=int(data["dimension"]),
            real_eigen=tuple((int(a), int(b)) for a, b in eig),
            complex_places=int(data.get("r2", data.get("complex_places", 0))),
            h0=int(data.get("h0", 0)),
            h2=int(data.get("h2", 0)),
            weight=int(data.get("weight", 0)),
            label=str(data.get("label", "")),
            soule=bool(data.get("soule", False)),
            induced_degree=data.get("induced_degree"),
        )

    def to_json(self) -> dict:
        return {"label": self.label, "dimension": self.dimension,
                "real_eigen": [list(x) for x in self.real_eigen], "r2": self.complex_places,
                "h0": self.h0, "h2": self.h2, "weight": self.weight, "soule": self.soule}


def euler_h1(rep: RepDescriptor) -> int:
    """``h^1 = h^2 + h^0 + Σ_real dim W^{c=-1} + (#complex places)·dim W``."""
    return (rep.effective_h2 + rep.h0 + sum(minus for _, minus in rep.real_eigen)
            + rep.complex_places * rep.dimension)


def artin_tate_h1(rep: RepDescriptor, n: int) -> int:
    """``h^1`` of the twist ``W(n)`` of an Artin representation over Q, for ``n > 1``.

    Odd twists see the invariants of complex conjugation, even twists the
    anti-invariants.
    """
    if n <= 1:
        raise BadTwist(f"twist {n} must exceed 1")
    if rep.real_places != 1 or rep.complex_places:
        raise InvalidData("Artin–Tate formula is stated over Q (one real place)")
    plus, minus = rep.real_eigen[0]
    return plus if n % 2 else minus


def twist(rep: RepDescriptor, n: int) -> RepDescriptor:
    """Descriptor of ``W(n)``: conjugation picks up the sign ``(-1)^n``; ``h^0 = h^2 = 0`` for ``n > 1``."""
    if n <= 1:
        raise BadTwist(f"twist {n} must exceed 1")
    eig = tuple((b, a) if n % 2 else (a, b) for a, b in rep.real_eigen)
    return RepDescriptor(rep.dimension, eig, rep.complex_places, 0, 0, rep.weight - 2 * n,
                         label=f"{rep.label}({n})", soule=True)


def local_h1_vanishing(i: int) -> bool:
    """Whether ``H^1`` at primes away from p vanishes for quotients of the ``i``-th graded piece.

    The graded piece has weight ``-2i`` and its Tate dual weight ``2 - 2i``;
    neither is zero exactly when ``i > 1``.
    """
    return -2 * i != 0 and 2 - 2 * i != 0


@dataclass
class InducedReport:
    dimension: int
    local_factors: list[int]


def induced_dims(base_dim: int, degree: int) -> InducedReport:
    """Shapiro bookkeeping: induction from a degree-``d`` subfield multiplies dimensions by ``d``."""
    if degree < 1:
        raise InvalidData("subfield degree must be positive")
    if base_dim < 0:
        raise InvalidData("dimension must be nonnegative")
    return InducedReport(base_dim * degree, [base_dim] * degree)


@dataclass
class SubspaceData:
    ambient: int
    first: list[list[Fraction]]
    second: list[list[Fraction]]

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "SubspaceData":
        conv = lambda rows: [[Fraction(x) for x in r] for r in rows]  # noqa: E731
        return cls(int(data["ambient"]), conv(data["first"]), conv(data["second"]))


@dataclass
class IntersectionReport:
    dim_first: int
    dim_second: int
    dim_sum: int
    dim_intersection: int
    codim_in_first: int


def intersection_codim(data: SubspaceData) -> IntersectionReport:
    """Dimension of ``A ∩ B`` and its codimension in ``A``; bases are given as lists of vectors."""
    for vecs in (data.first, data.second):
        if any(len(v) != data.ambient for v in vecs):
            raise DimensionMismatch("basis vector length differs from the ambient dimension")
    dim_a = rank(data.first) if data.first else 0
    dim_b = rank(data.second) if data.second else 0
    if dim_a != len(data.first) or dim_b != len(data.second):
        raise DimensionMismatch("bases must be linearly independent")
    stacked = list(data.first) + list(data.second)
    dim_sum = rank(stacked) if stacked else 0
    inter = dim_a + dim_b - dim_sum
    return IntersectionReport(dim_a, dim_b, dim_sum, inter, dim_a - inter)


@dataclass
class LedgerRow:
    degree: int
    dimension: int
    h1: int
    local_vanishing: bool


@dataclass
class H1Ledger:
    rows: list[LedgerRow] = field(default_factory=list)

    def totals(self) -> tuple[int, int]:
        return sum(r.dimension for r in self.rows), sum(r.h1 for r in self.rows)

    def to_text(self) -> str:
        lines = ["degree  dim  h1  local_h1_zero"]
        for r in self.rows:
            lines.append(f"{r.degree:>6}  {r.dimension:>3}  {r.h1:>2}  {str(r.local_vanishing).lower()}")
        dim, h1 = self.totals()
        lines.append(f"total   {dim:>3}  {h1:>2}")
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {"rows": [r.__dict__ for r in self.rows],
                "total_dimension": self.totals()[0], "total_h1": self.totals()[1]}


def h1_ledger(graded: Sequence[tuple[int, RepDescriptor]], twisted: bool = True) -> H1Ledger:
    """Per-degree table of ``h^1``.

    ``graded`` pairs a degree ``i`` with an Artin descriptor ``W_i``; with
    ``twisted`` the piece is ``W_i(i)`` and the Artin–Tate formula applies
    from degree 2 on, otherwise the Euler characteristic formula is used.
    """
    rows = []
    for i, rep in graded:
        if twisted and i > 1:
            h1 = artin_tate_h1(rep, i)
        else:
            h1 = euler_h1(rep)
        rows.append(LedgerRow(i, rep.dimension, h1, local_h1_vanishing(i)))
    return H1Ledger(rows)
