"""Exact linear algebra over fields.

The dense routines work for any field type supporting ``+ - * /`` and
comparison with zero (``Fraction``, ``RationalFunction``).  The sparse
:class:`Echelon` keeps a semi-reduced basis of dict vectors and is the
workhorse for graded Lie and enveloping algebra computations.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Any, Callable, Hashable, Iterable, Sequence


def _is_zero(x: Any) -> bool:
    return x == 0


def rref(matrix: Sequence[Sequence[Any]]) -> tuple[list[list[Any]], list[int]]:
    """Reduced row echelon form and pivot columns of a dense matrix."""
    rows = [list(r) for r in matrix]
    if not rows:
        return [], []
    ncols = len(rows[0])
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        pivot_row = None
        for i in range(r, len(rows)):
            if not _is_zero(rows[i][c]):
                pivot_row = i
                break
        if pivot_row is None:
            continue
        rows[r], rows[pivot_row] = rows[pivot_row], rows[r]
        inv = 1 / rows[r][c] if not isinstance(rows[r][c], int) else Fraction(1, rows[r][c])
        rows[r] = [x * inv for x in rows[r]]
        for i in range(len(rows)):
            if i != r and not _is_zero(rows[i][c]):
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    return rows[:r], pivots


def rank(matrix: Sequence[Sequence[Any]]) -> int:
    return len(rref(matrix)[1])


def nullspace(matrix: Sequence[Sequence[Any]], ncols: int | None = None) -> list[list[Any]]:
    """Basis of ``{x : A x = 0}``, one vector per free column."""
    if ncols is None:
        ncols = len(matrix[0]) if matrix else 0
    if not matrix:
        return [[Fraction(int(i == j)) for i in range(ncols)] for j in range(ncols)]
    reduced, pivots = rref(matrix)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        v: list[Any] = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for row, p in zip(reduced, pivots):
            v[p] = -row[f]
        basis.append(v)
    return basis


def solve(matrix: Sequence[Sequence[Any]], rhs: Sequence[Any]) -> list[Any] | None:
    """One solution of ``A x = b`` (free variables set to zero), or None."""
    ncols = len(matrix[0]) if matrix else 0
    aug = [list(row) + [b] for row, b in zip(matrix, rhs)]
    reduced, pivots = rref(aug)
    if ncols in pivots:
        return None
    x: list[Any] = [Fraction(0)] * ncols
    for row, p in zip(reduced, pivots):
        x[p] = row[ncols]
    return x


def transpose(matrix: Sequence[Sequence[Any]]) -> list[list[Any]]:
    return [list(col) for col in zip(*matrix)]


class Echelon:
    """Incrementally built echelon basis of sparse vectors.

    Each stored row has its pivot at its largest column (under ``key``) with
    coefficient one.  ``reduce`` returns the canonical representative of a
    vector modulo the span: the unique vector in the coset supported on
    non-pivot columns.
    """

    def __init__(self, key: Callable[[Hashable], Any] | None = None):
        self.key = key or (lambda c: c)
        self.rows: dict[Hashable, dict[Hashable, Any]] = {}

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def pivots(self) -> list[Hashable]:
        return sorted(self.rows, key=self.key)

    def _top(self, v: dict) -> Hashable:
        return max(v, key=self.key)

    def add(self, vector: dict) -> bool:
        """Insert a vector; returns True when it enlarged the span."""
        v = {c: x for c, x in vector.items() if not _is_zero(x)}
        while v:
            c = self._top(v)
            row = self.rows.get(c)
            if row is None:
                lead = v[c]
                self.rows[c] = {k: x / lead for k, x in v.items()}
                return True
            f = v[c]
            for k, x in row.items():
                y = v.get(k, 0) - f * x
                if _is_zero(y):
                    v.pop(k, None)
                else:
                    v[k] = y
        return False

    def extend(self, vectors: Iterable[dict]) -> None:
        for v in vectors:
            self.add(v)

    def reduce(self, vector: dict) -> dict:
        v = {c: x for c, x in vector.items() if not _is_zero(x)}
        done: dict = {}
        while v:
            c = self._top(v)
            row = self.rows.get(c)
            if row is None:
                done[c] = v.pop(c)
                continue
            f = v[c]
            for k, x in row.items():
                y = v.get(k, 0) - f * x
                if _is_zero(y):
                    v.pop(k, None)
                else:
                    v[k] = y
        return done

    def contains(self, vector: dict) -> bool:
        return not self.reduce(vector)

    def express(self, vector: dict) -> dict | None:
        """Coefficients ``c`` with ``vector = sum c[p] * row[p]``, or None."""
        v = {c: x for c, x in vector.items() if not _is_zero(x)}
        coeffs: dict = {}
        while v:
            c = self._top(v)
            row = self.rows.get(c)
            if row is None:
                return None
            f = v[c]
            coeffs[c] = f
            for k, x in row.items():
                y = v.get(k, 0) - f * x
                if _is_zero(y):
                    v.pop(k, None)
                else:
                    v[k] = y
        return coeffs
