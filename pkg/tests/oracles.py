"""Independent reference computations used to freeze expected values.

Nothing here imports the package's algorithms.  Lie algebra dimensions come
from Hall-tree enumeration and the Witt formula, cross-checked by brute-force
spans in the free associative algebra.  Series come from closed forms or an
independent recursion with Lagrange inversion.  sympy only supplies exact ranks.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction

import sympy


# ---------------------------------------------------------------------------
# Lie algebra dimensions


def mobius(n: int) -> int:
    result, k = 1, 2
    while k * k <= n:
        if n % k == 0:
            n //= k
            if n % k == 0:
                return 0
            result = -result
        k += 1
    return -result if n > 1 else result


def witt(m: int, n: int) -> int:
    """Dimension of the degree-n piece of the free Lie algebra on m generators."""
    return sum(mobius(n // d) * m ** d for d in range(1, n + 1) if n % d == 0) // n


def hall_set(m: int, n: int) -> list[list]:
    """Hall trees of degree 1..n, grouped by degree.

    Trees are letters (ints) or pairs.  The total order puts higher degree
    first and breaks ties by position of creation, so every tree is smaller
    than its right factor.  A pair (a, b) is a Hall tree when a < b and
    either a is a letter or a = (a1, a2) with a2 >= b.
    """
    order: dict = {}
    by_degree: list[list] = [[]]
    for x in range(m):
        order[x] = (-1, len(order))
        by_degree[0].append(x)

    for k in range(2, n + 1):
        level = []
        for i in range(1, k):
            for a in by_degree[i - 1]:
                for b in by_degree[k - i - 1]:
                    if not order[a] < order[b]:
                        continue
                    if not isinstance(a, int) and order[a[1]] < order[b]:
                        continue
                    level.append((a, b))
        for t in level:
            order[t] = (-k, len(order))
        by_degree.append(level)
    return by_degree


def hall_counts(m: int, n: int) -> list[int]:
    return [len(level) for level in hall_set(m, n)]


def _gauss_rank(rows: list[dict]) -> int:
    """Rank of sparse Fraction rows by plain elimination."""
    pivots: dict = {}
    r = 0
    for row in rows:
        row = {k: Fraction(v) for k, v in row.items() if v}
        while row:
            key = min(row)
            if key in pivots:
                prow = pivots[key]
                f = row[key] / prow[key]
                for k, v in prow.items():
                    row[k] = row.get(k, 0) - f * v
                    if row[k] == 0:
                        del row[k]
            else:
                pivots[key] = row
                r += 1
                break
    return r


def _commutator(a: dict, b: dict) -> dict:
    out: dict = {}
    for u, x in a.items():
        for v, y in b.items():
            out[u + v] = out.get(u + v, 0) + x * y
            out[v + u] = out.get(v + u, 0) - x * y
    return {k: v for k, v in out.items() if v}


def bracket_span_dim(m: int, n: int) -> int:
    """Rank of all left-normed brackets of n letters inside the free associative algebra."""
    rows = []
    for word in itertools.product(range(m), repeat=n):
        elt = {(word[-1],): 1}
        for letter in reversed(word[:-1]):
            elt = _commutator({(letter,): 1}, elt)
        rows.append(elt)
    return _gauss_rank(rows)


def free_metabelian_dim(m: int, n: int) -> int:
    """Graded dimension of the free metabelian Lie algebra: m, then (n-1)·C(m+n-2, n)."""
    if n == 1:
        return m
    return (n - 1) * math.comb(m + n - 2, n)


def surface_metabelian_dim(m: int, n: int) -> int:
    """Free metabelian dimension minus the submodule generated by the symplectic relation."""
    if n == 1:
        return m
    return free_metabelian_dim(m, n) - math.comb(m + n - 3, n - 2)


def surface_dim(g: int, n: int) -> int:
    """Graded dimension of the genus-g surface Lie algebra via power sums of the roots of x^2 - 2g x + 1."""
    p = [2, 2 * g]
    while len(p) <= n:
        p.append(2 * g * p[-1] - p[-2])
    return sum(mobius(n // d) * p[d] for d in range(1, n + 1) if n % d == 0) // n


# ---------------------------------------------------------------------------
# series


def log_one_plus(scale: Fraction, order: int) -> list[Fraction]:
    """Coefficients of log(1 + scale·t) below t^order."""
    return [Fraction(0)] + [Fraction((-1) ** (k + 1)) * scale ** k / k for k in range(1, order)]


def minus_log_one_minus(scale: Fraction, order: int) -> list[Fraction]:
    """Coefficients of -log(1 - scale·t) below t^order."""
    return [Fraction(0)] + [scale ** k / k for k in range(1, order)]


def _mul(a: list, b: list, n: int) -> list:
    out = [Fraction(0)] * n
    for i, x in enumerate(a[:n]):
        if x:
            for j, y in enumerate(b[: n - i]):
                out[i + j] += x * y
    return out


def _inv(a: list, n: int) -> list:
    """Reciprocal of a power series with nonzero constant term."""
    out = [Fraction(0)] * n
    out[0] = 1 / Fraction(a[0])
    for k in range(1, n):
        out[k] = -sum(a[j] * out[k - j] for j in range(1, min(k, len(a) - 1) + 1)) / a[0]
    return out


def formal_log_by_w_recursion(a: tuple, order: int) -> list[Fraction]:
    """Formal logarithm from the recursion w = t^3 + a1 t w + a2 t^2 w + a3 w^2 + a4 t w^2 + a6 w^3.

    With w = t^3 v the Laurent series x = t^-2 / v and y = -t^-3 / v give the
    invariant differential dx / (2y + a1 x + a3), which is expanded in t and
    integrated.  Returns coefficients of t^0 .. t^(order-1).
    """
    a1, a2, a3, a4, a6 = (Fraction(c) for c in a)
    n = order + 2
    w = [Fraction(0)] * (n + 3)
    w[3] = Fraction(1)
    for _ in range(n + 3):
        w2 = _mul(w, w, n + 3)
        w3 = _mul(w2, w, n + 3)
        nxt = [Fraction(0)] * (n + 3)
        nxt[3] = Fraction(1)
        for k in range(n + 3):
            if k >= 1:
                nxt[k] += a1 * w[k - 1] + a4 * w2[k - 1]
            if k >= 2:
                nxt[k] += a2 * w[k - 2]
            nxt[k] += a3 * w2[k] + a6 * w3[k]
        w = nxt
    v = w[3:]
    r = _inv(v, n)  # x = t^-2 r, y = -t^-3 r
    # dx/dt = t^-3 (t r' - 2 r); denominator = t^-3 (-2 r + a1 t r + a3 t^3)
    num = [k * r[k] - 2 * r[k] for k in range(n)]
    den = [-2 * r[k] + (a1 * r[k - 1] if k >= 1 else 0) + (a3 if k == 3 else 0) for k in range(n)]
    omega = _mul(num, _inv(den, n), n)
    return [Fraction(0)] + [omega[k - 1] / k for k in range(1, order)]


def lagrange_inverse(coeffs: list[Fraction]) -> list[Fraction]:
    """Compositional inverse of t + c2 t^2 + ... by Lagrange inversion: [t^n] g = (1/n)[t^(n-1)] (t/f)^n."""
    order = len(coeffs)
    ratio = _inv([Fraction(c) for c in coeffs[1:]], order)
    out = [Fraction(0)] * order
    power = [Fraction(1)] + [Fraction(0)] * (order - 1)
    for n in range(1, order):
        power = _mul(power, ratio, order)
        out[n] = power[n - 1] / n
    return out


# ---------------------------------------------------------------------------
# linear algebra


def sympy_rank(rows) -> int:
    if not rows:
        return 0
    return sympy.Matrix([[sympy.Rational(str(x)) for x in r] for r in rows]).rank()
