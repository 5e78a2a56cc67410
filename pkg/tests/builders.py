"""Random test objects shared by several test modules."""
from __future__ import annotations

import random
from fractions import Fraction

from kimtools.connection import Connection, GaugeTransform, apply_gauge, build_S_chain
from kimtools.exactalg import Form, FormSpace, Poly, RationalFunction

MAX_POWER = 12


def _dz(coords, k, coeff):
    return Form(coords, 1, {(k,): RationalFunction.coerce(coeff, coords)})


def polynomial_form_space(coords):
    """Dlog forms at 0 and 1 in each variable together with polynomial multiples of dz.

    Every 1-form atom is closed, and wedges of dlog forms in different
    variables are declared, so the S-chain built on the dlog forms is valid.
    """
    functions, ones, twos = {}, {}, {}
    for k, v in enumerate(coords):
        z = Poly.var(v, coords)
        for j in range(1, MAX_POWER + 2):
            functions[f"{v}^{j}"] = z ** j
        ones[f"dlog {v}"] = _dz(coords, k, RationalFunction(Poly.const(1, coords), z))
        ones[f"dlog ({v}-1)"] = _dz(coords, k, RationalFunction(Poly.const(1, coords), z - 1))
        for j in range(MAX_POWER + 1):
            ones[f"{v}^{j} d{v}"] = _dz(coords, k, z ** j)
    if len(coords) == 2:
        a, b = coords
        za, zb = Poly.var(a, coords), Poly.var(b, coords)
        for pa in (za, za - 1):
            for pb in (zb, zb - 1):
                twos[f"({pa})({pb})"] = Form(coords, 2, {(0, 1): RationalFunction(Poly.const(1, coords), pa * pb)})
    return FormSpace(coords, functions, ones, twos)


def dlog_names(space, var):
    return [f"dlog {var}", f"dlog ({var}-1)"]


def random_unipotent(rng: random.Random, coords, blocks, degree: int = 1):
    """A flat block-unipotent connection in reduced form, then scrambled by a random polynomial gauge.

    Entries use dlog forms in the first variable; on a product chart the
    corner entry (last block, first block) may also use dlog forms in the
    second variable.  The corner is untouched by gauge conjugation and is
    never the middle of a path, so flatness survives.
    """
    space = polynomial_form_space(coords)
    main = coords[0]
    n = sum(blocks)
    block_of = [b for b, dim in enumerate(blocks) for _ in range(dim)]
    zero = Form(coords, 1, {}, space)
    matrix = [[zero] * n for _ in range(n)]
    for r in range(n):
        for c in range(n):
            if block_of[r] <= block_of[c]:
                continue
            names = dlog_names(space, main)
            if len(coords) == 2 and block_of[r] == len(blocks) - 1 and block_of[c] == 0:
                names = names + dlog_names(space, coords[1])
            matrix[r][c] = space.form({nm: rng.randint(-3, 3) for nm in names})
    conn = Connection(space, blocks, matrix)
    z = Poly.var(main, coords)
    M = [[Poly.const(0, coords)] * n for _ in range(n)]
    for r in range(n):
        for c in range(n):
            if block_of[r] > block_of[c] and not (len(coords) == 2 and block_of[r] == len(blocks) - 1
                                                   and block_of[c] == 0):
                M[r] = list(M[r])
                M[r][c] = sum((Fraction(rng.randint(-2, 2)) * z ** j for j in range(degree + 1)),
                              Poly.const(0, coords))
    gauge = GaugeTransform(coords, blocks, M)
    s1 = [{nm: 1} for v in coords for nm in dlog_names(space, v)]
    chain = build_S_chain(space, s1, len(blocks) - 1)
    return conn, apply_gauge(conn, gauge), chain
