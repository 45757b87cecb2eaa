"""Independent oracles used by the test suite.

These deliberately avoid the library's minimal-polynomial path: the spectral
oracle factors the characteristic polynomial into irreducibles by trial
division and pairs root sets through sign-flipped factors.
"""

from __future__ import annotations

import itertools

from popdiff.ffalg import FpMatrix, FpPoly, char_poly, negate_argument


def all_monic_polys(p: int, degree: int):
    for tail in itertools.product(range(p), repeat=degree):
        yield FpPoly(list(tail) + [1], p)


def is_irreducible(q: FpPoly) -> bool:
    if q.degree <= 0:
        return False
    if q.degree == 1:
        return True
    for d in range(1, q.degree // 2 + 1):
        for cand in all_monic_polys(q.p, d):
            _, rem = q.divmod(cand)
            if rem.is_zero():
                return False
    return True


def irreducible_factors(q: FpPoly) -> list[FpPoly]:
    """Distinct monic irreducible factors, by recursive trial division."""
    q = q.monic()
    factors: list[FpPoly] = []
    d = 1
    while q.degree > 0:
        found = None
        if d > q.degree // 2:
            found = q  # irreducible remainder
        else:
            for cand in all_monic_polys(q.p, d):
                quo, rem = q.divmod(cand)
                if rem.is_zero():
                    found = cand
                    q = quo
                    break
            if found is None:
                d += 1
                continue
        if found is q:
            factors.append(q)
            break
        factors.append(found)
        while True:
            quo, rem = q.divmod(found)
            if rem.is_zero():
                q = quo
            else:
                break
    out = []
    for f in factors:
        if all(f != g for g in out):
            out.append(f)
    return out


def spectral_oracle(A: FpMatrix) -> bool:
    """True iff no two eigenvalues of A over the algebraic closure are
    negatives of each other: no irreducible factor q of the characteristic
    polynomial has monic q(-t) also dividing it (a self-paired factor has a
    negation-closed root set, which for invertible A forces a +-pair)."""
    cp = char_poly(A)
    factors = irreducible_factors(cp)
    fset = set(factors)
    for q in factors:
        if negate_argument(q).monic() in fset:
            return False
    return True
