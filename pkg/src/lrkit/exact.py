"""Exact rank and null vectors of rational matrices.

Rows are given sparsely as ``{column: Fraction}`` dicts. The rank is computed
modulo large primes with python-flint; a full row rank modulo ``p`` certifies
full rank over the rationals. When rows are dependent modulo ``p`` the null
space is lifted by Chinese remaindering plus rational reconstruction and each
vector is verified with exact arithmetic, so a returned rank is always exact.
If lifting fails we fall back to plain Fraction elimination.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import gcd, isqrt

import flint

__all__ = ["RankResult", "exact_rank", "fraction_rank", "in_row_span"]


@lru_cache(maxsize=1)
def _primes(count: int = 24) -> tuple:
    out = []
    n = (1 << 62) - 1
    while len(out) < count:
        if flint.fmpz(n).is_prime():
            out.append(n)
        n -= 2
    return tuple(out)


class RankResult:
    """Exact rank of a row set plus a basis of left null vectors (Fractions)."""

    __slots__ = ("rank", "count", "null_vectors")

    def __init__(self, rank: int, count: int, null_vectors: list):
        self.rank = rank
        self.count = count
        self.null_vectors = null_vectors

    def __repr__(self):
        return f"RankResult(rank={self.rank}, count={self.count})"


def _columns(rows: list) -> list:
    cols = set()
    for r in rows:
        cols.update(r)
    return sorted(cols)


def _integer_rows(rows: list) -> tuple:
    """Scale each row by the lcm of its denominators; returns rows and scales."""
    out, scales = [], []
    for r in rows:
        den = 1
        for v in r.values():
            d = v.denominator
            den = den * d // gcd(den, d)
        out.append({c: v.numerator * (den // v.denominator) for c, v in r.items() if v})
        scales.append(den)
    return out, scales


def _mod_matrix(rows: list, colindex: dict, p: int):
    M = flint.nmod_mat(len(rows), len(colindex), p)
    for i, r in enumerate(rows):
        for c, v in r.items():
            M[i, colindex[c]] = v % p
    return M


def _rational_reconstruct(a: int, m: int, bound: int | None = None):
    a %= m
    if bound is None:
        bound = isqrt(m // 2)
    # small integers of either sign are by far the most common entries
    if a <= bound:
        return a
    if m - a <= bound:
        return a - m
    r0, r1 = m, a
    s0, s1 = 0, 1
    while r1 > bound:
        q = r0 // r1
        r0, r1 = r1, r0 - q * r1
        s0, s1 = s1, s0 - q * s1
    if s1 == 0 or abs(s1) > bound or gcd(r1, abs(s1)) != 1:
        return None
    return Fraction(r1, s1)


def _verify(rows: list, vec: dict) -> bool:
    """Exact check that ``sum vec[i] * rows[i] == 0`` for sparse ``vec``."""
    den = 1
    for w in vec.values():
        den = den * w.denominator // gcd(den, w.denominator)
    acc = {}
    for i, w in vec.items():
        if w:
            k = w.numerator * (den // w.denominator)
            for c, v in rows[i].items():
                acc[c] = acc.get(c, 0) + k * v
    return not any(acc.values())


def fraction_rank(rows: list) -> RankResult:
    """Reference Gaussian elimination over ``Fraction`` (slow, always exact)."""
    n = len(rows)
    cols = _columns(rows)
    # augment each row with an identity tag to recover dependencies
    work = [(dict(r), {i: Fraction(1)}) for i, r in enumerate(rows)]
    pivots = []
    rank = 0
    remaining = list(range(n))
    for c in cols:
        piv = next((i for i in remaining if work[i][0].get(c, 0) != 0), None)
        if piv is None:
            continue
        remaining.remove(piv)
        prow, ptag = work[piv]
        pv = prow[c]
        for i in remaining:
            f = work[i][0].get(c, 0)
            if f:
                f = Fraction(f) / pv
                row, tag = work[i]
                for cc, vv in prow.items():
                    row[cc] = row.get(cc, 0) - f * vv
                    if row[cc] == 0:
                        del row[cc]
                for cc, vv in ptag.items():
                    tag[cc] = tag.get(cc, 0) - f * vv
        pivots.append(piv)
        rank += 1
    nulls = []
    for i in remaining:
        tag = work[i][1]
        nulls.append([Fraction(tag.get(j, 0)) for j in range(n)])
    return RankResult(rank, n, nulls)


def exact_rank(rows: list, want_null: bool = True) -> RankResult:
    """Exact rank of the sparse rational rows; null vectors when ``want_null``."""
    n = len(rows)
    if n == 0:
        return RankResult(0, 0, [])
    cols = _columns(rows)
    if not cols:
        nulls = [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]
        return RankResult(0, n, nulls)
    colindex = {c: k for k, c in enumerate(cols)}
    primes = _primes()
    irows, scales = _integer_rows(rows)
    r = _mod_matrix(irows, colindex, primes[0]).rank()
    if r == n:
        return RankResult(n, n, [])
    if not want_null and r == min(n, len(cols)):
        return RankResult(r, n, [])
    # left null space: rows of the rref of the null basis of M^T, lifted over Q
    modulus = 1
    residues = None
    shape = None
    for p in primes:
        Mp = _mod_matrix(irows, colindex, p)
        if Mp.rank() != r:
            continue
        basis, nullity = Mp.transpose().nullspace()
        flat = [int(x) for x in basis.entries()]
        cols = basis.ncols()
        vecs = [[flat[i * cols + j] for i in range(n)] for j in range(nullity)]
        flat = [int(x) for x in flint.nmod_mat(vecs, p).rref()[0].entries()]
        current = []
        for i in range(nullity):
            base = i * n
            current.append({j: flat[base + j] for j in range(n) if flat[base + j]})
        pivots = tuple(min(d) for d in current)
        if shape is None or shape != pivots:
            # pivot pattern changed: restart lifting from this prime
            shape, modulus, residues = pivots, p, current
        else:
            inv = pow(modulus, -1, p)
            lifted_res = []
            for ra, rb in zip(residues, current):
                out = {}
                for k in ra.keys() | rb.keys():
                    a = ra.get(k, 0)
                    out[k] = a + modulus * ((rb.get(k, 0) - a) * inv % p)
                lifted_res.append(out)
            residues = lifted_res
            modulus *= p
        lifted = []
        ok = True
        bound = isqrt(modulus // 2)
        for vec in residues:
            fr = {k: _rational_reconstruct(v, modulus, bound) for k, v in vec.items()}
            if any(f is None for f in fr.values()) or not _verify(irows, fr):
                ok = False
                break
            lifted.append([Fraction(fr.get(k, 0) * d) for k, d in enumerate(scales)])
        if ok:
            return RankResult(n - len(lifted), n, lifted)
    return fraction_rank(rows)


def in_row_span(basis_rows: list, extra_rows: list) -> bool:
    """True iff every row of ``extra_rows`` lies in the span of ``basis_rows``."""
    r0 = exact_rank(basis_rows, want_null=False).rank
    r1 = exact_rank(list(basis_rows) + list(extra_rows), want_null=False).rank
    return r0 == r1
