# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled term-map kernels (same contract as ``_pykernels``).

Inside ``expand_minors`` exponents are packed into one 64-bit key and
coefficients are carried as ``gmpy2.mpq``; conversion happens only at entry
and exit.
"""

from fractions import Fraction
from itertools import combinations

from gmpy2 import mpq

BACKEND = "cython"

cdef long long SHIFT = 1 << 24
cdef long long OFFSET = 1 << 20


cdef inline long long _pack(long long e, long long s):
    return e * SHIFT + (s + OFFSET)


cdef tuple _unpack(long long key):
    cdef long long e = key // SHIFT
    cdef long long s = key - e * SHIFT - OFFSET
    return (e, s)


cdef dict _packed(dict terms):
    cdef dict out = {}
    for (e, s), c in terms.items():
        out[_pack(e, s)] = mpq(c.numerator, c.denominator)
    return out


cdef dict _unpacked(dict terms):
    cdef dict out = {}
    cdef long long key
    for key, c in terms.items():
        out[_unpack(key)] = Fraction(int(c.numerator), int(c.denominator))
    return out


cdef void _mul_acc(dict acc, dict a, dict b, int sign):
    cdef long long k1, k2, key
    for k1, c1 in a.items():
        for k2, c2 in b.items():
            key = k1 + k2 - OFFSET
            prod = c1 * c2
            if sign < 0:
                prod = -prod
            prev = acc.get(key)
            if prev is None:
                acc[key] = prod
            else:
                acc[key] = prev + prod


cdef dict _prune(dict acc):
    return {k: v for k, v in acc.items() if v != 0}


def poly_mul(dict a, dict b):
    cdef dict out = {}
    for (e1, s1), c1 in a.items():
        for (e2, s2), c2 in b.items():
            key = (e1 + e2, s1 + s2)
            prev = out.get(key)
            out[key] = c1 * c2 if prev is None else prev + c1 * c2
    return {k: v for k, v in out.items() if v}


def poly_axpy(dict acc, dict a, scale):
    for key, c in a.items():
        v = acc.get(key, 0) + scale * c
        if v:
            acc[key] = v
        else:
            acc.pop(key, None)
    return acc


def expand_minors(rows):
    cdef Py_ssize_t n = len(rows)
    cdef Py_ssize_t m, pos, j
    cdef long long full, all_cols
    cdef dict prev, cur, acc, sub, entry
    if n == 0:
        return {(0, 0): Fraction(1)}, []
    packed = [[_packed(entry) for entry in row] for row in rows]
    prev = {0: {_pack(0, 0): mpq(1)}}
    cur = prev
    for m in range(1, n + 1):
        row = packed[m - 1]
        cur = {}
        for cols in combinations(range(n), m):
            full = 0
            for c in cols:
                full |= (<long long>1) << c
            acc = {}
            pos = 0
            for j in cols:
                entry = row[j]
                sub = prev[full & ~((<long long>1) << j)]
                if entry and sub:
                    _mul_acc(acc, entry, sub, -1 if (m - 1 + pos) % 2 else 1)
                pos += 1
            cur[full] = _prune(acc)
        if m < n:
            prev = cur
    all_cols = ((<long long>1) << n) - 1
    minors = [_unpacked(prev[all_cols & ~((<long long>1) << j)]) for j in range(n)]
    return _unpacked(cur[all_cols]), minors
