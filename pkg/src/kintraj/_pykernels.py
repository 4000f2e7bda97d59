"""Pure-Python term-map kernels.

A term map is a ``dict`` from ``(r_numerator, sigma_exponent)`` to a nonzero
``Fraction``; the r-exponent numerator is taken over a denominator shared by
every operand of a call.  The compiled module ``_ckernels`` exposes the same
three functions.
"""

from fractions import Fraction
from itertools import combinations

BACKEND = "python"


def poly_mul(a, b):
    out = {}
    get = out.get
    for (e1, s1), c1 in a.items():
        for (e2, s2), c2 in b.items():
            key = (e1 + e2, s1 + s2)
            prev = get(key)
            out[key] = c1 * c2 if prev is None else prev + c1 * c2
    return {k: v for k, v in out.items() if v}


def poly_axpy(acc, a, scale):
    """Accumulate ``scale * a`` into ``acc`` in place (zeros are dropped)."""
    for key, c in a.items():
        v = acc.get(key, 0) + scale * c
        if v:
            acc[key] = v
        else:
            acc.pop(key, None)
    return acc


def expand_minors(rows):
    """Memoized Laplace expansion along successive rows.

    ``rows`` is a square list of lists of term maps.  Returns ``(det, minors)``
    where ``minors[j]`` is the determinant of the leading ``n - 1`` rows with
    column ``j`` deleted.
    """
    n = len(rows)
    if n == 0:
        return {(0, 0): Fraction(1)}, []
    prev = {0: {(0, 0): Fraction(1)}}
    for m in range(1, n + 1):
        row = rows[m - 1]
        cur = {}
        for cols in combinations(range(n), m):
            full = 0
            for c in cols:
                full |= 1 << c
            acc = {}
            for pos, j in enumerate(cols):
                entry = row[j]
                sub = prev[full & ~(1 << j)]
                if not entry or not sub:
                    continue
                sign = -1 if (m - 1 + pos) % 2 else 1
                poly_axpy(acc, poly_mul(entry, sub), sign)
            cur[full] = acc
        if m < n:
            prev = cur
    all_cols = (1 << n) - 1
    minors = [prev[all_cols & ~(1 << j)] for j in range(n)]
    return cur[all_cols], minors
