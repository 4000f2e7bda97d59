"""Exact Laurent-Puiseux polynomials in ``r`` and ``sigma`` over the rationals.

Every polynomial is a finite sum of terms ``c * r**q * sigma**n`` with ``c``
and ``q`` rational and ``n`` an integer.  Internally an r-exponent ``q`` is
stored as the integer ``q * D`` for a per-polynomial denominator bound ``D``;
binary operations rescale both operands to the lcm of their bounds.

``sigma`` is always a formal variable here.  Numbers enter only through
:func:`evaluate`.
"""

from __future__ import annotations

import decimal
import math
import re
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Mapping, Sequence

import numpy as np

from kintraj import kernels
from kintraj.errors import (
    NonIntegrableError,
    PoleError,
    SingularSystemError,
    ZeroPolynomialError,
)

ExactRational = Fraction

_FRACTION_RE = re.compile(r"^\s*-?\d+(\s*/\s*\d+)?\s*$")


def as_rational(value) -> Fraction:
    """Coerce ints, Fractions and ``"p/q"`` strings; floats are refused."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("bool is not a rational")
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        if not _FRACTION_RE.match(value):
            raise ValueError(f"not a decimal-free fraction string: {value!r}")
        return Fraction(value.replace(" ", ""))
    if type(value).__name__ == "mpq":
        return Fraction(int(value.numerator), int(value.denominator))
    raise TypeError(f"cannot use {type(value).__name__} as an exact rational")


def fraction_str(value: Fraction) -> str:
    value = as_rational(value)
    return f"{value.numerator}/{value.denominator}"


def _lcm(*values: int) -> int:
    out = 1
    for v in values:
        out = out * v // math.gcd(out, v)
    return out


def _iroot(n: int, k: int) -> int | None:
    """Exact k-th root of a nonnegative integer, or None."""
    if n < 2:
        return n
    x = 1 << ((n.bit_length() + k - 1) // k)
    while True:
        y = ((k - 1) * x + n // x ** (k - 1)) // k
        if y >= x:
            break
        x = y
    return x if x**k == n else None


def _rescale(raw: dict, factor: int) -> dict:
    if factor == 1:
        return raw
    return {(e * factor, s): c for (e, s), c in raw.items()}


class PuiseuxPoly:
    """Immutable sparse polynomial in ``r**(1/D)`` and integer powers of ``sigma``."""

    __slots__ = ("_raw", "_denom", "_hash")

    def __init__(self, terms: Mapping | None = None, denom: int = 1):
        denom = int(denom)
        if denom < 1:
            raise ValueError("denominator bound must be positive")
        items = []
        for (q, s), c in (terms or {}).items():
            q = as_rational(q)
            if int(s) != s:
                raise ValueError("sigma exponents must be integers")
            items.append((q, int(s), as_rational(c)))
            denom = _lcm(denom, q.denominator)
        raw: dict = {}
        for q, s, c in items:
            key = (q.numerator * (denom // q.denominator), s)
            raw[key] = raw.get(key, 0) + c
        self._raw = {k: v for k, v in raw.items() if v}
        self._denom = denom
        self._hash = None

    @classmethod
    def _wrap(cls, raw: dict, denom: int) -> "PuiseuxPoly":
        obj = cls.__new__(cls)
        obj._raw = raw
        obj._denom = denom
        obj._hash = None
        return obj

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, denom: int = 1) -> "PuiseuxPoly":
        return cls._wrap({}, denom)

    @classmethod
    def constant(cls, value, denom: int = 1) -> "PuiseuxPoly":
        return cls.monomial(value, 0, 0, denom)

    @classmethod
    def monomial(cls, coeff, r_exp=0, sigma_exp: int = 0, denom: int = 1) -> "PuiseuxPoly":
        return cls({(as_rational(r_exp), sigma_exp): coeff}, denom)

    @classmethod
    def coerce(cls, value, denom: int = 1) -> "PuiseuxPoly":
        if isinstance(value, PuiseuxPoly):
            return value
        return cls.constant(value, denom)

    # -- accessors ----------------------------------------------------------

    @property
    def denom(self) -> int:
        return self._denom

    @property
    def terms(self) -> dict:
        """Term map ``{(r_exponent, sigma_exponent): coefficient}``."""
        d = self._denom
        return {(Fraction(e, d), s): c for (e, s), c in self._raw.items()}

    @property
    def raw(self) -> dict:
        return dict(self._raw)

    def sorted_terms(self) -> list:
        return sorted(((q, s, c) for (q, s), c in self.terms.items()), key=lambda t: (t[0], t[1]))

    def __len__(self) -> int:
        return len(self._raw)

    def is_zero(self) -> bool:
        return not self._raw

    def __bool__(self) -> bool:
        return bool(self._raw)

    def is_monomial(self) -> bool:
        return len(self._raw) == 1

    def as_monomial(self) -> tuple[Fraction, Fraction, int]:
        """``(coeff, r_exp, sigma_exp)`` of a single-term polynomial."""
        if len(self._raw) != 1:
            raise ValueError("not a monomial")
        ((e, s), c), = self._raw.items()
        return c, Fraction(e, self._denom), s

    def sigma_exponents(self) -> set[int]:
        return {s for _, s in self._raw}

    def r_exponents(self) -> set[Fraction]:
        return {Fraction(e, self._denom) for e, _ in self._raw}

    def with_denom(self, denom: int) -> "PuiseuxPoly":
        if denom % self._denom:
            raise ValueError(f"{denom} is not a multiple of {self._denom}")
        return PuiseuxPoly._wrap(_rescale(self._raw, denom // self._denom), denom)

    def _aligned(self, other: "PuiseuxPoly") -> tuple[dict, dict, int]:
        d = _lcm(self._denom, other._denom)
        return _rescale(self._raw, d // self._denom), _rescale(other._raw, d // other._denom), d

    # -- ring operations ----------------------------------------------------

    def __add__(self, other):
        try:
            other = PuiseuxPoly.coerce(other)
        except TypeError:
            return NotImplemented
        a, b, d = self._aligned(other)
        return PuiseuxPoly._wrap(kernels.poly_axpy(dict(a), b, 1), d)

    __radd__ = __add__

    def __neg__(self):
        return PuiseuxPoly._wrap({k: -v for k, v in self._raw.items()}, self._denom)

    def __sub__(self, other):
        try:
            other = PuiseuxPoly.coerce(other)
        except TypeError:
            return NotImplemented
        a, b, d = self._aligned(other)
        return PuiseuxPoly._wrap(kernels.poly_axpy(dict(a), b, -1), d)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, factor) -> "PuiseuxPoly":
        factor = as_rational(factor)
        if not factor:
            return PuiseuxPoly.zero(self._denom)
        return PuiseuxPoly._wrap({k: v * factor for k, v in self._raw.items()}, self._denom)

    def __mul__(self, other):
        if isinstance(other, PuiseuxPoly):
            a, b, d = self._aligned(other)
            return PuiseuxPoly._wrap(kernels.poly_mul(a, b), d)
        try:
            return self.scale(other)
        except TypeError:
            return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, PuiseuxPoly):
            return self.divide_monomial(other)
        try:
            other = as_rational(other)
        except TypeError:
            return NotImplemented
        if not other:
            raise ZeroDivisionError("division by zero")
        return self.scale(1 / other)

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            c, q, s = self.as_monomial()
            return PuiseuxPoly.monomial(Fraction(1) / c ** (-n), q * n, s * n, self._denom)
        result = PuiseuxPoly.constant(1, self._denom)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def divide_monomial(self, mono: "PuiseuxPoly") -> "PuiseuxPoly":
        """Exact division by a nonzero monomial (a unit of the Laurent ring)."""
        if not mono.is_monomial():
            raise ValueError("exact division is only defined by a monomial")
        c, q, s = mono.as_monomial()
        return self * PuiseuxPoly.monomial(1 / c, -q, -s, mono.denom)

    # -- calculus -----------------------------------------------------------

    def weighted_integrate(self) -> "PuiseuxPoly":
        """``r -> integral_0^r 2*sigma*tau * f(tau) dtau`` termwise."""
        d = self._denom
        out = {}
        for (e, s), c in self._raw.items():
            if e <= -2 * d:
                raise NonIntegrableError(
                    f"term r^{Fraction(e, d)} is not integrable against 2*sigma*r at the origin"
                )
            out[(e + 2 * d, s + 1)] = c * 2 * d / (e + 2 * d)
        return PuiseuxPoly._wrap(out, d)

    def differentiate_r(self) -> "PuiseuxPoly":
        d = self._denom
        out = {}
        for (e, s), c in self._raw.items():
            if e:
                out[(e - d, s)] = c * Fraction(e, d)
        return PuiseuxPoly._wrap(out, d)

    def multiply_r_power(self, q) -> "PuiseuxPoly":
        return self * PuiseuxPoly.monomial(1, q)

    # -- evaluation ---------------------------------------------------------

    def leading_r_exponent(self) -> Fraction:
        """Smallest r-exponent present; this governs the behaviour as r -> 0."""
        if not self._raw:
            raise ZeroPolynomialError("leading exponent of the zero polynomial is undefined")
        return Fraction(min(e for e, _ in self._raw), self._denom)

    def leading_term(self) -> tuple[Fraction, int, Fraction]:
        """Lexicographically largest ``(r_exp, sigma_exp)`` term; used for monic normalization."""
        if not self._raw:
            raise ZeroPolynomialError("zero polynomial has no leading term")
        (e, s) = max(self._raw)
        return Fraction(e, self._denom), s, self._raw[(e, s)]

    def substitute_r(self, value) -> "PuiseuxPoly":
        """Exact substitution of a rational ``r``; the result is a polynomial in sigma only."""
        value = as_rational(value)
        out: dict = {}
        if value == 0:
            for (e, s), c in self._raw.items():
                if e < 0:
                    raise PoleError("negative r-exponent evaluated at r = 0")
                if e == 0:
                    out[(0, s)] = out.get((0, s), 0) + c
        else:
            powers = _exact_powers(value, {e for e, _ in self._raw}, self._denom)
            for (e, s), c in self._raw.items():
                out[(0, s)] = out.get((0, s), 0) + c * powers[e]
        return PuiseuxPoly._wrap({k: v for k, v in out.items() if v}, 1)

    def evaluate(self, r_value, sigma_value=1, exact: bool = False):
        """Evaluate at numeric ``r`` and ``sigma``.

        Float mode accepts scalars or numpy arrays.  Exact mode requires a
        rational ``r`` that is a perfect power for every exponent denominator
        and returns a ``Fraction``.
        """
        if exact:
            sigma_value = as_rational(sigma_value)
            total = Fraction(0)
            for (_, s), c in self.substitute_r(r_value)._raw.items():
                if s < 0 and sigma_value == 0:
                    raise PoleError("negative sigma-exponent evaluated at sigma = 0")
                total += c * sigma_value**s
            return total
        r = np.asarray(r_value, dtype=float)
        sig = np.asarray(sigma_value, dtype=float)
        d = self._denom
        if np.any(r < 0):
            raise ValueError("r must be nonnegative")
        if any(e < 0 for e, _ in self._raw) and np.any(r == 0):
            raise PoleError("negative r-exponent evaluated at r = 0")
        if any(s < 0 for _, s in self._raw) and np.any(sig == 0):
            raise PoleError("negative sigma-exponent evaluated at sigma = 0")
        out = np.zeros(np.broadcast(r, sig).shape)
        for (e, s), c in self._raw.items():
            out = out + float(c) * np.power(r, e / d) * np.power(sig, float(s))
        return out if out.ndim else float(out)

    def evaluate_precise(self, r_value: float, sigma_value: float = 1.0, digits: int = 60) -> float:
        """Scalar evaluation carried out in ``digits``-digit decimal arithmetic.

        For polynomials whose terms cancel heavily (large coefficients, tiny
        value) where double precision loses every significant digit.
        """
        if r_value < 0:
            raise ValueError("r must be nonnegative")
        g = 0
        for e, _ in self._raw:
            g = math.gcd(g, e)
        g = math.gcd(g, self._denom) if g else self._denom
        root_index = self._denom // g
        with decimal.localcontext() as ctx:
            ctx.prec = digits
            r = decimal.Decimal(float(r_value))
            sig = decimal.Decimal(float(sigma_value))
            if r == 0:
                if any(e < 0 for e, _ in self._raw):
                    raise PoleError("negative r-exponent evaluated at r = 0")
                return float(sum((decimal.Decimal(c.numerator) / c.denominator * sig**s
                                  for (e, s), c in self._raw.items() if e == 0), decimal.Decimal(0)))
            root = r ** (decimal.Decimal(1) / root_index)
            total = decimal.Decimal(0)
            for (e, s), c in self._raw.items():
                total += decimal.Decimal(c.numerator) / c.denominator * root ** (e // g) * sig**s
            return float(total)

    # -- comparison, hashing, display ---------------------------------------

    def __eq__(self, other):
        if isinstance(other, PuiseuxPoly):
            a, b, _ = self._aligned(other)
            return a == b
        try:
            return self == PuiseuxPoly.constant(other)
        except TypeError:
            return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    def __repr__(self):
        return f"PuiseuxPoly({self})"

    def __str__(self):
        if not self._raw:
            return "0"
        parts = []
        for q, s, c in self.sorted_terms():
            factors = []
            if q:
                factors.append("r" if q == 1 else (f"r^{q}" if q.denominator == 1 else f"r^({q})"))
            if s:
                factors.append("sigma" if s == 1 else (f"sigma^{s}" if s > 0 else f"sigma^({s})"))
            mag = abs(c)
            body = "*".join(factors)
            if not body:
                text = str(mag)
            elif mag == 1:
                text = body
            else:
                text = f"{mag}*{body}"
            parts.append(("-" if c < 0 else "+", text))
        first_sign, first = parts[0]
        out = ("-" if first_sign == "-" else "") + first
        for sign, text in parts[1:]:
            out += f" {sign} {text}"
        return out

    # -- serialization ------------------------------------------------------

    def to_records(self) -> list[dict]:
        return [
            {"r_exp": fraction_str(q), "sigma_exp": s, "coeff": fraction_str(c)}
            for q, s, c in self.sorted_terms()
        ]

    @classmethod
    def from_records(cls, records: Iterable[Mapping], denom: int = 1) -> "PuiseuxPoly":
        terms: dict = {}
        for rec in records:
            key = (as_rational(rec["r_exp"]), int(rec["sigma_exp"]))
            if key in terms:
                raise ValueError(f"duplicate term {key}")
            terms[key] = as_rational(rec["coeff"])
        return cls(terms, denom)


def _exact_powers(value: Fraction, numerators: set, denom: int) -> dict:
    """Map each exponent numerator ``e`` to ``value ** (e / denom)``, exactly."""
    g = 0
    for e in numerators:
        g = math.gcd(g, e)
    g = math.gcd(g, denom) if g else denom
    root_index = denom // g
    if value < 0:
        raise ValueError("r must be nonnegative")
    num = _iroot(value.numerator, root_index)
    den = _iroot(value.denominator, root_index)
    if num is None or den is None:
        raise ValueError(f"{value} is not an exact {root_index}-th power; use float evaluation")
    rho = Fraction(num, den)
    return {e: rho ** (e // g) for e in numerators}


R = PuiseuxPoly.monomial(1, 1)
SIGMA = PuiseuxPoly.monomial(1, 0, 1)
ONE = PuiseuxPoly.constant(1)


def r_power(q) -> PuiseuxPoly:
    return PuiseuxPoly.monomial(1, q)


def weighted_integrate(f: PuiseuxPoly) -> PuiseuxPoly:
    return f.weighted_integrate()


def differentiate_r(f: PuiseuxPoly) -> PuiseuxPoly:
    return f.differentiate_r()


def evaluate(f: PuiseuxPoly, r_value, sigma_value=1, exact: bool = False):
    return f.evaluate(r_value, sigma_value, exact=exact)


def leading_r_exponent(f: PuiseuxPoly) -> Fraction:
    return f.leading_r_exponent()


class PolyMatrix:
    """Dense rectangular matrix of :class:`PuiseuxPoly` sharing one denominator bound."""

    __slots__ = ("_entries", "rows", "cols", "denom")

    def __init__(self, entries: Sequence[Sequence]):
        rows = [list(row) for row in entries]
        if not rows or not rows[0]:
            raise ValueError("matrix must have at least one row and one column")
        width = len(rows[0])
        if any(len(row) != width for row in rows):
            raise ValueError("matrix rows must have equal length")
        polys = [[PuiseuxPoly.coerce(x) for x in row] for row in rows]
        denom = _lcm(*(p.denom for row in polys for p in row))
        self._entries = tuple(tuple(p.with_denom(denom) for p in row) for row in polys)
        self.rows = len(rows)
        self.cols = width
        self.denom = denom

    @classmethod
    def identity(cls, n: int, denom: int = 1) -> "PolyMatrix":
        return cls([[PuiseuxPoly.constant(int(i == j), denom) for j in range(n)] for i in range(n)])

    @classmethod
    def zeros(cls, rows: int, cols: int, denom: int = 1) -> "PolyMatrix":
        return cls([[PuiseuxPoly.zero(denom)] * cols for _ in range(rows)])

    @property
    def entries(self) -> tuple:
        return self._entries

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def __getitem__(self, index):
        i, j = index
        return self._entries[i][j]

    def row(self, i: int) -> tuple:
        return self._entries[i]

    def column(self, j: int) -> tuple:
        return tuple(row[j] for row in self._entries)

    def map(self, fn) -> "PolyMatrix":
        return PolyMatrix([[fn(p) for p in row] for row in self._entries])

    def transpose(self) -> "PolyMatrix":
        return PolyMatrix([list(col) for col in zip(*self._entries)])

    def __eq__(self, other):
        if not isinstance(other, PolyMatrix):
            return NotImplemented
        return self.shape == other.shape and all(
            a == b for ra, rb in zip(self._entries, other._entries) for a, b in zip(ra, rb)
        )

    def __hash__(self):
        return hash(self._entries)

    def __add__(self, other: "PolyMatrix") -> "PolyMatrix":
        if self.shape != other.shape:
            raise ValueError("shape mismatch")
        return PolyMatrix([[a + b for a, b in zip(ra, rb)] for ra, rb in zip(self._entries, other._entries)])

    def __sub__(self, other: "PolyMatrix") -> "PolyMatrix":
        if self.shape != other.shape:
            raise ValueError("shape mismatch")
        return PolyMatrix([[a - b for a, b in zip(ra, rb)] for ra, rb in zip(self._entries, other._entries)])

    def __matmul__(self, other: "PolyMatrix") -> "PolyMatrix":
        if self.cols != other.rows:
            raise ValueError(f"cannot multiply {self.shape} by {other.shape}")
        out = []
        for i in range(self.rows):
            row = []
            for j in range(other.cols):
                acc = PuiseuxPoly.zero()
                for l in range(self.cols):
                    a, b = self._entries[i][l], other._entries[l][j]
                    if a and b:
                        acc = acc + a * b
                row.append(acc)
            out.append(row)
        return PolyMatrix(out)

    def _raw_rows(self, order: Sequence[int]) -> list:
        return [[self._entries[i][j].raw for j in range(self.cols)] for i in order]

    def _require_square(self):
        if self.rows != self.cols:
            raise ValueError(f"determinant needs a square matrix, got {self.shape}")
        if self.rows > 13:
            raise ValueError("cofactor expansion is limited to 13x13 matrices")

    def determinant(self) -> PuiseuxPoly:
        self._require_square()
        det, _ = kernels.expand_minors(self._raw_rows(range(self.rows)))
        return PuiseuxPoly._wrap(det, self.denom)

    def det_and_adjugate_column(self, j: int) -> tuple[PuiseuxPoly, list[PuiseuxPoly]]:
        """Determinant and the ``j``-th adjugate column from one expansion.

        ``M @ adj[:, j] == det * e_j`` so column ``j`` of the inverse is the
        adjugate column divided by the determinant.
        """
        self._require_square()
        n = self.rows
        order = [i for i in range(n) if i != j] + [j]
        det, minors = kernels.expand_minors(self._raw_rows(order))
        if (n - 1 - j) % 2:
            det = {k: -v for k, v in det.items()}
        column = []
        for i in range(n):
            sign = -1 if (i + j) % 2 else 1
            column.append(PuiseuxPoly._wrap({k: sign * v for k, v in minors[i].items()}, self.denom))
        return PuiseuxPoly._wrap(det, self.denom), column

    def adjugate_column(self, j: int) -> list[PuiseuxPoly]:
        return self.det_and_adjugate_column(j)[1]

    def adjugate(self) -> "PolyMatrix":
        cols = [self.adjugate_column(j) for j in range(self.cols)]
        return PolyMatrix([[cols[j][i] for j in range(self.cols)] for i in range(self.rows)])

    def evaluate(self, r_value, sigma_value=1) -> np.ndarray:
        return np.array([[p.evaluate(r_value, sigma_value) for p in row] for row in self._entries])

    def __repr__(self):
        return f"PolyMatrix({[[str(p) for p in row] for row in self._entries]})"

    def to_records(self) -> list:
        return [[p.to_records() for p in row] for row in self._entries]

    @classmethod
    def from_records(cls, rows: Sequence[Sequence], denom: int = 1) -> "PolyMatrix":
        return cls([[PuiseuxPoly.from_records(rec, denom) for rec in row] for row in rows])


def matmul(m: PolyMatrix, n: PolyMatrix) -> PolyMatrix:
    return m @ n


def determinant(m: PolyMatrix) -> PuiseuxPoly:
    return m.determinant()


def adjugate_column(m: PolyMatrix, j: int) -> list[PuiseuxPoly]:
    return m.adjugate_column(j)


def _normalize_quotient(numer: PuiseuxPoly, det: PuiseuxPoly) -> tuple[PuiseuxPoly, PuiseuxPoly]:
    if det.is_monomial():
        return numer.divide_monomial(det), PuiseuxPoly.constant(1, det.denom)
    _, _, lead = det.leading_term()
    return numer.scale(1 / lead), det.scale(1 / lead)


def fraction_solve_many(m: PolyMatrix, rhs_columns: Sequence[Sequence]) -> list[list[tuple[PuiseuxPoly, PuiseuxPoly]]]:
    """Solve ``m @ x = b`` for several right-hand sides sharing one adjugate.

    Each solution component is a ``(numerator, denominator)`` pair.  When the
    determinant is a monomial (always the case for rational systems) the
    denominator is 1; otherwise both parts are scaled so the denominator's
    leading coefficient is 1.
    """
    if m.rows != m.cols:
        raise ValueError("fraction_solve needs a square matrix")
    n = m.rows
    det, first = m.det_and_adjugate_column(0)
    if det.is_zero():
        raise SingularSystemError("determinant vanishes identically")
    adj_cols = [first] + [m.adjugate_column(j) for j in range(1, n)]
    solutions = []
    for rhs in rhs_columns:
        rhs = [PuiseuxPoly.coerce(b) for b in rhs]
        if len(rhs) != n:
            raise ValueError(f"right-hand side has length {len(rhs)}, expected {n}")
        sol = []
        for i in range(n):
            acc = PuiseuxPoly.zero()
            for j in range(n):
                if rhs[j] and adj_cols[j][i]:
                    acc = acc + adj_cols[j][i] * rhs[j]
            sol.append(_normalize_quotient(acc, det))
        solutions.append(sol)
    return solutions


def fraction_solve(m: PolyMatrix, rhs: Sequence) -> list[tuple[PuiseuxPoly, PuiseuxPoly]]:
    return fraction_solve_many(m, [rhs])[0]
