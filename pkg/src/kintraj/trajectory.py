"""Trajectory matrices for the k-step kinetic equation.

A trajectory from ``(t, x, v)`` (at r = 0) to ``(s, y, w)`` (at r = 1) is
``gamma_t(r) = t + sigma * r**2`` with ``sigma = s - t`` and

    (gamma_x(r), gamma_v(r)) = A(r, sigma) (y, w) + B(r, sigma) (x, v),

where ``A`` and ``B`` are ``(k+1) x (k+1)`` scalar matrices acting blockwise
on d-vectors.  The bottom rows are linear combinations of ``r`` and
``r**kappa_i``; every higher row is the weighted integral of the row below,
which is exactly the kinetic constraint ``d/dr x_{i} = gamma_t' * x_{i+1}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from kintraj.errors import DegenerateAnsatzError, SingularSystemError, TimeOrderError
from kintraj.exact import PolyMatrix, PuiseuxPoly, as_rational, fraction_solve_many

MAX_STEPS = 12


def iterated_integral_factor(q, depth: int) -> Fraction:
    """Value at r = 1 of ``depth`` weighted integrations of ``r**q`` (sigma stripped)."""
    q = as_rational(q)
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if q <= -2:
        raise ValueError("exponent must exceed -2")
    out = Fraction(1)
    for nu in range(1, depth + 1):
        out *= Fraction(2) / (q + 2 * nu)
    return out


@dataclass(frozen=True)
class AnsatzSpec:
    k: int
    time_exponent: int = 2

    def __post_init__(self):
        if not isinstance(self.k, int) or isinstance(self.k, bool):
            raise TypeError("k must be an int")
        if not 1 <= self.k <= MAX_STEPS:
            raise ValueError(f"k must lie in [1, {MAX_STEPS}], got {self.k}")
        if self.time_exponent != 2:
            raise ValueError("only gamma_t = t + sigma r^2 is supported")

    @property
    def kappa_list(self) -> tuple[Fraction, ...]:
        return tuple(1 + Fraction(1, i + 1) for i in range(1, self.k + 1))

    @property
    def basis_exponents(self) -> tuple[Fraction, ...]:
        return (Fraction(1),) + self.kappa_list

    @property
    def denom(self) -> int:
        return math.lcm(*range(2, self.k + 2))

    @property
    def size(self) -> int:
        return self.k + 1


@dataclass(frozen=True)
class CoefficientRecord:
    """One solved ansatz coefficient ``coeff * sigma**sigma_exp``."""

    coeff: Fraction
    sigma_exp: int

    def to_record(self) -> dict:
        c = self.coeff
        return {"coeff": f"{c.numerator}/{c.denominator}", "sigma_exp": self.sigma_exp}

    @classmethod
    def from_record(cls, rec) -> "CoefficientRecord":
        return cls(as_rational(rec["coeff"]), int(rec["sigma_exp"]))


def terminal_system(spec: AnsatzSpec) -> PolyMatrix:
    """Rational matrix of the sigma-normalized terminal conditions.

    Row ``i`` (0-based) is the value at r = 1 of row ``i`` of the matrix built
    from a single basis function, after dividing out its sigma power.
    """
    n = spec.size
    q = spec.basis_exponents
    return PolyMatrix(
        [[PuiseuxPoly.constant(iterated_integral_factor(q[l], n - 1 - i)) for l in range(n)] for i in range(n)]
    )


def _column_from_bottom(bottom: PuiseuxPoly, n: int, j: int | None) -> list[PuiseuxPoly]:
    # j is the column index carrying integration constants (B); None for A.
    column = [bottom]
    for i in range(n - 2, -1, -1):
        above = column[0].weighted_integrate()
        if j is not None and i == j:
            above = above + 1
        column.insert(0, above)
    return column


def assemble_matrix(spec: AnsatzSpec, coeffs: Sequence[Sequence[CoefficientRecord]], with_identity: bool) -> PolyMatrix:
    """Build A (``with_identity=False``) or B from a coefficient table ``coeffs[l][j]``."""
    n = spec.size
    d = spec.denom
    q = spec.basis_exponents
    columns = []
    for j in range(n):
        bottom = PuiseuxPoly.zero(d)
        if with_identity and j == n - 1:
            bottom = bottom + PuiseuxPoly.constant(1, d)
        for l in range(n):
            rec = coeffs[l][j]
            bottom = bottom + PuiseuxPoly.monomial(rec.coeff, q[l], rec.sigma_exp, d)
        columns.append(_column_from_bottom(bottom, n, j if with_identity else None))
    return PolyMatrix([[columns[j][i] for j in range(n)] for i in range(n)])


@dataclass(frozen=True)
class TrajectoryPair:
    k: int
    A: PolyMatrix
    B: PolyMatrix
    denom: int
    kappa_list: tuple
    alpha: tuple = field(repr=False)
    beta: tuple = field(repr=False)

    @property
    def size(self) -> int:
        return self.k + 1

    @property
    def spec(self) -> AnsatzSpec:
        return AnsatzSpec(self.k)

    @cached_property
    def det_and_last_adjugate(self) -> tuple[PuiseuxPoly, list[PuiseuxPoly]]:
        return self.A.det_and_adjugate_column(self.k)

    @property
    def det_A(self) -> PuiseuxPoly:
        return self.det_and_last_adjugate[0]

    @cached_property
    def det_B(self) -> PuiseuxPoly:
        return self.B.determinant()

    @cached_property
    def numeric(self) -> "NumericPair":
        return NumericPair(self)

    def with_coefficients(self, alpha=None, beta=None) -> "TrajectoryPair":
        """Reassemble the pair from (possibly modified) coefficient tables."""
        return assemble_pair(self.k, alpha if alpha is not None else self.alpha, beta if beta is not None else self.beta)


def assemble_pair(k: int, alpha, beta) -> TrajectoryPair:
    spec = AnsatzSpec(k)
    alpha = tuple(tuple(row) for row in alpha)
    beta = tuple(tuple(row) for row in beta)
    return TrajectoryPair(
        k=k,
        A=assemble_matrix(spec, alpha, with_identity=False),
        B=assemble_matrix(spec, beta, with_identity=True),
        denom=spec.denom,
        kappa_list=spec.kappa_list,
        alpha=alpha,
        beta=beta,
    )


def build_pair(k: int) -> TrajectoryPair:
    """Solve the terminal conditions A(1) = Id and B(1) = 0 for step count ``k``."""
    spec = AnsatzSpec(k)
    n = spec.size
    system = terminal_system(spec)
    rhs_a = [[int(i == j) for i in range(n)] for j in range(n)]
    # B's upper rows carry the constants delta_ij, which reach row i at r = 1
    # as sigma^(j-i) / (j-i)!; after sigma-normalization that is 1/(j-i)!.
    rhs_b = [[-Fraction(1, math.factorial(j - i)) if j >= i else 0 for i in range(n)] for j in range(n)]
    try:
        solved = fraction_solve_many(system, rhs_a + rhs_b)
    except SingularSystemError as exc:
        raise DegenerateAnsatzError(f"terminal system for k={k} is singular") from exc

    def table(columns):
        out = [[None] * n for _ in range(n)]
        for j, col in enumerate(columns):
            for l, (num, den) in enumerate(col):
                if den != 1 or (num and (num.r_exponents() != {0} or num.sigma_exponents() != {0})):
                    raise AssertionError("terminal system produced a non-rational coefficient")
                value = num.terms.get((Fraction(0), 0), Fraction(0))
                out[l][j] = CoefficientRecord(value, j - (n - 1))
        return out

    return assemble_pair(k, table(solved[:n]), table(solved[n:]))


@dataclass(frozen=True)
class KineticPoint:
    """A point ``(t, x_1, ..., x_k, v)``; ``x`` has shape (k, d) and ``v`` shape (d,)."""

    t: float
    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        v = np.atleast_1d(np.asarray(self.v, dtype=float))
        if x.shape[1] != v.shape[0]:
            raise ValueError(f"x blocks have dimension {x.shape[1]} but v has {v.shape[0]}")
        if not (np.isfinite(self.t) and np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
            raise ValueError("kinetic point entries must be finite")
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)

    @property
    def space(self) -> np.ndarray:
        """Stacked blocks ``(x_1, ..., x_k, v)`` of shape (k+1, d)."""
        return np.vstack([self.x, self.v[None, :]])

    def scaled(self, factor: float) -> "KineticPoint":
        return KineticPoint(self.t, self.x * factor, self.v * factor)


class NumericMatrix:
    """Float evaluator for a :class:`PolyMatrix` that shares r-powers across entries."""

    def __init__(self, m: PolyMatrix):
        self.shape = m.shape
        self._exponents = sorted({q for row in m.entries for p in row for q in p.r_exponents()})
        index = {q: i for i, q in enumerate(self._exponents)}
        self._terms = [
            [[(index[q], s, float(c)) for (q, s), c in p.terms.items()] for p in row] for row in m.entries
        ]
        self._has_pole = any(q < 0 for q in self._exponents)

    def __call__(self, r, sigma) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        sigma = np.asarray(sigma, dtype=float)
        shape = np.broadcast_shapes(r.shape, sigma.shape)
        if self._has_pole and np.any(r == 0):
            raise ZeroDivisionError("negative r-exponent evaluated at r = 0")
        powers = [np.power(r, float(q)) for q in self._exponents]
        sigma_powers: dict = {}
        out = np.zeros(self.shape + shape)
        for i, row in enumerate(self._terms):
            for j, terms in enumerate(row):
                acc = np.zeros(shape)
                for qi, s, c in terms:
                    sp = sigma_powers.get(s)
                    if sp is None:
                        sp = sigma_powers[s] = np.power(sigma, float(s))
                    acc = acc + c * powers[qi] * sp
                out[i, j] = acc
        return out


class NumericPair:
    """Vectorized float evaluation of ``A``, ``B`` and their r-derivatives."""

    def __init__(self, pair: TrajectoryPair):
        self.k = pair.k
        self.A = NumericMatrix(pair.A)
        self.B = NumericMatrix(pair.B)
        self.dA = NumericMatrix(pair.A.map(lambda p: p.differentiate_r()))
        self.dB = NumericMatrix(pair.B.map(lambda p: p.differentiate_r()))

    def space(self, r, sigma, end1_space, end0_space) -> np.ndarray:
        """``A(r) end1 + B(r) end0`` blockwise.

        ``end*_space`` have shape (k+1, d, *batch); ``r`` and ``sigma``
        broadcast against ``batch``.  Returns shape (k+1, d, *batch).
        """
        a = self.A(r, sigma)
        b = self.B(r, sigma)
        return np.einsum("ij...,jd...->id...", a, end1_space) + np.einsum("ij...,jd...->id...", b, end0_space)

    def velocity_rate(self, r, sigma, end1_space, end0_space) -> np.ndarray:
        da = self.dA(r, sigma)[-1]
        db = self.dB(r, sigma)[-1]
        return np.einsum("j...,jd...->d...", da, end1_space) + np.einsum("j...,jd...->d...", db, end0_space)


def _check_endpoints(pair: TrajectoryPair, end1: KineticPoint, end0: KineticPoint, r) -> float:
    sigma = end1.t - end0.t
    if sigma >= 0:
        raise TimeOrderError(f"need s < t, got s={end1.t}, t={end0.t}")
    if end1.x.shape != end0.x.shape or end1.x.shape[0] != pair.k:
        raise ValueError(f"endpoints must carry {pair.k} position blocks of equal dimension")
    if not 0 <= r <= 1:
        raise ValueError("r must lie in [0, 1]")
    return sigma


def eval_gamma(pair: TrajectoryPair, end1: KineticPoint, end0: KineticPoint, r: float) -> KineticPoint:
    """Point of the trajectory from ``end0`` (r = 0) to ``end1`` (r = 1)."""
    sigma = _check_endpoints(pair, end1, end0, r)
    space = pair.numeric.space(r, sigma, end1.space, end0.space)
    return KineticPoint(end0.t + sigma * r * r, space[:-1], space[-1])


def eval_gamma_dot_v(pair: TrajectoryPair, end1: KineticPoint, end0: KineticPoint, r: float) -> np.ndarray:
    """r-derivative of the velocity component of the trajectory."""
    sigma = _check_endpoints(pair, end1, end0, r)
    return pair.numeric.velocity_rate(r, sigma, end1.space, end0.space)
