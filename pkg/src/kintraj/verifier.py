"""Exact and numeric certification of the trajectory properties.

Exact checks work on the scalar ``(k+1) x (k+1)`` matrices; the block
statements for dimension d follow from the ``a_ij * Id_d`` structure.
Numeric constants come from :mod:`kintraj.supremum` and always carry their
refinement delta and witness point.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from kintraj.closed_forms import reference
from kintraj.exact import PolyMatrix, PuiseuxPoly, fraction_str, r_power
from kintraj.supremum import DEFAULT_LEVELS, refined_sup
from kintraj.trajectory import NumericMatrix, TrajectoryPair

DECAY_EXPONENT = Fraction(-3, 2)

DEFAULT_TOLERANCES = {
    "sup_rel_tol": 1e-6,
    "c0_refinement": 1e-2,
    "c1_refinement": 1e-2,
    "r0_refinement": 1e-4,
    "det_b_refinement": 1e-6,
}


@dataclass
class CheckRecord:
    name: str
    mode: str
    status: str
    witness: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return {"name": self.name, "mode": self.mode, "status": self.status, "witness": self.witness}


def _record(name, mode, ok, witness=None) -> CheckRecord:
    return CheckRecord(name, mode, "pass" if ok else "fail", witness or {})


@dataclass(frozen=True)
class GapGeometry:
    """Time gap ``kappa`` between the past and present unit cylinders."""

    kappa: float

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")

    @property
    def sigma_range(self) -> tuple[float, float]:
        return (-2.0 - self.kappa, -self.kappa)

    def geometric_normalizers(self, k: int) -> list[float]:
        grow = 1.0 + 1.0 / self.kappa
        return [grow**i for i in range(k + 1)]

    def gap_normalizers(self, k: int) -> list[float]:
        out = self.geometric_normalizers(k)
        out[0] = 1.0 + self.kappa
        return out


def det_exponent(k: int) -> Fraction:
    """Expected exponent p_k of the monomial determinant of A."""
    return (k + 1) ** 2 + sum(Fraction(1, i + 1) for i in range(1, k + 1))


# -- exact checks -------------------------------------------------------------


def _kinetic_constraint(m: PolyMatrix, name: str) -> CheckRecord:
    n = m.rows
    lift = PuiseuxPoly.monomial(2, 1, 1)
    bad = [
        [i, j]
        for i in range(n - 1)
        for j in range(n)
        if m[i, j].differentiate_r() != lift * m[i + 1, j]
    ]
    return _record(name, "exact", not bad, {"violations": bad})


def _boundary(m: PolyMatrix, r_value: int, target_identity: bool, name: str) -> CheckRecord:
    n = m.rows
    bad = []
    for i in range(n):
        for j in range(n):
            expected = int(target_identity and i == j)
            if m[i, j].substitute_r(r_value) != expected:
                bad.append([i, j])
    return _record(name, "exact", not bad, {"r": r_value, "violations": bad})


def _sigma_structure(pair: TrajectoryPair) -> CheckRecord:
    n = pair.size
    bad = []
    for name, table, m in (("alpha", pair.alpha, pair.A), ("beta", pair.beta, pair.B)):
        for l in range(n):
            for j in range(n):
                if table[l][j].sigma_exp != j - (n - 1):
                    bad.append([name, l, j])
        for i in range(n):
            for j in range(n):
                entry = m[i, j]
                if entry and entry.sigma_exponents() != {j - i}:
                    bad.append([name + "_entry", i, j])
    return _record("sigma_monomial_structure", "exact", not bad, {"violations": bad})


def verify_structural(pair: TrajectoryPair) -> list[CheckRecord]:
    """Kinetic constraint rows, boundary values at r in {0, 1}, sigma structure."""
    return [
        _kinetic_constraint(pair.A, "kinetic_constraint_A"),
        _kinetic_constraint(pair.B, "kinetic_constraint_B"),
        _boundary(pair.A, 0, False, "boundary_A_r0"),
        _boundary(pair.A, 1, True, "boundary_A_r1"),
        _boundary(pair.B, 0, True, "boundary_B_r0"),
        _boundary(pair.B, 1, False, "boundary_B_r1"),
        _sigma_structure(pair),
    ]


def verify_det_A(pair: TrajectoryPair) -> tuple[CheckRecord, Fraction]:
    p_k = det_exponent(pair.k)
    det = pair.det_A
    ok = det == r_power(p_k)
    witness = {"determinant": det.to_records() if len(det) <= 8 else f"{len(det)} terms", "p_k": fraction_str(p_k)}
    return _record("det_A_monomial", "exact", ok, witness), p_k


def inverse_last_column(pair: TrajectoryPair) -> tuple[list[PuiseuxPoly], CheckRecord]:
    """Exact last column of ``A^{-1}`` and its decay check against ``r^(-3/2)``."""
    det, adj = pair.det_and_last_adjugate
    if det.is_zero():
        return [], _record("inverse_last_column_decay", "exact", False, {"reason": "singular"})
    if det.is_monomial():
        column = [entry.divide_monomial(det) for entry in adj]
    else:
        return [], _record("inverse_last_column_decay", "exact", False, {"reason": "determinant is not a monomial"})
    leads = [entry.leading_r_exponent() if entry else None for entry in column]
    ok = all(q is None or q >= DECAY_EXPONENT for q in leads)
    witness = {"leading_exponents": [fraction_str(q) if q is not None else None for q in leads]}
    return column, _record("inverse_last_column_decay", "exact", ok, witness)


def cross_check_closed_forms(pair: TrajectoryPair) -> CheckRecord:
    """Term-map equality against the transcribed closed forms (k = 1, 2, 3)."""
    ref = reference(pair.k)
    mismatches = []
    if "A" in ref:
        mismatches += [["A", i, j] for i in range(pair.size) for j in range(pair.size) if ref["A"][i, j] != pair.A[i, j]]
    if "B" in ref:
        mismatches += [["B", i, j] for i in range(pair.size) for j in range(pair.size) if ref["B"][i, j] != pair.B[i, j]]
    if "det_B" in ref and ref["det_B"] != pair.det_B:
        mismatches.append(["det_B"])
    if "inverse_last_column" in ref:
        column, _ = inverse_last_column(pair)
        mismatches += [["inverse_last_column", i] for i, (a, b) in enumerate(zip(column, ref["inverse_last_column"])) if a != b]
    return _record("closed_form_match", "exact", not mismatches, {"compared": sorted(ref), "mismatches": mismatches})


# -- numeric checks -----------------------------------------------------------


def _column_evaluator(column: Sequence[PuiseuxPoly]) -> NumericMatrix:
    return NumericMatrix(PolyMatrix([[p] for p in column]))


def verify_det_B_positive(
    pair: TrajectoryPair,
    r_interval: tuple[float, float] = (0.0, 0.5),
    sigma_range: tuple[float, float] = (-3.0, -1.0),
    refinement=((1024, 16), (2048, 32)),
) -> CheckRecord:
    """Lower bound of det B over ``r_interval`` (and sigma, if det B depends on it).

    det B is evaluated in 60-digit decimal arithmetic: for k >= 3 its terms
    are many orders of magnitude larger than its value near r = 1/2.
    """
    lo, hi = r_interval
    if not 0 <= lo < hi < 1:
        raise ValueError("r_interval must lie inside [0, 1)")
    det = pair.det_B
    sig_bounds = sigma_range if det.sigma_exponents() - {0} else (sigma_range[0], sigma_range[0])
    precise = np.vectorize(lambda r, s: det.evaluate_precise(r, s), otypes=[float])
    est = refined_sup(lambda r, s: -precise(r, s), (lo, hi), sig_bounds, levels=refinement)
    minimum = -est.value
    witness = {
        "minimum": minimum,
        "r_star": est.final.r,
        "r_interval": [lo, hi],
        "levels": [{"grid": list(e.grid), "minimum": -e.value} for e in est.estimates],
        "refinement_delta": est.delta,
        "sigma_free": not (det.sigma_exponents() - {0}),
    }
    ok = minimum > 0
    if pair.k == 1:
        exact_ok = det == reference(1)["det_B"]
        witness["closed_form_match"] = exact_ok
        ok = ok and exact_ok
    return _record("det_B_positive", "numeric", ok, witness)


@dataclass
class ConstantEstimate:
    name: str
    value: float
    refinement_delta: float
    witness: dict
    flags: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "refinement_delta": self.refinement_delta,
            "witness": self.witness,
            "flags": self.flags,
        }


def estimate_C0(
    pair: TrajectoryPair,
    sigma_range: tuple[float, float] = (-3.0, -1.0),
    column: Sequence[PuiseuxPoly] | None = None,
    levels=DEFAULT_LEVELS,
) -> ConstantEstimate:
    """sup of ``|(A^-1)_{.,k+1}| r^{3/2} / (1 + |sigma|)`` over ``r in (0,1]``.

    The column is multiplied by ``r^{3/2}`` exactly first, so the behaviour
    near r = 0 is settled symbolically and the float evaluation never meets
    a pole.
    """
    if column is None:
        column, decay = inverse_last_column(pair)
        if not decay.passed:
            raise ValueError("inverse column fails the decay check; C0 would be infinite")
    lifted = [p.multiply_r_power(-DECAY_EXPONENT) for p in column]
    if any(p and p.leading_r_exponent() < 0 for p in lifted):
        raise ValueError("column decays faster than r^(-3/2); C0 is infinite")
    evaluator = _column_evaluator(lifted)

    def ratio(r, s):
        vals = evaluator(r, s)[:, 0]
        return np.sqrt(np.sum(vals**2, axis=0)) / (1.0 + np.abs(s))

    est = refined_sup(ratio, (0.0, 1.0), sigma_range, levels=levels)
    widest = min(sigma_range)
    at_edge = abs(est.final.sigma - widest) < 1e-9 * max(1.0, abs(widest))
    flags = {"sup_at_largest_gap": bool(at_edge)}
    if pair.k >= 2 and at_edge:
        flags["weight_divergence_suspected"] = True
    return ConstantEstimate("C0", est.value, est.delta, est.to_dict(), flags)


def _bottom_rate_weights(pair: TrajectoryPair):
    n = pair.size
    d_a = [pair.A[n - 1, j].differentiate_r() for j in range(n)]
    d_b = [pair.B[n - 1, j].differentiate_r() for j in range(n)]
    return _column_evaluator(d_a + d_b)


def estimate_C1(pair: TrajectoryPair, geometry: GapGeometry, levels=DEFAULT_LEVELS) -> ConstantEstimate:
    """Smallest C1 with ``|gamma_v'| <= C1 * sum_j w_j (|end1_j| + |end0_j|)``.

    The endpoint weight of block j is ``|sigma|^(j - k)`` (``1/|sigma|`` on x and
    1 on v for k = 1).  The supremum of a linear form against a weighted l1
    norm is the largest weighted coefficient, so no endpoint search is needed.
    """
    n = pair.size
    evaluator = _bottom_rate_weights(pair)
    powers = np.array([n - 1 - j for j in range(n)] * 2, dtype=float)

    def ratio(r, s):
        vals = np.abs(evaluator(r, s)[:, 0])
        scale = np.abs(np.asarray(s, dtype=float))[None, ...] ** powers.reshape((-1,) + (1,) * np.ndim(s))
        return np.max(vals * scale, axis=0)

    est = refined_sup(ratio, (0.0, 1.0), geometry.sigma_range, levels=levels)
    return ConstantEstimate("C1", est.value, est.delta, est.to_dict(), {"kappa": geometry.kappa})


@dataclass
class RadiusReport:
    kappa: float
    radii: list[float]
    gap_ratios: list[float]
    geometric_ratios: list[float]
    refinement_delta: float
    witnesses: list[dict]

    @property
    def r0(self) -> float:
        return max(self.gap_ratios)

    @property
    def r0_geometric(self) -> float:
        return max(self.geometric_ratios)

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "radii": self.radii,
            "gap_ratios": self.gap_ratios,
            "geometric_ratios": self.geometric_ratios,
            "R0": self.r0,
            "R0_geometric": self.r0_geometric,
            "refinement_delta": self.refinement_delta,
            "witnesses": self.witnesses,
        }


def compute_R0(pair: TrajectoryPair, geometry: GapGeometry, levels=DEFAULT_LEVELS) -> RadiusReport:
    """Containment radii of every block for endpoints in unit balls.

    By linearity, the largest ``|gamma_i(r)|`` over unit-ball endpoints is the
    absolute row sum ``S_i = sum_j |a_ij| + |b_ij|``; its supremum over
    ``r in [0,1]`` and the sigma range is divided by both normalizer families.
    """
    n = pair.size
    a_eval = pair.numeric.A
    b_eval = pair.numeric.B
    radii, witnesses, deltas = [], [], []
    for i in range(n):

        def row_sum(r, s, i=i):
            return np.sum(np.abs(a_eval(r, s)[i]), axis=0) + np.sum(np.abs(b_eval(r, s)[i]), axis=0)

        est = refined_sup(row_sum, (0.0, 1.0), geometry.sigma_range, levels=levels)
        radii.append(est.value)
        witnesses.append(est.to_dict())
        deltas.append(est.delta)
    gap = [rad / norm for rad, norm in zip(radii, geometry.gap_normalizers(pair.k))]
    geometric = [rad / norm for rad, norm in zip(radii, geometry.geometric_normalizers(pair.k))]
    return RadiusReport(geometry.kappa, radii, gap, geometric, max(deltas), witnesses)


# -- orchestration ------------------------------------------------------------

ALL_CHECKS = ("structural", "det", "inverse", "closed_form", "det_b", "c0", "c1", "r0")


def default_checks(k: int) -> tuple[str, ...]:
    checks = ["structural", "det", "inverse"]
    if k <= 3:
        checks.append("closed_form")
    if k <= 4:
        checks += ["det_b", "c0", "c1", "r0"]
    return tuple(checks)


@dataclass
class VerificationReport:
    k: int
    checks: list[CheckRecord]
    constants: dict
    tolerances: dict

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "kind": "verification_report",
            "k": self.k,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "constants": self.constants,
            "tolerances": self.tolerances,
        }


def verify(
    pair: TrajectoryPair,
    checks: Sequence[str] | None = None,
    kappa: float = 1.0,
    tolerances: dict | None = None,
) -> VerificationReport:
    """Run the requested checks and gather constants into one report."""
    checks = tuple(checks) if checks else default_checks(pair.k)
    unknown = set(checks) - set(ALL_CHECKS)
    if unknown:
        raise ValueError(f"unknown checks: {sorted(unknown)}")
    tol = dict(DEFAULT_TOLERANCES, **(tolerances or {}))
    geometry = GapGeometry(kappa)
    records: list[CheckRecord] = []
    constants: dict = {}
    if "structural" in checks:
        records += verify_structural(pair)
    if "det" in checks:
        rec, p_k = verify_det_A(pair)
        records.append(rec)
        constants["p_k"] = fraction_str(p_k)
    if "inverse" in checks:
        column, rec = inverse_last_column(pair)
        rec.witness["column"] = [p.to_records() for p in column] if pair.k <= 3 else None
        records.append(rec)
    if "closed_form" in checks:
        records.append(cross_check_closed_forms(pair))
    if "det_b" in checks:
        records.append(verify_det_B_positive(pair, sigma_range=geometry.sigma_range))
    if "c0" in checks:
        est = estimate_C0(pair, geometry.sigma_range)
        constants["C0"] = est.to_dict()
        records.append(_record("C0_refinement", "numeric", est.refinement_delta < tol["c0_refinement"], est.to_dict()))
    if "c1" in checks:
        est = estimate_C1(pair, geometry)
        constants["C1"] = est.to_dict()
        records.append(_record("C1_refinement", "numeric", est.refinement_delta < tol["c1_refinement"], est.to_dict()))
    if "r0" in checks:
        rad = compute_R0(pair, geometry)
        constants["R0"] = rad.to_dict()
        records.append(_record("R0_refinement", "numeric", rad.refinement_delta < tol["r0_refinement"], rad.to_dict()))
    return VerificationReport(pair.k, records, constants, tol)
