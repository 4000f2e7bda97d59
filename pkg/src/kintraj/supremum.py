"""Declared-scheme estimation of suprema over ``r`` x ``sigma`` boxes.

A coarse tensor grid (log-spaced in r, clustered near 0; uniform in sigma)
locates the maximum, then alternating golden-section line searches refine it
inside the neighbouring grid cells.  Running the same scheme at two grid
levels gives the refinement delta reported with every numeric constant.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

INV_PHI = (math.sqrt(5) - 1) / 2
DEFAULT_LEVELS = ((256, 64), (512, 128))


def worker_count() -> int:
    """Worker threads for grid sweeps, from ``KINTRAJ_WORKERS`` (default 1)."""
    try:
        return max(1, int(os.environ.get("KINTRAJ_WORKERS", "1")))
    except ValueError:
        return 1


def golden_section_max(f, a: float, b: float, tol: float = 1e-12, max_iter: int = 200) -> tuple[float, float]:
    """Maximize a scalar function on ``[a, b]``; endpoints are also considered."""
    if b < a:
        a, b = b, a
    best_x, best_f = (a, f(a)) if f(a) >= f(b) else (b, f(b))
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    x, fx = (c, fc) if fc >= fd else (d, fd)
    if fx >= best_f:
        return x, fx
    return best_x, best_f


def r_grid(n: int, lo: float = 0.0, hi: float = 1.0, include_lo: bool = True) -> np.ndarray:
    """``n`` points on ``[lo, hi]``, geometrically clustered towards ``lo``."""
    width = hi - lo
    inner = lo + width * np.geomspace(1e-6, 1.0, n - 1 if include_lo else n)
    return np.concatenate([[lo], inner]) if include_lo else inner


def sigma_grid(n: int, lo: float, hi: float) -> np.ndarray:
    if lo == hi:
        return np.array([lo])
    return np.linspace(lo, hi, n)


@dataclass(frozen=True)
class SupEstimate:
    value: float
    r: float
    sigma: float
    grid: tuple[int, int]

    def to_dict(self) -> dict:
        return {"value": self.value, "r": self.r, "sigma": self.sigma, "grid": list(self.grid)}


def _evaluate_grid(f, rs: np.ndarray, ss: np.ndarray) -> np.ndarray:
    workers = worker_count()
    if workers == 1 or len(ss) < 2 * workers:
        return np.asarray(f(rs[:, None], ss[None, :]), dtype=float)
    chunks = np.array_split(np.arange(len(ss)), workers)
    with ThreadPoolExecutor(workers) as pool:
        parts = list(pool.map(lambda idx: np.asarray(f(rs[:, None], ss[None, idx]), dtype=float), chunks))
    return np.concatenate(parts, axis=1)


def grid_sup(
    f,
    r_bounds: tuple[float, float],
    sigma_bounds: tuple[float, float],
    n_r: int = 256,
    n_sigma: int = 64,
    rel_tol: float = 1e-6,
    include_r_lo: bool = True,
    sweeps: int = 8,
) -> SupEstimate:
    """Supremum of ``f(r, sigma)`` (vectorized) over a closed box."""
    rs = r_grid(n_r, *r_bounds, include_lo=include_r_lo)
    ss = sigma_grid(n_sigma, *sigma_bounds)
    values = _evaluate_grid(f, rs, ss)
    values = np.where(np.isnan(values), -np.inf, values)
    i, j = np.unravel_index(int(np.argmax(values)), values.shape)
    r_lo, r_hi = rs[max(i - 1, 0)], rs[min(i + 1, len(rs) - 1)]
    s_lo, s_hi = ss[max(j - 1, 0)], ss[min(j + 1, len(ss) - 1)]
    r_best, s_best, best = float(rs[i]), float(ss[j]), float(values[i, j])

    def scalar(r, s):
        return float(np.asarray(f(np.asarray(r), np.asarray(s))))

    for _ in range(sweeps):
        previous = best
        r_best, best = golden_section_max(lambda r: scalar(r, s_best), r_lo, r_hi)
        if s_hi > s_lo:
            s_best, best = golden_section_max(lambda s: scalar(r_best, s), s_lo, s_hi)
        if abs(best - previous) <= rel_tol * max(abs(best), 1e-300):
            break
    return SupEstimate(best, float(r_best), float(s_best), (len(rs), len(ss)))


@dataclass(frozen=True)
class RefinedSup:
    estimates: tuple[SupEstimate, ...]

    @property
    def final(self) -> SupEstimate:
        return self.estimates[-1]

    @property
    def value(self) -> float:
        return self.final.value

    @property
    def delta(self) -> float:
        """Relative disagreement between the last two refinement levels."""
        if len(self.estimates) < 2:
            return 0.0
        a, b = self.estimates[-2].value, self.estimates[-1].value
        return abs(b - a) / max(abs(b), 1e-300)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "witness": {"r": self.final.r, "sigma": self.final.sigma},
            "levels": [e.to_dict() for e in self.estimates],
            "refinement_delta": self.delta,
        }


def refined_sup(f, r_bounds, sigma_bounds, levels=DEFAULT_LEVELS, **kwargs) -> RefinedSup:
    return RefinedSup(tuple(grid_sup(f, r_bounds, sigma_bounds, n_r, n_s, **kwargs) for n_r, n_s in levels))
