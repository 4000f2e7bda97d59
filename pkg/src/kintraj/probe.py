"""Numerical probe of the weak Poincare inequality for d = 1.

Subsolutions of ``u_t + v u_x = lam u_vv`` are built from closed forms and
certified by sampling (residual sign, positivity, finite-difference check of
the supplied derivatives) before any norm is computed.  Norms use tensor
midpoint quadrature; the two audits use seeded Monte Carlo batches.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from kintraj.errors import InconsistencyError, RejectedSubsolutionError
from kintraj.supremum import worker_count
from kintraj.trajectory import TrajectoryPair
from kintraj.verifier import GapGeometry, compute_R0

Box = tuple[tuple[float, float], ...]

KINDS = ("constant", "affine", "v_heat", "kolmogorov_gaussian", "shifted_positive_part_smoothed")
BATCH_SIZE = 1 << 16


def box_volume(box: Box) -> float:
    return math.prod(hi - lo for lo, hi in box)


def _box_contains(inner: Box, outer: Box) -> bool:
    return all(o_lo <= i_lo and i_hi <= o_hi for (i_lo, i_hi), (o_lo, o_hi) in zip(inner, outer))


@dataclass(frozen=True)
class CylinderGeometry:
    """Present, past and enlarged cylinders ``(t, x_1..x_k, v)`` with unit radii in d = 1."""

    kappa: float
    r0: float
    k: int = 1
    enlarged: Box | None = None

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if not self.r0 > 0:
            raise ValueError("R0 must be positive")
        if self.enlarged is None:
            gap = GapGeometry(self.kappa)
            radii = [self.r0 * w for w in gap.gap_normalizers(self.k)]
            box = ((-2.0 - self.kappa, 0.0),) + tuple((-rad, rad) for rad in radii)
            object.__setattr__(self, "enlarged", box)

    @classmethod
    def from_pair(cls, pair: TrajectoryPair, kappa: float) -> "CylinderGeometry":
        report = compute_R0(pair, GapGeometry(kappa))
        return cls(kappa, report.r0, pair.k)

    @property
    def present(self) -> Box:
        return ((-1.0, 0.0),) + ((-1.0, 1.0),) * (self.k + 1)

    @property
    def past(self) -> Box:
        return ((-2.0 - self.kappa, -1.0 - self.kappa),) + ((-1.0, 1.0),) * (self.k + 1)

    def shrunk(self) -> "CylinderGeometry":
        """Negative control: the enlarged cylinder replaced by the present one."""
        return replace(self, enlarged=self.present)

    def violations(self) -> list[str]:
        out = []
        if self.past[0][1] > self.present[0][0]:
            out.append("past and present cylinders overlap in time")
        if not _box_contains(self.present, self.enlarged):
            out.append("present cylinder not inside the enlarged cylinder")
        if not _box_contains(self.past, self.enlarged):
            out.append("past cylinder not inside the enlarged cylinder")
        default = CylinderGeometry(self.kappa, self.r0, self.k)
        if not _box_contains(default.enlarged, self.enlarged):
            out.append("enlarged cylinder smaller than the containment radius requires")
        return out

    def contains(self, t, space, slack: float = 1e-12) -> np.ndarray:
        """Membership of points in the enlarged cylinder; ``space`` has shape (k+1, *batch)."""
        (t_lo, t_hi), *rest = self.enlarged
        ok = (t >= t_lo - slack) & (t <= t_hi + slack)
        for (lo, hi), comp in zip(rest, space):
            ok &= (comp >= lo - slack * max(1.0, abs(lo))) & (comp <= hi + slack * max(1.0, abs(hi)))
        return ok

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "R0": self.r0,
            "k": self.k,
            "present": [list(b) for b in self.present],
            "past": [list(b) for b in self.past],
            "enlarged": [list(b) for b in self.enlarged],
            "violations": self.violations(),
        }


# -- quadrature ---------------------------------------------------------------


def _midpoints(lo: float, hi: float, n: int) -> np.ndarray:
    h = (hi - lo) / n
    return lo + h * (np.arange(n) + 0.5)


def box_integral(f: Callable, box: Box, resolution: int | Sequence[int] = 64) -> float:
    """Tensor midpoint rule for ``f(t, x, ..., v)`` (vectorized) over ``box``.

    The first axis is summed slice by slice in a fixed order, so the result
    does not depend on the worker count.
    """
    dims = len(box)
    res = [resolution] * dims if np.isscalar(resolution) else list(resolution)
    if len(res) != dims or min(res) < 8:
        raise ValueError("need resolution >= 8 on every axis")
    axes = [_midpoints(lo, hi, n) for (lo, hi), n in zip(box, res)]
    rest = [ax.reshape((1,) * i + (-1,) + (1,) * (dims - 2 - i)) for i, ax in enumerate(axes[1:])]

    def slab(t):
        return float(np.sum(np.broadcast_to(f(t, *rest), tuple(res[1:]))))

    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            slices = list(pool.map(slab, axes[0]))
    else:
        slices = [slab(t) for t in axes[0]]
    cell = math.prod((hi - lo) / n for (lo, hi), n in zip(box, res))
    return float(np.sum(slices)) * cell


# -- subsolutions --------------------------------------------------------------


def _zeros(t, x, v):
    return np.zeros(np.broadcast_shapes(np.shape(t), np.shape(x), np.shape(v)))


@dataclass(frozen=True)
class SubsolutionSpec:
    """Closed form ``u(t, x, v)`` with its derivatives for ``A = lam``.

    ``residual_bound`` and ``certified`` are filled in by :func:`certify`.
    """

    name: str
    u: Callable
    u_t: Callable
    u_x: Callable
    u_v: Callable
    u_vv: Callable
    lam: float = 1.0
    params: dict = field(default_factory=dict)
    residual_bound: float | None = None
    certified: bool = False

    def residual(self, t, x, v):
        return self.u_t(t, x, v) + v * self.u_x(t, x, v) - self.lam * self.u_vv(t, x, v)

    def grad_v_abs(self, t, x, v):
        return np.abs(self.u_v(t, x, v))

    def scaled(self, factor: float) -> "SubsolutionSpec":
        if not factor > 0:
            raise ValueError("scale factor must be positive")

        def mul(g):
            return lambda t, x, v: factor * g(t, x, v)

        bound = None if self.residual_bound is None else factor * self.residual_bound
        return replace(
            self,
            name=f"{self.name}*{factor:g}",
            u=mul(self.u),
            u_t=mul(self.u_t),
            u_x=mul(self.u_x),
            u_v=mul(self.u_v),
            u_vv=mul(self.u_vv),
            residual_bound=bound,
        )

    def shifted(self, c: float) -> "SubsolutionSpec":
        if c < 0:
            raise ValueError("shift must be nonnegative to keep u >= 0")
        base = self.u
        return replace(self, name=f"{self.name}+{c:g}", u=lambda t, x, v: base(t, x, v) + c)


def _constant(params, geometry):
    c = float(params.get("value", 1.0))
    if c < 0:
        raise RejectedSubsolutionError("constant subsolution must be nonnegative")

    def u(t, x, v):
        return _zeros(t, x, v) + c

    return dict(u=u, u_t=_zeros, u_x=_zeros, u_v=_zeros, u_vv=_zeros), {"value": c}


def _affine(params, geometry):
    m = float(params.get("slope", 1.0))
    v_radius = geometry.enlarged[-1][1]
    c = float(params.get("offset", abs(m) * v_radius))

    def u(t, x, v):
        return _zeros(t, x, v) + c + m * v

    def u_v(t, x, v):
        return _zeros(t, x, v) + m

    return dict(u=u, u_t=_zeros, u_x=_zeros, u_v=u_v, u_vv=_zeros), {"slope": m, "offset": c}


def _heat_parts(lam: float, t0: float):
    """Heat kernel in v with diffusivity ``lam`` and its derivatives."""

    def w(t, x, v):
        tau = t + t0
        return _zeros(t, x, v) + tau**-0.5 * np.exp(-(v**2) / (4 * lam * tau))

    def w_t(t, x, v):
        tau = t + t0
        return w(t, x, v) * (-0.5 / tau + v**2 / (4 * lam * tau**2))

    def w_v(t, x, v):
        tau = t + t0
        return -w(t, x, v) * v / (2 * lam * tau)

    def w_vv(t, x, v):
        tau = t + t0
        return w(t, x, v) * (-1 / (2 * lam * tau) + v**2 / (4 * lam**2 * tau**2))

    return w, w_t, w_v, w_vv


def _time_shift(params, geometry) -> float:
    t0 = float(params.get("t0", 3.0 + geometry.kappa))
    if t0 + geometry.enlarged[0][0] <= 0:
        raise RejectedSubsolutionError(f"t0={t0} puts the kernel singularity inside the enlarged cylinder")
    return t0


def _v_heat(params, geometry, lam):
    t0 = _time_shift(params, geometry)
    w, w_t, w_v, w_vv = _heat_parts(lam, t0)
    return dict(u=w, u_t=w_t, u_x=_zeros, u_v=w_v, u_vv=w_vv), {"t0": t0}


def _kolmogorov_gaussian(params, geometry, lam):
    """Fundamental solution released at time ``-t0`` from ``(x0, v0)``."""
    t0 = _time_shift(params, geometry)
    amp = float(params.get("amplitude", 1.0))
    x0 = float(params.get("x0", 0.0))
    v0 = float(params.get("v0", 0.0))
    norm = amp * math.sqrt(3.0) / (2 * math.pi * lam)

    def frame(t, x, v):
        tau = t + t0
        return tau, x - x0 - v0 * tau, v - v0

    def quad(tau, X, V):
        return (3 * X**2 / tau**3 - 3 * X * V / tau**2 + V**2 / tau) / lam

    def q_x(tau, X, V):
        return (6 * X / tau**3 - 3 * V / tau**2) / lam

    def q_v(tau, X, V):
        return (-3 * X / tau**2 + 2 * V / tau) / lam

    def u(t, x, v):
        tau, X, V = frame(t, x, v)
        return norm * tau**-2 * np.exp(-quad(tau, X, V))

    def u_t(t, x, v):
        tau, X, V = frame(t, x, v)
        q_tau = (-9 * X**2 / tau**4 + 6 * X * V / tau**3 - V**2 / tau**2) / lam
        return u(t, x, v) * (-2 / tau - q_tau + v0 * q_x(tau, X, V))

    def u_x(t, x, v):
        return -u(t, x, v) * q_x(*frame(t, x, v))

    def u_v(t, x, v):
        return -u(t, x, v) * q_v(*frame(t, x, v))

    def u_vv(t, x, v):
        tau, X, V = frame(t, x, v)
        return u(t, x, v) * (q_v(tau, X, V) ** 2 - 2 / (lam * tau))

    return dict(u=u, u_t=u_t, u_x=u_x, u_v=u_v, u_vv=u_vv), {"t0": t0, "amplitude": amp, "x0": x0, "v0": v0}


def _softplus_of_heat(params, geometry, lam):
    # a convex function of a solution is a subsolution
    t0 = _time_shift(params, geometry)
    shift = float(params.get("shift", 0.3))
    width = float(params.get("width", 0.05))
    if not width > 0:
        raise RejectedSubsolutionError("smoothing width must be positive")
    w, w_t, w_v, w_vv = _heat_parts(lam, t0)

    def arg(t, x, v):
        return (w(t, x, v) - shift) / width

    def slope(t, x, v):
        return 0.5 * (1 + np.tanh(0.5 * arg(t, x, v)))

    def u(t, x, v):
        return width * np.logaddexp(0.0, arg(t, x, v))

    def u_t(t, x, v):
        return slope(t, x, v) * w_t(t, x, v)

    def u_v(t, x, v):
        return slope(t, x, v) * w_v(t, x, v)

    def u_vv(t, x, v):
        p = slope(t, x, v)
        return p * (1 - p) / width * w_v(t, x, v) ** 2 + p * w_vv(t, x, v)

    return dict(u=u, u_t=u_t, u_x=_zeros, u_v=u_v, u_vv=u_vv), {"t0": t0, "shift": shift, "width": width}


def _stencil_checks(spec: SubsolutionSpec, pts, h1=1e-3, h2=1e-3):
    """Fourth-order central differences against the supplied derivatives."""
    t, x, v = pts

    def d1(dt=0.0, dx=0.0, dv=0.0):
        f = lambda s: spec.u(t + s * dt, x + s * dx, v + s * dv)  # noqa: E731
        return (-f(2 * h1) + 8 * f(h1) - 8 * f(-h1) + f(-2 * h1)) / (12 * h1)

    f = lambda s: spec.u(t, x, v + s)  # noqa: E731
    vv = (-f(2 * h2) + 16 * f(h2) - 30 * f(0.0) + 16 * f(-h2) - f(-2 * h2)) / (12 * h2**2)
    # rounding amplification of each stencil per unit |u|
    amp1 = 4 * 18 * np.finfo(float).eps / (12 * h1)
    amp2 = 4 * 64 * np.finfo(float).eps / (12 * h2**2)
    return {
        "u_t": (d1(dt=1.0), spec.u_t(t, x, v), amp1),
        "u_x": (d1(dx=1.0), spec.u_x(t, x, v), amp1),
        "u_v": (d1(dv=1.0), spec.u_v(t, x, v), amp1),
        "u_vv": (vv, spec.u_vv(t, x, v), amp2),
    }


def certify(
    spec: SubsolutionSpec,
    geometry: CylinderGeometry,
    grid: int = 33,
    fd_points: int = 256,
    fd_rel_tol: float = 1e-6,
    residual_tol: float = 1e-8,
    seed: int = 0,
) -> SubsolutionSpec:
    """Check residual <= 0, u >= 0 and the derivative formulas over the enlarged cylinder."""
    if geometry.k != 1:
        raise ValueError("the probe works with k = 1 cylinders")
    (t_lo, t_hi), (x_lo, x_hi), (v_lo, v_hi) = geometry.enlarged
    t = np.linspace(t_lo, t_hi, grid)[:, None, None]
    x = np.linspace(x_lo, x_hi, grid)[None, :, None]
    v = np.linspace(v_lo, v_hi, grid)[None, None, :]
    u = spec.u(t, x, v)
    scale = float(np.max(np.abs(spec.u_t(t, x, v)) + np.abs(v * spec.u_x(t, x, v)) + spec.lam * np.abs(spec.u_vv(t, x, v))))
    residual = float(np.max(spec.residual(t, x, v)))
    u_scale = float(np.max(np.abs(u)))
    if not np.all(np.isfinite(u)):
        raise RejectedSubsolutionError(f"{spec.name}: non-finite values on the enlarged cylinder")
    if float(np.min(u)) < -1e-12 * max(1.0, u_scale):
        raise RejectedSubsolutionError(f"{spec.name}: u < 0 detected (min {float(np.min(u)):.3e})")
    if residual > residual_tol * max(1.0, scale):
        raise RejectedSubsolutionError(f"{spec.name}: residual sup {residual:.3e} exceeds the certificate tolerance")

    rng = np.random.default_rng(seed)
    margin = 4e-3
    pts = (
        rng.uniform(t_lo + margin, t_hi - margin, fd_points),
        rng.uniform(x_lo + margin, x_hi - margin, fd_points),
        rng.uniform(v_lo + margin, v_hi - margin, fd_points),
    )
    for name, (approx, exact, amp) in _stencil_checks(spec, pts).items():
        approx = np.asarray(approx, dtype=float)
        exact = np.broadcast_to(np.asarray(exact, dtype=float), approx.shape)
        deriv_scale = max(float(np.max(np.abs(exact))), float(np.max(np.abs(approx))), 1e-300)
        err = float(np.max(np.abs(approx - exact)))
        if err > fd_rel_tol * deriv_scale + amp * u_scale:
            raise RejectedSubsolutionError(
                f"{spec.name}: supplied {name} disagrees with finite differences (rel err {err / deriv_scale:.2e})"
            )
    return replace(spec, residual_bound=residual, certified=True)


def make_subsolution(kind: str, params: dict | None = None, geometry: CylinderGeometry | None = None) -> SubsolutionSpec:
    """Certified subsolution of the named family over ``geometry``'s enlarged cylinder."""
    if kind not in KINDS:
        raise ValueError(f"unknown subsolution kind {kind!r}; expected one of {KINDS}")
    if geometry is None:
        raise ValueError("a geometry is needed to certify the subsolution")
    params = dict(params or {})
    lam = float(params.pop("lam", 1.0))
    if not lam > 0:
        raise ValueError("lam must be positive")
    if kind == "constant":
        parts, used = _constant(params, geometry)
    elif kind == "affine":
        parts, used = _affine(params, geometry)
    elif kind == "v_heat":
        parts, used = _v_heat(params, geometry, lam)
    elif kind == "kolmogorov_gaussian":
        parts, used = _kolmogorov_gaussian(params, geometry, lam)
    else:
        parts, used = _softplus_of_heat(params, geometry, lam)
    spec = SubsolutionSpec(kind, lam=lam, params=dict(used, lam=lam), **parts)
    return certify(spec, geometry)


# -- the inequality -------------------------------------------------------------


@dataclass(frozen=True)
class SpecNorms:
    mean_past: float
    lhs: float
    g: float
    u: float
    resolution: int


def spec_norms(spec: SubsolutionSpec, geometry: CylinderGeometry, resolution: int = 64) -> SpecNorms:
    """Past mean, ``||(u - mean)_+||_{L1(Q1)}``, ``||u_v||_{L1(Q~)}`` and ``||u||_{L1(Q1)}``."""
    if not spec.certified:
        raise RejectedSubsolutionError(f"{spec.name} has not been certified")
    mean = box_integral(spec.u, geometry.past, resolution) / box_volume(geometry.past)
    lhs = box_integral(lambda t, x, v: np.maximum(spec.u(t, x, v) - mean, 0.0), geometry.present, resolution)
    g = box_integral(spec.grad_v_abs, geometry.enlarged, resolution)
    u = box_integral(lambda t, x, v: np.abs(spec.u(t, x, v)), geometry.present, resolution)
    return SpecNorms(mean, lhs, g, u, resolution)


@dataclass(frozen=True)
class ProbeRow:
    spec: str
    eps: float
    lhs: float
    g: float
    u: float
    ratio: float
    mean_past: float
    resolution: int

    def to_dict(self) -> dict:
        return {
            "spec": self.spec,
            "eps": self.eps,
            "lhs": self.lhs,
            "g": self.g,
            "u": self.u,
            "ratio": self.ratio,
            "mean_past": self.mean_past,
            "resolution": self.resolution,
        }


def _row(name: str, norms: SpecNorms, eps: float, d: int = 1) -> ProbeRow:
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    denom = norms.g / eps + eps ** (2 * d) * norms.u
    if denom == 0:
        if norms.lhs > 0:
            raise InconsistencyError(f"{name}: LHS > 0 while both gradient and mass vanish")
        ratio = 0.0
    else:
        ratio = norms.lhs / denom
    return ProbeRow(name, eps, norms.lhs, norms.g, norms.u, ratio, norms.mean_past, norms.resolution)


def poincare_ratio(spec: SubsolutionSpec, eps: float, geometry: CylinderGeometry, resolution: int = 64) -> ProbeRow:
    return _row(spec.name, spec_norms(spec, geometry, resolution), eps)


@dataclass
class ProbeResult:
    rows: list[ProbeRow]
    empirical_constant: float
    constants_by_resolution: dict
    per_spec_constant: dict
    refinement_delta: float
    geometry: dict
    geometry_violation: bool

    def to_dict(self) -> dict:
        return {
            "kind": "probe_result",
            "rows": [r.to_dict() for r in self.rows],
            "empirical_constant": self.empirical_constant,
            "constants_by_resolution": {str(k): v for k, v in self.constants_by_resolution.items()},
            "per_spec_constant": self.per_spec_constant,
            "refinement_delta": self.refinement_delta,
            "geometry": self.geometry,
            "geometry_violation": self.geometry_violation,
        }

    def to_delimited(self, sep: str = ",") -> str:
        lines = [sep.join(["spec", "eps", "lhs", "g", "u", "ratio"])]
        for r in self.rows:
            lines.append(sep.join([r.spec] + [format(x, ".17g") for x in (r.eps, r.lhs, r.g, r.u, r.ratio)]))
        return "\n".join(lines) + "\n"


def _relative_drift(a: float, b: float) -> float:
    if a == b:
        return 0.0
    return abs(b - a) / max(abs(a), abs(b))


def sweep(
    specs: Sequence[SubsolutionSpec],
    eps_grid: Sequence[float],
    geometry: CylinderGeometry,
    resolutions: Sequence[int] = (64, 128),
) -> ProbeResult:
    """Ratios for every (spec, eps) at each resolution; rows are reported at the finest."""
    if not specs or not eps_grid:
        raise ValueError("need at least one spec and one eps")
    by_res: dict[int, float] = {}
    rows: list[ProbeRow] = []
    per_spec: dict[str, float] = {}
    for res in resolutions:
        level_rows = []
        for spec in specs:
            norms = spec_norms(spec, geometry, res)
            level_rows += [_row(spec.name, norms, float(e)) for e in eps_grid]
        by_res[res] = max(r.ratio for r in level_rows)
        rows = level_rows
    for r in rows:
        per_spec[r.spec] = max(per_spec.get(r.spec, 0.0), r.ratio)
    levels = list(by_res.values())
    delta = _relative_drift(levels[-2], levels[-1]) if len(levels) > 1 else 0.0
    return ProbeResult(rows, levels[-1], by_res, per_spec, delta, geometry.to_dict(), bool(geometry.violations()))


# -- Monte Carlo audits ------------------------------------------------------------


def _batches(samples: int, seed: int, batch_size: int = BATCH_SIZE) -> list[tuple[int, np.random.SeedSequence]]:
    if samples < 1:
        raise ValueError("need at least one sample")
    sizes = [batch_size] * (samples // batch_size)
    if samples % batch_size:
        sizes.append(samples % batch_size)
    return list(zip(sizes, np.random.SeedSequence(seed).spawn(len(sizes))))


def _run_batches(fn, samples: int, seed: int) -> list:
    work = _batches(samples, seed)
    workers = worker_count()
    if workers > 1 and len(work) > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda item: fn(*item), work))
    return [fn(*item) for item in work]


def default_test_function(z: np.ndarray) -> np.ndarray:
    """Affine weight ``1 + z_0/2 - z_last/4``; ``z`` has shape (n, batch)."""
    return 1.0 + 0.5 * z[0] - 0.25 * z[-1]


@dataclass
class ChangeOfVariablesAudit:
    relative_error: float
    direct: float
    substituted: float
    det_exact: float
    det_numeric: float
    hit_fraction: float
    samples: int
    warnings: list[str]

    @property
    def status(self) -> str:
        return "warning" if self.warnings else "ok"

    def to_dict(self) -> dict:
        return {
            "relative_error": self.relative_error,
            "direct": self.direct,
            "substituted": self.substituted,
            "det_exact": self.det_exact,
            "det_numeric": self.det_numeric,
            "hit_fraction": self.hit_fraction,
            "samples": self.samples,
            "status": self.status,
            "warnings": self.warnings,
        }


def change_of_variables_audit(
    pair: TrajectoryPair,
    r: float,
    sigma: float,
    x,
    v: float,
    samples: int = 1_000_000,
    g: Callable = default_test_function,
    seed: int = 0,
    det_warn: float = 1e-8,
) -> ChangeOfVariablesAudit:
    """Monte Carlo check of ``int_B g(Phi) = |det A|^-1 int_Phi(B) g`` for ``Phi = A(r) p + B(r)(x, v)``.

    ``B`` is the unit box in ``(y_1..y_k, w)``.  The image is sampled from its
    bounding box in the singular-vector frame of ``A(r)``; the Jacobian is the
    exact monomial determinant.
    """
    if not 0 < r <= 1:
        raise ValueError("r must lie in (0, 1]")
    n = pair.size
    a = pair.numeric.A(r, sigma)
    b = pair.numeric.B(r, sigma)
    end = np.append(np.atleast_1d(np.asarray(x, dtype=float)), float(v))
    if end.shape != (n,):
        raise ValueError(f"expected {n - 1} position values")
    shift = b @ end
    det_exact = float(pair.det_A.evaluate(r, sigma))
    warnings = []
    if det_exact == 0:
        raise ZeroDivisionError("det A(r) vanishes")
    if abs(det_exact) < det_warn:
        warnings.append(f"det A(r) = {det_exact:.3e} is tiny; the substitution is badly conditioned")
    u_mat, sing, vt = np.linalg.svd(a)
    half_widths = np.sum(np.abs(sing[:, None] * vt), axis=1)
    box_vol = float(np.prod(2 * half_widths))
    cube_vol = 2.0**n

    def batch(size, seq):
        rng = np.random.default_rng(seq)
        p = rng.uniform(-1, 1, (n, size))
        direct = float(np.sum(g(a @ p + shift[:, None])))
        c = rng.uniform(-1, 1, (n, size)) * half_widths[:, None]
        pre = vt.T @ (c / sing[:, None])
        inside = np.all(np.abs(pre) <= 1.0, axis=0)
        z = u_mat @ c + shift[:, None]
        sub = float(np.sum(np.where(inside, g(z), 0.0)))
        return direct, sub, int(np.sum(inside))

    parts = _run_batches(batch, samples, seed)
    direct = cube_vol * sum(p[0] for p in parts) / samples
    substituted = box_vol * sum(p[1] for p in parts) / samples / abs(det_exact)
    hits = sum(p[2] for p in parts)
    if hits < 1000:
        warnings.append(f"only {hits} of {samples} samples landed in the image box")
    err = abs(substituted - direct) / max(abs(direct), 1e-300)
    return ChangeOfVariablesAudit(err, direct, substituted, det_exact, float(np.prod(sing)), hits / samples, samples, warnings)


@dataclass
class GradientAudit:
    k_exp: float
    j_estimate: float
    g_norm: float
    ratio: float
    ratio_coarse: float
    refinement_delta: float
    containment: float
    witness: dict | None
    samples: int

    @property
    def status(self) -> str:
        return "ok" if self.containment == 1.0 else "geometry_failure"

    def to_dict(self) -> dict:
        return {
            "k_exp": self.k_exp,
            "J": self.j_estimate,
            "G": self.g_norm,
            "ratio": self.ratio,
            "ratio_coarse": self.ratio_coarse,
            "refinement_delta": self.refinement_delta,
            "containment": self.containment,
            "witness": self.witness,
            "samples": self.samples,
            "status": self.status,
        }


def _sample_box(rng, box: Box, size: int) -> np.ndarray:
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    return lo[:, None] + (hi - lo)[:, None] * rng.random((len(box), size))


def _gradient_integral(pair, spec, k_exp, geometry, samples, seed):
    if k_exp not in (-0.5, 0.0):
        raise ValueError("k_exp must be -1/2 or 0")
    numeric = pair.numeric
    volume = box_volume(geometry.present) * box_volume(geometry.past)

    def batch(size, seq):
        rng = np.random.default_rng(seq)
        z0 = _sample_box(rng, geometry.present, size)
        z1 = _sample_box(rng, geometry.past, size)
        if k_exp == 0.0:
            r, weight = rng.random(size), 1.0
        else:
            # r = u^2 has density r^(-1/2) / 2, which cancels the singular weight
            r, weight = rng.random(size) ** 2, 2.0
        sigma = z1[0] - z0[0]
        space = numeric.space(r, sigma, z1[1:, None, :], z0[1:, None, :])[:, 0, :]
        t = z0[0] + sigma * r**2
        inside = geometry.contains(t, space)
        vals = weight * spec.grad_v_abs(t, space[-2], space[-1])
        miss = None
        if not np.all(inside):
            i = int(np.argmin(inside))
            miss = {"r": float(r[i]), "present": z0[:, i].tolist(), "past": z1[:, i].tolist(), "point": [float(t[i])] + space[:, i].tolist()}
        return float(np.sum(vals)), int(np.sum(inside)), miss

    parts = _run_batches(batch, samples, seed)
    j = volume * sum(p[0] for p in parts) / samples
    inside = sum(p[1] for p in parts)
    witness = next((p[2] for p in parts if p[2] is not None), None)
    return j, inside / samples, witness


def trajectory_gradient_audit(
    pair: TrajectoryPair,
    spec: SubsolutionSpec,
    k_exp: float,
    geometry: CylinderGeometry,
    samples: int = 400_000,
    seed: int = 0,
    resolution: int = 64,
) -> GradientAudit:
    """Monte Carlo estimate of ``J = int_Q1 int_Q1- int_0^1 r^k_exp |u_v|(gamma(r))``.

    The estimate at ``samples`` is compared with one at ``samples // 4``
    (independent seed) for the refinement delta of ``J / ||u_v||_{L1(Q~)}``.
    """
    if pair.k != 1 or geometry.k != 1:
        raise ValueError("the gradient audit works with k = 1")
    k_exp = float(k_exp)
    g = box_integral(spec.grad_v_abs, geometry.enlarged, resolution)
    j, containment, witness = _gradient_integral(pair, spec, k_exp, geometry, samples, seed)
    j_coarse, _, _ = _gradient_integral(pair, spec, k_exp, geometry, max(samples // 4, 1), seed + 1)
    ratio = j / g if g > 0 else 0.0
    coarse = j_coarse / g if g > 0 else 0.0
    return GradientAudit(k_exp, j, g, ratio, coarse, _relative_drift(coarse, ratio), containment, witness, samples)
