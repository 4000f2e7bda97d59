import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kintraj.errors import InconsistencyError, RejectedSubsolutionError
from kintraj.probe import (
    KINDS,
    CylinderGeometry,
    SpecNorms,
    _row,
    box_integral,
    box_volume,
    certify,
    change_of_variables_audit,
    make_subsolution,
    poincare_ratio,
    spec_norms,
    sweep,
    trajectory_gradient_audit,
)
from oracles import central_difference

EPS_GRID = [round(0.1 * i, 1) for i in range(1, 10)]
DRIFT = {"x0": -4.5, "v0": 1.5}


def test_box_integral_trivial_cases(geometry1):
    ones = box_integral(lambda t, x, v: np.ones_like(t * x * v), geometry1.present, 8)
    assert ones == pytest.approx(4.0, rel=1e-14)
    assert box_integral(lambda t, x, v: t + 0 * x * v, geometry1.present, 16) == pytest.approx(-2.0, rel=1e-14)
    with pytest.raises(ValueError):
        box_integral(lambda t, x, v: t, geometry1.present, 4)


def test_box_integral_self_consistency():
    box = ((-1.0, 0.0), (-1.0, 1.0), (-1.0, 1.0))

    def f(t, x, v):
        return np.exp(-(x**2 + v**2) * (2 + t))

    coarse, fine = box_integral(f, box, 32), box_integral(f, box, 64)
    assert coarse == pytest.approx(fine, rel=5e-3)


def test_box_integral_independent_of_workers(geometry1, monkeypatch):
    heat = make_subsolution("v_heat", geometry=geometry1)
    monkeypatch.setenv("KINTRAJ_WORKERS", "1")
    one = box_integral(heat.u, geometry1.enlarged, 32)
    monkeypatch.setenv("KINTRAJ_WORKERS", "3")
    assert box_integral(heat.u, geometry1.enlarged, 32) == one


def test_geometry_invariants(geometry1):
    assert geometry1.violations() == []
    assert geometry1.past[0][1] < geometry1.present[0][0]
    assert 1 <= geometry1.r0 <= 7
    (t_lo, t_hi), (x_lo, x_hi), (v_lo, v_hi) = geometry1.enlarged
    assert (t_lo, t_hi) == (-3.0, 0.0)
    assert x_hi == pytest.approx(2 * geometry1.r0)
    assert v_hi == pytest.approx(2 * geometry1.r0)
    assert geometry1.shrunk().violations()


@pytest.mark.parametrize("kind", KINDS)
def test_family_certifies(kind, geometry1):
    spec = make_subsolution(kind, geometry=geometry1)
    assert spec.certified
    assert spec.residual_bound <= 1e-8


def test_heat_residual_by_finite_differences(geometry1):
    heat = make_subsolution("v_heat", geometry=geometry1)
    t, x, v = -1.3, 0.4, 0.7
    u_t = central_difference(lambda s: heat.u(s, x, v), t, 1e-3)
    u_vv = (heat.u(t, x, v + 1e-3) - 2 * heat.u(t, x, v) + heat.u(t, x, v - 1e-3)) / 1e-6
    assert u_t - u_vv == pytest.approx(0.0, abs=1e-6)


def test_drifting_gaussian_certifies(geometry1):
    spec = make_subsolution("kolmogorov_gaussian", DRIFT, geometry=geometry1)
    assert spec.params["x0"] == -4.5


def test_wrong_gaussian_is_rejected(geometry1):
    # doubling the diffusivity in u but not in the declared operator breaks the residual
    good = make_subsolution("kolmogorov_gaussian", {"lam": 2.0}, geometry=geometry1)
    bad = replace(good, lam=1.0, certified=False, residual_bound=None)
    with pytest.raises(RejectedSubsolutionError, match="residual"):
        certify(bad, geometry1)


def test_wrong_derivative_is_rejected(geometry1):
    heat = make_subsolution("v_heat", geometry=geometry1)
    bad = replace(heat, u_v=lambda t, x, v: 1.01 * heat.u_v(t, x, v), certified=False)
    with pytest.raises(RejectedSubsolutionError, match="u_v"):
        certify(bad, geometry1)


def test_negative_u_is_rejected(geometry1):
    with pytest.raises(RejectedSubsolutionError, match="u < 0"):
        make_subsolution("affine", {"offset": 1.0}, geometry=geometry1)
    with pytest.raises(RejectedSubsolutionError):
        make_subsolution("v_heat", {"t0": 2.5}, geometry=geometry1)
    with pytest.raises(ValueError):
        make_subsolution("cubic", geometry=geometry1)


def test_uncertified_spec_refused(geometry1):
    heat = make_subsolution("v_heat", geometry=geometry1)
    with pytest.raises(RejectedSubsolutionError):
        spec_norms(replace(heat, certified=False), geometry1, 16)


def test_constant_has_zero_lhs(geometry1):
    row = poincare_ratio(make_subsolution("constant", {"value": 2.5}, geometry1), 0.5, geometry1, 32)
    assert row.lhs <= 1e-12
    assert row.ratio == 0.0
    assert row.u == pytest.approx(10.0)


def test_affine_matches_hand_integration(geometry1):
    m, c = 1.0, 2 * geometry1.r0
    spec = make_subsolution("affine", {"slope": m, "offset": c}, geometry1)
    row = poincare_ratio(spec, 0.5, geometry1, 32)
    # the past mean is c; (m v)_+ over Q1 integrates to |m|; |u_v| = |m| on the enlarged box
    g = abs(m) * box_volume(geometry1.enlarged)
    expected = abs(m) / (g / 0.5 + 0.25 * 4 * c)
    assert row.mean_past == pytest.approx(c, rel=1e-12)
    assert row.lhs == pytest.approx(1.0, rel=1e-12)
    assert row.ratio == pytest.approx(expected, rel=1e-2)


def test_heat_ratio_finite_and_stable(geometry1):
    heat = make_subsolution("v_heat", geometry=geometry1)
    a = poincare_ratio(heat, 0.5, geometry1, 32)
    b = poincare_ratio(heat, 0.5, geometry1, 64)
    assert math.isfinite(a.ratio) and math.isfinite(b.ratio)
    assert abs(a.ratio - b.ratio) <= 0.02 * max(abs(b.ratio), 1e-300)


def test_drifting_gaussian_nontrivial_and_stable(geometry1):
    spec = make_subsolution("kolmogorov_gaussian", DRIFT, geometry=geometry1)
    result = sweep([spec], EPS_GRID, geometry1, resolutions=(32, 64))
    assert result.empirical_constant > 0
    assert result.refinement_delta < 0.05


def test_inconsistent_norms_raise():
    with pytest.raises(InconsistencyError):
        _row("bogus", SpecNorms(0.0, 1.0, 0.0, 0.0, 8), 0.5)
    with pytest.raises(ValueError):
        _row("bogus", SpecNorms(0.0, 0.0, 1.0, 1.0, 8), 1.0)


def test_sweep_constant_family_gives_zero(geometry1):
    result = sweep([make_subsolution("constant", geometry=geometry1)], [0.2, 0.7], geometry1, resolutions=(16, 32))
    assert result.empirical_constant == 0.0
    assert result.refinement_delta == 0.0


def test_sweep_flags_shrunk_geometry(geometry1):
    bad = geometry1.shrunk()
    specs = [make_subsolution(kind, geometry=bad) for kind in ("constant", "affine")]
    result = sweep(specs, [0.5], bad, resolutions=(16,))
    assert result.geometry_violation
    assert not sweep(specs, [0.5], geometry1, resolutions=(16,)).geometry_violation


def test_ratio_shrinks_at_small_eps(geometry1):
    spec = make_subsolution("kolmogorov_gaussian", DRIFT, geometry=geometry1)
    norms = spec_norms(spec, geometry1, 32)
    ratios = [_row("g", norms, e).ratio for e in EPS_GRID]
    assert ratios[0] < max(ratios)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.1, 5.0))
def test_lhs_invariant_under_constant_shift(geometry1, c):
    spec = make_subsolution("kolmogorov_gaussian", DRIFT, geometry=geometry1)
    base = spec_norms(spec, geometry1, 16)
    shifted = spec_norms(spec.shifted(c), geometry1, 16)
    assert shifted.lhs == pytest.approx(base.lhs, rel=1e-9, abs=1e-12)
    assert shifted.g == base.g


@settings(max_examples=10, deadline=None)
@given(st.floats(0.01, 100.0))
def test_ratio_invariant_under_scaling(geometry1, lam):
    spec = make_subsolution("kolmogorov_gaussian", DRIFT, geometry=geometry1)
    base = poincare_ratio(spec, 0.4, geometry1, 16)
    scaled = poincare_ratio(spec.scaled(lam), 0.4, geometry1, 16)
    assert scaled.lhs == pytest.approx(lam * base.lhs, rel=1e-10)
    assert scaled.g == pytest.approx(lam * base.g, rel=1e-10)
    assert scaled.u == pytest.approx(lam * base.u, rel=1e-10)
    assert scaled.ratio == pytest.approx(base.ratio, rel=1e-10)


def test_delimited_export(geometry1):
    result = sweep([make_subsolution("affine", geometry=geometry1)], [0.3, 0.6], geometry1, resolutions=(16,))
    lines = result.to_delimited().splitlines()
    assert lines[0] == "spec,eps,lhs,g,u,ratio"
    assert len(lines) == 3 and lines[1].startswith("affine,0.29999999999999999,")


# -- audits ---------------------------------------------------------------------


def test_change_of_variables_constant_weight(pair1):
    audit = change_of_variables_audit(pair1, 0.5, -2.0, [0.2], -0.3, samples=20_000, g=lambda z: np.ones(z.shape[1]))
    assert audit.direct == pytest.approx(4.0, rel=1e-14)
    assert audit.relative_error < 0.05
    assert audit.det_exact == pytest.approx(0.5**4.5)
    assert audit.det_numeric == pytest.approx(audit.det_exact, rel=1e-9)


def test_change_of_variables_converges(pair1):
    small = change_of_variables_audit(pair1, 0.5, -2.0, [0.2], -0.3, samples=10_000, seed=3)
    large = change_of_variables_audit(pair1, 0.5, -2.0, [0.2], -0.3, samples=1_000_000, seed=3)
    assert large.relative_error < 0.02
    assert large.relative_error < max(small.relative_error, 0.02)


def test_change_of_variables_warns_near_zero(pair1):
    audit = change_of_variables_audit(pair1, 1e-3, -2.0, [0.0], 0.0, samples=5_000)
    assert audit.status == "warning"
    assert "tiny" in audit.warnings[0]


def test_change_of_variables_is_seeded(pair1):
    a = change_of_variables_audit(pair1, 0.25, -2.0, [0.0], 0.0, samples=70_000, seed=11)
    b = change_of_variables_audit(pair1, 0.25, -2.0, [0.0], 0.0, samples=70_000, seed=11)
    assert a.to_dict() == b.to_dict()


def test_gradient_audit_zero_gradient(pair1, geometry1):
    audit = trajectory_gradient_audit(pair1, make_subsolution("constant", geometry=geometry1), 0.0, geometry1, samples=10_000)
    assert audit.j_estimate == 0.0
    assert audit.containment == 1.0


@pytest.mark.parametrize("k_exp", [-0.5, 0.0])
def test_gradient_audit_heat(pair1, geometry1, k_exp):
    heat = make_subsolution("v_heat", geometry=geometry1)
    audit = trajectory_gradient_audit(pair1, heat, k_exp, geometry1, samples=100_000)
    assert audit.status == "ok"
    assert math.isfinite(audit.j_estimate) and audit.j_estimate > 0
    assert audit.refinement_delta < 0.05


def test_gradient_audit_reports_containment_failure(pair1, geometry1):
    heat = make_subsolution("v_heat", geometry=geometry1)
    tight = CylinderGeometry(geometry1.kappa, 0.5)
    audit = trajectory_gradient_audit(pair1, heat, 0.0, tight, samples=20_000)
    assert audit.status == "geometry_failure"
    assert audit.containment < 1.0
    assert audit.witness is not None and len(audit.witness["point"]) == 3


def test_gradient_audit_rejects_other_exponents(pair1, geometry1):
    heat = make_subsolution("v_heat", geometry=geometry1)
    with pytest.raises(ValueError):
        trajectory_gradient_audit(pair1, heat, 1.0, geometry1, samples=100)
