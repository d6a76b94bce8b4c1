import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hermflow.errors import InadmissibleConstruction
from hermflow.estimates import check_smoothing_bounds
from hermflow.flow import DtPolicy, log_det_ratio, metric_from_potential
from hermflow.geometry import flat_metric
from hermflow.grid import make_grid
from hermflow.smoothing import (
    KinkSpec, SmoothingExperiment, build_nonsmooth_solution, cauchy_check, kinked_potential, recovery_check,
    run_pipeline,
)


def _sup(x):
    return float(np.max(np.abs(x)))


@pytest.fixture(scope="module")
def ghat():
    return flat_metric(make_grid(1, None, 256))


@pytest.fixture(scope="module")
def report(ghat):
    exp = SmoothingExperiment(ghat.grid, ghat, KinkSpec(), (8, 16, 32, 64), 0.1, DtPolicy(snapshot_every=0.01))
    return run_pipeline(exp)


# ------------------------------------------------------------- construction

def test_kink_construction(ghat):
    phi, F = build_nonsmooth_solution(ghat.grid, ghat, KinkSpec())
    g = metric_from_potential(ghat, phi)
    assert _sup(log_det_ratio(g, ghat) + F(phi, ghat.grid)) < 1e-12
    # the curvature peak at the kink is slope_jump^2 / (4 tau): it doubles when h halves
    peaks = []
    for res in (128, 256):
        grid = make_grid(1, None, res)
        p = kinked_potential(grid, KinkSpec())[:, 0]
        h = grid.spacing[0]
        peaks.append(np.max((np.roll(p, 1) - 2 * p + np.roll(p, -1)) / h**2))
    jump = 0.3 * math.sqrt(2)
    assert peaks[1] > 0.8 * jump**2 / (4 * 2 * ghat.grid.spacing[0])
    assert 1.6 < peaks[1] / peaks[0] < 2.2


def test_single_function_base_is_smooth(ghat):
    spec = KinkSpec(amplitudes=(0.3,), phases=(0.0,), wavenumbers=(1,))
    phi, F = build_nonsmooth_solution(ghat.grid, ghat, spec)
    X = ghat.grid.coords()[0]
    assert _sup(phi - 0.3 * np.cos(X)) < 1e-15
    assert _sup(F(phi, ghat.grid) + log_det_ratio(metric_from_potential(ghat, phi), ghat)) < 1e-12


def test_large_amplitude_inadmissible(ghat):
    with pytest.raises(InadmissibleConstruction) as e:
        build_nonsmooth_solution(ghat.grid, ghat, KinkSpec(amplitudes=(5.0, 5.0)))
    assert e.value.margin < 0.05


def test_kink_spec_validation():
    with pytest.raises(ValueError):
        KinkSpec(amplitudes=(0.3,), phases=(0.0, 1.0), wavenumbers=(1,))
    with pytest.raises(ValueError):
        KinkSpec(tau_factor=0)


@settings(max_examples=10)
@given(shift=st.floats(0, 2 * math.pi))
def test_softmax_bounds(shift):
    grid = make_grid(1, None, 64)
    spec = KinkSpec(phases=(shift, shift + math.pi / 2))
    phi = kinked_potential(grid, spec)
    x = grid.coords()[0]
    hard = np.maximum(0.3 * np.cos(x - shift), 0.3 * np.cos(x - shift - math.pi / 2))
    tau = spec.tau_factor * grid.spacing[0]
    assert np.all(phi >= hard - 1e-15)
    assert np.all(phi <= hard + tau * math.log(2) + 1e-15)


def test_experiment_validation(ghat):
    with pytest.raises(ValueError):
        SmoothingExperiment(ghat.grid, ghat, levels=(16, 8, 32))
    with pytest.raises(ValueError):
        SmoothingExperiment(ghat.grid, ghat, t_end=0)


# ------------------------------------------------------------------ ladder

def test_ladder_all_levels_succeed(report):
    assert [lv.j for lv in report.successful()] == [8, 16, 32, 64]
    assert report.base_residual < 1e-12
    assert all(lv.c > 0 for lv in report.levels)


def test_mollification_monotone(report):
    e = [lv.mollify_error for lv in report.levels]
    assert all(b < a for a, b in zip(e, e[1:]))


def test_initial_speed_decreasing_and_small(report):
    s = [lv.phidot0_sup for lv in report.levels]
    assert all(b < a for a, b in zip(s, s[1:]))
    assert s[-1] < 1e-2


def test_initial_speed_identity(report):
    # phidot_j(0) equals F(psi_j) - F(phi_j) because psi_j solves the shifted problem
    for lv in report.levels:
        assert lv.phidot0_identity_residual < 1e-9
        assert lv.phidot0_sup <= report.experiment.kink.lam * (lv.psi_error + lv.mollify_error) + 1e-12


def test_cauchy(report):
    v = cauchy_check(report, 0.05)
    assert v.passed
    assert all(r >= 1.5 for r in v.constants["ratios"])


def test_recovery(report):
    v = recovery_check(report)
    assert v.passed
    assert all(d["pass"] for d in v.details)


def test_uniform_bounds(report):
    v = check_smoothing_bounds(report.family(), 0.05)
    assert v.passed
    assert all(r < 10 for r in v.constants["ratios"].values())


def test_shared_snapshot_times(report):
    for lv in report.successful():
        assert np.array_equal(lv.trajectory.times, report.times)


def test_cauchy_guards(report, ghat):
    with pytest.raises(ValueError):
        cauchy_check(report, 0.055)
    from dataclasses import replace
    thin = replace(report, levels=report.levels[:2])
    with pytest.raises(ValueError):
        cauchy_check(thin, 0.05)


def test_recovery_sabotage_detected(ghat):
    exp = SmoothingExperiment(ghat.grid, ghat, KinkSpec(), (8, 16, 32, 64), 0.1, DtPolicy(snapshot_every=0.01),
                              c_factor=2.0)
    v = recovery_check(run_pipeline(exp))
    assert not v.details[0]["pass"]


def test_smooth_base_collapses_to_fixed_point(ghat):
    spec = KinkSpec(amplitudes=(0.3,), phases=(0.0,), wavenumbers=(1,))
    exp = SmoothingExperiment(ghat.grid, ghat, spec, (1e4, 2e4, 4e4), 0.02, DtPolicy(snapshot_every=0.01))
    rep = run_pipeline(exp)
    for lv in rep.levels:
        assert lv.ok
        assert lv.psi_error < 1e-8
        assert lv.phidot0_sup < 1e-8
        assert max(_sup(s.phi - lv.psi) for s in lv.trajectory.snapshots) < 1e-8
    assert recovery_check(rep).passed


def test_pipeline_deterministic(ghat):
    grid = make_grid(1, None, 64)
    g = flat_metric(grid)
    exp = SmoothingExperiment(grid, g, KinkSpec(), (4, 8, 16), 0.02, DtPolicy(snapshot_every=0.01))
    a, b = run_pipeline(exp), run_pipeline(exp)
    assert a.to_dict() == b.to_dict()
    for la, lb in zip(a.levels, b.levels):
        for sa, sb in zip(la.trajectory.snapshots, lb.trajectory.snapshots):
            assert np.array_equal(sa.phi, sb.phi)
