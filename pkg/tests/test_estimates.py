import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from hermflow.errors import PreconditionError
from hermflow.estimates import (
    barrier_gradient, barrier_trace, check_lemma31, check_smoothing_bounds, curvature_difference_residual,
    estimate_series, gamma_barrier, gradient_energy, phi_tensor, ricci_difference_residual, ricci_norm,
    third_order_S, third_order_S_hessian_route, trace_quantity, trace_via_laplacian,
)
from hermflow.flow import DtPolicy, metric_from_potential, run_flow
from hermflow.forcing import linear_forcing, zero_forcing
from hermflow.geometry import HermitianMetricField, conformal_metric, flat_metric, perturbed_metric
from hermflow.grid import band_limited_field, make_grid

from oracles import conformal_n1, dz, on_grid, x_, y_


def _sup(x):
    return float(np.max(np.abs(x)))


def _normalized(grid, seed, amp, modes=2):
    f = band_limited_field(grid, np.random.default_rng(seed), modes=modes)
    return amp * f / _sup(f)


@pytest.fixture(scope="module")
def g1():
    return flat_metric(make_grid(1, None, 64))


@pytest.fixture(scope="module")
def g2():
    return perturbed_metric(make_grid(2, None, 16), seed=3)


# ---------------------------------------------------------------- pointwise

def test_gradient_energy_examples(g1):
    grid = g1.grid
    X, Y = grid.coords()
    assert _sup(gradient_energy(np.full(grid.shape, 2.5), g1)) == 0
    rho = gradient_energy(np.sin(X) + 0 * Y, g1)
    assert _sup(rho - np.cos(X) ** 2 / 4) < 1e-14
    assert np.all(rho >= 0)


@settings(max_examples=10)
@given(c=st.floats(-5, 5), seed=st.integers(0, 1000))
def test_gradient_energy_quadratic(g2, c, seed):
    phi = band_limited_field(g2.grid, np.random.default_rng(seed))
    a, b = gradient_energy(c * phi, g2), gradient_energy(phi, g2)
    assert _sup(a - c * c * b) <= 1e-12 * (1 + _sup(a))


def test_trace_examples(g1):
    grid = g1.grid
    X, Y = grid.coords()
    eps = 0.3
    phi = eps * np.cos(X) + 0 * Y
    g = metric_from_potential(g1, phi)
    assert _sup(trace_quantity(g, g1) - (1 - eps / 4 * np.cos(X))) < 1e-13
    assert _sup(trace_quantity(g1, g1) - 1) == 0


def test_trace_two_routes(g2):
    phi = _normalized(g2.grid, 7, 0.1)
    g = metric_from_potential(g2, phi)
    assert _sup(trace_quantity(g, g2) - trace_via_laplacian(phi, g2)) < 1e-10


def test_phi_tensor_trivial(g2):
    assert _sup(phi_tensor(g2, g2).values) == 0
    g = HermitianMetricField(g2.grid, 3.0 * g2.values)
    assert _sup(phi_tensor(g, g2).values) < 1e-12


def _n1_symbolic():
    phi = sp.Rational(3, 10) * sp.cos(x_) + sp.Rational(1, 5) * sp.sin(2 * y_)
    g = 1 + sp.diff(phi, x_, 2) / 4 + sp.diff(phi, y_, 2) / 4
    return phi, g


def test_phi_tensor_and_S_against_closed_form(g1):
    grid = g1.grid
    X, Y = grid.coords()
    phi_s, g_s = _n1_symbolic()
    phi = on_grid(phi_s, X, Y).real
    g = metric_from_potential(g1, phi)
    Phi = phi_tensor(g, g1).values[..., 0, 0, 0]
    dg = dz(g_s)
    assert _sup(Phi - on_grid(dg / g_s, X, Y)) < 1e-10
    S_exact = on_grid(dg * sp.conjugate(dg) / g_s**3, X, Y).real
    assert _sup(third_order_S(g, g1) - S_exact) < 1e-8
    assert _sup(third_order_S_hessian_route(phi, g, g1) - S_exact) < 1e-8


def test_S_two_routes(g2):
    phi = _normalized(g2.grid, 11, 0.1)
    g = metric_from_potential(g2, phi)
    assert _sup(third_order_S(g, g2) - third_order_S_hessian_route(phi, g, g2)) < 1e-8
    assert _sup(third_order_S(g2, g2)) == 0


def test_ricci_norm_examples(g1):
    grid = g1.grid
    X, Y = grid.coords()
    assert _sup(ricci_norm(flat_metric(grid, 2.0))) == 0
    u_s = sp.Rational(1, 5) * sp.cos(x_) * sp.sin(y_)
    g_s, _, _, ric_s = conformal_n1(u_s)
    g = conformal_metric(grid, on_grid(u_s, X, Y).real)
    expect = on_grid(sp.Abs(ric_s) / g_s, X, Y).real
    assert _sup(ricci_norm(g) - expect) < 1e-10


def test_ricci_norm_scaling(g2):
    # Ric(cg) = Ric(g), and each inverse metric contributes 1/c
    c = 2.5
    cg = HermitianMetricField(g2.grid, c * g2.values)
    assert _sup(ricci_norm(cg) - ricci_norm(g2) / c) < 1e-12


# ------------------------------------------------------ difference identities

def test_difference_identities_random_states():
    # two active axes keep res 32 affordable while staying resolved
    g2 = perturbed_metric(make_grid(2, None, 32), seed=3, axes=[0, 2])
    for seed in range(3):
        f = band_limited_field(g2.grid, np.random.default_rng(100 + seed), axes=[0, 2])
        phi = 0.05 * f / _sup(f)
        g = metric_from_potential(g2, phi)
        assert _sup(curvature_difference_residual(g, g2)) < 1e-6
        assert _sup(ricci_difference_residual(g, g2)) < 1e-6


def test_opposite_trace_sign_is_detected(g2):
    phi = _normalized(g2.grid, 5, 0.05)
    g = metric_from_potential(g2, phi)
    assert _sup(ricci_difference_residual(g, g2, sign=+1.0)) > 1e-4


# ------------------------------------------------------------------ series

@pytest.fixture(scope="module")
def small_run(g1):
    phi0 = _normalized(g1.grid, 2, 0.2)
    return run_flow(phi0, g1, zero_forcing(), 0.05, DtPolicy(snapshot_every=0.01))


def test_estimate_series_is_pure(small_run):
    a = [r.csv_values() for r in estimate_series(small_run)]
    b = [r.csv_values() for r in estimate_series(small_run)]
    assert a == b
    assert len(a) == len(small_run.snapshots)


def test_estimate_series_refinement():
    rows = []
    for res in (32, 64):
        ghat = flat_metric(make_grid(1, None, res))
        X, Y = ghat.grid.coords()
        phi0 = 0.2 * np.cos(X) + 0.1 * np.sin(Y)
        traj = run_flow(phi0, ghat, zero_forcing(), 0.02, DtPolicy(snapshot_every=0.01, dt_max=2e-4))
        rows.append(np.array([r.csv_values()[:7] for r in estimate_series(traj)]))
    assert np.max(np.abs(rows[0] - rows[1])) < 1e-4


# ---------------------------------------------------------------- barriers

def test_gamma_barrier_formula():
    x = np.linspace(-1, 1, 5)
    assert np.allclose(gamma_barrier(x, 4.0), 4 * x - x * x / 4)


def test_barriers_on_zero_trajectory(g1):
    traj = run_flow(np.zeros(g1.grid.shape), g1, zero_forcing(), 0.03)
    assert all(v is None and p is None for _, v, p in barrier_gradient(traj, 10.0))
    alpha = 1.0
    for t, v, _ in barrier_trace(traj, 10.0, alpha):
        w = math.exp(-alpha / t) if t > 0 else 0.0
        assert v == pytest.approx(w * math.log(1) + 1.0, abs=1e-15)


def test_barrier_trace_at_least_one(small_run):
    for _, v, _ in barrier_trace(small_run, 5.0, 1.0):
        assert v >= 1.0


def test_barrier_gradient_monotone_in_A(small_run):
    # gamma grows with A where phi > 0, so H decreases there
    s = small_run.snapshots[2]
    pos = s.phi > 0.05
    rho = gradient_energy(s.phi, small_run.ghat)
    H = lambda A: s.t * np.log(np.maximum(rho, 1e-300)) - gamma_barrier(s.phi, A)
    assert np.all(H(20.0)[pos] <= H(10.0)[pos])


def test_barrier_series_bounded(small_run):
    vals = [v for t, v, _ in barrier_trace(small_run, 5.0, 1.0) if t >= 0.01]
    assert max(vals) <= 2 * vals[0]
    grad = [v for t, v, _ in barrier_gradient(small_run, 10.0) if t > 0]
    assert all(np.isfinite(grad))


# ------------------------------------------------------------ verdicts

def test_lemma31_maximum_principle(small_run):
    v = check_lemma31(small_run)
    assert v.constants["C"] == 0
    assert v.passed and v.margin >= -1e-8
    assert all(d["pass"] for d in v.details)


def test_lemma31_stationary(g1):
    traj = run_flow(np.zeros(g1.grid.shape), g1, zero_forcing(), 0.02)
    v = check_lemma31(traj)
    assert v.passed


def test_lemma31_constant_data_scalar_ode(g1):
    c = 0.1
    F = linear_forcing(1.0)
    traj = run_flow(np.full(g1.grid.shape, c), g1, F, 0.05, DtPolicy(snapshot_every=0.01))
    for s in traj.snapshots:
        assert _sup(s.phidot - c * math.exp(s.t)) < 1e-6
    v = check_lemma31(traj, F)
    assert v.constants["C"] == pytest.approx(1.05)
    assert v.passed and v.margin > 0


def test_lemma31_detects_too_tight_envelope(g1):
    c = 0.1
    F = linear_forcing(1.0)
    traj = run_flow(np.full(g1.grid.shape, c), g1, F, 0.05, DtPolicy(snapshot_every=0.01))
    assert not check_lemma31(traj, F, delta=-0.5).passed


def test_lemma31_empty_trajectory_rejected(small_run):
    from dataclasses import replace
    with pytest.raises(ValueError):
        check_lemma31(replace(small_run, snapshots=[]))


def test_smoothing_bounds_identical_family(small_run):
    v = check_smoothing_bounds({8: small_run, 16: small_run, 32: small_run}, 0.02)
    assert v.passed
    assert all(r == 1.0 for r in v.constants["ratios"].values())


def test_smoothing_bounds_guards(g1, small_run):
    big = run_flow(_normalized(g1.grid, 4, 0.2) + 3.0, g1, zero_forcing(), 0.02)
    with pytest.raises(PreconditionError):
        check_smoothing_bounds({8: small_run, 16: big}, 0.02)
    with pytest.raises(PreconditionError):
        check_smoothing_bounds({8: small_run}, 0.015)
    with pytest.raises(PreconditionError):
        check_smoothing_bounds({}, 0.02)


def test_verdict_json_shape(small_run):
    d = check_lemma31(small_run).to_dict()
    assert {"name", "constants", "margin", "pass", "t_critical"} <= set(d)
