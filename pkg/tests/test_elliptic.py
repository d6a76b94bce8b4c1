import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hermflow.elliptic import (
    EllipticProblem, c_constant, ma_residual, normalize_pair, solve_elliptic, stability_gap, volume_identity,
)
from hermflow.errors import NotAdmissible
from hermflow.flow import DtPolicy, log_det_ratio, metric_from_potential, run_flow
from hermflow.forcing import linear_forcing, zero_forcing
from hermflow.geometry import HermitianMetricField, flat_metric, perturbed_metric
from hermflow.grid import band_limited_field, make_grid, mollify


def _sup(x):
    return float(np.max(np.abs(x)))


def _field(grid, seed, amp, axes=None):
    f = band_limited_field(grid, np.random.default_rng(seed), axes=axes)
    return amp * f / _sup(f)


def manufactured(ghat, target, lam):
    L = log_det_ratio(metric_from_potential(ghat, target), ghat)
    return linear_forcing(lam, lam * target + L)


@pytest.fixture(scope="module")
def g1():
    return flat_metric(make_grid(1, None, 32))


@pytest.fixture(scope="module")
def gs():
    # flat metric whose F' = 1 linearisation has no symbol near zero
    return flat_metric(make_grid(1, None, 32), 0.375)


@pytest.fixture(scope="module")
def g2():
    # scaled so the manufactured linearisation stays away from resonance
    base = perturbed_metric(make_grid(2, None, 16), seed=1, axes=[0, 2])
    return HermitianMetricField(base.grid, 0.375 * base.values)


# ------------------------------------------------------------------ residual

def test_residual_trivial(g1):
    assert _sup(ma_residual(np.zeros((1, 1)), EllipticProblem(g1, zero_forcing()))) == 0


def test_residual_manufactured_and_shift(g1):
    target = _field(g1.grid, 0, 0.2)
    F = manufactured(g1, target, 1.0)
    prob = EllipticProblem(g1, F)
    assert _sup(ma_residual(target, prob)) < 1e-12
    assert _sup(ma_residual(target + 0.3, prob) - 0.3) < 1e-12
    frozen = EllipticProblem(g1, manufactured(g1, target, 0.0))
    assert _sup(ma_residual(target, frozen)) < 1e-12


def test_residual_inadmissible(g1):
    X, Y = g1.grid.coords()
    with pytest.raises(NotAdmissible):
        ma_residual(5 * np.cos(X) + 0 * Y, EllipticProblem(g1, zero_forcing()))


# ------------------------------------------------------------------- solver

def test_manufactured_recovery_n1(gs):
    target = _field(gs.grid, 1, 0.2)
    prob = EllipticProblem(gs, manufactured(gs, target, 1.0))
    rep = solve_elliptic(prob, np.zeros((1, 1)))
    assert rep.residual < 1e-10
    assert _sup(rep.phi - target) < 1e-8
    assert rep.margin > 0
    assert abs(_sup(ma_residual(rep.phi, prob)) - rep.residual) < 1e-12


def test_manufactured_recovery_n2(g2):
    target = _field(g2.grid, 2, 0.1, axes=[0, 2])
    prob = EllipticProblem(g2, manufactured(g2, target, 1.0))
    rep = solve_elliptic(prob, np.zeros((1,) * 4))
    assert _sup(rep.phi - target) < 1e-8


def test_mean_zero_gauge_flat_zero_forcing(g1):
    prob = EllipticProblem(g1, zero_forcing(), "mean-zero")
    rep = solve_elliptic(prob, _field(g1.grid, 3, 0.05))
    assert _sup(rep.phi) < 1e-9


def test_frozen_forcing_mean_zero(g1):
    target = _field(g1.grid, 4, 0.2)
    target -= target.mean()
    prob = EllipticProblem(g1, manufactured(g1, target, 0.0), "mean-zero")
    rep = solve_elliptic(prob, np.zeros((1, 1)))
    assert _sup(rep.phi - target) < 1e-8


def test_inadmissible_start(g1):
    X, Y = g1.grid.coords()
    prob = EllipticProblem(g1, zero_forcing())
    with pytest.raises(NotAdmissible):
        solve_elliptic(prob, 5 * np.cos(X) + 0 * Y)


def test_newton_quadratic_tail(gs):
    target = _field(gs.grid, 5, 0.4)
    prob = EllipticProblem(gs, manufactured(gs, target, 1.0))
    rep = solve_elliptic(prob, np.zeros((1, 1)), tol=1e-13)
    r = [x for x in rep.history if x > 1e-12]   # drop the roundoff floor
    assert len(r) >= 3
    a, b, c = r[-3:]
    slope = math.log(c / b) / math.log(b / a)
    assert slope >= 1.8


def test_bad_normalization_rejected(g1):
    with pytest.raises(ValueError):
        EllipticProblem(g1, zero_forcing(), "sideways")
    with pytest.raises(ValueError):
        EllipticProblem(g1, zero_forcing(), "symmetric-sup")


def test_symmetric_sup_normalization(g1):
    target = _field(g1.grid, 6, 0.2)
    ref = target + 0.1 * _field(g1.grid, 7, 1.0)
    prob = EllipticProblem(g1, manufactured(g1, target, 0.0), "symmetric-sup", reference=ref)
    rep = solve_elliptic(prob, np.zeros((1, 1)))
    d = rep.phi - ref
    assert abs(np.max(d) - np.max(-d)) < 1e-14


# ----------------------------------------------------------- volume identity

def test_volume_identity_zero(g2):
    assert volume_identity(np.zeros((1,) * 4), g2) == 0


@settings(max_examples=10)
@given(seed=st.integers(0, 10_000), amp=st.floats(0.01, 0.1))
def test_volume_identity_n1(seed, amp):
    ghat = flat_metric(make_grid(1, None, 32))
    phi = band_limited_field(ghat.grid, np.random.default_rng(seed), modes=4)
    phi = amp * phi / _sup(phi)
    metric_from_potential(ghat, phi)   # admissible
    assert volume_identity(phi, ghat) < 1e-12


@settings(max_examples=5)
@given(seed=st.integers(0, 10_000))
def test_volume_identity_n2_flat(seed):
    ghat = flat_metric(make_grid(2, None, 16))
    phi = _field(ghat.grid, seed, 0.2)
    metric_from_potential(ghat, phi)   # admissible
    assert volume_identity(phi, ghat) < 1e-10


# ---------------------------------------------------------- normalisation

def test_normalize_pair_examples(g1):
    phi = _field(g1.grid, 8, 0.3)
    assert _sup(normalize_pair(phi, phi) - phi) == 0
    assert _sup(normalize_pair(phi + 3, phi) - phi) < 1e-14


@given(seed=st.integers(0, 10_000))
def test_normalize_pair_symmetric(seed):
    rng = np.random.default_rng(seed)
    psi, phi = rng.normal(size=(2, 16, 16))
    d = normalize_pair(psi, phi) - phi
    assert abs(np.max(d) - np.max(-d)) < 1e-14


def test_c_constant_examples(g1):
    phi = _field(g1.grid, 9, 0.2)
    assert c_constant(phi, g1, zero_forcing()) == 1.0
    k = 0.7
    assert c_constant(phi, g1, linear_forcing(0.0, -k)) == pytest.approx(math.exp(k), rel=1e-14)


def test_c_constant_ladder_trend():
    ghat = flat_metric(make_grid(1, None, 64))
    X, Y = ghat.grid.coords()
    target = 0.3 * np.cos(X) + 0.2 * np.sin(2 * Y) + 0.1 * np.cos(3 * X + Y)
    F = manufactured(ghat, target, 1.0)
    dev = [abs(c_constant(mollify(ghat.grid, target, j), ghat, F) - 1) for j in (1, 2, 4, 8)]
    assert all(b < a for a, b in zip(dev, dev[1:]))


# --------------------------------------------------------------- stability

def test_stability_gap_constant_offset(g1):
    target = _field(g1.grid, 10, 0.2)
    prob = EllipticProblem(g1, manufactured(g1, target, 0.0))
    assert stability_gap(target, target + 7, prob) < 1e-14


def test_stability_gap_two_starts(g2):
    target = _field(g2.grid, 11, 0.1, axes=[0, 2])
    prob = EllipticProblem(g2, manufactured(g2, target, 1.0))
    a = solve_elliptic(prob, np.zeros((1,) * 4))
    b = solve_elliptic(prob, _field(g2.grid, 12, 0.01, axes=[0, 2]))
    assert stability_gap(a, b, prob) < 1e-8


def test_stability_gap_guard(g1):
    t1, t2 = _field(g1.grid, 13, 0.2), _field(g1.grid, 14, 0.2)
    p1 = EllipticProblem(g1, manufactured(g1, t1, 1.0))
    with pytest.raises(ValueError):
        stability_gap(t1, t2, p1)


# ------------------------------------------------------ parabolic fixed point

def test_solution_is_flow_fixed_point(gs):
    target = _field(gs.grid, 15, 0.2)
    F = manufactured(gs, target, 1.0)
    rep = solve_elliptic(EllipticProblem(gs, F), np.zeros((1, 1)))
    traj = run_flow(rep.phi, gs, F, 0.05, DtPolicy(snapshot_every=0.01))
    assert max(_sup(s.phi - rep.phi) for s in traj.snapshots) < 1e-8
