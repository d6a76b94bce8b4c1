"""Parabolic complex Monge-Ampère flow

    d phi / dt = log det(ghat + i ddbar phi) / det ghat + F(phi, z)

integrated with classical RK4 under an h^2 step restriction.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFinite, NotAdmissible, Stalled, StepRejected
from .forcing import ForcingSpec
from .geometry import HermitianMetricField
from .grid import TorusGrid, ddbar

log = logging.getLogger(__name__)


def metric_from_potential(ghat: HermitianMetricField, phi: np.ndarray) -> HermitianMetricField:
    """g = ghat + i ddbar phi; raises NotAdmissible (with point and eigenvalue)."""
    grid = ghat.grid
    return HermitianMetricField(grid, ghat.values + ddbar(grid, phi), error=NotAdmissible)


def log_det_ratio(g: HermitianMetricField, ghat: HermitianMetricField) -> np.ndarray:
    return g.logdet - ghat.logdet


def flow_rhs(phi: np.ndarray, ghat: HermitianMetricField, F: ForcingSpec,
             g: HermitianMetricField | None = None) -> np.ndarray:
    if g is None:
        g = metric_from_potential(ghat, phi)
    return log_det_ratio(g, ghat) + F(phi, ghat.grid)


def g_laplacian(g: HermitianMetricField, f: np.ndarray) -> np.ndarray:
    """g^{p qbar} d_p d_qbar f (the Chern Laplacian on functions)."""
    return np.einsum("...pq,...pq->...", g.inv, ddbar(g.grid, f))


@dataclass
class FlowState:
    t: float
    phi: np.ndarray
    g: HermitianMetricField
    phidot: np.ndarray


def make_state(t: float, phi: np.ndarray, ghat: HermitianMetricField, F: ForcingSpec) -> FlowState:
    phi = np.asarray(phi, dtype=float)
    g = metric_from_potential(ghat, phi)
    return FlowState(t, phi, g, np.asarray(flow_rhs(phi, ghat, F, g), dtype=float))


def _stage(phi, ghat, F):
    try:
        g = metric_from_potential(ghat, phi)
    except NotAdmissible as exc:
        raise StepRejected(str(exc)) from exc
    return np.asarray(flow_rhs(phi, ghat, F, g), dtype=float)


def step(state: FlowState, dt: float, ghat: HermitianMetricField, F: ForcingSpec,
         method: str = "rk4") -> FlowState:
    if dt <= 0:
        raise ValueError("dt must be positive")
    if method != "rk4":
        raise ValueError(f"unknown method {method!r}")
    phi = state.phi
    k1 = state.phidot
    k2 = _stage(phi + 0.5 * dt * k1, ghat, F)
    k3 = _stage(phi + 0.5 * dt * k2, ghat, F)
    k4 = _stage(phi + dt * k3, ghat, F)
    new = phi + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(new)):
        raise NonFinite(f"non-finite potential at t={state.t + dt:g}")
    try:
        g = metric_from_potential(ghat, new)
    except NotAdmissible as exc:
        raise StepRejected(str(exc)) from exc
    phidot = np.asarray(flow_rhs(new, ghat, F, g), dtype=float)
    if not np.all(np.isfinite(phidot)):
        raise NonFinite(f"non-finite phidot at t={state.t + dt:g}")
    return FlowState(state.t + dt, new, g, phidot)


@dataclass
class DtPolicy:
    """Step control: dt = factor * cfl * h^2 / (n * max eig g^{-1}).

    ``factor`` halves on a rejected step and doubles (up to 1) after
    ``grow_after`` consecutive accepted steps.  Snapshots are taken every
    ``snapshot_every`` time units and steps are clipped to land on them.
    """

    cfl: float = 0.4
    snapshot_every: float = 0.01
    dt_max: float | None = None
    grow_after: int = 50
    dt_min: float = 1e-12

    def cfl_dt(self, grid: TorusGrid, g: HermitianMetricField) -> float:
        h = min(grid.spacing)
        lam = float(np.max(1.0 / g.min_eig))
        dt = self.cfl * h * h / (grid.n * lam)
        return min(dt, self.dt_max) if self.dt_max else dt


@dataclass
class Snapshot:
    t: float
    phi: np.ndarray
    phidot: np.ndarray
    dt: float
    rejects: int


@dataclass
class Trajectory:
    snapshots: list[Snapshot]
    ghat: HermitianMetricField
    forcing: ForcingSpec
    policy: DtPolicy
    config: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.snapshots])

    @property
    def grid(self) -> TorusGrid:
        return self.ghat.grid

    def at(self, t: float, tol: float = 1e-12) -> Snapshot:
        for s in self.snapshots:
            if abs(s.t - t) <= tol * max(1.0, abs(t)):
                return s
        raise KeyError(f"no snapshot at t={t}")


def snapshot_times(t_end: float, every: float) -> np.ndarray:
    k = int(np.floor(t_end / every + 1e-9))
    ts = [i * every for i in range(k + 1)]
    if t_end - ts[-1] > 1e-12 * max(1.0, t_end):
        ts.append(t_end)
    return np.array(ts)


def run_flow(phi0: np.ndarray, ghat: HermitianMetricField, F: ForcingSpec, t_end: float,
             policy: DtPolicy | None = None, config: dict | None = None) -> Trajectory:
    policy = policy or DtPolicy()
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    grid = ghat.grid
    state = make_state(0.0, phi0, ghat, F)
    snaps = [Snapshot(0.0, state.phi.copy(), state.phidot.copy(), 0.0, 0)]
    targets = snapshot_times(t_end, policy.snapshot_every)[1:] if t_end > 0 else []
    factor = 1.0
    accepted_run = 0
    rejects = 0
    dt = 0.0
    for target in targets:
        while state.t < target:
            dt = min(factor * policy.cfl_dt(grid, state.g), target - state.t)
            if dt < policy.dt_min:
                raise Stalled(f"dt={dt:.3e} below minimum at t={state.t:g}")
            landing = target - state.t - dt <= 1e-12 * max(1.0, target)
            try:
                new = step(state, dt, ghat, F)
            except StepRejected as exc:
                factor *= 0.5
                rejects += 1
                accepted_run = 0
                log.debug("rejected step at t=%g: %s", state.t, exc)
                continue
            if landing:
                new.t = float(target)
            state = new
            accepted_run += 1
            if accepted_run >= policy.grow_after and factor < 1.0:
                factor = min(1.0, 2 * factor)
                accepted_run = 0
        snaps.append(Snapshot(float(target), state.phi.copy(), state.phidot.copy(), dt, rejects))
    return Trajectory(snaps, ghat, F, policy, dict(config or {}))


def linearized_residual(traj: Trajectory) -> np.ndarray:
    """Sup-norm defect of d(phidot)/dt = Laplacian_g phidot + F' phidot at
    interior snapshots, using centered differences in time."""
    snaps = traj.snapshots
    if len(snaps) < 3:
        raise ValueError("need at least 3 snapshots")
    ts = traj.times
    dts = np.diff(ts)
    if np.max(np.abs(dts - dts[0])) > 1e-9 * dts[0]:
        raise ValueError("snapshots must be uniformly spaced")
    grid = traj.grid
    out = []
    for k in range(1, len(snaps) - 1):
        s = snaps[k]
        g = metric_from_potential(traj.ghat, s.phi)
        lhs = (snaps[k + 1].phidot - snaps[k - 1].phidot) / (ts[k + 1] - ts[k - 1])
        rhs = g_laplacian(g, s.phidot).real + traj.forcing.dphi(s.phi, grid) * s.phidot
        out.append(float(np.max(np.abs(lhs - rhs))))
    return np.array(out)
