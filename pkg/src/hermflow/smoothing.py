"""Mollification ladder for a kinked stationary solution.

A Lipschitz-like potential phi (a soft maximum of smooth functions, kinked at
the grid scale) is made an exact discrete solution by manufacturing its
forcing.  Each level j mollifies phi, solves the stationary problem with the
mollified data, normalises the solution against phi and runs the parabolic
flow from it.  The checks below test that the resulting family is Cauchy and
that its limit is stationary and equal to phi.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .elliptic import EllipticProblem, c_constant, normalize_pair, solve_elliptic
from .errors import InadmissibleConstruction, NotAdmissible, SingularMetric
from .estimates import BoundVerdict
from .flow import DtPolicy, Trajectory, log_det_ratio, metric_from_potential, run_flow
from .forcing import ForcingSpec, frozen_forcing, linear_forcing
from .geometry import HermitianMetricField
from .grid import TorusGrid, mollify

log = logging.getLogger(__name__)

ADMISSIBILITY_MARGIN = 0.05


@dataclass(frozen=True)
class KinkSpec:
    """phi(x) = tau * log sum_m exp(f_m(x) / tau), f_m = a_m cos(k_m x - p_m).

    ``x`` is the real coordinate on ``axis``; ``tau = tau_factor * h``.
    """

    amplitudes: tuple[float, ...] = (0.3, 0.3)
    phases: tuple[float, ...] = (0.0, math.pi / 2)
    wavenumbers: tuple[int, ...] = (1, 1)
    tau_factor: float = 2.0
    axis: int = 0
    lam: float = 1.0

    def __post_init__(self):
        if not (len(self.amplitudes) == len(self.phases) == len(self.wavenumbers)) or not self.amplitudes:
            raise ValueError("amplitudes, phases and wavenumbers must be nonempty and of equal length")
        if self.tau_factor <= 0 or self.lam < 0:
            raise ValueError("tau_factor must be positive and lam nonnegative")


def kinked_potential(grid: TorusGrid, spec: KinkSpec) -> np.ndarray:
    x = grid.coords()[spec.axis]
    tau = spec.tau_factor * grid.spacing[spec.axis]
    fs = np.stack([a * np.cos(k * x - p) for a, p, k in zip(spec.amplitudes, spec.phases, spec.wavenumbers)])
    if len(spec.amplitudes) == 1:
        return fs[0]
    return tau * logsumexp(fs / tau, axis=0)


def manufactured_forcing(grid: TorusGrid, ghat: HermitianMetricField, phi: np.ndarray,
                         lam: float) -> ForcingSpec:
    """F(u, z) = lam (u - phi(z)) - log det(ghat + i ddbar phi)/det ghat (z)."""
    L = log_det_ratio(metric_from_potential(ghat, phi), ghat)
    F = linear_forcing(lam, lam * phi + L)
    return ForcingSpec(F.value, F.dphi, F.dphi2, F.grad_z, F.grad_z_dphi, F.hess_z, f"manufactured({lam:g})")


def build_nonsmooth_solution(grid: TorusGrid, ghat: HermitianMetricField, spec: KinkSpec,
                             margin: float = ADMISSIBILITY_MARGIN) -> tuple[np.ndarray, ForcingSpec]:
    phi = kinked_potential(grid, spec)
    try:
        g = metric_from_potential(ghat, phi)
        worst = float(np.min(g.min_eig))
    except SingularMetric as exc:
        raise InadmissibleConstruction(f"kinked potential is not admissible: {exc}", margin=-math.inf) from exc
    if worst <= margin:
        raise InadmissibleConstruction(
            f"min eigenvalue {worst:.4g} of ghat + i ddbar phi does not exceed margin {margin}", margin=worst)
    return phi, manufactured_forcing(grid, ghat, phi, spec.lam)


@dataclass
class SmoothingExperiment:
    grid: TorusGrid
    ghat: HermitianMetricField
    kink: KinkSpec = field(default_factory=KinkSpec)
    levels: tuple[int, ...] = (8, 16, 32, 64)
    t_end: float = 0.1
    policy: DtPolicy = field(default_factory=lambda: DtPolicy(snapshot_every=0.01))
    solve_tol: float = 1e-10
    c_factor: float = 1.0   # multiplies c_j inside the flow only; 1.0 is the faithful pipeline

    def __post_init__(self):
        if not self.levels or any(j < 1 for j in self.levels):
            raise ValueError("levels must be positive integers")
        if list(self.levels) != sorted(set(self.levels)):
            raise ValueError("levels must be strictly increasing")
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")


@dataclass
class LevelResult:
    j: int
    ok: bool
    error: str | None = None
    mollify_error: float = math.nan
    admissibility: float = math.nan
    c: float = math.nan
    psi_error: float = math.nan
    phidot0_sup: float = math.nan
    phidot0_predicted_sup: float = math.nan
    phidot0_identity_residual: float = math.nan
    newton_iterations: int = 0
    psi: np.ndarray | None = None
    trajectory: Trajectory | None = None

    def summary(self) -> dict:
        keys = ("j", "ok", "error", "mollify_error", "admissibility", "c", "psi_error", "phidot0_sup",
                "phidot0_predicted_sup", "phidot0_identity_residual", "newton_iterations")
        d = {k: getattr(self, k) for k in keys}
        if self.trajectory is not None:
            d["snapshots"] = len(self.trajectory.snapshots)
            d["rejects"] = self.trajectory.snapshots[-1].rejects
        return d


@dataclass
class SmoothingReport:
    experiment: SmoothingExperiment
    phi: np.ndarray
    forcing: ForcingSpec
    base_residual: float
    levels: list[LevelResult]
    times: np.ndarray
    pairwise: dict[tuple[int, int], np.ndarray]
    limit_error: np.ndarray

    def successful(self) -> list[LevelResult]:
        return [lv for lv in self.levels if lv.ok]

    def level(self, j: int) -> LevelResult:
        for lv in self.levels:
            if lv.j == j:
                return lv
        raise KeyError(j)

    def family(self) -> dict[int, Trajectory]:
        return {lv.j: lv.trajectory for lv in self.successful()}

    def to_dict(self) -> dict:
        return {
            "base_residual": self.base_residual,
            "levels": [lv.summary() for lv in self.levels],
            "times": [float(t) for t in self.times],
            "pairwise": {f"{a},{b}": [float(v) for v in d] for (a, b), d in self.pairwise.items()},
            "limit_error": [float(v) for v in self.limit_error],
        }


def _sup(x) -> float:
    return float(np.max(np.abs(x)))


def _run_level(exp: SmoothingExperiment, phi: np.ndarray, F: ForcingSpec, j: int) -> LevelResult:
    grid, ghat = exp.grid, exp.ghat
    res = LevelResult(j, ok=False)
    phi_j = mollify(grid, phi, j)
    res.mollify_error = _sup(phi_j - phi)
    try:
        res.admissibility = float(np.min(metric_from_potential(ghat, phi_j).min_eig))
    except NotAdmissible as exc:
        res.error = f"mollified data not admissible: {exc}"
        return res
    c = c_constant(phi_j, ghat, F)
    res.c = c
    # psi_j: log det(ghat + i ddbar psi)/det ghat + F(phi_j, z) - log c_j = 0
    problem = EllipticProblem(ghat, frozen_forcing(F, phi_j, grid, shift=math.log(c)), "mean-zero")
    try:
        sol = solve_elliptic(problem, np.zeros_like(phi), tol=exp.solve_tol, c=c)
    except (NotAdmissible, ArithmeticError, RuntimeError) as exc:
        res.error = f"stationary solve failed: {exc}"
        return res
    psi = normalize_pair(sol.phi, phi)
    res.psi, res.newton_iterations = psi, sol.iterations
    res.psi_error = _sup(psi - phi)
    predicted = F(psi, grid) - F(phi_j, grid)
    res.phidot0_predicted_sup = _sup(predicted)
    flow_forcing = F.shifted(math.log(c * exp.c_factor))
    try:
        traj = run_flow(psi, ghat, flow_forcing, exp.t_end, exp.policy, {"level": j})
    except (NotAdmissible, ArithmeticError, RuntimeError) as exc:
        res.error = f"flow failed: {exc}"
        return res
    res.trajectory = traj
    phidot0 = traj.snapshots[0].phidot
    res.phidot0_sup = _sup(phidot0)
    res.phidot0_identity_residual = _sup(phidot0 - predicted)
    res.ok = True
    return res


def run_pipeline(exp: SmoothingExperiment) -> SmoothingReport:
    phi, F = build_nonsmooth_solution(exp.grid, exp.ghat, exp.kink)
    base_residual = _sup(log_det_ratio(metric_from_potential(exp.ghat, phi), exp.ghat) + F(phi, exp.grid))
    levels = []
    for j in exp.levels:
        lv = _run_level(exp, phi, F, j)
        if not lv.ok:
            log.warning("level %d failed: %s", j, lv.error)
        levels.append(lv)
    ok = [lv for lv in levels if lv.ok]
    times = ok[0].trajectory.times if ok else np.array([])
    pairwise = {}
    for a in range(len(ok)):
        for b in range(a + 1, len(ok)):
            A, B = ok[a].trajectory, ok[b].trajectory
            pairwise[(ok[a].j, ok[b].j)] = np.array(
                [_sup(A.at(t).phi - B.at(t).phi) for t in times])
    limit = np.array([_sup(ok[-1].trajectory.at(t).phi - phi) for t in times]) if ok else np.array([])
    return SmoothingReport(exp, phi, F, base_residual, levels, times, pairwise, limit)


def cauchy_check(report: SmoothingReport, t: float, factor: float = 1.5) -> BoundVerdict:
    """d(j, 2j) = sup|phi_j(t) - phi_2j(t)| must shrink by ``factor`` per doubling.

    Successive pairs are taken over consecutive successful levels.
    """
    ok = report.successful()
    if len(ok) < 3:
        raise ValueError(f"need at least 3 successful levels, have {len(ok)}")
    k = int(np.argmin(np.abs(report.times - t)))
    if abs(report.times[k] - t) > 1e-12 * max(1.0, t):
        raise ValueError(f"no shared snapshot at t={t}")
    js = [lv.j for lv in ok]
    d = [float(report.pairwise[(js[i], js[i + 1])][k]) for i in range(len(js) - 1)]
    margins = []
    for a, b in zip(d, d[1:]):
        margins.append(a - factor * b if a > 0 else (0.0 if b == 0 else -b))
    margin = min(margins)
    consts = {"factor": factor, "distances": {f"{js[i]},{js[i + 1]}": d[i] for i in range(len(d))},
              "ratios": [a / b if b > 0 else math.inf for a, b in zip(d, d[1:])]}
    return BoundVerdict("cauchy", consts, margin, margin >= 0, float(report.times[k]))


def recovery_check(report: SmoothingReport, t: float | None = None, delta: float = 0.05,
                   slack: float = 1e-6) -> BoundVerdict:
    """Stationarity and recovery of phi at the finest successful level.

    (a) sup|phidot(t)| <= 3 sup|F(psi) - F(phi_j)| + slack, the right side
        being the initial speed predicted by the stationary problem;
    (b) sup|phi(t) - phi| <= sup|psi - phi| exp(C t) + slack with
        C = (1 + delta) sup|F'|.
    """
    exp = report.experiment
    ok = report.successful()
    finest = exp.levels[-1]
    if not ok or ok[-1].j != finest:
        raise ValueError(f"finest level {finest} did not finish")
    lv = ok[-1]
    t = exp.t_end / 2 if t is None else t
    s = lv.trajectory.at(t)
    grid = exp.grid
    C = (1 + delta) * max(_sup(report.forcing.dphi(x.phi, grid)) for x in lv.trajectory.snapshots)
    lhs_a = _sup(s.phidot)
    rhs_a = 3 * lv.phidot0_predicted_sup + slack
    lhs_b = _sup(s.phi - report.phi)
    rhs_b = lv.psi_error * math.exp(C * t) + slack
    ma, mb = rhs_a - lhs_a, rhs_b - lhs_b
    consts = {"C_fit": C, "delta": delta, "slack": slack, "level": lv.j,
              "stationarity": {"lhs": lhs_a, "rhs": rhs_a, "margin": ma},
              "recovery": {"lhs": lhs_b, "rhs": rhs_b, "margin": mb}}
    details = [
        BoundVerdict("recovery.stationarity", consts["stationarity"], ma, ma >= 0, t).to_dict(),
        BoundVerdict("recovery.limit", consts["recovery"], mb, mb >= 0, t).to_dict(),
    ]
    margin = min(ma, mb)
    return BoundVerdict("recovery", consts, margin, margin >= 0, t, details)
