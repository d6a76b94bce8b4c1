"""Quantities controlled by the a priori estimates, monitored along a flow.

All functions are pure functions of their inputs; nothing here feeds back
into the integration.  Where the analysis only asserts that some constant
exists, the checks below fit an empirical constant and report a margin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Mapping

import numpy as np

from .errors import PreconditionError
from .flow import Trajectory, log_det_ratio, metric_from_potential
from .forcing import ForcingSpec
from .geometry import (
    HermitianMetricField, TensorField, chern_curvature, chern_ricci, christoffel, covariant_derivative,
    raise_last,
    tensor_norm, tensor_norm_sq, trace_pair,
)
from .grid import TorusGrid, ddbar, grad_holo

RHO_FLOOR = 1e-300


def gradient_energy(phi: np.ndarray, ghat: HermitianMetricField) -> np.ndarray:
    """rho = ghat^{i jbar} phi_i phi_jbar for real phi."""
    d = grad_holo(ghat.grid, phi)
    return np.einsum("...ij,...i,...j->...", ghat.inv, d, np.conj(d)).real


def trace_quantity(g: HermitianMetricField, ghat: HermitianMetricField) -> np.ndarray:
    return trace_pair(g, ghat)[0]


def trace_via_laplacian(phi: np.ndarray, ghat: HermitianMetricField) -> np.ndarray:
    """n + ghat^{i jbar} phi_{i jbar}, the second route to tr_ghat g."""
    lap = np.einsum("...ij,...ij->...", ghat.inv, ddbar(ghat.grid, phi)).real
    return ghat.n + lap


def phi_tensor(g: HermitianMetricField, ghat: HermitianMetricField) -> TensorField:
    """Phi_{ij}^k = Gamma_{ij}^k - Gammahat_{ij}^k."""
    return TensorField(g.grid, "LLU", christoffel(g).values - christoffel(ghat).values)


def third_order_S(g: HermitianMetricField, ghat: HermitianMetricField) -> np.ndarray:
    return tensor_norm_sq(phi_tensor(g, ghat), g)


def third_order_S_hessian_route(phi: np.ndarray, g: HermitianMetricField,
                                ghat: HermitianMetricField) -> np.ndarray:
    """g^{i pbar} g^{q jbar} g^{k rbar} phi_{i jbar k} conj(phi_{p qbar r}),
    with phi_{i jbar k} the ghat-covariant derivative of phi_{i jbar}."""
    hess = TensorField(ghat.grid, "LB", ddbar(ghat.grid, phi))
    d = covariant_derivative(hess, ghat, "holo").values   # [k, i, j]
    return np.einsum("...kij,...rpq,...ip,...qj,...kr->...", d, np.conj(d),
                     g.inv, g.inv, g.inv, optimize=True).real


def ricci_norm(g: HermitianMetricField) -> np.ndarray:
    return tensor_norm(chern_ricci(g), g)


def curvature_difference_residual(g: HermitianMetricField, ghat: HermitianMetricField) -> np.ndarray:
    """nabla_qbar Phi_{ij}^k + R_{i qbar j}^k - Rhat_{i qbar j}^k, layout [i, q, j, k]."""
    D = covariant_derivative(phi_tensor(g, ghat), g, "anti").values      # [q, i, j, k]
    R = raise_last(chern_curvature(g), g).values
    Rh = raise_last(chern_curvature(ghat), ghat).values
    return np.swapaxes(D, -4, -3) + R - Rh


def ricci_difference_residual(g: HermitianMetricField, ghat: HermitianMetricField,
                              sign: float = -1.0) -> np.ndarray:
    """R_{i jbar} - Rhat_{i jbar} - sign * nabla_jbar Phi_{ik}^k.

    Tracing the curvature difference identity over (j, k) fixes sign = -1;
    ``sign=+1`` is kept so the opposite convention can be evaluated.
    """
    D = covariant_derivative(phi_tensor(g, ghat), g, "anti").values
    tr = np.einsum("...qikk->...iq", D)
    return chern_ricci(g).values - chern_ricci(ghat).values - sign * tr


# ----------------------------------------------------------------- series

@dataclass
class EstimateRow:
    t: float
    sup_phi: float
    sup_phidot: float
    sup_rho: float
    trace_max: float
    S_max: float
    ric_max: float
    dt: float
    rejects: int
    argmax: dict = field(default_factory=dict)

    CSV_COLUMNS = ("t", "sup_phi", "sup_phidot", "sup_rho", "trace_max", "S_max", "ric_max", "dt", "rejects")

    def csv_values(self) -> list:
        return [getattr(self, c) for c in self.CSV_COLUMNS]


def _argmax(grid: TorusGrid, f: np.ndarray) -> tuple[float, tuple]:
    i = int(np.argmax(f))
    idx = np.unravel_index(i, f.shape)
    return float(f.flat[i]), tuple(int(v) for v in idx[: grid.ndim])


def estimate_row(t, phi, phidot, ghat, dt=0.0, rejects=0) -> EstimateRow:
    grid = ghat.grid
    g = metric_from_potential(ghat, phi)
    rho, prho = _argmax(grid, gradient_energy(phi, ghat))
    tr, ptr = _argmax(grid, trace_quantity(g, ghat))
    S, pS = _argmax(grid, third_order_S(g, ghat))
    ric, pric = _argmax(grid, ricci_norm(g))
    return EstimateRow(
        float(t), float(np.max(np.abs(phi))), float(np.max(np.abs(phidot))),
        rho, tr, S, ric, float(dt), int(rejects),
        {"rho": prho, "trace": ptr, "S": pS, "ric": pric},
    )


def estimate_series(traj: Trajectory) -> list[EstimateRow]:
    return [estimate_row(s.t, s.phi, s.phidot, traj.ghat, s.dt, s.rejects) for s in traj.snapshots]


# ---------------------------------------------------------------- barriers

def gamma_barrier(x: np.ndarray, A: float) -> np.ndarray:
    return A * x - x * x / A


def barrier_gradient(traj: Trajectory, A: float) -> list[tuple[float, float | None, tuple | None]]:
    """max over the grid of t log rho - gamma(phi) at each snapshot.

    Points with rho below 1e-300 are masked; a fully masked snapshot is
    reported with ``None`` (degenerate).
    """
    out = []
    for s in traj.snapshots:
        rho = gradient_energy(s.phi, traj.ghat)
        mask = rho >= RHO_FLOOR
        if not np.any(mask):
            out.append((s.t, None, None))
            continue
        with np.errstate(divide="ignore"):
            H = s.t * np.log(np.where(mask, rho, 1.0)) - gamma_barrier(s.phi, A)
        H = np.where(np.broadcast_to(mask, H.shape), H, -np.inf)
        val, p = _argmax(traj.grid, H)
        out.append((s.t, val, p))
    return out


def barrier_trace(traj: Trajectory, A: float, alpha: float) -> list[tuple[float, float, tuple]]:
    """max over the grid of exp(-alpha/t) log tr_ghat g + exp(Psi),
    Psi = A (sup_{[0,T] x M} phi - phi)."""
    sup_phi = max(float(np.max(s.phi)) for s in traj.snapshots)
    out = []
    for s in traj.snapshots:
        g = metric_from_potential(traj.ghat, s.phi)
        tr = trace_quantity(g, traj.ghat)
        w = math.exp(-alpha / s.t) if s.t > 0 else 0.0
        H = w * np.log(tr) + np.exp(A * (sup_phi - s.phi))
        val, p = _argmax(traj.grid, np.broadcast_to(H, np.broadcast(H, s.phi).shape))
        out.append((s.t, val, p))
    return out


# ---------------------------------------------------------------- verdicts

@dataclass
class BoundVerdict:
    name: str
    constants: dict
    margin: float
    passed: bool
    t_critical: float | None
    details: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


def _verdict(name, constants, margins, times, details=None) -> BoundVerdict:
    margins = np.asarray(margins, dtype=float)
    if margins.size == 0:
        return BoundVerdict(name, constants, math.inf, True, None, details or [])
    k = int(np.argmin(margins))
    m = float(margins[k])
    return BoundVerdict(name, constants, m, m >= 0, float(times[k]), details or [])


def check_lemma31(traj: Trajectory, F: ForcingSpec | None = None, delta: float = 0.05,
                  slack: float | None = None) -> BoundVerdict:
    """Exponential envelope for sup|phidot| with an empirically fitted rate.

    C = (1 + delta) * sup|F'| over the realised potentials.  The returned
    verdict covers sup|phidot(t)| <= sup|phidot(0)| e^{Ct}; its ``details``
    hold the companion checks on sup|phi| and on the log-det ratio, and
    ``passed`` requires all three.
    """
    F = F or traj.forcing
    grid = traj.grid
    snaps = traj.snapshots
    if not snaps:
        raise ValueError("empty trajectory")
    fmax = max(float(np.max(np.abs(F.dphi(s.phi, grid)))) for s in snaps)
    C = (1.0 + delta) * fmax
    pd0 = float(np.max(np.abs(snaps[0].phidot)))
    p0 = float(np.max(np.abs(snaps[0].phi)))
    if slack is None:
        slack = 1e-8 * (1.0 + pd0)
    ts = np.array([s.t for s in snaps])
    env = pd0 * np.exp(C * ts)
    m_env = env + slack - np.array([np.max(np.abs(s.phidot)) for s in snaps])
    # |phi(t)| <= sup|phi0| + integral of the envelope
    integ = pd0 * ts if C == 0 else pd0 * np.expm1(C * ts) / C
    m_phi = p0 + integ + slack - np.array([np.max(np.abs(s.phi)) for s in snaps])
    m_ld = []
    for s in snaps:
        g = metric_from_potential(traj.ghat, s.phi)
        ld = float(np.max(np.abs(log_det_ratio(g, traj.ghat))))
        m_ld.append(float(np.max(np.abs(s.phidot))) + float(np.max(np.abs(F(s.phi, grid)))) + slack - ld)
    consts = {"C": C, "delta": delta, "slack": slack, "sup_phidot0": pd0, "empirical": True}
    sub = [_verdict("phi_bound", consts, m_phi, ts), _verdict("logdet_bound", consts, m_ld, ts)]
    main = _verdict("phidot_envelope", consts, m_env, ts, [v.to_dict() for v in sub])
    main.passed = main.passed and all(v.passed for v in sub)
    return main


SMOOTHING_QUANTITIES = ("sup_rho", "trace_max", "S_max", "ric_max")


def check_smoothing_bounds(family: Mapping[int, Trajectory], t_eps: float, ratio_limit: float = 10.0,
                           data_bound: float = 1.0) -> BoundVerdict:
    """Uniform-in-j control of the monitored quantities at t = t_eps.

    Precondition: every member has sup|phi(0)| and sup|phidot(0)| below
    ``data_bound``; otherwise PreconditionError and no verdict.
    """
    if not family:
        raise PreconditionError("empty family")
    rows = {}
    for j, traj in sorted(family.items()):
        s0 = traj.snapshots[0]
        data = max(float(np.max(np.abs(s0.phi))), float(np.max(np.abs(s0.phidot))))
        if data > data_bound:
            raise PreconditionError(f"level {j}: initial data size {data:.3g} exceeds bound {data_bound:g}")
        try:
            s = traj.at(t_eps)
        except KeyError as exc:
            raise PreconditionError(f"level {j} has no snapshot at t={t_eps}") from exc
        rows[j] = estimate_row(s.t, s.phi, s.phidot, traj.ghat)
    ratios = {}
    for q in SMOOTHING_QUANTITIES:
        vals = np.array([getattr(r, q) for r in rows.values()])
        if not np.all(np.isfinite(vals)):
            ratios[q] = math.inf
            continue
        hi, lo = float(vals.max()), float(vals.min())
        ratios[q] = 1.0 if hi <= 1e-300 else (math.inf if lo <= 0 else hi / lo)
    margin = ratio_limit - max(ratios.values())
    consts = {"ratio_limit": ratio_limit, "t_eps": t_eps, "ratios": ratios,
              "values": {str(j): {q: getattr(r, q) for q in SMOOTHING_QUANTITIES} for j, r in rows.items()}}
    return BoundVerdict("smoothing.uniform_bounds", consts, margin, margin > 0, t_eps)
