"""Stationary complex Monge-Ampère equation

    log det(ghat + i ddbar phi) / det ghat + F(phi, z) = 0

solved by damped Newton with a spectrally preconditioned GMRES inner solve,
together with the volume identity and the normalisation and stability
helpers used by the smoothing pipeline.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import NoConvergence, NotAdmissible
from .flow import g_laplacian, log_det_ratio, metric_from_potential
from .forcing import ForcingSpec
from .geometry import HermitianMetricField
from .grid import _fft, _ifft, _kgrid, ddbar, integrate

log = logging.getLogger(__name__)

NORMALIZATIONS = ("none", "symmetric-sup", "mean-zero")
ETA = 1e-6
PRECOND_FLOOR = 0.25


@dataclass
class EllipticProblem:
    """``reference`` is the potential the symmetric-sup normalisation is taken against."""

    ghat: HermitianMetricField
    F: ForcingSpec
    normalization: str = "none"
    reference: np.ndarray | None = None

    def __post_init__(self):
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
        if self.normalization == "symmetric-sup" and self.reference is None:
            raise ValueError("symmetric-sup normalization needs a reference potential")

    @property
    def grid(self):
        return self.ghat.grid


@dataclass
class SolveReport:
    phi: np.ndarray
    residual: float
    iterations: int
    c: float | None
    margin: float
    history: list[float] = field(default_factory=list)
    gauge_multiplier: float = 0.0

    def to_dict(self) -> dict:
        return {
            "residual": self.residual, "iterations": self.iterations, "c": self.c,
            "admissibility_margin": self.margin, "history": list(self.history),
            "gauge_multiplier": self.gauge_multiplier,
        }


def ma_residual(phi: np.ndarray, problem: EllipticProblem) -> np.ndarray:
    g = metric_from_potential(problem.ghat, phi)
    return log_det_ratio(g, problem.ghat) + problem.F(phi, problem.grid)


def _sup(x) -> float:
    return float(np.max(np.abs(x)))


def _work_shape(problem: EllipticProblem, phi: np.ndarray) -> tuple[int, ...]:
    grid = problem.grid
    F0 = problem.F(phi, grid)
    return np.broadcast(np.asarray(phi), problem.ghat.det, np.asarray(F0)).shape


class _Linearization:
    """J v = g^{i jbar} v_{i jbar} + F'(phi) v, optionally bordered by the
    constant mode: [P J P 1; mean 0] (v, mu), P removing Nyquist modes."""

    def __init__(self, problem: EllipticProblem, phi: np.ndarray, g: HermitianMetricField,
                 shape: tuple[int, ...], bordered: bool):
        grid = problem.grid
        self.grid, self.g, self.shape, self.bordered = grid, g, shape, bordered
        self.size = int(np.prod(shape))
        self.fp = np.broadcast_to(np.asarray(problem.F.dphi(phi, grid), dtype=float), shape)
        mu = max(float(np.mean(self.fp)), ETA)
        # Flat-coefficient model of J with symbol mu - gbar |k|^2 / 4, kept at
        # least PRECOND_FLOOR * (mu + gbar |k|^2 / 4) away from zero.  Wavenumbers
        # match the discrete ddbar, which annihilates Nyquist modes; with no
        # zeroth-order term those modes are dropped altogether.
        gbar = float(np.mean(np.einsum("...ii->...", g.inv).real)) / grid.n
        k = _kgrid(grid, shape, zero_nyquist=True)
        lap = gbar * sum(kk * kk for kk in k) / 4.0
        sym = mu - lap
        floor = PRECOND_FLOOR * (mu + lap)
        self.symbol = np.where(np.abs(sym) < floor, np.where(sym < 0, -floor, floor), sym)
        self.keep = np.ones(np.broadcast(*k).shape, dtype=bool)
        if bordered:
            for a, kk in enumerate(_kgrid(grid, shape, zero_nyquist=False)):
                m = shape[a]
                if m > 1:
                    self.keep &= ~np.isclose(np.abs(kk), np.pi * m / grid.periods[a])

    def apply(self, v: np.ndarray) -> np.ndarray:
        x = self.project(v[: self.size].reshape(self.shape))
        out = g_laplacian(self.g, x).real + self.fp * x
        if not self.bordered:
            return out.ravel()
        out = self.project(out) + v[self.size]
        return np.concatenate([out.ravel(), [np.mean(x)]])

    def precondition(self, v: np.ndarray) -> np.ndarray:
        x = v[: self.size].reshape(self.shape)
        if not self.bordered:
            return _ifft(self.grid, _fft(self.grid, x) / self.symbol).real.ravel()
        # the bordered block swaps roles on the constant mode: the mean of the
        # first block feeds mu, the last row fixes the mean of the direction
        xm = float(np.mean(x))
        y = _ifft(self.grid, np.where(self.keep, _fft(self.grid, x - xm) / self.symbol, 0.0)).real
        y = y - float(np.mean(y)) + v[self.size]
        return np.concatenate([y.ravel(), [xm]])

    def project(self, x: np.ndarray) -> np.ndarray:
        if np.all(self.keep):
            return x
        return _ifft(self.grid, np.where(self.keep, _fft(self.grid, x), 0.0)).real

    def operators(self):
        m = self.size + (1 if self.bordered else 0)
        return (LinearOperator((m, m), matvec=self.apply, dtype=float),
                LinearOperator((m, m), matvec=self.precondition, dtype=float))


def _newton_direction(lin: _Linearization, r: np.ndarray, atol: float = 1e-13) -> tuple[np.ndarray, float]:
    A, M = lin.operators()
    b = -lin.project(np.broadcast_to(r, lin.shape)).ravel()
    if lin.bordered:
        b = np.concatenate([b, [0.0]])
    sol, info = gmres(A, b, M=M, rtol=1e-11, atol=atol, restart=80, maxiter=20)
    if info < 0:
        raise NoConvergence(f"inner GMRES breakdown (info={info})")
    if info > 0:
        log.debug("inner GMRES stopped at maxiter; using best iterate")
    mu = float(sol[lin.size]) if lin.bordered else 0.0
    return sol[: lin.size].reshape(lin.shape), mu


def solve_elliptic(problem: EllipticProblem, phi_init: np.ndarray, tol: float = 1e-10,
                   max_iter: int = 200, c: float | None = None) -> SolveReport:
    """Damped Newton on ma_residual(phi) = 0.

    When F' vanishes identically the constant mode is removed by a mean-zero
    gauge inside the linear solve.  ``c`` is only carried into the report.
    """
    grid = problem.grid
    phi = np.asarray(phi_init, dtype=float)
    shape = _work_shape(problem, phi)
    phi = np.broadcast_to(phi, shape).copy()
    g = metric_from_potential(problem.ghat, phi)
    r = log_det_ratio(g, problem.ghat) + problem.F(phi, grid)
    rn = _sup(r)
    history = [rn]
    mu = 0.0
    it = 0
    while rn >= tol:
        if it >= max_iter:
            raise NoConvergence(f"Newton stalled at residual {rn:.3e} after {it} iterations")
        fp = np.asarray(problem.F.dphi(phi, grid), dtype=float)
        bordered = problem.normalization == "mean-zero" or not np.any(fp)
        lin = _Linearization(problem, phi, g, shape, bordered)
        delta, mu = _newton_direction(lin, r, atol=1e-3 * tol)
        alpha = 1.0
        admissible_seen = False
        while True:
            trial = phi + alpha * delta
            try:
                g_t = metric_from_potential(problem.ghat, trial)
            except NotAdmissible:
                g_t = None
            if g_t is not None:
                admissible_seen = True
                r_t = log_det_ratio(g_t, problem.ghat) + problem.F(trial, grid)
                rn_t = _sup(r_t)
                if rn_t < rn:
                    break
            alpha *= 0.5
            if alpha < 2.0 ** -40:
                if not admissible_seen:
                    raise NotAdmissible("no admissible Newton step found")
                raise NoConvergence(f"line search failed at residual {rn:.3e}")
        phi, g, r, rn = trial, g_t, r_t, rn_t
        history.append(rn)
        it += 1
    if problem.normalization == "mean-zero":
        phi = phi - float(np.mean(phi))
    elif problem.normalization == "symmetric-sup":
        phi = normalize_pair(phi, problem.reference)
    if problem.normalization != "none":
        g = metric_from_potential(problem.ghat, phi)
        rn = _sup(log_det_ratio(g, problem.ghat) + problem.F(phi, grid))
    return SolveReport(phi, rn, it, c, float(np.min(g.min_eig)), history, mu)


def volume_identity(phi: np.ndarray, ghat: HermitianMetricField) -> float:
    """Relative defect |int det g - int det ghat| / int det ghat."""
    grid = ghat.grid
    g = HermitianMetricField(grid, ghat.values + ddbar(grid, phi), check=False)
    v0 = float(integrate(grid, ghat.det))
    return abs(float(integrate(grid, g.det)) - v0) / v0


def normalize_pair(psi: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """psi + s with sup(psi + s - phi) = sup(phi - psi - s)."""
    d = np.asarray(psi, dtype=float) - np.asarray(phi, dtype=float)
    s = 0.5 * (float(np.max(-d)) - float(np.max(d)))
    return np.asarray(psi, dtype=float) + s


def c_constant(phi_j: np.ndarray, ghat: HermitianMetricField, F: ForcingSpec) -> float:
    grid = ghat.grid
    num = float(integrate(grid, ghat.det))
    den = float(integrate(grid, np.exp(-np.asarray(F(phi_j, grid), dtype=float)) * ghat.det))
    if not (num > 0 and den > 0 and np.isfinite(den)):
        raise ArithmeticError(f"non-positive volume integral ({num}, {den})")
    return num / den


def stability_gap(phi1, phi2, problem: EllipticProblem, tol: float = 1e-9) -> float:
    """sup |(phi1 - phi2) - mean(phi1 - phi2)| for two converged solutions of
    ``problem``.  Either argument may be a SolveReport or a potential; both
    are re-checked against the problem's residual."""
    fields = []
    for s in (phi1, phi2):
        p = s.phi if isinstance(s, SolveReport) else np.asarray(s, dtype=float)
        rn = _sup(ma_residual(p, problem))
        if rn >= tol:
            raise ValueError(f"input is not a converged solution of this problem (residual {rn:.3e})")
        fields.append(p)
    d = fields[0] - fields[1]
    d = d - float(np.mean(np.broadcast_to(d, np.broadcast(*fields).shape)))
    return _sup(d)
