"""Chern geometry of Hermitian metrics on the flat torus.

Index conventions
-----------------
Metric arrays store ``g[..., i, j] = g_{i jbar}``.  The cached inverse stores
``ginv[..., i, j] = g^{i jbar}`` so that ``sum_j g^{i jbar} g_{k jbar} = delta``.

Tensor signatures use the letters of :mod:`hermflow.grid` (L, B, U, V).

=====================  =========  ====================================
quantity               signature  array layout
=====================  =========  ====================================
Christoffel Gamma      LLU        G[i, j, k] = Gamma_{ij}^k
torsion T              LLU        T[i, j, k] = T_{ij}^k
curvature R            LBLB       R[i, j, k, l] = R_{i jbar k lbar}
curvature, raised      LBLU       R[i, j, k, l] = R_{i jbar k}^l
Chern-Ricci            LB         Ric[i, j] = R_{i jbar}
=====================  =========  ====================================

A covariant derivative puts its new index *first*: ``(nabla X)[i, l]`` is
``nabla_i X^l``.  The holomorphic derivative uses Gamma on unbarred slots only;
the antiholomorphic derivative uses conj(Gamma) on barred slots only (the
mixed Christoffel symbols of the Chern connection vanish).  Multiple
contractions are performed in signature order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import SingularMetric
from .grid import (
    LOWER, LOWER_BAR, UPPER, UPPER_BAR,
    TensorField, TorusGrid, band_limited_field, curl_pair, ddbar, grad_anti, grad_both, grad_holo,
)

SINGULAR_RTOL = 1e-10
_LETTERS = "abcdefghijklmnopqrstuvw"


def hermitian_eigvals(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(min, max) eigenvalue of a field of 1x1 or 2x2 Hermitian matrices."""
    n = m.shape[-1]
    if n == 1:
        e = m[..., 0, 0].real
        return e, e
    a = m[..., 0, 0].real
    d = m[..., 1, 1].real
    b = m[..., 0, 1]
    mid = 0.5 * (a + d)
    rad = np.sqrt(0.25 * (a - d) ** 2 + np.abs(b) ** 2)
    return mid - rad, mid + rad


def _det(m: np.ndarray) -> np.ndarray:
    if m.shape[-1] == 1:
        return m[..., 0, 0].real
    return (m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]).real


def _inv_t(m: np.ndarray, det: np.ndarray) -> np.ndarray:
    """Transpose of the matrix inverse, i.e. the g^{i jbar} layout."""
    if m.shape[-1] == 1:
        return 1.0 / m
    out = np.empty_like(m, dtype=complex)
    out[..., 0, 0] = m[..., 1, 1] / det
    out[..., 1, 1] = m[..., 0, 0] / det
    out[..., 0, 1] = -m[..., 1, 0] / det
    out[..., 1, 0] = -m[..., 0, 1] / det
    return out


def _first_index(grid: TorusGrid, mask: np.ndarray):
    idx = np.unravel_index(int(np.argmax(mask)), mask.shape)
    return tuple(int(i) for i in idx[: grid.ndim])


class HermitianMetricField:
    """Pointwise positive-definite Hermitian metric with cached inverse and log det."""

    def __init__(self, grid: TorusGrid, values: np.ndarray, check: bool = True,
                 error: type[SingularMetric] = SingularMetric):
        v = np.asarray(values, dtype=complex)
        if v.shape[grid.ndim:] != (grid.n, grid.n):
            raise ValueError("metric components must be n x n")
        v = 0.5 * (v + np.conj(np.swapaxes(v, -1, -2)))
        self.grid = grid
        self.values = v
        lo, hi = hermitian_eigvals(v)
        self.min_eig = lo
        self.max_eig = hi
        if check:
            bad = lo <= SINGULAR_RTOL * np.abs(hi)
            if np.any(bad) or not np.all(np.isfinite(lo)):
                p = _first_index(grid, bad | ~np.isfinite(lo))
                emin = float(np.min(lo))
                raise error(f"metric not positive definite: min eigenvalue {emin:.3e} at {p}",
                            point=p, eigenvalue=emin)
        self.det = _det(v)
        self.inv = _inv_t(v, self.det)
        with np.errstate(invalid="ignore", divide="ignore"):
            self.logdet = np.log(self.det)

    @property
    def n(self) -> int:
        return self.grid.n

    def as_tensor(self) -> TensorField:
        return TensorField(self.grid, LOWER + LOWER_BAR, self.values)

    def scaled(self, c: float) -> "HermitianMetricField":
        return HermitianMetricField(self.grid, c * self.values)


def flat_metric(grid: TorusGrid, scale: float = 1.0) -> HermitianMetricField:
    e = np.eye(grid.n, dtype=complex) * scale
    return HermitianMetricField(grid, e.reshape((1,) * grid.ndim + e.shape))


def perturbed_metric(grid: TorusGrid, seed: int, eps: float = 0.05, modes: int = 2,
                     axes=None) -> HermitianMetricField:
    """delta + eps * H with H a random band-limited Hermitian field, sup |H| = 1.

    For n=2 the result is generically non-Kähler.
    """
    rng = np.random.default_rng(seed)
    a = band_limited_field(grid, rng, modes=modes, axes=axes, real=False, comps=(grid.n, grid.n))
    h = a + np.conj(np.swapaxes(a, -1, -2))
    lo, hi = hermitian_eigvals(h)
    h = h / max(np.max(np.abs(lo)), np.max(np.abs(hi)))
    return HermitianMetricField(grid, np.eye(grid.n) + eps * h)


def kahler_metric(grid: TorusGrid, psi: np.ndarray, base: float = 1.0) -> HermitianMetricField:
    """base * delta + i ddbar psi, closed by construction."""
    return HermitianMetricField(grid, base * np.eye(grid.n) + ddbar(grid, psi))


def conformal_metric(grid: TorusGrid, u: np.ndarray) -> HermitianMetricField:
    u = np.asarray(u)
    return HermitianMetricField(grid, np.exp(u)[..., None, None] * np.eye(grid.n))


# ---------------------------------------------------------------- Chern tensors

def christoffel(g: HermitianMetricField) -> TensorField:
    dg = grad_holo(g.grid, g.values)  # dg[i, j, l] = d_i g_{j lbar}
    gam = np.einsum("...kl,...ijl->...ijk", g.inv, dg)
    return TensorField(g.grid, "LLU", gam)


def torsion(g: HermitianMetricField, gamma: TensorField | None = None) -> TensorField:
    gam = (gamma or christoffel(g)).values
    return TensorField(g.grid, "LLU", gam - np.swapaxes(gam, -3, -2))


def chern_curvature(g: HermitianMetricField) -> TensorField:
    grid = g.grid
    dg = grad_holo(grid, g.values)   # [i, k, q] = d_i g_{k qbar}
    dbg = grad_anti(grid, g.values)  # [j, p, l] = d_jbar g_{p lbar}
    ddg = ddbar(grid, g.values)      # [i, j, k, l]
    quad = np.einsum("...pq,...ikq,...jpl->...ijkl", g.inv, dg, dbg, optimize=True)
    return TensorField(grid, "LBLB", quad - ddg)


def raise_last(R: TensorField, g: HermitianMetricField) -> TensorField:
    """R_{i jbar k lbar} -> R_{i jbar k}^l."""
    up = np.einsum("...lm,...ijkm->...ijkl", g.inv, R.values)
    return TensorField(R.grid, "LBLU", up)


def raise_third_bar(R: TensorField, g: HermitianMetricField) -> TensorField:
    """R_{i jbar k lbar} -> R_{i jbar kbar}^{lbar} := g^{m lbar} R_{i jbar m kbar}."""
    up = np.einsum("...ml,...ijmk->...ijkl", g.inv, R.values)
    return TensorField(R.grid, "LBBV", up)


def chern_ricci(g: HermitianMetricField) -> TensorField:
    """Chern-Ricci form via the log-det route, -d_i d_jbar log det g."""
    return TensorField(g.grid, "LB", -ddbar(g.grid, g.logdet))


def ricci_trace(g: HermitianMetricField, R: TensorField | None = None) -> TensorField:
    """Chern-Ricci form via the trace route, g^{k lbar} R_{i jbar k lbar}."""
    R = R or chern_curvature(g)
    return TensorField(g.grid, "LB", np.einsum("...kl,...ijkl->...ij", g.inv, R.values))


@dataclass
class ChernPackage:
    gamma: TensorField
    torsion: TensorField
    curvature: TensorField
    ricci: TensorField


def chern_package(g: HermitianMetricField) -> ChernPackage:
    gam = christoffel(g)
    return ChernPackage(gam, torsion(g, gam), chern_curvature(g), chern_ricci(g))


def _slot_contract(gam: np.ndarray, t: np.ndarray, s: int, ax: int, transpose: bool) -> np.ndarray:
    """out[z, a_0..a_{r-1}] = sum_y G[z, y, a_s] t[a_0..y..a_{r-1}] (y in slot s).

    With ``transpose`` the Christoffel is read as G[z, a_s, y].  Explicit
    broadcasting over the n values of y is much faster than einsum here.
    """
    n = gam.shape[-1]
    r = t.ndim - ax
    acc = None
    for y in range(n):
        gz = gam[..., :, :, y] if transpose else gam[..., :, y, :]   # [z, a]
        ty = np.take(t, y, axis=ax + s)                                # slots without s
        ty = np.expand_dims(ty, (ax, ax + 1 + s))                      # [1, .., 1@s, ..]
        gz = gz.reshape(gz.shape[:ax + 1] + tuple(n if q == s else 1 for q in range(r)))
        term = gz * ty
        acc = term if acc is None else acc + term
    return acc


def _connection_terms(gam: np.ndarray, t: TensorField, plus: str, minus: str) -> np.ndarray | None:
    ax = t.grid.ndim
    out = None
    for s, kind in enumerate(t.signature):
        if kind == plus:
            # sum_y gam[z, y, a] t[..., y@s, ...]
            term = _slot_contract(gam, t.values, s, ax, transpose=False)
        elif kind == minus:
            # sum_y gam[z, a, y] t[..., y@s, ...]
            term = -_slot_contract(gam, t.values, s, ax, transpose=True)
        else:
            continue
        out = term if out is None else out + term
    return out


def _direction(direction: str):
    if direction == "holo":
        return LOWER, UPPER, LOWER
    if direction == "anti":
        return LOWER_BAR, UPPER_BAR, LOWER_BAR
    raise ValueError(f"direction must be 'holo' or 'anti', not {direction!r}")


def covariant_derivative(t: TensorField, g: HermitianMetricField, direction: str = "holo",
                         gamma: TensorField | None = None, plain: np.ndarray | None = None) -> TensorField:
    """Chern covariant derivative; the new index is prepended.

    ``direction='holo'`` gives nabla_i (new index L), ``'anti'`` gives
    nabla_jbar (new index B).  ``plain`` may carry the precomputed
    coordinate gradient of ``t`` in that direction.
    """
    grid = t.grid
    new, plus, minus = _direction(direction)
    gam = (gamma or christoffel(g)).values
    if direction == "anti":
        gam = np.conj(gam)
    if plain is None:
        plain = grad_holo(grid, t.values) if direction == "holo" else grad_anti(grid, t.values)
    conn = _connection_terms(gam, t, plus, minus)
    out = plain if conn is None else plain + conn
    return TensorField(grid, new + t.signature, out)


def antisymmetric_derivative(t: TensorField, g: HermitianMetricField, direction: str, p: int, i: int,
                             gamma: TensorField | None = None) -> np.ndarray:
    """nabla_p t_{i...} - nabla_i t_{p...} for a tensor whose first slot has the
    kind of the derivative index (L for 'holo', B for 'anti').

    Equal to the (p, i) entry of the antisymmetrised covariant_derivative but
    needs only one inverse transform and connection terms in two directions.
    """
    grid = t.grid
    ax = grid.ndim
    new, plus, minus = _direction(direction)
    if not t.signature or t.signature[0] != new:
        raise ValueError("first slot must match the derivative direction")
    gam = (gamma or christoffel(g)).values
    if direction == "anti":
        gam = np.conj(gam)
    sel = (slice(None),) * ax
    out = curl_pair(grid, t.values, p, i, anti=(direction == "anti"))
    rest = t.signature[1:]
    for a, b, sign in ((p, i, 1.0), (i, p, -1.0)):
        # first slot: -gam_{ab}^y t_y; remaining slots act on the slice t_b
        term = -sum(gam[sel + (a, b, y)].reshape(gam.shape[:ax] + (1,) * len(rest)) * t.values[sel + (y,)]
                    for y in range(grid.n))
        if rest:
            conn = _connection_terms(gam[sel + (slice(a, a + 1),)], TensorField(grid, rest, t.values[sel + (b,)]),
                                     plus, minus)
            if conn is not None:
                term = term + conn[sel + (0,)]
        out = out + sign * term
    return out


# ------------------------------------------------------------ identity checks

@dataclass
class ResidualReport:
    identity_name: str
    sup_residual: float
    res: int
    metric_seed: int | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _sup(x: np.ndarray) -> float:
    return float(np.max(np.abs(x))) if x.size else 0.0


def commutator(t: TensorField, g: HermitianMetricField, gamma: TensorField | None = None) -> np.ndarray:
    """[nabla_i, nabla_jbar] t with layout [i, j, *slots]."""
    gamma = gamma or christoffel(g)
    ax = t.grid.ndim
    dh, da = grad_both(t.grid, t.values)
    a = covariant_derivative(covariant_derivative(t, g, "holo", gamma, dh), g, "anti", gamma).values
    a = np.swapaxes(a, ax, ax + 1)
    b = covariant_derivative(covariant_derivative(t, g, "anti", gamma, da), g, "holo", gamma).values
    return b - a


def verify_commutation(g: HermitianMetricField, X: np.ndarray, a: np.ndarray, seed: int | None = None,
                       curvature: TensorField | None = None,
                       package: ChernPackage | None = None) -> list[ResidualReport]:
    """Residuals of the four Ricci commutation formulas for a vector field X
    and a (1,0)-form a.  ``curvature`` may be supplied to test the harness;
    ``package`` reuses precomputed Christoffel symbols and curvature."""
    grid = g.grid
    gam = package.gamma if package else christoffel(g)
    R = curvature or (package.curvature if package else chern_curvature(g))
    Rup = raise_last(R, g).values
    Rbar = raise_third_bar(R, g).values
    X = np.asarray(X, dtype=complex)
    a = np.asarray(a, dtype=complex)
    Xt = TensorField(grid, UPPER, X)
    at = TensorField(grid, LOWER, a)
    checks = [
        ("commutation_vector", Xt, np.einsum("...ijkl,...k->...ijl", Rup, X)),
        ("commutation_form", at, -np.einsum("...ijkl,...l->...ijk", Rup, a)),
        ("commutation_conj_vector", Xt.conj(), -np.einsum("...ijkl,...k->...ijl", Rbar, np.conj(X))),
        ("commutation_conj_form", at.conj(), np.einsum("...ijkl,...l->...ijk", Rbar, np.conj(a))),
    ]
    out = []
    for name, t, rhs in checks:
        out.append(ResidualReport(name, _sup(commutator(t, g, gam) - rhs), grid.res, seed))
    return out


def verify_torsion_bianchi(g: HermitianMetricField, seed: int | None = None,
                           classical: bool = False,
                           package: ChernPackage | None = None) -> list[ResidualReport]:
    """Residuals of the five curvature identities with torsion corrections.

    With ``classical=True`` the torsion terms are dropped, which is the
    right test for Kähler metrics.
    """
    grid = g.grid
    ax = grid.ndim
    if package is None:
        package = chern_package(g)
    gam = package.gamma
    T = package.torsion.values
    R = package.curvature
    Rv = R.values
    c = 0.0 if classical else 1.0

    tlow = np.einsum("...ikm,...ml->...ikl", T, g.values)           # T_{i k lbar}
    tbb = np.einsum("...jlm,...km->...jlk", np.conj(T), g.values)   # T_{jbar lbar k}
    dbar_tlow = covariant_derivative(TensorField(grid, "LLB", tlow), g, "anti", gam).values  # [j,i,k,l]
    d_tbb = covariant_derivative(TensorField(grid, "BBL", tbb), g, "holo", gam).values       # [i,j,l,k]

    def perm(x, order):
        return np.transpose(x, tuple(range(ax)) + tuple(ax + o for o in order))

    # line 1: R_{ijkl} - R_{kjil} = -nabla_jbar T_{i k lbar}
    l1 = Rv - perm(Rv, (2, 1, 0, 3)) + c * perm(dbar_tlow, (1, 0, 2, 3))
    # line 2: R_{ijkl} - R_{ilkj} = -nabla_i T_{jbar lbar k}; d_tbb[i,j,l,k]
    l2 = Rv - perm(Rv, (0, 3, 2, 1)) + c * perm(d_tbb, (0, 1, 3, 2))
    # line 3: R_{ijkl} - R_{klij} = -nabla_jbar T_{i k lbar} - nabla_k T_{jbar lbar i}
    # nabla_k T_{jbar lbar i} = d_tbb[k, j, l, i] -> need [i, j, k, l]
    l3 = Rv - perm(Rv, (2, 3, 0, 1)) + c * (perm(dbar_tlow, (1, 0, 2, 3)) + perm(d_tbb, (3, 1, 0, 2)))
    del dbar_tlow, d_tbb
    # lines 4 and 5 are antisymmetric in the derivative index and one slot,
    # so only pairs p < i carry information.
    # line 4: nabla_p R_{ijkl} - nabla_i R_{pjkl} = -T_{pi}^r R_{rjkl}
    # line 5: nabla_qbar R_{ijkl} - nabla_jbar R_{iqkl} = -conj(T_{qj}^s) R_{i sbar k l}
    Rt = TensorField(grid, "BLLB", perm(Rv, (1, 0, 2, 3)))   # [j, i, k, l]
    n = grid.n
    sel = (slice(None),) * ax
    r4 = r5 = 0.0
    for p in range(n):
        for i in range(p + 1, n):
            l4 = antisymmetric_derivative(R, g, "holo", p, i, gam)
            l4 = l4 + c * np.einsum("...r,...rjkl->...jkl", T[sel + (p, i)], Rv)
            r4 = max(r4, _sup(l4))
            l5 = antisymmetric_derivative(Rt, g, "anti", p, i, gam)
            l5 = l5 + c * np.einsum("...s,...sikl->...ikl", np.conj(T[sel + (p, i)]), Rt.values)
            r5 = max(r5, _sup(l5))
    names = ["bianchi_1", "bianchi_2", "bianchi_3", "bianchi_4", "bianchi_5"]
    vals = [_sup(l1), _sup(l2), _sup(l3), r4, r5]
    return [ResidualReport(nm, v, grid.res, seed) for nm, v in zip(names, vals)]


# ------------------------------------------------------------ Guan-Li frame

def _at(grid: TorusGrid, arr: np.ndarray, p) -> np.ndarray:
    idx = tuple(pi if arr.shape[a] > 1 else 0 for a, pi in enumerate(p))
    return arr[idx]


@dataclass
class GuanLiFrame:
    """Holomorphic coordinate change z - p = A (u + Q(u, u) / 2) at p.

    ``A[i, a]`` is the linear part, ``Q[k, j, l] = Q^k_{jl}`` (symmetric in j, l).
    ``g0``, ``dg``, ``dbg`` are the metric value and first jets at p in the
    original coordinates (``dg[k] = d_k g``, ``dbg[k] = d_kbar g``).
    """

    A: np.ndarray
    Q: np.ndarray
    g0: np.ndarray
    dg: np.ndarray
    dbg: np.ndarray
    point: tuple = field(default=())


def guan_li_frame(ghat: HermitianMetricField, p) -> GuanLiFrame:
    grid = ghat.grid
    g0 = _at(grid, ghat.values, p)
    dg = _at(grid, grad_holo(grid, ghat.values), p)
    dbg = _at(grid, grad_anti(grid, ghat.values), p)
    lo, hi = hermitian_eigvals(g0)
    if lo <= SINGULAR_RTOL * abs(hi):
        raise SingularMetric(f"metric singular at {p}", point=tuple(p), eigenvalue=float(lo))
    L = np.linalg.cholesky(g0)
    A = np.linalg.inv(L).T
    # first jets after the linear change: dgp[c, a, b] = d_{w_c} g'_{a bbar}
    dgp = np.einsum("ia,jb,kij,kc->cab", A, np.conj(A), dg, A)
    n = grid.n
    Q = np.zeros((n, n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            Q[i, i, j] = -dgp[j, i, i]
            Q[i, j, i] = -dgp[j, i, i]
    return GuanLiFrame(A, Q, g0, dg, dbg, tuple(p))


def pulled_back_metric(frame: GuanLiFrame, u: np.ndarray) -> np.ndarray:
    """Metric in the new coordinates u, using the first-order Taylor model at p."""
    A, Q = frame.A, frame.Q
    w = u + 0.5 * np.einsum("kjl,j,l->k", Q, u, u)
    jw = np.eye(len(u)) + np.einsum("kal,l->ka", Q, u)
    dz = A @ w
    jz = A @ jw
    gz = frame.g0 + np.einsum("kij,k->ij", frame.dg, dz) + np.einsum("kij,k->ij", frame.dbg, np.conj(dz))
    return np.einsum("ia,jb,ij->ab", jz, np.conj(jz), gz)


def check_guan_li(frame: GuanLiFrame, h: float = 1e-3) -> float:
    """Independent jet recomputation by Richardson-extrapolated finite differences.

    Returns max(|g(p) - delta|, max_{i,j} |d g_{i ibar} / d u_j|) at p.
    """
    n = frame.A.shape[0]
    g0 = pulled_back_metric(frame, np.zeros(n, dtype=complex))
    worst = float(np.max(np.abs(g0 - np.eye(n))))

    def cdiff(e, step):
        return (pulled_back_metric(frame, step * e) - pulled_back_metric(frame, -step * e)) / (2 * step)

    for j in range(n):
        e = np.zeros(n, dtype=complex)
        e[j] = 1.0
        dx = (4 * cdiff(e, h / 2) - cdiff(e, h)) / 3
        dy = (4 * cdiff(1j * e, h / 2) - cdiff(1j * e, h)) / 3
        dz = 0.5 * (dx - 1j * dy)
        worst = max(worst, float(np.max(np.abs(np.diag(dz)))))
    return worst


# ------------------------------------------------------- traces and norms

def trace_pair(g: HermitianMetricField, ghat: HermitianMetricField) -> tuple[np.ndarray, np.ndarray]:
    """(tr_ghat g, tr_g ghat), both real."""
    a = np.einsum("...ij,...ij->...", ghat.inv, g.values).real
    b = np.einsum("...ij,...ij->...", g.inv, ghat.values).real
    return a, b


def tensor_norm_sq(t: TensorField, g: HermitianMetricField) -> np.ndarray:
    """|t|^2_g, contracting every slot of t against conj(t) with g or g^{-1}."""
    r = t.rank
    left = _LETTERS[:r]
    right = _LETTERS[r:2 * r]
    operands = [t.values, np.conj(t.values)]
    subs = [f"...{left}", f"...{right}"]
    for s, kind in enumerate(t.signature):
        a, b = left[s], right[s]
        if kind == LOWER:
            operands.append(g.inv); subs.append(f"...{a}{b}")
        elif kind == LOWER_BAR:
            operands.append(g.inv); subs.append(f"...{b}{a}")
        elif kind == UPPER:
            operands.append(g.values); subs.append(f"...{a}{b}")
        else:
            operands.append(g.values); subs.append(f"...{b}{a}")
    expr = ",".join(subs) + "->..."
    return np.einsum(expr, *operands, optimize=True).real


def tensor_norm(t: TensorField, g: HermitianMetricField) -> np.ndarray:
    return np.sqrt(np.maximum(tensor_norm_sq(t, g), 0.0))


# ------------------------------------------------------------ identity suite

def _suite_one(args) -> list[ResidualReport]:
    seed, n, res, eps, modes, axes = args
    from .grid import make_grid
    grid = make_grid(n, None, res)
    g = perturbed_metric(grid, seed, eps, modes, axes)
    rng = np.random.default_rng(seed + 10_000)
    X = band_limited_field(grid, rng, modes, axes, real=False, comps=(n,))
    a = band_limited_field(grid, rng, modes, axes, real=False, comps=(n,))
    pk = chern_package(g)
    return verify_commutation(g, X, a, seed, package=pk) + verify_torsion_bianchi(g, seed, package=pk)


def identity_suite(seeds, n: int = 2, res: int = 32, eps: float = 0.05, modes: int = 2,
                   axes=(0, 1, 2), workers: int = 1) -> list[ResidualReport]:
    """All nine identity residuals on perturbed metrics, one per seed.

    The vector field and 1-form are drawn from ``seed + 10000``.  With
    ``workers > 1`` metrics are processed in separate processes; results are
    returned in seed order either way.
    """
    jobs = [(int(s), n, res, eps, modes, None if axes is None else tuple(axes)) for s in seeds]
    if workers > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as ex:
            chunks = list(ex.map(_suite_one, jobs))
    else:
        chunks = [_suite_one(j) for j in jobs]
    return [r for c in chunks for r in c]


def refinement_ok(coarse: float, fine: float, shrink: float = 10.0, floor: float = 1e-11) -> bool:
    """Spectral refinement rule: the finer residual is ``shrink`` times smaller,
    unless it already sits below the round-off ``floor``."""
    return fine <= coarse / shrink or fine < floor
