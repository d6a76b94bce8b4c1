"""Forcing terms F(phi, z) with their phi- and z-derivatives."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import sympy as sp

from .grid import TorusGrid, grad_holo, ddbar

Evaluator = Callable[[np.ndarray, TorusGrid], np.ndarray]


@dataclass(frozen=True)
class ForcingSpec:
    """Evaluatable forcing.

    ``value``, ``dphi``, ``dphi2`` give F, F' = dF/dphi and F''.  The spatial
    evaluators hold phi fixed: ``grad_z`` returns F_i (last axis i),
    ``grad_z_dphi`` returns F'_i and ``hess_z`` returns F_{i jbar}.
    """

    value: Evaluator
    dphi: Evaluator
    dphi2: Evaluator
    grad_z: Evaluator | None = None
    grad_z_dphi: Evaluator | None = None
    hess_z: Evaluator | None = None
    name: str = "custom"

    def __call__(self, phi: np.ndarray, grid: TorusGrid) -> np.ndarray:
        return self.value(phi, grid)

    def shifted(self, c: float) -> "ForcingSpec":
        """F - c."""
        v = self.value
        return ForcingSpec(lambda p, g: v(p, g) - c, self.dphi, self.dphi2,
                           self.grad_z, self.grad_z_dphi, self.hess_z, f"{self.name}-{c:g}")


def _zeros(phi, grid):
    return np.zeros_like(np.asarray(phi, dtype=float))


def zero_forcing() -> ForcingSpec:
    def zgrad(phi, grid):
        return np.zeros(np.shape(phi) + (grid.n,))

    def zhess(phi, grid):
        return np.zeros(np.shape(phi) + (grid.n, grid.n))

    return ForcingSpec(_zeros, _zeros, _zeros, zgrad, zgrad, zhess, "zero")


def linear_forcing(lam: float, h: np.ndarray | float = 0.0, grid: TorusGrid | None = None) -> ForcingSpec:
    """F(phi, z) = lam * phi - h(z)."""
    lam = float(lam)
    h = np.asarray(h, dtype=float)

    def value(phi, g):
        return lam * phi - h

    def dphi(phi, g):
        return np.full(np.broadcast(phi, h).shape, lam)

    def dphi2(phi, g):
        return np.zeros(np.broadcast(phi, h).shape)

    def grad_z(phi, g):
        if h.ndim == 0:
            return np.zeros(np.shape(phi) + (g.n,))
        return -grad_holo(g, h)

    def grad_z_dphi(phi, g):
        return np.zeros(np.shape(phi) + (g.n,))

    def hess_z(phi, g):
        if h.ndim == 0:
            return np.zeros(np.shape(phi) + (g.n, g.n))
        return -ddbar(g, h)

    return ForcingSpec(value, dphi, dphi2, grad_z, grad_z_dphi, hess_z, f"linear({lam:g})")


def frozen_forcing(F: ForcingSpec, phi_ref: np.ndarray, grid: TorusGrid, shift: float = 0.0) -> ForcingSpec:
    """z -> F(phi_ref(z), z) - shift, independent of phi."""
    vals = np.asarray(F(phi_ref, grid), dtype=float) - shift
    return linear_forcing(0.0, -vals)


def expression_forcing(expr: str, n: int) -> ForcingSpec:
    """Forcing from a sympy expression in ``phi`` and the real coordinates.

    Coordinates are ``x1, y1`` (n=1) or ``x1, y1, x2, y2`` (n=2); ``x``/``y``
    alias ``x1``/``y1``.
    """
    phi = sp.Symbol("phi", real=True)
    coords = []
    for j in range(1, n + 1):
        coords += [sp.Symbol(f"x{j}", real=True), sp.Symbol(f"y{j}", real=True)]
    local = {"phi": phi, **{str(c): c for c in coords}, "x": coords[0], "y": coords[1]}
    e = sp.sympify(expr, locals=local)
    syms = [phi] + coords

    def compile_(f):
        fn = sp.lambdify(syms, f, "numpy")

        def ev(p, g):
            xs = g.coords()
            out = fn(np.asarray(p, dtype=float), *xs)
            return np.broadcast_to(np.asarray(out, dtype=complex if f.has(sp.I) else float),
                                   np.broadcast(np.asarray(p), *xs).shape).copy()
        return ev

    def holo(f, j):
        return (sp.diff(f, coords[2 * j]) - sp.I * sp.diff(f, coords[2 * j + 1])) / 2

    def anti(f, j):
        return (sp.diff(f, coords[2 * j]) + sp.I * sp.diff(f, coords[2 * j + 1])) / 2

    d1 = sp.diff(e, phi)
    value, dphi, dphi2 = compile_(e), compile_(d1), compile_(sp.diff(e, phi, 2))
    gz = [compile_(holo(e, j)) for j in range(n)]
    gzp = [compile_(holo(d1, j)) for j in range(n)]
    hz = [[compile_(anti(holo(e, i), j)) for j in range(n)] for i in range(n)]

    def stack(fs):
        return lambda p, g: np.stack([np.asarray(f(p, g), dtype=complex) for f in fs], axis=-1)

    def hess(p, g):
        return np.stack([stack(row)(p, g) for row in hz], axis=-2)

    return ForcingSpec(value, dphi, dphi2, stack(gz), stack(gzp), hess, f"expr({expr})")
