"""Periodic grids on flat complex tori and spectral calculus on them.

A torus C^n / Lambda is discretized as a uniform grid over its 2n real axes.
Complex coordinate z^j pairs the real axes (2j, 2j+1) as z^j = x^j + i y^j.

Field storage
-------------
Scalar fields are numpy arrays whose first 2n axes are grid axes.  A grid axis
may have length ``res`` or length 1; a length-1 axis means the field is
constant along that real direction (numpy broadcasting does the rest).  This
keeps fields that depend on few coordinates cheap, which matters for n=2
where a full res=64 grid has 16.7M points.  Tensor fields append one trailing
axis of length n per index.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft

LOWER, LOWER_BAR, UPPER, UPPER_BAR = "L", "B", "U", "V"
INDEX_KINDS = (LOWER, LOWER_BAR, UPPER, UPPER_BAR)


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class TorusGrid:
    n: int
    periods: tuple[float, ...]
    res: int

    def __post_init__(self):
        if self.n not in (1, 2):
            raise GridError(f"complex dimension must be 1 or 2, got {self.n}")
        if self.res < 8 or self.res % 2:
            raise GridError("resolution must be even ≥ 8")
        if len(self.periods) != 2 * self.n:
            raise GridError(f"need {2 * self.n} periods, got {len(self.periods)}")
        if any(p <= 0 for p in self.periods):
            raise GridError("periods must be positive")

    @property
    def ndim(self) -> int:
        return 2 * self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.res,) * self.ndim

    @property
    def npoints(self) -> int:
        return self.res ** self.ndim

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(p / self.res for p in self.periods)

    @property
    def volume(self) -> float:
        return float(np.prod(self.periods))

    def coords(self) -> list[np.ndarray]:
        """Open-mesh coordinate arrays, one per real axis (like ``np.ogrid``)."""
        out = []
        for a, p in enumerate(self.periods):
            shape = [1] * self.ndim
            shape[a] = self.res
            out.append((np.arange(self.res) * (p / self.res)).reshape(shape))
        return out

    def full(self, f: np.ndarray) -> np.ndarray:
        """Expand a (possibly thin) field to the full grid shape."""
        f = np.asarray(f)
        return np.broadcast_to(f, self.shape + f.shape[self.ndim:])

    def constant(self, c, comps: tuple[int, ...] = ()) -> np.ndarray:
        return np.full((1,) * self.ndim + comps, c)


def make_grid(n: int, periods: Sequence[float] | None = None, res: int = 32) -> TorusGrid:
    if periods is None:
        periods = (2 * np.pi,) * (2 * n)
    return TorusGrid(int(n), tuple(float(p) for p in periods), int(res))


@dataclass
class TensorField:
    """Complex field carrying an index signature.

    ``signature`` is a string over ``LBUV``: L lower, B lower-barred,
    U upper, V upper-barred.  ``values`` has shape grid + (n,) * len(signature).
    """

    grid: TorusGrid
    signature: str
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if any(c not in INDEX_KINDS for c in self.signature):
            raise GridError(f"bad signature {self.signature!r}")
        v = np.asarray(self.values)
        g = self.grid
        if v.ndim != g.ndim + len(self.signature):
            raise GridError("values rank does not match grid + signature")
        if any(s not in (1, g.res) for s in v.shape[: g.ndim]):
            raise GridError(f"grid axes must have length 1 or {g.res}")
        if any(s != g.n for s in v.shape[g.ndim:]):
            raise GridError("component axes must have length n")
        self.values = v

    @property
    def rank(self) -> int:
        return len(self.signature)

    def conj(self) -> "TensorField":
        swap = {LOWER: LOWER_BAR, LOWER_BAR: LOWER, UPPER: UPPER_BAR, UPPER_BAR: UPPER}
        return TensorField(self.grid, "".join(swap[c] for c in self.signature), np.conj(self.values))


# ---------------------------------------------------------------- spectral core

def _grid_axes(grid: TorusGrid) -> tuple[int, ...]:
    return tuple(range(grid.ndim))


def _wavenumbers(grid: TorusGrid, axis: int, m: int, zero_nyquist: bool) -> np.ndarray:
    k = np.fft.fftfreq(m, d=1.0 / m) * (2 * np.pi / grid.periods[axis])
    if zero_nyquist and m % 2 == 0:
        k[m // 2] = 0.0
    return k


def _kgrid(grid: TorusGrid, shape: tuple[int, ...], zero_nyquist: bool = True) -> list[np.ndarray]:
    """Wavenumber arrays broadcastable against an array of ``shape``."""
    extra = len(shape) - grid.ndim
    out = []
    for a in range(grid.ndim):
        s = [1] * len(shape)
        s[a] = shape[a]
        out.append(_wavenumbers(grid, a, shape[a], zero_nyquist).reshape(s))
    return out


def _holo_symbol(k: list[np.ndarray], j: int) -> np.ndarray:
    # d/dz = (d/dx - i d/dy)/2 acting on exp(i(kx x + ky y))
    return 0.5 * (1j * k[2 * j] + k[2 * j + 1])


def _anti_symbol(k: list[np.ndarray], j: int) -> np.ndarray:
    return 0.5 * (1j * k[2 * j] - k[2 * j + 1])


def _active_axes(grid: TorusGrid, shape: tuple[int, ...]) -> tuple[int, ...]:
    return tuple(a for a in range(grid.ndim) if shape[a] > 1)


def _fft(grid: TorusGrid, f: np.ndarray) -> np.ndarray:
    axes = _active_axes(grid, f.shape)
    return sfft.fftn(f, axes=axes) if axes else np.asarray(f, dtype=complex)


def _ifft(grid: TorusGrid, fh: np.ndarray) -> np.ndarray:
    axes = _active_axes(grid, fh.shape)
    return sfft.ifftn(fh, axes=axes) if axes else np.asarray(fh, dtype=complex)


def _check_axis(grid: TorusGrid, j: int):
    if not 0 <= j < grid.n:
        raise IndexError(f"complex axis {j} out of range for n={grid.n}")


def d_holo(grid: TorusGrid, f: np.ndarray, j: int) -> np.ndarray:
    """Spectral d/dz^j, applied componentwise."""
    _check_axis(grid, j)
    f = np.asarray(f)
    k = _kgrid(grid, f.shape)
    return _ifft(grid, _fft(grid, f) * _holo_symbol(k, j))


def d_anti(grid: TorusGrid, f: np.ndarray, j: int) -> np.ndarray:
    """Spectral d/dzbar^j, applied componentwise."""
    _check_axis(grid, j)
    f = np.asarray(f)
    k = _kgrid(grid, f.shape)
    return _ifft(grid, _fft(grid, f) * _anti_symbol(k, j))


def _insert_axes(x: np.ndarray, pos: int, count: int) -> np.ndarray:
    for _ in range(count):
        x = np.expand_dims(x, pos)
    return x


def _grad_from(grid: TorusGrid, fh: np.ndarray, k: list[np.ndarray], symbol) -> np.ndarray:
    n, ax = grid.n, grid.ndim
    out = np.empty(fh.shape[:ax] + (n,) + fh.shape[ax:], dtype=complex)
    for i in range(n):
        out[(slice(None),) * ax + (i,)] = _ifft(grid, fh * symbol(k, i))
    return out


def grad_holo(grid: TorusGrid, f: np.ndarray) -> np.ndarray:
    """All d/dz^i of f; the derivative index becomes the first component axis."""
    f = np.asarray(f)
    return _grad_from(grid, _fft(grid, f), _kgrid(grid, f.shape), _holo_symbol)


def grad_anti(grid: TorusGrid, f: np.ndarray) -> np.ndarray:
    f = np.asarray(f)
    return _grad_from(grid, _fft(grid, f), _kgrid(grid, f.shape), _anti_symbol)


def grad_both(grid: TorusGrid, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(grad_holo(f), grad_anti(f)) sharing one forward transform."""
    f = np.asarray(f)
    fh = _fft(grid, f)
    k = _kgrid(grid, f.shape)
    return _grad_from(grid, fh, k, _holo_symbol), _grad_from(grid, fh, k, _anti_symbol)


def curl_pair(grid: TorusGrid, f: np.ndarray, p: int, i: int, anti: bool = False) -> np.ndarray:
    """d_p f[i] - d_i f[p], where f[i] indexes the first component axis.

    ``anti`` uses barred derivatives.  One inverse transform instead of the
    2n needed for the two full gradients.
    """
    f = np.asarray(f)
    ax = grid.ndim
    fh = _fft(grid, f)
    k = _kgrid(grid, f.shape[:ax])
    k = [kk.reshape(kk.shape + (1,) * (f.ndim - ax - 1)) for kk in k]
    sym = _anti_symbol if anti else _holo_symbol
    sel = (slice(None),) * ax
    return _ifft(grid, sym(k, p) * fh[sel + (i,)] - sym(k, i) * fh[sel + (p,)])


def ddbar(grid: TorusGrid, f: np.ndarray) -> np.ndarray:
    """Complex Hessian: out[..., i, j, *comps] = d_i d_jbar f.

    Built from the Nyquist-zeroed first-derivative symbols so that it agrees
    exactly with ``d_holo(d_anti(f))`` and the discrete volume identity holds.
    """
    f = np.asarray(f)
    fh = _fft(grid, f)
    k = _kgrid(grid, f.shape)
    n = grid.n
    rows = []
    for i in range(n):
        si = _holo_symbol(k, i)
        rows.append(np.stack([_ifft(grid, fh * si * _anti_symbol(k, j)) for j in range(n)], axis=grid.ndim))
    return np.stack(rows, axis=grid.ndim)


def laplacian_flat(grid: TorusGrid, f: np.ndarray) -> np.ndarray:
    """sum_j d_j d_jbar f (a quarter of the real Laplacian)."""
    f = np.asarray(f)
    fh = _fft(grid, f)
    k = _kgrid(grid, f.shape)
    sym = sum(_holo_symbol(k, j) * _anti_symbol(k, j) for j in range(grid.n))
    return _ifft(grid, fh * sym)


def spectral_shift(grid: TorusGrid, f: np.ndarray, shift: Sequence[float]) -> np.ndarray:
    """Trigonometric interpolant of f evaluated at x + shift (per real axis)."""
    f = np.asarray(f)
    fh = _fft(grid, f)
    k = _kgrid(grid, f.shape, zero_nyquist=False)
    phase = sum(kk * s for kk, s in zip(k, shift))
    out = _ifft(grid, fh * np.exp(1j * phase))
    return out.real if np.isrealobj(f) else out


# ------------------------------------------------------------------ reductions

def integrate(grid: TorusGrid, f: np.ndarray):
    """Trapezoid rule on the periodic grid: mean(values) * prod(periods)."""
    f = np.asarray(f)
    m = f.mean(axis=_grid_axes(grid))
    return m * grid.volume


def sup_norm(f: np.ndarray, pointwise_norm: Callable[[np.ndarray], np.ndarray] | None = None) -> float:
    vals = pointwise_norm(f) if pointwise_norm is not None else np.abs(f)
    return float(np.max(vals))


# ---------------------------------------------------------------- mollification

def mollifier_symbol(grid: TorusGrid, shape: tuple[int, ...], j: float) -> np.ndarray:
    """Sharp cutoff at integer mode |m|_max <= j times exp(-|m|^2 / (2 j^2))."""
    mask = None
    r2 = 0.0
    for a in range(grid.ndim):
        s = [1] * len(shape)
        s[a] = shape[a]
        m = (np.fft.fftfreq(shape[a], d=1.0 / shape[a])).reshape(s)
        keep = np.abs(m) <= j
        mask = keep if mask is None else mask & keep
        r2 = r2 + m**2
    return mask * np.exp(-r2 / (2.0 * j * j))


def mollify(grid: TorusGrid, f: np.ndarray, j: float) -> np.ndarray:
    if j < 1:
        raise ValueError("mollification level must be ≥ 1")
    f = np.asarray(f)
    out = _ifft(grid, _fft(grid, f) * mollifier_symbol(grid, f.shape, j))
    return out.real if np.isrealobj(f) else out


# ------------------------------------------------ finite-difference oracle path

def _fd(grid: TorusGrid, f: np.ndarray, axis: int) -> np.ndarray:
    if f.shape[axis] == 1:
        return np.zeros_like(f, dtype=complex)
    h = grid.spacing[axis]
    return (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis)) / (2 * h)


def fd_holo(grid: TorusGrid, f: np.ndarray, j: int) -> np.ndarray:
    """Second-order centered-difference d/dz^j (independent of the FFT path)."""
    _check_axis(grid, j)
    f = np.asarray(f)
    return 0.5 * (_fd(grid, f, 2 * j) - 1j * _fd(grid, f, 2 * j + 1))


def fd_anti(grid: TorusGrid, f: np.ndarray, j: int) -> np.ndarray:
    _check_axis(grid, j)
    f = np.asarray(f)
    return 0.5 * (_fd(grid, f, 2 * j) + 1j * _fd(grid, f, 2 * j + 1))


def band_limited_field(grid: TorusGrid, rng: np.random.Generator, modes: int = 2,
                       axes: Sequence[int] | None = None, real: bool = True,
                       comps: tuple[int, ...] = ()) -> np.ndarray:
    """Random trigonometric polynomial with integer modes |m|_max <= ``modes``.

    Only ``axes`` (default: all) are active; the result is thin elsewhere.
    Coefficients decay like 1/(1+|m|^2) so derivatives stay O(1).
    """
    if axes is None:
        axes = range(grid.ndim)
    axes = sorted(set(axes))
    shape = tuple(grid.res if a in axes else 1 for a in range(grid.ndim)) + comps
    coef = np.zeros(shape, dtype=complex)
    idx_ranges = [range(-modes, modes + 1) if a in axes else range(0, 1) for a in range(grid.ndim)]
    for m in np.ndindex(*[len(r) for r in idx_ranges]):
        mode = tuple(r[i] for r, i in zip(idx_ranges, m))
        w = 1.0 / (1.0 + sum(x * x for x in mode))
        c = (rng.standard_normal(comps) + 1j * rng.standard_normal(comps)) * w
        coef[tuple(mm % s for mm, s in zip(mode, shape))] += c
    f = np.fft.ifftn(coef, axes=_grid_axes(grid)) * np.prod([shape[a] for a in axes])
    if real:
        f = f.real
    return f
