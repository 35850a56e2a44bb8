"""Shared numerical kernel: uniform grids, Riemann quadrature, FFT-backed
continuous Fourier transforms, central finite differences, and dyadic
slope fits.

Grids are midpoint-offset tensor products covering [-L, L)^n, so the
origin is never a sample point (convenient for phases that are singular
at xi = 0).  The transform convention is

    F[f](xi) = integral f(x) exp(-2*pi*i x.xi) dx

approximated by the Riemann sum on the grid.  Midpoint offsets are
compensated exactly by pre/post phase factors around an FFT, so forward
followed by inverse is an identity up to rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Grid",
    "MultiIndex",
    "FitResult",
    "quadrature_integral",
    "dft",
    "idft",
    "box_spectrum",
    "finite_difference",
    "default_fd_step",
    "fit_log2_slope",
]


@dataclass(frozen=True)
class Grid:
    """Uniform midpoint tensor grid on [-half_width, half_width)^dim."""

    dim: int
    half_width: float
    points_per_axis: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("grid dimension must be positive")
        if self.half_width <= 0:
            raise ValueError("grid half_width must be positive")
        if self.points_per_axis < 1:
            raise ValueError("grid needs at least one point per axis")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.points_per_axis

    @property
    def weight(self) -> float:
        """Quadrature weight per grid point, spacing**dim."""
        return self.spacing**self.dim

    @property
    def shape(self) -> tuple:
        return (self.points_per_axis,) * self.dim

    @property
    def size(self) -> int:
        return self.points_per_axis**self.dim

    def axis(self) -> np.ndarray:
        h = self.spacing
        return -self.half_width + (np.arange(self.points_per_axis) + 0.5) * h

    def meshgrid(self) -> list:
        return np.meshgrid(*([self.axis()] * self.dim), indexing="ij")

    def points(self) -> np.ndarray:
        """All grid points as an (size, dim) array, C-ordered."""
        mesh = self.meshgrid()
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def dual(self) -> "Grid":
        """Frequency grid paired with this one by `dft`.

        Spacing 1/(2L), same point count, again midpoint-offset.
        """
        return Grid(self.dim, self.points_per_axis / (4.0 * self.half_width),
                    self.points_per_axis)

    def padded(self, factor: int) -> "Grid":
        """Same spacing, `factor` times the extent (refines the dual grid)."""
        if factor < 1:
            raise ValueError("pad factor must be >= 1")
        return Grid(self.dim, self.half_width * factor,
                    self.points_per_axis * factor)

    def embed(self, samples: np.ndarray, factor: int) -> np.ndarray:
        """Zero-extend samples from this grid onto self.padded(factor)."""
        samples = np.asarray(samples).reshape(self.shape)
        big = self.padded(factor)
        out = np.zeros(big.shape, dtype=samples.dtype)
        lo = (factor - 1) * self.points_per_axis // 2
        sl = tuple(slice(lo, lo + self.points_per_axis) for _ in range(self.dim))
        out[sl] = samples
        return out

    def restrict(self, samples: np.ndarray, factor: int) -> np.ndarray:
        """Inverse of `embed`: crop padded samples back to this grid."""
        samples = np.asarray(samples).reshape(self.padded(factor).shape)
        lo = (factor - 1) * self.points_per_axis // 2
        sl = tuple(slice(lo, lo + self.points_per_axis) for _ in range(self.dim))
        return samples[sl]


@dataclass(frozen=True)
class MultiIndex:
    """Non-negative derivative multi-index."""

    components: tuple

    def __post_init__(self):
        comps = tuple(int(c) for c in self.components)
        if any(c < 0 for c in comps):
            raise ValueError("multi-index components must be >= 0")
        object.__setattr__(self, "components", comps)

    @property
    def order(self) -> int:
        return sum(self.components)

    def __iter__(self):
        return iter(self.components)

    def __len__(self):
        return len(self.components)


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    residual: float

    def __post_init__(self):
        if self.residual < 0:
            raise ValueError("fit residual must be >= 0")


def quadrature_integral(grid: Grid, samples: np.ndarray) -> complex:
    """Midpoint-rule integral of samples over the grid box."""
    samples = np.asarray(samples)
    if samples.size == 0:
        raise ValueError("no samples to integrate")
    if samples.size != grid.size:
        raise ValueError(
            f"expected {grid.size} samples for {grid.shape} grid, got {samples.size}")
    return complex(grid.weight * samples.sum())


def _check_pow2(n: int):
    if n < 2 or (n & (n - 1)) != 0:
        raise ValueError(f"points_per_axis must be a power of two, got {n}")


def box_spectrum(starts: Sequence[float], spacings: Sequence[float],
                 values: np.ndarray, sign: int = -1) -> tuple:
    """Riemann-sum Fourier transform of samples on an arbitrary uniform box.

    The box has midpoint-offset points start_i + (k + 1/2)*spacing_i along
    each axis.  Returns (dual_starts, dual_spacings, transform) where

        transform[l] = prod(spacing) * sum_m values[m] * exp(sign*2*pi*i u_l . x_m)

    on the dual box with spacing 1/(M_i*spacing_i) and extent
    [-1/(2*spacing_i), 1/(2*spacing_i)), also midpoint-offset.  Exact (up to
    rounding) rewrite of the sum through one FFT per call.
    """
    if sign not in (-1, 1):
        raise ValueError("sign must be +1 or -1")
    values = np.asarray(values)
    ndim = values.ndim
    if len(starts) != ndim or len(spacings) != ndim:
        raise ValueError("starts/spacings must match values.ndim")

    work = values.astype(np.complex128, copy=True)
    dual_starts, dual_spacings = [], []
    for ax in range(ndim):
        M = values.shape[ax]
        d = float(spacings[ax])
        a = float(starts[ax])
        delta = 1.0 / (M * d)
        b = -0.5 / d
        eta0 = a + 0.5 * d
        m = np.arange(M)
        eta = a + (m + 0.5) * d
        # pre-phase: exp(s*2*pi*i*b*eta_m) * exp(s*pi*i*m/M)
        pre = np.exp(sign * 2j * np.pi * b * eta) * np.exp(sign * 1j * np.pi * m / M)
        # post-phase: exp(s*2*pi*i*(l+1/2)*delta*eta0)
        post = np.exp(sign * 2j * np.pi * (m + 0.5) * delta * eta0)
        shape = [1] * ndim
        shape[ax] = M
        work *= pre.reshape(shape)
        # fold the post phase in after the FFT along this axis
        if sign == -1:
            work = np.fft.fft(work, axis=ax)
        else:
            work = np.fft.ifft(work, axis=ax) * M
        work *= (d * post.reshape(shape))
        dual_starts.append(b)
        dual_spacings.append(delta)
    return dual_starts, dual_spacings, work


def dft(grid: Grid, samples: np.ndarray) -> np.ndarray:
    """Approximate continuous Fourier transform of grid samples.

    Returns values on grid.dual(), kernel exp(-2*pi*i x.xi), including the
    spacing**dim scaling and the midpoint-offset phase corrections.
    """
    _check_pow2(grid.points_per_axis)
    samples = np.asarray(samples).reshape(grid.shape)
    starts = [-grid.half_width] * grid.dim
    spacings = [grid.spacing] * grid.dim
    _, _, out = box_spectrum(starts, spacings, samples, sign=-1)
    return out


def idft(grid: Grid, spectrum: np.ndarray) -> np.ndarray:
    """Inverse of `dft`: spectrum lives on grid.dual(), result on grid."""
    _check_pow2(grid.points_per_axis)
    dual = grid.dual()
    spectrum = np.asarray(spectrum).reshape(dual.shape)
    starts = [-dual.half_width] * dual.dim
    spacings = [dual.spacing] * dual.dim
    _, _, out = box_spectrum(starts, spacings, spectrum, sign=+1)
    return out


# Central-difference stencils (offset -> coefficient), O(step^2) accurate.
_STENCILS = {
    1: ((-1, -0.5), (1, 0.5)),
    2: ((-1, 1.0), (0, -2.0), (1, 1.0)),
    3: ((-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)),
    4: ((-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)),
}


def default_fd_step(point: np.ndarray) -> float:
    """Step rule balancing truncation against rounding at |xi| up to 2**8."""
    point = np.asarray(point, dtype=float)
    return max(1e-3, 1e-3 * float(np.linalg.norm(point)))


def finite_difference(f: Callable, point, alpha, step: float | None = None):
    """Central-difference estimate of the mixed partial d^alpha f at point.

    Mixed indices are built by tensoring per-axis stencils, keeping the
    O(step^2) truncation order.  `alpha` may be a MultiIndex or a plain
    sequence of non-negative integers with per-axis order <= 4.
    """
    if not isinstance(alpha, MultiIndex):
        alpha = MultiIndex(tuple(alpha))
    if alpha.order > 4:
        raise ValueError("finite differences supported only for |alpha| <= 4")
    point = np.asarray(point, dtype=float)
    if len(alpha) != point.size:
        raise ValueError("alpha length must match point dimension")
    if step is None:
        step = default_fd_step(point)
    if step <= 0:
        raise ValueError("finite-difference step must be positive")

    offsets = [np.zeros(point.size)]
    coeffs = [1.0]
    for ax, order in enumerate(alpha):
        if order == 0:
            continue
        if order > 4:
            raise ValueError("per-axis derivative order must be <= 4")
        new_offsets, new_coeffs = [], []
        for off, c in zip(offsets, coeffs):
            for so, sc in _STENCILS[order]:
                shifted = off.copy()
                shifted[ax] += so * step
                new_offsets.append(shifted)
                new_coeffs.append(c * sc / step**order)
        offsets, coeffs = new_offsets, new_coeffs

    total = 0.0
    for off, c in zip(offsets, coeffs):
        total = total + c * f(point + off)
    return total


def fit_log2_slope(pairs) -> FitResult:
    """Least-squares line through (j, log2 value); slope is the dyadic rate."""
    pairs = list(pairs)
    if len(pairs) < 3:
        raise ValueError("need at least 3 (j, value) pairs to fit")
    js = np.array([float(j) for j, _ in pairs])
    vals = np.array([float(v) for _, v in pairs])
    if np.any(vals <= 0):
        raise ValueError("fit values must be positive")
    logs = np.log2(vals)
    slope, intercept = np.polyfit(js, logs, 1)
    resid = float(np.max(np.abs(logs - (slope * js + intercept))))
    return FitResult(float(slope), float(intercept), resid)
