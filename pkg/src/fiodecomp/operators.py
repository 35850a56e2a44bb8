"""Application of the oscillatory-integral operator and evaluation of its
decomposed kernels by direct quadrature.

Two evaluation paths coexist.  The general path samples the full phase
pointwise on a frequency box and must resolve every oscillation, so it is
gated by a sampling guard (at least four points per period across the
spatial box).  When the symbol is separable, sigma = beta(x) w(xi), and
the phase has shift structure, Phi = x.xi + psi(xi), the kernel of one
cone-annulus piece is beta(x) k(x - y) with k a fixed inverse transform;
that piece transform is computed once per (level, direction) on a rotated
bounding box of the cone support, and spatial integrals are taken on the
transform's own dual grid, which needs no interpolation.  The general
path doubles as the oracle for the fast one.

All reductions use numpy pairwise summation, so results are independent
of worker count and chunking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.fft import next_fast_len
from scipy.integrate import quad

from .geometry import Direction, build_direction_net, rotation_to_direction
from .numerics import Grid, box_spectrum, dft, fit_log2_slope, idft
from .partitions import ConePartition, delta_eval, radial_eval
from .symbols import Phase, Symbol

__all__ = [
    "ResolutionError",
    "FioSpec",
    "PieceSymbol",
    "KernelPiece",
    "apply_fio",
    "apply_fio_spectrum",
    "apply_band",
    "apply_piece",
    "kernel_eval",
    "convolution_kernel_oracle",
    "kernel_l1_in_x",
    "kernel_l1_difference",
    "multiplier_kernel",
    "multiplier_decay_check",
    "ttstar_kernel",
    "ttstar_decay_check",
]


class ResolutionError(RuntimeError):
    """A frequency grid is too coarse for the oscillation it must resolve."""


@dataclass(frozen=True)
class FioSpec:
    """Operator instance: symbol, phase, spatial grid, and band truncation.

    Frequencies are truncated to |xi|_inf <= 2**(j_max + 1), which is exact
    for decomposed pieces up to level j_max and an explicit approximation
    for full applications.
    """

    symbol: Symbol
    phase: Phase
    x_grid: Grid
    j_max: int
    xi_pad: int = 2

    def __post_init__(self):
        if self.j_max < 0:
            raise ValueError("j_max must be >= 0")
        if self.xi_pad < 1:
            raise ValueError("xi_pad must be >= 1")

    @property
    def dim(self) -> int:
        return self.x_grid.dim

    @property
    def xi_max(self) -> float:
        return 2.0 ** (self.j_max + 1)

    def direction_net(self, j: int):
        return build_direction_net(j, self.dim)

    def fast_path(self) -> bool:
        return (self.symbol.separable is not None
                and self.phase.xi_shift is not None)


@dataclass(frozen=True)
class PieceSymbol:
    """Amplitude of one cone-annulus piece: sigma * chi * radial."""

    spec: FioSpec
    level: int
    direction: Direction | None

    def xi_factor(self, xi: np.ndarray) -> np.ndarray:
        """Cone and radial cutoff product at frequency points (..., n)."""
        xi = np.asarray(xi, dtype=float)
        vals = radial_eval(self.level, xi)
        if self.direction is not None:
            net = self.spec.direction_net(self.level)
            part = ConePartition(net)
            idx = _direction_index(net, self.direction)
            flat = xi.reshape(-1, xi.shape[-1])
            mask = np.asarray(vals).reshape(-1) > 0
            chi_flat = np.zeros(flat.shape[0])
            if mask.any():
                chi_flat[mask] = part.chi(idx, flat[mask])
            vals = vals * chi_flat.reshape(np.shape(vals))
        return vals

    def __call__(self, x, xi):
        return self.spec.symbol.eval(x, xi) * self.xi_factor(np.asarray(xi, float))


@dataclass(frozen=True)
class KernelPiece:
    """Lazy kernel of one piece; evaluation is direct quadrature."""

    spec: FioSpec
    level: int
    direction: Direction
    ell: tuple | None = None

    def __call__(self, x, y) -> complex:
        return kernel_eval(self.spec, self.level, self.direction, x, y, self.ell)


def _direction_index(net, d: Direction) -> int:
    for k, cand in enumerate(net.directions):
        if cand.vector == d.vector:
            return k
    raise ValueError("direction does not belong to the level net")


def _check_band_reach(spec: FioSpec):
    reach = 1.0 / (2.0 * spec.x_grid.spacing)
    if reach < spec.xi_max - 1e-12:
        raise ResolutionError(
            f"grid spacing {spec.x_grid.spacing:g} reaches only |xi| <= "
            f"{reach:g}, below the band limit {spec.xi_max:g}")


def _boundary_check(spec: FioSpec, f: np.ndarray):
    g = spec.x_grid
    f = np.abs(np.asarray(f).reshape(g.shape))
    total = f.sum()
    if total == 0:
        return
    axis = np.abs(g.axis())
    shell1d = axis > 0.9 * g.half_width
    mask = np.zeros(g.shape, dtype=bool)
    for ax in range(g.dim):
        shape = [1] * g.dim
        shape[ax] = g.points_per_axis
        mask |= shell1d.reshape(shape)
    if f[mask].sum() > 1e-8 * total:
        raise ValueError(
            "input mass near the grid boundary exceeds 1e-8 of the total; "
            "enlarge the box or localize the input")


def _dual_points(grid: Grid) -> np.ndarray:
    dual = grid.dual()
    mesh = dual.meshgrid()
    return np.stack(mesh, axis=-1)


def _apply_fast(spec: FioSpec, f_hat: np.ndarray, grid: Grid,
                extra=None) -> np.ndarray:
    """Multiply the spectrum by the symbol's xi-part and phase factor,
    transform back, and window by beta.  `f_hat` lives on grid.dual()."""
    beta, w = spec.symbol.separable
    psi, _ = spec.phase.xi_shift
    pts = _dual_points(grid)
    inside = np.all(np.abs(pts) <= spec.xi_max, axis=-1)
    factor = np.where(inside, w(pts), 0.0) * np.exp(2j * np.pi * psi(pts))
    if extra is not None:
        factor = factor * extra(pts)
    out = idft(grid, f_hat * factor)
    return out


def _apply_direct(spec: FioSpec, f: np.ndarray, extra=None) -> np.ndarray:
    """Pointwise-phase application; cost O(x points * xi points)."""
    pad = max(spec.xi_pad, 4)
    grid = spec.x_grid
    big = grid.padded(pad)
    # sampling guard: >= 4 points per period of exp(2 pi i x.xi) across the box
    if big.dual().spacing > 1.0 / (4.0 * 2.0 * grid.half_width) + 1e-15:
        raise ResolutionError(
            "xi spacing violates the four-points-per-oscillation guard; "
            "increase xi_pad")
    f_hat = dft(big, grid.embed(np.asarray(f, complex), pad))
    pts = _dual_points(big)
    flat_pts = pts.reshape(-1, spec.dim)
    flat_hat = f_hat.reshape(-1)
    keep = np.all(np.abs(flat_pts) <= spec.xi_max, axis=-1)
    if extra is not None:
        ex = extra(flat_pts[keep])
        sub = ex != 0
        vals = flat_hat[keep][sub] * ex[sub]
        xi = flat_pts[keep][sub]
    else:
        vals = flat_hat[keep]
        xi = flat_pts[keep]
    weight = big.dual().weight
    xs = grid.points()
    out = np.empty(xs.shape[0], dtype=complex)
    chunk = max(1, int(2e7 // max(1, xi.shape[0])))
    for lo in range(0, xs.shape[0], chunk):
        blk = xs[lo:lo + chunk]
        phi = spec.phase.eval(blk[:, None, :], xi[None, :, :])
        sig = spec.symbol.eval(blk[:, None, :], xi[None, :, :])
        out[lo:lo + chunk] = np.sum(
            sig * np.exp(2j * np.pi * phi) * vals[None, :], axis=1) * weight
    return out.reshape(grid.shape)


def apply_fio(spec: FioSpec, f: np.ndarray, force_direct: bool = False) -> np.ndarray:
    """Apply the operator to samples on the spatial grid.

    The input must be localized away from the grid boundary (tail mass
    below 1e-8); its transform is taken on a pad-refined dual grid and
    truncated to the spec band.
    """
    _check_band_reach(spec)
    _boundary_check(spec, f)
    f = np.asarray(f, dtype=complex).reshape(spec.x_grid.shape)
    if spec.fast_path() and not force_direct:
        pad = spec.xi_pad
        big = spec.x_grid.padded(pad)
        f_hat = dft(big, spec.x_grid.embed(f, pad))
        out_pad = _apply_fast(spec, f_hat, big)
        out = spec.x_grid.restrict(out_pad, pad)
        beta = spec.symbol.separable[0]
        return out * beta(np.stack(spec.x_grid.meshgrid(), axis=-1))
    return _apply_direct(spec, f)


def apply_fio_spectrum(spec: FioSpec, f_hat: np.ndarray) -> np.ndarray:
    """Apply to a spectrum given directly on x_grid.dual() (band probes)."""
    _check_band_reach(spec)
    if not spec.fast_path():
        raise ResolutionError("spectrum application requires the fast path")
    f_hat = np.asarray(f_hat, dtype=complex).reshape(spec.x_grid.dual().shape)
    out = _apply_fast(spec, f_hat, spec.x_grid)
    beta = spec.symbol.separable[0]
    return out * beta(np.stack(spec.x_grid.meshgrid(), axis=-1))


def _band_factor(spec: FioSpec, j: int, v: Direction | None):
    if 2.0 ** (j + 1) > spec.xi_max + 1e-12:
        raise ResolutionError(
            f"level {j} annulus exceeds the xi truncation {spec.xi_max:g}")
    piece = PieceSymbol(spec, j, v)
    return piece.xi_factor


def apply_band(spec: FioSpec, j: int, f: np.ndarray,
               force_direct: bool = False) -> np.ndarray:
    """Apply the radial-annulus piece at level j (level 0 is the low pass)."""
    _boundary_check(spec, f)
    factor = _band_factor(spec, j, None)
    f = np.asarray(f, dtype=complex).reshape(spec.x_grid.shape)
    if spec.fast_path() and not force_direct:
        pad = spec.xi_pad
        big = spec.x_grid.padded(pad)
        f_hat = dft(big, spec.x_grid.embed(f, pad))
        out = spec.x_grid.restrict(_apply_fast(spec, f_hat, big, factor), pad)
        beta = spec.symbol.separable[0]
        return out * beta(np.stack(spec.x_grid.meshgrid(), axis=-1))
    return _apply_direct(spec, f, factor)


def apply_piece(spec: FioSpec, j: int, v: Direction, f: np.ndarray,
                force_direct: bool = False) -> np.ndarray:
    """Apply one cone-annulus piece at level j >= 1, direction v."""
    if j < 1:
        raise ValueError("cone pieces start at level 1; level 0 is apply_band")
    _boundary_check(spec, f)
    factor = _band_factor(spec, j, v)
    f = np.asarray(f, dtype=complex).reshape(spec.x_grid.shape)
    if spec.fast_path() and not force_direct:
        pad = spec.xi_pad
        big = spec.x_grid.padded(pad)
        f_hat = dft(big, spec.x_grid.embed(f, pad))
        out = spec.x_grid.restrict(_apply_fast(spec, f_hat, big, factor), pad)
        beta = spec.symbol.separable[0]
        return out * beta(np.stack(spec.x_grid.meshgrid(), axis=-1))
    return _apply_direct(spec, f, factor)


def _support_bbox(spec: FioSpec, j: int, v: Direction) -> tuple:
    """Unrotated per-axis bounds of the cone-annulus support, 5% padded."""
    n = spec.dim
    vv = v.array()
    c_live = math.sqrt(2.0 ** (-j - 3))
    dead_hat = 2.0 ** (1 - j / 2.0)
    r_lo, r_hi = 2.0 ** (j - 1), 2.0 ** (j + 1)
    los, his = [], []
    for i in range(n):
        if i in v.zero_set:
            lo, hi = -dead_hat * r_hi, dead_hat * r_hi
        else:
            cands = [r * (vv[i] + s * (c_live + dead_hat * (n - 1) * 0.0))
                     for r in (r_lo, r_hi) for s in (-1.0, 1.0)]
            # live unit coordinates can also drift by the dead budget
            slack = c_live + (0 if not v.zero_set else dead_hat)
            cands = [r * (vv[i] + s * slack) for r in (r_lo, r_hi)
                     for s in (-1.0, 1.0)]
            lo, hi = min(cands), max(cands)
        pad = 0.05 * (hi - lo)
        los.append(lo - pad)
        his.append(hi + pad)
    return np.array(los), np.array(his)


def kernel_eval(spec: FioSpec, j: int, v: Direction, x, y,
                ell=None, max_points: float = 4e7) -> complex:
    """Direct quadrature of one piece kernel at a single (x, y) pair.

    The frequency box is the unrotated bounding box of the piece support;
    spacing resolves the phase gradient range (four points per period).
    """
    if j < 1:
        raise ValueError("kernel pieces start at level 1")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = spec.dim
    los, his = _support_bbox(spec, j, v)
    # oscillation rate: sup |Phi_xi(x, xi) - y| over the support directions
    probes = np.vstack([v.array() * r for r in (2.0 ** (j - 1), 2.0 ** (j + 1))])
    rate = float(np.max(np.linalg.norm(
        spec.phase.grad_xi(x, probes) - y, axis=-1))) + 1.0
    step = 1.0 / (4.0 * rate)
    counts = [int(math.ceil((hi - lo) / step)) for lo, hi in zip(los, his)]
    if float(np.prod(counts)) > max_points:
        raise ResolutionError(
            f"kernel quadrature needs {np.prod(counts):.2e} points; "
            f"above the {max_points:.0e} cap")
    axes = [lo + (np.arange(c) + 0.5) * (hi - lo) / c
            for lo, hi, c in zip(los, his, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    xi = np.stack([m.ravel() for m in mesh], axis=-1)
    weight = float(np.prod([(hi - lo) / c for lo, hi, c in zip(los, his, counts)]))

    piece = PieceSymbol(spec, j, v)
    cut = piece.xi_factor(xi)
    live = cut > 0
    if not live.any():
        return 0.0 + 0.0j
    xi = xi[live]
    cut = cut[live]
    if ell is not None:
        cut = cut * delta_eval(j, ell, xi)
        live2 = cut > 0
        xi, cut = xi[live2], cut[live2]
        if xi.size == 0:
            return 0.0 + 0.0j
    amp = spec.symbol.eval(x, xi) * cut
    phase = spec.phase.eval(x, xi) - xi @ y
    return complex(np.sum(amp * np.exp(2j * np.pi * phase)) * weight)


def convolution_kernel_oracle(spec: FioSpec, j: int, v: Direction,
                              grid: Grid) -> np.ndarray:
    """Independent oracle for shift-structure kernels: inverse transform of
    the piece multiplier on a centered frequency grid.

    For sigma with xi-part w and Phi = x.xi + psi, the piece kernel is
    beta(x) k(x - y) where k is returned here on `grid`.
    """
    if not spec.fast_path():
        raise ValueError("oracle applies to shift-structure phases only")
    dual = grid.dual()
    pts = np.stack(dual.meshgrid(), axis=-1)
    w = spec.symbol.separable[1]
    psi = spec.phase.xi_shift[0]
    piece = PieceSymbol(spec, j, v)
    vals = piece.xi_factor(pts) * w(pts) * np.exp(2j * np.pi * psi(pts))
    return idft(grid, vals)


# ---------------------------------------------------------------------------
# fast kernel transforms on the rotated support box


@dataclass
class KernelTransform:
    """One piece's convolution factor k, tabulated in rotated coordinates.

    `values[l]` approximates k_rot(u_l) on the dual box of the rotated
    frequency box; x-integrals of |beta(x) k(x-y)| are Riemann sums over
    that dual box directly (x = y + A u)."""

    level: int
    rotation: np.ndarray
    dual_starts: list
    dual_spacings: list
    values: np.ndarray

    def dual_axes(self) -> list:
        return [s + (np.arange(m) + 0.5) * d for s, d, m in
                zip(self.dual_starts, self.dual_spacings, self.values.shape)]

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.dual_spacings))


def _rotated_box(spec: FioSpec, j: int, v: Direction) -> tuple:
    """Per-axis (start, width) of the piece support in rotated coordinates."""
    n = spec.dim
    m_live = len(v.live_axes)
    lo = [0.8 * 2.0 ** (j - 1)]
    hi = [1.02 * 2.0 ** (j + 1)]
    trans = 1.05 * 2.0 ** ((j - 1) / 2.0)
    dead = 1.05 * 2.0 ** (j / 2.0 + 2)
    for _ in range(m_live - 1):
        lo.append(-trans)
        hi.append(trans)
    for _ in range(n - m_live):
        lo.append(-dead)
        hi.append(dead)
    return np.array(lo), np.array(hi)


def kernel_transform(spec: FioSpec, j: int, v: Direction,
                     u_extent: float, pad: int = 4,
                     modulation: np.ndarray | None = None,
                     ell=None) -> KernelTransform:
    """Tabulate the rotated convolution factor of one piece.

    u_extent sets the aliasing margin: the dual box reaches +-u_extent, so
    every x with |A^T (x - y)| below that is alias-free up to the kernel's
    far tail.  `modulation` optionally multiplies the integrand by
    exp(2 pi i d.eta) to tabulate k at points shifted by d.
    """
    if not spec.fast_path():
        raise ResolutionError("kernel transforms need the separable fast path")
    if j < 1:
        raise ValueError("kernel pieces start at level 1")
    a_mat = rotation_to_direction(v)
    los, his = _rotated_box(spec, j, v)
    step = 1.0 / (2.0 * u_extent)
    counts = [int(math.ceil((h - l) / step)) for l, h in zip(los, his)]
    padded = [next_fast_len(pad * c) for c in counts]

    axes = [lo + (np.arange(c) + 0.5) * step for lo, c in zip(los, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    eta = np.stack(mesh, axis=-1)
    xi = eta @ a_mat.T

    w = spec.symbol.separable[1]
    psi = spec.phase.xi_shift[0]
    piece = PieceSymbol(spec, j, v)
    g = piece.xi_factor(xi).astype(complex)
    live = g != 0
    if live.any():
        g[live] *= w(xi[live]) * np.exp(2j * np.pi * psi(xi[live]))
    if ell is not None:
        g *= delta_eval(j, ell, xi)
    if modulation is not None:
        g *= np.exp(2j * np.pi * (eta @ np.asarray(modulation, float)))

    full = np.zeros(padded, dtype=complex)
    full[tuple(slice(0, c) for c in counts)] = g
    dstarts, dspac, vals = box_spectrum(los, [step] * spec.dim, full, sign=+1)
    return KernelTransform(j, a_mat, dstarts, dspac, vals)


def _beta_on_dual(spec: FioSpec, kt: KernelTransform, y: np.ndarray):
    """|beta| at x = y + A u over the transform's dual box, chunked."""
    beta = spec.symbol.separable[0]
    axes = kt.dual_axes()
    n = spec.dim
    shape = kt.values.shape
    out = np.empty(shape)
    chunk = max(1, int(4e6 // int(np.prod(shape[1:]))))
    rest = np.meshgrid(*axes[1:], indexing="ij") if n > 1 else []
    for lo in range(0, shape[0], chunk):
        u0 = axes[0][lo:lo + chunk]
        blocks = [np.broadcast_to(u0[(slice(None),) + (None,) * (n - 1)],
                                  (len(u0),) + shape[1:])]
        for r in rest:
            blocks.append(np.broadcast_to(r[None], (len(u0),) + shape[1:]))
        u = np.stack(blocks, axis=-1)
        x = y + u @ kt.rotation.T
        out[lo:lo + chunk] = np.abs(beta(x))
    return out


def _default_u_extent(spec: FioSpec, y: np.ndarray) -> float:
    return (spec.symbol.x_support_radius * math.sqrt(spec.dim)
            + float(np.linalg.norm(y)) + 2.0)


def kernel_l1_in_x(spec: FioSpec, j: int, v: Direction, y,
                   keep_mask=None, pad: int = 4) -> float:
    """Integral over x of |K_j^v(x, y)| by the rotated-transform path.

    `keep_mask`, when given, maps x points (P, n) to a boolean keep array
    (used to restrict the integral to the complement of an exceptional
    set)."""
    y = np.asarray(y, dtype=float)
    kt = kernel_transform(spec, j, v, _default_u_extent(spec, y), pad)
    beta_abs = _beta_on_dual(spec, kt, y)
    mag = np.abs(kt.values)
    if keep_mask is not None:
        axes = kt.dual_axes()
        mesh = np.meshgrid(*axes, indexing="ij")
        u = np.stack(mesh, axis=-1)
        x = y + u @ kt.rotation.T
        relevant = (mag * beta_abs) > 1e-18 * float(mag.max())
        keep = np.ones(mag.shape, dtype=bool)
        if relevant.any():
            sel = keep_mask(x[relevant].reshape(-1, spec.dim))
            keep[relevant] = sel.reshape(keep[relevant].shape)
        mag = np.where(keep, mag, 0.0)
    return float(np.sum(mag * beta_abs) * kt.cell_volume)


def kernel_l1_difference(spec: FioSpec, j: int, v: Direction, y, y_prime,
                         pad: int = 4) -> float:
    """Integral over x of |K(x, y) - K(x, y')| via a modulated transform."""
    y = np.asarray(y, dtype=float)
    y_prime = np.asarray(y_prime, dtype=float)
    a_mat = rotation_to_direction(v)
    d = a_mat.T @ (y - y_prime)
    extent = _default_u_extent(spec, y) + float(np.linalg.norm(y - y_prime))
    kt = kernel_transform(spec, j, v, extent, pad)
    kt_shift = kernel_transform(spec, j, v, extent, pad, modulation=d)
    beta_abs = _beta_on_dual(spec, kt, y)
    return float(np.sum(np.abs(kt.values - kt_shift.values) * beta_abs)
                 * kt.cell_volume)


def kernel_l1_direct(spec: FioSpec, j: int, v: Direction, y) -> float:
    """Oracle-grade L1-in-x by per-point direct quadrature on the spatial
    grid; only viable at small levels."""
    xs = spec.x_grid.points()
    beta_support = spec.symbol.x_support_radius
    vals = np.zeros(xs.shape[0])
    for i, x in enumerate(xs):
        if np.max(np.abs(x)) > beta_support:
            continue
        vals[i] = abs(kernel_eval(spec, j, v, x, y))
    return float(vals.sum() * spec.x_grid.weight)


# ---------------------------------------------------------------------------
# auxiliary kernels


def multiplier_kernel(m: float, z, n: int) -> float:
    """Convolution kernel of (1 + |xi|^2)^(m/2) at z != 0, for -n < m < 0.

    Computed through the subordination integral
    K(z) = pi^(n/2)/Gamma(-m/2) * int_0^inf t^((-m-n)/2 - 1) e^-t
           e^(-pi^2 |z|^2 / t) dt,
    a smooth positive one-dimensional integrand handled by adaptive
    quadrature.
    """
    if not -n < m < 0:
        raise ValueError("multiplier order must satisfy -n < m < 0")
    r = float(np.linalg.norm(np.asarray(z, dtype=float)))
    if r == 0:
        raise ValueError("multiplier kernel is singular at z = 0")
    alpha = -m
    c = math.pi ** (n / 2) / math.gamma(alpha / 2)

    def integrand(t):
        return t ** ((alpha - n) / 2 - 1) * math.exp(-t - math.pi**2 * r**2 / t)

    val, _ = quad(integrand, 0, np.inf, limit=200)
    return c * val


def multiplier_decay_check(m: float, n: int, lo: float = 2.0**-6,
                           hi: float = 2.0**-1, count: int = 12) -> dict:
    """Fit log2 |K| against log2 |z|; the expected slope is -(n + m)."""
    radii = np.exp(np.linspace(math.log(lo), math.log(hi), count))
    vals = [multiplier_kernel(m, np.array([r] + [0.0] * (n - 1)), n)
            for r in radii]
    fit = fit_log2_slope(list(zip(np.log2(radii), vals)))
    return {"fit": fit, "target": -(n + m), "radii": radii.tolist(),
            "values": vals}


def ttstar_kernel(spec: FioSpec, xi, eta) -> complex:
    """x-quadrature of the normal-operator kernel
    int sigma(x, eta) conj(sigma(x, xi)) e^(2 pi i (Phi(x,eta) - Phi(x,xi))) dx."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    xs = spec.x_grid.points()
    amp = (spec.symbol.eval(xs, eta[None, :])
           * np.conj(spec.symbol.eval(xs, xi[None, :])))
    ph = spec.phase.eval(xs, eta[None, :]) - spec.phase.eval(xs, xi[None, :])
    return complex(np.sum(amp * np.exp(2j * np.pi * ph)) * spec.x_grid.weight)


def ttstar_decay_check(spec: FioSpec, j: int, v: Direction,
                       count: int = 10) -> dict:
    """Decay of |K_sharp| along the cone axis at |xi| ~ 2^j.

    Offsets run over [1, 2^(j/2)]; returns the diagonal value, the decay
    fit, and the far-point ratio."""
    if j < 4:
        raise ValueError("narrow-cone composition checks need level >= 4")
    vv = v.array()
    base = 2.0**j * vv
    diag = abs(ttstar_kernel(spec, base, base))
    offs = 2.0 ** np.linspace(0, j / 2.0, count)
    vals = [abs(ttstar_kernel(spec, base, (2.0**j + t) * vv)) for t in offs]
    fit = fit_log2_slope([(math.log2(t), max(val, 1e-300))
                          for t, val in zip(offs, vals)])
    return {"diagonal": diag, "offsets": offs.tolist(), "values": vals,
            "fit": fit, "far_ratio": vals[-1] / diag}
