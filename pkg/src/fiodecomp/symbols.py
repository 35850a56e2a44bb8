"""Symbol and phase oracles with numerical class-membership checkers.

Membership in a derivative-decay class cannot be decided by sampling, so
the checkers use an operational proxy: per-annulus sup of the ratio
|derivative| / majorant over dyadic frequency annuli, with a verdict of
"fail" when the fitted log2 slope of those constants exceeds a small
threshold.  Reports record the constants, the worst sample point, and
whether derivatives came from analytic oracles or finite differences.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .numerics import _STENCILS, fit_log2_slope
from .partitions import bump_d1, bump_d2, bump_eval

__all__ = [
    "Symbol",
    "Phase",
    "CellCheck",
    "ClassReport",
    "PhaseReport",
    "ClassCheckConfig",
    "tensor_bump",
    "sigma_order",
    "sigma_tilde",
    "phase_flat",
    "phase_shift",
    "phase_halfwave",
    "phase_curved",
    "make_symbol",
    "make_phase",
    "BUILTIN_SYMBOLS",
    "BUILTIN_PHASES",
    "check_class_S",
    "check_class_product",
    "check_phase",
    "narrow_cone_separation",
]


@dataclass
class Symbol:
    """Amplitude oracle sigma(x, xi) with declared order and x-support.

    `separable` carries (beta, w) with sigma = beta(x) * w(xi) when that
    structure exists; `derivative` is an optional analytic oracle for
    mixed partials d^alpha_xi d^beta_x sigma.
    """

    name: str
    eval: Callable
    order: float
    x_support_radius: float
    product_class_claimed: bool = False
    separable: tuple | None = None
    derivative: Callable | None = None
    params: dict = field(default_factory=dict)

    def __call__(self, x, xi):
        return self.eval(x, xi)


@dataclass
class Phase:
    """Real phase oracle, homogeneous of degree one in xi.

    `xi_shift` carries (psi, grad_psi) when Phi = x.xi + psi(xi), the
    structure that makes operator application translation-covariant.
    """

    name: str
    eval: Callable
    grad_x: Callable
    grad_xi: Callable
    xi_shift: tuple | None = None
    params: dict = field(default_factory=dict)

    def __call__(self, x, xi):
        return self.eval(x, xi)


def tensor_bump(scale: float = 1.0) -> Callable:
    """Tensor-product bump of the partition module's phi, plateau radius
    `scale`, support radius 2*scale."""

    def beta(x):
        x = np.asarray(x, dtype=float)
        return np.prod(bump_eval(x / scale), axis=-1)

    return beta


def _beta_derivative(x, beta_idx, scale):
    """Mixed x-derivative of the tensor bump, analytic per axis."""
    x = np.asarray(x, dtype=float)
    out = np.ones(x.shape[:-1])
    funcs = {0: bump_eval, 1: bump_d1, 2: bump_d2}
    for i, k in enumerate(beta_idx):
        if k > 2:
            raise ValueError("analytic bump derivatives stop at order 2")
        out = out * funcs[k](x[..., i] / scale) / scale**k
    return out


def _w_order_derivative(xi, alpha, m):
    """d^alpha of (1 + |xi|^2)^(m/2), orders |alpha| <= 2."""
    xi = np.asarray(xi, dtype=float)
    q = 1.0 + np.sum(xi**2, axis=-1)
    order = sum(alpha)
    if order == 0:
        return q ** (m / 2)
    axes = [i for i, a in enumerate(alpha) for _ in range(a)]
    if order == 1:
        (i,) = axes
        return m * xi[..., i] * q ** (m / 2 - 1)
    if order == 2:
        i, k = axes
        out = m * (m - 2) * xi[..., i] * xi[..., k] * q ** (m / 2 - 2)
        if i == k:
            out = out + m * q ** (m / 2 - 1)
        return out
    raise ValueError("analytic order-symbol derivatives stop at |alpha| = 2")


def sigma_order(m: float, scale: float = 1.0) -> Symbol:
    """beta(x) * (1 + |xi|^2)^(m/2): the canonical order-m symbol."""
    beta = tensor_bump(scale)

    def ev(x, xi):
        xi = np.asarray(xi, dtype=float)
        return beta(x) * (1.0 + np.sum(xi**2, axis=-1)) ** (m / 2)

    def deriv(x, xi, alpha, beta_idx):
        return (_beta_derivative(x, beta_idx, scale)
                * _w_order_derivative(xi, alpha, m))

    def w(xi):
        xi = np.asarray(xi, dtype=float)
        return (1.0 + np.sum(xi**2, axis=-1)) ** (m / 2)

    return Symbol("sigma_order", ev, m, 2.0 * scale, product_class_claimed=True,
                  separable=(beta, w), derivative=deriv,
                  params={"m": m, "scale": scale})


def _g_factor_derivative(xi, k):
    """d^k/d xi_1^k of xi_1^2 / (1 + xi_1^2), k <= 2."""
    t = np.asarray(xi, dtype=float)[..., 0]
    q = 1.0 + t**2
    if k == 0:
        return t**2 / q
    if k == 1:
        return 2.0 * t / q**2
    if k == 2:
        return (2.0 - 6.0 * t**2) / q**3
    raise ValueError("separating-factor derivatives stop at order 2")


def sigma_tilde(m: float, scale: float = 1.0) -> Symbol:
    """sigma_order(m) times xi_1^2/(1 + xi_1^2): the separating example
    that keeps the product-structure decay but breaks the isotropic one."""
    base = sigma_order(m, scale)
    beta, w_base = base.separable

    def ev(x, xi):
        return base.eval(x, xi) * _g_factor_derivative(xi, 0)

    def deriv(x, xi, alpha, beta_idx):
        alpha = tuple(alpha)
        a1 = alpha[0]
        rest = (0,) + alpha[1:]
        total = 0.0
        for k in range(a1 + 1):
            split = (a1 - k,) + alpha[1:]
            total = total + (math.comb(a1, k)
                             * _w_order_derivative(xi, split, m)
                             * _g_factor_derivative(xi, k))
        return _beta_derivative(x, beta_idx, scale) * total

    def w(xi):
        return w_base(xi) * _g_factor_derivative(xi, 0)

    return Symbol("sigma_tilde", ev, m, 2.0 * scale, product_class_claimed=True,
                  separable=(beta, w), derivative=deriv,
                  params={"m": m, "scale": scale})


def phase_flat() -> Phase:
    def ev(x, xi):
        return np.sum(np.asarray(x, float) * np.asarray(xi, float), axis=-1)

    def gx(x, xi):
        x, xi = np.broadcast_arrays(np.asarray(x, float), np.asarray(xi, float))
        return xi.copy()

    def gxi(x, xi):
        x, xi = np.broadcast_arrays(np.asarray(x, float), np.asarray(xi, float))
        return x.copy()

    return Phase("phase_flat", ev, gx, gxi,
                 xi_shift=(lambda xi: np.zeros(np.asarray(xi).shape[:-1]),
                           lambda xi: np.zeros_like(np.asarray(xi, float))))


def phase_shift(z0) -> Phase:
    z0 = np.asarray(z0, dtype=float)

    def ev(x, xi):
        xi = np.asarray(xi, float)
        return np.sum((np.asarray(x, float) + z0) * xi, axis=-1)

    def gx(x, xi):
        x, xi = np.broadcast_arrays(np.asarray(x, float), np.asarray(xi, float))
        return xi.copy()

    def gxi(x, xi):
        x, xi = np.broadcast_arrays(np.asarray(x, float), np.asarray(xi, float))
        return x + z0

    return Phase("phase_shift", ev, gx, gxi,
                 xi_shift=(lambda xi: np.sum(z0 * np.asarray(xi, float), axis=-1),
                           lambda xi: np.broadcast_to(
                               z0, np.asarray(xi).shape).copy()),
                 params={"z0": tuple(z0)})


def phase_halfwave() -> Phase:
    """x.xi + |xi|: the stationary-wave model phase."""

    def ev(x, xi):
        xi = np.asarray(xi, float)
        return (np.sum(np.asarray(x, float) * xi, axis=-1)
                + np.linalg.norm(xi, axis=-1))

    def gx(x, xi):
        x, xi = np.broadcast_arrays(np.asarray(x, float), np.asarray(xi, float))
        return xi.copy()

    def gxi(x, xi):
        x, xi = np.broadcast_arrays(np.asarray(x, float), np.asarray(xi, float))
        norm = np.linalg.norm(xi, axis=-1, keepdims=True)
        return x + xi / norm

    return Phase("phase_halfwave", ev, gx, gxi,
                 xi_shift=(lambda xi: np.linalg.norm(np.asarray(xi, float), axis=-1),
                           lambda xi: (lambda a: a / np.linalg.norm(
                               a, axis=-1, keepdims=True))(np.asarray(xi, float))))


def phase_curved(amp: float = 0.1) -> Phase:
    """x.xi + amp*sin(x_1)*|xi|: curved x-dependence, no shift structure."""

    def ev(x, xi):
        x = np.asarray(x, float)
        xi = np.asarray(xi, float)
        return (np.sum(x * xi, axis=-1)
                + amp * np.sin(x[..., 0]) * np.linalg.norm(xi, axis=-1))

    def gx(x, xi):
        x, xi = np.broadcast_arrays(np.asarray(x, float), np.asarray(xi, float))
        out = xi.copy()
        out[..., 0] += amp * np.cos(x[..., 0]) * np.linalg.norm(xi, axis=-1)
        return out

    def gxi(x, xi):
        x, xi = np.broadcast_arrays(np.asarray(x, float), np.asarray(xi, float))
        norm = np.linalg.norm(xi, axis=-1, keepdims=True)
        return x + amp * np.sin(x[..., :1]) * xi / norm

    return Phase("phase_curved", ev, gx, gxi, params={"amp": amp})


BUILTIN_SYMBOLS = {"sigma_order": sigma_order, "sigma_tilde": sigma_tilde}
BUILTIN_PHASES = {
    "phase_flat": phase_flat,
    "phase_shift": phase_shift,
    "phase_halfwave": phase_halfwave,
    "phase_curved": phase_curved,
}


def make_symbol(name: str, **params) -> Symbol:
    if name not in BUILTIN_SYMBOLS:
        raise ValueError(f"unknown symbol '{name}'")
    return BUILTIN_SYMBOLS[name](**params)


def make_phase(name: str, **params) -> Phase:
    if name not in BUILTIN_PHASES:
        raise ValueError(f"unknown phase '{name}'")
    return BUILTIN_PHASES[name](**params)


def _fd_mixed(fn: Callable, x, xi, alpha, beta_idx, step_x, step_xi):
    """Vectorized central-difference mixed partial of fn(x, xi)."""
    offsets = [(np.zeros(len(beta_idx)), np.zeros(len(alpha)), 1.0)]
    for ax, order in enumerate(beta_idx):
        if order == 0:
            continue
        new = []
        for ox, oxi, c in offsets:
            for so, sc in _STENCILS[order]:
                o2 = ox.copy()
                o2[ax] += so * step_x
                new.append((o2, oxi, c * sc / step_x**order))
        offsets = new
    for ax, order in enumerate(alpha):
        if order == 0:
            continue
        new = []
        for ox, oxi, c in offsets:
            for so, sc in _STENCILS[order]:
                o2 = oxi.copy()
                o2[ax] += so * step_xi
                new.append((ox, o2, c * sc / step_xi**order))
        offsets = new
    total = 0.0
    for ox, oxi, c in offsets:
        total = total + c * fn(x + ox, xi + oxi)
    return total


@dataclass
class ClassCheckConfig:
    max_annulus: int = 8
    dirs_per_annulus: int = 24
    radii_per_annulus: int = 3
    x_samples: int = 6
    seed: int = 0
    slope_tol: float = 0.1
    negligible: float = 1e-13


@dataclass
class CellCheck:
    alpha: tuple
    beta: tuple
    constants: list
    slope: float | None
    worst_point: tuple | None
    method: str
    passed: bool


@dataclass
class ClassReport:
    kind: str
    symbol: str
    declared_order: float
    cells: dict
    passed: bool
    config: ClassCheckConfig

    def first_violation(self):
        for key, cell in self.cells.items():
            if not cell.passed:
                return key, cell
        return None

    def violating_cells(self):
        return [c for c in self.cells.values() if not c.passed]


def _multi_indices(n: int, max_order: int):
    out = []
    for total in range(max_order + 1):
        for comb in itertools.product(range(total + 1), repeat=n):
            if sum(comb) == total:
                out.append(comb)
    return out


def _annulus_points(n: int, k: int, cfg: ClassCheckConfig, rng) -> np.ndarray:
    """Sample points with 2^k <= |xi| <= 2^(k+1): random directions plus
    axis-hugging probes with one coordinate pinned at +-1, +-2 (the spots
    where product-structure and isotropic decay differ)."""
    radii = 2.0**k * 2.0 ** np.linspace(0.05, 0.95, cfg.radii_per_annulus)
    dirs = rng.normal(size=(cfg.dirs_per_annulus, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pts = (dirs[None, :, :] * radii[:, None, None]).reshape(-1, n)
    specials = []
    for r in radii:
        for i in range(n):
            for c in (1.0, -1.0, 2.0, -2.0):
                if r**2 <= c**2:
                    continue
                for kx in range(n):
                    if kx == i:
                        continue
                    p = np.zeros(n)
                    p[i] = c
                    p[kx] = math.sqrt(r**2 - c**2)
                    specials.append(p)
    if specials:
        pts = np.vstack([pts, np.array(specials)])
    return pts


def _class_check(sym: Symbol, m: float, n: int, max_order: int,
                 majorant: Callable, kind: str,
                 cfg: ClassCheckConfig) -> ClassReport:
    if max_order > 2:
        raise ValueError("class checks are capped at derivative order 2")
    rng = np.random.default_rng(cfg.seed)
    xs = rng.uniform(-sym.x_support_radius, sym.x_support_radius,
                     size=(cfg.x_samples, n))
    xs = np.vstack([xs, np.zeros(n)])
    method = "analytic" if sym.derivative is not None else "finite-difference"

    cells = {}
    all_pass = True
    for alpha in _multi_indices(n, max_order):
        for beta_idx in _multi_indices(n, max_order):
            constants, worst = [], None
            worst_val = -1.0
            for k in range(cfg.max_annulus + 1):
                xi = _annulus_points(n, k, cfg, rng)
                X = xs[:, None, :]
                Xi = np.broadcast_to(xi[None, :, :], (xs.shape[0],) + xi.shape)
                if sym.derivative is not None:
                    dval = sym.derivative(X, Xi, alpha, beta_idx)
                else:
                    step_xi = max(1e-3, 1e-3 * 2.0**k)
                    dval = _fd_mixed(sym.eval, X, Xi, alpha, beta_idx,
                                     1e-3, step_xi)
                ratio = np.abs(dval) / majorant(xi, alpha)[None, :]
                c_k = float(ratio.max())
                constants.append(c_k)
                if c_k > worst_val:
                    worst_val = c_k
                    ix, ixi = np.unravel_index(int(ratio.argmax()), ratio.shape)
                    worst = (tuple(xs[ix]), tuple(xi[ixi]))
            top = max(constants)
            if top <= cfg.negligible:
                cell = CellCheck(alpha, beta_idx, constants, None, worst,
                                 method, True)
            else:
                floor = max(cfg.negligible, 1e-9 * top)
                fit = fit_log2_slope([(k, max(c, floor))
                                      for k, c in enumerate(constants)])
                cell = CellCheck(alpha, beta_idx, constants, fit.slope, worst,
                                 method, fit.slope <= cfg.slope_tol)
            cells[(alpha, beta_idx)] = cell
            all_pass &= cell.passed
    return ClassReport(kind, sym.name, m, cells, all_pass, cfg)


def check_class_S(sym: Symbol, m: float, n: int, max_order: int = 2,
                  cfg: ClassCheckConfig | None = None) -> ClassReport:
    """Isotropic decay check: majorant (1 + |xi|)^(m - |alpha|)."""
    cfg = cfg or ClassCheckConfig()

    def majorant(xi, alpha):
        return (1.0 + np.linalg.norm(xi, axis=-1)) ** (m - sum(alpha))

    return _class_check(sym, m, n, max_order, majorant, "S", cfg)


def check_class_product(sym: Symbol, m: float, n: int, max_order: int = 2,
                        cfg: ClassCheckConfig | None = None) -> ClassReport:
    """Product-structure decay check: majorant
    (1 + |xi|)^m * prod_i (1 + |xi_i|)^(-alpha_i)."""
    cfg = cfg or ClassCheckConfig()

    def majorant(xi, alpha):
        out = (1.0 + np.linalg.norm(xi, axis=-1)) ** m
        for i, a in enumerate(alpha):
            if a:
                out = out / (1.0 + np.abs(xi[..., i])) ** a
        return out

    return _class_check(sym, m, n, max_order, majorant, "product", cfg)


@dataclass
class PhaseReport:
    ok: bool
    min_det: float
    max_homogeneity_err: float
    max_euler_err: float
    failed_hypotheses: list


def _mixed_hessian(phase: Phase, x: np.ndarray, xi: np.ndarray,
                   step: float) -> np.ndarray:
    """d^2 Phi / dx_i dxi_j via central differences of grad_x in xi."""
    n = x.shape[-1]
    cols = []
    for jax in range(n):
        e = np.zeros(n)
        e[jax] = step
        cols.append((phase.grad_x(x, xi + e) - phase.grad_x(x, xi - e))
                    / (2 * step))
    return np.stack(cols, axis=-1)  # (..., i, j)


def check_phase(phase: Phase, n: int, eps0: float = 1e-3,
                samples: int = 200, seed: int = 0,
                x_half_width: float = 2.0) -> PhaseReport:
    """Verify homogeneity, the Euler identity, and nondegeneracy of the
    mixed Hessian on sampled (x, xi) with |xi| bounded away from 0."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-x_half_width, x_half_width, size=(samples, n))
    u = rng.normal(size=(samples, n))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    radii = 2.0 ** rng.uniform(0, 6, size=(samples, 1))
    xi = u * radii

    failed = []
    phi = phase.eval(x, xi)
    hom_err = 0.0
    for delta in (0.5, 2.0):
        lhs = phase.eval(x, delta * xi)
        err = np.max(np.abs(lhs - delta * phi) / (1.0 + np.abs(delta * phi)))
        hom_err = max(hom_err, float(err))
    if hom_err > 1e-8:
        failed.append("homogeneity")

    euler = np.sum(phase.grad_xi(x, xi) * xi, axis=-1) - phi
    euler_err = float(np.max(np.abs(euler) / (1.0 + np.abs(phi))))
    if euler_err > 1e-8:
        failed.append("euler-identity")

    hess = _mixed_hessian(phase, x, u, 1e-4)
    dets = np.abs(np.linalg.det(hess))
    min_det = float(dets.min())
    if min_det < eps0:
        failed.append("nondegeneracy")

    return PhaseReport(not failed, min_det, hom_err, euler_err, failed)


def narrow_cone_separation(phase: Phase, direction, samples: int = 200,
                           seed: int = 0, x_half_width: float = 2.0) -> float:
    """Sampled lower constant in |grad_x(Phi(x,xi) - Phi(x,eta))| >= C|xi - eta|
    for xi, eta in the cone of `direction` at its level."""
    rng = np.random.default_rng(seed)
    j = direction.level
    v = direction.array()
    n = v.size
    width = math.sqrt(2.0 ** (-j - 3))

    def cone_points(count):
        pert = rng.normal(size=(count, n))
        pert -= (pert @ v)[:, None] * v
        norms = np.linalg.norm(pert, axis=1, keepdims=True)
        pert = pert / np.maximum(norms, 1e-30) * (
            width * rng.uniform(0, 0.9, size=(count, 1)))
        u = v + pert
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        r = 2.0**j * 2.0 ** rng.uniform(-0.9, 0.9, size=(count, 1))
        return u * r

    xi = cone_points(samples)
    eta = cone_points(samples)
    x = rng.uniform(-x_half_width, x_half_width, size=(samples, n))
    diff = phase.grad_x(x, xi) - phase.grad_x(x, eta)
    num = np.linalg.norm(diff, axis=-1)
    den = np.linalg.norm(xi - eta, axis=-1)
    keep = den > 1e-9
    return float(np.min(num[keep] / den[keep]))
