"""Smooth cutoff machinery: the compactly supported bump, direction-cone
cutoffs normalized into a partition of unity on the sphere, radial dyadic
annulus pieces, and per-coordinate product dyadic pieces.

All cutoffs are built from one bump phi with phi = 1 on [-1, 1], phi = 0
outside (-2, 2), realized as s(2-|t|) / (s(2-|t|) + s(|t|-1)) with
s(u) = exp(-1/u) for u > 0.  The symmetric construction gives
phi(1.5) = 1/2 exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .geometry import Direction, DirectionNet

__all__ = [
    "NetCoveringError",
    "bump_eval",
    "bump_d1",
    "bump_d2",
    "eta_eval",
    "chi_eval",
    "ConePartition",
    "radial_eval",
    "phi_lj",
    "delta_eval",
]


class NetCoveringError(RuntimeError):
    """The cone-cutoff denominator vanished: the net fails to cover."""


def _s(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u > 0
    with np.errstate(over="ignore", under="ignore", divide="ignore"):
        out[pos] = np.exp(-1.0 / u[pos])
    return out


def bump_eval(t):
    """Smooth bump: 1 on [-1, 1], 0 outside (-2, 2), values in [0, 1]."""
    t = np.asarray(t, dtype=float)
    a = 2.0 - np.abs(t)
    b = np.abs(t) - 1.0
    sa, sb = _s(a), _s(b)
    denom = sa + sb
    out = np.divide(sa, denom, out=np.zeros_like(sa), where=denom > 0)
    return float(out) if out.ndim == 0 else out


def bump_d1(t):
    """First derivative of the bump (vanishes outside 1 < |t| < 2)."""
    t = np.asarray(t, dtype=float)
    a = 2.0 - np.abs(t)
    b = np.abs(t) - 1.0
    inside = (a > 0) & (b > 0)
    out = np.zeros_like(t)
    if np.any(inside):
        ai, bi = a[inside], b[inside]
        sa, sb = _s(ai), _s(bi)
        e = sa * sb * (ai**-2 + bi**-2) / (sa + sb) ** 2
        out[inside] = -np.sign(t[inside]) * e
    return float(out) if out.ndim == 0 else out


def bump_d2(t):
    """Second derivative of the bump."""
    t = np.asarray(t, dtype=float)
    a = 2.0 - np.abs(t)
    b = np.abs(t) - 1.0
    inside = (a > 0) & (b > 0)
    out = np.zeros_like(t)
    if np.any(inside):
        ai, bi = a[inside], b[inside]
        sa, sb = _s(ai), _s(bi)
        e = sa * sb * (ai**-2 + bi**-2) / (sa + sb) ** 2
        # log-derivative of e along t (sign factored out per branch)
        g = (-(ai**-2) + bi**-2
             + 2.0 * (ai**-3 - bi**-3) / (ai**-2 + bi**-2)
             + 2.0 * (sa * ai**-2 - sb * bi**-2) / (sa + sb))
        out[inside] = -e * g
    return float(out) if out.ndim == 0 else out


def _normalized(xi: np.ndarray) -> tuple:
    xi = np.asarray(xi, dtype=float)
    flat = np.atleast_2d(xi)
    norms = np.linalg.norm(flat, axis=-1)
    if np.any(norms == 0):
        raise ValueError("cone cutoffs are undefined at xi = 0")
    return flat / norms[..., None], xi.ndim == 1


def eta_eval(d: Direction, xi) -> np.ndarray:
    """Unnormalized cone cutoff for one net direction.

    Product of a bump in the scaled live-coordinate distance of xi/|xi|
    to the direction with bumps in the scaled dead coordinates; scale
    invariant by construction.
    """
    unit, scalar = _normalized(xi)
    j = d.level
    v = d.array()
    live = list(d.live_axes)
    dead = sorted(d.zero_set)
    arg = 4.0 ** (j / 2 + 2) * np.sum((unit[:, live] - v[live]) ** 2, axis=1)
    out = bump_eval(arg)
    for i in dead:
        out = out * bump_eval(2.0 ** (j / 2) * np.abs(unit[:, i]))
    return float(out[0]) if scalar else out


class ConePartition:
    """Normalized cone cutoffs over a whole net, with neighbor pruning.

    Any point of the sphere meets O(1) cutoff supports, so denominators
    are accumulated direction-major over masked points instead of over
    the full net cross product.
    """

    def __init__(self, net: DirectionNet):
        self.net = net
        self.level = net.level

    @cached_property
    def _matrix(self) -> np.ndarray:
        return self.net.matrix()

    @cached_property
    def support_chord(self) -> float:
        # chord bound for eta support: live part sqrt(2^-j-3), dead part
        # 2^(1-j/2) per dead coordinate
        j, n = self.level, self.net.dim
        return math.sqrt(2.0 ** (-j - 3) + (n - 1) * 2.0 ** (2 - j)) * 1.0001

    def denominator(self, xi) -> np.ndarray:
        unit, scalar = _normalized(xi)
        total = np.zeros(unit.shape[0])
        r2 = self.support_chord**2
        for d, v in zip(self.net.directions, self._matrix):
            near = np.sum((unit - v) ** 2, axis=1) <= r2
            if near.any():
                total[near] += eta_eval(d, unit[near])
        return np.array([total[0]]) if scalar else total

    def chi(self, idx: int, xi) -> np.ndarray:
        """Normalized cutoff of direction `idx` at points xi (vectorized)."""
        unit, scalar = _normalized(xi)
        d = self.net.directions[idx]
        v = self._matrix[idx]
        out = np.zeros(unit.shape[0])
        near = np.sum((unit - v) ** 2, axis=1) <= (2.0 * self.support_chord) ** 2
        if near.any():
            pts = unit[near]
            num = eta_eval(d, pts)
            den = np.zeros(pts.shape[0])
            r2 = self.support_chord**2
            for dd, vv in zip(self.net.directions, self._matrix):
                sub = np.sum((pts - vv) ** 2, axis=1) <= r2
                if sub.any():
                    den[sub] += eta_eval(dd, pts[sub])
            live = num > 0
            if np.any(live & (den <= 0)):
                raise NetCoveringError(
                    f"cone denominator vanished at level {self.level}")
            vals = np.zeros(pts.shape[0])
            vals[live] = num[live] / den[live]
            out[near] = vals
        return float(out[0]) if scalar else out


def chi_eval(d: Direction, net: DirectionNet, xi) -> np.ndarray:
    """Normalized cone cutoff of direction d within its net."""
    idx = None
    for k, cand in enumerate(net.directions):
        if cand.vector == d.vector and cand.zero_set == d.zero_set:
            idx = k
            break
    if idx is None:
        raise ValueError("direction does not belong to the net")
    return ConePartition(net).chi(idx, xi)


def radial_eval(j: int, xi) -> np.ndarray:
    """Dyadic radial piece: bump(|xi|^2) at level 0, else the annulus
    difference bump(|2^-j xi|^2) - bump(4 |2^-j xi|^2)."""
    if j < 0:
        raise ValueError("radial level must be >= 0")
    xi = np.asarray(xi, dtype=float)
    r2 = np.sum(np.atleast_2d(xi) ** 2, axis=-1)
    if j == 0:
        out = bump_eval(r2)
    else:
        scaled = r2 * 4.0**-j
        out = bump_eval(scaled) - bump_eval(4.0 * scaled)
    return float(out[0]) if xi.ndim == 1 else out


def phi_lj(l: int, j: int, t) -> np.ndarray:
    """One-dimensional product-dyadic factor isolating |t| ~ 2^(j-l)."""
    if not 0 <= l <= j:
        raise ValueError("need 0 <= l <= j")
    t = np.asarray(t, dtype=float)
    if l == j:
        return bump_eval(0.5 * t)
    return bump_eval(2.0 ** (l - j - 1) * t) - bump_eval(2.0 ** (l - j) * t)


def delta_eval(j: int, ell, xi) -> np.ndarray:
    """Product dyadic cutoff: tensor product of phi_lj over coordinates."""
    ell = tuple(int(l) for l in ell)
    if any(not 0 <= l <= j for l in ell):
        raise ValueError("multi-level ell must satisfy 0 <= ell <= j")
    xi = np.asarray(xi, dtype=float)
    flat = np.atleast_2d(xi)
    if flat.shape[-1] != len(ell):
        raise ValueError("ell length must match point dimension")
    out = np.ones(flat.shape[0])
    for i, l in enumerate(ell):
        out = out * phi_lj(l, j, flat[:, i])
    return float(out[0]) if xi.ndim == 1 else out
