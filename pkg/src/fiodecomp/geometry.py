"""Direction nets on the unit sphere, rotations adapted to a direction,
anisotropic rectangles around the wavefront image, and the exceptional set.

A level-j net is a finite family of unit vectors stratified by zero
pattern J: coordinates in J vanish exactly, the others are at least
2**(-j/2) in absolute value.  Nets are 2**(-j/2-2)-separated, contain all
signed coordinate vectors, and cover the sphere at angular scale
2**(-j/2) stratum by stratum.

Construction is deterministic.  For each stratum the admissible region is
a circle arc (two live coordinates) or a sphere patch cut by three
coordinate walls (three live coordinates); points are laid out on
uniformly spaced rows whose spacing sits between the separation floor and
twice the covering target, which is what makes both constraints hold at
once.  Strata never interact: vectors with different zero patterns differ
by at least 2**(-j/2) in some coordinate, four times the separation floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "Direction",
    "DirectionNet",
    "ValidationReport",
    "Rectangle",
    "ExceptionalSet",
    "build_direction_net",
    "validate_direction_net",
    "rotation_to_direction",
    "projection",
    "exceptional_set_volume",
    "save_net",
    "load_net",
    "separation_floor",
    "component_floor",
]

# Chain gap over the separation floor: > 1 keeps pairwise distances legal
# after ring-chord shrinkage, small keeps the covering radius near half a
# gap.
_GAP = 1.02

# Strict covering is geometrically infeasible below these levels (the
# single-live-coordinate strata admit only +-e_i, which cannot approximate
# boundary samples to within 2**(-j/2-2)); below them the validator falls
# back to the support-overlap criterion that the cone cutoffs actually
# need.
_STRICT_COVER_MIN = {2: 3, 3: 5}


def separation_floor(j: int) -> float:
    return 2.0 ** (-j / 2 - 2)


def component_floor(j: int) -> float:
    return 2.0 ** (-j / 2)


@dataclass(frozen=True)
class Direction:
    """Unit vector at dyadic level `level` with exact zero pattern `zero_set`."""

    vector: tuple
    level: int
    zero_set: frozenset

    def __post_init__(self):
        object.__setattr__(self, "vector", tuple(float(c) for c in self.vector))
        object.__setattr__(self, "zero_set", frozenset(int(i) for i in self.zero_set))

    @property
    def dim(self) -> int:
        return len(self.vector)

    @property
    def live_axes(self) -> tuple:
        return tuple(i for i in range(self.dim) if i not in self.zero_set)

    def array(self) -> np.ndarray:
        return np.asarray(self.vector, dtype=float)


def _zero_pattern(vec: np.ndarray, tau: float) -> frozenset:
    return frozenset(i for i, c in enumerate(vec) if c == 0.0)


def _arc_angles(lo: float, hi: float, sep: float) -> np.ndarray:
    """Centered chain of angles in [lo, hi]: gaps of exactly _GAP times the
    arc whose chord is `sep`, with the leftover split between both ends.

    Consecutive chords stay >= sep while every angle of [lo, hi] is within
    half a gap of the chain, which is what bounds the covering radius
    strictly below the separation floor.
    """
    span = hi - lo
    if span < 0:
        if span > -1e-9:
            return np.array([(lo + hi) / 2.0])
        return np.array([])
    gap = _GAP * 2.0 * math.asin(min(1.0, sep / 2.0))
    n_gaps = int(span / gap)
    if n_gaps == 0:
        return np.array([(lo + hi) / 2.0])
    pad = (span - n_gaps * gap) / 2.0  # < gap/2 by construction
    return lo + pad + np.arange(n_gaps + 1) * gap


def _circle_stratum(j: int, dim: int, live: tuple) -> list:
    """Stratum vectors with exactly two live coordinates (a circle)."""
    tau = component_floor(j)
    sep = separation_floor(j)
    if tau > math.sqrt(0.5) + 1e-12:
        return []
    lo, hi = math.asin(min(1.0, tau)), math.acos(min(1.0, tau))
    angles = _arc_angles(lo, hi, sep)
    vecs = []
    i1, i2 = live
    for s1 in (1.0, -1.0):
        for s2 in (1.0, -1.0):
            for th in angles:
                v = np.zeros(dim)
                v[i1] = s1 * math.cos(th)
                v[i2] = s2 * math.sin(th)
                vecs.append(v)
    return vecs


def _sphere_patch_stratum(j: int) -> list:
    """Full-sphere stratum for dim 3: rows of constant polar angle inside
    the patch where every |coordinate| >= 2**(-j/2), replicated to all
    octants by sign flips."""
    tau = component_floor(j)
    sep = separation_floor(j)
    if math.sqrt(2.0) * tau > 1.0 - 1e-12:
        return []
    theta_a = math.asin(min(1.0, math.sqrt(2.0) * tau))
    theta_b = math.acos(min(1.0, tau))
    if theta_a > theta_b + 1e-12:
        return []
    rows = _arc_angles(theta_a, theta_b, sep)
    octant = []
    for th in rows:
        s, c = math.sin(th), math.cos(th)
        ratio = min(1.0, tau / s)
        phi_lo, phi_hi = math.asin(ratio), math.acos(ratio)
        if phi_lo > phi_hi + 1e-9:
            continue
        # chord target measured on the ring of radius sin(theta)
        phis = _arc_angles(phi_lo, phi_hi, sep / s)
        for ph in phis:
            octant.append(np.array([s * math.cos(ph), s * math.sin(ph), c]))
    vecs = []
    for s1 in (1.0, -1.0):
        for s2 in (1.0, -1.0):
            for s3 in (1.0, -1.0):
                for v in octant:
                    vecs.append(v * np.array([s1, s2, s3]))
    return vecs


@dataclass(frozen=True)
class DirectionNet:
    level: int
    dim: int
    directions: tuple

    @property
    def size(self) -> int:
        return len(self.directions)

    def matrix(self) -> np.ndarray:
        return np.array([d.vector for d in self.directions])

    def patterns(self) -> list:
        seen = []
        for d in self.directions:
            if d.zero_set not in seen:
                seen.append(d.zero_set)
        return seen

    def stratum(self, zero_set) -> list:
        zs = frozenset(zero_set)
        return [d for d in self.directions if d.zero_set == zs]

    def stratum_indices(self, zero_set) -> list:
        zs = frozenset(zero_set)
        return [i for i, d in enumerate(self.directions) if d.zero_set == zs]


@lru_cache(maxsize=64)
def build_direction_net(j: int, n: int) -> DirectionNet:
    """Deterministic level-j direction net in dimension n (2 or 3).

    Level 0 degenerates to the signed coordinate vectors: a unit vector
    whose nonzero coordinates are all >= 1 has exactly one of them.
    """
    if n not in (2, 3):
        raise ValueError(f"supported dimensions are 2 and 3, got {n}")
    if not 0 <= j <= 16:
        raise ValueError(f"level must be in [0, 16], got {j}")
    tau = component_floor(j)

    vecs: list = []
    # single-live-coordinate strata: exactly the signed basis vectors
    for i in range(n):
        for s in (1.0, -1.0):
            v = np.zeros(n)
            v[i] = s
            vecs.append(v)
    # two-live-coordinate strata
    for i1 in range(n):
        for i2 in range(i1 + 1, n):
            vecs.extend(_circle_stratum(j, n, (i1, i2)))
    # full stratum in dimension 3
    if n == 3:
        vecs.extend(_sphere_patch_stratum(j))

    dirs = []
    for v in vecs:
        v = v.copy()
        v[np.abs(v) < 1e-15] = 0.0
        dirs.append(Direction(tuple(v), j, _zero_pattern(v, tau)))
    return DirectionNet(j, n, tuple(dirs))


@dataclass
class ValidationReport:
    level: int
    dim: int
    samples: int
    separation_ok: bool = True
    axes_ok: bool = True
    components_ok: bool = True
    covering_ok: bool = True
    strict_cover_rate: float = 1.0
    strict_required: bool = True
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (self.separation_ok and self.axes_ok and self.components_ok
                and self.covering_ok)

    def first_violation(self) -> str | None:
        return self.failures[0] if self.failures else None


# Cutoff arguments below this bound keep the smooth bump (support (-2, 2))
# not just positive but representable in float64, so the cone partition's
# normalizing denominator stays bounded away from underflow.
_OVERLAP_MARGIN = 1.99


def _support_overlap_ok(net_mat: np.ndarray, zero_masks: np.ndarray,
                        j: int, xi: np.ndarray) -> np.ndarray:
    """For each sample row of xi, does some net direction's cutoff support
    contain it with a representable margin?"""
    scale_live = 2.0 ** (j + 4)
    scale_dead = 2.0 ** (j / 2)
    ok = np.zeros(xi.shape[0], dtype=bool)
    for v, dead in zip(net_mat, zero_masks):
        live = ~dead
        d2 = np.sum((xi[:, live] - v[live]) ** 2, axis=1)
        cond = scale_live * d2 <= _OVERLAP_MARGIN
        if dead.any():
            cond &= np.all(scale_dead * np.abs(xi[:, dead]) <= _OVERLAP_MARGIN, axis=1)
        ok |= cond
        if ok.all():
            break
    return ok


def validate_direction_net(net: DirectionNet, samples: int = 10000,
                           seed: int = 0) -> ValidationReport:
    """Check separation, axis membership, component floors, and covering.

    Covering is probabilistic: `samples` uniform sphere points, each
    requiring a net direction of the sample's own zero pattern within
    squared live-coordinate distance 2**(-j-4).  At levels below the
    per-dimension feasibility threshold the strict rate is reported and
    the verdict falls back to the support-overlap criterion.
    """
    if samples < 1000:
        raise ValueError("need at least 1000 covering samples")
    j, n = net.level, net.dim
    tau = component_floor(j)
    sep = separation_floor(j)
    rep = ValidationReport(level=j, dim=n, samples=samples)
    mat = net.matrix()

    # (i) pairwise separation
    tree = cKDTree(mat)
    pairs = tree.query_pairs(r=sep * (1 - 1e-9))
    if pairs:
        a, b = next(iter(pairs))
        dist = float(np.linalg.norm(mat[a] - mat[b]))
        rep.separation_ok = False
        rep.failures.append(
            f"separation: directions {a} and {b} at distance {dist:.3e} < {sep:.3e}")

    # (ii) signed coordinate vectors present
    for i in range(n):
        for s in (1.0, -1.0):
            target = np.zeros(n)
            target[i] = s
            if not np.any(np.all(np.abs(mat - target) <= 1e-12, axis=1)):
                rep.axes_ok = False
                rep.failures.append(f"axes: missing {'+' if s > 0 else '-'}e_{i + 1}")

    # (iii) unit norm, exact zeros, component floor
    for idx, d in enumerate(net.directions):
        v = d.array()
        if abs(np.linalg.norm(v) - 1.0) > 1e-12:
            rep.components_ok = False
            rep.failures.append(f"components: direction {idx} not unit norm")
            continue
        for i in range(n):
            if i in d.zero_set:
                if v[i] != 0.0:
                    rep.components_ok = False
                    rep.failures.append(
                        f"components: direction {idx} coordinate {i} not exactly 0")
            elif abs(v[i]) < tau * (1 - 1e-12):
                rep.components_ok = False
                rep.failures.append(
                    f"components: direction {idx} coordinate {i} below 2^(-j/2)")

    # (iv) covering on random sphere samples
    rng = np.random.default_rng(seed)
    xi = rng.normal(size=(samples, n))
    xi /= np.linalg.norm(xi, axis=1, keepdims=True)
    small = np.abs(xi) < tau
    strict_ok = np.zeros(samples, dtype=bool)
    radius2 = 2.0 ** (-j - 4)

    patterns = {}
    for row in range(samples):
        key = tuple(np.flatnonzero(small[row]))
        patterns.setdefault(key, []).append(row)
    stratum_trees = {}
    for key, rows in patterns.items():
        zs = frozenset(key)
        live = [i for i in range(n) if i not in zs]
        if not live:
            continue  # no candidate can exist; strict fails for these rows
        members = net.stratum_indices(zs)
        if not members:
            continue
        if zs not in stratum_trees:
            stratum_trees[zs] = cKDTree(mat[np.ix_(members, live)])
        dist, _ = stratum_trees[zs].query(xi[np.ix_(rows, live)])
        strict_ok[rows] = dist**2 < radius2

    rep.strict_cover_rate = float(strict_ok.mean())
    rep.strict_required = j >= _STRICT_COVER_MIN[n]
    if j == 0:
        # Level 0 carries no cone decomposition (the radial low-pass does);
        # the covering clause is vacuous for the degenerate axis net.
        pass
    elif rep.strict_required:
        if not strict_ok.all():
            bad = int(np.flatnonzero(~strict_ok)[0])
            rep.covering_ok = False
            rep.failures.append(
                f"covering: sample {bad} at {xi[bad]} has no stratum match "
                f"within 2^(-j-4)")
    else:
        missing = ~strict_ok
        if missing.any():
            zero_masks = np.array([[i in d.zero_set for i in range(n)]
                                   for d in net.directions])
            overlap = _support_overlap_ok(mat, zero_masks, j, xi[missing])
            if not overlap.all():
                bad = int(np.flatnonzero(missing)[np.flatnonzero(~overlap)[0]])
                rep.covering_ok = False
                rep.failures.append(
                    f"covering: sample {bad} at {xi[bad]} outside every "
                    f"cutoff support")
    return rep


def rotation_to_direction(d: Direction) -> np.ndarray:
    """Orthogonal matrix with first column d, identity on the dead block.

    Requires the live coordinates to be a prefix {0, .., m-1} (permute
    first otherwise); determinant is forced to +1 by flipping the last
    live column when needed.
    """
    n = d.dim
    live = d.live_axes
    m = len(live)
    if live != tuple(range(m)):
        raise ValueError(
            "direction pattern must have its live coordinates first; "
            "apply a coordinate permutation before rotating")
    u = d.array()[:m]
    q, _ = np.linalg.qr(np.column_stack([u, np.eye(m)]))
    if np.dot(q[:, 0], u) < 0:
        q = -q
    q[:, 0] = u
    if np.linalg.det(q) < 0:
        q[:, m - 1] = -q[:, m - 1]
    a = np.eye(n)
    a[:m, :m] = q
    return a


def projection(d: Direction, y) -> float:
    """Component of y along the direction vector."""
    return float(np.dot(np.asarray(y, dtype=float), d.array()))


@dataclass(frozen=True)
class Rectangle:
    """Anisotropic box around a direction: thickness M*2^-j along it,
    M*2^(-j/2) across.  Spatial kind tests the wavefront image
    Phi_xi(x, direction) against the center; dual kind tests y directly."""

    direction: Direction
    center: tuple
    scale: int
    constant: float
    kind: str = "dual"

    def __post_init__(self):
        if self.kind not in ("dual", "spatial"):
            raise ValueError("rectangle kind must be 'dual' or 'spatial'")
        if self.constant <= 0:
            raise ValueError("rectangle constant must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    def contains(self, points: np.ndarray, phase=None) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        x0 = np.asarray(self.center)
        v = self.direction.array()
        if self.kind == "dual":
            w = pts - x0
        else:
            if phase is None:
                raise ValueError("spatial rectangle membership needs the phase")
            w = x0 - phase.grad_xi(pts, np.broadcast_to(v, pts.shape))
        m, j = self.constant, self.scale
        ball = np.linalg.norm(w, axis=1) <= m * 2.0 ** (-j / 2)
        slab = np.abs(w @ v) <= m * 2.0 ** (-j)
        out = ball & slab
        return out if np.asarray(points).ndim > 1 else bool(out[0])


@dataclass(frozen=True)
class ExceptionalSet:
    """Union of spatial rectangles over all levels with 2^-j <= radius."""

    center: tuple
    radius: float
    constant: float
    dim: int
    level_cap: int = 12

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")

    def levels(self) -> list:
        j_min = math.ceil(-math.log2(self.radius) - 1e-12)
        return [j for j in range(max(j_min, 0), self.level_cap + 1)]

    def rectangles(self) -> list:
        rects = []
        for j in self.levels():
            net = build_direction_net(j, self.dim)
            for d in net.directions:
                rects.append(Rectangle(d, self.center, j, self.constant, "spatial"))
        return rects

    def contains(self, points: np.ndarray, phase) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        inside = np.zeros(pts.shape[0], dtype=bool)
        x0 = np.asarray(self.center)
        for j in self.levels():
            net = build_direction_net(j, self.dim)
            r_ball = self.constant * 2.0 ** (-j / 2)
            r_slab = self.constant * 2.0 ** (-j)
            for d in net.directions:
                rest = ~inside
                if not rest.any():
                    return inside
                v = d.array()
                w = x0 - phase.grad_xi(pts[rest], np.broadcast_to(v, (int(rest.sum()), self.dim)))
                hit = (np.linalg.norm(w, axis=1) <= r_ball) & (np.abs(w @ v) <= r_slab)
                inside[rest] = hit
        return inside


def exceptional_set_volume(es: ExceptionalSet, phase, mc_samples: int,
                           box_half_width: float = 2.0, seed: int = 0) -> tuple:
    """Monte-Carlo volume of the exceptional set over a centered box.

    Returns (estimate, standard_error).
    """
    if mc_samples < 10**4:
        raise ValueError("need at least 1e4 Monte-Carlo samples")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-box_half_width, box_half_width, size=(mc_samples, es.dim))
    inside = es.contains(pts, phase)
    p = float(inside.mean())
    vol_box = (2.0 * box_half_width) ** es.dim
    est = p * vol_box
    se = vol_box * math.sqrt(max(p * (1 - p), 1.0 / mc_samples) / mc_samples)
    return est, se


def save_net(net: DirectionNet, path) -> None:
    """Line format: level zero-bitmask c_1 .. c_n with 17 significant digits.

    Bit i of the mask is set when coordinate i (0-based) vanishes.
    """
    with open(path, "w") as fh:
        for d in net.directions:
            mask = sum(1 << i for i in d.zero_set)
            coords = " ".join(f"{c:.17g}" for c in d.vector)
            fh.write(f"{d.level} {mask} {coords}\n")


def load_net(path) -> DirectionNet:
    dirs = []
    level = None
    dim = None
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            j, mask = int(parts[0]), int(parts[1])
            coords = tuple(float(c) for c in parts[2:])
            if level is None:
                level, dim = j, len(coords)
            elif j != level or len(coords) != dim:
                raise ValueError("net file mixes levels or dimensions")
            zs = frozenset(i for i in range(dim) if mask & (1 << i))
            dirs.append(Direction(coords, j, zs))
    if not dirs:
        raise ValueError("empty net file")
    return DirectionNet(level, dim, tuple(dirs))
