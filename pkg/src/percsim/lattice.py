"""Discrete percolation models and continuum-to-lattice classifications.

Bond percolation on the box ``{0..n-1}^d``, site percolation on the
triangular lattice, the hexagonal coarse-graining of a planar point cloud,
the renormalization site classifications (n-good, good under random
powers, n-tame) and the counting bounds used with them.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numba import njit
from scipy.spatial import cKDTree

from ._kernels import _find, canonical_labels, close_pairs
from .disjoint_set import component_labels
from .environments import ZeroStabilization
from .errors import InfeasibleError
from .graphs import SinrParams
from .pathloss import PathLoss, pathloss_inverse, shifted_pathloss
from .point_processes import Cloud, MarkedPointCloud, RngLike, as_generator

SQRT3 = math.sqrt(3.0)


# compiled helpers


@njit(cache=True)
def _union(parent, rank, a, b):
    a = _find(parent, a)
    b = _find(parent, b)
    if a == b:
        return
    if rank[a] < rank[b]:
        a, b = b, a
    parent[b] = a
    if rank[a] == rank[b]:
        rank[a] += 1


@njit(cache=True)
def _bond_labels(open_flags, n, d):
    # open_flags[k, s]: edge from site s to s + e_k (row-major, last axis fastest)
    total = open_flags.shape[1]
    parent = np.arange(total)
    rank = np.zeros(total, np.int64)
    for k in range(d):
        stride = n ** (d - 1 - k)
        for s in range(total):
            if open_flags[k, s] and (s // stride) % n != n - 1:
                _union(parent, rank, s, s + stride)
    return canonical_labels(parent)


@njit(cache=True)
def _grid_site_labels(open2d, offsets):
    # labels of open sites of a dense 2-D grid; closed sites get -1
    nx, ny = open2d.shape
    parent = np.arange(nx * ny)
    rank = np.zeros(nx * ny, np.int64)
    for x in range(nx):
        for y in range(ny):
            if not open2d[x, y]:
                continue
            for o in range(offsets.shape[0]):
                u = x + offsets[o, 0]
                v = y + offsets[o, 1]
                if 0 <= u < nx and 0 <= v < ny and open2d[u, v]:
                    _union(parent, rank, x * ny + y, u * ny + v)
    lab = canonical_labels(parent)
    out = np.full(nx * ny, -1, np.int64)
    for s in range(nx * ny):
        if open2d[s // ny, s % ny]:
            out[s] = lab[s]
    return out


@njit(cache=True)
def _spans(labels, left, right):
    seen = np.zeros(labels.shape[0] + 1, np.bool_)
    for s in range(labels.shape[0]):
        if left[s] and labels[s] >= 0:
            seen[labels[s]] = True
    for s in range(labels.shape[0]):
        if right[s] and labels[s] >= 0 and seen[labels[s]]:
            return True
    return False


# bond percolation


@dataclass(frozen=True, eq=False)
class BondLattice:
    """Bond configuration on ``{0..n-1}^d``.

    ``open[k]`` has shape ``(n,)*d``; ``open[k][s]`` is the edge from site
    ``s`` to ``s + e_k``.  Edges leaving the box along axis ``k`` are
    stored but always closed.

    Attributes
    ----------
    d, n : int
    p : float
    open : ndarray of bool, shape (d, n, ..., n)
    uniforms : ndarray or None
        Underlying uniforms when sampled, so thresholds can be varied
        on the same draw.
    """

    d: int
    n: int
    p: float
    open: np.ndarray
    uniforms: np.ndarray | None = None

    @property
    def origin(self) -> tuple:
        return (self.n // 2,) * self.d

    def with_p(self, p: float) -> "BondLattice":
        """Re-threshold the stored uniforms at a new `p`."""
        if self.uniforms is None:
            raise ValueError("lattice carries no uniforms")
        return _bond_from_uniforms(self.d, self.n, p, self.uniforms)

    def labels(self) -> np.ndarray:
        flat = np.ascontiguousarray(self.open.reshape(self.d, -1))
        return _bond_labels(flat, self.n, self.d).reshape((self.n,) * self.d)

    def open_fraction(self) -> tuple[float, int]:
        """Fraction of open edges among in-box edges, with the edge count."""
        mask = self.edge_mask()
        m = int(mask.sum())
        return float(self.open[mask].sum()) / m, m

    def edge_mask(self) -> np.ndarray:
        mask = np.ones(self.open.shape, bool)
        for k in range(self.d):
            idx = [k] + [slice(None)] * self.d
            idx[1 + k] = self.n - 1
            mask[tuple(idx)] = False
        return mask

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{k}" for k in range(self.d)] + ["axis", "open"])
            for k in range(self.d):
                for site in np.ndindex(*(self.n,) * self.d):
                    if site[k] < self.n - 1:
                        w.writerow(list(site) + [k, int(self.open[(k,) + site])])


def _bond_from_uniforms(d, n, p, u) -> BondLattice:
    flags = u < p
    for k in range(d):
        idx = [k] + [slice(None)] * d
        idx[1 + k] = n - 1
        flags[tuple(idx)] = False
    return BondLattice(d, n, float(p), flags, u)


def sample_bond_lattice(d: int, n: int, p: float, rng: RngLike) -> BondLattice:
    """I.i.d. Bernoulli(p) edges, thresholding one uniform per edge."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    if d < 1 or n < 1:
        raise ValueError("need d >= 1 and n >= 1")
    u = as_generator(rng).random((d,) + (n,) * d)
    return _bond_from_uniforms(d, n, p, u)


def origin_cluster(lattice: BondLattice, start=None) -> set[tuple]:
    """Sites reachable from `start` (default the centre) through open edges."""
    d, n = lattice.d, lattice.n
    start = tuple(lattice.origin if start is None else start)
    seen = {start}
    queue = deque([start])
    op = lattice.open
    while queue:
        s = queue.popleft()
        for k in range(d):
            if s[k] < n - 1 and op[(k,) + s]:
                t = s[:k] + (s[k] + 1,) + s[k + 1 :]
                if t not in seen:
                    seen.add(t)
                    queue.append(t)
            if s[k] > 0:
                t = s[:k] + (s[k] - 1,) + s[k + 1 :]
                if op[(k,) + t] and t not in seen:
                    seen.add(t)
                    queue.append(t)
    return seen


def bond_crossing(lattice: BondLattice, axis: int = 0) -> bool:
    """Open path between the faces ``x_axis = 0`` and ``x_axis = n-1``."""
    lab = lattice.labels()
    left = np.take(lab, 0, axis=axis).ravel()
    right = np.take(lab, lattice.n - 1, axis=axis).ravel()
    return bool(np.intersect1d(left, right).size)


def saw_subcritical_bound(p: float, d: int, n: int) -> float:
    """Self-avoiding path bound ``(2 d p)^n`` on ``P(|C(o)| reaches length n)``."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    return float((2 * d * p) ** n)


def peierls_supercritical_bound(p: float, start: int = 1) -> float:
    """Closed form of ``sum_{n >= start} (4 (1-p))^(2n+4)`` on the square lattice.

    Upper-bounds the probability that the origin is enclosed by a closed
    dual circuit.  Requires ``p > 3/4``.
    """
    q = 4.0 * (1.0 - p)
    if not q < 1:
        raise ValueError("series diverges: need p > 3/4")
    if start < 0:
        raise ValueError("start must be >= 0")
    return float(q ** (2 * start + 4) / (1.0 - q * q))


# triangular site percolation


TRI_OFFSETS = np.array([[1, 0], [-1, 0], [0, 1], [0, -1], [1, -1], [-1, 1]], np.int64)


@dataclass(frozen=True, eq=False)
class TriangularSiteLattice:
    """Sites of the triangular lattice in axial coordinates.

    Site ``(q, r)`` neighbours ``(q +- 1, r)``, ``(q, r +- 1)``,
    ``(q + 1, r - 1)`` and ``(q - 1, r + 1)``.

    Attributes
    ----------
    coords : ndarray of int, shape (m, 2)
    open : ndarray of bool, shape (m,)
    p : float or None
        Open probability, when sampled.
    left, right : ndarray of bool, shape (m,)
        Sites on the two sides a crossing must join.
    boundary : ndarray of bool, shape (m,)
        Sites excluded from open-fraction statistics.
    centers : ndarray, shape (m, 2), optional
        Planar centres (coarse-grained lattices).
    """

    coords: np.ndarray
    open: np.ndarray
    left: np.ndarray
    right: np.ndarray
    p: float | None = None
    boundary: np.ndarray | None = None
    centers: np.ndarray | None = None
    uniforms: np.ndarray | None = None

    def __len__(self):
        return self.coords.shape[0]

    def dense(self):
        """Dense grid view: ``(open_grid, index_grid)``; missing sites are closed / -1."""
        lo = self.coords.min(axis=0)
        shape = tuple(self.coords.max(axis=0) - lo + 1)
        grid = np.zeros(shape, bool)
        index = np.full(shape, -1, np.int64)
        c = self.coords - lo
        grid[c[:, 0], c[:, 1]] = self.open
        index[c[:, 0], c[:, 1]] = np.arange(len(self))
        return grid, index

    def labels(self) -> np.ndarray:
        """Open-cluster label per site (-1 for closed sites)."""
        if len(self) == 0:
            return np.empty(0, np.int64)
        grid, index = self.dense()
        lab = _grid_site_labels(grid, TRI_OFFSETS)
        c = self.coords - self.coords.min(axis=0)
        return lab[c[:, 0] * grid.shape[1] + c[:, 1]]

    def neighbor_counts(self) -> np.ndarray:
        """Number of lattice neighbours of each site present in the lattice."""
        present = set(map(tuple, self.coords.tolist()))
        return np.array([sum((q + a, r + b) in present for a, b in TRI_OFFSETS.tolist())
                         for q, r in self.coords.tolist()])

    def with_p(self, p: float) -> "TriangularSiteLattice":
        if self.uniforms is None:
            raise ValueError("lattice carries no uniforms")
        return TriangularSiteLattice(self.coords, self.uniforms < p, self.left, self.right, float(p),
                                     self.boundary, self.centers, self.uniforms)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["q", "r", "open"])
            for (q, r), o in zip(self.coords.tolist(), self.open.tolist()):
                w.writerow([q, r, int(o)])


def triangular_rhombus(n: int, p: float, rng: RngLike) -> TriangularSiteLattice:
    """``n x n`` rhombus ``{0..n-1}^2`` of the triangular lattice, crossing along ``q``."""
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    q, r = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    coords = np.stack([q.ravel(), r.ravel()], axis=1)
    u = as_generator(rng).random(n * n)
    return TriangularSiteLattice(coords, u < p, coords[:, 0] == 0, coords[:, 0] == n - 1, float(p),
                                 np.zeros(n * n, bool), None, u)


def rhombus_crossing(open_grid: np.ndarray) -> bool:
    """Fast crossing test on a dense rhombus grid (first axis is crossed)."""
    lab = _grid_site_labels(open_grid, TRI_OFFSETS)
    nx, ny = open_grid.shape
    left = np.zeros(nx * ny, np.bool_)
    right = np.zeros(nx * ny, np.bool_)
    left[:ny] = True
    right[(nx - 1) * ny :] = True
    return bool(_spans(lab, left, right))


# hexagonal coarse-graining


def hex_centers(coords: np.ndarray, s: float) -> np.ndarray:
    """Centres of flat-top hexagons of side `s`, one centred at the origin."""
    q, r = coords[:, 0].astype(float), coords[:, 1].astype(float)
    return np.stack([1.5 * s * q, SQRT3 * s * (r + q / 2.0)], axis=1)


def hex_of_points(points: np.ndarray, s: float) -> np.ndarray:
    """Axial coordinates of the hexagon containing each point (cube rounding)."""
    x, y = points[:, 0], points[:, 1]
    qf = (2.0 / 3.0) * x / s
    rf = (-x / 3.0 + SQRT3 / 3.0 * y) / s
    cx, cz = qf, rf
    cy = -cx - cz
    rx, ry, rz = np.round(cx), np.round(cy), np.round(cz)
    dx, dy, dz = np.abs(rx - cx), np.abs(ry - cy), np.abs(rz - cz)
    fix_x = (dx > dy) & (dx > dz)
    fix_y = ~fix_x & (dy > dz)
    rx = np.where(fix_x, -ry - rz, rx)
    rz = np.where(~fix_x & ~fix_y, -rx - ry, rz)
    return np.stack([rx, rz], axis=1).astype(np.int64)


def hexagon_coarse_grain(cloud: Cloud, s: float, margin: float | None = None) -> TriangularSiteLattice:
    """Hexagonal tiling of side `s`; a hexagon is open iff it holds a point.

    Sites are the hexagons whose bounding box meets the analysis box
    ``[0, L]^2``.  Hexagons not contained in the box are flagged as
    boundary.  ``left`` / ``right`` are the hexagons meeting the strips
    of width `margin` (default `s`) along the two faces ``x = 0`` and
    ``x = L``.
    """
    if cloud.d != 2:
        raise ValueError("coarse-graining is planar")
    if not s > 0:
        raise ValueError("side must be > 0")
    L = float(cloud.window.L)
    margin = s if margin is None else margin
    hh = SQRT3 / 2.0 * s
    qs = np.arange(int(math.floor(-s / (1.5 * s))), int(math.ceil((L + s) / (1.5 * s))) + 1)
    coords = []
    for q in qs:
        rlo = int(math.floor((-hh) / (SQRT3 * s) - q / 2.0)) - 1
        rhi = int(math.ceil((L + hh) / (SQRT3 * s) - q / 2.0)) + 1
        coords.extend((q, r) for r in range(rlo, rhi + 1))
    coords = np.array(coords, np.int64)
    cen = hex_centers(coords, s)
    bx_lo, bx_hi = cen[:, 0] - s, cen[:, 0] + s
    by_lo, by_hi = cen[:, 1] - hh, cen[:, 1] + hh
    keep = (bx_hi > 0) & (bx_lo < L) & (by_hi > 0) & (by_lo < L)
    coords, cen = coords[keep], cen[keep]
    bx_lo, bx_hi, by_lo, by_hi = bx_lo[keep], bx_hi[keep], by_lo[keep], by_hi[keep]
    boundary = ~((bx_lo >= 0) & (bx_hi <= L) & (by_lo >= 0) & (by_hi <= L))
    open_ = np.zeros(len(coords), bool)
    if len(cloud):
        owner = hex_of_points(cloud.points, s)
        lo = coords.min(axis=0)
        shape = coords.max(axis=0) - lo + 1
        index = np.full(tuple(shape), -1, np.int64)
        c = coords - lo
        index[c[:, 0], c[:, 1]] = np.arange(len(coords))
        o = owner - lo
        ok = np.all((o >= 0) & (o < shape), axis=1)
        hit = index[o[ok, 0], o[ok, 1]]
        open_[hit[hit >= 0]] = True
    left = bx_lo < margin
    right = bx_hi > L - margin
    return TriangularSiteLattice(coords, open_, left, right, None, boundary, cen)


def hexagon_open_probability(lam: float, s: float) -> float:
    """``1 - exp(-lam * 3 sqrt(3) s^2 / 2)``: a Poisson hexagon is nonempty."""
    return 1.0 - math.exp(-lam * 3.0 * SQRT3 * s * s / 2.0)


def hexagon_threshold_interval() -> tuple[float, float]:
    """Bracket ``(2 ln 2, 26 ln 2) / (3 sqrt 3)`` for the critical intensity of
    unit-distance connectivity in the plane, from the hexagon construction.
    """
    base = math.log(2.0) / (3.0 * SQRT3)
    return 2.0 * base, 26.0 * base


def site_percolation_crossing(lattice) -> bool:
    """Crossing through open sites (triangular) or good non-boundary sites (cubic)."""
    if isinstance(lattice, TriangularSiteLattice):
        if len(lattice) == 0:
            return False
        lab = lattice.labels()
        return bool(_spans(lab, lattice.left, lattice.right))
    if isinstance(lattice, SiteClassification):
        return lattice.crossing()
    raise TypeError("expected a TriangularSiteLattice or SiteClassification")


# renormalization classifications


@dataclass(eq=False)
class SiteClassification:
    """Per-site flags of a ``Z^d`` renormalization.

    Attributes
    ----------
    sites : ndarray of int, shape (m, d)
    flags : ndarray of bool
        Conjunction of all conditions.
    boundary : ndarray of bool
        Sites whose largest inspected cube leaves the padded window.
    conditions : dict of str to bool arrays
    params : dict
    extra : dict
        Auxiliary per-site values (for example interference sums).
    """

    sites: np.ndarray
    flags: np.ndarray
    boundary: np.ndarray
    conditions: dict[str, np.ndarray]
    params: dict[str, Any]
    extra: dict[str, np.ndarray] = field(default_factory=dict)

    def crossing(self, axis: int = 0) -> bool:
        """Nearest-neighbour crossing of good sites between the extreme
        non-boundary slabs along `axis` (planar only)."""
        if self.sites.shape[1] != 2:
            raise ValueError("crossing defined for planar classifications")
        use = ~self.boundary
        if not use.any():
            return False
        sites = self.sites
        lo = sites.min(axis=0)
        shape = tuple(sites.max(axis=0) - lo + 1)
        grid = np.zeros(shape, bool)
        c = sites - lo
        ok = use & self.flags
        grid[c[ok, 0], c[ok, 1]] = True
        if axis == 1:
            grid = grid.T
            c = c[:, ::-1]
        offs = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]], np.int64)
        lab = _grid_site_labels(grid, offs)
        a_min, a_max = c[use, 0].min(), c[use, 0].max()
        left = np.zeros(grid.size, np.bool_)
        right = np.zeros(grid.size, np.bool_)
        flat = c[:, 0] * grid.shape[1] + c[:, 1]
        left[flat[use & (c[:, 0] == a_min)]] = True
        right[flat[use & (c[:, 0] == a_max)]] = True
        return bool(_spans(lab, left, right))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            d = self.sites.shape[1]
            names = list(self.conditions)
            w.writerow([f"z{k}" for k in range(d)] + ["flag", "boundary"] + names)
            for t in range(len(self.sites)):
                w.writerow(list(self.sites[t]) + [int(self.flags[t]), int(self.boundary[t])]
                           + [int(self.conditions[k][t]) for k in names])


def _default_sites(cloud: Cloud, n: float) -> np.ndarray:
    k = int(math.floor(cloud.window.L / n + 1e-12))
    axes = [np.arange(k + 1)] * cloud.d
    return np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, cloud.d).astype(np.int64)


def _in_cube(tree, center, side) -> np.ndarray:
    if tree is None:
        return np.empty(0, np.int64)
    return np.array(sorted(tree.query_ball_point(center, side / 2.0, p=np.inf)), np.int64)


def _connected_within(points: np.ndarray, inner: np.ndarray, outer: np.ndarray, radius: float) -> bool:
    """All points `inner` share one component of the radius graph on `outer`."""
    if inner.size <= 1:
        return True
    if not radius > 0:
        return False
    pos = {int(k): t for t, k in enumerate(outer.tolist())}
    i, j, _ = close_pairs(points[outer], radius)
    lab = component_labels(outer.size, i, j)
    sel = lab[[pos[int(k)] for k in inner.tolist()]]
    return bool((sel == sel[0]).all())


def _cube_outside(window, center, side) -> bool:
    return bool(np.any(center - side / 2.0 < window.lo) or np.any(center + side / 2.0 > window.hi))


def classify_n_good(cloud: Cloud, stabilization=None, n: float = 1.0, r: float = 1.0, sites=None) -> SiteClassification:
    """Flag the n-good sites ``z``.

    ``z`` is n-good when the stabilization radius over ``Q_n(nz)`` is below
    ``n/2``, the cube ``Q_n(nz)`` holds a point, and every pair of points in
    ``Q_3n(nz)`` is joined by a path of the radius-`r` Gilbert graph using
    only points of ``Q_6n(nz)``.  Cubes are closed.
    """
    stab = ZeroStabilization() if stabilization is None else stabilization
    sites = _default_sites(cloud, n) if sites is None else np.asarray(sites, np.int64)
    pts = cloud.points
    tree = cKDTree(pts) if len(pts) else None
    m = len(sites)
    c1 = np.zeros(m, bool)
    c2 = np.zeros(m, bool)
    c3 = np.zeros(m, bool)
    bnd = np.zeros(m, bool)
    for t, z in enumerate(sites):
        ctr = n * z.astype(float)
        c1[t] = stab.sup_over_cube(ctr, n) < n / 2.0
        c2[t] = _in_cube(tree, ctr, n).size > 0
        inner = _in_cube(tree, ctr, 3 * n)
        outer = _in_cube(tree, ctr, 6 * n)
        c3[t] = _connected_within(pts, inner, outer, r)
        bnd[t] = _cube_outside(cloud.window, ctr, 6 * n)
    return SiteClassification(sites, c1 & c2 & c3, bnd,
                              {"stabilized": c1, "occupied": c2, "connected": c3}, {"n": n, "r": r})


def classify_good_random_power(cloud: MarkedPointCloud, params: SinrParams, ell: PathLoss, r: float,
                               sites=None) -> SiteClassification:
    """Flag good sites under random powers at power level `r`.

    ``z`` is good when some point of ``Q_1(z)`` has power above `r` and all
    points of ``Q_3(z)`` are joined in the Gilbert graph of radius
    ``delta = l^-1(N0 tau / r) / 2`` restricted to ``Q_6(z)``.
    """
    if not isinstance(cloud, MarkedPointCloud):
        raise TypeError("powers are carried as marks")
    level = params.N0 * params.tau
    if not r >= level / ell.at_zero:
        raise InfeasibleError("power level must satisfy r >= N0 tau / l(0)")
    delta = pathloss_inverse(ell, level / r, clamp=True) / 2.0
    sites = _default_sites(cloud, 1.0) if sites is None else np.asarray(sites, np.int64)
    pts, marks = cloud.points, cloud.marks
    tree = cKDTree(pts) if len(pts) else None
    m = len(sites)
    c1 = np.zeros(m, bool)
    c2 = np.zeros(m, bool)
    bnd = np.zeros(m, bool)
    for t, z in enumerate(sites):
        ctr = z.astype(float)
        q1 = _in_cube(tree, ctr, 1.0)
        c1[t] = bool(q1.size and (marks[q1] > r).any())
        c2[t] = _connected_within(pts, _in_cube(tree, ctr, 3.0), _in_cube(tree, ctr, 6.0), delta)
        bnd[t] = _cube_outside(cloud.window, ctr, 6.0)
    return SiteClassification(sites, c1 & c2, bnd, {"strong": c1, "connected": c2},
                              {"r": r, "delta": delta})


def classify_n_tame(cloud: Cloud, ell: PathLoss, n: float, M: float, stabilization=None,
                    sites=None) -> SiteClassification:
    """Flag n-tame sites.

    ``z`` is n-tame when the stabilization radius over ``Q_{12 n sqrt d}(nz)``
    is below ``n/2`` and ``I_in = sum_{X in Q_{12 n sqrt d}(nz)} l_{6n}(|X - nz|)``
    is at most `M`.  ``extra`` holds ``I_in`` and the complementary ``I_out``.
    """
    stab = ZeroStabilization() if stabilization is None else stabilization
    sites = _default_sites(cloud, n) if sites is None else np.asarray(sites, np.int64)
    d = cloud.d
    side = 12.0 * n * math.sqrt(d)
    pts = cloud.points
    m = len(sites)
    c1 = np.zeros(m, bool)
    i_in = np.zeros(m)
    i_out = np.zeros(m)
    bnd = np.zeros(m, bool)
    for t, z in enumerate(sites):
        ctr = n * z.astype(float)
        c1[t] = stab.sup_over_cube(ctr, side) < n / 2.0
        if len(pts):
            inside = np.all(np.abs(pts - ctr) <= side / 2.0, axis=1)
            lv = shifted_pathloss(ell, 6.0 * n, np.sqrt(((pts - ctr) ** 2).sum(-1)))
            i_in[t] = lv[inside].sum()
            i_out[t] = lv[~inside].sum()
        bnd[t] = _cube_outside(cloud.window, ctr, side)
    c2 = i_in <= M
    return SiteClassification(sites, c1 & c2, bnd, {"stabilized": c1, "bounded_interference": c2},
                              {"n": n, "M": M}, {"I_in": i_in, "I_out": i_out})
