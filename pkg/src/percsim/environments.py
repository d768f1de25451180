"""Random street systems (Voronoi, Delaunay, Manhattan grids) and Cox
processes driven by their length measure.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Voronoi, cKDTree

from .errors import CapExceededError, DegenerateInputError
from .estimate import EstimateResult
from .point_processes import POINT_CAP, PointCloud, RngLike, Window, as_generator, sample_ppp

LINE_CAP = 10**6


@dataclass(frozen=True, eq=False)
class SegmentSystem:
    """Finite union of line segments in a planar window.

    Attributes
    ----------
    window : Window
    segments : ndarray of shape (m, 2, 2)
        ``segments[k] = [[x1, y1], [x2, y2]]``.
    sources : ndarray of shape (m, 2) or None
        Generating nucleus indices (tessellations only).
    """

    window: Window
    segments: np.ndarray
    sources: np.ndarray | None = None
    total_length: float = field(init=False)

    def __post_init__(self):
        if self.window.d != 2:
            raise ValueError("segment systems are planar")
        seg = np.asarray(self.segments, dtype=float).reshape(-1, 2, 2)
        object.__setattr__(self, "segments", seg)
        lengths = self.lengths
        if (lengths <= 0).any():
            raise ValueError("degenerate segment of zero length")
        if seg.size and not self.window.contains(seg.reshape(-1, 2)).all():
            raise ValueError("segment leaves the padded window")
        object.__setattr__(self, "total_length", float(lengths.sum()))

    def __len__(self):
        return self.segments.shape[0]

    @property
    def lengths(self) -> np.ndarray:
        return np.sqrt(((self.segments[:, 1] - self.segments[:, 0]) ** 2).sum(-1))

    def length_in_box(self, lo: float, hi: float) -> float:
        """Length inside the half-open square ``[lo, hi)^2``."""
        clipped, keep = _clip_segments(self.segments, lo, hi)
        seg = clipped[keep]
        if not seg.size:
            return 0.0
        # pieces lying on the upper faces have measure zero in the half-open box
        on_top = ((seg[:, 0, 0] == hi) & (seg[:, 1, 0] == hi)) | ((seg[:, 0, 1] == hi) & (seg[:, 1, 1] == hi))
        seg = seg[~on_top]
        return float(np.sqrt(((seg[:, 1] - seg[:, 0]) ** 2).sum(-1)).sum())

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x1", "y1", "x2", "y2"])
            w.writerows(self.segments.reshape(-1, 4).tolist())


def _clip_segments(seg: np.ndarray, lo: float, hi: float):
    """Liang-Barsky clipping of segments to ``[lo, hi]^2``."""
    p0 = seg[:, 0]
    dv = seg[:, 1] - seg[:, 0]
    t0 = np.zeros(len(seg))
    t1 = np.ones(len(seg))
    keep = np.ones(len(seg), bool)
    for k in range(2):
        for p, q in ((-dv[:, k], p0[:, k] - lo), (dv[:, k], hi - p0[:, k])):
            par = p == 0
            keep &= ~(par & (q < 0))
            with np.errstate(divide="ignore", invalid="ignore"):
                t = q / p
            enter = (p < 0) & ~par
            leave = (p > 0) & ~par
            t0 = np.where(enter, np.maximum(t0, t), t0)
            t1 = np.where(leave, np.minimum(t1, t), t1)
    keep &= t0 < t1
    a = p0 + t0[:, None] * dv
    b = p0 + t1[:, None] * dv
    out = np.clip(np.stack([a, b], axis=1), lo, hi)
    keep &= np.sqrt(((out[:, 1] - out[:, 0]) ** 2).sum(-1)) > 0
    return out, keep


# environment specification


@dataclass(frozen=True)
class RenewalLaw:
    """Positive gap law of a renewal process of lines."""

    kind: str  # "deterministic" | "exponential" | "uniform"
    a: float
    b: float = 0.0

    def __post_init__(self):
        if self.kind == "uniform":
            if not 0 < self.a < self.b:
                raise ValueError("uniform gaps need 0 < a < b")
        elif self.kind in ("deterministic", "exponential"):
            if not self.a > 0:
                raise ValueError("gap parameter must be > 0")
        else:
            raise ValueError(f"unknown renewal law {self.kind!r}")

    @property
    def mean(self) -> float:
        return 0.5 * (self.a + self.b) if self.kind == "uniform" else self.a

    def positions(self, start: float, stop: float, gen: np.random.Generator, include_start=True) -> np.ndarray:
        """Renewal epochs ``start, start + g1, ...`` up to `stop` (inclusive)."""
        span = stop - start
        if span / self.mean > LINE_CAP:
            raise CapExceededError("mean gap too small: line count exceeds cap")
        if self.kind == "deterministic":
            k = int(math.floor(span / self.a + 1e-12))
            pos = start + self.a * np.arange(k + 1)
        else:
            out = [start]
            cur = start
            while True:
                block = int(2 * span / self.mean) + 8
                gaps = gen.exponential(self.a, block) if self.kind == "exponential" else gen.uniform(self.a, self.b, block)
                ep = cur + np.cumsum(gaps)
                out.append(ep[ep <= stop])
                if ep[-1] > stop:
                    break
                cur = ep[-1]
            pos = np.concatenate([np.atleast_1d(o) for o in out])
        pos = pos[pos <= stop]
        return pos if include_start else pos[pos > start]


@dataclass(frozen=True)
class EnvironmentSpec:
    """Street-system law plus length normalization constant.

    Attributes
    ----------
    kind : str
        ``"pvt"``, ``"pdt"``, ``"manhattan"`` or ``"nested_manhattan"``.
    lambda_s : float
        Nucleus intensity for tessellations.
    law, inner_law : RenewalLaw
        Gap laws for (nested) Manhattan grids.
    c_norm : float
        Multiplier applied to the Cox intensity.
    """

    kind: str
    lambda_s: float = 1.0
    law: RenewalLaw | None = None
    inner_law: RenewalLaw | None = None
    c_norm: float = 1.0

    def __post_init__(self):
        if self.kind in ("pvt", "pdt"):
            if not self.lambda_s > 0:
                raise ValueError("lambda_s must be > 0")
        elif self.kind == "manhattan":
            if self.law is None:
                raise ValueError("manhattan grid needs a renewal law")
        elif self.kind == "nested_manhattan":
            if self.law is None or self.inner_law is None:
                raise ValueError("nested grid needs outer and inner laws")
        else:
            raise ValueError(f"unknown environment {self.kind!r}")
        if not self.c_norm > 0:
            raise ValueError("c_norm must be > 0")

    @property
    def padding(self) -> float:
        """Nucleus sampling margin for tessellations."""
        return 3.0 / math.sqrt(self.lambda_s) if self.kind in ("pvt", "pdt") else 0.0

    def with_c_norm(self, c: float) -> "EnvironmentSpec":
        return EnvironmentSpec(self.kind, self.lambda_s, self.law, self.inner_law, c)


# tessellations


def _check_nuclei(nuclei: PointCloud) -> np.ndarray:
    if nuclei.d != 2:
        raise ValueError("tessellations are planar")
    pts = nuclei.points
    if len(pts) < 3:
        raise ValueError("need at least 3 nuclei")
    centred = pts - pts.mean(axis=0)
    sv = np.linalg.svd(centred, compute_uv=False)
    if sv[-1] <= 1e-12 * max(sv[0], 1e-300):
        raise DegenerateInputError("all nuclei are collinear")
    return pts


def _voronoi(pts: np.ndarray) -> Voronoi:
    return Voronoi(pts)


def _ridge_segments(vor: Voronoi, pts: np.ndarray, far: float):
    """Finite representation of every ridge; unbounded ones end `far` away."""
    rp = np.asarray(vor.ridge_points, np.int64).reshape(-1, 2)
    rv = np.asarray(vor.ridge_vertices, np.int64).reshape(-1, 2)
    verts = vor.vertices
    a = verts[np.maximum(rv[:, 0], 0)]
    b = verts[np.maximum(rv[:, 1], 0)]
    open_ = (rv < 0).any(axis=1)
    if open_.any():
        p, q = pts[rp[open_, 0]], pts[rp[open_, 1]]
        t = q - p
        t /= np.linalg.norm(t, axis=1)[:, None]
        nrm = np.stack([-t[:, 1], t[:, 0]], axis=1)
        side = np.sign(((0.5 * (p + q) - pts.mean(axis=0)) * nrm).sum(axis=1))
        side[side == 0] = 1.0
        finite_end = np.where((rv[open_, 0] >= 0)[:, None], a[open_], b[open_])
        a[open_] = finite_end
        b[open_] = finite_end + nrm * side[:, None] * far
    src = np.sort(rp, axis=1)
    return np.stack([a, b], axis=1), src


def build_pvt(nuclei: PointCloud, clip: Window | None = None) -> SegmentSystem:
    """Voronoi cell boundaries of the nuclei, clipped to the analysis box.

    Parameters
    ----------
    nuclei : PointCloud
        At least 3 non-collinear planar points.
    clip : Window, optional
        Window of the result; defaults to the nuclei window.  Segments are
        clipped to its analysis box ``[0, L]^2``.
    """
    pts = _check_nuclei(nuclei)
    win = nuclei.window if clip is None else clip
    vor = _voronoi(pts)
    span = np.abs(np.concatenate([pts.ravel(), vor.vertices.ravel(), [win.hi, win.lo]])).max()
    seg, src = _ridge_segments(vor, pts, far=4.0 * span + 10.0)
    clipped, keep = _clip_segments(seg, 0.0, float(win.L))
    return SegmentSystem(win, clipped[keep], src[keep])


def build_pdt(nuclei: PointCloud, clip: Window | None = None) -> SegmentSystem:
    """Delaunay edges: nuclei pairs whose Voronoi cells share an edge.

    Cocircular groups (a Voronoi vertex equidistant from four or more
    nuclei) are triangulated by a fan from their lexicographically smallest
    nucleus.  Edges are clipped to the analysis box; ``sources`` gives the
    nucleus pair of each edge.
    """
    pts = _check_nuclei(nuclei)
    win = nuclei.window if clip is None else clip
    vor = _voronoi(pts)
    pairs = set()
    tol = 1e-10 * (1.0 + np.abs(pts).max())
    for (p, q), rv in zip(vor.ridge_points, vor.ridge_vertices):
        rv = np.asarray(rv)
        if (rv >= 0).all() and np.linalg.norm(vor.vertices[rv[0]] - vor.vertices[rv[1]]) <= tol:
            continue
        pairs.add((min(p, q), max(p, q)))
    pairs |= _cocircular_fans(vor, pts)
    src = np.array(sorted(pairs), np.int64).reshape(-1, 2)
    seg = np.stack([pts[src[:, 0]], pts[src[:, 1]]], axis=1)
    clipped, keep = _clip_segments(seg, 0.0, float(win.L))
    return SegmentSystem(win, clipped[keep], src[keep])


def _cocircular_fans(vor: Voronoi, pts: np.ndarray) -> set:
    tree = cKDTree(pts)
    extra = set()
    if not len(vor.vertices):
        return extra
    dist, _ = tree.query(vor.vertices)
    for v, r in zip(vor.vertices, dist):
        group = tree.query_ball_point(v, r * (1 + 1e-9) + 1e-12)
        if len(group) < 4:
            continue
        group = np.array(group)
        ang = np.arctan2(pts[group, 1] - v[1], pts[group, 0] - v[0])
        cyc = list(group[np.argsort(ang)])
        lex = min(cyc, key=lambda k: (pts[k, 0], pts[k, 1]))
        pos = cyc.index(lex)
        m = len(cyc)
        for off in range(2, m - 1):
            other = cyc[(pos + off) % m]
            extra.add((min(lex, other), max(lex, other)))
    return extra


# Manhattan grids


def build_manhattan(spec: EnvironmentSpec, rng: RngLike, window: Window) -> SegmentSystem:
    """Axis-parallel full-window lines at renewal positions from 0.

    The nested variant adds, independently inside every box of the outer
    grid, lines from the inner renewal law that stay within that box.
    """
    if spec.kind not in ("manhattan", "nested_manhattan"):
        raise ValueError("not a Manhattan environment")
    if window.d != 2:
        raise ValueError("Manhattan grids are planar")
    gen = as_generator(rng)
    L = float(window.L)
    xs = spec.law.positions(0.0, L, gen)
    ys = spec.law.positions(0.0, L, gen)
    segs = [np.array([[[x, 0.0], [x, L]] for x in xs]).reshape(-1, 2, 2),
            np.array([[[0.0, y], [L, y]] for y in ys]).reshape(-1, 2, 2)]
    if spec.kind == "nested_manhattan":
        xb = np.unique(np.concatenate([xs, [L]]))
        yb = np.unique(np.concatenate([ys, [L]]))
        inner = []
        count = 0
        for x0, x1 in zip(xb[:-1], xb[1:]):
            for y0, y1 in zip(yb[:-1], yb[1:]):
                ix = spec.inner_law.positions(x0, x1, gen, include_start=False)
                iy = spec.inner_law.positions(y0, y1, gen, include_start=False)
                ix, iy = ix[ix < x1], iy[iy < y1]
                count += ix.size + iy.size
                if count > LINE_CAP:
                    raise CapExceededError("nested line count exceeds cap")
                inner.extend([[x, y0], [x, y1]] for x in ix)
                inner.extend([[x0, y], [x1, y]] for y in iy)
        segs.append(np.asarray(inner, float).reshape(-1, 2, 2))
    return SegmentSystem(window, np.concatenate(segs, axis=0))


def build_environment(spec: EnvironmentSpec, window: Window, rng: RngLike) -> SegmentSystem:
    """Sample a street system of the given law on `window` (analysis box)."""
    gen = as_generator(rng)
    if spec.kind in ("pvt", "pdt"):
        nuc_win = Window(2, window.L, spec.padding)
        nuclei = sample_ppp(nuc_win, spec.lambda_s, gen)
        while len(nuclei) < 3:
            nuclei = sample_ppp(nuc_win, spec.lambda_s, gen)
        builder = build_pvt if spec.kind == "pvt" else build_pdt
        return builder(nuclei, clip=window)
    return build_manhattan(spec, gen, window)


def normalize_environment(
    spec: EnvironmentSpec,
    replications: int,
    rng: RngLike,
    window: Window | None = None,
) -> EstimateResult:
    """Estimate ``c_norm = 1 / E[length per unit area]`` by Monte Carlo.

    Length is measured in the half-open box ``[0, L)^2``.  The standard
    error follows from the delta method.

    Returns
    -------
    EstimateResult
        ``estimate`` is ``c_norm``; ``metadata["length_density"]`` holds the
        measured mean length per unit area and its standard error.
    """
    if replications < 100:
        raise ValueError("need at least 100 replications")
    window = Window(2, 20.0) if window is None else window
    gen = as_generator(rng)
    area = float(window.L) ** 2
    dens = np.empty(replications)
    for k in range(replications):
        system = build_environment(spec, window, gen)
        dens[k] = system.length_in_box(0.0, float(window.L)) / area
    mean = float(dens.mean())
    if mean <= 0:
        raise ValueError("zero measured length in every replication")
    se = float(dens.std(ddof=1) / math.sqrt(replications))
    seed = rng.seed if hasattr(rng, "seed") else 0
    return EstimateResult(1.0 / mean, se / mean**2, replications, seed,
                          {"length_density": mean, "length_density_stderr": se, "L": float(window.L)})


def sample_cox(segments: SegmentSystem, lam: float, rng: RngLike, cap: float = POINT_CAP) -> PointCloud:
    """Poisson process of intensity `lam` per unit length along the segments."""
    if not lam >= 0:
        raise ValueError("intensity must be >= 0")
    mean = lam * segments.total_length
    if mean > cap:
        raise CapExceededError(f"expected point count {mean:.3g} exceeds cap {cap:.3g}")
    gen = as_generator(rng)
    if mean == 0 or not len(segments):
        return PointCloud(segments.window, np.empty((0, 2)))
    counts = gen.poisson(lam * segments.lengths)
    owner = np.repeat(np.arange(len(segments)), counts)
    t = gen.random(owner.size)[:, None]
    seg = segments.segments[owner]
    pts = seg[:, 0] + t * (seg[:, 1] - seg[:, 0])
    return PointCloud(segments.window, pts)


# stabilization


def pvt_stabilization_radius(x, nuclei: PointCloud):
    """Distance from `x` (one point or an array of points) to the nearest nucleus."""
    if len(nuclei) == 0:
        raise ValueError("empty nucleus set")
    d, _ = cKDTree(nuclei.points).query(np.asarray(x, dtype=float))
    return d


class ZeroStabilization:
    """Stabilization field of a homogeneous Poisson process (identically 0)."""

    def __call__(self, x):
        return np.zeros(np.atleast_2d(x).shape[0])

    def sup_over_cube(self, center, side: float) -> float:
        return 0.0


class PVTStabilization:
    """Nearest-nucleus distance field of a Voronoi tessellation.

    The supremum over a cube is taken over a grid of mesh `mesh` (including
    the cube faces) together with all Voronoi vertices inside the cube.
    """

    def __init__(self, nuclei: PointCloud, mesh: float = 0.25):
        if len(nuclei) == 0:
            raise ValueError("empty nucleus set")
        self.nuclei = nuclei
        self.mesh = mesh
        self._tree = cKDTree(nuclei.points)
        self._vertices = Voronoi(nuclei.points).vertices if len(nuclei) >= 3 else np.empty((0, nuclei.d))

    def __call__(self, x):
        return self._tree.query(np.atleast_2d(np.asarray(x, float)))[0]

    def sup_over_cube(self, center, side: float) -> float:
        center = np.asarray(center, float)
        d = center.shape[0]
        k = max(1, int(math.ceil(side / self.mesh)))
        axis = np.linspace(-side / 2, side / 2, k + 1)
        grid = np.stack(np.meshgrid(*[axis] * d, indexing="ij"), -1).reshape(-1, d) + center
        v = self._vertices
        if len(v):
            inside = np.all(np.abs(v - center) <= side / 2, axis=1)
            grid = np.concatenate([grid, v[inside]])
        return float(self._tree.query(grid)[0].max())


def stabilization_exceedance(lambda_s: float, ns, reps: int, rng: RngLike) -> dict[int, EstimateResult]:
    """Empirical ``P(R(Q_n) < n)`` for the Voronoi field, per cube side ``n``.

    Nuclei are sampled on a padded box around ``Q_n`` wide enough that the
    field inside the cube is unaffected with high probability.
    """
    gen = as_generator(rng)
    out = {}
    for n in ns:
        hits = []
        for _ in range(reps):
            win = Window(2, float(n), padding=float(n) + 3.0 / math.sqrt(lambda_s))
            nuclei = sample_ppp(win, lambda_s, gen)
            if len(nuclei) < 3:
                hits.append(False)
                continue
            field_ = PVTStabilization(nuclei)
            hits.append(field_.sup_over_cube(np.full(2, n / 2.0), float(n)) < n)
        out[int(n)] = EstimateResult.from_indicators(hits, getattr(rng, "seed", 0), n=int(n))
    return out
