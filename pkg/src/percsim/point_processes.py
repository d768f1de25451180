"""Homogeneous Poisson point processes, independent markings, and Laplace
functional estimators (Monte Carlo and closed-form quadrature).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .errors import CapExceededError, QuadratureError
from .estimate import EstimateResult

#: hard cap on the expected number of points in a single sample
POINT_CAP = 10**8

_DEBUG = bool(os.environ.get("PERCSIM_DEBUG"))


@dataclass(frozen=True)
class Window:
    """Analysis box ``[0, L]^d`` surrounded by a sampling margin.

    Parameters
    ----------
    d : int
        Dimension, at least 2.
    L : float
        Side length of the analysis box.
    padding : float
        Width of the sampling margin; points are drawn on
        ``[-padding, L + padding]^d``.
    """

    d: int
    L: float
    padding: float = 0.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {self.d}")
        if not self.L > 0:
            raise ValueError(f"side L must be > 0, got {self.L}")
        if not self.padding >= 0:
            raise ValueError(f"padding must be >= 0, got {self.padding}")

    @property
    def lo(self) -> float:
        return -float(self.padding)

    @property
    def hi(self) -> float:
        return float(self.L) + float(self.padding)

    @property
    def volume(self) -> float:
        """Volume of the padded box."""
        return (self.hi - self.lo) ** self.d

    @property
    def inner_volume(self) -> float:
        return float(self.L) ** self.d

    def contains(self, points, padded: bool = True) -> np.ndarray:
        """Boolean mask of rows of `points` inside the (padded) closed box."""
        points = np.asarray(points, dtype=float).reshape(-1, self.d)
        lo, hi = (self.lo, self.hi) if padded else (0.0, float(self.L))
        return np.all((points >= lo) & (points <= hi), axis=1)

    def scaled(self, factor: float) -> "Window":
        return Window(self.d, self.L / factor, self.padding / factor)


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Finite point configuration inside a padded window."""

    window: Window
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, self.window.d)
        object.__setattr__(self, "points", pts)
        if pts.size and not self.window.contains(pts).all():
            raise ValueError("point outside the padded window")
        if _DEBUG and pts.shape[0] > 1:
            if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
                raise AssertionError("duplicate points in cloud")

    def __len__(self):
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.window.d

    def inner_mask(self) -> np.ndarray:
        return self.window.contains(self.points, padded=False)


@dataclass(frozen=True, eq=False)
class MarkedPointCloud:
    """Point cloud with one nonnegative scalar mark per point."""

    base: PointCloud
    marks: np.ndarray

    def __post_init__(self):
        marks = np.asarray(self.marks, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "marks", marks)
        if marks.shape[0] != len(self.base):
            raise ValueError("marks and points differ in length")
        if marks.size and not (marks >= 0).all():
            raise ValueError("marks must be nonnegative")

    def __len__(self):
        return len(self.base)

    @property
    def points(self) -> np.ndarray:
        return self.base.points

    @property
    def window(self) -> Window:
        return self.base.window

    @property
    def d(self) -> int:
        return self.base.d

    def inner_mask(self) -> np.ndarray:
        return self.base.inner_mask()


Cloud = Union[PointCloud, MarkedPointCloud]


@dataclass(frozen=True)
class MarkDistribution:
    """Law of a nonnegative scalar mark (radius or transmission power).

    Use the constructors :meth:`constant`, :meth:`uniform`,
    :meth:`pareto_tail`, :meth:`two_point`, :meth:`discrete` and
    :meth:`geometric` rather than the raw initializer.
    """

    kind: str
    params: tuple = ()

    def __post_init__(self):
        k, p = self.kind, self.params
        if k == "constant":
            if not p[0] > 0:
                raise ValueError("constant mark must be > 0 (P(rho=0) < 1)")
        elif k == "uniform":
            a, b = p
            if not (0 <= a < b):
                raise ValueError("uniform law needs 0 <= a < b")
        elif k == "pareto":
            alpha, scale = p
            if not (alpha > 0 and scale > 0):
                raise ValueError("pareto law needs alpha > 0 and scale > 0")
        elif k == "discrete":
            vals, probs = np.asarray(p[0], float), np.asarray(p[1], float)
            if vals.shape != probs.shape or vals.size == 0:
                raise ValueError("discrete law needs matching values and probabilities")
            if (vals < 0).any() or (probs < 0).any():
                raise ValueError("discrete law needs nonnegative values and probabilities")
            if abs(probs.sum() - 1.0) > 1e-12:
                raise ValueError("discrete probabilities must sum to 1")
            if probs[vals > 0].sum() <= 0:
                raise ValueError("P(rho=0) must be < 1")
        elif k == "geometric":
            if not 0 < p[0] <= 1:
                raise ValueError("geometric law needs 0 < p <= 1")
        else:
            raise ValueError(f"unknown mark law {k!r}")

    # constructors
    @classmethod
    def constant(cls, c: float) -> "MarkDistribution":
        return cls("constant", (float(c),))

    @classmethod
    def uniform(cls, a: float, b: float) -> "MarkDistribution":
        return cls("uniform", (float(a), float(b)))

    @classmethod
    def pareto_tail(cls, alpha: float, scale: float = 1.0) -> "MarkDistribution":
        """Law with ``P(rho > r) = min(1, (r/scale)^-alpha)``."""
        return cls("pareto", (float(alpha), float(scale)))

    @classmethod
    def discrete(cls, values: Sequence[float], probs: Sequence[float]) -> "MarkDistribution":
        return cls("discrete", (tuple(float(v) for v in values), tuple(float(q) for q in probs)))

    @classmethod
    def two_point(cls, r_min: float, p_min: float, r_max: float, p_max: float) -> "MarkDistribution":
        return cls.discrete((r_min, r_max), (p_min, p_max))

    @classmethod
    def geometric(cls, p: float) -> "MarkDistribution":
        """Integer law ``P(rho = k) = (1-p)^(k-1) p`` on ``k = 1, 2, ...``."""
        return cls("geometric", (float(p),))

    # sampling and law queries
    def sample(self, gen: np.random.Generator, size: int) -> np.ndarray:
        k, p = self.kind, self.params
        if k == "constant":
            return np.full(size, p[0])
        if k == "uniform":
            return gen.uniform(p[0], p[1], size)
        if k == "pareto":
            u = 1.0 - gen.random(size)  # (0, 1]
            return p[1] * u ** (-1.0 / p[0])
        if k == "discrete":
            vals = np.asarray(p[0])
            return vals[gen.choice(vals.size, size=size, p=np.asarray(p[1]))]
        return gen.geometric(p[0], size).astype(np.float64)

    def sf(self, r) -> np.ndarray:
        """Survival function ``P(rho > r)``."""
        r = np.asarray(r, dtype=float)
        k, p = self.kind, self.params
        if k == "constant":
            return np.where(r < p[0], 1.0, 0.0)
        if k == "uniform":
            return np.clip((p[1] - r) / (p[1] - p[0]), 0.0, 1.0)
        if k == "pareto":
            with np.errstate(divide="ignore", over="ignore"):
                return np.minimum(1.0, (np.maximum(r, 0.0) / p[1]) ** (-p[0]))
        if k == "discrete":
            vals, probs = np.asarray(p[0]), np.asarray(p[1])
            return (probs[None, :] * (vals[None, :] > r.reshape(-1, 1))).sum(axis=1).reshape(r.shape)
        q = 1.0 - p[0]
        kk = np.floor(np.maximum(r, 0.0))
        return np.where(r < 1.0, 1.0, q**kk)

    def mean(self) -> float:
        k, p = self.kind, self.params
        if k == "constant":
            return p[0]
        if k == "uniform":
            return 0.5 * (p[0] + p[1])
        if k == "pareto":
            return math.inf if p[0] <= 1 else p[0] * p[1] / (p[0] - 1)
        if k == "discrete":
            return float(np.dot(p[0], p[1]))
        return 1.0 / p[0]

    @property
    def upper(self) -> float:
        """Essential supremum of the law (``inf`` if unbounded)."""
        k, p = self.kind, self.params
        if k == "constant":
            return p[0]
        if k == "uniform":
            return p[1]
        if k == "discrete":
            vals, probs = np.asarray(p[0]), np.asarray(p[1])
            return float(vals[probs > 0].max())
        return math.inf

    @property
    def tail_exponent(self) -> float:
        """Largest ``alpha`` with ``P(rho > r) = O(r^-alpha)``; ``inf`` if light-tailed."""
        return self.params[0] if self.kind == "pareto" else math.inf

    def quadrature(self, n: int = 48) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights integrating functions of the mark against the law.

        Atoms are exact; absolutely continuous laws use Gauss-Legendre rules
        (for the Pareto law in ``v = P(rho > m)^(1/4)``).
        """
        k, p = self.kind, self.params
        if k == "constant":
            return np.array([p[0]]), np.array([1.0])
        if k == "discrete":
            vals, probs = np.asarray(p[0]), np.asarray(p[1])
            keep = probs > 0
            return vals[keep], probs[keep]
        if k == "geometric":
            q = 1.0 - p[0]
            kmax = 1 if q == 0 else max(1, int(math.ceil(math.log(1e-17) / math.log(q))) + 1)
            ks = np.arange(1, kmax + 1, dtype=float)
            return ks, p[0] * q ** (ks - 1)
        x, w = np.polynomial.legendre.leggauss(n)
        if k == "uniform":
            a, b = p
            return a + (b - a) * (x + 1) / 2, w / 2
        # u = v^4 flattens the endpoint singularity of moments at u -> 0
        v = (x + 1) / 2
        return p[1] * v ** (-4.0 / p[0]), 2.0 * w * v**3

    def ceil_pmf(self, jmax: int) -> np.ndarray:
        """``P(ceil(rho) = j)`` for ``j = 0 .. jmax``."""
        j = np.arange(jmax + 1, dtype=float)
        pmf = np.empty(jmax + 1)
        pmf[0] = 1.0 - float(self.sf(0.0))
        if jmax >= 1:
            s = self.sf(j)
            pmf[1:] = s[:-1] - s[1:]
        return np.maximum(pmf, 0.0)


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream addressed by ``(seed, stream, path)``.

    Identical addresses produce bit-identical draws.  :meth:`spawn` derives
    child streams (replications, probes) without consuming randomness.
    """

    seed: int
    stream: int = 0
    path: tuple = field(default=())

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def spawn(self, index: int) -> "RngStream":
        return RngStream(self.seed, self.stream, self.path + (int(index),))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream),) + self.path)
        return np.random.Generator(np.random.PCG64(ss))


RngLike = Union[RngStream, np.random.Generator]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return rng.generator()


def _check_count(mean: float, cap: float) -> None:
    if mean > cap:
        raise CapExceededError(f"expected point count {mean:.3g} exceeds cap {cap:.3g}")


def sample_ppp(window: Window, lam: float, rng: RngLike, cap: float = POINT_CAP) -> PointCloud:
    """Homogeneous Poisson process of intensity `lam` on the padded window."""
    if not lam >= 0:
        raise ValueError(f"intensity must be >= 0, got {lam}")
    mean = lam * window.volume
    _check_count(mean, cap)
    gen = as_generator(rng)
    n = gen.poisson(mean) if mean > 0 else 0
    pts = window.lo + (window.hi - window.lo) * gen.random((n, window.d))
    return PointCloud(window, pts)


def superpose(*clouds: PointCloud) -> PointCloud:
    """Union of clouds on a common window, in argument order."""
    win = clouds[0].window
    if any(c.window != win for c in clouds):
        raise ValueError("clouds live on different windows")
    return PointCloud(win, np.concatenate([c.points for c in clouds], axis=0))


def attach_marks(cloud: PointCloud, dist: MarkDistribution, rng: RngLike) -> MarkedPointCloud:
    """Independent i.i.d. marks from `dist`, one per point."""
    return MarkedPointCloud(cloud, dist.sample(as_generator(rng), len(cloud)))


@dataclass(frozen=True, eq=False)
class CloudBatch:
    """Many independent clouds stored back to back.

    Replication ``i`` owns rows ``offsets[i]:offsets[i+1]`` of `points`
    (and `marks`, when present).
    """

    window: Window
    points: np.ndarray
    counts: np.ndarray
    marks: np.ndarray | None = None

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.counts)])

    def __len__(self):
        return self.counts.shape[0]

    def cloud(self, i: int) -> Cloud:
        o = self.offsets
        base = PointCloud(self.window, self.points[o[i] : o[i + 1]])
        if self.marks is None:
            return base
        return MarkedPointCloud(base, self.marks[o[i] : o[i + 1]])


def sample_ppp_batch(
    window: Window,
    lam: float,
    rng: RngLike,
    reps: int,
    dist: MarkDistribution | None = None,
    cap: float = POINT_CAP,
) -> CloudBatch:
    """`reps` independent Poisson clouds drawn from a single stream.

    Positions are drawn before marks, so a constant mark law leaves the
    positions identical to the unmarked batch with the same stream.
    """
    if not lam >= 0:
        raise ValueError(f"intensity must be >= 0, got {lam}")
    mean = lam * window.volume
    _check_count(mean * reps, cap * 10)
    gen = as_generator(rng)
    counts = gen.poisson(mean, size=reps) if mean > 0 else np.zeros(reps, np.int64)
    total = int(counts.sum())
    pts = window.lo + (window.hi - window.lo) * gen.random((total, window.d))
    marks = None if dist is None else dist.sample(gen, total)
    return CloudBatch(window, pts, counts.astype(np.int64), marks)


# Laplace functionals

Field = Callable[..., np.ndarray]


@dataclass(frozen=True, eq=False)
class TabulatedField:
    """Piecewise-constant field on a regular grid over ``[lo, hi]^d``.

    ``values`` has one entry per grid cell; the field is zero outside the box.
    """

    lo: float
    hi: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if (v < 0).any():
            raise ValueError("tabulated field must be nonnegative")

    def __call__(self, points, marks=None):
        pts = np.asarray(points, dtype=float)
        shape = np.array(self.values.shape)
        rel = (pts - self.lo) / (self.hi - self.lo)
        inside = np.all((rel >= 0) & (rel < 1), axis=1)
        idx = np.clip(np.floor(rel * shape).astype(np.int64), 0, shape - 1)
        out = np.where(inside, self.values[tuple(idx.T)], 0.0)
        return out if marks is None else out * marks


def _field_sums(f: Field, points, marks, counts) -> np.ndarray:
    vals = f(points) if marks is None else f(points, marks)
    vals = np.broadcast_to(np.asarray(vals, dtype=float), (points.shape[0],))
    if vals.size and np.nanmin(vals) < 0:
        raise ValueError("field takes negative values")
    seg = np.repeat(np.arange(counts.shape[0]), counts)
    return np.bincount(seg, weights=vals, minlength=counts.shape[0])


def empirical_laplace(f: Field, clouds, seed: int = 0) -> EstimateResult:
    """Monte Carlo mean of ``exp(-sum_i f(X_i))`` over independent clouds.

    Parameters
    ----------
    f : callable
        ``f(points) -> values`` for unmarked clouds, ``f(points, marks)`` for
        marked ones.  Must be nonnegative.
    clouds : sequence of PointCloud / MarkedPointCloud, or CloudBatch
    seed : int
        Seed recorded in the result.
    """
    if isinstance(clouds, CloudBatch):
        pts, marks, counts = clouds.points, clouds.marks, clouds.counts
    else:
        clouds = list(clouds)
        if not clouds:
            raise ValueError("no clouds supplied")
        counts = np.array([len(c) for c in clouds], np.int64)
        pts = np.concatenate([c.points for c in clouds], axis=0)
        marked = [isinstance(c, MarkedPointCloud) for c in clouds]
        if any(marked) and not all(marked):
            raise ValueError("mixed marked and unmarked clouds")
        marks = np.concatenate([c.marks for c in clouds]) if all(marked) else None
    sums = _field_sums(f, pts, marks, counts)
    vals = np.exp(-sums)
    n = vals.shape[0]
    se = float(vals.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return EstimateResult(float(vals.mean()), se, n, seed, {"kind": "laplace"})


def campbell_laplace(
    f: Field,
    lam: float,
    window: Window,
    marks: MarkDistribution | None = None,
    rtol: float = 1e-6,
    max_points: int = 20_000_000,
) -> float:
    """Closed-form Laplace functional ``exp(lam * int (e^{-f} - 1))``.

    The integral runs over the padded window (times the mark law when
    `marks` is given) and is evaluated by adaptive midpoint refinement
    until the relative error of the result is below `rtol`.

    Raises
    ------
    QuadratureError
        If the evaluation budget is exhausted first.
    """
    if not lam >= 0:
        raise ValueError("intensity must be >= 0")
    d = window.d
    if marks is None:
        nodes, weights = None, None
    else:
        nodes, weights = marks.quadrature()

    def g(x):
        if nodes is None:
            v = np.asarray(f(x), dtype=float)
            v = np.broadcast_to(v, (x.shape[0],))
            if (v < 0).any():
                raise ValueError("field takes negative values")
            return np.expm1(-v)
        k = nodes.shape[0]
        xx = np.repeat(x, k, axis=0)
        mm = np.tile(nodes, x.shape[0])
        v = np.broadcast_to(np.asarray(f(xx, mm), dtype=float), (xx.shape[0],))
        if (v < 0).any():
            raise ValueError("field takes negative values")
        return (np.expm1(-v).reshape(-1, k) * weights).sum(axis=1)

    if lam == 0:
        return 1.0
    lo, hi = window.lo, window.hi
    m0 = 8
    h = (hi - lo) / m0
    grid = np.stack(np.meshgrid(*[lo + h * (np.arange(m0) + 0.5)] * d, indexing="ij"), -1).reshape(-1, d)
    sub = np.array(np.meshgrid(*[[-0.25, 0.25]] * d, indexing="ij")).reshape(d, -1).T
    centers, side = grid, h
    total_vol = window.volume
    accepted, accepted_err, evals = 0.0, 0.0, 0
    while True:
        vol = side**d
        coarse = vol * g(centers)
        kids = (centers[:, None, :] + side * sub[None, :, :]).reshape(-1, d)
        fine_each = (vol / sub.shape[0]) * g(kids)
        fine = fine_each.reshape(-1, sub.shape[0]).sum(axis=1)
        evals += centers.shape[0] * (1 + sub.shape[0])
        err = np.abs(fine - coarse)
        total_err = accepted_err + err.sum()
        if lam * total_err <= rtol:
            integral = accepted + fine.sum()
            break
        if evals + kids.shape[0] * (1 + sub.shape[0]) > max_points:
            raise QuadratureError("adaptive midpoint rule did not converge", lam * total_err)
        # a cell is final once its error is within its volume share of half the budget
        ok = np.nonzero(err <= 0.5 * rtol / lam * vol / total_vol)[0]
        accepted += fine[ok].sum()
        accepted_err += err[ok].sum()
        bad = np.ones(centers.shape[0], bool)
        bad[ok] = False
        centers = kids.reshape(-1, sub.shape[0], d)[bad].reshape(-1, d)
        side = side / 2
    return float(math.exp(lam * integral))
