"""Finite-window crossing estimates, threshold bisection and sweeps.

A replication samples one configuration of the chosen model and records
whether a single cluster joins the two faces of the analysis box that are
orthogonal to the crossing axis.  Replication ``i`` of a run with stream
``rng`` always uses ``rng.spawn(i)``, so estimates do not depend on the
number of worker processes.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from ._kernels import radius_labels
from .environments import EnvironmentSpec, build_environment, sample_cox
from .errors import BracketError
from .estimate import EstimateResult
from .graphs import SinrParams, boolean_graph, sinr_graph, snr_radius
from .lattice import (
    bond_crossing,
    hexagon_coarse_grain,
    rhombus_crossing,
    sample_bond_lattice,
    site_percolation_crossing,
)
from .pathloss import PathLoss
from .point_processes import (
    MarkDistribution,
    MarkedPointCloud,
    PointCloud,
    RngStream,
    Window,
    attach_marks,
    sample_ppp,
)

MODELS = (
    "gilbert",
    "boolean_overlap",
    "boolean_min",
    "sinr_const",
    "sinr_random",
    "bond",
    "tri_site",
    "hex_coarse",
    "cox_gilbert",
)
CONTINUUM = ("gilbert", "boolean_overlap", "boolean_min", "sinr_const", "sinr_random", "hex_coarse", "cox_gilbert")


@dataclass(frozen=True)
class CrossingRule:
    """Crossing along `axis`: one cluster within `margin` of both faces."""

    axis: int = 0
    margin: float = 1.0

    def check(self, L: float) -> None:
        if not 0 <= self.margin < L / 2:
            raise ValueError(f"margin must lie in [0, L/2), got {self.margin}")


@dataclass(frozen=True)
class ModelConfig:
    """Parameters of one percolation model.

    Only the fields relevant to `model` are read.

    Attributes
    ----------
    model : str
        One of :data:`MODELS`.
    d, L : int, float
        Dimension and side of the analysis box (lattice side for
        ``bond`` / ``tri_site``, as ``n``).
    padding : float or None
        Sampling margin; defaults to the interference reach for SINR models,
        ``2 s`` for ``hex_coarse`` and 0 otherwise.
    lam : float
        Poisson intensity (per unit length on streets for ``cox_gilbert``).
    r : float
        Gilbert radius, or the constant radius of Boolean models without marks.
    marks : MarkDistribution or None
        Radii (Boolean) law.
    pathloss, sinr : PathLoss, SinrParams
    p : float
        Bond / site open probability.
    n : int
        Lattice side for discrete models.
    s : float
        Hexagon side.
    env : EnvironmentSpec or None
    margin : float or None
        Crossing margin; defaults to the connection reach.
    axis : int
    """

    model: str
    d: int = 2
    L: float = 20.0
    padding: float | None = None
    lam: float = 1.0
    r: float = 1.0
    marks: MarkDistribution | None = None
    pathloss: PathLoss | None = None
    sinr: SinrParams | None = None
    p: float = 0.5
    n: int = 64
    s: float = 1.0
    env: EnvironmentSpec | None = None
    margin: float | None = None
    axis: int = 0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.model in ("sinr_const", "sinr_random"):
            if self.pathloss is None or self.sinr is None:
                raise ValueError(f"{self.model} needs pathloss and sinr parameters")
            if (self.model == "sinr_random") != self.sinr.random_power:
                raise ValueError("sinr_random needs a power law, sinr_const a constant power")
            self.sinr.check(self.pathloss)
        if self.model == "cox_gilbert":
            if self.env is None:
                raise ValueError("cox_gilbert needs an environment")
            if self.d != 2:
                raise ValueError("street systems are planar")
        if self.model in ("tri_site", "hex_coarse") and self.d != 2:
            raise ValueError(f"{self.model} is planar")
        if not self.lam >= 0:
            raise ValueError("lam must be >= 0")
        if not self.r > 0:
            raise ValueError("r must be > 0")
        if not 0 <= self.p <= 1:
            raise ValueError("p must lie in [0, 1]")
        if not 0 <= self.axis < self.d:
            raise ValueError("axis out of range")

    def with_(self, **kw) -> "ModelConfig":
        return replace(self, **kw)

    def with_gamma(self, gamma: float) -> "ModelConfig":
        return replace(self, sinr=self.sinr.replace(gamma=float(gamma)))

    @property
    def radius_law(self) -> MarkDistribution:
        return self.marks if self.marks is not None else MarkDistribution.constant(self.r)

    @property
    def reach(self) -> float:
        """Longest possible edge length (a finite proxy for unbounded radii)."""
        m = self.model
        if m in ("gilbert", "cox_gilbert"):
            return self.r
        if m in ("boolean_overlap", "boolean_min"):
            up = self.radius_law.upper
            if not math.isfinite(up):
                up = self.r
            return 2 * up if m == "boolean_overlap" else up
        if m == "sinr_const":
            return snr_radius(self.sinr.power, self.sinr, self.pathloss)
        if m == "sinr_random":
            up = self.sinr.power.upper
            return snr_radius(up, self.sinr, self.pathloss) if math.isfinite(up) else self.r
        if m == "hex_coarse":
            return self.s
        return 0.0

    @property
    def window(self) -> Window:
        pad = self.padding
        if pad is None:
            pad = self.reach if self.model in ("sinr_const", "sinr_random") else (
                2 * self.s if self.model == "hex_coarse" else 0.0)
        return Window(self.d, float(self.L), float(pad))

    def rule(self) -> CrossingRule:
        margin = self.reach if self.margin is None else self.margin
        return CrossingRule(self.axis, float(margin))

    def to_dict(self) -> dict[str, Any]:
        from .config import model_config_to_dict

        return model_config_to_dict(self)


def scaling_transform(cloud: PointCloud, R: float) -> PointCloud:
    """Divide all coordinates and the window by ``R``."""
    if not R > 0:
        raise ValueError("scale factor must be > 0")
    if R == 1:
        return cloud
    base = cloud.base if isinstance(cloud, MarkedPointCloud) else cloud
    scaled = PointCloud(base.window.scaled(R), base.points / R)
    if isinstance(cloud, MarkedPointCloud):
        return MarkedPointCloud(scaled, cloud.marks / R)
    return scaled


def _spanning(points: np.ndarray, labels: np.ndarray, L: float, rule: CrossingRule) -> bool:
    if points.shape[0] == 0:
        return False
    x = points[:, rule.axis]
    low = labels[x <= rule.margin]
    high = labels[x >= L - rule.margin]
    if not low.size or not high.size:
        return False
    return bool(np.intersect1d(low, high, assume_unique=False).size)


def sample_model_cloud(config: ModelConfig, gen: np.random.Generator):
    """Draw the point configuration of a continuum model."""
    m = config.model
    if m == "cox_gilbert":
        win = Window(2, float(config.L), 0.0)
        streets = build_environment(config.env, win, gen)
        return sample_cox(streets, config.lam * config.env.c_norm, gen)
    cloud = sample_ppp(config.window, config.lam, gen)
    if m in ("boolean_overlap", "boolean_min"):
        return attach_marks(cloud, config.radius_law, gen)
    if m == "sinr_random":
        return attach_marks(cloud, config.sinr.power, gen)
    return cloud


def crossing_from_cloud(config: ModelConfig, cloud, rule: CrossingRule | None = None) -> bool:
    """Crossing indicator of a continuum model on a given configuration.

    Only points of the analysis box carry edges; for SINR models points in
    the padding still interfere.
    """
    rule = config.rule() if rule is None else rule
    L = float(cloud.window.L)
    m = config.model
    if m == "hex_coarse":
        lat = hexagon_coarse_grain(cloud, config.s, margin=rule.margin)
        return site_percolation_crossing(lat)
    inner = cloud.inner_mask()
    if m in ("sinr_const", "sinr_random"):
        g = sinr_graph(cloud, config.sinr, config.pathloss, active=inner)
        return _spanning(g.cloud.points, g.labels, L, rule)
    pts = cloud.points[inner]
    if m in ("gilbert", "cox_gilbert"):
        return _spanning(pts, radius_labels(pts, config.r), L, rule)
    sub = MarkedPointCloud(PointCloud(cloud.window, pts), cloud.marks[inner])
    g = boolean_graph(sub, "overlap" if m == "boolean_overlap" else "min")
    return _spanning(pts, g.labels, L, rule)


def replicate(config: ModelConfig, stream: RngStream, rule: CrossingRule | None = None) -> bool:
    """One crossing indicator from the given stream."""
    gen = stream.generator()
    m = config.model
    if m == "bond":
        return bond_crossing(sample_bond_lattice(config.d, config.n, config.p, gen), axis=config.axis)
    if m == "tri_site":
        n = config.n
        return rhombus_crossing(gen.random((n, n)) < config.p)
    if m in ("gilbert", "sinr_const", "sinr_random", "boolean_overlap", "boolean_min") and config.lam == 0:
        return False
    return crossing_from_cloud(config, sample_model_cloud(config, gen), rule)


def _run_chunk(args) -> list[bool]:
    config, rng, rule, indices = args
    return [replicate(config, rng.spawn(i), rule) for i in indices]


def default_jobs() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def crossing_probability(config: ModelConfig, reps: int, rng: RngStream, rule: CrossingRule | None = None,
                         n_jobs: int = 1) -> EstimateResult:
    """Fraction of `reps` replications that cross.

    The standard error is ``sqrt(p (1 - p) / reps)``.  With ``n_jobs > 1``
    replications are spread over worker processes and merged in index order.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    rule = config.rule() if rule is None else rule
    if config.model in CONTINUUM:
        rule.check(config.L)
    if n_jobs > 1 and reps > 1:
        chunks = np.array_split(np.arange(reps), min(n_jobs * 4, reps))
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            parts = pool.map(_run_chunk, [(config, rng, rule, c.tolist()) for c in chunks])
            hits = [h for part in parts for h in part]
    else:
        hits = _run_chunk((config, rng, rule, range(reps)))
    return EstimateResult.from_indicators(hits, rng.seed, model=config.model, stream=rng.stream,
                                          path=list(rng.path), margin=rule.margin, axis=rule.axis)


def _axis_config(config: ModelConfig, axis: str, value: float) -> ModelConfig:
    if axis == "lam":
        return config.with_(lam=float(value))
    if axis == "gamma":
        return config.with_gamma(value)
    if axis == "p":
        return config.with_(p=float(value))
    if axis == "r":
        return config.with_(r=float(value))
    raise ValueError(f"unknown axis {axis!r}")


@dataclass
class CriticalResult:
    """Outcome of a threshold bisection.

    Attributes
    ----------
    lo, hi : float
        Final bracket.
    trace : list of (float, EstimateResult)
        Every probe in evaluation order.
    warnings : list of str
    """

    lo: float
    hi: float
    trace: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def estimate(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo


def _monotone_violations(trace, increasing: bool) -> list[str]:
    pts = sorted(trace, key=lambda t: t[0])
    out = []
    for (x0, e0), (x1, e1) in zip(pts, pts[1:]):
        diff = (e0.estimate - e1.estimate) if increasing else (e1.estimate - e0.estimate)
        joint = math.hypot(e0.stderr, e1.stderr)
        if diff > 3 * joint:
            out.append(f"non-monotone probes at {x0:.6g} and {x1:.6g} beyond 3 stderr")
    return out


def find_critical(config: ModelConfig, axis: str, bracket: tuple[float, float], reps: int, rng: RngStream,
                  target: float = 0.5, tol: float = 0.01, n_jobs: int = 1, max_probes: int = 60) -> CriticalResult:
    """Bisect the parameter at which the crossing probability equals `target`.

    The bracket ends are probed first and must straddle `target`; the
    direction (increasing or decreasing in the parameter) is read off
    them.  Probe ``k`` uses the independent stream ``rng.spawn(k)``.

    Raises
    ------
    BracketError
        When the end probes do not straddle `target`.
    """
    lo, hi = map(float, bracket)
    if not lo < hi:
        raise ValueError("bracket must satisfy lo < hi")
    trace = []

    def probe(v):
        est = crossing_probability(_axis_config(config, axis, v), reps, rng.spawn(len(trace)), n_jobs=n_jobs)
        trace.append((v, est))
        return est.estimate

    f_lo, f_hi = probe(lo), probe(hi)
    if not (min(f_lo, f_hi) <= target <= max(f_lo, f_hi)) or f_lo == f_hi:
        raise BracketError(f"bracket [{lo}, {hi}] gives {f_lo:.4g}, {f_hi:.4g}: does not straddle {target}")
    increasing = f_hi > f_lo
    while hi - lo > tol and len(trace) < max_probes:
        mid = 0.5 * (lo + hi)
        f = probe(mid)
        if (f < target) == increasing:
            lo = mid
        else:
            hi = mid
    notes = _monotone_violations(trace, increasing)
    for msg in notes:
        warnings.warn(msg, RuntimeWarning, 2)
    return CriticalResult(lo, hi, trace, notes)


@dataclass
class SweepResult:
    """Crossing curve along a parameter grid."""

    grid: list
    curve: list
    gamma_star: float | None = None


def gamma_sweep(config: ModelConfig, gammas, reps: int, rng: RngStream, n_jobs: int = 1) -> SweepResult:
    """Crossing probability per interference factor with common seeds.

    Every grid point reuses the replication streams of `rng`, so per-seed
    edge sets are nested along the grid.  ``gamma_star`` is the largest
    grid value whose estimate exceeds 3 standard errors above 0 (0 if none).
    """
    gammas = [float(g) for g in gammas]
    if any(b < a for a, b in zip(gammas, gammas[1:])):
        raise ValueError("gamma grid must be sorted ascending")
    curve = [crossing_probability(config.with_gamma(g), reps, rng, n_jobs=n_jobs) for g in gammas]
    positive = [g for g, e in zip(gammas, curve) if e.estimate - 3 * e.stderr > 0]
    return SweepResult(gammas, curve, max(positive) if positive else 0.0)


def parameter_sweep(config: ModelConfig, axis: str, grid, reps: int, rng: RngStream, n_jobs: int = 1) -> SweepResult:
    """Crossing probability along any parameter axis with common seeds."""
    if axis == "gamma":
        return gamma_sweep(config, grid, reps, rng, n_jobs)
    grid = [float(v) for v in grid]
    curve = [crossing_probability(_axis_config(config, axis, v), reps, rng, n_jobs=n_jobs) for v in grid]
    return SweepResult(grid, curve)
