"""Spatial graphs over point clouds: Gilbert, Boolean and SINR graphs.

All edge rules use strict inequalities.  Neighbour candidates come from a
uniform cell list (``_kernels.close_pairs``); component labels come from a
disjoint-set forest.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Union

import numpy as np

from ._kernels import close_pairs
from .disjoint_set import component_labels
from .pathloss import PathLoss, pathloss_inverse, shifted_pathloss
from .point_processes import Cloud, MarkDistribution, MarkedPointCloud, PointCloud


@dataclass(eq=False)
class SpatialGraph:
    """Undirected graph on the points of a cloud.

    Attributes
    ----------
    cloud : PointCloud or MarkedPointCloud
    edges : ndarray of shape (m, 2)
        Pairs ``i < j``, sorted lexicographically.
    labels : ndarray of shape (n,)
        Component labels numbered by first appearance.
    metadata : dict
    """

    cloud: Cloud
    edges: np.ndarray
    labels: np.ndarray
    metadata: dict[str, Any] = field(default_factory=dict)
    _csr: tuple | None = field(default=None, repr=False)

    @classmethod
    def from_pairs(cls, cloud: Cloud, ei, ej, **metadata) -> "SpatialGraph":
        ei = np.asarray(ei, np.int64)
        ej = np.asarray(ej, np.int64)
        edges = np.stack([ei, ej], axis=1) if ei.size else np.empty((0, 2), np.int64)
        labels = component_labels(len(cloud), ei, ej)
        return cls(cloud, edges, labels, dict(metadata))

    @property
    def n(self) -> int:
        return len(self.cloud)

    def edge_set(self) -> set[tuple[int, int]]:
        return set(map(tuple, self.edges.tolist()))

    def neighbors(self, i: int) -> np.ndarray:
        """Sorted neighbour indices of vertex `i`."""
        if self._csr is None:
            src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
            dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
            order = np.lexsort((dst, src))
            indptr = np.zeros(self.n + 1, np.int64)
            np.add.at(indptr, src + 1, 1)
            self._csr = (np.cumsum(indptr), dst[order])
        indptr, idx = self._csr
        return idx[indptr[i] : indptr[i + 1]]

    def degree(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n)

    def to_csv(self, edge_path, label_path=None) -> None:
        """Write the edge list (``i,j``) and optionally ``index,label`` rows."""
        with open(edge_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j"])
            w.writerows(self.edges.tolist())
        if label_path is not None:
            with open(label_path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["index", "label"])
                w.writerows(enumerate(self.labels.tolist()))


def gilbert_graph(cloud: Cloud, r: float) -> SpatialGraph:
    """Edge between points at distance strictly below `r`."""
    if not r > 0:
        raise ValueError("connection radius must be > 0")
    i, j, _ = close_pairs(cloud.points, r)
    return SpatialGraph.from_pairs(cloud, i, j, rule="gilbert", r=float(r))


def boolean_graph(cloud: MarkedPointCloud, rule: str = "overlap") -> SpatialGraph:
    """Boolean-model graph with per-point radii given by the marks.

    ``rule="overlap"`` joins ``i, j`` when ``|X_i - X_j| < rho_i + rho_j``
    (the balls overlap); ``rule="min"`` when ``|X_i - X_j| < min(rho_i, rho_j)``.
    """
    marks = cloud.marks
    if rule not in ("overlap", "min"):
        raise ValueError(f"unknown rule {rule!r}")
    if len(cloud) < 2 or marks.max() <= 0:
        return SpatialGraph.from_pairs(cloud, [], [], rule=rule)
    reach = 2.0 * marks.max() if rule == "overlap" else marks.max()
    i, j, dist = close_pairs(cloud.points, reach)
    thr = marks[i] + marks[j] if rule == "overlap" else np.minimum(marks[i], marks[j])
    keep = dist < thr
    return SpatialGraph.from_pairs(cloud, i[keep], j[keep], rule=rule)


# SINR


@dataclass(frozen=True)
class SinrParams:
    """Noise power, interference factor, threshold and transmit power.

    `power` is a constant ``P > 0`` or a :class:`MarkDistribution` for
    random powers (carried as marks of a :class:`MarkedPointCloud`).
    """

    N0: float
    gamma: float
    tau: float
    power: Union[float, MarkDistribution] = 1.0

    def __post_init__(self):
        if not self.N0 > 0:
            raise ValueError("N0 must be > 0")
        if not self.gamma >= 0:
            raise ValueError("gamma must be >= 0")
        if not self.tau > 0:
            raise ValueError("tau must be > 0")
        if not isinstance(self.power, MarkDistribution) and not self.power > 0:
            raise ValueError("constant power must be > 0")

    @property
    def random_power(self) -> bool:
        return isinstance(self.power, MarkDistribution)

    def check(self, ell: PathLoss) -> None:
        """Raise if a constant power cannot reach any receiver; warn for random power."""
        level = self.tau * self.N0
        if self.random_power:
            if float(self.power.sf(level / ell.at_zero)) <= 0:
                warnings.warn("P(rho > N0 tau / l(0)) = 0: no link can ever form", RuntimeWarning, 2)
        elif not ell.at_zero > level / self.power:
            raise ValueError("infeasible: need l(0) > tau N0 / P")

    def replace(self, **kw) -> "SinrParams":
        vals = dict(N0=self.N0, gamma=self.gamma, tau=self.tau, power=self.power)
        vals.update(kw)
        return SinrParams(**vals)


def snr_radius(rho, params: SinrParams, ell: PathLoss):
    """Noise-limited reach ``l^-1(tau N0 / rho)``, 0 when ``tau N0 / rho >= l(0)``."""
    rho_arr = np.atleast_1d(np.asarray(rho, dtype=float))
    if (rho_arr < 0).any():
        raise ValueError("power must be >= 0")
    out = np.zeros_like(rho_arr)
    pos = rho_arr > 0
    if pos.any():
        out[pos] = pathloss_inverse(ell, params.tau * params.N0 / rho_arr[pos], clamp=True)
    return out if np.ndim(rho) else float(out[0])


def _powers(cloud: Cloud, params: SinrParams) -> np.ndarray:
    if isinstance(cloud, MarkedPointCloud):
        return cloud.marks
    if params.random_power:
        raise ValueError("random power needs a marked cloud")
    return np.full(len(cloud), float(params.power))


def shot_noise(z, cloud: Cloud, ell: PathLoss, a: float = 0.0, weights=None) -> np.ndarray:
    """Shot noise ``sum_i w_i l_a(|z - X_i|)`` at one or many locations.

    Marks act as weights for marked clouds unless `weights` is given.
    """
    z_arr = np.atleast_2d(np.asarray(z, dtype=float))
    pts = cloud.points
    if weights is None:
        weights = cloud.marks if isinstance(cloud, MarkedPointCloud) else np.ones(len(cloud))
    out = np.zeros(z_arr.shape[0])
    if len(pts):
        for s in range(0, z_arr.shape[0], 256):
            zz = z_arr[s : s + 256]
            dist = np.sqrt(((zz[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
            lvals = ell(dist) if a == 0 else shifted_pathloss(ell, a, dist)
            out[s : s + 256] = (lvals * weights[None, :]).sum(axis=1)
    return out if np.ndim(z) > 1 else out[0]


def sinr_value(i: int, j: int, cloud: Cloud, params: SinrParams, ell: PathLoss) -> float:
    """SINR of transmitter `i` at receiver `j`, interference from all other points."""
    if i == j:
        raise ValueError("i and j must differ")
    pts, rho = cloud.points, _powers(cloud, params)
    dist = np.sqrt(((pts - pts[j]) ** 2).sum(-1))
    contrib = rho * ell(dist)
    mask = np.ones(len(pts), bool)
    mask[[i, j]] = False
    return float(contrib[i] / (params.N0 + params.gamma * contrib[mask].sum()))


def received_interference(cloud: Cloud, rho: np.ndarray, ell: PathLoss, receivers: np.ndarray) -> np.ndarray:
    """Total received power at each receiver from every other point."""
    pts = cloud.points
    out = np.zeros(receivers.shape[0])
    reach = ell.support
    if math.isfinite(reach):
        # compact profile: only nearby transmitters contribute
        from scipy.spatial import cKDTree

        tree = cKDTree(pts)
        for t, j in enumerate(receivers):
            nb = np.array(sorted(tree.query_ball_point(pts[j], reach)), np.int64)
            nb = nb[nb != j]
            if nb.size:
                dist = np.sqrt(((pts[nb] - pts[j]) ** 2).sum(-1))
                out[t] = (rho[nb] * ell(dist)).sum()
        return out
    for s in range(0, receivers.shape[0], 128):
        rj = receivers[s : s + 128]
        dist = np.sqrt(((pts[rj][:, None, :] - pts[None, :, :]) ** 2).sum(-1))
        contrib = rho[None, :] * ell(dist)
        contrib[np.arange(rj.shape[0]), rj] = 0.0
        out[s : s + 128] = contrib.sum(axis=1)
    return out


def sinr_graph(cloud: Cloud, params: SinrParams, ell: PathLoss, active=None) -> SpatialGraph:
    """Bidirectional SINR graph.

    ``i ~ j`` iff ``l(|X_i - X_j|) > tau (N0 + gamma I_ij) / rho_i`` and the
    same with ``i, j`` swapped, where ``I_ij`` is the power received at
    ``X_j`` from all points other than ``i`` and ``j``.  Candidates are the
    pairs within both noise-limited reaches, which is exact because
    interference only lowers the SINR.

    Parameters
    ----------
    active : bool array, optional
        Points that may carry edges; inactive points only interfere.
        Vertices of the returned graph are the active points, in order.
    """
    rho = _powers(cloud, params)
    n = len(cloud)
    act = np.ones(n, bool) if active is None else np.asarray(active, bool)
    idx = np.nonzero(act)[0]
    sub_pts = cloud.points[idx]
    if isinstance(cloud, MarkedPointCloud):
        sub = MarkedPointCloud(PointCloud(cloud.window, sub_pts), cloud.marks[idx])
    else:
        sub = PointCloud(cloud.window, sub_pts)
    radii = snr_radius(rho[idx], params, ell)
    meta = dict(rule="sinr", gamma=params.gamma, tau=params.tau, N0=params.N0)
    if not params.random_power and ell.support < math.inf:
        level = params.tau * params.N0 / float(params.power)
        if level < float(ell(np.nextafter(ell.support, 0.0))):
            meta["r_B_fallback"] = "support radius"
    if idx.size < 2 or radii.max() <= 0:
        return SpatialGraph.from_pairs(sub, [], [], **meta)
    i, j, dist = close_pairs(sub_pts, radii.max())
    keep = dist < np.minimum(radii[i], radii[j])
    i, j, dist = i[keep], j[keep], dist[keep]
    if params.gamma > 0 and i.size:
        recv = np.unique(np.concatenate([i, j]))
        tot = np.zeros(idx.size)
        tot[recv] = received_interference(cloud, rho, ell, idx[recv])
        lval = ell(dist)
        rho_s = rho[idx]
        ex_j = np.maximum(tot[j] - rho_s[i] * lval, 0.0)  # at j, excluding i
        ex_i = np.maximum(tot[i] - rho_s[j] * lval, 0.0)  # at i, excluding j
        t, n0, g = params.tau, params.N0, params.gamma
        ok = (lval > t * (n0 + g * ex_j) / rho_s[i]) & (lval > t * (n0 + g * ex_i) / rho_s[j])
        i, j = i[ok], j[ok]
    return SpatialGraph.from_pairs(sub, i, j, **meta)
