"""Brute-force reference implementations used as test oracles.

Everything here is written independently of the package internals: no
spatial grids, no union-find, no Qhull.  Only numpy and the Python
standard library are used.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np


# graphs


def pair_distances(points):
    pts = np.asarray(points, dtype=float)
    diff = pts[:, None, :] - pts[None, :, :]
    return np.sqrt((diff**2).sum(-1))


def all_pairs_edges(points, accept):
    """Edge set ``{(i, j): i < j, accept(dist, i, j)}`` by full enumeration.

    `accept` receives the full distance matrix and index grids and returns a
    boolean matrix.
    """
    n = len(points)
    if n < 2:
        return set()
    dist = pair_distances(points)
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    ok = accept(dist, ii, jj) & (ii < jj)
    return set(zip(*(a.tolist() for a in np.nonzero(ok))))


def gilbert_oracle(points, r):
    return all_pairs_edges(points, lambda dist, i, j: dist < r)


def overlap_oracle(points, radii):
    rad = np.asarray(radii, dtype=float)
    return all_pairs_edges(points, lambda dist, i, j: dist < rad[i] + rad[j])


def min_oracle(points, radii):
    rad = np.asarray(radii, dtype=float)
    return all_pairs_edges(points, lambda dist, i, j: dist < np.minimum(rad[i], rad[j]))


def sinr_oracle(points, powers, N0, gamma, tau, ell):
    """SINR edges by the literal two-sided ratio over all points.

    ``SINR(i -> j) = rho_i l(|X_i - X_j|) / (N0 + gamma sum_{k != i, j} rho_k l(|X_k - X_j|))``.
    """
    pts = np.asarray(points, dtype=float)
    rho = np.asarray(powers, dtype=float)
    n = len(pts)
    if n < 2:
        return set()
    gain = np.asarray(ell(pair_distances(pts)), dtype=float)  # gain[k, j] = l(|X_k - X_j|)
    received = rho[:, None] * gain
    np.fill_diagonal(received, 0.0)
    total = received.sum(axis=0)  # total[j] = sum_{k != j} rho_k l(.)
    # den[i, j] = N0 + gamma * (interference at j from everyone but i and j)
    den = N0 + gamma * (total[None, :] - received)
    ratio = received / den
    ok = (ratio > tau) & (ratio.T > tau)
    ii, jj = np.nonzero(np.triu(ok, k=1))
    return set(zip(ii.tolist(), jj.tolist()))


def sinr_literal(i, j, points, powers, N0, gamma, tau, ell):
    """One directed ratio, summing the interference term by term."""
    pts = np.asarray(points, dtype=float)
    sig = powers[i] * float(ell(np.linalg.norm(pts[i] - pts[j])))
    interf = 0.0
    for k in range(len(pts)):
        if k != i and k != j:
            interf += powers[k] * float(ell(np.linalg.norm(pts[k] - pts[j])))
    return sig / (N0 + gamma * interf)


def bfs_partition(n, edges):
    """Connected components by breadth-first search, as a set of frozensets."""
    adj = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = [False] * n
    parts = set()
    for s in range(n):
        if seen[s]:
            continue
        comp = [s]
        seen[s] = True
        q = deque([s])
        while q:
            u = q.popleft()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    comp.append(v)
                    q.append(v)
        parts.add(frozenset(comp))
    return parts


def labels_partition(labels):
    groups = {}
    for idx, lab in enumerate(np.asarray(labels).tolist()):
        groups.setdefault(lab, []).append(idx)
    return {frozenset(g) for g in groups.values()}


def crossing_oracle(points, edges, L, margin, axis=0):
    """Some BFS component touches both strips ``x <= margin`` and ``x >= L - margin``."""
    x = np.asarray(points, dtype=float)[:, axis] if len(points) else np.empty(0)
    for comp in bfs_partition(len(x), edges):
        idx = list(comp)
        if (x[idx] <= margin).any() and (x[idx] >= L - margin).any():
            return True
    return False


# Voronoi by half-plane constraints


def bisector_interval(pts, i, j):
    """Parameter interval of the bisector of ``(p_i, p_j)`` lying in both cells.

    The bisector is ``m + t u`` with ``u`` the unit normal of ``p_j - p_i``.
    Each other nucleus ``k`` cuts it with one linear inequality.  Returns
    ``(m, u, lo, hi)``; the pair is Voronoi-adjacent iff ``hi > lo``.
    """
    pi, pj = pts[i], pts[j]
    m = (pi + pj) / 2.0
    v = pj - pi
    u = np.array([-v[1], v[0]]) / np.hypot(*v)
    lo, hi = -math.inf, math.inf
    for k in range(len(pts)):
        if k == i or k == j:
            continue
        w = pts[k] - pi
        # |x - p_i|^2 <= |x - p_k|^2  <=>  2 x.w <= |p_k|^2 - |p_i|^2
        c = pts[k] @ pts[k] - pi @ pi - 2.0 * (m @ w)
        a = 2.0 * (u @ w)
        if abs(a) < 1e-300:
            if c < 0:
                return m, u, 0.0, -1.0
            continue
        t = c / a
        if a > 0:
            hi = min(hi, t)
        else:
            lo = max(lo, t)
        if hi <= lo:
            return m, u, lo, hi
    return m, u, lo, hi


def voronoi_adjacency(pts, tol=1e-9):
    pts = np.asarray(pts, dtype=float)
    out = set()
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            _, _, lo, hi = bisector_interval(pts, i, j)
            if hi - lo > tol:
                out.add((i, j))
    return out


def _clip_line_to_box(m, u, lo, hi, a, b):
    """Clip ``m + t u, t in [lo, hi]`` to the box ``[a, b]^2``."""
    for k in range(2):
        if abs(u[k]) < 1e-300:
            if not a <= m[k] <= b:
                return None
            continue
        t1, t2 = (a - m[k]) / u[k], (b - m[k]) / u[k]
        lo, hi = max(lo, min(t1, t2)), min(hi, max(t1, t2))
    if hi <= lo:
        return None
    return m + lo * u, m + hi * u


def voronoi_edges_in_box(pts, a, b, tol=1e-9):
    """Voronoi edges clipped to ``[a, b]^2``, keyed by nucleus pair ``(i, j)``."""
    pts = np.asarray(pts, dtype=float)
    segs = {}
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            m, u, lo, hi = bisector_interval(pts, i, j)
            if hi - lo <= tol:
                continue
            seg = _clip_line_to_box(m, u, lo, hi, a, b)
            if seg is not None and np.linalg.norm(seg[1] - seg[0]) > tol:
                segs[(i, j)] = seg
    return segs


def clip_polygon(poly, normal, offset):
    """Sutherland-Hodgman clip of `poly` to ``{x : normal . x <= offset}``."""
    out = []
    n = len(poly)
    for k in range(n):
        cur, nxt = poly[k], poly[(k + 1) % n]
        fc, fn = normal @ cur - offset, normal @ nxt - offset
        if fc <= 0:
            out.append(cur)
        if (fc < 0 < fn) or (fn < 0 < fc):
            t = fc / (fc - fn)
            out.append(cur + t * (nxt - cur))
    return out


def cell_polygon(pts, i, a, b):
    poly = [np.array([a, a]), np.array([b, a]), np.array([b, b]), np.array([a, b])]
    pi = pts[i]
    for k in range(len(pts)):
        if k == i:
            continue
        w = pts[k] - pi
        poly = clip_polygon(poly, 2.0 * w, pts[k] @ pts[k] - pi @ pi)
        if not poly:
            break
    return poly


def polygon_perimeter(poly):
    if len(poly) < 2:
        return 0.0
    return sum(float(np.linalg.norm(poly[(k + 1) % len(poly)] - poly[k])) for k in range(len(poly)))


# literal renormalization classifications


def _closed_cube(points, center, side):
    if len(points) == 0:
        return np.empty(0, np.int64)
    return np.nonzero(np.all(np.abs(points - center) <= side / 2.0, axis=1))[0]


def _joined(points, inner, outer, radius):
    """Every point of `inner` in one BFS component of the radius graph on `outer`."""
    if len(inner) <= 1:
        return True
    sub = points[outer]
    parts = bfs_partition(len(outer), gilbert_oracle(sub, radius))
    where = {int(g): t for t, g in enumerate(outer)}
    first = next(p for p in parts if where[int(inner[0])] in p)
    return all(where[int(g)] in first for g in inner)


def n_good_oracle(points, sites, n, r, stab_sup):
    flags = []
    for z in sites:
        c = n * np.asarray(z, dtype=float)
        cond1 = stab_sup(c, n) < n / 2.0
        cond2 = len(_closed_cube(points, c, n)) > 0
        cond3 = _joined(points, _closed_cube(points, c, 3 * n), _closed_cube(points, c, 6 * n), r)
        flags.append((cond1, cond2, cond3))
    return flags


def good_power_oracle(points, powers, sites, r, delta):
    flags = []
    for z in sites:
        c = np.asarray(z, dtype=float)
        q1 = _closed_cube(points, c, 1.0)
        strong = bool(len(q1)) and bool((powers[q1] > r).any())
        conn = _joined(points, _closed_cube(points, c, 3.0), _closed_cube(points, c, 6.0), delta)
        flags.append((strong, conn))
    return flags


def tame_oracle(points, sites, n, M, d, ell_at, ell0):
    """Returns per site ``(I_in, I_out, tame)`` with the shifted loss written out."""
    side = 12.0 * n * math.sqrt(d)
    shift = 6.0 * n * math.sqrt(d) / 2.0
    res = []
    for z in sites:
        c = n * np.asarray(z, dtype=float)
        i_in = i_out = 0.0
        for x in points:
            dist = float(np.linalg.norm(x - c))
            val = ell0 if dist < shift else float(ell_at(dist - shift))
            if np.all(np.abs(x - c) <= side / 2.0):
                i_in += val
            else:
                i_out += val
        res.append((i_in, i_out, i_in <= M))
    return res
