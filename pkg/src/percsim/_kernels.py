"""Compiled inner loops: cell-list pair search and disjoint-set labelling."""

import itertools

import numpy as np
from numba import njit


@njit(cache=True)
def _find(parent, x):
    # path halving
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True)
def union_pairs(parent, rank, ei, ej):
    for k in range(ei.shape[0]):
        a = _find(parent, ei[k])
        b = _find(parent, ej[k])
        if a == b:
            continue
        if rank[a] < rank[b]:
            a, b = b, a
        parent[b] = a
        if rank[a] == rank[b]:
            rank[a] += 1


@njit(cache=True)
def canonical_labels(parent):
    """Consecutive labels numbered by first appearance in index order."""
    n = parent.shape[0]
    root_label = np.full(n, -1, np.int64)
    labels = np.empty(n, np.int64)
    nxt = 0
    for i in range(n):
        r = _find(parent, i)
        if root_label[r] < 0:
            root_label[r] = nxt
            nxt += 1
        labels[i] = root_label[r]
    return labels


@njit(cache=True)
def _cell_index(points, lo, ncell, cell):
    n, d = points.shape
    lin = np.empty(n, np.int64)
    coords = np.empty((n, d), np.int64)
    stride = np.empty(d, np.int64)
    s = 1
    for k in range(d - 1, -1, -1):
        stride[k] = s
        s *= ncell[k]
    total = s
    for i in range(n):
        acc = 0
        for k in range(d):
            c = int((points[i, k] - lo[k]) / cell)
            if c < 0:
                c = 0
            elif c >= ncell[k]:
                c = ncell[k] - 1
            coords[i, k] = c
            acc += c * stride[k]
        lin[i] = acc
    order = np.argsort(lin, kind="mergesort")
    start = np.zeros(total + 1, np.int64)
    for i in range(n):
        start[lin[i] + 1] += 1
    for c in range(total):
        start[c + 1] += start[c]
    return coords, stride, order, start


@njit(cache=True)
def _cell_pairs(points, radius, lo, ncell, cell, offsets, fill, out_i, out_j, out_d):
    n, d = points.shape
    coords, stride, order, start = _cell_index(points, lo, ncell, cell)
    count = 0
    for i in range(n):
        for o in range(offsets.shape[0]):
            acc = 0
            ok = True
            for k in range(d):
                c = coords[i, k] + offsets[o, k]
                if c < 0 or c >= ncell[k]:
                    ok = False
                    break
                acc += c * stride[k]
            if not ok:
                continue
            for t in range(start[acc], start[acc + 1]):
                j = order[t]
                if j <= i:
                    continue
                sq = 0.0
                for k in range(d):
                    diff = points[i, k] - points[j, k]
                    sq += diff * diff
                dist = np.sqrt(sq)
                if dist < radius:
                    if fill:
                        out_i[count] = i
                        out_j[count] = j
                        out_d[count] = dist
                    count += 1
    return count


@njit(cache=True)
def _cell_union(points, radius, lo, ncell, cell, offsets):
    # union all pairs closer than radius without materializing them
    n, d = points.shape
    coords, stride, order, start = _cell_index(points, lo, ncell, cell)
    parent = np.arange(n)
    rank = np.zeros(n, np.int64)
    r2 = radius * radius
    for i in range(n):
        for o in range(offsets.shape[0]):
            acc = 0
            ok = True
            for k in range(d):
                c = coords[i, k] + offsets[o, k]
                if c < 0 or c >= ncell[k]:
                    ok = False
                    break
                acc += c * stride[k]
            if not ok:
                continue
            for t in range(start[acc], start[acc + 1]):
                j = order[t]
                if j <= i:
                    continue
                sq = 0.0
                for k in range(d):
                    diff = points[i, k] - points[j, k]
                    sq += diff * diff
                if sq < r2 * 1.0000001 and np.sqrt(sq) < radius:
                    a = _find(parent, i)
                    b = _find(parent, j)
                    if a != b:
                        if rank[a] < rank[b]:
                            a, b = b, a
                        parent[b] = a
                        if rank[a] == rank[b]:
                            rank[a] += 1
    return canonical_labels(parent)


_OFFSETS = {}


def _offsets(d):
    if d not in _OFFSETS:
        _OFFSETS[d] = np.array(list(itertools.product((-1, 0, 1), repeat=d)), dtype=np.int64)
    return _OFFSETS[d]


def _grid(points, radius, max_cells):
    lo = points.min(axis=0)
    extent = points.max(axis=0) - lo
    cell = float(radius)
    # coarser cells are still exact; they only bound memory
    while np.prod(np.floor(extent / cell) + 1) > max(max_cells, 4 * points.shape[0]):
        cell *= 2.0
    ncell = (np.floor(extent / cell) + 1).astype(np.int64)
    return lo, ncell, cell


def radius_labels(points, radius, max_cells=4_000_000):
    """Component labels of the graph joining points closer than `radius`.

    Same edge rule as :func:`close_pairs`, without storing the edges.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    n = points.shape[0]
    if n < 2 or not radius > 0:
        return np.arange(n, dtype=np.int64)
    lo, ncell, cell = _grid(points, radius, max_cells)
    return _cell_union(points, float(radius), lo, ncell, cell, _offsets(points.shape[1]))


def close_pairs(points, radius, max_cells=4_000_000):
    """All index pairs ``i < j`` with Euclidean distance strictly below `radius`.

    Uses a uniform cell list with cell side >= `radius`, so only the 3**d
    surrounding cells are scanned.  Returns ``(i, j, dist)`` sorted by
    ``(i, j)``.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    n = points.shape[0]
    if n < 2 or not radius > 0:
        return (np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.float64))
    lo, ncell, cell = _grid(points, radius, max_cells)
    offs = _offsets(points.shape[1])
    dummy_i = np.empty(0, np.int64)
    dummy_d = np.empty(0, np.float64)
    m = _cell_pairs(points, float(radius), lo, ncell, cell, offs, False, dummy_i, dummy_i, dummy_d)
    out_i = np.empty(m, np.int64)
    out_j = np.empty(m, np.int64)
    out_d = np.empty(m, np.float64)
    _cell_pairs(points, float(radius), lo, ncell, cell, offs, True, out_i, out_j, out_d)
    order = np.lexsort((out_j, out_i))
    return out_i[order], out_j[order], out_d[order]
