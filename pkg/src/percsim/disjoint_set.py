"""Disjoint-set forest over integer indices."""

from __future__ import annotations

import numpy as np

from ._kernels import _find, canonical_labels, union_pairs


class DisjointSetForest:
    """Union-find with path halving and union by rank.

    Parameters
    ----------
    n : int
        Number of elements, indexed ``0 .. n-1``.

    Examples
    --------
    >>> f = DisjointSetForest(4)
    >>> f.union(0, 2)
    >>> f.labels().tolist()
    [0, 1, 0, 2]
    """

    def __init__(self, n: int):
        self.parent = np.arange(n, dtype=np.int64)
        self.rank = np.zeros(n, dtype=np.int64)

    def __len__(self):
        return self.parent.shape[0]

    def find(self, x: int) -> int:
        return int(_find(self.parent, np.int64(x)))

    def union(self, a: int, b: int) -> None:
        self.union_many(np.array([a], np.int64), np.array([b], np.int64))

    def union_many(self, ei, ej) -> None:
        ei = np.ascontiguousarray(ei, dtype=np.int64)
        ej = np.ascontiguousarray(ej, dtype=np.int64)
        if ei.shape != ej.shape:
            raise ValueError("endpoint arrays differ in length")
        if ei.size:
            union_pairs(self.parent, self.rank, ei, ej)

    def connected(self, a: int, b: int) -> bool:
        return self.find(a) == self.find(b)

    def labels(self) -> np.ndarray:
        """Component labels ``0..k-1`` numbered by first appearance."""
        if len(self) == 0:
            return np.empty(0, np.int64)
        return canonical_labels(self.parent)


def component_labels(n: int, ei, ej) -> np.ndarray:
    """Labels of the graph on ``n`` vertices with edges ``(ei[k], ej[k])``."""
    forest = DisjointSetForest(n)
    forest.union_many(ei, ej)
    return forest.labels()
