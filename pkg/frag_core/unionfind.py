from typing import Optional, Sequence

import numpy as np


class UnionFind:
    """Disjoint sets over 0..n-1 with union by size and path compression.

    A root stores minus its set size in ``parents``; every root also carries a
    mass (vertex count, or the sum of vertex weights) and a free-form label.
    """

    def __init__(self, n: int, masses: Optional[Sequence[float]] = None):
        self.n = n
        self.parents = [-1] * n
        self.mass = list(masses) if masses is not None else [1] * n
        self.label = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parents[root] >= 0:
            root = self.parents[root]
        while self.parents[x] >= 0 and self.parents[x] != root:
            self.parents[x], x = root, self.parents[x]
        return root

    def union(self, x: int, y: int) -> int:
        """Merge the sets of x and y; returns the surviving root."""
        root_x = self.find(x)
        root_y = self.find(y)
        if root_x == root_y:
            return root_x

        if self.parents[root_x] > self.parents[root_y]:
            root_x, root_y = root_y, root_x
        self.parents[root_x] += self.parents[root_y]
        self.parents[root_y] = root_x
        self.mass[root_x] += self.mass[root_y]
        return root_x

    def size(self, x: int) -> int:
        return -self.parents[self.find(x)]

    def is_same(self, x: int, y: int) -> bool:
        return self.find(x) == self.find(y)

    def roots(self) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.parents) < 0)
