"""Finite trees and the exact distance functionals used as oracles.

Breadth-first searches and shortest paths run through ``scipy.sparse.csgraph``.
When a tree has no root, vertex 0 anchors the parent and depth arrays.
"""

from pathlib import Path
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components, shortest_path

from shared.models.base import FrozenModel
from .config import EXACT_REGIME_MAX_N, MASS_TOL
from .errors import ExactRegimeExceededError, InvalidTreeError
from .services.logger import get_logger

logger = get_logger(__name__)

# Rows of the distance matrix materialized at once by the exact functionals
_BLOCK_CELLS = 4_000_000


class Tree:
    """Immutable finite tree with an optional root and optional vertex weights."""

    __slots__ = ("n", "edges", "root", "weights", "labels",
                 "parent", "depth", "order", "_adjacency")

    def __init__(self, n: int, edges: np.ndarray, root: Optional[int] = None,
                 weights: Optional[Sequence[float]] = None,
                 labels: Optional[Sequence[str]] = None):
        if n < 1:
            raise InvalidTreeError(f"a tree needs at least one vertex, got n={n}")
        edges = np.array(edges, dtype=np.int64).reshape(-1, 2)
        if edges.shape[0] != n - 1:
            raise InvalidTreeError(f"a tree on {n} vertices has {n - 1} edges, got {edges.shape[0]}")
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise InvalidTreeError("edge endpoint out of range")
        if edges.size and np.any(edges[:, 0] == edges[:, 1]):
            raise InvalidTreeError("self-loops are not allowed")
        if root is not None and not 0 <= root < n:
            raise InvalidTreeError(f"root {root} out of range")

        adjacency = _adjacency(n, edges)
        if n > 1:
            count, _ = connected_components(adjacency, directed=False)
            if count != 1:
                raise InvalidTreeError(f"edges do not connect the vertices ({count} components)")

        w = None
        if weights is not None:
            w = np.array(weights, dtype=float)
            if w.shape != (n,):
                raise InvalidTreeError(f"expected {n} weights, got {w.size}")
            if np.any(~np.isfinite(w)) or np.any(w < 0):
                raise InvalidTreeError("weights must be finite and nonnegative")
            if abs(w.sum() - 1.0) > MASS_TOL * max(n, 1):
                raise InvalidTreeError(f"weights sum to {w.sum()!r}, not 1")
            w.setflags(write=False)

        anchor = 0 if root is None else root
        order, pred = breadth_first_order(adjacency, anchor, directed=False,
                                          return_predecessors=True)
        parent = np.where(pred < 0, -1, pred).astype(np.int64)
        depth = shortest_path(adjacency, directed=False, unweighted=True,
                              indices=anchor).astype(np.int64)

        for arr in (edges, parent, depth, order):
            arr.setflags(write=False)
        for name, value in (("n", int(n)), ("edges", edges), ("root", root), ("weights", w),
                            ("labels", tuple(labels) if labels is not None else None),
                            ("parent", parent), ("depth", depth), ("order", order),
                            ("_adjacency", adjacency)):
            object.__setattr__(self, name, value)

    def __setattr__(self, name, value):
        raise AttributeError("Tree is immutable")

    def __repr__(self) -> str:
        return f"Tree(n={self.n}, root={self.root}, weighted={self.weights is not None})"

    @classmethod
    def from_edges(cls, edges: Iterable[Tuple[int, int]], n: Optional[int] = None,
                   root: Optional[int] = None, weights: Optional[Sequence[float]] = None) -> "Tree":
        arr = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if n is None:
            n = int(arr.max()) + 1 if arr.size else 1
        return cls(n, arr, root=root, weights=weights)

    @classmethod
    def from_parents(cls, parents: Sequence[int], weights: Optional[Sequence[float]] = None) -> "Tree":
        """Rooted tree from a parent array where the root has parent -1."""
        par = np.asarray(parents, dtype=np.int64)
        roots = np.flatnonzero(par < 0)
        if roots.size != 1:
            raise InvalidTreeError(f"expected exactly one root, found {roots.size}")
        child = np.flatnonzero(par >= 0)
        return cls(par.size, np.column_stack([par[child], child]), root=int(roots[0]),
                   weights=weights)

    def with_weights(self, weights: Optional[Sequence[float]]) -> "Tree":
        return Tree(self.n, self.edges, root=self.root, weights=weights, labels=self.labels)

    def with_root(self, root: Optional[int]) -> "Tree":
        return Tree(self.n, self.edges, root=root, weights=self.weights, labels=self.labels)

    @property
    def adjacency(self) -> csr_matrix:
        return self._adjacency

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n)

    def vertex_weights(self) -> np.ndarray:
        """The weights, or the uniform vector when the tree is unweighted."""
        if self.weights is None:
            return np.full(self.n, 1.0 / self.n)
        return self.weights

    def canonical_key(self) -> Tuple[Tuple[int, int], ...]:
        """Sorted edge set; equal for equal labelled trees."""
        e = np.sort(self.edges, axis=1)
        return tuple(map(tuple, e[np.lexsort((e[:, 1], e[:, 0]))].tolist()))

    def to_edge_list(self, path: Union[str, Path], weights_path: Union[str, Path, None] = None) -> None:
        Path(path).write_text("".join(f"{u} {v}\n" for u, v in self.edges.tolist()))
        if weights_path is not None and self.weights is not None:
            Path(weights_path).write_text("".join(f"{w!r}\n" for w in self.weights.tolist()))


def _adjacency(n: int, edges: np.ndarray) -> csr_matrix:
    data = np.ones(edges.shape[0], dtype=np.int8)
    return coo_matrix((data, (edges[:, 0], edges[:, 1])), shape=(n, n)).tocsr()


def read_tree(path: Union[str, Path], weights_path: Union[str, Path, None] = None,
              root: Optional[int] = None) -> Tree:
    """Read a 0-indexed "u v" edge list and an optional one-weight-per-line file."""
    rows = [line.split() for line in Path(path).read_text().splitlines()
            if line.strip() and not line.lstrip().startswith("#")]
    for lineno, row in enumerate(rows, 1):
        if len(row) != 2:
            raise InvalidTreeError(f"{path}: malformed edge line {lineno}: {' '.join(row)!r}")
    edges = np.asarray([[int(u), int(v)] for u, v in rows], dtype=np.int64).reshape(-1, 2)
    weights = None
    n = int(edges.max()) + 1 if edges.size else 1
    if weights_path is not None:
        weights = [float(x) for x in Path(weights_path).read_text().split()]
        n = len(weights)
    return Tree(n, edges, root=root, weights=weights)


def path_tree(n: int, root: Optional[int] = 0) -> Tree:
    """Path 0 - 1 - ... - (n-1), rooted at an end by default."""
    v = np.arange(n - 1, dtype=np.int64)
    return Tree(n, np.column_stack([v, v + 1]), root=root)


def star_tree(n: int, root: Optional[int] = 0) -> Tree:
    """Star with centre 0 and leaves 1..n-1, rooted at the centre by default."""
    leaves = np.arange(1, n, dtype=np.int64)
    return Tree(n, np.column_stack([np.zeros_like(leaves), leaves]), root=root)


def distance(tree: Tree, v: int, w: int) -> int:
    """Graph distance by climbing to the lowest common ancestor."""
    for x in (v, w):
        if not 0 <= x < tree.n:
            raise InvalidTreeError(f"vertex {x} out of range for n={tree.n}")
    d = 0
    parent, depth = tree.parent, tree.depth
    while depth[v] > depth[w]:
        v, d = parent[v], d + 1
    while depth[w] > depth[v]:
        w, d = parent[w], d + 1
    while v != w:
        v, w, d = parent[v], parent[w], d + 2
    return int(d)


def subtree_masses(tree: Tree, weights: Optional[np.ndarray] = None) -> np.ndarray:
    """Per-vertex size (or weight) of the subtree hanging below it, relative to the anchor."""
    mass = np.ones(tree.n, dtype=np.int64) if weights is None else np.array(weights, dtype=float)
    by_depth = np.argsort(tree.depth, kind="stable")
    cuts = np.searchsorted(tree.depth[by_depth], np.arange(1, tree.depth.max() + 2))
    for d in range(len(cuts) - 1, 0, -1):
        level = by_depth[cuts[d - 1]:cuts[d]]
        np.add.at(mass, tree.parent[level], mass[level])
    return mass


class TreeSummary(FrozenModel):
    n: int
    diameter: int
    height: Optional[int] = None
    total_path_length: Optional[int] = None
    mean_pairwise_distance: float
    weighted_depth: Optional[float] = None


def pairwise_distance_sum(tree: Tree) -> int:
    """Sum of d(v, w) over ordered pairs, via the edge-split identity."""
    sizes = subtree_masses(tree)
    below = sizes[tree.parent >= 0]
    return int(np.sum(2 * below * (tree.n - below)))


def mean_pairwise_distance(tree: Tree) -> float:
    """E d(V1, V2) for independent vertices drawn uniformly, or per the weights."""
    if tree.weights is None:
        return pairwise_distance_sum(tree) / tree.n ** 2
    below = subtree_masses(tree, tree.weights)[tree.parent >= 0]
    return float(np.sum(2.0 * below * (1.0 - below)))


def diameter(tree: Tree) -> int:
    if tree.n == 1:
        return 0
    d0 = shortest_path(tree.adjacency, directed=False, unweighted=True, indices=0)
    far = int(np.argmax(d0))
    d1 = shortest_path(tree.adjacency, directed=False, unweighted=True, indices=far)
    return int(d1.max())


def summary(tree: Tree) -> TreeSummary:
    rooted = tree.root is not None
    weighted_depth = None
    if rooted and tree.weights is not None:
        weighted_depth = float(np.dot(tree.weights, tree.depth))
    return TreeSummary(
        n=tree.n,
        diameter=diameter(tree),
        height=int(tree.depth.max()) if rooted else None,
        total_path_length=int(tree.depth.sum()) if rooted else None,
        mean_pairwise_distance=mean_pairwise_distance(tree),
        weighted_depth=weighted_depth,
    )


def _check_exact_regime(tree: Tree) -> None:
    if tree.n > EXACT_REGIME_MAX_N:
        raise ExactRegimeExceededError(tree.n, EXACT_REGIME_MAX_N)


def _distance_blocks(tree: Tree):
    rows = max(1, _BLOCK_CELLS // tree.n)
    for start in range(0, tree.n, rows):
        idx = np.arange(start, min(start + rows, tree.n))
        yield idx, shortest_path(tree.adjacency, directed=False, unweighted=True, indices=idx)


class PairwiseDefect(FrozenModel):
    """Sums over ordered pairs of p_v p_w (1 - exp(-beta d)) and p_v p_w beta d."""

    beta: float
    defect: float
    linear: float


def pairwise_defect(tree: Tree, beta: float) -> PairwiseDefect:
    """Both sums accumulate over identical blocks in identical order, and
    -expm1(-x) <= x holds termwise in floating point, so defect <= linear exactly."""
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    _check_exact_regime(tree)
    p = tree.weights
    defect = linear = 0.0
    for idx, dist in _distance_blocks(tree):
        x = beta * dist
        d_term, l_term = -np.expm1(-x), x
        if p is not None:
            pair = p[idx, None] * p[None, :]
            d_term, l_term = pair * d_term, pair * l_term
        defect += float(d_term.sum())
        linear += float(l_term.sum())
    if p is None:
        defect /= tree.n ** 2
        linear /= tree.n ** 2
    return PairwiseDefect(beta=beta, defect=defect, linear=linear)


def laplace_distance_sum(tree: Tree, beta: float) -> float:
    """Sum over ordered pairs (diagonal included) of p_v p_w exp(-beta d(v, w))."""
    if beta < 0:
        raise ValueError(f"beta must be nonnegative, got {beta}")
    _check_exact_regime(tree)
    p = tree.weights
    total = 0.0
    for idx, dist in _distance_blocks(tree):
        term = np.exp(-beta * dist)
        if p is not None:
            term = p[idx, None] * p[None, :] * term
        total += float(term.sum())
    return total if p is not None else total / tree.n ** 2


def sample_vertex(tree: Tree, rng: np.random.Generator) -> int:
    return int(sample_vertices(tree, rng, 1)[0])


def sample_vertices(tree: Tree, rng: np.random.Generator, size: int) -> np.ndarray:
    """Independent vertices, uniform or distributed per the weights."""
    if tree.weights is None:
        return rng.integers(0, tree.n, size=size)
    return rng.choice(tree.n, size=size, p=tree.weights)
