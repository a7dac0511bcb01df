"""Thresholded graphs, order-2 clique complexes and their boundary operators."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected weighted graph stored as an edge list with ``i < j``."""

    n_nodes: int
    edges: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        seen = set()
        for i, j, w in self.edges:
            if i == j:
                raise ValueError("self-loops not allowed")
            if not (0 <= i < j < self.n_nodes):
                raise ValueError(f"edge ({i}, {j}) must satisfy 0 <= i < j < {self.n_nodes}")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i}, {j})")
            if not w >= 0 or not math.isfinite(w):
                raise ValueError(f"edge ({i}, {j}) has invalid weight {w}")
            seen.add((i, j))

    @classmethod
    def from_matrix(cls, a) -> "WeightedGraph":
        """Build a graph from a symmetric nonnegative matrix; zero entries are absent edges."""
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("adjacency contains non-finite entries")
        if np.any(np.diag(a) != 0):
            raise ValueError("self-loops not allowed")
        if not np.array_equal(a, a.T):
            raise ValueError("adjacency is not symmetric")
        if np.any(a < 0):
            raise ValueError("adjacency has negative weights")
        iu, ju = np.nonzero(np.triu(a, k=1))
        return cls(a.shape[0], tuple((int(i), int(j), float(a[i, j])) for i, j in zip(iu, ju)))

    def to_matrix(self) -> np.ndarray:
        a = np.zeros((self.n_nodes, self.n_nodes))
        for i, j, w in self.edges:
            a[i, j] = a[j, i] = w
        return a

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def density(self) -> float:
        pairs = self.n_nodes * (self.n_nodes - 1) / 2
        return self.n_edges / pairs if pairs else 0.0


@dataclass(frozen=True)
class SimplicialComplex2:
    """Nodes, edges and triangles of an order-2 complex.

    Edges are ``(i, j)`` with ``i < j`` and triangles ``(i, j, k)`` with
    ``i < j < k``; both lists are kept in lexicographic order, which fixes
    the orientation of every simplex (low to high index).
    """

    n_nodes: int
    edges: tuple[tuple[int, int], ...]
    triangles: tuple[tuple[int, int, int], ...] = ()
    edge_index: dict = field(init=False, repr=False, compare=False)
    triangle_index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        edges = tuple(sorted((int(i), int(j)) for i, j in self.edges))
        tris = tuple(sorted(tuple(int(v) for v in t) for t in self.triangles))
        for i, j in edges:
            if not 0 <= i < j < self.n_nodes:
                raise ValueError(f"bad edge ({i}, {j})")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "triangles", tris)
        eidx = {e: n for n, e in enumerate(edges)}
        if len(eidx) != len(edges):
            raise ValueError("duplicate edges")
        for i, j, k in tris:
            if not i < j < k:
                raise ValueError(f"triangle ({i}, {j}, {k}) not in increasing order")
            for face in ((i, j), (i, k), (j, k)):
                if face not in eidx:
                    raise ValueError(f"triangle ({i}, {j}, {k}) is missing face {face}")
        object.__setattr__(self, "edge_index", eidx)
        object.__setattr__(self, "triangle_index", {t: n for n, t in enumerate(tris)})

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def without_triangles(self) -> "SimplicialComplex2":
        return SimplicialComplex2(self.n_nodes, self.edges)

    def to_json(self) -> dict:
        return {
            "n_nodes": self.n_nodes,
            "edges": [list(e) for e in self.edges],
            "triangles": [list(t) for t in self.triangles],
        }

    @classmethod
    def from_json(cls, data: dict) -> "SimplicialComplex2":
        return cls(
            int(data["n_nodes"]),
            tuple(tuple(e) for e in data["edges"]),
            tuple(tuple(t) for t in data.get("triangles", [])),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> "SimplicialComplex2":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class BoundaryOperators:
    """Signed incidence matrices ``b1`` (nodes x edges) and ``b2`` (edges x triangles)."""

    b1: sp.csr_matrix
    b2: sp.csr_matrix

    @property
    def n0(self) -> int:
        return self.b1.shape[0]

    @property
    def n1(self) -> int:
        return self.b1.shape[1]

    @property
    def n2(self) -> int:
        return self.b2.shape[1]


def threshold_top_fraction(g: WeightedGraph, fraction: float) -> WeightedGraph:
    """Keep the ``ceil(fraction * n_edges)`` heaviest edges.

    Ties are resolved in favour of the lexicographically smaller ``(i, j)``.
    """
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    if not g.edges:
        raise ValueError("no edges to threshold")
    # guard against 0.2 * 10 = 2.0000000000000004 style round-off
    k = math.ceil(round(fraction * len(g.edges), 9))
    ranked = sorted(g.edges, key=lambda e: (-e[2], e[0], e[1]))
    return WeightedGraph(g.n_nodes, tuple(sorted(ranked[:k])))


def clique_complex_order2(g: WeightedGraph) -> SimplicialComplex2:
    """Clique complex truncated at triangles; edge weights are dropped."""
    nbrs: list[set[int]] = [set() for _ in range(g.n_nodes)]
    for i, j, _ in g.edges:
        nbrs[i].add(j)
        nbrs[j].add(i)
    tris = []
    for i, j, _ in g.edges:
        for k in nbrs[i] & nbrs[j]:
            if k > j:
                tris.append((i, j, k))
    return SimplicialComplex2(g.n_nodes, tuple((i, j) for i, j, _ in g.edges), tuple(tris))


def boundary_operators(k: SimplicialComplex2) -> BoundaryOperators:
    n1 = k.n_edges
    if n1:
        e = np.asarray(k.edges, dtype=np.int64)
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([np.arange(n1), np.arange(n1)])
        vals = np.concatenate([-np.ones(n1, np.int64), np.ones(n1, np.int64)])
    else:
        rows = cols = vals = np.zeros(0, np.int64)
    b1 = sp.csr_matrix((vals, (rows, cols)), shape=(k.n_nodes, n1), dtype=np.int64)

    n2 = k.n_triangles
    rows, cols, vals = [], [], []
    for c, (i, j, l) in enumerate(k.triangles):
        # d(i,j,l) = (j,l) - (i,l) + (i,j)
        rows += [k.edge_index[(j, l)], k.edge_index[(i, l)], k.edge_index[(i, j)]]
        cols += [c, c, c]
        vals += [1, -1, 1]
    b2 = sp.csr_matrix(
        (np.asarray(vals, np.int64), (np.asarray(rows, np.int64), np.asarray(cols, np.int64))),
        shape=(n1, n2),
        dtype=np.int64,
    )
    return BoundaryOperators(b1, b2)


def complete_graph(n: int, weight: float = 1.0) -> WeightedGraph:
    return WeightedGraph(n, tuple((i, j, weight) for i, j in combinations(range(n), 2)))


def path_graph(n: int) -> WeightedGraph:
    return WeightedGraph(n, tuple((i, i + 1, 1.0) for i in range(n - 1)))


def cycle_graph(n: int) -> WeightedGraph:
    edges = [(i, i + 1, 1.0) for i in range(n - 1)] + [(0, n - 1, 1.0)]
    return WeightedGraph(n, tuple(sorted(edges)))
