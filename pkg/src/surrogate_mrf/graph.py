"""Undirected graphs for pairwise Markov random fields."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Graph:
    """Simple connected undirected graph on vertices ``0..num_nodes-1``.

    Edges are stored as ``(s, t)`` pairs with ``s < t`` in the order given.
    ``grid`` holds ``(rows, cols)`` when the graph is a lattice with row-major
    node numbering ``r * cols + c``.
    """

    num_nodes: int
    edges: tuple[tuple[int, int], ...]
    grid: tuple[int, int] | None = None
    _neighbors: tuple[tuple[int, ...], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.num_nodes < 1:
            raise ValueError("graph needs at least one node")
        edges = tuple((int(s), int(t)) for s, t in self.edges)
        seen = set()
        for s, t in edges:
            if s == t:
                raise ValueError(f"self-loop at node {s}")
            if not (0 <= s < self.num_nodes and 0 <= t < self.num_nodes):
                raise ValueError(f"edge ({s}, {t}) out of range")
            if s > t:
                raise ValueError(f"edge ({s}, {t}) must satisfy s < t")
            if (s, t) in seen:
                raise ValueError(f"duplicate edge ({s}, {t})")
            seen.add((s, t))
        object.__setattr__(self, "edges", edges)
        nbrs = [[] for _ in range(self.num_nodes)]
        for s, t in edges:
            nbrs[s].append(t)
            nbrs[t].append(s)
        object.__setattr__(self, "_neighbors", tuple(tuple(n) for n in nbrs))
        if not self._is_connected():
            raise ValueError("graph must be connected")

    def _is_connected(self) -> bool:
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in self._neighbors[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == self.num_nodes

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, s: int) -> tuple[int, ...]:
        return self._neighbors[s]

    def edge_array(self) -> np.ndarray:
        """Edges as an ``(E, 2)`` integer array."""
        return np.array(self.edges, dtype=np.intp).reshape(-1, 2)

    def edge_index(self) -> dict[tuple[int, int], int]:
        return {e: i for i, e in enumerate(self.edges)}

    def is_tree(self) -> bool:
        return self.num_edges == self.num_nodes - 1

    def laplacian(self) -> np.ndarray:
        L = np.zeros((self.num_nodes, self.num_nodes))
        for s, t in self.edges:
            L[s, s] += 1
            L[t, t] += 1
            L[s, t] -= 1
            L[t, s] -= 1
        return L

    def detect_grid(self) -> Graph:
        """Return a copy carrying grid metadata if the edge set is a lattice.

        Factorizations ``rows * cols == num_nodes`` are tried with the fewest
        rows first, so the returned grid has the shortest columns.
        """
        if self.grid is not None:
            return self
        n = self.num_nodes
        mine = set(self.edges)
        for rows in range(1, n + 1):
            if n % rows:
                continue
            candidate = grid_graph(rows, n // rows)
            if set(candidate.edges) == mine:
                return Graph(n, self.edges, grid=(rows, n // rows))
        return self


def grid_graph(rows: int, cols: int) -> Graph:
    """Four-nearest-neighbour lattice with row-major node numbering."""
    edges = []
    for r in range(rows):
        for c in range(cols):
            s = r * cols + c
            if c + 1 < cols:
                edges.append((s, s + 1))
            if r + 1 < rows:
                edges.append((s, s + cols))
    edges.sort()
    return Graph(rows * cols, tuple(edges), grid=(rows, cols))


def cycle_graph(k: int) -> Graph:
    if k < 3:
        raise ValueError("a cycle needs at least 3 nodes")
    edges = [(i, i + 1) for i in range(k - 1)] + [(0, k - 1)]
    return Graph(k, tuple(sorted(edges)))


def path_graph(n: int) -> Graph:
    return Graph(n, tuple((i, i + 1) for i in range(n - 1)))


def random_tree(n: int, rng: np.random.Generator) -> Graph:
    """Random recursive tree: node ``i`` attaches to a uniform earlier node."""
    edges = []
    for i in range(1, n):
        j = int(rng.integers(0, i))
        edges.append((j, i))
    return Graph(n, tuple(sorted(edges)))
