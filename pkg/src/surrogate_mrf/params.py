"""Exponential parameters and marginal tables over a fixed graph.

Potentials are stored overcomplete: one length-``m`` table per node and one
``m x m`` table per edge (rows index the lower-numbered endpoint).  The
minimal representation drops state 0 everywhere; its dimension is
``N (m-1) + |E| (m-1)^2``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .graph import Graph

MARGINAL_KINDS = ("exact", "pseudo", "empirical")


def minimal_dimension(graph: Graph, num_states: int) -> int:
    k = num_states - 1
    return graph.num_nodes * k + graph.num_edges * k * k


@dataclass(frozen=True, eq=False)
class ExponentialParams:
    graph: Graph
    node: np.ndarray  # (N, m)
    edge: np.ndarray  # (E, m, m)

    def __post_init__(self):
        node = np.asarray(self.node, dtype=float)
        edge = np.asarray(self.edge, dtype=float)
        N, E = self.graph.num_nodes, self.graph.num_edges
        if node.ndim != 2 or node.shape[0] != N or node.shape[1] < 2:
            raise ValueError(f"node potentials must have shape ({N}, m), got {node.shape}")
        m = node.shape[1]
        if edge.shape != (E, m, m):
            raise ValueError(f"edge potentials must have shape ({E}, {m}, {m}), got {edge.shape}")
        if not (np.all(np.isfinite(node)) and np.all(np.isfinite(edge))):
            raise ValueError("potentials must be finite")
        node.setflags(write=False)
        edge.setflags(write=False)
        object.__setattr__(self, "node", node)
        object.__setattr__(self, "edge", edge)

    @property
    def num_states(self) -> int:
        return self.node.shape[1]

    @property
    def dim(self) -> int:
        return minimal_dimension(self.graph, self.num_states)

    @classmethod
    def zeros(cls, graph: Graph, num_states: int) -> ExponentialParams:
        return cls(graph, np.zeros((graph.num_nodes, num_states)),
                   np.zeros((graph.num_edges, num_states, num_states)))

    @classmethod
    def random(cls, graph: Graph, num_states: int, rng: np.random.Generator,
               scale: float = 1.0) -> ExponentialParams:
        return cls(graph, scale * rng.standard_normal((graph.num_nodes, num_states)),
                   scale * rng.standard_normal((graph.num_edges, num_states, num_states)))

    def __add__(self, other: ExponentialParams) -> ExponentialParams:
        if other.graph != self.graph:
            raise ValueError("parameters live on different graphs")
        return ExponentialParams(self.graph, self.node + other.node, self.edge + other.edge)

    def with_node_offset(self, offset: np.ndarray) -> ExponentialParams:
        return ExponentialParams(self.graph, self.node + offset, self.edge)

    def canonical(self) -> ExponentialParams:
        """Distribution-preserving reparameterization with every state-0 entry zero."""
        node = self.node.copy()
        edge = self.edge.copy()
        for e, (s, t) in enumerate(self.graph.edges):
            tab = edge[e]
            node[s] += tab[:, 0] - tab[0, 0]
            node[t] += tab[0, :] - tab[0, 0]
            edge[e] = tab - tab[:, [0]] - tab[[0], :] + tab[0, 0]
        node -= node[:, [0]]
        return ExponentialParams(self.graph, node, edge)

    def to_minimal(self) -> np.ndarray:
        c = self.canonical()
        return np.concatenate([c.node[:, 1:].ravel(), c.edge[:, 1:, 1:].ravel()])

    @classmethod
    def from_minimal(cls, graph: Graph, num_states: int, vec: np.ndarray) -> ExponentialParams:
        k = num_states - 1
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (minimal_dimension(graph, num_states),):
            raise ValueError("minimal vector has wrong length")
        N, E = graph.num_nodes, graph.num_edges
        node = np.zeros((N, num_states))
        edge = np.zeros((E, num_states, num_states))
        node[:, 1:] = vec[: N * k].reshape(N, k)
        edge[:, 1:, 1:] = vec[N * k:].reshape(E, k, k)
        return cls(graph, node, edge)

    def flat(self) -> np.ndarray:
        """Overcomplete parameter vector (node tables, then edge tables)."""
        return np.concatenate([self.node.ravel(), self.edge.ravel()])


@dataclass(frozen=True, eq=False)
class MarginalSet:
    """Node and edge probability tables (exact, pseudo or empirical)."""

    graph: Graph
    node: np.ndarray  # (N, m)
    edge: np.ndarray  # (E, m, m)
    kind: str = "exact"
    count: int | None = None  # sample size for empirical moments

    def __post_init__(self):
        if self.kind not in MARGINAL_KINDS:
            raise ValueError(f"unknown marginal kind {self.kind!r}")
        node = np.asarray(self.node, dtype=float)
        edge = np.asarray(self.edge, dtype=float)
        N, E = self.graph.num_nodes, self.graph.num_edges
        if node.ndim != 2 or node.shape[0] != N:
            raise ValueError("node marginals have wrong shape")
        m = node.shape[1]
        if edge.shape != (E, m, m):
            raise ValueError("edge marginals have wrong shape")
        if self.count is not None and self.count < 1:
            raise ValueError("empirical sample count must be positive")
        node.setflags(write=False)
        edge.setflags(write=False)
        object.__setattr__(self, "node", node)
        object.__setattr__(self, "edge", edge)

    @property
    def num_states(self) -> int:
        return self.node.shape[1]

    def to_minimal(self) -> np.ndarray:
        return np.concatenate([self.node[:, 1:].ravel(), self.edge[:, 1:, 1:].ravel()])

    def flat(self) -> np.ndarray:
        return np.concatenate([self.node.ravel(), self.edge.ravel()])

    def max_abs_diff(self, other: MarginalSet) -> float:
        return float(max(np.max(np.abs(self.node - other.node)),
                         np.max(np.abs(self.edge - other.edge), initial=0.0)))

    def is_strictly_positive(self) -> bool:
        return bool(np.all(self.node > 0) and np.all(self.edge > 0))


def inner_product(params: ExponentialParams, marg: MarginalSet) -> float:
    return float(np.sum(params.node * marg.node) + np.sum(params.edge * marg.edge))


def energy(params: ExponentialParams, x: Sequence[int]) -> float:
    """Unnormalized log-probability ``sum_s theta_s(x_s) + sum_st theta_st(x_s, x_t)``."""
    x = np.asarray(x, dtype=np.intp)
    if x.shape != (params.graph.num_nodes,):
        raise ValueError("configuration length does not match the graph")
    if np.any(x < 0) or np.any(x >= params.num_states):
        raise ValueError("configuration label out of range")
    ea = params.graph.edge_array()
    total = params.node[np.arange(len(x)), x].sum()
    if len(ea):
        total += params.edge[np.arange(len(ea)), x[ea[:, 0]], x[ea[:, 1]]].sum()
    return float(total)


def energies(params: ExponentialParams, X: np.ndarray) -> np.ndarray:
    """Vectorized :func:`energy` over the rows of ``X``."""
    X = np.asarray(X, dtype=np.intp)
    out = np.zeros(X.shape[0])
    for s in range(params.graph.num_nodes):
        out += params.node[s, X[:, s]]
    for e, (s, t) in enumerate(params.graph.edges):
        out += params.edge[e, X[:, s], X[:, t]]
    return out
