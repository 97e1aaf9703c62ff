"""Exact inference on grid graphs by column-wise transfer matrices.

Each grid column is treated as a single super-variable with ``m**rows``
states, turning the lattice into a chain.  Forward/backward recursions then
give exact node, vertical-edge and horizontal-edge marginals, the log
partition function, and exact samples (forward filtering, backward sampling).
"""
from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .exact import (
    batch_node_marginals_bruteforce,
    exact_marginals_bruteforce,
    sample_bruteforce,
)
from .params import ExponentialParams, MarginalSet

MAX_COLUMN_STATES = 4096


def _log_matvec(f: np.ndarray, H: np.ndarray, Hmax: float, safe: bool) -> np.ndarray:
    """``log sum_a exp(f[..., a] + H[a, b])`` for each ``b``."""
    if not safe:
        return logsumexp(f[..., :, None] + H, axis=-2)
    fmax = f.max(axis=-1, keepdims=True)
    return np.log(np.exp(f - fmax) @ np.exp(H - Hmax)) + fmax + Hmax


class GridTransfer:
    """Precomputed column structure for a grid-structured model.

    The horizontal transfer matrices depend only on edge potentials, so one
    instance can evaluate many node-potential offsets (e.g. posteriors for
    several observation vectors) cheaply.
    """

    def __init__(self, params: ExponentialParams, max_column_states: int = MAX_COLUMN_STATES):
        graph = params.graph
        if graph.grid is None:
            graph = graph.detect_grid()
        if graph.grid is None:
            raise ValueError("transfer-matrix inference needs a grid graph")
        rows, cols = graph.grid
        m = params.num_states
        S = m ** rows
        if S > max_column_states:
            raise ValueError(f"column state space {m}**{rows} = {S} exceeds {max_column_states}")
        self.params = params
        self.graph = graph
        self.rows, self.cols, self.m, self.S = rows, cols, m, S
        powers = m ** np.arange(rows - 1, -1, -1)
        self.labels = (np.arange(S)[:, None] // powers[None, :]) % m  # (S, rows)
        eidx = graph.edge_index()
        node_of = lambda r, c: r * cols + c  # noqa: E731
        self.col_nodes = [[node_of(r, c) for r in range(rows)] for c in range(cols)]
        self.vert_edges = [[eidx[(node_of(r, c), node_of(r + 1, c))] for r in range(rows - 1)]
                           for c in range(cols)]
        self.horiz_edges = [[eidx[(node_of(r, c), node_of(r, c + 1))] for r in range(rows)]
                            for c in range(cols - 1)]
        L = self.labels
        # within-column edge energies, fixed by the edge potentials
        self.col_edge_energy = np.zeros((cols, S))
        for c in range(cols):
            for r, e in enumerate(self.vert_edges[c]):
                self.col_edge_energy[c] += params.edge[e][L[:, r], L[:, r + 1]]
        self.H = []
        for c in range(cols - 1):
            H = np.zeros((S, S))
            for r, e in enumerate(self.horiz_edges[c]):
                H += params.edge[e][L[:, r][:, None], L[:, r][None, :]]
            self.H.append(H)
        self.Hmax = [float(H.max()) for H in self.H]
        self.Hsafe = [float(H.max() - H.min()) < 600.0 for H in self.H]
        self.onehot = np.stack([(L == j) for j in range(m)], axis=-1).astype(float)  # (S, rows, m)

    def _column_energy(self, node: np.ndarray) -> np.ndarray:
        L = self.labels
        psi = self.col_edge_energy.copy()
        for c in range(self.cols):
            for r, s in enumerate(self.col_nodes[c]):
                psi[c] += node[s][L[:, r]]
        return psi

    def _passes(self, node):
        psi = self._column_energy(node)
        C = self.cols
        f = np.empty((C, self.S))
        g = np.zeros((C, self.S))
        f[0] = psi[0]
        for c in range(C - 1):
            f[c + 1] = psi[c + 1] + _log_matvec(f[c], self.H[c], self.Hmax[c], self.Hsafe[c])
        for c in range(C - 2, -1, -1):
            h = psi[c + 1] + g[c + 1]
            g[c] = _log_matvec(h, self.H[c].T, self.Hmax[c], self.Hsafe[c])
        return psi, f, g

    def log_partition(self, node_offset: np.ndarray | None = None) -> float:
        node = self.params.node if node_offset is None else self.params.node + node_offset
        _, f, _ = self._passes(node)
        return float(logsumexp(f[-1]))

    def marginals(self, node_offset: np.ndarray | None = None) -> MarginalSet:
        node_pot = self.params.node if node_offset is None else self.params.node + node_offset
        psi, f, g = self._passes(node_pot)
        m, rows = self.m, self.rows
        N, E = self.graph.num_nodes, self.graph.num_edges
        node = np.zeros((N, m))
        edge = np.zeros((E, m, m))
        L = self.labels
        for c in range(self.cols):
            lp = f[c] + g[c]
            p = np.exp(lp - logsumexp(lp))
            node[self.col_nodes[c]] = np.einsum("a,arj->rj", p, self.onehot)
            for r, e in enumerate(self.vert_edges[c]):
                edge[e] = np.bincount(L[:, r] * m + L[:, r + 1], weights=p,
                                      minlength=m * m).reshape(m, m)
        for c in range(self.cols - 1):
            lp = f[c][:, None] + self.H[c] + (psi[c + 1] + g[c + 1])[None, :]
            P = np.exp(lp - logsumexp(lp))
            PB = P @ self.onehot.reshape(self.S, rows * m)  # (S, rows*m)
            PB = PB.reshape(self.S, rows, m)
            for r, e in enumerate(self.horiz_edges[c]):
                edge[e] = self.onehot[:, r, :].T @ PB[:, r, :]
        return MarginalSet(self.graph, node, edge, kind="exact")

    def node_marginals_batch(self, node_offsets: np.ndarray) -> np.ndarray:
        """Exact node marginals for a ``(B, N, m)`` stack of node offsets, vectorized over B."""
        offsets = np.asarray(node_offsets, dtype=float)
        B = offsets.shape[0]
        node = self.params.node[None] + offsets
        L, C = self.labels, self.cols
        psi = np.broadcast_to(self.col_edge_energy, (B, C, self.S)).copy()
        for c in range(C):
            for r, s in enumerate(self.col_nodes[c]):
                psi[:, c] += node[:, s][:, L[:, r]]
        f = np.empty((C, B, self.S))
        g = np.zeros((C, B, self.S))
        f[0] = psi[:, 0]
        for c in range(C - 1):
            f[c + 1] = psi[:, c + 1] + _log_matvec(f[c], self.H[c], self.Hmax[c], self.Hsafe[c])
        for c in range(C - 2, -1, -1):
            g[c] = _log_matvec(psi[:, c + 1] + g[c + 1], self.H[c].T, self.Hmax[c],
                               self.Hsafe[c])
        out = np.empty((B, self.graph.num_nodes, self.m))
        for c in range(C):
            lp = f[c] + g[c]
            p = np.exp(lp - logsumexp(lp, axis=-1, keepdims=True))
            out[:, self.col_nodes[c]] = np.einsum("ba,arj->brj", p, self.onehot)
        return out

    def sample(self, seed, count: int, node_offset: np.ndarray | None = None) -> np.ndarray:
        """Exact i.i.d. configurations via forward filtering, backward sampling."""
        node_pot = self.params.node if node_offset is None else self.params.node + node_offset
        _, f, _ = self._passes(node_pot)
        rng = np.random.default_rng(seed)
        C = self.cols
        cols = np.empty((C, count), dtype=np.intp)
        last = np.exp(f[-1] - logsumexp(f[-1]))
        cdf = np.cumsum(last)
        cols[-1] = np.minimum(np.searchsorted(cdf, rng.random(count) * cdf[-1], side="right"),
                              self.S - 1)
        for c in range(C - 2, -1, -1):
            lp = f[c][:, None] + self.H[c]  # (a, b)
            lp = lp - logsumexp(lp, axis=0, keepdims=True)
            cdf = np.cumsum(np.exp(lp), axis=0)
            u = rng.random(count)
            nxt = cols[c + 1]
            out = np.empty(count, dtype=np.intp)
            for start in range(0, count, 4096):
                sl = slice(start, start + 4096)
                colcdf = cdf[:, nxt[sl]]  # (S, chunk)
                out[sl] = (colcdf < u[sl][None, :] * colcdf[-1][None, :]).sum(axis=0)
            cols[c] = np.minimum(out, self.S - 1)
        X = np.empty((count, self.graph.num_nodes), dtype=np.intp)
        for c in range(C):
            X[:, self.col_nodes[c]] = self.labels[cols[c]]
        return X


def exact_marginals_transfer(params: ExponentialParams,
                             max_column_states: int = MAX_COLUMN_STATES) -> MarginalSet:
    return GridTransfer(params, max_column_states).marginals()


def log_partition_transfer(params: ExponentialParams) -> float:
    return GridTransfer(params).log_partition()


def sample_transfer(params: ExponentialParams, seed, count: int) -> np.ndarray:
    return GridTransfer(params).sample(seed, count)


def exact_node_marginals_batch(params: ExponentialParams, node_offsets: np.ndarray,
                               enumeration_cap: int = 2 ** 16) -> np.ndarray:
    """Exact node marginals for a stack of node offsets.

    Enumerates when ``m**N`` is at most ``enumeration_cap``; otherwise the
    graph must be a grid and column transfer matrices are used.
    """
    N, m = params.graph.num_nodes, params.num_states
    offsets = np.asarray(node_offsets, dtype=float).reshape(-1, N, m)
    if m ** N <= enumeration_cap:
        return batch_node_marginals_bruteforce(params, offsets, cap=enumeration_cap)
    return GridTransfer(params).node_marginals_batch(offsets)


def exact_sample(params: ExponentialParams, seed, count: int,
                 enumeration_cap: int = 2 ** 16) -> np.ndarray:
    """Exact i.i.d. configurations by enumeration when small, else by grid transfer."""
    if params.num_states ** params.graph.num_nodes <= enumeration_cap:
        return sample_bruteforce(params, seed, count, cap=enumeration_cap)
    return GridTransfer(params).sample(seed, count)


def exact_marginals(params: ExponentialParams, enumeration_cap: int = 2 ** 16) -> MarginalSet:
    if params.num_states ** params.graph.num_nodes <= enumeration_cap:
        return exact_marginals_bruteforce(params, cap=enumeration_cap)
    return GridTransfer(params).marginals()
