"""Exact inference and sampling by enumerating every configuration.

These routines are oracles: exponential in the number of nodes and guarded
by ``cap`` (default ``2**20`` configurations).
"""
from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .params import ExponentialParams, MarginalSet, energies

DEFAULT_CAP = 2 ** 20


class EnumerationCapError(ValueError):
    """Raised when ``m**N`` exceeds the enumeration cap."""


def _check_cap(num_nodes: int, num_states: int, cap: int) -> int:
    count = num_states ** num_nodes
    if count > cap:
        raise EnumerationCapError(
            f"{num_states}**{num_nodes} = {count} configurations exceeds cap {cap}")
    return count


def all_configurations(num_nodes: int, num_states: int, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Every configuration as a row, in lexicographic order (node 0 most significant)."""
    count = _check_cap(num_nodes, num_states, cap)
    idx = np.arange(count)
    powers = num_states ** np.arange(num_nodes - 1, -1, -1)
    return ((idx[:, None] // powers[None, :]) % num_states).astype(np.intp)


def joint_log_probs(params: ExponentialParams, cap: int = DEFAULT_CAP):
    """Return ``(X, log p(X))`` over all configurations."""
    X = all_configurations(params.graph.num_nodes, params.num_states, cap)
    en = energies(params, X)
    return X, en - logsumexp(en)


def joint_distribution(params: ExponentialParams, cap: int = DEFAULT_CAP) -> np.ndarray:
    return np.exp(joint_log_probs(params, cap)[1])


def log_partition_bruteforce(params: ExponentialParams, cap: int = DEFAULT_CAP) -> float:
    X = all_configurations(params.graph.num_nodes, params.num_states, cap)
    return float(logsumexp(energies(params, X)))


def marginals_from_joint(graph, num_states: int, X: np.ndarray, p: np.ndarray,
                         kind: str = "exact") -> MarginalSet:
    m = num_states
    node = np.stack([np.bincount(X[:, s], weights=p, minlength=m) for s in range(graph.num_nodes)])
    edge = np.zeros((graph.num_edges, m, m))
    for e, (s, t) in enumerate(graph.edges):
        edge[e] = np.bincount(X[:, s] * m + X[:, t], weights=p, minlength=m * m).reshape(m, m)
    return MarginalSet(graph, node, edge, kind=kind)


def exact_marginals_bruteforce(params: ExponentialParams, cap: int = DEFAULT_CAP) -> MarginalSet:
    X, logp = joint_log_probs(params, cap)
    return marginals_from_joint(params.graph, params.num_states, X, np.exp(logp))


def minimal_statistics(graph, num_states: int, X: np.ndarray) -> np.ndarray:
    """Minimal indicator features ``phi(x)`` for each row of ``X``: shape ``(K, d)``."""
    m = num_states
    cols = []
    for s in range(graph.num_nodes):
        for j in range(1, m):
            cols.append(X[:, s] == j)
    for s, t in graph.edges:
        for j in range(1, m):
            for k in range(1, m):
                cols.append((X[:, s] == j) & (X[:, t] == k))
    return np.stack(cols, axis=1).astype(float)


def hessian_log_partition(params: ExponentialParams, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Covariance of the minimal sufficient statistics under ``p(.; theta)``."""
    X, logp = joint_log_probs(params, cap)
    p = np.exp(logp)
    phi = minimal_statistics(params.graph, params.num_states, X)
    mean = p @ phi
    centered = phi - mean
    cov = (centered * p[:, None]).T @ centered
    return 0.5 * (cov + cov.T)


def sample_bruteforce(params: ExponentialParams, seed, count: int,
                      cap: int = DEFAULT_CAP) -> np.ndarray:
    """Exact i.i.d. draws by inverting the cumulative distribution; rows are configurations."""
    X, logp = joint_log_probs(params, cap)
    cdf = np.cumsum(np.exp(logp))
    cdf /= cdf[-1]
    rng = np.random.default_rng(seed)
    idx = np.searchsorted(cdf, rng.random(count), side="right")
    return X[np.minimum(idx, len(cdf) - 1)]


def gibbs_sample(params: ExponentialParams, seed, burn_in: int = 1000, thinning: int = 5,
                 count: int = 1000) -> np.ndarray:
    """Systematic-scan single-site Gibbs sampler; burn-in and thinning are in sweeps."""
    if thinning < 1:
        raise ValueError("thinning must be at least 1")
    rng = np.random.default_rng(seed)
    graph = params.graph
    N, m = graph.num_nodes, params.num_states
    # incident (edge, neighbour, node-is-row) triples per node
    incident = [[] for _ in range(N)]
    for e, (s, t) in enumerate(graph.edges):
        incident[s].append((e, t, True))
        incident[t].append((e, s, False))
    x = rng.integers(0, m, size=N)
    out = np.empty((count, N), dtype=np.intp)

    def sweep():
        u = rng.random(N)
        for s in range(N):
            logits = params.node[s].copy()
            for e, nb, is_row in incident[s]:
                logits += params.edge[e, :, x[nb]] if is_row else params.edge[e, x[nb], :]
            w = np.exp(logits - logits.max())
            c = np.cumsum(w)
            x[s] = min(int(np.searchsorted(c, u[s] * c[-1], side="right")), m - 1)

    for _ in range(burn_in):
        sweep()
    for i in range(count):
        for _ in range(thinning):
            sweep()
        out[i] = x
    return out


def batch_node_marginals_bruteforce(params: ExponentialParams, node_offsets: np.ndarray,
                                    cap: int = 2 ** 16, chunk: int = 2048) -> np.ndarray:
    """Exact node marginals of ``params + offset`` for each offset in a ``(B, N, m)`` stack."""
    X = all_configurations(params.graph.num_nodes, params.num_states, cap)
    base = energies(params, X)
    N, m = params.graph.num_nodes, params.num_states
    onehot = np.zeros((len(X), N, m))
    onehot[np.arange(len(X))[:, None], np.arange(N)[None, :], X] = 1.0
    flat = onehot.reshape(len(X), N * m)
    offsets = np.asarray(node_offsets, dtype=float).reshape(-1, N * m)
    out = np.empty_like(offsets)
    for start in range(0, len(offsets), chunk):
        en = base[None, :] + offsets[start:start + chunk] @ flat.T
        p = np.exp(en - logsumexp(en, axis=1, keepdims=True))
        out[start:start + chunk] = p @ flat
    return out.reshape(-1, N, m)
