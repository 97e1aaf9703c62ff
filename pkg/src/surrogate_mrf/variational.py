"""Local polytope, reweighted Bethe entropy and tree-reweighted sum-product.

The message-passing engine works on batches: node potentials of shape
``(B, N, m)`` and edge potentials of shape ``(E, m, m)`` (shared) or
``(B, E, m, m)``.  Messages live in the log domain, are normalized to sum to
one after every update, and each batch element stops updating once its
max-norm message change falls below the tolerance.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.special import logsumexp, xlogy

from .exact import all_configurations
from .graph import Graph
from .params import ExponentialParams, MarginalSet, inner_product, minimal_dimension



def _lse(a: np.ndarray, axis=-1, keepdims: bool = False) -> np.ndarray:
    """Lean log-sum-exp for finite inputs; scipy's version carries sign and
    dtype handling that dominates the runtime of small batched reductions."""
    if axis == -1 and a.shape[-1] == 2:
        lo, hi = np.minimum(a[..., 0], a[..., 1]), np.maximum(a[..., 0], a[..., 1])
        out = hi + np.log1p(np.exp(lo - hi))
        return out[..., None] if keepdims else out
    mx = np.max(a, axis=axis, keepdims=True)
    out = np.log(np.sum(np.exp(a - mx), axis=axis, keepdims=True)) + mx
    return out if keepdims else np.squeeze(out, axis=axis)

class NumericalError(RuntimeError):
    """Message passing produced non-finite values."""


class ConvergenceError(RuntimeError):
    """An inner solve required to be converged was not."""


# --------------------------------------------------------------------------
# edge appearance probabilities

@dataclass(frozen=True, eq=False)
class EdgeWeights:
    values: np.ndarray
    mode: str = "trw"  # "trw" or "bp-heuristic"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).ravel()
        if self.mode not in ("trw", "bp-heuristic"):
            raise ValueError(f"unknown edge-weight mode {self.mode!r}")
        if np.any(vals <= 0) or np.any(vals > 1 + 1e-12):
            raise ValueError("edge appearance probabilities must lie in (0, 1]")
        if self.mode == "bp-heuristic" and not np.all(vals == 1.0):
            raise ValueError("bp-heuristic mode fixes every weight to 1")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def validate(self, graph: Graph) -> None:
        if self.values.shape != (graph.num_edges,):
            raise ValueError("one edge weight per edge is required")
        if self.mode == "trw":
            total = self.values.sum()
            if abs(total - (graph.num_nodes - 1)) > 1e-9:
                raise ValueError(
                    f"edge weights sum to {total!r}; spanning-tree weights must sum to N-1")


def uniform_spanning_tree_edge_probs(graph: Graph) -> EdgeWeights:
    """Probability that each edge lies in a uniformly random spanning tree.

    Equals the effective resistance between the endpoints in the unit-resistor
    network (matrix-tree theorem).
    """
    Lp = np.linalg.pinv(graph.laplacian())
    ea = graph.edge_array()
    if len(ea) == 0:
        return EdgeWeights(np.zeros(0))
    s, t = ea[:, 0], ea[:, 1]
    rho = Lp[s, s] + Lp[t, t] - 2 * Lp[s, t]
    rho = np.clip(rho, 1e-15, 1.0)
    if graph.is_tree():
        rho = np.ones(graph.num_edges)
    return EdgeWeights(rho, mode="trw")


def bp_edge_weights(graph: Graph) -> EdgeWeights:
    return EdgeWeights(np.ones(graph.num_edges), mode="bp-heuristic")


# --------------------------------------------------------------------------
# polytopes and entropy

def local_consistency_check(tau: MarginalSet, tol: float = 1e-8) -> tuple[bool, float]:
    """Check nonnegativity, normalization and marginalization; return ``(ok, max violation)``."""
    viol = [0.0, float(np.max(-tau.node, initial=0.0)), float(np.max(-tau.edge, initial=0.0))]
    viol.append(float(np.max(np.abs(tau.node.sum(axis=1) - 1.0))))
    if tau.graph.num_edges:
        viol.append(float(np.max(np.abs(tau.edge.sum(axis=(1, 2)) - 1.0))))
        ea = tau.graph.edge_array()
        viol.append(float(np.max(np.abs(tau.edge.sum(axis=2) - tau.node[ea[:, 0]]))))
        viol.append(float(np.max(np.abs(tau.edge.sum(axis=1) - tau.node[ea[:, 1]]))))
    worst = max(viol)
    return worst <= tol, worst


def marginal_polytope_membership_bruteforce(graph: Graph, tau: MarginalSet,
                                            cap: int = 2 ** 12, tol: float = 1e-9) -> bool:
    """Whether some joint distribution has exactly these node and edge marginals.

    Solved as a linear program minimizing the total absolute mismatch over
    the probability simplex on all ``m**N`` configurations.
    """
    m = tau.num_states
    X = all_configurations(graph.num_nodes, m, cap)
    K = len(X)
    rows, target = [], []
    for s in range(graph.num_nodes):
        for j in range(m):
            rows.append(X[:, s] == j)
            target.append(tau.node[s, j])
    for e, (s, t) in enumerate(graph.edges):
        for j in range(m):
            for k in range(m):
                rows.append((X[:, s] == j) & (X[:, t] == k))
                target.append(tau.edge[e, j, k])
    A = np.array(rows, dtype=float)
    n = len(target)
    # variables: p (K), u (n), v (n);  A p - u + v = tau, sum p = 1
    A_eq = np.block([[A, -np.eye(n), np.eye(n)],
                     [np.ones((1, K)), np.zeros((1, 2 * n))]])
    b_eq = np.concatenate([target, [1.0]])
    c = np.concatenate([np.zeros(K), np.ones(2 * n)])
    res = linprog(c, A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        raise RuntimeError(f"linear program failed: {res.message}")
    return bool(res.fun <= tol)


def node_entropies(node: np.ndarray) -> np.ndarray:
    return -xlogy(node, node).sum(axis=-1)


def mutual_informations(tau: MarginalSet) -> np.ndarray:
    ea = tau.graph.edge_array()
    if len(ea) == 0:
        return np.zeros(0)
    prod = tau.node[ea[:, 0]][:, :, None] * tau.node[ea[:, 1]][:, None, :]
    ratio = np.divide(tau.edge, prod, out=np.ones_like(tau.edge), where=tau.edge > 0)
    return xlogy(tau.edge, ratio).sum(axis=(1, 2))


def bethe_entropy_rho(tau: MarginalSet, rho: EdgeWeights) -> float:
    """``sum_s H_s(tau_s) - sum_st rho_st I_st(tau_st)`` with ``0 log 0 = 0``."""
    return float(node_entropies(tau.node).sum() - np.dot(rho.values, mutual_informations(tau)))


# --------------------------------------------------------------------------
# message passing

@dataclass(frozen=True)
class MessagePassingOptions:
    tolerance: float = 1e-10
    max_iter: int = 5000
    damping: float = 0.5
    schedule: str = "synchronous"  # or "sequential"

    def __post_init__(self):
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.schedule not in ("synchronous", "sequential"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if self.tolerance <= 0 or self.max_iter < 1:
            raise ValueError("tolerance must be positive and max_iter at least 1")


@dataclass(frozen=True)
class ConvergenceReport:
    converged: bool
    iterations: int
    final_delta: float


@dataclass
class BatchResult:
    """Raw output of :func:`run_message_passing` for a batch of problems."""

    log_messages: np.ndarray  # (B, D, m)
    node_logbelief: np.ndarray  # (B, N, m) unnormalized
    converged: np.ndarray
    iterations: np.ndarray
    final_delta: np.ndarray

    def report(self, b: int = 0) -> ConvergenceReport:
        return ConvergenceReport(bool(self.converged[b]), int(self.iterations[b]),
                                 float(self.final_delta[b]))

    def node_marginals(self) -> np.ndarray:
        lb = self.node_logbelief
        return np.exp(lb - logsumexp(lb, axis=-1, keepdims=True))


class _Structure:
    """Directed-edge bookkeeping: message ``2e`` runs s->t, ``2e+1`` runs t->s."""

    def __init__(self, graph: Graph, rho: np.ndarray):
        ea = graph.edge_array()
        E = len(ea)
        self.E, self.N = E, graph.num_nodes
        self.src = np.empty(2 * E, dtype=np.intp)
        self.dst = np.empty(2 * E, dtype=np.intp)
        self.src[0::2], self.dst[0::2] = ea[:, 0], ea[:, 1]
        self.src[1::2], self.dst[1::2] = ea[:, 1], ea[:, 0]
        self.rev = np.arange(2 * E) ^ 1
        self.rho_d = np.repeat(rho, 2)
        # weighted incidence: node v collects rho * log M for messages into v
        self.incidence = np.zeros((self.N, 2 * E))
        self.incidence[self.dst, np.arange(2 * E)] = self.rho_d


def _directed_tables(edge: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Per-message tables ``W[..., d, x_dst, x_src] = theta_st / rho_st``."""
    scaled = edge / rho[:, None, None]
    W = np.empty(edge.shape[:-3] + (2 * edge.shape[-3],) + edge.shape[-2:])
    W[..., 0::2, :, :] = np.swapaxes(scaled, -1, -2)
    W[..., 1::2, :, :] = scaled
    return W


def _beliefs(node, logM, st: _Structure):
    # (B, m, D) @ (D, N) dispatches to BLAS, unlike the equivalent einsum
    return node + np.swapaxes(np.swapaxes(logM, -1, -2) @ st.incidence.T, -1, -2)


def _propose(node, W, logM, st: _Structure):
    b = _beliefs(node, logM, st)
    pre = b[:, st.src, :] - logM[:, st.rev, :]  # (B, D, m_src)
    z = W + pre[:, :, None, :]
    new = _lse(z, axis=-1)
    return new - _lse(new, axis=-1, keepdims=True)


def run_message_passing(graph: Graph, node: np.ndarray, edge: np.ndarray, rho: EdgeWeights,
                        options: MessagePassingOptions | None = None,
                        init_log_messages: np.ndarray | None = None) -> BatchResult:
    """Reweighted sum-product on a batch of models sharing one graph and one ``rho``."""
    options = options or MessagePassingOptions()
    rho.validate(graph)
    node = np.asarray(node, dtype=float)
    if node.ndim == 2:
        node = node[None]
    B, N, m = node.shape
    edge = np.asarray(edge, dtype=float)
    st = _Structure(graph, rho.values)
    D = 2 * st.E
    W = _directed_tables(edge, rho.values)
    shared_edges = W.ndim == 3
    if shared_edges:
        W = W[None]
    if init_log_messages is None:
        logM = np.full((B, D, m), -np.log(m))
    else:
        logM = np.broadcast_to(init_log_messages, (B, D, m)).copy()
        logM -= _lse(logM, axis=-1, keepdims=True)
    converged = np.zeros(B, dtype=bool)
    iterations = np.zeros(B, dtype=np.intp)
    delta = np.full(B, np.inf)
    lam = options.damping
    if D == 0:
        converged[:] = True
        delta[:] = 0.0
    active = np.flatnonzero(~converged)
    it = 0
    while active.size and it < options.max_iter:
        it += 1
        nd = node[active]
        Wa = W if shared_edges else W[active]
        old = logM[active]
        if options.schedule == "synchronous":
            prop = _propose(nd, Wa, old, st)
            new = (1 - lam) * old + lam * prop
            new -= _lse(new, axis=-1, keepdims=True)
        else:
            new = old.copy()
            for d in range(D):
                b = _beliefs(nd, new, st)
                pre = b[:, st.src[d], :] - new[:, st.rev[d], :]
                prop = _lse(Wa[:, d] + pre[:, None, :], axis=-1)
                prop -= _lse(prop, axis=-1, keepdims=True)
                upd = (1 - lam) * new[:, d] + lam * prop
                new[:, d] = upd - _lse(upd, axis=-1, keepdims=True)
        if not np.all(np.isfinite(new)):
            raise NumericalError("non-finite message encountered")
        dl = np.max(np.abs(new - old), axis=(1, 2))
        logM[active] = new
        delta[active] = dl
        iterations[active] = it
        done = dl <= options.tolerance
        converged[active[done]] = True
        active = active[~done]
    lb = _beliefs(node, logM, st)
    return BatchResult(logM, lb, converged, iterations, delta)


def readout(graph: Graph, node: np.ndarray, edge: np.ndarray, rho: EdgeWeights,
            log_messages: np.ndarray) -> MarginalSet:
    """Pseudomarginals from (a single problem's) messages; invariant to message rescaling."""
    st = _Structure(graph, rho.values)
    logM = log_messages - _lse(log_messages, axis=-1, keepdims=True)
    b = _beliefs(node[None], logM[None], st)[0]
    tau_node = np.exp(b - _lse(b, axis=-1, keepdims=True))
    ea = graph.edge_array()
    m = node.shape[1]
    if len(ea):
        s, t = ea[:, 0], ea[:, 1]
        left = b[s] - logM[1::2]   # remove message t->s from s's belief
        right = b[t] - logM[0::2]  # remove message s->t from t's belief
        z = edge / rho.values[:, None, None] + left[:, :, None] + right[:, None, :]
        z -= _lse(z, axis=(1, 2), keepdims=True)
        tau_edge = np.exp(z)
    else:
        tau_edge = np.zeros((0, m, m))
    return MarginalSet(graph, tau_node, tau_edge, kind="pseudo")


def trw_sum_product(params: ExponentialParams, rho: EdgeWeights,
                    options: MessagePassingOptions | None = None,
                    init_log_messages: np.ndarray | None = None):
    """Run reweighted sum-product; returns ``(pseudomarginals, ConvergenceReport)``.

    With ``rho`` all ones (``bp_edge_weights``) this is ordinary belief
    propagation.  Non-convergence is reported, not raised.
    """
    res = run_message_passing(params.graph, params.node, params.edge, rho, options,
                              init_log_messages)
    tau = readout(params.graph, params.node, params.edge, rho, res.log_messages[0])
    return tau, res.report(0)


def trw_solve(params: ExponentialParams, rho: EdgeWeights,
              options: MessagePassingOptions | None = None,
              init_log_messages: np.ndarray | None = None):
    """Like :func:`trw_sum_product` but also returns the fixed-point log messages."""
    res = run_message_passing(params.graph, params.node, params.edge, rho, options,
                              init_log_messages)
    tau = readout(params.graph, params.node, params.edge, rho, res.log_messages[0])
    return tau, res.report(0), res.log_messages[0]


def batch_node_marginals(params: ExponentialParams, node_offsets: np.ndarray, rho: EdgeWeights,
                         options: MessagePassingOptions | None = None):
    """Node pseudomarginals of ``params + offset`` for each offset in a ``(B, N, m)`` stack."""
    node = params.node[None] + np.asarray(node_offsets)
    res = run_message_passing(params.graph, node, params.edge, rho, options)
    return res.node_marginals(), res


# --------------------------------------------------------------------------
# the convex surrogate

def _strict(options: MessagePassingOptions | None, tol: float) -> MessagePassingOptions:
    options = options or MessagePassingOptions()
    return MessagePassingOptions(min(options.tolerance, tol), max(options.max_iter, 20000),
                                 options.damping, options.schedule)


def surrogate_value(params: ExponentialParams, rho: EdgeWeights,
                    options: MessagePassingOptions | None = None):
    """``B(theta) = <theta, tau(theta)> + H_rho(tau(theta))``; returns ``(value, report)``."""
    tau, report = trw_sum_product(params, rho, options)
    return inner_product(params, tau) + bethe_entropy_rho(tau, rho), report


def surrogate_gradient(params: ExponentialParams, rho: EdgeWeights,
                       options: MessagePassingOptions | None = None) -> MarginalSet:
    tau, _ = trw_sum_product(params, rho, options)
    return tau


def surrogate_jacobians(points: list[ExponentialParams], rho: EdgeWeights,
                        options: MessagePassingOptions | None = None,
                        step: float = 1e-4) -> np.ndarray:
    """Central-difference Jacobians of ``tau(theta)`` at several points, in one batch.

    All points must share a graph.  Returns shape ``(P, d, d)``; column ``i``
    of each Jacobian is the derivative along minimal coordinate ``i``.
    """
    graph, m = points[0].graph, points[0].num_states
    opts = _strict(options, 1e-12)
    base = [p.canonical() for p in points]
    _, _, logM0 = trw_solve(base[0], rho, opts)
    d = minimal_dimension(graph, m)
    P = len(points)
    nodes = np.empty((P, 2 * d, graph.num_nodes, m))
    edges = np.empty((P, 2 * d, graph.num_edges, m, m))
    for k, p in enumerate(base):
        v = p.to_minimal()
        for i in range(d):
            for j, sign in enumerate((1.0, -1.0)):
                vi = v.copy()
                vi[i] += sign * step
                q = ExponentialParams.from_minimal(graph, m, vi)
                nodes[k, 2 * i + j], edges[k, 2 * i + j] = q.node, q.edge
    nodes = nodes.reshape(P * 2 * d, graph.num_nodes, m)
    edges = edges.reshape(P * 2 * d, graph.num_edges, m, m)
    res = run_message_passing(graph, nodes, edges, rho, opts, init_log_messages=logM0)
    if not np.all(res.converged):
        raise ConvergenceError("finite-difference probe did not converge")
    J = np.empty((P, d, d))
    for k in range(P):
        for i in range(d):
            a, b = k * 2 * d + 2 * i, k * 2 * d + 2 * i + 1
            plus = readout(graph, nodes[a], edges[a], rho, res.log_messages[a])
            minus = readout(graph, nodes[b], edges[b], rho, res.log_messages[b])
            J[k, :, i] = (plus.to_minimal() - minus.to_minimal()) / (2 * step)
    return J


def surrogate_jacobian(params: ExponentialParams, rho: EdgeWeights,
                       options: MessagePassingOptions | None = None,
                       step: float = 1e-4) -> np.ndarray:
    """Central-difference Jacobian of ``tau(theta)`` in minimal coordinates (unsymmetrized)."""
    return surrogate_jacobians([params], rho, options, step)[0]


def hessian_surrogate(params: ExponentialParams, rho: EdgeWeights,
                      options: MessagePassingOptions | None = None,
                      step: float = 1e-4) -> np.ndarray:
    """Symmetrized finite-difference Hessian of the surrogate in minimal coordinates."""
    J = surrogate_jacobian(params, rho, options, step)
    return 0.5 * (J + J.T)


def _ball_samples(rng: np.random.Generator, count: int, dim: int, radius: float) -> np.ndarray:
    """Uniform draws from the ``dim``-dimensional ball of the given radius."""
    g = rng.standard_normal((count, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / dim)
    return g * r[:, None]


@dataclass(frozen=True)
class StabilityEstimate:
    lipschitz: float
    all_converged: bool
    num_perturbations: int


def stability_probe(params: ExponentialParams, rho: EdgeWeights, num_perturbations: int,
                    radius: float, seed, options: MessagePassingOptions | None = None
                    ) -> StabilityEstimate:
    """Empirical Lipschitz constant of ``theta -> tau(theta)`` around ``params``.

    Perturbations are drawn uniformly from the radius ball in minimal
    coordinates; the ratio ``||tau(theta+delta) - tau(theta)|| / ||delta||``
    is maximized over the draws.
    """
    graph, m = params.graph, params.num_states
    opts = _strict(options, 1e-12)
    rng = np.random.default_rng(seed)
    base = params.canonical()
    v = base.to_minimal()
    d = minimal_dimension(graph, m)
    deltas = _ball_samples(rng, num_perturbations, d, radius)
    tau0, rep0, logM0 = trw_solve(base, rho, opts)
    nodes = np.empty((num_perturbations, graph.num_nodes, m))
    edges = np.empty((num_perturbations, graph.num_edges, m, m))
    for i, delta in enumerate(deltas):
        p = ExponentialParams.from_minimal(graph, m, v + delta)
        nodes[i], edges[i] = p.node, p.edge
    res = run_message_passing(graph, nodes, edges, rho, opts, init_log_messages=logM0)
    t0 = tau0.to_minimal()
    best = 0.0
    for i in range(num_perturbations):
        ti = readout(graph, nodes[i], edges[i], rho, res.log_messages[i]).to_minimal()
        nrm = np.linalg.norm(deltas[i])
        if nrm > 0:
            best = max(best, float(np.linalg.norm(ti - t0) / nrm))
    return StabilityEstimate(best, bool(rep0.converged and np.all(res.converged)),
                             num_perturbations)
