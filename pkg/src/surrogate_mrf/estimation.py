"""Parameter estimation: empirical moments, surrogate-likelihood fits, exact MLE."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exact import (
    DEFAULT_CAP,
    exact_marginals_bruteforce,
    hessian_log_partition,
    log_partition_bruteforce,
)
from .graph import Graph
from .params import ExponentialParams, MarginalSet, inner_product
from .variational import (
    ConvergenceError,
    EdgeWeights,
    MessagePassingOptions,
    bethe_entropy_rho,
    hessian_surrogate,
    trw_solve,
)


class ZeroCellError(ValueError):
    """An empirical probability is zero, so its logarithm is undefined."""


class LineSearchError(RuntimeError):
    pass


def empirical_marginals(graph: Graph, samples: np.ndarray, num_states: int) -> MarginalSet:
    """Node and edge frequency tables of the sample rows."""
    X = np.asarray(samples, dtype=np.intp)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("need a nonempty (n, N) array of samples")
    if X.shape[1] != graph.num_nodes:
        raise ValueError("sample length does not match the graph")
    if np.any(X < 0) or np.any(X >= num_states):
        raise ValueError("sample label out of range")
    n, m = X.shape[0], num_states
    node = np.stack([np.bincount(X[:, s], minlength=m) for s in range(graph.num_nodes)]) / n
    edge = np.zeros((graph.num_edges, m, m))
    for e, (s, t) in enumerate(graph.edges):
        edge[e] = np.bincount(X[:, s] * m + X[:, t], minlength=m * m).reshape(m, m) / n
    return MarginalSet(graph, node, edge, kind="empirical", count=n)


def smooth_moments(moments: MarginalSet, pseudo: float | None = None) -> MarginalSet:
    """Add ``pseudo`` (default ``1/n``) to every edge-table cell and renormalize.

    Node tables receive the matching ``m * pseudo`` so the result stays
    locally consistent.
    """
    m = moments.num_states
    if pseudo is None:
        if moments.count is None:
            raise ValueError("pseudo-count needed when the sample size is unknown")
        pseudo = 1.0 / moments.count
    z = 1.0 + m * m * pseudo
    return MarginalSet(moments.graph, (moments.node + m * pseudo) / z,
                       (moments.edge + pseudo) / z, kind=moments.kind, count=moments.count)


def _require_positive(moments: MarginalSet):
    if not moments.is_strictly_positive():
        raise ZeroCellError("moments contain zero cells; apply smooth_moments() first")


def trw_closed_form_estimate(moments: MarginalSet, rho: EdgeWeights) -> ExponentialParams:
    """Maximizer of the unregularized reweighted surrogate likelihood.

    Node potentials are ``log mu_s``; edge potentials are
    ``rho_st * log(mu_st / (mu_s mu_t))``.
    """
    _require_positive(moments)
    graph = moments.graph
    rho.validate(graph)
    ea = graph.edge_array()
    node = np.log(moments.node)
    if len(ea):
        prod = moments.node[ea[:, 0]][:, :, None] * moments.node[ea[:, 1]][:, None, :]
        edge = rho.values[:, None, None] * np.log(moments.edge / prod)
    else:
        edge = np.zeros((0, moments.num_states, moments.num_states))
    return ExponentialParams(graph, node, edge)


def independence_estimate(moments: MarginalSet) -> ExponentialParams:
    """Decoupled model: ``log mu_s`` at each node, no coupling."""
    if not np.all(moments.node > 0):
        raise ZeroCellError("node moments contain zero cells; apply smooth_moments() first")
    m = moments.num_states
    return ExponentialParams(moments.graph, np.log(moments.node),
                             np.zeros((moments.graph.num_edges, m, m)))


@dataclass(frozen=True)
class RegularizerSpec:
    kind: str = "none"  # "none" or "squared-norm"
    weight: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "squared-norm"):
            raise ValueError(f"unknown regularizer {self.kind!r}")
        if self.weight < 0:
            raise ValueError("regularization weight must be nonnegative")
        if self.kind == "none" and self.weight != 0:
            raise ValueError("kind='none' requires weight 0")

    def value(self, v: np.ndarray) -> float:
        return float(self.weight * v @ v) if self.kind == "squared-norm" else 0.0

    def gradient(self, v: np.ndarray) -> np.ndarray:
        return 2 * self.weight * v if self.kind == "squared-norm" else np.zeros_like(v)


@dataclass(frozen=True)
class OptimizerOptions:
    grad_tol: float = 1e-7
    max_iter: int = 20000
    armijo: float = 1e-4
    message: MessagePassingOptions = MessagePassingOptions(tolerance=1e-12, max_iter=20000)


def surrogate_mle_optimize(moments: MarginalSet, rho: EdgeWeights,
                           regularizer: RegularizerSpec | None = None,
                           options: OptimizerOptions | None = None,
                           init: ExponentialParams | None = None) -> ExponentialParams:
    """Maximize ``<mu, theta> - B(theta) - lambda R(theta)`` by gradient ascent.

    Works in minimal coordinates.  Steps use Barzilai-Borwein lengths with
    Armijo backtracking; each evaluation is one warm-started reweighted
    sum-product solve.  Stops when the gradient max-norm is below
    ``options.grad_tol``.
    """
    regularizer = regularizer or RegularizerSpec()
    options = options or OptimizerOptions()
    graph, m = moments.graph, moments.num_states
    rho.validate(graph)
    target = moments.to_minimal()
    v = np.zeros(len(target)) if init is None else init.to_minimal()
    logM = None

    def evaluate(vec, warm):
        p = ExponentialParams.from_minimal(graph, m, vec)
        tau, rep, msgs = trw_solve(p, rho, options.message, warm)
        if not rep.converged:
            raise ConvergenceError(f"inner message passing failed: {rep}")
        B = inner_product(p, tau) + bethe_entropy_rho(tau, rho)
        f = float(target @ vec) - B - regularizer.value(vec)
        g = target - tau.to_minimal() - regularizer.gradient(vec)
        return f, g, msgs

    f, g, logM = evaluate(v, logM)
    step = 1.0
    for _ in range(options.max_iter):
        if np.max(np.abs(g)) <= options.grad_tol:
            break
        gg = float(g @ g)
        slack = 1e-11 * (1 + abs(f))
        while True:
            v_new = v + step * g
            f_new, g_new, logM_new = evaluate(v_new, logM)
            if f_new >= f + options.armijo * step * gg - slack:
                break
            step *= 0.5
            if step < 1e-14:
                raise LineSearchError("backtracking line search failed")
        s, y = v_new - v, g - g_new
        v, f, g, logM = v_new, f_new, g_new, logM_new
        sy = float(s @ y)
        step = float(s @ s) / sy if sy > 0 else 2 * step
        step = min(max(step, 1e-8), 1e4)
    else:
        raise ConvergenceError("surrogate likelihood ascent hit max_iter")
    return ExponentialParams.from_minimal(graph, m, v)


def exact_mle_optimize(moments: MarginalSet, cap: int = DEFAULT_CAP, tol: float = 1e-10,
                       max_iter: int = 200) -> ExponentialParams:
    """Exact maximum likelihood by damped Newton steps on brute-force moments.

    Raises ``ValueError`` when the moments are not in the interior of the
    marginal polytope (no finite maximizer).
    """
    if not moments.is_strictly_positive():
        raise ValueError("moments on the boundary have no finite maximum-likelihood estimate")
    graph, m = moments.graph, moments.num_states
    target = moments.to_minimal()
    v = np.zeros(len(target))

    def objective(vec):
        return log_partition_bruteforce(ExponentialParams.from_minimal(graph, m, vec), cap) \
            - float(target @ vec)

    f = objective(v)
    for _ in range(max_iter):
        p = ExponentialParams.from_minimal(graph, m, v)
        grad = exact_marginals_bruteforce(p, cap).to_minimal() - target
        if np.max(np.abs(grad)) <= tol:
            return p
        H = hessian_log_partition(p, cap)
        direction = -np.linalg.solve(H + 1e-12 * np.eye(len(v)), grad)
        t = 1.0
        while True:
            f_new = objective(v + t * direction)
            if f_new <= f + 1e-4 * t * float(grad @ direction) + 1e-12 * (1 + abs(f)):
                break
            t *= 0.5
            if t < 1e-12:
                raise ValueError("Newton line search failed; moments likely outside the "
                                 "marginal polytope interior")
        v, f = v + t * direction, f_new
    raise ValueError("exact MLE did not converge; moments likely outside the marginal "
                     "polytope interior")


def sandwich_covariance(theta_star: ExponentialParams, theta_hat: ExponentialParams,
                        rho: EdgeWeights, cap: int = DEFAULT_CAP,
                        options: MessagePassingOptions | None = None) -> np.ndarray:
    """Asymptotic covariance ``H_B^{-1} H_A H_B^{-1}`` of the surrogate estimator.

    ``H_B`` is the surrogate Hessian at ``theta_hat`` and ``H_A`` the exact
    Fisher information at ``theta_star``, both in minimal coordinates.
    """
    HB = hessian_surrogate(theta_hat, rho, options)
    if np.linalg.cond(HB) > 1e12:
        raise np.linalg.LinAlgError("surrogate Hessian is numerically singular")
    HA = hessian_log_partition(theta_star, cap)
    HBinv = np.linalg.inv(HB)
    C = HBinv @ HA @ HBinv
    return 0.5 * (C + C.T)
