"""Performance-loss bound for surrogate-based prediction and the loss it controls.

For two-class mixtures the excess mean-squared error of the approximate
predictor over the Bayes predictor is bounded by

    E[ min(1, L ||gamma(Y)|| / sqrt(N)) * sqrt(sum_s |g1(Y_s) - g0(Y_s)|^4 / N) ]

where ``L`` bounds the Lipschitz constant of the gap between the exact and
surrogate mean maps.  Expectations are Monte Carlo averages over ``Y`` drawn
from the true joint model.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exact import DEFAULT_CAP, hessian_log_partition
from .params import ExponentialParams
from .prediction import (
    MixtureSpec,
    blse_weights,
    check_alpha,
    component_estimators,
    gamma_offsets,
    observation_variance,
    predict,
    sample_observation,
)
from .transfer import exact_node_marginals_batch, exact_sample
from .variational import (
    ConvergenceError,
    EdgeWeights,
    MessagePassingOptions,
    _ball_samples,
    batch_node_marginals,
    surrogate_jacobians,
)

YSource = Callable[[object, int], np.ndarray]


@dataclass(frozen=True)
class BoundReport:
    L_estimate: float
    bound_value: float
    empirical_delta_mse: float
    delta_mse_stderr: float
    num_y_samples: int
    seed: int

    def __post_init__(self):
        if self.bound_value < 0:
            raise ValueError("bound value must be nonnegative")


def _require_two_classes(mix: MixtureSpec):
    if mix.num_classes != 2:
        raise ValueError("the bound is stated for two mixture components only")


# --------------------------------------------------------------------------
# Lipschitz constant

def lipschitz_constant_estimate(theta_star: ExponentialParams, theta_hat: ExponentialParams,
                                rho: EdgeWeights, num_deltas: int = 200, radius: float = 1.0,
                                seed=0, cap: int = DEFAULT_CAP,
                                options: MessagePassingOptions | None = None) -> float:
    """Monte Carlo lower estimate of ``sup_delta sigma_max(H_A(theta*+delta) - H_B(theta_hat+delta))``.

    ``delta = 0`` is always included; the remaining ``num_deltas`` draws are
    uniform in the radius ball of minimal coordinates.  ``H_A`` is exact
    (enumeration, so subject to ``cap``) and ``H_B`` is the finite-difference
    surrogate Hessian.
    """
    graph, m = theta_star.graph, theta_star.num_states
    if theta_hat.graph.edges != graph.edges or theta_hat.num_states != m:
        raise ValueError("theta_star and theta_hat must share graph and state count")
    v_star = theta_star.canonical().to_minimal()
    v_hat = theta_hat.canonical().to_minimal()
    rng = np.random.default_rng(seed)
    deltas = np.vstack([np.zeros((1, len(v_star))),
                        _ball_samples(rng, num_deltas, len(v_star), radius)])
    J = surrogate_jacobians([ExponentialParams.from_minimal(graph, m, v_hat + dl)
                             for dl in deltas], rho, options)
    best = 0.0
    for delta, Jk in zip(deltas, J):
        HA = hessian_log_partition(ExponentialParams.from_minimal(graph, m, v_star + delta), cap)
        HB = 0.5 * (Jk + Jk.T)
        best = max(best, float(np.linalg.norm(HA - HB, ord=2)))
    return best


def typical_gamma_scale(y: np.ndarray, mix: MixtureSpec, alpha: float) -> float:
    """Median of ``||gamma(Y)|| / sqrt(N)`` over the rows of ``y``."""
    g = gamma_offsets(np.atleast_2d(y), mix, alpha)
    N = g.shape[-2]
    return float(np.median(np.linalg.norm(g.reshape(len(g), -1), axis=1) / np.sqrt(N)))


# --------------------------------------------------------------------------
# observation streams

def model_y_source(params: ExponentialParams, mix: MixtureSpec, alpha: float) -> YSource:
    """Sampler ``(seed, count) -> Y`` drawing ``X`` exactly from ``params``, then ``Z`` and ``Y``."""
    check_alpha(alpha)

    def draw(seed, count: int) -> np.ndarray:
        sx, sy = np.random.SeedSequence(seed).spawn(2)
        X = exact_sample(params, sx, count)
        return sample_observation(X, mix, alpha, sy)[1]

    return draw


def _min_term(y: np.ndarray, mix: MixtureSpec, alpha: float, L: float) -> np.ndarray:
    g = gamma_offsets(y, mix, alpha)[..., 1]
    N = y.shape[-1]
    return np.minimum(1.0, L * np.linalg.norm(g, axis=-1) / np.sqrt(N))


def theorem_bound_terms(y: np.ndarray, mix: MixtureSpec, alpha: float, L: float) -> np.ndarray:
    """Per-sample integrand of the bound for observation rows ``y`` of shape ``(K, N)``."""
    _require_two_classes(mix)
    if L < 0:
        raise ValueError("Lipschitz constant must be nonnegative")
    y = np.atleast_2d(np.asarray(y, dtype=float))
    g = component_estimators(y, mix, alpha)
    gap4 = np.mean((g[..., 1] - g[..., 0]) ** 4, axis=-1)
    return _min_term(y, mix, alpha, L) * np.sqrt(gap4)


def theorem_bound(mix: MixtureSpec, alpha: float, L: float, num_nodes: int,
                  num_y_samples: int, seed, y_source: YSource) -> float:
    """Monte Carlo value of the bound using ``num_y_samples`` draws from ``y_source``."""
    _require_two_classes(mix)
    y = np.asarray(y_source(seed, num_y_samples), dtype=float)
    if y.shape != (num_y_samples, num_nodes):
        raise ValueError("y_source returned an array of the wrong shape")
    return float(np.mean(theorem_bound_terms(y, mix, alpha, L)))


def bound_equal_variance(mix: MixtureSpec, alpha: float, L: float, num_nodes: int,
                         num_y_samples: int, seed, y_source: YSource) -> float:
    """Bound specialized to equal class variances.

    Here ``g1 - g0 = (1 - alpha*omega)(nu1 - nu0)`` is constant, leaving only
    the expectation of the min term.
    """
    _require_two_classes(mix)
    if mix.variances[0] != mix.variances[1]:
        raise ValueError("equal-variance bound needs sigma2_0 == sigma2_1")
    omega = blse_weights(mix, alpha)[0]
    y = np.asarray(y_source(seed, num_y_samples), dtype=float).reshape(num_y_samples, num_nodes)
    factor = (1.0 - alpha * omega) ** 2 * (mix.means[1] - mix.means[0]) ** 2
    return float(factor * np.mean(_min_term(y, mix, alpha, L)))


def bound_equal_means(mix: MixtureSpec, alpha: float, L: float, num_nodes: int,
                      num_y_samples: int, seed, y_source: YSource) -> float:
    """Bound specialized to equal class means ``nu``.

    Then ``g1 - g0 = (omega1 - omega0)(y - alpha nu)`` with
    ``omega1 - omega0 = alpha (1 - alpha^2)(sigma1^2 - sigma0^2) / (v0 v1)``.
    """
    _require_two_classes(mix)
    if mix.means[0] != mix.means[1]:
        raise ValueError("equal-means bound needs nu_0 == nu_1")
    alpha = check_alpha(alpha)
    v = observation_variance(mix, alpha)
    dw = alpha * (1 - alpha ** 2) * (mix.variances[1] - mix.variances[0]) / (v[0] * v[1])
    y = np.asarray(y_source(seed, num_y_samples), dtype=float).reshape(num_y_samples, num_nodes)
    resid4 = np.mean((y - alpha * mix.means[0]) ** 4, axis=-1)
    return float(dw ** 2 * np.mean(_min_term(y, mix, alpha, L) * np.sqrt(resid4)))


# --------------------------------------------------------------------------
# the loss itself

@dataclass(frozen=True)
class DeltaMSEEstimate:
    delta: float            # (1/N) E ||z_app - z_opt||^2
    stderr: float
    direct: float           # MSE_app - MSE_opt from squared errors against Z
    direct_stderr: float
    mse_app: float
    mse_opt: float
    converged: bool
    num_samples: int


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    se = float(np.std(x, ddof=1) / np.sqrt(len(x))) if len(x) > 1 else float("nan")
    return float(np.mean(x)), se


def empirical_delta_mse(theta_star: ExponentialParams, theta_hat: ExponentialParams,
                        rho: EdgeWeights, mix: MixtureSpec, alpha: float, trials: int, seed,
                        options: MessagePassingOptions | None = None,
                        strict: bool = True) -> DeltaMSEEstimate:
    """Monte Carlo excess MSE of the surrogate predictor over the Bayes predictor.

    Each trial draws ``X`` from ``theta_star`` then ``(Z, Y)``.  The Bayes
    predictor uses exact posterior marginals at ``theta_star + gamma(Y)``;
    the approximate predictor uses reweighted sum-product at
    ``theta_hat + gamma(Y)``.  Set ``strict=False`` to keep going when some
    message-passing runs fail to converge (reported in ``converged``).
    """
    if trials < 2:
        raise ValueError("need at least two trials for a standard error")
    sx, sy = np.random.SeedSequence(seed).spawn(2)
    X = exact_sample(theta_star, sx, trials)
    Z, Y = sample_observation(X, mix, alpha, sy)
    offsets = gamma_offsets(Y, mix, alpha)
    mu = exact_node_marginals_batch(theta_star, offsets)
    tau, res = batch_node_marginals(theta_hat, offsets, rho, options)
    converged = bool(np.all(res.converged))
    if strict and not converged:
        raise ConvergenceError(f"{int(np.sum(~res.converged))} of {trials} inference runs "
                               "did not converge")
    z_opt = predict(Y, mu, mix, alpha)
    z_app = predict(Y, tau, mix, alpha)
    gap = np.mean((z_app - z_opt) ** 2, axis=1)
    err_app = np.mean((z_app - Z) ** 2, axis=1)
    err_opt = np.mean((z_opt - Z) ** 2, axis=1)
    delta, se = _mean_se(gap)
    direct, dse = _mean_se(err_app - err_opt)
    return DeltaMSEEstimate(delta, se, direct, dse, float(np.mean(err_app)),
                            float(np.mean(err_opt)), converged, trials)
