"""Gaussian-mixture observation channel and least-squares predictors.

Each node carries a hidden label ``X_s``; given ``X_s = j`` the signal is
``Z_s ~ N(nu_j, sigma2_j)`` and the observation is
``Y_s = alpha Z_s + sqrt(1 - alpha^2) W_s`` with standard normal ``W_s``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph
from .params import ExponentialParams


@dataclass(frozen=True)
class MixtureSpec:
    means: tuple[float, ...]
    variances: tuple[float, ...]

    def __post_init__(self):
        means = tuple(float(v) for v in self.means)
        variances = tuple(float(v) for v in self.variances)
        if len(means) != len(variances) or len(means) < 2:
            raise ValueError("need matching means and variances for at least two classes")
        if any(v <= 0 for v in variances):
            raise ValueError("mixture variances must be positive")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)

    @property
    def num_classes(self) -> int:
        return len(self.means)

    @property
    def nu(self) -> np.ndarray:
        return np.array(self.means)

    @property
    def sigma2(self) -> np.ndarray:
        return np.array(self.variances)


ENSEMBLE_A = MixtureSpec((-1.0, 1.0), (0.5, 0.5))  # bimodal
ENSEMBLE_B = MixtureSpec((0.0, 0.0), (1.0, 9.0))  # heavy-tailed


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"SNR parameter must lie in [0, 1], got {alpha}")
    return alpha


def observation_variance(mix: MixtureSpec, alpha: float) -> np.ndarray:
    """Per-class variance of ``Y_s`` given ``X_s = j``: ``alpha^2 sigma2_j + 1 - alpha^2``."""
    alpha = check_alpha(alpha)
    return alpha ** 2 * mix.sigma2 + (1.0 - alpha ** 2)


def sample_observation(x: np.ndarray, mix: MixtureSpec, alpha: float, seed):
    """Draw ``(z, y)`` for label array ``x`` (any shape)."""
    alpha = check_alpha(alpha)
    x = np.asarray(x, dtype=np.intp)
    rng = np.random.default_rng(seed)
    z = mix.nu[x] + np.sqrt(mix.sigma2[x]) * rng.standard_normal(x.shape)
    y = alpha * z + np.sqrt(1.0 - alpha ** 2) * rng.standard_normal(x.shape)
    return z, y


def blse_weights(mix: MixtureSpec, alpha: float) -> np.ndarray:
    """``omega_j = alpha sigma2_j / (alpha^2 sigma2_j + 1 - alpha^2)`` for every class."""
    alpha = check_alpha(alpha)
    return alpha * mix.sigma2 / observation_variance(mix, alpha)


def blse_weight(j: int, mix: MixtureSpec, alpha: float) -> float:
    return float(blse_weights(mix, alpha)[j])


def gamma_offsets(y: np.ndarray, mix: MixtureSpec, alpha: float) -> np.ndarray:
    """Node-potential offsets turning the prior into the posterior given ``y``.

    Returns an array of shape ``y.shape + (m,)`` whose class-``j`` entry is
    ``log p(y_s | X_s=j) - log p(y_s | X_s=0)``; the class-0 column is zero.
    """
    alpha = check_alpha(alpha)
    y = np.asarray(y, dtype=float)
    v = observation_variance(mix, alpha)
    mean = alpha * mix.nu
    if mix.num_classes == 2:
        g1 = 0.5 * (np.log(v[0] / v[1]) + (y - mean[0]) ** 2 / v[0] - (y - mean[1]) ** 2 / v[1])
        return np.stack([np.zeros_like(y), g1], axis=-1)
    loglik = -0.5 * (np.log(v) + (y[..., None] - mean) ** 2 / v)
    return loglik - loglik[..., :1]


def gamma_from_observation(graph: Graph, y: np.ndarray, mix: MixtureSpec,
                           alpha: float) -> ExponentialParams:
    """Observation offset as an exponential parameter (edge terms identically zero)."""
    y = np.asarray(y, dtype=float)
    if y.shape != (graph.num_nodes,):
        raise ValueError("observation length does not match the graph")
    m = mix.num_classes
    return ExponentialParams(graph, gamma_offsets(y, mix, alpha),
                             np.zeros((graph.num_edges, m, m)))


def component_estimators(y: np.ndarray, mix: MixtureSpec, alpha: float) -> np.ndarray:
    """Conditional means ``E[Z_s | Y_s = y_s, X_s = j]`` for every class (last axis).

    Equal to ``nu_j + omega_j (y_s - alpha nu_j)``.
    """
    y = np.asarray(y, dtype=float)
    w = blse_weights(mix, alpha)
    return mix.nu + w * (y[..., None] - alpha * mix.nu)


def component_estimator(y_s: float, j: int, mix: MixtureSpec, alpha: float) -> float:
    return float(component_estimators(np.asarray(y_s), mix, alpha)[..., j])


def predict(y: np.ndarray, node_marginals: np.ndarray, mix: MixtureSpec, alpha: float,
            atol: float = 1e-8) -> np.ndarray:
    """Mixture-weighted least-squares prediction ``sum_j marginal_s(j) g_j(y_s)``.

    With exact posterior marginals this is the Bayes least-squares estimate;
    with pseudomarginals it is the surrogate-based approximation.  Batched
    inputs of shape ``(..., N)`` and ``(..., N, m)`` are accepted.
    """
    node_marginals = np.asarray(node_marginals, dtype=float)
    if np.any(np.abs(node_marginals.sum(axis=-1) - 1.0) > atol) or np.any(node_marginals < -atol):
        raise ValueError("node marginals are not normalized probability vectors")
    g = component_estimators(y, mix, alpha)
    return np.sum(node_marginals * g, axis=-1)
