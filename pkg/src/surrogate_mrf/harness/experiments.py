"""Experiment orchestration: method comparisons, bound comparisons, demos.

Every random quantity is drawn from a seed derived from the master seed and
the position of the work item, never from shared global state.  Rows are
buffered per work item and written in a fixed order, so the CSV bytes are
a function of the configuration alone.
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields

import numpy as np
from scipy.special import softmax

from ..bounds import (
    empirical_delta_mse,
    lipschitz_constant_estimate,
    model_y_source,
    theorem_bound,
    typical_gamma_scale,
)
from ..estimation import (
    empirical_marginals,
    independence_estimate,
    smooth_moments,
    trw_closed_form_estimate,
)
from ..graph import Graph, cycle_graph, grid_graph
from ..io import read_model
from ..params import ExponentialParams, MarginalSet
from ..prediction import (
    MixtureSpec,
    gamma_offsets,
    predict,
    sample_observation,
)
from ..transfer import exact_marginals, exact_node_marginals_batch, exact_sample
from ..variational import (
    EdgeWeights,
    MessagePassingOptions,
    batch_node_marginals,
    bp_edge_weights,
    local_consistency_check,
    marginal_polytope_membership_bruteforce,
    trw_sum_product,
    uniform_spanning_tree_edge_probs,
)
from .config import METHODS, ExperimentConfig

SPINS = np.array([-1.0, 1.0])
STREAM_MODEL, STREAM_DATA, STREAM_FIT = 0, 1, 2
# below this the channel is effectively noiseless and a ratio of MSEs is meaningless
DEGENERATE_MSE = 1e-20


def derive_seed(master: int, *key: int) -> int:
    """Unsigned 64-bit seed that depends only on ``master`` and the integer ``key``."""
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


# --------------------------------------------------------------------------
# models

def build_graph(spec: str) -> Graph:
    kind, _, arg = spec.partition(":")
    if kind == "grid":
        rows, _, cols = arg.lower().partition("x")
        return grid_graph(int(rows), int(cols))
    if kind == "edges":
        return read_model(arg).graph
    raise ValueError(f"unknown graph spec {spec!r}")


def build_rho(spec: str, graph: Graph) -> EdgeWeights:
    if spec == "uniform-spanning-tree":
        return uniform_spanning_tree_edge_probs(graph)
    vals = np.loadtxt(spec.partition(":")[2], ndmin=1)
    rho = EdgeWeights(vals, mode="trw")
    rho.validate(graph)
    return rho


def draw_true_model(graph: Graph, kind: str, gamma: float, seed,
                    num_states: int = 2) -> ExponentialParams:
    """Random spin-glass couplings converted to indicator tables.

    Attractive draws ``theta_st ~ U[0, gamma]``, mixed draws ``U[-gamma, gamma]``;
    the spin energy ``theta_st x_s x_t`` with ``x in {-1, +1}`` becomes the
    table ``theta_st * outer(s, s)``.  Node terms are zero.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("coupling strength must lie in [0, 1]")
    if kind not in ("attractive", "mixed"):
        raise ValueError(f"unknown coupling kind {kind!r}")
    if num_states != 2:
        raise ValueError("spin couplings are defined for binary labels")
    rng = np.random.default_rng(seed)
    low = 0.0 if kind == "attractive" else -gamma
    w = rng.uniform(low, gamma, size=graph.num_edges)
    edge = w[:, None, None] * np.outer(SPINS, SPINS)[None]
    return ExponentialParams(graph, np.zeros((graph.num_nodes, 2)), edge)


def fit_methods(moments: MarginalSet, methods, rho_trw: EdgeWeights) -> dict:
    fits = {}
    for name in methods:
        if name == "ind":
            fits[name] = (independence_estimate(moments), None)
        elif name == "bp":
            rho = bp_edge_weights(moments.graph)
            fits[name] = (trw_closed_form_estimate(moments, rho), rho)
        else:
            fits[name] = (trw_closed_form_estimate(moments, rho_trw), rho_trw)
    return fits


def method_marginals(theta_hat: ExponentialParams, rho: EdgeWeights | None,
                     offsets: np.ndarray, options: MessagePassingOptions):
    """Node (pseudo)marginals at ``theta_hat + offset``; returns ``(marg, converged, iterations)``."""
    if rho is None:  # independence model: posterior factorizes over nodes
        return softmax(theta_hat.node[None] + offsets, axis=-1), True, 0
    marg, res = batch_node_marginals(theta_hat, offsets, rho, options)
    return marg, bool(np.all(res.converged)), int(np.max(res.iterations))


# --------------------------------------------------------------------------
# method comparison

@dataclass(frozen=True)
class ResultRow:
    method: str
    coupling: float
    alpha: float
    trial: int
    seed: int
    mse_app: float
    mse_opt: float
    pct_increase: float
    converged: bool
    iterations: int


def pct_increase(mse_app: float, mse_opt: float) -> float:
    """``100 (app - opt) / opt``; zero when both errors vanish (noiseless channel)."""
    if mse_opt <= DEGENERATE_MSE:
        return 0.0
    return 100.0 * (mse_app - mse_opt) / mse_opt


def _true_moments(theta_star: ExponentialParams, cfg: ExperimentConfig, seed: int) -> MarginalSet:
    if cfg.n_samples == 0:
        return exact_marginals(theta_star)
    X = exact_sample(theta_star, seed, cfg.n_samples)
    mom = empirical_marginals(theta_star.graph, X, theta_star.num_states)
    return smooth_moments(mom) if cfg.smoothing else mom


def _trial_rows(cfg: ExperimentConfig, gi: int, trial: int) -> list[ResultRow]:
    """All rows for one (coupling, trial) work item, across every alpha and method."""
    graph = build_graph(cfg.graph)
    rho_trw = build_rho(cfg.rho, graph)
    mix = cfg.mixture()
    options = cfg.message_options()
    gamma = cfg.gammas[gi]
    theta_star = draw_true_model(graph, cfg.coupling, gamma,
                                 derive_seed(cfg.seed, STREAM_MODEL, gi, trial), cfg.states)
    moments = _true_moments(theta_star, cfg, derive_seed(cfg.seed, STREAM_FIT, gi, trial))
    fits = fit_methods(moments, cfg.methods, rho_trw)
    rows = []
    for ai, alpha in enumerate(cfg.alphas):
        seed = derive_seed(cfg.seed, STREAM_DATA, gi, ai, trial)
        sx, sy = np.random.SeedSequence(seed).spawn(2)
        X = exact_sample(theta_star, sx, cfg.draws_per_trial)
        Z, Y = sample_observation(X, mix, alpha, sy)
        offsets = gamma_offsets(Y, mix, alpha)
        z_opt = predict(Y, exact_node_marginals_batch(theta_star, offsets), mix, alpha)
        mse_opt = float(np.mean((z_opt - Z) ** 2))
        for name in METHODS:
            if name not in fits:
                continue
            theta_hat, rho = fits[name]
            marg, ok, iters = method_marginals(theta_hat, rho, offsets, options)
            mse_app = float(np.mean((predict(Y, marg, mix, alpha) - Z) ** 2))
            rows.append(ResultRow(name, gamma, alpha, trial, seed, mse_app, mse_opt,
                                  pct_increase(mse_app, mse_opt), ok, iters))
    return rows


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows, header) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_format(v) for v in astuple(row)])
    return buf.getvalue()


def run_experiment_rows(cfg: ExperimentConfig) -> list[ResultRow]:
    items = [(gi, t) for gi in range(len(cfg.gammas)) for t in range(cfg.trials)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(_trial_rows, [cfg] * len(items), *zip(*items)))
    else:
        chunks = [_trial_rows(cfg, gi, t) for gi, t in items]
    rows = [r for chunk in chunks for r in chunk]
    order = {name: k for k, name in enumerate(METHODS)}
    gidx = {g: k for k, g in enumerate(cfg.gammas)}
    aidx = {a: k for k, a in enumerate(cfg.alphas)}
    rows.sort(key=lambda r: (gidx[r.coupling], aidx[r.alpha], r.trial, order[r.method]))
    return rows


def run_experiment(cfg: ExperimentConfig) -> str:
    """CSV text of :class:`ResultRow` records in (coupling, alpha, trial, method) order."""
    return rows_to_csv(run_experiment_rows(cfg), [f.name for f in fields(ResultRow)])


def summarize(rows: list[ResultRow]) -> dict:
    """Mean pct_increase and convergence rate keyed by ``(method, coupling, alpha)``."""
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.method, r.coupling, r.alpha), []).append(r)
    return {k: (float(np.mean([r.pct_increase for r in v])),
                float(np.mean([r.converged for r in v])))
            for k, v in groups.items()}


# --------------------------------------------------------------------------
# bound comparison

@dataclass(frozen=True)
class BoundRow:
    ensemble: str
    means: str
    variances: str
    coupling: float
    alpha: float
    seed: int
    L_fixed: float
    bound_fixed: float
    L_estimate: float
    bound_estimate: float
    delta_mse: float
    delta_stderr: float
    direct_delta: float
    direct_stderr: float
    converged: bool


def _sweep_mixtures(cfg: ExperimentConfig) -> list[tuple[str, MixtureSpec]]:
    if cfg.sweep == "A":
        return [(f"A-sep{v:g}", MixtureSpec((-v, v), (0.5, 0.5))) for v in cfg.sweep_values]
    if cfg.sweep == "B":
        return [(f"B-var{v:g}", MixtureSpec((0.0, 0.0), (1.0, v))) for v in cfg.sweep_values]
    return [(cfg.ensemble, cfg.mixture())]


def run_bound_comparison_rows(cfg: ExperimentConfig, estimate_L: bool = True) -> list[BoundRow]:
    """Empirical excess MSE of the reweighted predictor against the bound, per alpha.

    The model is fit from exact moments.  For each alpha the bound is
    evaluated with the fixed ``cfg.lipschitz`` and, when ``estimate_L``, with a
    Monte Carlo Lipschitz estimate over a ball of radius twice the typical
    per-node observation offset.
    """
    if cfg.states != 2:
        raise ValueError("bound comparisons need two mixture components")
    graph = build_graph(cfg.graph)
    rho = build_rho(cfg.rho, graph)
    options = cfg.message_options()
    rows = []
    for gi, gamma in enumerate(cfg.gammas):
        theta_star = draw_true_model(graph, cfg.coupling, gamma,
                                     derive_seed(cfg.seed, STREAM_MODEL, gi, 0))
        theta_hat = trw_closed_form_estimate(exact_marginals(theta_star), rho)
        for label, mix in _sweep_mixtures(cfg):
            for ai, alpha in enumerate(cfg.alphas):
                seed = derive_seed(cfg.seed, STREAM_DATA, gi, ai, 0)
                source = model_y_source(theta_star, mix, alpha)
                b_fixed = theorem_bound(mix, alpha, cfg.lipschitz, graph.num_nodes,
                                        cfg.y_samples, seed, source)
                L_est, b_est = float("nan"), float("nan")
                if estimate_L:
                    scale = typical_gamma_scale(source(seed, min(cfg.y_samples, 1000)),
                                                mix, alpha)
                    L_est = lipschitz_constant_estimate(
                        theta_star, theta_hat, rho, cfg.num_deltas, max(2 * scale, 1e-3),
                        derive_seed(cfg.seed, STREAM_FIT, gi, ai))
                    b_est = theorem_bound(mix, alpha, L_est, graph.num_nodes,
                                          cfg.y_samples, seed, source)
                est = empirical_delta_mse(theta_star, theta_hat, rho, mix, alpha,
                                          cfg.y_samples, seed, options, strict=False)
                rows.append(BoundRow(label, ",".join(map(repr, mix.means)),
                                     ",".join(map(repr, mix.variances)), gamma, alpha, seed,
                                     cfg.lipschitz, b_fixed, L_est, b_est, est.delta,
                                     est.stderr, est.direct, est.direct_stderr, est.converged))
    return rows


def run_bound_comparison(cfg: ExperimentConfig, estimate_L: bool = True) -> str:
    return rows_to_csv(run_bound_comparison_rows(cfg, estimate_L),
                       [f.name for f in fields(BoundRow)])


# --------------------------------------------------------------------------
# polytope demo and stability

def cycle_pseudomarginals(a: float) -> MarginalSet:
    """Uniform node tables on a 3-cycle with every edge table ``[[a, .5-a], [.5-a, a]]``."""
    graph = cycle_graph(3)
    table = np.array([[a, 0.5 - a], [0.5 - a, a]])
    return MarginalSet(graph, np.full((3, 2), 0.5), np.repeat(table[None], 3, axis=0),
                       kind="pseudo")


def polytope_demo_rows(values=(0.0, 0.1, 0.2, 0.25, 0.3, 0.4, 0.5)):
    out = []
    for a in values:
        tau = cycle_pseudomarginals(a)
        local, _ = local_consistency_check(tau)
        out.append((a, local, marginal_polytope_membership_bruteforce(tau.graph, tau)))
    return out


def run_polytope_demo(values=(0.0, 0.1, 0.2, 0.25, 0.3, 0.4, 0.5)) -> str:
    lines = ["alpha_st locally_consistent realizable"]
    for a, local, real in polytope_demo_rows(values):
        lines.append(f"{a:.2f} {str(local).lower()} {str(real).lower()}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class StabilityRow:
    method: str
    coupling: float
    alpha: float
    instances: int
    converged: int
    rate: float
    mean_iterations: float


def run_stability_rows(cfg: ExperimentConfig) -> list[StabilityRow]:
    """Convergence of reweighted sum-product and plain BP at prediction time.

    Each instance draws a true model, fits it from exact moments with each
    method, draws one observation vector and runs message passing on the
    fitted parameters plus the observation offsets.  Zero-field spin models
    alone would be uninformative: uniform messages are already their fixed
    point.
    """
    graph = build_graph(cfg.graph)
    rho_trw = build_rho(cfg.rho, graph)
    mix = cfg.mixture()
    options = cfg.message_options()
    names = [name for name in ("bp", "trw") if name in cfg.methods]
    rows = []
    for gi, gamma in enumerate(cfg.gammas):
        fits = []
        for k in range(cfg.instances):
            theta_star = draw_true_model(graph, cfg.coupling, gamma,
                                         derive_seed(cfg.seed, STREAM_MODEL, gi, k))
            fits.append((theta_star, fit_methods(exact_marginals(theta_star), names, rho_trw)))
        for ai, alpha in enumerate(cfg.alphas):
            reports = {name: [] for name in names}
            for k, (theta_star, fit) in enumerate(fits):
                sx, sy = np.random.SeedSequence(
                    derive_seed(cfg.seed, STREAM_DATA, gi, ai, k)).spawn(2)
                _, y = sample_observation(exact_sample(theta_star, sx, 1), mix, alpha, sy)
                offset = gamma_offsets(y, mix, alpha)[0]
                for name in names:
                    theta_hat, rho = fit[name]
                    shifted = ExponentialParams(graph, theta_hat.node + offset, theta_hat.edge)
                    reports[name].append(trw_sum_product(shifted, rho, options)[1])
            for name in names:
                ok = sum(r.converged for r in reports[name])
                rows.append(StabilityRow(name, gamma, alpha, cfg.instances, ok,
                                         ok / cfg.instances,
                                         float(np.mean([r.iterations for r in reports[name]]))))
    return rows


def run_stability(cfg: ExperimentConfig) -> str:
    return rows_to_csv(run_stability_rows(cfg), [f.name for f in fields(StabilityRow)])
