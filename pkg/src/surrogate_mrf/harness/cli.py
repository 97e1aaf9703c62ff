"""Command-line entry point.

Exit status is 0 on success, 2 for configuration or usage errors and 3 for
numerical failures (non-convergence, singular systems, enumeration caps).
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from ..estimation import LineSearchError, ZeroCellError, empirical_marginals, smooth_moments
from ..exact import EnumerationCapError
from ..io import read_model, read_observations, read_samples, write_model, write_samples
from ..prediction import gamma_offsets, predict
from ..transfer import exact_marginals, exact_node_marginals_batch, exact_sample
from ..variational import ConvergenceError, NumericalError, bp_edge_weights, trw_sum_product
from .config import ConfigError, ExperimentConfig, load_config
from .experiments import (
    build_graph,
    build_rho,
    derive_seed,
    draw_true_model,
    fit_methods,
    method_marginals,
    run_bound_comparison,
    run_experiment,
    run_polytope_demo,
    run_stability,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _config(args) -> ExperimentConfig:
    overrides = {"seed": args.seed}
    if args.config:
        return load_config(args.config, **overrides)
    return ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _method_weights(method: str, graph, cfg: ExperimentConfig):
    if method == "bp":
        return bp_edge_weights(graph)
    return build_rho(cfg.rho, graph)


def cmd_sample_model(args):
    """Draw a true model from the configured ensemble; optionally sample configurations."""
    cfg = _config(args)
    graph = build_graph(cfg.graph)
    params = draw_true_model(graph, cfg.coupling, cfg.gammas[0],
                             derive_seed(cfg.seed, 0, 0, 0), cfg.states)
    write_model(params, args.out or "model.txt")
    if args.samples:
        write_samples(exact_sample(params, derive_seed(cfg.seed, 2, 0, 0), args.n), args.samples)


def cmd_estimate(args):
    """Fit a model by closed-form moment matching from a model's exact moments or samples."""
    cfg = _config(args)
    truth = read_model(args.model)
    if args.samples:
        mom = empirical_marginals(truth.graph, read_samples(args.samples), truth.num_states)
        mom = smooth_moments(mom) if cfg.smoothing else mom
    else:
        mom = exact_marginals(truth)
    rho = build_rho(cfg.rho, truth.graph)
    theta_hat, _ = fit_methods(mom, [args.method], rho)[args.method]
    write_model(theta_hat, args.out or "estimate.txt")


def cmd_infer(args):
    """Node pseudomarginals of a model file, one row per node."""
    cfg = _config(args)
    params = read_model(args.model)
    if args.method == "exact":
        node = exact_marginals(params).node
        status = "exact"
    else:
        tau, rep = trw_sum_product(params, _method_weights(args.method, params.graph, cfg),
                                   cfg.message_options())
        if not rep.converged:
            raise ConvergenceError(f"message passing did not converge: {rep}")
        node = tau.node
        status = f"converged iterations={rep.iterations} delta={rep.final_delta:.3g}"
    lines = [" ".join(format(v, ".17g") for v in row) for row in node]
    _emit("\n".join(lines) + "\n", args.out)
    print(status, file=sys.stderr)


def cmd_predict(args):
    """Predict the clean signal from observations with a fitted model."""
    cfg = _config(args)
    params = read_model(args.model)
    y, alpha = read_observations(args.observations)
    mix = cfg.mixture()
    offsets = gamma_offsets(y, mix, alpha)[None]
    if args.method == "exact":
        marg = exact_node_marginals_batch(params, offsets)
    else:
        weights = None if args.method == "ind" else _method_weights(args.method, params.graph,
                                                                     cfg)
        marg, ok, _ = method_marginals(params, weights, offsets, cfg.message_options())
        if not ok:
            raise ConvergenceError("message passing did not converge")
    z = predict(y, marg[0], mix, alpha)
    _emit("\n".join(format(v, ".17g") for v in z) + "\n", args.out)


def cmd_experiment(args):
    _emit(run_experiment(_config(args)), args.out)


def cmd_bound_compare(args):
    _emit(run_bound_comparison(_config(args), estimate_L=not args.fixed_only), args.out)


def cmd_polytope_demo(args):
    _emit(run_polytope_demo(), args.out)


def cmd_stability_probe(args):
    _emit(run_stability(_config(args)), args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="surrogate-mrf",
        description="Estimation and prediction in discrete MRFs with reweighted surrogates.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", help="output path (default: stdout or a fixed name)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample-model", parents=[common], help=cmd_sample_model.__doc__)
    p.add_argument("--samples", help="also write sampled configurations here")
    p.add_argument("-n", type=int, default=1000, help="number of sampled configurations")
    p.set_defaults(func=cmd_sample_model)

    p = sub.add_parser("estimate", parents=[common], help=cmd_estimate.__doc__)
    p.add_argument("--model", required=True, help="true model (supplies graph and moments)")
    p.add_argument("--samples", help="fit from these configurations instead of exact moments")
    p.add_argument("--method", choices=("ind", "bp", "trw"), default="trw")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("infer", parents=[common], help=cmd_infer.__doc__)
    p.add_argument("--model", required=True)
    p.add_argument("--method", choices=("bp", "trw", "exact"), default="trw")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("predict", parents=[common], help=cmd_predict.__doc__)
    p.add_argument("--model", required=True, help="fitted model")
    p.add_argument("--observations", required=True)
    p.add_argument("--method", choices=("ind", "bp", "trw", "exact"), default="trw")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("experiment", parents=[common], help="IND/BP/TRW comparison CSV")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("bound-compare", parents=[common], help="excess MSE against the bound")
    p.add_argument("--fixed-only", action="store_true", help="skip the Lipschitz estimate")
    p.set_defaults(func=cmd_bound_compare)

    p = sub.add_parser("polytope-demo", parents=[common], help="3-cycle polytope strictness")
    p.set_defaults(func=cmd_polytope_demo)

    p = sub.add_parser("stability-probe", parents=[common], help="convergence rates CSV")
    p.set_defaults(func=cmd_stability_probe)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ConvergenceError, LineSearchError, ZeroCellError,
            EnumerationCapError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
