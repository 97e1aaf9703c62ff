import csv
import io
import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from surrogate_mrf.exact import joint_log_probs
from surrogate_mrf.graph import cycle_graph, grid_graph
from surrogate_mrf.harness.cli import main
from surrogate_mrf.harness.config import ConfigError, ExperimentConfig, parse_config
from surrogate_mrf.harness.experiments import (
    derive_seed,
    draw_true_model,
    pct_increase,
    polytope_demo_rows,
    run_bound_comparison_rows,
    run_experiment,
    run_stability_rows,
)
from surrogate_mrf.io import read_model, write_model, write_observations

from conftest import random_params

SMALL = """
graph = grid:2x2
gammas = 0.0, 0.6
alphas = 0:1:3      # 0, 0.5, 1
trials = 2
draws_per_trial = 20
seed = 11
"""


# --------------------------------------------------------------------------
# configuration

def test_parse_config_reads_values_and_ranges():
    cfg = parse_config(SMALL)
    assert cfg.graph == "grid:2x2"
    assert cfg.gammas == (0.0, 0.6)
    assert cfg.alphas == (0.0, 0.5, 1.0)
    assert cfg.methods == ("ind", "bp", "trw")
    assert parse_config("alphas = 0:1:11").alphas[3] == 0.3
    assert parse_config(SMALL, seed=5).seed == 5


@pytest.mark.parametrize("text", [
    "nonsense = 1",
    "trials = 2\ntrials = 3",
    "trials",
    "trials = many",
    "smoothing = maybe",
    "gammas = 1.5",
    "methods = ind,ind",
    "methods = exact",
    "damping = 0.0",
    "ensemble = explicit\nmeans = 0,1,2\nvariances = 1,1,1",
    "sweep = A",
    "coupling = repulsive",
])
def test_parse_config_rejects_bad_input(text):
    with pytest.raises(ConfigError):
        parse_config(text)


# --------------------------------------------------------------------------
# seeds and model draws

@given(st.integers(0, 2 ** 63), st.lists(st.integers(0, 1000), max_size=4))
def test_derive_seed_is_pure(master, key):
    a = derive_seed(master, *key)
    assert a == derive_seed(master, *key)
    assert 0 <= a < 2 ** 64


def test_derive_seed_separates_streams():
    seeds = {derive_seed(3, s, g, t) for s in range(3) for g in range(3) for t in range(5)}
    assert len(seeds) == 45


def test_zero_coupling_gives_independent_model():
    p = draw_true_model(grid_graph(3, 3), "mixed", 0.0, seed=1)
    assert np.all(p.edge == 0) and np.all(p.node == 0)


@given(st.floats(0.0, 1.0), st.integers(0, 10 ** 6))
def test_attractive_couplings_are_nonnegative(gamma, seed):
    p = draw_true_model(grid_graph(2, 3), "attractive", gamma, seed)
    w = p.edge[:, 1, 1]
    assert np.all(w >= 0) and np.all(w <= gamma)
    assert np.allclose(p.edge[:, 0, 0], w) and np.allclose(p.edge[:, 0, 1], -w)


def test_spin_model_matches_indicator_tables():
    g = cycle_graph(3)
    p = draw_true_model(g, "mixed", 0.9, seed=4)
    w = p.edge[:, 1, 1]
    spins = np.array(list(itertools.product([-1.0, 1.0], repeat=3)))
    energy = np.array([sum(w[k] * x[s] * x[t] for k, (s, t) in enumerate(g.edges))
                       for x in spins])
    oracle = energy - np.log(np.sum(np.exp(energy)))
    X, logp = joint_log_probs(p)
    assert np.allclose(2.0 * X - 1.0, spins)
    np.testing.assert_allclose(logp, oracle, atol=1e-12)


# --------------------------------------------------------------------------
# method comparison

def test_pct_increase_rule():
    assert pct_increase(1.5, 1.0) == pytest.approx(50.0)
    assert pct_increase(0.0, 0.0) == 0.0


@pytest.fixture(scope="module")
def small_csv():
    return run_experiment(parse_config(SMALL))


def test_experiment_csv_arithmetic_and_determinism(small_csv):
    rows = list(csv.DictReader(io.StringIO(small_csv)))
    assert len(rows) == 2 * 3 * 2 * 3
    for r in rows:
        app, opt = float(r["mse_app"]), float(r["mse_opt"])
        assert float(r["pct_increase"]) == pytest.approx(pct_increase(app, opt), abs=1e-9)
        assert r["converged"] in ("true", "false")
        if float(r["coupling"]) == 0.0:
            assert float(r["pct_increase"]) <= 1.0
        if float(r["alpha"]) == 1.0:
            assert opt <= 1e-20
    assert run_experiment(parse_config(SMALL)) == small_csv


def test_methods_share_observation_stream(small_csv):
    rows = list(csv.DictReader(io.StringIO(small_csv)))
    by_cell = {}
    for r in rows:
        by_cell.setdefault((r["coupling"], r["alpha"], r["trial"]), set()).add(
            (r["seed"], r["mse_opt"]))
    assert all(len(v) == 1 for v in by_cell.values())


# --------------------------------------------------------------------------
# other experiments

def test_polytope_demo_classification():
    rows = {a: (local, real) for a, local, real in polytope_demo_rows((0.0, 0.1, 0.25, 0.5))}
    assert all(local for local, _ in rows.values())
    assert not rows[0.0][1] and not rows[0.1][1]
    assert rows[0.25][1] and rows[0.5][1]


def test_stability_rows_shape():
    cfg = ExperimentConfig(graph="grid:2x2", gammas=(0.3, 0.9), alphas=(0.5,), instances=3)
    rows = run_stability_rows(cfg)
    assert [(r.method, r.coupling) for r in rows] == [("bp", 0.3), ("trw", 0.3),
                                                      ("bp", 0.9), ("trw", 0.9)]
    assert all(r.converged == 3 and r.rate == 1.0 and r.mean_iterations > 1 for r in rows)


def test_bound_grows_with_separation_at_low_snr():
    cfg = ExperimentConfig(graph="grid:2x2", gammas=(0.7,), alphas=(0.2,), sweep="A",
                           sweep_values=(0.5, 1.0, 2.0), y_samples=400, seed=3)
    rows = run_bound_comparison_rows(cfg, estimate_L=False)
    bounds = [r.bound_fixed for r in rows]
    assert bounds == sorted(bounds) and bounds[0] < bounds[-1]
    for r in rows:
        assert r.converged and r.delta_mse <= r.bound_fixed + 3 * r.delta_stderr


# --------------------------------------------------------------------------
# command line

def test_cli_pipeline(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("graph = grid:2x2\ngammas = 0.5\nseed = 2\n")
    model, est = tmp_path / "model.txt", tmp_path / "est.txt"
    samples = tmp_path / "x.txt"
    assert main(["sample-model", "--config", str(cfg), "--out", str(model),
                 "--samples", str(samples), "-n", "200"]) == 0
    assert read_model(model).graph.num_nodes == 4
    assert main(["estimate", "--config", str(cfg), "--model", str(model),
                 "--out", str(est)]) == 0
    assert main(["estimate", "--config", str(cfg), "--model", str(model),
                 "--samples", str(samples), "--method", "bp",
                 "--out", str(tmp_path / "est_bp.txt")]) == 0
    capsys.readouterr()
    assert main(["infer", "--config", str(cfg), "--model", str(est)]) == 0
    node = np.loadtxt(io.StringIO(capsys.readouterr().out))
    np.testing.assert_allclose(node.sum(axis=1), 1.0, atol=1e-12)
    obs = tmp_path / "y.txt"
    write_observations(np.array([0.3, -1.2, 2.0, 0.0]), 0.5, obs)
    for method in ("ind", "bp", "trw", "exact"):
        assert main(["predict", "--config", str(cfg), "--model", str(est),
                     "--observations", str(obs), "--method", method]) == 0
        assert np.loadtxt(io.StringIO(capsys.readouterr().out)).shape == (4,)
    assert main(["polytope-demo"]) == 0
    assert "alpha_st" in capsys.readouterr().out


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["experiment", "--config", str(tmp_path / "missing.cfg")]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("trials = -1\n")
    assert main(["experiment", "--config", str(bad)]) == 2
    assert main(["no-such-command"]) == 2
    model = tmp_path / "model.txt"
    cfg = tmp_path / "run.cfg"
    cfg.write_text("graph = grid:3x3\nmax_iter = 1\n")
    write_model(random_params(grid_graph(3, 3), 2, seed=8), model)
    assert main(["infer", "--config", str(cfg), "--model", str(model), "--method", "bp"]) == 3
    capsys.readouterr()
