import numpy as np
import pytest

from surrogate_mrf.bounds import (
    BoundReport,
    bound_equal_means,
    bound_equal_variance,
    empirical_delta_mse,
    lipschitz_constant_estimate,
    model_y_source,
    theorem_bound,
    theorem_bound_terms,
)
from surrogate_mrf.estimation import trw_closed_form_estimate
from surrogate_mrf.exact import hessian_log_partition
from surrogate_mrf.graph import grid_graph
from surrogate_mrf.harness.experiments import draw_true_model
from surrogate_mrf.prediction import ENSEMBLE_A, ENSEMBLE_B, MixtureSpec
from surrogate_mrf.transfer import exact_marginals
from surrogate_mrf.variational import (
    bp_edge_weights,
    hessian_surrogate,
    uniform_spanning_tree_edge_probs,
)

from conftest import random_tree_params


@pytest.fixture(scope="module")
def grid_model():
    g = grid_graph(3, 3)
    theta_star = draw_true_model(g, "attractive", 0.7, seed=21)
    rho = uniform_spanning_tree_edge_probs(g)
    theta_hat = trw_closed_form_estimate(exact_marginals(theta_star), rho)
    return theta_star, theta_hat, rho


def _gaussian_source(num_nodes):
    def draw(seed, count):
        return np.random.default_rng(seed).normal(size=(count, num_nodes)) * 1.5
    return draw


def test_bound_vanishes_for_identical_components():
    mix = MixtureSpec((0.4, 0.4), (1.3, 1.3))
    assert theorem_bound(mix, 0.5, 0.1, 9, 500, 0, _gaussian_source(9)) == 0.0


def test_bound_vanishes_at_zero_snr_and_near_one():
    src = _gaussian_source(9)
    assert theorem_bound(ENSEMBLE_A, 0.0, 0.1, 9, 500, 0, src) == 0.0
    assert theorem_bound(ENSEMBLE_B, 0.0, 0.1, 9, 500, 0, src) == 0.0
    sep = ENSEMBLE_A.means[1] - ENSEMBLE_A.means[0]
    assert theorem_bound(ENSEMBLE_A, 0.999, 0.1, 9, 500, 0, src) <= 1e-3 * sep ** 2


@pytest.mark.parametrize("alpha", [0.1, 0.5, 0.9])
def test_equal_variance_special_case_is_exact(alpha):
    src = _gaussian_source(9)
    general = theorem_bound(ENSEMBLE_A, alpha, 0.1, 9, 2000, 3, src)
    special = bound_equal_variance(ENSEMBLE_A, alpha, 0.1, 9, 2000, 3, src)
    assert special == pytest.approx(general, rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("alpha", [0.1, 0.5, 0.9])
def test_equal_means_special_case_is_exact(alpha):
    src = _gaussian_source(9)
    general = theorem_bound(ENSEMBLE_B, alpha, 0.1, 9, 2000, 4, src)
    special = bound_equal_means(ENSEMBLE_B, alpha, 0.1, 9, 2000, 4, src)
    assert special == pytest.approx(general, rel=1e-12, abs=1e-15)


def test_special_case_endpoints_and_preconditions():
    src = _gaussian_source(4)
    flat = MixtureSpec((0.0, 0.0), (2.0, 2.0))
    assert bound_equal_means(flat, 0.5, 0.1, 4, 100, 0, src) == 0.0
    for alpha in (0.0, 1.0):
        assert bound_equal_means(ENSEMBLE_B, alpha, 0.1, 4, 100, 0, src) == 0.0
    assert bound_equal_variance(ENSEMBLE_A, 1.0, 0.1, 4, 100, 0, src) == pytest.approx(0.0,
                                                                                       abs=1e-25)
    assert bound_equal_variance(MixtureSpec((1.0, 1.0), (0.5, 0.5)), 0.5, 0.1, 4, 100, 0,
                                src) == 0.0
    with pytest.raises(ValueError):
        bound_equal_variance(ENSEMBLE_B, 0.5, 0.1, 4, 100, 0, src)
    with pytest.raises(ValueError):
        bound_equal_means(ENSEMBLE_A, 0.5, 0.1, 4, 100, 0, src)
    three = MixtureSpec((0.0, 1.0, 2.0), (1.0, 1.0, 1.0))
    with pytest.raises(ValueError):
        theorem_bound(three, 0.5, 0.1, 4, 100, 0, src)
    with pytest.raises(ValueError):
        theorem_bound_terms(np.zeros((2, 4)), ENSEMBLE_A, 0.5, -1.0)


def test_bound_report_rejects_negative_bound():
    with pytest.raises(ValueError):
        BoundReport(0.1, -1.0, 0.0, 0.0, 10, 0)


def test_lipschitz_vanishes_when_surrogate_is_exact():
    p = random_tree_params(4, 2, seed=5)
    L = lipschitz_constant_estimate(p, p, bp_edge_weights(p.graph), num_deltas=10,
                                    radius=0.5, seed=1)
    assert L <= 1e-3


def test_lipschitz_dominates_single_point_oracle(grid_model):
    theta_star, theta_hat, rho = grid_model
    at_zero = np.linalg.norm(hessian_log_partition(theta_star)
                             - hessian_surrogate(theta_hat, rho), ord=2)
    L = lipschitz_constant_estimate(theta_star, theta_hat, rho, num_deltas=5, radius=0.5, seed=2)
    assert L >= at_zero - 1e-9
    assert L == lipschitz_constant_estimate(theta_star, theta_hat, rho, num_deltas=5,
                                            radius=0.5, seed=2)


def test_delta_mse_endpoints(grid_model):
    theta_star, theta_hat, rho = grid_model
    for alpha in (0.0, 1.0):
        est = empirical_delta_mse(theta_star, theta_hat, rho, ENSEMBLE_A, alpha, 200, seed=3)
        assert est.delta < 1e-18
        assert est.converged


def test_delta_mse_pythagorean_agreement_and_bound(grid_model):
    theta_star, theta_hat, rho = grid_model
    est = empirical_delta_mse(theta_star, theta_hat, rho, ENSEMBLE_A, 0.5, 4000, seed=4)
    assert est.delta > 0
    assert abs(est.delta - est.direct) <= 3 * np.hypot(est.stderr, est.direct_stderr)
    assert est.mse_app >= est.mse_opt - 3 * est.direct_stderr
    src = model_y_source(theta_star, ENSEMBLE_A, 0.5)
    bound = theorem_bound(ENSEMBLE_A, 0.5, 0.8, 9, 4000, 5, src)
    assert est.delta <= bound + 3 * est.stderr


def test_model_source_is_reproducible(grid_model):
    theta_star, _, _ = grid_model
    src = model_y_source(theta_star, ENSEMBLE_B, 0.4)
    assert np.array_equal(src(9, 50), src(9, 50))
    assert src(9, 50).shape == (50, 9)
