import math

import numpy as np
import pytest

from algorithms import (StepSizeRule, adaptive_eta, bandit_parameters, run_bandit, run_bandit_seeds, run_ftrl_linear,
                        run_ftrl_on_gradients, run_general_prox, run_improved_ftrl, run_prox)
from costs import CostFunction, Scenario, build_scenario, evar_sequential, total_variation
from geometry import EntropyMirrorMap, EuclideanMirrorMap, FeasibleSet, project
from harness import check_theorem_bound, offline_best, regret
from util import ConfigurationError, ContractViolation


def identical(cost, T, feasible_set=None):
    return Scenario.build([cost] * T, feasible_set or FeasibleSet.unit_ball(cost.dim))


def drift(seed, T=200, d=5):
    return build_scenario({"generator": "smooth_plus_drift", "T": T, "d": d, "seed": seed})


# --------------------------------------------------------------------------- step sizes

def test_step_size_rule_modes():
    scenario = identical(CostFunction.linear([0.6, 0.8]), 100)
    assert StepSizeRule.fixed(0.3).resolve("improved_ftrl", scenario) == 0.3
    assert StepSizeRule.horizon().resolve("ftrl_on_gradients", scenario) == pytest.approx(0.1)
    assert StepSizeRule.horizon(scale=20.0, cap=1.0).resolve("prox", scenario) == 1.0
    assert StepSizeRule.from_dict({"mode": "fixed", "eta": 0.25}) == StepSizeRule.fixed(0.25)


def test_step_size_rule_errors():
    scenario = identical(CostFunction.linear([0.6, 0.8]), 10)
    with pytest.raises(ContractViolation):
        StepSizeRule.fixed(-1.0)
    with pytest.raises(ConfigurationError):
        StepSizeRule.from_dict({"mode": "fixed", "eta": 0.1, "decay": 2})
    with pytest.raises(ConfigurationError):
        StepSizeRule("halving")
    with pytest.raises(ConfigurationError):
        StepSizeRule.oracle_evar().resolve("ftrl_on_gradients", scenario)
    with pytest.raises(ContractViolation):
        StepSizeRule.doubling().resolve("improved_ftrl", scenario)


# --------------------------------------------------------------------------- ftrl on linear costs

def test_ftrl_linear_first_round_plays_origin():
    trace = run_ftrl_linear(identical(CostFunction.linear([0.6, -0.8]), 1), 0.5)
    np.testing.assert_array_equal(trace.x[0], [0.0, 0.0])
    assert trace.costs[0] == 0.0


def test_ftrl_linear_closed_form_second_round():
    trace = run_ftrl_linear(identical(CostFunction.linear([1.0, 0.0]), 3), 1.0 / 6.0)
    np.testing.assert_allclose(trace.x[1], [-1.0 / 6.0, 0.0])
    np.testing.assert_allclose(trace.x[2], [-1.0 / 3.0, 0.0])


def test_ftrl_linear_oracle_step_size():
    scenario = build_scenario({"generator": "random_linear", "T": 400, "d": 3, "seed": 9})
    trace = run_ftrl_linear(scenario, StepSizeRule.oracle_evar())
    expected = min(2.0 / math.sqrt(total_variation(scenario)), 1.0 / 6.0)
    np.testing.assert_allclose(trace.etas, expected)


def test_ftrl_linear_rejects_large_or_nonlinear_costs():
    with pytest.raises(ConfigurationError):
        run_ftrl_linear(identical(CostFunction.linear([1.0, 1.0]), 5), 0.1)
    with pytest.raises(ConfigurationError):
        run_ftrl_linear(identical(CostFunction.quadratic(np.eye(2), [0.1, 0.0]), 5), 0.1)


# --------------------------------------------------------------------------- ftrl on gradients

def test_ftrl_on_gradients_matches_ftrl_linear_on_linear_costs():
    scenario = identical(CostFunction.linear([0.3, -0.4]), 50)
    np.testing.assert_allclose(run_ftrl_on_gradients(scenario, 0.2).x, run_ftrl_linear(scenario, 0.2).x)


def test_ftrl_on_gradients_regret_grows_with_horizon():
    regrets = []
    for T in (100, 400):
        scenario = build_scenario({"generator": "identical_quadratic", "T": T, "d": 5, "seed": 7})
        trace = run_ftrl_on_gradients(scenario, StepSizeRule.horizon())
        regrets.append(regret(trace).regret)
    assert regrets[1] / regrets[0] >= 1.5


def test_ftrl_on_gradients_single_round():
    cost = CostFunction.quadratic(np.eye(2), [0.3, 0.1])
    scenario = identical(cost, 1)
    trace = run_ftrl_on_gradients(scenario, 0.5)
    np.testing.assert_array_equal(trace.x[0], [0.0, 0.0])
    assert regret(trace).regret == pytest.approx(cost.value([0.0, 0.0]))


# --------------------------------------------------------------------------- improved ftrl

def test_improved_ftrl_first_round_and_feasibility():
    scenario = drift(0)
    trace = run_improved_ftrl(scenario, StepSizeRule.oracle_evar())
    np.testing.assert_array_equal(trace.x[0], np.zeros(5))
    assert np.all(scenario.feasible_set.contains(trace.x))
    assert np.all(scenario.feasible_set.contains(trace.z))


def test_improved_ftrl_is_deterministic():
    scenario = drift(1)
    first = run_improved_ftrl(scenario, StepSizeRule.oracle_evar())
    second = run_improved_ftrl(scenario, StepSizeRule.oracle_evar())
    assert np.array_equal(first.x, second.x)
    assert np.array_equal(first.z, second.z)


def test_improved_ftrl_oracle_eta_for_identical_quadratics():
    scenario = identical(CostFunction.quadratic(np.eye(2), [0.3, 0.0]), 50)
    trace = run_improved_ftrl(scenario, StepSizeRule.oracle_evar())
    np.testing.assert_array_equal(trace.etas, 1.0)


def test_improved_ftrl_oracle_eta_for_drift():
    scenario = drift(2, T=300)
    trace = run_improved_ftrl(scenario, StepSizeRule.oracle_evar())
    expected = min(1.0, scenario.L_bound / math.sqrt(evar_sequential(trace)))
    assert trace.etas[0] == pytest.approx(expected, rel=1e-12)


def test_improved_ftrl_rejects_eta_above_one():
    with pytest.raises(ContractViolation):
        run_improved_ftrl(drift(0, T=5), 1.5)


def test_improved_ftrl_step_satisfies_first_order_optimality(rng):
    scenario = drift(3, T=100)
    trace = run_improved_ftrl(scenario, StepSizeRule.fixed(0.8))
    stiffness = scenario.L_bound / 0.8
    Zp = trace.previous_searching_points
    previous = np.zeros_like(trace.x)
    previous[1:] = scenario.grads_at(trace.z)[:-1]
    for t in range(scenario.T):
        u = scenario.feasible_set.sample(rng, 100)
        residual = (u - trace.x[t]) @ (previous[t] + stiffness * (trace.x[t] - Zp[t]))
        assert residual.min() >= -1e-8


def test_trace_arrays_are_read_only():
    trace = run_improved_ftrl(drift(0, T=5), 0.5)
    with pytest.raises(ValueError):
        trace.x[0, 0] = 1.0


# --------------------------------------------------------------------------- prox methods

def test_prox_single_round_closed_form():
    f = np.array([0.4, -0.2])
    trace = run_prox(identical(CostFunction.linear(f), 1), 0.5)
    np.testing.assert_array_equal(trace.x[0], [0.0, 0.0])
    np.testing.assert_allclose(trace.z[0], project(FeasibleSet.unit_ball(2), -0.5 * f))


def test_prox_oracle_eta_is_halved():
    scenario = drift(4, T=100)
    ftrl = run_improved_ftrl(scenario, StepSizeRule.oracle_evar())
    prox = run_prox(scenario, StepSizeRule.oracle_evar())
    assert prox.etas[0] == pytest.approx(0.5 * ftrl.etas[0])
    assert prox.etas[0] <= 0.5


def test_general_prox_with_euclidean_map_is_prox():
    scenario = drift(5, T=150)
    prox = run_prox(scenario, StepSizeRule.fixed(0.4))
    general = run_general_prox(scenario, EuclideanMirrorMap(), StepSizeRule.fixed(0.4))
    assert np.array_equal(prox.x, general.x)
    assert np.array_equal(prox.z, general.z)

    prox = run_prox(scenario, StepSizeRule.oracle_evar())
    general = run_general_prox(scenario, EuclideanMirrorMap(), StepSizeRule.oracle_evar())
    assert general.etas[0] == pytest.approx(prox.etas[0], rel=1e-12)
    np.testing.assert_allclose(general.x, prox.x, atol=1e-9)


def test_general_prox_entropy_zero_costs_stay_uniform():
    scenario = build_scenario({"generator": "zero", "T": 20, "d": 4, "set": {"kind": "simplex"}})
    trace = run_general_prox(scenario, EntropyMirrorMap(), StepSizeRule.oracle_evar())
    np.testing.assert_allclose(trace.z, 0.25)
    np.testing.assert_allclose(trace.x, 0.25)


def test_general_prox_entropy_moves_away_from_costly_coordinate():
    scenario = identical(CostFunction.linear([1.0, 0.0]), 50, FeasibleSet.simplex(2))
    trace = run_general_prox(scenario, "entropy", StepSizeRule.oracle_evar())
    assert trace.etas[0] == pytest.approx(0.5)
    assert np.all(np.diff(trace.z[:, 0]) < 0)


@pytest.mark.parametrize("f, T", [([1.0, -1.0], 1000), ([1.0, 0.0], 2000)])
def test_general_prox_entropy_long_horizon_stays_positive(f, T):
    scenario = identical(CostFunction.linear(f), T, FeasibleSet.simplex(2))
    trace = run_general_prox(scenario, EntropyMirrorMap(), StepSizeRule.oracle_evar())
    assert trace.z.shape == (T, 2)
    assert np.all(trace.z > 0.0) and np.all(trace.x > 0.0)
    np.testing.assert_allclose(trace.z.sum(axis=1), 1.0)
    np.testing.assert_allclose(trace.x.sum(axis=1), 1.0)
    assert np.all(np.diff(trace.z[:, 0]) <= 0.0)
    assert trace.z[-1, 0] < 1e-300
    assert check_theorem_bound(trace, "thm3").satisfied


def test_general_prox_rejects_incompatible_map():
    with pytest.raises(ConfigurationError):
        run_general_prox(drift(0, T=5), EntropyMirrorMap(), 0.5)


# --------------------------------------------------------------------------- bandit

def test_bandit_parameters_hand_evaluation():
    delta, eta, alpha = bandit_parameters(1.0, 1.0, 1.0, 2, 10_000, 1.0)
    assert delta == pytest.approx(math.sqrt(8.0 / 4e4))
    assert delta == pytest.approx(0.01414, abs=1e-5)
    assert eta == pytest.approx(delta / 8.0)
    assert alpha == delta


def test_bandit_first_round_and_queries():
    scenario = build_scenario({"generator": "random_quadratics", "T": 30, "d": 3, "seed": 1})
    trace = run_bandit(scenario, 0.05, 0.01, 0.05, seed=11)
    np.testing.assert_array_equal(trace.x[0], np.zeros(3))
    assert trace.queries.shape == (30, 6, 3)
    assert np.all(scenario.feasible_set.contains(trace.queries))
    assert np.all(trace.working_set.contains(trace.x))
    np.testing.assert_allclose(trace.costs, 0.5 * (trace.query_values[:, 0] + trace.query_values[:, 1]))
    assert trace.extras["query_count"] == 30 * 6


def test_bandit_replay_is_deterministic():
    scenario = build_scenario({"generator": "random_linear", "T": 100, "d": 4, "seed": 3})
    first = run_bandit(scenario, 0.02, 0.01, 0.02, seed=5)
    second = run_bandit(scenario, 0.02, 0.01, 0.02, seed=5)
    other = run_bandit(scenario, 0.02, 0.01, 0.02, seed=6)
    assert np.array_equal(first.x, second.x)
    assert np.array_equal(first.extras["indices"], second.extras["indices"])
    assert not np.array_equal(first.extras["indices"], other.extras["indices"])


def test_bandit_seed_batch_matches_single_runs():
    scenario = build_scenario({"generator": "smooth_plus_drift", "T": 60, "d": 3, "seed": 8})
    batch = run_bandit_seeds(scenario, 0.03, 0.02, 0.03, [1, 2, 3])
    for trace in batch:
        single = run_bandit(scenario, 0.03, 0.02, 0.03, seed=trace.seed)
        assert np.array_equal(trace.extras["indices"], single.extras["indices"])
        np.testing.assert_allclose(trace.x, single.x, rtol=0, atol=1e-12)


def test_bandit_requires_alpha_equal_delta_over_r():
    scenario = build_scenario({"generator": "random_linear", "T": 10, "d": 2, "seed": 0})
    with pytest.raises(ContractViolation, match="alpha must equal delta/r"):
        run_bandit(scenario, 0.1, 0.01, 0.2, seed=0)


def test_bandit_requires_interior_origin():
    scenario = build_scenario({"generator": "random_linear", "T": 10, "d": 2, "set": {"kind": "simplex"}})
    with pytest.raises(ConfigurationError):
        run_bandit(scenario, 0.1, 0.01, 0.1, seed=0)


def test_bandit_on_box_uses_inner_radius():
    scenario = build_scenario({"generator": "random_linear", "T": 50, "d": 2,
                               "set": {"kind": "box", "lo": -0.5, "hi": 0.5}})
    trace = run_bandit(scenario, 0.05, 0.01, 0.1, seed=2)
    assert np.all(scenario.feasible_set.contains(trace.queries))


def test_bandit_stiffness_override():
    scenario = build_scenario({"generator": "random_linear", "T": 20, "d": 2, "seed": 0})
    trace = run_bandit(scenario, 0.05, 0.01, 0.05, seed=0, stiffness_constant=2.0)
    assert trace.extras["stiffness"] == pytest.approx(200.0)


# --------------------------------------------------------------------------- doubling

def test_adaptive_single_epoch_for_small_variation():
    scenario = identical(CostFunction.quadratic(np.eye(3), [0.4, 0.2, 0.0]), 200)
    trace = adaptive_eta("improved_ftrl", scenario)
    assert trace.epoch_starts == (1,)
    np.testing.assert_array_equal(trace.etas, 1.0)


def test_adaptive_restarts_are_logarithmic():
    scenario = identical(CostFunction.linear([10.0, 0.0]), 100)
    trace = adaptive_eta("improved_ftrl", scenario)
    assert len(trace.epoch_starts) - 1 <= math.ceil(math.log(100, 4))
    assert trace.epoch_starts == (1, 2, 3, 4, 5)
    np.testing.assert_allclose(trace.etas[4:], 1.0 / 16.0)


def test_doubling_rule_routes_to_adaptive():
    scenario = build_scenario({"generator": "random_quadratics", "T": 100, "d": 3, "seed": 2})
    via_rule = run_prox(scenario, StepSizeRule.doubling())
    direct = adaptive_eta("prox", scenario)
    assert np.array_equal(via_rule.x, direct.x)
    assert via_rule.epoch_starts == direct.epoch_starts


def test_adaptive_rejects_other_bases():
    with pytest.raises(ConfigurationError):
        adaptive_eta("bandit", drift(0, T=5))


def test_offline_best_point_lies_in_set():
    scenario = drift(6, T=50)
    best = offline_best(scenario)
    assert scenario.feasible_set.contains(best.point)
