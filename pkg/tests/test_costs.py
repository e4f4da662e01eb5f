import numpy as np
import pytest

from algorithms import StepSizeRule, run_general_prox, run_improved_ftrl, run_prox
from costs import (CostFunction, Scenario, SCENARIO_GENERATORS, build_scenario, cost_value_terms, evar_a_priori,
                   evar_cost_values, evar_general_norm, evar_sequential, sequential_variation, total_variation,
                   var_decomposition)
from geometry import EntropyMirrorMap, EuclideanMirrorMap, FeasibleSet
from util import ConfigurationError, ContractViolation, ResourceLimitError, make_rng


def linear_scenario(vectors, feasible_set=None):
    vectors = np.asarray(vectors, dtype=float)
    feasible_set = feasible_set or FeasibleSet.unit_ball(vectors.shape[1])
    return Scenario.build([CostFunction.linear(f) for f in vectors], feasible_set)


def switching(T):
    return linear_scenario([[1.0, 0.0]] * (T // 2) + [[0.0, 1.0]] * (T - T // 2))


def test_cost_function_examples():
    linear = CostFunction.linear([1.0, 2.0])
    assert linear.value([1.0, 1.0]) == pytest.approx(3.0)
    np.testing.assert_allclose(linear.grad([1.0, 1.0]), [1.0, 2.0])

    quadratic = CostFunction.quadratic(np.eye(2), [0.0, 0.0])
    assert quadratic.value([0.6, 0.8]) == pytest.approx(0.5)
    np.testing.assert_allclose(quadratic.grad([0.6, 0.8]), [0.6, 0.8])

    drift = CostFunction.smooth_plus_drift(2 * np.eye(2), [1.0, 0.0])
    assert drift.value([0.5, 0.0]) == pytest.approx(0.75)
    np.testing.assert_allclose(drift.grad([0.5, 0.0]), [2.0, 0.0])


def test_gradient_matches_central_differences(rng):
    for cost in (CostFunction.quadratic([[2.0, 0.5], [0.5, 1.0]], [0.2, -0.1]),
                 CostFunction.smooth_plus_drift(2 * np.eye(2), [1.0, 0.0])):
        x = rng.normal(size=2) * 0.3
        h = 1e-6
        numeric = np.array([(cost.value(x + h * e) - cost.value(x - h * e)) / (2 * h) for e in np.eye(2)])
        np.testing.assert_allclose(cost.grad(x), numeric, atol=1e-6)


GRADIENT_FAMILIES = {
    "zero": CostFunction.zero(3),
    "linear": CostFunction.linear([0.4, -0.7, 0.2]),
    "quadratic": CostFunction.quadratic([[2.0, 0.5, 0.0], [0.5, 1.0, 0.3], [0.0, 0.3, 0.8]], [0.2, -0.1, 0.4]),
    "smooth_plus_drift": CostFunction.smooth_plus_drift(np.diag([1.5, 0.4, 0.9]), [1.0, 0.0, -0.5]),
}


@pytest.mark.parametrize("family", sorted(GRADIENT_FAMILIES))
def test_gradient_matches_central_differences_on_many_points(family, rng):
    cost = GRADIENT_FAMILIES[family]
    X = FeasibleSet.unit_ball(3).sample(rng, 100)
    h = 1e-6
    numeric = np.stack([(cost.value(X + h * e) - cost.value(X - h * e)) / (2 * h) for e in np.eye(3)], axis=1)
    np.testing.assert_allclose(cost.grad(X), numeric, atol=1e-6)


def power_iteration(Q, rng, steps=3000):
    v = rng.standard_normal(Q.shape[0])
    for _ in range(steps):
        v = Q @ v
        v /= np.linalg.norm(v)
    return float(v @ Q @ v)


def test_smoothness_constant_is_largest_eigenvalue(rng):
    scenario = build_scenario({"generator": "random_quadratics", "T": 10, "d": 4, "seed": 3})
    drift = build_scenario({"generator": "smooth_plus_drift", "T": 1, "d": 4, "seed": 3})
    for cost in scenario.costs + drift.costs:
        estimate = power_iteration(cost.Q, rng)
        assert estimate <= cost.L * (1.0 + 1e-12)
        assert estimate == pytest.approx(cost.L, rel=1e-3)


@pytest.mark.parametrize("family", sorted(GRADIENT_FAMILIES))
def test_sampled_smoothness_and_lipschitz_bounds(family, rng):
    cost = GRADIENT_FAMILIES[family]
    ball = FeasibleSet.unit_ball(3)
    X, Y = ball.sample(rng, 500), ball.sample(rng, 500)
    gap = np.linalg.norm(cost.grad(X) - cost.grad(Y), axis=1)
    assert np.all(gap <= cost.L * np.linalg.norm(X - Y, axis=1) * (1.0 + 1e-12) + 1e-12)
    assert np.all(np.linalg.norm(cost.grad(X), axis=1) <= cost.G * (1.0 + 1e-12) + 1e-12)


def test_batched_evaluation_matches_pointwise(rng):
    cost = CostFunction.quadratic([[2.0, 0.5], [0.5, 1.0]], [0.2, -0.1])
    points = rng.normal(size=(5, 2))
    np.testing.assert_allclose(cost.value(points), [cost.value(p) for p in points])
    np.testing.assert_allclose(cost.grad(points), [cost.grad(p) for p in points])


def test_constants():
    quadratic = CostFunction.quadratic(np.diag([3.0, 1.0]), [0.5, 0.0])
    assert quadratic.L == pytest.approx(3.0)
    assert quadratic.G == pytest.approx(4.5)
    assert CostFunction.linear([0.6, 0.8]).G == pytest.approx(1.0)


def test_quadratic_validation():
    with pytest.raises(ConfigurationError):
        CostFunction.quadratic([[1.0, 2.0], [0.0, 1.0]], [0.0, 0.0])
    with pytest.raises(ConfigurationError):
        CostFunction.quadratic(np.diag([1.0, -1.0]), [0.0, 0.0])


def test_value_dimension_mismatch():
    with pytest.raises(ContractViolation):
        CostFunction.linear([1.0, 2.0]).value([1.0, 2.0, 3.0])


def test_scenario_defaults_and_bounds():
    scenario = linear_scenario([[0.6, 0.8], [0.0, 0.5]])
    assert scenario.L_bound == 1.0
    assert scenario.G_bound == pytest.approx(1.0)
    assert scenario.point_independent
    with pytest.raises(ConfigurationError):
        Scenario.build([CostFunction.quadratic(2 * np.eye(2), [0.0, 0.0])], FeasibleSet.unit_ball(2), L_bound=1.0)
    with pytest.raises(ConfigurationError):
        Scenario.build([CostFunction.linear([1.0])], FeasibleSet.unit_ball(2))


def test_total_variation_examples():
    assert total_variation(linear_scenario([[0.3, 0.4]] * 10)) == pytest.approx(0.0)
    assert total_variation(switching(100)) == pytest.approx(50.0)
    assert total_variation(linear_scenario([[1.0, 0.0], [-1.0, 0.0]])) == pytest.approx(2.0)


def test_total_variation_needs_linear_costs():
    scenario = Scenario.build([CostFunction.quadratic(np.eye(2), [0.0, 0.0])], FeasibleSet.unit_ball(2))
    with pytest.raises(ConfigurationError):
        total_variation(scenario)


def test_sequential_variation_examples():
    assert sequential_variation(linear_scenario([[0.3, 0.4]] * 10)) == (0.0, True)
    value, exact = sequential_variation(switching(100))
    assert value == pytest.approx(2.0)
    assert exact
    assert sequential_variation(linear_scenario([[0.3, 0.4]])) == (0.0, True)


def test_sequential_variation_sampled_for_changing_curvature():
    scenario = Scenario.build([CostFunction.quadratic(np.eye(2), [0.0, 0.0]),
                               CostFunction.quadratic(2 * np.eye(2), [0.0, 0.0])], FeasibleSet.unit_ball(2))
    value, exact = sequential_variation(scenario)
    assert not exact
    assert 1.0 - 1e-3 <= value <= 1.0 + 1e-9


def test_variation_algebra_on_random_linear_sequences():
    for seed in range(100):
        rng = make_rng(seed)
        T = int(rng.integers(2, 201))
        scenario = build_scenario({"generator": "random_linear", "T": T, "d": 3, "seed": seed})
        seq_var, exact = sequential_variation(scenario)
        assert exact
        assert seq_var <= 4 * total_variation(scenario) + 1e-8


def test_total_variation_equals_pairwise_sum():
    for seed in range(20):
        T = 5 + 10 * seed
        scenario = build_scenario({"generator": "random_linear", "T": T, "d": 3, "seed": seed})
        F = scenario.bs
        pairwise = np.sum((F[:, None, :] - F[None, :, :]) ** 2) / (2 * T)
        assert total_variation(scenario) == pytest.approx(pairwise, rel=1e-10)


def test_sampled_sequential_variation_never_exceeds_closed_form(rng):
    # scaled-identity curvature changes: max over the unit ball of ‖sx + c‖² is (|s| + ‖c‖)²
    for _ in range(10):
        s1, s2 = rng.uniform(0.2, 2.0, size=2)
        a1, a2 = FeasibleSet.ball(3, 0.5).sample(rng, 2)
        scenario = Scenario.build([CostFunction.quadratic(s1 * np.eye(3), a1),
                                   CostFunction.quadratic(s2 * np.eye(3), a2)], FeasibleSet.unit_ball(3))
        value, exact = sequential_variation(scenario)
        closed = (abs(s2 - s1) + np.linalg.norm(s1 * a1 - s2 * a2)) ** 2
        assert not exact
        assert value <= closed * (1.0 + 1e-12)
        assert value >= closed * (1.0 - 1e-3)


@pytest.mark.parametrize("generator", ["random_linear", "smooth_plus_drift", "identical_quadratic",
                                       "switching_halves"])
def test_evar_bounded_by_first_gradient_and_sequential_variation(generator):
    scenario = build_scenario({"generator": generator, "T": 200, "d": 3, "seed": 5})
    seq_var, exact = sequential_variation(scenario)
    assert exact
    for trace in (run_improved_ftrl(scenario, 0.6), run_prox(scenario, 0.4)):
        first = np.sum(scenario.costs[0].grad(trace.z0) ** 2)
        assert evar_sequential(trace) <= (first + seq_var) * (1.0 + 1e-10) + 1e-12


def test_switching_halves_total_variation_linear_sequential_constant():
    for T in (50, 100, 200):
        ratio = total_variation(switching(2 * T)) / total_variation(switching(T))
        assert ratio == pytest.approx(2.0, abs=1e-6)
        assert sequential_variation(switching(T))[0] == pytest.approx(sequential_variation(switching(2 * T))[0])


def test_evar_sequential_examples():
    a = np.array([0.3, 0.0])
    scenario = Scenario.build([CostFunction.quadratic(np.eye(2), a)] * 20, FeasibleSet.unit_ball(2))
    trace = run_improved_ftrl(scenario, StepSizeRule.fixed(0.5))
    assert evar_sequential(trace) == pytest.approx(float(a @ a))

    single = linear_scenario([[0.6, 0.8]])
    assert evar_sequential(run_improved_ftrl(single, 1.0)) == pytest.approx(1.0)


def test_evar_sequential_for_drift_matches_a_priori_value():
    scenario = build_scenario({"generator": "smooth_plus_drift", "T": 300, "d": 4, "seed": 2})
    trace = run_improved_ftrl(scenario, StepSizeRule.fixed(0.7))
    f = scenario.bs
    expected = np.sum(scenario.costs[0].grad(trace.z0) ** 2) + np.sum(np.diff(f, axis=0) ** 2)
    assert evar_sequential(trace) == pytest.approx(expected, rel=1e-10)
    assert evar_a_priori(scenario, trace.z0) == pytest.approx(expected, rel=1e-10)


def test_evar_a_priori_needs_point_independence():
    scenario = build_scenario({"generator": "random_quadratics", "T": 10, "d": 2, "seed": 0})
    with pytest.raises(ConfigurationError):
        evar_a_priori(scenario, np.zeros(2))


def test_evar_general_norm_examples():
    simplex = FeasibleSet.simplex(2)
    entropy = EntropyMirrorMap()
    single = Scenario.build([CostFunction.linear([3.0, -4.0])], simplex)
    assert evar_general_norm(run_general_prox(single, entropy, 0.5), entropy) == pytest.approx(16.0)

    pair = Scenario.build([CostFunction.linear([1.0, 0.0]), CostFunction.linear([1.0, 1.0])], simplex)
    assert evar_general_norm(run_general_prox(pair, entropy, 0.5), entropy) == pytest.approx(2.0)


def test_evar_general_norm_euclidean_equals_sequential():
    scenario = build_scenario({"generator": "smooth_plus_drift", "T": 50, "d": 3, "seed": 4})
    trace = run_improved_ftrl(scenario, 0.5)
    assert evar_general_norm(trace, EuclideanMirrorMap()) == pytest.approx(evar_sequential(trace))


def test_evar_cost_values_examples():
    value, exact = evar_cost_values(linear_scenario([[1.0, 0.0], [0.0, 1.0]]))
    assert exact
    assert value == pytest.approx(1.0 + np.sqrt(2.0))

    pair = Scenario.build([CostFunction.quadratic(np.eye(2), [0.0, 0.0]),
                           CostFunction.quadratic(np.eye(2), [0.1, 0.0])], FeasibleSet.unit_ball(2))
    terms, exact = cost_value_terms(pair)
    assert terms[1] == pytest.approx(0.105)
    assert exact[1] and not exact[0]
    assert terms[0] == pytest.approx(0.5, abs=1e-6)


def test_evar_cost_values_identical_costs_keep_first_term():
    scenario = linear_scenario([[0.6, 0.0]] * 30)
    value, exact = evar_cost_values(scenario)
    assert exact
    assert value == pytest.approx(0.6)


def test_evar_cost_values_box_uses_support_function():
    box = FeasibleSet.box([-0.5, -0.5], [0.5, 0.5])
    scenario = linear_scenario([[1.0, 0.0], [1.0, 1.0]], box)
    value, exact = evar_cost_values(scenario)
    assert exact
    assert value == pytest.approx(0.5 + 0.5)


def test_var_decomposition_examples():
    scenario = Scenario.build([CostFunction.quadratic(np.eye(2), [0.2, 0.1])] * 10, FeasibleSet.unit_ball(2))
    trace = run_improved_ftrl(scenario, 1.0)
    decomposition = var_decomposition(trace)
    assert decomposition.var2 == pytest.approx(0.0)
    assert decomposition.var1 > 0.0

    pair = linear_scenario([[1.0, 0.0], [0.0, 1.0]])
    decomposition = var_decomposition(run_improved_ftrl(pair, 1.0))
    assert decomposition.var1 == pytest.approx(0.0)
    assert decomposition.var2 == pytest.approx(2.0)


def test_var_decomposition_refuses_long_traces():
    scenario = build_scenario({"generator": "zero", "T": 5001, "d": 2})
    trace = run_improved_ftrl(scenario, 1.0)
    with pytest.raises(ResourceLimitError):
        var_decomposition(trace)


def test_generators_are_seeded():
    for name in SCENARIO_GENERATORS:
        spec = {"generator": name, "T": 20, "d": 3, "seed": 5}
        first, second = build_scenario(spec), build_scenario(spec)
        assert np.array_equal(first.bs, second.bs)
        assert np.array_equal(first.Qs, second.Qs)
        assert first.T == 20 and first.dim == 3


def test_build_scenario_validation():
    with pytest.raises(ConfigurationError):
        build_scenario({"generator": "nope", "T": 10, "d": 2})
    with pytest.raises(ConfigurationError):
        build_scenario({"generator": "zero", "T": 0, "d": 2})
    with pytest.raises(ConfigurationError):
        build_scenario({"generator": "zero", "T": 5, "d": 2, "params": {"variation": 1.0}})
    with pytest.raises(ConfigurationError):
        build_scenario({"generator": "zero", "T": 5, "d": 2, "colour": "red"})
