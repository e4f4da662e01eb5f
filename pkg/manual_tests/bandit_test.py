from algorithms import bandit_parameters, run_bandit_seeds
from costs import build_scenario, evar_cost_values
from harness import aggregate_seeds, check_theorem_bound

scenario = build_scenario({"generator": "identical_linear", "T": 10000, "d": 2, "seed": 1})
evar_cs, exact = evar_cost_values(scenario)
delta, eta, alpha = bandit_parameters(scenario.G_bound, scenario.L_bound, 1.0, 2, scenario.T, evar_cs)
print("EVAR_cs:", evar_cs, "exact:", exact)
print("delta, eta, alpha:", delta, eta, alpha)

traces = run_bandit_seeds(scenario, delta, eta, alpha, list(range(200)), record_queries=False)
print(aggregate_seeds(traces).mean)
print(check_theorem_bound(traces, "thm4"))
