from algorithms import StepSizeRule, run_improved_ftrl, run_prox
from costs import build_scenario
from harness import check_lemma1, check_theorem_bound, offline_best, regret

scenario = build_scenario({"generator": "smooth_plus_drift", "T": 2000, "d": 5, "seed": 3})
best = offline_best(scenario)
print(best)

trace = run_improved_ftrl(scenario, StepSizeRule.oracle_evar())
print(regret(trace, best))
print(check_theorem_bound(trace, "thm1", best))
print(check_lemma1(trace))

trace = run_prox(scenario, StepSizeRule.oracle_evar())
print(regret(trace, best))
print(check_theorem_bound(trace, "thm2", best))
