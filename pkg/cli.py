import argparse
import itertools
import os
import shutil
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd
import yaml
from tqdm import tqdm

from algorithms import (ALGORITHMS, ADAPTIVE_BASES, StepSizeRule, adaptive_eta, bandit_parameters, run_bandit_seeds,
                        run_ftrl_linear, run_ftrl_on_gradients, run_general_prox, run_improved_ftrl, run_prox,
                        validate_bandit)
from costs import build_scenario, evar_cost_values, evar_terms, variation_report
from geometry import mirror_map_from_name
from harness import THEOREM_IDS, aggregate_seeds, cumulative_regret, offline_best, regret, run_checks
from util import (BLUE, GREEN, ORANGE, PINK, PURPLE, RESET, VERSION, WHITE, ConfigurationError, ContractViolation,
                  ConvergenceError, InexactVariationWarning, ResourceLimitError, defaults, dump_summary, format_point,
                  load_config, parse_point)

TRACE_COLUMNS = ["t", "eta", "x", "z", "cost", "cum_cost", "cum_regret", "evar_partial"]

# learners each check applies to; adaptive runs report their base learner
CHECK_ALGORITHMS = {
    "eq2": ("ftrl_linear",),
    "thm1": ("improved_ftrl",),
    "thm1-eta": ("improved_ftrl",),
    "lemma1": ("improved_ftrl",),
    "thm2": ("prox",),
    "thm2-eta": ("prox",),
    "thm3": ("general_prox",),
    "lemma2-step": ("prox", "general_prox"),
    "doubling": ("adaptive",),
    "thm4": ("bandit",),
    "bandit-bias": ("bandit",),
    "bandit-identity": ("bandit",),
    "eq4": ALGORITHMS,
}

EXACT_VARIATION_CHECKS = ("thm1", "thm2", "thm3")
TUNED_CHECKS = ("eq2", "thm1", "thm2", "thm3")

SWEEP_KEYS = ("T", "d", "variation", "seeds")
VARIATION_GENERATORS = ("smooth_plus_drift", "random_quadratics")


def progress_bar(iterable, total, label):
    bar_format = f"{WHITE}⌛  {label}... {{l_bar}}{BLUE}{{bar}}{WHITE}{{r_bar}}{RESET}"
    return tqdm(iterable, total=total, desc="", ncols=shutil.get_terminal_size((80, 20)).columns - 10,
                bar_format=bar_format)


@dataclass(frozen=True)
class AlgorithmSpec:
    id: str
    step_size: Optional[StepSizeRule] = None
    mirror_map: str = "euclidean"
    base: str = "improved_ftrl"
    bandit: dict = field(default_factory=dict)
    seeds: tuple = (0,)

    @classmethod
    def from_dict(cls, spec: dict):
        spec = dict(spec or {})
        unknown = set(spec) - {"id", "step_size", "mirror_map", "base", "bandit", "seeds"}
        if unknown:
            raise ConfigurationError(f"unknown algorithm keys: {sorted(unknown)}")
        algorithm_id = spec.get("id")
        if algorithm_id not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm '{algorithm_id}', expected one of {ALGORITHMS}")
        step_size = None
        if algorithm_id not in ("bandit", "adaptive"):
            default_mode = {"mode": "horizon"} if algorithm_id == "ftrl_on_gradients" else {"mode": "oracle_evar"}
            step_size = StepSizeRule.from_dict(spec.get("step_size") or default_mode)
            if step_size.mode == "doubling" and algorithm_id not in ADAPTIVE_BASES:
                raise ConfigurationError(f"doubling step sizes need one of {ADAPTIVE_BASES}, not {algorithm_id}")
        base = spec.get("base", "improved_ftrl")
        if algorithm_id == "adaptive" and base not in ADAPTIVE_BASES:
            raise ConfigurationError(f"adaptive base must be one of {ADAPTIVE_BASES}, got '{base}'")
        seeds = spec.get("seeds", [0])
        seeds = tuple(int(s) for s in (seeds if isinstance(seeds, (list, tuple)) else [seeds]))
        if not seeds:
            raise ConfigurationError("seeds must not be empty")
        return cls(algorithm_id, step_size, spec.get("mirror_map", "euclidean"), base,
                   dict(spec.get("bandit") or {}), seeds)

    @property
    def label(self) -> str:
        if self.id == "adaptive":
            return f"adaptive_{self.base}"
        if self.id == "general_prox":
            return f"general_prox_{self.mirror_map}"
        return self.id

    def with_seeds(self, seeds):
        return AlgorithmSpec(self.id, self.step_size, self.mirror_map, self.base, self.bandit, tuple(seeds))


def applies(check_id: str, spec: AlgorithmSpec) -> bool:
    """Whether a check covers the learner a spec runs; doubling step sizes count as adaptive."""
    learner = spec.id
    if spec.step_size is not None and spec.step_size.mode == "doubling":
        learner = "adaptive"
    return learner in CHECK_ALGORITHMS[check_id]


@dataclass
class ExperimentConfig:
    name: str
    scenario: dict
    algorithms: list
    checks: list
    sweep: Optional[dict]
    out_dir: str
    document: dict

    @classmethod
    def from_dict(cls, document: dict, out_dir: Optional[str] = None, seed: Optional[int] = None):
        """Validates an experiment document; every problem surfaces here, before any run."""
        if not isinstance(document, dict):
            raise ConfigurationError("experiment document must be a mapping")
        document = dict(document)
        unknown = set(document) - {"name", "scenario", "algorithm", "algorithms", "checks", "sweep"}
        if unknown:
            raise ConfigurationError(f"unknown experiment keys: {sorted(unknown)}")
        if "scenario" not in document:
            raise ConfigurationError("experiment needs a scenario")
        if ("algorithm" in document) == ("algorithms" in document):
            raise ConfigurationError("experiment needs exactly one of 'algorithm' or 'algorithms'")
        raw = document.get("algorithms") or [document.get("algorithm")]
        algorithms = [AlgorithmSpec.from_dict(a) for a in raw]
        if seed is not None:
            algorithms = [a.with_seeds([seed]) for a in algorithms]
            document = _with_seed(document, seed)
        checks = list(document.get("checks") or [])
        for check_id in checks:
            if check_id not in THEOREM_IDS:
                raise ConfigurationError(f"unknown check '{check_id}', expected one of {THEOREM_IDS}")
        out_dir = out_dir or defaults().get("out_dir", "results")
        os.makedirs(out_dir, exist_ok=True)
        if not os.access(out_dir, os.W_OK):
            raise ConfigurationError(f"output directory '{out_dir}' is not writable")
        config = cls(str(document.get("name", "experiment")), dict(document["scenario"]), algorithms, checks,
                     document.get("sweep"), out_dir, document)
        config.validate()
        return config

    def validate(self):
        scenario = build_scenario(self.scenario)
        single = len(self.algorithms) == 1
        for spec in self.algorithms:
            if spec.id == "general_prox":
                mirror_map_from_name(spec.mirror_map).check_compatible(scenario.feasible_set)
            if spec.id == "bandit":
                resolve_bandit(spec, scenario)
            if spec.id in ("improved_ftrl", "prox", "general_prox") and spec.step_size.mode == "oracle_evar" \
                    and not scenario.point_independent:
                raise ConfigurationError(f"{spec.id} with oracle_evar needs point-independent gradient "
                                         f"differences; use a fixed or doubling step size for this scenario")
            if spec.id == "ftrl_on_gradients" and spec.step_size.mode == "oracle_evar":
                raise ConfigurationError("ftrl_on_gradients has no variation-tuned step size")
            if spec.id == "ftrl_linear" and not scenario.is_linear:
                raise ConfigurationError("ftrl_linear needs a linear scenario")
            for check_id in self.checks:
                if not applies(check_id, spec) and single:
                    raise ConfigurationError(f"check '{check_id}' does not apply to {spec.label}")
                if check_id in TUNED_CHECKS and applies(check_id, spec) and spec.step_size.mode != "oracle_evar":
                    raise ConfigurationError(f"check '{check_id}' is claimed for the oracle_evar step size only")
                if check_id == "thm4" and spec.id == "bandit":
                    minimum = defaults().get("bandit_min_seeds", 100)
                    if len(spec.seeds) < minimum and self.sweep is None:
                        raise ConfigurationError(f"thm4 needs at least {minimum} bandit seeds, got {len(spec.seeds)}")
                    if not spec.bandit.get("theorem4"):
                        raise ConfigurationError("thm4 needs the tuned bandit parameters (bandit: {theorem4: true})")
        if self.sweep is not None:
            self._validate_sweep()

    def _validate_sweep(self):
        if not isinstance(self.sweep, dict):
            raise ConfigurationError("sweep must be a mapping of parameter lists")
        unknown = set(self.sweep) - set(SWEEP_KEYS)
        if unknown:
            raise ConfigurationError(f"unknown sweep keys: {sorted(unknown)}")
        for key, values in self.sweep.items():
            if not isinstance(values, list) or not values:
                raise ConfigurationError(f"sweep range '{key}' is empty")
        if "variation" in self.sweep and self.scenario.get("generator") not in VARIATION_GENERATORS:
            raise ConfigurationError(f"a variation sweep needs one of {VARIATION_GENERATORS}")
        if "thm4" in self.checks:
            raise ConfigurationError("thm4 needs a seed collection; run it with `run` and a seeds list")
        for T, d, variation in itertools.product(*(self.sweep.get(k, [None]) for k in ("T", "d", "variation"))):
            build_scenario(sweep_scenario(self.scenario, T, d, variation, None))

    def checks_for(self, spec: AlgorithmSpec):
        return [c for c in self.checks if applies(c, spec)]


def _with_seed(document, seed):
    document = dict(document)
    if "algorithm" in document:
        document["algorithm"] = {**document["algorithm"], "seeds": [seed]}
    else:
        document["algorithms"] = [{**a, "seeds": [seed]} for a in document["algorithms"]]
    return document


def sweep_scenario(scenario: dict, T, d, variation, seed) -> dict:
    scenario = dict(scenario)
    if T is not None:
        scenario["T"] = int(T)
    if d is not None:
        scenario["d"] = int(d)
    if variation is not None:
        scenario["params"] = {**(scenario.get("params") or {}), "variation": float(variation)}
    if seed is not None:
        scenario["seed"] = int(seed)
    return scenario


def resolve_bandit(spec: AlgorithmSpec, scenario):
    """(delta, eta, alpha, stiffness_constant) for a bandit spec, validated against the set."""
    params = dict(spec.bandit)
    unknown = set(params) - {"delta", "eta", "alpha", "theorem4", "stiffness_constant"}
    if unknown:
        raise ConfigurationError(f"unknown bandit keys: {sorted(unknown)}")
    r = scenario.feasible_set.inner_radius
    if r <= 0:
        raise ConfigurationError(f"bandit needs a set containing a ball around the origin, got "
                                 f"{scenario.feasible_set.kind}")
    if params.get("theorem4"):
        evar_cs, _ = evar_cost_values(scenario)
        delta, eta, alpha = bandit_parameters(scenario.G_bound, scenario.L_bound, r, scenario.dim, scenario.T,
                                              evar_cs)
    else:
        try:
            delta, eta, alpha = float(params["delta"]), float(params["eta"]), float(params["alpha"])
        except KeyError as e:
            raise ConfigurationError(f"bandit needs delta, eta and alpha (or theorem4: true), missing {e}")
    try:
        validate_bandit(scenario.feasible_set, delta, eta, alpha)
    except ContractViolation as e:
        raise ConfigurationError(str(e))
    return delta, eta, alpha, params.get("stiffness_constant")


def execute(spec: AlgorithmSpec, scenario, record_queries: bool = True):
    """Runs one algorithm spec; bandit specs return one trace per seed."""
    if spec.id == "ftrl_linear":
        return [run_ftrl_linear(scenario, spec.step_size)]
    if spec.id == "ftrl_on_gradients":
        return [run_ftrl_on_gradients(scenario, spec.step_size)]
    if spec.id == "improved_ftrl":
        return [run_improved_ftrl(scenario, spec.step_size)]
    if spec.id == "prox":
        return [run_prox(scenario, spec.step_size)]
    if spec.id == "general_prox":
        return [run_general_prox(scenario, spec.mirror_map, spec.step_size)]
    if spec.id == "adaptive":
        return [adaptive_eta(spec.base, scenario)]
    delta, eta, alpha, stiffness_constant = resolve_bandit(spec, scenario)
    return run_bandit_seeds(scenario, delta, eta, alpha, list(spec.seeds), stiffness_constant,
                            record_queries=record_queries and len(spec.seeds) == 1)


def trace_frame(trace, best) -> pd.DataFrame:
    """Per-round table of a trace, columns in TRACE_COLUMNS order."""
    return pd.DataFrame({
        "t": np.arange(1, trace.T + 1),
        "eta": trace.etas,
        "x": [format_point(p) for p in trace.x],
        "z": [format_point(p) for p in trace.z],
        "cost": trace.costs,
        "cum_cost": np.cumsum(trace.costs),
        "cum_regret": cumulative_regret(trace, best),
        "evar_partial": np.cumsum(evar_terms(trace)),
    }, columns=TRACE_COLUMNS)


def write_frame(frame: pd.DataFrame, path: str):
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")


def eta_summary(trace) -> dict:
    rule = trace.rule.describe() if trace.rule is not None else None
    values = [float(trace.etas[start - 1]) for start in trace.epoch_starts]
    return {"rule": rule, "values": values, "epoch_starts": list(trace.epoch_starts)}


class ExperimentRunner:
    def __init__(self, config: ExperimentConfig, jobs: int = 1, debug: bool = False):
        self.config = config
        self.jobs = max(1, int(jobs))
        self.debug = debug
        if self.debug:
            print(f"{ORANGE}⭕  DEBUG Mode Active{RESET}")
            print("Experiment:", self.config.name)
            print("Output directory:", self.config.out_dir)

    def output_path(self, suffix: str) -> str:
        return os.path.join(self.config.out_dir, f"{self.config.name}_{suffix}")

    def run_one(self, spec: AlgorithmSpec, scenario, best, prefix: str, index: int = 0):
        """Runs, writes trace table and summary, returns (summary document, traces)."""
        print(f"{WHITE}🚀  Running {spec.label} on {scenario.name} (T={scenario.T}, d={scenario.dim}){RESET}")
        traces = execute(spec, scenario)
        trace = traces[0]
        checks = run_checks(traces, self.config.checks_for(spec), best)
        trace_path = self.output_path(f"{prefix}trace.csv")
        write_frame(trace_frame(trace, best), trace_path)

        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", InexactVariationWarning)
            report = variation_report(trace, trace.mirror_map if spec.id == "general_prox" else None)
            if any(c in EXACT_VARIATION_CHECKS for c in self.config.checks_for(spec)) and not report.seq_var_exact:
                warnings.warn("sequential variation is a sampled estimate", InexactVariationWarning)
        for warning in caught:
            print(f"{PINK}⚠️  {warning.message}{RESET}")

        report_regret = regret(trace, best)
        summary = {
            "name": self.config.name,
            "version": VERSION,
            "config": self.config.document,
            "algorithm": spec.label,
            "algorithm_index": index,
            "scenario": scenario.describe(),
            "regret": {
                "cumulative_cost": report_regret.cumulative_cost,
                "best_fixed_cost": report_regret.best_fixed_cost,
                "regret": report_regret.regret,
                "best_point": [float(v) for v in report_regret.best_point],
                "certificate": report_regret.certificate,
            },
            "variation": report.to_dict(),
            "eta": eta_summary(trace),
            "checks": [c.to_dict() for c in checks],
            "outputs": {"trace": os.path.basename(trace_path)},
        }
        if spec.id == "bandit":
            seeds = aggregate_seeds(traces, best)
            summary["bandit"] = {
                "delta": trace.extras["delta"], "alpha": trace.extras["alpha"],
                "stiffness": trace.extras["stiffness"], "queries_per_round": scenario.dim + 3,
                "seeds": list(seeds.seeds), "mean_regret": seeds.mean, "stderr": seeds.stderr,
            }
            if len(traces) > 1:
                write_frame(pd.DataFrame({"seed": list(seeds.seeds), "regret": seeds.regrets}),
                            self.output_path(f"{prefix}seeds.csv"))
        summary["passed"] = all(c.satisfied for c in checks)
        dump_summary(summary, self.output_path(f"{prefix}summary.yaml"))
        self.report_checks(checks)
        if self.debug:
            print(f"{PURPLE}   regret = {report_regret.regret:.6g}, eta = {summary['eta']['values']}{RESET}")
        return summary, traces

    def report_checks(self, checks):
        for check in checks:
            colour, mark = (GREEN, "✅") if check.satisfied else (PINK, "❌")
            print(f"{colour}{mark}  {check.theorem_id}: {check.lhs:.6g} <= {check.rhs:.6g}{RESET}")

    def run(self) -> int:
        if len(self.config.algorithms) > 1:
            raise ConfigurationError("run takes a single algorithm; use compare for an algorithms list")
        scenario = build_scenario(self.config.scenario)
        best = offline_best(scenario)
        summary, _ = self.run_one(self.config.algorithms[0], scenario, best, "")
        return 0 if summary["passed"] else 1

    def compare(self) -> int:
        if len(self.config.algorithms) == 1:
            return self.run()
        scenario = build_scenario(self.config.scenario)
        best = offline_best(scenario)
        joined = pd.DataFrame({"t": np.arange(1, scenario.T + 1)})
        summaries = []
        labels = _unique_labels(self.config.algorithms)
        for index, (spec, label) in enumerate(zip(self.config.algorithms, labels)):
            summary, traces = self.run_one(spec, scenario, best, f"{label}_", index)
            joined[f"regret_{label}"] = cumulative_regret(traces[0], best)
            summaries.append({"algorithm": label, "regret": summary["regret"]["regret"],
                              "checks": summary["checks"], "passed": summary["passed"]})
        write_frame(joined, self.output_path("compare.csv"))
        passed = all(s["passed"] for s in summaries)
        dump_summary({"name": self.config.name, "version": VERSION, "config": self.config.document,
                      "scenario": scenario.describe(), "algorithms": summaries, "passed": passed},
                     self.output_path("compare_summary.yaml"))
        print(f"{GREEN}✅  Comparison table written to {self.output_path('compare.csv')}{RESET}")
        return 0 if passed else 1

    def sweep(self) -> int:
        if self.config.sweep is None:
            raise ConfigurationError("sweep needs a 'sweep' section")
        grid = [self.config.sweep.get(k, [None]) for k in SWEEP_KEYS]
        jobs = [(self.config.scenario, [a for a in self.config.algorithms], self.config.checks, T, d, v, s)
                for T, d, v, s in itertools.product(*grid)]
        if self.jobs > 1:
            with ProcessPoolExecutor(max_workers=self.jobs) as executor:
                results = list(progress_bar(executor.map(sweep_job, jobs), len(jobs), "Sweeping"))
        else:
            results = list(progress_bar(map(sweep_job, jobs), len(jobs), "Sweeping"))
        rows = pd.DataFrame([row for result in results for row in result])
        write_frame(rows, self.output_path("sweep.csv"))
        keys = ["T", "d", "variation", "algorithm"]
        aggregated = (rows.groupby(keys, sort=False, dropna=False)["regret"]
                      .agg(mean="mean", stderr="sem", runs="count").reset_index())
        aggregated["stderr"] = aggregated["stderr"].fillna(0.0)
        write_frame(aggregated, self.output_path("sweep_summary.csv"))
        passed = bool(rows["passed"].all())
        print(f"{GREEN if passed else PINK}{'✅' if passed else '❌'}  {len(rows)} sweep runs written to "
              f"{self.output_path('sweep.csv')}{RESET}")
        return 0 if passed else 1

    def stored_algorithm(self, summary_document: dict) -> AlgorithmSpec:
        """The algorithm a stored summary was written for, by its position in the experiment."""
        index = summary_document.get("algorithm_index", 0)
        if not isinstance(index, int) or not 0 <= index < len(self.config.algorithms):
            raise ConfigurationError(f"stored summary names algorithm {index!r}, "
                                     f"the experiment has {len(self.config.algorithms)}")
        spec = self.config.algorithms[index]
        if summary_document.get("algorithm", spec.label) != spec.label:
            raise ConfigurationError(f"stored summary is for {summary_document['algorithm']}, "
                                     f"experiment entry {index} is {spec.label}")
        return spec

    def check(self, summary_document: dict) -> int:
        """Rebuilds a stored run, compares it with the stored trace table and reruns its checks."""
        stored = pd.read_csv(os.path.join(self.config.out_dir, summary_document["outputs"]["trace"]),
                             dtype={"x": str, "z": str})
        scenario = build_scenario(self.config.scenario)
        best = offline_best(scenario)
        spec = self.stored_algorithm(summary_document)
        traces = execute(spec, scenario, record_queries=False)
        stored_x = np.stack([parse_point(p) for p in stored["x"]])
        if stored_x.shape != traces[0].x.shape or not np.array_equal(stored_x, traces[0].x):
            print(f"{PINK}❌  Stored trace does not match a rerun of its configuration{RESET}")
            return 1
        print(f"{GREEN}✅  Stored trace reproduced bit for bit{RESET}")
        check_ids = self.config.checks_for(spec)
        checks = run_checks(traces, check_ids, best) if check_ids else []
        self.report_checks(checks)
        return 0 if all(c.satisfied for c in checks) else 1


def _unique_labels(specs):
    labels = [s.label for s in specs]
    if len(set(labels)) == len(labels):
        return labels
    return [f"{label}{i}" for i, label in enumerate(labels)]


def sweep_job(job):
    """One sweep cell and seed: every algorithm once; rows in algorithm order."""
    scenario_spec, algorithms, checks, T, d, variation, seed = job
    rows = []
    for spec in algorithms:
        if spec.id == "bandit" and seed is not None:
            scenario = build_scenario(sweep_scenario(scenario_spec, T, d, variation, None))
            spec = spec.with_seeds([seed])
        else:
            scenario = build_scenario(sweep_scenario(scenario_spec, T, d, variation, seed))
        best = offline_best(scenario)
        trace = execute(spec, scenario, record_queries=False)[0]
        check_ids = [c for c in checks if applies(c, spec)]
        results = run_checks(trace, check_ids, best) if check_ids else []
        rows.append({"T": scenario.T, "d": scenario.dim, "variation": variation, "seed": seed,
                     "algorithm": spec.label, "regret": regret(trace, best).regret,
                     "cumulative_cost": trace.cumulative_cost, "evar_partial": float(np.sum(evar_terms(trace))),
                     "passed": all(c.satisfied for c in results)})
    return rows


def load_experiment(args):
    """Experiment document from --config, else --experiment, else the configured default."""
    if args.config:
        with open(args.config, "r", encoding="utf-8") as file:
            document = yaml.safe_load(file)
        if isinstance(document, dict) and "config" in document and "version" in document:
            return document["config"], document
        return document, None
    catalogue = load_config()
    experiments = catalogue.get("experiments", {})
    name = args.experiment or catalogue.get("default_experiment")
    if name not in experiments:
        raise ConfigurationError(f"unknown experiment '{name}', expected one of {sorted(experiments)}")
    return {"name": name, **experiments[name]}, None


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Run variation-bounded online learning experiments.")
    parser.add_argument("verb", choices=["run", "compare", "sweep", "check"], help="What to do.")
    parser.add_argument("--config", help="Experiment YAML (or, for check, a stored summary YAML).")
    parser.add_argument("--experiment", help="Named experiment from config.yaml.")
    parser.add_argument("--out", help="Output directory.")
    parser.add_argument("--seed", type=int, help="Override the run seed.")
    parser.add_argument("--jobs", type=int, default=1, help="Parallel sweep workers.")
    parser.add_argument("--debug", action="store_true", help="Additional print statements")
    args = parser.parse_args(argv)

    try:
        document, stored_summary = load_experiment(args)
        if args.verb == "check" and stored_summary is None:
            raise ConfigurationError("check needs --config pointing at a stored summary YAML")
        out_dir = args.out or (os.path.dirname(os.path.abspath(args.config)) if stored_summary else None)
        config = ExperimentConfig.from_dict(document, out_dir, args.seed)
        runner = ExperimentRunner(config, args.jobs, args.debug)
        if args.verb == "run":
            return runner.run()
        if args.verb == "compare":
            return runner.compare()
        if args.verb == "sweep":
            return runner.sweep()
        return runner.check(stored_summary)
    except (ConfigurationError, ContractViolation, ResourceLimitError, OSError) as e:
        print(f"{PINK}❌  {e}{RESET}")
        return 2
    except ConvergenceError as e:
        print(f"{PINK}❌  {e}; best point so far {format_point(e.best_point)}, residual {e.residual:.3g}{RESET}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
