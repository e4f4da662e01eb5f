"""
Regret against the best fixed decision in hindsight, and numeric checks of
the regret inequalities the learners are supposed to satisfy.
"""
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from algorithms import RunTrace, bandit_bound, bandit_parameters
from costs import (Scenario, evar_cost_values, evar_general_norm, evar_sequential, searching_gradients,
                   total_variation, var_decomposition)
from geometry import FeasibleSet, MirrorMap, ftrl_solve, project
from util import (ContractViolation, ConvergenceError, NegativeRegretWarning, defaults, make_rng)

BOUND_RTOL = 1e-8
NEGATIVE_REGRET_TOL = 1e-6
IDENTITY_TOL = 1e-10

THEOREM_IDS = ("eq2", "thm1", "thm2", "thm3", "thm4", "thm1-eta", "thm2-eta", "eq4", "doubling",
               "lemma1", "lemma2-step", "bandit-bias", "bandit-identity")


class OfflineBest(NamedTuple):
    point: np.ndarray
    value: float
    certificate: float


@dataclass(frozen=True)
class RegretReport:
    cumulative_cost: float
    best_fixed_cost: float
    regret: float
    best_point: np.ndarray
    certificate: float


@dataclass(frozen=True)
class SeedSummary:
    mean: float
    stderr: float
    regrets: np.ndarray
    seeds: tuple


@dataclass(frozen=True)
class BoundCheck:
    theorem_id: str
    lhs: float
    rhs: float
    satisfied: bool
    margin: float
    detail: dict = field(default_factory=dict)

    @classmethod
    def evaluate(cls, theorem_id: str, lhs, rhs, detail: Optional[dict] = None):
        """
        Builds a check from scalars or from per-prefix arrays.

        With arrays the reported pair is the prefix with the smallest slack
        rhs + tol − lhs, and its 1-based index goes into the detail.
        """
        lhs = np.atleast_1d(np.asarray(lhs, dtype=float))
        rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
        lhs, rhs = np.broadcast_arrays(lhs, rhs)
        slack = rhs + BOUND_RTOL * np.maximum(1.0, np.abs(rhs)) - lhs
        worst = int(np.argmin(slack))
        detail = dict(detail or {})
        if lhs.size > 1:
            detail["worst_index"] = worst + 1
        return cls(theorem_id, float(lhs[worst]), float(rhs[worst]), bool(slack[worst] >= 0.0),
                   float(rhs[worst] - lhs[worst]), detail)

    def to_dict(self) -> dict:
        return {"theorem_id": self.theorem_id, "lhs": self.lhs, "rhs": self.rhs,
                "satisfied": self.satisfied, "margin": self.margin, **self.detail}


# --------------------------------------------------------------------------- regret

def offline_best(scenario: Scenario, max_iter: Optional[int] = None, tol: Optional[float] = None,
                 samples: Optional[int] = None, rng=None) -> OfflineBest:
    """
    Minimizes F(x) = Σ_t c_t(x) over the feasible set.

    Accelerated projected gradient with adaptive restart on F/T, step
    1/L_bound, stopped when the gradient mapping of F/T falls below `tol`.

    Args:
        scenario (Scenario): Smooth costs.
        max_iter (int, optional): Iteration cap, config default 100000.
        tol (float, optional): Gradient-mapping tolerance, config default 1e-9.
        samples (int, optional): Random feasible u for the certificate.
        rng (np.random.Generator, optional): Certificate sampler.

    Returns:
        OfflineBest: (x*, F(x*), certificate), the certificate being
        max_u ∇(F/T)(x*)ᵀ(x* − u) clipped at 0.
    """
    config = defaults()
    max_iter = max_iter or config.get("offline_max_iter", 100000)
    tol = tol or config.get("offline_tol", 1e-9)
    samples = samples or config.get("certificate_samples", 200)
    rng = rng if rng is not None else make_rng(config.get("check_seed", 0))
    P = scenario.feasible_set
    T = scenario.T
    L = scenario.L_bound

    def objective(x):
        return float(scenario.total_cost(x)) / T

    def gradient(x):
        return scenario.total_grad(x) / T

    x = project(P, np.zeros(scenario.dim))
    y, momentum = x, 1.0
    value = objective(x)
    residual = math.inf
    for _ in range(max_iter):
        residual = L * float(np.linalg.norm(x - P.project(x - gradient(x) / L)))
        if residual <= tol:
            break
        x_next = P.project(y - gradient(y) / L)
        value_next = objective(x_next)
        if value_next > value:
            # restart: plain projected step from the last monotone iterate
            momentum = 1.0
            x_next = P.project(x - gradient(x) / L)
            value_next = objective(x_next)
        momentum_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * momentum * momentum))
        y = x_next + (momentum - 1.0) / momentum_next * (x_next - x)
        x, value, momentum = x_next, value_next, momentum_next
    else:
        raise ConvergenceError(f"offline_best stopped at gradient mapping {residual:.3g} after {max_iter} iterations",
                               x, residual)
    u = P.sample(rng, samples)
    certificate = max(0.0, float(np.max((x - u) @ gradient(x))))
    return OfflineBest(x, float(scenario.total_cost(x)), certificate)


def cumulative_regret(trace: RunTrace, best: Optional[OfflineBest] = None) -> np.ndarray:
    """Σ_{τ≤t} (loss_τ − c_τ(x*)) for every prefix, x* the full-horizon best point."""
    best = best or offline_best(trace.scenario)
    comparator = trace.scenario.values_at(np.broadcast_to(best.point, trace.x.shape))
    return np.cumsum(trace.costs - comparator)


def regret(trace: RunTrace, best: Optional[OfflineBest] = None) -> RegretReport:
    """
    Incurred cost minus the cost of the best fixed point.

    Bandit traces carry the smoothed loss ½(c_t(x_t) + c_t(x_t + δe_i)) and
    are compared against the full set, so no sign is expected of them.
    """
    best = best or offline_best(trace.scenario)
    cumulative = trace.cumulative_cost
    report = RegretReport(cumulative, best.value, cumulative - best.value, best.point, best.certificate)
    if trace.algorithm != "bandit" and report.regret < -NEGATIVE_REGRET_TOL * max(1.0, abs(best.value)):
        warnings.warn(f"{trace.algorithm} regret {report.regret:.3g} is below the best fixed point",
                      NegativeRegretWarning)
    return report


def aggregate_seeds(traces: Sequence[RunTrace], best: Optional[OfflineBest] = None) -> SeedSummary:
    """Mean and standard error of regret over a seed collection on one scenario."""
    if not traces:
        raise ContractViolation("no traces to aggregate")
    best = best or offline_best(traces[0].scenario)
    regrets = np.array([t.cumulative_cost - best.value for t in traces])
    stderr = float(np.std(regrets, ddof=1) / math.sqrt(len(regrets))) if len(regrets) > 1 else 0.0
    return SeedSummary(float(np.mean(regrets)), stderr, regrets, tuple(t.seed for t in traces))


# --------------------------------------------------------------------------- lemma checks

def _constant_eta(trace: RunTrace) -> float:
    if len(trace.epoch_starts) > 1 or not np.all(trace.etas == trace.etas[0]):
        raise ContractViolation(f"{trace.algorithm} trace does not use a single constant step size")
    return float(trace.etas[0])


def check_lemma1(trace: RunTrace) -> BoundCheck:
    """
    Checks, at every prefix, that the improved-FTRL cost is at most

        min_x (L/2η)‖x‖² + Σ_τ [c_τ(z_{τ−1}) + (x − z_{τ−1})ᵀ∇c_τ(z_{τ−1})] + (η/2L)·EVAR.

    The min is an FTRL subproblem and is solved in closed form.
    """
    if trace.algorithm != "improved_ftrl":
        raise ContractViolation(f"lemma1 applies to improved_ftrl traces, got {trace.algorithm}")
    eta = _constant_eta(trace)
    scenario = trace.scenario
    L = scenario.L_bound
    stiffness = L / eta
    Zp = trace.previous_searching_points
    current, previous = searching_gradients(trace)
    sums = np.cumsum(current, axis=0)
    offsets = np.cumsum(scenario.values_at(Zp) - np.einsum("ti,ti->t", Zp, current))
    minimizers = ftrl_solve(scenario.feasible_set, sums, stiffness)
    minimum = 0.5 * stiffness * np.sum(minimizers ** 2, axis=1) + np.einsum("ti,ti->t", minimizers, sums) + offsets
    evar = np.cumsum(np.sum((current - previous) ** 2, axis=1))
    rhs = minimum + eta / (2.0 * L) * evar
    return BoundCheck.evaluate("lemma1", np.cumsum(trace.costs), rhs, {"eta": eta})


def check_prox_lemma(z, x, z_plus, xi, zeta, gamma, mirror_map: MirrorMap, u) -> BoundCheck:
    """
    One paired prox step against the comparison points u:

        γζᵀ(x − u) ≤ D(u, z) − D(u, z₊) + (γ²/α)‖ξ − ζ‖²_* − (α/2)(‖x − z‖² + ‖x − z₊‖²)

    Leading axes of all arguments broadcast, so whole traces check at once.
    """
    z, x, z_plus = (np.asarray(v, dtype=float) for v in (z, x, z_plus))
    xi, zeta, u = (np.asarray(v, dtype=float) for v in (xi, zeta, u))
    gamma = np.asarray(gamma, dtype=float)
    alpha = mirror_map.alpha
    lhs = gamma[..., None] * np.sum(zeta[..., None, :] * (x[..., None, :] - u), axis=-1)
    steady = ((gamma ** 2 / alpha) * mirror_map.dual_norm(xi - zeta) ** 2
              - 0.5 * alpha * (mirror_map.norm(x - z) ** 2 + mirror_map.norm(x - z_plus) ** 2))
    rhs = mirror_map.bregman(u, z[..., None, :]) - mirror_map.bregman(u, z_plus[..., None, :]) + steady[..., None]
    return BoundCheck.evaluate("lemma2-step", lhs.ravel(), rhs.ravel(), {"comparisons": int(lhs.size)})


def check_prox_trace(trace: RunTrace, samples: Optional[int] = None, rng=None) -> BoundCheck:
    """Applies check_prox_lemma to every step of a prox or general-prox trace."""
    if trace.algorithm not in ("prox", "general_prox"):
        raise ContractViolation(f"lemma2-step applies to prox traces, got {trace.algorithm}")
    config = defaults()
    samples = samples or config.get("prox_lemma_samples", 100)
    rng = rng if rng is not None else make_rng(config.get("check_seed", 0))
    scenario = trace.scenario
    Zp = trace.previous_searching_points
    _, previous = searching_gradients(trace)
    zeta = scenario.grads_at(trace.x)
    gamma = trace.etas / scenario.L_bound
    u = scenario.feasible_set.sample(rng, scenario.T * samples).reshape(scenario.T, samples, scenario.dim)
    u = np.concatenate([u, trace.x[:, None, :], trace.z[:, None, :]], axis=1)
    return check_prox_lemma(Zp, trace.x, trace.z, previous, zeta, gamma, trace.mirror_map, u)


# --------------------------------------------------------------------------- theorem checks

def _require_mode(trace: RunTrace, algorithms, mode: str, theorem_id: str):
    if trace.algorithm not in algorithms:
        raise ContractViolation(f"{theorem_id} covers {', '.join(algorithms)} traces, got {trace.algorithm}")
    if trace.rule is None or trace.rule.mode != mode:
        found = None if trace.rule is None else trace.rule.mode
        raise ContractViolation(f"{theorem_id} is claimed for the {mode} step size only, trace used {found}")


def _max_sq_distance(feasible_set: FeasibleSet, point) -> float:
    """max over the set of ‖u − point‖²."""
    point = np.asarray(point, dtype=float)
    if feasible_set.kind in ("unit_ball", "ball"):
        return (feasible_set.radius + float(np.linalg.norm(point))) ** 2
    if feasible_set.kind == "box":
        lo = np.asarray(feasible_set.lo) - point
        hi = np.asarray(feasible_set.hi) - point
        return float(np.sum(np.maximum(lo ** 2, hi ** 2)))
    return float(point @ point + 1.0 - 2.0 * np.min(point))


def eq2_rhs(variation: float) -> float:
    root = math.sqrt(variation)
    return 15.0 * root if root >= 12.0 else 150.0


def check_theorem_bound(trace, theorem_id: str, best: Optional[OfflineBest] = None) -> BoundCheck:
    """
    Compares measured regret with the bound claimed for the trace's learner.

    Args:
        trace (RunTrace or list[RunTrace]): One run, or a seed collection for thm4.
        theorem_id (str): eq2, thm1, thm2, thm3, thm4, thm1-eta, thm2-eta,
            eq4 or doubling.
        best (OfflineBest, optional): Precomputed comparator.

    Returns:
        BoundCheck: lhs is the measured quantity, rhs the bound evaluated
        with the realized variation.
    """
    if theorem_id == "thm4":
        return _check_bandit_bound(trace, best)
    if theorem_id == "eq4":
        decomposition = var_decomposition(trace)
        return BoundCheck.evaluate("eq4", decomposition.realized_total_var, decomposition.var1 + decomposition.var2,
                                   {"var1": decomposition.var1, "var2": decomposition.var2})
    scenario = trace.scenario
    L = scenario.L_bound
    measured = regret(trace, best).regret
    if theorem_id == "eq2":
        _require_mode(trace, ("ftrl_linear",), "oracle_evar", theorem_id)
        variation = total_variation(scenario)
        return BoundCheck.evaluate("eq2", measured, eq2_rhs(variation), {"total_var": variation})
    if theorem_id in ("thm1", "thm2"):
        algorithm = "improved_ftrl" if theorem_id == "thm1" else "prox"
        _require_mode(trace, (algorithm,), "oracle_evar", theorem_id)
        evar = evar_sequential(trace)
        factor = 1.0 if theorem_id == "thm1" else 2.0
        return BoundCheck.evaluate(theorem_id, measured, factor * max(L, math.sqrt(evar)), {"evar_seq": evar})
    if theorem_id == "thm3":
        _require_mode(trace, ("general_prox",), "oracle_evar", theorem_id)
        mirror_map = trace.mirror_map
        evar = evar_general_norm(trace, mirror_map)
        R = mirror_map.radius(scenario.feasible_set)
        rhs = 2.0 * R * max(L * R / math.sqrt(mirror_map.alpha), math.sqrt(evar))
        return BoundCheck.evaluate("thm3", measured, rhs, {"evar_general": evar, "radius": R})
    if theorem_id in ("thm1-eta", "thm2-eta"):
        algorithm = "improved_ftrl" if theorem_id == "thm1-eta" else "prox"
        if trace.algorithm != algorithm:
            raise ContractViolation(f"{theorem_id} covers {algorithm} traces, got {trace.algorithm}")
        eta = _constant_eta(trace)
        evar = evar_sequential(trace)
        if theorem_id == "thm1-eta":
            rhs = L * scenario.feasible_set.max_norm ** 2 / (2.0 * eta) + eta / (2.0 * L) * evar
        else:
            if eta > 0.5:
                raise ContractViolation(f"thm2-eta needs eta <= 1/2, got {eta}")
            rhs = L * _max_sq_distance(scenario.feasible_set, trace.z0) / (2.0 * eta) + 2.0 * eta / L * evar
        return BoundCheck.evaluate(theorem_id, measured, rhs, {"eta": eta, "evar_seq": evar})
    if theorem_id == "doubling":
        _require_mode(trace, ("improved_ftrl", "prox"), "doubling", theorem_id)
        evar = evar_sequential(trace)
        return BoundCheck.evaluate("doubling", measured, 4.0 * max(L, math.sqrt(evar)),
                                   {"evar_seq": evar, "epochs": len(trace.epoch_starts)})
    raise ContractViolation(f"unknown theorem id '{theorem_id}'")


def _check_bandit_bound(traces, best: Optional[OfflineBest]) -> BoundCheck:
    traces = [traces] if isinstance(traces, RunTrace) else list(traces)
    minimum = defaults().get("bandit_min_seeds", 100)
    if len(traces) < minimum:
        raise ContractViolation(f"thm4 compares an expectation and needs at least {minimum} seeds, got {len(traces)}")
    scenario = traces[0].scenario
    if any(t.algorithm != "bandit" or t.scenario is not scenario for t in traces):
        raise ContractViolation("thm4 needs bandit traces on one shared scenario")
    G, L = scenario.G_bound, scenario.L_bound
    r, d, T = scenario.feasible_set.inner_radius, scenario.dim, scenario.T
    evar_cs, exact = evar_cost_values(scenario)
    delta, eta, _ = bandit_parameters(G, L, r, d, T, evar_cs)
    first = traces[0]
    if not (math.isclose(first.extras["delta"], delta, rel_tol=1e-9)
            and math.isclose(float(first.etas[0]), eta, rel_tol=1e-9)
            and math.isclose(first.extras["stiffness"], G / eta, rel_tol=1e-9)):
        raise ContractViolation("thm4 is claimed for the tuned delta, eta and alpha only")
    summary = aggregate_seeds(traces, best)
    lhs = summary.mean - 2.0 * summary.stderr
    return BoundCheck.evaluate("thm4", lhs, bandit_bound(G, L, r, d, T, evar_cs),
                               {"mean": summary.mean, "stderr": summary.stderr, "seeds": len(traces),
                                "evar_cost": evar_cs, "evar_cost_exact": exact})


# --------------------------------------------------------------------------- bandit estimators

def _estimators(scenario: Scenario, X, delta: float):
    """
    Exact expectations of the one-coordinate estimator at X (T, d).

    Returns (mean over i of ĝ_t(x, e_i), g_t(x), ∇c_t(x)).
    """
    d = scenario.dim
    shifted = X[:, None, :] + delta * np.eye(d)[None, :, :]
    P = scenario.feasible_set
    if not np.all(P.contains(shifted)):
        raise ContractViolation("finite-difference point x + δe_i leaves the feasible set")
    differences = scenario.values_at(shifted) - scenario.values_at(X)[:, None]
    # ĝ(x, e_i) = (d/δ)(c(x + δe_i) − c(x))·e_i, one row per i
    one_point = (d / delta) * differences[:, :, None] * np.eye(d)[None, :, :]
    expected = one_point.mean(axis=1)
    full = differences / delta
    return expected, full, scenario.grads_at(X)


def check_bandit_estimator(scenario: Scenario, x, delta: float):
    """
    Bias bound and exact-expectation identity of the bandit gradient estimator.

    Args:
        scenario (Scenario): Every round's cost is queried at x.
        x (array-like): One point (d,) or one point per round (T, d).
        delta (float): Finite-difference step length; x + δe_i must be feasible.

    Returns:
        tuple[BoundCheck, BoundCheck]: bandit-bias (‖E ĝ − ∇c‖ ≤ dLδ/2) and
        bandit-identity (‖E ĝ − g‖ ≈ 0), worst over rounds.
    """
    X = np.broadcast_to(np.asarray(x, dtype=float), (scenario.T, scenario.dim))
    expected, full, exact = _estimators(scenario, X, delta)
    bias = np.linalg.norm(expected - exact, axis=1)
    mismatch = np.linalg.norm(expected - full, axis=1)
    scale = np.maximum(1.0, np.linalg.norm(full, axis=1))
    d, L = scenario.dim, scenario.L_bound
    return (BoundCheck.evaluate("bandit-bias", bias, d * L * delta / 2.0 + IDENTITY_TOL, {"delta": delta}),
            BoundCheck.evaluate("bandit-identity", mismatch, IDENTITY_TOL * scale))


def check_bandit_trace(trace: RunTrace):
    """
    Estimator checks along a bandit run: identity and bias at every x_t, and
    E_i[g̃_t(x_t)] = E_i[ĝ_t(x_t, e_i)] with the previous-round terms included.
    """
    if trace.algorithm != "bandit":
        raise ContractViolation(f"bandit checks need a bandit trace, got {trace.algorithm}")
    scenario = trace.scenario
    delta = trace.extras["delta"]
    bias_check, identity_check = check_bandit_estimator(scenario, trace.x, delta)
    expected_now, _, _ = _estimators(scenario, trace.x, delta)
    Zp = trace.previous_searching_points
    expected_prev = np.zeros_like(expected_now)
    full_prev = np.zeros_like(expected_now)
    if trace.T > 1:
        previous = Scenario(scenario.costs[:-1], scenario.feasible_set, scenario.L_bound, scenario.G_bound,
                            scenario.name)
        expected_prev[1:], full_prev[1:], _ = _estimators(previous, Zp[1:], delta)
    tilde = expected_now + full_prev - expected_prev
    mismatch = np.linalg.norm(tilde - expected_now, axis=1)
    scale = np.maximum(1.0, np.linalg.norm(full_prev, axis=1))
    tilde_check = BoundCheck.evaluate("bandit-identity", mismatch, IDENTITY_TOL * scale)
    worse = min((identity_check, tilde_check), key=lambda c: c.rhs + BOUND_RTOL * max(1.0, abs(c.rhs)) - c.lhs)
    return bias_check, worse


# --------------------------------------------------------------------------- dispatch

def run_checks(traces, check_ids: Sequence[str], best: Optional[OfflineBest] = None):
    """
    Runs the named checks on a trace (or a bandit seed collection).

    Returns:
        list[BoundCheck]: In the order requested.
    """
    traces = [traces] if isinstance(traces, RunTrace) else list(traces)
    first = traces[0]
    best = best or offline_best(first.scenario)
    checks = []
    for check_id in check_ids:
        if check_id == "lemma1":
            checks.append(check_lemma1(first))
        elif check_id == "lemma2-step":
            checks.append(check_prox_trace(first))
        elif check_id in ("bandit-bias", "bandit-identity"):
            bias_check, identity_check = check_bandit_trace(first)
            checks.append(bias_check if check_id == "bandit-bias" else identity_check)
        elif check_id == "thm4":
            checks.append(check_theorem_bound(traces, "thm4", best))
        elif check_id in THEOREM_IDS:
            checks.append(check_theorem_bound(first, check_id, best))
        else:
            raise ContractViolation(f"unknown check '{check_id}', expected one of {THEOREM_IDS}")
    return checks
