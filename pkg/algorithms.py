"""
The online learners: FTRL on linear costs, FTRL on gradients, improved FTRL,
the Euclidean and Bregman prox methods, the randomized multi-point bandit
learner and the doubling-trick wrapper.

Each learner takes a Scenario and returns an immutable RunTrace. Everything
except the bandit learner is deterministic; the bandit learner draws its
coordinate indices from a Philox generator seeded per run.
"""
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from costs import Scenario, evar_a_priori, total_variation
from geometry import (FeasibleSet, MirrorMap, EuclideanMirrorMap, bregman_prox_step, ftrl_solve,
                      linearized_step, mirror_map_from_name, project, shrink)
from util import ConfigurationError, ContractViolation, make_rng

ALGORITHMS = ("ftrl_linear", "ftrl_on_gradients", "improved_ftrl", "prox", "general_prox", "bandit", "adaptive")
STEP_SIZE_MODES = ("fixed", "oracle_evar", "horizon", "doubling")
ADAPTIVE_BASES = ("improved_ftrl", "prox")

# largest admissible η per learner; None means any positive value
ETA_UPPER = {
    "ftrl_linear": None,
    "ftrl_on_gradients": None,
    "improved_ftrl": 1.0,
    "prox": 1.0,
    "general_prox": 1.0,
    "bandit": None,
}

LINEAR_NORM_TOL = 1e-12


@dataclass(frozen=True)
class StepSizeRule:
    mode: str
    eta: Optional[float] = None
    scale: float = 1.0
    cap: float = 1.0

    def __post_init__(self):
        if self.mode not in STEP_SIZE_MODES:
            raise ConfigurationError(f"unknown step-size mode '{self.mode}', expected one of {STEP_SIZE_MODES}")
        if self.mode == "fixed" and (self.eta is None or not self.eta > 0):
            raise ContractViolation(f"fixed step size needs a positive eta, got {self.eta}")
        if self.mode == "horizon" and not (self.scale > 0 and self.cap > 0):
            raise ConfigurationError("horizon step size needs positive scale and cap")

    @classmethod
    def fixed(cls, eta: float):
        return cls("fixed", eta=float(eta))

    @classmethod
    def oracle_evar(cls):
        return cls("oracle_evar")

    @classmethod
    def horizon(cls, scale: float = 1.0, cap: float = 1.0):
        return cls("horizon", scale=float(scale), cap=float(cap))

    @classmethod
    def doubling(cls):
        return cls("doubling")

    @classmethod
    def from_dict(cls, spec):
        spec = dict(spec or {"mode": "oracle_evar"})
        mode = spec.pop("mode", "oracle_evar")
        unknown = set(spec) - {"eta", "scale", "cap"}
        if unknown:
            raise ConfigurationError(f"unknown step_size keys: {sorted(unknown)}")
        return cls(mode, **{key: float(value) for key, value in spec.items()})

    def describe(self) -> dict:
        if self.mode == "fixed":
            return {"mode": "fixed", "eta": self.eta}
        if self.mode == "horizon":
            return {"mode": "horizon", "scale": self.scale, "cap": self.cap}
        return {"mode": self.mode}

    def resolve(self, algorithm: str, scenario: Scenario, mirror_map: Optional[MirrorMap] = None) -> float:
        """The constant η this rule prescribes for one learner on one scenario."""
        if self.mode == "fixed":
            return self.eta
        if self.mode == "horizon":
            return min(self.cap, self.scale / math.sqrt(scenario.T))
        if self.mode == "oracle_evar":
            return oracle_eta(algorithm, scenario, mirror_map)
        raise ContractViolation("doubling step sizes change between epochs; run through adaptive_eta")


def oracle_eta(algorithm: str, scenario: Scenario, mirror_map: Optional[MirrorMap] = None) -> float:
    """
    Step sizes tuned with the exact variation of the scenario.

    FTRL on linear costs uses the total variation; improved FTRL and the prox
    methods use the extended sequential variation, which is only known before
    the run when consecutive gradient differences do not depend on the point.
    """
    if algorithm == "ftrl_linear":
        variation = total_variation(scenario)
        return min(2.0 / math.sqrt(variation), 1.0 / 6.0) if variation > 0 else 1.0 / 6.0
    L = scenario.L_bound
    if algorithm in ("improved_ftrl", "prox"):
        evar = evar_a_priori(scenario, project(scenario.feasible_set, np.zeros(scenario.dim)))
        eta = min(1.0, L / math.sqrt(evar)) if evar > 0 else 1.0
        return eta if algorithm == "improved_ftrl" else 0.5 * eta
    if algorithm == "general_prox":
        mirror_map = mirror_map or EuclideanMirrorMap()
        z0 = mirror_map.minimizer(scenario.feasible_set)
        evar = evar_a_priori(scenario, z0, mirror_map.dual_norm)
        R = mirror_map.radius(scenario.feasible_set)
        root_alpha = math.sqrt(mirror_map.alpha)
        return 0.5 * (min(root_alpha, L * R / math.sqrt(evar)) if evar > 0 else root_alpha)
    raise ConfigurationError(f"no variation-tuned step size is defined for '{algorithm}'")


def _check_eta(eta: float, algorithm: str):
    upper = ETA_UPPER[algorithm]
    if not eta > 0 or (upper is not None and eta > upper):
        bound = "(0, inf)" if upper is None else f"(0, {upper:g}]"
        raise ContractViolation(f"{algorithm} needs eta in {bound}, got {eta}")


@dataclass(eq=False)
class RunTrace:
    algorithm: str
    scenario: Scenario
    x: np.ndarray
    z: np.ndarray
    costs: np.ndarray
    etas: np.ndarray
    z0: np.ndarray
    working_set: FeasibleSet
    rule: Optional[StepSizeRule] = None
    seed: Optional[int] = None
    epoch_starts: tuple = (1,)
    queries: Optional[np.ndarray] = None
    query_values: Optional[np.ndarray] = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        T, d = self.scenario.T, self.scenario.dim
        if self.x.shape != (T, d) or self.z.shape != (T, d) or self.costs.shape != (T,) or self.etas.shape != (T,):
            raise AssertionError("trace records must cover rounds 1..T")
        if not (np.all(self.working_set.contains(self.x)) and np.all(self.working_set.contains(self.z))):
            raise AssertionError(f"{self.algorithm} left its working set")
        for array in (self.x, self.z, self.costs, self.etas):
            array.setflags(write=False)

    @property
    def T(self) -> int:
        return self.scenario.T

    @property
    def previous_searching_points(self) -> np.ndarray:
        """z_{t−1} for t = 1..T, with z₀ at every epoch start."""
        Z = np.vstack([self.z0[None, :], self.z[:-1]])
        Z[np.asarray(self.epoch_starts) - 1] = self.z0
        return Z

    @property
    def cumulative_cost(self) -> float:
        return float(np.sum(self.costs))

    @property
    def mirror_map(self) -> MirrorMap:
        return self.extras.get("mirror_map") or EuclideanMirrorMap()


def _origin(scenario: Scenario) -> np.ndarray:
    return project(scenario.feasible_set, np.zeros(scenario.dim))


def _finish(algorithm, scenario, X, Z, etas, z0, rule, **kwargs) -> RunTrace:
    X = np.asarray(X)
    return RunTrace(algorithm, scenario, X, np.asarray(Z), scenario.values_at(X), np.asarray(etas, dtype=float),
                    z0, kwargs.pop("working_set", scenario.feasible_set), rule, **kwargs)


def _eta_for(rule, algorithm, scenario, mirror_map=None) -> float:
    if isinstance(rule, StepSizeRule):
        return rule.resolve(algorithm, scenario, mirror_map)
    return float(rule)


def run_ftrl_linear(scenario: Scenario, eta) -> RunTrace:
    """
    Follow the regularized leader on linear costs f_tᵀx.

    Args:
        scenario (Scenario): Linear costs with ‖f_t‖ ≤ 1.
        eta (float or StepSizeRule): Regularization weight 1/(2η)‖x‖².

    Returns:
        RunTrace: x_t = Π(−η Σ_{τ<t} f_τ); z_t holds the next prediction.
    """
    if not scenario.is_linear:
        raise ConfigurationError("ftrl_linear needs linear costs")
    norms = np.linalg.norm(scenario.bs, axis=1)
    if np.any(norms > 1.0 + LINEAR_NORM_TOL):
        raise ConfigurationError(f"ftrl_linear needs ‖f_t‖ <= 1, largest is {norms.max():.6g}")
    rule = eta if isinstance(eta, StepSizeRule) else StepSizeRule.fixed(eta)
    eta = _eta_for(rule, "ftrl_linear", scenario)
    _check_eta(eta, "ftrl_linear")
    P = scenario.feasible_set
    sums = np.cumsum(scenario.bs, axis=0)
    Z = ftrl_solve(P, sums, 1.0 / eta)
    x1 = ftrl_solve(P, np.zeros(scenario.dim), 1.0 / eta)
    X = np.vstack([x1[None, :], Z[:-1]])
    return _finish("ftrl_linear", scenario, X, Z, np.full(scenario.T, eta), x1, rule)


def run_ftrl_on_gradients(scenario: Scenario, eta) -> RunTrace:
    """FTRL where each cost is replaced by its gradient at the played point."""
    rule = eta if isinstance(eta, StepSizeRule) else StepSizeRule.fixed(eta)
    eta = _eta_for(rule, "ftrl_on_gradients", scenario)
    _check_eta(eta, "ftrl_on_gradients")
    P = scenario.feasible_set
    x = ftrl_solve(P, np.zeros(scenario.dim), 1.0 / eta)
    x1 = x
    grad_sum = np.zeros(scenario.dim)
    X, Z = [], []
    for cost in scenario.costs:
        X.append(x)
        grad_sum = grad_sum + cost.grad(x)
        x = ftrl_solve(P, grad_sum, 1.0 / eta)
        Z.append(x)
    return _finish("ftrl_on_gradients", scenario, X, Z, np.full(scenario.T, eta), x1, rule)


def run_improved_ftrl(scenario: Scenario, rule) -> RunTrace:
    """
    FTRL on linearizations at the searching points, with a one-step lookahead.

    x_t = argmin ∇c_{t−1}(z_{t−1})ᵀx + (L/2η)‖x − z_{t−1}‖²
    z_t = argmin Σ_{τ≤t} ∇c_τ(z_{τ−1})ᵀx + (L/2η)‖x‖²
    """
    if isinstance(rule, StepSizeRule) and rule.mode == "doubling":
        return adaptive_eta("improved_ftrl", scenario)
    rule = rule if isinstance(rule, StepSizeRule) else StepSizeRule.fixed(rule)
    eta = _eta_for(rule, "improved_ftrl", scenario)
    _check_eta(eta, "improved_ftrl")
    P = scenario.feasible_set
    stiffness = scenario.L_bound / eta
    z0 = _origin(scenario)
    z, grad_prev = z0, np.zeros(scenario.dim)
    grad_sum = np.zeros(scenario.dim)
    X, Z = [], []
    for cost in scenario.costs:
        X.append(linearized_step(P, z, grad_prev, stiffness))
        grad_sum = grad_sum + cost.grad(z)
        z = ftrl_solve(P, grad_sum, stiffness)
        grad_prev = cost.grad(z)
        Z.append(z)
    return _finish("improved_ftrl", scenario, X, Z, np.full(scenario.T, eta), z0, rule)


def _prox_loop(scenario: Scenario, eta: float, z0: np.ndarray, step):
    stiffness = scenario.L_bound / eta
    z, grad_prev = z0, np.zeros(scenario.dim)
    X, Z = [], []
    for cost in scenario.costs:
        x = step(z, grad_prev, stiffness)
        z_next = step(z, cost.grad(x), stiffness)
        grad_prev = cost.grad(z_next)
        X.append(x)
        Z.append(z_next)
        z = z_next
    return X, Z


def run_prox(scenario: Scenario, rule) -> RunTrace:
    """
    Euclidean prox method.

    Both updates start from z_{t−1}: x_t steps along ∇c_{t−1}(z_{t−1}) and
    z_t along ∇c_t(x_t), each with stiffness L/η.
    """
    if isinstance(rule, StepSizeRule) and rule.mode == "doubling":
        return adaptive_eta("prox", scenario)
    rule = rule if isinstance(rule, StepSizeRule) else StepSizeRule.fixed(rule)
    eta = _eta_for(rule, "prox", scenario)
    _check_eta(eta, "prox")
    P = scenario.feasible_set
    z0 = _origin(scenario)
    X, Z = _prox_loop(scenario, eta, z0, lambda z, g, s: linearized_step(P, z, g, s))
    return _finish("prox", scenario, X, Z, np.full(scenario.T, eta), z0, rule)


def run_general_prox(scenario: Scenario, mirror_map, rule) -> RunTrace:
    """Prox method with Bregman steps D(x, z) of the given mirror map, started at argmin ω."""
    if isinstance(mirror_map, str):
        mirror_map = mirror_map_from_name(mirror_map)
    P = scenario.feasible_set
    mirror_map.check_compatible(P)
    rule = rule if isinstance(rule, StepSizeRule) else StepSizeRule.fixed(rule)
    if rule.mode == "doubling":
        raise ConfigurationError("doubling step sizes are available for improved_ftrl and prox only")
    eta = _eta_for(rule, "general_prox", scenario, mirror_map)
    _check_eta(eta, "general_prox")
    z0 = mirror_map.minimizer(P)
    X, Z = _prox_loop(scenario, eta, z0, lambda z, g, s: bregman_prox_step(P, mirror_map, z, g, s))
    return _finish("general_prox", scenario, X, Z, np.full(scenario.T, eta), z0, rule,
                   extras={"mirror_map": mirror_map, "radius": mirror_map.radius(P)})


# --------------------------------------------------------------------------- bandit

def bandit_parameters(G: float, L: float, r: float, d: int, T: int, evar_cs: float):
    """
    (δ, η, α) that make the multi-point bandit bound hold.

    δ = √(4d·max(G, √E) / ((dL + G(1 + 1/r))·T)), η = (δ/4d)·min(1, G/√E), α = δ/r.
    """
    if not (G > 0 and r > 0 and d >= 1 and T >= 1):
        raise ContractViolation("bandit parameters need G > 0, r > 0, d >= 1 and T >= 1")
    root = math.sqrt(evar_cs)
    delta = math.sqrt(4 * d * max(G, root) / ((d * L + G * (1.0 + 1.0 / r)) * T))
    eta = delta / (4 * d) * (min(1.0, G / root) if root > 0 else 1.0)
    return delta, eta, delta / r


def bandit_bound(G: float, L: float, r: float, d: int, T: int, evar_cs: float) -> float:
    """Expected smoothed-regret bound 4√(max(G, √E)·d·(dL + G(1 + 1/r))·T)."""
    return 4.0 * math.sqrt(max(G, math.sqrt(evar_cs)) * d * (d * L + G * (1.0 + 1.0 / r)) * T)


def validate_bandit(feasible_set: FeasibleSet, delta: float, eta: float, alpha: float) -> float:
    """Checks the query geometry and returns the inner radius r."""
    if not (delta > 0 and eta > 0):
        raise ContractViolation("bandit needs positive delta and eta")
    r = feasible_set.inner_radius
    if r <= 0:
        raise ConfigurationError(f"bandit needs a set containing a ball around the origin, got {feasible_set.kind}")
    if not 0 < alpha < 1:
        raise ContractViolation(f"bandit shrink factor must lie in (0, 1), got {alpha}")
    if abs(alpha - delta / r) > 1e-12 * max(1.0, alpha):
        raise ContractViolation(f"alpha must equal delta/r (alpha={alpha}, delta/r={delta / r})")
    return r


def run_bandit_seeds(scenario: Scenario, delta: float, eta: float, alpha: float, seeds: Sequence[int],
                     stiffness_constant: Optional[float] = None, record_queries: bool = True):
    """
    Runs the randomized multi-point bandit learner for several seeds at once.

    Seeds share nothing but the arithmetic: each has its own Philox stream
    and its own index sequence, identical to a single-seed run.

    Args:
        scenario (Scenario): Costs queried by value only.
        delta (float): Finite-difference step length.
        eta (float): Step size; the update stiffness is G/η.
        alpha (float): Shrink factor, must equal delta/r.
        seeds (list[int]): One trace per seed.
        stiffness_constant (float, optional): Replaces G in the stiffness.
        record_queries (bool): Keep all d+3 query points and values per round.

    Returns:
        list[RunTrace]: Traces in the order of `seeds`.
    """
    P = scenario.feasible_set
    validate_bandit(P, delta, eta, alpha)
    W = shrink(P, alpha)
    d, T, S = scenario.dim, scenario.T, len(seeds)
    if S == 0:
        raise ContractViolation("bandit needs at least one seed")
    constant = scenario.G_bound if stiffness_constant is None else float(stiffness_constant)
    if not constant > 0:
        raise ContractViolation("bandit stiffness constant must be positive")
    stiffness = constant / eta
    indices = np.stack([make_rng(seed).integers(d, size=T) for seed in seeds])
    shifts = delta * np.eye(d)

    z0 = project(W, np.zeros(d))
    z = np.tile(z0, (S, 1))
    g_prev = np.zeros((S, d))            # g_{t−1}(z_{t−1}), full d-point estimate
    shift_prev = np.zeros((S, d))        # c_{t−1}(z_{t−1} + δe_i) − c_{t−1}(z_{t−1}) per coordinate
    X = np.empty((S, T, d))
    Z = np.empty((S, T, d))
    smoothed = np.empty((S, T))
    played = np.empty((S, T))
    queries = np.empty((S, T, d + 3, d)) if record_queries else None
    values = np.empty((S, T, d + 3)) if record_queries else None
    rows = np.arange(S)

    for t, cost in enumerate(scenario.costs):
        i_t = indices[:, t]
        x = linearized_step(W, z, g_prev, stiffness)
        x_shift = x + shifts[i_t]
        c_x, c_x_shift = cost.value(x), cost.value(x_shift)
        g_hat = np.zeros((S, d))
        g_hat[rows, i_t] = d / delta * (c_x_shift - c_x)
        g_hat_prev = np.zeros((S, d))
        g_hat_prev[rows, i_t] = d / delta * shift_prev[rows, i_t]
        g_tilde = g_hat + g_prev - g_hat_prev
        z_next = linearized_step(W, z, g_tilde, stiffness)
        z_shifts = z_next[:, None, :] + shifts[None, :, :]
        c_z, c_z_shifts = cost.value(z_next), cost.value(z_shifts)

        points = np.concatenate([x[:, None], x_shift[:, None], z_next[:, None], z_shifts], axis=1)
        assert np.all(P.contains(points)), "bandit query left the feasible set"
        if record_queries:
            queries[:, t] = points
            values[:, t] = np.column_stack([c_x, c_x_shift, c_z, c_z_shifts])

        shift_prev = c_z_shifts - c_z[:, None]
        g_prev = shift_prev / delta
        X[:, t], Z[:, t] = x, z_next
        played[:, t] = c_x
        smoothed[:, t] = 0.5 * (c_x + c_x_shift)
        z = z_next

    rule = StepSizeRule.fixed(eta)
    traces = []
    for s, seed in enumerate(seeds):
        extras = {"delta": delta, "alpha": alpha, "stiffness": stiffness, "indices": indices[s],
                  "played_costs": played[s], "query_count": T * (d + 3)}
        traces.append(RunTrace("bandit", scenario, X[s], Z[s], smoothed[s], np.full(T, eta), z0, W, rule,
                               seed=seed, queries=None if queries is None else queries[s],
                               query_values=None if values is None else values[s], extras=extras))
    return traces


def run_bandit(scenario: Scenario, delta: float, eta: float, alpha: float, seed: int,
               stiffness_constant: Optional[float] = None) -> RunTrace:
    """Single-seed run of the multi-point bandit learner; costs record the smoothed loss."""
    return run_bandit_seeds(scenario, delta, eta, alpha, [seed], stiffness_constant)[0]


# --------------------------------------------------------------------------- doubling

def _doubling_eta(base: str, L: float, guess: float) -> float:
    eta = min(1.0, L / math.sqrt(guess))
    return eta if base == "improved_ftrl" else 0.5 * eta


def adaptive_eta(base: str, scenario: Scenario) -> RunTrace:
    """
    Doubling trick over the unknown extended sequential variation.

    Epoch k runs the base learner tuned for the guess V_k = L²·4ᵏ. When the
    epoch's running variation exceeds V_k the epoch closes after the current
    round, the searching point returns to z₀ and the previous cost counts as
    zero again.
    """
    if base not in ADAPTIVE_BASES:
        raise ConfigurationError(f"adaptive_eta base must be one of {ADAPTIVE_BASES}, got '{base}'")
    P = scenario.feasible_set
    L = scenario.L_bound
    z0 = _origin(scenario)
    guess = L * L
    epoch_starts = []
    restart = True
    X, Z, etas = [], [], []
    for t, cost in enumerate(scenario.costs, start=1):
        if restart:
            epoch_starts.append(t)
            eta = _doubling_eta(base, L, guess)
            stiffness = L / eta
            z, grad_prev = z0, np.zeros(scenario.dim)
            grad_sum = np.zeros(scenario.dim)
            epoch_evar = 0.0
            restart = False
        x = linearized_step(P, z, grad_prev, stiffness)
        grad_here = cost.grad(z)
        epoch_evar += float(np.sum((grad_here - grad_prev) ** 2))
        if base == "improved_ftrl":
            grad_sum = grad_sum + grad_here
            z = ftrl_solve(P, grad_sum, stiffness)
        else:
            z = linearized_step(P, z, cost.grad(x), stiffness)
        grad_prev = cost.grad(z)
        X.append(x)
        Z.append(z)
        etas.append(eta)
        if epoch_evar > guess:
            guess *= 4.0
            restart = True
    return _finish(base, scenario, X, Z, etas, z0, StepSizeRule.doubling(),
                   epoch_starts=tuple(epoch_starts), extras={"adaptive": True, "final_guess": guess})
