"""
Cost-function families, scenarios, and the variation quantities used to
state and verify regret bounds.

Every family is stored in the canonical form c(x) = ½xᵀQx + bᵀx + k. Two
consecutive costs with the same Q differ by an affine function, which makes
their gradient differences point-independent and every max-over-P variation
term exactly computable through the set's support function.
"""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from geometry import FeasibleSet, as_point
from util import ConfigurationError, ResourceLimitError, defaults, make_rng

FAMILIES = ("zero", "linear", "quadratic", "smooth_plus_drift")

VAR_DECOMPOSITION_LIMIT = 5000


def _check_psd(Q: np.ndarray) -> float:
    """Validates a symmetric PSD matrix and returns its largest eigenvalue."""
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ConfigurationError(f"Q must be square, got shape {Q.shape}")
    scale = max(1.0, float(np.max(np.abs(Q))))
    if not np.allclose(Q, Q.T, rtol=0.0, atol=1e-12 * scale):
        raise ConfigurationError("Q must be symmetric")
    eigenvalues = np.linalg.eigvalsh(Q)
    if eigenvalues[0] < -1e-10 * scale:
        raise ConfigurationError(f"Q must be positive semidefinite (smallest eigenvalue {eigenvalues[0]:.3g})")
    return max(float(eigenvalues[-1]), 0.0)


@dataclass(frozen=True, eq=False)
class CostFunction:
    family: str
    Q: np.ndarray
    b: np.ndarray
    k: float
    L: float
    G: float
    params: dict = field(default_factory=dict)

    @classmethod
    def zero(cls, dim: int):
        return cls("zero", np.zeros((dim, dim)), np.zeros(dim), 0.0, 0.0, 0.0)

    @classmethod
    def linear(cls, f):
        f = np.array(f, dtype=float)
        dim = f.shape[0]
        return cls("linear", np.zeros((dim, dim)), f, 0.0, 0.0, float(np.linalg.norm(f)), {"f": f})

    @classmethod
    def quadratic(cls, Q, a):
        """c(x) = ½(x − a)ᵀQ(x − a)."""
        Q = np.array(Q, dtype=float)
        a = np.array(a, dtype=float)
        L = _check_psd(Q)
        G = L * (1.0 + float(np.linalg.norm(a)))
        return cls("quadratic", Q, -Q @ a, 0.5 * float(a @ Q @ a), L, G, {"Q": Q, "a": a})

    @classmethod
    def smooth_plus_drift(cls, Q, f):
        """c(x) = ½xᵀQx + fᵀx."""
        Q = np.array(Q, dtype=float)
        f = np.array(f, dtype=float)
        L = _check_psd(Q)
        return cls("smooth_plus_drift", Q, f, 0.0, L, L + float(np.linalg.norm(f)), {"Q": Q, "f": f})

    @property
    def dim(self) -> int:
        return self.b.shape[0]

    def value(self, x):
        x = as_point(x, self.dim)
        result = 0.5 * np.einsum("...i,ij,...j->...", x, self.Q, x) + x @ self.b + self.k
        return float(result) if np.ndim(result) == 0 else result

    def grad(self, x):
        x = as_point(x, self.dim)
        return x @ self.Q.T + self.b

    def describe(self) -> dict:
        return {"family": self.family, **{key: np.asarray(v).tolist() for key, v in self.params.items()}}


@dataclass(frozen=True, eq=False)
class Scenario:
    costs: tuple
    feasible_set: FeasibleSet
    L_bound: float
    G_bound: float
    name: str = "scenario"
    spec: Optional[dict] = None

    def __post_init__(self):
        if len(self.costs) < 1:
            raise ConfigurationError("a scenario needs at least one cost function")
        if any(c.dim != self.feasible_set.dim for c in self.costs):
            raise ConfigurationError("every cost function must share the dimension of the feasible set")
        if not self.L_bound > 0 or not self.G_bound > 0:
            raise ConfigurationError("L_bound and G_bound must be positive")
        max_L = max(c.L for c in self.costs)
        max_G = max(c.G for c in self.costs)
        if self.L_bound < max_L * (1.0 - 1e-12):
            raise ConfigurationError(f"L_bound {self.L_bound} is below the largest smoothness constant {max_L}")
        if self.G_bound < max_G * (1.0 - 1e-12):
            raise ConfigurationError(f"G_bound {self.G_bound} is below the largest Lipschitz constant {max_G}")

    @classmethod
    def build(cls, costs: Sequence[CostFunction], feasible_set: FeasibleSet, L_bound=None, G_bound=None,
              name: str = "scenario", spec: Optional[dict] = None):
        costs = tuple(costs)
        if L_bound is None:
            L_bound = max(c.L for c in costs) or 1.0
        if G_bound is None:
            G_bound = max(c.G for c in costs) or 1.0
        return cls(costs, feasible_set, float(L_bound), float(G_bound), name, spec)

    @property
    def T(self) -> int:
        return len(self.costs)

    @property
    def dim(self) -> int:
        return self.feasible_set.dim

    @cached_property
    def Qs(self) -> np.ndarray:
        return np.stack([c.Q for c in self.costs])

    @cached_property
    def bs(self) -> np.ndarray:
        return np.stack([c.b for c in self.costs])

    @cached_property
    def ks(self) -> np.ndarray:
        return np.array([c.k for c in self.costs])

    @cached_property
    def is_linear(self) -> bool:
        return all(c.family in ("linear", "zero") for c in self.costs)

    @cached_property
    def point_independent(self) -> bool:
        """True when every consecutive gradient difference is a constant vector."""
        return bool(np.all(self.Qs[1:] == self.Qs[:-1]))

    def values_at(self, X) -> np.ndarray:
        """c_t at the points X[t] of round t; X has shape (T, d) or (T, n, d)."""
        X = np.asarray(X, dtype=float)
        extra = (1,) * (X.ndim - 2)
        return (0.5 * np.einsum("t...i,tij,t...j->t...", X, self.Qs, X) + np.einsum("t...i,ti->t...", X, self.bs)
                + self.ks.reshape((-1,) + extra))

    def grads_at(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        extra = (1,) * (X.ndim - 2)
        return np.einsum("tij,t...j->t...i", self.Qs, X) + self.bs.reshape((self.T,) + extra + (self.dim,))

    @cached_property
    def totals(self):
        """(ΣQ_t, Σb_t, Σk_t), the aggregated quadratic form of Σ_t c_t."""
        return self.Qs.sum(axis=0), self.bs.sum(axis=0), float(self.ks.sum())

    def total_cost(self, x):
        """Σ_t c_t(x) through the aggregated quadratic form."""
        x = np.asarray(x, dtype=float)
        Q, b, k = self.totals
        return 0.5 * np.einsum("...i,ij,...j->...", x, Q, x) + x @ b + k

    def total_grad(self, x):
        x = np.asarray(x, dtype=float)
        Q, b, _ = self.totals
        return x @ Q.T + b

    def describe(self) -> dict:
        if self.spec is not None:
            return dict(self.spec)
        return {"name": self.name, "T": self.T, "d": self.dim, "set": self.feasible_set.describe()}


# --------------------------------------------------------------------------- generators

def _uniform_in_ball(rng, n, dim, radius=1.0):
    return FeasibleSet.ball(dim, radius).sample(rng, n) if radius <= 1.0 else \
        radius * FeasibleSet.unit_ball(dim).sample(rng, n)


def _random_spd(rng, dim, curvature):
    low, high = curvature
    basis, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    spectrum = rng.uniform(low, high, size=dim)
    spectrum[np.argmax(spectrum)] = high
    Q = (basis * spectrum) @ basis.T
    return 0.5 * (Q + Q.T)


def zero_costs(d, T, rng):
    cost = CostFunction.zero(d)
    return [cost] * T


def identical_linear(d, T, rng, norm=1.0):
    direction = rng.standard_normal(d)
    cost = CostFunction.linear(norm * direction / np.linalg.norm(direction))
    return [cost] * T


def identical_quadratic(d, T, rng, radius=0.5, curvature=1.0):
    a = _uniform_in_ball(rng, 1, d, radius)[0]
    cost = CostFunction.quadratic(curvature * np.eye(d), a)
    return [cost] * T


def switching_halves(d, T, rng, f=None, g=None):
    if f is None:
        f = np.eye(d)[0] if d > 1 else np.ones(1)
    if g is None:
        g = np.eye(d)[1] if d > 1 else -np.ones(1)
    first, second = CostFunction.linear(f), CostFunction.linear(g)
    return [first] * (T // 2) + [second] * (T - T // 2)


def random_linear(d, T, rng):
    return [CostFunction.linear(f) for f in _uniform_in_ball(rng, T, d)]


def smooth_plus_drift(d, T, rng, variation=0.05, curvature=(0.2, 1.0)):
    Q = _random_spd(rng, d, tuple(curvature))
    drift = variation * _uniform_in_ball(rng, T, d)
    drift[0] = _uniform_in_ball(rng, 1, d, 0.5)[0]
    return [CostFunction.smooth_plus_drift(Q, f) for f in np.cumsum(drift, axis=0)]


def random_quadratics(d, T, rng, variation=0.1, curvature=(0.2, 1.0)):
    centre_set = FeasibleSet.ball(d, 0.5)
    centre = centre_set.sample(rng, 1)[0]
    costs = []
    for _ in range(T):
        costs.append(CostFunction.quadratic(_random_spd(rng, d, tuple(curvature)), centre))
        centre = centre_set.project(centre + variation * _uniform_in_ball(rng, 1, d)[0])
    return costs


SCENARIO_GENERATORS = {
    "zero": zero_costs,
    "identical_linear": identical_linear,
    "identical_quadratic": identical_quadratic,
    "switching_halves": switching_halves,
    "random_linear": random_linear,
    "smooth_plus_drift": smooth_plus_drift,
    "random_quadratics": random_quadratics,
}


def build_scenario(spec: dict) -> Scenario:
    """
    Builds a scenario from its experiment-document form.

    Args:
        spec (dict): Keys generator, T, d, set, seed, params and optionally
            name, L_bound, G_bound.

    Returns:
        Scenario: Immutable scenario carrying `spec` for config echoes.
    """
    spec = dict(spec)
    generator_name = spec.get("generator")
    if generator_name not in SCENARIO_GENERATORS:
        raise ConfigurationError(f"unknown scenario generator '{generator_name}', "
                                 f"expected one of {sorted(SCENARIO_GENERATORS)}")
    T = int(spec.get("T", 0))
    d = int(spec.get("d", 0))
    if T < 1 or d < 1:
        raise ConfigurationError("scenario needs T >= 1 and d >= 1")
    unknown = set(spec) - {"generator", "T", "d", "set", "seed", "params", "name", "L_bound", "G_bound"}
    if unknown:
        raise ConfigurationError(f"unknown scenario keys: {sorted(unknown)}")
    feasible_set = FeasibleSet.from_dict(spec.get("set", {"kind": "unit_ball"}), d)
    rng = make_rng(spec.get("seed", 0))
    try:
        costs = SCENARIO_GENERATORS[generator_name](d, T, rng, **(spec.get("params") or {}))
    except TypeError as e:
        raise ConfigurationError(f"bad parameters for generator '{generator_name}': {e}")
    return Scenario.build(costs, feasible_set, spec.get("L_bound"), spec.get("G_bound"),
                          name=spec.get("name", generator_name), spec=spec)


# --------------------------------------------------------------------------- variations

def total_variation(costs) -> float:
    """Σ_t ‖f_t − μ‖² over linear cost vectors."""
    if isinstance(costs, Scenario):
        costs = costs.costs
    if any(c.family not in ("linear", "zero") for c in costs):
        raise ConfigurationError("total variation is defined for linear cost sequences only")
    F = np.stack([c.b for c in costs])
    return float(np.sum((F - F.mean(axis=0)) ** 2))


def _ascent_max(feasible_set, objective, gradient, steps, rng, samples, restarts, step_sizes):
    """
    Lower-bound estimate of max over the set of a batch of objectives.

    objective/gradient act on points of shape (P, n, d) and return (P, n) /
    (P, n, d). Sampled points seed `restarts` projected-gradient-ascent runs
    per objective; the best value seen is returned for each of the P
    objectives.
    """
    points = feasible_set.sample(rng, samples)
    batch = np.broadcast_to(points, (step_sizes.shape[0],) + points.shape)
    values = objective(batch)
    best = values.max(axis=1)
    top = np.argsort(values, axis=1)[:, -restarts:]
    x = np.take_along_axis(batch, top[..., None], axis=1)
    for _ in range(steps):
        x = feasible_set.project(x + step_sizes[:, None, None] * gradient(x))
        best = np.maximum(best, objective(x).max(axis=1))
    return best


def _consecutive_pairs(scenario: Scenario, with_origin: bool):
    """(ΔQ, Δb, Δk) between consecutive costs, starting at c₀ ≡ 0 when with_origin."""
    Qs, bs, ks = scenario.Qs, scenario.bs, scenario.ks
    if with_origin:
        zeros = np.zeros((1,) + Qs.shape[1:])
        Qs = np.concatenate([zeros, Qs])
        bs = np.concatenate([np.zeros((1, scenario.dim)), bs])
        ks = np.concatenate([[0.0], ks])
    return Qs[1:] - Qs[:-1], bs[1:] - bs[:-1], ks[1:] - ks[:-1]


def sequential_variation(scenario: Scenario, samples: Optional[int] = None, rng=None):
    """
    Σ_t max_{x∈P} ‖∇c_{t+1}(x) − ∇c_t(x)‖².

    Returns:
        tuple: (value, exact). Pairs with equal curvature are exact; other
        pairs contribute a sampled-plus-ascent lower bound and clear the flag.
    """
    if scenario.T < 2:
        return 0.0, True
    config = defaults()
    samples = samples or config.get("variation_samples", 256)
    rng = rng if rng is not None else make_rng(config.get("check_seed", 0))
    dQ, db, _ = _consecutive_pairs(scenario, with_origin=False)
    curved = np.any(dQ != 0.0, axis=(1, 2))
    terms = np.sum(db * db, axis=1)
    if np.any(curved):
        A, c = dQ[curved], db[curved]
        step = 1.0 / (2.0 * np.linalg.norm(A, ord=2, axis=(1, 2)) ** 2)

        def objective(x):
            r = np.einsum("pij,pnj->pni", A, x) + c[:, None, :]
            return np.sum(r * r, axis=-1)

        def gradient(x):
            r = np.einsum("pij,pnj->pni", A, x) + c[:, None, :]
            return 2.0 * np.einsum("pji,pnj->pni", A, r)

        terms[curved] = _ascent_max(scenario.feasible_set, objective, gradient,
                                    config.get("ascent_steps", 200), rng, samples,
                                    config.get("ascent_restarts", 16), step)
    return float(np.sum(terms)), not bool(np.any(curved))


def cost_value_terms(scenario: Scenario, samples: Optional[int] = None, rng=None):
    """
    Per-pair terms max_{x∈P} |c_{t+1}(x) − c_t(x)| for t = 0..T−1, c₀ ≡ 0.

    Returns:
        tuple: (terms, exact) arrays; a pair is exact when its curvatures match.
    """
    config = defaults()
    samples = samples or config.get("variation_samples", 256)
    rng = rng if rng is not None else make_rng(config.get("check_seed", 0))
    dQ, db, dk = _consecutive_pairs(scenario, with_origin=True)
    feasible_set = scenario.feasible_set
    curved = np.any(dQ != 0.0, axis=(1, 2))
    terms = np.maximum(np.abs(feasible_set.support(db) + dk), np.abs(feasible_set.support(-db) - dk))
    terms = np.atleast_1d(terms).astype(float)
    if np.any(curved):
        A, c, k = dQ[curved], db[curved], dk[curved]
        step = 1.0 / np.linalg.norm(A, ord=2, axis=(1, 2))

        def h(x):
            return 0.5 * np.einsum("pni,pij,pnj->pn", x, A, x) + np.einsum("pni,pi->pn", x, c) + k[:, None]

        def gradient(x):
            return np.sign(h(x))[..., None] * (np.einsum("pij,pnj->pni", A, x) + c[:, None, :])

        terms[curved] = _ascent_max(feasible_set, lambda x: np.abs(h(x)), gradient,
                                    config.get("ascent_steps", 200), rng, samples,
                                    config.get("ascent_restarts", 16), step)
    return terms, ~curved


def evar_cost_values(scenario: Scenario, samples: Optional[int] = None, rng=None):
    """
    Σ_{t=0}^{T−1} max_{x∈P} |c_{t+1}(x) − c_t(x)| with c₀ ≡ 0.

    Returns:
        tuple: (value, exact), as for sequential_variation.
    """
    terms, exact = cost_value_terms(scenario, samples, rng)
    return float(np.sum(terms)), bool(np.all(exact))


def searching_gradients(trace):
    """
    (∇c_t(z_{t−1}), ∇c_{t−1}(z_{t−1})) for t = 1..T along a trace.

    The previous cost counts as c₀ ≡ 0 in round 1 and at every epoch restart.
    """
    scenario = trace.scenario
    Z = trace.previous_searching_points
    current = scenario.grads_at(Z)
    previous = np.zeros_like(current)
    previous[1:] = np.einsum("tij,tj->ti", scenario.Qs[:-1], Z[1:]) + scenario.bs[:-1]
    previous[np.asarray(trace.epoch_starts) - 1] = 0.0
    return current, previous


def evar_terms(trace, dual_norm=None) -> np.ndarray:
    """Per-round terms ‖∇c_t(z_{t−1}) − ∇c_{t−1}(z_{t−1})‖² along a trace."""
    current, previous = searching_gradients(trace)
    diff = current - previous
    if dual_norm is None:
        return np.sum(diff * diff, axis=1)
    return dual_norm(diff) ** 2


def evar_sequential(trace) -> float:
    """Σ_{t=0}^{T−1} ‖∇c_{t+1}(z_t) − ∇c_t(z_t)‖² along the trace's searching points."""
    return float(np.sum(evar_terms(trace)))


def evar_general_norm(trace, mirror_map) -> float:
    """Dual-norm version of evar_sequential for the mirror map's norm pair."""
    return float(np.sum(evar_terms(trace, mirror_map.dual_norm)))


def evar_a_priori(scenario: Scenario, z0, dual_norm=None) -> float:
    """
    Extended sequential variation known before running.

    Only defined when gradient differences are point-independent: then every
    term except the first is ‖Δb_t‖ and the first is ‖∇c₁(z₀)‖.
    """
    if not scenario.point_independent:
        raise ConfigurationError("a priori EVAR needs point-independent gradient differences")
    norm = dual_norm if dual_norm is not None else (lambda v: np.sqrt(np.sum(v * v, axis=-1)))
    first = norm(scenario.costs[0].grad(z0)) ** 2
    rest = norm(np.diff(scenario.bs, axis=0)) ** 2 if scenario.T > 1 else np.zeros(0)
    return float(first + np.sum(rest))


@dataclass(frozen=True)
class VarDecomposition:
    var1: float
    var2: float
    realized_total_var: float


def var_decomposition(trace) -> VarDecomposition:
    """
    VAR¹ = (1/T)ΣΣ‖∇c_t(x_t) − ∇c_t(x_τ)‖² and VAR² = (1/T)ΣΣ‖∇c_t(x_τ) − ∇c_τ(x_τ)‖².

    Also returns the total variation of the realized gradients ∇c_t(x_t).
    """
    scenario = trace.scenario
    T = scenario.T
    if T > VAR_DECOMPOSITION_LIMIT:
        raise ResourceLimitError(f"var_decomposition is O(T²); T={T} exceeds {VAR_DECOMPOSITION_LIMIT}")
    X = trace.x
    realized = scenario.grads_at(X)
    var1 = 0.0
    var2 = 0.0
    for t in range(T):
        at_all = X @ scenario.Qs[t].T + scenario.bs[t]
        var1 += float(np.sum((realized[t] - at_all) ** 2))
        var2 += float(np.sum((at_all - realized) ** 2))
    total = float(np.sum((realized - realized.mean(axis=0)) ** 2))
    return VarDecomposition(var1 / T, var2 / T, total)


@dataclass(frozen=True)
class VariationReport:
    total_var: Optional[float]
    seq_var: float
    seq_var_exact: bool
    evar_seq: float
    evar_cost: float
    evar_cost_exact: bool
    var1: Optional[float]
    var2: Optional[float]
    realized_total_var: Optional[float]
    evar_general: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "total_var": {"value": self.total_var, "exact": self.total_var is not None},
            "seq_var": {"value": self.seq_var, "exact": self.seq_var_exact},
            "evar_seq": {"value": self.evar_seq, "exact": True},
            "evar_cost": {"value": self.evar_cost, "exact": self.evar_cost_exact},
            "var1": {"value": self.var1, "exact": self.var1 is not None},
            "var2": {"value": self.var2, "exact": self.var2 is not None},
            "realized_total_var": {"value": self.realized_total_var, "exact": self.realized_total_var is not None},
            "evar_general": {"value": self.evar_general, "exact": self.evar_general is not None},
        }


def variation_report(trace, mirror_map=None, samples: Optional[int] = None, rng=None) -> VariationReport:
    """Computes every variation quantity for a finished run."""
    scenario = trace.scenario
    rng = rng if rng is not None else make_rng(defaults().get("check_seed", 0))
    total = total_variation(scenario) if scenario.is_linear else None
    seq_var, seq_exact = sequential_variation(scenario, samples, rng)
    evar_cost, cost_exact = evar_cost_values(scenario, samples, rng)
    if scenario.T <= VAR_DECOMPOSITION_LIMIT:
        decomposition = var_decomposition(trace)
        var1, var2, realized = decomposition.var1, decomposition.var2, decomposition.realized_total_var
    else:
        var1 = var2 = realized = None
    general = evar_general_norm(trace, mirror_map) if mirror_map is not None else None
    return VariationReport(total, seq_var, seq_exact, evar_sequential(trace), evar_cost, cost_exact,
                           var1, var2, realized, general)
