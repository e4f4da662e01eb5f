"""
Feasible sets, Euclidean projections and Bregman machinery.

Every argmin subproblem solved by the online learners is a projection of an
affine image onto the feasible set, so everything here is closed form.
Arrays may carry leading batch axes; the last axis is always the coordinate
axis.
"""
import math
import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.special import rel_entr, softmax, xlogy

from util import ConfigurationError, ContractViolation, UnboundedSetWarning

FEASIBILITY_TOL = 1e-9
SIMPLEX_PIVOT_TOL = 1e-12
_TINY = np.finfo(float).tiny

SET_KINDS = ("unit_ball", "ball", "box", "simplex")


def as_point(y, dim: int) -> np.ndarray:
    """
    Validates and converts a point (or a batch of points).

    Args:
        y (array-like): Coordinates, last axis of length dim.
        dim (int): Ambient dimension.

    Returns:
        np.ndarray: float64 copy of y.
    """
    point = np.array(y, dtype=float)
    if point.ndim == 0 or point.shape[-1] != dim:
        raise ContractViolation(f"dimension mismatch: expected {dim} coordinates, got shape {point.shape}")
    if not np.all(np.isfinite(point)):
        raise ContractViolation("point has non-finite coordinates")
    return point


@dataclass(frozen=True)
class FeasibleSet:
    kind: str
    dim: int
    radius: float = 1.0
    lo: Optional[Tuple[float, ...]] = None
    hi: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.kind not in SET_KINDS:
            raise ConfigurationError(f"unknown set kind '{self.kind}', expected one of {SET_KINDS}")
        if int(self.dim) < 1:
            raise ConfigurationError("set dimension must be a positive integer")
        if self.kind in ("unit_ball", "ball"):
            if not self.radius > 0:
                raise ConfigurationError("ball radius must be positive")
            if self.kind == "unit_ball" and self.radius != 1.0:
                raise ConfigurationError("unit_ball has radius 1")
        if self.kind == "box":
            if self.lo is None or self.hi is None or len(self.lo) != self.dim or len(self.hi) != self.dim:
                raise ConfigurationError("box needs lo and hi with one bound per coordinate")
            if any(l > h for l, h in zip(self.lo, self.hi)):
                raise ConfigurationError("box lower bound exceeds upper bound")
        if self.max_norm > 1.0 + FEASIBILITY_TOL:
            warnings.warn(f"{self.kind} set reaches norm {self.max_norm:.4g}, outside the unit ball",
                          UnboundedSetWarning)

    @classmethod
    def unit_ball(cls, dim: int):
        return cls("unit_ball", int(dim))

    @classmethod
    def ball(cls, dim: int, radius: float):
        return cls("ball", int(dim), radius=float(radius))

    @classmethod
    def box(cls, lo, hi):
        lo = tuple(float(v) for v in np.ravel(lo))
        hi = tuple(float(v) for v in np.ravel(hi))
        return cls("box", len(lo), lo=lo, hi=hi)

    @classmethod
    def simplex(cls, dim: int):
        return cls("simplex", int(dim))

    @classmethod
    def from_dict(cls, spec: dict, dim: int):
        """Builds a set from its experiment-document form, e.g. {kind: box, lo: -0.5, hi: 0.5}."""
        spec = dict(spec or {})
        kind = spec.pop("kind", "unit_ball")
        if kind == "unit_ball":
            feasible = cls.unit_ball(dim)
        elif kind == "ball":
            feasible = cls.ball(dim, spec.pop("radius", 1.0))
        elif kind == "box":
            lo = np.broadcast_to(np.asarray(spec.pop("lo", -1.0), dtype=float), (dim,))
            hi = np.broadcast_to(np.asarray(spec.pop("hi", 1.0), dtype=float), (dim,))
            feasible = cls.box(lo, hi)
        elif kind == "simplex":
            feasible = cls.simplex(dim)
        else:
            raise ConfigurationError(f"unknown set kind '{kind}'")
        if spec:
            raise ConfigurationError(f"unknown set keys: {sorted(spec)}")
        return feasible

    def describe(self) -> dict:
        if self.kind == "box":
            return {"kind": "box", "lo": list(self.lo), "hi": list(self.hi)}
        if self.kind == "ball":
            return {"kind": "ball", "radius": self.radius}
        return {"kind": self.kind}

    @property
    def _lo(self) -> np.ndarray:
        return np.asarray(self.lo, dtype=float)

    @property
    def _hi(self) -> np.ndarray:
        return np.asarray(self.hi, dtype=float)

    @property
    def contains_origin(self) -> bool:
        if self.kind == "simplex":
            return False
        if self.kind == "box":
            return bool(np.all(self._lo <= 0.0) and np.all(self._hi >= 0.0))
        return True

    @property
    def inner_radius(self) -> float:
        """Largest r <= 1 with rB inside the set, 0 when the origin is not interior."""
        if self.kind in ("unit_ball", "ball"):
            return min(self.radius, 1.0)
        if self.kind == "box":
            if np.all(self._lo < 0.0) and np.all(self._hi > 0.0):
                return float(min(1.0, np.min(-self._lo), np.min(self._hi)))
            return 0.0
        return 0.0

    @property
    def max_norm(self) -> float:
        """Euclidean norm of the farthest feasible point."""
        if self.kind in ("unit_ball", "ball"):
            return float(self.radius)
        if self.kind == "box":
            return float(np.sqrt(np.sum(np.maximum(self._lo ** 2, self._hi ** 2))))
        return 1.0

    def contains(self, x, tol: float = FEASIBILITY_TOL):
        x = np.asarray(x, dtype=float)
        if self.kind in ("unit_ball", "ball"):
            return np.sqrt(np.sum(x * x, axis=-1)) <= self.radius + tol
        if self.kind == "box":
            return np.all((x >= self._lo - tol) & (x <= self._hi + tol), axis=-1)
        return np.all(x >= -tol, axis=-1) & (np.abs(np.sum(x, axis=-1) - 1.0) <= tol)

    def project(self, y) -> np.ndarray:
        """Euclidean projection; feasible inputs come back unchanged."""
        y = np.asarray(y, dtype=float)
        if self.kind in ("unit_ball", "ball"):
            norm = np.sqrt(np.sum(y * y, axis=-1, keepdims=True))
            scale = np.where(norm > self.radius, self.radius / np.where(norm > 0, norm, 1.0), 1.0)
            return y * scale
        if self.kind == "box":
            return np.clip(y, self._lo, self._hi)
        return _project_simplex(y)

    def support(self, g):
        """max over the set of gᵀx, row-wise for a batch of g."""
        g = np.asarray(g, dtype=float)
        if self.kind in ("unit_ball", "ball"):
            value = self.radius * np.sqrt(np.sum(g * g, axis=-1))
        elif self.kind == "box":
            value = np.sum(np.maximum(g * self._lo, g * self._hi), axis=-1)
        else:
            value = np.max(g, axis=-1)
        return float(value) if np.ndim(value) == 0 else value

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """n feasible points drawn uniformly (Dirichlet(1) on the simplex)."""
        if self.kind in ("unit_ball", "ball"):
            direction = rng.standard_normal((n, self.dim))
            direction /= np.linalg.norm(direction, axis=1, keepdims=True)
            radii = self.radius * rng.random(n) ** (1.0 / self.dim)
            return direction * radii[:, None]
        if self.kind == "box":
            return rng.uniform(self._lo, self._hi, size=(n, self.dim))
        return rng.dirichlet(np.ones(self.dim), size=n)


def _project_simplex(y: np.ndarray) -> np.ndarray:
    # sort-based projection, O(d log d) per point
    d = y.shape[-1]
    u = -np.sort(-y, axis=-1)
    css = np.cumsum(u, axis=-1) - 1.0
    index = np.arange(1, d + 1)
    cond = u - css / index > SIMPLEX_PIVOT_TOL
    rho = d - 1 - np.argmax(cond[..., ::-1], axis=-1)
    theta = np.take_along_axis(css, rho[..., None], axis=-1) / (rho[..., None] + 1.0)
    projected = np.maximum(y - theta, 0.0)
    feasible = np.all(y >= 0.0, axis=-1) & (np.abs(np.sum(y, axis=-1) - 1.0) <= SIMPLEX_PIVOT_TOL)
    return np.where(feasible[..., None], y, projected)


def project(feasible_set: FeasibleSet, y) -> np.ndarray:
    """argmin over the set of ‖x − y‖₂."""
    return feasible_set.project(as_point(y, feasible_set.dim))


def linearized_step(feasible_set: FeasibleSet, z, g, stiffness: float) -> np.ndarray:
    """argmin over the set of gᵀx + (stiffness/2)‖x − z‖²."""
    if not stiffness > 0:
        raise ContractViolation(f"stiffness must be positive, got {stiffness}")
    return feasible_set.project(np.asarray(z, dtype=float) - np.asarray(g, dtype=float) / stiffness)


def ftrl_solve(feasible_set: FeasibleSet, grad_sum, stiffness: float) -> np.ndarray:
    """argmin over the set of grad_sumᵀx + (stiffness/2)‖x‖²."""
    if not stiffness > 0:
        raise ContractViolation(f"stiffness must be positive, got {stiffness}")
    return feasible_set.project(-np.asarray(grad_sum, dtype=float) / stiffness)


def shrink(feasible_set: FeasibleSet, alpha: float) -> FeasibleSet:
    """
    Returns (1 − alpha)·P.

    Balls and boxes stay closed under scaling, so the result is again a
    concrete set and its projection equals (1 − alpha)·Π_P(y / (1 − alpha)).
    """
    if not 0.0 <= alpha < 1.0:
        raise ContractViolation(f"shrink factor must lie in [0, 1), got {alpha}")
    if feasible_set.inner_radius <= 0.0:
        raise ConfigurationError(f"cannot shrink a {feasible_set.kind} set that has no interior origin")
    if alpha == 0.0:
        return feasible_set
    scale = 1.0 - alpha
    if feasible_set.kind in ("unit_ball", "ball"):
        return FeasibleSet.ball(feasible_set.dim, feasible_set.radius * scale)
    return FeasibleSet.box(feasible_set._lo * scale, feasible_set._hi * scale)


def grid_points(feasible_set: FeasibleSet, step: float) -> np.ndarray:
    """Feasible points of a regular grid, for brute-force cross-checks in d <= 2."""
    if feasible_set.dim > 2:
        raise ContractViolation("grid oracles are limited to d <= 2")
    if feasible_set.kind == "simplex":
        first = np.arange(0.0, 1.0 + step / 2, step)
        first = np.clip(first, 0.0, 1.0)
        if feasible_set.dim == 1:
            return np.ones((1, 1))
        return np.column_stack([first, 1.0 - first])
    if feasible_set.kind == "box":
        lo, hi = feasible_set._lo, feasible_set._hi
    else:
        lo = -feasible_set.radius * np.ones(feasible_set.dim)
        hi = -lo
    axes = [np.append(np.arange(l, h, step), h) for l, h in zip(lo, hi)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, feasible_set.dim)
    return mesh[feasible_set.contains(mesh, tol=0.0)]


class MirrorMap(ABC):
    """Strongly convex ω with its Bregman distance and prox oracle."""

    name = None
    alpha = 1.0

    @abstractmethod
    def omega(self, x):
        pass

    @abstractmethod
    def omega_grad(self, x):
        pass

    @abstractmethod
    def bregman(self, x, z):
        """D(x, z); x may be a batch of points."""

    @abstractmethod
    def norm(self, v):
        pass

    @abstractmethod
    def dual_norm(self, v):
        pass

    @abstractmethod
    def check_compatible(self, feasible_set: FeasibleSet):
        pass

    @abstractmethod
    def minimizer(self, feasible_set: FeasibleSet) -> np.ndarray:
        """argmin of ω over the set (the starting point z₀)."""

    @abstractmethod
    def radius(self, feasible_set: FeasibleSet) -> float:
        """R = sqrt(2 (max ω − min ω)) over the set."""

    @abstractmethod
    def prox(self, feasible_set: FeasibleSet, z, g, stiffness: float) -> np.ndarray:
        pass

    def check_centre(self, z):
        """Raise ContractViolation when z cannot centre a prox step."""
        return None

    def strong_convexity_margin(self, feasible_set: FeasibleSet, rng: np.random.Generator,
                                samples: int = 200) -> float:
        """
        Smallest value of D(x, z) − (α/2)‖x − z‖² over sampled pairs.

        A nonnegative result confirms the declared modulus on the samples.
        """
        self.check_compatible(feasible_set)
        x = feasible_set.sample(rng, samples)
        z = feasible_set.sample(rng, samples)
        if self.name == "entropy":
            z = np.maximum(z, 1e-12)
            z /= z.sum(axis=1, keepdims=True)
        gaps = [self.bregman(xi, zi) - 0.5 * self.alpha * self.norm(xi - zi) ** 2 for xi, zi in zip(x, z)]
        return float(np.min(gaps))


class EuclideanMirrorMap(MirrorMap):
    name = "euclidean"
    alpha = 1.0

    def omega(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.sum(x * x, axis=-1)

    def omega_grad(self, x):
        return np.array(x, dtype=float)

    def bregman(self, x, z):
        diff = np.asarray(x, dtype=float) - np.asarray(z, dtype=float)
        return 0.5 * np.sum(diff * diff, axis=-1)

    def norm(self, v):
        return np.linalg.norm(v, axis=-1)

    def dual_norm(self, v):
        return np.linalg.norm(v, axis=-1)

    def check_compatible(self, feasible_set):
        return None

    def minimizer(self, feasible_set):
        return feasible_set.project(np.zeros(feasible_set.dim))

    def radius(self, feasible_set):
        centre = self.minimizer(feasible_set)
        return math.sqrt(max(feasible_set.max_norm ** 2 - float(centre @ centre), 0.0))

    def prox(self, feasible_set, z, g, stiffness):
        # D(x, z) = ½‖x − z‖², the Euclidean step itself
        return linearized_step(feasible_set, z, g, stiffness)


class EntropyMirrorMap(MirrorMap):
    """Negative entropy on the simplex, 1-strongly convex w.r.t. ℓ₁ (dual norm ℓ∞)."""

    name = "entropy"
    alpha = 1.0

    def omega(self, x):
        x = np.asarray(x, dtype=float)
        return np.sum(xlogy(x, x), axis=-1)

    def omega_grad(self, x):
        return np.log(np.asarray(x, dtype=float)) + 1.0

    def bregman(self, x, z):
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        return np.sum(rel_entr(x, z) - x + z, axis=-1)

    def norm(self, v):
        return np.sum(np.abs(v), axis=-1)

    def dual_norm(self, v):
        return np.max(np.abs(v), axis=-1)

    def check_compatible(self, feasible_set):
        if feasible_set.kind != "simplex":
            raise ConfigurationError(f"entropy mirror map needs the simplex, got a {feasible_set.kind} set")

    def minimizer(self, feasible_set):
        self.check_compatible(feasible_set)
        return np.full(feasible_set.dim, 1.0 / feasible_set.dim)

    def radius(self, feasible_set):
        self.check_compatible(feasible_set)
        return math.sqrt(2.0 * math.log(feasible_set.dim))

    def check_centre(self, z):
        if np.any(np.asarray(z, dtype=float) <= 0.0):
            raise ContractViolation("entropy prox step needs a strictly positive centre")

    def prox(self, feasible_set, z, g, stiffness):
        self.check_compatible(feasible_set)
        # x_i ∝ z_i exp(−g_i / stiffness) in the log domain, floored at the smallest normal float
        log_z = np.log(np.maximum(np.asarray(z, dtype=float), _TINY))
        return np.maximum(softmax(log_z - np.asarray(g, dtype=float) / stiffness, axis=-1), _TINY)


MIRROR_MAPS = {
    "euclidean": EuclideanMirrorMap,
    "entropy": EntropyMirrorMap,
}


def mirror_map_from_name(name: str) -> MirrorMap:
    try:
        return MIRROR_MAPS[name]()
    except KeyError:
        raise ConfigurationError(f"unknown mirror map '{name}', expected one of {sorted(MIRROR_MAPS)}")


def bregman_prox_step(feasible_set: FeasibleSet, mirror_map: MirrorMap, z, g, stiffness: float) -> np.ndarray:
    """argmin over the set of gᵀx + stiffness·D(x, z)."""
    if not stiffness > 0:
        raise ContractViolation(f"stiffness must be positive, got {stiffness}")
    mirror_map.check_centre(z)
    return mirror_map.prox(feasible_set, z, g, stiffness)
