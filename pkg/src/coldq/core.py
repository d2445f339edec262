"""Shared domain types: decision vectors, feasible sets, and round functions.

Decisions are plain float64 vectors. The only concrete feasible-set kind is
the axis-aligned box (every benchmark here uses one) so projections are exact
coordinatewise clamps; a protocol is declared for other projection oracles.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Protocol

import numpy as np

Vector = np.ndarray


class DimensionMismatchError(ValueError):
    """A vector's length disagrees with the ambient problem dimension."""


class ConfigurationError(ValueError):
    """A parameter fell outside its documented admissible range."""


class ContractViolationError(ValueError):
    """A caller broke an operation's precondition."""


def hinge(v: float) -> float:
    """Positive part max(v, 0)."""
    if not np.isfinite(v):
        raise ContractViolationError(f"hinge requires a finite input, got {v}")
    return v if v > 0.0 else 0.0


def positive_part(values: np.ndarray) -> np.ndarray:
    """Elementwise positive part, used for violation vectors."""
    return np.maximum(values, 0.0)


def as_vector(x, dimension: Optional[int] = None) -> Vector:
    """Coerce to a float64 vector, checking finiteness and (optionally) length."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"expected a 1-d vector, got shape {arr.shape}")
    if dimension is not None and arr.shape[0] != dimension:
        raise DimensionMismatchError(
            f"expected a vector of length {dimension}, got {arr.shape[0]}"
        )
    if not np.all(np.isfinite(arr)):
        raise ContractViolationError("vector has non-finite coordinates")
    return arr


class FeasibleSet(Protocol):
    """Projection oracle onto a bounded convex set."""

    @property
    def dimension(self) -> int: ...

    @property
    def diameter(self) -> float: ...

    def project(self, x: Vector) -> Vector: ...

    def contains(self, x: Vector, tol: float = 0.0) -> bool: ...


@dataclass(frozen=True)
class Box:
    """Axis-aligned box {x : lower <= x <= upper}.

    The diameter equals ``||upper - lower||``, attained at opposite corners,
    so the bounded-set constant is exact rather than estimated.
    """

    lower: Vector
    upper: Vector

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=np.float64)
        hi = np.asarray(self.upper, dtype=np.float64)
        if lo.ndim != 1 or hi.shape != lo.shape:
            raise DimensionMismatchError("box bounds must be vectors of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ConfigurationError("box bounds must be finite")
        if np.any(lo > hi):
            raise ConfigurationError("box requires lower <= upper coordinatewise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, low: float, high: float, dimension: int) -> "Box":
        return cls(np.full(dimension, low), np.full(dimension, high))

    @property
    def dimension(self) -> int:
        return self.lower.shape[0]

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    @property
    def center(self) -> Vector:
        return 0.5 * (self.lower + self.upper)

    def project(self, x: Vector) -> Vector:
        x = as_vector(x, self.dimension)
        return np.clip(x, self.lower, self.upper)

    def contains(self, x: Vector, tol: float = 0.0) -> bool:
        x = as_vector(x, self.dimension)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def vertex_matrix(self) -> np.ndarray:
        """All 2^p corners, rows = vertices. Guarded against blow-up."""
        p = self.dimension
        if p > 20:
            raise ConfigurationError(f"refusing to enumerate 2^{p} box vertices")
        bits = (np.arange(1 << p)[:, None] >> np.arange(p)) & 1
        return np.where(bits == 1, self.upper, self.lower).astype(np.float64)


def project(feasible: FeasibleSet, x: Vector) -> Vector:
    """Euclidean projection of x onto the feasible set."""
    return feasible.project(x)


@dataclass(frozen=True)
class AffineConstraints:
    """Constraint block g(x) = matrix @ x - offset."""

    matrix: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        o = np.asarray(self.offset, dtype=np.float64)
        if m.ndim != 2 or o.ndim != 1 or m.shape[0] != o.shape[0]:
            raise DimensionMismatchError("affine block needs matrix (N,p) and offset (N,)")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "offset", o)


@dataclass(frozen=True)
class CapacityConstraint:
    """Single constraint g(x) = demand - sum_i weight * log(1 + gain * x_i)."""

    demand: float
    weight: float = 4.0
    gain: float = 4.0

    def total_capacity(self, upper: Vector) -> float:
        return float(np.sum(self.weight * np.log1p(self.gain * upper)))


@dataclass(frozen=True)
class ProblemSpec:
    """Static description of one constrained online optimization instance.

    ``grad_bound`` and ``constraint_bound`` are certified upper bounds on the
    loss-gradient norm and on |g| over the feasible set for every round; the
    generators compute them by interval arithmetic on the realized draws, so
    the queue ceiling and the certificate right-hand sides are never built on
    an underestimate.
    """

    dimension: int
    n_constraints: int
    horizon: int
    feasible: Box
    grad_bound: float
    constraint_bound: float
    strong_convexity: float = 0.0

    def __post_init__(self):
        if self.dimension < 1 or self.n_constraints < 1 or self.horizon < 1:
            raise ConfigurationError("dimension, n_constraints and horizon must be >= 1")
        if self.feasible.dimension != self.dimension:
            raise DimensionMismatchError("feasible set dimension disagrees with spec")
        if not self.grad_bound > 0:
            raise ConfigurationError("grad_bound must be positive")
        if not self.constraint_bound > 0:
            raise ConfigurationError("constraint_bound must be positive")
        if self.strong_convexity < 0:
            raise ConfigurationError("strong_convexity must be nonnegative")

    @property
    def diameter(self) -> float:
        return self.feasible.diameter


@dataclass(frozen=True)
class RoundFunctions:
    """One round's loss and constraints, exposed through value/gradient maps.

    ``affine`` or ``capacity`` carry optional structure that exact solver and
    variation-bound paths exploit; the callable interface is authoritative.
    ``feasible_anchor`` is a strictly feasible point when the generator can
    certify one.
    """

    loss_value: Callable[[Vector], float]
    loss_gradient: Callable[[Vector], Vector]
    constraint_values: Callable[[Vector], Vector]
    constraint_subgradient: Callable[[Vector, int], Vector]
    n_constraints: int
    affine: Optional[AffineConstraints] = None
    capacity: Optional[CapacityConstraint] = None
    loss_linear: Optional[Vector] = None
    loss_prox: Optional[tuple[float, Vector]] = None  # f = a ||x - z||^2 + const
    feasible_anchor: Optional[Vector] = None

    def violations(self, x: Vector) -> Vector:
        """Positive parts of the constraint values at x."""
        g = np.asarray(self.constraint_values(x), dtype=np.float64)
        if g.shape != (self.n_constraints,):
            raise DimensionMismatchError(
                f"constraint map returned shape {g.shape}, expected ({self.n_constraints},)"
            )
        return positive_part(g)
