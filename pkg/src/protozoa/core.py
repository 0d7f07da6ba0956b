"""Shared building blocks: search boxes, candidates, populations, objectives and RNG streams."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


class ProtozoaError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(ProtozoaError, ValueError):
    pass


class InvalidFitnessError(ProtozoaError, ValueError):
    pass


class ParameterError(ProtozoaError, ValueError):
    pass


class BudgetError(ProtozoaError, RuntimeError):
    pass


class ContractError(ProtozoaError, ValueError):
    pass


class FormatError(ProtozoaError, ValueError):
    pass


class ConfigError(ProtozoaError, ValueError):
    pass


@dataclass(frozen=True)
class Bounds:
    """Axis-aligned box ``lower <= x <= upper``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float)).copy()
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float)).copy()
        if lower.ndim != 1 or lower.shape != upper.shape:
            raise DimensionError("lower and upper must be 1-D arrays of equal length")
        if lower.size < 1:
            raise DimensionError("bounds need at least one dimension")
        if not np.all(lower < upper):
            raise ParameterError("every lower bound must be strictly below its upper bound")
        lower.flags.writeable = False
        upper.flags.writeable = False
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def cube(cls, dim: int, low: float, high: float) -> "Bounds":
        return cls(np.full(dim, float(low)), np.full(dim, float(high)))

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all((x >= self.lower) & (x <= self.upper)))


@dataclass
class Candidate:
    position: np.ndarray
    fitness: float


@dataclass
class Population:
    """A fixed-size set of candidates stored row-wise.

    ``positions`` has shape ``(ps, dim)`` and ``fitness`` shape ``(ps,)``.
    When ``sorted`` is true, row 0 holds the best member (rank 1).
    """

    positions: np.ndarray
    fitness: np.ndarray
    bounds: Bounds
    sorted: bool = False

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.fitness = np.asarray(self.fitness, dtype=float)
        if self.positions.ndim != 2 or self.positions.shape[1] != self.bounds.dim:
            raise DimensionError(
                f"positions must have shape (ps, {self.bounds.dim}), got {self.positions.shape}"
            )
        if self.fitness.shape != (self.positions.shape[0],):
            raise DimensionError("fitness must hold one value per member")

    @property
    def size(self) -> int:
        return self.positions.shape[0]

    def __len__(self) -> int:
        return self.size

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def members(self) -> list[Candidate]:
        return [Candidate(p.copy(), float(f)) for p, f in zip(self.positions, self.fitness)]

    def best(self) -> Candidate:
        i = int(np.argmin(self.fitness))
        return Candidate(self.positions[i].copy(), float(self.fitness[i]))


@dataclass
class ObjectiveFn:
    """Black-box objective over a bounded box.

    ``func`` maps a position to a real value. When ``vectorized`` is true it
    must also accept an ``(m, dim)`` array and return ``m`` values, which lets
    a whole generation be scored in one call.
    """

    func: Callable[[np.ndarray], float]
    bounds: Bounds
    name: str = "objective"
    vectorized: bool = False

    @property
    def dim(self) -> int:
        return self.bounds.dim

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DimensionError(f"{self.name} expects a vector of length {self.dim}")
        return float(self.func(x))

    def batch(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if xs.ndim != 2 or xs.shape[1] != self.dim:
            raise DimensionError(f"{self.name} expects an (m, {self.dim}) array")
        if self.vectorized:
            return np.asarray(self.func(xs), dtype=float).reshape(xs.shape[0])
        return np.array([float(self.func(x)) for x in xs], dtype=float)


@dataclass
class EvalCounter:
    """Running count of objective evaluations."""

    fes: int = 0


def make_rng(seed: int) -> np.random.Generator:
    """Return the run's random stream.

    PCG64 gives the same sequence for the same seed on every platform.
    """
    seed = int(seed)
    if seed < 0 or seed >= 2**64:
        raise ParameterError("seed must be an unsigned 64-bit integer")
    return np.random.Generator(np.random.PCG64(seed))


def clamp_to_bounds(position, bounds: Bounds) -> np.ndarray:
    """Clip ``position`` (a vector or a stack of vectors) into the box."""
    x = np.asarray(position, dtype=float)
    if x.shape[-1:] != (bounds.dim,):
        raise DimensionError(f"expected trailing dimension {bounds.dim}, got shape {x.shape}")
    return np.minimum(bounds.upper, np.maximum(bounds.lower, x))


def sort_population(pop: Population) -> Population:
    """Stable ascending sort by fitness; ties keep their prior order."""
    if np.isnan(pop.fitness).any():
        raise InvalidFitnessError("population contains NaN fitness values")
    order = np.argsort(pop.fitness, kind="stable")
    return Population(pop.positions[order], pop.fitness[order], pop.bounds, sorted=True)


def _check_fitness(values: np.ndarray, positions: np.ndarray, name: str) -> None:
    bad = np.flatnonzero(np.isnan(values))
    if bad.size:
        raise InvalidFitnessError(
            f"{name} returned NaN at position {positions[bad[0]].tolist()}"
        )


def evaluate_positions(
    positions, objective: ObjectiveFn, counter: Optional[EvalCounter] = None
) -> np.ndarray:
    positions = np.asarray(positions, dtype=float)
    if positions.shape[0] == 0:
        return np.empty(0)
    values = objective.batch(positions)
    _check_fitness(values, positions, objective.name)
    if counter is not None:
        counter.fes += positions.shape[0]
    return values


def evaluate(
    pop: Population, objective: ObjectiveFn, counter: Optional[EvalCounter] = None
) -> Population:
    """Refresh every fitness cache; ``counter.fes`` grows by ``len(pop)``."""
    values = evaluate_positions(pop.positions, objective, counter)
    return Population(pop.positions.copy(), values, pop.bounds, sorted=False)


def random_population(bounds: Bounds, ps: int, rng: np.random.Generator) -> np.ndarray:
    """``ps`` uniform samples in the box, one per row."""
    return bounds.lower + rng.random((ps, bounds.dim)) * bounds.width
