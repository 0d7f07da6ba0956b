"""Artificial protozoa optimizer.

Each generation sorts the population, routes a random fraction of it to
dormancy or reproduction and lets the rest forage in autotrophic or
heterotrophic mode. All new positions are computed from the generation-start
snapshot, scored in one batch, and kept only where they strictly improve.

Random draws come from a single stream per run, always in this order::

    pf uniform
    permutation of ps ranks (first ceil(ps * pf) form the dormancy/reproduction set)
    ps mode-selection uniforms (one per rank, best first)
    dormancy draws, reproduction draws, autotroph draws, heterotroph draws

The operator functions document their own draw order; each handles a batch
of ranks so a generation costs a handful of array operations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional

import numpy as np

from .core import (
    Bounds,
    BudgetError,
    Candidate,
    ContractError,
    EvalCounter,
    ObjectiveFn,
    ParameterError,
    Population,
    clamp_to_bounds,
    evaluate_positions,
    make_rng,
    random_population,
    sort_population,
)
from .metrics import diversity

EPS = 2.2204e-16


@dataclass(frozen=True)
class ApoParams:
    ps: int = 100
    np_pairs: int = 1
    pf_max: float = 0.1
    max_fes: int = 50_000

    def __post_init__(self):
        if self.ps < 2:
            raise ParameterError("population size must be at least 2")
        if self.np_pairs < 1 or self.np_pairs > self.np_max:
            raise ParameterError(
                f"neighbor pairs must lie in [1, {self.np_max}] for ps={self.ps}"
            )
        if not 0.0 <= self.pf_max <= 1.0:
            raise ParameterError("pf_max must lie in [0, 1]")
        if self.max_fes < 1:
            raise ParameterError("max_fes must be positive")

    @property
    def np_max(self) -> int:
        return max(1, (self.ps - 1) // 2)

    @property
    def iter_max(self) -> int:
        return self.max_fes // self.ps

    @classmethod
    def from_iterations(cls, iterations: int, ps: int = 100, **kw) -> "ApoParams":
        """Budget of ``iterations`` batches of ``ps`` evaluations, initialisation included."""
        return cls(ps=ps, max_fes=iterations * ps, **kw)


@dataclass
class ScheduleState:
    iter: int = 0
    fes: int = 0


class TraceRow(NamedTuple):
    iter: int
    fes: int
    best: float
    diversity: float


@dataclass
class ApoResult:
    best: Candidate
    trace: list
    fes_used: int
    population: Optional[Population] = None

    @property
    def best_fitness(self) -> float:
        return self.best.fitness

    @property
    def best_curve(self) -> np.ndarray:
        return np.array([row.best for row in self.trace])


# ---------------------------------------------------------------- schedules --

def _check_iter(it, iter_max) -> None:
    if iter_max < 1:
        raise ParameterError("iter_max must be at least 1")
    if np.any(np.asarray(it) < 0) or np.any(np.asarray(it) > iter_max):
        raise ParameterError("iteration outside [0, iter_max]")


def foraging_factor(it, iter_max, u):
    """Step-size multiplier ``u * (1 + cos(pi * it / iter_max))`` in ``[0, 2]``."""
    _check_iter(it, iter_max)
    return u * (1.0 + np.cos(it / iter_max * np.pi))


def prob_forage_mode(it, iter_max):
    """Probability of the autotrophic mode; decays from 1 to 0 over the run."""
    _check_iter(it, iter_max)
    return 0.5 * (1.0 + np.cos(it / iter_max * np.pi))


def prob_dormancy(rank, ps):
    """Probability that a protozoan routed to dormancy/reproduction goes dormant.

    Grows with rank: the worst member (rank ``ps``) always goes dormant.
    """
    rank = np.asarray(rank)
    if np.any(rank < 1) or np.any(rank > ps):
        raise ParameterError("rank outside [1, ps]")
    out = 0.5 * (1.0 + np.cos((1.0 - rank / ps) * np.pi))
    return float(out) if out.ndim == 0 else out


def proportion_fraction(pf_max: float, u):
    if not 0.0 <= pf_max <= 1.0:
        raise ParameterError("pf_max must lie in [0, 1]")
    return pf_max * u


def foraging_count(rank, ps: int, dim: int):
    """Number of dimensions a rank may move: ``ceil(dim * rank / ps)``."""
    rank = np.asarray(rank, dtype=np.int64)
    return -((-dim * rank) // ps)


def _subset_masks(counts, keys: np.ndarray) -> np.ndarray:
    # the ``count`` smallest keys of a row form a uniform subset without replacement
    pos = np.argsort(np.argsort(keys, axis=-1, kind="stable"), axis=-1, kind="stable")
    return pos < np.asarray(counts)[..., None]


def foraging_mask(rank, ps: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Boolean mask with exactly ``ceil(dim * rank / ps)`` set bits.

    Draws one ``(dim,)`` block of uniform keys per rank.
    """
    counts = foraging_count(rank, ps, dim)
    keys = rng.random(counts.shape + (dim,))
    return _subset_masks(counts, keys)


def reproduction_mask(dim: int, rng: np.random.Generator, size=None) -> np.ndarray:
    """Mask with ``ceil(dim * u)`` set bits for a fresh uniform ``u``.

    Draws ``u`` first, then the ``(dim,)`` key block.
    """
    shape = () if size is None else (size,)
    counts = np.ceil(dim * rng.random(shape)).astype(np.int64)
    keys = rng.random(shape + (dim,))
    return _subset_masks(counts, keys)


def neighbor_weight(fit_a, fit_b):
    """``exp(-|fit_a / (fit_b + eps)|)``, in ``[0, 1]``.

    A zero denominator gives weight 0, or 1 when ``fit_a`` is also zero.
    """
    a = np.asarray(fit_a, dtype=float)
    b = np.asarray(fit_b, dtype=float) + EPS
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        ratio = np.where(a == 0, 0.0, a / b)
    w = np.exp(-np.abs(ratio))
    return float(w) if w.ndim == 0 else w


# ---------------------------------------------------------------- operators --

def _as_ranks(rank, ps: int) -> tuple[np.ndarray, bool]:
    scalar = np.ndim(rank) == 0
    ranks = np.atleast_1d(np.asarray(rank, dtype=np.int64))
    if ranks.size and (ranks.min() < 1 or ranks.max() > ps):
        raise ParameterError("rank outside [1, ps]")
    return ranks, scalar


def _require_sorted(pop: Population) -> None:
    if not pop.sorted:
        raise ContractError("operator needs a population sorted by fitness")


def autotrophic_update(rank, pop: Population, params: ApoParams, sched: ScheduleState,
                       rng: np.random.Generator) -> np.ndarray:
    """Autotrophic foraging: move relative to a random peer plus paired-neighbor drift.

    ``rank`` is 1-based (an int or an array of ints). Draw order for ``m``
    ranks: ``m`` foraging-factor uniforms, ``(m, dim)`` mask keys, ``m``
    peer uniforms, ``(m, np)`` lower-neighbor uniforms, ``(m, np)``
    upper-neighbor uniforms.
    """
    _require_sorted(pop)
    ps, dim, npp = pop.size, pop.dim, params.np_pairs
    ranks, scalar = _as_ranks(rank, ps)
    m = ranks.size
    X, fit = pop.positions, pop.fitness

    f = foraging_factor(sched.iter, params.iter_max, rng.random(m))
    mask = foraging_mask(ranks, ps, dim, rng)
    j = np.floor(rng.random(m) * ps).astype(np.int64)
    u_lo = rng.random((m, npp))
    u_hi = rng.random((m, npp))

    r = ranks[:, None]
    lo = np.where(r == 1, 1, 1 + np.floor(u_lo * (r - 1)).astype(np.int64)) - 1
    hi = np.where(r == ps, ps, r + 1 + np.floor(u_hi * (ps - r)).astype(np.int64)) - 1
    w = neighbor_weight(fit[lo], fit[hi])
    pair = (w[..., None] * (X[lo] - X[hi])).mean(axis=1)

    xi = X[ranks - 1]
    step = f[:, None] * (X[j] - xi) + pair
    new = clamp_to_bounds(xi + step * mask, pop.bounds)
    return new[0] if scalar else new


def heterotrophic_update(rank, pop: Population, params: ApoParams, sched: ScheduleState,
                         rng: np.random.Generator) -> np.ndarray:
    """Heterotrophic foraging: move toward a perturbed nearby point with ordinal neighbors.

    Draw order for ``m`` ranks: ``m`` foraging-factor uniforms, ``(m, dim)``
    mask keys, ``m`` sign uniforms (``< 0.5`` means ``+``), ``(m, dim)``
    perturbation uniforms.
    """
    _require_sorted(pop)
    ps, dim, npp = pop.size, pop.dim, params.np_pairs
    ranks, scalar = _as_ranks(rank, ps)
    m = ranks.size
    X, fit = pop.positions, pop.fitness

    f = foraging_factor(sched.iter, params.iter_max, rng.random(m))
    mask = foraging_mask(ranks, ps, dim, rng)
    sign = np.where(rng.random(m) < 0.5, 1.0, -1.0)
    perturb = rng.random((m, dim))

    xi = X[ranks - 1]
    near = (1.0 + sign[:, None] * perturb * (1.0 - sched.iter / params.iter_max)) * xi

    k = np.arange(1, npp + 1)
    lo = np.maximum(1, ranks[:, None] - k) - 1
    hi = np.minimum(ps, ranks[:, None] + k) - 1
    w = neighbor_weight(fit[lo], fit[hi])
    pair = (w[..., None] * (X[lo] - X[hi])).mean(axis=1)

    step = f[:, None] * (near - xi + pair)
    new = clamp_to_bounds(xi + step * mask, pop.bounds)
    return new[0] if scalar else new


def dormancy_update(bounds: Bounds, rng: np.random.Generator, size=None) -> np.ndarray:
    """A fresh uniform sample in the box (``(dim,)`` uniforms per sample)."""
    shape = () if size is None else (size,)
    return clamp_to_bounds(bounds.lower + rng.random(shape + (bounds.dim,)) * bounds.width,
                           bounds)


def reproduction_update(x, bounds: Bounds, rng: np.random.Generator) -> np.ndarray:
    """Masked random perturbation of ``x`` (a vector or ``(m, dim)`` stack).

    Draw order for ``m`` rows: ``m`` sign uniforms, ``m`` scale uniforms,
    ``m`` mask-count uniforms, ``(m, dim)`` mask keys, ``(m, dim)``
    perturbation uniforms.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    xs = np.atleast_2d(x)
    m, dim = xs.shape
    sign = np.where(rng.random(m) < 0.5, 1.0, -1.0)
    scale = rng.random(m)
    mask = reproduction_mask(dim, rng, size=m)
    perturb = rng.random((m, dim))
    delta = (sign * scale)[:, None] * (bounds.lower + perturb * bounds.width)
    new = clamp_to_bounds(xs + delta * mask, bounds)
    return new[0] if scalar else new


# --------------------------------------------------------------- main loop --

def apo_step(pop: Population, params: ApoParams, sched: ScheduleState, objective: ObjectiveFn,
             rng: np.random.Generator) -> Population:
    """Run one generation in place of ``sched`` and return the next population."""
    ps = params.ps
    if pop.size != ps:
        raise ParameterError(f"population has {pop.size} members, params say {ps}")
    if sched.fes + ps > params.max_fes:
        raise BudgetError(
            f"a generation needs {ps} evaluations but only {params.max_fes - sched.fes} remain"
        )
    pop = sort_population(pop)
    X = pop.positions

    pf = proportion_fraction(params.pf_max, rng.random())
    n_dr = math.ceil(ps * pf)
    in_dr = np.zeros(ps, dtype=bool)
    in_dr[rng.permutation(ps)[:n_dr]] = True
    select = rng.random(ps)

    ranks = np.arange(1, ps + 1)
    dormant = in_dr & (prob_dormancy(ranks, ps) > select)
    reproduce = in_dr & ~dormant
    auto = ~in_dr & (prob_forage_mode(sched.iter, params.iter_max) > select)
    hetero = ~in_dr & ~auto

    new = np.empty_like(X)
    new[dormant] = dormancy_update(pop.bounds, rng, size=int(dormant.sum()))
    new[reproduce] = reproduction_update(X[reproduce], pop.bounds, rng)
    new[auto] = autotrophic_update(ranks[auto], pop, params, sched, rng)
    new[hetero] = heterotrophic_update(ranks[hetero], pop, params, sched, rng)

    counter = EvalCounter(sched.fes)
    new_fit = evaluate_positions(new, objective, counter)
    sched.fes = counter.fes
    sched.iter += 1

    better = new_fit < pop.fitness
    positions = np.where(better[:, None], new, X)
    fitness = np.where(better, new_fit, pop.fitness)
    return Population(positions, fitness, pop.bounds, sorted=False)


def optimize(objective: ObjectiveFn, params: ApoParams, seed: int,
             callback: Optional[Callable[[int, Candidate], None]] = None) -> ApoResult:
    """Minimise ``objective`` within ``params.max_fes`` evaluations.

    The uniform initial population counts as the first iteration. Whole
    generations run while they fit in the budget; a remainder smaller than
    ``ps`` is left unused. ``callback(fes, best)`` fires after the initial
    evaluation and after every generation.
    """
    if params.max_fes < params.ps:
        raise BudgetError("max_fes must cover at least the initial population")
    rng = make_rng(seed)
    bounds = objective.bounds
    sched = ScheduleState()

    X = random_population(bounds, params.ps, rng)
    counter = EvalCounter()
    pop = Population(X, evaluate_positions(X, objective, counter), bounds)
    sched.fes, sched.iter = counter.fes, 1

    trace = [TraceRow(sched.iter, sched.fes, float(pop.fitness.min()), diversity(pop))]
    if callback is not None:
        callback(sched.fes, pop.best())
    while sched.fes + params.ps <= params.max_fes:
        pop = apo_step(pop, params, sched, objective, rng)
        trace.append(TraceRow(sched.iter, sched.fes, float(pop.fitness.min()), diversity(pop)))
        if callback is not None:
            callback(sched.fes, pop.best())
    return ApoResult(pop.best(), trace, sched.fes, pop)
