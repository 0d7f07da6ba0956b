"""Run analysis: population diversity, stability accounting and rank statistics."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .core import DimensionError, Population


# ---------------------------------------------------------------- diversity --

def diversity(pop) -> float:
    """Dimension-wise diversity: mean absolute deviation from the per-dimension median.

    Accepts a :class:`Population` or an ``(ps, dim)`` array.
    """
    x = pop.positions if isinstance(pop, Population) else np.asarray(pop, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1:
        raise DimensionError("diversity needs an (ps, dim) array with ps >= 1")
    med = np.median(x, axis=0)
    return float(np.abs(x - med).mean())


def explore_exploit_rates(div: float, div_max: float) -> tuple[float, float]:
    """Return ``(err, eir)``; a population that was never diverse counts as pure exploitation."""
    if div_max <= 0.0:
        warnings.warn("maximum diversity is zero; reporting err=0, eir=1", RuntimeWarning)
        return 0.0, 1.0
    err = div / div_max
    return err, 1.0 - err


@dataclass
class DiversityTrace:
    div: np.ndarray
    div_max: np.ndarray
    err: np.ndarray
    eir: np.ndarray


def diversity_trace(divs: Sequence[float]) -> DiversityTrace:
    """Exploration/exploitation rates against the running maximum diversity."""
    div = np.asarray(divs, dtype=float)
    div_max = np.maximum.accumulate(div) if div.size else div.copy()
    err = np.zeros_like(div)
    nz = div_max > 0
    err[nz] = div[nz] / div_max[nz]
    eir = 1.0 - err
    return DiversityTrace(div, div_max, err, eir)


# ---------------------------------------------------------------- stability --

@dataclass
class RunRecord:
    success: bool
    fes_to_feasible: Optional[int] = None
    duration_seconds: float = 0.0

    def __post_init__(self):
        if self.success != (self.fes_to_feasible is not None):
            raise ValueError("fes_to_feasible must be given exactly when the run succeeded")


@dataclass
class StabilitySummary:
    sr: float
    afes: Optional[float]
    acds: Optional[float]
    successes: int
    runs: int


def stability_summary(records: Sequence[RunRecord]) -> StabilitySummary:
    """Success rate in percent plus mean evaluations and durations of successful runs."""
    runs = len(records)
    if runs < 1:
        raise ValueError("need at least one run record")
    ok = [r for r in records if r.success]
    sr = 100.0 * len(ok) / runs
    if not ok:
        return StabilitySummary(sr, None, None, 0, runs)
    afes = sum(r.fes_to_feasible for r in ok) / len(ok)
    acds = sum(r.duration_seconds for r in ok) / len(ok)
    return StabilitySummary(sr, afes, acds, len(ok), runs)


# ----------------------------------------------------------------- friedman --

@dataclass
class FriedmanResult:
    labels: list
    per_problem_ranks: np.ndarray
    mean_ranks: np.ndarray
    ranking: np.ndarray


def friedman_mean_ranks(matrix, labels: Optional[Sequence[str]] = None) -> FriedmanResult:
    """Rank algorithms (columns) within each problem (row), lower value is better.

    Ties get average ranks inside a row; the final ordering uses competition
    ranking so equal mean ranks share a place.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[1] < 2 or m.shape[0] < 1:
        raise DimensionError("need a (problems, algorithms) matrix with >= 2 algorithms")
    if np.isnan(m).any():
        raise ValueError("result matrix has missing entries")
    ranks = np.vstack([rankdata(row, method="average") for row in m])
    mean = ranks.mean(axis=0)
    ranking = rankdata(np.round(mean, 12), method="min").astype(int)
    if labels is None:
        labels = [f"alg{j + 1}" for j in range(m.shape[1])]
    return FriedmanResult(list(labels), ranks, mean, ranking)


# ----------------------------------------------------------------- wilcoxon --

@dataclass
class WilcoxonResult:
    r_plus: float
    r_minus: float
    p_value: float
    verdict: str
    n: int
    method: str


def _signed_ranks(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionError("paired samples must be 1-D and of equal length")
    d = a - b
    d = d[d != 0]
    return rankdata(np.abs(d), method="average"), np.sign(d)


def exact_p_value(ranks, r_plus: float) -> float:
    """Two-sided p-value by enumerating every sign assignment of ``ranks``."""
    ranks = np.asarray(ranks, dtype=float)
    n = ranks.size
    if n == 0:
        return 1.0
    total = ranks.sum()
    centre = total / 2.0
    observed = abs(r_plus - centre)
    signs = np.array(list(itertools.product((0.0, 1.0), repeat=n)))
    sums = signs @ ranks
    extreme = np.abs(sums - centre) >= observed - 1e-9
    return float(extreme.mean())


def normal_p_value(ranks, r_plus: float) -> float:
    """Two-sided normal approximation with tie-corrected variance and continuity correction."""
    ranks = np.asarray(ranks, dtype=float)
    n = ranks.size
    if n == 0:
        return 1.0
    mean = n * (n + 1) / 4.0
    _, counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(counts**3 - counts) / 48.0
    if var <= 0:
        return 1.0
    z = max(abs(r_plus - mean) - 0.5, 0.0) / math.sqrt(var)
    return float(min(1.0, math.erfc(z / math.sqrt(2.0))))


def wilcoxon_signed_rank(a, b, alpha: float = 0.05, exact_max_n: int = 12) -> WilcoxonResult:
    """Paired signed-rank test of ``a`` against ``b`` for minimisation results.

    Differences are ``a - b``; ``r_plus`` sums the ranks where ``a`` is larger.
    The verdict is from ``a``'s point of view: ``"win"`` when ``a`` is
    significantly smaller. Exact enumeration is used up to ``exact_max_n``
    non-zero pairs, the normal approximation above.
    """
    ranks, signs = _signed_ranks(a, b)
    n = ranks.size
    r_plus = float(ranks[signs > 0].sum())
    r_minus = float(ranks[signs < 0].sum())
    if n <= exact_max_n:
        p, method = exact_p_value(ranks, r_plus), "exact"
    else:
        p, method = normal_p_value(ranks, r_plus), "normal"
    if n < 5:
        warnings.warn(f"only {n} non-zero paired differences; verdict forced to draw", RuntimeWarning)
        return WilcoxonResult(r_plus, r_minus, p, "draw", n, method)
    verdict = "draw"
    if p < alpha:
        verdict = "win" if r_minus > r_plus else "loss"
    return WilcoxonResult(r_plus, r_minus, p, verdict, n, method)
