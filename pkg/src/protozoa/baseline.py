"""Uniform random search, the reference point for the optimizer's structure."""

from __future__ import annotations

import numpy as np

from .apo import ApoResult, TraceRow
from .core import Candidate, ObjectiveFn, ParameterError, evaluate_positions, make_rng
from .metrics import diversity


def random_search(objective: ObjectiveFn, max_fes: int, seed: int, batch: int = 100,
                  callback=None) -> ApoResult:
    """Spend exactly ``max_fes`` evaluations on independent uniform samples.

    Samples are drawn and scored ``batch`` at a time; each batch adds one
    trace row so curves line up with an optimizer of population ``batch``.
    """
    if max_fes < 1:
        raise ParameterError("max_fes must be positive")
    rng = make_rng(seed)
    b = objective.bounds
    best_x, best_f = None, np.inf
    trace, fes, it = [], 0, 0
    while fes < max_fes:
        m = min(batch, max_fes - fes)
        xs = b.lower + rng.random((m, b.dim)) * b.width
        fs = evaluate_positions(xs, objective)
        fes += m
        it += 1
        i = int(np.argmin(fs))
        if fs[i] < best_f:
            best_x, best_f = xs[i].copy(), float(fs[i])
        trace.append(TraceRow(it, fes, best_f, diversity(xs)))
        if callback is not None:
            callback(fes, Candidate(best_x.copy(), best_f))
    return ApoResult(Candidate(best_x, best_f), trace, fes)
