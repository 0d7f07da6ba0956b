"""Penalty-based constraint handling and five classic engineering design problems.

Constraints are written ``g(x) <= 0`` and normalised by their limits so a
feasibility tolerance means the same thing on every problem. Objectives and
constraints accept ``(..., dim)`` arrays.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import Bounds, ObjectiveFn

PENALTY_CEILING = sys.float_info.max


@dataclass(frozen=True)
class PenaltyPolicy:
    coefficient: float = 1e10
    exponent: float = 2.0

    def __post_init__(self):
        if self.coefficient <= 0:
            raise ValueError("penalty coefficient must be positive")
        if self.exponent < 1:
            raise ValueError("penalty exponent must be at least 1")


@dataclass(frozen=True)
class ConstrainedProblem:
    name: str
    objective: Callable
    constraints: Callable  # x -> array (..., n_constraints)
    bounds: Bounds
    variables: Sequence[str]
    witness: np.ndarray
    reference_optimum: float
    reference_point: np.ndarray = field(default=None)

    @property
    def dim(self) -> int:
        return self.bounds.dim

    def g(self, x) -> np.ndarray:
        return np.asarray(self.constraints(np.asarray(x, dtype=float)), dtype=float)

    def violation(self, x) -> np.ndarray:
        return np.maximum(self.g(x), 0.0)


def _safe_div(a, b):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.divide(a, b)
    return np.where(b == 0, np.inf, out)


def penalize(problem: ConstrainedProblem, policy: PenaltyPolicy = PenaltyPolicy()) -> ObjectiveFn:
    """Fold constraints into the objective: ``f + lambda * sum(max(0, g)^p)``.

    Values that overflow are capped at the largest finite float so the
    optimizer never sees ``inf`` or ``nan``.
    """
    lam, p = policy.coefficient, policy.exponent

    def penalized(x):
        f = np.asarray(problem.objective(x), dtype=float)
        v = problem.violation(x)
        with np.errstate(over="ignore", invalid="ignore"):
            total = f + lam * np.sum(v**p, axis=-1)
        return np.where(np.isfinite(total), total, PENALTY_CEILING)

    return ObjectiveFn(penalized, problem.bounds, problem.name, vectorized=True)


def is_feasible(problem: ConstrainedProblem, x, tol: float = 1e-6) -> bool:
    return bool(np.max(problem.g(x)) <= tol)


# ------------------------------------------------------------------ spring --

def _spring_f(x):
    d, D, N = x[..., 0], x[..., 1], x[..., 2]
    return (N + 2.0) * D * d**2


def _spring_g(x):
    d, D, N = x[..., 0], x[..., 1], x[..., 2]
    g1 = 1.0 - D**3 * N / (71785.0 * d**4)
    g2 = _safe_div(4.0 * D**2 - d * D, 12566.0 * (D * d**3 - d**4)) + 1.0 / (5108.0 * d**2) - 1.0
    g3 = 1.0 - 140.45 * d / (D**2 * N)
    g4 = (D + d) / 1.5 - 1.0
    return np.stack([g1, g2, g3, g4], axis=-1)


def spring_problem() -> ConstrainedProblem:
    """Tension/compression spring: wire diameter d, coil diameter D, active coils N."""
    return ConstrainedProblem(
        "spring", _spring_f, _spring_g,
        Bounds([0.05, 0.25, 2.0], [2.0, 1.3, 15.0]),
        ("d", "D", "N"),
        witness=np.array([0.06, 0.5, 10.0]),
        reference_optimum=0.01266529,
        reference_point=np.array([0.0516521, 0.355829, 11.3413]),
    )


# --------------------------------------------------------- pressure vessel --

def _vessel_f(x):
    ts, th, r, l = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
    return 0.6224 * ts * r * l + 1.7781 * th * r**2 + 3.1661 * ts**2 * l + 19.84 * ts**2 * r


def _vessel_g(x):
    ts, th, r, l = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
    g1 = -ts + 0.0193 * r
    g2 = -th + 0.00954 * r
    g3 = 1.0 - (np.pi * r**2 * l + 4.0 / 3.0 * np.pi * r**3) / 1296000.0
    g4 = l / 240.0 - 1.0
    return np.stack([g1, g2, g3, g4], axis=-1)


def pressure_vessel_problem() -> ConstrainedProblem:
    """Cylindrical vessel: shell thickness Ts, head thickness Th, radius R, length L."""
    return ConstrainedProblem(
        "pressure_vessel", _vessel_f, _vessel_g,
        Bounds([0.0, 0.0, 10.0, 10.0], [99.0, 99.0, 200.0, 200.0]),
        ("Ts", "Th", "R", "L"),
        witness=np.array([1.0, 0.5, 50.0, 120.0]),
        reference_optimum=5887.614,
        reference_point=np.array([0.77916, 0.38516, 40.3707, 199.3144]),
    )


# ------------------------------------------------------------- welded beam --

_P, _L, _E, _G = 6000.0, 14.0, 30e6, 12e6
_TAU_MAX, _SIGMA_MAX, _DELTA_MAX = 13600.0, 30000.0, 0.25


def _beam_f(x):
    h, l, t, b = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
    return 1.10471 * h**2 * l + 0.04811 * t * b * (14.0 + l)


def _beam_g(x):
    h, l, t, b = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
    tau1 = _P / (np.sqrt(2.0) * h * l)
    moment = _P * (_L + l / 2.0)
    radius = np.sqrt(l**2 / 4.0 + ((h + t) / 2.0) ** 2)
    inertia = 2.0 * (np.sqrt(2.0) * h * l * (l**2 / 12.0 + ((h + t) / 2.0) ** 2))
    tau2 = moment * radius / inertia
    tau = np.sqrt(tau1**2 + 2.0 * tau1 * tau2 * l / (2.0 * radius) + tau2**2)
    sigma = 6.0 * _P * _L / (b * t**2)
    delta = 4.0 * _P * _L**3 / (_E * t**3 * b)
    p_c = (4.013 * _E * np.sqrt(t**2 * b**6 / 36.0) / _L**2
           * (1.0 - t / (2.0 * _L) * np.sqrt(_E / (4.0 * _G))))
    g1 = tau / _TAU_MAX - 1.0
    g2 = sigma / _SIGMA_MAX - 1.0
    g3 = h - b
    g4 = (0.10471 * h**2 + 0.04811 * t * b * (14.0 + l)) / 5.0 - 1.0
    g5 = 0.125 - h
    g6 = delta / _DELTA_MAX - 1.0
    g7 = 1.0 - p_c / _P
    return np.stack([g1, g2, g3, g4, g5, g6, g7], axis=-1)


def welded_beam_problem() -> ConstrainedProblem:
    """Welded beam: weld thickness h, weld length l, bar height t, bar thickness b."""
    return ConstrainedProblem(
        "welded_beam", _beam_f, _beam_g,
        Bounds([0.1, 0.1, 0.1, 0.1], [2.0, 10.0, 10.0, 2.0]),
        ("h", "l", "t", "b"),
        witness=np.array([0.5, 3.0, 9.0, 0.6]),
        reference_optimum=1.724854,
        reference_point=np.array([0.20573, 3.4705, 9.0366, 0.20573]),
    )


# ----------------------------------------------------------- speed reducer --

def _teeth(x):
    # tooth count is an integer; the search treats it as continuous
    return np.round(x[..., 2])


def _reducer_f(x):
    x1, x2, x4, x5, x6, x7 = (x[..., i] for i in (0, 1, 3, 4, 5, 6))
    x3 = _teeth(x)
    return (0.7854 * x1 * x2**2 * (3.3333 * x3**2 + 14.9334 * x3 - 43.0934)
            - 1.508 * x1 * (x6**2 + x7**2)
            + 7.4777 * (x6**3 + x7**3)
            + 0.7854 * (x4 * x6**2 + x5 * x7**2))


def _reducer_g(x):
    x1, x2, x4, x5, x6, x7 = (x[..., i] for i in (0, 1, 3, 4, 5, 6))
    x3 = _teeth(x)
    g = [
        27.0 / (x1 * x2**2 * x3) - 1.0,
        397.5 / (x1 * x2**2 * x3**2) - 1.0,
        1.93 * x4**3 / (x2 * x3 * x6**4) - 1.0,
        1.93 * x5**3 / (x2 * x3 * x7**4) - 1.0,
        np.sqrt((745.0 * x4 / (x2 * x3)) ** 2 + 16.9e6) / (110.0 * x6**3) - 1.0,
        np.sqrt((745.0 * x5 / (x2 * x3)) ** 2 + 157.5e6) / (85.0 * x7**3) - 1.0,
        x2 * x3 / 40.0 - 1.0,
        5.0 * x2 / x1 - 1.0,
        x1 / (12.0 * x2) - 1.0,
        (1.5 * x6 + 1.9) / x4 - 1.0,
        (1.1 * x7 + 1.9) / x5 - 1.0,
    ]
    return np.stack(g, axis=-1)


def speed_reducer_problem() -> ConstrainedProblem:
    """Gear-box weight: face width, module, pinion teeth, two shaft lengths, two shaft diameters."""
    return ConstrainedProblem(
        "speed_reducer", _reducer_f, _reducer_g,
        Bounds([2.6, 0.7, 17.0, 7.3, 7.3, 2.9, 5.0], [3.6, 0.8, 28.0, 8.3, 8.3, 3.9, 5.5]),
        ("x1", "x2", "x3", "x4", "x5", "x6", "x7"),
        witness=np.array([3.55, 0.7, 17.0, 7.5, 8.0, 3.5, 5.4]),
        reference_optimum=2994.471,
        reference_point=np.array([3.5, 0.7, 17.0, 7.3, 7.71532, 3.35021, 5.28665]),
    )


# ---------------------------------------------------------- three-bar truss --

_TRUSS_LEN, _TRUSS_P, _TRUSS_SIGMA = 100.0, 2.0, 2.0


def _truss_f(x):
    a1, a2 = x[..., 0], x[..., 1]
    return (2.0 * np.sqrt(2.0) * a1 + a2) * _TRUSS_LEN


def _truss_g(x):
    a1, a2 = x[..., 0], x[..., 1]
    s2 = np.sqrt(2.0)
    den = s2 * a1**2 + 2.0 * a1 * a2
    g1 = _safe_div(s2 * a1 + a2, den) * _TRUSS_P / _TRUSS_SIGMA - 1.0
    g2 = _safe_div(a2, den) * _TRUSS_P / _TRUSS_SIGMA - 1.0
    g3 = _safe_div(1.0, a1 + s2 * a2) * _TRUSS_P / _TRUSS_SIGMA - 1.0
    return np.stack([g1, g2, g3], axis=-1)


def three_bar_truss_problem() -> ConstrainedProblem:
    """Three-bar truss volume: cross sections A1 (outer bars) and A2 (middle bar)."""
    return ConstrainedProblem(
        "three_bar_truss", _truss_f, _truss_g,
        Bounds([0.0, 0.0], [1.0, 1.0]),
        ("A1", "A2"),
        witness=np.array([0.9, 0.5]),
        reference_optimum=263.8958,
        reference_point=np.array([0.78868, 0.40825]),
    )


PROBLEMS: dict[str, Callable[[], ConstrainedProblem]] = {
    "spring": spring_problem,
    "pressure_vessel": pressure_vessel_problem,
    "welded_beam": welded_beam_problem,
    "speed_reducer": speed_reducer_problem,
    "three_bar_truss": three_bar_truss_problem,
}


def get_problem(name: str) -> ConstrainedProblem:
    try:
        return PROBLEMS[name]()
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; valid: {', '.join(PROBLEMS)}") from None
