import numpy as np
import pytest

from protozoa.constraints import (
    PENALTY_CEILING,
    PROBLEMS,
    ConstrainedProblem,
    PenaltyPolicy,
    get_problem,
    is_feasible,
    penalize,
)
from protozoa.core import Bounds

TOLERANCES = {
    "spring": 1e-6,
    "welded_beam": 1e-4,
    "speed_reducer": 1e-2,
    "pressure_vessel": 1e-1,
}


def toy():
    # minimise x + y subject to x + y >= 1 on [0, 1]^2
    return ConstrainedProblem(
        "toy", lambda x: x[..., 0] + x[..., 1],
        lambda x: (1.0 - x[..., 0] - x[..., 1])[..., None],
        Bounds.cube(2, 0, 1), ("x", "y"), np.array([0.8, 0.8]), 1.0,
    )


def test_feasible_point_unpenalised():
    p = toy()
    assert penalize(p)([0.7, 0.6]) == pytest.approx(1.3)


def test_single_violation_expansion():
    p = toy()
    v = 1.0 - 0.2 - 0.3
    assert penalize(p, PenaltyPolicy(1e3))([0.2, 0.3]) == pytest.approx(0.5 + 1e3 * v**2)


def test_grid_argmin_approaches_feasible():
    p = toy()
    g = np.linspace(0, 1, 201)
    X = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
    prev = None
    for lam in (1.0, 1e2, 1e4, 1e8):
        vals = penalize(p, PenaltyPolicy(lam)).batch(X)
        best = X[np.argmin(vals)]
        viol = max(0.0, 1.0 - best.sum())
        if prev is not None:
            assert viol <= prev
        prev = viol
    assert prev <= 1e-9


def test_penalty_never_inf():
    p = get_problem("three_bar_truss")
    v = penalize(p)([0.0, 0.0])
    assert np.isfinite(v) and v == PENALTY_CEILING


def test_policy_validation():
    with pytest.raises(ValueError):
        PenaltyPolicy(0)
    with pytest.raises(ValueError):
        PenaltyPolicy(1.0, 0.5)


@pytest.mark.parametrize("name", list(PROBLEMS))
def test_witness_strictly_feasible(name):
    p = get_problem(name)
    assert is_feasible(p, p.witness)
    assert p.bounds.contains(p.witness)
    assert penalize(p)(p.witness) == pytest.approx(float(p.objective(p.witness)))


@pytest.mark.parametrize("name", list(PROBLEMS))
def test_reference_point_feasible_loose(name):
    p = get_problem(name)
    assert is_feasible(p, p.reference_point, tol=1e-4)


@pytest.mark.parametrize("name", list(TOLERANCES))
def test_reference_objective(name):
    p = get_problem(name)
    assert float(p.objective(p.reference_point)) == pytest.approx(p.reference_optimum,
                                                                 abs=TOLERANCES[name])


def test_spring_reference_feasible_default_tol():
    p = get_problem("spring")
    assert is_feasible(p, [0.0516521, 0.355829, 11.3413])


def test_violation_by_one_is_infeasible():
    p = get_problem("pressure_vessel")
    x = p.witness.copy()
    x[3] = 480.0  # length/240 - 1 = 1
    assert not is_feasible(p, x)


def test_vectorised_constraints():
    for name in PROBLEMS:
        p = get_problem(name)
        X = np.stack([p.witness, p.reference_point])
        assert p.g(X).shape[0] == 2
        np.testing.assert_allclose(p.g(X)[0], p.g(p.witness))


def test_speed_reducer_rounds_teeth():
    p = get_problem("speed_reducer")
    x = p.reference_point.copy()
    y = x.copy()
    y[2] = 17.3
    assert p.objective(x) == p.objective(y)


def test_unknown_problem():
    with pytest.raises(KeyError, match="spring"):
        get_problem("foo")
