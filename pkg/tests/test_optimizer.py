import json

import numpy as np
import pytest

from polysideband.effective import constraint_residuals, full_constraint_residuals
from polysideband.functionals import state_infidelity
from polysideband.optimizer import (
    FEASIBLE_TOL,
    OptimizationProblem,
    OptimizationResult,
    _Model,
    solve,
    solve_at_delta,
)

# narrow scan keeps the suite quick; the optimum sits near 0.25 for n=3
QUICK = OptimizationProblem(n=3, delta_lo=0.2, delta_hi=0.3, delta_step=0.02, refine_iters=8, restarts=1)


@pytest.fixture(scope="module")
def quick_result():
    return solve(QUICK)


def test_solution_is_feasible_and_stationary(quick_result):
    res = quick_result
    spec = res.spec(QUICK)
    assert res.feasible
    assert constraint_residuals(spec).max_abs < FEASIBLE_TOL
    assert res.kkt_norm < 1e-8
    assert res.objective_value == pytest.approx(state_infidelity(spec).value, rel=1e-12)
    assert res.objective_value < state_infidelity(QUICK.spec(0.2, QUICK.initial_guess())).value


def test_solve_is_deterministic(quick_result):
    again = solve(QUICK)
    assert again.delta_opt == quick_result.delta_opt
    assert np.array_equal(again.f_opt, quick_result.f_opt)


def test_optimum_is_a_fixed_point(quick_result):
    res = solve_at_delta(QUICK.replace(restarts=0), quick_result.delta_opt, x0=quick_result.f_opt)
    assert np.allclose(res.f_opt, quick_result.f_opt, atol=1e-6)
    assert res.objective_value == pytest.approx(quick_result.objective_value, rel=1e-9)


def test_delta_profile_covers_the_scan(quick_result):
    deltas = [d for d, _ in quick_result.delta_profile]
    assert min(deltas) == pytest.approx(0.2) and max(deltas) == pytest.approx(0.3)
    assert deltas == sorted(deltas)


def test_model_gradients_match_finite_differences():
    model = _Model(QUICK, 0.25)
    f = QUICK.initial_guess() + np.random.default_rng(1).normal(scale=0.3, size=7)
    h = 1e-6
    E = np.eye(7)
    g_fd = np.array([(model.objective(f + h * e)[0] - model.objective(f - h * e)[0]) / (2 * h) for e in E])
    J_fd = np.column_stack([(model.residuals(f + h * e) - model.residuals(f - h * e)) / (2 * h) for e in E])
    assert np.allclose(model.objective(f)[1], g_fd, rtol=1e-6, atol=1e-12)
    assert np.allclose(model.jacobian(f), J_fd, rtol=1e-6, atol=1e-12)


def test_single_tone_is_infeasible_but_lands_on_the_lamb_shift_rule():
    res = solve(OptimizationProblem(n=0, restarts=0, delta_lo=0.1, delta_hi=0.3))
    assert not res.feasible
    assert res.delta_opt == pytest.approx(0.2, abs=0.02)


def test_seven_constraint_solution_satisfies_all_rows():
    problem = OptimizationProblem(n=5, constraints="seven", delta_lo=0.22, delta_hi=0.24, delta_step=0.01,
                                  refine_iters=4, restarts=2)
    res = solve(problem)
    assert res.feasible
    assert full_constraint_residuals(res.spec(problem)).max_abs < FEASIBLE_TOL


def test_problem_serialization():
    data = QUICK.to_dict()
    assert data["schema"] == 1
    assert OptimizationProblem.from_dict(json.loads(json.dumps(data))) == QUICK
    with pytest.raises(KeyError):
        OptimizationProblem.from_dict({"n": 3, "tones": 4})
    with pytest.raises(ValueError):
        OptimizationProblem(objective="fidelity")
    with pytest.raises(ValueError):
        OptimizationProblem(constraints="six")


def test_result_roundtrip(quick_result, tmp_path):
    path = tmp_path / "r.json"
    path.write_text(json.dumps(quick_result.to_dict()))
    back = OptimizationResult.load(path)
    assert back.delta_opt == quick_result.delta_opt
    assert np.array_equal(back.f_opt, quick_result.f_opt)
    assert back.feasible
