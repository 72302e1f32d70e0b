import logging

import numpy as np
import pytest

from rkmor.errors import DeadlockNoCandidate
from rkmor.greedy import (GreedyRun, arksm, extreme_shift_bounds, hinf_sweep, irka_baseline,
                          irka_initial_shifts, two_sided_greedy)
from rkmor.krylov import ShiftSet, reduce
from rkmor.model import StateSpaceSystem, gen_test_system, make_grid
from rkmor.remainder import error_direct, transfer_eval


@pytest.fixture(autouse=True)
def quiet_saturation(caplog):
    caplog.set_level(logging.ERROR)


def dense_extremes(sys):
    lam = np.linalg.eigvals(np.linalg.solve(sys.E, -sys.A))
    return lam[np.argmin(abs(lam))], lam[np.argmax(abs(lam))]


def test_bounds_diagonal():
    s_min, s_max = extreme_shift_bounds(gen_test_system('diagonal', 2, eigenvalues=[-1, -10]))
    assert s_min == pytest.approx(1) and s_max == pytest.approx(10)


def test_bounds_scalar_spectrum():
    sys = StateSpaceSystem(-np.eye(3), None, np.ones(3), np.ones(3))
    assert extreme_shift_bounds(sys) == pytest.approx((1, 1))


def test_bounds_laplacian_iterative_path():
    sys = gen_test_system('laplacian_1d', 100)
    ref = dense_extremes(sys)
    got = extreme_shift_bounds(sys, dense_limit=10)
    assert abs(got[0] - ref[0]) <= 1e-6 * abs(ref[0])
    assert abs(got[1] - ref[1]) <= 1e-6 * abs(ref[1])


def test_bounds_descriptor():
    sys = gen_test_system('random_stable', 40, 3, descriptor=True)
    ref = dense_extremes(sys)
    for limit in (2000, 10):
        got = extreme_shift_bounds(sys, dense_limit=limit)
        assert abs(got[0] - ref[0]) <= 1e-6 * abs(ref[0])
        assert abs(got[1] - ref[1]) <= 1e-6 * abs(ref[1])


def test_arksm_seeds_with_extreme_shifts():
    sys = gen_test_system('random_stable', 40, 1)
    run = arksm(sys, 6)
    s_min, s_max = extreme_shift_bounds(sys)
    assert run.shifts_history[:2] == (s_min, s_max)
    assert run.solve_count == 6 == run.final_model.order
    assert run.algorithm == 'arksm' and isinstance(run, GreedyRun)


@pytest.mark.parametrize('seed', range(10))
def test_arksm_shifts_distinct_and_not_ritz(seed):
    sys = gen_test_system('random_stable', 40, seed)
    run = arksm(sys, 8)
    s = np.array(run.shifts_history)
    gaps = np.abs(s[:, None] - s[None, :]) + np.eye(s.size)
    assert gaps.min() > 0
    for k in range(2, len(run.models)):
        assert np.min(np.abs(run.models[k - 1].ritz - s[k])) > 0


def test_arksm_exact_for_full_order():
    sys = gen_test_system('diagonal', 2)
    grid = make_grid(-3, 5, 100)
    run = arksm(sys, 2, eval_grid=grid)
    assert run.error_history[-1] <= 1e-8
    assert hinf_sweep(sys, run.final_model, grid).max_abs_error <= 1e-8


def test_arksm_requires_order_two():
    with pytest.raises(ValueError):
        arksm(gen_test_system('diagonal', 3), 1)


def test_arksm_laplacian_makes_progress():
    sys = gen_test_system('laplacian_1d', 100)
    grid = make_grid(-3, 5, 200)
    run = arksm(sys, 12, eval_grid=grid)
    assert run.error_history[-1] < 1e-3 * run.error_history[1]


@pytest.mark.parametrize('option', [1, 2, 3])
def test_two_sided_structure(option):
    sys = gen_test_system('random_stable', 40, 2)
    run = two_sided_greedy(sys, -2, 2, 40, 6, option)
    grid = make_grid(-2, 2, 40).points
    s_max = extreme_shift_bounds(sys)[1]
    assert run.shifts_history[0][0] == pytest.approx(1j * abs(s_max) / 10)
    for s, t in run.shifts_history:
        assert t == np.conj(s)
    assert all(s in grid for s, _ in run.shifts_history[1:])
    assert run.solve_count == 2 * run.final_model.order == 12
    assert run.algorithm == f'two_sided_o{option}'
    rm = run.final_model
    for s, t in run.shifts_history:
        for z in (s, t):
            e = error_direct(sys, rm, [z]).e_direct[0]
            assert abs(e) <= 1e-7 * (1 + abs(transfer_eval(sys, z)))


def test_two_sided_deterministic():
    sys = gen_test_system('random_stable', 30, 4, descriptor=True)
    a = two_sided_greedy(sys, -2, 3, 60, 7, 2)
    b = two_sided_greedy(sys, -2, 3, 60, 7, 2)
    assert a.shifts_history == b.shifts_history


def test_two_sided_deadlock_when_grid_exhausted():
    sys = gen_test_system('random_stable', 30, 0)
    # 3 candidates; the first shift is not on the grid, so at most 4 pairs fit
    with pytest.raises(DeadlockNoCandidate):
        two_sided_greedy(sys, 0, 0, 1, 6, 1)


def test_two_sided_max_error_trend():
    # l=10 is not worse than l=5 for most seeds (empirical, not guaranteed)
    grid = make_grid(-3, 5, 200)
    wins = 0
    for seed in range(10):
        sys = gen_test_system('random_stable', 100, seed)
        run = two_sided_greedy(sys, -3, 5, 200, 10, 2, eval_grid=grid)
        wins += run.error_history[9] <= run.error_history[4]
    assert wins >= 6


def test_hinf_sweep_exact_and_brute_force():
    sys = gen_test_system('random_stable', 20, 5)
    rm = reduce(sys, ShiftSet([1.0, 2j, -2j], [0.5, 1j, -1j]))
    grid = make_grid(-2, 3, 60)
    curve = hinf_sweep(sys, rm, grid)
    brute = max(abs(transfer_eval(sys, z) - rm.cr.conj()
                    @ np.linalg.solve(z * rm.Er - rm.Ar, rm.br)) for z in grid.points)
    assert curve.max_abs_error == pytest.approx(brute, rel=1e-8)
    sub = make_grid(-2, 3, 60)
    sub_pts = sub.points[::3]
    assert hinf_sweep(sys, rm, sub_pts).max_abs_error <= curve.max_abs_error


def test_irka_scalar_fixed_point():
    sys = StateSpaceSystem([[-2.0]], None, [1.0], [1.0])
    run = irka_baseline(sys, [1.0])
    assert run.metadata['converged'] and run.metadata['iterations'] <= 2
    assert run.shifts_history[-1][0] == pytest.approx(2.0)
    assert run.solve_count == 2 * run.metadata['iterations'] * 1


def test_irka_fixed_point_converges_in_one_iteration():
    sys = gen_test_system('random_stable', 30, 1)
    first = irka_baseline(sys, irka_initial_shifts(extreme_shift_bounds(sys), 4))
    assert first.metadata['converged']
    again = irka_baseline(sys, first.shifts_history[-1])
    assert again.metadata['converged'] and again.metadata['iterations'] == 1


def test_irka_rejects_non_conjugate_shifts():
    with pytest.raises(ValueError):
        irka_baseline(gen_test_system('diagonal', 3), [1 + 1j])


def test_irka_iteration_cap():
    sys = gen_test_system('random_stable', 30, 2)
    run = irka_baseline(sys, irka_initial_shifts(extreme_shift_bounds(sys), 6), max_iter=3,
                        tol=0.0)
    assert run.metadata['iterations'] == 3 and not run.metadata['converged']
    assert run.solve_count == 2 * 3 * 6


def test_irka_singular_shift_is_perturbed():
    sys = gen_test_system('diagonal', 3, eigenvalues=[-1.0, 2.0, -3.0])
    # 2 is an eigenvalue of the pencil: the first basis build fails
    run = irka_baseline(sys, [2.0], max_iter=5)
    assert run.metadata['perturbed'] and run.metadata['perturbed'][0][0] == 1
