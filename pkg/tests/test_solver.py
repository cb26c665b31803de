import math

import numpy as np
import pytest
import scipy.optimize
from hypothesis import given, settings, strategies as st

from ama import solver
from ama.solver import ConvexSubproblem, Objective, SolveOptions


def _ball_problem(x0, c=(1.0, 0.0)):
    return ConvexSubproblem(2, Objective(2, linear=c), [solver.norm_ball(2, [[0, 1]], radius=1.0)], x0)


def test_unconstrained_quadratic():
    p = ConvexSubproblem(2, Objective(2, quad_idx=[[0, 1]], quad_center=[[0, 0]], quad_rho=2.0), [], [1.0, 1.0])
    rep = solver.solve(p)
    assert rep.status == solver.OPTIMAL
    np.testing.assert_allclose(rep.x, 0.0, atol=1e-9)
    assert rep.value == pytest.approx(0.0, abs=1e-12)


def test_norm_ball_support_point():
    rep = solver.solve(_ball_problem([0.0, 0.0]))
    assert rep.status == solver.OPTIMAL
    np.testing.assert_allclose(rep.x, [1.0, 0.0], atol=1e-6)
    assert rep.value == pytest.approx(1.0, abs=1e-6)
    assert rep.violation <= 1e-8


def test_exponential_constraint_against_golden_section():
    p = ConvexSubproblem(1, Objective(1, quad_idx=[[0]], quad_center=[[3.0]], quad_rho=2.0),
                         [solver.exponential(1, [0], None, [5.0])], [0.0])
    rep = solver.solve(p)
    # oracle: bounded 1-D search of the objective over the feasible interval
    upper = scipy.optimize.brentq(lambda x: math.exp(x) - 5.0, 0.0, 3.0, xtol=1e-15)
    ref = scipy.optimize.minimize_scalar(lambda x: (x - 3.0) ** 2, bounds=(-5.0, upper),
                                         method="bounded", options={"xatol": 1e-10})
    x_ref = ref.x
    assert rep.status == solver.OPTIMAL
    assert rep.x[0] == pytest.approx(x_ref, abs=1e-6)
    assert rep.x[0] == pytest.approx(math.log(5.0), abs=1e-6)
    assert all(b >= a for a, b in zip(rep.history, rep.history[1:]))


def test_infeasible_start_is_reported():
    rep = solver.solve(_ball_problem([2.0, 0.0]))
    assert rep.status == solver.INFEASIBLE_START
    np.testing.assert_array_equal(rep.x, [2.0, 0.0])


def test_pinned_coordinates_stay_fixed():
    p = ConvexSubproblem(2, Objective(2, linear=[1.0, 1.0]), [solver.norm_ball(2, [[0, 1]], radius=1.0)],
                         [0.0, 0.0], fixed_idx=[1], fixed_val=[0.6])
    rep = solver.solve(p)
    assert rep.x[1] == 0.6
    assert rep.x[0] == pytest.approx(0.8, abs=1e-6)


def test_norm_sum_epigraph():
    # maximize -(|x - 1| + |x + 1|) written with an epigraph variable
    A = np.array([[0.0, -1.0]])
    blk = solver.norm_sum(2, A, [0.0], [0, 0], [[0], [0]], [[1.0], [-1.0]], [1.0, 1.0])
    p = ConvexSubproblem(2, Objective(2, linear=[0.0, -1.0]), [blk], [0.3, 5.0])
    rep = solver.solve(p)
    assert rep.value == pytest.approx(-2.0, abs=1e-6)
    assert -1.0 - 1e-6 <= rep.x[0] <= 1.0 + 1e-6


def test_line_search_interior_ascent():
    assert solver.line_search_feasible(_ball_problem([0.0, 0.0]), np.zeros(2), np.array([1.0, 0.0])) > 0


def test_line_search_at_maximizer_and_boundary():
    p = _ball_problem([1.0, 0.0])
    x = np.array([1.0, 0.0])
    assert solver.line_search_feasible(p, x, np.array([0.0, 1.0])) == 0.0
    # oracle: bisection for the largest feasible step along d, which is zero on the boundary
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if np.linalg.norm(x + mid * np.array([1.0, 0.0])) <= 1.0 else (lo, mid)
    assert lo < 1e-15
    assert solver.line_search_feasible(p, x, np.array([1.0, 0.0])) == 0.0


def test_line_search_descent_direction():
    assert solver.line_search_feasible(_ball_problem([0.0, 0.0]), np.zeros(2), np.array([-1.0, 0.0])) == 0.0


def test_objective_must_be_concave():
    with pytest.raises(ValueError):
        Objective(1, quad_idx=[[0]], quad_center=[[0.0]], quad_rho=-1.0)


def _random_problem(seed: int, n: int = 4):
    r = np.random.default_rng(seed)
    obj = Objective(n, linear=r.normal(size=n), quad_idx=np.arange(n)[:, None],
                    quad_center=r.normal(size=(n, 1)), quad_rho=r.uniform(0.0, 2.0, size=n))
    blocks = [solver.norm_ball(n, [list(range(n))], radius=r.uniform(1.0, 3.0)),
              solver.affine(n, r.normal(size=(3, n)), r.uniform(0.5, 2.0, size=3))]
    return ConvexSubproblem(n, obj, blocks, np.zeros(n))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_solve_is_feasible_monotone_and_deterministic(seed):
    p = _random_problem(seed)
    rep = solver.solve(p)
    assert rep.violation <= SolveOptions().feas_tol
    assert rep.value >= p.objective.value(p.x0) - 1e-12
    assert all(b >= a for a, b in zip(rep.history, rep.history[1:]))
    again = solver.solve(_random_problem(seed))
    np.testing.assert_array_equal(rep.x, again.x)
    assert rep.status == again.status == solver.OPTIMAL


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_solve_matches_slsqp_reference(seed):
    p = _random_problem(seed)
    rep = solver.solve(p)
    cons = {"type": "ineq", "fun": lambda x: -p.constraint_values(x)}
    ref = scipy.optimize.minimize(lambda x: -p.objective.value(x), p.x0, constraints=[cons],
                                  method="SLSQP", options={"ftol": 1e-12, "maxiter": 500})
    assert rep.value >= -ref.fun - 1e-5 * max(1.0, abs(ref.fun))
